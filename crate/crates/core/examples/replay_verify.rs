//! Record a scripted run to a log, replay it with verification, then show
//! that a single edited byte is caught.

use micromobility_sim::course::CourseSpec;
use micromobility_sim::telemetry::{replay, LogWriter, RunLog};
use micromobility_sim::trace::{centerline_trace, run_script, RiderSpec};
use micromobility_sim::SimConfig;

fn main() {
    let config = SimConfig {
        course: CourseSpec::builtin(3),
        ..SimConfig::default()
    };
    let trace = centerline_trace(&config, &RiderSpec::bundled(3).unwrap()).unwrap();
    let log = LogWriter::new(Vec::new(), &config).unwrap();
    let (summary, bytes) = run_script(config, &trace, 30_000, Some(log)).unwrap();
    let bytes = bytes.unwrap();
    println!(
        "recorded {} ticks, {} bytes of log",
        summary.ticks,
        bytes.len()
    );

    let run = RunLog::read(bytes.as_slice()).unwrap();
    let report = replay(&run, None, true).unwrap();
    println!(
        "verify: {}",
        if report.divergence.is_none() {
            "identical"
        } else {
            "divergent"
        }
    );

    let text = String::from_utf8(bytes).unwrap();
    let needle = "\"tick\":2500,";
    let line_start = text.find(&format!("{{{needle}")).unwrap();
    let state_at = line_start + text[line_start..].find("\"speed\":").unwrap() + 8;
    let mut edited = text.into_bytes();
    edited[state_at] = if edited[state_at] == b'1' { b'2' } else { b'1' };
    let run = RunLog::read(edited.as_slice()).unwrap();
    match replay(&run, None, true).unwrap().divergence {
        Some(d) => println!(
            "edited log: divergent at tick {}\n  logged   {}\n  replayed {}",
            d.tick, d.logged, d.replayed
        ),
        None => println!("edited log: identical (edit missed)"),
    }
}
