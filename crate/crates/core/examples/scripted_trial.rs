//! Generate the bundled centerline trace for a route and run it as the only
//! input. Pass a route number (1-4) as the first argument.

use micromobility_sim::course::CourseSpec;
use micromobility_sim::trace::{centerline_trace, run_script, RiderSpec};
use micromobility_sim::SimConfig;

fn main() {
    let route: u8 = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(1);
    let config = SimConfig {
        course: CourseSpec::builtin(route),
        ..SimConfig::default()
    };
    let rider = RiderSpec::bundled(route).unwrap();
    let trace = centerline_trace(&config, &rider).unwrap();
    println!(
        "route {route}, {} rider, {} trace entries",
        rider.vehicle,
        trace.len()
    );

    let (summary, _) = run_script::<Vec<u8>>(config, &trace, 30_000, None).unwrap();
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
}
