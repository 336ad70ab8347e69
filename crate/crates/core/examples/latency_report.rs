//! Two seconds of live traffic on loopback, logged, then the
//! receipt-to-state latency histogram from that log.

use std::time::Duration;

use micromobility_sim::live::{self, LiveOptions, SensorClient};
use micromobility_sim::telemetry::{latency_stats, RunLog};
use micromobility_sim::wire::{ImuPayload, Payload};
use micromobility_sim::{SimConfig, Vehicle};

fn main() {
    let log = std::env::temp_dir().join(format!("mmsim-latency-{}.log", std::process::id()));
    let mut opts = LiveOptions::new("127.0.0.1:0".parse().unwrap());
    opts.log = Some(log.clone());
    let config = SimConfig {
        vehicle: Some(Vehicle::Unicycle),
        ..SimConfig::default()
    };
    let handle = live::start(config, opts).unwrap();

    let mut imu = SensorClient::connect(handle.local_addr(), "imu").unwrap();
    for k in 0..400u64 {
        imu.send_payload(
            k * 5,
            Payload::Imu(ImuPayload::Euler {
                pitch: 8.0,
                roll: 0.0,
                yaw: 0.0,
            }),
        )
        .unwrap();
        std::thread::sleep(Duration::from_millis(5));
    }
    handle.stop();
    handle.join().unwrap();

    let run = RunLog::read_path(&log).unwrap();
    let stats = latency_stats(&run).unwrap();
    let tick_ms = 1000.0 / f64::from(run.header.config.tick_rate);
    println!(
        "{} samples: median {:.3} ms, p95 {:.3} ms, max {:.3} ms (tick {tick_ms} ms)",
        stats.samples, stats.median_ms, stats.p95_ms, stats.max_ms
    );
    for (from, count) in &stats.histogram {
        println!(
            "{from:>3} ms | {}",
            "#".repeat((count * 60 / stats.samples).max(1))
        );
    }
    let _ = std::fs::remove_file(log);
}
