//! Riding at full speed, then every sensor goes quiet. After the stale
//! threshold the controls read as zero and the vehicle brakes to a stop.

use micromobility_sim::course::CourseSpec;
use micromobility_sim::session::Session;
use micromobility_sim::wire::{Payload, ThrottlePayload, WireMessage};
use micromobility_sim::{SimConfig, Vehicle};

fn main() {
    let config = SimConfig {
        vehicle: Some(Vehicle::Escooter),
        course: CourseSpec::custom(vec![[0.0, 0.0], [500.0, 0.0]]),
        ..SimConfig::default()
    };
    let mut s = Session::new(config).unwrap();
    for seq in 1..=400 {
        s.ingest(&WireMessage::new(
            "throttle",
            seq,
            0,
            Payload::Throttle(ThrottlePayload { raw: 4095 }),
        ));
        s.tick();
    }
    let silent_from = s.tick_count();
    println!(
        "tick {silent_from}: speed {:.2} m/s, sensors go quiet",
        s.state().speed
    );
    loop {
        let out = s.tick();
        if (out.tick - silent_from) % 50 == 0 || out.state.speed == 0.0 {
            println!(
                "tick {}: speed {:.3} m/s, velocity_cmd {}",
                out.tick, out.state.speed, out.control.velocity_cmd
            );
        }
        if out.state.speed == 0.0 {
            println!(
                "stopped {:.2} s after the last sample",
                (out.tick - silent_from) as f64 * s.dt()
            );
            break;
        }
    }
}
