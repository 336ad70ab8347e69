//! The two-phase foot-pressure calibration as an operator would run it over
//! the wire, followed by a few normalized readings.

use micromobility_sim::session::Session;
use micromobility_sim::wire::{CalibrationPhase, FsrPayload, Payload, WireMessage};
use micromobility_sim::{SimConfig, Vehicle};

fn main() {
    let mut s = Session::new(SimConfig {
        vehicle: Some(Vehicle::Segway),
        ..SimConfig::default()
    })
    .unwrap();
    let mut seq = 0;
    let mut send = |s: &mut Session, p: Payload| {
        seq += 1;
        s.ingest(&WireMessage::new("operator", seq, 0, p))
    };

    send(
        &mut s,
        Payload::Calibrate(CalibrationPhase::FsrBaselineBegin),
    );
    for k in 0..15u16 {
        send(
            &mut s,
            Payload::Fsr(FsrPayload {
                front: 200 + k % 4,
                rear: 260 - k % 3,
            }),
        );
    }
    send(&mut s, Payload::Calibrate(CalibrationPhase::FsrBaselineEnd));

    send(&mut s, Payload::Calibrate(CalibrationPhase::FsrMaxBegin));
    for k in 0..15u16 {
        send(
            &mut s,
            Payload::Fsr(FsrPayload {
                front: 3500 + k,
                rear: 3300 - k,
            }),
        );
    }
    send(&mut s, Payload::Calibrate(CalibrationPhase::FsrMaxEnd));

    let p = s.profile();
    println!(
        "baseline front {} rear {}",
        p.fsr_baseline_front, p.fsr_baseline_rear
    );
    println!("max      front {} rear {}", p.fsr_max_front, p.fsr_max_rear);

    for (front, rear) in [(201, 259), (1850, 260), (3507, 1700), (4095, 0)] {
        let (f, r) = p.normalize_fsr(FsrPayload { front, rear });
        println!("raw ({front:>4}, {rear:>4}) -> ({f:.3}, {r:.3})");
    }

    // an end without enough samples is refused
    send(
        &mut s,
        Payload::Calibrate(CalibrationPhase::FsrBaselineBegin),
    );
    let r = send(&mut s, Payload::Calibrate(CalibrationPhase::FsrBaselineEnd));
    println!("{:?}", r.outcome);
}
