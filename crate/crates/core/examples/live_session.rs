//! A live session on loopback: a sensor client connects, picks a vehicle,
//! rides for two seconds, and watches the state stream.

use std::time::Duration;

use micromobility_sim::live::{self, LiveOptions, SensorClient};
use micromobility_sim::wire::{ImuPayload, Kind, Payload, ThrottlePayload};
use micromobility_sim::{SimConfig, Vehicle};

fn main() {
    let handle = live::start(
        SimConfig::default(),
        LiveOptions::new("127.0.0.1:0".parse().unwrap()),
    )
    .unwrap();
    println!("engine on {}", handle.local_addr());

    let mut rig = SensorClient::connect(handle.local_addr(), "scooter-rig").unwrap();
    rig.send_payload(0, Payload::Hello).unwrap();
    rig.send_payload(0, Payload::SetVehicle(Vehicle::Escooter))
        .unwrap();
    for k in 0..200u64 {
        rig.send_payload(k * 10, Payload::Throttle(ThrottlePayload { raw: 3000 }))
            .unwrap();
        let yaw = if k > 100 { 15.0 } else { 0.0 };
        rig.send_payload(
            k * 10,
            Payload::Imu(ImuPayload::Euler {
                pitch: 0.0,
                roll: 0.0,
                yaw,
            }),
        )
        .unwrap();
        std::thread::sleep(Duration::from_millis(10));
    }

    let received = rig.drain();
    let acks = received.iter().filter(|m| m.kind() == Kind::Ack).count();
    let states: Vec<_> = received
        .iter()
        .filter(|m| m.kind() == Kind::State)
        .collect();
    println!("{acks} acks, {} state messages", states.len());
    if let Some(last) = states.last() {
        if let Payload::State(s) = &last.payload {
            println!(
                "last state: tick {} at ({:.2}, {:.2}) speed {:.2}",
                s.tick, s.x, s.y, s.speed
            );
        }
    }
    handle.stop();
    println!("{:?}", handle.join().unwrap());
}
