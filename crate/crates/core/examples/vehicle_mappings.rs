//! One sensor frame, four controllers.

use micromobility_sim::calibration::Angles;
use micromobility_sim::mapping::{controller_for, Freshness, MappingParams, SensorFrame};
use micromobility_sim::Vehicle;

fn main() {
    let frame = SensorFrame {
        orientation: Angles::new(9.0, -6.0, 20.0),
        fsr_front: 0.8,
        fsr_rear: 0.3,
        throttle: 0.45,
        freshness: Freshness {
            imu: 0,
            fsr: 0,
            throttle: 0,
        },
    };
    println!("frame: {frame:?}\n");
    println!(
        "{:<11} {:<28} {:>9} {:>9}",
        "vehicle", "reads", "steering", "velocity"
    );
    for v in Vehicle::ALL {
        let c = controller_for(v);
        let out = c.map(&frame, &MappingParams::for_vehicle(v));
        let reads = format!("{:?}", c.channels());
        println!(
            "{:<11} {reads:<28} {:>9.4} {:>9.4}",
            v.as_str(),
            out.steering,
            out.velocity_cmd
        );
    }
}
