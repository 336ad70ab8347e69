//! Orientation from a static accelerometer/magnetometer sample, then jitter
//! smoothing across the ±180° yaw seam.

use micromobility_sim::calibration::Angles;
use micromobility_sim::fusion::{estimate_static, FilterState, OrientationEstimate};
use micromobility_sim::trace::static_pose_vectors;

fn main() {
    // level and pointing along magnetic north
    let e = estimate_static([0.0, 0.0, 9.81], [0.3, 0.0, -0.4]).unwrap();
    println!(
        "level: pitch {:.2} roll {:.2} yaw {:.2}",
        e.pitch, e.roll, e.yaw
    );

    let pose = Angles::new(12.0, -7.5, 135.0);
    let (accel, mag) = static_pose_vectors(pose);
    let e = estimate_static(accel, mag).unwrap();
    println!("tilted: accel {accel:.3?} mag {mag:.3?}");
    println!(
        "  -> pitch {:.6} roll {:.6} yaw {:.6}",
        e.pitch, e.roll, e.yaw
    );

    println!(
        "free fall: {}",
        estimate_static([0.0, 0.0, 0.2], [0.3, 0.0, -0.4]).unwrap_err()
    );

    let mut f = FilterState::new(0.2).unwrap();
    for yaw in [179.0, -179.0, -179.0, -179.0, -179.0] {
        let s = f.smooth(OrientationEstimate::onboard(0.0, 0.0, yaw));
        println!("raw yaw {yaw:>7.1} -> smoothed {:>8.3}", s.yaw);
    }
}
