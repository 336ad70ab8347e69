//! Constant steering at constant speed traces a circle of radius
//! v / (steering · omega_max).

use micromobility_sim::dynamics::{step, VehicleParams, VehicleState};
use micromobility_sim::mapping::ControlInput;
use micromobility_sim::Vehicle;

fn main() {
    let params = VehicleParams::for_vehicle(Vehicle::Escooter);
    let (steering, speed, dt) = (0.5, 3.0, 0.001);
    let radius = speed / (steering * params.omega_max);
    let control = ControlInput::new(steering, speed / params.v_max);

    let mut s = VehicleState {
        speed,
        ..Default::default()
    };
    let steps = (std::f64::consts::TAU * radius / speed / dt).ceil() as usize;
    let mut worst: f64 = 0.0;
    for i in 1..=steps {
        s = step(&s, &control, &params, dt);
        let r = s.x.hypot(s.y - radius);
        worst = worst.max((r - radius).abs() / radius);
        if i % (steps / 8) == 0 {
            println!(
                "t={:>6.3}s  x={:>7.3} y={:>7.3} r={:.4}",
                i as f64 * dt,
                s.x,
                s.y,
                r
            );
        }
    }
    println!(
        "expected radius {radius:.3} m, worst radial error {:.4}%",
        worst * 100.0
    );
}
