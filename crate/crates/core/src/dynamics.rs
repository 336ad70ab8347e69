//! Fixed-timestep kinematic vehicle model with corridor collisions and
//! instant respawn.
//!
//! The model is kinematic: speed slews toward `velocity_cmd · v_max` at a
//! bounded rate and heading turns at `steering · omega_max` independent of
//! speed. Failure handling never rotates the vehicle away from the route
//! tangent; it stops the vehicle and puts it back on the centerline.

use serde::{Deserialize, Serialize};

use crate::course::{CourseGeometry, Point, RouteTracker};
use crate::fusion::wrap_rad;
use crate::mapping::ControlInput;
use crate::vehicle::{PerVehicle, Vehicle};

/// How far behind the current progress a respawn point is searched for, metres.
const RESPAWN_LOOKBACK: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    /// m/s
    pub v_max: f64,
    /// m/s²
    pub a_accel: f64,
    /// m/s²
    pub a_decel: f64,
    /// rad/s
    pub omega_max: f64,
}

impl VehicleParams {
    pub fn defaults() -> PerVehicle<VehicleParams> {
        PerVehicle::from_fn(|v| VehicleParams {
            v_max: match v {
                Vehicle::Escooter => 6.0,
                Vehicle::Segway => 3.5,
                Vehicle::Unicycle => 5.0,
                Vehicle::Skateboard => 5.5,
            },
            a_accel: 2.0,
            a_decel: 3.0,
            omega_max: 1.2,
        })
    }

    pub fn for_vehicle(v: Vehicle) -> Self {
        *VehicleParams::defaults().get(v)
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [self.v_max, self.a_accel, self.a_decel, self.omega_max];
        if !all.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err("vehicle parameters must be finite and positive".into());
        }
        if self.a_decel < self.a_accel {
            return Err("a_decel must be at least a_accel".into());
        }
        Ok(())
    }
}

/// Pose and speed. Heading in radians, (−π, π], zero along +x.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub tick: u64,
}

impl VehicleState {
    pub fn at_rest(position: Point, heading: f64, tick: u64) -> Self {
        VehicleState {
            x: position[0],
            y: position[1],
            heading: wrap_rad(heading),
            speed: 0.0,
            tick,
        }
    }

    pub fn position(&self) -> Point {
        [self.x, self.y]
    }
}

/// Advance one tick.
pub fn step(s: &VehicleState, c: &ControlInput, p: &VehicleParams, dt: f64) -> VehicleState {
    let target = c.velocity_cmd.clamp(-1.0, 1.0) * p.v_max;
    let speeding_up =
        target.abs() > s.speed.abs() && (s.speed == 0.0 || target.signum() == s.speed.signum());
    let rate = if speeding_up { p.a_accel } else { p.a_decel };
    let max_delta = rate * dt;
    let diff = target - s.speed;
    let speed = if diff.abs() <= max_delta {
        target
    } else {
        s.speed + max_delta.copysign(diff)
    }
    .clamp(-p.v_max, p.v_max);

    let heading = wrap_rad(s.heading + c.steering.clamp(-1.0, 1.0) * p.omega_max * dt);
    let (sin, cos) = heading.sin_cos();
    VehicleState {
        x: s.x + speed * dt * cos,
        y: s.y + speed * dt * sin,
        heading,
        speed,
        tick: s.tick + 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEvent {
    /// Distance from the centerline at the time of the collision.
    pub offset: f64,
    pub position: Point,
}

/// A collision is any departure from the route corridor.
pub fn check_collision(s: &VehicleState, course: &CourseGeometry) -> Option<CollisionEvent> {
    let offset = course.distance_to_centerline(s.position());
    (offset > course.half_width()).then_some(CollisionEvent {
        offset,
        position: s.position(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Respawn {
    pub state: VehicleState,
    /// Arc position the vehicle was put back at.
    pub arc: f64,
}

/// Stop the vehicle and put it on the centerline at or behind its progress,
/// facing along the route.
pub fn resolve_fail(
    s: &VehicleState,
    course: &CourseGeometry,
    tracker: &mut RouteTracker,
) -> Respawn {
    let progress = tracker.progress();
    let proj = course.project_within(s.position(), progress - RESPAWN_LOOKBACK, progress);
    tracker.reset_to(proj.arc);
    Respawn {
        state: VehicleState {
            x: proj.point[0],
            y: proj.point[1],
            heading: course.heading_at(proj.arc),
            speed: 0.0,
            tick: s.tick,
        },
        arc: proj.arc,
    }
}
