//! Vehicle controllers: one memoryless mapping per vehicle from the held
//! sensor frame to a normalized steering/velocity command.
//!
//! | vehicle | steering source | velocity source |
//! |---|---|---|
//! | e-scooter | handlebar yaw | thumb throttle (forward only) |
//! | Segway | handlebar roll | front minus rear foot pressure |
//! | unicycle | platform yaw | platform pitch |
//! | skateboard | platform roll | platform pitch |

use serde::{Deserialize, Serialize};

use crate::calibration::{dead_zone, Angles, DEFAULT_DEAD_ZONE};
use crate::vehicle::{PerVehicle, Vehicle};

/// Ticks since the last update of each input channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Freshness {
    pub imu: u64,
    pub fsr: u64,
    pub throttle: u64,
}

impl Freshness {
    pub const NEVER: Freshness = Freshness {
        imu: u64::MAX,
        fsr: u64::MAX,
        throttle: u64::MAX,
    };
}

/// Latest value per channel, aligned and normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorFrame {
    pub orientation: Angles,
    pub fsr_front: f64,
    pub fsr_rear: f64,
    pub throttle: f64,
    pub freshness: Freshness,
}

impl Default for SensorFrame {
    fn default() -> Self {
        SensorFrame {
            orientation: Angles::ZERO,
            fsr_front: 0.0,
            fsr_rear: 0.0,
            throttle: 0.0,
            freshness: Freshness::NEVER,
        }
    }
}

/// Positive steering turns counter-clockwise; negative velocity is reverse.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub steering: f64,
    pub velocity_cmd: f64,
}

impl ControlInput {
    pub const REST: ControlInput = ControlInput {
        steering: 0.0,
        velocity_cmd: 0.0,
    };

    pub fn new(steering: f64, velocity_cmd: f64) -> Self {
        ControlInput {
            steering,
            velocity_cmd,
        }
    }
}

/// Angles (degrees) that produce a full-scale command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullScale {
    pub pitch: f64,
    pub roll: f64,
    pub yaw: f64,
}

impl FullScale {
    pub fn defaults() -> PerVehicle<FullScale> {
        PerVehicle {
            escooter: FullScale {
                pitch: 15.0,
                roll: 20.0,
                yaw: 45.0,
            },
            segway: FullScale {
                pitch: 15.0,
                roll: 20.0,
                yaw: 45.0,
            },
            unicycle: FullScale {
                pitch: 15.0,
                roll: 15.0,
                yaw: 30.0,
            },
            skateboard: FullScale {
                pitch: 15.0,
                roll: 15.0,
                yaw: 30.0,
            },
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.pitch, self.roll, self.yaw]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingParams {
    pub yaw_full_scale: f64,
    pub roll_full_scale: f64,
    pub pitch_full_scale: f64,
    pub dead_zone: f64,
}

impl MappingParams {
    pub fn new(fs: FullScale, dead_zone: f64) -> Self {
        MappingParams {
            yaw_full_scale: fs.yaw,
            roll_full_scale: fs.roll,
            pitch_full_scale: fs.pitch,
            dead_zone,
        }
    }

    pub fn for_vehicle(v: Vehicle) -> Self {
        MappingParams::new(*FullScale::defaults().get(v), DEFAULT_DEAD_ZONE)
    }

    fn axis(&self, angle: f64, full_scale: f64) -> f64 {
        dead_zone((angle / full_scale).clamp(-1.0, 1.0), self.dead_zone)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MappingError {
    #[error("no vehicle selected")]
    NoVehicleSelected,
}

pub fn map_escooter(frame: &SensorFrame, p: &MappingParams) -> ControlInput {
    ControlInput {
        steering: p.axis(frame.orientation.yaw, p.yaw_full_scale),
        velocity_cmd: frame.throttle.clamp(0.0, 1.0),
    }
}

pub fn map_segway(frame: &SensorFrame, p: &MappingParams) -> ControlInput {
    let lean = (frame.fsr_front - frame.fsr_rear).clamp(-1.0, 1.0);
    ControlInput {
        steering: p.axis(frame.orientation.roll, p.roll_full_scale),
        velocity_cmd: dead_zone(lean, p.dead_zone),
    }
}

pub fn map_unicycle(frame: &SensorFrame, p: &MappingParams) -> ControlInput {
    ControlInput {
        steering: p.axis(frame.orientation.yaw, p.yaw_full_scale),
        velocity_cmd: p.axis(frame.orientation.pitch, p.pitch_full_scale),
    }
}

pub fn map_skateboard(frame: &SensorFrame, p: &MappingParams) -> ControlInput {
    ControlInput {
        steering: p.axis(frame.orientation.roll, p.roll_full_scale),
        velocity_cmd: p.axis(frame.orientation.pitch, p.pitch_full_scale),
    }
}

/// Sensor channels a controller reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Pitch,
    Roll,
    Yaw,
    FsrFront,
    FsrRear,
    Throttle,
}

/// Common interface of the four vehicle controllers.
pub trait VehicleController: Send + Sync {
    fn vehicle(&self) -> Vehicle;
    fn channels(&self) -> &'static [Channel];
    fn map(&self, frame: &SensorFrame, params: &MappingParams) -> ControlInput;
}

macro_rules! controller {
    ($name:ident, $vehicle:expr, $f:path, [$($ch:ident),*]) => {
        pub struct $name;

        impl VehicleController for $name {
            fn vehicle(&self) -> Vehicle {
                $vehicle
            }

            fn channels(&self) -> &'static [Channel] {
                &[$(Channel::$ch),*]
            }

            fn map(&self, frame: &SensorFrame, params: &MappingParams) -> ControlInput {
                $f(frame, params)
            }
        }
    };
}

controller!(
    EscooterController,
    Vehicle::Escooter,
    map_escooter,
    [Yaw, Throttle]
);
controller!(
    SegwayController,
    Vehicle::Segway,
    map_segway,
    [Roll, FsrFront, FsrRear]
);
controller!(
    UnicycleController,
    Vehicle::Unicycle,
    map_unicycle,
    [Pitch, Yaw]
);
controller!(
    SkateboardController,
    Vehicle::Skateboard,
    map_skateboard,
    [Pitch, Roll]
);

pub fn controller_for(v: Vehicle) -> &'static dyn VehicleController {
    match v {
        Vehicle::Escooter => &EscooterController,
        Vehicle::Segway => &SegwayController,
        Vehicle::Unicycle => &UnicycleController,
        Vehicle::Skateboard => &SkateboardController,
    }
}

/// Dispatch the frame to exactly one controller.
pub fn active_controller(
    vehicle: Option<Vehicle>,
    frame: &SensorFrame,
    params: &MappingParams,
) -> Result<ControlInput, MappingError> {
    let v = vehicle.ok_or(MappingError::NoVehicleSelected)?;
    Ok(controller_for(v).map(frame, params))
}
