use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The four supported vehicle configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vehicle {
    Escooter,
    Segway,
    Unicycle,
    Skateboard,
}

impl Vehicle {
    pub const ALL: [Vehicle; 4] = [
        Vehicle::Escooter,
        Vehicle::Segway,
        Vehicle::Unicycle,
        Vehicle::Skateboard,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Vehicle::Escooter => "escooter",
            Vehicle::Segway => "segway",
            Vehicle::Unicycle => "unicycle",
            Vehicle::Skateboard => "skateboard",
        }
    }

    /// Whether the controller may emit a negative velocity command.
    pub fn allows_reverse(self) -> bool {
        !matches!(self, Vehicle::Escooter)
    }
}

impl fmt::Display for Vehicle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown vehicle '{0}' (valid: escooter, segway, unicycle, skateboard)")]
pub struct UnknownVehicle(pub String);

impl FromStr for Vehicle {
    type Err = UnknownVehicle;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Vehicle::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| UnknownVehicle(s.to_string()))
    }
}

/// A value per vehicle, used for per-vehicle parameter tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerVehicle<T> {
    pub escooter: T,
    pub segway: T,
    pub unicycle: T,
    pub skateboard: T,
}

impl<T> PerVehicle<T> {
    pub fn from_fn(mut f: impl FnMut(Vehicle) -> T) -> Self {
        PerVehicle {
            escooter: f(Vehicle::Escooter),
            segway: f(Vehicle::Segway),
            unicycle: f(Vehicle::Unicycle),
            skateboard: f(Vehicle::Skateboard),
        }
    }

    pub fn get(&self, v: Vehicle) -> &T {
        match v {
            Vehicle::Escooter => &self.escooter,
            Vehicle::Segway => &self.segway,
            Vehicle::Unicycle => &self.unicycle,
            Vehicle::Skateboard => &self.skateboard,
        }
    }

    pub fn get_mut(&mut self, v: Vehicle) -> &mut T {
        match v {
            Vehicle::Escooter => &mut self.escooter,
            Vehicle::Segway => &mut self.segway,
            Vehicle::Unicycle => &mut self.unicycle,
            Vehicle::Skateboard => &mut self.skateboard,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vehicle, &T)> {
        Vehicle::ALL.into_iter().map(move |v| (v, self.get(v)))
    }
}
