//! Orientation from raw accelerometer/magnetometer samples, plus the
//! exponential smoothing applied to every orientation stream.
//!
//! Frame convention: body x forward, y left, z up. A level, resting sensor
//! reads `accel = (0, 0, +g)`. Positive pitch tips the nose down (forward
//! lean), positive yaw is counter-clockwise seen from above, and yaw zero is
//! the magnetic field's horizontal direction.

use serde::{Deserialize, Serialize};

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Default EMA factor per 100 Hz sample.
pub const DEFAULT_ALPHA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrientationSource {
    Onboard,
    Computed,
}

/// Orientation in degrees. `|pitch| <= 90`, `|roll| <= 180`, yaw in (−180, 180].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationEstimate {
    pub pitch: f64,
    pub roll: f64,
    pub yaw: f64,
    pub source: OrientationSource,
}

impl OrientationEstimate {
    pub fn onboard(pitch: f64, roll: f64, yaw: f64) -> Self {
        OrientationEstimate {
            pitch,
            roll,
            yaw: wrap_deg(yaw),
            source: OrientationSource::Onboard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FusionError {
    #[error("accelerometer magnitude {0:.4} m/s² below free-fall guard; orientation undefined")]
    DegenerateInput(f64),
    #[error("smoothing factor {0} outside (0, 1]")]
    InvalidAlpha(f64),
}

/// Wrap an angle in degrees to (−180, 180].
pub fn wrap_deg(a: f64) -> f64 {
    let mut r = a % 360.0;
    if r <= -180.0 {
        r += 360.0;
    } else if r > 180.0 {
        r -= 360.0;
    }
    // normalizes -0.0
    r + 0.0
}

/// Wrap an angle in radians to (−π, π].
pub fn wrap_rad(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut r = a % TAU;
    if r <= -PI {
        r += TAU;
    } else if r > PI {
        r -= TAU;
    }
    r + 0.0
}

/// Signed shortest difference `to − from` in degrees, in (−180, 180].
pub fn angle_diff_deg(from: f64, to: f64) -> f64 {
    wrap_deg(to - from)
}

/// Static tilt from gravity and tilt-compensated heading from the magnetometer.
pub fn estimate_static(accel: [f64; 3], mag: [f64; 3]) -> Result<OrientationEstimate, FusionError> {
    let [ax, ay, az] = accel;
    let norm = (ax * ax + ay * ay + az * az).sqrt();
    if !(norm >= 0.1 * STANDARD_GRAVITY) {
        return Err(FusionError::DegenerateInput(norm));
    }
    let pitch = (-ax).atan2((ay * ay + az * az).sqrt());
    let roll = ay.atan2(az);

    let [mx, my, mz] = mag;
    let (sp, cp) = pitch.sin_cos();
    let (sr, cr) = roll.sin_cos();
    // de-rotate the field into the horizontal plane
    let hx = cp * mx + sp * (sr * my + cr * mz);
    let hy = cr * my - sr * mz;
    let yaw = (-hy).atan2(hx);

    Ok(OrientationEstimate {
        pitch: pitch.to_degrees(),
        roll: roll.to_degrees(),
        yaw: wrap_deg(yaw.to_degrees()),
        source: OrientationSource::Computed,
    })
}

/// First-order EMA over an orientation stream.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    last: Option<OrientationEstimate>,
    alpha: f64,
}

impl Default for FilterState {
    fn default() -> Self {
        FilterState {
            last: None,
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl FilterState {
    pub fn new(alpha: f64) -> Result<Self, FusionError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(FusionError::InvalidAlpha(alpha));
        }
        Ok(FilterState { last: None, alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn last(&self) -> Option<&OrientationEstimate> {
        self.last.as_ref()
    }

    pub fn reset(&mut self) {
        self.last = None;
    }

    /// Blend `obs` into the running estimate. The first call returns `obs`.
    ///
    /// Pitch blends linearly; roll and yaw blend along the shortest arc.
    pub fn smooth(&mut self, obs: OrientationEstimate) -> OrientationEstimate {
        let out = match self.last {
            None => obs,
            Some(last) => {
                let a = self.alpha;
                OrientationEstimate {
                    pitch: a * obs.pitch + (1.0 - a) * last.pitch,
                    roll: wrap_deg(last.roll + a * angle_diff_deg(last.roll, obs.roll)),
                    yaw: wrap_deg(last.yaw + a * angle_diff_deg(last.yaw, obs.yaw)),
                    source: obs.source,
                }
            }
        };
        self.last = Some(out);
        out
    }
}
