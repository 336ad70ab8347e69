//! Per-rider normalization: FSR baseline/max capture, throttle scaling, the
//! dead zone, and IMU zero offsets with per-vehicle axis alignment.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::fusion::{wrap_deg, OrientationEstimate};
use crate::vehicle::{PerVehicle, Vehicle};
use crate::wire::{FsrPayload, ADC_MAX};

/// Minimum samples for one FSR capture phase.
pub const MIN_CAPTURE_SAMPLES: usize = 10;

pub const DEFAULT_DEAD_ZONE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error("insufficient samples: got {got}, need at least {MIN_CAPTURE_SAMPLES}")]
    InsufficientSamples { got: usize },
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

/// Per-channel mean of the samples, rounded half away from zero.
pub fn capture_fsr(samples: &[FsrPayload]) -> Result<FsrPayload, CalibrationError> {
    let n = samples.len();
    if n < MIN_CAPTURE_SAMPLES {
        return Err(CalibrationError::InsufficientSamples { got: n });
    }
    let n = n as u64;
    let mean = |sum: u64| ((2 * sum + n) / (2 * n)) as u16;
    let front = samples.iter().map(|s| u64::from(s.front)).sum();
    let rear = samples.iter().map(|s| u64::from(s.rear)).sum();
    Ok(FsrPayload {
        front: mean(front),
        rear: mean(rear),
    })
}

/// Linear map of `raw` from `[baseline, max]` onto `[0, 1]`, clamped.
pub fn normalize_fsr(raw: u16, baseline: u16, max: u16) -> Result<f64, CalibrationError> {
    if max <= baseline {
        return Err(CalibrationError::InvalidBounds(format!(
            "max {max} must exceed baseline {baseline}"
        )));
    }
    let x = (f64::from(raw) - f64::from(baseline)) / (f64::from(max) - f64::from(baseline));
    Ok(x.clamp(0.0, 1.0))
}

/// Zero inside `[-t, t]`, then a linear ramp reaching ±1 at ±1.
pub fn dead_zone(x: f64, t: f64) -> f64 {
    let m = x.abs();
    if m <= t {
        0.0
    } else {
        ((m - t) / (1.0 - t)).copysign(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Pitch,
    Roll,
    Yaw,
}

impl Axis {
    const ALL: [Axis; 3] = [Axis::Pitch, Axis::Roll, Axis::Yaw];

    fn index(self) -> usize {
        self as usize
    }

    fn name(self) -> &'static str {
        match self {
            Axis::Pitch => "pitch",
            Axis::Roll => "roll",
            Axis::Yaw => "yaw",
        }
    }
}

/// A source axis with a sign, written `"roll"` or `"-roll"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SignedAxis {
    pub axis: Axis,
    pub negate: bool,
}

impl SignedAxis {
    pub const fn plus(axis: Axis) -> Self {
        SignedAxis {
            axis,
            negate: false,
        }
    }

    pub const fn minus(axis: Axis) -> Self {
        SignedAxis { axis, negate: true }
    }

    fn sign(self) -> f64 {
        if self.negate {
            -1.0
        } else {
            1.0
        }
    }
}

impl fmt::Display for SignedAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negate {
            f.write_str("-")?;
        }
        f.write_str(self.axis.name())
    }
}

impl FromStr for SignedAxis {
    type Err = CalibrationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (negate, name) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let axis = Axis::ALL
            .into_iter()
            .find(|a| a.name() == name)
            .ok_or_else(|| CalibrationError::InvalidProfile(format!("unknown axis '{s}'")))?;
        Ok(SignedAxis { axis, negate })
    }
}

impl TryFrom<String> for SignedAxis {
    type Error = CalibrationError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SignedAxis> for String {
    fn from(a: SignedAxis) -> String {
        a.to_string()
    }
}

/// Signed permutation: each output axis reads one signed input axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisMap {
    pub pitch: SignedAxis,
    pub roll: SignedAxis,
    pub yaw: SignedAxis,
}

impl Default for AxisMap {
    fn default() -> Self {
        AxisMap::IDENTITY
    }
}

impl AxisMap {
    pub const IDENTITY: AxisMap = AxisMap {
        pitch: SignedAxis::plus(Axis::Pitch),
        roll: SignedAxis::plus(Axis::Roll),
        yaw: SignedAxis::plus(Axis::Yaw),
    };

    fn outputs(&self) -> [SignedAxis; 3] {
        [self.pitch, self.roll, self.yaw]
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        let mut used = [false; 3];
        for s in self.outputs() {
            if std::mem::replace(&mut used[s.axis.index()], true) {
                return Err(CalibrationError::InvalidProfile(format!(
                    "axis map uses '{}' twice",
                    s.axis.name()
                )));
            }
        }
        Ok(())
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        self.outputs().map(|s| s.sign() * v[s.axis.index()])
    }

    /// The map undoing `self`.
    pub fn inverse(&self) -> AxisMap {
        let mut inv = [SignedAxis::plus(Axis::Pitch); 3];
        for (out, s) in Axis::ALL.into_iter().zip(self.outputs()) {
            inv[s.axis.index()] = SignedAxis {
                axis: out,
                negate: s.negate,
            };
        }
        AxisMap {
            pitch: inv[0],
            roll: inv[1],
            yaw: inv[2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Angles {
    pub pitch: f64,
    pub roll: f64,
    pub yaw: f64,
}

impl Angles {
    pub const ZERO: Angles = Angles {
        pitch: 0.0,
        roll: 0.0,
        yaw: 0.0,
    };

    pub fn new(pitch: f64, roll: f64, yaw: f64) -> Self {
        Angles { pitch, roll, yaw }
    }

    fn to_array(self) -> [f64; 3] {
        [self.pitch, self.roll, self.yaw]
    }

    fn from_array(a: [f64; 3]) -> Self {
        Angles::new(a[0], a[1], a[2])
    }
}

impl From<&OrientationEstimate> for Angles {
    fn from(e: &OrientationEstimate) -> Self {
        Angles::new(e.pitch, e.roll, e.yaw)
    }
}

/// Subtract the zero offsets, apply the signed permutation, wrap each axis
/// to (−180, 180].
pub fn align(euler: Angles, imu_zero: Angles, map: &AxisMap) -> Angles {
    let centered = [
        euler.pitch - imu_zero.pitch,
        euler.roll - imu_zero.roll,
        euler.yaw - imu_zero.yaw,
    ];
    Angles::from_array(map.apply(centered).map(wrap_deg))
}

/// Inverse of [`align`] for the same zero and map (angles modulo 360°).
pub fn unalign(aligned: Angles, imu_zero: Angles, map: &AxisMap) -> Angles {
    let raw = map.inverse().apply(aligned.to_array());
    Angles::new(
        wrap_deg(raw[0] + imu_zero.pitch),
        wrap_deg(raw[1] + imu_zero.roll),
        wrap_deg(raw[2] + imu_zero.yaw),
    )
}

/// Per-rider calibration. Axis alignment is held per vehicle configuration
/// since the IMU is mounted differently on each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationProfile {
    pub fsr_baseline_front: u16,
    pub fsr_baseline_rear: u16,
    pub fsr_max_front: u16,
    pub fsr_max_rear: u16,
    pub throttle_min: u16,
    pub throttle_max: u16,
    pub imu_zero: Angles,
    pub axis_map: PerVehicle<AxisMap>,
    pub dead_zone: f64,
}

impl Default for CalibrationProfile {
    fn default() -> Self {
        CalibrationProfile {
            fsr_baseline_front: 0,
            fsr_baseline_rear: 0,
            fsr_max_front: ADC_MAX,
            fsr_max_rear: ADC_MAX,
            throttle_min: 0,
            throttle_max: ADC_MAX,
            imu_zero: Angles::ZERO,
            axis_map: PerVehicle::from_fn(|_| AxisMap::IDENTITY),
            dead_zone: DEFAULT_DEAD_ZONE,
        }
    }
}

impl CalibrationProfile {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        if self.fsr_max_front <= self.fsr_baseline_front
            || self.fsr_max_rear <= self.fsr_baseline_rear
        {
            return Err(CalibrationError::InvalidBounds(
                "fsr max must exceed baseline on both channels".into(),
            ));
        }
        if self.throttle_max <= self.throttle_min {
            return Err(CalibrationError::InvalidBounds(
                "throttle_max must exceed throttle_min".into(),
            ));
        }
        if [self.fsr_max_front, self.fsr_max_rear, self.throttle_max]
            .iter()
            .any(|&v| v > ADC_MAX)
        {
            return Err(CalibrationError::InvalidBounds(
                "values exceed 12-bit range".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.dead_zone) {
            return Err(CalibrationError::InvalidProfile(format!(
                "dead_zone {} outside [0, 0.5)",
                self.dead_zone
            )));
        }
        let z = self.imu_zero;
        if ![z.pitch, z.roll, z.yaw].iter().all(|a| a.is_finite()) {
            return Err(CalibrationError::InvalidProfile(
                "imu_zero must be finite".into(),
            ));
        }
        for (_, m) in self.axis_map.iter() {
            m.validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, CalibrationError> {
        let p: CalibrationProfile = serde_json::from_str(text)
            .map_err(|e| CalibrationError::InvalidProfile(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    pub fn set_fsr_baseline(&mut self, b: FsrPayload) -> Result<(), CalibrationError> {
        if self.fsr_max_front <= b.front || self.fsr_max_rear <= b.rear {
            return Err(CalibrationError::InvalidBounds(format!(
                "baseline ({}, {}) not below max ({}, {})",
                b.front, b.rear, self.fsr_max_front, self.fsr_max_rear
            )));
        }
        self.fsr_baseline_front = b.front;
        self.fsr_baseline_rear = b.rear;
        Ok(())
    }

    pub fn set_fsr_max(&mut self, m: FsrPayload) -> Result<(), CalibrationError> {
        if m.front <= self.fsr_baseline_front || m.rear <= self.fsr_baseline_rear {
            return Err(CalibrationError::InvalidBounds(format!(
                "max ({}, {}) not above baseline ({}, {})",
                m.front, m.rear, self.fsr_baseline_front, self.fsr_baseline_rear
            )));
        }
        self.fsr_max_front = m.front;
        self.fsr_max_rear = m.rear;
        Ok(())
    }

    /// Normalized (front, rear) pressures.
    pub fn normalize_fsr(&self, s: FsrPayload) -> (f64, f64) {
        let f = normalize_fsr(s.front, self.fsr_baseline_front, self.fsr_max_front);
        let r = normalize_fsr(s.rear, self.fsr_baseline_rear, self.fsr_max_rear);
        (f.unwrap_or(0.0), r.unwrap_or(0.0))
    }

    pub fn normalize_throttle(&self, raw: u16) -> f64 {
        normalize_fsr(raw, self.throttle_min, self.throttle_max).unwrap_or(0.0)
    }

    pub fn align(&self, vehicle: Vehicle, e: &OrientationEstimate) -> Angles {
        align(e.into(), self.imu_zero, self.axis_map.get(vehicle))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fsr(front: u16, rear: u16) -> FsrPayload {
        FsrPayload { front, rear }
    }

    #[test]
    fn constant_baseline_mean() {
        let s = vec![fsr(100, 120); 12];
        assert_eq!(capture_fsr(&s).unwrap(), fsr(100, 120));
    }

    #[test]
    fn max_mean_of_two_levels() {
        let mut s = vec![fsr(3000, 3000); 5];
        s.extend(vec![fsr(3100, 3100); 5]);
        assert_eq!(capture_fsr(&s).unwrap(), fsr(3050, 3050));
    }

    #[test]
    fn mean_rounds_to_nearest() {
        let mut s = vec![fsr(10, 10); 9];
        s.push(fsr(15, 14)); // sums 105, 104 over 10
        assert_eq!(capture_fsr(&s).unwrap(), fsr(11, 10));
    }

    #[test]
    fn too_few_samples() {
        assert_eq!(
            capture_fsr(&[fsr(1, 1); 3]),
            Err(CalibrationError::InsufficientSamples { got: 3 })
        );
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_fsr(100, 100, 1100).unwrap(), 0.0);
        assert_eq!(normalize_fsr(1100, 100, 1100).unwrap(), 1.0);
        assert_eq!(normalize_fsr(600, 100, 1100).unwrap(), 0.5);
        assert_eq!(normalize_fsr(50, 100, 1100).unwrap(), 0.0);
        assert_eq!(normalize_fsr(4000, 100, 1100).unwrap(), 1.0);
        assert!(matches!(
            normalize_fsr(5, 100, 100),
            Err(CalibrationError::InvalidBounds(_))
        ));
    }

    #[test]
    fn dead_zone_examples() {
        assert_eq!(dead_zone(0.05, 0.10), 0.0);
        assert_eq!(dead_zone(1.0, 0.10), 1.0);
        assert!((dead_zone(0.55, 0.10) - 0.5).abs() < 1e-15);
        assert!((dead_zone(-0.55, 0.10) + 0.5).abs() < 1e-15);
        assert_eq!(dead_zone(0.10, 0.10), 0.0);
    }

    #[test]
    fn identity_alignment() {
        let a = Angles::new(5.0, -7.0, 33.0);
        assert_eq!(align(a, Angles::ZERO, &AxisMap::IDENTITY), a);
    }

    #[test]
    fn yaw_offset_is_subtracted() {
        let out = align(
            Angles::new(0.0, 0.0, 25.0),
            Angles::new(0.0, 0.0, 10.0),
            &AxisMap::IDENTITY,
        );
        assert_eq!(out.yaw, 15.0);
    }

    #[test]
    fn swapped_axes_with_sign() {
        let map = AxisMap {
            pitch: SignedAxis::minus(Axis::Roll),
            roll: SignedAxis::plus(Axis::Pitch),
            yaw: SignedAxis::plus(Axis::Yaw),
        };
        let out = align(Angles::new(5.0, 2.0, 0.0), Angles::ZERO, &map);
        assert_eq!((out.pitch, out.roll), (-2.0, 5.0));
    }

    #[test]
    fn axis_map_rejects_duplicates() {
        let map = AxisMap {
            pitch: SignedAxis::plus(Axis::Roll),
            roll: SignedAxis::minus(Axis::Roll),
            yaw: SignedAxis::plus(Axis::Yaw),
        };
        assert!(map.validate().is_err());
    }

    #[test]
    fn profile_json_round_trip_and_validation() {
        let mut p = CalibrationProfile::default();
        p.axis_map.skateboard = AxisMap {
            pitch: SignedAxis::minus(Axis::Roll),
            roll: SignedAxis::plus(Axis::Pitch),
            yaw: SignedAxis::plus(Axis::Yaw),
        };
        let text = p.to_json();
        assert!(text.contains("\"-roll\""));
        assert_eq!(CalibrationProfile::from_json(&text).unwrap(), p);
        assert!(CalibrationProfile::from_json(r#"{"dead_zone":0.6}"#).is_err());
        assert!(CalibrationProfile::from_json(r#"{"fsr_max_front":0}"#).is_err());
        assert!(CalibrationProfile::from_json(r#"{"bogus":1}"#).is_err());
        assert_eq!(
            CalibrationProfile::from_json("{}").unwrap(),
            CalibrationProfile::default()
        );
    }

    #[test]
    fn capture_bounds_are_checked() {
        let mut p = CalibrationProfile::default();
        p.set_fsr_baseline(fsr(100, 120)).unwrap();
        assert!(p.set_fsr_max(fsr(100, 3000)).is_err());
        p.set_fsr_max(fsr(3050, 3050)).unwrap();
        assert!(p.set_fsr_baseline(fsr(3050, 10)).is_err());
        assert_eq!(p.normalize_fsr(fsr(100, 3050)), (0.0, 1.0));
    }

    fn signed_axis_maps() -> impl Strategy<Value = AxisMap> {
        (0usize..6, any::<[bool; 3]>()).prop_map(|(perm, signs)| {
            let perms = [
                [0, 1, 2],
                [0, 2, 1],
                [1, 0, 2],
                [1, 2, 0],
                [2, 0, 1],
                [2, 1, 0],
            ];
            let p = perms[perm];
            let s = |i: usize| SignedAxis {
                axis: Axis::ALL[p[i]],
                negate: signs[i],
            };
            AxisMap {
                pitch: s(0),
                roll: s(1),
                yaw: s(2),
            }
        })
    }

    proptest! {
        #[test]
        fn normalize_is_monotone_and_clamped(a in 0u16..=4095, b in 0u16..=4095, base in 0u16..2000, span in 1u16..2000) {
            let max = base + span;
            let (lo, hi) = (a.min(b), a.max(b));
            let nlo = normalize_fsr(lo, base, max).unwrap();
            let nhi = normalize_fsr(hi, base, max).unwrap();
            prop_assert!(nlo <= nhi);
            prop_assert!((0.0..=1.0).contains(&nlo) && (0.0..=1.0).contains(&nhi));
        }

        #[test]
        fn dead_zone_is_odd_and_bounded(x in -1.0f64..=1.0, t in 0.0f64..0.5) {
            let y = dead_zone(x, t);
            prop_assert_eq!(dead_zone(-x, t), -y);
            prop_assert!(y.abs() <= 1.0);
            prop_assert_eq!(y == 0.0, x.abs() <= t);
            prop_assert_eq!(dead_zone(x, 0.0), x);
        }

        #[test]
        fn align_inverts(map in signed_axis_maps(), p in -170.0f64..170.0, r in -170.0f64..170.0, y in -170.0f64..170.0,
                         zp in -10.0f64..10.0, zr in -10.0f64..10.0, zy in -10.0f64..10.0) {
            prop_assert!(map.validate().is_ok());
            let zero = Angles::new(zp, zr, zy);
            let a = Angles::new(p, r, y);
            let back = unalign(align(a, zero, &map), zero, &map);
            prop_assert!((back.pitch - p).abs() < 1e-9);
            prop_assert!((back.roll - r).abs() < 1e-9);
            prop_assert!((back.yaw - y).abs() < 1e-9);
        }
    }
}
