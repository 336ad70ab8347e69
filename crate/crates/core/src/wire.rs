//! Framed message codec shared by sensor sources, the engine, and clients.
//!
//! One message is one JSON object on one line. Common fields come first
//! (`kind`, `sender`, `seq`, `t_ms`), followed by the kind-specific fields in
//! a fixed order, so encoding is deterministic. Decoding is strict: every kind
//! has exactly its listed fields and anything else is a [`WireError::SchemaViolation`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde_json::{Map, Value};

use crate::vehicle::Vehicle;

/// Upper bound of the 12-bit ADC used by FSR and throttle senders.
pub const ADC_MAX: u16 = 4095;

/// Longest accepted `sender` identifier, in bytes.
pub const MAX_SENDER_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("unknown kind '{0}'")]
    UnknownKind(String),
}

fn violation(msg: impl Into<String>) -> WireError {
    WireError::SchemaViolation(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Hello,
    Imu,
    Fsr,
    Throttle,
    SetVehicle,
    Calibrate,
    State,
    Event,
    Ack,
    Error,
}

impl Kind {
    pub const ALL: [Kind; 10] = [
        Kind::Hello,
        Kind::Imu,
        Kind::Fsr,
        Kind::Throttle,
        Kind::SetVehicle,
        Kind::Calibrate,
        Kind::State,
        Kind::Event,
        Kind::Ack,
        Kind::Error,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Hello => "hello",
            Kind::Imu => "imu",
            Kind::Fsr => "fsr",
            Kind::Throttle => "throttle",
            Kind::SetVehicle => "set_vehicle",
            Kind::Calibrate => "calibrate",
            Kind::State => "state",
            Kind::Event => "event",
            Kind::Ack => "ack",
            Kind::Error => "error",
        }
    }

    /// Kinds that carry sensor samples.
    pub fn is_sensor(self) -> bool {
        matches!(self, Kind::Imu | Kind::Fsr | Kind::Throttle)
    }

    /// Kinds only the engine emits.
    pub fn is_outbound(self) -> bool {
        matches!(self, Kind::State | Kind::Event | Kind::Ack | Kind::Error)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = WireError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Kind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| WireError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImuPayload {
    /// Orientation fused on the sender, degrees.
    Euler { pitch: f64, roll: f64, yaw: f64 },
    /// Raw 9-DoF sample: accel m/s², gyro deg/s, mag unit-free.
    Raw {
        accel: [f64; 3],
        gyro: [f64; 3],
        mag: [f64; 3],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FsrPayload {
    pub front: u16,
    pub rear: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThrottlePayload {
    pub raw: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CalibrationPhase {
    FsrBaselineBegin,
    FsrBaselineEnd,
    FsrMaxBegin,
    FsrMaxEnd,
    ImuZero,
}

impl CalibrationPhase {
    pub const ALL: [CalibrationPhase; 5] = [
        CalibrationPhase::FsrBaselineBegin,
        CalibrationPhase::FsrBaselineEnd,
        CalibrationPhase::FsrMaxBegin,
        CalibrationPhase::FsrMaxEnd,
        CalibrationPhase::ImuZero,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CalibrationPhase::FsrBaselineBegin => "fsr_baseline_begin",
            CalibrationPhase::FsrBaselineEnd => "fsr_baseline_end",
            CalibrationPhase::FsrMaxBegin => "fsr_max_begin",
            CalibrationPhase::FsrMaxEnd => "fsr_max_end",
            CalibrationPhase::ImuZero => "imu_zero",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventName {
    Coin,
    Collision,
    Respawn,
    TrialComplete,
    StaleDrop,
    Calibrated,
}

impl EventName {
    pub const ALL: [EventName; 6] = [
        EventName::Coin,
        EventName::Collision,
        EventName::Respawn,
        EventName::TrialComplete,
        EventName::StaleDrop,
        EventName::Calibrated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventName::Coin => "coin",
            EventName::Collision => "collision",
            EventName::Respawn => "respawn",
            EventName::TrialComplete => "trial_complete",
            EventName::StaleDrop => "stale_drop",
            EventName::Calibrated => "calibrated",
        }
    }
}

/// Outbound per-tick vehicle state.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePayload {
    pub tick: u64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub steering_cmd: f64,
    pub velocity_cmd: f64,
    pub coins_collected: u32,
    pub coins_total: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventPayload {
    pub tick: u64,
    pub name: EventName,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Hello,
    Imu(ImuPayload),
    Fsr(FsrPayload),
    Throttle(ThrottlePayload),
    SetVehicle(Vehicle),
    Calibrate(CalibrationPhase),
    State(StatePayload),
    Event(EventPayload),
    Ack { ref_seq: u64 },
    Error { ref_seq: u64, message: String },
}

impl Payload {
    pub fn kind(&self) -> Kind {
        match self {
            Payload::Hello => Kind::Hello,
            Payload::Imu(_) => Kind::Imu,
            Payload::Fsr(_) => Kind::Fsr,
            Payload::Throttle(_) => Kind::Throttle,
            Payload::SetVehicle(_) => Kind::SetVehicle,
            Payload::Calibrate(_) => Kind::Calibrate,
            Payload::State(_) => Kind::State,
            Payload::Event(_) => Kind::Event,
            Payload::Ack { .. } => Kind::Ack,
            Payload::Error { .. } => Kind::Error,
        }
    }
}

/// One framed message on the transport.
#[derive(Debug, Clone, PartialEq)]
pub struct WireMessage {
    pub sender: String,
    pub seq: u64,
    /// Sender clock in milliseconds. Informational; `seq` orders messages.
    pub t_ms: u64,
    pub payload: Payload,
}

impl WireMessage {
    pub fn new(sender: impl Into<String>, seq: u64, t_ms: u64, payload: Payload) -> Self {
        WireMessage {
            sender: sender.into(),
            seq,
            t_ms,
            payload,
        }
    }

    pub fn kind(&self) -> Kind {
        self.payload.kind()
    }

    pub fn validate(&self) -> Result<(), WireError> {
        if self.sender.is_empty() || self.sender.len() > MAX_SENDER_LEN {
            return Err(violation(format!(
                "sender must be 1..={MAX_SENDER_LEN} bytes"
            )));
        }
        match &self.payload {
            Payload::Imu(ImuPayload::Euler { pitch, roll, yaw }) => {
                for (name, a) in [("pitch", pitch), ("roll", roll), ("yaw", yaw)] {
                    if !a.is_finite() || a.abs() > 180.0 {
                        return Err(violation(format!(
                            "{name} must be finite with |{name}| <= 180"
                        )));
                    }
                }
            }
            Payload::Imu(ImuPayload::Raw { accel, gyro, mag }) => {
                if accel.iter().chain(gyro).chain(mag).any(|v| !v.is_finite()) {
                    return Err(violation("raw imu components must be finite"));
                }
            }
            Payload::Fsr(f) => {
                if f.front > ADC_MAX || f.rear > ADC_MAX {
                    return Err(violation("fsr values must be within 0..=4095"));
                }
            }
            Payload::Throttle(t) => {
                if t.raw > ADC_MAX {
                    return Err(violation("throttle raw must be within 0..=4095"));
                }
            }
            Payload::State(s) => {
                let floats = [s.x, s.y, s.heading, s.speed, s.steering_cmd, s.velocity_cmd];
                if floats.iter().any(|v| !v.is_finite()) {
                    return Err(violation("state values must be finite"));
                }
                if s.coins_collected > s.coins_total {
                    return Err(violation("coins_collected exceeds coins_total"));
                }
            }
            Payload::Hello
            | Payload::SetVehicle(_)
            | Payload::Calibrate(_)
            | Payload::Event(_)
            | Payload::Ack { .. }
            | Payload::Error { .. } => {}
        }
        Ok(())
    }

    /// Ordered JSON object for this message. Validates first.
    pub fn to_object(&self) -> Result<Map<String, Value>, WireError> {
        self.validate()?;
        let mut m = Map::new();
        m.insert("kind".into(), self.kind().as_str().into());
        m.insert("sender".into(), self.sender.clone().into());
        m.insert("seq".into(), self.seq.into());
        m.insert("t_ms".into(), self.t_ms.into());
        match &self.payload {
            Payload::Hello => {}
            Payload::Imu(ImuPayload::Euler { pitch, roll, yaw }) => {
                m.insert("mode".into(), "euler".into());
                m.insert("pitch".into(), (*pitch).into());
                m.insert("roll".into(), (*roll).into());
                m.insert("yaw".into(), (*yaw).into());
            }
            Payload::Imu(ImuPayload::Raw { accel, gyro, mag }) => {
                m.insert("mode".into(), "raw".into());
                for (names, v) in [(RAW_ACCEL, accel), (RAW_GYRO, gyro), (RAW_MAG, mag)] {
                    for (name, x) in names.iter().zip(v) {
                        m.insert((*name).into(), (*x).into());
                    }
                }
            }
            Payload::Fsr(f) => {
                m.insert("front".into(), f.front.into());
                m.insert("rear".into(), f.rear.into());
            }
            Payload::Throttle(t) => {
                m.insert("raw".into(), t.raw.into());
            }
            Payload::SetVehicle(v) => {
                m.insert("vehicle".into(), v.as_str().into());
            }
            Payload::Calibrate(p) => {
                m.insert("phase".into(), p.as_str().into());
            }
            Payload::State(s) => {
                m.insert("tick".into(), s.tick.into());
                m.insert("x".into(), s.x.into());
                m.insert("y".into(), s.y.into());
                m.insert("heading".into(), s.heading.into());
                m.insert("speed".into(), s.speed.into());
                m.insert("steering_cmd".into(), s.steering_cmd.into());
                m.insert("velocity_cmd".into(), s.velocity_cmd.into());
                m.insert("coins_collected".into(), s.coins_collected.into());
                m.insert("coins_total".into(), s.coins_total.into());
            }
            Payload::Event(e) => {
                m.insert("tick".into(), e.tick.into());
                m.insert("name".into(), e.name.as_str().into());
                m.insert("detail".into(), e.detail.clone().into());
            }
            Payload::Ack { ref_seq } => {
                m.insert("ref_seq".into(), (*ref_seq).into());
            }
            Payload::Error { ref_seq, message } => {
                m.insert("ref_seq".into(), (*ref_seq).into());
                m.insert("message".into(), message.clone().into());
            }
        }
        Ok(m)
    }

    /// Parse an already-decoded JSON object.
    pub fn from_object(obj: &Map<String, Value>) -> Result<Self, WireError> {
        let kind = match obj.get("kind") {
            Some(Value::String(s)) => s.parse::<Kind>()?,
            Some(_) => return Err(violation("kind must be a string")),
            None => return Err(violation("missing field 'kind'")),
        };
        let mut fields = Fields::new(obj);
        fields.take("kind");
        let sender = fields.string("sender")?;
        let seq = fields.u64("seq")?;
        let t_ms = fields.u64("t_ms")?;
        let payload = match kind {
            Kind::Hello => Payload::Hello,
            Kind::Imu => {
                let mode = fields.string("mode")?;
                match mode.as_str() {
                    "euler" => Payload::Imu(ImuPayload::Euler {
                        pitch: fields.f64("pitch")?,
                        roll: fields.f64("roll")?,
                        yaw: fields.f64("yaw")?,
                    }),
                    "raw" => Payload::Imu(ImuPayload::Raw {
                        accel: fields.vec3(RAW_ACCEL)?,
                        gyro: fields.vec3(RAW_GYRO)?,
                        mag: fields.vec3(RAW_MAG)?,
                    }),
                    other => return Err(violation(format!("unknown imu mode '{other}'"))),
                }
            }
            Kind::Fsr => Payload::Fsr(FsrPayload {
                front: fields.adc("front")?,
                rear: fields.adc("rear")?,
            }),
            Kind::Throttle => Payload::Throttle(ThrottlePayload {
                raw: fields.adc("raw")?,
            }),
            Kind::SetVehicle => {
                let v = fields.string("vehicle")?;
                Payload::SetVehicle(
                    v.parse()
                        .map_err(|e: crate::vehicle::UnknownVehicle| violation(e.to_string()))?,
                )
            }
            Kind::Calibrate => {
                let p = fields.string("phase")?;
                let phase = CalibrationPhase::ALL
                    .into_iter()
                    .find(|c| c.as_str() == p)
                    .ok_or_else(|| violation(format!("unknown calibration phase '{p}'")))?;
                Payload::Calibrate(phase)
            }
            Kind::State => Payload::State(StatePayload {
                tick: fields.u64("tick")?,
                x: fields.f64("x")?,
                y: fields.f64("y")?,
                heading: fields.f64("heading")?,
                speed: fields.f64("speed")?,
                steering_cmd: fields.f64("steering_cmd")?,
                velocity_cmd: fields.f64("velocity_cmd")?,
                coins_collected: fields.u32("coins_collected")?,
                coins_total: fields.u32("coins_total")?,
            }),
            Kind::Event => {
                let tick = fields.u64("tick")?;
                let n = fields.string("name")?;
                let name = EventName::ALL
                    .into_iter()
                    .find(|e| e.as_str() == n)
                    .ok_or_else(|| violation(format!("unknown event name '{n}'")))?;
                Payload::Event(EventPayload {
                    tick,
                    name,
                    detail: fields.string("detail")?,
                })
            }
            Kind::Ack => Payload::Ack {
                ref_seq: fields.u64("ref_seq")?,
            },
            Kind::Error => Payload::Error {
                ref_seq: fields.u64("ref_seq")?,
                message: fields.string("message")?,
            },
        };
        fields.finish()?;
        let msg = WireMessage {
            sender,
            seq,
            t_ms,
            payload,
        };
        msg.validate()?;
        Ok(msg)
    }
}

const RAW_ACCEL: &[&str; 3] = &["ax", "ay", "az"];
const RAW_GYRO: &[&str; 3] = &["gx", "gy", "gz"];
const RAW_MAG: &[&str; 3] = &["mx", "my", "mz"];

/// Tracks which object keys have been consumed so leftovers can be rejected.
struct Fields<'a> {
    obj: &'a Map<String, Value>,
    seen: Vec<&'a str>,
}

impl<'a> Fields<'a> {
    fn new(obj: &'a Map<String, Value>) -> Self {
        Fields {
            obj,
            seen: Vec::new(),
        }
    }

    fn take(&mut self, name: &'static str) -> Option<&'a Value> {
        let (k, v) = self.obj.get_key_value(name)?;
        self.seen.push(k.as_str());
        Some(v)
    }

    fn required(&mut self, name: &'static str) -> Result<&'a Value, WireError> {
        self.take(name)
            .ok_or_else(|| violation(format!("missing field '{name}'")))
    }

    fn string(&mut self, name: &'static str) -> Result<String, WireError> {
        match self.required(name)? {
            Value::String(s) => Ok(s.clone()),
            _ => Err(violation(format!("field '{name}' must be a string"))),
        }
    }

    fn u64(&mut self, name: &'static str) -> Result<u64, WireError> {
        self.required(name)?
            .as_u64()
            .ok_or_else(|| violation(format!("field '{name}' must be an unsigned integer")))
    }

    fn u32(&mut self, name: &'static str) -> Result<u32, WireError> {
        u32::try_from(self.u64(name)?)
            .map_err(|_| violation(format!("field '{name}' out of range")))
    }

    fn adc(&mut self, name: &'static str) -> Result<u16, WireError> {
        let v = self.u64(name)?;
        if v > u64::from(ADC_MAX) {
            return Err(violation(format!("field '{name}' must be within 0..=4095")));
        }
        Ok(v as u16)
    }

    fn f64(&mut self, name: &'static str) -> Result<f64, WireError> {
        self.required(name)?
            .as_f64()
            .ok_or_else(|| violation(format!("field '{name}' must be a number")))
    }

    fn vec3(&mut self, names: &'static [&'static str; 3]) -> Result<[f64; 3], WireError> {
        Ok([
            self.f64(names[0])?,
            self.f64(names[1])?,
            self.f64(names[2])?,
        ])
    }

    fn finish(self) -> Result<(), WireError> {
        if let Some(extra) = self.obj.keys().find(|k| !self.seen.contains(&k.as_str())) {
            return Err(violation(format!("unexpected field '{extra}'")));
        }
        Ok(())
    }
}

/// Encode one message as a newline-terminated frame.
pub fn encode(msg: &WireMessage) -> Result<String, WireError> {
    let mut s = encode_compact(msg)?;
    s.push('\n');
    Ok(s)
}

/// Encode without the trailing newline (used for message transports and log payloads).
pub fn encode_compact(msg: &WireMessage) -> Result<String, WireError> {
    let obj = msg.to_object()?;
    serde_json::to_string(&obj).map_err(|e| violation(e.to_string()))
}

/// Decode one frame. A single trailing `\n` (or `\r\n`) is accepted.
pub fn decode(frame: &[u8]) -> Result<WireMessage, WireError> {
    let body = frame
        .strip_suffix(b"\n")
        .map(|b| b.strip_suffix(b"\r").unwrap_or(b))
        .unwrap_or(frame);
    if body.contains(&b'\n') {
        return Err(WireError::MalformedFrame("embedded newline".into()));
    }
    let value: Value =
        serde_json::from_slice(body).map_err(|e| WireError::MalformedFrame(e.to_string()))?;
    match value {
        Value::Object(obj) => WireMessage::from_object(&obj),
        _ => Err(WireError::MalformedFrame("frame is not an object".into())),
    }
}

pub fn decode_str(frame: &str) -> Result<WireMessage, WireError> {
    decode(frame.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Staleness {
    Accept,
    Drop,
}

/// Accept iff `msg.seq` is newer than the highest accepted seq for its sender.
pub fn staleness_check(last_seq: Option<u64>, msg: &WireMessage) -> Staleness {
    match last_seq {
        Some(last) if msg.seq <= last => Staleness::Drop,
        _ => Staleness::Accept,
    }
}

/// Highest accepted seq per sender.
#[derive(Debug, Clone, Default)]
pub struct SeqTable {
    last: BTreeMap<String, u64>,
}

impl SeqTable {
    pub fn last_seq(&self, sender: &str) -> Option<u64> {
        self.last.get(sender).copied()
    }

    /// Runs [`staleness_check`] and records the seq when accepted.
    pub fn admit(&mut self, msg: &WireMessage) -> Staleness {
        let verdict = staleness_check(self.last_seq(&msg.sender), msg);
        if verdict == Staleness::Accept {
            self.last.insert(msg.sender.clone(), msg.seq);
        }
        verdict
    }

    /// Forget the sender's history and start over from `seq`.
    pub fn restart(&mut self, sender: &str, seq: u64) {
        self.last.insert(sender.to_string(), seq);
    }
}
