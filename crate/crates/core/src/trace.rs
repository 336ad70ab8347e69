//! Scripted input traces.
//!
//! A trace file is newline-delimited JSON, one `{"tick":N,"msg":{...}}` per
//! line. Each message is ingested just before tick `N` runs, so a trace is a
//! complete, clock-free description of what the sensors sent.
//!
//! [`centerline_trace`] writes a trace by riding the course with a
//! pure-pursuit rider: each tick it reads the pose, picks a steering and
//! velocity command, and turns those back into the raw sensor messages the
//! selected vehicle would need to produce them. [`off_corridor_trace`] holds
//! full lock until the vehicle leaves the corridor, over and over.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::calibration::{unalign, Angles};
use crate::config::SimConfig;
use crate::course::{CourseSpec, TrialPhase};
use crate::dynamics::VehicleState;
use crate::fusion::{wrap_rad, STANDARD_GRAVITY};
use crate::session::Session;
use crate::telemetry::{LogError, LogWriter, RecordedSession};
use crate::vehicle::Vehicle;
use crate::wire::{
    decode_str, encode_compact, CalibrationPhase, EventName, FsrPayload, ImuPayload, Payload,
    ThrottlePayload, WireMessage, ADC_MAX,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TraceError {
    #[error("trace line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("trace line {line}: tick {tick} is before tick {previous}")]
    NonMonotonic {
        line: usize,
        tick: u64,
        previous: u64,
    },
    #[error("trace i/o failure: {0}")]
    Io(String),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("trace generation: {0}")]
    Generate(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScriptedTrace {
    /// `(tick, message)`, ticks non-decreasing.
    pub entries: Vec<(u64, WireMessage)>,
}

impl ScriptedTrace {
    pub fn push(&mut self, tick: u64, msg: WireMessage) {
        debug_assert!(self.entries.last().map_or(true, |(t, _)| *t <= tick));
        self.entries.push((tick, msg));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_tick(&self) -> u64 {
        self.entries.last().map_or(0, |(t, _)| *t)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), TraceError> {
        for (tick, msg) in &self.entries {
            let m = encode_compact(msg).map_err(|e| TraceError::Generate(e.to_string()))?;
            writeln!(w, "{{\"tick\":{tick},\"msg\":{m}}}")
                .map_err(|e| TraceError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| TraceError::Io(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), TraceError> {
        let f = std::fs::File::create(path)
            .map_err(|e| TraceError::Io(format!("{}: {e}", path.display())))?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self, TraceError> {
        #[derive(serde::Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Line<'a> {
            tick: u64,
            #[serde(borrow)]
            msg: &'a serde_json::value::RawValue,
        }
        let mut trace = ScriptedTrace::default();
        for (i, line) in r.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| TraceError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line).map_err(|e| TraceError::Parse {
                line: line_no,
                reason: e.to_string(),
            })?;
            let msg = decode_str(parsed.msg.get()).map_err(|e| TraceError::Parse {
                line: line_no,
                reason: e.to_string(),
            })?;
            let previous = trace.last_tick();
            if parsed.tick < previous {
                return Err(TraceError::NonMonotonic {
                    line: line_no,
                    tick: parsed.tick,
                    previous,
                });
            }
            trace.entries.push((parsed.tick, msg));
        }
        Ok(trace)
    }

    pub fn load(path: &Path) -> Result<Self, TraceError> {
        let f = std::fs::File::open(path)
            .map_err(|e| TraceError::Io(format!("{}: {e}", path.display())))?;
        ScriptedTrace::read(std::io::BufReader::new(f))
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ScriptSummary {
    pub ticks: u64,
    pub vehicle: Option<Vehicle>,
    pub phase: TrialPhase,
    pub completed: bool,
    pub coins_collected: u32,
    pub coins_total: u32,
    pub duration_ticks: Option<u64>,
    pub progress: f64,
    pub collisions: u32,
    pub respawns: u32,
    pub stale_drops: u32,
    pub final_x: f64,
    pub final_y: f64,
    pub final_speed: f64,
}

/// Run `trace` as the only input. Stops when the trial ends or after
/// `max_ticks` ticks, whichever comes first.
pub fn run_script<W: Write>(
    config: SimConfig,
    trace: &ScriptedTrace,
    max_ticks: u64,
    log: Option<LogWriter<W>>,
) -> Result<(ScriptSummary, Option<W>), TraceError> {
    let session = Session::new(config).map_err(|e| TraceError::Generate(e.to_string()))?;
    let period_ms = 1000.0 * session.dt();
    let mut rs = RecordedSession::new(session, log);
    let mut counts = [0u32; 3];
    let mut next = trace.entries.iter().peekable();
    while rs.session().tick_count() < max_ticks && !rs.session().trial().phase.is_terminal() {
        let tick = rs.session().tick_count() + 1;
        let t = tick as f64 * period_ms;
        while let Some((_, msg)) = next.next_if(|(t, _)| *t <= tick) {
            rs.ingest(msg, t)?;
        }
        let out = rs.tick(t)?;
        for ev in &out.events {
            if let Payload::Event(e) = &ev.payload {
                match e.name {
                    EventName::Collision => counts[0] += 1,
                    EventName::Respawn => counts[1] += 1,
                    EventName::StaleDrop => counts[2] += 1,
                    _ => {}
                }
            }
        }
    }
    let (session, out) = rs.finish()?;
    let s = session.state();
    let trial = session.trial();
    Ok((
        ScriptSummary {
            ticks: session.tick_count(),
            vehicle: session.vehicle(),
            phase: trial.phase,
            completed: trial.phase == TrialPhase::Complete,
            coins_collected: session.coins().collected(),
            coins_total: session.coins().total(),
            duration_ticks: trial.duration_ticks(),
            progress: session.progress(),
            collisions: counts[0],
            respawns: counts[1],
            stale_drops: counts[2],
            final_x: s.x,
            final_y: s.y,
            final_speed: s.speed,
        },
        out,
    ))
}

/// How the rider's IMU reports orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImuMode {
    Euler,
    /// Raw accelerometer and magnetometer vectors for a static pose.
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiderSpec {
    pub route: u8,
    pub vehicle: Vehicle,
    pub imu_mode: ImuMode,
    /// Run the two-phase FSR capture before riding.
    pub fsr_calibration: bool,
    /// Sensor mounting offset; when set the rider captures `imu_zero` first.
    pub mount_offset: Option<Angles>,
    /// Cruise command as a fraction of `v_max`.
    pub cruise: f64,
    pub max_ticks: u64,
}

impl RiderSpec {
    /// The stock rider for each built-in route.
    pub fn bundled(route: u8) -> Result<Self, TraceError> {
        let base = RiderSpec {
            route,
            vehicle: Vehicle::Escooter,
            imu_mode: ImuMode::Euler,
            fsr_calibration: false,
            mount_offset: None,
            cruise: 0.7,
            max_ticks: 20_000,
        };
        Ok(match route {
            1 => base,
            2 => RiderSpec {
                vehicle: Vehicle::Segway,
                fsr_calibration: true,
                ..base
            },
            3 => RiderSpec {
                vehicle: Vehicle::Unicycle,
                imu_mode: ImuMode::Raw,
                ..base
            },
            4 => RiderSpec {
                vehicle: Vehicle::Skateboard,
                mount_offset: Some(Angles::new(2.0, -1.5, 30.0)),
                ..base
            },
            r => {
                return Err(TraceError::Generate(format!(
                    "no bundled rider for route {r}"
                )))
            }
        })
    }
}

/// Inverse of the dead-zone ramp for outputs in [-1, 1].
fn undo_dead_zone(s: f64, t: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.signum() * (t + (1.0 - t) * s.abs().min(1.0))
    }
}

/// Body-frame accelerometer and magnetometer readings for a static pose.
pub fn static_pose_vectors(o: Angles) -> ([f64; 3], [f64; 3]) {
    let (sp, cp) = o.pitch.to_radians().sin_cos();
    let (sr, cr) = o.roll.to_radians().sin_cos();
    let (sy, cy) = o.yaw.to_radians().sin_cos();
    let g = STANDARD_GRAVITY;
    let accel = [-g * sp, g * cp * sr, g * cp * cr];
    // levelled field: horizontal (cos yaw, -sin yaw), dipping downward
    let (hx, hy, hz) = (0.25 * cy, -0.25 * sy, -0.4);
    let mx = cp * hx - sp * hz;
    let u = sp * hx + cp * hz;
    let my = cr * hy + sr * u;
    let mz = -sr * hy + cr * u;
    (accel, [mx, my, mz])
}

struct Senders {
    seqs: [u64; 4],
}

impl Senders {
    const NAMES: [&'static str; 4] = ["imu", "fsr", "throttle", "operator"];

    fn msg(&mut self, who: usize, tick: u64, dt_ms: f64, payload: Payload) -> WireMessage {
        self.seqs[who] += 1;
        let t_ms = (tick as f64 * dt_ms) as u64;
        WireMessage::new(Self::NAMES[who], self.seqs[who], t_ms, payload)
    }
}

const IMU: usize = 0;
const FSR: usize = 1;
const THROTTLE: usize = 2;
const OPERATOR: usize = 3;

/// Generates a trace while driving a private session with it.
struct Rider {
    session: Session,
    trace: ScriptedTrace,
    senders: Senders,
    dt_ms: f64,
}

impl Rider {
    fn send(&mut self, who: usize, payload: Payload) {
        let tick = self.session.tick_count() + 1;
        let msg = self.senders.msg(who, tick, self.dt_ms, payload);
        self.session.ingest(&msg);
        self.trace.push(tick, msg);
    }

    fn tick(&mut self) {
        self.session.tick();
    }
}

/// Pure-pursuit steering and velocity commands for the current pose.
fn pursue(session: &Session, vehicle: Vehicle, cruise: f64) -> (f64, f64) {
    let course = session.course();
    let s: &VehicleState = session.state();
    let params = session.config().vehicles.get(vehicle);
    let total = course.total_length();
    let look = 3.0;
    let target_arc = session.progress() + look;
    let target = if target_arc <= total {
        course.point_at(target_arc)
    } else {
        let end = course.point_at(total);
        let h = course.heading_at(total);
        let extra = target_arc - total;
        [end[0] + extra * h.cos(), end[1] + extra * h.sin()]
    };
    let (dx, dy) = (target[0] - s.x, target[1] - s.y);
    let dist = dx.hypot(dy).max(1e-6);
    let alpha = wrap_rad(dy.atan2(dx) - s.heading);
    let curvature = 2.0 * alpha.sin() / dist;
    let v = s.speed.abs().max(0.5);
    let steering = (curvature * v / params.omega_max).clamp(-1.0, 1.0);
    (steering, cruise)
}

/// Ride the course along its centerline and record the sensor traffic.
pub fn centerline_trace(base: &SimConfig, rider: &RiderSpec) -> Result<ScriptedTrace, TraceError> {
    let config = SimConfig {
        vehicle: None,
        course: CourseSpec {
            route: Some(rider.route),
            points: None,
            ..base.course.clone()
        },
        ..base.clone()
    };
    let session = Session::new(config).map_err(|e| TraceError::Generate(e.to_string()))?;
    let dt_ms = 1000.0 * session.dt();
    let mut r = Rider {
        session,
        trace: ScriptedTrace::default(),
        senders: Senders { seqs: [0; 4] },
        dt_ms,
    };
    let v = rider.vehicle;
    for who in [IMU, FSR, THROTTLE, OPERATOR] {
        r.send(who, Payload::Hello);
    }

    if rider.fsr_calibration {
        let phases = [
            (
                CalibrationPhase::FsrBaselineBegin,
                CalibrationPhase::FsrBaselineEnd,
                (180u16, 240u16),
            ),
            (
                CalibrationPhase::FsrMaxBegin,
                CalibrationPhase::FsrMaxEnd,
                (3600, 3450),
            ),
        ];
        for (begin, end, (front, rear)) in phases {
            r.send(OPERATOR, Payload::Calibrate(begin));
            for k in 0..20u16 {
                let wobble = k % 3;
                r.send(
                    FSR,
                    Payload::Fsr(FsrPayload {
                        front: front + wobble,
                        rear: rear - wobble,
                    }),
                );
                r.tick();
            }
            r.send(OPERATOR, Payload::Calibrate(end));
            r.tick();
        }
    }

    let imu_for = |r: &Rider, aligned: Angles, mount: Angles| -> Payload {
        let map = r.session.profile().axis_map.get(v);
        let raw = unalign(aligned, mount, map);
        match rider.imu_mode {
            ImuMode::Euler => Payload::Imu(ImuPayload::Euler {
                pitch: raw.pitch,
                roll: raw.roll,
                yaw: raw.yaw,
            }),
            ImuMode::Raw => {
                let (accel, mag) = static_pose_vectors(raw);
                Payload::Imu(ImuPayload::Raw {
                    accel,
                    gyro: [0.0; 3],
                    mag,
                })
            }
        }
    };

    let mount = rider.mount_offset.unwrap_or(Angles::ZERO);
    if rider.mount_offset.is_some() {
        for _ in 0..60 {
            let p = imu_for(&r, Angles::ZERO, mount);
            r.send(IMU, p);
            r.tick();
        }
        r.send(OPERATOR, Payload::Calibrate(CalibrationPhase::ImuZero));
        r.tick();
    }

    r.send(OPERATOR, Payload::SetVehicle(v));
    let fs = *r.session.config().mapping.get(v);
    let dz = r.session.profile().dead_zone;
    while !r.session.trial().phase.is_terminal() {
        if r.session.tick_count() >= rider.max_ticks {
            return Err(TraceError::Generate(format!(
                "route {} not finished within {} ticks",
                rider.route, rider.max_ticks
            )));
        }
        let (steer, vel) = pursue(&r.session, v, rider.cruise);
        let steer = undo_dead_zone(steer, dz);
        // the thumb throttle has no dead zone
        let vel = if v == Vehicle::Escooter {
            vel
        } else {
            undo_dead_zone(vel, dz)
        };
        let aligned = match v {
            Vehicle::Escooter => Angles::new(0.0, 0.0, steer * fs.yaw),
            Vehicle::Segway => Angles::new(0.0, steer * fs.roll, 0.0),
            Vehicle::Unicycle => Angles::new(vel * fs.pitch, 0.0, steer * fs.yaw),
            Vehicle::Skateboard => Angles::new(vel * fs.pitch, steer * fs.roll, 0.0),
        };
        let p = imu_for(&r, aligned, mount);
        r.send(IMU, p);
        let tick = r.session.tick_count() + 1;
        match v {
            Vehicle::Escooter if tick % 2 == 0 => {
                let prof = r.session.profile();
                let span = f64::from(prof.throttle_max - prof.throttle_min);
                let raw = (f64::from(prof.throttle_min) + vel * span).round() as u16;
                r.send(
                    THROTTLE,
                    Payload::Throttle(ThrottlePayload {
                        raw: raw.min(ADC_MAX),
                    }),
                );
            }
            Vehicle::Segway if tick % 2 == 0 => {
                let prof = r.session.profile();
                let front = f64::from(prof.fsr_baseline_front)
                    + vel * f64::from(prof.fsr_max_front - prof.fsr_baseline_front);
                r.send(
                    FSR,
                    Payload::Fsr(FsrPayload {
                        front: front.round() as u16,
                        rear: prof.fsr_baseline_rear,
                    }),
                );
            }
            _ => {}
        }
        r.tick();
    }
    Ok(r.trace)
}

/// E-scooter at full throttle and full steering lock for `ticks` ticks.
pub fn off_corridor_trace(base: &SimConfig, ticks: u64) -> Result<ScriptedTrace, TraceError> {
    let tick_rate = base.tick_rate;
    let mut trace = ScriptedTrace::default();
    let mut senders = Senders { seqs: [0; 4] };
    let dt_ms = 1000.0 / f64::from(tick_rate);
    let fs = base.mapping.get(Vehicle::Escooter);
    trace.push(1, senders.msg(OPERATOR, 1, dt_ms, Payload::Hello));
    trace.push(
        1,
        senders.msg(OPERATOR, 1, dt_ms, Payload::SetVehicle(Vehicle::Escooter)),
    );
    for tick in 1..=ticks {
        let yaw = fs.yaw;
        trace.push(
            tick,
            senders.msg(
                IMU,
                tick,
                dt_ms,
                Payload::Imu(ImuPayload::Euler {
                    pitch: 0.0,
                    roll: 0.0,
                    yaw,
                }),
            ),
        );
        trace.push(
            tick,
            senders.msg(
                THROTTLE,
                tick,
                dt_ms,
                Payload::Throttle(ThrottlePayload { raw: ADC_MAX }),
            ),
        );
    }
    Ok(trace)
}
