//! Append-only run log, replay and latency statistics.
//!
//! A log is newline-delimited JSON. The first line is a [`LogHeader`] with the
//! full effective configuration; every following line is a [`Record`]:
//!
//! ```text
//! {"tick":12,"t_mono_ms":118.204,"stream":"sensor_in","payload":{...}}
//! ```
//!
//! Within one tick the streams appear as `sensor_in* control state event*`.
//! `sensor_in` payloads are the decoded inbound messages (commands included);
//! `state` and `event` payloads are the encoded outbound messages, so replay
//! can compare them byte for byte.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::config::SimConfig;
use crate::course::TrialPhase;
use crate::dynamics::VehicleState;
use crate::mapping::ControlInput;
use crate::session::{Ingested, Session, TickOutput};
use crate::wire::{decode_str, encode_compact, WireMessage};

pub const LOG_FORMAT: &str = "mmsim-log";
pub const LOG_FORMAT_VERSION: u32 = 1;
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LogError {
    #[error("log i/o failure: {0}")]
    IoFailure(String),
    #[error("log format version {found} not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("configuration mismatch: log has {log}, replay has {replay}")]
    ConfigMismatch { log: String, replay: String },
    #[error("corrupt log at line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error("record out of order: {0}")]
    OrderingViolation(String),
}

impl From<io::Error> for LogError {
    fn from(e: io::Error) -> Self {
        LogError::IoFailure(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    SensorIn,
    Control,
    State,
    Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogHeader {
    pub format: String,
    pub format_version: u32,
    pub engine_version: String,
    pub config_hash: String,
    pub config: SimConfig,
}

impl LogHeader {
    pub fn new(config: &SimConfig) -> Self {
        LogHeader {
            format: LOG_FORMAT.to_string(),
            format_version: LOG_FORMAT_VERSION,
            engine_version: ENGINE_VERSION.to_string(),
            config_hash: config.hash(),
            config: config.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub tick: u64,
    pub t_mono_ms: f64,
    pub stream: Stream,
    pub payload: Box<RawValue>,
}

#[derive(Serialize)]
struct ControlRecord {
    steering: f64,
    velocity_cmd: f64,
}

/// Round to whole microseconds so timestamps stay short in the log.
fn round_ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

/// Writes records and enforces the per-tick stream order.
pub struct LogWriter<W: Write> {
    out: W,
    tick: u64,
    last: Option<Stream>,
    tick_has_state: bool,
}

impl LogWriter<BufWriter<File>> {
    pub fn create(path: &Path, config: &SimConfig) -> Result<Self, LogError> {
        let f = File::create(path)
            .map_err(|e| LogError::IoFailure(format!("{}: {e}", path.display())))?;
        LogWriter::new(BufWriter::new(f), config)
    }
}

impl<W: Write> LogWriter<W> {
    pub fn new(mut out: W, config: &SimConfig) -> Result<Self, LogError> {
        let header = serde_json::to_string(&LogHeader::new(config)).expect("header serializes");
        writeln!(out, "{header}")?;
        Ok(LogWriter {
            out,
            tick: 0,
            last: None,
            tick_has_state: true,
        })
    }

    fn check_order(&mut self, tick: u64, stream: Stream) -> Result<(), LogError> {
        if tick < self.tick {
            return Err(LogError::OrderingViolation(format!(
                "tick {tick} after tick {}",
                self.tick
            )));
        }
        if tick > self.tick {
            if !self.tick_has_state {
                return Err(LogError::OrderingViolation(format!(
                    "tick {} has no state record",
                    self.tick
                )));
            }
            self.tick = tick;
            self.last = None;
            self.tick_has_state = false;
        }
        let ok = match (self.last, stream) {
            (_, Stream::SensorIn) => matches!(self.last, None | Some(Stream::SensorIn)),
            (None | Some(Stream::SensorIn), Stream::Control) => true,
            (Some(Stream::Control), Stream::State) => true,
            (Some(Stream::State | Stream::Event), Stream::Event) => true,
            _ => false,
        };
        if !ok {
            return Err(LogError::OrderingViolation(format!(
                "{stream:?} after {:?} in tick {tick}",
                self.last
            )));
        }
        self.last = Some(stream);
        if stream == Stream::State {
            self.tick_has_state = true;
        }
        Ok(())
    }

    fn write(
        &mut self,
        tick: u64,
        t_mono_ms: f64,
        stream: Stream,
        payload: &str,
    ) -> Result<(), LogError> {
        self.check_order(tick, stream)?;
        let t = serde_json::to_string(&round_ms(t_mono_ms)).expect("finite time");
        let stream = serde_json::to_string(&stream).expect("stream serializes");
        writeln!(
            self.out,
            "{{\"tick\":{tick},\"t_mono_ms\":{t},\"stream\":{stream},\"payload\":{payload}}}"
        )?;
        Ok(())
    }

    /// Log an inbound message that will be consumed by `tick`.
    pub fn record_inbound(
        &mut self,
        tick: u64,
        t_mono_ms: f64,
        msg: &WireMessage,
    ) -> Result<(), LogError> {
        let payload = encode_compact(msg).map_err(|e| LogError::IoFailure(e.to_string()))?;
        self.write(tick, t_mono_ms, Stream::SensorIn, &payload)
    }

    pub fn record_tick(&mut self, out: &TickOutput, t_mono_ms: f64) -> Result<(), LogError> {
        let control = serde_json::to_string(&ControlRecord {
            steering: out.control.steering,
            velocity_cmd: out.control.velocity_cmd,
        })
        .expect("control serializes");
        self.write(out.tick, t_mono_ms, Stream::Control, &control)?;
        let state =
            encode_compact(&out.state_msg).map_err(|e| LogError::IoFailure(e.to_string()))?;
        self.write(out.tick, t_mono_ms, Stream::State, &state)?;
        for ev in &out.events {
            let ev = encode_compact(ev).map_err(|e| LogError::IoFailure(e.to_string()))?;
            self.write(out.tick, t_mono_ms, Stream::Event, &ev)?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), LogError> {
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(mut self) -> Result<W, LogError> {
        self.flush()?;
        Ok(self.out)
    }
}

/// A [`Session`] whose inputs and outputs are logged as they happen.
pub struct RecordedSession<W: Write> {
    session: Session,
    log: Option<LogWriter<W>>,
}

impl<W: Write> RecordedSession<W> {
    pub fn new(session: Session, log: Option<LogWriter<W>>) -> Self {
        RecordedSession { session, log }
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn session_mut(&mut self) -> &mut Session {
        &mut self.session
    }

    pub fn ingest(&mut self, msg: &WireMessage, t_mono_ms: f64) -> Result<Ingested, LogError> {
        if let Some(log) = &mut self.log {
            log.record_inbound(self.session.tick_count() + 1, t_mono_ms, msg)?;
        }
        Ok(self.session.ingest(msg))
    }

    pub fn tick(&mut self, t_mono_ms: f64) -> Result<TickOutput, LogError> {
        let out = self.session.tick();
        if let Some(log) = &mut self.log {
            log.record_tick(&out, t_mono_ms)?;
        }
        Ok(out)
    }

    pub fn flush(&mut self) -> Result<(), LogError> {
        match &mut self.log {
            Some(log) => log.flush(),
            None => Ok(()),
        }
    }

    pub fn finish(self) -> Result<(Session, Option<W>), LogError> {
        let out = self.log.map(LogWriter::into_inner).transpose()?;
        Ok((self.session, out))
    }
}

/// A parsed log.
#[derive(Debug)]
pub struct RunLog {
    pub header: LogHeader,
    pub records: Vec<Record>,
}

impl RunLog {
    pub fn read_path(path: &Path) -> Result<Self, LogError> {
        let f = File::open(path)
            .map_err(|e| LogError::IoFailure(format!("{}: {e}", path.display())))?;
        RunLog::read(f)
    }

    /// Parse a log. A final line without a newline that does not parse is
    /// taken as a write cut short and ignored; any other bad line is corrupt.
    pub fn read<R: Read>(r: R) -> Result<Self, LogError> {
        let mut reader = BufReader::new(r);
        let mut lines = Vec::new();
        loop {
            let mut buf = String::new();
            let n = reader.read_line(&mut buf)?;
            if n == 0 {
                break;
            }
            let complete = buf.ends_with('\n');
            let text = buf.trim_end_matches(['\n', '\r']).to_string();
            lines.push((text, complete));
        }
        let Some(((head, _), rest)) = lines.split_first() else {
            return Err(LogError::CorruptLog {
                line: 1,
                reason: "empty log".into(),
            });
        };
        let probe: serde_json::Value =
            serde_json::from_str(head).map_err(|e| LogError::CorruptLog {
                line: 1,
                reason: format!("header: {e}"),
            })?;
        let version = probe.get("format_version").and_then(|v| v.as_u64());
        if probe.get("format").and_then(|v| v.as_str()) != Some(LOG_FORMAT) {
            return Err(LogError::CorruptLog {
                line: 1,
                reason: "not a run log".into(),
            });
        }
        if version != Some(u64::from(LOG_FORMAT_VERSION)) {
            return Err(LogError::VersionMismatch {
                found: version.unwrap_or_default() as u32,
                expected: LOG_FORMAT_VERSION,
            });
        }
        let header: LogHeader =
            serde_json::from_value(probe).map_err(|e| LogError::CorruptLog {
                line: 1,
                reason: format!("header: {e}"),
            })?;
        if header.config.hash() != header.config_hash {
            return Err(LogError::CorruptLog {
                line: 1,
                reason: "config hash does not match embedded config".into(),
            });
        }
        let mut records = Vec::with_capacity(rest.len());
        let last = rest.len().saturating_sub(1);
        for (i, (text, complete)) in rest.iter().enumerate() {
            match serde_json::from_str::<Record>(text) {
                Ok(r) => records.push(r),
                Err(_) if i == last && !complete => break,
                Err(e) => {
                    return Err(LogError::CorruptLog {
                        line: i + 2,
                        reason: e.to_string(),
                    })
                }
            }
        }
        Ok(RunLog { header, records })
    }

    /// Records grouped by tick, in file order.
    pub fn ticks(&self) -> BTreeMap<u64, Vec<&Record>> {
        let mut map: BTreeMap<u64, Vec<&Record>> = BTreeMap::new();
        for r in &self.records {
            map.entry(r.tick).or_default().push(r);
        }
        map
    }

    /// Final logged state payload, if any.
    pub fn last_state(&self) -> Option<&Record> {
        self.records
            .iter()
            .rev()
            .find(|r| r.stream == Stream::State)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub tick: u64,
    pub stream: Stream,
    pub logged: String,
    pub replayed: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub ticks: u64,
    pub inbound: u64,
    pub state: VehicleState,
    pub control: ControlInput,
    pub coins_collected: u32,
    pub coins_total: u32,
    pub phase: TrialPhase,
    /// First mismatch, when verifying.
    pub divergence: Option<Divergence>,
}

/// Re-run a log through a fresh session.
///
/// With `verify`, every replayed state and event message must match the logged
/// payload text exactly; replay stops at the first mismatch.
pub fn replay(
    log: &RunLog,
    config: Option<&SimConfig>,
    verify: bool,
) -> Result<ReplayReport, LogError> {
    if let Some(c) = config {
        if c.hash() != log.header.config_hash {
            return Err(LogError::ConfigMismatch {
                log: log.header.config_hash.clone(),
                replay: c.hash(),
            });
        }
    }
    let mut session =
        Session::new(log.header.config.clone()).map_err(|e| LogError::CorruptLog {
            line: 1,
            reason: e.to_string(),
        })?;
    let mut inbound = 0;
    let mut divergence = None;
    let mut last_control = ControlInput::REST;
    'ticks: for (tick, recs) in log.ticks() {
        let expected = session.tick_count() + 1;
        if tick != expected {
            return Err(LogError::CorruptLog {
                line: 0,
                reason: format!("tick {tick} found where {expected} was expected"),
            });
        }
        for r in recs.iter().filter(|r| r.stream == Stream::SensorIn) {
            let msg = decode_str(r.payload.get()).map_err(|e| LogError::CorruptLog {
                line: 0,
                reason: format!("tick {tick}: {e}"),
            })?;
            session.ingest(&msg);
            inbound += 1;
        }
        let logged_state = recs.iter().find(|r| r.stream == Stream::State);
        if logged_state.is_none() {
            // inputs received after the last tick
            break;
        }
        let out = session.tick();
        last_control = out.control;
        if verify {
            let logged: Vec<(Stream, &str)> = recs
                .iter()
                .filter(|r| matches!(r.stream, Stream::State | Stream::Event))
                .map(|r| (r.stream, r.payload.get()))
                .collect();
            let mut replayed = vec![(
                Stream::State,
                encode_compact(&out.state_msg).expect("encodes"),
            )];
            replayed.extend(
                out.events
                    .iter()
                    .map(|e| (Stream::Event, encode_compact(e).expect("encodes"))),
            );
            for i in 0..logged.len().max(replayed.len()) {
                let l = logged.get(i).copied();
                let r = replayed.get(i).map(|(s, t)| (*s, t.as_str()));
                if l != r {
                    let stream = l.or(r).map(|x| x.0).unwrap_or(Stream::State);
                    divergence = Some(Divergence {
                        tick,
                        stream,
                        logged: l.map(|x| x.1.to_string()).unwrap_or_default(),
                        replayed: r.map(|x| x.1.to_string()).unwrap_or_default(),
                    });
                    break 'ticks;
                }
            }
        }
    }
    Ok(ReplayReport {
        ticks: session.tick_count(),
        inbound,
        state: *session.state(),
        control: last_control,
        coins_collected: session.coins().collected(),
        coins_total: session.coins().total(),
        phase: session.trial().phase,
        divergence,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyStats {
    /// Sensor messages that were consumed by a logged tick.
    pub samples: usize,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
    /// `(bucket start ms, count)` with 1 ms buckets.
    pub histogram: Vec<(u64, usize)>,
}

/// Receipt-to-state latency of every sensor message in the log.
pub fn latency_stats(log: &RunLog) -> Option<LatencyStats> {
    let mut lat = Vec::new();
    for recs in log.ticks().values() {
        let Some(state) = recs.iter().find(|r| r.stream == Stream::State) else {
            continue;
        };
        for r in recs.iter().filter(|r| r.stream == Stream::SensorIn) {
            let is_sensor = decode_str(r.payload.get())
                .map(|m| m.kind().is_sensor())
                .unwrap_or(false);
            if is_sensor {
                lat.push((state.t_mono_ms - r.t_mono_ms).max(0.0));
            }
        }
    }
    if lat.is_empty() {
        return None;
    }
    lat.sort_by(f64::total_cmp);
    let pick = |q: f64| lat[((lat.len() - 1) as f64 * q).round() as usize];
    let mut histogram: BTreeMap<u64, usize> = BTreeMap::new();
    for l in &lat {
        *histogram.entry(l.floor() as u64).or_default() += 1;
    }
    Some(LatencyStats {
        samples: lat.len(),
        median_ms: pick(0.5),
        p95_ms: pick(0.95),
        max_ms: *lat.last().expect("non-empty"),
        histogram: histogram.into_iter().collect(),
    })
}
