//! The receiver and tick loop.
//!
//! [`Session`] owns all simulation state and is driven from a single thread:
//! [`Session::ingest`] applies one decoded inbound message, [`Session::tick`]
//! advances the simulation by one fixed step. Nothing in here reads a clock,
//! so the same sequence of ingest/tick calls always yields the same states.
//!
//! Per tick, in order: freshness counters advance, stale channels read as
//! zero, the active controller maps the frame, the vehicle steps, collisions
//! respawn the vehicle, coins are picked up, and the trial status updates.

use crate::calibration::{capture_fsr, Angles, AxisMap, CalibrationProfile};
use crate::config::{ConfigError, SimConfig};
use crate::course::{CoinSet, CourseGeometry, RouteTracker, TrialPhase, TrialStatus};
use crate::dynamics::{check_collision, resolve_fail, step, VehicleState};
use crate::fusion::{estimate_static, FilterState, OrientationEstimate};
use crate::mapping::{controller_for, ControlInput, MappingParams, SensorFrame};
use crate::vehicle::Vehicle;
use crate::wire::{
    CalibrationPhase, EventName, EventPayload, FsrPayload, ImuPayload, Kind, Payload, SeqTable,
    Staleness, StatePayload, WireMessage,
};

/// Sender id on every message the engine emits.
pub const ENGINE_SENDER: &str = "engine";

#[derive(Debug, Clone, PartialEq)]
pub enum IngestOutcome {
    /// Sensor sample held, or command applied.
    Accepted,
    /// Out-of-order or duplicate seq; a `stale_drop` event is queued.
    Dropped,
    /// Command refused; the reason is also sent back as an `error` message.
    Rejected(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub outcome: IngestOutcome,
    /// `ack` or `error` addressed to the sender, if any.
    pub reply: Option<WireMessage>,
}

/// Everything one tick produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub tick: u64,
    pub vehicle: Option<Vehicle>,
    pub control: ControlInput,
    pub state: VehicleState,
    pub state_msg: WireMessage,
    pub events: Vec<WireMessage>,
}

#[derive(Debug, Clone, Default)]
enum Capture {
    #[default]
    Idle,
    Baseline(Vec<FsrPayload>),
    Max(Vec<FsrPayload>),
}

/// Raw values last received per channel.
#[derive(Debug, Clone, Default)]
struct Held {
    /// Smoothed orientation before alignment.
    imu: Option<OrientationEstimate>,
    fsr: Option<FsrPayload>,
    throttle: Option<u16>,
}

#[derive(Debug, Clone)]
pub struct Session {
    config: SimConfig,
    dt: f64,
    course: CourseGeometry,
    coins: CoinSet,
    tracker: RouteTracker,
    trial: TrialStatus,
    vehicle: Option<Vehicle>,
    state: VehicleState,
    profile: CalibrationProfile,
    filter: FilterState,
    held: Held,
    frame: SensorFrame,
    seqs: SeqTable,
    capture: Capture,
    pending: Vec<(EventName, String)>,
    out_seq: u64,
    last_control: ControlInput,
}

impl Session {
    pub fn new(config: SimConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let (course, coins) = config
            .course
            .build()
            .map_err(|e| ConfigError(e.to_string()))?;
        let filter =
            FilterState::new(config.fusion_alpha).map_err(|e| ConfigError(e.to_string()))?;
        let state = VehicleState::at_rest(course.point_at(0.0), course.heading_at(0.0), 0);
        let trial = TrialStatus::training(0, coins.total());
        let mut s = Session {
            dt: config.dt(),
            profile: config.calibration.clone(),
            course,
            coins,
            tracker: RouteTracker::new(),
            trial,
            vehicle: None,
            state,
            filter,
            held: Held::default(),
            frame: SensorFrame::default(),
            seqs: SeqTable::default(),
            capture: Capture::Idle,
            pending: Vec::new(),
            out_seq: 0,
            last_control: ControlInput::REST,
            config,
        };
        if let Some(v) = s.config.vehicle {
            s.select_vehicle(v);
        }
        Ok(s)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of completed ticks.
    pub fn tick_count(&self) -> u64 {
        self.state.tick
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn vehicle(&self) -> Option<Vehicle> {
        self.vehicle
    }

    pub fn trial(&self) -> &TrialStatus {
        &self.trial
    }

    pub fn coins(&self) -> &CoinSet {
        &self.coins
    }

    pub fn course(&self) -> &CourseGeometry {
        &self.course
    }

    pub fn progress(&self) -> f64 {
        self.tracker.progress()
    }

    pub fn profile(&self) -> &CalibrationProfile {
        &self.profile
    }

    pub fn frame(&self) -> &SensorFrame {
        &self.frame
    }

    pub fn last_control(&self) -> ControlInput {
        self.last_control
    }

    pub fn calibrating(&self) -> bool {
        !matches!(self.capture, Capture::Idle)
    }

    pub fn mapping_params(&self, v: Vehicle) -> MappingParams {
        MappingParams::new(*self.config.mapping.get(v), self.profile.dead_zone)
    }

    fn next_out_seq(&mut self) -> u64 {
        self.out_seq += 1;
        self.out_seq
    }

    fn outbound(&mut self, payload: Payload) -> WireMessage {
        let seq = self.next_out_seq();
        let t_ms = self.state.tick * 1000 / u64::from(self.config.tick_rate);
        WireMessage::new(ENGINE_SENDER, seq, t_ms, payload)
    }

    fn ack(&mut self, msg: &WireMessage) -> Ingested {
        let reply = self.outbound(Payload::Ack { ref_seq: msg.seq });
        Ingested {
            outcome: IngestOutcome::Accepted,
            reply: Some(reply),
        }
    }

    fn reject(&mut self, msg: &WireMessage, reason: String) -> Ingested {
        let reply = self.outbound(Payload::Error {
            ref_seq: msg.seq,
            message: reason.clone(),
        });
        Ingested {
            outcome: IngestOutcome::Rejected(reason),
            reply: Some(reply),
        }
    }

    /// Apply one inbound message.
    pub fn ingest(&mut self, msg: &WireMessage) -> Ingested {
        let kind = msg.kind();
        if kind.is_outbound() {
            return self.reject(msg, format!("kind '{kind}' is not accepted by the engine"));
        }
        if kind == Kind::Hello {
            self.seqs.restart(&msg.sender, msg.seq);
            return self.ack(msg);
        }
        let last = self.seqs.last_seq(&msg.sender);
        if self.seqs.admit(msg) == Staleness::Drop {
            self.pending.push((
                EventName::StaleDrop,
                format!(
                    "sender={} seq={} last={}",
                    msg.sender,
                    msg.seq,
                    last.unwrap_or_default()
                ),
            ));
            return Ingested {
                outcome: IngestOutcome::Dropped,
                reply: None,
            };
        }
        let accepted = Ingested {
            outcome: IngestOutcome::Accepted,
            reply: None,
        };
        match &msg.payload {
            Payload::Imu(imu) => {
                let est = match imu {
                    ImuPayload::Euler { pitch, roll, yaw } => {
                        OrientationEstimate::onboard(*pitch, *roll, *yaw)
                    }
                    ImuPayload::Raw { accel, mag, .. } => match estimate_static(*accel, *mag) {
                        Ok(e) => e,
                        Err(e) => return self.reject(msg, e.to_string()),
                    },
                };
                self.held.imu = Some(self.filter.smooth(est));
                self.frame.freshness.imu = 0;
                self.refresh_frame();
                accepted
            }
            Payload::Fsr(f) => {
                match &mut self.capture {
                    Capture::Baseline(s) | Capture::Max(s) => s.push(*f),
                    Capture::Idle => {}
                }
                self.held.fsr = Some(*f);
                self.frame.freshness.fsr = 0;
                self.refresh_frame();
                accepted
            }
            Payload::Throttle(t) => {
                self.held.throttle = Some(t.raw);
                self.frame.freshness.throttle = 0;
                self.refresh_frame();
                accepted
            }
            Payload::SetVehicle(v) => {
                if self.calibrating() {
                    return self.reject(msg, "cannot switch vehicle during calibration".into());
                }
                self.select_vehicle(*v);
                self.ack(msg)
            }
            Payload::Calibrate(phase) => match self.calibrate(*phase) {
                Ok(()) => self.ack(msg),
                Err(reason) => self.reject(msg, reason),
            },
            Payload::Hello
            | Payload::State(_)
            | Payload::Event(_)
            | Payload::Ack { .. }
            | Payload::Error { .. } => {
                unreachable!("handled above")
            }
        }
    }

    fn calibrate(&mut self, phase: CalibrationPhase) -> Result<(), String> {
        use CalibrationPhase::*;
        match (phase, std::mem::take(&mut self.capture)) {
            (FsrBaselineBegin, Capture::Idle) => {
                self.capture = Capture::Baseline(Vec::new());
            }
            (FsrMaxBegin, Capture::Idle) => {
                self.capture = Capture::Max(Vec::new());
            }
            (FsrBaselineEnd, Capture::Baseline(samples)) => {
                let b = capture_fsr(&samples).map_err(|e| e.to_string())?;
                self.profile
                    .set_fsr_baseline(b)
                    .map_err(|e| e.to_string())?;
                self.pending.push((
                    EventName::Calibrated,
                    format!("phase=fsr_baseline front={} rear={}", b.front, b.rear),
                ));
            }
            (FsrMaxEnd, Capture::Max(samples)) => {
                let m = capture_fsr(&samples).map_err(|e| e.to_string())?;
                self.profile.set_fsr_max(m).map_err(|e| e.to_string())?;
                self.pending.push((
                    EventName::Calibrated,
                    format!("phase=fsr_max front={} rear={}", m.front, m.rear),
                ));
            }
            (ImuZero, current) => {
                self.capture = current;
                let Some(raw) = self.held.imu else {
                    return Err("imu_zero needs at least one imu sample".into());
                };
                self.profile.imu_zero = Angles::from(&raw);
                self.pending.push((
                    EventName::Calibrated,
                    format!(
                        "phase=imu_zero pitch={:.3} roll={:.3} yaw={:.3}",
                        raw.pitch, raw.roll, raw.yaw
                    ),
                ));
            }
            (phase, current) => {
                self.capture = current;
                return Err(format!(
                    "calibration phase '{}' not valid now",
                    phase.as_str()
                ));
            }
        }
        self.refresh_frame();
        Ok(())
    }

    /// Recompute normalized and aligned frame values from the held raw values.
    fn refresh_frame(&mut self) {
        if let Some(raw) = &self.held.imu {
            let map = self
                .vehicle
                .map(|v| *self.profile.axis_map.get(v))
                .unwrap_or(AxisMap::IDENTITY);
            self.frame.orientation =
                crate::calibration::align(raw.into(), self.profile.imu_zero, &map);
        }
        if let Some(f) = self.held.fsr {
            let (front, rear) = self.profile.normalize_fsr(f);
            self.frame.fsr_front = front;
            self.frame.fsr_rear = rear;
        }
        if let Some(t) = self.held.throttle {
            self.frame.throttle = self.profile.normalize_throttle(t);
        }
    }

    /// Swap the active controller and restart the trial from the route start.
    pub fn select_vehicle(&mut self, v: Vehicle) {
        self.vehicle = Some(v);
        self.state = VehicleState::at_rest(
            self.course.point_at(0.0),
            self.course.heading_at(0.0),
            self.state.tick,
        );
        self.tracker = RouteTracker::new();
        self.coins.reset();
        self.trial = TrialStatus::running(self.state.tick, self.coins.total());
        self.refresh_frame();
    }

    /// Put the current trial in the training phase: no pickups, no completion.
    pub fn enter_training(&mut self) {
        if self.trial.phase == TrialPhase::Running {
            self.trial = TrialStatus::training(self.state.tick, self.coins.total());
            self.coins.reset();
        }
    }

    pub fn start_trial(&mut self) {
        self.trial.start(self.state.tick);
    }

    /// Operator stop.
    pub fn abort_trial(&mut self) {
        self.trial.abort(self.state.tick);
    }

    /// The frame the controller sees: stale channels read as zero.
    fn effective_frame(&self) -> SensorFrame {
        let mut f = self.frame;
        let limit = self.config.stale_threshold;
        if f.freshness.imu > limit {
            f.orientation = Angles::ZERO;
        }
        if f.freshness.fsr > limit {
            f.fsr_front = 0.0;
            f.fsr_rear = 0.0;
        }
        if f.freshness.throttle > limit {
            f.throttle = 0.0;
        }
        f
    }

    /// Advance the simulation one fixed step.
    pub fn tick(&mut self) -> TickOutput {
        let tick = self.state.tick + 1;
        let fr = &mut self.frame.freshness;
        fr.imu = fr.imu.saturating_add(1);
        fr.fsr = fr.fsr.saturating_add(1);
        fr.throttle = fr.throttle.saturating_add(1);

        let mut events = std::mem::take(&mut self.pending);
        let control = match self.vehicle {
            Some(v) if !self.trial.phase.is_terminal() => {
                controller_for(v).map(&self.effective_frame(), &self.mapping_params(v))
            }
            _ => ControlInput::REST,
        };
        self.last_control = control;

        match self.vehicle {
            None => self.state.tick = tick,
            Some(v) => {
                let params = *self.config.vehicles.get(v);
                self.state = step(&self.state, &control, &params, self.dt);
                self.tracker.update(&self.course, self.state.position());
                if let Some(hit) = check_collision(&self.state, &self.course) {
                    events.push((
                        EventName::Collision,
                        format!(
                            "offset={:.3} x={:.3} y={:.3} progress={:.3}",
                            hit.offset,
                            hit.position[0],
                            hit.position[1],
                            self.tracker.progress()
                        ),
                    ));
                    let respawn = resolve_fail(&self.state, &self.course, &mut self.tracker);
                    self.state = respawn.state;
                    events.push((EventName::Respawn, format!("progress={:.3}", respawn.arc)));
                }
                if self.trial.phase == TrialPhase::Running {
                    for i in self.coins.update_pickup(self.state.position()) {
                        let c = &self.coins.coins[i];
                        events.push((EventName::Coin, format!("index={i} arc={:.3}", c.arc)));
                    }
                }
                let total = self.course.total_length();
                if self
                    .trial
                    .update(&self.coins, self.tracker.progress(), total, tick)
                {
                    events.push((
                        EventName::TrialComplete,
                        format!(
                            "coins={}/{} ticks={}",
                            self.trial.coins_collected,
                            self.trial.coins_total,
                            self.trial.duration_ticks().unwrap_or_default()
                        ),
                    ));
                }
            }
        }

        let s = self.state;
        let state_msg = self.outbound(Payload::State(StatePayload {
            tick,
            x: s.x,
            y: s.y,
            heading: s.heading,
            speed: s.speed,
            steering_cmd: control.steering,
            velocity_cmd: control.velocity_cmd,
            coins_collected: self.coins.collected(),
            coins_total: self.coins.total(),
        }));
        let events = events
            .into_iter()
            .map(|(name, detail)| {
                self.outbound(Payload::Event(EventPayload { tick, name, detail }))
            })
            .collect();
        TickOutput {
            tick,
            vehicle: self.vehicle,
            control,
            state: s,
            state_msg,
            events,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::course::CourseSpec;
    use crate::wire::ThrottlePayload;

    fn straight_config(vehicle: Option<Vehicle>) -> SimConfig {
        SimConfig {
            vehicle,
            course: CourseSpec::custom(vec![[0.0, 0.0], [1000.0, 0.0]]),
            ..SimConfig::default()
        }
    }

    fn msg(seq: u64, payload: Payload) -> WireMessage {
        WireMessage::new("rig", seq, 0, payload)
    }

    fn euler(seq: u64, pitch: f64, roll: f64, yaw: f64) -> WireMessage {
        msg(seq, Payload::Imu(ImuPayload::Euler { pitch, roll, yaw }))
    }

    fn event_names(out: &TickOutput) -> Vec<EventName> {
        out.events
            .iter()
            .map(|e| match &e.payload {
                Payload::Event(p) => p.name,
                _ => panic!("not an event"),
            })
            .collect()
    }

    #[test]
    fn euler_frame_updates_orientation() {
        let mut s = Session::new(straight_config(Some(Vehicle::Unicycle))).unwrap();
        let r = s.ingest(&euler(1, 4.0, -3.0, 12.0));
        assert_eq!(r.outcome, IngestOutcome::Accepted);
        assert_eq!(s.frame().orientation, Angles::new(4.0, -3.0, 12.0));
        assert_eq!(s.frame().freshness.imu, 0);
    }

    #[test]
    fn duplicate_seq_is_dropped_with_event() {
        let mut s = Session::new(straight_config(None)).unwrap();
        s.ingest(&euler(5, 0.0, 0.0, 0.0));
        let r = s.ingest(&euler(5, 1.0, 0.0, 0.0));
        assert_eq!(r.outcome, IngestOutcome::Dropped);
        assert_eq!(s.frame().orientation.pitch, 0.0);
        let out = s.tick();
        assert_eq!(event_names(&out), vec![EventName::StaleDrop]);
    }

    #[test]
    fn set_vehicle_mid_trial_resets_pose_and_acks() {
        let mut s = Session::new(straight_config(Some(Vehicle::Escooter))).unwrap();
        s.ingest(&msg(1, Payload::Throttle(ThrottlePayload { raw: 4095 })));
        for _ in 0..50 {
            s.tick();
        }
        assert!(s.state().x > 0.0);
        let r = s.ingest(&msg(2, Payload::SetVehicle(Vehicle::Segway)));
        assert!(matches!(
            r.reply.unwrap().payload,
            Payload::Ack { ref_seq: 2 }
        ));
        assert_eq!(s.vehicle(), Some(Vehicle::Segway));
        assert_eq!((s.state().x, s.state().speed), (0.0, 0.0));
        assert_eq!(s.state().tick, 50);
        assert_eq!(s.trial().phase, TrialPhase::Running);
        assert_eq!(s.trial().start_tick, 50);
    }

    #[test]
    fn set_vehicle_during_calibration_is_rejected() {
        let mut s = Session::new(straight_config(Some(Vehicle::Segway))).unwrap();
        s.ingest(&msg(
            1,
            Payload::Calibrate(CalibrationPhase::FsrBaselineBegin),
        ));
        let r = s.ingest(&msg(2, Payload::SetVehicle(Vehicle::Escooter)));
        assert!(matches!(r.outcome, IngestOutcome::Rejected(_)));
        assert!(matches!(
            r.reply.unwrap().payload,
            Payload::Error { ref_seq: 2, .. }
        ));
        assert_eq!(s.vehicle(), Some(Vehicle::Segway));
    }

    #[test]
    fn fsr_calibration_sequence() {
        let mut s = Session::new(straight_config(Some(Vehicle::Segway))).unwrap();
        let mut seq = 0;
        let mut send = |s: &mut Session, p: Payload| {
            seq += 1;
            s.ingest(&msg(seq, p))
        };
        send(
            &mut s,
            Payload::Calibrate(CalibrationPhase::FsrBaselineBegin),
        );
        for _ in 0..12 {
            send(
                &mut s,
                Payload::Fsr(FsrPayload {
                    front: 100,
                    rear: 120,
                }),
            );
        }
        let r = send(&mut s, Payload::Calibrate(CalibrationPhase::FsrBaselineEnd));
        assert_eq!(r.outcome, IngestOutcome::Accepted);
        send(&mut s, Payload::Calibrate(CalibrationPhase::FsrMaxBegin));
        for i in 0..10 {
            let v = if i % 2 == 0 { 3000 } else { 3100 };
            send(&mut s, Payload::Fsr(FsrPayload { front: v, rear: v }));
        }
        send(&mut s, Payload::Calibrate(CalibrationPhase::FsrMaxEnd));
        let p = s.profile();
        assert_eq!((p.fsr_baseline_front, p.fsr_baseline_rear), (100, 120));
        assert_eq!((p.fsr_max_front, p.fsr_max_rear), (3050, 3050));
        let out = s.tick();
        assert_eq!(
            event_names(&out),
            vec![EventName::Calibrated, EventName::Calibrated]
        );

        // too few samples
        send(
            &mut s,
            Payload::Calibrate(CalibrationPhase::FsrBaselineBegin),
        );
        send(&mut s, Payload::Fsr(FsrPayload { front: 1, rear: 1 }));
        let r = send(&mut s, Payload::Calibrate(CalibrationPhase::FsrBaselineEnd));
        assert!(matches!(r.outcome, IngestOutcome::Rejected(_)));
        assert!(!s.calibrating());
        // end without begin
        let r = send(&mut s, Payload::Calibrate(CalibrationPhase::FsrMaxEnd));
        assert!(matches!(r.outcome, IngestOutcome::Rejected(_)));
    }

    #[test]
    fn imu_zero_recenters() {
        let mut s = Session::new(straight_config(Some(Vehicle::Skateboard))).unwrap();
        let r = s.ingest(&msg(1, Payload::Calibrate(CalibrationPhase::ImuZero)));
        assert!(matches!(r.outcome, IngestOutcome::Rejected(_)));
        s.ingest(&euler(2, 3.0, -2.0, 40.0));
        s.ingest(&msg(3, Payload::Calibrate(CalibrationPhase::ImuZero)));
        assert_eq!(s.frame().orientation, Angles::ZERO);
    }

    #[test]
    fn no_input_means_rest_forever() {
        let mut s = Session::new(straight_config(Some(Vehicle::Escooter))).unwrap();
        let start = *s.state();
        for k in 1..=2000 {
            let out = s.tick();
            assert_eq!(out.tick, k);
            assert_eq!(out.control, ControlInput::REST);
        }
        assert_eq!(s.state().position(), start.position());
        assert_eq!(s.state().speed, 0.0);
    }

    #[test]
    fn no_vehicle_advances_counters_only() {
        let mut s = Session::new(straight_config(None)).unwrap();
        s.ingest(&msg(1, Payload::Throttle(ThrottlePayload { raw: 4095 })));
        let out = s.tick();
        assert_eq!(out.tick, 1);
        assert_eq!(out.state.x, 0.0);
        assert!(matches!(out.state_msg.payload, Payload::State(_)));
    }

    #[test]
    fn escooter_ramp_then_cruise_matches_closed_form() {
        let mut s = Session::new(straight_config(Some(Vehicle::Escooter))).unwrap();
        for k in 1..=1000u64 {
            s.ingest(&msg(
                2 * k,
                Payload::Throttle(ThrottlePayload { raw: 4095 }),
            ));
            s.ingest(&euler(2 * k + 1, 0.0, 0.0, 0.0));
            s.tick();
        }
        // speed_k = min(0.02 k, 6); x = Σ speed_k · dt
        let expected: f64 = (1..=1000).map(|k| (0.02 * k as f64).min(6.0) * 0.01).sum();
        assert!((expected - 51.03).abs() < 1e-9);
        assert!(
            (s.state().x - expected).abs() < 1e-9,
            "{} vs {expected}",
            s.state().x
        );
    }

    #[test]
    fn silent_channel_goes_stale_and_vehicle_stops() {
        let cfg = straight_config(Some(Vehicle::Escooter));
        let mut s = Session::new(cfg).unwrap();
        for k in 1..=400u64 {
            s.ingest(&msg(k, Payload::Throttle(ThrottlePayload { raw: 4095 })));
            s.tick();
        }
        assert_eq!(s.state().speed, 6.0);
        // throttle was last consumed at tick 400
        let mut stopped_at = None;
        for _ in 0..400 {
            let out = s.tick();
            if out.state.speed == 0.0 && stopped_at.is_none() {
                stopped_at = Some(out.tick);
            }
        }
        let stopped_at = stopped_at.expect("vehicle stops");
        assert!(stopped_at <= 400 + 50 + 200, "stopped at {stopped_at}");
        assert!(stopped_at > 400 + 50);
    }

    #[test]
    fn outbound_kinds_are_refused() {
        let mut s = Session::new(straight_config(None)).unwrap();
        let r = s.ingest(&msg(1, Payload::Ack { ref_seq: 3 }));
        assert!(matches!(r.outcome, IngestOutcome::Rejected(_)));
    }

    #[test]
    fn hello_restarts_sender_sequence() {
        let mut s = Session::new(straight_config(None)).unwrap();
        s.ingest(&euler(100, 0.0, 0.0, 0.0));
        let r = s.ingest(&msg(1, Payload::Hello));
        assert!(r.reply.is_some());
        assert_eq!(
            s.ingest(&euler(2, 0.0, 0.0, 0.0)).outcome,
            IngestOutcome::Accepted
        );
    }

    #[test]
    fn state_ticks_strictly_increase_and_seq_is_engine_owned() {
        let mut s = Session::new(straight_config(Some(Vehicle::Segway))).unwrap();
        let mut last = 0;
        for _ in 0..10 {
            let out = s.tick();
            assert_eq!(out.state_msg.sender, ENGINE_SENDER);
            let Payload::State(p) = &out.state_msg.payload else {
                panic!()
            };
            assert!(p.tick > last);
            last = p.tick;
        }
    }

    #[test]
    fn abort_stops_the_trial() {
        let mut s = Session::new(straight_config(Some(Vehicle::Escooter))).unwrap();
        s.tick();
        s.abort_trial();
        assert_eq!(s.trial().phase, TrialPhase::Aborted);
        assert_eq!(s.trial().end_tick, Some(1));
    }
}
