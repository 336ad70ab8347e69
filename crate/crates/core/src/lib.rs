//! Headless, deterministic micromobility simulation engine.
//!
//! Sensor frames come in over a newline-delimited structured-text protocol, a
//! per-vehicle controller turns the latest sampled-and-held sensor values into
//! a normalized [`ControlInput`](mapping::ControlInput), and a fixed-timestep
//! kinematic integrator advances the vehicle along a coin-collection course.
//! Four vehicle configurations are supported: e-scooter, Segway, electric
//! unicycle and one-wheeled skateboard.
//!
//! Every tick is logged (inputs, control, state, events) so any run can be
//! replayed bit-for-bit with [`telemetry::replay`].
//!
//! ## Layout
//!
//! | module | what it does |
//! |---|---|
//! | [`wire`] | framed message codec and per-sender ordering |
//! | [`fusion`] | accel/mag orientation estimate and jitter smoothing |
//! | [`calibration`] | FSR capture and normalization, dead zone, axis alignment |
//! | [`mapping`] | the four vehicle controllers |
//! | [`dynamics`] | kinematic integrator, collision and respawn |
//! | [`course`] | route geometry, coins, trial lifecycle |
//! | [`session`] | the receiver and tick loop |
//! | [`telemetry`] | append-only log, replay, latency statistics |
//! | [`trace`] | scripted input traces and the centerline trace generator |
//! | [`live`] | socket transport (newline TCP and WebSocket) |
//! | [`cli`] | operator commands behind the `mmsim` binary |
//!
//! The `examples/` directory has one runnable program per capability.

pub mod calibration;
pub mod cli;
pub mod config;
pub mod course;
pub mod dynamics;
pub mod fusion;
pub mod live;
pub mod mapping;
pub mod session;
pub mod telemetry;
pub mod trace;
pub mod vehicle;
pub mod wire;

pub use config::SimConfig;
pub use session::Session;
pub use vehicle::Vehicle;
pub use wire::WireMessage;
