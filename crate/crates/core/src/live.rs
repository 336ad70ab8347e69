//! Socket transport for live sessions.
//!
//! One listening port serves two framings. A connection whose first bytes
//! are `GET ` is upgraded to a WebSocket and carries one message per text
//! frame; anything else is read as newline-delimited frames. Every decoded
//! inbound message goes onto a single ordered queue drained by the tick
//! thread, which is the only owner of the [`Session`]. Outbound state and
//! event messages fan out to every client through bounded queues; a client
//! that cannot keep up is disconnected rather than allowed to stall the tick.

use std::collections::BTreeMap;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream as StdTcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc as std_mpsc, Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use tokio::io::AsyncWriteExt;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;
use tokio_tungstenite::tungstenite::Message;
use tokio_util::codec::{FramedRead, LinesCodec};

use crate::config::{ConfigError, SimConfig};
use crate::course::TrialPhase;
use crate::dynamics::VehicleState;
use crate::session::{Session, ENGINE_SENDER};
use crate::telemetry::{LogError, LogWriter, RecordedSession};
use crate::trace::ScriptedTrace;
use crate::wire::{decode, decode_str, encode, encode_compact, Payload, WireError, WireMessage};

const MAX_FRAME: usize = 64 * 1024;
const SNIFF_TIMEOUT: Duration = Duration::from_millis(300);

#[derive(Debug, thiserror::Error)]
pub enum LiveError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot listen on {addr}: {reason}")]
    BindFailure { addr: SocketAddr, reason: String },
    #[error("i/o failure: {0}")]
    Io(String),
    #[error(transparent)]
    Log(#[from] LogError),
}

#[derive(Debug, Clone)]
pub struct LiveOptions {
    pub listen: SocketAddr,
    pub log: Option<PathBuf>,
    /// Stop after this many ticks.
    pub max_ticks: Option<u64>,
    /// Outbound messages buffered per client before it is dropped.
    pub client_queue: usize,
    pub handle_ctrl_c: bool,
}

impl LiveOptions {
    pub fn new(listen: SocketAddr) -> Self {
        LiveOptions {
            listen,
            log: None,
            max_ticks: None,
            client_queue: 1024,
            handle_ctrl_c: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiveReport {
    pub ticks: u64,
    pub clients_connected: u64,
    pub clients_dropped: u64,
    pub inbound: u64,
    pub phase: TrialPhase,
    pub coins_collected: u32,
    pub coins_total: u32,
    pub state: VehicleState,
}

type Line = Arc<str>;

struct Inbound {
    client: u64,
    t_mono_ms: f64,
    msg: WireMessage,
}

#[derive(Default)]
struct Clients {
    next_id: AtomicU64,
    connected: AtomicU64,
    dropped: AtomicU64,
    queues: Mutex<BTreeMap<u64, mpsc::Sender<Line>>>,
}

impl Clients {
    fn register(&self, capacity: usize) -> (u64, mpsc::Sender<Line>, mpsc::Receiver<Line>) {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed) + 1;
        let (tx, rx) = mpsc::channel(capacity);
        self.queues
            .lock()
            .expect("client table")
            .insert(id, tx.clone());
        self.connected.fetch_add(1, Ordering::Relaxed);
        (id, tx, rx)
    }

    fn remove(&self, id: u64) {
        self.queues.lock().expect("client table").remove(&id);
    }

    fn send_to(&self, id: u64, line: Line) {
        let mut q = self.queues.lock().expect("client table");
        if let Some(tx) = q.get(&id) {
            if tx.try_send(line).is_err() {
                q.remove(&id);
                self.dropped.fetch_add(1, Ordering::Relaxed);
            }
        }
    }

    fn broadcast(&self, lines: &[Line]) {
        let mut q = self.queues.lock().expect("client table");
        let mut gone = Vec::new();
        for (id, tx) in q.iter() {
            for l in lines {
                if tx.try_send(l.clone()).is_err() {
                    gone.push(*id);
                    break;
                }
            }
        }
        for id in gone {
            q.remove(&id);
            self.dropped.fetch_add(1, Ordering::Relaxed);
        }
    }
}

/// A running live session.
pub struct LiveHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: JoinHandle<Result<LiveReport, LiveError>>,
}

impl LiveHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Ask the tick loop to finish after the current tick.
    pub fn stop(&self) {
        self.stop.store(true, Ordering::SeqCst);
    }

    pub fn is_finished(&self) -> bool {
        self.thread.is_finished()
    }

    pub fn join(self) -> Result<LiveReport, LiveError> {
        self.thread
            .join()
            .unwrap_or_else(|_| Err(LiveError::Io("tick thread panicked".into())))
    }
}

fn io_err(e: io::Error) -> LiveError {
    LiveError::Io(e.to_string())
}

/// Bind, then run the session on its own thread until stopped.
pub fn start(config: SimConfig, opts: LiveOptions) -> Result<LiveHandle, LiveError> {
    let session = Session::new(config.clone())?;
    let listener =
        std::net::TcpListener::bind(opts.listen).map_err(|e| LiveError::BindFailure {
            addr: opts.listen,
            reason: e.to_string(),
        })?;
    listener.set_nonblocking(true).map_err(io_err)?;
    let addr = listener.local_addr().map_err(io_err)?;
    let log = opts
        .log
        .as_deref()
        .map(|p| LogWriter::create(p, &config))
        .transpose()?;

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .map_err(io_err)?;
    let stop = Arc::new(AtomicBool::new(false));
    let clients = Arc::new(Clients::default());
    let (in_tx, in_rx) = mpsc::unbounded_channel();
    let epoch = Instant::now();
    {
        let _guard = runtime.enter();
        let listener = TcpListener::from_std(listener).map_err(io_err)?;
        runtime.spawn(accept_loop(
            listener,
            clients.clone(),
            in_tx,
            epoch,
            opts.client_queue,
        ));
    }
    if opts.handle_ctrl_c {
        let stop = stop.clone();
        runtime.spawn(async move {
            if tokio::signal::ctrl_c().await.is_ok() {
                stop.store(true, Ordering::SeqCst);
            }
        });
    }
    tracing::info!(%addr, "listening");

    let period = Duration::from_secs_f64(session.dt());
    let rs = RecordedSession::new(session, log);
    let thread = {
        let stop = stop.clone();
        std::thread::Builder::new()
            .name("tick".into())
            .spawn(move || {
                let result = tick_loop(rs, in_rx, &clients, epoch, period, &stop, opts.max_ticks);
                runtime.shutdown_timeout(Duration::from_millis(200));
                result
            })
            .map_err(io_err)?
    };
    Ok(LiveHandle { addr, stop, thread })
}

fn ms_since(epoch: Instant) -> f64 {
    epoch.elapsed().as_secs_f64() * 1000.0
}

fn line_of(msg: &WireMessage) -> Line {
    Arc::from(encode_compact(msg).expect("engine messages are valid"))
}

fn tick_loop(
    mut rs: RecordedSession<std::io::BufWriter<std::fs::File>>,
    mut inbound: mpsc::UnboundedReceiver<Inbound>,
    clients: &Clients,
    epoch: Instant,
    period: Duration,
    stop: &AtomicBool,
    max_ticks: Option<u64>,
) -> Result<LiveReport, LiveError> {
    let mut deadline = Instant::now() + period;
    let mut received = 0;
    while !stop.load(Ordering::SeqCst) && max_ticks.map_or(true, |m| rs.session().tick_count() < m)
    {
        let now = Instant::now();
        if deadline > now {
            std::thread::sleep(deadline - now);
        } else if now - deadline > period * 5 {
            tracing::warn!(
                behind_ms = (now - deadline).as_millis() as u64,
                "tick loop fell behind"
            );
            deadline = now;
        }
        deadline += period;
        while let Ok(Inbound {
            client,
            t_mono_ms,
            msg,
        }) = inbound.try_recv()
        {
            received += 1;
            if let Some(reply) = rs.ingest(&msg, t_mono_ms)?.reply {
                clients.send_to(client, line_of(&reply));
            }
        }
        let out = rs.tick(ms_since(epoch))?;
        let mut lines = vec![line_of(&out.state_msg)];
        lines.extend(out.events.iter().map(line_of));
        clients.broadcast(&lines);
        rs.flush()?;
    }
    rs.session_mut().abort_trial();
    rs.flush()?;
    let s = rs.session();
    Ok(LiveReport {
        ticks: s.tick_count(),
        clients_connected: clients.connected.load(Ordering::Relaxed),
        clients_dropped: clients.dropped.load(Ordering::Relaxed),
        inbound: received,
        phase: s.trial().phase,
        coins_collected: s.coins().collected(),
        coins_total: s.coins().total(),
        state: *s.state(),
    })
}

async fn accept_loop(
    listener: TcpListener,
    clients: Arc<Clients>,
    inbound: mpsc::UnboundedSender<Inbound>,
    epoch: Instant,
    queue: usize,
) {
    loop {
        let (stream, peer) = match listener.accept().await {
            Ok(c) => c,
            Err(e) => {
                tracing::warn!(error = %e, "accept failed");
                continue;
            }
        };
        let _ = stream.set_nodelay(true);
        let clients = clients.clone();
        let inbound = inbound.clone();
        tokio::spawn(async move {
            let (id, tx, rx) = clients.register(queue);
            tracing::debug!(%peer, id, "client connected");
            let ws = is_websocket(&stream).await;
            let served = if ws {
                serve_websocket(stream, id, tx, rx, inbound, epoch).await
            } else {
                serve_lines(stream, id, tx, rx, inbound, epoch).await
            };
            if let Err(e) = served {
                tracing::debug!(%peer, error = %e, "client closed");
            }
            clients.remove(id);
        });
    }
}

/// True when the first request bytes are an HTTP GET. Clients that stay
/// silent are treated as newline clients.
async fn is_websocket(stream: &TcpStream) -> bool {
    let sniff = async {
        let mut buf = [0u8; 4];
        loop {
            match stream.peek(&mut buf).await {
                Ok(0) | Err(_) => return false,
                Ok(n) if n >= 4 => return &buf == b"GET ",
                Ok(n) if !b"GET ".starts_with(&buf[..n]) => return false,
                Ok(_) => tokio::time::sleep(Duration::from_millis(2)).await,
            }
        }
    };
    tokio::time::timeout(SNIFF_TIMEOUT, sniff)
        .await
        .unwrap_or(false)
}

fn transport_error(message: String) -> Line {
    // seq 0: raised by the transport, not part of the session's sequence
    let msg = WireMessage::new(
        ENGINE_SENDER,
        0,
        0,
        Payload::Error {
            ref_seq: 0,
            message,
        },
    );
    line_of(&msg)
}

fn forward(
    frame: Result<WireMessage, WireError>,
    id: u64,
    tx: &mpsc::Sender<Line>,
    inbound: &mpsc::UnboundedSender<Inbound>,
    epoch: Instant,
) -> bool {
    match frame {
        Ok(msg) => inbound
            .send(Inbound {
                client: id,
                t_mono_ms: ms_since(epoch),
                msg,
            })
            .is_ok(),
        Err(e) => tx.try_send(transport_error(e.to_string())).is_ok(),
    }
}

async fn serve_lines(
    stream: TcpStream,
    id: u64,
    tx: mpsc::Sender<Line>,
    mut rx: mpsc::Receiver<Line>,
    inbound: mpsc::UnboundedSender<Inbound>,
    epoch: Instant,
) -> io::Result<()> {
    let (read, mut write) = stream.into_split();
    let writer = tokio::spawn(async move {
        while let Some(line) = rx.recv().await {
            let mut buf = Vec::with_capacity(line.len() + 1);
            buf.extend_from_slice(line.as_bytes());
            buf.push(b'\n');
            if write.write_all(&buf).await.is_err() {
                break;
            }
        }
    });
    let mut frames = FramedRead::new(read, LinesCodec::new_with_max_length(MAX_FRAME));
    let result = loop {
        match frames.next().await {
            None => break Ok(()),
            Some(Ok(line)) => {
                if line.trim().is_empty() {
                    continue;
                }
                if !forward(decode_str(&line), id, &tx, &inbound, epoch) {
                    break Ok(());
                }
            }
            Some(Err(e)) => break Err(io::Error::new(io::ErrorKind::InvalidData, e.to_string())),
        }
    };
    drop(tx);
    writer.abort();
    result
}

async fn serve_websocket(
    stream: TcpStream,
    id: u64,
    tx: mpsc::Sender<Line>,
    mut rx: mpsc::Receiver<Line>,
    inbound: mpsc::UnboundedSender<Inbound>,
    epoch: Instant,
) -> io::Result<()> {
    let ws = tokio_tungstenite::accept_async(stream)
        .await
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
    let (mut sink, mut source) = ws.split();
    let writer = tokio::spawn(async move {
        while let Some(line) = rx.recv().await {
            if sink.send(Message::Text(line.to_string())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    let result = loop {
        match source.next().await {
            None | Some(Ok(Message::Close(_))) => break Ok(()),
            Some(Ok(Message::Text(t))) => {
                if !forward(decode_str(&t), id, &tx, &inbound, epoch) {
                    break Ok(());
                }
            }
            Some(Ok(Message::Binary(b))) => {
                if !forward(decode(&b), id, &tx, &inbound, epoch) {
                    break Ok(());
                }
            }
            Some(Ok(_)) => {}
            Some(Err(e)) => break Err(io::Error::new(io::ErrorKind::InvalidData, e.to_string())),
        }
    };
    drop(tx);
    writer.abort();
    result
}

/// Blocking newline-framed client, for sensor simulators and tests.
pub struct SensorClient {
    stream: StdTcpStream,
    incoming: std_mpsc::Receiver<WireMessage>,
    sender: String,
    seq: u64,
}

impl SensorClient {
    pub fn connect(addr: SocketAddr, sender: &str) -> io::Result<Self> {
        let stream = StdTcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let reader = BufReader::new(stream.try_clone()?);
        let (tx, incoming) = std_mpsc::channel();
        std::thread::spawn(move || {
            for line in reader.lines() {
                let Ok(line) = line else { break };
                if let Ok(msg) = decode_str(&line) {
                    if tx.send(msg).is_err() {
                        break;
                    }
                }
            }
        });
        Ok(SensorClient {
            stream,
            incoming,
            sender: sender.to_string(),
            seq: 0,
        })
    }

    pub fn send(&mut self, msg: &WireMessage) -> io::Result<()> {
        let frame =
            encode(msg).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
        self.stream.write_all(frame.as_bytes())
    }

    /// Send `payload` under this client's sender id with the next seq.
    pub fn send_payload(&mut self, t_ms: u64, payload: Payload) -> io::Result<u64> {
        self.seq += 1;
        let msg = WireMessage::new(self.sender.clone(), self.seq, t_ms, payload);
        self.send(&msg)?;
        Ok(self.seq)
    }

    pub fn send_raw(&mut self, bytes: &[u8]) -> io::Result<()> {
        self.stream.write_all(bytes)
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Option<WireMessage> {
        self.incoming.recv_timeout(timeout).ok()
    }

    /// Wait for the first message matching `pred`.
    pub fn wait_for(
        &self,
        timeout: Duration,
        pred: impl Fn(&WireMessage) -> bool,
    ) -> Option<WireMessage> {
        let end = Instant::now() + timeout;
        loop {
            let left = end.checked_duration_since(Instant::now())?;
            let msg = self.incoming.recv_timeout(left).ok()?;
            if pred(&msg) {
                return Some(msg);
            }
        }
    }

    pub fn drain(&self) -> Vec<WireMessage> {
        self.incoming.try_iter().collect()
    }

    /// Send a trace in real time: entry `(N, msg)` goes out at `(N - 1) · period`
    /// after the call.
    pub fn play(&mut self, trace: &ScriptedTrace, period: Duration) -> io::Result<()> {
        let start = Instant::now();
        for (tick, msg) in &trace.entries {
            let at = start + period * (tick.saturating_sub(1) as u32);
            if let Some(wait) = at.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
            self.send(msg)?;
        }
        Ok(())
    }
}
