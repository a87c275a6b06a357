// SPDX-License-Identifier: Apache-2.0

//! The twin process: one tick loop owns the world, sessions reach it over
//! framed TCP or the browser socket gateway, and reads are served from the
//! last published snapshot.

mod gateway;
mod tick;

pub use gateway::{malformed_json, reply_json, tick_event};

use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::JoinHandle;
use std::time::Duration;

use crate::bridge::{read_frame, write_frame, Command, Frame, Reply, MAX_FRAME_BYTES};
use crate::decimal::format_value;
use crate::mirror::{ClockMode, Generation, MirrorCache, MirrorLink, Poller, DEFAULT_POLL_PERIOD};
use crate::net::Acceptor;
use crate::plant::{registry, Access};
use crate::render::{render_first_person, render_topdown, DEFAULT_PX_PER_CELL, DEFAULT_TOPDOWN_INTERVAL_MS};
use crate::world::{compass_bearing, RobotState, SessionId, TraceRecorder, World, WorldMap};

pub const DEFAULT_HTTP_PORT: u16 = 8080;
pub const DEFAULT_TICK_MS: u64 = 50;
/// Browser socket tick event rate.
pub const EVENT_PERIOD: Duration = Duration::from_millis(100);

#[derive(Debug, Clone)]
pub struct TwinConfig {
    pub bridge_addr: String,
    /// Browser socket gateway; `None` disables it.
    pub http_addr: Option<String>,
    /// Plant mirror endpoint; `None` runs without a plant.
    pub plant_addr: Option<String>,
    pub map: Arc<WorldMap>,
    pub tick_ms: u64,
    pub mode: ClockMode,
    pub seed: u64,
    /// Trace CSVs and top-down captures go here when set.
    pub record_dir: Option<PathBuf>,
    pub topdown_interval_ms: u64,
    pub poll_period: Duration,
}

impl TwinConfig {
    pub fn new(map: Arc<WorldMap>) -> Self {
        Self {
            bridge_addr: format!("127.0.0.1:{}", crate::bridge::DEFAULT_PORT),
            http_addr: Some(format!("127.0.0.1:{DEFAULT_HTTP_PORT}")),
            plant_addr: Some(format!("127.0.0.1:{}", crate::mirror::DEFAULT_PORT)),
            map,
            tick_ms: DEFAULT_TICK_MS,
            mode: ClockMode::Rt,
            seed: 0,
            record_dir: None,
            topdown_interval_ms: DEFAULT_TOPDOWN_INTERVAL_MS,
            poll_period: DEFAULT_POLL_PERIOD,
        }
    }

    /// Ephemeral loopback ports, for tests and embedding.
    pub fn loopback(map: Arc<WorldMap>, plant_addr: Option<String>) -> Self {
        Self {
            bridge_addr: "127.0.0.1:0".into(),
            http_addr: Some("127.0.0.1:0".into()),
            plant_addr,
            ..Self::new(map)
        }
    }
}

/// World state as of the end of one tick.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub tick: u64,
    pub t_ms: u64,
    pub world: World,
    pub plant: Arc<Generation>,
    pub plant_connected: bool,
}

pub(crate) enum Op {
    Command(Command),
    Disconnect,
}

pub(crate) struct Envelope {
    session: SessionId,
    op: Op,
    reply: Option<Sender<Reply>>,
}

pub(crate) struct Shared {
    tx: Sender<Envelope>,
    snapshot: RwLock<Arc<Snapshot>>,
    cache: MirrorCache,
    traces: Mutex<TraceRecorder>,
    next_session: AtomicU64,
    stop: AtomicBool,
}

const REPLY_TIMEOUT: Duration = Duration::from_secs(30);

fn robot_or_404<'a>(snap: &'a Snapshot, id: &str) -> Result<&'a RobotState, Reply> {
    snap.world.robots.get(id).ok_or_else(|| Reply::error(404, format!("unknown robot {id}")))
}

impl Shared {
    fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().unwrap().clone()
    }

    fn open_session(&self) -> SessionId {
        self.next_session.fetch_add(1, Ordering::Relaxed)
    }

    fn close_session(&self, session: SessionId) {
        let _ = self.tx.send(Envelope { session, op: Op::Disconnect, reply: None });
    }

    fn submit(&self, session: SessionId, cmd: Command) -> Reply {
        let (tx, rx) = mpsc::channel();
        if self.tx.send(Envelope { session, op: Op::Command(cmd), reply: Some(tx) }).is_err() {
            return Reply::error(503, "twin is shutting down");
        }
        rx.recv_timeout(REPLY_TIMEOUT).unwrap_or_else(|_| Reply::error(503, "tick loop did not answer"))
    }

    /// Parses and runs one command body for a session. `events` is the
    /// session's push subscription flag.
    fn handle_text(&self, session: SessionId, body: &str, events: &mut bool) -> Reply {
        match crate::bridge::parse_command(body) {
            Ok(Command::SessionEvents(on)) => {
                *events = on;
                Reply::ok(if on { "on" } else { "off" })
            }
            Ok(cmd) => self.execute(session, cmd),
            Err(e) => Reply::error(400, e.0),
        }
    }

    fn execute(&self, session: SessionId, cmd: Command) -> Reply {
        let snap = self.snapshot();
        let read = |f: &dyn Fn(&Snapshot) -> Result<Reply, Reply>| f(&snap).unwrap_or_else(|e| e);
        match cmd {
            Command::RobotLocation(id) => read(&|s| {
                let p = robot_or_404(s, &id)?.pose;
                Ok(Reply::ok(format!("{} {} {}", format_value(p.x_m), format_value(p.y_m), format_value(p.z_m))))
            }),
            Command::RobotRotation(id) => read(&|s| Ok(Reply::ok(format_value(robot_or_404(s, &id)?.pose.yaw_deg)))),
            Command::RobotCompass(id) => read(&|s| {
                let t = s.world.map.target;
                Ok(Reply::ok(format_value(compass_bearing(&robot_or_404(s, &id)?.pose, t.x_m, t.y_m))))
            }),
            Command::RobotTrace(id) => read(&|s| {
                robot_or_404(s, &id)?;
                Ok(Reply::ok(self.traces.lock().unwrap().csv(&id)))
            }),
            Command::Camera { robot, mode, width, height } => read(&|s| {
                let r = robot_or_404(s, &robot)?;
                render_first_person(&s.world.map, s.plant.as_ref(), r, mode, width, height)
                    .map(|image| Reply::Image { head: String::new(), image })
                    .map_err(|e| Reply::error(400, e.to_string()))
            }),
            Command::Topdown(mode) => {
                let traces = self.traces.lock().unwrap();
                match render_topdown(&snap.world, snap.plant.as_ref(), Some(&traces), mode, DEFAULT_PX_PER_CELL) {
                    Ok(image) => Reply::Image { head: String::new(), image },
                    Err(e) => Reply::error(500, e.to_string()),
                }
            }
            Command::TargetLocation => {
                let t = snap.world.map.target;
                Reply::ok(format!("{} {} {}", format_value(t.x_m), format_value(t.y_m), format_value(t.radius_m)))
            }
            Command::Robots => Reply::ok(snap.world.robots.keys().cloned().collect::<Vec<_>>().join(" ")),
            Command::Interactions => Reply::ok(
                snap.world
                    .map
                    .interactions
                    .iter()
                    .map(|i| format!("{} {} {} {}", i.name, format_value(i.x_m), format_value(i.y_m), i.variable))
                    .collect::<Vec<_>>()
                    .join("\n"),
            ),
            Command::SimTime => Reply::ok(snap.t_ms.to_string()),
            Command::PlantGet(var) => self.plant_get(&snap, &var),
            Command::PlantSet(var, value) => {
                let descriptors = self.cache.descriptors();
                let local;
                let list = if descriptors.is_empty() {
                    local = registry();
                    local
                } else {
                    descriptors.as_slice()
                };
                match list.iter().find(|d| d.name == var) {
                    None => Reply::error(404, format!("unknown variable {var}")),
                    Some(d) if d.access == Access::ReadOnly => Reply::error(403, format!("{var} is read-only")),
                    Some(_) => {
                        self.cache.enqueue_write(var, value.value());
                        Reply::ok(value.to_string())
                    }
                }
            }
            Command::SessionEvents(on) => Reply::ok(if on { "on" } else { "off" }),
            mutating => self.submit(session, mutating),
        }
    }

    fn plant_get(&self, snap: &Snapshot, var: &str) -> Reply {
        match snap.plant.values.get(var) {
            Some(v) => {
                let stale_ms = snap.plant.fetched_at.map(|t| t.elapsed().as_millis() as u64).unwrap_or(0);
                Reply::ok(format!("{} {stale_ms}", format_value(*v)))
            }
            None if registry().iter().any(|d| d.name == var) || self.cache.descriptor(var).is_some() => {
                Reply::error(503, format!("{var} has not been mirrored yet"))
            }
            None => Reply::error(404, format!("unknown variable {var}")),
        }
    }
}

fn serve_bridge(shared: Arc<Shared>, stream: TcpStream) {
    let session = shared.open_session();
    let (mut reader, mut writer) = match stream.try_clone() {
        Ok(s) => (BufReader::new(s), BufWriter::new(stream)),
        Err(_) => return,
    };
    let mut events = false;
    loop {
        match read_frame(&mut reader) {
            Ok(Some(frame)) => {
                let reply = match std::str::from_utf8(&frame.body) {
                    Ok(body) => shared.handle_text(session, body, &mut events),
                    Err(_) => Reply::error(400, "command is not UTF-8"),
                };
                let mut body = reply.encode();
                if frame.id.len() + 1 + body.len() > MAX_FRAME_BYTES {
                    body = Reply::error(413, "reply exceeds the frame limit").encode();
                }
                if write_frame(&mut writer, &Frame::new(frame.id, body)).is_err() {
                    break;
                }
            }
            Ok(None) => break,
            Err(e) => {
                log::debug!("bridge session {session}: {e}");
                break;
            }
        }
    }
    shared.close_session(session);
}

/// A running twin.
pub struct TwinServer {
    shared: Arc<Shared>,
    bridge: Acceptor,
    http: Option<Acceptor>,
    tick: Option<JoinHandle<()>>,
    poller: Option<Poller>,
    config: TwinConfig,
}

impl TwinServer {
    pub fn start(config: TwinConfig) -> io::Result<Self> {
        if config.tick_ms == 0 {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "tick_ms must be >= 1"));
        }
        if let Some(dir) = &config.record_dir {
            std::fs::create_dir_all(dir)?;
        }
        let cache = MirrorCache::new();
        let (tx, rx) = mpsc::channel();
        let world = World::new(config.map.clone());
        let traces = match &config.record_dir {
            Some(d) => TraceRecorder::with_dir(d),
            None => TraceRecorder::default(),
        };
        let mut link = config.plant_addr.as_ref().map(|a| MirrorLink::new(a.clone(), cache.clone()).with_mode(config.mode));
        if let Some(link) = link.as_mut() {
            if let Err(e) = link.sync_once(None) {
                log::warn!("initial plant sync failed: {e}");
            }
        }
        let shared = Arc::new(Shared {
            tx,
            snapshot: RwLock::new(Arc::new(Snapshot {
                tick: 0,
                t_ms: 0,
                world: world.clone(),
                plant: cache.generation(),
                plant_connected: cache.is_connected(),
            })),
            cache: cache.clone(),
            traces: Mutex::new(traces),
            next_session: AtomicU64::new(1),
            stop: AtomicBool::new(false),
        });

        let (tick_link, poller) = match config.mode {
            ClockMode::Lockstep => (link, None),
            ClockMode::Rt => (None, link.map(|l| Poller::spawn(l, config.poll_period))),
        };
        let s = shared.clone();
        let bridge = Acceptor::bind(config.bridge_addr.as_str(), "bridge", move |stream, _| serve_bridge(s.clone(), stream))?;
        let http = match &config.http_addr {
            Some(addr) => {
                let s = shared.clone();
                Some(Acceptor::bind(addr.as_str(), "gateway", move |stream, _| gateway::serve_http(s.clone(), stream))?)
            }
            None => None,
        };
        let tick = tick::spawn(shared.clone(), rx, world, &config, tick_link)?;
        let server = Self { shared, bridge, http, tick: Some(tick), poller, config };
        log::info!(
            "twin up: bridge {} gateway {:?} mode {} tick {} ms",
            server.bridge.local_addr(),
            server.http.as_ref().map(|h| h.local_addr()),
            server.config.mode.as_str(),
            server.config.tick_ms
        );
        Ok(server)
    }

    pub fn bridge_addr(&self) -> SocketAddr {
        self.bridge.local_addr()
    }

    pub fn http_addr(&self) -> Option<SocketAddr> {
        self.http.as_ref().map(|h| h.local_addr())
    }

    pub fn config(&self) -> &TwinConfig {
        &self.config
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.shared.snapshot()
    }

    pub fn cache(&self) -> &MirrorCache {
        &self.shared.cache
    }

    /// Number of open bridge connections.
    pub fn bridge_connections(&self) -> usize {
        self.bridge.connection_count()
    }

    /// An in-process session with the same semantics as a bridge connection.
    pub fn session(&self) -> LocalSession {
        LocalSession { shared: self.shared.clone(), id: self.shared.open_session(), events: false }
    }

    pub fn shutdown(&mut self) {
        self.bridge.shutdown();
        if let Some(h) = self.http.as_mut() {
            h.shutdown();
        }
        if let Some(mut p) = self.poller.take() {
            p.stop();
        }
        self.shared.stop.store(true, Ordering::Release);
        if let Some(t) = self.tick.take() {
            let _ = t.join();
        }
    }
}

impl Drop for TwinServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// In-process session; dropping it releases its robot.
pub struct LocalSession {
    shared: Arc<Shared>,
    id: SessionId,
    events: bool,
}

impl LocalSession {
    pub fn id(&self) -> SessionId {
        self.id
    }

    pub fn execute(&mut self, body: &str) -> Reply {
        self.shared.handle_text(self.id, body, &mut self.events)
    }
}

impl Drop for LocalSession {
    fn drop(&mut self) {
        self.shared.close_session(self.id);
    }
}
