// SPDX-License-Identifier: Apache-2.0

//! Twin-side half of the mirror: a blocking protocol client, the snapshot
//! cache the twin reads from, and the poller that keeps it fresh.

use std::collections::{HashMap, HashSet};
use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::protocol::{ClockMode, MirrorRequest, ProtocolError};
use crate::decimal::Decimal;
use crate::plant::{Access, VariableDescriptor};

pub const DEFAULT_POLL_PERIOD: Duration = Duration::from_millis(100);
const BACKOFF_MIN: Duration = Duration::from_millis(100);
const BACKOFF_MAX: Duration = Duration::from_secs(5);
const IO_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, thiserror::Error)]
pub enum MirrorError {
    #[error("mirror i/o: {0}")]
    Io(#[from] io::Error),
    #[error("mirror server replied {0}")]
    Protocol(ProtocolError),
    #[error("malformed mirror response: {0}")]
    Malformed(String),
    #[error("mirror disconnected")]
    Disconnected,
}

pub struct MirrorClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    line: String,
}

impl MirrorClient {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self, MirrorError> {
        let addr = addr
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| MirrorError::Malformed("address resolves to nothing".into()))?;
        Self::connect_timeout(&addr, Duration::from_secs(2))
    }

    pub fn connect_timeout(addr: &SocketAddr, timeout: Duration) -> Result<Self, MirrorError> {
        let stream = TcpStream::connect_timeout(addr, timeout)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(IO_TIMEOUT))?;
        stream.set_write_timeout(Some(IO_TIMEOUT))?;
        Ok(Self { reader: BufReader::new(stream.try_clone()?), writer: stream, line: String::new() })
    }

    fn read_line(&mut self) -> Result<&str, MirrorError> {
        self.line.clear();
        let n = self.reader.read_line(&mut self.line)?;
        if n == 0 {
            return Err(MirrorError::Disconnected);
        }
        if self.line.pop() != Some('\n') {
            return Err(MirrorError::Malformed("unterminated line".into()));
        }
        Ok(&self.line)
    }

    /// Sends one raw line and returns the first response line (without LF).
    pub fn request_line(&mut self, line: &str) -> Result<String, MirrorError> {
        let mut out = Vec::with_capacity(line.len() + 1);
        out.extend_from_slice(line.as_bytes());
        out.push(b'\n');
        self.writer.write_all(&out)?;
        Ok(self.read_line()?.to_string())
    }

    fn ok_payload(line: String) -> Result<String, MirrorError> {
        if let Some(rest) = line.strip_prefix("ERR ") {
            let (code, msg) = rest.split_once(' ').unwrap_or((rest, ""));
            let code = code.parse().map_err(|_| MirrorError::Malformed(line.clone()))?;
            return Err(MirrorError::Protocol(ProtocolError { code, message: msg.to_string() }));
        }
        match line.strip_prefix("OK") {
            Some("") => Ok(String::new()),
            Some(rest) if rest.starts_with(' ') => Ok(rest[1..].to_string()),
            _ => Err(MirrorError::Malformed(line)),
        }
    }

    fn values(&mut self, req: &MirrorRequest, expect: usize) -> Result<Vec<f64>, MirrorError> {
        let payload = Self::ok_payload(self.request_line(&req.to_string())?)?;
        let vals: Vec<f64> = payload
            .split(' ')
            .map(|t| t.parse::<f64>().map_err(|_| MirrorError::Malformed(payload.clone())))
            .collect::<Result<_, _>>()?;
        if vals.len() != expect {
            return Err(MirrorError::Malformed(format!("expected {expect} values, got {}", vals.len())));
        }
        Ok(vals)
    }

    fn time(&mut self, req: &MirrorRequest) -> Result<u64, MirrorError> {
        let payload = Self::ok_payload(self.request_line(&req.to_string())?)?;
        payload.parse().map_err(|_| MirrorError::Malformed(payload))
    }

    pub fn list(&mut self) -> Result<Vec<VariableDescriptor>, MirrorError> {
        let payload = Self::ok_payload(self.request_line("LIST")?)?;
        let count: usize = payload.parse().map_err(|_| MirrorError::Malformed(payload.clone()))?;
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let line = self.read_line()?.to_string();
            let f: Vec<&str> = line.split(' ').collect();
            let bad = || MirrorError::Malformed(line.clone());
            if f.len() != 5 {
                return Err(bad());
            }
            let access = match f[2] {
                "ro" => Access::ReadOnly,
                "rw" => Access::ReadWrite,
                _ => return Err(bad()),
            };
            out.push(VariableDescriptor {
                name: f[0].to_string(),
                unit: f[1].to_string(),
                access,
                min: f[3].parse().map_err(|_| bad())?,
                max: f[4].parse().map_err(|_| bad())?,
            });
        }
        if self.read_line()? != "END" {
            return Err(MirrorError::Malformed("missing END".into()));
        }
        Ok(out)
    }

    pub fn get(&mut self, name: &str) -> Result<f64, MirrorError> {
        Ok(self.values(&MirrorRequest::Get(name.to_string()), 1)?[0])
    }

    pub fn mget(&mut self, names: &[String]) -> Result<Vec<f64>, MirrorError> {
        self.values(&MirrorRequest::MGet(names.to_vec()), names.len())
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<f64, MirrorError> {
        let d = Decimal::from_f64(value).ok_or_else(|| MirrorError::Malformed("non-finite value".into()))?;
        Ok(self.values(&MirrorRequest::Set(name.to_string(), d), 1)?[0])
    }

    pub fn mset(&mut self, pairs: &[(String, f64)]) -> Result<Vec<f64>, MirrorError> {
        let pairs = pairs
            .iter()
            .map(|(n, v)| {
                Decimal::from_f64(*v)
                    .map(|d| (n.clone(), d))
                    .ok_or_else(|| MirrorError::Malformed("non-finite value".into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let n = pairs.len();
        self.values(&MirrorRequest::MSet(pairs), n)
    }

    pub fn tick(&mut self) -> Result<u64, MirrorError> {
        self.time(&MirrorRequest::Tick)
    }

    pub fn mode(&mut self, mode: ClockMode) -> Result<u64, MirrorError> {
        self.time(&MirrorRequest::Mode(mode))
    }

    pub fn advance(&mut self, ms: u64) -> Result<u64, MirrorError> {
        self.time(&MirrorRequest::Advance(ms))
    }
}

/// One atomically published set of mirrored values, all sampled at the same
/// plant step.
#[derive(Debug, Clone, Default)]
pub struct Generation {
    pub seq: u64,
    pub sim_time_ms: u64,
    pub values: HashMap<String, f64>,
    pub fetched_at: Option<Instant>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CachedValue {
    pub value: f64,
    pub sim_time_ms: u64,
    pub staleness_ms: u64,
    /// Set while the link is down; the value is the last good sample.
    pub stale: bool,
}

#[derive(Default)]
struct CacheInner {
    generation: RwLock<Arc<Generation>>,
    pending: Mutex<Vec<(String, f64)>>,
    descriptors: RwLock<Arc<Vec<VariableDescriptor>>>,
    connected: AtomicBool,
}

/// Shared, thread-safe view of the mirrored plant variables.
#[derive(Clone, Default)]
pub struct MirrorCache {
    inner: Arc<CacheInner>,
}

impl MirrorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn generation(&self) -> Arc<Generation> {
        self.inner.generation.read().unwrap().clone()
    }

    pub fn descriptors(&self) -> Arc<Vec<VariableDescriptor>> {
        self.inner.descriptors.read().unwrap().clone()
    }

    pub fn descriptor(&self, name: &str) -> Option<VariableDescriptor> {
        self.descriptors().iter().find(|d| d.name == name).cloned()
    }

    pub fn is_connected(&self) -> bool {
        self.inner.connected.load(Ordering::Acquire)
    }

    pub fn value(&self, name: &str) -> Option<CachedValue> {
        let g = self.generation();
        let value = *g.values.get(name)?;
        Some(CachedValue {
            value,
            sim_time_ms: g.sim_time_ms,
            staleness_ms: g.fetched_at.map(|t| t.elapsed().as_millis() as u64).unwrap_or(u64::MAX),
            stale: !self.is_connected(),
        })
    }

    /// Wall-clock age of the current generation.
    pub fn staleness(&self) -> Option<Duration> {
        self.generation().fetched_at.map(|t| t.elapsed())
    }

    pub fn enqueue_write(&self, name: impl Into<String>, value: f64) {
        self.inner.pending.lock().unwrap().push((name.into(), value));
    }

    pub fn pending_writes(&self) -> usize {
        self.inner.pending.lock().unwrap().len()
    }

    fn take_pending(&self) -> Vec<(String, f64)> {
        std::mem::take(&mut *self.inner.pending.lock().unwrap())
    }

    fn restore_pending(&self, mut writes: Vec<(String, f64)>) {
        let mut p = self.inner.pending.lock().unwrap();
        writes.append(&mut p);
        *p = writes;
    }

    fn publish(&self, sim_time_ms: u64, values: HashMap<String, f64>) {
        let mut slot = self.inner.generation.write().unwrap();
        let seq = slot.seq + 1;
        *slot = Arc::new(Generation { seq, sim_time_ms, values, fetched_at: Some(Instant::now()) });
    }
}

/// Splits writes into MSET batches with unique names, preserving order, so
/// no acknowledged value is overwritten inside its own batch.
fn batches(writes: &[(String, f64)]) -> Vec<Vec<(String, f64)>> {
    let mut out: Vec<Vec<(String, f64)>> = Vec::new();
    let mut seen = HashSet::new();
    for w in writes {
        let full = out.last().map_or(true, |b| b.len() >= super::protocol::MAX_BATCH);
        if full || !seen.insert(w.0.clone()) {
            seen.clear();
            seen.insert(w.0.clone());
            out.push(Vec::new());
        }
        out.last_mut().unwrap().push(w.clone());
    }
    out
}

#[derive(Debug)]
struct Backoff {
    delay: Duration,
    next_attempt: Option<Instant>,
}

impl Backoff {
    fn new() -> Self {
        Self { delay: BACKOFF_MIN, next_attempt: None }
    }

    fn ready(&self) -> bool {
        self.next_attempt.map_or(true, |t| Instant::now() >= t)
    }

    fn failed(&mut self) {
        self.next_attempt = Some(Instant::now() + self.delay);
        self.delay = (self.delay * 2).min(BACKOFF_MAX);
    }

    fn reset(&mut self) {
        *self = Self::new();
    }
}

/// Owns the connection to the plant and moves data between it and a
/// [`MirrorCache`]. Used directly by a lockstep twin, or wrapped by a
/// [`Poller`] in rt mode.
pub struct MirrorLink {
    addr: String,
    cache: MirrorCache,
    client: Option<MirrorClient>,
    names: Vec<String>,
    has_clock_var: bool,
    mode: Option<ClockMode>,
    backoff: Backoff,
}

impl MirrorLink {
    pub fn new(addr: impl Into<String>, cache: MirrorCache) -> Self {
        Self {
            addr: addr.into(),
            cache,
            client: None,
            names: Vec::new(),
            has_clock_var: false,
            mode: None,
            backoff: Backoff::new(),
        }
    }

    /// Clock mode to request from the plant on every (re)connect.
    pub fn with_mode(mut self, mode: ClockMode) -> Self {
        self.mode = Some(mode);
        self
    }

    pub fn cache(&self) -> &MirrorCache {
        &self.cache
    }

    fn connect(&mut self) -> Result<(), MirrorError> {
        let addr = self
            .addr
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| MirrorError::Malformed(format!("cannot resolve {}", self.addr)))?;
        let mut client = MirrorClient::connect_timeout(&addr, Duration::from_millis(500))?;
        let descriptors = client.list()?;
        if let Some(m) = self.mode {
            client.mode(m)?;
        }
        self.has_clock_var = descriptors.iter().any(|d| d.name == "sim_time_ms");
        self.names = descriptors.iter().map(|d| d.name.clone()).take(super::protocol::MAX_BATCH).collect();
        *self.cache.inner.descriptors.write().unwrap() = Arc::new(descriptors);
        self.client = Some(client);
        Ok(())
    }

    fn disconnect(&mut self) {
        self.client = None;
        self.cache.inner.connected.store(false, Ordering::Release);
        self.backoff.failed();
    }

    /// One poll cycle: flush pending writes, optionally advance a lockstep
    /// plant, then refresh every variable with a single MGET.
    pub fn sync_once(&mut self, advance_ms: Option<u64>) -> Result<u64, MirrorError> {
        if self.client.is_none() {
            if !self.backoff.ready() {
                return Err(MirrorError::Disconnected);
            }
            if let Err(e) = self.connect() {
                self.disconnect();
                return Err(e);
            }
        }
        match self.cycle(advance_ms) {
            Ok(t) => {
                self.backoff.reset();
                self.cache.inner.connected.store(true, Ordering::Release);
                Ok(t)
            }
            Err(e) => {
                if !matches!(e, MirrorError::Protocol(_)) {
                    self.disconnect();
                }
                Err(e)
            }
        }
    }

    fn cycle(&mut self, advance_ms: Option<u64>) -> Result<u64, MirrorError> {
        let client = self.client.as_mut().ok_or(MirrorError::Disconnected)?;
        let writes = self.cache.take_pending();
        let mut groups = batches(&writes).into_iter();
        while let Some(batch) = groups.next() {
            match client.mset(&batch) {
                Ok(_) => {}
                Err(MirrorError::Protocol(e)) => {
                    log::warn!("mirror rejected write batch: {e}");
                }
                Err(e) => {
                    let mut rest = batch;
                    rest.extend(groups.flatten());
                    self.cache.restore_pending(rest);
                    return Err(e);
                }
            }
        }
        if let Some(ms) = advance_ms {
            client.advance(ms)?;
        }
        let vals = client.mget(&self.names)?;
        let values: HashMap<String, f64> = self.names.iter().cloned().zip(vals).collect();
        let sim_time = match values.get("sim_time_ms") {
            Some(t) if self.has_clock_var => *t as u64,
            _ => client.tick()?,
        };
        self.cache.publish(sim_time, values);
        Ok(sim_time)
    }
}

/// Background poller for rt mode.
pub struct Poller {
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl Poller {
    pub fn spawn(mut link: MirrorLink, period: Duration) -> Self {
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let handle = thread::Builder::new()
            .name("mirror-poller".into())
            .spawn(move || {
                let mut next = Instant::now();
                while !flag.load(Ordering::Acquire) {
                    if let Err(e) = link.sync_once(None) {
                        log::debug!("mirror poll failed: {e}");
                    }
                    next += period;
                    let now = Instant::now();
                    if next <= now {
                        next = now;
                    } else {
                        // sleep in slices so shutdown stays prompt
                        while !flag.load(Ordering::Acquire) && Instant::now() < next {
                            thread::sleep((next - Instant::now()).min(Duration::from_millis(20)));
                        }
                    }
                }
            })
            .expect("spawn mirror poller");
        Self { stop, handle: Some(handle) }
    }

    pub fn stop(&mut self) {
        self.stop.store(true, Ordering::Release);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Poller {
    fn drop(&mut self) {
        self.stop();
    }
}
