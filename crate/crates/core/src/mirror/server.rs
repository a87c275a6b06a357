// SPDX-License-Identifier: Apache-2.0

//! Mirror protocol server and the plant process backend.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::protocol::{parse_request, ClockMode, MirrorRequest, MirrorResponse, ProtocolError, MAX_LINE_BYTES};
use crate::net::Acceptor;
use crate::plant::{registry, Plant, PlantError, VarId, VariableDescriptor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("unknown variable {0}")]
    NotFound(String),
    #[error("variable {0} is read-only")]
    Forbidden(String),
    #[error("operation requires lockstep mode")]
    Mode,
    #[error("{0}")]
    Other(String),
}

impl From<BackendError> for ProtocolError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::NotFound(n) => ProtocolError { code: 404, message: n },
            BackendError::Forbidden(n) => ProtocolError { code: 403, message: n },
            BackendError::Mode => ProtocolError { code: 409, message: "mode".into() },
            BackendError::Other(m) => ProtocolError { code: 500, message: m },
        }
    }
}

/// Anything that can stand behind the mirror protocol: the plant surrogate,
/// a scripted fake, or a bridge to physical plant instrumentation.
///
/// `get` must return every value from one consistent sample, and `set` must
/// either apply every pair or none.
pub trait MirrorBackend: Send + Sync + 'static {
    fn list(&self) -> Vec<VariableDescriptor>;
    fn get(&self, names: &[String]) -> Result<Vec<f64>, BackendError>;
    fn set(&self, pairs: &[(String, f64)]) -> Result<Vec<f64>, BackendError>;
    fn sim_time_ms(&self) -> u64;
    fn set_mode(&self, mode: ClockMode) -> u64;
    fn advance(&self, ms: u64) -> Result<u64, BackendError>;
}

/// Executes one request line against a backend and returns the full wire
/// response.
pub fn handle_line<B: MirrorBackend + ?Sized>(backend: &B, line: &str) -> String {
    let response = match parse_request(line) {
        Err(e) => MirrorResponse::Error(e),
        Ok(req) => execute(backend, req).unwrap_or_else(|e| MirrorResponse::Error(e.into())),
    };
    response.encode()
}

fn execute<B: MirrorBackend + ?Sized>(backend: &B, req: MirrorRequest) -> Result<MirrorResponse, BackendError> {
    Ok(match req {
        MirrorRequest::List => MirrorResponse::List(backend.list()),
        MirrorRequest::Get(n) => MirrorResponse::Values(backend.get(&[n])?),
        MirrorRequest::MGet(names) => MirrorResponse::Values(backend.get(&names)?),
        MirrorRequest::Set(n, v) => MirrorResponse::Values(backend.set(&[(n, v.value())])?),
        MirrorRequest::MSet(pairs) => {
            let pairs: Vec<_> = pairs.into_iter().map(|(n, v)| (n, v.value())).collect();
            MirrorResponse::Values(backend.set(&pairs)?)
        }
        MirrorRequest::Tick => MirrorResponse::Time(backend.sim_time_ms()),
        MirrorRequest::Mode(m) => MirrorResponse::Time(backend.set_mode(m)),
        MirrorRequest::Advance(ms) => MirrorResponse::Time(backend.advance(ms)?),
    })
}

fn serve_connection<B: MirrorBackend + ?Sized>(backend: &B, stream: TcpStream) -> io::Result<()> {
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut buf = Vec::with_capacity(256);
    loop {
        buf.clear();
        let n = io::Read::take(&mut reader, MAX_LINE_BYTES as u64 + 2).read_until(b'\n', &mut buf)?;
        if n == 0 {
            return Ok(());
        }
        if buf.last() != Some(&b'\n') {
            let e = ProtocolError::bad_request("line too long or unterminated");
            writer.write_all(MirrorResponse::Error(e).encode().as_bytes())?;
            return Ok(());
        }
        buf.pop();
        let reply = match std::str::from_utf8(&buf) {
            Ok(line) => handle_line(backend, line),
            Err(_) => MirrorResponse::Error(ProtocolError::bad_request("invalid utf-8")).encode(),
        };
        writer.write_all(reply.as_bytes())?;
    }
}

/// A running mirror server. Stops when dropped.
pub struct MirrorServer {
    acceptor: Acceptor,
}

impl MirrorServer {
    pub fn local_addr(&self) -> SocketAddr {
        self.acceptor.local_addr()
    }

    pub fn shutdown(&mut self) {
        self.acceptor.shutdown();
    }
}

pub fn serve_mirror<B, A>(backend: Arc<B>, addr: A) -> io::Result<MirrorServer>
where
    B: MirrorBackend + ?Sized,
    A: ToSocketAddrs,
{
    let acceptor = Acceptor::bind(addr, "mirror", move |stream, id| {
        if let Err(e) = serve_connection(backend.as_ref(), stream) {
            log::debug!("mirror connection {id} closed: {e}");
        }
    })?;
    Ok(MirrorServer { acceptor })
}

struct PlantCore {
    plant: Plant,
    mode: ClockMode,
}

/// The plant process: a [`Plant`] behind a mutex, stepped on the wall clock
/// in rt mode and only by `ADVANCE` in lockstep mode. All reads and writes
/// take the same lock as the integrator, so they always land between steps.
pub struct PlantService {
    core: Mutex<PlantCore>,
    stop: AtomicBool,
    runner: Mutex<Option<JoinHandle<()>>>,
}

impl PlantService {
    pub fn new(plant: Plant, mode: ClockMode) -> Arc<Self> {
        let svc = Arc::new(Self {
            core: Mutex::new(PlantCore { plant, mode }),
            stop: AtomicBool::new(false),
            runner: Mutex::new(None),
        });
        let weak = Arc::downgrade(&svc);
        let tick = svc.core.lock().unwrap().plant.tick_ms();
        let handle = thread::Builder::new()
            .name("plant-integrator".into())
            .spawn(move || {
                let period = Duration::from_millis(tick);
                let mut next = Instant::now() + period;
                loop {
                    let now = Instant::now();
                    if next > now {
                        thread::sleep(next - now);
                    }
                    let Some(svc) = weak.upgrade() else { return };
                    if svc.stop.load(Ordering::Acquire) {
                        return;
                    }
                    {
                        let mut core = svc.core.lock().unwrap();
                        if core.mode == ClockMode::Rt {
                            if let Err(e) = core.plant.step(tick) {
                                log::error!("plant step failed: {e}");
                            }
                        }
                    }
                    next += period;
                    let now = Instant::now();
                    if now > next + period {
                        log::warn!("plant integrator overrun by {:?}", now - next);
                        next = now;
                    }
                }
            })
            .expect("spawn plant integrator");
        *svc.runner.lock().unwrap() = Some(handle);
        svc
    }

    pub fn with_plant<R>(&self, f: impl FnOnce(&mut Plant) -> R) -> R {
        f(&mut self.core.lock().unwrap().plant)
    }

    pub fn mode(&self) -> ClockMode {
        self.core.lock().unwrap().mode
    }

    pub fn stop(&self) {
        self.stop.store(true, Ordering::Release);
        if let Some(h) = self.runner.lock().unwrap().take() {
            let _ = h.join();
        }
    }
}

impl Drop for PlantService {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Release);
    }
}

fn plant_err(e: PlantError) -> BackendError {
    match e {
        PlantError::NotFound(n) => BackendError::NotFound(n),
        PlantError::Forbidden(n) => BackendError::Forbidden(n),
        other => BackendError::Other(other.to_string()),
    }
}

impl MirrorBackend for PlantService {
    fn list(&self) -> Vec<VariableDescriptor> {
        registry().to_vec()
    }

    fn get(&self, names: &[String]) -> Result<Vec<f64>, BackendError> {
        let core = self.core.lock().unwrap();
        let ids: Vec<VarId> = names.iter().map(|n| core.plant.resolve(n)).collect::<Result<_, _>>().map_err(plant_err)?;
        Ok(core.plant.read_ids(&ids))
    }

    fn set(&self, pairs: &[(String, f64)]) -> Result<Vec<f64>, BackendError> {
        let mut core = self.core.lock().unwrap();
        let mut ids = Vec::with_capacity(pairs.len());
        for (n, _) in pairs {
            let id = core.plant.resolve(n).map_err(plant_err)?;
            core.plant.check_writable(id).map_err(plant_err)?;
            ids.push(id);
        }
        ids.iter().zip(pairs).map(|(id, (_, v))| core.plant.write_id(*id, *v).map_err(plant_err)).collect()
    }

    fn sim_time_ms(&self) -> u64 {
        self.core.lock().unwrap().plant.sim_time_ms()
    }

    fn set_mode(&self, mode: ClockMode) -> u64 {
        let mut core = self.core.lock().unwrap();
        core.mode = mode;
        core.plant.sim_time_ms()
    }

    fn advance(&self, ms: u64) -> Result<u64, BackendError> {
        let mut core = self.core.lock().unwrap();
        if core.mode != ClockMode::Lockstep {
            return Err(BackendError::Mode);
        }
        core.plant.advance(ms).map_err(plant_err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lockstep_plant() -> Arc<PlantService> {
        PlantService::new(Plant::nominal(50).unwrap(), ClockMode::Lockstep)
    }

    #[test]
    fn read_only_write_is_forbidden() {
        let svc = lockstep_plant();
        assert_eq!(handle_line(svc.as_ref(), "SET core_power_mw 5"), "ERR 403 core_power_mw\n");
        assert_eq!(handle_line(svc.as_ref(), "GET nope"), "ERR 404 nope\n");
        assert!(handle_line(svc.as_ref(), "FROB x").starts_with("ERR 400 "));
    }

    #[test]
    fn set_echoes_clamped_value() {
        let svc = lockstep_plant();
        assert_eq!(handle_line(svc.as_ref(), "SET rod_position 2.0"), "OK 1\n");
        assert_eq!(handle_line(svc.as_ref(), "MSET rod_position=0.5 turbine_throttle=-1"), "OK 0.5 0\n");
        assert_eq!(handle_line(svc.as_ref(), "GET rod_position"), "OK 0.5\n");
    }

    #[test]
    fn mset_is_all_or_nothing() {
        let svc = lockstep_plant();
        assert_eq!(handle_line(svc.as_ref(), "MSET rod_position=0.5 t_avg_c=1"), "ERR 403 t_avg_c\n");
        assert_eq!(handle_line(svc.as_ref(), "GET rod_position"), "OK 1\n");
    }

    #[test]
    fn lockstep_clock() {
        let svc = lockstep_plant();
        assert_eq!(handle_line(svc.as_ref(), "ADVANCE 50"), "OK 50\n");
        assert_eq!(handle_line(svc.as_ref(), "ADVANCE 50"), "OK 100\n");
        assert_eq!(handle_line(svc.as_ref(), "TICK"), "OK 100\n");
        assert_eq!(handle_line(svc.as_ref(), "MODE rt"), "OK 100\n");
        assert_eq!(handle_line(svc.as_ref(), "ADVANCE 50"), "ERR 409 mode\n");
        svc.stop();
    }

    #[test]
    fn list_has_header_and_trailer() {
        let svc = lockstep_plant();
        let out = handle_line(svc.as_ref(), "LIST");
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], format!("OK {}", registry().len()));
        assert_eq!(*lines.last().unwrap(), "END");
        assert_eq!(lines.len(), registry().len() + 2);
        assert!(lines.contains(&"sg1_level_m m ro 0 20"));
        assert!(lines.contains(&"rod_position frac rw 0 1"));
    }

    #[test]
    fn mget_is_one_snapshot() {
        let svc = lockstep_plant();
        let out = handle_line(svc.as_ref(), "MGET t_hot_c t_avg_c t_cold_c");
        let v: Vec<f64> = out.trim_end().split(' ').skip(1).map(|s| s.parse().unwrap()).collect();
        assert!(((v[0] - v[1]) - (v[1] - v[2])).abs() < 1e-9);
    }

    #[test]
    fn rt_mode_advances_on_its_own() {
        let svc = PlantService::new(Plant::nominal(10).unwrap(), ClockMode::Rt);
        thread::sleep(Duration::from_millis(120));
        assert!(svc.sim_time_ms() >= 50);
        svc.stop();
    }
}
