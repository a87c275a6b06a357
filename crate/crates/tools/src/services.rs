// SPDX-License-Identifier: Apache-2.0

//! Starting and stopping a plant + twin pair, either as child processes or
//! inside the current process.

use std::any::Any;
use std::io::{self, BufRead, BufReader};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::{Child, ChildStdout, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use npptwin::mirror::{serve_mirror, BackendError, ClockMode, MirrorBackend, PlantService};
use npptwin::plant::{Plant, VariableDescriptor};
use npptwin::twin::{TwinConfig, TwinServer};
use npptwin::world::default_map;

/// A running plant + twin pair. Everything is torn down on drop.
pub struct Services {
    pub plant_addr: SocketAddr,
    pub twin_addr: SocketAddr,
    pub http_addr: Option<SocketAddr>,
    /// `(name, pid)` of each service process; empty when in-process.
    pub pids: Vec<(String, u32)>,
    _guard: Box<dyn Any>,
}

pub trait Launcher {
    fn launch(&mut self) -> io::Result<Services>;
}

struct Children(Vec<(Child, BufReader<ChildStdout>)>);

impl Drop for Children {
    fn drop(&mut self) {
        for (child, _) in self.0.iter_mut().rev() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Spawns `plantd` and `twind` on ephemeral loopback ports.
#[derive(Debug, Clone)]
pub struct ProcessLauncher {
    pub plantd: PathBuf,
    pub twind: PathBuf,
    pub mode: ClockMode,
    pub tick_ms: u64,
    pub seed: u64,
    pub record_dir: Option<PathBuf>,
}

impl ProcessLauncher {
    pub fn new(plantd: impl Into<PathBuf>, twind: impl Into<PathBuf>) -> Self {
        Self { plantd: plantd.into(), twind: twind.into(), mode: ClockMode::Rt, tick_ms: 50, seed: 0, record_dir: None }
    }

    /// Binaries next to the running executable.
    pub fn beside_current_exe() -> io::Result<Self> {
        let exe = std::env::current_exe()?;
        let dir = exe.parent().ok_or_else(|| io::Error::new(io::ErrorKind::NotFound, "executable has no directory"))?;
        let suffix = std::env::consts::EXE_SUFFIX;
        Ok(Self::new(dir.join(format!("plantd{suffix}")), dir.join(format!("twind{suffix}"))))
    }
}

fn spawn(mut cmd: Command) -> io::Result<(Child, BufReader<ChildStdout>, String)> {
    for (k, _) in std::env::vars() {
        if k.starts_with("NPPTWIN_") {
            cmd.env_remove(k);
        }
    }
    cmd.stdin(Stdio::null()).stdout(Stdio::piped()).stderr(Stdio::null());
    let mut child = cmd.spawn()?;
    let mut out = BufReader::new(child.stdout.take().expect("stdout is piped"));
    let mut line = String::new();
    if out.read_line(&mut line)? == 0 {
        let status = child.wait()?;
        return Err(io::Error::new(io::ErrorKind::Other, format!("{cmd:?} exited before announcing its address ({status})")));
    }
    Ok((child, out, line.trim_end().to_string()))
}

fn addr_after(line: &str, key: &str) -> io::Result<SocketAddr> {
    let mut words = line.split(' ');
    while let Some(w) = words.next() {
        if w == key {
            if let Some(a) = words.next().and_then(|a| a.parse().ok()) {
                return Ok(a);
            }
        }
    }
    Err(io::Error::new(io::ErrorKind::InvalidData, format!("no {key} address in {line:?}")))
}

impl Launcher for ProcessLauncher {
    fn launch(&mut self) -> io::Result<Services> {
        let mut children = Children(Vec::new());
        let mut plant = Command::new(&self.plantd);
        plant.args(["--port", "0", "--mode", self.mode.as_str()]);
        plant.args(["--tick-ms", &self.tick_ms.to_string(), "--seed", &self.seed.to_string()]);
        let (child, out, line) = spawn(plant)?;
        let plant_pid = child.id();
        children.0.push((child, out));
        let plant_addr = addr_after(&line, "on")?;

        let mut twin = Command::new(&self.twind);
        twin.args(["--bridge-port", "0", "--http-port", "0", "--plant-addr", &plant_addr.to_string()]);
        twin.args(["--mode", self.mode.as_str(), "--tick-ms", &self.tick_ms.to_string()]);
        twin.args(["--seed", &self.seed.to_string()]);
        if let Some(dir) = &self.record_dir {
            twin.arg("--record-dir").arg(dir);
        }
        let (child, out, line) = spawn(twin)?;
        let twin_pid = child.id();
        children.0.push((child, out));
        Ok(Services {
            plant_addr,
            twin_addr: addr_after(&line, "bridge")?,
            http_addr: addr_after(&line, "http").ok(),
            pids: vec![("plantd".into(), plant_pid), ("twind".into(), twin_pid)],
            _guard: Box::new(children),
        })
    }
}

pub type BackendFactory = Box<dyn FnMut(ClockMode) -> Arc<dyn MirrorBackend>>;

/// Plant and twin as threads of this process. The backend factory allows
/// substituting the plant, e.g. with [`DroppingWrites`].
pub struct InProcessLauncher {
    pub mode: ClockMode,
    pub tick_ms: u64,
    pub seed: u64,
    backend: BackendFactory,
}

impl InProcessLauncher {
    pub fn new(mode: ClockMode) -> Self {
        Self::with_backend(mode, Box::new(|mode| PlantService::new(Plant::nominal(50).expect("nominal plant"), mode)))
    }

    pub fn with_backend(mode: ClockMode, backend: BackendFactory) -> Self {
        Self { mode, tick_ms: 50, seed: 0, backend }
    }
}

impl Launcher for InProcessLauncher {
    fn launch(&mut self) -> io::Result<Services> {
        let backend = (self.backend)(self.mode);
        let plant = serve_mirror(backend, "127.0.0.1:0")?;
        let mut cfg = TwinConfig::loopback(Arc::new(default_map()), Some(plant.local_addr().to_string()));
        cfg.mode = self.mode;
        cfg.tick_ms = self.tick_ms;
        cfg.seed = self.seed;
        let twin = TwinServer::start(cfg)?;
        Ok(Services {
            plant_addr: plant.local_addr(),
            twin_addr: twin.bridge_addr(),
            http_addr: twin.http_addr(),
            pids: Vec::new(),
            _guard: Box::new((twin, plant)),
        })
    }
}

/// Fault injection: acknowledges every write but silently discards every
/// `period`-th SET/MSET.
pub struct DroppingWrites<B: ?Sized> {
    inner: Arc<B>,
    period: u64,
    calls: AtomicU64,
}

impl<B: MirrorBackend + ?Sized> DroppingWrites<B> {
    pub fn new(inner: Arc<B>, period: u64) -> Self {
        Self { inner, period: period.max(1), calls: AtomicU64::new(0) }
    }
}

impl<B: MirrorBackend + ?Sized> MirrorBackend for DroppingWrites<B> {
    fn list(&self) -> Vec<VariableDescriptor> {
        self.inner.list()
    }

    fn get(&self, names: &[String]) -> Result<Vec<f64>, BackendError> {
        self.inner.get(names)
    }

    fn set(&self, pairs: &[(String, f64)]) -> Result<Vec<f64>, BackendError> {
        let n = self.calls.fetch_add(1, Ordering::Relaxed) + 1;
        if n % self.period == 0 {
            let known = self.list();
            return pairs
                .iter()
                .map(|(name, v)| match known.iter().find(|d| &d.name == name) {
                    Some(d) => Ok(d.clamp(*v)),
                    None => Err(BackendError::NotFound(name.clone())),
                })
                .collect();
        }
        self.inner.set(pairs)
    }

    fn sim_time_ms(&self) -> u64 {
        self.inner.sim_time_ms()
    }

    fn set_mode(&self, mode: ClockMode) -> u64 {
        self.inner.set_mode(mode)
    }

    fn advance(&self, ms: u64) -> Result<u64, BackendError> {
        self.inner.advance(ms)
    }
}
