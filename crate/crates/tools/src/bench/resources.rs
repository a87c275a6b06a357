// SPDX-License-Identifier: Apache-2.0

//! RSS and CPU sampling of the service processes.

use std::ffi::OsStr;
use std::fmt;
use std::thread;
use std::time::{Duration, Instant};

use sysinfo::{Pid, ProcessRefreshKind, ProcessesToUpdate, System};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Idle,
    Active,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Idle => "idle",
            Phase::Active => "active",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResourceStats {
    pub process: String,
    pub phase: Phase,
    pub samples: usize,
    pub rss_mean_bytes: f64,
    pub rss_max_bytes: u64,
    pub cpu_mean_pct: f64,
    pub cpu_max_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sample {
    pub rss_bytes: u64,
    pub cpu_pct: f64,
}

pub fn summarize(process: &str, phase: Phase, samples: &[Sample]) -> ResourceStats {
    let n = samples.len().max(1) as f64;
    ResourceStats {
        process: process.to_string(),
        phase,
        samples: samples.len(),
        rss_mean_bytes: samples.iter().map(|s| s.rss_bytes as f64).sum::<f64>() / n,
        rss_max_bytes: samples.iter().map(|s| s.rss_bytes).max().unwrap_or(0),
        cpu_mean_pct: samples.iter().map(|s| s.cpu_pct).sum::<f64>() / n,
        cpu_max_pct: samples.iter().map(|s| s.cpu_pct).fold(0.0, f64::max),
    }
}

/// Finds running processes by executable name.
pub fn find_pids(names: &[&str]) -> Vec<(String, u32)> {
    let mut sys = System::new();
    sys.refresh_processes(ProcessesToUpdate::All, true);
    names
        .iter()
        .filter_map(|n| sys.processes_by_exact_name(OsStr::new(n)).next().map(|p| (n.to_string(), p.pid().as_u32())))
        .collect()
}

/// Samples a fixed set of processes at a fixed interval.
pub struct Sampler {
    sys: System,
    pids: Vec<(String, Pid)>,
    series: Vec<Vec<Sample>>,
}

impl Sampler {
    pub fn new(pids: &[(String, u32)]) -> Result<Self, String> {
        if !sysinfo::IS_SUPPORTED_SYSTEM {
            return Err("process sampling is not supported on this platform".into());
        }
        if pids.is_empty() {
            return Err("no service process ids known".into());
        }
        let pids: Vec<(String, Pid)> = pids.iter().map(|(n, p)| (n.clone(), Pid::from_u32(*p))).collect();
        let mut s = Self { sys: System::new(), series: vec![Vec::new(); pids.len()], pids };
        // CPU usage is a delta between refreshes; this is the reference point
        s.refresh();
        for (name, pid) in &s.pids {
            if s.sys.process(*pid).is_none() {
                return Err(format!("{name} (pid {pid}) is not running"));
            }
        }
        Ok(s)
    }

    fn refresh(&mut self) {
        let ids: Vec<Pid> = self.pids.iter().map(|p| p.1).collect();
        self.sys.refresh_processes_specifics(
            ProcessesToUpdate::Some(&ids),
            true,
            ProcessRefreshKind::nothing().with_memory().with_cpu(),
        );
    }

    pub fn sample(&mut self) -> Result<(), String> {
        self.refresh();
        for (k, (name, pid)) in self.pids.iter().enumerate() {
            let p = self.sys.process(*pid).ok_or_else(|| format!("{name} (pid {pid}) exited during sampling"))?;
            self.series[k].push(Sample { rss_bytes: p.memory(), cpu_pct: p.cpu_usage() as f64 });
        }
        Ok(())
    }

    pub fn finish(self, phase: Phase) -> Vec<ResourceStats> {
        self.pids.iter().zip(&self.series).map(|((name, _), s)| summarize(name, phase, s)).collect()
    }
}

/// Takes `count` samples `interval` apart, calling `work` in between. With
/// no work the processes are left idle.
pub fn sample_during(
    pids: &[(String, u32)],
    phase: Phase,
    count: usize,
    interval: Duration,
    mut work: impl FnMut() -> Result<(), String>,
) -> Result<Vec<ResourceStats>, String> {
    let mut sampler = Sampler::new(pids)?;
    let start = Instant::now();
    for k in 1..=count {
        let due = start + interval * k as u32;
        loop {
            let now = Instant::now();
            if now >= due {
                break;
            }
            if phase == Phase::Active {
                work()?;
            } else {
                thread::sleep((due - now).min(Duration::from_millis(50)));
            }
        }
        sampler.sample()?;
    }
    Ok(sampler.finish(phase))
}
