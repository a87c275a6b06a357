// SPDX-License-Identifier: Apache-2.0

//! Profiling harness: per-operation speed, process resources under idle and
//! active load, and the restart-cycle functional protocol.

mod functional;
mod ops;
mod report;
mod resources;
mod stats;

use std::net::SocketAddr;
use std::time::Duration;

pub use functional::{functional_protocol, Failure, FunctionalResult};
pub use ops::{Operation, Session, BATCH, ROBOT};
pub use report::{
    functional_csv, render_table, report_csv, resources_csv, speed_csv, write_report, BenchReport, ResourceSection,
    FUNCTIONAL_CSV_HEADER, REPORT_CSV_HEADER, RESOURCES_CSV_HEADER, SPEED_CSV_HEADER,
};
pub use resources::{find_pids, sample_during, Phase, ResourceStats, Sample, Sampler};
pub use stats::{busy_wait, measure, percentile, summarize, OpStats};

use crate::services::Launcher;

#[derive(Debug, Clone)]
pub struct SpeedConfig {
    pub runs: usize,
    pub topdown_captures: usize,
    pub topdown_delay: Duration,
}

impl Default for SpeedConfig {
    fn default() -> Self {
        Self { runs: 100, topdown_captures: 100, topdown_delay: Duration::from_secs(1) }
    }
}

/// Times every operation against running services.
pub fn bench_speed(plant: SocketAddr, twin: SocketAddr, cfg: &SpeedConfig) -> Result<Vec<OpStats>, String> {
    let mut session = Session::open(plant, twin)?;
    session.topdown_delay = cfg.topdown_delay;
    let mut out = Vec::new();
    for op in Operation::ALL {
        let runs = if op == Operation::TopdownCapture { cfg.topdown_captures } else { cfg.runs };
        let mut samples = Vec::with_capacity(runs);
        for i in 0..runs {
            samples.push(session.run(op, i).map_err(|e| format!("{op} run {i}: {e}"))?);
        }
        log::info!("{op}: {runs} runs");
        out.push(summarize(op.name(), &samples));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ResourceConfig {
    pub samples: usize,
    pub interval: Duration,
}

impl Default for ResourceConfig {
    fn default() -> Self {
        Self { samples: 60, interval: Duration::from_secs(1) }
    }
}

/// Idle baseline first, then the same duration under a continuous loop of
/// the speed-suite operations.
pub fn bench_resources(
    pids: &[(String, u32)],
    plant: SocketAddr,
    twin: SocketAddr,
    cfg: &ResourceConfig,
) -> ResourceSection {
    let idle = match sample_during(pids, Phase::Idle, cfg.samples, cfg.interval, || Ok(())) {
        Ok(v) => v,
        Err(e) => return ResourceSection::Unavailable(e),
    };
    let mut session = match Session::open(plant, twin) {
        Ok(s) => s,
        Err(e) => return ResourceSection::Unavailable(e),
    };
    let mut i = 0usize;
    let active = sample_during(pids, Phase::Active, cfg.samples, cfg.interval, || {
        let op = Operation::ALL[i % Operation::ALL.len()];
        i += 1;
        session.run(op, i / Operation::ALL.len()).map(|_| ())
    });
    match active {
        Ok(v) => ResourceSection::Measured(idle.into_iter().chain(v).collect()),
        Err(e) => ResourceSection::Unavailable(e),
    }
}

pub fn bench_functional(launcher: &mut dyn Launcher, cycles: usize, runs: usize) -> Vec<FunctionalResult> {
    Operation::ALL
        .iter()
        .map(|&op| {
            let r = functional_protocol(launcher, op, cycles, runs);
            log::info!("{op}: {}/{}", r.passes, r.total);
            r
        })
        .collect()
}
