// SPDX-License-Identifier: Apache-2.0

//! Benchmark driver: speed, resources and the functional restart protocol.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, ValueEnum};
use npptwin::mirror::ClockMode;
use npptwin_tools::bench::{
    bench_functional, bench_resources, bench_speed, find_pids, render_table, write_report, BenchReport,
    ResourceConfig, ResourceSection, SpeedConfig,
};
use npptwin_tools::services::{Launcher, ProcessLauncher, Services};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Speed,
    Resources,
    Functional,
    All,
}

#[derive(Parser, Debug)]
#[command(name = "nppbench", version, about = "Profiles the plant + twin stack")]
struct Args {
    suite: Suite,
    /// Directory for report.csv, report.txt and per-section CSVs.
    #[arg(long)]
    out: PathBuf,
    /// Running plantd; with --twin-addr, benchmarks it instead of launching one.
    #[arg(long, requires = "twin_addr")]
    plant_addr: Option<SocketAddr>,
    /// Running twind bridge.
    #[arg(long, requires = "plant_addr")]
    twin_addr: Option<SocketAddr>,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 100)]
    topdown_captures: usize,
    /// Pause after each top-down capture, subtracted from its time.
    #[arg(long, default_value_t = 1000)]
    topdown_delay_ms: u64,
    /// Samples per resource phase, one per --sample-interval-ms.
    #[arg(long, default_value_t = 60)]
    samples: usize,
    #[arg(long, default_value_t = 1000)]
    sample_interval_ms: u64,
    #[arg(long, default_value_t = 10)]
    cycles: usize,
    #[arg(long, default_value_t = 10)]
    runs_per_cycle: usize,
    /// Clock mode of services this tool launches.
    #[arg(long, default_value = "rt")]
    mode: ClockMode,
    #[arg(long)]
    plantd: Option<PathBuf>,
    #[arg(long)]
    twind: Option<PathBuf>,
}

fn launcher(args: &Args) -> Result<ProcessLauncher, String> {
    let mut l = ProcessLauncher::beside_current_exe().map_err(|e| e.to_string())?;
    if let Some(p) = &args.plantd {
        l.plantd = p.clone();
    }
    if let Some(p) = &args.twind {
        l.twind = p.clone();
    }
    l.mode = args.mode;
    Ok(l)
}

struct Target {
    plant: SocketAddr,
    twin: SocketAddr,
    pids: Vec<(String, u32)>,
    _owned: Option<Services>,
}

fn target(args: &Args) -> Result<Target, String> {
    if let (Some(plant), Some(twin)) = (args.plant_addr, args.twin_addr) {
        return Ok(Target { plant, twin, pids: find_pids(&["plantd", "twind"]), _owned: None });
    }
    let mut l = launcher(args)?;
    let s = l.launch().map_err(|e| format!("cannot launch services ({} / {}): {e}", l.plantd.display(), l.twind.display()))?;
    Ok(Target { plant: s.plant_addr, twin: s.twin_addr, pids: s.pids.clone(), _owned: Some(s) })
}

fn run(args: &Args) -> Result<BenchReport, String> {
    let mut report = BenchReport {
        topdown_delay_ms: args.topdown_delay_ms,
        topdown_captures: args.topdown_captures,
        ..Default::default()
    };
    let wants = |s: Suite| args.suite == s || args.suite == Suite::All;
    if wants(Suite::Speed) || wants(Suite::Resources) {
        let t = target(args)?;
        if wants(Suite::Speed) {
            let cfg = SpeedConfig {
                runs: args.runs,
                topdown_captures: args.topdown_captures,
                topdown_delay: Duration::from_millis(args.topdown_delay_ms),
            };
            report.speed = bench_speed(t.plant, t.twin, &cfg).map_err(|e| format!("speed suite aborted: {e}"))?;
        }
        if wants(Suite::Resources) {
            let cfg = ResourceConfig { samples: args.samples, interval: Duration::from_millis(args.sample_interval_ms) };
            report.resources = bench_resources(&t.pids, t.plant, t.twin, &cfg);
            if let ResourceSection::Unavailable(why) = &report.resources {
                log::warn!("resource section unavailable: {why}");
            }
        }
    }
    if wants(Suite::Functional) {
        let mut l = launcher(args)?;
        report.functional = bench_functional(&mut l, args.cycles, args.runs_per_cycle);
    }
    Ok(report)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let report = match run(&args) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("nppbench: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = write_report(&report, &args.out) {
        eprintln!("nppbench: writing {}: {e}", args.out.display());
        return ExitCode::from(1);
    }
    print!("{}", render_table(&report));
    if report.functional.iter().all(|f| f.passed()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}
