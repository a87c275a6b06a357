// SPDX-License-Identifier: Apache-2.0

//! Twin server process: command bridge, browser gateway and tick loop.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use clap::Parser;
use npptwin::bridge::DEFAULT_PORT as BRIDGE_PORT;
use npptwin::mirror::ClockMode;
use npptwin::render::DEFAULT_TOPDOWN_INTERVAL_MS;
use npptwin::twin::{TwinConfig, TwinServer, DEFAULT_HTTP_PORT, DEFAULT_TICK_MS};
use npptwin::world::{default_map, load_map};

#[derive(Parser, Debug)]
#[command(name = "twind", version, about = "Digital twin server")]
struct Args {
    /// Framed command bridge port; 0 picks a free one.
    #[arg(long, env = "NPPTWIN_BRIDGE_PORT", default_value_t = BRIDGE_PORT)]
    bridge_port: u16,
    /// Browser gateway port; 0 picks a free one.
    #[arg(long, env = "NPPTWIN_HTTP_PORT", default_value_t = DEFAULT_HTTP_PORT)]
    http_port: u16,
    /// Address both ports bind to.
    #[arg(long, env = "NPPTWIN_HOST", default_value = "127.0.0.1")]
    host: String,
    /// Mirror endpoint of the plant, or "none".
    #[arg(long, env = "NPPTWIN_PLANT_ADDR", default_value = "127.0.0.1:9100")]
    plant_addr: String,
    /// World map JSON; the bundled plant map when absent.
    #[arg(long, env = "NPPTWIN_MAP")]
    map: Option<PathBuf>,
    #[arg(long, env = "NPPTWIN_TICK_MS", default_value_t = DEFAULT_TICK_MS)]
    tick_ms: u64,
    /// rt or lockstep.
    #[arg(long, env = "NPPTWIN_MODE", default_value = "rt")]
    mode: ClockMode,
    #[arg(long, env = "NPPTWIN_SEED", default_value_t = 0)]
    seed: u64,
    /// Trace CSVs and periodic top-down captures are written here.
    #[arg(long, env = "NPPTWIN_RECORD_DIR")]
    record_dir: Option<PathBuf>,
    #[arg(long, env = "NPPTWIN_TOPDOWN_INTERVAL_MS", default_value_t = DEFAULT_TOPDOWN_INTERVAL_MS)]
    topdown_interval_ms: u64,
}

fn config(args: Args) -> Result<TwinConfig, String> {
    let map = match &args.map {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            load_map(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => default_map(),
    };
    if args.tick_ms == 0 {
        return Err("--tick-ms must be at least 1".into());
    }
    if args.topdown_interval_ms == 0 {
        return Err("--topdown-interval-ms must be at least 1".into());
    }
    Ok(TwinConfig {
        bridge_addr: format!("{}:{}", args.host, args.bridge_port),
        http_addr: Some(format!("{}:{}", args.host, args.http_port)),
        plant_addr: (args.plant_addr != "none").then_some(args.plant_addr),
        tick_ms: args.tick_ms,
        mode: args.mode,
        seed: args.seed,
        record_dir: args.record_dir,
        topdown_interval_ms: args.topdown_interval_ms,
        ..TwinConfig::new(Arc::new(map))
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cfg = match config(Args::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("twind: {e}");
            return ExitCode::from(2);
        }
    };
    let server = match TwinServer::start(cfg) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("twind: {e}");
            return ExitCode::from(1);
        }
    };
    let http = server.http_addr().map(|a| a.to_string()).unwrap_or_else(|| "none".into());
    let mut out = std::io::stdout();
    let _ = writeln!(out, "twind bridge {} http {}", server.bridge_addr(), http);
    let _ = out.flush();
    if server.config().mode == ClockMode::Lockstep {
        log::info!("lockstep: time advances only on env steps and sim/advance");
    }
    loop {
        thread::sleep(Duration::from_secs(3600));
    }
}
