// SPDX-License-Identifier: Apache-2.0

//! Plant surrogate process serving the mirror protocol.

use std::io::Write;
use std::process::ExitCode;
use std::thread;
use std::time::Duration;

use clap::Parser;
use npptwin::mirror::{serve_mirror, ClockMode, PlantService, DEFAULT_PORT};
use npptwin::plant::Plant;

#[derive(Parser, Debug)]
#[command(name = "plantd", version, about = "Lumped PWR surrogate behind the mirror protocol")]
struct Args {
    /// Listen port; 0 picks a free one.
    #[arg(long, env = "NPPTWIN_PLANT_PORT", default_value_t = DEFAULT_PORT)]
    port: u16,
    #[arg(long, env = "NPPTWIN_PLANT_HOST", default_value = "127.0.0.1")]
    host: String,
    /// Integration step in milliseconds.
    #[arg(long, env = "NPPTWIN_PLANT_TICK_MS", default_value_t = 50)]
    tick_ms: u64,
    /// rt or lockstep.
    #[arg(long, env = "NPPTWIN_PLANT_MODE", default_value = "rt")]
    mode: ClockMode,
    /// Accepted for symmetry with twind; the plant is deterministic.
    #[arg(long, env = "NPPTWIN_PLANT_SEED", default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let plant = match Plant::nominal(args.tick_ms) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("plantd: {e}");
            return ExitCode::from(2);
        }
    };
    let svc = PlantService::new(plant, args.mode);
    let server = match serve_mirror(svc, (args.host.as_str(), args.port)) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("plantd: cannot listen on {}:{}: {e}", args.host, args.port);
            return ExitCode::from(1);
        }
    };
    log::info!("mode {} tick {} ms seed {}", args.mode.as_str(), args.tick_ms, args.seed);
    let mut out = std::io::stdout();
    let _ = writeln!(out, "plantd listening on {}", server.local_addr());
    let _ = out.flush();
    loop {
        thread::sleep(Duration::from_secs(3600));
    }
}
