// SPDX-License-Identifier: Apache-2.0

use std::time::Instant;

use super::ops::{Operation, Session};
use crate::services::Launcher;

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub cycle: usize,
    pub run: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalResult {
    pub operation: Operation,
    pub passes: usize,
    pub total: usize,
    pub failures: Vec<Failure>,
}

impl FunctionalResult {
    pub fn passed(&self) -> bool {
        self.passes == self.total && self.total > 0
    }
}

/// Slack allowed between wall time since launch and the reported sim time
/// of a freshly started pair.
const FRESH_SLACK_MS: u64 = 500;

/// Launches the services, runs `op` `runs` times checking its postcondition,
/// tears the services down, and repeats for `cycles` cycles.
pub fn functional_protocol(launcher: &mut dyn Launcher, op: Operation, cycles: usize, runs: usize) -> FunctionalResult {
    let mut res = FunctionalResult { operation: op, passes: 0, total: cycles * runs, failures: Vec::new() };
    for cycle in 0..cycles {
        let fail_all = |res: &mut FunctionalResult, message: String| {
            for run in 0..runs {
                res.failures.push(Failure { cycle, run, message: message.clone() });
            }
        };
        let launched = Instant::now();
        let services = match launcher.launch() {
            Ok(s) => s,
            Err(e) => {
                fail_all(&mut res, format!("launch failed: {e}"));
                continue;
            }
        };
        let mut session = match Session::open(services.plant_addr, services.twin_addr) {
            Ok(s) => s,
            Err(e) => {
                fail_all(&mut res, format!("session failed: {e}"));
                continue;
            }
        };
        let age_ms = launched.elapsed().as_millis() as u64 + FRESH_SLACK_MS;
        match (session.sim_time_ms(), session.plant_time_ms()) {
            (Ok(twin), Ok(plant)) if twin <= age_ms && plant <= age_ms => {}
            (Ok(twin), Ok(plant)) => {
                fail_all(&mut res, format!("services not fresh: twin at {twin} ms, plant at {plant} ms after {age_ms} ms"));
                continue;
            }
            (Err(e), _) | (_, Err(e)) => {
                fail_all(&mut res, e);
                continue;
            }
        }
        for run in 0..runs {
            match session.run(op, run) {
                Ok(_) => res.passes += 1,
                Err(message) => res.failures.push(Failure { cycle, run, message }),
            }
        }
        drop(session);
        drop(services);
    }
    res
}
