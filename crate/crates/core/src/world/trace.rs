// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::World;

pub const TRACE_CSV_HEADER: &str = "t_ms,robot_id,x_m,y_m,z_m,yaw_deg";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t_ms: u64,
    pub robot_id: String,
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
    pub yaw_deg: f64,
}

impl TraceRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{:.3},{:.3},{:.3},{:.3}\n",
            self.t_ms, self.robot_id, self.x_m, self.y_m, self.z_m, self.yaw_deg
        )
    }
}

/// In-memory trace of one robot, mirrored to an optional CSV file.
#[derive(Debug, Default)]
pub struct TraceLog {
    pub records: Vec<TraceRecord>,
    sink: Option<File>,
}

impl TraceLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(TRACE_CSV_HEADER.len() + 1 + 48 * self.records.len());
        out.push_str(TRACE_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.csv_line());
        }
        out
    }
}

/// Per-tick trace logging for every robot with tracing enabled.
#[derive(Debug, Default)]
pub struct TraceRecorder {
    logs: BTreeMap<String, TraceLog>,
    dir: Option<PathBuf>,
}

fn trace_file(dir: &Path, robot_id: &str) -> PathBuf {
    dir.join(format!("trace_{robot_id}.csv"))
}

fn open_sink(dir: &Path, robot_id: &str) -> std::io::Result<File> {
    let mut f = File::create(trace_file(dir, robot_id))?;
    writeln!(f, "{TRACE_CSV_HEADER}")?;
    Ok(f)
}

impl TraceRecorder {
    /// Recorder that also writes `trace_<id>.csv` files into `dir`.
    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        Self { logs: BTreeMap::new(), dir: Some(dir.into()) }
    }

    pub fn log(&self, robot_id: &str) -> Option<&TraceLog> {
        self.logs.get(robot_id)
    }

    pub fn csv(&self, robot_id: &str) -> String {
        self.logs.get(robot_id).map(TraceLog::to_csv).unwrap_or_else(|| format!("{TRACE_CSV_HEADER}\n"))
    }

    /// Appends one record per traced robot. A robot whose sink fails has
    /// tracing switched off; the returned warnings describe each failure.
    pub fn record(&mut self, world: &mut World, t_ms: u64) -> Vec<String> {
        let mut warnings = Vec::new();
        for robot in world.robots.values_mut().filter(|r| r.trace_enabled) {
            let log = self.logs.entry(robot.id.clone()).or_default();
            if log.records.last().is_some_and(|r| r.t_ms >= t_ms) {
                continue;
            }
            let rec = TraceRecord {
                t_ms,
                robot_id: robot.id.clone(),
                x_m: robot.pose.x_m,
                y_m: robot.pose.y_m,
                z_m: robot.pose.z_m,
                yaw_deg: robot.pose.yaw_deg,
            };
            if let Some(dir) = &self.dir {
                let res = match log.sink.as_mut() {
                    Some(f) => f.write_all(rec.csv_line().as_bytes()),
                    None => open_sink(dir, &robot.id).and_then(|mut f| {
                        f.write_all(rec.csv_line().as_bytes())?;
                        log.sink = Some(f);
                        Ok(())
                    }),
                };
                if let Err(e) = res {
                    log.sink = None;
                    robot.trace_enabled = false;
                    warnings.push(format!("trace for {} disabled: {e}", robot.id));
                    continue;
                }
            }
            log.records.push(rec);
        }
        warnings
    }

    /// Drops a robot's records and restarts its CSV file.
    pub fn truncate(&mut self, robot_id: &str) {
        if let Some(log) = self.logs.get_mut(robot_id) {
            log.records.clear();
            if log.sink.is_some() {
                log.sink = self.dir.as_deref().and_then(|d| open_sink(d, robot_id).ok());
            }
        }
    }
}
