// SPDX-License-Identifier: Apache-2.0

//! CSV and plain-text output. Files contain no timestamps, so writing the
//! same report twice gives identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::functional::FunctionalResult;
use super::ops::Operation;
use super::resources::{Phase, ResourceStats};
use super::stats::OpStats;

pub const SPEED_CSV_HEADER: &str = "operation,runs,mean_ms,p50_ms,p95_ms,max_ms";
pub const RESOURCES_CSV_HEADER: &str =
    "process,phase,samples,rss_mean_bytes,rss_max_bytes,cpu_mean_pct,cpu_max_pct";
pub const FUNCTIONAL_CSV_HEADER: &str = "operation,passes,total,failures";
pub const REPORT_CSV_HEADER: &str = "operation,runs,mean_ms,p50_ms,p95_ms,max_ms,functional_passes,functional_total";

#[derive(Debug, Clone, PartialEq, Default)]
pub enum ResourceSection {
    #[default]
    NotRun,
    Unavailable(String),
    Measured(Vec<ResourceStats>),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub speed: Vec<OpStats>,
    pub resources: ResourceSection,
    pub functional: Vec<FunctionalResult>,
    pub topdown_delay_ms: u64,
    pub topdown_captures: usize,
}

fn ms(v: f64) -> String {
    format!("{v:.3}")
}

pub fn speed_csv(r: &BenchReport) -> String {
    let mut s = format!("{SPEED_CSV_HEADER}\n");
    for o in &r.speed {
        let _ = writeln!(s, "{},{},{},{},{},{}", o.name, o.runs, ms(o.mean_ms), ms(o.p50_ms), ms(o.p95_ms), ms(o.max_ms));
    }
    s
}

pub fn resources_csv(stats: &[ResourceStats]) -> String {
    let mut s = format!("{RESOURCES_CSV_HEADER}\n");
    for x in stats {
        let _ = writeln!(
            s,
            "{},{},{},{:.0},{},{:.2},{:.2}",
            x.process, x.phase, x.samples, x.rss_mean_bytes, x.rss_max_bytes, x.cpu_mean_pct, x.cpu_max_pct
        );
    }
    s
}

pub fn functional_csv(r: &BenchReport) -> String {
    let mut s = format!("{FUNCTIONAL_CSV_HEADER}\n");
    for f in &r.functional {
        let idx: Vec<String> = f.failures.iter().map(|x| format!("{}.{}", x.cycle, x.run)).collect();
        let _ = writeln!(s, "{},{},{},{}", f.operation, f.passes, f.total, idx.join(" "));
    }
    s
}

/// One row per operation, speed and functional side by side.
pub fn report_csv(r: &BenchReport) -> String {
    let mut s = format!("{REPORT_CSV_HEADER}\n");
    for op in Operation::ALL {
        let sp = r.speed.iter().find(|o| o.name == op.name());
        let fu = r.functional.iter().find(|f| f.operation == op);
        let speed = match sp {
            Some(o) => format!("{},{},{},{},{}", o.runs, ms(o.mean_ms), ms(o.p50_ms), ms(o.p95_ms), ms(o.max_ms)),
            None => ",,,,".into(),
        };
        let func = match fu {
            Some(f) => format!("{},{}", f.passes, f.total),
            None => ",".into(),
        };
        let _ = writeln!(s, "{},{speed},{func}", op.name());
    }
    s
}

fn mib(b: f64) -> String {
    format!("{:.1} MiB", b / (1024.0 * 1024.0))
}

/// Human-readable table: one row per feature with speed, memory and
/// functional columns, followed by the resource breakdown and footnotes.
pub fn render_table(r: &BenchReport) -> String {
    let active: Vec<&ResourceStats> = match &r.resources {
        ResourceSection::Measured(v) => v.iter().filter(|x| x.phase == Phase::Active).collect(),
        _ => Vec::new(),
    };
    let memory = if active.is_empty() {
        "n/a".to_string()
    } else {
        let rss: f64 = active.iter().map(|x| x.rss_mean_bytes).sum();
        let cpu: f64 = active.iter().map(|x| x.cpu_mean_pct).sum();
        format!("{} / {cpu:.1}% CPU *", mib(rss))
    };
    let rows: Vec<[String; 4]> = Operation::ALL
        .iter()
        .map(|op| {
            let speed = match r.speed.iter().find(|o| o.name == op.name()) {
                Some(o) => format!("{:.2} ms (p50 {:.2}, p95 {:.2}, max {:.2})", o.mean_ms, o.p50_ms, o.p95_ms, o.max_ms),
                None => "not run".into(),
            };
            let func = match r.functional.iter().find(|f| f.operation == *op) {
                Some(f) if f.passed() => format!("Passed ({}/{})", f.passes, f.total),
                Some(f) => format!("Failed ({}/{})", f.passes, f.total),
                None => "not run".into(),
            };
            [op.label().to_string(), speed, memory.clone(), func]
        })
        .collect();
    let head = ["Feature", "Speed Test", "Memory Test", "Functional Test"];
    let mut width = head.map(str::len);
    for row in &rows {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: [&str; 4]| {
        let mut s = String::from("|");
        for (c, w) in cells.iter().zip(width) {
            let _ = write!(s, " {c:<w$} |");
        }
        s.push('\n');
        s
    };
    let mut out = line(head);
    out.push('|');
    for w in width {
        out.push_str(&"-".repeat(w + 2));
        out.push('|');
    }
    out.push('\n');
    for row in &rows {
        out.push_str(&line([&row[0], &row[1], &row[2], &row[3]]));
    }
    out.push('\n');
    match &r.resources {
        ResourceSection::NotRun => out.push_str("Resources: not run\n"),
        ResourceSection::Unavailable(why) => {
            let _ = writeln!(out, "Resources: unavailable ({why})");
        }
        ResourceSection::Measured(v) => {
            out.push_str("Resources (1 s samples):\n");
            for x in v {
                let _ = writeln!(
                    out,
                    "  {:<8} {:<6} n={:<3} RSS mean {} max {}  CPU mean {:.1}% max {:.1}%",
                    x.process,
                    x.phase.to_string(),
                    x.samples,
                    mib(x.rss_mean_bytes),
                    mib(x.rss_max_bytes as f64),
                    x.cpu_mean_pct,
                    x.cpu_max_pct
                );
            }
        }
    }
    for f in r.functional.iter().filter(|f| !f.failures.is_empty()) {
        let _ = writeln!(out, "Functional failures for {}:", f.operation);
        for x in f.failures.iter().take(10) {
            let _ = writeln!(out, "  cycle {} run {}: {}", x.cycle, x.run, x.message);
        }
        if f.failures.len() > 10 {
            let _ = writeln!(out, "  ... {} more", f.failures.len() - 10);
        }
    }
    out.push_str("\n* Memory Test is measured for the whole active suite (plantd + twind summed), not per feature.\n");
    out.push_str("Thermal vision times a full thermal top-down render from the mirrored snapshot, not a material update.\n");
    let _ = writeln!(
        out,
        "Top-down capture: {} captures, {} ms configured delay after each subtracted from its time.",
        r.topdown_captures, r.topdown_delay_ms
    );
    out
}

/// Writes every section that has data into `dir`; returns the paths written.
pub fn write_report(r: &BenchReport, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = vec![(dir.join("report.csv"), report_csv(r)), (dir.join("report.txt"), render_table(r))];
    if !r.speed.is_empty() {
        files.push((dir.join("speed.csv"), speed_csv(r)));
    }
    if let ResourceSection::Measured(v) = &r.resources {
        files.push((dir.join("resources.csv"), resources_csv(v)));
    }
    if !r.functional.is_empty() {
        files.push((dir.join("functional.csv"), functional_csv(r)));
    }
    for (path, body) in &files {
        fs::write(path, body)?;
    }
    Ok(files.into_iter().map(|f| f.0).collect())
}
