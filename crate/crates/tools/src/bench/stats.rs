// SPDX-License-Identifier: Apache-2.0

use std::time::{Duration, Instant};

/// Timing summary of one operation.
#[derive(Debug, Clone, PartialEq)]
pub struct OpStats {
    pub name: String,
    pub runs: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

/// Nearest-rank percentile of sorted samples.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (q / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn summarize(name: &str, samples: &[Duration]) -> OpStats {
    let mut ms: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1000.0).collect();
    ms.sort_by(f64::total_cmp);
    let mean = if ms.is_empty() { f64::NAN } else { ms.iter().sum::<f64>() / ms.len() as f64 };
    OpStats {
        name: name.to_string(),
        runs: ms.len(),
        mean_ms: mean,
        p50_ms: percentile(&ms, 50.0),
        p95_ms: percentile(&ms, 95.0),
        max_ms: ms.last().copied().unwrap_or(f64::NAN),
    }
}

/// Times `runs` calls of `f`, first call included.
pub fn measure<E>(runs: usize, mut f: impl FnMut(usize) -> Result<(), E>) -> Result<Vec<Duration>, E> {
    let mut out = Vec::with_capacity(runs);
    for i in 0..runs {
        let t0 = Instant::now();
        f(i)?;
        out.push(t0.elapsed());
    }
    Ok(out)
}

pub fn busy_wait(d: Duration) {
    let t0 = Instant::now();
    while t0.elapsed() < d {
        std::hint::spin_loop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 50.0), 50.0);
        assert_eq!(percentile(&v, 95.0), 95.0);
        assert_eq!(percentile(&v, 100.0), 100.0);
        assert_eq!(percentile(&[7.0], 50.0), 7.0);
        assert!(percentile(&[], 50.0).is_nan());
    }

    #[test]
    fn summary_orders_and_keeps_first_sample() {
        let s = summarize("x", &[Duration::from_millis(30), Duration::from_millis(10), Duration::from_millis(20)]);
        assert_eq!(s.runs, 3);
        assert!((s.mean_ms - 20.0).abs() < 1e-9);
        assert_eq!((s.p50_ms, s.p95_ms, s.max_ms), (20.0, 30.0, 30.0));
    }

    #[test]
    fn busy_wait_of_20ms_measures_within_2ms() {
        let samples = measure::<()>(10, |_| {
            busy_wait(Duration::from_millis(20));
            Ok(())
        })
        .unwrap();
        let s = summarize("busy", &samples);
        assert!((s.mean_ms - 20.0).abs() <= 2.0, "{s:?}");
        assert!(s.max_ms >= s.p95_ms && s.p95_ms >= s.p50_ms);
    }
}
