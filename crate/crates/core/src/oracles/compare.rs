//! Side-by-side comparison of engine curves with an oracle's.

use rayon::prelude::*;
use serde::Serialize;

use crate::curve::CumulativeCurve;
use crate::engine::SimOutput;
use crate::network::LinkId;

/// Environment variable capping the worker threads used for comparisons.
pub const THREADS_VAR: &str = "KINEWAVE_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkComparison {
    pub link: String,
    /// Largest `|N_up|` difference over the sample times.
    pub max_abs_up: f64,
    pub max_abs_down: f64,
    pub n_down_engine: f64,
    pub n_down_oracle: f64,
    pub spillback_engine: Option<f64>,
    pub spillback_oracle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub oracle: String,
    pub samples: usize,
    pub links: Vec<LinkComparison>,
}

impl OracleReport {
    pub fn max_abs_error(&self) -> f64 {
        self.links.iter().map(|l| l.max_abs_up.max(l.max_abs_down)).fold(0.0, f64::max)
    }
}

/// Thread pool sized by `KINEWAVE_THREADS`, or rayon's default when unset or invalid.
pub fn thread_pool() -> rayon::ThreadPool {
    let threads = std::env::var(THREADS_VAR).ok().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(0);
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool")
}

/// Compares per-link boundary curves at `samples + 1` evenly spaced times.
pub fn compare_curves(
    output: &SimOutput,
    oracle: &str,
    up: &[CumulativeCurve],
    down: &[CumulativeCurve],
    onset: &[Option<f64>],
    samples: usize,
) -> OracleReport {
    let horizon = output.config.horizon;
    let times: Vec<f64> = (0..=samples).map(|i| horizon * i as f64 / samples as f64).collect();
    let sup = |a: &CumulativeCurve, b: &CumulativeCurve| {
        times.iter().map(|&t| (a.eval(t) - b.eval(t)).abs()).fold(0.0, f64::max)
    };
    let links = thread_pool().install(|| {
        output
            .network
            .links()
            .par_iter()
            .enumerate()
            .map(|(i, link)| LinkComparison {
                link: link.name.clone(),
                max_abs_up: sup(&output.links[i].up, &up[i]),
                max_abs_down: sup(&output.links[i].down, &down[i]),
                n_down_engine: output.links[i].down.eval(horizon),
                n_down_oracle: down[i].eval(horizon),
                spillback_engine: output.spillback_onset(LinkId(i)),
                spillback_oracle: onset[i],
            })
            .collect()
    });
    OracleReport { oracle: oracle.to_string(), samples, links }
}
