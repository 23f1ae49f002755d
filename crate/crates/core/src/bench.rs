//! Throughput measurement of full forward passes on a fixed worker count.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{gen_synthetic, SyntheticSpec};
use crate::network::{build, NetworkConfig};
use crate::tensor::Triple;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    /// SHA-256 of the configuration JSON the network was built from.
    pub config_digest: String,
    pub extent: Triple,
    pub threads: usize,
    pub warmup: usize,
    pub iters: usize,
    /// Wall time of every measured forward, in seconds.
    pub seconds: Vec<f64>,
    pub median_seconds: f64,
    /// One patch per forward, at the median time.
    pub patches_per_second: f64,
    pub params: u64,
    pub flops: u64,
    /// Fraction of operations in each network part.
    pub stage_shares: Vec<(String, f64)>,
}

pub fn config_digest(cfg: &NetworkConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_json().as_bytes()))
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Builds `cfg` for `extent` and times `iters` forwards after `warmup` discarded ones.
pub fn bench(cfg: &NetworkConfig, extent: Triple, threads: usize, warmup: usize, iters: usize) -> Result<BenchReport> {
    if threads == 0 || iters == 0 || warmup == 0 {
        return Err(Error::config("threads, warmup and iters must all be at least 1"));
    }
    let cfg = NetworkConfig {
        input_extent: extent,
        ..cfg.clone()
    };
    let net = build(&cfg, 0)?;
    let report = net.cost_report(extent)?;
    let spec = SyntheticSpec {
        extent,
        modalities: cfg.modalities,
        ..SyntheticSpec::default()
    };
    let (input, _) = gen_synthetic(&spec, 0)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let seconds = pool.install(|| -> Result<Vec<f64>> {
        for _ in 0..warmup {
            net.forward(&input)?;
        }
        (0..iters)
            .map(|_| {
                let t = Instant::now();
                net.forward(&input)?;
                Ok(t.elapsed().as_secs_f64())
            })
            .collect()
    })?;
    let median_seconds = median(&seconds);
    Ok(BenchReport {
        config_digest: config_digest(&cfg),
        extent,
        threads,
        warmup,
        iters,
        median_seconds,
        patches_per_second: 1.0 / median_seconds,
        seconds,
        params: report.params(),
        flops: report.flops(),
        stage_shares: report.shares(),
    })
}
