use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::injection::{inject_with_period, AnomalyKind, InjectionSpec};
use crate::rng::RngSeed;
use crate::series::{Dataset, TimeSeries};

/// Noisy sines with one planted anomaly each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_series: usize,
    pub length: usize,
    /// Share of each series used as the (anomaly-free) train segment.
    pub train_fraction: f64,
    /// Planted kinds, assigned round-robin.
    pub kinds: Vec<AnomalyKind>,
    pub noise_std: f64,
    pub seed: RngSeed,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_series: 20,
            length: 600,
            train_fraction: 0.3,
            kinds: vec![AnomalyKind::Noise, AnomalyKind::Scale, AnomalyKind::Cutoff],
            noise_std: 0.05,
            seed: RngSeed(0),
        }
    }
}

/// Series `syn_<i>`: a sine with period drawn from `20..=60`, random phase
/// and Gaussian noise, labeled where the anomaly was planted.
pub fn synthetic_benchmark(config: &SyntheticConfig) -> Result<Dataset> {
    let mut series = Vec::with_capacity(config.n_series);
    for i in 0..config.n_series {
        let seed = config.seed.derive(i as u64);
        let mut rng = seed.rng();
        let period: usize = rng.random_range(20..=60);
        let phase = rng.random::<f64>() * 2.0 * PI;
        let values: Vec<f64> = (0..config.length)
            .map(|t| {
                let noise: f64 = rng.sample(StandardNormal);
                (2.0 * PI * t as f64 / period as f64 + phase).sin() + config.noise_std * noise
            })
            .collect();
        let train_end = (config.train_fraction * config.length as f64).round() as usize;
        let clean =
            TimeSeries::univariate(format!("syn_{i}"), &values)?.with_train_end(train_end)?;
        let kind = config.kinds[i % config.kinds.len()];
        let spec = InjectionSpec::defaults(kind, &clean, period);
        let planted = inject_with_period(&clean, &spec, period, seed.derive(1))?;
        series.push(planted.to_series());
    }
    Dataset::new("synthetic", series)
}
