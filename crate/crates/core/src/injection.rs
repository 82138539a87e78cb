//! Synthetic anomaly injection with pseudo-labels.
//!
//! Each injected copy carries exactly one anomaly, placed at the start of a
//! cycle of the series' dominant period (any test index for spikes or
//! aperiodic series).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    Spike,
    Flip,
    Speedup,
    Noise,
    Cutoff,
    Average,
    Scale,
    Wander,
    Contextual,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 9] = [
        AnomalyKind::Spike,
        AnomalyKind::Flip,
        AnomalyKind::Speedup,
        AnomalyKind::Noise,
        AnomalyKind::Cutoff,
        AnomalyKind::Average,
        AnomalyKind::Scale,
        AnomalyKind::Wander,
        AnomalyKind::Contextual,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AnomalyKind::Spike => "spike",
            AnomalyKind::Flip => "flip",
            AnomalyKind::Speedup => "speedup",
            AnomalyKind::Noise => "noise",
            AnomalyKind::Cutoff => "cutoff",
            AnomalyKind::Average => "average",
            AnomalyKind::Scale => "scale",
            AnomalyKind::Wander => "wander",
            AnomalyKind::Contextual => "contextual",
        }
    }
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnomalyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AnomalyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown anomaly kind '{s}'")))
    }
}

/// Kind-specific knobs. Only the fields of the chosen kind are read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectionParams {
    /// Spike probability per point.
    pub spike_p: f64,
    pub spike_sigma: f64,
    pub noise_sigma: f64,
    /// Standard deviation of the cutoff plateau, in z-score units.
    pub cutoff_sigma: f64,
    /// Plateau level in z-score units; `None` draws 0 or 1.
    pub cutoff_level: Option<f64>,
    /// 0.5 or 2; `None` draws one of them.
    pub speedup_factor: Option<f64>,
    pub len_window: usize,
    pub scale_factor: f64,
    pub baseline: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectionSpec {
    pub kind: AnomalyKind,
    pub max_length: usize,
    pub params: InjectionParams,
}

impl InjectionSpec {
    /// Defaults scaled to the series: lengths from the period, amplitudes
    /// from the standard deviation of the test segment.
    pub fn defaults(kind: AnomalyKind, series: &TimeSeries, period: usize) -> InjectionSpec {
        let std = overall_std(series.test_values());
        let period = period.max(1);
        let max_length = (2 * period).min(series.test_len() / 10).max(1);
        InjectionSpec {
            kind,
            max_length,
            params: InjectionParams {
                spike_p: 0.2,
                spike_sigma: 3.0 * std,
                noise_sigma: 0.5 * std,
                cutoff_sigma: 0.1,
                cutoff_level: None,
                speedup_factor: None,
                len_window: (period / 4).max(2),
                scale_factor: 3.0,
                baseline: 2.0 * std,
                sigma_a: 0.5,
                sigma_b: 0.5 * std,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        if self.max_length == 0 {
            return Err(Error::invalid("max_length must be >= 1"));
        }
        for (name, v) in [
            ("spike sigma", p.spike_sigma),
            ("noise sigma", p.noise_sigma),
            ("cutoff sigma", p.cutoff_sigma),
            ("sigma_a", p.sigma_a),
            ("sigma_b", p.sigma_b),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&p.spike_p) {
            return Err(Error::invalid(format!(
                "spike probability must lie in [0,1], got {}",
                p.spike_p
            )));
        }
        if let Some(f) = p.speedup_factor {
            if f != 0.5 && f != 2.0 {
                return Err(Error::invalid(format!(
                    "speedup factor must be 0.5 or 2, got {f}"
                )));
            }
        }
        if p.len_window == 0 {
            return Err(Error::invalid("average window must be >= 1"));
        }
        for (name, v) in [("scale factor", p.scale_factor), ("baseline", p.baseline)] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        if p.cutoff_level.is_some_and(|l| !l.is_finite()) {
            return Err(Error::invalid("cutoff level must be finite"));
        }
        Ok(())
    }
}

/// A copy of a series with one synthetic anomaly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectedSeries {
    pub id: String,
    pub values: Vec<Vec<f64>>,
    /// Same length as `values`; 1 on the transformed points.
    pub pseudo_labels: Vec<u8>,
    /// Half-open span of the anomaly in the output index space.
    pub anomaly_span: (usize, usize),
    pub kind: AnomalyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_end: Option<usize>,
}

impl InjectedSeries {
    /// The copy as a labeled series (pseudo-labels as labels).
    pub fn to_series(&self) -> TimeSeries {
        TimeSeries {
            id: self.id.clone(),
            values: self.values.clone(),
            labels: Some(self.pseudo_labels.clone()),
            train_end: self.train_end,
        }
    }
}

fn overall_std(values: &[Vec<f64>]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let d = values[0].len();
    let n = values.len() as f64;
    let mut var = 0.0;
    for j in 0..d {
        let m = values.iter().map(|r| r[j]).sum::<f64>() / n;
        var += values.iter().map(|r| (r[j] - m) * (r[j] - m)).sum::<f64>() / n;
    }
    (var / d as f64).sqrt()
}

/// Dominant period from the autocorrelation function; 1 when nothing stands
/// out above the noise floor `max(0.1, 4/sqrt(T))`.
///
/// Candidates are local maxima of the mean-centered ACF (averaged over
/// non-constant dimensions) at lags `2..=T/2`; the tallest one wins.
pub fn estimate_period(series: &TimeSeries) -> Result<usize> {
    let t = series.len();
    if t < 4 {
        return Err(Error::invalid(format!(
            "series '{}': period estimation needs at least 4 points, found {t}",
            series.id
        )));
    }
    let max_lag = t / 2;
    let mut acf = vec![0.0; max_lag + 2];
    let mut used = 0;
    for j in 0..series.dim() {
        let col = series.column(j);
        let m = col.iter().sum::<f64>() / t as f64;
        let x: Vec<f64> = col.iter().map(|v| v - m).collect();
        let denom: f64 = x.iter().map(|v| v * v).sum();
        if denom <= f64::EPSILON * t as f64 * (m * m).max(1.0) {
            continue;
        }
        used += 1;
        for (lag, a) in acf.iter_mut().enumerate().take((max_lag + 2).min(t)) {
            let s: f64 = x[..t - lag].iter().zip(&x[lag..]).map(|(a, b)| a * b).sum();
            *a += s / denom;
        }
    }
    if used == 0 {
        return Ok(1);
    }
    acf.iter_mut().for_each(|a| *a /= used as f64);
    let floor = 0.1f64.max(4.0 / (t as f64).sqrt());
    let mut best: Option<(usize, f64)> = None;
    for lag in 2..=max_lag {
        let next = if lag + 1 < t {
            acf[lag + 1]
        } else {
            f64::NEG_INFINITY
        };
        let is_peak = acf[lag] > acf[lag - 1] && acf[lag] >= next;
        if is_peak && acf[lag] > floor && best.is_none_or(|(_, v)| acf[lag] > v) {
            best = Some((lag, acf[lag]));
        }
    }
    Ok(best.map_or(1, |(lag, _)| lag))
}

/// Injects one anomaly, estimating the period first.
pub fn inject(series: &TimeSeries, spec: &InjectionSpec, seed: RngSeed) -> Result<InjectedSeries> {
    let period = estimate_period(series)?;
    inject_with_period(series, spec, period, seed)
}

/// [`inject`] with a known period.
///
/// Draw order: span length uniform on `1..=max_length`, then the start among
/// cycle starts `test_start + j * period` that leave room for the span, then
/// the kind-specific draws.
pub fn inject_with_period(
    series: &TimeSeries,
    spec: &InjectionSpec,
    period: usize,
    seed: RngSeed,
) -> Result<InjectedSeries> {
    spec.validate()?;
    let ts = series.test_start();
    if spec.max_length >= series.test_len() {
        return Err(Error::invalid(format!(
            "series '{}': max_length {} must be below the test length {}",
            series.id,
            spec.max_length,
            series.test_len()
        )));
    }
    let mut rng = seed.rng();
    let len = rng.random_range(1..=spec.max_length);
    let step = if spec.kind == AnomalyKind::Spike {
        1
    } else {
        period.max(1)
    };
    // test_len > max_length >= len, so ts itself always fits
    let n_starts = (series.len() - len - ts) / step + 1;
    let start = ts + step * rng.random_range(0..n_starts);
    inject_at(series, spec, start, len, seed)
}

/// Applies the transform of `spec.kind` to `[start, start + len)`.
pub fn inject_at(
    series: &TimeSeries,
    spec: &InjectionSpec,
    start: usize,
    len: usize,
    seed: RngSeed,
) -> Result<InjectedSeries> {
    spec.validate()?;
    let ts = series.test_start();
    if len == 0 || start < ts || start + len > series.len() {
        return Err(Error::invalid(format!(
            "span [{start}, {}) is not inside the test segment [{ts}, {})",
            start + len,
            series.len()
        )));
    }
    let mut rng = seed.derive(1).rng();
    let p = &spec.params;
    let end = start + len;
    let mut values = series.values.clone();
    let mut labels = vec![0u8; values.len()];
    let mut span = (start, end);
    match spec.kind {
        AnomalyKind::Spike => {
            let mut hits: Vec<usize> = (start..end)
                .filter(|_| rng.random_bool(p.spike_p))
                .collect();
            if hits.is_empty() {
                hits.push(rng.random_range(start..end));
            }
            for t in hits {
                for v in values[t].iter_mut() {
                    *v += p.spike_sigma * normal(&mut rng);
                }
                labels[t] = 1;
            }
        }
        AnomalyKind::Flip => values[start..end].reverse(),
        AnomalyKind::Speedup => {
            let factor = p
                .speedup_factor
                .unwrap_or(if rng.random_bool(0.5) { 0.5 } else { 2.0 });
            let new_len = ((len as f64 / factor).round() as usize).max(1);
            let resampled = resample(&series.values[start..end], new_len);
            values.splice(start..end, resampled);
            labels = vec![0u8; values.len()];
            span = (start, start + new_len);
        }
        AnomalyKind::Noise => {
            for row in &mut values[start..end] {
                for v in row.iter_mut() {
                    *v += p.noise_sigma * normal(&mut rng);
                }
            }
        }
        AnomalyKind::Cutoff => {
            let level = p
                .cutoff_level
                .unwrap_or(if rng.random_bool(0.5) { 1.0 } else { 0.0 });
            let n = series.len() as f64;
            for j in 0..series.dim() {
                let m = series.values.iter().map(|r| r[j]).sum::<f64>() / n;
                let sd = (series
                    .values
                    .iter()
                    .map(|r| (r[j] - m) * (r[j] - m))
                    .sum::<f64>()
                    / n)
                    .sqrt();
                let sd = if sd > 0.0 { sd } else { 1.0 };
                for row in &mut values[start..end] {
                    row[j] = m + sd * (level + p.cutoff_sigma * normal(&mut rng));
                }
            }
        }
        AnomalyKind::Average => {
            let w = p.len_window;
            for (t, row) in values.iter_mut().enumerate().take(end).skip(start) {
                let lo = (t + 1).saturating_sub(w).max(start);
                for (j, v) in row.iter_mut().enumerate() {
                    *v = series.values[lo..=t].iter().map(|r| r[j]).sum::<f64>()
                        / (t + 1 - lo) as f64;
                }
            }
        }
        AnomalyKind::Scale => {
            for row in &mut values[start..end] {
                row.iter_mut().for_each(|v| *v *= p.scale_factor);
            }
        }
        AnomalyKind::Wander => {
            for (i, row) in values[start..end].iter_mut().enumerate() {
                let shift = if len == 1 {
                    0.0
                } else {
                    p.baseline * i as f64 / (len - 1) as f64
                };
                row.iter_mut().for_each(|v| *v += shift);
            }
        }
        AnomalyKind::Contextual => {
            let a = 1.0 + p.sigma_a * normal(&mut rng);
            let b = p.sigma_b * normal(&mut rng);
            for row in &mut values[start..end] {
                row.iter_mut().for_each(|v| *v = a * *v + b);
            }
        }
    }
    if spec.kind != AnomalyKind::Spike {
        labels[span.0..span.1].iter_mut().for_each(|l| *l = 1);
    }
    Ok(InjectedSeries {
        id: series.id.clone(),
        values,
        pseudo_labels: labels,
        anomaly_span: span,
        kind: spec.kind,
        train_end: series.train_end,
    })
}

/// `copies` independent injections of `kind` with default parameters.
/// Copy ids are `<series id>-<kind>-<c>`.
pub fn inject_copies(
    series: &TimeSeries,
    kind: AnomalyKind,
    period: usize,
    copies: usize,
    seed: RngSeed,
) -> Result<Vec<InjectedSeries>> {
    let spec = InjectionSpec::defaults(kind, series, period);
    (0..copies)
        .map(|c| {
            let mut inj = inject_with_period(series, &spec, period, seed.derive(c as u64))?;
            inj.id = format!("{}-{}-{c}", series.id, kind.as_str());
            Ok(inj)
        })
        .collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Linear interpolation of `rows` onto `new_len` evenly spaced positions
/// spanning the same first and last sample.
fn resample(rows: &[Vec<f64>], new_len: usize) -> Vec<Vec<f64>> {
    let n = rows.len();
    if new_len == 1 || n == 1 {
        return vec![rows[0].clone(); new_len];
    }
    (0..new_len)
        .map(|i| {
            let x = i as f64 * (n - 1) as f64 / (new_len - 1) as f64;
            let lo = (x.floor() as usize).min(n - 2);
            let frac = x - lo as f64;
            rows[lo]
                .iter()
                .zip(&rows[lo + 1])
                .map(|(a, b)| a + frac * (b - a))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(t: usize, period: f64) -> TimeSeries {
        let v: Vec<f64> = (0..t)
            .map(|i| (2.0 * PI * i as f64 / period).sin())
            .collect();
        TimeSeries::univariate("sine", &v)
            .unwrap()
            .with_train_end(t / 5)
            .unwrap()
    }

    fn spec(kind: AnomalyKind, s: &TimeSeries) -> InjectionSpec {
        InjectionSpec::defaults(kind, s, 50)
    }

    #[test]
    fn sine_period_found() {
        let p = estimate_period(&sine(500, 50.0)).unwrap();
        assert!((49..=51).contains(&p), "{p}");
    }

    #[test]
    fn white_noise_and_constant_fall_back() {
        let mut rng = RngSeed(5).rng();
        let v: Vec<f64> = (0..500).map(|_| normal(&mut rng)).collect();
        assert_eq!(
            estimate_period(&TimeSeries::univariate("n", &v).unwrap()).unwrap(),
            1
        );
        assert_eq!(
            estimate_period(&TimeSeries::univariate("c", &[2.0; 50]).unwrap()).unwrap(),
            1
        );
        assert!(estimate_period(&TimeSeries::univariate("s", &[1.0, 2.0, 3.0]).unwrap()).is_err());
    }

    #[test]
    fn scale_one_is_identity() {
        let s = sine(500, 50.0);
        let mut sp = spec(AnomalyKind::Scale, &s);
        sp.params.scale_factor = 1.0;
        let out = inject(&s, &sp, RngSeed(3)).unwrap();
        assert_eq!(out.values, s.values);
        let (a, b) = out.anomaly_span;
        assert!(out.pseudo_labels[a..b].iter().all(|&l| l == 1));
        assert_eq!(
            out.pseudo_labels.iter().map(|&l| l as usize).sum::<usize>(),
            b - a
        );
    }

    #[test]
    fn flip_palindrome_unchanged() {
        let mut v = vec![0.0; 200];
        v[100..107].copy_from_slice(&[1.0, 2.0, 3.0, 4.0, 3.0, 2.0, 1.0]);
        let s = TimeSeries::univariate("p", &v)
            .unwrap()
            .with_train_end(50)
            .unwrap();
        let out = inject_at(&s, &spec(AnomalyKind::Flip, &s), 100, 7, RngSeed(0)).unwrap();
        assert_eq!(out.values, s.values);
    }

    #[test]
    fn noise_std_close_to_sigma() {
        let s = TimeSeries::univariate("z", &[0.0; 400])
            .unwrap()
            .with_train_end(100)
            .unwrap();
        let mut sp = spec(AnomalyKind::Noise, &s);
        sp.params.noise_sigma = 1.0;
        for seed in 0..20 {
            let out = inject_at(&s, &sp, 150, 100, RngSeed(seed)).unwrap();
            let diffs: Vec<f64> = (150..250)
                .map(|t| out.values[t][0] - s.values[t][0])
                .collect();
            let sd = crate::stats::std_dev(&diffs);
            assert!((sd - 1.0).abs() < 0.15, "seed {seed}: {sd}");
            assert!((0..150)
                .chain(250..400)
                .all(|t| out.values[t] == s.values[t]));
        }
    }

    #[test]
    fn speedup_shortens_span() {
        let s = sine(500, 50.0);
        let mut sp = spec(AnomalyKind::Speedup, &s);
        sp.params.speedup_factor = Some(2.0);
        let out = inject_at(&s, &sp, 200, 40, RngSeed(1)).unwrap();
        assert_eq!(out.values.len(), 480);
        assert_eq!(out.anomaly_span, (200, 220));
        assert_eq!(
            out.pseudo_labels.iter().map(|&l| l as usize).sum::<usize>(),
            20
        );
        assert_eq!(&out.values[..200], &s.values[..200]);
        assert_eq!(&out.values[220..], &s.values[240..]);
        // endpoints of the span survive interpolation
        assert_eq!(out.values[200], s.values[200]);
        assert_eq!(out.values[219], s.values[239]);

        sp.params.speedup_factor = Some(0.5);
        let out = inject_at(&s, &sp, 200, 40, RngSeed(1)).unwrap();
        assert_eq!(out.values.len(), 540);
        sp.params.speedup_factor = Some(3.0);
        assert!(inject_at(&s, &sp, 200, 40, RngSeed(1)).is_err());
    }

    #[test]
    fn max_length_must_fit() {
        let s = TimeSeries::univariate("x", &[0.0; 30])
            .unwrap()
            .with_train_end(20)
            .unwrap();
        let mut sp = spec(AnomalyKind::Noise, &s);
        sp.max_length = 10;
        assert!(inject_with_period(&s, &sp, 1, RngSeed(0)).is_err());
        sp.max_length = 9;
        assert!(inject_with_period(&s, &sp, 1, RngSeed(0)).is_ok());
    }

    #[test]
    fn starts_are_cycle_aligned() {
        let s = sine(1000, 50.0);
        let sp = spec(AnomalyKind::Scale, &s);
        for seed in 0..50 {
            let out = inject_with_period(&s, &sp, 50, RngSeed(seed)).unwrap();
            assert_eq!((out.anomaly_span.0 - s.test_start()) % 50, 0);
        }
    }

    #[test]
    fn flip_is_involution() {
        let s = sine(300, 37.0);
        let sp = spec(AnomalyKind::Flip, &s);
        let once = inject_at(&s, &sp, 120, 25, RngSeed(9)).unwrap().to_series();
        let twice = inject_at(&once, &sp, 120, 25, RngSeed(9)).unwrap();
        assert_eq!(twice.values, s.values);
    }

    #[test]
    fn multivariate_span_shared() {
        let vals: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64, -(i as f64)]).collect();
        let s = TimeSeries::new("m", vals, None, Some(50)).unwrap();
        let out = inject_at(&s, &spec(AnomalyKind::Contextual, &s), 80, 10, RngSeed(4)).unwrap();
        for t in 80..90 {
            assert!(out.values[t][0] != s.values[t][0] || out.values[t][1] != s.values[t][1]);
        }
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in AnomalyKind::ALL {
            assert_eq!(k.as_str().parse::<AnomalyKind>().unwrap(), k);
        }
        assert!("bogus".parse::<AnomalyKind>().is_err());
    }
}
