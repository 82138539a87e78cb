//! Label-free surrogate metrics and the model rankings they induce.
//!
//! Three families: prediction error of forecasting/reconstruction models,
//! centrality of a model's time-point ranking among the other models, and
//! adjusted best F1 against pseudo-labels of synthetically injected anomalies.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::DetectorConfig;
use crate::error::{Error, Result};
use crate::evaluation::adjusted_best_f1;
use crate::injection::{inject_copies, AnomalyKind, InjectedSeries};
use crate::perm::{rank_from_values, Direction, Permutation};
use crate::rankagg::{kendall_tau, RankingSet};
use crate::rng::RngSeed;
use crate::series::{Dataset, ModelOutput, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricClass {
    PredictionError,
    Injection,
    Centrality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricDef {
    pub id: &'static str,
    pub class: MetricClass,
    pub direction: Direction,
}

const fn def(id: &'static str, class: MetricClass, direction: Direction) -> MetricDef {
    MetricDef {
        id,
        class,
        direction,
    }
}

use Direction::{HigherIsBetter as Hi, LowerIsBetter as Lo};
use MetricClass::{Centrality as C, Injection as I, PredictionError as P};

/// Every metric, in catalog order.
pub const CATALOG: [MetricDef; 17] = [
    def("mae", P, Lo),
    def("mse", P, Lo),
    def("mape", P, Lo),
    def("smape", P, Lo),
    def("likelihood", P, Lo),
    def("spike", I, Hi),
    def("flip", I, Hi),
    def("speedup", I, Hi),
    def("noise", I, Hi),
    def("cutoff", I, Hi),
    def("average", I, Hi),
    def("scale", I, Hi),
    def("wander", I, Hi),
    def("contextual", I, Hi),
    def("knn1", C, Lo),
    def("knn3", C, Lo),
    def("knn5", C, Lo),
];

pub fn metric_def(id: &str) -> Result<MetricDef> {
    CATALOG
        .iter()
        .copied()
        .find(|m| m.id == id)
        .ok_or_else(|| Error::invalid(format!("unknown metric '{id}'")))
}

/// Validates `ids` and returns them in catalog order without duplicates.
pub fn catalog_order(ids: &[String]) -> Result<Vec<String>> {
    for id in ids {
        metric_def(id)?;
    }
    Ok(CATALOG
        .iter()
        .filter(|m| ids.iter().any(|i| i == m.id))
        .map(|m| m.id.to_string())
        .collect())
}

/// Floor for MAPE/SMAPE denominators.
pub const PERCENT_EPS: f64 = 1e-8;
/// Floor for the residual variance in the likelihood metric.
pub const VARIANCE_FLOOR: f64 = 1e-12;
/// Time points kept per series when comparing score rankings.
pub const CENTRALITY_MAX_POINTS: usize = 10_000;

/// MAE, MSE, MAPE, SMAPE and Gaussian negative log-likelihood of one
/// output's predictions, each averaged over dimensions. `None` without
/// predictions.
pub fn prediction_error_series(
    output: &ModelOutput,
    series: &TimeSeries,
) -> Result<Option<[f64; 5]>> {
    output.validate_against(series)?;
    let Some(preds) = &output.predictions else {
        return Ok(None);
    };
    let obs = series.test_values();
    let t = obs.len() as f64;
    let d = series.dim();
    let mut acc = [0.0; 5];
    for j in 0..d {
        let (mut mae, mut mse, mut mape, mut smape) = (0.0, 0.0, 0.0, 0.0);
        for (x, p) in obs.iter().zip(preds) {
            let (x, xh) = (x[j], p[j]);
            let e = (x - xh).abs();
            mae += e;
            mse += e * e;
            mape += e / x.abs().max(PERCENT_EPS);
            smape += 2.0 * e / (x.abs() + xh.abs()).max(PERCENT_EPS);
        }
        let var = (mse / t).max(VARIANCE_FLOOR);
        let nll = 0.5 * (2.0 * std::f64::consts::PI * var).ln() + 0.5;
        for (a, v) in acc
            .iter_mut()
            .zip([mae / t, mse / t, mape / t, smape / t, nll])
        {
            *a += v;
        }
    }
    Ok(Some(acc.map(|v| v / d as f64)))
}

/// Prediction-error metrics of one model over a dataset (mean over series);
/// `None` if any series lacks predictions.
pub fn prediction_error(outputs: &[ModelOutput], dataset: &Dataset) -> Result<Option<[f64; 5]>> {
    let mut sum = [0.0; 5];
    for s in &dataset.series {
        let out = find_output(outputs, &s.id)?;
        match prediction_error_series(out, s)? {
            Some(v) => sum.iter_mut().zip(v).for_each(|(a, b)| *a += b),
            None => return Ok(None),
        }
    }
    Ok(Some(sum.map(|v| v / dataset.len() as f64)))
}

fn find_output<'a>(outputs: &'a [ModelOutput], series_id: &str) -> Result<&'a ModelOutput> {
    outputs
        .iter()
        .find(|o| o.series_id == series_id)
        .ok_or_else(|| Error::missing(format!("model output for series '{series_id}'")))
}

/// Time points ordered by descending score, ties by time index.
pub fn time_point_ranking(scores: &[f64]) -> Permutation {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Permutation::from_order(&order).expect("sorted indices form an ordering")
}

/// Normalized Kendall distance between the time-point rankings of every pair
/// of score vectors (all of length `T`). Series longer than
/// [`CENTRALITY_MAX_POINTS`] are compared on a seeded uniform subset of time
/// points shared by all models.
pub fn pairwise_distances(scores: &[&[f64]], seed: RngSeed) -> Result<Vec<Vec<f64>>> {
    let n = scores.len();
    let t = scores.first().map_or(0, |s| s.len());
    if let Some(s) = scores.iter().find(|s| s.len() != t) {
        return Err(Error::invalid(format!(
            "score vectors of lengths {t} and {}",
            s.len()
        )));
    }
    let keep: Option<Vec<usize>> = (t > CENTRALITY_MAX_POINTS).then(|| {
        let mut idx = sample(&mut seed.rng(), t, CENTRALITY_MAX_POINTS).into_vec();
        idx.sort_unstable();
        idx
    });
    let rankings: Vec<Permutation> = scores
        .iter()
        .map(|s| match &keep {
            Some(idx) => time_point_ranking(&idx.iter().map(|&i| s[i]).collect::<Vec<_>>()),
            None => time_point_ranking(s),
        })
        .collect();
    let tt = rankings.first().map_or(0, Permutation::len);
    let pairs = (tt * tt.saturating_sub(1) / 2) as f64;
    let mut dist = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            let d = if pairs == 0.0 {
                0.0
            } else {
                kendall_tau(&rankings[a], &rankings[b])? as f64 / pairs
            };
            dist[a][b] = d;
            dist[b][a] = d;
        }
    }
    Ok(dist)
}

/// Mean distance of each model to its `k` nearest other models.
pub fn centrality_from_distances(dist: &[Vec<f64>], k: usize) -> Result<Vec<f64>> {
    let n = dist.len();
    if k == 0 || n <= k {
        return Err(Error::invalid(format!(
            "centrality with K = {k} needs more than {k} models, got {n}"
        )));
    }
    Ok((0..n)
        .map(|a| {
            let mut d: Vec<f64> = (0..n).filter(|&b| b != a).map(|b| dist[a][b]).collect();
            d.sort_by(f64::total_cmp);
            d[..k].iter().sum::<f64>() / k as f64
        })
        .collect())
}

/// Centrality of every model over a dataset: distances are averaged over
/// series, then each model's `k` nearest neighbours are taken once.
/// `outputs[m]` holds model `m`'s outputs on every series.
pub fn centrality(
    outputs: &[Vec<ModelOutput>],
    dataset: &Dataset,
    k: usize,
    seed: RngSeed,
) -> Result<Vec<f64>> {
    let n = outputs.len();
    if n <= k {
        return Err(Error::invalid(format!(
            "centrality with K = {k} needs more than {k} models, got {n}"
        )));
    }
    let mut mean = vec![vec![0.0; n]; n];
    for s in &dataset.series {
        let scores = outputs
            .iter()
            .map(|o| {
                let out = find_output(o, &s.id)?;
                out.validate_against(s)?;
                Ok(out.scores.as_slice())
            })
            .collect::<Result<Vec<_>>>()?;
        let d = pairwise_distances(&scores, seed.derive_str(&s.id))?;
        for (row, drow) in mean.iter_mut().zip(&d) {
            for (m, v) in row.iter_mut().zip(drow) {
                *m += v / dataset.len() as f64;
            }
        }
    }
    centrality_from_distances(&mean, k)
}

/// Mean adjusted best F1 of one model against the pseudo-labels of injected
/// copies. `outputs` must hold the model's output on every copy (matched by
/// copy id).
pub fn injection_metric(outputs: &[ModelOutput], copies: &[InjectedSeries]) -> Result<f64> {
    if copies.is_empty() {
        return Err(Error::invalid(
            "injection metric needs at least one injected copy",
        ));
    }
    let mut total = 0.0;
    for c in copies {
        let out = find_output(outputs, &c.id)?;
        total += copy_f1(out, c)?;
    }
    Ok(total / copies.len() as f64)
}

fn copy_f1(out: &ModelOutput, copy: &InjectedSeries) -> Result<f64> {
    let series = copy.to_series();
    out.validate_against(&series)?;
    let labels = series.test_labels().expect("pseudo-labels present");
    Ok(adjusted_best_f1(&out.scores, labels)?.best_f1)
}

/// A candidate model: built-in detectors can score injected copies,
/// external ones only provide scores on the original series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Candidate {
    Builtin(DetectorConfig),
    External { model_id: String },
}

impl Candidate {
    pub fn model_id(&self) -> &str {
        match self {
            Candidate::Builtin(c) => &c.model_id,
            Candidate::External { model_id } => model_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateOptions {
    pub kinds: Vec<AnomalyKind>,
    pub copies: usize,
    pub centrality: bool,
}

impl SurrogateOptions {
    /// Options covering exactly the families `metric_ids` need.
    pub fn for_metrics(metric_ids: &[String], copies: usize) -> Result<Self> {
        let mut kinds = Vec::new();
        let mut centrality = false;
        for id in metric_ids {
            match metric_def(id)?.class {
                MetricClass::Injection => kinds.push(id.parse::<AnomalyKind>()?),
                MetricClass::Centrality => centrality = true,
                MetricClass::PredictionError => {}
            }
        }
        kinds.sort();
        kinds.dedup();
        Ok(SurrogateOptions {
            kinds,
            copies,
            centrality,
        })
    }
}

/// Per-series ingredients of every metric; dataset-level values are
/// averages over series (pairwise distances too).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetrics {
    pub series_id: String,
    /// Per model; `None` when the model emits no predictions.
    pub prediction: Vec<Option<[f64; 5]>>,
    /// Per kind, per model mean F1 over copies; `None` for external models.
    pub injection: BTreeMap<AnomalyKind, Vec<Option<f64>>>,
    /// Model-by-model normalized Kendall distances (empty when not needed).
    pub distances: Vec<Vec<f64>>,
}

/// Computes every requested ingredient on one series. `outputs[m]` is model
/// `m`'s output on `series`; `period` drives anomaly placement.
pub fn series_metrics(
    series: &TimeSeries,
    models: &[Candidate],
    outputs: &[ModelOutput],
    period: usize,
    opts: &SurrogateOptions,
    seed: RngSeed,
) -> Result<SeriesMetrics> {
    if outputs.len() != models.len() {
        return Err(Error::invalid(format!(
            "{} outputs for {} models",
            outputs.len(),
            models.len()
        )));
    }
    let seed = seed.derive_str(&series.id);
    let prediction = outputs
        .iter()
        .map(|o| prediction_error_series(o, series))
        .collect::<Result<Vec<_>>>()?;
    let mut injection = BTreeMap::new();
    for &kind in &opts.kinds {
        let copies = inject_copies(
            series,
            kind,
            period,
            opts.copies,
            seed.derive_str(kind.as_str()),
        )?;
        let per_model = models
            .par_iter()
            .map(|m| match m {
                Candidate::Builtin(cfg) => {
                    let mut total = 0.0;
                    for c in &copies {
                        let mut out = cfg.score(&c.to_series())?;
                        out.series_id = c.id.clone();
                        total += copy_f1(&out, c)?;
                    }
                    Ok(Some(total / copies.len() as f64))
                }
                Candidate::External { .. } => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        injection.insert(kind, per_model);
    }
    let distances = if opts.centrality {
        let scores: Vec<&[f64]> = outputs.iter().map(|o| o.scores.as_slice()).collect();
        pairwise_distances(&scores, seed.derive(0))?
    } else {
        Vec::new()
    };
    Ok(SeriesMetrics {
        series_id: series.id.clone(),
        prediction,
        injection,
        distances,
    })
}

/// Metric values for every (metric, model) cell; `None` = inapplicable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub metric_ids: Vec<String>,
    pub model_ids: Vec<String>,
    /// `values[metric][model]`.
    pub values: Vec<Vec<Option<f64>>>,
}

/// One cell of a [`MetricTable`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub metric_id: String,
    pub model_id: String,
    pub value: Option<f64>,
    pub direction: Direction,
}

impl MetricTable {
    pub fn cells(&self) -> Vec<MetricValue> {
        let mut out = Vec::new();
        for (mi, metric) in self.metric_ids.iter().enumerate() {
            let direction = metric_def(metric).map_or(Direction::LowerIsBetter, |d| d.direction);
            for (ki, model) in self.model_ids.iter().enumerate() {
                out.push(MetricValue {
                    metric_id: metric.clone(),
                    model_id: model.clone(),
                    value: self.values[mi][ki],
                    direction,
                });
            }
        }
        out
    }

    /// `metric_id,model_id,value,direction` with `inapplicable` for missing values.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric_id,model_id,value,direction\n");
        for c in self.cells() {
            let v = c
                .value
                .map_or_else(|| "inapplicable".to_string(), |v| v.to_string());
            let _ = writeln!(
                s,
                "{},{},{v},{}",
                c.metric_id,
                c.model_id,
                c.direction.as_str()
            );
        }
        s
    }
}

/// Dataset-level metric table over the series in `per_series`.
pub fn metric_table(
    per_series: &[&SeriesMetrics],
    model_ids: &[String],
    metric_ids: &[String],
) -> Result<MetricTable> {
    if per_series.is_empty() {
        return Err(Error::invalid("metric table needs at least one series"));
    }
    let n = model_ids.len();
    let l = per_series.len() as f64;
    let mut values = Vec::with_capacity(metric_ids.len());
    let mut mean_dist: Option<Vec<Vec<f64>>> = None;
    for id in metric_ids {
        let def = metric_def(id)?;
        let row: Vec<Option<f64>> = match def.class {
            MetricClass::PredictionError => {
                let slot = CATALOG
                    .iter()
                    .position(|m| m.id == def.id)
                    .expect("catalog id");
                (0..n)
                    .map(|m| {
                        let mut sum = 0.0;
                        for s in per_series {
                            sum += s.prediction[m]?[slot];
                        }
                        Some(sum / l)
                    })
                    .collect()
            }
            MetricClass::Injection => {
                let kind: AnomalyKind = def.id.parse()?;
                (0..n)
                    .map(|m| {
                        let mut sum = 0.0;
                        for s in per_series {
                            let v = s.injection.get(&kind).ok_or_else(|| {
                                Error::missing(format!(
                                    "'{}' injections for series '{}'",
                                    def.id, s.series_id
                                ))
                            })?;
                            match v[m] {
                                Some(f) => sum += f,
                                None => return Ok(None),
                            }
                        }
                        Ok(Some(sum / l))
                    })
                    .collect::<Result<_>>()?
            }
            MetricClass::Centrality => {
                let k: usize = def.id[3..].parse().expect("knn<K> id");
                if mean_dist.is_none() {
                    let mut acc = vec![vec![0.0; n]; n];
                    for s in per_series {
                        if s.distances.len() != n {
                            return Err(Error::missing(format!(
                                "model distances for series '{}'",
                                s.series_id
                            )));
                        }
                        for (row, drow) in acc.iter_mut().zip(&s.distances) {
                            for (a, d) in row.iter_mut().zip(drow) {
                                *a += d / l;
                            }
                        }
                    }
                    mean_dist = Some(acc);
                }
                centrality_from_distances(mean_dist.as_ref().expect("just set"), k)?
                    .into_iter()
                    .map(Some)
                    .collect()
            }
        };
        values.push(row);
    }
    Ok(MetricTable {
        metric_ids: metric_ids.to_vec(),
        model_ids: model_ids.to_vec(),
        values,
    })
}

/// How rankings treat models a metric does not apply to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InapplicablePolicy {
    /// Inapplicable models share the worst ranks.
    #[default]
    RankLast,
    /// Metrics with any inapplicable model are left out.
    DropMetric,
}

impl FromStr for InapplicablePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rank_last" => Ok(InapplicablePolicy::RankLast),
            "drop_metric" => Ok(InapplicablePolicy::DropMetric),
            _ => Err(Error::invalid(format!("unknown inapplicable policy '{s}'"))),
        }
    }
}

/// One model ranking per metric; each metric draws its tie-breaks from
/// `seed` derived by metric id.
pub fn metric_rankings(
    table: &MetricTable,
    seed: RngSeed,
    policy: InapplicablePolicy,
) -> Result<RankingSet> {
    let mut rankings = Vec::new();
    let mut ids = Vec::new();
    for (id, row) in table.metric_ids.iter().zip(&table.values) {
        if row.len() != table.model_ids.len() {
            return Err(Error::invalid(format!(
                "metric '{id}' has {} of {} values",
                row.len(),
                table.model_ids.len()
            )));
        }
        if policy == InapplicablePolicy::DropMetric && row.iter().any(Option::is_none) {
            continue;
        }
        let def = metric_def(id)?;
        rankings.push(rank_from_values(row, def.direction, seed.derive_str(id))?);
        ids.push(id.clone());
    }
    if rankings.is_empty() {
        return Err(Error::invalid("no metric left to rank models by"));
    }
    RankingSet::new(rankings, ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn out(series: &str, scores: Vec<f64>, preds: Option<Vec<f64>>) -> ModelOutput {
        ModelOutput {
            model_id: "m".into(),
            series_id: series.into(),
            scores,
            predictions: preds.map(|p| p.into_iter().map(|v| vec![v]).collect()),
        }
    }

    #[test]
    fn catalog_shape() {
        assert_eq!(CATALOG.len(), 17);
        let mut ids: Vec<&str> = CATALOG.iter().map(|m| m.id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 17);
        assert_eq!(
            CATALOG
                .iter()
                .filter(|m| m.class == MetricClass::Injection)
                .count(),
            9
        );
        let ordered = catalog_order(&["scale".into(), "mae".into(), "scale".into()]).unwrap();
        assert_eq!(ordered, vec!["mae", "scale"]);
        assert!(catalog_order(&["nope".into()]).is_err());
    }

    #[test]
    fn perfect_predictions() {
        let s = TimeSeries::univariate("a", &[1.0, -2.0, 3.0]).unwrap();
        let v = prediction_error_series(&out("a", vec![0.0; 3], Some(vec![1.0, -2.0, 3.0])), &s)
            .unwrap()
            .unwrap();
        assert_eq!(&v[..4], &[0.0; 4]);
    }

    #[test]
    fn hand_computed_errors() {
        let s = TimeSeries::univariate("a", &[1.0, 2.0]).unwrap();
        let v = prediction_error_series(&out("a", vec![0.0; 2], Some(vec![2.0, 4.0])), &s)
            .unwrap()
            .unwrap();
        assert_eq!(v[0], 1.5);
        assert_eq!(v[1], 2.5);
        assert_eq!(v[2], 1.0);
        assert!((v[3] - (2.0 / 3.0 + 4.0 / 6.0) / 2.0).abs() < 1e-15);
        let nll = 0.5 * (2.0 * std::f64::consts::PI * 2.5).ln() + 0.5;
        assert!((v[4] - nll).abs() < 1e-15);
        assert!(prediction_error_series(&out("a", vec![0.0; 2], None), &s)
            .unwrap()
            .is_none());
    }

    fn brute_distance(a: &[f64], b: &[f64]) -> f64 {
        let t = a.len();
        let ra = time_point_ranking(a);
        let rb = time_point_ranking(b);
        let mut c = 0;
        for i in 0..t {
            for j in i + 1..t {
                if (ra.rank(i) < ra.rank(j)) != (rb.rank(i) < rb.rank(j)) {
                    c += 1;
                }
            }
        }
        c as f64 / (t * (t - 1) / 2) as f64
    }

    #[test]
    fn distance_extremes() {
        let a = [0.1, 0.5, 0.3, 0.9];
        let rev: Vec<f64> = a.iter().map(|v| -v).collect();
        let d = pairwise_distances(&[&a, &a, &rev], RngSeed(0)).unwrap();
        assert_eq!(d[0][1], 0.0);
        assert_eq!(d[0][2], 1.0);
    }

    #[test]
    fn centrality_matches_brute_force() {
        let scores: Vec<Vec<f64>> = vec![
            vec![0.1, 0.4, 0.2, 0.8, 0.5, 0.3],
            vec![0.2, 0.3, 0.1, 0.9, 0.6, 0.0],
            vec![0.9, 0.1, 0.2, 0.3, 0.4, 0.5],
            vec![0.0, 0.0, 1.0, 0.5, 0.5, 0.2],
        ];
        let s = TimeSeries::univariate("a", &[0.0; 6]).unwrap();
        let ds = Dataset::new("d", vec![s]).unwrap();
        let outputs: Vec<Vec<ModelOutput>> = scores
            .iter()
            .map(|v| vec![out("a", v.clone(), None)])
            .collect();
        let c = centrality(&outputs, &ds, 2, RngSeed(0)).unwrap();
        for a in 0..4 {
            let mut d: Vec<f64> = (0..4)
                .filter(|&b| b != a)
                .map(|b| brute_distance(&scores[a], &scores[b]))
                .collect();
            d.sort_by(f64::total_cmp);
            assert!((c[a] - (d[0] + d[1]) / 2.0).abs() < 1e-12);
        }
        assert!(centrality(&outputs, &ds, 4, RngSeed(0)).is_err());
    }

    #[test]
    fn injection_perfect_and_constant() {
        let s = TimeSeries::univariate("a", &[0.0; 10])
            .unwrap()
            .with_train_end(2)
            .unwrap();
        let mut labels = vec![0u8; 10];
        labels[4..6].iter_mut().for_each(|l| *l = 1);
        let copy = InjectedSeries {
            id: "a-noise-0".into(),
            values: s.values.clone(),
            pseudo_labels: labels.clone(),
            anomaly_span: (4, 6),
            kind: AnomalyKind::Noise,
            train_end: Some(2),
        };
        let perfect: Vec<f64> = labels[2..].iter().map(|&l| f64::from(l)).collect();
        assert_eq!(
            injection_metric(
                &[out("a-noise-0", perfect, None)],
                std::slice::from_ref(&copy)
            )
            .unwrap(),
            1.0
        );
        let constant = injection_metric(
            &[out("a-noise-0", vec![1.0; 8], None)],
            std::slice::from_ref(&copy),
        )
        .unwrap();
        // everything predicted: precision 2/8, recall 1
        let (p, r) = (0.25, 1.0);
        assert!((constant - 2.0 * p * r / (p + r)).abs() < 1e-15);
        assert!(injection_metric(&[], &[copy]).is_err());
    }

    #[test]
    fn inapplicable_ranked_last_or_dropped() {
        let table = MetricTable {
            metric_ids: vec!["mae".into(), "scale".into()],
            model_ids: vec!["a".into(), "b".into(), "c".into()],
            values: vec![
                vec![None, Some(2.0), Some(1.0)],
                vec![Some(0.1), Some(0.9), Some(0.5)],
            ],
        };
        let set = metric_rankings(&table, RngSeed(0), InapplicablePolicy::RankLast).unwrap();
        assert_eq!(set.rankings[0].ranks(), &[3, 2, 1]);
        assert_eq!(set.rankings[1].ranks(), &[3, 1, 2]);
        let set = metric_rankings(&table, RngSeed(0), InapplicablePolicy::DropMetric).unwrap();
        assert_eq!(set.metric_ids, vec!["scale"]);
        assert!(table
            .to_csv()
            .contains("mae,a,inapplicable,lower_is_better"));
    }

    proptest! {
        #[test]
        fn distance_is_pseudo_metric(
            rows in prop::collection::vec(prop::collection::vec(0u8..6, 8), 3)
        ) {
            let s: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect();
            let refs: Vec<&[f64]> = s.iter().map(Vec::as_slice).collect();
            let d = pairwise_distances(&refs, RngSeed(0)).unwrap();
            for a in 0..3 {
                prop_assert_eq!(d[a][a], 0.0);
                for b in 0..3 {
                    prop_assert_eq!(d[a][b], d[b][a]);
                    prop_assert!((0.0..=1.0).contains(&d[a][b]));
                    prop_assert!((d[a][b] - brute_distance(&s[a], &s[b])).abs() < 1e-12);
                    for c in 0..3 {
                        prop_assert!(d[a][b] <= d[a][c] + d[c][b] + 1e-12);
                    }
                }
            }
        }

        #[test]
        fn rankings_monotone_invariant(vals in prop::collection::vec(-100i32..100, 1..10), seed: u64) {
            let v: Vec<Option<f64>> = vals.iter().map(|&x| Some(f64::from(x))).collect();
            let w: Vec<Option<f64>> = vals.iter().map(|&x| Some((f64::from(x) / 10.0).exp())).collect();
            let mk = |values| MetricTable { metric_ids: vec!["mse".into()], model_ids: (0..vals.len()).map(|i| i.to_string()).collect(), values: vec![values] };
            let a = metric_rankings(&mk(v), RngSeed(seed), InapplicablePolicy::RankLast).unwrap();
            let b = metric_rankings(&mk(w), RngSeed(seed), InapplicablePolicy::RankLast).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
