use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::ingest_external;
use crate::error::{Error, Result};
use crate::evaluation::{adjusted_best_f1, pooled_best_f1, Pooling};
use crate::injection::estimate_period;
use crate::io::load_dataset;
use crate::perm::Permutation;
use crate::prep::{split_selection_evaluation, subsample_dataset};
use crate::rankagg::{
    borda, kemeny_exact, minimum_influence_metric, partial_borda, trim_by_influence, RankingSet,
    TrimResult, KEMENY_MAX_N,
};
use crate::rng::RngSeed;
use crate::series::{Dataset, ModelOutput, TimeSeries};
use crate::surrogate::{
    metric_rankings, metric_table, series_metrics, Candidate, InapplicablePolicy, MetricTable,
    SeriesMetrics, SurrogateOptions,
};

use super::config::{AggMethod, ExperimentConfig, Granularity, CONFIG_SCHEMA};
use super::pairwise::{pairwise_from_f1, PairwiseTable};

/// Aggregation inputs and outputs for one selection scope (the whole
/// evaluation split, or one series of it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeReport {
    /// Per metric, one value per model (`null` = inapplicable).
    pub metric_values: BTreeMap<String, Vec<Option<f64>>>,
    /// Per metric, the rank of each model.
    pub rankings: BTreeMap<String, Vec<usize>>,
    pub influence: BTreeMap<String, f64>,
    pub discarded: Vec<String>,
    /// Per aggregation method, the rank of each model.
    pub aggregates: BTreeMap<String, Vec<usize>>,
    /// Strategy -> selected model id.
    pub selected: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionReport {
    pub repetition: usize,
    pub selection_series: Vec<String>,
    pub evaluation_series: Vec<String>,
    pub scopes: BTreeMap<String, ScopeReport>,
    /// Label-based quality of every model on the evaluation split.
    pub model_f1: BTreeMap<String, f64>,
    /// Label-based quality of each strategy's selection.
    pub f1: BTreeMap<String, f64>,
    pub supervised_model: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub mean_f1: f64,
    pub min_f1: f64,
    pub max_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub schema: u32,
    pub dataset: String,
    pub seed: RngSeed,
    pub models: Vec<String>,
    pub metrics: Vec<String>,
    pub strategies: Vec<String>,
    pub k: usize,
    pub granularity: Granularity,
    pub pooling: Pooling,
    pub repetitions: Vec<RepetitionReport>,
    pub summary: BTreeMap<String, StrategySummary>,
    pub pairwise: PairwiseTable,
    pub notes: Vec<String>,
}

impl SelectionReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// F1 of every strategy in every repetition, in strategy order.
    pub fn f1_series(&self) -> BTreeMap<String, Vec<f64>> {
        self.strategies
            .iter()
            .map(|s| {
                (
                    s.clone(),
                    self.repetitions.iter().map(|r| r.f1[s]).collect(),
                )
            })
            .collect()
    }
}

/// `dataset,repetition,strategy,model,f1`; `model` is empty for the random
/// baseline and for per-series selection.
pub fn rollup_csv(reports: &[SelectionReport]) -> String {
    let mut out = String::from("dataset,repetition,strategy,model,f1\n");
    for rep in reports {
        for r in &rep.repetitions {
            for s in &rep.strategies {
                let model = match rep.granularity {
                    Granularity::Dataset => r
                        .scopes
                        .get("dataset")
                        .and_then(|sc| sc.selected.get(s))
                        .map_or("", String::as_str),
                    Granularity::Series => "",
                };
                let _ = writeln!(
                    out,
                    "{},{},{s},{model},{}",
                    rep.dataset, r.repetition, r.f1[s]
                );
            }
        }
    }
    out
}

/// Loads the configured dataset and score directories, then runs.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SelectionReport> {
    config.validate()?;
    let path = config
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Config("config has no dataset path".into()))?;
    let dataset = load_dataset(path, config.format)?;
    let mut external = Vec::new();
    for dir in &config.external {
        external.extend(ingest_external(dir, &dataset)?);
    }
    run_with_dataset(config, &dataset, external)
}

/// Decimates an output computed on the full-rate series so it lines up with
/// the subsampled test segment (absolute indices divisible by `factor`).
fn subsample_output(
    out: ModelOutput,
    series: &TimeSeries,
    threshold: usize,
    factor: usize,
) -> ModelOutput {
    let factor = factor.max(1);
    if series.len() <= threshold || factor == 1 {
        return out;
    }
    let ts = series.test_start();
    let keep: Vec<usize> = (0..out.scores.len())
        .filter(|i| (ts + i).is_multiple_of(factor))
        .collect();
    ModelOutput {
        scores: keep.iter().map(|&i| out.scores[i]).collect(),
        predictions: out
            .predictions
            .map(|p| keep.iter().map(|&i| p[i].clone()).collect()),
        ..out
    }
}

struct Prepared {
    data: Dataset,
    model_ids: Vec<String>,
    /// `f1[series][model]` against the true labels.
    f1: Vec<Vec<f64>>,
    /// `scores[series][model]` for pooled quality.
    outputs: Vec<Vec<ModelOutput>>,
    metrics: Vec<SeriesMetrics>,
}

impl Prepared {
    fn quality(&self, idx: &[usize], model: usize, pooling: Pooling) -> Result<f64> {
        match pooling {
            Pooling::PerSeries => {
                Ok(idx.iter().map(|&i| self.f1[i][model]).sum::<f64>() / idx.len() as f64)
            }
            Pooling::Pooled => {
                let chunks: Vec<(&[f64], &[u8])> = idx
                    .iter()
                    .map(|&i| {
                        let labels = self.data.series[i]
                            .test_labels()
                            .expect("labels checked up front");
                        (self.outputs[i][model].scores.as_slice(), labels)
                    })
                    .collect();
                Ok(pooled_best_f1(&chunks)?.best_f1)
            }
        }
    }
}

/// Built-in and external candidates of one experiment.
struct Roster {
    models: Vec<Candidate>,
    /// External outputs by model, already aligned with the subsampled data.
    external: BTreeMap<String, Vec<ModelOutput>>,
}

impl Roster {
    /// Subsamples `dataset` and checks the roster: unique ids, at least one
    /// model, and external scores for every series.
    fn assemble(
        config: &ExperimentConfig,
        dataset: &Dataset,
        external: Vec<ModelOutput>,
    ) -> Result<(Dataset, Roster)> {
        let sub = config.subsample;
        let data = subsample_dataset(dataset, sub.threshold, sub.factor);
        let mut external_by_model: BTreeMap<String, Vec<ModelOutput>> = BTreeMap::new();
        for out in external {
            let series = dataset.get(&out.series_id).ok_or_else(|| {
                Error::invalid(format!(
                    "external output for unknown series '{}'",
                    out.series_id
                ))
            })?;
            out.validate_against(series)?;
            let model = out.model_id.clone();
            external_by_model
                .entry(model)
                .or_default()
                .push(subsample_output(out, series, sub.threshold, sub.factor));
        }

        let mut models: Vec<Candidate> = config
            .roster()
            .into_iter()
            .map(Candidate::Builtin)
            .collect();
        models.extend(external_by_model.keys().map(|m| Candidate::External {
            model_id: m.clone(),
        }));
        let model_ids: Vec<String> = models.iter().map(|m| m.model_id().to_string()).collect();
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = model_ids.iter().find(|m| !seen.insert(m.as_str())) {
            return Err(Error::Config(format!(
                "model id '{dup}' appears twice in the roster"
            )));
        }
        if models.is_empty() {
            return Err(Error::Config("model roster is empty".into()));
        }
        for (model, outs) in &external_by_model {
            for s in &data.series {
                if !outs.iter().any(|o| o.series_id == s.id) {
                    return Err(Error::missing(format!(
                        "scores of external model '{model}' on series '{}'",
                        s.id
                    )));
                }
            }
        }
        Ok((
            data,
            Roster {
                models,
                external: external_by_model,
            },
        ))
    }

    fn model_ids(&self) -> Vec<String> {
        self.models
            .iter()
            .map(|m| m.model_id().to_string())
            .collect()
    }

    /// Outputs of every model on one (subsampled) series, in roster order.
    fn outputs(&self, s: &TimeSeries) -> Result<Vec<ModelOutput>> {
        self.models
            .iter()
            .map(|m| match m {
                Candidate::Builtin(cfg) => cfg.score(s),
                Candidate::External { model_id } => {
                    let o = self.external[model_id]
                        .iter()
                        .find(|o| o.series_id == s.id)
                        .expect("coverage checked")
                        .clone();
                    o.validate_against(s)?;
                    Ok(o)
                }
            })
            .collect()
    }
}

/// Label-free metric table of the configured roster and metrics over all of
/// `dataset`, using the same seeds as [`run_with_dataset`].
pub fn dataset_metric_table(
    config: &ExperimentConfig,
    dataset: &Dataset,
    external: Vec<ModelOutput>,
) -> Result<MetricTable> {
    config.validate()?;
    dataset.validate()?;
    let metric_ids = config.metric_ids()?;
    let (data, roster) = Roster::assemble(config, dataset, external)?;
    let opts = SurrogateOptions::for_metrics(&metric_ids, config.copies)?;
    let metric_seed = config.seed.derive(1);
    let per_series: Vec<SeriesMetrics> = data
        .series
        .par_iter()
        .map(|s| {
            let outputs = roster.outputs(s)?;
            let period = estimate_period(s).unwrap_or(1);
            series_metrics(s, &roster.models, &outputs, period, &opts, metric_seed)
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&SeriesMetrics> = per_series.iter().collect();
    metric_table(&refs, &roster.model_ids(), &metric_ids)
}

/// Scores every model, precomputes metric ingredients per series, then runs
/// the configured repetitions. `external` holds outputs of externally
/// trained models on `dataset` (full rate).
pub fn run_with_dataset(
    config: &ExperimentConfig,
    dataset: &Dataset,
    external: Vec<ModelOutput>,
) -> Result<SelectionReport> {
    config.validate()?;
    dataset.validate()?;
    let metric_ids = config.metric_ids()?;
    if dataset.len() < 2 {
        return Err(Error::invalid(format!(
            "dataset '{}' needs at least 2 series for a selection/evaluation split",
            dataset.name
        )));
    }
    if let Some(s) = dataset.series.iter().find(|s| s.labels.is_none()) {
        return Err(Error::missing(format!(
            "labels for series '{}' (needed for evaluation)",
            s.id
        )));
    }

    let (data, roster) = Roster::assemble(config, dataset, external)?;
    let model_ids = roster.model_ids();
    let opts = SurrogateOptions::for_metrics(&metric_ids, config.copies)?;
    let metric_seed = config.seed.derive(1);
    let per_series: Vec<(Vec<ModelOutput>, Vec<f64>, SeriesMetrics)> = data
        .series
        .par_iter()
        .map(|s| {
            let outputs = roster.outputs(s)?;
            let labels = s.test_labels().expect("labels checked");
            let f1 = outputs
                .iter()
                .map(|o| Ok(adjusted_best_f1(&o.scores, labels)?.best_f1))
                .collect::<Result<Vec<_>>>()?;
            let period = estimate_period(s).unwrap_or(1);
            let metrics = series_metrics(s, &roster.models, &outputs, period, &opts, metric_seed)?;
            Ok((outputs, f1, metrics))
        })
        .collect::<Result<_>>()?;
    let mut outputs = Vec::with_capacity(per_series.len());
    let mut f1 = Vec::with_capacity(per_series.len());
    let mut metrics = Vec::with_capacity(per_series.len());
    for (o, f, m) in per_series {
        outputs.push(o);
        f1.push(f);
        metrics.push(m);
    }
    let prep = Prepared {
        data,
        model_ids,
        f1,
        outputs,
        metrics,
    };

    let n = prep.model_ids.len();
    let k = config.k.unwrap_or(n.div_ceil(2));
    if k > n {
        return Err(Error::Config(format!(
            "k = {k} exceeds the roster size {n}"
        )));
    }
    let mut notes = Vec::new();
    let mut methods: Vec<AggMethod> = Vec::new();
    for &m in &config.methods {
        if methods.contains(&m) {
            continue;
        }
        if m == AggMethod::Kemeny && n > KEMENY_MAX_N {
            notes.push(format!(
                "kemeny skipped: {n} models exceed the exact limit of {KEMENY_MAX_N}"
            ));
            continue;
        }
        methods.push(m);
    }
    let mut strategies: Vec<String> = methods.iter().map(|m| m.as_str().to_string()).collect();
    strategies.extend(metric_ids.iter().map(|id| format!("metric:{id}")));
    strategies.extend(["supervised", "oracle", "random"].map(String::from));

    let repetitions = (0..config.repetitions)
        .into_par_iter()
        .map(|r| run_repetition(config, &prep, &metric_ids, &methods, k, r))
        .collect::<Result<Vec<_>>>()?;

    let summary = strategies
        .iter()
        .map(|s| {
            let v: Vec<f64> = repetitions.iter().map(|r| r.f1[s]).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let summary = StrategySummary {
                mean_f1: mean,
                min_f1: v.iter().copied().fold(f64::INFINITY, f64::min),
                max_f1: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
            (s.clone(), summary)
        })
        .collect();
    let mut report = SelectionReport {
        schema: CONFIG_SCHEMA,
        dataset: dataset.name.clone(),
        seed: config.seed,
        models: prep.model_ids.clone(),
        metrics: metric_ids,
        strategies,
        k,
        granularity: config.granularity,
        pooling: config.pooling,
        repetitions,
        summary,
        pairwise: PairwiseTable::default(),
        notes,
    };
    report.pairwise = pairwise_from_f1(
        &[(report.dataset.clone(), report.f1_series())],
        &report.strategies,
        config.alpha,
    )?;
    Ok(report)
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn run_repetition(
    config: &ExperimentConfig,
    prep: &Prepared,
    metric_ids: &[String],
    methods: &[AggMethod],
    k: usize,
    r: usize,
) -> Result<RepetitionReport> {
    let seed = config.seed.derive(1_000 + r as u64);
    let (sel, eval) =
        split_selection_evaluation(&prep.data, config.selection_fraction, seed.derive(0))?;
    let index_of = |id: &str| {
        prep.data
            .series
            .iter()
            .position(|s| s.id == id)
            .expect("split keeps ids")
    };
    let sel_idx: Vec<usize> = sel.ids().map(index_of).collect();
    let eval_idx: Vec<usize> = eval.ids().map(index_of).collect();
    let n = prep.model_ids.len();

    // series-level selection is judged per series, whatever the pooling
    let eval_pooling = match config.granularity {
        Granularity::Dataset => config.pooling,
        Granularity::Series => Pooling::PerSeries,
    };
    let q_sel = (0..n)
        .map(|m| prep.quality(&sel_idx, m, config.pooling))
        .collect::<Result<Vec<_>>>()?;
    let q_eval = (0..n)
        .map(|m| prep.quality(&eval_idx, m, eval_pooling))
        .collect::<Result<Vec<_>>>()?;

    let scopes: Vec<(String, Vec<usize>)> = match config.granularity {
        Granularity::Dataset => vec![("dataset".to_string(), eval_idx.clone())],
        Granularity::Series => eval_idx
            .iter()
            .map(|&i| (prep.data.series[i].id.clone(), vec![i]))
            .collect(),
    };
    let mut scope_reports = BTreeMap::new();
    let mut strategy_f1: BTreeMap<String, f64> = BTreeMap::new();
    for (scope, idx) in &scopes {
        let refs: Vec<&SeriesMetrics> = idx.iter().map(|&i| &prep.metrics[i]).collect();
        let table = metric_table(&refs, &prep.model_ids, metric_ids)?;
        let rank_seed = seed.derive(1).derive_str(scope);
        let all = metric_rankings(&table, rank_seed, InapplicablePolicy::RankLast)?;
        let set = metric_rankings(&table, rank_seed, config.inapplicable)?;
        let agg_seed = seed.derive(2).derive_str(scope);
        let report = aggregate_scope(
            &table.metric_ids,
            &table.values,
            &all,
            &set,
            methods,
            k,
            agg_seed,
            &prep.model_ids,
        )?;
        // a scope's selections score on its own series
        for (strategy, model) in &report.selected {
            let m = prep
                .model_ids
                .iter()
                .position(|id| id == model)
                .expect("roster model");
            let q = match config.granularity {
                Granularity::Dataset => q_eval[m],
                Granularity::Series => prep.f1[idx[0]][m] / scopes.len() as f64,
            };
            *strategy_f1.entry(strategy.clone()).or_default() += q;
        }
        scope_reports.insert(scope.clone(), report);
    }

    let supervised = argmax(&q_sel);
    strategy_f1.insert("supervised".into(), q_eval[supervised]);
    let oracle = match config.granularity {
        Granularity::Dataset => q_eval[argmax(&q_eval)],
        Granularity::Series => {
            eval_idx
                .iter()
                .map(|&i| prep.f1[i].iter().copied().fold(0.0, f64::max))
                .sum::<f64>()
                / eval_idx.len() as f64
        }
    };
    strategy_f1.insert("oracle".into(), oracle);
    strategy_f1.insert("random".into(), q_eval.iter().sum::<f64>() / n as f64);

    Ok(RepetitionReport {
        repetition: r,
        selection_series: sel.ids().map(String::from).collect(),
        evaluation_series: eval.ids().map(String::from).collect(),
        scopes: scope_reports,
        model_f1: prep.model_ids.iter().cloned().zip(q_eval).collect(),
        f1: strategy_f1,
        supervised_model: prep.model_ids[supervised].clone(),
    })
}

/// Runs every aggregation method on `set` and records the top-ranked model
/// per strategy: each method, plus each single metric of `all` (every
/// metric, inapplicable models ranked last).
#[allow(clippy::too_many_arguments)]
pub fn aggregate_scope(
    metric_ids: &[String],
    values: &[Vec<Option<f64>>],
    all: &RankingSet,
    set: &RankingSet,
    methods: &[AggMethod],
    k: usize,
    seed: RngSeed,
    model_ids: &[String],
) -> Result<ScopeReport> {
    let trim: TrimResult = if set.m() >= 2 {
        trim_by_influence(set, seed)?
    } else {
        TrimResult {
            kept: set.clone(),
            discarded: Vec::new(),
            influence: vec![0.0; set.m()],
        }
    };
    let mut aggregates = BTreeMap::new();
    let mut selected = BTreeMap::new();
    for &m in methods {
        let agg: Permutation = match m {
            AggMethod::Borda => borda(set, seed)?,
            AggMethod::Partial => partial_borda(set, k, seed)?,
            AggMethod::Trimmed => borda(&trim.kept, seed)?,
            AggMethod::Mim => {
                if set.m() >= 2 {
                    minimum_influence_metric(set, seed)?.1
                } else {
                    set.rankings[0].clone()
                }
            }
            AggMethod::Robust => partial_borda(&trim.kept, k, seed)?,
            AggMethod::Kemeny => kemeny_exact(set)?,
        };
        selected.insert(m.as_str().to_string(), model_ids[agg.top()].clone());
        aggregates.insert(m.as_str().to_string(), agg.ranks().to_vec());
    }
    for (id, ranking) in all.metric_ids.iter().zip(&all.rankings) {
        selected.insert(format!("metric:{id}"), model_ids[ranking.top()].clone());
    }
    Ok(ScopeReport {
        metric_values: metric_ids
            .iter()
            .cloned()
            .zip(values.iter().cloned())
            .collect(),
        rankings: set
            .metric_ids
            .iter()
            .cloned()
            .zip(set.rankings.iter().map(|p| p.ranks().to_vec()))
            .collect(),
        influence: set
            .metric_ids
            .iter()
            .cloned()
            .zip(trim.influence.iter().copied())
            .collect(),
        discarded: trim.discarded,
        aggregates,
        selected,
    })
}
