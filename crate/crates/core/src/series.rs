//! Time-series, datasets and model outputs.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `T x d` observation sequence with optional anomaly labels.
///
/// Observations before `train_end` form the (unlabeled) train segment; the
/// rest is the test segment that models score and that evaluation uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub id: String,
    pub values: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_end: Option<usize>,
}

impl TimeSeries {
    /// Builds a series and checks every invariant.
    pub fn new(
        id: impl Into<String>,
        values: Vec<Vec<f64>>,
        labels: Option<Vec<u8>>,
        train_end: Option<usize>,
    ) -> Result<Self> {
        let s = TimeSeries {
            id: id.into(),
            values,
            labels,
            train_end,
        };
        s.validate()?;
        Ok(s)
    }

    /// Univariate convenience constructor.
    pub fn univariate(id: impl Into<String>, values: &[f64]) -> Result<Self> {
        Self::new(id, values.iter().map(|&v| vec![v]).collect(), None, None)
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Result<Self> {
        self.labels = Some(labels);
        self.validate()?;
        Ok(self)
    }

    pub fn with_train_end(mut self, train_end: usize) -> Result<Self> {
        self.train_end = Some(train_end);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid(format!("series '{}' is empty", self.id)));
        }
        let d = self.values[0].len();
        if d == 0 {
            return Err(Error::invalid(format!(
                "series '{}' has zero dimensions",
                self.id
            )));
        }
        for (t, row) in self.values.iter().enumerate() {
            if row.len() != d {
                return Err(Error::invalid(format!(
                    "series '{}' row {t} has {} dims, expected {d}",
                    self.id,
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "series '{}' row {t} has non-finite value {v}",
                    self.id
                )));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.values.len() {
                return Err(Error::invalid(format!(
                    "series '{}' has {} labels for {} observations",
                    self.id,
                    labels.len(),
                    self.values.len()
                )));
            }
            if let Some(l) = labels.iter().find(|&&l| l > 1) {
                return Err(Error::invalid(format!(
                    "series '{}' has label {l} outside {{0,1}}",
                    self.id
                )));
            }
        }
        if let Some(te) = self.train_end {
            if te > self.values.len() {
                return Err(Error::invalid(format!(
                    "series '{}' train_end {te} exceeds length {}",
                    self.id,
                    self.values.len()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// First index of the test segment (`train_end`, or 0 when absent).
    pub fn test_start(&self) -> usize {
        self.train_end.unwrap_or(0)
    }

    pub fn test_len(&self) -> usize {
        self.len() - self.test_start()
    }

    pub fn train_values(&self) -> &[Vec<f64>] {
        &self.values[..self.test_start()]
    }

    pub fn test_values(&self) -> &[Vec<f64>] {
        &self.values[self.test_start()..]
    }

    pub fn test_labels(&self) -> Option<&[u8]> {
        self.labels.as_deref().map(|l| &l[self.test_start()..])
    }

    /// Values of one dimension as a column.
    pub fn column(&self, dim: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[dim]).collect()
    }
}

/// A named collection of series with unique ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub series: Vec<TimeSeries>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, series: Vec<TimeSeries>) -> Result<Self> {
        let ds = Dataset {
            name: name.into(),
            series,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.series.is_empty() {
            return Err(Error::invalid(format!(
                "dataset '{}' has no series",
                self.name
            )));
        }
        let mut seen = HashSet::new();
        for s in &self.series {
            s.validate()?;
            if !seen.insert(s.id.as_str()) {
                return Err(Error::invalid(format!(
                    "dataset '{}' has duplicate series id '{}'",
                    self.name, s.id
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TimeSeries> {
        self.series.iter().find(|s| s.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.series.iter().map(|s| s.id.as_str())
    }
}

/// Anomaly scores (and optional forecasts/reconstructions) of one model on
/// the test segment of one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutput {
    pub model_id: String,
    pub series_id: String,
    pub scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<Vec<Vec<f64>>>,
}

impl ModelOutput {
    /// Checks the output against the test segment of `series`.
    pub fn validate_against(&self, series: &TimeSeries) -> Result<()> {
        if self.series_id != series.id {
            return Err(Error::invalid(format!(
                "output of '{}' refers to series '{}', not '{}'",
                self.model_id, self.series_id, series.id
            )));
        }
        let expected = series.test_len();
        if self.scores.len() != expected {
            return Err(Error::invalid(format!(
                "model '{}' has {} scores for series '{}' with test length {expected}",
                self.model_id,
                self.scores.len(),
                series.id
            )));
        }
        if let Some((t, s)) = self
            .scores
            .iter()
            .enumerate()
            .find(|(_, s)| !s.is_finite() || **s < 0.0)
        {
            return Err(Error::invalid(format!(
                "model '{}' score {s} at t={t} on series '{}' is not a finite non-negative value",
                self.model_id, series.id
            )));
        }
        if let Some(preds) = &self.predictions {
            if preds.len() != expected {
                return Err(Error::invalid(format!(
                    "model '{}' has {} predictions for series '{}' with test length {expected}",
                    self.model_id,
                    preds.len(),
                    series.id
                )));
            }
            let d = series.dim();
            if preds
                .iter()
                .any(|p| p.len() != d || p.iter().any(|v| !v.is_finite()))
            {
                return Err(Error::invalid(format!(
                    "model '{}' predictions on series '{}' must be finite {d}-dimensional vectors",
                    self.model_id, series.id
                )));
            }
        }
        Ok(())
    }
}
