use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::aggregate::aggregate_leaderboard;
use super::{Metric, SampleScore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Quartiles by the median-of-halves rule; for odd counts the median is
/// excluded from both halves. A single value is its own quartiles.
pub fn quartiles(values: &mut [f64]) -> Option<FiveNumber> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let median = median_sorted(values);
    let (q1, q3) = if n == 1 {
        (values[0], values[0])
    } else {
        let half = n / 2;
        (
            median_sorted(&values[..half]),
            median_sorted(&values[n - half..]),
        )
    };
    Some(FiveNumber {
        min: values[0],
        q1,
        median,
        q3,
        max: values[n - 1],
    })
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::UndefinedCorrelation(format!(
            "length mismatch {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(
            "fewer than two observations".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationLevel {
    /// One observation per scored sample.
    #[default]
    Sample,
    /// One observation per model (leaderboard means).
    Model,
}

/// Symmetric metric × metric matrix; undefined cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub metrics: Vec<Metric>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: Metric, b: Metric) -> Option<f64> {
        let i = self.metrics.iter().position(|m| *m == a)?;
        let j = self.metrics.iter().position(|m| *m == b)?;
        self.values[i][j]
    }
}

/// Observations as rows of optional metric values.
fn matrix_from_rows(rows: &[[Option<f64>; 8]], metrics: &[Metric]) -> CorrelationMatrix {
    let k = metrics.len();
    let mut values = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let (a, b) = (metrics[i].index(), metrics[j].index());
            let (x, y): (Vec<f64>, Vec<f64>) =
                rows.iter().filter_map(|r| Some((r[a]?, r[b]?))).unzip();
            let r = pearson(&x, &y).ok().map(|r| if i == j { 1.0 } else { r });
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    CorrelationMatrix {
        metrics: metrics.to_vec(),
        values,
    }
}

fn sample_rows<'a>(scores: impl Iterator<Item = &'a SampleScore>) -> Vec<[Option<f64>; 8]> {
    scores.map(|s| Metric::ALL.map(|m| s.get(m))).collect()
}

/// Pearson correlations between metrics. At sample level every score is an
/// observation (pooled across models); at model level each leaderboard row
/// is one.
pub fn correlation_matrix(
    scores: &[SampleScore],
    metrics: &[Metric],
    level: CorrelationLevel,
) -> CorrelationMatrix {
    let rows = match level {
        CorrelationLevel::Sample => sample_rows(scores.iter()),
        CorrelationLevel::Model => aggregate_leaderboard(scores)
            .into_iter()
            .map(|row| row.means)
            .collect(),
    };
    matrix_from_rows(&rows, metrics)
}

/// Sample-level matrices computed within each model separately.
pub fn correlation_by_model(
    scores: &[SampleScore],
    metrics: &[Metric],
) -> BTreeMap<String, CorrelationMatrix> {
    let mut groups: BTreeMap<&str, Vec<&SampleScore>> = BTreeMap::new();
    for s in scores {
        groups.entry(&s.model_name).or_default().push(s);
    }
    groups
        .into_iter()
        .map(|(model, group)| {
            let rows = sample_rows(group.into_iter());
            (model.to_string(), matrix_from_rows(&rows, metrics))
        })
        .collect()
}
