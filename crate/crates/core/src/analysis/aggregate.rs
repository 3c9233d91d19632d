use std::collections::{BTreeMap, BTreeSet};

use super::stats::{quartiles, FiveNumber};
use super::{Metric, SampleScore};

/// Unweighted mean of the values, summed in sorted order so the result does
/// not depend on sample order.
pub(crate) fn stable_mean(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

fn metric_means<'a>(scores: impl Iterator<Item = &'a SampleScore>) -> [Option<f64>; 8] {
    let mut columns: [Vec<f64>; 8] = Default::default();
    for s in scores {
        for metric in Metric::ALL {
            if let Some(v) = s.get(metric) {
                columns[metric.index()].push(v);
            }
        }
    }
    columns.map(|mut c| stable_mean(&mut c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderboardRow {
    pub model_name: String,
    pub means: [Option<f64>; 8],
    pub n: usize,
}

impl LeaderboardRow {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        self.means[metric.index()]
    }
}

fn group_by_model(scores: &[SampleScore]) -> BTreeMap<&str, Vec<&SampleScore>> {
    let mut groups: BTreeMap<&str, Vec<&SampleScore>> = BTreeMap::new();
    for s in scores {
        groups.entry(&s.model_name).or_default().push(s);
    }
    groups
}

/// One row per model, ranked by BLEU-4 (descending, ties by name).
pub fn aggregate_leaderboard(scores: &[SampleScore]) -> Vec<LeaderboardRow> {
    let mut rows: Vec<LeaderboardRow> = group_by_model(scores)
        .into_iter()
        .map(|(model, group)| LeaderboardRow {
            model_name: model.to_string(),
            means: metric_means(group.iter().copied()),
            n: group.len(),
        })
        .collect();
    sort_leaderboard(&mut rows, Metric::Bleu4);
    rows
}

/// Orders rows best-first on `metric`; rows missing the metric go last.
pub fn sort_leaderboard(rows: &mut [LeaderboardRow], metric: Metric) {
    rows.sort_by(|a, b| {
        let key = |r: &LeaderboardRow| r.get(metric);
        let order = match (key(a), key(b)) {
            (Some(x), Some(y)) if metric.higher_is_better() => y.total_cmp(&x),
            (Some(x), Some(y)) => x.total_cmp(&y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        };
        order.then_with(|| a.model_name.cmp(&b.model_name))
    });
}

/// Model × tracer means. Cells without samples are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct TracerMatrix {
    pub models: Vec<String>,
    pub tracers: Vec<String>,
    cells: BTreeMap<(String, String), [Option<f64>; 8]>,
}

impl TracerMatrix {
    pub fn cell(&self, model: &str, tracer: &str, metric: Metric) -> Option<f64> {
        self.cells
            .get(&(model.to_string(), tracer.to_string()))
            .and_then(|m| m[metric.index()])
    }

    pub fn has_cell(&self, model: &str, tracer: &str) -> bool {
        self.cells
            .contains_key(&(model.to_string(), tracer.to_string()))
    }
}

pub fn stratify_by_tracer(scores: &[SampleScore]) -> TracerMatrix {
    let mut groups: BTreeMap<(&str, &str), Vec<&SampleScore>> = BTreeMap::new();
    for s in scores {
        groups
            .entry((&s.model_name, &s.tracer))
            .or_default()
            .push(s);
    }
    let models: BTreeSet<&str> = groups.keys().map(|(m, _)| *m).collect();
    let tracers: BTreeSet<&str> = groups.keys().map(|(_, t)| *t).collect();
    let cells = groups
        .iter()
        .map(|((m, t), group)| {
            (
                (m.to_string(), t.to_string()),
                metric_means(group.iter().copied()),
            )
        })
        .collect();
    TracerMatrix {
        models: models.into_iter().map(str::to_string).collect(),
        tracers: tracers.into_iter().map(str::to_string).collect(),
        cells,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionRow {
    pub model_name: String,
    pub metric: Metric,
    pub n: usize,
    pub stats: FiveNumber,
}

/// Five-number summaries per (model, metric) with at least one value.
pub fn distribution_stats(scores: &[SampleScore]) -> Vec<DistributionRow> {
    let mut rows = Vec::new();
    for (model, group) in group_by_model(scores) {
        for metric in Metric::ALL {
            let mut values: Vec<f64> = group.iter().filter_map(|s| s.get(metric)).collect();
            if let Some(stats) = quartiles(&mut values) {
                rows.push(DistributionRow {
                    model_name: model.to_string(),
                    metric,
                    n: values.len(),
                    stats,
                });
            }
        }
    }
    rows
}
