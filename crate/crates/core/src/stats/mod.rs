//! Cross-run medians and main-effects ANOVA.

pub mod special;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::metrics::{MetricsRecord, MetricsSeries};

pub use special::f_sf;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("no runs to aggregate")]
    Empty,
    #[error("run {run} does not share the common time grid ({got} rows vs {expected})")]
    GridMismatch { run: usize, expected: usize, got: usize },
    #[error("row has {got} factor levels, table declares {expected}")]
    Arity { expected: usize, got: usize },
    #[error("factor `{factor}` has {levels} level(s); at least 2 are required")]
    TooFewLevels { factor: String, levels: usize },
    #[error("factor `{factor}` is confounded with earlier factors (rank {rank} of {needed})")]
    Singular { factor: String, rank: usize, needed: usize },
    #[error("no residual degrees of freedom ({rows} rows, model rank {rank})")]
    NoResidualDof { rows: usize, rank: usize },
    #[error("response must be finite")]
    NonFinite,
}

/// Median of a slice; the mean of the two central values for even length.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Elementwise median of every metric across runs on a shared time grid.
pub fn median_series(runs: &[MetricsSeries]) -> Result<MetricsSeries, StatsError> {
    let first = runs.first().ok_or(StatsError::Empty)?;
    let len = first.len();
    for (run, s) in runs.iter().enumerate() {
        let same_grid = s.len() == len
            && s.records.iter().zip(&first.records).all(|(a, b)| a.t == b.t);
        if !same_grid {
            return Err(StatsError::GridMismatch { run, expected: len, got: s.len() });
        }
    }
    let mut column = Vec::with_capacity(runs.len());
    let mut med = |k: usize, get: fn(&MetricsRecord) -> f64| {
        column.clear();
        column.extend(runs.iter().map(|s| get(&s.records[k])));
        median(&column).unwrap_or(0.0)
    };
    let records = (0..len)
        .map(|k| MetricsRecord {
            t: first.records[k].t,
            mean_cue: med(k, |r| r.mean_cue),
            ratio_within_rc: med(k, |r| r.ratio_within_rc),
            coherency_m: med(k, |r| r.coherency_m),
        })
        .collect();
    Ok(MetricsSeries { records })
}

/// Observations with one categorical level per declared factor.
#[derive(Debug, Clone, Default)]
pub struct ObservationTable {
    factors: Vec<String>,
    responses: Vec<f64>,
    levels: Vec<Vec<String>>,
}

impl ObservationTable {
    pub fn new<S: Into<String>>(factors: impl IntoIterator<Item = S>) -> Self {
        Self {
            factors: factors.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    pub fn factors(&self) -> &[String] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn push<L: ToString>(&mut self, response: f64, levels: &[L]) -> Result<(), StatsError> {
        if levels.len() != self.factors.len() {
            return Err(StatsError::Arity { expected: self.factors.len(), got: levels.len() });
        }
        if !response.is_finite() {
            return Err(StatsError::NonFinite);
        }
        self.responses.push(response);
        self.levels.push(levels.iter().map(ToString::to_string).collect());
        Ok(())
    }

    /// Number of distinct levels of factor `k`.
    pub fn level_count(&self, k: usize) -> usize {
        let mut seen: Vec<&str> = self.levels.iter().map(|l| l[k].as_str()).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorEffect {
    pub name: String,
    pub sum_sq: f64,
    pub df: usize,
    pub f: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnovaResult {
    pub effects: Vec<FactorEffect>,
    pub residual_sum_sq: f64,
    pub df_residual: usize,
    /// Residual variance is numerically zero; every F is reported as 0, p as 1.
    pub degenerate_variance: bool,
}

impl AnovaResult {
    pub fn effect(&self, name: &str) -> Option<&FactorEffect> {
        self.effects.iter().find(|e| e.name == name)
    }
}

/// Orthonormal basis grown one column at a time (modified Gram-Schmidt with
/// a second pass), projecting the response out as it goes.
struct SequentialFit {
    basis: Vec<Vec<f64>>,
    residual: Vec<f64>,
}

impl SequentialFit {
    fn new(y: &[f64]) -> Self {
        Self { basis: Vec::new(), residual: y.to_vec() }
    }

    /// Adds `col` if it is independent of the current basis; returns the
    /// response sum of squares it explains.
    fn add(&mut self, mut col: Vec<f64>) -> Option<f64> {
        let norm0 = dot(&col, &col).sqrt();
        if norm0 == 0.0 {
            return None;
        }
        for _ in 0..2 {
            for q in &self.basis {
                let c = dot(q, &col);
                col.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
            }
        }
        let norm = dot(&col, &col).sqrt();
        if norm <= 1e-9 * norm0 {
            return None;
        }
        col.iter_mut().for_each(|x| *x /= norm);
        let c = dot(&col, &self.residual);
        self.residual.iter_mut().zip(&col).for_each(|(r, qi)| *r -= c * qi);
        self.basis.push(col);
        Some(c * c)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Main-effects ANOVA with sequential (Type I) sums of squares, factors
/// entered in declaration order after the intercept.
pub fn anova_main_effects(table: &ObservationTable) -> Result<AnovaResult, StatsError> {
    let n = table.len();
    let y = &table.responses;
    let mut fit = SequentialFit::new(y);
    fit.add(vec![1.0; n]);

    let mut raw = Vec::with_capacity(table.factors.len());
    for (k, name) in table.factors.iter().enumerate() {
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for l in &table.levels {
            index.entry(l[k].as_str()).or_insert(0);
        }
        let levels = index.len();
        if levels < 2 {
            return Err(StatsError::TooFewLevels { factor: name.clone(), levels });
        }
        let mut ss = 0.0;
        let mut rank = 0;
        // First level is the reference; the rest get indicator columns.
        for level in index.keys().skip(1) {
            let col = table
                .levels
                .iter()
                .map(|l| if l[k] == *level { 1.0 } else { 0.0 })
                .collect();
            if let Some(explained) = fit.add(col) {
                ss += explained;
                rank += 1;
            }
        }
        if rank < levels - 1 {
            return Err(StatsError::Singular { factor: name.clone(), rank, needed: levels - 1 });
        }
        raw.push((name.clone(), ss, rank));
    }

    let model_rank = fit.basis.len();
    if n <= model_rank {
        return Err(StatsError::NoResidualDof { rows: n, rank: model_rank });
    }
    let df_residual = n - model_rank;
    let residual_sum_sq = dot(&fit.residual, &fit.residual);
    let mean = y.iter().sum::<f64>() / n as f64;
    let total_ss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let scale = total_ss.max(y.iter().map(|v| v * v).sum::<f64>() / n as f64);
    let degenerate_variance = residual_sum_sq <= 1e-20 * scale.max(f64::MIN_POSITIVE);
    let ms_residual = residual_sum_sq / df_residual as f64;

    let effects = raw
        .into_iter()
        .map(|(name, sum_sq, df)| {
            let (f, p) = if degenerate_variance {
                (0.0, 1.0)
            } else {
                let f = (sum_sq / df as f64) / ms_residual;
                (f, f_sf(f, df as f64, df_residual as f64))
            };
            FactorEffect { name, sum_sq, df, f, p }
        })
        .collect();

    Ok(AnovaResult { effects, residual_sum_sq, df_residual, degenerate_variance })
}
