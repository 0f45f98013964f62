//! Hypothesis tests on correlations.
//!
//! The Williams test compares two dependent correlations that share a
//! variable: here two metrics (X1, X2) each correlated with DA (X3). A
//! significance matrix runs it over all ordered metric pairs; the winner set
//! is every metric no competitor significantly beats.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::correlation::{pearson, PairedSample};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sidedness {
    #[default]
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    pub sidedness: Sidedness,
    /// Set when the input sat on a boundary (|r| = 1) and p was pinned.
    #[serde(default)]
    pub degenerate: bool,
}

/// Upper-tail probability `P(T > t)` of Student's t with `df` degrees of
/// freedom, via the regularized incomplete beta function.
pub fn student_t_sf(t: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) || df.is_nan() {
        return Err(Error::InvalidArgument(format!("degrees of freedom must be positive, got {df}")));
    }
    if t.is_nan() {
        return Err(Error::InvalidArgument("t statistic is NaN".into()));
    }
    if t == f64::INFINITY {
        return Ok(0.0);
    }
    if t == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    // P(|T| > |t|) = I_x(df/2, 1/2) with x = df / (df + t^2)
    let x = df / (df + t * t);
    let tail = 0.5 * beta_reg(0.5 * df, 0.5, x);
    Ok(if t > 0.0 { tail } else { 1.0 - tail })
}

/// Tests H0: r = 0 (two-sided), t = r * sqrt((n - 2) / (1 - r^2)).
pub fn pearson_zero_test(r: f64, n: usize) -> Result<TestOutcome> {
    if n < 4 {
        return Err(Error::InsufficientData(format!("r = 0 test needs n >= 4, got {n}")));
    }
    if !(-1.0..=1.0).contains(&r) {
        return Err(Error::InvalidArgument(format!("correlation {r} outside [-1, 1]")));
    }
    let df = (n - 2) as f64;
    if r.abs() == 1.0 {
        return Ok(TestOutcome {
            statistic: r.signum() * f64::INFINITY,
            df,
            p_value: 0.0,
            sidedness: Sidedness::Two,
            degenerate: true,
        });
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let p = (2.0 * student_t_sf(t.abs(), df)?).min(1.0);
    Ok(TestOutcome {
        statistic: t,
        df,
        p_value: p,
        sidedness: Sidedness::Two,
        degenerate: false,
    })
}

/// Williams test of H0: corr(X1, X3) = corr(X2, X3) given corr(X1, X2).
///
/// `r13`, `r23` are the two metrics' correlations with DA and `r12` the
/// correlation between the metrics. One-sided p tests r13 > r23.
pub fn williams_test(r13: f64, r23: f64, r12: f64, n: usize, sidedness: Sidedness) -> Result<TestOutcome> {
    if n < 4 {
        return Err(Error::InsufficientData(format!("Williams test needs n >= 4, got {n}")));
    }
    for (name, r) in [("r13", r13), ("r23", r23), ("r12", r12)] {
        if r.is_nan() || r.abs() > 1.0 {
            return Err(Error::InvalidArgument(format!("{name} = {r} outside [-1, 1]")));
        }
        if r.abs() == 1.0 {
            return Err(Error::Degenerate(format!("{name} = {r}; Williams test undefined at |r| = 1")));
        }
    }
    let nf = n as f64;
    let k = 1.0 - r12 * r12 - (r13 * r13 + r23 * r23) + 2.0 * r12 * (r13 * r23);
    if k <= 0.0 {
        return Err(Error::Degenerate(format!(
            "correlation matrix not positive definite (K = {k})"
        )));
    }
    let rbar_sq = (r13 + r23) * (r13 + r23) / 4.0;
    let denom = (2.0 * k * (nf - 1.0) / (nf - 3.0) + rbar_sq * (1.0 - r12).powi(3)).sqrt();
    let t = (r13 - r23) * ((nf - 1.0) * (1.0 + r12)).sqrt() / denom;
    let df = nf - 3.0;
    let p_value = match sidedness {
        Sidedness::One => student_t_sf(t, df)?,
        Sidedness::Two => (2.0 * student_t_sf(t.abs(), df)?).min(1.0),
    };
    Ok(TestOutcome {
        statistic: t,
        df,
        p_value,
        sidedness,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixOptions {
    pub alpha: f64,
    pub sidedness: Sidedness,
    /// Divide alpha by the number of ordered comparisons.
    pub bonferroni: bool,
}

impl Default for MatrixOptions {
    fn default() -> Self {
        MatrixOptions {
            alpha: 0.05,
            sidedness: Sidedness::One,
            bonferroni: false,
        }
    }
}

/// Pairwise Williams p-values. `p[i][j]` tests whether metric `i` beats
/// metric `j`; the diagonal is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceMatrix {
    pub metric_ids: Vec<String>,
    /// Each metric's Pearson correlation with DA.
    pub correlations: Vec<f64>,
    pub p: Vec<Vec<Option<f64>>>,
    pub n: usize,
    pub alpha: f64,
    pub sidedness: Sidedness,
    pub bonferroni: bool,
}

impl SignificanceMatrix {
    /// The per-cell threshold after any multiple-comparison correction.
    pub fn threshold(&self) -> f64 {
        let m = self.metric_ids.len();
        if self.bonferroni && m > 1 {
            self.alpha / (m * (m - 1)) as f64
        } else {
            self.alpha
        }
    }

    /// Indices sorted by descending correlation with DA (stable on ties).
    pub fn order_by_correlation(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.metric_ids.len()).collect();
        idx.sort_by(|&a, &b| self.correlations[b].total_cmp(&self.correlations[a]));
        idx
    }

    /// Square CSV: header `metric,<ids...>`, empty diagonal.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["metric".to_string()];
        header.extend(self.metric_ids.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (i, id) in self.metric_ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            row.extend(self.p[i].iter().map(|c| c.map(|p| p.to_string()).unwrap_or_default()));
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
    }

    /// Text grid with rows and columns in descending-r order. `*` marks a
    /// significant win of the row metric over the column metric.
    pub fn render_grid(&self) -> String {
        let order = self.order_by_correlation();
        let width = self
            .metric_ids
            .iter()
            .map(|s| s.chars().count())
            .max()
            .unwrap_or(0)
            .max(6);
        let threshold = self.threshold();
        let mut out = String::new();
        let _ = write!(out, "{:width$} {:>7}", "", "r");
        for &j in &order {
            let _ = write!(out, " {:>3}", j + 1);
        }
        out.push('\n');
        for &i in &order {
            let _ = write!(out, "{:width$} {:>7.3}", self.metric_ids[i], self.correlations[i]);
            for &j in &order {
                let cell = match self.p[i][j] {
                    None => "-",
                    Some(p) if p < threshold => "*",
                    Some(_) => ".",
                };
                let _ = write!(out, " {cell:>3}");
            }
            let _ = writeln!(out, "  [{}]", i + 1);
        }
        out
    }
}

/// Runs the Williams test over every ordered pair of metrics.
///
/// Score vectors must be complete and aligned with `da`; mixed coverage is
/// resolved by the caller.
pub fn significance_matrix(
    metrics: &[(String, Vec<f64>)],
    da: &[f64],
    options: &MatrixOptions,
) -> Result<SignificanceMatrix> {
    if metrics.is_empty() {
        return Err(Error::InvalidArgument("significance matrix needs at least one metric".into()));
    }
    if !(options.alpha > 0.0 && options.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", options.alpha)));
    }
    let n = da.len();
    for (id, v) in metrics {
        if v.len() != n {
            return Err(Error::InvalidArgument(format!(
                "metric `{id}` has {} scores, DA has {n}",
                v.len()
            )));
        }
    }
    if n < 4 {
        return Err(Error::InsufficientData(format!("significance matrix needs n >= 4, got {n}")));
    }
    let named = |id: &str, e: Error| match e {
        Error::UndefinedCorrelation(m) => Error::UndefinedCorrelation(format!("metric `{id}`: {m}")),
        other => other,
    };
    let correlations: Vec<f64> = metrics
        .iter()
        .map(|(id, v)| {
            PairedSample::new(v.clone(), da.to_vec())
                .and_then(|s| pearson(&s))
                .map_err(|e| named(id, e))
        })
        .collect::<Result<_>>()?;

    let m = metrics.len();
    let mut p = vec![vec![None; m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let (r13, r23) = (correlations[i], correlations[j]);
            let (pij, pji) = if r13 == r23 {
                // zero numerator: t = 0 regardless of r12
                let p0 = match options.sidedness {
                    Sidedness::One => 0.5,
                    Sidedness::Two => 1.0,
                };
                (p0, p0)
            } else {
                let r12 = pearson(&PairedSample::new(metrics[i].1.clone(), metrics[j].1.clone())?)?;
                let a = williams_test(r13, r23, r12, n, options.sidedness)?;
                let b = williams_test(r23, r13, r12, n, options.sidedness)?;
                (a.p_value, b.p_value)
            };
            p[i][j] = Some(pij);
            p[j][i] = Some(pji);
        }
    }
    Ok(SignificanceMatrix {
        metric_ids: metrics.iter().map(|(id, _)| id.clone()).collect(),
        correlations,
        p,
        n,
        alpha: options.alpha,
        sidedness: options.sidedness,
        bonferroni: options.bonferroni,
    })
}

/// Metrics not significantly outperformed by any other metric, in matrix
/// order.
pub fn winner_set(matrix: &SignificanceMatrix) -> Vec<String> {
    let threshold = matrix.threshold();
    let m = matrix.metric_ids.len();
    (0..m)
        .filter(|&j| (0..m).all(|i| matrix.p[i][j].is_none_or(|p| p >= threshold)))
        .map(|j| matrix.metric_ids[j].clone())
        .collect()
}
