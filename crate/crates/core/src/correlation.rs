//! Pearson, Spearman and Kendall coefficients, and their application to
//! metric-vs-DA data at segment and system level.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::SegmentId;
use crate::judgments::{SegmentDa, SystemDa};
use crate::metrics::MetricScoreTable;
use crate::{Error, Finding, Result};

/// Paired observations `(x_i, y_i)`, at least three of them, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PairedSample {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidArgument(format!(
                "paired sample lengths differ: {} vs {}",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "{} paired points; at least 3 are required",
                xs.len()
            )));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("paired sample contains non-finite values".into()));
        }
        Ok(PairedSample { xs, ys })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn swapped(&self) -> PairedSample {
        PairedSample {
            xs: self.ys.clone(),
            ys: self.xs.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientKind {
    Pearson,
    Spearman,
    Kendall,
}

impl CoefficientKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CoefficientKind::Pearson => "pearson",
            CoefficientKind::Spearman => "spearman",
            CoefficientKind::Kendall => "kendall",
        }
    }
}

impl fmt::Display for CoefficientKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CoefficientKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pearson" => Ok(CoefficientKind::Pearson),
            "spearman" => Ok(CoefficientKind::Spearman),
            "kendall" => Ok(CoefficientKind::Kendall),
            other => Err(Error::InvalidArgument(format!("unknown coefficient `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Segment,
    System,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Segment => "segment",
            Level::System => "system",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "segment" => Ok(Level::Segment),
            "system" => Ok(Level::System),
            other => Err(Error::InvalidArgument(format!("unknown level `{other}`"))),
        }
    }
}

/// Which Kendall statistic to report.
///
/// `Untied` is `(C - D) / (C + D)`: pairs tied in either variable are left
/// out of both counts. On tie-free data it coincides with tau-a and tau-b.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KendallVariant {
    #[default]
    Untied,
    TauB,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub metric: String,
    pub kind: CoefficientKind,
    pub level: Level,
    pub scope: String,
    pub n: usize,
    pub value: f64,
    #[serde(default)]
    pub notes: Vec<String>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample Pearson correlation.
pub fn pearson(sample: &PairedSample) -> Result<f64> {
    let (xs, ys) = (sample.xs(), sample.ys());
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedCorrelation("x is constant".into()));
    }
    if syy == 0.0 {
        return Err(Error::UndefinedCorrelation("y is constant".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Fractional ranks (1-based); tied values share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| cmp_f64(values[a], values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

pub fn spearman(sample: &PairedSample) -> Result<f64> {
    let ranked = PairedSample {
        xs: average_ranks(sample.xs()),
        ys: average_ranks(sample.ys()),
    };
    pearson(&ranked)
}

/// Pair tallies underlying every Kendall statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KendallCounts {
    pub n: usize,
    pub concordant: u64,
    pub discordant: u64,
    /// Pairs tied in x (including those also tied in y).
    pub tied_x: u64,
    /// Pairs tied in y (including those also tied in x).
    pub tied_y: u64,
    pub tied_xy: u64,
}

impl KendallCounts {
    pub fn total_pairs(&self) -> u64 {
        let n = self.n as u64;
        n * (n - 1) / 2
    }
}

fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

fn tied_pairs_in_runs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Counts concordant/discordant/tied pairs in O(n log n) (Knight's
/// algorithm: sort by x then y, then count exchanges of a merge sort on y).
pub fn kendall_counts(sample: &PairedSample) -> KendallCounts {
    let n = sample.len();
    let mut pairs: Vec<(f64, f64)> = sample
        .xs()
        .iter()
        .copied()
        .zip(sample.ys().iter().copied())
        .collect();
    pairs.sort_by(|a, b| cmp_f64(a.0, b.0).then(cmp_f64(a.1, b.1)));

    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let tied_x = tied_pairs_in_runs(&xs);
    let tied_xy = tied_pairs_in_runs(&pairs);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);
    let tied_y = tied_pairs_in_runs(&ys);

    let total = (n as u64) * (n as u64 - 1) / 2;
    let untied = total - tied_x - tied_y + tied_xy;
    KendallCounts {
        n,
        concordant: untied - swaps,
        discordant: swaps,
        tied_x,
        tied_y,
        tied_xy,
    }
}

/// Stable merge sort of `v` returning the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(left, bl) + merge_count(right, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

pub fn kendall_tau(sample: &PairedSample) -> Result<f64> {
    kendall_tau_variant(sample, KendallVariant::Untied)
}

pub fn kendall_tau_variant(sample: &PairedSample, variant: KendallVariant) -> Result<f64> {
    let c = kendall_counts(sample);
    let untied = c.concordant + c.discordant;
    if untied == 0 {
        return Err(Error::UndefinedCorrelation("every pair is tied".into()));
    }
    let diff = c.concordant as f64 - c.discordant as f64;
    let value = match variant {
        KendallVariant::Untied => diff / untied as f64,
        KendallVariant::TauB => {
            let total = c.total_pairs();
            let denom = ((total - c.tied_x) as f64 * (total - c.tied_y) as f64).sqrt();
            diff / denom
        }
    };
    Ok(value.clamp(-1.0, 1.0))
}

pub fn coefficient(sample: &PairedSample, kind: CoefficientKind) -> Result<f64> {
    match kind {
        CoefficientKind::Pearson => pearson(sample),
        CoefficientKind::Spearman => spearman(sample),
        CoefficientKind::Kendall => kendall_tau(sample),
    }
}

/// Restricts which systems take part in a correlation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScopeFilter {
    pub systems: Option<BTreeSet<String>>,
    pub label: Option<String>,
}

impl ScopeFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn systems<I, S>(label: &str, systems: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScopeFilter {
            systems: Some(systems.into_iter().map(Into::into).collect()),
            label: Some(label.to_string()),
        }
    }

    fn admits(&self, system_id: &str) -> bool {
        self.systems.as_ref().is_none_or(|s| s.contains(system_id))
    }

    fn describe(&self) -> String {
        match (&self.label, &self.systems) {
            (Some(l), _) => l.clone(),
            (None, Some(s)) => s.iter().cloned().collect::<Vec<_>>().join("+"),
            (None, None) => "all".to_string(),
        }
    }
}

/// Metric and DA values aligned over the intersection of scored points.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPoints<K> {
    pub keys: Vec<K>,
    pub metric: Vec<f64>,
    pub da: Vec<f64>,
    pub da_only: usize,
    pub metric_only: usize,
}

pub fn align_segment_points(
    table: &MetricScoreTable,
    das: &[SegmentDa],
    metric_id: &str,
    filter: &ScopeFilter,
) -> AlignedPoints<(String, SegmentId)> {
    let metric_scores = table.segment_scores_for(metric_id);
    let mut out = AlignedPoints {
        keys: Vec::new(),
        metric: Vec::new(),
        da: Vec::new(),
        da_only: 0,
        metric_only: 0,
    };
    let mut da_keys = BTreeSet::new();
    let mut sorted: Vec<&SegmentDa> = das.iter().filter(|d| filter.admits(&d.system_id)).collect();
    sorted.sort_by(|a, b| (&a.system_id, a.segment_id).cmp(&(&b.system_id, b.segment_id)));
    for d in sorted {
        let key = (d.system_id.clone(), d.segment_id);
        match metric_scores.get(&key) {
            Some(&m) => {
                out.metric.push(m);
                out.da.push(d.da_score);
                out.keys.push(key.clone());
            }
            None => out.da_only += 1,
        }
        da_keys.insert(key);
    }
    out.metric_only = metric_scores
        .keys()
        .filter(|k| filter.admits(&k.0) && !da_keys.contains(*k))
        .count();
    out
}

pub fn align_system_points(
    table: &MetricScoreTable,
    das: &[SystemDa],
    metric_id: &str,
    filter: &ScopeFilter,
) -> AlignedPoints<String> {
    let metric_scores = table.system_scores_for(metric_id);
    let mut out = AlignedPoints {
        keys: Vec::new(),
        metric: Vec::new(),
        da: Vec::new(),
        da_only: 0,
        metric_only: 0,
    };
    let by_id: BTreeMap<&str, f64> = das
        .iter()
        .filter(|d| filter.admits(&d.system_id))
        .map(|d| (d.system_id.as_str(), d.da_score))
        .collect();
    for (&id, &da) in &by_id {
        match metric_scores.get(id) {
            Some(&m) => {
                out.keys.push(id.to_string());
                out.metric.push(m);
                out.da.push(da);
            }
            None => out.da_only += 1,
        }
    }
    out.metric_only = metric_scores
        .keys()
        .filter(|k| filter.admits(k) && !by_id.contains_key(k.as_str()))
        .count();
    out
}

fn coverage_note<K>(points: &AlignedPoints<K>) -> Option<String> {
    if points.da_only == 0 && points.metric_only == 0 {
        return None;
    }
    Some(format!(
        "coverage: {} matched, {} DA-only excluded, {} metric-only excluded",
        points.metric.len(),
        points.da_only,
        points.metric_only
    ))
}

pub fn segment_correlation(
    table: &MetricScoreTable,
    das: &[SegmentDa],
    metric_id: &str,
    kind: CoefficientKind,
    filter: &ScopeFilter,
) -> Result<CorrelationResult> {
    let points = align_segment_points(table, das, metric_id, filter);
    if points.metric.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "metric `{metric_id}` and DA overlap on {} segment points; at least 3 are required",
            points.metric.len()
        )));
    }
    let notes = coverage_note(&points).into_iter().collect();
    let sample = PairedSample::new(points.metric, points.da)?;
    let value = coefficient(&sample, kind)?;
    Ok(CorrelationResult {
        metric: metric_id.to_string(),
        kind,
        level: Level::Segment,
        scope: filter.describe(),
        n: sample.len(),
        value,
        notes,
    })
}

/// System-level correlation. Returns the result plus a design finding when
/// fewer than five systems take part.
pub fn system_correlation(
    table: &MetricScoreTable,
    das: &[SystemDa],
    metric_id: &str,
    kind: CoefficientKind,
    filter: &ScopeFilter,
) -> Result<(CorrelationResult, Vec<Finding>)> {
    let points = align_system_points(table, das, metric_id, filter);
    let n = points.metric.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "metric `{metric_id}` and DA overlap on {n} systems; at least 3 are required"
        )));
    }
    let mut findings = Vec::new();
    if n < 5 {
        findings.push(Finding::warning(
            "correlate",
            format!("`{metric_id}` system-level correlation over only {n} systems (5 recommended)"),
        ));
    }
    let notes = coverage_note(&points).into_iter().collect();
    let sample = PairedSample::new(points.metric, points.da)?;
    let value = coefficient(&sample, kind)?;
    Ok((
        CorrelationResult {
            metric: metric_id.to_string(),
            kind,
            level: Level::System,
            scope: filter.describe(),
            n,
            value,
            notes,
        },
        findings,
    ))
}

pub const CORRELATION_CSV_HEADER: &str = "metric,kind,level,scope,n,value";

pub fn correlation_csv(results: &[CorrelationResult]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CORRELATION_CSV_HEADER.split(','))
        .expect("in-memory write");
    for r in results {
        w.write_record([
            r.metric.as_str(),
            r.kind.as_str(),
            r.level.as_str(),
            r.scope.as_str(),
            &r.n.to_string(),
            &r.value.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(xs: &[f64], ys: &[f64]) -> PairedSample {
        PairedSample::new(xs.to_vec(), ys.to_vec()).unwrap()
    }

    #[test]
    fn pearson_examples() {
        assert_eq!(pearson(&s(&[1., 2., 5.], &[1., 2., 5.])).unwrap(), 1.0);
        assert_eq!(pearson(&s(&[1., 2., 5.], &[-1., -2., -5.])).unwrap(), -1.0);
        // sxy = 3, sxx = 2, syy = 42/9
        let expected = 3.0 / (2f64.sqrt() * (42.0f64 / 9.0).sqrt());
        let r = pearson(&s(&[1., 2., 3.], &[1., 2., 4.])).unwrap();
        assert!((r - expected).abs() < 1e-12);
        assert!((r - 0.981981).abs() < 1e-6);
    }

    #[test]
    fn pearson_constant_is_error() {
        let err = pearson(&s(&[1., 1., 1.], &[1., 2., 3.])).unwrap_err();
        assert!(matches!(err, Error::UndefinedCorrelation(ref m) if m.contains('x')));
        let err = pearson(&s(&[1., 2., 3.], &[4., 4., 4.])).unwrap_err();
        assert!(matches!(err, Error::UndefinedCorrelation(ref m) if m.contains('y')));
    }

    #[test]
    fn sample_needs_three_points() {
        assert!(matches!(
            PairedSample::new(vec![1., 2.], vec![1., 2.]),
            Err(Error::InsufficientData(_))
        ));
        assert!(PairedSample::new(vec![1., 2., 3.], vec![1., 2.]).is_err());
        assert!(PairedSample::new(vec![1., f64::NAN, 3.], vec![1., 2., 3.]).is_err());
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman(&s(&[1., 2., 3., 4.], &[1., 8., 27., 64.])).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&s(&[1., 2., 3.], &[1., 2., 4.])).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spearman_ties_match_hand_ranks() {
        // xs ranks [1, 2.5, 2.5, 4], ys ranks [1, 2, 3, 4]
        let rx = [1.0, 2.5, 2.5, 4.0];
        let ry = [1.0, 2.0, 3.0, 4.0];
        let expected = pearson(&s(&rx, &ry)).unwrap();
        let got = spearman(&s(&[1., 2., 2., 3.], &[1., 2., 3., 4.])).unwrap();
        assert!((got - expected).abs() < 1e-15);
        // sxy = 4.5, sxx = 4.5, syy = 5
        assert!((got - 4.5 / (4.5f64 * 5.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn kendall_examples() {
        assert_eq!(kendall_tau(&s(&[1., 2., 3.], &[4., 5., 6.])).unwrap(), 1.0);
        assert_eq!(kendall_tau(&s(&[1., 2., 3.], &[6., 5., 4.])).unwrap(), -1.0);
        let t = kendall_tau(&s(&[1., 2., 3., 4.], &[1., 3., 2., 4.])).unwrap();
        assert!((t - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn kendall_ties_excluded_from_both_tallies() {
        // pairs: (0,1) tie in x; (0,2) C; (1,2) C; (0,3) C; (1,3) C; (2,3) D
        let sample = s(&[1., 1., 2., 3.], &[1., 2., 4., 3.]);
        let c = kendall_counts(&sample);
        assert_eq!((c.concordant, c.discordant, c.tied_x, c.tied_y), (4, 1, 1, 0));
        assert!((kendall_tau(&sample).unwrap() - 3.0 / 5.0).abs() < 1e-15);
        let tb = kendall_tau_variant(&sample, KendallVariant::TauB).unwrap();
        assert!((tb - 3.0 / (5.0f64 * 6.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn kendall_all_tied_is_error() {
        assert!(matches!(
            kendall_tau(&s(&[1., 1., 1.], &[1., 2., 3.])),
            Err(Error::UndefinedCorrelation(_))
        ));
    }

    fn brute_counts(xs: &[f64], ys: &[f64]) -> (u64, u64) {
        let mut c = 0;
        let mut d = 0;
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                let p = (xs[i] - xs[j]) * (ys[i] - ys[j]);
                if p > 0.0 {
                    c += 1;
                } else if p < 0.0 {
                    d += 1;
                }
            }
        }
        (c, d)
    }

    fn sample_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec((0i32..8).prop_map(f64::from), n),
                prop::collection::vec(-50.0f64..50.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn kendall_counts_match_enumeration((xs, ys) in sample_strategy()) {
            let c = kendall_counts(&s(&xs, &ys));
            prop_assert_eq!((c.concordant, c.discordant), brute_counts(&xs, &ys));
        }

        #[test]
        fn coefficients_symmetric((xs, ys) in sample_strategy()) {
            let a = s(&xs, &ys);
            for kind in [CoefficientKind::Pearson, CoefficientKind::Spearman, CoefficientKind::Kendall] {
                match (coefficient(&a, kind), coefficient(&a.swapped(), kind)) {
                    (Ok(u), Ok(v)) => prop_assert!((u - v).abs() < 1e-12),
                    (Err(_), Err(_)) => {}
                    other => prop_assert!(false, "asymmetric outcome {:?}", other),
                }
            }
        }

        #[test]
        fn pearson_affine_invariance(
            xs in prop::collection::vec(-10.0f64..10.0, 5..30),
            scale in 0.1f64..10.0,
            shift in -100.0f64..100.0,
        ) {
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * x + i as f64).collect();
            let a = s(&xs, &ys);
            if let Ok(r) = pearson(&a) {
                let moved: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
                let r2 = pearson(&s(&moved, &ys)).unwrap();
                prop_assert!((r - r2).abs() < 1e-10);
                let flipped: Vec<f64> = xs.iter().map(|x| -scale * x).collect();
                let r3 = pearson(&s(&flipped, &ys)).unwrap();
                prop_assert!((r + r3).abs() < 1e-10);
                prop_assert!(r.abs() <= 1.0);
            }
        }

        #[test]
        fn rank_coefficients_monotone_invariant((xs, ys) in sample_strategy()) {
            let a = s(&xs, &ys);
            let warped: Vec<f64> = xs.iter().map(|x| x.powi(3) + 2.0 * x).collect();
            let b = s(&warped, &ys);
            for kind in [CoefficientKind::Spearman, CoefficientKind::Kendall] {
                if let (Ok(u), Ok(v)) = (coefficient(&a, kind), coefficient(&b, kind)) {
                    prop_assert!((u - v).abs() < 1e-12);
                }
            }
        }
    }
}
