//! Diagnostics on top of correlations: DA tertile bins, metric-score
//! distributions per bin, failure-case mining, correlation per system group
//! and the Kendall agreement report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::corpus::{EvaluationCorpus, SegmentId, SystemMeta};
use crate::correlation::{
    align_system_points, coefficient, kendall_counts, kendall_tau, system_correlation,
    CoefficientKind, CorrelationResult, PairedSample, ScopeFilter,
};
use crate::judgments::{SegmentDa, SystemDa};
use crate::metrics::MetricScoreTable;
use crate::{Error, Finding, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinLabel {
    Bad,
    Average,
    Good,
}

impl BinLabel {
    pub const ALL: [BinLabel; 3] = [BinLabel::Bad, BinLabel::Average, BinLabel::Good];

    pub fn as_str(self) -> &'static str {
        match self {
            BinLabel::Bad => "bad",
            BinLabel::Average => "average",
            BinLabel::Good => "good",
        }
    }
}

impl fmt::Display for BinLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type PointKey = (String, SegmentId);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedPoint {
    pub system_id: String,
    pub segment_id: SegmentId,
    pub da: f64,
}

/// Equal-count partition of DA-scored segments into bad / average / good.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinAssignment {
    /// Largest DA in the bad bin and largest DA in the average bin. Bins are
    /// the intervals `[min, b0]`, `(b0, b1]`, `(b1, max]` when the cuts do
    /// not fall inside a run of tied scores.
    pub boundaries: [f64; 2],
    pub min: f64,
    pub max: f64,
    /// Points of each bin in ascending DA order.
    pub bins: [Vec<BinnedPoint>; 3],
}

impl BinAssignment {
    pub fn bin(&self, label: BinLabel) -> &[BinnedPoint] {
        &self.bins[label as usize]
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.bins[0].len(), self.bins[1].len(), self.bins[2].len()]
    }

    pub fn membership(&self) -> BTreeMap<PointKey, BinLabel> {
        let mut m = BTreeMap::new();
        for label in BinLabel::ALL {
            for p in self.bin(label) {
                m.insert((p.system_id.clone(), p.segment_id), label);
            }
        }
        m
    }
}

/// Sorts points by DA (ties broken by system id, then segment id) and cuts
/// them into three contiguous groups. The bad bin takes `ceil(N/3)` points,
/// the good bin `round(N/3)`, and the average bin the remainder.
pub fn tertile_bins(das: &[SegmentDa]) -> Result<BinAssignment> {
    if das.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "tertile binning needs at least 3 points, got {}",
            das.len()
        )));
    }
    let mut points: Vec<BinnedPoint> = das
        .iter()
        .map(|d| BinnedPoint {
            system_id: d.system_id.clone(),
            segment_id: d.segment_id,
            da: d.da_score,
        })
        .collect();
    points.sort_by(|a, b| {
        a.da.total_cmp(&b.da)
            .then_with(|| a.system_id.cmp(&b.system_id))
            .then_with(|| a.segment_id.cmp(&b.segment_id))
    });
    if let Some(w) = points
        .windows(2)
        .find(|w| w[0].system_id == w[1].system_id && w[0].segment_id == w[1].segment_id)
    {
        return Err(Error::InvalidArgument(format!(
            "duplicate DA point {}:{}",
            w[0].system_id, w[0].segment_id
        )));
    }
    let n = points.len();
    let bad = n.div_ceil(3);
    let good = (n + 1) / 3;
    let avg = n - bad - good;
    let min = points[0].da;
    let max = points[n - 1].da;
    let good_bin = points.split_off(bad + avg);
    let avg_bin = points.split_off(bad);
    let boundaries = [points[bad - 1].da, avg_bin[avg - 1].da];
    Ok(BinAssignment {
        boundaries,
        min,
        max,
        bins: [points, avg_bin, good_bin],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub label: BinLabel,
    pub count: usize,
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
    /// Metric scores in the bin's point order, for violin plots.
    pub values: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data (`h = (n - 1) q`).
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize(label: BinLabel, values: Vec<f64>) -> BinSummary {
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    BinSummary {
        label,
        count: values.len(),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        values,
    }
}

/// Distribution of a metric's segment scores within each DA bin.
pub fn conditional_distribution(
    table: &MetricScoreTable,
    metric_id: &str,
    bins: &BinAssignment,
) -> Result<[BinSummary; 3]> {
    let scores = table.segment_scores_for(metric_id);
    let mut missing = Vec::new();
    let mut per_bin: [Vec<f64>; 3] = Default::default();
    for label in BinLabel::ALL {
        for p in bins.bin(label) {
            match scores.get(&(p.system_id.clone(), p.segment_id)) {
                Some(&v) => per_bin[label as usize].push(v),
                None => missing.push(format!("{}:{}", p.system_id, p.segment_id)),
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::InsufficientData(format!(
            "metric `{metric_id}` lacks scores for {} binned point(s): {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    let [bad, avg, good] = per_bin;
    Ok([
        summarize(BinLabel::Bad, bad),
        summarize(BinLabel::Average, avg),
        summarize(BinLabel::Good, good),
    ])
}

pub const BIN_CSV_HEADER: &str = "system_id,segment_id,da,metric_score,bin";

pub fn bins_csv(table: &MetricScoreTable, metric_id: &str, bins: &BinAssignment) -> String {
    let scores = table.segment_scores_for(metric_id);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BIN_CSV_HEADER.split(',')).expect("in-memory write");
    for label in BinLabel::ALL {
        for p in bins.bin(label) {
            let m = scores
                .get(&(p.system_id.clone(), p.segment_id))
                .map(|v| v.to_string())
                .unwrap_or_default();
            w.write_record([
                p.system_id.as_str(),
                &p.segment_id.to_string(),
                &p.da.to_string(),
                &m,
                label.as_str(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureDirection {
    /// Good output the metric scored low.
    GoodUnderscored,
    /// Bad output the metric scored high.
    BadOverscored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureCase {
    pub system_id: String,
    pub segment_id: SegmentId,
    pub source: String,
    pub references: Vec<String>,
    pub hypothesis: String,
    pub da_score: f64,
    pub metric_score: f64,
    pub direction: FailureDirection,
    pub rank: usize,
}

/// The `k` lowest-scored good-bin points and the `k` highest-scored bad-bin
/// points, joined with their texts.
pub fn failure_cases(
    corpus: &EvaluationCorpus,
    table: &MetricScoreTable,
    metric_id: &str,
    bins: &BinAssignment,
    k: usize,
) -> Result<(Vec<FailureCase>, Vec<Finding>)> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let scores = table.segment_scores_for(metric_id);
    let mut findings = Vec::new();
    let mut out = Vec::new();
    for (label, direction) in [
        (BinLabel::Good, FailureDirection::GoodUnderscored),
        (BinLabel::Bad, FailureDirection::BadOverscored),
    ] {
        let mut scored: Vec<(&BinnedPoint, f64)> = Vec::new();
        for p in bins.bin(label) {
            let m = scores
                .get(&(p.system_id.clone(), p.segment_id))
                .copied()
                .ok_or_else(|| {
                    Error::InsufficientData(format!(
                        "metric `{metric_id}` lacks a score for {}:{}",
                        p.system_id, p.segment_id
                    ))
                })?;
            scored.push((p, m));
        }
        let tie = |a: &BinnedPoint, b: &BinnedPoint| {
            (&a.system_id, a.segment_id).cmp(&(&b.system_id, b.segment_id))
        };
        match direction {
            FailureDirection::GoodUnderscored => {
                scored.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| tie(a.0, b.0)))
            }
            FailureDirection::BadOverscored => {
                scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| tie(a.0, b.0)))
            }
        }
        if k > scored.len() {
            findings.push(Finding::warning(
                "failures",
                format!(
                    "k = {k} exceeds the {} bin size {}; returning the whole bin",
                    label,
                    scored.len()
                ),
            ));
        }
        for (rank, (p, m)) in scored.into_iter().take(k).enumerate() {
            let segment = corpus.test_set().segment(p.segment_id).ok_or_else(|| {
                Error::InvalidArgument(format!("segment {} not in test set", p.segment_id))
            })?;
            let hypothesis = corpus
                .hypothesis(&p.system_id, p.segment_id)
                .ok_or_else(|| Error::UnknownSystem(p.system_id.clone()))?;
            out.push(FailureCase {
                system_id: p.system_id.clone(),
                segment_id: p.segment_id,
                source: segment.source.clone(),
                references: segment.references.clone(),
                hypothesis: hypothesis.to_string(),
                da_score: p.da,
                metric_score: m,
                direction,
                rank: rank + 1,
            });
        }
    }
    Ok((out, findings))
}

/// Side-by-side text rendering, one block per case.
pub fn render_failure_cases(cases: &[FailureCase], metric_id: &str) -> String {
    let mut out = String::new();
    let mut last = None;
    for c in cases {
        if last != Some(c.direction) {
            let title = match c.direction {
                FailureDirection::GoodUnderscored => "good bin, lowest metric scores",
                FailureDirection::BadOverscored => "bad bin, highest metric scores",
            };
            let _ = writeln!(out, "== {title} ==");
            last = Some(c.direction);
        }
        let _ = writeln!(
            out,
            "#{} {}:{}  DA {:.3}  {metric_id} {:.3}",
            c.rank, c.system_id, c.segment_id, c.da_score, c.metric_score
        );
        let _ = writeln!(out, "  source:    {}", c.source);
        for r in &c.references {
            let _ = writeln!(out, "  reference: {r}");
        }
        let _ = writeln!(out, "  output:    {}", c.hypothesis);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    SystemType,
    Track,
}

impl GroupBy {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupBy::SystemType => "system_type",
            GroupBy::Track => "track",
        }
    }

    fn key(self, meta: &SystemMeta) -> &str {
        match self {
            GroupBy::SystemType => &meta.system_type,
            GroupBy::Track => &meta.track,
        }
    }
}

impl std::str::FromStr for GroupBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "system_type" | "type" => Ok(GroupBy::SystemType),
            "track" => Ok(GroupBy::Track),
            other => Err(Error::InvalidArgument(format!("unknown grouping `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCorrelation {
    pub group: String,
    pub group_by: GroupBy,
    pub kind: CoefficientKind,
    pub n_systems: usize,
    pub result: Option<CorrelationResult>,
    pub flag: Option<String>,
}

/// System-level correlation inside each metadata group. Groups with fewer
/// than three scored systems are flagged `insufficient`; groups whose scores
/// are constant are flagged `undefined`.
pub fn grouped_correlation(
    system_das: &[SystemDa],
    table: &MetricScoreTable,
    metric_id: &str,
    meta: &BTreeMap<String, SystemMeta>,
    group_by: GroupBy,
    kind: CoefficientKind,
) -> Result<Vec<GroupCorrelation>> {
    if meta.is_empty() {
        return Err(Error::InvalidArgument("no system metadata attached".into()));
    }
    let mut groups: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for m in meta.values() {
        groups
            .entry(group_by.key(m))
            .or_default()
            .insert(m.system_id.clone());
    }
    let mut out = Vec::new();
    for (group, systems) in groups {
        let filter = ScopeFilter::systems(&format!("{}={group}", group_by.as_str()), systems);
        let points = align_system_points(table, system_das, metric_id, &filter);
        let n = points.metric.len();
        let mut entry = GroupCorrelation {
            group: group.to_string(),
            group_by,
            kind,
            n_systems: n,
            result: None,
            flag: None,
        };
        if n < 3 {
            entry.flag = Some("insufficient".into());
        } else {
            match system_correlation(table, system_das, metric_id, kind, &filter) {
                Ok((r, _)) => entry.result = Some(r),
                Err(Error::UndefinedCorrelation(_)) => entry.flag = Some("undefined".into()),
                Err(e) => return Err(e),
            }
        }
        out.push(entry);
    }
    Ok(out)
}

pub const GROUP_CSV_HEADER: &str = "group,kind,n_systems,value,flag";

pub fn groups_csv(groups: &[GroupCorrelation]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(GROUP_CSV_HEADER.split(',')).expect("in-memory write");
    for g in groups {
        w.write_record([
            g.group.as_str(),
            g.kind.as_str(),
            &g.n_systems.to_string(),
            &g.result.as_ref().map(|r| r.value.to_string()).unwrap_or_default(),
            g.flag.as_deref().unwrap_or(""),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub metric: String,
    pub n_systems: usize,
    pub tau: f64,
    pub concordant: u64,
    pub discordant: u64,
    pub interpretation: String,
    pub note: String,
}

/// `100 * tau` with one decimal, trailing `.0` dropped.
fn percentage_points(tau: f64) -> String {
    let s = format!("{:.1}", (100.0 * tau).abs());
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

pub fn kendall_agreement_report(
    system_das: &[SystemDa],
    table: &MetricScoreTable,
    metric_id: &str,
) -> Result<AgreementReport> {
    let points = align_system_points(table, system_das, metric_id, &ScopeFilter::all());
    let n = points.metric.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "agreement report needs at least 3 systems, got {n}"
        )));
    }
    let sample = PairedSample::new(points.metric, points.da)?;
    let tau = kendall_tau(&sample)?;
    let counts = kendall_counts(&sample);
    let pp = percentage_points(tau);
    let interpretation = if tau >= 0.0 {
        format!("agrees more than disagrees by {pp} percentage points on pairwise system comparisons")
    } else {
        format!("disagrees more than agrees by {pp} percentage points on pairwise system comparisons")
    };
    Ok(AgreementReport {
        metric: metric_id.to_string(),
        n_systems: n,
        tau,
        concordant: counts.concordant,
        discordant: counts.discordant,
        interpretation,
        note: "percentage points are 100 * Kendall tau over untied system pairs; \
               they are not derived from Pearson r"
            .into(),
    })
}

/// Coefficient of a metric against DA restricted to one bin's points.
/// Exposed for completeness; within-bin correlation answers a different
/// question than the conditional distributions and is not part of reports.
pub fn within_bin_coefficient(
    table: &MetricScoreTable,
    metric_id: &str,
    bins: &BinAssignment,
    label: BinLabel,
    kind: CoefficientKind,
) -> Result<f64> {
    let scores = table.segment_scores_for(metric_id);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for p in bins.bin(label) {
        if let Some(&m) = scores.get(&(p.system_id.clone(), p.segment_id)) {
            xs.push(m);
            ys.push(p.da);
        }
    }
    coefficient(&PairedSample::new(xs, ys)?, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Segment, SystemOutput, TestSet};
    use proptest::prelude::*;

    fn da(system: &str, seg: usize, v: f64) -> SegmentDa {
        SegmentDa {
            system_id: system.into(),
            segment_id: SegmentId(seg),
            da_score: v,
            judgment_count: 1,
        }
    }

    fn das_from(values: &[f64]) -> Vec<SegmentDa> {
        values.iter().enumerate().map(|(i, &v)| da("s", i, v)).collect()
    }

    #[test]
    fn nine_and_ten_points() {
        let b = tertile_bins(&das_from(&[9., 1., 5., 3., 7., 2., 8., 4., 6.])).unwrap();
        assert_eq!(b.sizes(), [3, 3, 3]);
        assert_eq!(b.boundaries, [3.0, 6.0]);
        assert_eq!((b.min, b.max), (1.0, 9.0));

        let b = tertile_bins(&das_from(&[0., 1., 2., 3., 4., 5., 6., 7., 8., 9.])).unwrap();
        assert_eq!(b.sizes(), [4, 3, 3]);
        let b = tertile_bins(&das_from(&[0., 1., 2., 3., 4., 5., 6., 7., 8., 9., 10.])).unwrap();
        assert_eq!(b.sizes(), [4, 3, 4]);
    }

    #[test]
    fn ties_broken_by_identifier() {
        let das = vec![da("b", 0, 1.0), da("a", 1, 1.0), da("a", 0, 1.0), da("c", 0, 1.0)];
        let b = tertile_bins(&das).unwrap();
        let bad: Vec<_> = b.bin(BinLabel::Bad).iter().map(|p| (p.system_id.as_str(), p.segment_id.0)).collect();
        assert_eq!(bad, [("a", 0), ("a", 1)]);
        assert_eq!(b.bin(BinLabel::Good)[0].system_id, "c");
    }

    #[test]
    fn too_few_points() {
        assert!(tertile_bins(&das_from(&[1.0, 2.0])).is_err());
        assert!(tertile_bins(&[da("s", 0, 1.), da("s", 0, 2.), da("s", 1, 3.)]).is_err());
    }

    proptest! {
        #[test]
        fn binning_is_a_partition(values in prop::collection::vec(-3.0f64..3.0, 3..200), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let das = das_from(&values);
            let b = tertile_bins(&das).unwrap();
            let sizes = b.sizes();
            prop_assert_eq!(sizes.iter().sum::<usize>(), das.len());
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert_eq!(b.membership().len(), das.len());
            prop_assert!(b.boundaries[0] <= b.boundaries[1]);
            let mut shuffled = das.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(tertile_bins(&shuffled).unwrap(), b);
        }
    }

    fn table_with(metric: &str, points: &[(&str, usize, f64)]) -> MetricScoreTable {
        let mut t = MetricScoreTable::new();
        for &(s, seg, v) in points {
            t.insert_segment(metric, s, SegmentId(seg), v).unwrap();
        }
        t
    }

    #[test]
    fn identity_metric_means_increase() {
        let values: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let das = das_from(&values);
        let t = table_with("m", &values.iter().enumerate().map(|(i, &v)| ("s", i, v)).collect::<Vec<_>>());
        let b = tertile_bins(&das).unwrap();
        let [bad, avg, good] = conditional_distribution(&t, "m", &b).unwrap();
        assert!(bad.mean < avg.mean && avg.mean < good.mean);
        for s in [&bad, &avg, &good] {
            assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
        }
    }

    #[test]
    fn constant_metric_identical_summaries() {
        let das = das_from(&[1., 2., 3., 4., 5., 6.]);
        let t = table_with("m", &(0..6).map(|i| ("s", i, 0.5)).collect::<Vec<_>>());
        let b = tertile_bins(&das).unwrap();
        let [bad, avg, good] = conditional_distribution(&t, "m", &b).unwrap();
        for s in [&avg, &good] {
            assert_eq!((s.mean, s.q1, s.median, s.q3), (bad.mean, bad.q1, bad.median, bad.q3));
        }
    }

    #[test]
    fn coverage_gap_lists_points() {
        let das = das_from(&[1., 2., 3.]);
        let t = table_with("m", &[("s", 0, 0.1), ("s", 1, 0.2)]);
        let err = conditional_distribution(&t, "m", &tertile_bins(&das).unwrap()).unwrap_err();
        assert!(err.to_string().contains("s:2"));
    }

    #[test]
    fn quartiles_match_sort_and_index() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = rng.random_range(1..40);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let s = summarize(BinLabel::Good, v.clone());
            let mut sorted = v.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let oracle = |q: f64| {
                let pos = q * (n - 1) as f64;
                let i = pos as usize;
                if i + 1 >= n {
                    sorted[n - 1]
                } else {
                    sorted[i] * (1.0 - (pos - i as f64)) + sorted[i + 1] * (pos - i as f64)
                }
            };
            assert!((s.q1 - oracle(0.25)).abs() < 1e-12);
            assert!((s.median - oracle(0.5)).abs() < 1e-12);
            assert!((s.q3 - oracle(0.75)).abs() < 1e-12);
        }
    }

    fn small_corpus(n: usize) -> EvaluationCorpus {
        let ts = TestSet::new(
            "zh-en",
            (0..n)
                .map(|i| Segment {
                    source: format!("src{i}"),
                    references: vec![format!("ref{i}")],
                })
                .collect(),
        )
        .unwrap();
        EvaluationCorpus::new(
            ts,
            vec![SystemOutput {
                system_id: "s".into(),
                hypotheses: (0..n).map(|i| format!("hyp{i}")).collect(),
            }],
        )
        .unwrap()
    }

    #[test]
    fn failure_cases_table2_shape() {
        // good-bin paraphrase under-credited, short bad output over-credited
        let das_v = [0.355, 0.247, 0.537, 0.1, -0.3, 0.0, -1.245, -1.081, -0.776];
        let bleu = [0.066, 0.079, 0.087, 0.3, 0.2, 0.25, 0.707, 0.481, 0.282];
        let das = das_from(&das_v);
        let t = table_with("sentBLEU", &bleu.iter().enumerate().map(|(i, &v)| ("s", i, v)).collect::<Vec<_>>());
        let bins = tertile_bins(&das).unwrap();
        let (cases, findings) = failure_cases(&small_corpus(9), &t, "sentBLEU", &bins, 1).unwrap();
        assert!(findings.is_empty());
        assert_eq!(cases.len(), 2);
        assert_eq!(cases[0].direction, FailureDirection::GoodUnderscored);
        assert_eq!((cases[0].da_score, cases[0].metric_score), (0.355, 0.066));
        assert_eq!(cases[0].hypothesis, "hyp0");
        assert_eq!(cases[1].direction, FailureDirection::BadOverscored);
        assert_eq!((cases[1].da_score, cases[1].metric_score), (-1.245, 0.707));
        assert_eq!(cases[1].references, ["ref6"]);

        let (all, findings) = failure_cases(&small_corpus(9), &t, "sentBLEU", &bins, 10).unwrap();
        assert_eq!(all.len(), 6);
        assert_eq!(findings.len(), 2);

        // every reported score appears in its bin's raw export
        let dist = conditional_distribution(&t, "sentBLEU", &bins).unwrap();
        for c in &all {
            let idx = match c.direction {
                FailureDirection::GoodUnderscored => 2,
                FailureDirection::BadOverscored => 0,
            };
            assert!(dist[idx].values.contains(&c.metric_score));
        }
        let text = render_failure_cases(&cases, "sentBLEU");
        assert!(text.contains("DA 0.355") && text.contains("output:    hyp6"));
    }

    #[test]
    fn identity_metric_failure_order() {
        let values: Vec<f64> = (0..15).map(|i| i as f64 / 10.0).collect();
        let das = das_from(&values);
        let t = table_with("m", &values.iter().enumerate().map(|(i, &v)| ("s", i, v)).collect::<Vec<_>>());
        let bins = tertile_bins(&das).unwrap();
        let (cases, _) = failure_cases(&small_corpus(15), &t, "m", &bins, 3).unwrap();
        let worst_good = cases.iter().filter(|c| c.direction == FailureDirection::GoodUnderscored).map(|c| c.metric_score).fold(f64::INFINITY, f64::min);
        let best_bad = cases.iter().filter(|c| c.direction == FailureDirection::BadOverscored).map(|c| c.metric_score).fold(f64::NEG_INFINITY, f64::max);
        assert!(worst_good > best_bad);
    }

    fn sys_da(id: &str, v: f64) -> SystemDa {
        SystemDa {
            system_id: id.into(),
            da_score: v,
            segment_count: 1,
        }
    }

    fn meta(id: &str, ty: &str, track: &str) -> SystemMeta {
        SystemMeta {
            system_id: id.into(),
            system_type: ty.into(),
            track: track.into(),
        }
    }

    #[test]
    fn grouped_correlation_basics() {
        let ids = ["a", "b", "c", "d", "e"];
        let da_v = [0.1, 0.5, -0.2, 0.9, 0.3];
        let m_v = [0.2, 0.4, 0.1, 0.8, 0.25];
        let das: Vec<SystemDa> = ids.iter().zip(da_v).map(|(i, v)| sys_da(i, v)).collect();
        let mut t = MetricScoreTable::new();
        for (i, v) in ids.iter().zip(m_v) {
            t.insert_system("m", i, v).unwrap();
        }
        let one: BTreeMap<String, SystemMeta> = ids.iter().map(|i| (i.to_string(), meta(i, "neural", "t"))).collect();
        let g = grouped_correlation(&das, &t, "m", &one, GroupBy::SystemType, CoefficientKind::Pearson).unwrap();
        let (global, _) = system_correlation(&t, &das, "m", CoefficientKind::Pearson, &ScopeFilter::all()).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].result.as_ref().unwrap().value, global.value);

        let mut split = one.clone();
        split.insert("a".into(), meta("a", "rule", "t"));
        split.insert("b".into(), meta("b", "rule", "t"));
        let g = grouped_correlation(&das, &t, "m", &split, GroupBy::SystemType, CoefficientKind::Pearson).unwrap();
        let rule = g.iter().find(|x| x.group == "rule").unwrap();
        assert_eq!(rule.flag.as_deref(), Some("insufficient"));
        assert!(rule.result.is_none());
        assert_eq!(rule.n_systems, 2);

        assert!(grouped_correlation(&das, &t, "m", &BTreeMap::new(), GroupBy::Track, CoefficientKind::Pearson).is_err());
        assert!(groups_csv(&g).starts_with(GROUP_CSV_HEADER));
    }

    #[test]
    fn agreement_interpretation() {
        let das: Vec<SystemDa> = (0..5).map(|i| sys_da(&format!("s{i}"), i as f64)).collect();
        let mut t = MetricScoreTable::new();
        for i in 0..5 {
            t.insert_system("m", &format!("s{i}"), i as f64 * 2.0).unwrap();
        }
        let r = kendall_agreement_report(&das, &t, "m").unwrap();
        assert_eq!(r.tau, 1.0);
        assert_eq!(r.interpretation, "agrees more than disagrees by 100 percentage points on pairwise system comparisons");
        assert_eq!(r.concordant + r.discordant, 10);
        assert_eq!(percentage_points(0.7667), "76.7");
        assert_eq!(percentage_points(0.5), "50");
    }
}
