//! Direct assessment: raw crowdsourced judgments to standardized segment and
//! system scores, plus the simulation that picks how many judgments each
//! segment needs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::SegmentId;
use crate::correlation::{pearson, PairedSample};
use crate::{Error, Finding, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawJudgment {
    pub worker_id: String,
    pub system_id: String,
    pub segment_id: SegmentId,
    pub raw_score: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StandardizeMode {
    /// Deviation from the worker's mean.
    Center,
    /// Deviation from the worker's mean in units of the worker's sample sd.
    #[default]
    Zscore,
}

impl StandardizeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StandardizeMode::Center => "center",
            StandardizeMode::Zscore => "zscore",
        }
    }
}

impl std::str::FromStr for StandardizeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "center" => Ok(StandardizeMode::Center),
            "zscore" => Ok(StandardizeMode::Zscore),
            other => Err(Error::InvalidArgument(format!(
                "unknown standardization mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerStats {
    pub worker_id: String,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single score.
    pub sd: f64,
    pub retained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedJudgment {
    pub worker_id: String,
    pub system_id: String,
    pub segment_id: SegmentId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardized {
    pub mode: StandardizeMode,
    pub judgments: Vec<StandardizedJudgment>,
    pub workers: Vec<WorkerStats>,
    pub findings: Vec<Finding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDa {
    pub system_id: String,
    pub segment_id: SegmentId,
    pub da_score: f64,
    pub judgment_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDa {
    pub system_id: String,
    pub da_score: f64,
    pub segment_count: usize,
}

fn worker_stats(worker_id: &str, scores: &[f64]) -> WorkerStats {
    let n = scores.len();
    let mean = scores.iter().sum::<f64>() / n as f64;
    let sd = if n < 2 {
        0.0
    } else {
        let ss: f64 = scores.iter().map(|s| (s - mean) * (s - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    WorkerStats {
        worker_id: worker_id.to_string(),
        count: n,
        mean,
        sd,
        retained: true,
    }
}

/// Standardizes every judgment against its worker's own scoring habits.
///
/// In z-score mode a worker with a single judgment, or whose judgments are
/// all identical, is dropped and reported as a finding. Output keeps input
/// order for retained judgments.
pub fn standardize_judgments(raw: &[RawJudgment], mode: StandardizeMode) -> Standardized {
    let mut by_worker: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for j in raw {
        by_worker.entry(&j.worker_id).or_default().push(j.raw_score);
    }
    let mut findings = Vec::new();
    let mut stats: BTreeMap<&str, WorkerStats> = BTreeMap::new();
    for (&worker, scores) in &by_worker {
        let mut st = worker_stats(worker, scores);
        if mode == StandardizeMode::Zscore {
            if st.count < 2 {
                st.retained = false;
                findings.push(Finding::warning(
                    "standardize",
                    format!("worker `{worker}` dropped: a single judgment has no spread"),
                ));
            } else if st.sd == 0.0 {
                st.retained = false;
                findings.push(Finding::warning(
                    "standardize",
                    format!(
                        "worker `{worker}` dropped: all {} judgments identical (sd = 0)",
                        st.count
                    ),
                ));
            }
        }
        stats.insert(worker, st);
    }
    let judgments = raw
        .iter()
        .filter_map(|j| {
            let st = &stats[j.worker_id.as_str()];
            if !st.retained {
                return None;
            }
            let centered = j.raw_score - st.mean;
            let score = match mode {
                StandardizeMode::Center => centered,
                StandardizeMode::Zscore => centered / st.sd,
            };
            Some(StandardizedJudgment {
                worker_id: j.worker_id.clone(),
                system_id: j.system_id.clone(),
                segment_id: j.segment_id,
                score,
            })
        })
        .collect();
    Standardized {
        mode,
        judgments,
        workers: stats.into_values().collect(),
        findings,
    }
}

/// Averages standardized judgments per (system, segment). Groups with fewer
/// than `min_count` judgments are excluded and reported.
pub fn segment_da(
    judgments: &[StandardizedJudgment],
    min_count: usize,
) -> (Vec<SegmentDa>, Vec<Finding>) {
    let mut findings = Vec::new();
    if judgments.is_empty() {
        findings.push(Finding::warning("segment-da", "no judgments to aggregate"));
        return (Vec::new(), findings);
    }
    let mut groups: BTreeMap<(&str, SegmentId), Vec<f64>> = BTreeMap::new();
    for j in judgments {
        groups
            .entry((j.system_id.as_str(), j.segment_id))
            .or_default()
            .push(j.score);
    }
    let mut out = Vec::with_capacity(groups.len());
    let mut excluded = Vec::new();
    for ((system, segment), mut scores) in groups {
        if scores.len() < min_count.max(1) {
            excluded.push(format!("{system}:{segment}({})", scores.len()));
            continue;
        }
        // Sorting makes the sum independent of judgment order.
        scores.sort_by(f64::total_cmp);
        out.push(SegmentDa {
            system_id: system.to_string(),
            segment_id: segment,
            da_score: scores.iter().sum::<f64>() / scores.len() as f64,
            judgment_count: scores.len(),
        });
    }
    if !excluded.is_empty() {
        findings.push(Finding::warning(
            "segment-da",
            format!(
                "{} segment(s) with fewer than {min_count} judgments excluded: {}",
                excluded.len(),
                excluded.join(", ")
            ),
        ));
    }
    (out, findings)
}

/// Per-system arithmetic mean of segment DA scores.
pub fn system_da(segment_das: &[SegmentDa]) -> Vec<SystemDa> {
    let mut groups: BTreeMap<&str, Vec<(SegmentId, f64)>> = BTreeMap::new();
    for s in segment_das {
        groups
            .entry(&s.system_id)
            .or_default()
            .push((s.segment_id, s.da_score));
    }
    groups
        .into_iter()
        .map(|(system, mut segs)| {
            segs.sort_by_key(|s| s.0);
            SystemDa {
                system_id: system.to_string(),
                da_score: segs.iter().map(|s| s.1).sum::<f64>() / segs.len() as f64,
                segment_count: segs.len(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessorSimConfig {
    pub i_values: Vec<usize>,
    pub n_total: usize,
    pub target_r: f64,
    pub shuffle_seed: u64,
}

impl AssessorSimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.i_values.is_empty() {
            return Err(Error::InvalidArgument("i_values is empty".into()));
        }
        if self.i_values[0] == 0 || self.i_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "i_values must be strictly increasing positive integers".into(),
            ));
        }
        let max_i = *self.i_values.last().unwrap_or(&0);
        if self.n_total <= max_i {
            return Err(Error::InvalidArgument(format!(
                "n_total ({}) must exceed every i (max {max_i})",
                self.n_total
            )));
        }
        if !(self.target_r > 0.0 && self.target_r <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "target_r must lie in (0, 1], got {}",
                self.target_r
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub i: usize,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessorCurve {
    pub points: Vec<CurvePoint>,
    pub items: usize,
    /// Smallest `i` whose correlation reaches `target_r`.
    pub recommended_i: Option<usize>,
}

/// Runs the assessor-count simulation on items keyed by (system, segment),
/// using raw scores.
pub fn simulate_assessor_count(
    raw: &[RawJudgment],
    config: &AssessorSimConfig,
) -> Result<AssessorCurve> {
    let mut items: BTreeMap<(&str, SegmentId), Vec<f64>> = BTreeMap::new();
    for j in raw {
        items
            .entry((j.system_id.as_str(), j.segment_id))
            .or_default()
            .push(j.raw_score);
    }
    for ((system, segment), scores) in &items {
        if scores.len() < config.n_total {
            return Err(Error::InsufficientData(format!(
                "item {system}:{segment} has {} judgments; n_total is {}",
                scores.len(),
                config.n_total
            )));
        }
    }
    let item_scores: Vec<Vec<f64>> = items.into_values().collect();
    simulate_assessor_curve(&item_scores, config)
}

/// For each `i`, correlates the mean of an item's first `i` judgments with
/// the mean of its remaining `n_total - i` judgments across items.
/// Judgments are shuffled per item (in item order) with one seeded RNG.
pub fn simulate_assessor_curve(
    items: &[Vec<f64>],
    config: &AssessorSimConfig,
) -> Result<AssessorCurve> {
    config.validate()?;
    if items.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} items; the simulation needs at least 3",
            items.len()
        )));
    }
    if let Some(pos) = items.iter().position(|s| s.len() < config.n_total) {
        return Err(Error::InsufficientData(format!(
            "item {pos} has {} judgments; n_total is {}",
            items[pos].len(),
            config.n_total
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let shuffled: Vec<Vec<f64>> = items
        .iter()
        .map(|scores| {
            let mut s = scores.clone();
            s.shuffle(&mut rng);
            s.truncate(config.n_total);
            s
        })
        .collect();

    let mut points = Vec::with_capacity(config.i_values.len());
    for &i in &config.i_values {
        let mut head = Vec::with_capacity(shuffled.len());
        let mut tail = Vec::with_capacity(shuffled.len());
        for s in &shuffled {
            head.push(s[..i].iter().sum::<f64>() / i as f64);
            tail.push(s[i..].iter().sum::<f64>() / (config.n_total - i) as f64);
        }
        let r = pearson(&PairedSample::new(head, tail)?)?;
        points.push(CurvePoint { i, r });
    }
    let recommended_i = points
        .iter()
        .find(|p| p.r >= config.target_r)
        .map(|p| p.i);
    Ok(AssessorCurve {
        points,
        items: items.len(),
        recommended_i,
    })
}

/// Reads a judgments CSV with header `worker_id,system_id,segment_id,score`.
pub fn load_judgments_csv(path: impl AsRef<Path>) -> Result<Vec<RawJudgment>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_judgments_csv(&text, &path.display().to_string())
}

pub fn parse_judgments_csv(text: &str, origin: &str) -> Result<Vec<RawJudgment>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(origin, e.to_string()))?
        .clone();
    let expected = ["worker_id", "system_id", "segment_id", "score"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::parse(
            origin,
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let loc = format!("{origin}:{}", i + 2);
        let record = record.map_err(|e| Error::parse(&loc, e.to_string()))?;
        let segment: usize = record[2]
            .parse()
            .map_err(|_| Error::parse(&loc, format!("bad segment_id `{}`", &record[2])))?;
        let score: f64 = record[3]
            .parse()
            .map_err(|_| Error::parse(&loc, format!("bad score `{}`", &record[3])))?;
        if !(0.0..=100.0).contains(&score) {
            return Err(Error::parse(&loc, format!("score {score} outside [0, 100]")));
        }
        out.push(RawJudgment {
            worker_id: record[0].to_string(),
            system_id: record[1].to_string(),
            segment_id: SegmentId(segment),
            raw_score: score,
        });
    }
    Ok(out)
}

pub fn segment_da_tsv(das: &[SegmentDa]) -> String {
    let mut out = String::new();
    for d in das {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            d.system_id, d.segment_id, d.da_score, d.judgment_count
        );
    }
    out
}

/// Parses the DA TSV: `system_id<TAB>segment_id<TAB>da_score<TAB>n_judgments`.
/// Blank lines and `#` comments are skipped.
pub fn parse_segment_da_tsv(text: &str, origin: &str) -> Result<Vec<SegmentDa>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let loc = format!("{origin}:{}", i + 1);
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::parse(&loc, format!("expected 4 columns, got {}", cols.len())));
        }
        let segment_id = cols[1]
            .parse()
            .map(SegmentId)
            .map_err(|_| Error::parse(&loc, format!("bad segment_id `{}`", cols[1])))?;
        let da_score = cols[2]
            .parse()
            .map_err(|_| Error::parse(&loc, format!("bad da_score `{}`", cols[2])))?;
        let judgment_count = cols[3]
            .parse()
            .map_err(|_| Error::parse(&loc, format!("bad n_judgments `{}`", cols[3])))?;
        out.push(SegmentDa {
            system_id: cols[0].to_string(),
            segment_id,
            da_score,
            judgment_count,
        });
    }
    Ok(out)
}

pub fn load_segment_da_tsv(path: impl AsRef<Path>) -> Result<Vec<SegmentDa>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_segment_da_tsv(&text, &path.display().to_string())
}
