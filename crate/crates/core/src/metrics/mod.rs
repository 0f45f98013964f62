//! Built-in baseline metrics, configuration signatures, and the score table
//! that holds built-in and external metric scores side by side.

mod bleu;
mod chrf;
mod tokenize;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bleu::{
    bleu_stats, brevity_penalty, closest_ref_len, corpus_bleu, precisions, sentence_bleu,
    BleuConfig, BleuStats, Smoothing,
};
pub use chrf::{
    best_reference_stats, chrf, chrf_is_degenerate, chrf_stats, corpus_chrf, ChrfConfig, ChrfStats,
};
pub use tokenize::{tokenize, TokenizationScheme, Tokenizer};

use crate::corpus::{EvaluationCorpus, SegmentId};
use crate::{Error, Finding, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "lowercase")]
pub enum MetricConfig {
    Bleu(BleuConfig),
    Chrf(ChrfConfig),
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            MetricConfig::Bleu(c) => c.validate(),
            MetricConfig::Chrf(c) => c.validate(),
        }
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Canonical `key=value` string identifying every scoring parameter.
///
/// chrF reads raw text, so its signature carries no tokenizer fields.
pub fn config_signature(config: &MetricConfig, scheme: &TokenizationScheme) -> String {
    match config {
        MetricConfig::Bleu(b) => format!(
            "bleu|maxn={}|smooth={}|bp={}|trunc={}|tok={}|lc={}",
            b.max_n,
            b.smoothing.spec(),
            yes_no(b.use_brevity_penalty),
            yes_no(b.effective_n_truncation),
            scheme.name,
            yes_no(scheme.lowercase)
        ),
        MetricConfig::Chrf(c) => format!(
            "chrf|n={}|beta={}|ws={}",
            c.char_n,
            c.beta,
            yes_no(c.include_whitespace)
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParsedSignature {
    Bleu(BleuConfig, TokenizationScheme),
    Chrf(ChrfConfig),
}

/// Inverse of [`config_signature`]. Keys may appear in any order.
pub fn parse_signature(signature: &str) -> Result<ParsedSignature> {
    let bad = |m: String| Error::InvalidArgument(format!("signature `{signature}`: {m}"));
    let mut parts = signature.split('|');
    let head = parts.next().unwrap_or_default();
    let mut kv = BTreeMap::new();
    for p in parts {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| bad(format!("field `{p}` is not key=value")))?;
        if kv.insert(k, v).is_some() {
            return Err(bad(format!("duplicate key `{k}`")));
        }
    }
    let mut take = |k: &str| kv.remove(k).ok_or_else(|| bad(format!("missing key `{k}`")));
    let flag = |v: &str| match v {
        "yes" => Ok(true),
        "no" => Ok(false),
        other => Err(Error::InvalidArgument(format!("bad flag `{other}`"))),
    };
    let num = |v: &str| {
        v.parse::<f64>()
            .map_err(|_| Error::InvalidArgument(format!("bad number `{v}`")))
    };
    let int = |v: &str| {
        v.parse::<usize>()
            .map_err(|_| Error::InvalidArgument(format!("bad integer `{v}`")))
    };
    let parsed = match head {
        "bleu" => {
            let config = BleuConfig {
                max_n: int(take("maxn")?)?,
                smoothing: Smoothing::parse(take("smooth")?)?,
                use_brevity_penalty: flag(take("bp")?)?,
                effective_n_truncation: flag(take("trunc")?)?,
            };
            let scheme = TokenizationScheme {
                name: take("tok")?.parse()?,
                lowercase: flag(take("lc")?)?,
            };
            ParsedSignature::Bleu(config, scheme)
        }
        "chrf" => ParsedSignature::Chrf(ChrfConfig {
            char_n: int(take("n")?)?,
            beta: num(take("beta")?)?,
            include_whitespace: flag(take("ws")?)?,
        }),
        other => return Err(bad(format!("unknown metric `{other}`"))),
    };
    if let Some(k) = kv.keys().next() {
        return Err(bad(format!("unexpected key `{k}`")));
    }
    Ok(parsed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuiltinMetric {
    pub id: String,
    pub config: MetricConfig,
}

impl BuiltinMetric {
    pub fn bleu(config: BleuConfig) -> Self {
        BuiltinMetric {
            id: "sentBLEU".into(),
            config: MetricConfig::Bleu(config),
        }
    }

    pub fn chrf(config: ChrfConfig) -> Self {
        BuiltinMetric {
            id: "chrF".into(),
            config: MetricConfig::Chrf(config),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    /// Mean of segment scores.
    #[default]
    Mean,
    /// Pooled corpus statistics (corpus BLEU / corpus chrF).
    Corpus,
}

impl Aggregate {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregate::Mean => "mean",
            Aggregate::Corpus => "corpus",
        }
    }
}

impl std::str::FromStr for Aggregate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregate::Mean),
            "corpus" => Ok(Aggregate::Corpus),
            other => Err(Error::InvalidArgument(format!("unknown aggregate `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum Provenance {
    Builtin { signature: String, aggregate: Aggregate },
    External { path: String },
}

impl Provenance {
    pub fn describe(&self) -> String {
        match self {
            Provenance::Builtin {
                signature,
                aggregate,
            } => format!("{signature}|agg={}", aggregate.as_str()),
            Provenance::External { path } => format!("external:{path}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentScoreRow {
    pub metric: String,
    pub system_id: String,
    pub segment_id: SegmentId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemScoreRow {
    pub metric: String,
    pub system_id: String,
    pub score: f64,
}

type SegmentKey = (String, SegmentId);

/// Scores keyed by metric, then system (and segment). Iteration order is
/// always sorted, so every export is deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricScoreTable {
    segment: BTreeMap<String, BTreeMap<SegmentKey, f64>>,
    system: BTreeMap<String, BTreeMap<String, f64>>,
    provenance: BTreeMap<String, Provenance>,
}

impl MetricScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn metric_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .segment
            .keys()
            .chain(self.system.keys())
            .chain(self.provenance.keys())
            .cloned()
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn provenance(&self) -> &BTreeMap<String, Provenance> {
        &self.provenance
    }

    pub fn set_provenance(&mut self, metric: &str, p: Provenance) {
        self.provenance.insert(metric.to_string(), p);
    }

    pub fn insert_segment(&mut self, metric: &str, system: &str, segment: SegmentId, score: f64) -> Result<()> {
        let slot = self.segment.entry(metric.to_string()).or_default();
        if slot.insert((system.to_string(), segment), score).is_some() {
            return Err(Error::InvalidArgument(format!(
                "duplicate score for ({metric}, {system}, {segment})"
            )));
        }
        Ok(())
    }

    pub fn insert_system(&mut self, metric: &str, system: &str, score: f64) -> Result<()> {
        let slot = self.system.entry(metric.to_string()).or_default();
        if slot.insert(system.to_string(), score).is_some() {
            return Err(Error::InvalidArgument(format!(
                "duplicate system score for ({metric}, {system})"
            )));
        }
        Ok(())
    }

    pub fn segment_score(&self, metric: &str, system: &str, segment: SegmentId) -> Option<f64> {
        self.segment
            .get(metric)?
            .get(&(system.to_string(), segment))
            .copied()
    }

    pub fn system_score(&self, metric: &str, system: &str) -> Option<f64> {
        self.system.get(metric)?.get(system).copied()
    }

    pub fn segment_scores_for(&self, metric: &str) -> BTreeMap<SegmentKey, f64> {
        self.segment.get(metric).cloned().unwrap_or_default()
    }

    pub fn system_scores_for(&self, metric: &str) -> BTreeMap<String, f64> {
        self.system.get(metric).cloned().unwrap_or_default()
    }

    /// Adds every score and provenance entry of `other`; any overlapping key
    /// is an error.
    pub fn merge(&mut self, other: MetricScoreTable) -> Result<()> {
        for (metric, rows) in other.segment {
            for ((system, seg), v) in rows {
                self.insert_segment(&metric, &system, seg, v)?;
            }
        }
        for (metric, rows) in other.system {
            for (system, v) in rows {
                self.insert_system(&metric, &system, v)?;
            }
        }
        for (metric, p) in other.provenance {
            match self.provenance.get(&metric) {
                Some(existing) if *existing != p => {
                    return Err(Error::InvalidArgument(format!(
                        "metric `{metric}` supplied by both {} and {}",
                        existing.describe(),
                        p.describe()
                    )))
                }
                _ => {
                    self.provenance.insert(metric, p);
                }
            }
        }
        Ok(())
    }

    /// Fills missing system scores with the mean of segment scores for every
    /// (metric, system) that covers all `segment_count` segments.
    pub fn fill_system_means(&mut self, segment_count: Option<usize>) {
        for (metric, rows) in &self.segment {
            let mut per_system: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for ((system, _), &v) in rows {
                per_system.entry(system).or_default().push(v);
            }
            let sys = self.system.entry(metric.clone()).or_default();
            for (system, v) in per_system {
                if segment_count.is_some_and(|n| v.len() != n) || sys.contains_key(system) {
                    continue;
                }
                sys.insert(system.to_string(), v.iter().sum::<f64>() / v.len() as f64);
            }
        }
        self.system.retain(|_, m| !m.is_empty());
    }

    pub fn segment_rows(&self) -> Vec<SegmentScoreRow> {
        self.segment
            .iter()
            .flat_map(|(metric, rows)| {
                rows.iter().map(move |((system, seg), &score)| SegmentScoreRow {
                    metric: metric.clone(),
                    system_id: system.clone(),
                    segment_id: *seg,
                    score,
                })
            })
            .collect()
    }

    pub fn system_rows(&self) -> Vec<SystemScoreRow> {
        self.system
            .iter()
            .flat_map(|(metric, rows)| {
                rows.iter().map(move |(system, &score)| SystemScoreRow {
                    metric: metric.clone(),
                    system_id: system.clone(),
                    score,
                })
            })
            .collect()
    }

    pub fn from_rows(
        segments: &[SegmentScoreRow],
        systems: &[SystemScoreRow],
        provenance: BTreeMap<String, Provenance>,
    ) -> Result<Self> {
        let mut t = MetricScoreTable::new();
        for r in segments {
            t.insert_segment(&r.metric, &r.system_id, r.segment_id, r.score)?;
        }
        for r in systems {
            t.insert_system(&r.metric, &r.system_id, r.score)?;
        }
        t.provenance = provenance;
        Ok(t)
    }

    /// Score dump mirroring the external TSV format, with one
    /// `# signature:` comment per metric.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (metric, p) in &self.provenance {
            let _ = writeln!(out, "# signature: {metric}\t{}", p.describe());
        }
        for r in self.segment_rows() {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", r.metric, r.system_id, r.segment_id, r.score);
        }
        for r in self.system_rows() {
            let _ = writeln!(out, "{}\t{}\t{}", r.metric, r.system_id, r.score);
        }
        out
    }
}

/// Scores every system of the corpus with the given built-in metrics.
pub fn score_systems(
    corpus: &EvaluationCorpus,
    metrics: &[BuiltinMetric],
    scheme: &TokenizationScheme,
    aggregate: Aggregate,
) -> Result<(MetricScoreTable, Vec<Finding>)> {
    let mut table = MetricScoreTable::new();
    let mut findings = Vec::new();
    let test_set = corpus.test_set();
    let tokenized_refs: Vec<Vec<Vec<String>>> = test_set
        .segments()
        .iter()
        .map(|s| s.references.iter().map(|r| tokenize(r, scheme)).collect())
        .collect();

    for metric in metrics {
        metric.config.validate()?;
        table.set_provenance(
            &metric.id,
            Provenance::Builtin {
                signature: config_signature(&metric.config, scheme),
                aggregate,
            },
        );
        let mut degenerate = 0usize;
        for (system_id, output) in corpus.outputs() {
            let mut seg_scores = Vec::with_capacity(test_set.len());
            match &metric.config {
                MetricConfig::Bleu(cfg) => {
                    let mut pairs = Vec::with_capacity(test_set.len());
                    for (i, hyp) in output.hypotheses.iter().enumerate() {
                        let h = tokenize(hyp, scheme);
                        let s = sentence_bleu(&h, &tokenized_refs[i], cfg);
                        table.insert_segment(&metric.id, system_id, SegmentId(i), s)?;
                        seg_scores.push(s);
                        if aggregate == Aggregate::Corpus {
                            pairs.push((h, tokenized_refs[i].clone()));
                        }
                    }
                    let sys = match aggregate {
                        Aggregate::Mean => mean(&seg_scores),
                        Aggregate::Corpus => corpus_bleu(&pairs, cfg),
                    };
                    table.insert_system(&metric.id, system_id, sys)?;
                }
                MetricConfig::Chrf(cfg) => {
                    for (i, hyp) in output.hypotheses.iter().enumerate() {
                        let refs = &test_set.segments()[i].references;
                        if chrf_is_degenerate(hyp, refs, cfg) {
                            degenerate += 1;
                        }
                        let s = chrf(hyp, refs, cfg);
                        table.insert_segment(&metric.id, system_id, SegmentId(i), s)?;
                        seg_scores.push(s);
                    }
                    let sys = match aggregate {
                        Aggregate::Mean => mean(&seg_scores),
                        Aggregate::Corpus => {
                            let pairs: Vec<(&str, Vec<&str>)> = output
                                .hypotheses
                                .iter()
                                .zip(test_set.segments())
                                .map(|(h, s)| {
                                    (h.as_str(), s.references.iter().map(String::as_str).collect())
                                })
                                .collect();
                            corpus_chrf(&pairs, cfg)
                        }
                    };
                    table.insert_system(&metric.id, system_id, sys)?;
                }
            }
        }
        if degenerate > 0 {
            findings.push(Finding::warning(
                "score",
                format!(
                    "`{}`: {degenerate} segment(s) with empty hypothesis and reference scored 0",
                    metric.id
                ),
            ));
        }
    }
    Ok((table, findings))
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// One parsed line of an external score file.
#[derive(Debug, Clone, PartialEq)]
pub enum ExternalRow {
    Segment(SegmentScoreRow),
    System(SystemScoreRow),
}

/// Parses external scores: 4 columns for segment level, 3 for system level.
/// Blank lines and `#` comments are skipped.
pub fn parse_score_tsv(text: &str, origin: &str) -> Result<Vec<ExternalRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let loc = format!("{origin}:{}", i + 1);
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        let score = |s: &str| -> Result<f64> {
            let v: f64 = s
                .parse()
                .map_err(|_| Error::parse(&loc, format!("bad score `{s}`")))?;
            if !v.is_finite() {
                return Err(Error::parse(&loc, "non-finite score"));
            }
            Ok(v)
        };
        match cols.as_slice() {
            [metric, system, segment, value] => {
                let segment = segment
                    .parse()
                    .map(SegmentId)
                    .map_err(|_| Error::parse(&loc, format!("bad segment_id `{segment}`")))?;
                rows.push(ExternalRow::Segment(SegmentScoreRow {
                    metric: metric.to_string(),
                    system_id: system.to_string(),
                    segment_id: segment,
                    score: score(value)?,
                }));
            }
            [metric, system, value] => rows.push(ExternalRow::System(SystemScoreRow {
                metric: metric.to_string(),
                system_id: system.to_string(),
                score: score(value)?,
            })),
            _ => {
                return Err(Error::parse(
                    &loc,
                    format!("expected 3 or 4 tab-separated columns, got {}", cols.len()),
                ))
            }
        }
    }
    Ok(rows)
}

/// Builds a table from parsed rows without checking them against a corpus.
/// System scores missing from the file are filled from segment means.
pub fn table_from_external_rows(rows: Vec<ExternalRow>, origin: &str) -> Result<MetricScoreTable> {
    let mut table = MetricScoreTable::new();
    for row in rows {
        let metric = match &row {
            ExternalRow::Segment(r) => r.metric.clone(),
            ExternalRow::System(r) => r.metric.clone(),
        };
        table.set_provenance(
            &metric,
            Provenance::External {
                path: origin.to_string(),
            },
        );
        match row {
            ExternalRow::Segment(r) => table.insert_segment(&r.metric, &r.system_id, r.segment_id, r.score)?,
            ExternalRow::System(r) => table.insert_system(&r.metric, &r.system_id, r.score)?,
        }
    }
    Ok(table)
}

/// Loads an external score file and checks every row against the corpus.
pub fn load_external_metric_scores(
    path: impl AsRef<Path>,
    corpus: &EvaluationCorpus,
) -> Result<MetricScoreTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    external_scores_for_corpus(&text, &origin, corpus)
}

pub fn external_scores_for_corpus(
    text: &str,
    origin: &str,
    corpus: &EvaluationCorpus,
) -> Result<MetricScoreTable> {
    let rows = parse_score_tsv(text, origin)?;
    for row in &rows {
        let (system, segment) = match row {
            ExternalRow::Segment(r) => (&r.system_id, Some(r.segment_id)),
            ExternalRow::System(r) => (&r.system_id, None),
        };
        if corpus.output(system).is_none() {
            return Err(Error::UnknownSystem(system.clone()));
        }
        if let Some(seg) = segment {
            if seg.0 >= corpus.test_set().len() {
                return Err(Error::parse(
                    origin,
                    format!(
                        "segment {seg} out of range for a {}-segment test set",
                        corpus.test_set().len()
                    ),
                ));
            }
        }
    }
    let mut table = table_from_external_rows(rows, origin)?;
    table.fill_system_means(Some(corpus.test_set().len()));
    Ok(table)
}

pub fn load_score_tsv(path: impl AsRef<Path>) -> Result<MetricScoreTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    let mut table = table_from_external_rows(parse_score_tsv(&text, &origin)?, &origin)?;
    table.fill_system_means(None);
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Segment, SystemOutput, TestSet};
    use proptest::prelude::*;

    fn corpus(hyps: &[(&str, &[&str])], refs: &[&str]) -> EvaluationCorpus {
        let ts = TestSet::new(
            "zh-en",
            refs.iter()
                .map(|r| Segment {
                    source: "src".into(),
                    references: vec![r.to_string()],
                })
                .collect(),
        )
        .unwrap();
        let outs = hyps
            .iter()
            .map(|(id, h)| SystemOutput {
                system_id: id.to_string(),
                hypotheses: h.iter().map(|s| s.to_string()).collect(),
            })
            .collect();
        EvaluationCorpus::new(ts, outs).unwrap()
    }

    #[test]
    fn default_bleu_signature() {
        let s = config_signature(
            &MetricConfig::Bleu(BleuConfig::default()),
            &TokenizationScheme::default(),
        );
        assert_eq!(s, "bleu|maxn=4|smooth=add-1|bp=yes|trunc=yes|tok=whitespace|lc=no");
        let lc = config_signature(
            &MetricConfig::Bleu(BleuConfig::default()),
            &TokenizationScheme::new(Tokenizer::Whitespace, true),
        );
        assert_ne!(s, lc);
    }

    #[test]
    fn signature_keys_order_independent() {
        let a = parse_signature("bleu|maxn=4|smooth=add-1|bp=yes|trunc=yes|tok=whitespace|lc=no").unwrap();
        let b = parse_signature("bleu|lc=no|tok=whitespace|trunc=yes|bp=yes|smooth=add-1|maxn=4").unwrap();
        assert_eq!(a, b);
        assert!(parse_signature("bleu|maxn=4").is_err());
        assert!(parse_signature("meteor|x=1").is_err());
        assert!(parse_signature("chrf|n=6|beta=2|ws=no|extra=1").is_err());
    }

    fn smoothing_strategy() -> impl Strategy<Value = Smoothing> {
        prop_oneof![
            Just(Smoothing::None),
            Just(Smoothing::ExpDecay),
            (1u32..40, any::<bool>()).prop_map(|(k, u)| Smoothing::AddK {
                k: k as f64 / 4.0,
                include_unigrams: u
            }),
        ]
    }

    proptest! {
        #[test]
        fn signature_round_trip(
            max_n in 1usize..9,
            smoothing in smoothing_strategy(),
            bp in any::<bool>(),
            trunc in any::<bool>(),
            tok in prop_oneof![Just(Tokenizer::Whitespace), Just(Tokenizer::Intl), Just(Tokenizer::Char)],
            lc in any::<bool>(),
            char_n in 1usize..10,
            beta in 1u32..20,
            ws in any::<bool>(),
        ) {
            let b = BleuConfig { max_n, smoothing, use_brevity_penalty: bp, effective_n_truncation: trunc };
            let scheme = TokenizationScheme::new(tok, lc);
            let sig = config_signature(&MetricConfig::Bleu(b), &scheme);
            prop_assert_eq!(parse_signature(&sig).unwrap(), ParsedSignature::Bleu(b, scheme));

            let c = ChrfConfig { char_n, beta: beta as f64 / 2.0, include_whitespace: ws };
            let sig = config_signature(&MetricConfig::Chrf(c), &scheme);
            prop_assert_eq!(parse_signature(&sig).unwrap(), ParsedSignature::Chrf(c));
        }
    }

    #[test]
    fn perfect_outputs_score_one() {
        let c = corpus(&[("a", &["x y z", "p q"])], &["x y z", "p q"]);
        let metrics = [BuiltinMetric::bleu(BleuConfig::default()), BuiltinMetric::chrf(ChrfConfig::default())];
        for agg in [Aggregate::Mean, Aggregate::Corpus] {
            let (t, f) = score_systems(&c, &metrics, &TokenizationScheme::default(), agg).unwrap();
            assert!(f.is_empty());
            assert!(t.segment_rows().iter().all(|r| r.score == 1.0));
            assert!(t.system_rows().iter().all(|r| r.score == 1.0));
            assert_eq!(t.system_rows().len(), 2);
        }
    }

    #[test]
    fn mean_vs_corpus_aggregate() {
        // seg 0: exact 4-token match -> 1.0
        // seg 1: "x y" vs "x y z w": add-1 precisions 2/2, (1+1)/(1+1); BP exp(1 - 4/2)
        let c = corpus(&[("a", &["a b c d", "x y"])], &["a b c d", "x y z w"]);
        let m = [BuiltinMetric::bleu(BleuConfig::default())];
        let scheme = TokenizationScheme::default();
        let (mean_t, _) = score_systems(&c, &m, &scheme, Aggregate::Mean).unwrap();
        let (corp_t, _) = score_systems(&c, &m, &scheme, Aggregate::Corpus).unwrap();
        let seg1 = (1.0f64 - 2.0).exp();
        assert!((mean_t.segment_score("sentBLEU", "a", SegmentId(1)).unwrap() - seg1).abs() < 1e-15);
        let mean_expected = (1.0 + seg1) / 2.0;
        let corpus_expected = (1.0f64 - 8.0 / 6.0).exp();
        assert!((mean_t.system_score("sentBLEU", "a").unwrap() - mean_expected).abs() < 1e-15);
        assert!((corp_t.system_score("sentBLEU", "a").unwrap() - corpus_expected).abs() < 1e-15);
        assert!((mean_expected - corpus_expected).abs() > 0.01);
        assert!(matches!(
            corp_t.provenance()["sentBLEU"],
            Provenance::Builtin { aggregate: Aggregate::Corpus, .. }
        ));
    }

    #[test]
    fn mean_of_segments() {
        let mut t = MetricScoreTable::new();
        t.insert_segment("m", "s", SegmentId(0), 0.2).unwrap();
        t.insert_segment("m", "s", SegmentId(1), 0.4).unwrap();
        t.fill_system_means(Some(2));
        assert!((t.system_score("m", "s").unwrap() - 0.3).abs() < 1e-15);
        let mut partial = MetricScoreTable::new();
        partial.insert_segment("m", "s", SegmentId(0), 0.2).unwrap();
        partial.fill_system_means(Some(2));
        assert_eq!(partial.system_score("m", "s"), None);
    }

    #[test]
    fn external_scores() {
        let c = corpus(&[("uedin-nmt", &["h0", "h1"])], &["r0", "r1"]);
        let t = external_scores_for_corpus("BEER\tuedin-nmt\t0\t0.39\n", "beer.tsv", &c).unwrap();
        assert_eq!(t.segment_score("BEER", "uedin-nmt", SegmentId(0)), Some(0.39));
        assert_eq!(
            t.provenance()["BEER"],
            Provenance::External { path: "beer.tsv".into() }
        );

        let empty = external_scores_for_corpus("", "e.tsv", &c).unwrap();
        assert!(empty.segment_rows().is_empty() && empty.metric_ids().is_empty());

        assert!(external_scores_for_corpus("BEER\tuedin-nmt\t99\t0.1\n", "x", &c).is_err());
        assert!(matches!(
            external_scores_for_corpus("BEER\tghost\t0\t0.1\n", "x", &c),
            Err(Error::UnknownSystem(_))
        ));
        assert!(external_scores_for_corpus(
            "BEER\tuedin-nmt\t0\t0.1\nBEER\tuedin-nmt\t0\t0.2\n",
            "x",
            &c
        )
        .is_err());

        let sys = external_scores_for_corpus("BEER\tuedin-nmt\t0.5\n", "x", &c).unwrap();
        assert_eq!(sys.system_score("BEER", "uedin-nmt"), Some(0.5));
    }

    #[test]
    fn dump_parses_back() {
        let c = corpus(&[("a", &["x y", "p"]), ("b", &["x", "p q"])], &["x y", "p q"]);
        let (t, _) = score_systems(
            &c,
            &[BuiltinMetric::bleu(BleuConfig::default())],
            &TokenizationScheme::default(),
            Aggregate::Corpus,
        )
        .unwrap();
        let text = t.to_tsv();
        assert!(text.starts_with("# signature: sentBLEU\tbleu|maxn=4"));
        let back = table_from_external_rows(parse_score_tsv(&text, "d").unwrap(), "d").unwrap();
        assert_eq!(back.segment_rows(), t.segment_rows());
        assert_eq!(back.system_rows(), t.system_rows());
    }

    #[test]
    fn chrf_ignores_tokenizer() {
        let c = corpus(&[("a", &["the cat, sat", "Hello"])], &["the cat sat", "hello"]);
        let m = [BuiltinMetric::chrf(ChrfConfig::default())];
        let (a, _) = score_systems(&c, &m, &TokenizationScheme::new(Tokenizer::Whitespace, false), Aggregate::Mean).unwrap();
        let (b, _) = score_systems(&c, &m, &TokenizationScheme::new(Tokenizer::Intl, true), Aggregate::Mean).unwrap();
        assert_eq!(a.segment_rows(), b.segment_rows());
    }
}
