//! Configuration-driven study runner.
//!
//! A study is described by one TOML document. [`run_study`] executes
//! ingest, validation, standardization, DA aggregation, scoring,
//! correlation, significance testing and the diagnostic analyses, and
//! collects everything into a [`ReportBundle`].
//!
//! ```toml
//! language_pair = "zh-en"
//! seed = 7
//!
//! [paths]
//! source = "newstest.zh"
//! references = ["newstest.en"]
//! outputs_dir = "systems"
//! judgments = "da.csv"
//! metadata = "systems.csv"
//!
//! [metrics]
//! builtin = ["bleu", "chrf"]
//! tokenizer = "intl"
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    conditional_distribution, failure_cases, grouped_correlation, kendall_agreement_report,
    tertile_bins, AgreementReport, BinAssignment, BinSummary, FailureCase, GroupBy,
    GroupCorrelation,
};
use crate::corpus::{
    load_metadata_csv, load_outputs_dir, load_testset, validate_corpus, DesignPolicy,
    EvaluationCorpus,
};
use crate::correlation::{
    align_system_points, segment_correlation, system_correlation, CoefficientKind,
    CorrelationResult, ScopeFilter,
};
use crate::judgments::{
    load_judgments_csv, segment_da, simulate_assessor_count, standardize_judgments,
    system_da, AssessorCurve, AssessorSimConfig, SegmentDa, StandardizeMode, SystemDa,
    WorkerStats,
};
use crate::metrics::{
    external_scores_for_corpus, score_systems, Aggregate, BleuConfig, BuiltinMetric, ChrfConfig,
    MetricScoreTable, SegmentScoreRow, Smoothing, SystemScoreRow, TokenizationScheme, Tokenizer,
};
use crate::significance::{
    pearson_zero_test, significance_matrix, winner_set, MatrixOptions, Sidedness,
    SignificanceMatrix,
};
use crate::{Error, Finding, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub language_pair: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub paths: PathsConfig,
    #[serde(default)]
    pub da: DaConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assessor_sim: Option<AssessorSimSection>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub source: PathBuf,
    pub references: Vec<PathBuf>,
    pub outputs_dir: PathBuf,
    pub judgments: PathBuf,
    #[serde(default)]
    pub external_scores: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DaConfig {
    pub standardize: StandardizeMode,
    pub min_count: usize,
}

impl Default for DaConfig {
    fn default() -> Self {
        DaConfig {
            standardize: StandardizeMode::Zscore,
            min_count: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinName {
    Bleu,
    Chrf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub builtin: Vec<BuiltinName>,
    pub tokenizer: Tokenizer,
    pub lowercase: bool,
    /// Smoothing spec: `none`, `add-<k>`, `add-<k>+uni` or `exp`.
    pub smoothing: String,
    pub aggregate: Aggregate,
    pub max_n: usize,
    pub char_n: usize,
    pub beta: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        let bleu = BleuConfig::default();
        let chrf = ChrfConfig::default();
        MetricsConfig {
            builtin: vec![BuiltinName::Bleu, BuiltinName::Chrf],
            tokenizer: Tokenizer::default(),
            lowercase: false,
            smoothing: bleu.smoothing.spec(),
            aggregate: Aggregate::default(),
            max_n: bleu.max_n,
            char_n: chrf.char_n,
            beta: chrf.beta,
        }
    }
}

impl MetricsConfig {
    pub fn scheme(&self) -> TokenizationScheme {
        TokenizationScheme::new(self.tokenizer, self.lowercase)
    }

    pub fn builtin_metrics(&self) -> Result<Vec<BuiltinMetric>> {
        let smoothing = Smoothing::parse(&self.smoothing)?;
        let mut out = Vec::new();
        for name in &self.builtin {
            let m = match name {
                BuiltinName::Bleu => BuiltinMetric::bleu(BleuConfig {
                    max_n: self.max_n,
                    smoothing,
                    ..BleuConfig::default()
                }),
                BuiltinName::Chrf => BuiltinMetric::chrf(ChrfConfig {
                    char_n: self.char_n,
                    beta: self.beta,
                    ..ChrfConfig::default()
                }),
            };
            m.config.validate()?;
            out.push(m);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub alpha: f64,
    pub sidedness: Sidedness,
    pub bonferroni: bool,
    pub coefficients: Vec<CoefficientKind>,
    /// Failure cases reported per direction.
    pub k: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            alpha: 0.05,
            sidedness: Sidedness::One,
            bonferroni: false,
            coefficients: vec![
                CoefficientKind::Pearson,
                CoefficientKind::Spearman,
                CoefficientKind::Kendall,
            ],
            k: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessorSimSection {
    pub i_values: Vec<usize>,
    pub n_total: usize,
    pub target_r: f64,
}

impl StudyConfig {
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: StudyConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, base)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> Option<PathBuf> {
        self.output_dir.as_deref().map(|p| self.resolve(p))
    }

    fn referenced_paths(&self) -> Vec<&Path> {
        let p = &self.paths;
        let mut v: Vec<&Path> = vec![&p.source, &p.outputs_dir, &p.judgments];
        v.extend(p.references.iter().map(PathBuf::as_path));
        v.extend(p.external_scores.iter().map(PathBuf::as_path));
        v.extend(p.metadata.as_deref());
        v
    }

    /// Checks ranges and that every referenced path exists.
    pub fn validate(&self) -> Result<()> {
        let a = &self.analysis;
        if !(a.alpha > 0.0 && a.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", a.alpha)));
        }
        if a.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if a.coefficients.is_empty() {
            return Err(Error::Config("at least one coefficient kind is required".into()));
        }
        if self.paths.references.is_empty() {
            return Err(Error::Config("at least one reference file is required".into()));
        }
        self.metrics.builtin_metrics().map_err(|e| Error::Config(e.to_string()))?;
        for p in self.referenced_paths() {
            if !self.resolve(p).exists() {
                return Err(Error::Config(format!("path does not exist: {}", p.display())));
            }
        }
        if let Some(sim) = &self.assessor_sim {
            self.sim_config(sim)
                .validate()
                .map_err(|e| Error::Config(format!("assessor_sim: {e}")))?;
        }
        Ok(())
    }

    fn sim_config(&self, sim: &AssessorSimSection) -> AssessorSimConfig {
        AssessorSimConfig {
            i_values: sim.i_values.clone(),
            n_total: sim.n_total,
            target_r: sim.target_r,
            shuffle_seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroTestRow {
    pub metric: String,
    pub n: usize,
    pub r: f64,
    pub t: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub matrix: SignificanceMatrix,
    pub winners: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDistribution {
    pub metric: String,
    pub bins: Vec<BinSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricFailures {
    pub metric: String,
    pub cases: Vec<FailureCase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricGroups {
    pub metric: String,
    pub groups: Vec<GroupCorrelation>,
}

/// Everything a study produced, plus the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub config: StudyConfig,
    pub seed: u64,
    pub language_pair: String,
    pub standardization: StandardizeMode,
    /// Provenance per metric: built-in signature with aggregate, or the
    /// external file.
    pub signatures: BTreeMap<String, String>,
    pub findings: Vec<Finding>,
    pub workers: Vec<WorkerStats>,
    pub segment_da: Vec<SegmentDa>,
    pub system_da: Vec<SystemDa>,
    pub segment_scores: Vec<SegmentScoreRow>,
    pub system_scores: Vec<SystemScoreRow>,
    pub correlations: Vec<CorrelationResult>,
    pub zero_tests: Vec<ZeroTestRow>,
    pub significance: Option<SignificanceReport>,
    pub bins: Option<BinAssignment>,
    pub distributions: Vec<MetricDistribution>,
    pub failures: Vec<MetricFailures>,
    pub groups: Vec<MetricGroups>,
    pub agreement: Vec<AgreementReport>,
    pub assessor_curve: Option<AssessorCurve>,
}

impl ReportBundle {
    /// A bundle with every table empty.
    pub fn empty(config: StudyConfig) -> Self {
        ReportBundle {
            seed: config.seed,
            language_pair: config.language_pair.clone(),
            standardization: config.da.standardize,
            config,
            signatures: BTreeMap::new(),
            findings: Vec::new(),
            workers: Vec::new(),
            segment_da: Vec::new(),
            system_da: Vec::new(),
            segment_scores: Vec::new(),
            system_scores: Vec::new(),
            correlations: Vec::new(),
            zero_tests: Vec::new(),
            significance: None,
            bins: None,
            distributions: Vec::new(),
            failures: Vec::new(),
            groups: Vec::new(),
            agreement: Vec::new(),
            assessor_curve: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("bundle", e.to_string()))
    }
}

fn skip(stage: &str, what: &str, e: &Error) -> Finding {
    Finding::warning(stage, format!("{what} skipped: {e}"))
}

/// Loads the test set, the system outputs and (if configured) metadata.
pub fn load_corpus(config: &StudyConfig) -> Result<EvaluationCorpus> {
    let p = &config.paths;
    let refs: Vec<PathBuf> = p.references.iter().map(|r| config.resolve(r)).collect();
    let test_set = load_testset(config.resolve(&p.source), &refs, &config.language_pair)?;
    let outputs = load_outputs_dir(config.resolve(&p.outputs_dir), &test_set)?;
    let mut corpus = EvaluationCorpus::new(test_set, outputs)?;
    if let Some(meta) = &p.metadata {
        corpus = corpus.attach_system_metadata(load_metadata_csv(config.resolve(meta))?)?;
    }
    Ok(corpus)
}

pub fn run_study(config: &StudyConfig) -> Result<ReportBundle> {
    config.validate()?;
    let mut bundle = ReportBundle::empty(config.clone());
    let findings = &mut bundle.findings;

    let corpus = load_corpus(config)?;
    findings.extend(validate_corpus(&corpus, &DesignPolicy::default()));

    let raw = load_judgments_csv(config.resolve(&config.paths.judgments))?;
    for j in &raw {
        if corpus.output(&j.system_id).is_none() {
            return Err(Error::UnknownSystem(j.system_id.clone()));
        }
        if j.segment_id.0 >= corpus.test_set().len() {
            return Err(Error::parse(
                config.paths.judgments.display().to_string(),
                format!("segment {} out of range", j.segment_id),
            ));
        }
    }
    let standardized = standardize_judgments(&raw, config.da.standardize);
    findings.extend(standardized.findings.iter().cloned());
    let (seg_das, seg_findings) = segment_da(&standardized.judgments, config.da.min_count);
    findings.extend(seg_findings);
    let sys_das = system_da(&seg_das);

    if let Some(sim) = &config.assessor_sim {
        match simulate_assessor_count(&raw, &config.sim_config(sim)) {
            Ok(curve) => bundle.assessor_curve = Some(curve),
            Err(e) => findings.push(skip("simulate-n", "assessor-count simulation", &e)),
        }
    }

    let scheme = config.metrics.scheme();
    let builtin = config.metrics.builtin_metrics()?;
    let (mut table, score_findings) =
        score_systems(&corpus, &builtin, &scheme, config.metrics.aggregate)?;
    findings.extend(score_findings);
    for path in &config.paths.external_scores {
        let resolved = config.resolve(path);
        let text = fs::read_to_string(&resolved).map_err(|e| Error::io(&resolved, e))?;
        let ext = external_scores_for_corpus(&text, &path.display().to_string(), &corpus)?;
        table.merge(ext)?;
    }
    if !config.paths.external_scores.is_empty() && !builtin.is_empty() {
        findings.push(Finding::warning(
            "score",
            "external scores carry no tokenization signature; confirm they used the same \
             preprocessing as the built-in metrics",
        ));
    }
    let metric_ids = table.metric_ids();

    run_correlations(config, &table, &metric_ids, &seg_das, &sys_das, &mut bundle);
    run_significance(config, &table, &metric_ids, &sys_das, &mut bundle);
    run_analyses(config, &corpus, &table, &metric_ids, &seg_das, &sys_das, &mut bundle);

    bundle.signatures = table
        .provenance()
        .iter()
        .map(|(k, v)| (k.clone(), v.describe()))
        .collect();
    bundle.workers = standardized.workers;
    bundle.segment_da = seg_das;
    bundle.system_da = sys_das;
    bundle.segment_scores = table.segment_rows();
    bundle.system_scores = table.system_rows();
    Ok(bundle)
}

fn run_correlations(
    config: &StudyConfig,
    table: &MetricScoreTable,
    metric_ids: &[String],
    seg_das: &[SegmentDa],
    sys_das: &[SystemDa],
    bundle: &mut ReportBundle,
) {
    let all = ScopeFilter::all();
    for metric in metric_ids {
        for &kind in &config.analysis.coefficients {
            if !table.segment_scores_for(metric).is_empty() {
                match segment_correlation(table, seg_das, metric, kind, &all) {
                    Ok(r) => bundle.correlations.push(r),
                    Err(e) => bundle.findings.push(skip(
                        "correlate",
                        &format!("segment-level {} for `{metric}`", kind.as_str()),
                        &e,
                    )),
                }
            }
            match system_correlation(table, sys_das, metric, kind, &all) {
                Ok((r, f)) => {
                    if kind == CoefficientKind::Pearson {
                        match pearson_zero_test(r.value, r.n) {
                            Ok(t) => bundle.zero_tests.push(ZeroTestRow {
                                metric: metric.clone(),
                                n: r.n,
                                r: r.value,
                                t: t.statistic,
                                p_value: t.p_value,
                            }),
                            Err(e) => bundle.findings.push(skip(
                                "signif",
                                &format!("r = 0 test for `{metric}`"),
                                &e,
                            )),
                        }
                    }
                    bundle.correlations.push(r);
                    // The small-sample warning is the same for every kind.
                    if kind == config.analysis.coefficients[0] {
                        bundle.findings.extend(f);
                    }
                }
                Err(e) => bundle.findings.push(skip(
                    "correlate",
                    &format!("system-level {} for `{metric}`", kind.as_str()),
                    &e,
                )),
            }
        }
    }
}

fn run_significance(
    config: &StudyConfig,
    table: &MetricScoreTable,
    metric_ids: &[String],
    sys_das: &[SystemDa],
    bundle: &mut ReportBundle,
) {
    let da: Vec<f64> = sys_das.iter().map(|d| d.da_score).collect();
    let mut columns = Vec::new();
    for metric in metric_ids {
        let scores = table.system_scores_for(metric);
        let v: Option<Vec<f64>> = sys_das
            .iter()
            .map(|d| scores.get(&d.system_id).copied())
            .collect();
        match v {
            Some(v) if v.windows(2).any(|w| w[0] != w[1]) => columns.push((metric.clone(), v)),
            Some(_) => bundle.findings.push(Finding::warning(
                "signif",
                format!("`{metric}` excluded from the significance matrix: constant system scores"),
            )),
            None => bundle.findings.push(Finding::warning(
                "signif",
                format!("`{metric}` excluded from the significance matrix: not every DA-scored system has a score"),
            )),
        }
    }
    let options = MatrixOptions {
        alpha: config.analysis.alpha,
        sidedness: config.analysis.sidedness,
        bonferroni: config.analysis.bonferroni,
    };
    if columns.is_empty() {
        bundle
            .findings
            .push(Finding::warning("signif", "significance matrix skipped: no eligible metric"));
        return;
    }
    match significance_matrix(&columns, &da, &options) {
        Ok(matrix) => {
            let winners = winner_set(&matrix);
            bundle.significance = Some(SignificanceReport { matrix, winners });
        }
        Err(e) => bundle.findings.push(skip("signif", "significance matrix", &e)),
    }
}

fn run_analyses(
    config: &StudyConfig,
    corpus: &EvaluationCorpus,
    table: &MetricScoreTable,
    metric_ids: &[String],
    seg_das: &[SegmentDa],
    sys_das: &[SystemDa],
    bundle: &mut ReportBundle,
) {
    let bins = match tertile_bins(seg_das) {
        Ok(b) => Some(b),
        Err(e) => {
            bundle.findings.push(skip("bins", "tertile binning", &e));
            None
        }
    };
    let segment_metrics: BTreeSet<&String> = metric_ids
        .iter()
        .filter(|m| !table.segment_scores_for(m).is_empty())
        .collect();
    if let Some(bins) = &bins {
        for metric in &segment_metrics {
            match conditional_distribution(table, metric, bins) {
                Ok(d) => bundle.distributions.push(MetricDistribution {
                    metric: metric.to_string(),
                    bins: d.to_vec(),
                }),
                Err(e) => {
                    bundle.findings.push(skip("bins", &format!("distribution for `{metric}`"), &e));
                    continue;
                }
            }
            match failure_cases(corpus, table, metric, bins, config.analysis.k) {
                Ok((cases, f)) => {
                    bundle.findings.extend(f);
                    bundle.failures.push(MetricFailures {
                        metric: metric.to_string(),
                        cases,
                    });
                }
                Err(e) => bundle.findings.push(skip("failures", &format!("failure cases for `{metric}`"), &e)),
            }
        }
    }

    bundle.bins = bins;

    if corpus.meta().is_empty() {
        bundle.findings.push(Finding::warning(
            "groups",
            "grouped correlation skipped: no metadata",
        ));
    } else {
        for metric in metric_ids {
            let mut groups = Vec::new();
            for by in [GroupBy::SystemType, GroupBy::Track] {
                for &kind in &config.analysis.coefficients {
                    match grouped_correlation(sys_das, table, metric, corpus.meta(), by, kind) {
                        Ok(g) => groups.extend(g),
                        Err(e) => bundle.findings.push(skip(
                            "groups",
                            &format!("grouped correlation for `{metric}`"),
                            &e,
                        )),
                    }
                }
            }
            bundle.groups.push(MetricGroups {
                metric: metric.clone(),
                groups,
            });
        }
    }

    for metric in metric_ids {
        if align_system_points(table, sys_das, metric, &ScopeFilter::all()).metric.len() < 3 {
            bundle.findings.push(Finding::warning(
                "agreement",
                format!("agreement report for `{metric}` skipped: fewer than 3 systems"),
            ));
            continue;
        }
        match kendall_agreement_report(sys_das, table, metric) {
            Ok(r) => bundle.agreement.push(r),
            Err(e) => bundle.findings.push(skip("agreement", &format!("agreement report for `{metric}`"), &e)),
        }
    }
}
