//! Writes a [`ReportBundle`] to disk as JSON, a directory of CSV tables, or
//! a plain-text summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{bins_csv, groups_csv, render_failure_cases};
use crate::correlation::correlation_csv;
use crate::judgments::segment_da_tsv;
use crate::metrics::MetricScoreTable;
use crate::study::ReportBundle;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    CsvDir,
    Text,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv-dir" => Ok(Format::CsvDir),
            "text" => Ok(Format::Text),
            other => Err(Error::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub rows: usize,
}

/// Lists the files of a csv-dir emission with the provenance shared by all
/// of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub language_pair: String,
    pub standardization: String,
    pub signatures: std::collections::BTreeMap<String, String>,
    pub files: Vec<ManifestEntry>,
}

/// Writes the bundle under `out_dir` and returns the files written.
pub fn emit_report(bundle: &ReportBundle, format: Format, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    match format {
        Format::Json => {
            let path = out_dir.join("bundle.json");
            write(&path, &bundle.to_json())?;
            Ok(vec![path])
        }
        Format::Text => {
            let path = out_dir.join("report.txt");
            write(&path, &render_text(bundle))?;
            Ok(vec![path])
        }
        Format::CsvDir => emit_csv_dir(bundle, out_dir),
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn csv_table<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

fn safe_name(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn emit_csv_dir(b: &ReportBundle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(String, String)> = Vec::new();
    files.push((
        "workers.csv".into(),
        csv_table(
            &["worker_id", "count", "mean", "sd", "retained"],
            b.workers.iter().map(|w| {
                vec![
                    w.worker_id.clone(),
                    w.count.to_string(),
                    w.mean.to_string(),
                    w.sd.to_string(),
                    w.retained.to_string(),
                ]
            }),
        ),
    ));
    files.push(("segment_da.tsv".into(), segment_da_tsv(&b.segment_da)));
    files.push((
        "system_da.csv".into(),
        csv_table(
            &["system_id", "da", "segment_count"],
            b.system_da
                .iter()
                .map(|d| vec![d.system_id.clone(), d.da_score.to_string(), d.segment_count.to_string()]),
        ),
    ));
    files.push((
        "segment_scores.csv".into(),
        csv_table(
            &["metric", "system_id", "segment_id", "score"],
            b.segment_scores.iter().map(|r| {
                vec![r.metric.clone(), r.system_id.clone(), r.segment_id.to_string(), r.score.to_string()]
            }),
        ),
    ));
    files.push((
        "system_scores.csv".into(),
        csv_table(
            &["metric", "system_id", "score"],
            b.system_scores
                .iter()
                .map(|r| vec![r.metric.clone(), r.system_id.clone(), r.score.to_string()]),
        ),
    ));
    files.push(("correlations.csv".into(), correlation_csv(&b.correlations)));
    files.push((
        "zero_tests.csv".into(),
        csv_table(
            &["metric", "n", "r", "t", "p_value"],
            b.zero_tests.iter().map(|z| {
                vec![z.metric.clone(), z.n.to_string(), z.r.to_string(), z.t.to_string(), z.p_value.to_string()]
            }),
        ),
    ));
    if let Some(sig) = &b.significance {
        files.push(("significance.csv".into(), sig.matrix.to_csv()));
    }
    files.push((
        "winners.csv".into(),
        csv_table(
            &["metric"],
            b.significance
                .iter()
                .flat_map(|s| s.winners.iter().map(|w| vec![w.clone()])),
        ),
    ));
    if let Some(bins) = &b.bins {
        let table = MetricScoreTable::from_rows(&b.segment_scores, &[], Default::default())?;
        for d in &b.distributions {
            files.push((format!("bins_{}.csv", safe_name(&d.metric)), bins_csv(&table, &d.metric, bins)));
        }
    }
    files.push((
        "distributions.csv".into(),
        csv_table(
            &["metric", "bin", "count", "mean", "q1", "median", "q3", "min", "max"],
            b.distributions.iter().flat_map(|d| {
                d.bins.iter().map(move |s| {
                    vec![
                        d.metric.clone(),
                        s.label.to_string(),
                        s.count.to_string(),
                        s.mean.to_string(),
                        s.q1.to_string(),
                        s.median.to_string(),
                        s.q3.to_string(),
                        s.min.to_string(),
                        s.max.to_string(),
                    ]
                })
            }),
        ),
    ));
    files.push((
        "failures.csv".into(),
        csv_table(
            &["metric", "direction", "rank", "system_id", "segment_id", "da", "metric_score", "source", "references", "hypothesis"],
            b.failures.iter().flat_map(|f| {
                f.cases.iter().map(move |c| {
                    vec![
                        f.metric.clone(),
                        serde_json::to_value(c.direction)
                            .ok()
                            .and_then(|v| v.as_str().map(str::to_string))
                            .unwrap_or_default(),
                        c.rank.to_string(),
                        c.system_id.clone(),
                        c.segment_id.to_string(),
                        c.da_score.to_string(),
                        c.metric_score.to_string(),
                        c.source.clone(),
                        c.references.join(" ||| "),
                        c.hypothesis.clone(),
                    ]
                })
            }),
        ),
    ));
    let mut groups = String::new();
    for (i, g) in b.groups.iter().enumerate() {
        let body = groups_csv(&g.groups);
        let mut lines = body.lines();
        let header = lines.next().unwrap_or_default();
        if i == 0 {
            let _ = writeln!(groups, "metric,group_by,{header}");
        }
        for (line, entry) in lines.zip(&g.groups) {
            let _ = writeln!(groups, "{},{},{line}", g.metric, entry.group_by.as_str());
        }
    }
    if groups.is_empty() {
        groups = "metric,group_by,group,kind,n_systems,value,flag\n".into();
    }
    files.push(("groups.csv".into(), groups));
    files.push((
        "agreement.csv".into(),
        csv_table(
            &["metric", "n_systems", "tau", "concordant", "discordant", "interpretation"],
            b.agreement.iter().map(|a| {
                vec![
                    a.metric.clone(),
                    a.n_systems.to_string(),
                    a.tau.to_string(),
                    a.concordant.to_string(),
                    a.discordant.to_string(),
                    a.interpretation.clone(),
                ]
            }),
        ),
    ));
    if let Some(curve) = &b.assessor_curve {
        files.push((
            "assessor_curve.csv".into(),
            csv_table(&["i", "r"], curve.points.iter().map(|p| vec![p.i.to_string(), p.r.to_string()])),
        ));
    }
    files.push((
        "findings.csv".into(),
        csv_table(
            &["severity", "stage", "message"],
            b.findings
                .iter()
                .map(|f| vec![f.severity.to_string(), f.stage.clone(), f.message.clone()]),
        ),
    ));

    let mut written = Vec::with_capacity(files.len() + 1);
    let mut entries = Vec::with_capacity(files.len());
    for (name, body) in &files {
        let path = out_dir.join(name);
        write(&path, body)?;
        entries.push(ManifestEntry {
            file: name.clone(),
            rows: body
                .lines()
                .filter(|l| !l.starts_with('#'))
                .count()
                .saturating_sub(1),
        });
        written.push(path);
    }
    let manifest = Manifest {
        seed: b.seed,
        language_pair: b.language_pair.clone(),
        standardization: b.standardization.as_str().to_string(),
        signatures: b.signatures.clone(),
        files: entries,
    };
    let path = out_dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write(&path, &text)?;
    written.push(path);
    Ok(written)
}

/// Human-readable summary including the significance grid.
pub fn render_text(b: &ReportBundle) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Metric validation study: {}", b.language_pair);
    let _ = writeln!(out, "seed {}  standardization {}", b.seed, b.standardization.as_str());
    let _ = writeln!(
        out,
        "{} systems, {} DA-scored segments, {} workers",
        b.system_da.len(),
        b.segment_da.len(),
        b.workers.len()
    );
    out.push_str("\nMetrics\n");
    for (m, sig) in &b.signatures {
        let _ = writeln!(out, "  {m}: {sig}");
    }

    out.push_str("\nCorrelation with DA\n");
    for r in &b.correlations {
        let _ = writeln!(
            out,
            "  {:<12} {:<8} {:<8} n={:<5} {:>7.3}",
            r.metric,
            r.level.as_str(),
            r.kind.as_str(),
            r.n,
            r.value
        );
    }
    if !b.zero_tests.is_empty() {
        out.push_str("\nr = 0 test (system level, two-sided)\n");
        for z in &b.zero_tests {
            let _ = writeln!(out, "  {:<12} r={:.3} n={} p={:.4}", z.metric, z.r, z.n, z.p_value);
        }
    }

    out.push_str("\nWilliams significance (row beats column)\n");
    match &b.significance {
        Some(s) => {
            out.push_str(&s.matrix.render_grid());
            let _ = writeln!(out, "winners at alpha {}: {}", s.matrix.threshold(), s.winners.join(", "));
        }
        None => out.push_str("  not computed\n"),
    }

    if let Some(bins) = &b.bins {
        let _ = writeln!(
            out,
            "\nDA bins: bad [{:.3}, {:.3}]  average ({:.3}, {:.3}]  good ({:.3}, {:.3}]",
            bins.min, bins.boundaries[0], bins.boundaries[0], bins.boundaries[1], bins.boundaries[1], bins.max
        );
    }
    for d in &b.distributions {
        let _ = writeln!(out, "  {}", d.metric);
        for s in &d.bins {
            let _ = writeln!(
                out,
                "    {:<8} n={:<5} mean={:.3} q1={:.3} median={:.3} q3={:.3}",
                s.label.as_str(),
                s.count,
                s.mean,
                s.q1,
                s.median,
                s.q3
            );
        }
    }
    for f in &b.failures {
        let _ = writeln!(out, "\nFailure cases: {}", f.metric);
        out.push_str(&render_failure_cases(&f.cases, &f.metric));
    }
    for g in &b.groups {
        let _ = writeln!(out, "\nGrouped correlation: {}", g.metric);
        for e in &g.groups {
            let value = e
                .result
                .as_ref()
                .map(|r| format!("{:.3}", r.value))
                .unwrap_or_else(|| e.flag.clone().unwrap_or_default());
            let _ = writeln!(
                out,
                "  {}={:<12} {:<8} n={:<3} {value}",
                e.group_by.as_str(),
                e.group,
                e.kind.as_str(),
                e.n_systems
            );
        }
    }
    if !b.agreement.is_empty() {
        out.push_str("\nKendall agreement\n");
        for a in &b.agreement {
            let _ = writeln!(out, "  {}: tau={:.3}; {}", a.metric, a.tau, a.interpretation);
        }
        let _ = writeln!(out, "  note: {}", b.agreement[0].note);
    }
    if let Some(c) = &b.assessor_curve {
        out.push_str("\nAssessor-count simulation\n");
        for p in &c.points {
            let _ = writeln!(out, "  i={:<3} r={:.4}", p.i, p.r);
        }
        match c.recommended_i {
            Some(i) => {
                let _ = writeln!(out, "  recommended i: {i}");
            }
            None => out.push_str("  target r not reached\n"),
        }
    }
    if !b.findings.is_empty() {
        out.push_str("\nFindings\n");
        for f in &b.findings {
            let _ = writeln!(out, "  {f}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::study::StudyConfig;

    fn empty_bundle() -> ReportBundle {
        let cfg = StudyConfig::from_toml_str(
            "language_pair = \"x\"\n[paths]\nsource=\"a\"\nreferences=[\"r\"]\noutputs_dir=\"b\"\njudgments=\"c\"\n",
            ".",
        )
        .unwrap();
        ReportBundle::empty(cfg)
    }

    #[test]
    fn csv_dir_manifest_lists_every_file() {
        let dir = tempfile::tempdir().unwrap();
        let written = emit_report(&empty_bundle(), Format::CsvDir, dir.path()).unwrap();
        let manifest: Manifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        let mut on_disk: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .filter(|n| n != "manifest.json")
            .collect();
        on_disk.sort();
        let mut listed: Vec<String> = manifest.files.iter().map(|f| f.file.clone()).collect();
        listed.sort();
        assert_eq!(on_disk, listed);
        assert_eq!(written.len(), listed.len() + 1);
        assert!(manifest.files.iter().all(|f| f.rows == 0));
    }

    #[test]
    fn json_and_text_on_empty_bundle() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(&empty_bundle(), Format::Json, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("bundle.json")).unwrap();
        assert!(ReportBundle::from_json(&text).is_ok());
        emit_report(&empty_bundle(), Format::Text, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("report.txt")).unwrap();
        assert!(text.contains("not computed"));
    }

    #[test]
    fn unwritable_path_errors() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        fs::write(&file, "x").unwrap();
        let err = emit_report(&empty_bundle(), Format::Json, &file.join("sub")).unwrap_err();
        assert_eq!(err.kind(), "io");
    }
}
