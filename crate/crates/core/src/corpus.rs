//! Test sets, aligned system outputs and system metadata.
//!
//! Everything is line-aligned plain text: segment `i` of the test set is line
//! `i` of the source file, of every reference file and of every system output
//! file. No normalization happens at load time, so loading and writing back
//! reproduces the input bytes (modulo a trailing newline).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Finding, Result};

/// 0-based line position of a segment in the test set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SegmentId(pub usize);

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub source: String,
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSet {
    pub language_pair: String,
    segments: Vec<Segment>,
}

impl TestSet {
    /// Builds a test set from in-memory segments.
    pub fn new(language_pair: impl Into<String>, segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidArgument("test set has no segments".into()));
        }
        if let Some(i) = segments.iter().position(|s| s.references.is_empty()) {
            return Err(Error::InvalidArgument(format!("segment {i} has no reference")));
        }
        Ok(TestSet {
            language_pair: language_pair.into(),
            segments,
        })
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, id: SegmentId) -> Option<&Segment> {
        self.segments.get(id.0)
    }

    pub fn segment_ids(&self) -> impl Iterator<Item = SegmentId> {
        (0..self.segments.len()).map(SegmentId)
    }

    pub fn reference_count(&self) -> usize {
        self.segments[0].references.len()
    }

    /// Source side as file content.
    pub fn source_text(&self) -> String {
        join_lines(self.segments.iter().map(|s| s.source.as_str()))
    }

    /// The `k`-th reference stream as file content.
    pub fn reference_text(&self, k: usize) -> Option<String> {
        if k >= self.reference_count() {
            return None;
        }
        Some(join_lines(self.segments.iter().map(|s| s.references[k].as_str())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemOutput {
    pub system_id: String,
    pub hypotheses: Vec<String>,
}

impl SystemOutput {
    pub fn hypothesis(&self, id: SegmentId) -> Option<&str> {
        self.hypotheses.get(id.0).map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        join_lines(self.hypotheses.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemMeta {
    pub system_id: String,
    pub system_type: String,
    pub track: String,
}

/// A test set together with every system's aligned output.
///
/// Constructed once and never mutated; metadata attachment consumes the
/// corpus and returns a new one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationCorpus {
    test_set: TestSet,
    outputs: BTreeMap<String, SystemOutput>,
    meta: BTreeMap<String, SystemMeta>,
}

impl EvaluationCorpus {
    pub fn new(test_set: TestSet, outputs: Vec<SystemOutput>) -> Result<Self> {
        if outputs.is_empty() {
            return Err(Error::InvalidArgument("corpus needs at least one system".into()));
        }
        let mut map = BTreeMap::new();
        for out in outputs {
            if out.hypotheses.len() != test_set.len() {
                return Err(Error::Alignment {
                    file: PathBuf::from(&out.system_id),
                    expected: test_set.len(),
                    got: out.hypotheses.len(),
                });
            }
            if map.contains_key(&out.system_id) {
                return Err(Error::DuplicateSystem(out.system_id));
            }
            map.insert(out.system_id.clone(), out);
        }
        Ok(EvaluationCorpus {
            test_set,
            outputs: map,
            meta: BTreeMap::new(),
        })
    }

    pub fn test_set(&self) -> &TestSet {
        &self.test_set
    }

    pub fn outputs(&self) -> &BTreeMap<String, SystemOutput> {
        &self.outputs
    }

    pub fn output(&self, system_id: &str) -> Option<&SystemOutput> {
        self.outputs.get(system_id)
    }

    pub fn system_ids(&self) -> impl Iterator<Item = &str> {
        self.outputs.keys().map(String::as_str)
    }

    pub fn system_count(&self) -> usize {
        self.outputs.len()
    }

    pub fn meta(&self) -> &BTreeMap<String, SystemMeta> {
        &self.meta
    }

    pub fn hypothesis(&self, system_id: &str, id: SegmentId) -> Option<&str> {
        self.outputs.get(system_id)?.hypothesis(id)
    }

    /// Records metadata rows. Systems without a row keep absent metadata.
    pub fn attach_system_metadata(mut self, rows: Vec<SystemMeta>) -> Result<Self> {
        for row in &rows {
            if !self.outputs.contains_key(&row.system_id) {
                return Err(Error::UnknownSystem(row.system_id.clone()));
            }
        }
        for row in rows {
            self.meta.insert(row.system_id.clone(), row);
        }
        Ok(self)
    }
}

/// Study-design thresholds checked by [`validate_corpus`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPolicy {
    pub min_systems: usize,
    pub require_type_diversity: bool,
}

impl Default for DesignPolicy {
    fn default() -> Self {
        DesignPolicy {
            min_systems: 5,
            require_type_diversity: true,
        }
    }
}

pub fn validate_corpus(corpus: &EvaluationCorpus, policy: &DesignPolicy) -> Vec<Finding> {
    let mut findings = Vec::new();
    let n = corpus.system_count();
    if n < policy.min_systems {
        findings.push(Finding::warning(
            "validate",
            format!(
                "{n} systems < {}; system-level Pearson cannot reach p<0.05",
                policy.min_systems
            ),
        ));
    }
    if policy.require_type_diversity && !corpus.meta.is_empty() {
        let types: BTreeSet<&str> = corpus
            .meta
            .values()
            .map(|m| m.system_type.as_str())
            .collect();
        if types.len() == 1 {
            let only = types.into_iter().next().unwrap_or_default();
            findings.push(Finding::warning(
                "validate",
                format!(
                    "single system_type `{only}` across all systems; include a mix of approaches"
                ),
            ));
        }
    }
    findings
}

pub fn load_testset(
    source_path: impl AsRef<Path>,
    reference_paths: &[PathBuf],
    language_pair: &str,
) -> Result<TestSet> {
    let source_path = source_path.as_ref();
    if reference_paths.is_empty() {
        return Err(Error::InvalidArgument("at least one reference file is required".into()));
    }
    let sources = read_lines(source_path)?;
    let mut references: Vec<Vec<String>> = vec![Vec::new(); sources.len()];
    for path in reference_paths {
        let lines = read_lines(path)?;
        if lines.len() != sources.len() {
            return Err(Error::Alignment {
                file: path.clone(),
                expected: sources.len(),
                got: lines.len(),
            });
        }
        for (refs, line) in references.iter_mut().zip(lines) {
            refs.push(line);
        }
    }
    let segments = sources
        .into_iter()
        .zip(references)
        .map(|(source, references)| Segment { source, references })
        .collect();
    TestSet::new(language_pair, segments)
}

pub fn load_system_outputs(
    path: impl AsRef<Path>,
    system_id: &str,
    test_set: &TestSet,
) -> Result<SystemOutput> {
    let path = path.as_ref();
    let hypotheses = read_lines(path)?;
    if hypotheses.len() != test_set.len() {
        return Err(Error::Alignment {
            file: path.to_path_buf(),
            expected: test_set.len(),
            got: hypotheses.len(),
        });
    }
    Ok(SystemOutput {
        system_id: system_id.to_string(),
        hypotheses,
    })
}

/// Loads every regular file in `dir` as a system output, taking the system id
/// from the file stem. Files are visited in name order.
pub fn load_outputs_dir(dir: impl AsRef<Path>, test_set: &TestSet) -> Result<Vec<SystemOutput>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| !n.starts_with('.'))
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let stem = system_id_from_path(p)?;
            load_system_outputs(p, &stem, test_set)
        })
        .collect()
}

pub fn system_id_from_path(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| Error::InvalidArgument(format!("cannot derive system id from {}", path.display())))
}

/// Reads a metadata CSV with header `system_id,system_type,track`.
pub fn load_metadata_csv(path: impl AsRef<Path>) -> Result<Vec<SystemMeta>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metadata_csv(&text, &path.display().to_string())
}

pub fn parse_metadata_csv(text: &str, origin: &str) -> Result<Vec<SystemMeta>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(origin, e.to_string()))?
        .clone();
    let expected = ["system_id", "system_type", "track"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::parse(
            origin,
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(format!("{origin}:{}", i + 2), e.to_string()))?;
        rows.push(SystemMeta {
            system_id: record[0].to_string(),
            system_type: record[1].to_string(),
            track: record[2].to_string(),
        });
    }
    Ok(rows)
}

/// Splits file content into lines. A single trailing newline does not start
/// a new line.
pub fn split_lines(text: &str) -> Vec<String> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    body.split('\n').map(str::to_string).collect()
}

pub fn join_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for line in lines {
        out.push_str(line);
        out.push('\n');
    }
    out
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let text = String::from_utf8(bytes)
        .map_err(|e| Error::parse(path.display().to_string(), format!("invalid UTF-8: {e}")))?;
    Ok(split_lines(&text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
        let p = dir.join(name);
        let mut f = fs::File::create(&p).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        p
    }

    fn figure1_dir() -> (tempfile::TempDir, PathBuf, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let src = write(
            dir.path(),
            "src.zh",
            "双方很难，甚至不可能重新建立真正的信任。\n如何在持枪攻击中使用马伽术保护自己\n",
        );
        let rf = write(
            dir.path(),
            "ref.en",
            "rebuilding real trust will be hard , perhaps impossible .\nhow to defend yourself from gun attacks using krav ...\n",
        );
        (dir, src, rf)
    }

    #[test]
    fn three_line_testset() {
        let dir = tempfile::tempdir().unwrap();
        let src = write(dir.path(), "s", "a\nb\nc\n");
        let rf = write(dir.path(), "r", "x\ny\nz\n");
        let ts = load_testset(&src, &[rf], "de-en").unwrap();
        assert_eq!(ts.len(), 3);
        assert!(ts.segments().iter().all(|s| s.references.len() == 1));
        assert_eq!(ts.segments()[2].references[0], "z");
    }

    #[test]
    fn reference_line_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let src = write(dir.path(), "s", "a\nb\nc\n");
        let rf = write(dir.path(), "r", "x\ny\nz\nw\n");
        let err = load_testset(&src, &[rf], "de-en").unwrap_err();
        assert!(matches!(err, Error::Alignment { expected: 3, got: 4, .. }));
        assert!(err.to_string().contains("expected 3, got 4"), "{err}");
    }

    #[test]
    fn empty_source_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let src = write(dir.path(), "s", "");
        let rf = write(dir.path(), "r", "x\n");
        assert!(matches!(
            load_testset(&src, &[rf], "de-en"),
            Err(Error::EmptyFile(_))
        ));
    }

    #[test]
    fn figure1_fixture() {
        let (dir, src, rf) = figure1_dir();
        let ts = load_testset(&src, &[rf], "zh-en").unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(
            ts.segment(SegmentId(0)).unwrap().references[0],
            "rebuilding real trust will be hard , perhaps impossible ."
        );
        let out = write(
            dir.path(),
            "uedin-nmt.txt",
            "it is difficult , if not impossible , to re-establish real trust .\nhow to use marcella to protect himself in a gun attack\n",
        );
        let sys = load_system_outputs(&out, "uedin-nmt", &ts).unwrap();
        assert_eq!(sys.hypotheses.len(), 2);
        assert_eq!(
            sys.hypothesis(SegmentId(0)).unwrap(),
            "it is difficult , if not impossible , to re-establish real trust ."
        );
    }

    #[test]
    fn short_output_rejected() {
        let (dir, src, rf) = figure1_dir();
        let ts = load_testset(&src, &[rf], "zh-en").unwrap();
        let out = write(dir.path(), "short.txt", "only one line\n");
        assert!(matches!(
            load_system_outputs(&out, "short", &ts),
            Err(Error::Alignment { expected: 2, got: 1, .. })
        ));
    }

    #[test]
    fn outputs_dir_uses_file_stems() {
        let (dir, src, rf) = figure1_dir();
        let ts = load_testset(&src, &[rf], "zh-en").unwrap();
        let outdir = dir.path().join("outputs");
        fs::create_dir(&outdir).unwrap();
        write(&outdir, "b-sys.txt", "1\n2\n");
        write(&outdir, "a-sys.txt", "1\n2\n");
        let outs = load_outputs_dir(&outdir, &ts).unwrap();
        let ids: Vec<_> = outs.iter().map(|o| o.system_id.as_str()).collect();
        assert_eq!(ids, ["a-sys", "b-sys"]);
    }

    fn corpus(ids: &[&str]) -> EvaluationCorpus {
        let ts = TestSet::new(
            "zh-en",
            vec![Segment {
                source: "s".into(),
                references: vec!["r".into()],
            }],
        )
        .unwrap();
        let outs = ids
            .iter()
            .map(|id| SystemOutput {
                system_id: id.to_string(),
                hypotheses: vec!["h".into()],
            })
            .collect();
        EvaluationCorpus::new(ts, outs).unwrap()
    }

    fn meta(id: &str, ty: &str) -> SystemMeta {
        SystemMeta {
            system_id: id.into(),
            system_type: ty.into(),
            track: "translation-task".into(),
        }
    }

    #[test]
    fn duplicate_system_rejected() {
        let ts = corpus(&["a"]).test_set().clone();
        let out = SystemOutput {
            system_id: "a".into(),
            hypotheses: vec!["h".into()],
        };
        assert!(matches!(
            EvaluationCorpus::new(ts, vec![out.clone(), out]),
            Err(Error::DuplicateSystem(_))
        ));
    }

    #[test]
    fn metadata_attach() {
        let c = corpus(&["uedin-nmt", "online-A"])
            .attach_system_metadata(vec![meta("uedin-nmt", "neural")])
            .unwrap();
        assert_eq!(c.meta()["uedin-nmt"].system_type, "neural");
        assert!(!c.meta().contains_key("online-A"));

        let unchanged = corpus(&["a"]).attach_system_metadata(vec![]).unwrap();
        assert_eq!(unchanged, corpus(&["a"]));

        let err = corpus(&["a"])
            .attach_system_metadata(vec![meta("ghost", "neural")])
            .unwrap_err();
        assert!(err.to_string().contains("ghost"));
    }

    #[test]
    fn validation_findings() {
        let policy = DesignPolicy::default();
        let four = corpus(&["a", "b", "c", "d"]);
        let f = validate_corpus(&four, &policy);
        assert_eq!(f.len(), 1);
        assert_eq!(
            f[0].message,
            "4 systems < 5; system-level Pearson cannot reach p<0.05"
        );

        let five = corpus(&["a", "b", "c", "d", "e"])
            .attach_system_metadata(vec![meta("a", "neural"), meta("b", "statistical")])
            .unwrap();
        assert!(validate_corpus(&five, &policy).is_empty());

        let mono = corpus(&["a", "b", "c", "d", "e"])
            .attach_system_metadata(
                ["a", "b", "c", "d", "e"]
                    .iter()
                    .map(|id| meta(id, "neural"))
                    .collect(),
            )
            .unwrap();
        let f = validate_corpus(&mono, &policy);
        assert_eq!(f.len(), 1);
        assert!(f[0].message.contains("single system_type"));
        assert_eq!(f, validate_corpus(&mono, &policy));
    }

    #[test]
    fn metadata_csv() {
        let rows = parse_metadata_csv(
            "system_id,system_type,track\nuedin-nmt,neural,translation-task\n",
            "meta.csv",
        )
        .unwrap();
        assert_eq!(rows, vec![meta("uedin-nmt", "neural")]);
        assert!(parse_metadata_csv("id,type\nx,y\n", "meta.csv").is_err());
    }
}
