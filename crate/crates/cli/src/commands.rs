use std::fs;
use std::path::Path;

use metval::analysis::{
    bins_csv, conditional_distribution, failure_cases, grouped_correlation, groups_csv,
    kendall_agreement_report, render_failure_cases, tertile_bins,
};
use metval::corpus::{
    load_metadata_csv, load_outputs_dir, load_testset, validate_corpus, DesignPolicy,
    EvaluationCorpus,
};
use metval::correlation::{
    correlation_csv, segment_correlation, system_correlation, Level, ScopeFilter,
};
use metval::judgments::{
    load_judgments_csv, load_segment_da_tsv, segment_da, segment_da_tsv, simulate_assessor_count,
    standardize_judgments, system_da, AssessorSimConfig, SegmentDa, SystemDa,
};
use metval::metrics::{
    load_score_tsv, score_systems, BleuConfig, BuiltinMetric, ChrfConfig,
    MetricScoreTable, Smoothing, TokenizationScheme,
};
use metval::report::{emit_report, render_text, Format};
use metval::significance::{significance_matrix, winner_set, MatrixOptions, Sidedness};
use metval::study::{run_study, BuiltinName, ReportBundle, StudyConfig};
use metval::{Error, Finding, Result};
use serde::Serialize;

use crate::{Command, CorpusArgs, OutputArgs, ScoredArgs, ScoringArgs};

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Validate { corpus, output } => validate(&corpus, &output),
        Command::Da {
            judgments,
            standardize,
            min_count,
            system,
            output,
        } => {
            let raw = load_judgments_csv(&judgments)?;
            let st = standardize_judgments(&raw, standardize);
            print_findings(&st.findings);
            let (das, findings) = segment_da(&st.judgments, min_count);
            print_findings(&findings);
            if system {
                let sys = system_da(&das);
                match text_or_json(&output)? {
                    Format::Json => print_json(&sys),
                    _ => {
                        println!("# standardization: {}", standardize.as_str());
                        for d in sys {
                            println!("{}\t{}\t{}", d.system_id, d.da_score, d.segment_count);
                        }
                    }
                }
            } else {
                match text_or_json(&output)? {
                    Format::Json => print_json(&das),
                    _ => {
                        println!("# standardization: {}", standardize.as_str());
                        print!("{}", segment_da_tsv(&das));
                    }
                }
            }
            Ok(())
        }
        Command::SimulateN {
            judgments,
            i_values,
            n_total,
            target_r,
            seed,
            output,
        } => {
            let raw = load_judgments_csv(&judgments)?;
            let cfg = AssessorSimConfig {
                i_values,
                n_total,
                target_r,
                shuffle_seed: seed,
            };
            let curve = simulate_assessor_count(&raw, &cfg)?;
            match text_or_json(&output)? {
                Format::Json => print_json(&curve),
                _ => {
                    println!("i\tr");
                    for p in &curve.points {
                        println!("{}\t{}", p.i, p.r);
                    }
                    match curve.recommended_i {
                        Some(i) => println!("# recommended i: {i}"),
                        None => println!("# target r {target_r} not reached"),
                    }
                }
            }
            Ok(())
        }
        Command::Score {
            corpus,
            scoring,
            output,
        } => {
            let c = load_corpus(&corpus)?;
            let metrics = builtin_metrics(&scoring)?;
            let scheme = TokenizationScheme::new(scoring.tokenizer.unwrap_or_default(), scoring.lowercase);
            let (table, findings) =
                score_systems(&c, &metrics, &scheme, scoring.aggregate.unwrap_or_default())?;
            print_findings(&findings);
            match text_or_json(&output)? {
                Format::Json => print_json(&serde_json::json!({
                    "provenance": table.provenance(),
                    "segment_scores": table.segment_rows(),
                    "system_scores": table.system_rows(),
                })),
                _ => print!("{}", table.to_tsv()),
            }
            Ok(())
        }
        Command::Correlate {
            input,
            level,
            coef,
            systems,
            metric,
            output,
        } => {
            let (table, seg) = load_scored(&input)?;
            let sys = system_da(&seg);
            let filter = if systems.is_empty() {
                ScopeFilter::all()
            } else {
                ScopeFilter::systems(&systems.join("+"), systems.iter().cloned())
            };
            let ids = match metric {
                Some(m) => vec![m],
                None => table.metric_ids(),
            };
            let mut results = Vec::new();
            for id in &ids {
                match level {
                    Level::Segment => results.push(segment_correlation(&table, &seg, id, coef, &filter)?),
                    Level::System => {
                        let (r, f) = system_correlation(&table, &sys, id, coef, &filter)?;
                        print_findings(&f);
                        results.push(r);
                    }
                }
            }
            match text_or_json(&output)? {
                Format::Json => print_json(&results),
                _ => print!("{}", correlation_csv(&results)),
            }
            Ok(())
        }
        Command::Signif {
            input,
            alpha,
            two_sided,
            bonferroni,
            output,
        } => {
            let (table, seg) = load_scored(&input)?;
            let sys = system_da(&seg);
            let columns = system_columns(&table, &sys);
            let da: Vec<f64> = sys.iter().map(|d| d.da_score).collect();
            let options = MatrixOptions {
                alpha,
                sidedness: if two_sided { Sidedness::Two } else { Sidedness::One },
                bonferroni,
            };
            let matrix = significance_matrix(&columns, &da, &options)?;
            let winners = winner_set(&matrix);
            match text_or_json(&output)? {
                Format::Json => print_json(&serde_json::json!({ "matrix": matrix, "winners": winners })),
                _ => {
                    print!("{}", matrix.render_grid());
                    println!("winners at alpha {}: {}", matrix.threshold(), winners.join(", "));
                }
            }
            Ok(())
        }
        Command::Bins {
            input,
            metric,
            output,
        } => {
            let (table, seg) = load_scored(&input)?;
            let bins = tertile_bins(&seg)?;
            let dist = conditional_distribution(&table, &metric, &bins)?;
            match text_or_json(&output)? {
                Format::Json => print_json(&serde_json::json!({
                    "boundaries": bins.boundaries,
                    "min": bins.min,
                    "max": bins.max,
                    "distributions": dist,
                })),
                _ => {
                    println!(
                        "# boundaries: {} {}  sizes: {:?}",
                        bins.boundaries[0],
                        bins.boundaries[1],
                        bins.sizes()
                    );
                    print!("{}", bins_csv(&table, &metric, &bins));
                }
            }
            Ok(())
        }
        Command::Failures {
            corpus,
            input,
            metric,
            k,
            output,
        } => {
            let c = load_corpus(&corpus)?;
            let (table, seg) = load_scored(&input)?;
            let bins = tertile_bins(&seg)?;
            let (cases, findings) = failure_cases(&c, &table, &metric, &bins, k)?;
            print_findings(&findings);
            match text_or_json(&output)? {
                Format::Json => print_json(&cases),
                _ => print!("{}", render_failure_cases(&cases, &metric)),
            }
            Ok(())
        }
        Command::Groups {
            input,
            metadata,
            metric,
            by,
            coef,
            output,
        } => {
            let (table, seg) = load_scored(&input)?;
            let sys = system_da(&seg);
            let meta = load_metadata_csv(&metadata)?
                .into_iter()
                .map(|m| (m.system_id.clone(), m))
                .collect();
            let groups = grouped_correlation(&sys, &table, &metric, &meta, by, coef)?;
            match text_or_json(&output)? {
                Format::Json => print_json(&groups),
                _ => print!("{}", groups_csv(&groups)),
            }
            Ok(())
        }
        Command::Agreement {
            input,
            metric,
            output,
        } => {
            let (table, seg) = load_scored(&input)?;
            let report = kendall_agreement_report(&system_da(&seg), &table, &metric)?;
            match text_or_json(&output)? {
                Format::Json => print_json(&report),
                _ => {
                    println!("{}: tau = {:.3} over {} systems", report.metric, report.tau, report.n_systems);
                    println!("{} {}", report.metric, report.interpretation);
                    println!("note: {}", report.note);
                }
            }
            Ok(())
        }
        Command::Run {
            config,
            out,
            alpha,
            coef,
            standardize,
            scoring,
            k,
            seed,
            output,
        } => {
            let mut cfg = StudyConfig::load(&config)?;
            if let Some(a) = alpha {
                cfg.analysis.alpha = a;
            }
            if !coef.is_empty() {
                cfg.analysis.coefficients = coef;
            }
            if let Some(s) = standardize {
                cfg.da.standardize = s;
            }
            if let Some(k) = k {
                cfg.analysis.k = k;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            apply_scoring_overrides(&mut cfg, &scoring)?;
            let bundle = run_study(&cfg)?;
            print_findings(&bundle.findings);
            let dir = out.or_else(|| cfg.output_dir());
            let format = output.format.unwrap_or(Format::Json);
            match dir {
                Some(dir) => {
                    for p in emit_report(&bundle, format, &dir)? {
                        eprintln!("wrote {}", p.display());
                    }
                }
                None => match format {
                    Format::Json => print!("{}", bundle.to_json()),
                    Format::Text => print!("{}", render_text(&bundle)),
                    Format::CsvDir => {
                        return Err(Error::InvalidArgument(
                            "csv-dir needs an output directory (--out or output_dir)".into(),
                        ))
                    }
                },
            }
            Ok(())
        }
        Command::Report {
            bundle,
            out,
            output,
        } => {
            let text = fs::read_to_string(&bundle).map_err(|e| io_error(&bundle, e))?;
            let b = ReportBundle::from_json(&text)?;
            for p in emit_report(&b, output.format.unwrap_or(Format::Text), &out)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn text_or_json(output: &OutputArgs) -> Result<Format> {
    match output.format {
        None | Some(Format::Text) => Ok(Format::Text),
        Some(Format::Json) => Ok(Format::Json),
        Some(Format::CsvDir) => Err(Error::InvalidArgument(
            "csv-dir output is only available for `run` and `report`".into(),
        )),
    }
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn print_findings(findings: &[Finding]) {
    for f in findings {
        eprintln!("{f}");
    }
}

fn load_corpus(args: &CorpusArgs) -> Result<EvaluationCorpus> {
    let ts = load_testset(&args.source, &args.refs, &args.language_pair)?;
    let outputs = load_outputs_dir(&args.outputs, &ts)?;
    let mut corpus = EvaluationCorpus::new(ts, outputs)?;
    if let Some(m) = &args.metadata {
        corpus = corpus.attach_system_metadata(load_metadata_csv(m)?)?;
    }
    Ok(corpus)
}

fn load_scored(args: &ScoredArgs) -> Result<(MetricScoreTable, Vec<SegmentDa>)> {
    Ok((load_score_tsv(&args.scores)?, load_segment_da_tsv(&args.da)?))
}

fn validate(args: &CorpusArgs, output: &OutputArgs) -> Result<()> {
    let corpus = load_corpus(args)?;
    let findings = validate_corpus(&corpus, &DesignPolicy::default());
    match text_or_json(output)? {
        Format::Json => print_json(&serde_json::json!({
            "systems": corpus.system_count(),
            "segments": corpus.test_set().len(),
            "findings": findings,
        })),
        _ => {
            println!(
                "{} systems, {} segments, {} reference(s)",
                corpus.system_count(),
                corpus.test_set().len(),
                corpus.test_set().reference_count()
            );
            for f in &findings {
                println!("{f}");
            }
        }
    }
    Ok(())
}

fn parse_builtin(name: &str) -> Result<BuiltinName> {
    match name.to_ascii_lowercase().as_str() {
        "bleu" | "sentbleu" => Ok(BuiltinName::Bleu),
        "chrf" => Ok(BuiltinName::Chrf),
        other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
    }
}

fn builtin_metrics(args: &ScoringArgs) -> Result<Vec<BuiltinMetric>> {
    let smoothing = match &args.smoothing {
        Some(s) => Smoothing::parse(s)?,
        None => Smoothing::default(),
    };
    let names = if args.metrics.is_empty() {
        vec![BuiltinName::Bleu, BuiltinName::Chrf]
    } else {
        args.metrics.iter().map(|m| parse_builtin(m)).collect::<Result<_>>()?
    };
    Ok(names
        .into_iter()
        .map(|n| match n {
            BuiltinName::Bleu => BuiltinMetric::bleu(BleuConfig {
                smoothing,
                ..BleuConfig::default()
            }),
            BuiltinName::Chrf => BuiltinMetric::chrf(ChrfConfig::default()),
        })
        .collect())
}

fn apply_scoring_overrides(cfg: &mut StudyConfig, args: &ScoringArgs) -> Result<()> {
    if !args.metrics.is_empty() {
        cfg.metrics.builtin = args.metrics.iter().map(|m| parse_builtin(m)).collect::<Result<_>>()?;
    }
    if let Some(t) = args.tokenizer {
        cfg.metrics.tokenizer = t;
    }
    if args.lowercase {
        cfg.metrics.lowercase = true;
    }
    if let Some(s) = &args.smoothing {
        Smoothing::parse(s)?;
        cfg.metrics.smoothing = s.clone();
    }
    if let Some(a) = args.aggregate {
        cfg.metrics.aggregate = a;
    }
    Ok(())
}

/// Complete system-level score vectors aligned with `sys`.
fn system_columns(table: &MetricScoreTable, sys: &[SystemDa]) -> Vec<(String, Vec<f64>)> {
    let mut columns = Vec::new();
    for id in table.metric_ids() {
        let scores = table.system_scores_for(&id);
        let col: Option<Vec<f64>> = sys.iter().map(|d| scores.get(&d.system_id).copied()).collect();
        match col {
            Some(c) => columns.push((id, c)),
            None => eprintln!("[warning] signif: `{id}` lacks scores for some systems; excluded"),
        }
    }
    columns
}
