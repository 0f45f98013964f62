//! Browser bindings for the metval demo page. Every export returns a JSON
//! string: the result object, or `{"error": "..."}`.

use metval::correlation::{kendall_tau, pearson, spearman, PairedSample};
use metval::metrics::{
    chrf, config_signature, sentence_bleu, tokenize, BleuConfig, ChrfConfig, MetricConfig, Smoothing,
    TokenizationScheme, Tokenizer,
};
use metval::significance::{pearson_zero_test, williams_test, Sidedness};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn respond(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn williams_value(r13: f64, r23: f64, r12: f64, n: usize, two_sided: bool) -> Result<Value, String> {
    let sidedness = if two_sided { Sidedness::Two } else { Sidedness::One };
    let out = williams_test(r13, r23, r12, n, sidedness).map_err(|e| e.to_string())?;
    Ok(json!({
        "t": out.statistic,
        "df": out.df,
        "p": out.p_value,
        "sidedness": if two_sided { "two" } else { "one" },
        "degenerate": out.degenerate,
    }))
}

/// Williams test that metric 1 (r13) correlates more strongly with the
/// human scores than metric 2 (r23), given their mutual correlation r12.
#[wasm_bindgen]
pub fn williams(r13: f64, r23: f64, r12: f64, n: u32, two_sided: bool) -> String {
    respond(williams_value(r13, r23, r12, n as usize, two_sided))
}

fn score_value(hyp: &str, refs: &str, tokenizer: &str, smoothing: &str) -> Result<Value, String> {
    let refs: Vec<&str> = refs.lines().filter(|l| !l.trim().is_empty()).collect();
    if refs.is_empty() {
        return Err("at least one reference line is required".into());
    }
    let tok: Tokenizer = tokenizer.parse().map_err(|e: metval::Error| e.to_string())?;
    let scheme = TokenizationScheme::new(tok, false);
    let bleu_cfg = BleuConfig {
        smoothing: Smoothing::parse(smoothing).map_err(|e| e.to_string())?,
        ..BleuConfig::default()
    };
    let chrf_cfg = ChrfConfig::default();

    let hyp_toks = tokenize(hyp, &scheme);
    let ref_toks: Vec<Vec<String>> = refs.iter().map(|r| tokenize(r, &scheme)).collect();
    Ok(json!({
        "bleu": sentence_bleu(&hyp_toks, &ref_toks, &bleu_cfg),
        "bleu_signature": config_signature(&MetricConfig::Bleu(bleu_cfg), &scheme),
        "chrf": chrf(hyp, &refs, &chrf_cfg),
        "chrf_signature": config_signature(&MetricConfig::Chrf(chrf_cfg), &scheme),
        "tokens": hyp_toks,
    }))
}

/// Sentence BLEU and chrF of one hypothesis; `refs` holds one reference per line.
#[wasm_bindgen]
pub fn score_sentence(hyp: &str, refs: &str, tokenizer: &str, smoothing: &str) -> String {
    respond(score_value(hyp, refs, tokenizer, smoothing))
}

fn parse_numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("not a number: `{s}`")))
        .collect()
}

fn correlate_value(xs: &str, ys: &str) -> Result<Value, String> {
    let sample = PairedSample::new(parse_numbers(xs)?, parse_numbers(ys)?).map_err(|e| e.to_string())?;
    let n = sample.len();
    let opt = |r: metval::Result<f64>| r.ok();
    let r = opt(pearson(&sample));
    let zero = r.and_then(|r| pearson_zero_test(r, n).ok());
    Ok(json!({
        "n": n,
        "pearson": r,
        "spearman": opt(spearman(&sample)),
        "kendall": opt(kendall_tau(&sample)),
        "zero_test": zero.map(|z| json!({ "t": z.statistic, "df": z.df, "p": z.p_value })),
    }))
}

/// Pearson, Spearman and Kendall on two number lists, plus the two-sided
/// test of Pearson r against zero. Undefined coefficients come back null.
#[wasm_bindgen]
pub fn correlate(xs: &str, ys: &str) -> String {
    respond(correlate_value(xs, ys))
}
