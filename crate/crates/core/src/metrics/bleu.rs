//! Sentence and corpus BLEU: clipped n-gram precision, uniform geometric
//! mean, brevity penalty against the closest reference length.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Smoothing {
    None,
    /// Adds `k` to matches and candidates. Unigram precision is left
    /// unsmoothed unless `include_unigrams` is set.
    AddK { k: f64, include_unigrams: bool },
    /// Each order with zero matches gets precision `1 / (2^j * candidates)`
    /// where `j` counts zero-match orders seen so far.
    ExpDecay,
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing::AddK {
            k: 1.0,
            include_unigrams: false,
        }
    }
}

impl Smoothing {
    /// Canonical spelling: `none`, `add-<k>`, `add-<k>+uni`, `exp`.
    pub fn spec(&self) -> String {
        match *self {
            Smoothing::None => "none".into(),
            Smoothing::AddK { k, include_unigrams } => {
                format!("add-{k}{}", if include_unigrams { "+uni" } else { "" })
            }
            Smoothing::ExpDecay => "exp".into(),
        }
    }

    pub fn parse(spec: &str) -> Result<Self> {
        match spec {
            "none" => return Ok(Smoothing::None),
            "exp" => return Ok(Smoothing::ExpDecay),
            _ => {}
        }
        let bad = || Error::InvalidArgument(format!("bad smoothing spec `{spec}`"));
        let rest = spec.strip_prefix("add-").ok_or_else(bad)?;
        let (k, include_unigrams) = match rest.strip_suffix("+uni") {
            Some(k) => (k, true),
            None => (rest, false),
        };
        let k: f64 = k.parse().map_err(|_| bad())?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(bad());
        }
        Ok(Smoothing::AddK { k, include_unigrams })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BleuConfig {
    pub max_n: usize,
    pub smoothing: Smoothing,
    pub use_brevity_penalty: bool,
    /// Score a hypothesis shorter than `max_n` over orders `1..=len` only.
    pub effective_n_truncation: bool,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig {
            max_n: 4,
            smoothing: Smoothing::default(),
            use_brevity_penalty: true,
            effective_n_truncation: true,
        }
    }
}

impl BleuConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_n == 0 {
            return Err(Error::InvalidArgument("BLEU max_n must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sufficient statistics for one hypothesis (or a pooled corpus).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BleuStats {
    /// Clipped matches per order, index 0 = unigrams.
    pub matches: Vec<u64>,
    /// Hypothesis n-gram count per order.
    pub candidates: Vec<u64>,
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    pub fn add(&mut self, other: &BleuStats) {
        if self.matches.is_empty() {
            *self = other.clone();
            return;
        }
        for (a, b) in self.matches.iter_mut().zip(&other.matches) {
            *a += b;
        }
        for (a, b) in self.candidates.iter_mut().zip(&other.candidates) {
            *a += b;
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }
}

fn ngram_counts<'a, T: AsRef<str>>(tokens: &'a [T], n: usize) -> HashMap<Vec<&'a str>, u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            let key: Vec<&str> = w.iter().map(AsRef::as_ref).collect();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

/// Closest reference length; ties go to the shorter reference.
pub fn closest_ref_len(hyp_len: usize, ref_lens: impl IntoIterator<Item = usize>) -> usize {
    ref_lens
        .into_iter()
        .min_by_key(|&r| (r.abs_diff(hyp_len), r))
        .unwrap_or(0)
}

pub fn bleu_stats<T: AsRef<str>, R: AsRef<[T]>>(hyp: &[T], refs: &[R], max_n: usize) -> BleuStats {
    let mut stats = BleuStats {
        matches: vec![0; max_n],
        candidates: vec![0; max_n],
        hyp_len: hyp.len() as u64,
        ref_len: closest_ref_len(hyp.len(), refs.iter().map(|r| r.as_ref().len())) as u64,
    };
    for n in 1..=max_n {
        let hyp_counts = ngram_counts(hyp, n);
        let mut max_ref: HashMap<Vec<&str>, u64> = HashMap::new();
        for r in refs {
            for (g, c) in ngram_counts(r.as_ref(), n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        stats.candidates[n - 1] = hyp.len().saturating_sub(n - 1) as u64;
        stats.matches[n - 1] = hyp_counts
            .iter()
            .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
    }
    stats
}

/// Per-order precisions after smoothing, over the orders that are scored.
pub fn precisions(stats: &BleuStats, config: &BleuConfig, smoothing: Smoothing) -> Vec<f64> {
    let orders = if config.effective_n_truncation {
        let usable = stats.candidates.iter().take_while(|&&c| c > 0).count();
        usable.min(config.max_n)
    } else {
        config.max_n
    };
    let mut out = Vec::with_capacity(orders);
    let mut decay = 1.0;
    for idx in 0..orders {
        let m = stats.matches[idx] as f64;
        let c = stats.candidates[idx] as f64;
        let p = match smoothing {
            Smoothing::AddK { k, include_unigrams } if idx > 0 || include_unigrams => {
                (m + k) / (c + k)
            }
            Smoothing::ExpDecay if m == 0.0 && c > 0.0 => {
                decay *= 2.0;
                1.0 / (decay * c)
            }
            _ => {
                if c > 0.0 {
                    m / c
                } else {
                    0.0
                }
            }
        };
        out.push(p);
    }
    out
}

pub fn brevity_penalty(hyp_len: u64, ref_len: u64) -> f64 {
    if hyp_len == 0 {
        0.0
    } else if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

fn score_from_stats(stats: &BleuStats, config: &BleuConfig, smoothing: Smoothing) -> f64 {
    if stats.hyp_len == 0 {
        return 0.0;
    }
    let ps = precisions(stats, config, smoothing);
    if ps.is_empty() || ps.iter().any(|&p| p <= 0.0) {
        return 0.0;
    }
    let log_mean = ps.iter().map(|p| p.ln()).sum::<f64>() / ps.len() as f64;
    let bp = if config.use_brevity_penalty {
        brevity_penalty(stats.hyp_len, stats.ref_len)
    } else {
        1.0
    };
    (bp * log_mean.exp()).clamp(0.0, 1.0)
}

pub fn sentence_bleu<T: AsRef<str>, R: AsRef<[T]>>(hyp: &[T], refs: &[R], config: &BleuConfig) -> f64 {
    let stats = bleu_stats(hyp, refs, config.max_n.max(1));
    score_from_stats(&stats, config, config.smoothing)
}

/// Corpus BLEU over pooled statistics. Smoothing is never applied at corpus
/// level, which keeps the score invariant under corpus duplication.
pub fn corpus_bleu<T: AsRef<str>, R: AsRef<[T]>>(pairs: &[(Vec<T>, Vec<R>)], config: &BleuConfig) -> f64 {
    let mut pooled = BleuStats::default();
    for (hyp, refs) in pairs {
        pooled.add(&bleu_stats(hyp, refs, config.max_n.max(1)));
    }
    score_from_stats(&pooled, config, Smoothing::None)
}
