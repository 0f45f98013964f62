//! Character n-gram F-score on raw text.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChrfConfig {
    pub char_n: usize,
    pub beta: f64,
    pub include_whitespace: bool,
}

impl Default for ChrfConfig {
    fn default() -> Self {
        ChrfConfig {
            char_n: 6,
            beta: 2.0,
            include_whitespace: false,
        }
    }
}

impl ChrfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.char_n == 0 {
            return Err(Error::InvalidArgument("chrF char_n must be at least 1".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument("chrF beta must be positive".into()));
        }
        Ok(())
    }
}

/// Per-order match statistics between one hypothesis and one reference.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChrfStats {
    pub matches: Vec<u64>,
    pub hyp_counts: Vec<u64>,
    pub ref_counts: Vec<u64>,
}

impl ChrfStats {
    pub fn add(&mut self, other: &ChrfStats) {
        if self.matches.is_empty() {
            *self = other.clone();
            return;
        }
        for i in 0..self.matches.len() {
            self.matches[i] += other.matches[i];
            self.hyp_counts[i] += other.hyp_counts[i];
            self.ref_counts[i] += other.ref_counts[i];
        }
    }

    /// F-beta of precision and recall averaged over the orders where both
    /// sides have at least one n-gram.
    pub fn f_score(&self, beta: f64) -> f64 {
        let mut p_sum = 0.0;
        let mut r_sum = 0.0;
        let mut orders = 0usize;
        for i in 0..self.matches.len() {
            if self.hyp_counts[i] == 0 || self.ref_counts[i] == 0 {
                continue;
            }
            p_sum += self.matches[i] as f64 / self.hyp_counts[i] as f64;
            r_sum += self.matches[i] as f64 / self.ref_counts[i] as f64;
            orders += 1;
        }
        if orders == 0 {
            return 0.0;
        }
        let p = p_sum / orders as f64;
        let r = r_sum / orders as f64;
        let b2 = beta * beta;
        let denom = b2 * p + r;
        if denom == 0.0 {
            return 0.0;
        }
        ((1.0 + b2) * p * r / denom).clamp(0.0, 1.0)
    }
}

fn chars_of(text: &str, include_whitespace: bool) -> Vec<char> {
    text.chars()
        .filter(|c| include_whitespace || !c.is_whitespace())
        .collect()
}

fn char_ngrams(chars: &[char], n: usize) -> HashMap<&[char], u64> {
    let mut m = HashMap::new();
    if chars.len() >= n {
        for w in chars.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

pub fn chrf_stats(hyp: &str, reference: &str, config: &ChrfConfig) -> ChrfStats {
    let h = chars_of(hyp, config.include_whitespace);
    let r = chars_of(reference, config.include_whitespace);
    let mut stats = ChrfStats {
        matches: vec![0; config.char_n],
        hyp_counts: vec![0; config.char_n],
        ref_counts: vec![0; config.char_n],
    };
    for n in 1..=config.char_n {
        let hc = char_ngrams(&h, n);
        let rc = char_ngrams(&r, n);
        stats.hyp_counts[n - 1] = hc.values().sum();
        stats.ref_counts[n - 1] = rc.values().sum();
        stats.matches[n - 1] = hc
            .iter()
            .map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0)))
            .sum();
    }
    stats
}

/// Returns the stats against the best-scoring reference.
pub fn best_reference_stats<R: AsRef<str>>(hyp: &str, refs: &[R], config: &ChrfConfig) -> ChrfStats {
    let mut best: Option<(f64, ChrfStats)> = None;
    for r in refs {
        let st = chrf_stats(hyp, r.as_ref(), config);
        let f = st.f_score(config.beta);
        if best.as_ref().is_none_or(|(bf, _)| f > *bf) {
            best = Some((f, st));
        }
    }
    best.map(|b| b.1).unwrap_or_default()
}

pub fn chrf<R: AsRef<str>>(hyp: &str, refs: &[R], config: &ChrfConfig) -> f64 {
    refs.iter()
        .map(|r| chrf_stats(hyp, r.as_ref(), config).f_score(config.beta))
        .fold(0.0, f64::max)
}

/// True when neither side has any character to compare, which scores 0.
pub fn chrf_is_degenerate<R: AsRef<str>>(hyp: &str, refs: &[R], config: &ChrfConfig) -> bool {
    chars_of(hyp, config.include_whitespace).is_empty()
        && refs
            .iter()
            .all(|r| chars_of(r.as_ref(), config.include_whitespace).is_empty())
}

/// Corpus chrF: statistics pooled over segments, each against its best
/// reference.
pub fn corpus_chrf<S: AsRef<str>, R: AsRef<str>>(pairs: &[(S, Vec<R>)], config: &ChrfConfig) -> f64 {
    let mut pooled = ChrfStats::default();
    for (hyp, refs) in pairs {
        pooled.add(&best_reference_stats(hyp.as_ref(), refs, config));
    }
    if pooled.matches.is_empty() {
        return 0.0;
    }
    pooled.f_score(config.beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force enumeration: every substring of length n, matched greedily
    /// one occurrence at a time.
    fn oracle(hyp: &str, reference: &str, n_max: usize, beta: f64) -> f64 {
        let h: Vec<char> = hyp.chars().filter(|c| !c.is_whitespace()).collect();
        let r: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
        let (mut ps, mut rs, mut k) = (0.0, 0.0, 0);
        for n in 1..=n_max {
            if h.len() < n || r.len() < n {
                continue;
            }
            let hg: Vec<String> = (0..=h.len() - n).map(|i| h[i..i + n].iter().collect()).collect();
            let mut rg: Vec<Option<String>> =
                (0..=r.len() - n).map(|i| Some(r[i..i + n].iter().collect())).collect();
            let mut m = 0;
            for g in &hg {
                if let Some(slot) = rg.iter_mut().find(|x| x.as_deref() == Some(g.as_str())) {
                    *slot = None;
                    m += 1;
                }
            }
            ps += m as f64 / hg.len() as f64;
            rs += m as f64 / rg.len() as f64;
            k += 1;
        }
        if k == 0 {
            return 0.0;
        }
        let (p, r) = (ps / k as f64, rs / k as f64);
        if p + r == 0.0 {
            return 0.0;
        }
        (1.0 + beta * beta) * p * r / (beta * beta * p + r)
    }

    #[test]
    fn identical_is_one() {
        let c = ChrfConfig::default();
        assert_eq!(chrf("the cat sat", &["the cat sat"], &c), 1.0);
    }

    #[test]
    fn disjoint_is_zero() {
        assert_eq!(chrf("abcd", &["wxyz"], &ChrfConfig::default()), 0.0);
    }

    #[test]
    fn cat_cab_matches_oracle() {
        let c = ChrfConfig::default();
        let got = chrf("cat", &["cab"], &c);
        // orders 1..3: P = R = (2/3 + 1/2 + 0) / 3
        let pr = (2.0 / 3.0 + 0.5) / 3.0;
        assert!((got - pr).abs() < 1e-15);
        assert!((got - oracle("cat", "cab", 6, 2.0)).abs() < 1e-15);
    }

    #[test]
    fn random_strings_match_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let c = ChrfConfig::default();
        for _ in 0..200 {
            let word = |rng: &mut rand_chacha::ChaCha8Rng, len: usize| -> String {
                (0..len).map(|_| ['a', 'b', 'c', ' '][rng.random_range(0..4)]).collect()
            };
            let hl = rng.random_range(0..15);
            let h = word(&mut rng, hl);
            let rl = rng.random_range(1..15);
            let r = word(&mut rng, rl);
            assert!((chrf(&h, &[&r], &c) - oracle(&h, &r, 6, 2.0)).abs() < 1e-12, "{h:?} {r:?}");
        }
    }

    #[test]
    fn best_reference_wins() {
        let c = ChrfConfig::default();
        let a = chrf("kitten", &["sitting"], &c);
        assert_eq!(chrf("kitten", &["sitting", "kitten"], &c), 1.0);
        assert_eq!(chrf("kitten", &["sitting", "zzz"], &c), a);
    }

    #[test]
    fn degenerate_inputs() {
        let c = ChrfConfig::default();
        assert_eq!(chrf("", &[""], &c), 0.0);
        assert!(chrf_is_degenerate("", &[" "], &c));
        assert!(!chrf_is_degenerate("a", &[""], &c));
    }

    #[test]
    fn corpus_identical_is_one() {
        let c = ChrfConfig::default();
        let pairs = vec![("ab cd", vec!["ab cd"]), ("xyz", vec!["xyz"])];
        assert_eq!(corpus_chrf(&pairs, &c), 1.0);
    }
}
