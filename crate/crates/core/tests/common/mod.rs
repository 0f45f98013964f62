use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: &[&str] = &[
    "the", "committee", "approved", "a", "new", "budget", "for", "schools", "on", "monday",
    "after", "long", "debate", "about", "rising", "costs", "and", "teacher", "salaries", "in",
    "several", "districts", "across", "region",
];

pub struct Fixture {
    pub systems: usize,
    pub segments: usize,
    pub workers: usize,
    pub with_metadata: bool,
}

impl Default for Fixture {
    fn default() -> Self {
        Fixture {
            systems: 6,
            segments: 15,
            workers: 4,
            with_metadata: true,
        }
    }
}

/// Writes a synthetic study to `dir` and returns the config path. System
/// `k` corrupts a growing share of reference words, and simulated workers
/// score the fraction of intact words with per-worker bias and noise.
pub fn write_study(dir: &Path, fx: &Fixture) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let refs: Vec<Vec<&str>> = (0..fx.segments)
        .map(|_| {
            let len = rng.random_range(5..12);
            (0..len).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect()
        })
        .collect();
    let src: Vec<String> = (0..fx.segments).map(|i| format!("source sentence {i}")).collect();
    fs::write(dir.join("src.txt"), src.join("\n") + "\n").unwrap();
    fs::write(
        dir.join("ref.txt"),
        refs.iter().map(|r| r.join(" ")).collect::<Vec<_>>().join("\n") + "\n",
    )
    .unwrap();
    let sys_dir = dir.join("systems");
    fs::create_dir_all(&sys_dir).unwrap();

    let mut judgments = String::from("worker_id,system_id,segment_id,score\n");
    let mut meta = String::from("system_id,system_type,track\n");
    let bias: Vec<f64> = (0..fx.workers).map(|_| rng.random_range(-15.0..15.0)).collect();
    for k in 0..fx.systems {
        let id = format!("sys{k}");
        let corrupt = 0.08 * k as f64 + 0.05;
        let mut lines = Vec::new();
        for (seg, r) in refs.iter().enumerate() {
            let mut intact = 0usize;
            let hyp: Vec<&str> = r
                .iter()
                .map(|w| {
                    if rng.random_bool(corrupt) {
                        "zz"
                    } else {
                        intact += 1;
                        w
                    }
                })
                .collect();
            lines.push(hyp.join(" "));
            let quality = 100.0 * intact as f64 / r.len() as f64;
            for (w, b) in bias.iter().enumerate() {
                let score = (0.7 * quality + 15.0 + b + rng.random_range(-8.0..8.0)).clamp(0.0, 100.0);
                let _ = writeln!(judgments, "w{w},{id},{seg},{score:.2}");
            }
        }
        fs::write(sys_dir.join(format!("{id}.txt")), lines.join("\n") + "\n").unwrap();
        let ty = if k % 2 == 0 { "neural" } else { "phrase" };
        let _ = writeln!(meta, "{id},{ty},news");
    }
    fs::write(dir.join("judgments.csv"), judgments).unwrap();

    let mut config = String::from(
        "language_pair = \"xx-en\"\nseed = 5\n\n[paths]\nsource = \"src.txt\"\nreferences = [\"ref.txt\"]\noutputs_dir = \"systems\"\njudgments = \"judgments.csv\"\n",
    );
    if fx.with_metadata {
        fs::write(dir.join("systems.csv"), meta).unwrap();
        config.push_str("metadata = \"systems.csv\"\n");
    }
    config.push_str("\n[analysis]\nk = 2\n");
    let path = dir.join("study.toml");
    fs::write(&path, config).unwrap();
    path
}
