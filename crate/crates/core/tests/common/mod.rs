#![allow(dead_code)]

use std::path::PathBuf;

use mlid::corpus::{load_corpus, Corpus, LanguagePair, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn en_zh() -> LanguagePair {
    LanguagePair::new("en", "zh").unwrap()
}

pub fn worked_examples() -> Corpus {
    load_corpus(fixture("worked_examples.jsonl"), en_zh()).unwrap()
}

/// Interpolated Kneser-Ney evaluated by rescanning the padded training
/// windows for every quantity.
pub struct KnOracle {
    order: usize,
    vocab: Vec<String>,
    windows: Vec<Vec<String>>,
}

const UNK: &str = "<unk>";
const BOS: &str = "<s>";
const EOS: &str = "</s>";

impl KnOracle {
    pub fn new(corpus: &[Vec<String>], order: usize, min_count: u64) -> Self {
        let mut vocab = vec![UNK.to_string(), BOS.to_string(), EOS.to_string()];
        for seq in corpus {
            for m in seq {
                let count = corpus.iter().flatten().filter(|x| *x == m).count() as u64;
                if count >= min_count && !vocab.contains(m) {
                    vocab.push(m.clone());
                }
            }
        }
        let mut oracle = KnOracle {
            order,
            vocab,
            windows: Vec::new(),
        };
        for seq in corpus {
            let padded = oracle.pad(seq);
            for i in 0..=padded.len() - order {
                oracle.windows.push(padded[i..i + order].to_vec());
            }
        }
        oracle
    }

    fn map(&self, m: &str) -> String {
        if self.vocab.iter().any(|v| v == m) {
            m.to_string()
        } else {
            UNK.to_string()
        }
    }

    fn pad(&self, seq: &[String]) -> Vec<String> {
        let mut out = vec![BOS.to_string(); self.order - 1];
        out.extend(seq.iter().map(|m| self.map(m)));
        out.push(EOS.to_string());
        out
    }

    /// Distinct k-grams with a non-zero count at level k.
    fn types(&self, k: usize) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = Vec::new();
        if k == self.order {
            for w in &self.windows {
                if !out.contains(w) {
                    out.push(w.clone());
                }
            }
        } else {
            for g in self.types(k + 1) {
                let suffix = g[1..].to_vec();
                if !out.contains(&suffix) {
                    out.push(suffix);
                }
            }
        }
        out
    }

    /// Raw count at the top level, number of distinct left extensions below.
    fn count(&self, gram: &[String]) -> u64 {
        let k = gram.len();
        if k == self.order {
            self.windows.iter().filter(|w| w.as_slice() == gram).count() as u64
        } else {
            self.types(k + 1).iter().filter(|g| &g[1..] == gram).count() as u64
        }
    }

    fn discount(&self, k: usize) -> f64 {
        let counts: Vec<u64> = self.types(k).iter().map(|g| self.count(g)).collect();
        let n1 = counts.iter().filter(|&&c| c == 1).count() as f64;
        let n2 = counts.iter().filter(|&&c| c == 2).count() as f64;
        if n1 + n2 == 0.0 {
            0.5
        } else {
            (n1 / (n1 + 2.0 * n2)).clamp(0.1, 0.9)
        }
    }

    fn level_prob(&self, context: &[String], word: &str) -> f64 {
        let k = context.len() + 1;
        let lower = if context.is_empty() {
            1.0 / (self.vocab.len() - 1) as f64
        } else {
            self.level_prob(&context[1..], word)
        };
        let extensions: Vec<Vec<String>> = self
            .types(k)
            .into_iter()
            .filter(|g| &g[..k - 1] == context)
            .collect();
        let total: u64 = extensions.iter().map(|g| self.count(g)).sum();
        if total == 0 {
            return lower;
        }
        let d = self.discount(k);
        let mut gram = context.to_vec();
        gram.push(word.to_string());
        let c = self.count(&gram) as f64;
        (c - d).max(0.0) / total as f64 + d * extensions.len() as f64 / total as f64 * lower
    }

    pub fn log_prob(&self, seq: &[String]) -> f64 {
        let padded = self.pad(seq);
        let n = self.order;
        (0..=padded.len() - n)
            .map(|i| {
                self.level_prob(&padded[i..i + n - 1], &padded[i + n - 1])
                    .ln()
            })
            .sum()
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocab
    }
}

/// Small random corpus over `a..f` with occasional singleton symbols.
pub fn random_corpus(rng: &mut ChaCha8Rng, max_morphemes: usize) -> Vec<Vec<String>> {
    let mut corpus = Vec::new();
    let mut used = 0;
    let budget = rng.gen_range(1..=max_morphemes);
    while used < budget {
        let len = rng.gen_range(1..=6).min(budget - used);
        let seq: Vec<String> = (0..len)
            .map(|_| {
                if rng.gen_bool(0.1) {
                    format!("x{}", rng.gen_range(0..100))
                } else {
                    ((b'a' + rng.gen_range(0..6u8)) as char).to_string()
                }
            })
            .collect();
        used += len;
        corpus.push(seq);
    }
    corpus
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Classical binary correlation from the four confusion counts.
pub fn binary_mcc(tp: f64, tn: f64, fp: f64, fn_: f64) -> f64 {
    let denom = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / denom
    }
}

/// Error rates of the decision `diff >= threshold` computed item by item.
pub fn rates_at(diffs: &[f64], truth: &[Side], threshold: f64) -> (f64, f64) {
    let pos = truth.iter().filter(|&&t| t == Side::L1).count() as f64;
    let neg = truth.len() as f64 - pos;
    let mut fp = 0.0;
    let mut fn_ = 0.0;
    for (&d, &t) in diffs.iter().zip(truth) {
        let decided_l1 = d >= threshold;
        match t {
            Side::L2 if decided_l1 => fp += 1.0,
            Side::L1 if !decided_l1 => fn_ += 1.0,
            _ => {}
        }
    }
    (fp / neg, fn_ / pos)
}

/// Posteriors whose mass sits on one of two well-separated dimensions.
pub fn separable_posteriors(
    n_per_class: usize,
    dim: usize,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<Side>) {
    let mut r = rng(seed);
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for i in 0..2 * n_per_class {
        let side = if i % 2 == 0 { Side::L1 } else { Side::L2 };
        let mut v: Vec<f64> = (0..dim).map(|_| r.gen_range(0.0..0.05)).collect();
        v[side.index()] += r.gen_range(0.7..0.9);
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        inputs.push(v);
        labels.push(side);
    }
    (inputs, labels)
}
