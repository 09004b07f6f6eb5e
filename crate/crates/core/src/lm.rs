//! Morpheme tokenization and interpolated Kneser-Ney n-gram language models.
//!
//! Latin-script languages are split into stem and suffix with a small
//! suffix table; Han-script languages use one morpheme per character.
//! Models score sequences in natural-log units with `order - 1` begin
//! markers of left context and one end marker per sequence.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{writing_system, Utterance, WritingSystem};
use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

const UNK_ID: u32 = 0;
const BOS_ID: u32 = 1;
const EOS_ID: u32 = 2;

const SUFFIXES_EN: &str = include_str!("../data/suffixes_en.tsv");
const SUFFIXES_ES: &str = include_str!("../data/suffixes_es.tsv");

/// Morphemes of a token sequence, each tagged with the index of the token
/// it came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MorphemeSequence {
    pub morphemes: Vec<String>,
    pub source_token_spans: Vec<usize>,
}

impl MorphemeSequence {
    pub fn new(morphemes: Vec<String>, source_token_spans: Vec<usize>) -> Result<Self> {
        if morphemes.is_empty() {
            return Err(Error::EmptyInput("morpheme sequence".into()));
        }
        if morphemes.len() != source_token_spans.len() {
            return Err(Error::InvalidArgument(
                "span count differs from morpheme count".into(),
            ));
        }
        if source_token_spans.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument(
                "token spans must be non-decreasing".into(),
            ));
        }
        Ok(MorphemeSequence {
            morphemes,
            source_token_spans,
        })
    }

    /// One morpheme per whitespace-separated word; handy for tests and toy data.
    pub fn from_words(text: &str) -> Result<Self> {
        let morphemes: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        let spans = (0..morphemes.len()).collect();
        MorphemeSequence::new(morphemes, spans)
    }

    pub fn len(&self) -> usize {
        self.morphemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.morphemes.is_empty()
    }

    /// Morphemes grouped by originating token.
    pub fn word_groups(&self) -> Vec<&[String]> {
        let mut groups = Vec::new();
        let mut start = 0;
        for i in 1..=self.morphemes.len() {
            if i == self.morphemes.len()
                || self.source_token_spans[i] != self.source_token_spans[start]
            {
                groups.push(&self.morphemes[start..i]);
                start = i;
            }
        }
        groups
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuffixTable {
    /// `(suffix, minimum stem length in chars)`, longest suffix first.
    entries: Vec<(String, usize)>,
}

impl SuffixTable {
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cells = line.split('\t');
            let suffix = cells.next().unwrap_or_default().trim().to_lowercase();
            let min_stem = match cells.next() {
                Some(v) => v.trim().parse().map_err(|_| {
                    Error::parse("suffix table", n + 1, format!("bad stem length `{v}`"))
                })?,
                None => 2,
            };
            entries.push((suffix, min_stem));
        }
        entries.sort_by(|a, b| {
            b.0.chars()
                .count()
                .cmp(&a.0.chars().count())
                .then(a.0.cmp(&b.0))
        });
        Ok(SuffixTable { entries })
    }

    /// Splits `word` into `[stem, "+suffix"]` using the longest matching
    /// suffix whose remaining stem is long enough.
    pub fn split(&self, word: &str) -> Vec<String> {
        let len = word.chars().count();
        for (suffix, min_stem) in &self.entries {
            let suffix_len = suffix.chars().count();
            if word.ends_with(suffix.as_str()) && len >= suffix_len + min_stem {
                let stem = &word[..word.len() - suffix.len()];
                return vec![stem.to_string(), format!("+{suffix}")];
            }
        }
        vec![word.to_string()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MorphemeTokenizer {
    Suffix {
        language: String,
        table: SuffixTable,
    },
    Character {
        language: String,
    },
}

impl MorphemeTokenizer {
    pub fn for_language(language: &str) -> Result<Self> {
        let table = match language {
            "en" => SUFFIXES_EN,
            "es" => SUFFIXES_ES,
            _ if writing_system(language) == Some(WritingSystem::Han) => {
                return Ok(MorphemeTokenizer::Character {
                    language: language.to_string(),
                })
            }
            _ => return Err(Error::UnsupportedLanguage(language.to_string())),
        };
        Ok(MorphemeTokenizer::Suffix {
            language: language.to_string(),
            table: SuffixTable::from_tsv(table)?,
        })
    }

    pub fn language(&self) -> &str {
        match self {
            MorphemeTokenizer::Suffix { language, .. }
            | MorphemeTokenizer::Character { language } => language,
        }
    }

    pub fn tokenize<S: AsRef<str>>(&self, tokens: &[S]) -> Result<MorphemeSequence> {
        let mut morphemes = Vec::new();
        let mut spans = Vec::new();
        for (i, token) in tokens.iter().enumerate() {
            let word = token.as_ref().to_lowercase();
            let pieces = match self {
                MorphemeTokenizer::Suffix { table, .. } => table.split(&word),
                MorphemeTokenizer::Character { .. } => split_characters(&word),
            };
            spans.extend(std::iter::repeat_n(i, pieces.len()));
            morphemes.extend(pieces);
        }
        MorphemeSequence::new(morphemes, spans)
    }

    pub fn tokenize_utterance(&self, utterance: &Utterance) -> Result<MorphemeSequence> {
        self.tokenize(&utterance.surfaces())
    }
}

/// Han characters become single morphemes; other character runs stay whole.
fn split_characters(word: &str) -> Vec<String> {
    use unicode_script::{Script, UnicodeScript};
    let mut out = Vec::new();
    let mut pending = String::new();
    for c in word.chars() {
        if c.script() == Script::Han {
            if !pending.is_empty() {
                out.push(std::mem::take(&mut pending));
            }
            out.push(c.to_string());
        } else {
            pending.push(c);
        }
    }
    if !pending.is_empty() {
        out.push(pending);
    }
    out
}

pub fn tokenize_morphemes<S: AsRef<str>>(tokens: &[S], language: &str) -> Result<MorphemeSequence> {
    MorphemeTokenizer::for_language(language)?.tokenize(tokens)
}

/// A model that assigns a natural-log probability to a morpheme sequence.
pub trait SequenceScorer: Sync {
    fn log_prob(&self, seq: &MorphemeSequence) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub order: usize,
    /// Morphemes seen fewer times than this in training map to `<unk>`.
    pub min_count: u64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            order: 3,
            min_count: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct ContextStats {
    total: u64,
    types: u64,
}

#[derive(Debug, Clone, PartialEq)]
struct Level {
    /// Raw counts at the top order, continuation counts below it.
    counts: HashMap<Vec<u32>, u64>,
    contexts: HashMap<Vec<u32>, ContextStats>,
    discount: f64,
}

impl Level {
    fn from_counts(counts: HashMap<Vec<u32>, u64>) -> Level {
        let mut contexts: HashMap<Vec<u32>, ContextStats> = HashMap::new();
        let (mut n1, mut n2) = (0u64, 0u64);
        for (gram, &c) in &counts {
            let stats = contexts.entry(gram[..gram.len() - 1].to_vec()).or_default();
            stats.total += c;
            stats.types += 1;
            match c {
                1 => n1 += 1,
                2 => n2 += 1,
                _ => {}
            }
        }
        Level {
            counts,
            contexts,
            discount: estimate_discount(n1, n2),
        }
    }
}

/// Absolute discount `n1 / (n1 + 2 n2)` clamped to `[0.1, 0.9]`; 0.5 when
/// no n-gram occurs once or twice.
pub fn estimate_discount(n1: u64, n2: u64) -> f64 {
    if n1 + n2 == 0 {
        0.5
    } else {
        (n1 as f64 / (n1 + 2 * n2) as f64).clamp(0.1, 0.9)
    }
}

/// Interpolated Kneser-Ney language model over morphemes.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramLM {
    language: String,
    config: LmConfig,
    vocab: Vec<String>,
    ids: HashMap<String, u32>,
    /// `levels[k - 1]` holds the k-gram statistics.
    levels: Vec<Level>,
}

impl NGramLM {
    pub fn train(language: &str, data: &[MorphemeSequence], config: LmConfig) -> Result<Self> {
        if config.order == 0 {
            return Err(Error::InvalidArgument(
                "model order must be at least 1".into(),
            ));
        }
        if data.is_empty() || data.iter().all(MorphemeSequence::is_empty) {
            return Err(Error::EmptyInput("language model training data".into()));
        }
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for seq in data {
            for m in &seq.morphemes {
                *freq.entry(m.as_str()).or_default() += 1;
            }
        }
        let kept: BTreeSet<&str> = freq
            .iter()
            .filter(|&(m, &c)| c >= config.min_count && ![UNK, BOS, EOS].contains(m))
            .map(|(m, _)| *m)
            .collect();
        let vocab: Vec<String> = [UNK, BOS, EOS]
            .into_iter()
            .chain(kept)
            .map(str::to_string)
            .collect();
        let ids: HashMap<String, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i as u32))
            .collect();

        let n = config.order;
        let mut top: HashMap<Vec<u32>, u64> = HashMap::new();
        for seq in data {
            let padded = pad(&ids, seq, n);
            for window in padded.windows(n) {
                *top.entry(window.to_vec()).or_default() += 1;
            }
        }
        let mut levels = vec![Level::from_counts(top)];
        for k in (1..n).rev() {
            // distinct left extensions of each k-gram
            let higher = &levels[0].counts;
            let mut cont: HashMap<Vec<u32>, u64> = HashMap::new();
            for gram in higher.keys() {
                *cont.entry(gram[1..].to_vec()).or_default() += 1;
            }
            debug_assert!(cont.keys().all(|g| g.len() == k));
            levels.insert(0, Level::from_counts(cont));
        }
        Ok(NGramLM {
            language: language.to_string(),
            config,
            vocab,
            ids,
            levels,
        })
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn order(&self) -> usize {
        self.config.order
    }

    pub fn config(&self) -> LmConfig {
        self.config
    }

    /// Vocabulary including `<unk>`, `<s>` and `</s>`.
    pub fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    pub fn discounts(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.discount).collect()
    }

    fn id(&self, morpheme: &str) -> u32 {
        self.ids.get(morpheme).copied().unwrap_or(UNK_ID)
    }

    /// Number of symbols that can be predicted (everything but `<s>`).
    fn predictable(&self) -> f64 {
        (self.vocab.len() - 1) as f64
    }

    fn prob_ids(&self, history: &[u32], word: u32) -> f64 {
        let mut p = 1.0 / self.predictable();
        let mut key: Vec<u32> = Vec::with_capacity(self.config.order);
        for (k, level) in self.levels.iter().enumerate() {
            let context = &history[history.len() - k..];
            if let Some(stats) = level.contexts.get(context) {
                key.clear();
                key.extend_from_slice(context);
                key.push(word);
                let c = level.counts.get(key.as_slice()).copied().unwrap_or(0) as f64;
                let total = stats.total as f64;
                let d = level.discount;
                p = (c - d).max(0.0) / total + d * stats.types as f64 / total * p;
            }
        }
        p
    }

    /// Conditional probability of `word` after `history`. Only the last
    /// `order - 1` history items are used; shorter histories are padded
    /// with `<s>`.
    pub fn prob(&self, history: &[&str], word: &str) -> f64 {
        let need = self.config.order - 1;
        let mut ids = vec![BOS_ID; need.saturating_sub(history.len())];
        let skip = history.len().saturating_sub(need);
        ids.extend(history[skip..].iter().map(|m| self.id(m)));
        self.prob_ids(&ids, self.id(word))
    }

    /// Symbols over which conditional distributions are normalized.
    pub fn predictable_symbols(&self) -> impl Iterator<Item = &str> {
        self.vocab
            .iter()
            .filter(|m| m.as_str() != BOS)
            .map(String::as_str)
    }

    pub fn to_json(&self) -> String {
        let file = LmFile {
            format: LM_FORMAT.to_string(),
            version: LM_VERSION,
            language: self.language.clone(),
            order: self.config.order,
            min_count: self.config.min_count,
            vocab: self.vocab.clone(),
            discounts: self.discounts(),
            levels: self
                .levels
                .iter()
                .map(|l| {
                    let mut grams: Vec<(Vec<u32>, u64)> =
                        l.counts.iter().map(|(g, &c)| (g.clone(), c)).collect();
                    grams.sort();
                    grams
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LmFile = serde_json::from_str(text)?;
        if file.format != LM_FORMAT || file.version != LM_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported model format {} v{}",
                file.format, file.version
            )));
        }
        if file.levels.len() != file.order || file.vocab.len() < 3 {
            return Err(Error::InvalidArgument("inconsistent model file".into()));
        }
        let ids = file
            .vocab
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i as u32))
            .collect();
        let levels = file
            .levels
            .into_iter()
            .map(|grams| Level::from_counts(grams.into_iter().collect()))
            .collect();
        Ok(NGramLM {
            language: file.language,
            config: LmConfig {
                order: file.order,
                min_count: file.min_count,
            },
            vocab: file.vocab,
            ids,
            levels,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn pad(ids: &HashMap<String, u32>, seq: &MorphemeSequence, order: usize) -> Vec<u32> {
    let mut padded = vec![BOS_ID; order - 1];
    padded.extend(
        seq.morphemes
            .iter()
            .map(|m| ids.get(m).copied().unwrap_or(UNK_ID)),
    );
    padded.push(EOS_ID);
    padded
}

impl SequenceScorer for NGramLM {
    fn log_prob(&self, seq: &MorphemeSequence) -> f64 {
        let padded = pad(&self.ids, seq, self.config.order);
        let n = self.config.order;
        padded
            .windows(n)
            .map(|w| self.prob_ids(&w[..n - 1], w[n - 1]).ln())
            .sum()
    }
}

const LM_FORMAT: &str = "mlid-ngram";
const LM_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LmFile {
    format: String,
    version: u32,
    language: String,
    order: usize,
    min_count: u64,
    vocab: Vec<String>,
    discounts: Vec<f64>,
    levels: Vec<Vec<(Vec<u32>, u64)>>,
}

/// Trains a model for `language` on the given utterances' surfaces.
pub fn train_lm(utterances: &[&Utterance], language: &str, config: LmConfig) -> Result<NGramLM> {
    let tokenizer = MorphemeTokenizer::for_language(language)?;
    let data = utterances
        .iter()
        .map(|u| tokenizer.tokenize_utterance(u))
        .collect::<Result<Vec<_>>>()?;
    NGramLM::train(language, &data, config)
}

/// `exp(-total log prob / total scored symbols)`, counting one end marker
/// per sequence.
pub fn perplexity(model: &dyn SequenceScorer, data: &[MorphemeSequence]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("perplexity input".into()));
    }
    let (lp, n) = data.iter().fold((0.0, 0usize), |(lp, n), seq| {
        (lp + model.log_prob(seq), n + seq.len() + 1)
    });
    Ok((-lp / n as f64).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOutcome {
    pub predicted: MorphemeSequence,
    pub recovered: bool,
    /// Distinct permutations scored besides the original.
    pub permutations: usize,
}

fn factorial_exceeds(n: usize, bound: usize) -> bool {
    let mut f: usize = 1;
    for i in 2..=n {
        f = f.saturating_mul(i);
        if f > bound {
            return true;
        }
    }
    f > bound
}

/// All permutations of `0..n` in lexicographic order.
fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut current: Vec<usize> = (0..n).collect();
    let mut out = vec![current.clone()];
    loop {
        let Some(i) = (0..n.saturating_sub(1))
            .rev()
            .find(|&i| current[i] < current[i + 1])
        else {
            return out;
        };
        let j = (i + 1..n)
            .rev()
            .find(|&j| current[j] > current[i])
            .expect("successor exists");
        current.swap(i, j);
        current[i + 1..].reverse();
        out.push(current.clone());
    }
}

/// Scores the original word order against up to `max_permutations`
/// distinct reorderings of its words and returns the best-scoring one.
/// Ties go to the original.
pub fn word_order_probe(
    model: &dyn SequenceScorer,
    seq: &MorphemeSequence,
    max_permutations: usize,
    seed: u64,
) -> Result<ProbeOutcome> {
    let groups = seq.word_groups();
    let n = groups.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "word order probe needs at least two words".into(),
        ));
    }
    let identity: Vec<usize> = (0..n).collect();
    let orders: Vec<Vec<usize>> = if !factorial_exceeds(n, max_permutations + 1) {
        all_permutations(n)
            .into_iter()
            .filter(|p| *p != identity)
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        let mut out = Vec::new();
        let mut candidate = identity.clone();
        while out.len() < max_permutations {
            candidate.shuffle(&mut rng);
            if candidate != identity && seen.insert(candidate.clone()) {
                out.push(candidate.clone());
            }
        }
        out
    };

    let build = |order: &[usize]| -> MorphemeSequence {
        let mut morphemes = Vec::with_capacity(seq.len());
        let mut spans = Vec::with_capacity(seq.len());
        for (pos, &g) in order.iter().enumerate() {
            morphemes.extend(groups[g].iter().cloned());
            spans.extend(std::iter::repeat_n(pos, groups[g].len()));
        }
        MorphemeSequence {
            morphemes,
            source_token_spans: spans,
        }
    };

    let mut best = seq.clone();
    let mut best_score = model.log_prob(seq);
    for order in &orders {
        let candidate = build(order);
        let score = model.log_prob(&candidate);
        if score > best_score {
            best_score = score;
            best = candidate;
        }
    }
    Ok(ProbeOutcome {
        recovered: best.morphemes == seq.morphemes,
        predicted: best,
        permutations: orders.len(),
    })
}
