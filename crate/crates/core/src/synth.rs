//! Synthetic code-switched corpora with known matrix language.
//!
//! Each utterance is produced from a sentence template of its matrix
//! language. Function-word slots are always filled from the matrix
//! language; content-word slots are filled from the matrix language or,
//! with the insertion rate, by the aligned content word of the other
//! language. The two grammars' content vocabularies are index-aligned, so
//! the generated bilingual lexicon is exact.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    writing_system, Corpus, LanguagePair, Lid, Side, Token, Utterance, WritingSystem,
};
use crate::error::{Error, Result};
use crate::lexicon::{FunctionClass, FunctionLexicons, FunctionWordLexicon, TranslationLexicon};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WordClass {
    Det,
    Aux,
    Sconj,
    Cconj,
    Noun,
    Verb,
    Adj,
    Adv,
}

impl WordClass {
    pub const ALL: [WordClass; 8] = [
        WordClass::Det,
        WordClass::Aux,
        WordClass::Sconj,
        WordClass::Cconj,
        WordClass::Noun,
        WordClass::Verb,
        WordClass::Adj,
        WordClass::Adv,
    ];

    pub fn function_class(self) -> Option<FunctionClass> {
        match self {
            WordClass::Det => Some(FunctionClass::Det),
            WordClass::Aux => Some(FunctionClass::Aux),
            WordClass::Sconj => Some(FunctionClass::Sconj),
            WordClass::Cconj => Some(FunctionClass::Cconj),
            _ => None,
        }
    }

    pub fn is_content(self) -> bool {
        self.function_class().is_none()
    }

    fn default_size(self) -> usize {
        match self {
            WordClass::Det | WordClass::Aux => 3,
            WordClass::Sconj | WordClass::Cconj => 2,
            WordClass::Noun => 40,
            WordClass::Verb => 20,
            WordClass::Adj => 12,
            WordClass::Adv => 8,
        }
    }
}

/// Constituent order of a template family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WordOrder {
    /// Subject, verb, object; determiners and adjectives precede nouns.
    Svo,
    /// Subject, object, verb; determiners follow nouns, auxiliaries follow verbs.
    Sov,
}

impl WordOrder {
    pub fn templates(self) -> Vec<Vec<WordClass>> {
        use WordClass::*;
        match self {
            WordOrder::Svo => vec![
                vec![Det, Noun, Verb, Det, Noun],
                vec![Det, Adj, Noun, Aux, Verb, Det, Noun],
                vec![Det, Noun, Aux, Verb, Adv],
                vec![Det, Noun, Verb, Det, Noun, Sconj, Det, Noun, Verb],
                vec![Det, Noun, Verb, Cconj, Det, Noun, Verb, Det, Adj, Noun],
            ],
            WordOrder::Sov => vec![
                vec![Noun, Det, Noun, Det, Verb],
                vec![Adj, Noun, Det, Noun, Det, Verb, Aux],
                vec![Noun, Det, Adv, Verb, Aux],
                vec![Noun, Det, Noun, Det, Verb, Sconj, Noun, Det, Verb],
                vec![Noun, Det, Verb, Cconj, Noun, Det, Adj, Noun, Det, Verb],
            ],
        }
    }
}

/// Vocabulary and templates of one synthetic language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthGrammar {
    pub language: String,
    pub order: WordOrder,
    pub vocabulary: BTreeMap<WordClass, Vec<String>>,
    pub templates: Vec<Vec<WordClass>>,
}

const CONSONANTS: &[char] = &[
    'b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 't', 'v', 'z',
];
const VOWELS: &[char] = &['a', 'i', 'o', 'u'];
/// First code point of the Han block used for pseudo-words.
const HAN_BASE: u32 = 0x4E00;
const HAN_CHARS: u32 = 400;

/// Bijective pseudo-word for `n`: three open syllables in Latin script,
/// two ideographs in Han script. Vowel-final Latin words never match the
/// suffix tables.
fn pseudo_word(script: WritingSystem, n: usize) -> String {
    match script {
        WritingSystem::Latin => {
            let base = CONSONANTS.len() * VOWELS.len();
            let mut rest = n;
            let mut word = String::new();
            for _ in 0..3 {
                let syl = rest % base;
                rest /= base;
                word.push(CONSONANTS[syl / VOWELS.len()]);
                word.push(VOWELS[syl % VOWELS.len()]);
            }
            assert_eq!(rest, 0, "pseudo-word index out of range");
            word
        }
        WritingSystem::Han => {
            let n = n as u32;
            assert!(n < HAN_CHARS * HAN_CHARS, "pseudo-word index out of range");
            [n / HAN_CHARS, n % HAN_CHARS]
                .iter()
                .map(|&i| char::from_u32(HAN_BASE + i).expect("valid ideograph"))
                .collect()
        }
    }
}

impl SynthGrammar {
    /// Built-in grammar for `language`. `slot` separates the word ranges of
    /// the two grammars of a pair so that their vocabularies are disjoint.
    pub fn builtin(language: &str, order: WordOrder, slot: usize) -> Result<Self> {
        let script = writing_system(language)
            .ok_or_else(|| Error::UnsupportedLanguage(language.to_string()))?;
        let mut vocabulary = BTreeMap::new();
        let mut next = slot * 1000;
        for class in WordClass::ALL {
            let words = (next..next + class.default_size())
                .map(|n| pseudo_word(script, n))
                .collect();
            next += class.default_size();
            vocabulary.insert(class, words);
        }
        Ok(SynthGrammar {
            language: language.to_string(),
            order,
            vocabulary,
            templates: order.templates(),
        })
    }

    pub fn words(&self, class: WordClass) -> &[String] {
        self.vocabulary.get(&class).map_or(&[], Vec::as_slice)
    }

    fn validate(&self) -> Result<()> {
        if self.templates.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "grammar `{}` has no templates",
                self.language
            )));
        }
        for template in &self.templates {
            if template.iter().all(|c| c.is_content()) {
                return Err(Error::InvalidArgument(format!(
                    "grammar `{}` has a template without function words",
                    self.language
                )));
            }
            if let Some(c) = template.iter().find(|c| self.words(**c).is_empty()) {
                return Err(Error::InvalidArgument(format!(
                    "grammar `{}` template uses undeclared class {c:?}",
                    self.language
                )));
            }
        }
        Ok(())
    }
}

/// How each utterance's matrix language is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixChoice {
    Fixed(Side),
    /// L1 with probability `p_l1`, independently per utterance.
    Sampled {
        p_l1: f64,
    },
}

/// Whether the two built-in grammars differ in word order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrammarFamily {
    /// L1 subject-verb-object, L2 subject-object-verb.
    DistinctOrder,
    /// Both subject-verb-object.
    SameOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub pair: LanguagePair,
    pub grammars: [SynthGrammar; 2],
    pub matrix: MatrixChoice,
    pub insertion_rate: f64,
    pub singleton_only: bool,
    pub count: usize,
    pub seed: u64,
    /// Utterance ids are this prefix followed by a zero-padded index.
    pub id_prefix: String,
}

impl SynthSpec {
    /// Built-in grammars for the pair with a balanced matrix-language draw,
    /// insertion rate 0.3, singleton-only insertions and 1000 utterances.
    pub fn builtin(pair: LanguagePair, family: GrammarFamily, seed: u64) -> Result<Self> {
        let order2 = match family {
            GrammarFamily::DistinctOrder => WordOrder::Sov,
            GrammarFamily::SameOrder => WordOrder::Svo,
        };
        let grammars = [
            SynthGrammar::builtin(pair.l1(), WordOrder::Svo, 0)?,
            SynthGrammar::builtin(pair.l2(), order2, 1)?,
        ];
        Ok(SynthSpec {
            pair,
            grammars,
            matrix: MatrixChoice::Sampled { p_l1: 0.5 },
            insertion_rate: 0.3,
            singleton_only: true,
            count: 1000,
            seed,
            id_prefix: "syn".to_string(),
        })
    }

    /// Same grammars, producing only monolingual utterances in `side`.
    pub fn monolingual(&self, side: Side, count: usize, seed: u64) -> SynthSpec {
        SynthSpec {
            matrix: MatrixChoice::Fixed(side),
            insertion_rate: 0.0,
            count,
            seed,
            id_prefix: format!("mono-{}-", self.pair.code(side)),
            ..self.clone()
        }
    }

    pub fn grammar(&self, side: Side) -> &SynthGrammar {
        &self.grammars[side.index()]
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.insertion_rate) {
            return Err(Error::InvalidArgument(format!(
                "insertion rate {} outside [0, 1]",
                self.insertion_rate
            )));
        }
        if let MatrixChoice::Sampled { p_l1 } = self.matrix {
            if !(0.0..=1.0).contains(&p_l1) {
                return Err(Error::InvalidArgument(format!(
                    "matrix probability {p_l1} outside [0, 1]"
                )));
            }
        }
        if self.count == 0 {
            return Err(Error::InvalidArgument(
                "utterance count must be at least 1".into(),
            ));
        }
        for side in [Side::L1, Side::L2] {
            let g = self.grammar(side);
            if g.language != self.pair.code(side) {
                return Err(Error::LanguageMismatch {
                    expected: self.pair.code(side).to_string(),
                    found: g.language.clone(),
                });
            }
            g.validate()?;
        }
        let [g1, g2] = &self.grammars;
        for class in WordClass::ALL.into_iter().filter(|c| c.is_content()) {
            if g1.words(class).len() != g2.words(class).len() {
                return Err(Error::InvalidArgument(format!(
                    "content class {class:?} is not aligned"
                )));
            }
        }
        let seen: HashSet<&String> = g1.vocabulary.values().flatten().collect();
        if let Some(w) = g2.vocabulary.values().flatten().find(|w| seen.contains(w)) {
            return Err(Error::InvalidArgument(format!(
                "word `{w}` appears in both grammars"
            )));
        }
        Ok(())
    }
}

/// Generated corpus and the matrix language of every code-switched utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub corpus: Corpus,
    pub truth: Vec<(String, Side)>,
}

fn generate_one(spec: &SynthSpec, index: usize) -> Result<(Utterance, Side)> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, index as u64));
    let ml = match spec.matrix {
        MatrixChoice::Fixed(side) => side,
        MatrixChoice::Sampled { p_l1 } => {
            if rng.gen_bool(p_l1) {
                Side::L1
            } else {
                Side::L2
            }
        }
    };
    let el = ml.other();
    let grammar = spec.grammar(ml);
    let template = &grammar.templates[rng.gen_range(0..grammar.templates.len())];
    let mut tokens = Vec::with_capacity(template.len());
    let mut previous_inserted = false;
    for &class in template {
        let words = grammar.words(class);
        let k = rng.gen_range(0..words.len());
        let inserted = class.is_content()
            && rng.gen_bool(spec.insertion_rate)
            && !(spec.singleton_only && previous_inserted);
        let (side, surface) = if inserted {
            (el, &spec.grammar(el).words(class)[k])
        } else {
            (ml, &words[k])
        };
        tokens.push(Token::new(surface.as_str(), Lid::from(side))?);
        previous_inserted = inserted;
    }
    let utterance = Utterance::new(
        format!("{}{index:06}", spec.id_prefix),
        Some(format!("spk{}", index % 10)),
        tokens,
    )?;
    Ok((utterance, ml))
}

/// Generates `spec.count` utterances; output is independent of scheduling.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let generated = (0..spec.count)
        .into_par_iter()
        .map(|i| generate_one(spec, i))
        .collect::<Result<Vec<_>>>()?;
    let truth = generated
        .iter()
        .filter(|(u, _)| u.is_code_switched())
        .map(|(u, ml)| (u.id.clone(), *ml))
        .collect();
    let utterances = generated.into_iter().map(|(u, _)| u).collect();
    Ok(SynthOutput {
        corpus: Corpus::new(spec.pair.clone(), utterances)?,
        truth,
    })
}

/// Exact bilingual lexicon over all synthetic words (index-aligned within
/// each class) and function-word lexicons for both languages.
pub fn generate_lexicons(spec: &SynthSpec) -> Result<(TranslationLexicon, FunctionLexicons)> {
    spec.validate()?;
    let mut translation = TranslationLexicon::empty(spec.pair.clone());
    let [g1, g2] = &spec.grammars;
    for class in WordClass::ALL {
        for (a, b) in g1.words(class).iter().zip(g2.words(class)) {
            translation.insert(Side::L1, a, b);
            translation.insert(Side::L2, b, a);
        }
    }
    let mut functions = FunctionLexicons::default();
    for grammar in &spec.grammars {
        let mut lex = FunctionWordLexicon::new(grammar.language.as_str());
        for class in WordClass::ALL {
            if let Some(fc) = class.function_class() {
                for w in grammar.words(class) {
                    lex.insert(fc, w)?;
                }
            }
        }
        functions.insert(lex);
    }
    Ok((translation, functions))
}

/// Ground truth as CSV `id,ml` with language codes.
pub fn truth_to_csv(pair: &LanguagePair, truth: &[(String, Side)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "ml"])?;
    for (id, side) in truth {
        w.write_record([id.as_str(), pair.code(*side)])?;
    }
    crate::error::finish_csv(w)
}

pub fn parse_truth(text: &str, source: &str, pair: &LanguagePair) -> Result<Vec<(String, Side)>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (n, row) in reader.records().enumerate() {
        let line = n + 2;
        let row = row.map_err(|e| Error::parse(source, line, e.to_string()))?;
        let (Some(id), Some(code)) = (row.get(0), row.get(1)) else {
            return Err(Error::parse(source, line, "expected columns id,ml"));
        };
        let side = pair
            .side_of(code)
            .ok_or_else(|| Error::parse(source, line, format!("unknown language `{code}`")))?;
        out.push((id.to_string(), side));
    }
    Ok(out)
}

pub fn load_truth(path: impl AsRef<Path>, pair: &LanguagePair) -> Result<Vec<(String, Side)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_truth(&text, &path.display().to_string(), pair)
}
