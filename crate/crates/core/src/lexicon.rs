//! Word-by-word translation lexicons and closed-class function-word lists.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{LanguagePair, Lid, Side, Token, Utterance};
use crate::error::{Error, Result};

pub const BUILTIN_FUNCTION_WORDS: &str = include_str!("../data/function_words.tsv");
pub const BUILTIN_EN_ZH_LEXICON: &str = include_str!("../data/en_zh_lexicon.tsv");

/// Iterates over non-empty, non-comment TSV rows with 1-based line numbers,
/// skipping a header row whose first cell equals `header`.
fn tsv_rows<'a>(text: &'a str, header: &'a str) -> impl Iterator<Item = (usize, Vec<&'a str>)> {
    text.lines().enumerate().filter_map(move |(n, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            return None;
        }
        let cells: Vec<&str> = line.split('\t').map(str::trim).collect();
        if n == 0 && cells.first() == Some(&header) {
            return None;
        }
        Some((n + 1, cells))
    })
}

fn fold(surface: &str) -> String {
    surface.to_lowercase()
}

/// Bilingual lexicon with one mapping per translation direction.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationLexicon {
    pair: LanguagePair,
    /// Indexed by the source side: `[L1 → L2, L2 → L1]`.
    directions: [HashMap<String, Vec<String>>; 2],
}

/// Candidates per source surface as `(priority, file order, target)`.
type Staged = HashMap<String, Vec<(i64, usize, String)>>;

impl TranslationLexicon {
    pub fn empty(pair: LanguagePair) -> Self {
        TranslationLexicon {
            pair,
            directions: [HashMap::new(), HashMap::new()],
        }
    }

    /// Parses TSV rows `src_lang, src_surface, tgt_surface, priority`.
    /// Lower priority wins; equal priorities keep file order.
    pub fn from_tsv(text: &str, source: &str, pair: LanguagePair) -> Result<Self> {
        let mut staged: [Staged; 2] = [HashMap::new(), HashMap::new()];
        for (order, (line, cells)) in tsv_rows(text, "src_lang").enumerate() {
            let [lang, src, tgt, priority] = cells.as_slice() else {
                return Err(Error::parse(
                    source,
                    line,
                    "expected 4 tab-separated columns",
                ));
            };
            let side = pair.side_of(lang).ok_or_else(|| {
                Error::parse(
                    source,
                    line,
                    format!("language `{lang}` not in pair {pair}"),
                )
            })?;
            let priority: i64 = priority
                .parse()
                .map_err(|_| Error::parse(source, line, format!("bad priority `{priority}`")))?;
            // multi-word glosses keep their first word so lengths are preserved
            let target = tgt
                .split_whitespace()
                .next()
                .ok_or_else(|| Error::parse(source, line, "empty target"))?;
            if src.is_empty() {
                return Err(Error::parse(source, line, "empty source surface"));
            }
            staged[side.index()].entry(fold(src)).or_default().push((
                priority,
                order,
                target.to_string(),
            ));
        }
        let directions = staged.map(|m| {
            m.into_iter()
                .map(|(k, mut v)| {
                    v.sort();
                    (k, v.into_iter().map(|(_, _, t)| t).collect())
                })
                .collect()
        });
        Ok(TranslationLexicon { pair, directions })
    }

    pub fn load(path: impl AsRef<Path>, pair: LanguagePair) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text, &path.display().to_string(), pair)
    }

    pub fn pair(&self) -> &LanguagePair {
        &self.pair
    }

    pub fn insert(&mut self, from: Side, source: &str, target: &str) {
        self.directions[from.index()]
            .entry(fold(source))
            .or_default()
            .push(target.to_string());
    }

    /// Candidates for `surface` written in language `from`, in priority order.
    pub fn candidates(&self, from: Side, surface: &str) -> Option<&[String]> {
        self.directions[from.index()]
            .get(&fold(surface))
            .map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.directions.iter().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rows in TSV form, sorted for stable output.
    pub fn to_tsv(&self) -> String {
        let mut rows = Vec::new();
        for side in [Side::L1, Side::L2] {
            let mut keys: Vec<_> = self.directions[side.index()].iter().collect();
            keys.sort();
            for (src, targets) in keys {
                for (priority, tgt) in targets.iter().enumerate() {
                    rows.push(format!(
                        "{}\t{src}\t{tgt}\t{priority}",
                        self.pair.code(side)
                    ));
                }
            }
        }
        let mut out = String::from("src_lang\tsrc_surface\ttgt_surface\tpriority\n");
        for row in rows {
            out.push_str(&row);
            out.push('\n');
        }
        out
    }
}

/// Result of translating an utterance toward one language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Translation {
    pub tokens: Vec<String>,
    pub oov: usize,
}

/// Replaces every token of the non-target language by its first lexicon
/// candidate. Target-language tokens, `Other` tokens and out-of-vocabulary
/// tokens pass through unchanged; only the latter count towards `oov`.
pub fn translate_word_by_word(
    utterance: &Utterance,
    target: &str,
    lex: &TranslationLexicon,
) -> Result<Translation> {
    let target = lex
        .pair
        .side_of(target)
        .ok_or_else(|| Error::UnknownLanguage(target.to_string()))?;
    let mut oov = 0;
    let tokens = utterance
        .tokens
        .iter()
        .map(|t| match t.lid.side() {
            Some(side) if side != target => match lex.candidates(side, &t.surface) {
                Some([first, ..]) => first.clone(),
                _ => {
                    oov += 1;
                    t.surface.clone()
                }
            },
            _ => t.surface.clone(),
        })
        .collect();
    Ok(Translation { tokens, oov })
}

/// Closed function-word classes standing in for system morphemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FunctionClass {
    Det,
    Aux,
    Sconj,
    Cconj,
}

impl FunctionClass {
    pub const ALL: [FunctionClass; 4] = [
        FunctionClass::Det,
        FunctionClass::Aux,
        FunctionClass::Sconj,
        FunctionClass::Cconj,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FunctionClass::Det => "DET",
            FunctionClass::Aux => "AUX",
            FunctionClass::Sconj => "SCONJ",
            FunctionClass::Cconj => "CCONJ",
        }
    }
}

impl FromStr for FunctionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "DET" => Ok(FunctionClass::Det),
            "AUX" => Ok(FunctionClass::Aux),
            "SCONJ" => Ok(FunctionClass::Sconj),
            "CCONJ" => Ok(FunctionClass::Cconj),
            _ => Err(Error::InvalidArgument(format!(
                "unknown function class `{s}`"
            ))),
        }
    }
}

impl fmt::Display for FunctionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionWordLexicon {
    language: String,
    classes: BTreeMap<FunctionClass, BTreeSet<String>>,
    reverse: HashMap<String, FunctionClass>,
}

impl FunctionWordLexicon {
    pub fn new(language: impl Into<String>) -> Self {
        FunctionWordLexicon {
            language: language.into(),
            classes: FunctionClass::ALL
                .iter()
                .map(|&c| (c, BTreeSet::new()))
                .collect(),
            reverse: HashMap::new(),
        }
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn insert(&mut self, class: FunctionClass, surface: &str) -> Result<()> {
        let key = fold(surface);
        if let Some(&prev) = self.reverse.get(&key) {
            if prev != class {
                return Err(Error::InvalidArgument(format!(
                    "`{surface}` listed as both {prev} and {class} for `{}`",
                    self.language
                )));
            }
            return Ok(());
        }
        self.reverse.insert(key.clone(), class);
        self.classes.entry(class).or_default().insert(key);
        Ok(())
    }

    pub fn words(&self, class: FunctionClass) -> &BTreeSet<String> {
        &self.classes[&class]
    }

    pub fn class_of_surface(&self, surface: &str) -> Option<FunctionClass> {
        self.reverse.get(&fold(surface)).copied()
    }

    pub fn len(&self) -> usize {
        self.reverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reverse.is_empty()
    }
}

/// Looks up the function class of a token in the lexicon of its language.
pub fn function_class_of(
    token: &Token,
    lex: &FunctionWordLexicon,
    pair: &LanguagePair,
) -> Result<Option<FunctionClass>> {
    let found = pair.lid_code(token.lid);
    if token.lid == Lid::Other || found != lex.language {
        return Err(Error::LanguageMismatch {
            expected: lex.language.clone(),
            found: found.to_string(),
        });
    }
    Ok(lex.class_of_surface(&token.surface))
}

/// Function-word lexicons keyed by language code.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FunctionLexicons {
    by_language: BTreeMap<String, FunctionWordLexicon>,
}

impl FunctionLexicons {
    /// Parses TSV rows `lang, class, surface`.
    pub fn from_tsv(text: &str, source: &str) -> Result<Self> {
        let mut by_language: BTreeMap<String, FunctionWordLexicon> = BTreeMap::new();
        for (line, cells) in tsv_rows(text, "lang") {
            let [lang, class, surface] = cells.as_slice() else {
                return Err(Error::parse(
                    source,
                    line,
                    "expected 3 tab-separated columns",
                ));
            };
            let class: FunctionClass = class
                .parse()
                .map_err(|e: Error| Error::parse(source, line, e.to_string()))?;
            by_language
                .entry(lang.to_string())
                .or_insert_with(|| FunctionWordLexicon::new(*lang))
                .insert(class, surface)
                .map_err(|e| Error::parse(source, line, e.to_string()))?;
        }
        Ok(FunctionLexicons { by_language })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text, &path.display().to_string())
    }

    /// Reference lexicons for en, zh and es.
    pub fn builtin() -> Self {
        Self::from_tsv(BUILTIN_FUNCTION_WORDS, "builtin").expect("builtin lexicon parses")
    }

    pub fn insert(&mut self, lex: FunctionWordLexicon) {
        self.by_language.insert(lex.language.clone(), lex);
    }

    pub fn get(&self, language: &str) -> Option<&FunctionWordLexicon> {
        self.by_language.get(language)
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.by_language.keys().map(String::as_str)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("lang\tclass\tsurface\n");
        for (lang, lex) in &self.by_language {
            for (class, words) in &lex.classes {
                for w in words {
                    out.push_str(&format!("{lang}\t{class}\t{w}\n"));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn en_zh() -> LanguagePair {
        LanguagePair::new("en", "zh").unwrap()
    }

    #[test]
    fn translates_foreign_tokens() {
        let lex = TranslationLexicon::from_tsv("zh\t但是\tbut\t0\n", "t", en_zh()).unwrap();
        let u = Utterance::from_pairs("x", &[("但是", Lid::L2), ("parents", Lid::L1)]).unwrap();
        let t = translate_word_by_word(&u, "en", &lex).unwrap();
        assert_eq!(t.tokens, vec!["but", "parents"]);
        assert_eq!(t.oov, 0);
    }

    #[test]
    fn identity_and_oov() {
        let lex = TranslationLexicon::empty(en_zh());
        let mono = Utterance::from_pairs("x", &[("the", Lid::L1), ("cat", Lid::L1)]).unwrap();
        let t = translate_word_by_word(&mono, "en", &lex).unwrap();
        assert_eq!(t.tokens, vec!["the", "cat"]);
        assert_eq!(t.oov, 0);
        let foreign = Utterance::from_pairs("y", &[("blah", Lid::L2)]).unwrap();
        let t = translate_word_by_word(&foreign, "en", &lex).unwrap();
        assert_eq!(t.tokens, vec!["blah"]);
        assert_eq!(t.oov, 1);
    }

    #[test]
    fn priority_and_multiword() {
        let text = "src_lang\tsrc_surface\ttgt_surface\tpriority\n\
                    zh\t还有\talso\t1\n\
                    zh\t还有\tand then\t0\n";
        let lex = TranslationLexicon::from_tsv(text, "t", en_zh()).unwrap();
        assert_eq!(lex.candidates(Side::L2, "还有").unwrap(), ["and", "also"]);
        assert!(TranslationLexicon::from_tsv("fr\tx\ty\t0\n", "t", en_zh()).is_err());
    }

    #[test]
    fn function_classes() {
        let lexicons = FunctionLexicons::builtin();
        let en = lexicons.get("en").unwrap();
        let pair = en_zh();
        let the = Token::new("the", Lid::L1).unwrap();
        let cap = Token::new("The", Lid::L1).unwrap();
        let cat = Token::new("cat", Lid::L1).unwrap();
        assert_eq!(
            function_class_of(&the, en, &pair).unwrap(),
            Some(FunctionClass::Det)
        );
        assert_eq!(
            function_class_of(&cap, en, &pair).unwrap(),
            Some(FunctionClass::Det)
        );
        assert_eq!(function_class_of(&cat, en, &pair).unwrap(), None);
        assert_eq!(en.class_of_surface("but"), Some(FunctionClass::Cconj));
        assert_eq!(
            lexicons.get("zh").unwrap().class_of_surface("还有"),
            Some(FunctionClass::Cconj)
        );
        let zh_tok = Token::new("还有", Lid::L2).unwrap();
        assert!(matches!(
            function_class_of(&zh_tok, en, &pair),
            Err(Error::LanguageMismatch { .. })
        ));
    }

    #[test]
    fn class_conflict_rejected() {
        let text = "en\tDET\tthat\nen\tSCONJ\tthat\n";
        assert!(FunctionLexicons::from_tsv(text, "t").is_err());
    }

    #[test]
    fn all_classes_present() {
        let lex = FunctionWordLexicon::new("xx");
        for c in FunctionClass::ALL {
            assert!(lex.words(c).is_empty());
        }
    }
}
