//! Corpus ingestion: language pairs, tokens, utterances and splits.
//!
//! Corpora are JSONL files with one utterance per line:
//!
//! ```text
//! {"id": "u1", "speaker": null, "tokens": [{"surface": "毕业", "lid": null}, {"surface": "study", "lid": "en"}]}
//! ```
//!
//! A `null` lid asks the loader to tag the token from its script, which only
//! works for pairs with one Latin-script and one Han-script language.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_script::{Script as UnicodeScriptName, UnicodeScript};

use crate::error::{Error, Result};

/// One of the two languages of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    L1,
    L2,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::L1 => Side::L2,
            Side::L2 => Side::L1,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::L1 => 0,
            Side::L2 => 1,
        }
    }
}

/// Per-token language tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Lid {
    L1,
    L2,
    Other,
}

impl Lid {
    pub fn side(self) -> Option<Side> {
        match self {
            Lid::L1 => Some(Side::L1),
            Lid::L2 => Some(Side::L2),
            Lid::Other => None,
        }
    }

    pub fn swapped(self) -> Lid {
        match self {
            Lid::L1 => Lid::L2,
            Lid::L2 => Lid::L1,
            Lid::Other => Lid::Other,
        }
    }
}

impl From<Side> for Lid {
    fn from(side: Side) -> Lid {
        match side {
            Side::L1 => Lid::L1,
            Side::L2 => Lid::L2,
        }
    }
}

/// Script class of a token surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Script {
    Latin,
    Han,
    Mixed,
    Neutral,
}

/// Writing system of a supported language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WritingSystem {
    Latin,
    Han,
}

const HAN_LANGUAGES: &[&str] = &["zh", "cmn", "yue", "wuu", "nan"];
const LATIN_LANGUAGES: &[&str] = &[
    "en", "es", "fr", "de", "it", "pt", "nl", "ca", "ms", "id", "tl", "sw", "tr", "pl", "ro",
];

pub fn writing_system(code: &str) -> Option<WritingSystem> {
    if HAN_LANGUAGES.contains(&code) {
        Some(WritingSystem::Han)
    } else if LATIN_LANGUAGES.contains(&code) {
        Some(WritingSystem::Latin)
    } else {
        None
    }
}

/// Ordered pair of distinct language codes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LanguagePair {
    l1: String,
    l2: String,
}

impl LanguagePair {
    pub fn new(l1: impl Into<String>, l2: impl Into<String>) -> Result<Self> {
        let (l1, l2) = (l1.into(), l2.into());
        for code in [&l1, &l2] {
            if code.is_empty() || !code.bytes().all(|b| b.is_ascii_lowercase()) {
                return Err(Error::InvalidPair(format!(
                    "`{code}` is not a lowercase ASCII language code"
                )));
            }
        }
        if l1 == l2 {
            return Err(Error::InvalidPair(format!("both languages are `{l1}`")));
        }
        Ok(LanguagePair { l1, l2 })
    }

    pub fn l1(&self) -> &str {
        &self.l1
    }

    pub fn l2(&self) -> &str {
        &self.l2
    }

    pub fn code(&self, side: Side) -> &str {
        match side {
            Side::L1 => &self.l1,
            Side::L2 => &self.l2,
        }
    }

    pub fn side_of(&self, code: &str) -> Option<Side> {
        if code == self.l1 {
            Some(Side::L1)
        } else if code == self.l2 {
            Some(Side::L2)
        } else {
            None
        }
    }

    pub fn swapped(&self) -> LanguagePair {
        LanguagePair {
            l1: self.l2.clone(),
            l2: self.l1.clone(),
        }
    }

    /// Parses a lid string from a corpus file: a pair code or `other`.
    pub fn parse_lid(&self, value: &str) -> Result<Lid> {
        if value == "other" {
            return Ok(Lid::Other);
        }
        self.side_of(value)
            .map(Lid::from)
            .ok_or_else(|| Error::UnknownLanguage(value.to_string()))
    }

    pub fn lid_code(&self, lid: Lid) -> &str {
        match lid.side() {
            Some(side) => self.code(side),
            None => "other",
        }
    }
}

impl FromStr for LanguagePair {
    type Err = Error;

    /// Parses `l1,l2` (a `-` or `/` separator is accepted too).
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split([',', '-', '/']).map(str::trim).collect();
        match parts.as_slice() {
            [l1, l2] => LanguagePair::new(*l1, *l2),
            _ => Err(Error::InvalidPair(format!("expected `l1,l2`, got `{s}`"))),
        }
    }
}

impl fmt::Display for LanguagePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.l1, self.l2)
    }
}

/// Counts of Latin and Han characters in a surface form.
fn script_profile(surface: &str) -> (usize, usize) {
    surface
        .chars()
        .fold((0, 0), |(latin, han), c| match c.script() {
            UnicodeScriptName::Latin if c.is_alphabetic() => (latin + 1, han),
            UnicodeScriptName::Han => (latin, han + 1),
            _ => (latin, han),
        })
}

pub fn script_of(surface: &str) -> Script {
    match script_profile(surface) {
        (0, 0) => Script::Neutral,
        (_, 0) => Script::Latin,
        (0, _) => Script::Han,
        (latin, han) if latin == han => Script::Neutral,
        _ => Script::Mixed,
    }
}

/// A whitespace-free surface form with its language tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub lid: Lid,
    pub script: Script,
    /// Optional part-of-speech tag from an external tagger.
    pub pos: Option<String>,
}

impl Token {
    pub fn new(surface: impl Into<String>, lid: Lid) -> Result<Self> {
        let surface = surface.into();
        if surface.is_empty() {
            return Err(Error::InvalidArgument("empty token surface".into()));
        }
        if surface.chars().any(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!(
                "token `{surface}` contains whitespace"
            )));
        }
        let script = script_of(&surface);
        Ok(Token {
            surface,
            lid,
            script,
            pos: None,
        })
    }

    pub fn with_pos(mut self, pos: impl Into<String>) -> Self {
        self.pos = Some(pos.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UtteranceKind {
    MonolingualL1,
    MonolingualL2,
    CodeSwitched,
}

impl UtteranceKind {
    pub fn monolingual_side(self) -> Option<Side> {
        match self {
            UtteranceKind::MonolingualL1 => Some(Side::L1),
            UtteranceKind::MonolingualL2 => Some(Side::L2),
            UtteranceKind::CodeSwitched => None,
        }
    }
}

/// Classifies a token sequence by the languages it contains.
pub fn classify_kind(id: &str, tokens: &[Token]) -> Result<UtteranceKind> {
    let has = |lid| tokens.iter().any(|t| t.lid == lid);
    match (has(Lid::L1), has(Lid::L2)) {
        (true, true) => Ok(UtteranceKind::CodeSwitched),
        (true, false) => Ok(UtteranceKind::MonolingualL1),
        (false, true) => Ok(UtteranceKind::MonolingualL2),
        (false, false) => Err(Error::AllOther(id.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub id: String,
    pub speaker: Option<String>,
    pub tokens: Vec<Token>,
    pub kind: UtteranceKind,
}

impl Utterance {
    pub fn new(id: impl Into<String>, speaker: Option<String>, tokens: Vec<Token>) -> Result<Self> {
        let id = id.into();
        if tokens.is_empty() {
            return Err(Error::EmptyInput(format!("utterance `{id}` has no tokens")));
        }
        let kind = classify_kind(&id, &tokens)?;
        Ok(Utterance {
            id,
            speaker,
            tokens,
            kind,
        })
    }

    /// Builds an utterance from `(surface, lid)` pairs.
    pub fn from_pairs(id: impl Into<String>, pairs: &[(&str, Lid)]) -> Result<Self> {
        let tokens = pairs
            .iter()
            .map(|(s, lid)| Token::new(*s, *lid))
            .collect::<Result<Vec<_>>>()?;
        Utterance::new(id, None, tokens)
    }

    pub fn is_code_switched(&self) -> bool {
        self.kind == UtteranceKind::CodeSwitched
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    /// The same utterance with L1 and L2 tags exchanged.
    pub fn swapped(&self) -> Utterance {
        let tokens: Vec<Token> = self
            .tokens
            .iter()
            .map(|t| Token {
                lid: t.lid.swapped(),
                ..t.clone()
            })
            .collect();
        let kind = match self.kind {
            UtteranceKind::MonolingualL1 => UtteranceKind::MonolingualL2,
            UtteranceKind::MonolingualL2 => UtteranceKind::MonolingualL1,
            UtteranceKind::CodeSwitched => UtteranceKind::CodeSwitched,
        };
        Utterance {
            tokens,
            kind,
            ..self.clone()
        }
    }
}

/// Sides taken by the Latin and Han languages of a pair, in that order.
fn script_sides(pair: &LanguagePair) -> Result<(Side, Side)> {
    match (writing_system(pair.l1()), writing_system(pair.l2())) {
        (Some(WritingSystem::Latin), Some(WritingSystem::Han)) => Ok((Side::L1, Side::L2)),
        (Some(WritingSystem::Han), Some(WritingSystem::Latin)) => Ok((Side::L2, Side::L1)),
        _ => Err(Error::ScriptTaggingInapplicable(format!(
            "pair {pair} does not have one Latin-script and one Han-script language"
        ))),
    }
}

/// Resolves lids for tokens, keeping the fixed ones and tagging the rest by
/// script. Neutral tokens inherit from the nearest preceding non-neutral
/// token, or the nearest following one at the start of the utterance.
fn resolve_script_lids(
    surfaces: &[&str],
    fixed: &[Option<Lid>],
    pair: &LanguagePair,
) -> Result<Vec<Lid>> {
    let (latin, han) = script_sides(pair)?;
    let mut resolved: Vec<Option<Lid>> = Vec::with_capacity(surfaces.len());
    let mut neutral = vec![false; surfaces.len()];
    for (i, (surface, fixed)) in surfaces.iter().zip(fixed).enumerate() {
        let (n_latin, n_han) = script_profile(surface);
        neutral[i] = script_of(surface) == Script::Neutral;
        resolved.push(match fixed {
            Some(lid) => Some(*lid),
            None if neutral[i] => None,
            None if n_latin > n_han => Some(latin.into()),
            None => Some(han.into()),
        });
    }
    let anchors: Vec<usize> = (0..surfaces.len()).filter(|&i| !neutral[i]).collect();
    let mut out = Vec::with_capacity(surfaces.len());
    for i in 0..surfaces.len() {
        let lid = match resolved[i] {
            Some(lid) => lid,
            None => {
                let preceding = anchors.iter().rev().find(|&&a| a < i);
                let following = anchors.iter().find(|&&a| a > i);
                preceding
                    .or(following)
                    .and_then(|&a| resolved[a])
                    .unwrap_or(Lid::Other)
            }
        };
        out.push(lid);
    }
    Ok(out)
}

/// Re-tags every token of the utterance from its script. Tokens tagged
/// `Other` keep that tag.
pub fn tag_by_script(utterance: &Utterance, pair: &LanguagePair) -> Result<Utterance> {
    let surfaces = utterance.surfaces();
    let fixed: Vec<Option<Lid>> = utterance
        .tokens
        .iter()
        .map(|t| (t.lid == Lid::Other).then_some(Lid::Other))
        .collect();
    let lids = resolve_script_lids(&surfaces, &fixed, pair)?;
    let tokens = utterance
        .tokens
        .iter()
        .zip(lids)
        .map(|(t, lid)| Token { lid, ..t.clone() })
        .collect();
    Utterance::new(utterance.id.clone(), utterance.speaker.clone(), tokens)
}

#[derive(Debug, Serialize, Deserialize)]
struct TokenRecord {
    surface: String,
    lid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pos: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct UtteranceRecord {
    id: String,
    #[serde(default)]
    speaker: Option<String>,
    tokens: Vec<TokenRecord>,
}

/// A validated collection of utterances over one language pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pair: LanguagePair,
    utterances: Vec<Utterance>,
    index: HashMap<String, usize>,
    splits: BTreeMap<String, Vec<String>>,
}

impl Corpus {
    pub fn new(pair: LanguagePair, utterances: Vec<Utterance>) -> Result<Self> {
        if utterances.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut index = HashMap::with_capacity(utterances.len());
        for (i, u) in utterances.iter().enumerate() {
            if index.insert(u.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(u.id.clone()));
            }
        }
        Ok(Corpus {
            pair,
            utterances,
            index,
            splits: BTreeMap::new(),
        })
    }

    /// Parses JSONL text. `source` names the input in error messages.
    pub fn parse_jsonl(text: &str, source: &str, pair: LanguagePair) -> Result<Self> {
        let mut utterances = Vec::new();
        let mut seen = HashSet::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() {
                continue;
            }
            let record: UtteranceRecord = serde_json::from_str(line)
                .map_err(|e| Error::parse(source, line_no, e.to_string()))?;
            let utterance = utterance_from_record(record, &pair)
                .map_err(|e| Error::parse(source, line_no, e.to_string()))?;
            if !seen.insert(utterance.id.clone()) {
                return Err(Error::DuplicateId(utterance.id));
            }
            utterances.push(utterance);
        }
        Corpus::new(pair, utterances)
    }

    pub fn pair(&self) -> &LanguagePair {
        &self.pair
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Utterance> {
        self.index.get(id).map(|&i| &self.utterances[i])
    }

    pub fn code_switched(&self) -> impl Iterator<Item = &Utterance> {
        self.utterances.iter().filter(|u| u.is_code_switched())
    }

    pub fn monolingual(&self) -> impl Iterator<Item = &Utterance> {
        self.utterances.iter().filter(|u| !u.is_code_switched())
    }

    pub fn monolingual_in(&self, side: Side) -> impl Iterator<Item = &Utterance> {
        self.utterances
            .iter()
            .filter(move |u| u.kind.monolingual_side() == Some(side))
    }

    pub fn splits(&self) -> &BTreeMap<String, Vec<String>> {
        &self.splits
    }

    /// Installs named splits after checking membership and disjointness.
    pub fn set_splits(&mut self, splits: BTreeMap<String, Vec<String>>) -> Result<()> {
        let mut owner: HashMap<&str, &str> = HashMap::new();
        for (name, ids) in &splits {
            for id in ids {
                if !self.index.contains_key(id) {
                    return Err(Error::Split(format!(
                        "split `{name}` references unknown id `{id}`"
                    )));
                }
                if let Some(prev) = owner.insert(id, name) {
                    return Err(Error::Split(format!(
                        "id `{id}` appears in splits `{prev}` and `{name}`"
                    )));
                }
            }
        }
        self.splits = splits;
        Ok(())
    }

    pub fn split(&self, name: &str) -> Result<Vec<&Utterance>> {
        let ids = self
            .splits
            .get(name)
            .ok_or_else(|| Error::Split(format!("no split named `{name}`")))?;
        Ok(ids
            .iter()
            .map(|id| &self.utterances[self.index[id]])
            .collect())
    }

    /// Serializes the corpus as JSONL with explicit lids.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for u in &self.utterances {
            let record = UtteranceRecord {
                id: u.id.clone(),
                speaker: u.speaker.clone(),
                tokens: u
                    .tokens
                    .iter()
                    .map(|t| TokenRecord {
                        surface: t.surface.clone(),
                        lid: Some(self.pair.lid_code(t.lid).to_string()),
                        pos: t.pos.clone(),
                    })
                    .collect(),
            };
            out.push_str(&serde_json::to_string(&record).expect("corpus record serializes"));
            out.push('\n');
        }
        out
    }
}

fn utterance_from_record(record: UtteranceRecord, pair: &LanguagePair) -> Result<Utterance> {
    if record.id.is_empty() {
        return Err(Error::InvalidArgument("empty utterance id".into()));
    }
    let fixed = record
        .tokens
        .iter()
        .map(|t| {
            t.lid
                .as_deref()
                .map(|code| pair.parse_lid(code))
                .transpose()
        })
        .collect::<Result<Vec<Option<Lid>>>>()?;
    let lids: Vec<Lid> = if fixed.iter().any(Option::is_none) {
        let surfaces: Vec<&str> = record.tokens.iter().map(|t| t.surface.as_str()).collect();
        resolve_script_lids(&surfaces, &fixed, pair)?
    } else {
        fixed.into_iter().flatten().collect()
    };
    let tokens = record
        .tokens
        .into_iter()
        .zip(lids)
        .map(|(t, lid)| {
            let token = Token::new(t.surface, lid)?;
            Ok(match t.pos {
                Some(pos) => token.with_pos(pos),
                None => token,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Utterance::new(record.id, record.speaker, tokens)
}

pub fn load_corpus(path: impl AsRef<Path>, pair: LanguagePair) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Corpus::parse_jsonl(&text, &path.display().to_string(), pair)
}

/// Reads a splits file: a JSON object mapping split names to id lists.
pub fn load_splits(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<String>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn en_zh() -> LanguagePair {
        LanguagePair::new("en", "zh").unwrap()
    }

    #[test]
    fn pair_validation() {
        assert!(LanguagePair::new("en", "en").is_err());
        assert!(LanguagePair::new("", "zh").is_err());
        assert!(LanguagePair::new("EN", "zh").is_err());
        assert_eq!("en,es".parse::<LanguagePair>().unwrap().l2(), "es");
    }

    #[test]
    fn single_monolingual_line() {
        let text = r#"{"id":"a","speaker":null,"tokens":[{"surface":"hello","lid":"en"},{"surface":"there","lid":"en"}]}"#;
        let corpus = Corpus::parse_jsonl(text, "t", en_zh()).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.utterances()[0].kind, UtteranceKind::MonolingualL1);
    }

    #[test]
    fn mixed_line_is_code_switched() {
        let text =
            r#"{"id":"a","tokens":[{"surface":"我","lid":"zh"},{"surface":"like","lid":"en"}]}"#;
        let corpus = Corpus::parse_jsonl(text, "t", en_zh()).unwrap();
        assert_eq!(corpus.utterances()[0].kind, UtteranceKind::CodeSwitched);
    }

    #[test]
    fn malformed_line_is_named() {
        let text = [
            r#"{"id":"a","tokens":[{"surface":"x","lid":"en"}]}"#,
            r#"{"id":"b","tokens":[{"surface":"y","lid":"en"}]}"#,
            r#"{"id":"c","tokens":[{"surface":"#,
        ]
        .join("\n");
        match Corpus::parse_jsonl(&text, "t", en_zh()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_empty() {
        let line = r#"{"id":"a","tokens":[{"surface":"x","lid":"en"}]}"#;
        let text = format!("{line}\n{line}\n");
        assert!(matches!(
            Corpus::parse_jsonl(&text, "t", en_zh()),
            Err(Error::DuplicateId(_))
        ));
        assert!(matches!(
            Corpus::parse_jsonl("\n", "t", en_zh()),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn script_tagging_table_one() {
        let u = Utterance::from_pairs(
            "t1",
            &[
                ("毕业", Lid::Other),
                ("study", Lid::Other),
                ("life", Lid::Other),
            ],
        );
        // all-Other utterances are rejected; build through the loader instead
        assert!(u.is_err());
        let text = r#"{"id":"t1","tokens":[{"surface":"毕业过后","lid":null},{"surface":"urh","lid":null},{"surface":"你的","lid":null},{"surface":"study","lid":null},{"surface":"life","lid":null}]}"#;
        let corpus = Corpus::parse_jsonl(text, "t", en_zh()).unwrap();
        let lids: Vec<Lid> = corpus.utterances()[0]
            .tokens
            .iter()
            .map(|t| t.lid)
            .collect();
        assert_eq!(lids, vec![Lid::L2, Lid::L1, Lid::L2, Lid::L1, Lid::L1]);
    }

    #[test]
    fn digits_are_neutral() {
        assert_eq!(script_of("a1"), Script::Latin);
        assert_eq!(script_of("123"), Script::Neutral);
        assert_eq!(script_of("?"), Script::Neutral);
        assert_eq!(script_of("a中"), Script::Neutral);
        assert_eq!(script_of("ab中"), Script::Mixed);
        let u = Utterance::from_pairs("x", &[("a1", Lid::L2), ("中", Lid::L2)]).unwrap();
        let tagged = tag_by_script(&u, &en_zh()).unwrap();
        assert_eq!(tagged.tokens[0].lid, Lid::L1);
    }

    #[test]
    fn neutral_inherits_neighbours() {
        let u = Utterance::from_pairs(
            "x",
            &[
                ("123", Lid::L1),
                ("我", Lid::L1),
                ("!", Lid::L1),
                ("ok", Lid::L1),
            ],
        )
        .unwrap();
        let tagged = tag_by_script(&u, &en_zh()).unwrap();
        let lids: Vec<Lid> = tagged.tokens.iter().map(|t| t.lid).collect();
        assert_eq!(lids, vec![Lid::L2, Lid::L2, Lid::L2, Lid::L1]);
    }

    #[test]
    fn latin_pair_rejected() {
        let pair = LanguagePair::new("en", "es").unwrap();
        let u = Utterance::from_pairs("x", &[("hola", Lid::L2)]).unwrap();
        assert!(matches!(
            tag_by_script(&u, &pair),
            Err(Error::ScriptTaggingInapplicable(_))
        ));
    }

    #[test]
    fn classify_all_other_rejected() {
        let tokens = vec![Token::new("X", Lid::Other).unwrap()];
        assert!(matches!(
            classify_kind("x", &tokens),
            Err(Error::AllOther(_))
        ));
        let zh = vec![Token::new("我", Lid::L2).unwrap()];
        assert_eq!(
            classify_kind("x", &zh).unwrap(),
            UtteranceKind::MonolingualL2
        );
    }

    #[test]
    fn splits_must_be_disjoint_and_known() {
        let text = "{\"id\":\"a\",\"tokens\":[{\"surface\":\"x\",\"lid\":\"en\"}]}\n{\"id\":\"b\",\"tokens\":[{\"surface\":\"y\",\"lid\":\"en\"}]}";
        let mut corpus = Corpus::parse_jsonl(text, "t", en_zh()).unwrap();
        let mut splits = BTreeMap::new();
        splits.insert("train".to_string(), vec!["a".to_string()]);
        splits.insert("test".to_string(), vec!["a".to_string()]);
        assert!(corpus.set_splits(splits.clone()).is_err());
        splits.insert("test".to_string(), vec!["zzz".to_string()]);
        assert!(corpus.set_splits(splits.clone()).is_err());
        splits.insert("test".to_string(), vec!["b".to_string()]);
        corpus.set_splits(splits).unwrap();
        assert_eq!(corpus.split("test").unwrap()[0].id, "b");
    }
}
