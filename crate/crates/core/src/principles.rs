//! Textual matrix-language determination: the singleton principle, the
//! system-word principle and the token-majority baseline.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LanguagePair, Side, Utterance};
use crate::error::{Error, Result};
use crate::lexicon::{FunctionClass, FunctionLexicons};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MlLabel {
    L1,
    L2,
    Undetermined,
}

impl MlLabel {
    pub fn side(self) -> Option<Side> {
        match self {
            MlLabel::L1 => Some(Side::L1),
            MlLabel::L2 => Some(Side::L2),
            MlLabel::Undetermined => None,
        }
    }

    pub fn is_determined(self) -> bool {
        self != MlLabel::Undetermined
    }

    pub fn swapped(self) -> MlLabel {
        match self {
            MlLabel::L1 => MlLabel::L2,
            MlLabel::L2 => MlLabel::L1,
            MlLabel::Undetermined => MlLabel::Undetermined,
        }
    }
}

impl From<Side> for MlLabel {
    fn from(side: Side) -> Self {
        match side {
            Side::L1 => MlLabel::L1,
            Side::L2 => MlLabel::L2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Principle {
    P11,
    P2,
    Baseline,
    P12,
    /// Predictions of a posterior-to-language mapping model.
    Mapping,
}

impl Principle {
    pub fn as_str(self) -> &'static str {
        match self {
            Principle::P11 => "P11",
            Principle::P2 => "P2",
            Principle::Baseline => "BASELINE",
            Principle::P12 => "P12",
            Principle::Mapping => "MAP",
        }
    }
}

impl FromStr for Principle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('.', "").as_str() {
            "P11" => Ok(Principle::P11),
            "P2" => Ok(Principle::P2),
            "BASELINE" => Ok(Principle::Baseline),
            "P12" => Ok(Principle::P12),
            "MAP" | "MAPPING" => Ok(Principle::Mapping),
            _ => Err(Error::InvalidArgument(format!("unknown principle `{s}`"))),
        }
    }
}

impl fmt::Display for Principle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Output of one principle on one utterance. Evidence spans are half-open
/// token index ranges into the original utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlVerdict {
    pub label: MlLabel,
    pub principle: Principle,
    pub evidence: Vec<(usize, usize)>,
}

impl MlVerdict {
    pub fn undetermined(principle: Principle) -> Self {
        MlVerdict {
            label: MlLabel::Undetermined,
            principle,
            evidence: Vec::new(),
        }
    }

    pub fn determined(side: Side, principle: Principle, evidence: Vec<(usize, usize)>) -> Self {
        MlVerdict {
            label: side.into(),
            principle,
            evidence,
        }
    }
}

/// Anything that assigns a matrix language to an utterance.
pub trait MlDeterminer: Sync {
    fn principle(&self) -> Principle;
    fn determine(&self, utterance: &Utterance) -> Result<MlVerdict>;
}

fn require_cs(utterance: &Utterance) -> Result<()> {
    if utterance.is_code_switched() {
        Ok(())
    } else {
        Err(Error::NotCodeSwitched(utterance.id.clone()))
    }
}

/// Merges sorted token indices into half-open runs.
fn index_runs(indices: impl IntoIterator<Item = usize>) -> Vec<(usize, usize)> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for i in indices {
        match runs.last_mut() {
            Some((_, end)) if *end == i => *end = i + 1,
            _ => runs.push((i, i + 1)),
        }
    }
    runs
}

/// Singleton principle.
///
/// `Other` tokens are dropped first, so every maximal same-language run is
/// bordered by the other language or the utterance boundary. A language is
/// an embedded-language candidate when all of its runs are single words.
/// The verdict is the other language when exactly one candidate exists;
/// pure alternation (both languages only as single words) and multi-word
/// islands on both sides are undetermined.
pub fn determine_p11(utterance: &Utterance) -> Result<MlVerdict> {
    require_cs(utterance)?;
    let active: Vec<(usize, Side)> = utterance
        .tokens
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.lid.side().map(|s| (i, s)))
        .collect();
    let mut all_single = [true, true];
    let mut start = 0;
    while start < active.len() {
        let side = active[start].1;
        let mut end = start + 1;
        while end < active.len() && active[end].1 == side {
            end += 1;
        }
        if end - start > 1 {
            all_single[side.index()] = false;
        }
        start = end;
    }
    let embedded = match all_single {
        [true, false] => Side::L1,
        [false, true] => Side::L2,
        _ => return Ok(MlVerdict::undetermined(Principle::P11)),
    };
    let evidence = active
        .iter()
        .filter(|(_, s)| *s == embedded)
        .map(|&(i, _)| (i, i + 1))
        .collect();
    Ok(MlVerdict::determined(
        embedded.other(),
        Principle::P11,
        evidence,
    ))
}

/// System-word principle: the single language contributing at least one
/// function word is the matrix language. A token's `pos` tag, when present,
/// takes precedence over lexicon membership.
pub fn determine_p2(
    utterance: &Utterance,
    lexicons: &FunctionLexicons,
    pair: &LanguagePair,
) -> Result<MlVerdict> {
    require_cs(utterance)?;
    let mut hits: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, token) in utterance.tokens.iter().enumerate() {
        let Some(side) = token.lid.side() else {
            continue;
        };
        let class = match &token.pos {
            Some(tag) => tag.parse::<FunctionClass>().ok(),
            None => {
                let code = pair.code(side);
                lexicons
                    .get(code)
                    .ok_or_else(|| Error::MissingLexicon(code.to_string()))?
                    .class_of_surface(&token.surface)
            }
        };
        if class.is_some() {
            hits[side.index()].push(i);
        }
    }
    let side = match (hits[0].is_empty(), hits[1].is_empty()) {
        (false, true) => Side::L1,
        (true, false) => Side::L2,
        _ => return Ok(MlVerdict::undetermined(Principle::P2)),
    };
    let evidence = index_runs(hits[side.index()].iter().copied());
    Ok(MlVerdict::determined(side, Principle::P2, evidence))
}

/// Token-majority baseline; ties are undetermined.
pub fn determine_baseline(utterance: &Utterance) -> MlVerdict {
    let mut counts = [0usize; 2];
    for t in &utterance.tokens {
        if let Some(side) = t.lid.side() {
            counts[side.index()] += 1;
        }
    }
    let side = match counts[0].cmp(&counts[1]) {
        std::cmp::Ordering::Greater => Side::L1,
        std::cmp::Ordering::Less => Side::L2,
        std::cmp::Ordering::Equal => return MlVerdict::undetermined(Principle::Baseline),
    };
    let evidence = index_runs(
        utterance
            .tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.lid.side() == Some(side))
            .map(|(i, _)| i),
    );
    MlVerdict::determined(side, Principle::Baseline, evidence)
}

pub struct SingletonPrinciple;

impl MlDeterminer for SingletonPrinciple {
    fn principle(&self) -> Principle {
        Principle::P11
    }

    fn determine(&self, utterance: &Utterance) -> Result<MlVerdict> {
        determine_p11(utterance)
    }
}

pub struct SystemWordPrinciple {
    pub lexicons: FunctionLexicons,
    pub pair: LanguagePair,
}

impl MlDeterminer for SystemWordPrinciple {
    fn principle(&self) -> Principle {
        Principle::P2
    }

    fn determine(&self, utterance: &Utterance) -> Result<MlVerdict> {
        determine_p2(utterance, &self.lexicons, &self.pair)
    }
}

pub struct TokenMajority;

impl MlDeterminer for TokenMajority {
    fn principle(&self) -> Principle {
        Principle::Baseline
    }

    fn determine(&self, utterance: &Utterance) -> Result<MlVerdict> {
        Ok(determine_baseline(utterance))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub id: String,
    pub verdict: MlVerdict,
}

/// Runs a determiner over every code-switched utterance, in corpus order.
pub fn annotate(corpus: &Corpus, determiner: &dyn MlDeterminer) -> Result<Vec<Annotation>> {
    let cs: Vec<&Utterance> = corpus.code_switched().collect();
    cs.par_iter()
        .map(|u| {
            Ok(Annotation {
                id: u.id.clone(),
                verdict: determiner.determine(u)?,
            })
        })
        .collect()
}

/// Fraction of verdicts that are determined.
pub fn coverage_of<'a>(verdicts: impl IntoIterator<Item = &'a MlVerdict>) -> Result<f64> {
    let (mut total, mut determined) = (0usize, 0usize);
    for v in verdicts {
        total += 1;
        determined += usize::from(v.label.is_determined());
    }
    if total == 0 {
        return Err(Error::EmptyInput("no code-switched utterances".into()));
    }
    Ok(determined as f64 / total as f64)
}

/// Fraction of the corpus's code-switched utterances the determiner decides.
pub fn coverage(corpus: &Corpus, determiner: &dyn MlDeterminer) -> Result<f64> {
    let annotations = annotate(corpus, determiner)?;
    coverage_of(annotations.iter().map(|a| &a.verdict))
}

#[derive(Debug, Serialize, Deserialize)]
struct VerdictRecord {
    id: String,
    principle: String,
    label: String,
    evidence: Vec<[usize; 2]>,
}

pub const UNDETERMINED_LABEL: &str = "undetermined";

pub fn label_code(pair: &LanguagePair, label: MlLabel) -> &str {
    match label.side() {
        Some(side) => pair.code(side),
        None => UNDETERMINED_LABEL,
    }
}

pub fn parse_label(pair: &LanguagePair, code: &str) -> Result<MlLabel> {
    if code == UNDETERMINED_LABEL {
        return Ok(MlLabel::Undetermined);
    }
    pair.side_of(code)
        .map(MlLabel::from)
        .ok_or_else(|| Error::UnknownLanguage(code.to_string()))
}

/// Serializes annotations as verdict JSONL.
pub fn verdicts_to_jsonl(pair: &LanguagePair, annotations: &[Annotation]) -> String {
    let mut out = String::new();
    for a in annotations {
        let record = VerdictRecord {
            id: a.id.clone(),
            principle: a.verdict.principle.to_string(),
            label: label_code(pair, a.verdict.label).to_string(),
            evidence: a.verdict.evidence.iter().map(|&(s, e)| [s, e]).collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("verdict serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_verdicts(text: &str, source: &str, pair: &LanguagePair) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse = || -> Result<Annotation> {
            let r: VerdictRecord = serde_json::from_str(line)?;
            Ok(Annotation {
                id: r.id,
                verdict: MlVerdict {
                    label: parse_label(pair, &r.label)?,
                    principle: r.principle.parse()?,
                    evidence: r.evidence.into_iter().map(|[s, e]| (s, e)).collect(),
                },
            })
        };
        out.push(parse().map_err(|e| Error::parse(source, n + 1, e.to_string()))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Lid::{Other, L1 as EN, L2 as ZH};

    fn en_zh() -> LanguagePair {
        LanguagePair::new("en", "zh").unwrap()
    }

    #[test]
    fn p11_undetermined_on_multiword_islands() {
        let u = Utterance::from_pairs(
            "x",
            &[
                ("我", ZH),
                ("like", EN),
                ("really", EN),
                ("like", EN),
                ("你", ZH),
            ],
        )
        .unwrap();
        // zh appears only as singletons here, so en is the frame
        assert_eq!(determine_p11(&u).unwrap().label, MlLabel::L1);
        let u = Utterance::from_pairs(
            "y",
            &[
                ("我", ZH),
                ("们", ZH),
                ("really", EN),
                ("like", EN),
                ("你", ZH),
                ("的", ZH),
            ],
        )
        .unwrap();
        assert_eq!(determine_p11(&u).unwrap().label, MlLabel::Undetermined);
    }

    #[test]
    fn p11_alternation_is_undetermined() {
        let u = Utterance::from_pairs("x", &[("我", ZH), ("like", EN), ("你", ZH)]).unwrap();
        let v = determine_p11(&u).unwrap();
        assert_eq!(v.label, MlLabel::Undetermined);
        assert!(v.evidence.is_empty());
    }

    #[test]
    fn p11_ignores_other_tokens() {
        let u = Utterance::from_pairs(
            "x",
            &[
                ("我", ZH),
                ("们", ZH),
                ("Bob", Other),
                ("like", EN),
                ("你", ZH),
            ],
        )
        .unwrap();
        let v = determine_p11(&u).unwrap();
        assert_eq!(v.label, MlLabel::L2);
        assert_eq!(v.evidence, vec![(3, 4)]);
    }

    #[test]
    fn p11_rejects_monolingual() {
        let u = Utterance::from_pairs("x", &[("hi", EN)]).unwrap();
        assert!(matches!(determine_p11(&u), Err(Error::NotCodeSwitched(_))));
    }

    #[test]
    fn p2_conflict_and_missing_lexicon() {
        let lex = FunctionLexicons::builtin();
        let pair = en_zh();
        let both = Utterance::from_pairs("x", &[("the", EN), ("还有", ZH), ("cat", EN)]).unwrap();
        assert_eq!(
            determine_p2(&both, &lex, &pair).unwrap().label,
            MlLabel::Undetermined
        );
        let none = Utterance::from_pairs("y", &[("cat", EN), ("猫", ZH)]).unwrap();
        assert_eq!(
            determine_p2(&none, &lex, &pair).unwrap().label,
            MlLabel::Undetermined
        );
        let fr = LanguagePair::new("en", "fr").unwrap();
        let u = Utterance::from_pairs("z", &[("cat", EN), ("chat", ZH)]).unwrap();
        assert!(matches!(
            determine_p2(&u, &lex, &fr),
            Err(Error::MissingLexicon(_))
        ));
    }

    #[test]
    fn p2_pos_tags_override_lexicon() {
        let lex = FunctionLexicons::default();
        let pair = en_zh();
        let tokens = vec![
            crate::corpus::Token::new("im", EN)
                .unwrap()
                .with_pos("PRON"),
            crate::corpus::Token::new("with", EN)
                .unwrap()
                .with_pos("ADP"),
            crate::corpus::Token::new("the", EN)
                .unwrap()
                .with_pos("DET"),
            crate::corpus::Token::new("蛋黄", ZH)
                .unwrap()
                .with_pos("NOUN"),
        ];
        let u = Utterance::new("x", None, tokens).unwrap();
        let v = determine_p2(&u, &lex, &pair).unwrap();
        assert_eq!(v.label, MlLabel::L1);
        assert_eq!(v.evidence, vec![(2, 3)]);
    }

    #[test]
    fn baseline_counts_and_ties() {
        let tie =
            Utterance::from_pairs("x", &[("a", EN), ("b", EN), ("我", ZH), ("你", ZH)]).unwrap();
        assert_eq!(determine_baseline(&tie).label, MlLabel::Undetermined);
        let mono = Utterance::from_pairs("y", &[("a", EN), ("Bob", Other)]).unwrap();
        assert_eq!(determine_baseline(&mono).label, MlLabel::L1);
    }

    #[test]
    fn coverage_fractions() {
        let det = MlVerdict::determined(Side::L1, Principle::P11, vec![(0, 1)]);
        let und = MlVerdict::undetermined(Principle::P11);
        let v = [det.clone(), und.clone(), det.clone(), und, det];
        assert!((coverage_of(&v).unwrap() - 0.6).abs() < 1e-15);
        assert!(coverage_of(&[]).is_err());
    }

    #[test]
    fn verdict_jsonl_round_trip() {
        let pair = en_zh();
        let anns = vec![
            Annotation {
                id: "a".into(),
                verdict: MlVerdict::determined(Side::L2, Principle::P11, vec![(1, 2), (3, 4)]),
            },
            Annotation {
                id: "b".into(),
                verdict: MlVerdict::undetermined(Principle::P2),
            },
        ];
        let text = verdicts_to_jsonl(&pair, &anns);
        assert!(text
            .starts_with(r#"{"id":"a","principle":"P11","label":"zh","evidence":[[1,2],[3,4]]}"#));
        assert_eq!(parse_verdicts(&text, "t", &pair).unwrap(), anns);
    }
}
