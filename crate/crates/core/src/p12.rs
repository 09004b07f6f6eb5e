//! Token-order principle: translate an utterance into both languages word by
//! word, score each translation with that language's model and compare the
//! log-probability difference against a threshold `log α`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Side, Utterance};
use crate::error::{Error, Result};
use crate::lexicon::{translate_word_by_word, TranslationLexicon};
use crate::lm::{MorphemeTokenizer, SequenceScorer};
use crate::principles::{MlDeterminer, MlVerdict, Principle};

/// Tokenizer and scorer for one language of the pair.
pub struct LanguageSide<'a> {
    pub tokenizer: MorphemeTokenizer,
    pub scorer: &'a dyn SequenceScorer,
}

impl<'a> LanguageSide<'a> {
    pub fn new(language: &str, scorer: &'a dyn SequenceScorer) -> Result<Self> {
        Ok(LanguageSide {
            tokenizer: MorphemeTokenizer::for_language(language)?,
            scorer,
        })
    }

    /// Log probability and morpheme count of a token sequence.
    fn score<S: AsRef<str>>(&self, tokens: &[S]) -> Result<(f64, usize)> {
        let seq = self.tokenizer.tokenize(tokens)?;
        let lp = self.scorer.log_prob(&seq);
        if !lp.is_finite() {
            return Err(Error::NonFinite(format!("log probability {lp}")));
        }
        Ok((lp, seq.len()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorePair {
    pub id: String,
    pub lp1: f64,
    pub lp2: f64,
    pub oov1: usize,
    pub oov2: usize,
}

impl ScorePair {
    pub fn difference(&self) -> f64 {
        self.lp1 - self.lp2
    }
}

pub fn score_utterance(
    utterance: &Utterance,
    lex: &TranslationLexicon,
    side1: &LanguageSide<'_>,
    side2: &LanguageSide<'_>,
) -> Result<ScorePair> {
    let pair = lex.pair();
    let to1 = translate_word_by_word(utterance, pair.l1(), lex)?;
    let to2 = translate_word_by_word(utterance, pair.l2(), lex)?;
    let (lp1, _) = side1.score(&to1.tokens)?;
    let (lp2, _) = side2.score(&to2.tokens)?;
    Ok(ScorePair {
        id: utterance.id.clone(),
        lp1,
        lp2,
        oov1: to1.oov,
        oov2: to2.oov,
    })
}

/// L1 when `lp1 - lp2 >= log_alpha`, otherwise L2.
pub fn decide(score: &ScorePair, log_alpha: f64) -> MlVerdict {
    decide_difference(score.difference(), log_alpha)
}

fn decide_difference(difference: f64, log_alpha: f64) -> MlVerdict {
    let side = if difference >= log_alpha {
        Side::L1
    } else {
        Side::L2
    };
    MlVerdict::determined(side, Principle::P12, Vec::new())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Total,
    /// Each utterance score divided by its scored symbol count
    /// (morphemes plus the end marker).
    PerMorpheme,
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "total" => Ok(Normalization::Total),
            "per_morpheme" => Ok(Normalization::PerMorpheme),
            _ => Err(Error::InvalidArgument(format!(
                "unknown normalization `{s}`"
            ))),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Total => "total",
            Normalization::PerMorpheme => "per_morpheme",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub log_alpha: f64,
    pub n1: usize,
    pub n2: usize,
    pub normalization: Normalization,
}

/// Difference of mean scores of two sets.
pub fn estimate_alpha_from_scores(
    scores1: &[f64],
    scores2: &[f64],
    normalization: Normalization,
) -> Result<AlphaEstimate> {
    if scores1.is_empty() || scores2.is_empty() {
        return Err(Error::EmptyInput(
            "alpha estimation needs utterances in both languages".into(),
        ));
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let log_alpha = mean(scores1) - mean(scores2);
    if !log_alpha.is_finite() {
        return Err(Error::NonFinite(format!("log alpha {log_alpha}")));
    }
    Ok(AlphaEstimate {
        log_alpha,
        n1: scores1.len(),
        n2: scores2.len(),
        normalization,
    })
}

/// Expected monolingual log probability under L1's model minus that under
/// L2's, each model scoring untranslated utterances of its own language.
pub fn estimate_alpha(
    mono1: &[&Utterance],
    mono2: &[&Utterance],
    side1: &LanguageSide<'_>,
    side2: &LanguageSide<'_>,
    normalization: Normalization,
) -> Result<AlphaEstimate> {
    let scores = |mono: &[&Utterance], side: &LanguageSide<'_>| -> Result<Vec<f64>> {
        mono.par_iter()
            .map(|u| {
                let (lp, n) = side.score(&u.surfaces())?;
                Ok(match normalization {
                    Normalization::Total => lp,
                    Normalization::PerMorpheme => lp / (n + 1) as f64,
                })
            })
            .collect()
    };
    estimate_alpha_from_scores(
        &scores(mono1, side1)?,
        &scores(mono2, side2)?,
        normalization,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub log_alpha: f64,
    pub fpr: f64,
    pub fnr: f64,
}

/// Error rates at every distinct score difference plus the two infinite
/// sentinels, in increasing threshold order. L2 items decided L1 are false
/// positives; L1 items decided L2 are false negatives.
pub fn det_curve(scores: &[ScorePair], reference: &[Side]) -> Result<Vec<DetPoint>> {
    if scores.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: reference.len(),
        });
    }
    let n_pos = reference.iter().filter(|&&s| s == Side::L1).count();
    let n_neg = reference.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut items: Vec<(f64, Side)> = scores
        .iter()
        .map(ScorePair::difference)
        .zip(reference.iter().copied())
        .collect();
    if let Some((d, _)) = items.iter().find(|(d, _)| !d.is_finite()) {
        return Err(Error::NonFinite(format!("score difference {d}")));
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut points = vec![DetPoint {
        log_alpha: f64::NEG_INFINITY,
        fpr: 1.0,
        fnr: 0.0,
    }];
    // items below index i are decided L2
    let (mut below_pos, mut below_neg) = (0usize, 0usize);
    let mut i = 0;
    while i < items.len() {
        let threshold = items[i].0;
        points.push(DetPoint {
            log_alpha: threshold,
            fpr: (n_neg - below_neg) as f64 / n_neg as f64,
            fnr: below_pos as f64 / n_pos as f64,
        });
        while i < items.len() && items[i].0 == threshold {
            match items[i].1 {
                Side::L1 => below_pos += 1,
                Side::L2 => below_neg += 1,
            }
            i += 1;
        }
    }
    points.push(DetPoint {
        log_alpha: f64::INFINITY,
        fpr: 0.0,
        fnr: 1.0,
    });
    Ok(points)
}

/// The full token-order principle as a determiner.
pub struct TokenOrderPrinciple<'a> {
    pub lexicon: &'a TranslationLexicon,
    pub side1: LanguageSide<'a>,
    pub side2: LanguageSide<'a>,
    pub log_alpha: f64,
}

impl MlDeterminer for TokenOrderPrinciple<'_> {
    fn principle(&self) -> Principle {
        Principle::P12
    }

    fn determine(&self, utterance: &Utterance) -> Result<MlVerdict> {
        let score = score_utterance(utterance, self.lexicon, &self.side1, &self.side2)?;
        let mut verdict = decide(&score, self.log_alpha);
        verdict.evidence = vec![(0, utterance.len())];
        Ok(verdict)
    }
}

/// Scores every code-switched utterance of the corpus, in corpus order.
pub fn score_corpus(
    corpus: &Corpus,
    lex: &TranslationLexicon,
    side1: &LanguageSide<'_>,
    side2: &LanguageSide<'_>,
) -> Result<Vec<ScorePair>> {
    let cs: Vec<&Utterance> = corpus.code_switched().collect();
    cs.par_iter()
        .map(|u| score_utterance(u, lex, side1, side2))
        .collect()
}

pub fn scores_to_csv(scores: &[ScorePair]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in scores {
        w.serialize(s)?;
    }
    crate::error::finish_csv(w)
}

pub fn det_to_csv(points: &[DetPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["log_alpha", "fpr", "fnr"])?;
    for p in points {
        w.write_record([
            p.log_alpha.to_string(),
            p.fpr.to_string(),
            p.fnr.to_string(),
        ])?;
    }
    crate::error::finish_csv(w)
}

/// Swaps the roles of the two languages in a score.
pub fn swap_scores(score: &ScorePair) -> ScorePair {
    ScorePair {
        id: score.id.clone(),
        lp1: score.lp2,
        lp2: score.lp1,
        oov1: score.oov2,
        oov2: score.oov1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::principles::MlLabel;

    fn sp(lp1: f64, lp2: f64) -> ScorePair {
        ScorePair {
            id: "x".into(),
            lp1,
            lp2,
            oov1: 0,
            oov2: 0,
        }
    }

    #[test]
    fn decision_examples() {
        assert_eq!(decide(&sp(-5.0, -8.0), 0.0).label, MlLabel::L1);
        assert_eq!(decide(&sp(-5.0, -4.9), -0.5).label, MlLabel::L1);
        assert_eq!(decide(&sp(-5.0, -4.0), -1.0).label, MlLabel::L1);
        assert_eq!(decide(&sp(-5.0, -4.0), -0.5).label, MlLabel::L2);
    }

    #[test]
    fn alpha_arithmetic() {
        let est =
            estimate_alpha_from_scores(&[-9.0, -11.0], &[-12.0], Normalization::Total).unwrap();
        assert!((est.log_alpha - 2.0).abs() < 1e-15);
        assert_eq!((est.n1, est.n2), (2, 1));
        let same =
            estimate_alpha_from_scores(&[-3.0, -4.0], &[-4.0, -3.0], Normalization::Total).unwrap();
        assert_eq!(same.log_alpha, 0.0);
        assert!(estimate_alpha_from_scores(&[], &[-1.0], Normalization::Total).is_err());
    }

    #[test]
    fn det_sentinels_and_separability() {
        let scores = vec![sp(0.0, -2.0), sp(0.0, -1.0), sp(0.0, 1.0), sp(0.0, 2.0)];
        let refs = vec![Side::L1, Side::L1, Side::L2, Side::L2];
        let curve = det_curve(&scores, &refs).unwrap();
        assert_eq!(curve.first().unwrap().fpr, 1.0);
        assert_eq!(curve.first().unwrap().fnr, 0.0);
        assert_eq!(curve.last().unwrap().fpr, 0.0);
        assert_eq!(curve.last().unwrap().fnr, 1.0);
        assert!(curve.iter().any(|p| p.fpr == 0.0 && p.fnr == 0.0));
        assert!(det_curve(&scores, &[Side::L1; 4]).is_err());
        assert!(det_curve(&scores, &refs[..3]).is_err());
    }

    #[test]
    fn det_csv_header() {
        let csv = det_to_csv(&[DetPoint {
            log_alpha: f64::NEG_INFINITY,
            fpr: 1.0,
            fnr: 0.0,
        }])
        .unwrap();
        assert_eq!(csv, "log_alpha,fpr,fnr\n-inf,1,0\n");
        let csv = scores_to_csv(&[sp(-1.5, -2.0)]).unwrap();
        assert_eq!(csv, "id,lp1,lp2,oov1,oov2\nx,-1.5,-2.0,0,0\n");
    }
}
