//! Agreement and quality measures over label vectors and verdict sets.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::Serialize;

use crate::corpus::{Corpus, Lid, Side};
use crate::error::{Error, Result};
use crate::principles::{Annotation, MlLabel};

/// Square contingency table between two labelings; rows follow the first
/// labeling, columns the second.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix<T> {
    labels: Vec<T>,
    counts: Vec<Vec<u64>>,
}

impl<T: Ord + Clone> ConfusionMatrix<T> {
    pub fn from_labels(a: &[T], b: &[T]) -> Result<Self> {
        check_lengths(a.len(), b.len())?;
        let labels: Vec<T> = a
            .iter()
            .chain(b)
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let pos = |x: &T| labels.binary_search(x).expect("label collected");
        let mut counts = vec![vec![0u64; labels.len()]; labels.len()];
        for (x, y) in a.iter().zip(b) {
            counts[pos(x)][pos(y)] += 1;
        }
        Ok(ConfusionMatrix { labels, counts })
    }

    pub fn labels(&self) -> &[T] {
        &self.labels
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Generalized (R_K) correlation coefficient; 0 when undefined.
    pub fn mcc(&self) -> f64 {
        let k = self.labels.len();
        let s = self.total() as f64;
        let trace: f64 = (0..k).map(|i| self.counts[i][i] as f64).sum();
        let rows: Vec<f64> = (0..k)
            .map(|i| self.counts[i].iter().sum::<u64>() as f64)
            .collect();
        let cols: Vec<f64> = (0..k)
            .map(|j| self.counts.iter().map(|r| r[j]).sum::<u64>() as f64)
            .collect();
        let cross: f64 = rows.iter().zip(&cols).map(|(r, c)| r * c).sum();
        let rows_sq: f64 = rows.iter().map(|r| r * r).sum();
        let cols_sq: f64 = cols.iter().map(|c| c * c).sum();
        let denom = ((s * s - rows_sq) * (s * s - cols_sq)).sqrt();
        if denom == 0.0 {
            0.0
        } else {
            (trace * s - cross) / denom
        }
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Matthews correlation between two labelings of the same items.
pub fn mcc<T: Ord + Clone>(a: &[T], b: &[T]) -> Result<f64> {
    check_lengths(a.len(), b.len())?;
    if a.len() < 2 {
        return Err(Error::InvalidArgument(
            "correlation needs at least two items".into(),
        ));
    }
    Ok(ConfusionMatrix::from_labels(a, b)?.mcc())
}

/// How undetermined verdicts are mapped to an extra class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownPolicy {
    /// Each system gets its own unknown class, so two unknowns never agree.
    #[default]
    PerSystem,
    /// Both systems share one unknown class.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum UnknownClass {
    Known(Side),
    Unknown(u8),
}

/// Correlation with undetermined verdicts kept as an unknown class.
pub fn mcc_with_unknown(a: &[MlLabel], b: &[MlLabel], policy: UnknownPolicy) -> Result<f64> {
    let map = |labels: &[MlLabel], system: u8| -> Vec<UnknownClass> {
        let tag = match policy {
            UnknownPolicy::PerSystem => system,
            UnknownPolicy::Shared => 0,
        };
        labels
            .iter()
            .map(|l| {
                l.side()
                    .map_or(UnknownClass::Unknown(tag), UnknownClass::Known)
            })
            .collect()
    };
    mcc(&map(a, 0), &map(b, 1))
}

/// Unweighted mean of per-language F1 over the universe `{L1, L2}`.
/// An undetermined prediction counts as a miss for its true class.
pub fn f1_macro(pred: &[MlLabel], truth: &[Side]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    if pred.is_empty() {
        return Err(Error::EmptyInput("f1 over no items".into()));
    }
    let mut total = 0.0;
    for class in [Side::L1, Side::L2] {
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for (&p, &t) in pred.iter().zip(truth) {
            let predicted = p.side() == Some(class);
            match (predicted, t == class) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let denom = 2 * tp + fp + fn_;
        if denom > 0 {
            total += 2.0 * tp as f64 / denom as f64;
        }
    }
    Ok(total / 2.0)
}

/// Share of items whose prediction equals the truth.
pub fn accuracy(pred: &[MlLabel], truth: &[Side]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    if pred.is_empty() {
        return Err(Error::EmptyInput("accuracy over no items".into()));
    }
    let hits = pred
        .iter()
        .zip(truth)
        .filter(|(p, t)| p.side() == Some(**t))
        .count();
    Ok(hits as f64 / pred.len() as f64)
}

/// A named collection of verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct VerdictSet {
    pub name: String,
    pub annotations: Vec<Annotation>,
}

impl VerdictSet {
    pub fn new(name: impl Into<String>, annotations: Vec<Annotation>) -> Self {
        VerdictSet {
            name: name.into(),
            annotations,
        }
    }

    fn determined(&self) -> HashMap<&str, Side> {
        self.annotations
            .iter()
            .filter_map(|a| a.verdict.label.side().map(|s| (a.id.as_str(), s)))
            .collect()
    }

    pub fn coverage(&self) -> Result<f64> {
        crate::principles::coverage_of(self.annotations.iter().map(|a| &a.verdict))
    }
}

/// Labels of two systems on items both determined, in the first system's order.
pub fn pairwise_covered(a: &VerdictSet, b: &VerdictSet) -> (Vec<Side>, Vec<Side>) {
    let other = b.determined();
    let mut left = Vec::new();
    let mut right = Vec::new();
    for ann in &a.annotations {
        if let (Some(x), Some(&y)) = (ann.verdict.label.side(), other.get(ann.id.as_str())) {
            left.push(x);
            right.push(y);
        }
    }
    (left, right)
}

/// Correlation over the items both systems determine.
pub fn pairwise_mcc(a: &VerdictSet, b: &VerdictSet) -> Result<f64> {
    let (x, y) = pairwise_covered(a, b);
    if x.is_empty() {
        return Err(Error::NoOverlap(a.name.clone(), b.name.clone()));
    }
    Ok(ConfusionMatrix::from_labels(&x, &y)?.mcc())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementMatrix {
    pub names: Vec<String>,
    /// `None` where the two systems share no determined item.
    pub cells: Vec<Vec<Option<f64>>>,
    pub overlap: Vec<Vec<usize>>,
}

pub fn agreement_matrix(systems: &[VerdictSet]) -> Result<AgreementMatrix> {
    if systems.len() < 2 {
        return Err(Error::InvalidArgument(
            "agreement needs at least two systems".into(),
        ));
    }
    let n = systems.len();
    let mut cells = vec![vec![None; n]; n];
    let mut overlap = vec![vec![0; n]; n];
    for i in 0..n {
        for j in 0..n {
            overlap[i][j] = pairwise_covered(&systems[i], &systems[j]).0.len();
            cells[i][j] = if i == j {
                Some(1.0)
            } else {
                match pairwise_mcc(&systems[i], &systems[j]) {
                    Ok(v) => Some(v),
                    Err(Error::NoOverlap(..)) => None,
                    Err(e) => return Err(e),
                }
            };
        }
    }
    Ok(AgreementMatrix {
        names: systems.iter().map(|s| s.name.clone()).collect(),
        cells,
        overlap,
    })
}

/// Correlations with undetermined verdicts kept as unknown classes, over
/// the items both systems label (determined or not).
pub fn unknown_agreement_matrix(
    systems: &[VerdictSet],
    policy: UnknownPolicy,
) -> Result<AgreementMatrix> {
    if systems.len() < 2 {
        return Err(Error::InvalidArgument(
            "agreement needs at least two systems".into(),
        ));
    }
    let n = systems.len();
    let mut cells = vec![vec![None; n]; n];
    let mut overlap = vec![vec![0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let other: HashMap<&str, MlLabel> = systems[j]
                .annotations
                .iter()
                .map(|a| (a.id.as_str(), a.verdict.label))
                .collect();
            let (a, b): (Vec<MlLabel>, Vec<MlLabel>) = systems[i]
                .annotations
                .iter()
                .filter_map(|x| other.get(x.id.as_str()).map(|&y| (x.verdict.label, y)))
                .unzip();
            overlap[i][j] = a.len();
            cells[i][j] = if i == j {
                Some(1.0)
            } else if a.len() < 2 {
                None
            } else {
                Some(mcc_with_unknown(&a, &b, policy)?)
            };
        }
    }
    Ok(AgreementMatrix {
        names: systems.iter().map(|s| s.name.clone()).collect(),
        cells,
        overlap,
    })
}

fn fmt_value(v: f64) -> String {
    format!("{v:.4}")
}

impl AgreementMatrix {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["system".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in self.names.iter().zip(&self.cells) {
            let mut record = vec![name.clone()];
            record.extend(row.iter().map(|c| c.map(fmt_value).unwrap_or_default()));
            w.write_record(&record)?;
        }
        crate::error::finish_csv(w)
    }

    pub fn to_text(&self) -> String {
        let mut rows = vec![std::iter::once(String::new())
            .chain(self.names.iter().cloned())
            .collect()];
        for (name, row) in self.names.iter().zip(&self.cells) {
            let mut r = vec![name.clone()];
            r.extend(
                row.iter()
                    .map(|c| c.map(fmt_value).unwrap_or_else(|| "-".into())),
            );
            rows.push(r);
        }
        align(&rows)
    }
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                let pad = widths[c] - cell.chars().count();
                if c == 0 {
                    format!("{cell}{}", " ".repeat(pad))
                } else {
                    format!("{}{cell}", " ".repeat(pad))
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionRow {
    pub name: String,
    pub counts: [usize; 2],
    pub percent: [f64; 2],
}

impl DistributionRow {
    fn from_counts(name: &str, counts: [usize; 2]) -> Result<Self> {
        let total = counts[0] + counts[1];
        if total == 0 {
            return Err(Error::EmptyInput(format!(
                "no items for distribution row `{name}`"
            )));
        }
        Ok(DistributionRow {
            name: name.to_string(),
            counts,
            percent: counts.map(|c| 100.0 * c as f64 / total as f64),
        })
    }
}

/// Per-language percentages of monolingual utterances, code-switched
/// tokens and each system's determined verdicts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionReport {
    pub languages: [String; 2],
    pub rows: Vec<DistributionRow>,
    pub m_index: f64,
}

pub const UTTERANCE_LID_ROW: &str = "utterance_lid";
pub const TOKEN_LID_ROW: &str = "token_lid";

fn cs_token_counts(corpus: &Corpus) -> [usize; 2] {
    let mut counts = [0usize; 2];
    for u in corpus.code_switched() {
        for t in &u.tokens {
            if let Some(side) = t.lid.side() {
                counts[side.index()] += 1;
            }
        }
    }
    counts
}

pub fn distribution_report(corpus: &Corpus, systems: &[VerdictSet]) -> Result<DistributionReport> {
    let mut mono = [0usize; 2];
    for u in corpus.monolingual() {
        mono[u.kind.monolingual_side().expect("monolingual").index()] += 1;
    }
    let tokens = cs_token_counts(corpus);
    let mut rows = vec![
        DistributionRow::from_counts(UTTERANCE_LID_ROW, mono)?,
        DistributionRow::from_counts(TOKEN_LID_ROW, tokens)?,
    ];
    for system in systems {
        let mut counts = [0usize; 2];
        for side in system
            .annotations
            .iter()
            .filter_map(|a| a.verdict.label.side())
        {
            counts[side.index()] += 1;
        }
        rows.push(DistributionRow::from_counts(&system.name, counts)?);
    }
    let pair = corpus.pair();
    Ok(DistributionReport {
        languages: [pair.l1().to_string(), pair.l2().to_string()],
        rows,
        m_index: m_index_from_counts(&tokens)?,
    })
}

impl DistributionReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["row", &self.languages[0], &self.languages[1], "count"])?;
        for r in &self.rows {
            w.write_record([
                r.name.clone(),
                format!("{:.2}", r.percent[0]),
                format!("{:.2}", r.percent[1]),
                (r.counts[0] + r.counts[1]).to_string(),
            ])?;
        }
        w.write_record([
            "m_index".to_string(),
            format!("{:.4}", self.m_index),
            String::new(),
            String::new(),
        ])?;
        crate::error::finish_csv(w)
    }

    pub fn to_text(&self) -> String {
        let mut rows = vec![vec![
            String::new(),
            format!("% {}", self.languages[0]),
            format!("% {}", self.languages[1]),
            "n".to_string(),
        ]];
        for r in &self.rows {
            rows.push(vec![
                r.name.clone(),
                format!("{:.1}", r.percent[0]),
                format!("{:.1}", r.percent[1]),
                (r.counts[0] + r.counts[1]).to_string(),
            ]);
        }
        let mut out = align(&rows);
        let _ = writeln!(out, "M-index {:.4}", self.m_index);
        out
    }
}

/// `(1 - Σp²) / ((k - 1) Σp²)` with `k = counts.len()`.
pub fn m_index_from_counts(counts: &[usize]) -> Result<f64> {
    if counts.len() < 2 {
        return Err(Error::InvalidArgument(
            "M-index needs at least two languages".into(),
        ));
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyInput("M-index over zero tokens".into()));
    }
    let sum_sq: f64 = counts
        .iter()
        .map(|&c| (c as f64 / total as f64).powi(2))
        .sum();
    Ok((1.0 - sum_sq) / ((counts.len() - 1) as f64 * sum_sq))
}

/// M-index of the code-switched tokens of a corpus (other-language
/// tokens excluded).
pub fn m_index(corpus: &Corpus) -> Result<f64> {
    m_index_from_counts(&cs_token_counts(corpus))
}

/// M-index of an arbitrary token sequence.
pub fn m_index_of_lids(lids: &[Lid]) -> Result<f64> {
    let mut counts = [0usize; 2];
    for side in lids.iter().filter_map(|l| l.side()) {
        counts[side.index()] += 1;
    }
    m_index_from_counts(&counts)
}
