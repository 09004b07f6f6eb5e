//! Command-line interface.
//!
//! Every successful run writes its outputs plus one JSON manifest that
//! records the effective options, SHA-256 digests of the inputs, the seed
//! and the tool version. On failure, outputs written so far are removed.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::corpus::{load_corpus, load_splits, Corpus, LanguagePair, Side, Utterance};
use crate::error::{Error, Result};
use crate::lexicon::{
    translate_word_by_word, FunctionLexicons, TranslationLexicon, BUILTIN_EN_ZH_LEXICON,
};
use crate::lm::{perplexity, word_order_probe, LmConfig, MorphemeTokenizer, NGramLM};
use crate::mapping::{
    accuracy as map_accuracy, assemble_dataset, cross_validate, train_mapping, MappingModel,
    PosteriorSet, Provenance, TrainConfig,
};
use crate::metrics::{
    agreement_matrix, distribution_report, f1_macro, mcc, unknown_agreement_matrix,
    AgreementMatrix, UnknownPolicy, VerdictSet,
};
use crate::p12::{
    det_curve, det_to_csv, estimate_alpha, score_corpus, scores_to_csv, AlphaEstimate,
    LanguageSide, Normalization, TokenOrderPrinciple,
};
use crate::principles::{
    annotate, coverage_of, parse_verdicts, verdicts_to_jsonl, Annotation, MlLabel, MlVerdict,
    Principle, SingletonPrinciple, SystemWordPrinciple, TokenMajority,
};
use crate::seed::derive_seed;
use crate::synth::{
    generate, generate_lexicons, load_truth, truth_to_csv, GrammarFamily, MatrixChoice, SynthSpec,
};

#[derive(Parser, Debug, Serialize)]
#[command(
    name = "mlid",
    version,
    about = "Matrix-language identification for code-switched text"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GlobalArgs {
    /// Language pair as `l1,l2`.
    #[arg(long, global = true, default_value = "en,zh")]
    pub pair: String,
    /// Master seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for per-utterance work (default: all cores).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub jobs: Option<usize>,
    /// JSON object of option values; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Manifest path (default: next to the primary output).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Load a corpus, apply script tagging and write it back normalized.
    Ingest(IngestArgs),
    /// Determine the matrix language of every code-switched utterance.
    Annotate(AnnotateArgs),
    /// Train an n-gram model on one language's monolingual utterances.
    TrainLm(TrainLmArgs),
    /// Perplexity of a model on monolingual utterances of its language.
    Perplexity(PerplexityArgs),
    /// Word-order recovery probe over monolingual utterances.
    WoProbe(WoProbeArgs),
    /// Word-by-word translation toward one language.
    Translate(TranslateArgs),
    /// Estimate the decision threshold from monolingual utterances.
    EstimateAlpha(EstimateAlphaArgs),
    /// Error-rate curve of the token-order decision over all thresholds.
    Det(DetArgs),
    /// Train a posterior-to-language mapping model.
    TrainMap(TrainMapArgs),
    /// Apply a mapping model to posterior vectors.
    PredictMap(PredictMapArgs),
    /// Stratified cross-validation of a mapping model.
    CvMap(CvMapArgs),
    /// Coverage, agreement and reference scores of verdict sets.
    Eval(EvalArgs),
    /// Language distributions and M-index of a corpus.
    Report(ReportArgs),
    /// Generate a synthetic corpus with lexicons and reference labels.
    Synth(SynthArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Annotate(_) => "annotate",
            Command::TrainLm(_) => "train-lm",
            Command::Perplexity(_) => "perplexity",
            Command::WoProbe(_) => "wo-probe",
            Command::Translate(_) => "translate",
            Command::EstimateAlpha(_) => "estimate-alpha",
            Command::Det(_) => "det",
            Command::TrainMap(_) => "train-map",
            Command::PredictMap(_) => "predict-map",
            Command::CvMap(_) => "cv-map",
            Command::Eval(_) => "eval",
            Command::Report(_) => "report",
            Command::Synth(_) => "synth",
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct IngestArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum PrincipleArg {
    P11,
    P2,
    Baseline,
    P12,
}

#[derive(Args, Debug, Serialize)]
pub struct ModelArgs {
    /// Translation lexicon TSV (default: built-in en/zh lexicon).
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Model of the first language.
    #[arg(long)]
    pub lm1: Option<PathBuf>,
    /// Model of the second language.
    #[arg(long)]
    pub lm2: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum)]
    pub principle: PrincipleArg,
    /// Function-word TSV (default: built-in en/zh/es lists).
    #[arg(long)]
    pub function_words: Option<PathBuf>,
    #[command(flatten)]
    pub models: ModelArgs,
    /// Decision threshold for the token-order principle.
    #[arg(long, allow_hyphen_values = true)]
    pub log_alpha: Option<f64>,
    /// Threshold file written by `estimate-alpha`.
    #[arg(long)]
    pub alpha: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct SplitArgs {
    /// Split file (JSON object of split name to utterance ids).
    #[arg(long, requires = "split")]
    pub splits: Option<PathBuf>,
    /// Restrict to this split.
    #[arg(long, requires = "splits")]
    pub split: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainLmArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Language to model (a code of the pair).
    #[arg(long)]
    pub language: String,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    #[arg(long, default_value_t = 2)]
    pub min_count: u64,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct PerplexityArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct WoProbeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub max_permutations: usize,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct TranslateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Target language code.
    #[arg(long)]
    pub target: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct EstimateAlphaArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub lm1: PathBuf,
    #[arg(long)]
    pub lm2: PathBuf,
    #[arg(long, default_value = "total")]
    pub normalization: String,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct DetArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub models: ModelArgs,
    /// Reference labels CSV `id,ml`.
    #[arg(long)]
    pub truth: PathBuf,
    /// Also write per-utterance scores here.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct MapTrainingArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Posterior CSV `id,p_0,...`.
    #[arg(long)]
    pub posteriors: PathBuf,
    /// Label source: lid, p11, p12 or p2.
    #[arg(long)]
    pub source: String,
    /// Verdict JSONL providing pseudo-labels (principle sources).
    #[arg(long)]
    pub verdicts: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.1)]
    pub validation_fraction: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainMapArgs {
    #[command(flatten)]
    pub data: MapTrainingArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct PredictMapArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub posteriors: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct CvMapArgs {
    #[command(flatten)]
    pub data: MapTrainingArgs,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnknownPolicyArg {
    PerSystem,
    Shared,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    /// Verdict set as `name=path`; repeatable.
    #[arg(long = "verdicts", required = true)]
    pub verdicts: Vec<String>,
    /// Reference labels CSV `id,ml`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "per-system")]
    pub unknown_policy: UnknownPolicyArg,
    /// Also write the agreement matrix as CSV.
    #[arg(long)]
    pub matrix_csv: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Verdict set as `name=path`; repeatable.
    #[arg(long = "verdicts")]
    pub verdicts: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Distinct,
    Same,
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    /// Word orders of the two grammars.
    #[arg(long, value_enum, default_value = "distinct")]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    /// Probability of replacing a content word by the other language.
    #[arg(long, default_value_t = 0.3)]
    pub rate: f64,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub singleton_only: bool,
    /// Probability that an utterance's matrix language is the first language.
    #[arg(long, default_value_t = 0.5)]
    pub p_l1: f64,
    /// Monolingual utterances generated per language for model training.
    #[arg(long, default_value_t = 2000)]
    pub mono_count: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<String>,
}

struct Run {
    manifest: RunManifest,
    written: Vec<PathBuf>,
    stdout: String,
}

impl Run {
    fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let digest = hex::encode(Sha256::digest(&bytes));
        self.manifest
            .inputs
            .insert(path.display().to_string(), digest);
        Ok(())
    }

    fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        self.written.push(path.to_path_buf());
        std::fs::write(path, contents).map_err(|e| Error::io(path, e))?;
        self.manifest.outputs.push(path.display().to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, path: &Path, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(path, &text)
    }

    fn say(&mut self, line: impl AsRef<str>) {
        self.stdout.push_str(line.as_ref());
        self.stdout.push('\n');
    }

    fn cleanup(&self) {
        for p in &self.written {
            let _ = std::fs::remove_file(p);
        }
    }
}

/// Appends option values from a `--config` JSON object, skipping keys
/// already given on the command line.
pub fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let args: Vec<String> = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let config_path = args.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            args.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    });
    let Some(config_path) = config_path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let object = value
        .as_object()
        .ok_or_else(|| Error::InvalidArgument("config must be a JSON object".into()))?;
    let given = |flag: &str| {
        args.iter()
            .any(|a| a == flag || a.starts_with(&format!("{flag}=")))
    };
    let mut extra: Vec<OsString> = Vec::new();
    for (key, value) in object {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" || given(&flag) {
            continue;
        }
        let values = match value {
            serde_json::Value::Array(items) => items.clone(),
            other => vec![other.clone()],
        };
        for v in values {
            let text = match v {
                serde_json::Value::String(s) => s,
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Bool(b) => b.to_string(),
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "config value for `{key}` is not scalar: {other}"
                    )))
                }
            };
            extra.push(format!("{flag}={text}").into());
        }
    }
    let mut out = argv;
    out.extend(extra);
    Ok(out)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args(argv: Vec<OsString>) -> i32 {
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(stdout) => {
            print!("{stdout}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                2
            } else {
                3
            }
        }
    }
}

/// Runs a parsed command; returns the text meant for standard output.
pub fn execute(cli: Cli) -> Result<String> {
    let mut run = Run {
        manifest: RunManifest {
            command: cli.command.name().to_string(),
            config: serde_json::to_value(&cli)?,
            inputs: BTreeMap::new(),
            seed: cli.global.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: Vec::new(),
        },
        written: Vec::new(),
        stdout: String::new(),
    };
    let mut body = || -> Result<PathBuf> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.jobs.unwrap_or(0))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| dispatch(&cli, &mut run))
    };
    let result = body();
    match result {
        Ok(primary) => {
            let manifest_path = cli
                .global
                .manifest
                .clone()
                .unwrap_or_else(|| default_manifest(&primary));
            let mut text = serde_json::to_string_pretty(&run.manifest)?;
            text.push('\n');
            if let Err(e) = std::fs::write(&manifest_path, text) {
                run.cleanup();
                return Err(Error::io(manifest_path, e));
            }
            Ok(run.stdout)
        }
        Err(e) => {
            run.cleanup();
            Err(e)
        }
    }
}

fn default_manifest(primary: &Path) -> PathBuf {
    if primary.is_dir() {
        primary.join("manifest.json")
    } else {
        let mut name = primary.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }
}

fn dispatch(cli: &Cli, run: &mut Run) -> Result<PathBuf> {
    let pair: LanguagePair = cli.global.pair.parse()?;
    let seed = cli.global.seed;
    match &cli.command {
        Command::Ingest(a) => ingest(a, &pair, run),
        Command::Annotate(a) => annotate_cmd(a, &pair, run),
        Command::TrainLm(a) => train_lm_cmd(a, &pair, run),
        Command::Perplexity(a) => perplexity_cmd(a, &pair, run),
        Command::WoProbe(a) => wo_probe_cmd(a, &pair, seed, run),
        Command::Translate(a) => translate_cmd(a, &pair, run),
        Command::EstimateAlpha(a) => estimate_alpha_cmd(a, &pair, run),
        Command::Det(a) => det_cmd(a, &pair, run),
        Command::TrainMap(a) => train_map_cmd(a, &pair, seed, run),
        Command::PredictMap(a) => predict_map_cmd(a, &pair, run),
        Command::CvMap(a) => cv_map_cmd(a, &pair, seed, run),
        Command::Eval(a) => eval_cmd(a, &pair, run),
        Command::Report(a) => report_cmd(a, &pair, run),
        Command::Synth(a) => synth_cmd(a, &pair, seed, run),
    }
}

fn read_corpus(path: &Path, pair: &LanguagePair, run: &mut Run) -> Result<Corpus> {
    run.input(path)?;
    load_corpus(path, pair.clone())
}

fn selected<'a>(
    corpus: &'a Corpus,
    split: &SplitArgs,
    run: &mut Run,
) -> Result<Vec<&'a Utterance>> {
    match (&split.splits, &split.split) {
        (Some(path), Some(name)) => {
            run.input(path)?;
            let mut c = corpus.clone();
            c.set_splits(load_splits(path)?)?;
            let ids: Vec<String> = c.split(name)?.iter().map(|u| u.id.clone()).collect();
            Ok(ids
                .iter()
                .map(|id| corpus.get(id).expect("split ids are in corpus"))
                .collect())
        }
        _ => Ok(corpus.utterances().iter().collect()),
    }
}

fn monolingual_of<'a>(utterances: &[&'a Utterance], side: Side) -> Vec<&'a Utterance> {
    utterances
        .iter()
        .copied()
        .filter(|u| u.kind.monolingual_side() == Some(side))
        .collect()
}

fn language_side(pair: &LanguagePair, language: &str) -> Result<Side> {
    pair.side_of(language)
        .ok_or_else(|| Error::UnknownLanguage(language.to_string()))
}

fn read_lexicon(
    path: Option<&PathBuf>,
    pair: &LanguagePair,
    run: &mut Run,
) -> Result<TranslationLexicon> {
    match path {
        Some(p) => {
            run.input(p)?;
            TranslationLexicon::load(p, pair.clone())
        }
        None if pair.l1() == "en" && pair.l2() == "zh" => {
            TranslationLexicon::from_tsv(BUILTIN_EN_ZH_LEXICON, "builtin", pair.clone())
        }
        None => Err(Error::InvalidArgument(format!(
            "no built-in translation lexicon for {pair}; pass --lexicon"
        ))),
    }
}

fn read_lm(path: Option<&PathBuf>, expected: &str, flag: &str, run: &mut Run) -> Result<NGramLM> {
    let path = path.ok_or_else(|| Error::InvalidArgument(format!("--{flag} is required")))?;
    run.input(path)?;
    let model = NGramLM::load(path)?;
    if model.language() != expected {
        return Err(Error::LanguageMismatch {
            expected: expected.to_string(),
            found: model.language().to_string(),
        });
    }
    Ok(model)
}

fn read_verdicts(spec: &str, pair: &LanguagePair, run: &mut Run) -> Result<VerdictSet> {
    let (name, path) = spec
        .split_once('=')
        .ok_or_else(|| Error::InvalidArgument(format!("expected name=path, got `{spec}`")))?;
    let path = PathBuf::from(path);
    run.input(&path)?;
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(VerdictSet::new(
        name,
        parse_verdicts(&text, &path.display().to_string(), pair)?,
    ))
}

fn ingest(a: &IngestArgs, pair: &LanguagePair, run: &mut Run) -> Result<PathBuf> {
    let corpus = read_corpus(&a.corpus, pair, run)?;
    run.write(&a.out, &corpus.to_jsonl())?;
    let cs = corpus.code_switched().count();
    let m1 = corpus.monolingual_in(Side::L1).count();
    let m2 = corpus.monolingual_in(Side::L2).count();
    run.say(format!(
        "utterances {}  code-switched {cs}  monolingual {} {m1}  monolingual {} {m2}",
        corpus.len(),
        pair.l1(),
        pair.l2()
    ));
    Ok(a.out.clone())
}

fn annotate_cmd(a: &AnnotateArgs, pair: &LanguagePair, run: &mut Run) -> Result<PathBuf> {
    let corpus = read_corpus(&a.corpus, pair, run)?;
    let annotations = match a.principle {
        PrincipleArg::P11 => annotate(&corpus, &SingletonPrinciple)?,
        PrincipleArg::Baseline => annotate(&corpus, &TokenMajority)?,
        PrincipleArg::P2 => {
            let lexicons = match &a.function_words {
                Some(p) => {
                    run.input(p)?;
                    FunctionLexicons::load(p)?
                }
                None => FunctionLexicons::builtin(),
            };
            annotate(
                &corpus,
                &SystemWordPrinciple {
                    lexicons,
                    pair: pair.clone(),
                },
            )?
        }
        PrincipleArg::P12 => {
            let lexicon = read_lexicon(a.models.lexicon.as_ref(), pair, run)?;
            let lm1 = read_lm(a.models.lm1.as_ref(), pair.l1(), "lm1", run)?;
            let lm2 = read_lm(a.models.lm2.as_ref(), pair.l2(), "lm2", run)?;
            let log_alpha = match (a.log_alpha, &a.alpha) {
                (Some(v), None) => v,
                (None, Some(p)) => {
                    run.input(p)?;
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    serde_json::from_str::<AlphaEstimate>(&text)?.log_alpha
                }
                _ => {
                    return Err(Error::InvalidArgument(
                        "the token-order principle needs exactly one of --log-alpha or --alpha"
                            .into(),
                    ))
                }
            };
            let det = TokenOrderPrinciple {
                lexicon: &lexicon,
                side1: LanguageSide::new(pair.l1(), &lm1)?,
                side2: LanguageSide::new(pair.l2(), &lm2)?,
                log_alpha,
            };
            annotate(&corpus, &det)?
        }
    };
    run.write(&a.out, &verdicts_to_jsonl(pair, &annotations))?;
    if !annotations.is_empty() {
        let coverage = coverage_of(annotations.iter().map(|a| &a.verdict))?;
        run.say(format!(
            "code-switched {}  coverage {:.4}",
            annotations.len(),
            coverage
        ));
    } else {
        run.say("code-switched 0");
    }
    Ok(a.out.clone())
}

fn train_lm_cmd(a: &TrainLmArgs, pair: &LanguagePair, run: &mut Run) -> Result<PathBuf> {
    let side = language_side(pair, &a.language)?;
    let corpus = read_corpus(&a.corpus, pair, run)?;
    let pool = selected(&corpus, &a.split, run)?;
    let mono = monolingual_of(&pool, side);
    let config = LmConfig {
        order: a.order,
        min_count: a.min_count,
    };
    let model = crate::lm::train_lm(&mono, &a.language, config)?;
    run.write(&a.out, &model.to_json())?;
    run.say(format!(
        "language {}  utterances {}  vocabulary {}",
        a.language,
        mono.len(),
        model.vocabulary().len()
    ));
    Ok(a.out.clone())
}

fn model_sequences(
    model: &NGramLM,
    corpus: &Corpus,
    split: &SplitArgs,
    run: &mut Run,
) -> Result<Vec<crate::lm::MorphemeSequence>> {
    let side = language_side(corpus.pair(), model.language())?;
    let pool = selected(corpus, split, run)?;
    let tokenizer = MorphemeTokenizer::for_language(model.language())?;
    monolingual_of(&pool, side)
        .iter()
        .map(|u| tokenizer.tokenize_utterance(u))
        .collect()
}

#[derive(Serialize)]
struct PerplexityReport<'a> {
    language: &'a str,
    sequences: usize,
    perplexity: f64,
}

fn perplexity_cmd(a: &PerplexityArgs, pair: &LanguagePair, run: &mut Run) -> Result<PathBuf> {
    run.input(&a.model)?;
    let model = NGramLM::load(&a.model)?;
    let corpus = read_corpus(&a.corpus, pair, run)?;
    let data = model_sequences(&model, &corpus, &a.split, run)?;
    let ppl = perplexity(&model, &data)?;
    run.write_json(
        &a.out,
        &PerplexityReport {
            language: model.language(),
            sequences: data.len(),
            perplexity: ppl,
        },
    )?;
    run.say(format!("perplexity {ppl:.4} over {} sequences", data.len()));
    Ok(a.out.clone())
}

#[derive(Serialize)]
struct ProbeReport {
    probes: usize,
    recovered: usize,
    accuracy: f64,
    max_permutations: usize,
}

fn wo_probe_cmd(a: &WoProbeArgs, pair: &LanguagePair, seed: u64, run: &mut Run) -> Result<PathBuf> {
    run.input(&a.model)?;
    let model = NGramLM::load(&a.model)?;
    let corpus = read_corpus(&a.corpus, pair, run)?;
    let data: Vec<_> = model_sequences(&model, &corpus, &a.split, run)?
        .into_iter()
        .filter(|s| s.word_groups().len() >= 2)
        .collect();
    if data.is_empty() {
        return Err(Error::EmptyInput(
            "no utterance with at least two words".into(),
        ));
    }
    let recovered = data
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            word_order_probe(&model, s, a.max_permutations, derive_seed(seed, i as u64))
                .map(|o| o.recovered)
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&r| r)
        .count();
    let report = ProbeReport {
        probes: data.len(),
        recovered,
        accuracy: recovered as f64 / data.len() as f64,
        max_permutations: a.max_permutations,
    };
    run.write_json(&a.out, &report)?;
    run.say(format!(
        "recovered {recovered}/{}  accuracy {:.4}",
        data.len(),
        report.accuracy
    ));
    Ok(a.out.clone())
}

#[derive(Serialize)]
struct TranslationRecord<'a> {
    id: &'a str,
    tokens: Vec<String>,
    oov: usize,
}

fn translate_cmd(a: &TranslateArgs, pair: &LanguagePair, run: &mut Run) -> Result<PathBuf> {
    language_side(pair, &a.target)?;
    let corpus = read_corpus(&a.corpus, pair, run)?;
    let lexicon = read_lexicon(a.lexicon.as_ref(), pair, run)?;
    let mut out = String::new();
    let mut oov = 0;
    for u in corpus.utterances() {
        let t = translate_word_by_word(u, &a.target, &lexicon)?;
        oov += t.oov;
        let record = TranslationRecord {
            id: &u.id,
            tokens: t.tokens,
            oov: t.oov,
        };
        out.push_str(&serde_json::to_string(&record)?);
        out.push('\n');
    }
    run.write(&a.out, &out)?;
    run.say(format!("utterances {}  oov tokens {oov}", corpus.len()));
    Ok(a.out.clone())
}

fn estimate_alpha_cmd(
    a: &EstimateAlphaArgs,
    pair: &LanguagePair,
    run: &mut Run,
) -> Result<PathBuf> {
    let normalization: Normalization = a.normalization.parse()?;
    let corpus = read_corpus(&a.corpus, pair, run)?;
    let lm1 = read_lm(Some(&a.lm1), pair.l1(), "lm1", run)?;
    let lm2 = read_lm(Some(&a.lm2), pair.l2(), "lm2", run)?;
    let pool = selected(&corpus, &a.split, run)?;
    let estimate = estimate_alpha(
        &monolingual_of(&pool, Side::L1),
        &monolingual_of(&pool, Side::L2),
        &LanguageSide::new(pair.l1(), &lm1)?,
        &LanguageSide::new(pair.l2(), &lm2)?,
        normalization,
    )?;
    run.write_json(&a.out, &estimate)?;
    run.say(format!("log_alpha {:.6}", estimate.log_alpha));
    Ok(a.out.clone())
}

fn det_cmd(a: &DetArgs, pair: &LanguagePair, run: &mut Run) -> Result<PathBuf> {
    let corpus = read_corpus(&a.corpus, pair, run)?;
    let lexicon = read_lexicon(a.models.lexicon.as_ref(), pair, run)?;
    let lm1 = read_lm(a.models.lm1.as_ref(), pair.l1(), "lm1", run)?;
    let lm2 = read_lm(a.models.lm2.as_ref(), pair.l2(), "lm2", run)?;
    run.input(&a.truth)?;
    let truth: HashMap<String, Side> = load_truth(&a.truth, pair)?.into_iter().collect();
    let scores = score_corpus(
        &corpus,
        &lexicon,
        &LanguageSide::new(pair.l1(), &lm1)?,
        &LanguageSide::new(pair.l2(), &lm2)?,
    )?;
    let (scores, reference): (Vec<_>, Vec<_>) = scores
        .into_iter()
        .filter_map(|s| truth.get(&s.id).map(|&t| (s, t)))
        .unzip();
    if scores.is_empty() {
        return Err(Error::EmptyInput(
            "no code-switched utterance has a reference label".into(),
        ));
    }
    let curve = det_curve(&scores, &reference)?;
    run.write(&a.out, &det_to_csv(&curve)?)?;
    if let Some(path) = &a.scores {
        run.write(path, &scores_to_csv(&scores)?)?;
    }
    run.say(format!(
        "points {}  utterances {}",
        curve.len(),
        scores.len()
    ));
    Ok(a.out.clone())
}

fn map_dataset(
    d: &MapTrainingArgs,
    pair: &LanguagePair,
    run: &mut Run,
) -> Result<crate::mapping::LabeledDataset> {
    let provenance: Provenance = d.source.parse()?;
    let corpus = read_corpus(&d.corpus, pair, run)?;
    run.input(&d.posteriors)?;
    let posteriors = PosteriorSet::load(&d.posteriors)?;
    let verdicts = match (provenance, &d.verdicts) {
        (Provenance::MonolingualLid, _) => Vec::new(),
        (_, Some(p)) => {
            run.input(p)?;
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            parse_verdicts(&text, &p.display().to_string(), pair)?
        }
        (_, None) => {
            return Err(Error::InvalidArgument(format!(
                "label source {provenance} needs --verdicts"
            )))
        }
    };
    assemble_dataset(&corpus, &posteriors, provenance, &verdicts)
}

fn train_config(d: &MapTrainingArgs, seed: u64) -> TrainConfig {
    TrainConfig {
        hidden: d.hidden,
        epochs: d.epochs,
        learning_rate: d.learning_rate,
        patience: d.patience,
        validation_fraction: d.validation_fraction,
        seed,
        ..TrainConfig::default()
    }
}

fn train_map_cmd(
    a: &TrainMapArgs,
    pair: &LanguagePair,
    seed: u64,
    run: &mut Run,
) -> Result<PathBuf> {
    let dataset = map_dataset(&a.data, pair, run)?;
    let (model, report) = train_mapping(&dataset, &train_config(&a.data, seed))?;
    run.write(&a.out, &model.to_json())?;
    run.say(format!(
        "samples {}  epochs {}  final loss {:.6}  training accuracy {:.4}",
        dataset.len(),
        report.epochs_run,
        report.train_loss.last().copied().unwrap_or(f64::NAN),
        map_accuracy(&model, &dataset)?
    ));
    Ok(a.out.clone())
}

fn predict_map_cmd(a: &PredictMapArgs, pair: &LanguagePair, run: &mut Run) -> Result<PathBuf> {
    run.input(&a.model)?;
    let model = MappingModel::load(&a.model)?;
    run.input(&a.posteriors)?;
    let posteriors = PosteriorSet::load(&a.posteriors)?;
    let annotations = posteriors
        .records()
        .par_iter()
        .map(|r| {
            let p = model.predict(&r.vector)?;
            Ok(Annotation {
                id: r.id.clone(),
                verdict: MlVerdict::determined(p.label, Principle::Mapping, Vec::new()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    run.write(&a.out, &verdicts_to_jsonl(pair, &annotations))?;
    run.say(format!("predictions {}", annotations.len()));
    Ok(a.out.clone())
}

fn cv_map_cmd(a: &CvMapArgs, pair: &LanguagePair, seed: u64, run: &mut Run) -> Result<PathBuf> {
    let dataset = map_dataset(&a.data, pair, run)?;
    let report = cross_validate(&dataset, a.folds, &train_config(&a.data, seed))?;
    run.write_json(&a.out, &report)?;
    let folds: Vec<String> = report.fold_f1.iter().map(|f| format!("{f:.4}")).collect();
    run.say(format!(
        "fold F1 {}  mean {:.4}",
        folds.join(" "),
        report.mean_f1
    ));
    Ok(a.out.clone())
}

#[derive(Serialize)]
struct TruthScores {
    covered: usize,
    f1_macro_covered: f64,
    mcc_covered: Option<f64>,
    /// Undetermined verdicts count as errors.
    f1_macro_all: f64,
}

#[derive(Serialize)]
struct SystemSummary {
    name: String,
    verdicts: usize,
    coverage: f64,
    truth: Option<TruthScores>,
}

#[derive(Serialize)]
struct EvalReport {
    systems: Vec<SystemSummary>,
    agreement: Option<AgreementMatrix>,
    agreement_with_unknown: Option<AgreementMatrix>,
}

fn truth_scores(set: &VerdictSet, truth: &HashMap<String, Side>) -> Result<TruthScores> {
    let (pred, gold): (Vec<MlLabel>, Vec<Side>) = set
        .annotations
        .iter()
        .filter_map(|a| truth.get(&a.id).map(|&t| (a.verdict.label, t)))
        .unzip();
    if pred.is_empty() {
        return Err(Error::NoOverlap(set.name.clone(), "truth".into()));
    }
    let (cp, cg): (Vec<MlLabel>, Vec<Side>) = pred
        .iter()
        .zip(&gold)
        .filter(|(p, _)| p.is_determined())
        .map(|(p, g)| (*p, *g))
        .unzip();
    let covered = cp.len();
    let (f1_covered, mcc_covered) = if covered == 0 {
        (0.0, None)
    } else {
        let sides: Vec<Side> = cp.iter().filter_map(|l| l.side()).collect();
        let m = if covered >= 2 {
            Some(mcc(&sides, &cg)?)
        } else {
            None
        };
        (f1_macro(&cp, &cg)?, m)
    };
    Ok(TruthScores {
        covered,
        f1_macro_covered: f1_covered,
        mcc_covered,
        f1_macro_all: f1_macro(&pred, &gold)?,
    })
}

fn eval_cmd(a: &EvalArgs, pair: &LanguagePair, run: &mut Run) -> Result<PathBuf> {
    let sets = a
        .verdicts
        .iter()
        .map(|v| read_verdicts(v, pair, run))
        .collect::<Result<Vec<_>>>()?;
    let truth = match &a.truth {
        Some(p) => {
            run.input(p)?;
            Some(load_truth(p, pair)?.into_iter().collect::<HashMap<_, _>>())
        }
        None => None,
    };
    let mut systems = Vec::new();
    for s in &sets {
        systems.push(SystemSummary {
            name: s.name.clone(),
            verdicts: s.annotations.len(),
            coverage: s.coverage()?,
            truth: truth.as_ref().map(|t| truth_scores(s, t)).transpose()?,
        });
    }
    let policy = match a.unknown_policy {
        UnknownPolicyArg::PerSystem => UnknownPolicy::PerSystem,
        UnknownPolicyArg::Shared => UnknownPolicy::Shared,
    };
    let (agreement, with_unknown) = if sets.len() >= 2 {
        (
            Some(agreement_matrix(&sets)?),
            Some(unknown_agreement_matrix(&sets, policy)?),
        )
    } else {
        (None, None)
    };
    let report = EvalReport {
        systems,
        agreement,
        agreement_with_unknown: with_unknown,
    };
    run.write_json(&a.out, &report)?;
    if let (Some(path), Some(m)) = (&a.matrix_csv, &report.agreement) {
        run.write(path, &m.to_csv()?)?;
    }
    let mut text = String::new();
    for s in &report.systems {
        let _ = write!(text, "{}: coverage {:.4}", s.name, s.coverage);
        if let Some(t) = &s.truth {
            let _ = write!(
                text,
                "  F1 {:.4}  F1(all) {:.4}",
                t.f1_macro_covered, t.f1_macro_all
            );
        }
        text.push('\n');
    }
    if let Some(m) = &report.agreement {
        text.push_str("MCC over pairwise-determined utterances\n");
        text.push_str(&m.to_text());
    }
    if let Some(m) = &report.agreement_with_unknown {
        text.push_str("MCC with undetermined as an extra class\n");
        text.push_str(&m.to_text());
    }
    run.say(text.trim_end());
    Ok(a.out.clone())
}

fn report_cmd(a: &ReportArgs, pair: &LanguagePair, run: &mut Run) -> Result<PathBuf> {
    let corpus = read_corpus(&a.corpus, pair, run)?;
    let sets = a
        .verdicts
        .iter()
        .map(|v| read_verdicts(v, pair, run))
        .collect::<Result<Vec<_>>>()?;
    let report = distribution_report(&corpus, &sets)?;
    run.write(&a.out, &report.to_csv()?)?;
    run.say(report.to_text().trim_end());
    Ok(a.out.clone())
}

fn synth_cmd(a: &SynthArgs, pair: &LanguagePair, seed: u64, run: &mut Run) -> Result<PathBuf> {
    let family = match a.family {
        FamilyArg::Distinct => GrammarFamily::DistinctOrder,
        FamilyArg::Same => GrammarFamily::SameOrder,
    };
    let mut spec = SynthSpec::builtin(pair.clone(), family, seed)?;
    spec.count = a.count;
    spec.insertion_rate = a.rate;
    spec.singleton_only = a.singleton_only;
    spec.matrix = MatrixChoice::Sampled { p_l1: a.p_l1 };
    let out = generate(&spec)?;
    let (lexicon, functions) = generate_lexicons(&spec)?;
    let dir = &a.out;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    run.write(&dir.join("corpus.jsonl"), &out.corpus.to_jsonl())?;
    run.write(&dir.join("truth.csv"), &truth_to_csv(pair, &out.truth)?)?;
    for (i, side) in [Side::L1, Side::L2].into_iter().enumerate() {
        if a.mono_count > 0 {
            let mono = generate(&spec.monolingual(
                side,
                a.mono_count,
                derive_seed(seed, 1000 + i as u64),
            ))?;
            run.write(
                &dir.join(format!("mono_{}.jsonl", pair.code(side))),
                &mono.corpus.to_jsonl(),
            )?;
        }
    }
    run.write(&dir.join("lexicon.tsv"), &lexicon.to_tsv())?;
    run.write(&dir.join("function_words.tsv"), &functions.to_tsv())?;
    run.write_json(&dir.join("spec.json"), &spec)?;
    run.say(format!(
        "utterances {}  code-switched {}",
        out.corpus.len(),
        out.truth.len()
    ));
    Ok(dir.clone())
}
