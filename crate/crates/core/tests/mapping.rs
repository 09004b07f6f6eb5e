mod common;

use common::{en_zh, rng, separable_posteriors};
use mlid::corpus::{Corpus, Side};
use mlid::mapping::{
    assemble_dataset, class_weights, cross_validate, gradient_check, gradient_check_detail,
    loss_and_gradient, stratified_folds, train_mapping, LabeledDataset, MappingModel,
    PosteriorRecord, PosteriorSet, Provenance, TrainConfig,
};
use mlid::principles::{annotate, coverage, SingletonPrinciple, TokenMajority};
use mlid::synth::{generate, GrammarFamily, SynthSpec};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn dataset(inputs: Vec<Vec<f64>>, labels: Vec<Side>) -> LabeledDataset {
    let ids = (0..inputs.len()).map(|i| format!("x{i}")).collect();
    LabeledDataset::new(Provenance::MonolingualLid, ids, inputs, labels).unwrap()
}

fn random_batch(r: &mut impl Rng, n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<Side>) {
    let inputs = (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| r.gen_range(0.01..1.0)).collect();
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
        .collect();
    let labels = (0..n)
        .map(|i| if i % 2 == 0 { Side::L1 } else { Side::L2 })
        .collect();
    (inputs, labels)
}

#[test]
fn gradient_check_on_fresh_models() {
    let mut r = rng(3);
    for seed in 0..20 {
        let dim = r.gen_range(2..12);
        let model = MappingModel::init(dim, r.gen_range(2..16), seed);
        let (x, y) = random_batch(&mut r, 4, dim);
        let err = gradient_check(&model, &x, &y).unwrap();
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn zero_model_bias_gradients_match_finite_differences() {
    let model = MappingModel::zeros(3, 4);
    let x = vec![vec![0.2, 0.3, 0.5], vec![0.2, 0.3, 0.5]];
    let y = vec![Side::L1, Side::L2];
    let check = gradient_check_detail(&model, &x, &y).unwrap();
    let (d, h) = (3, 4);
    let b1 = h * d..h * d + h;
    let b2 = h * d + h + 2 * h..model.param_count();
    for i in b1.chain(b2) {
        assert!(
            (check.analytic[i] - check.numeric[i]).abs() <= 1e-10,
            "param {i}"
        );
    }
}

#[test]
fn duplicate_samples_leave_gradient_unchanged() {
    let model = MappingModel::init(4, 5, 9);
    let x = vec![vec![0.1, 0.2, 0.3, 0.4]];
    let y = vec![Side::L2];
    let (l1, g1) = loss_and_gradient(&model, &x, &y, &[1.0]);
    let xs = vec![x[0].clone(); 3];
    let (l3, g3) = loss_and_gradient(&model, &xs, &[Side::L2; 3], &[1.0; 3]);
    assert!((l1 - l3).abs() < 1e-12);
    for (a, b) in g1.iter().zip(&g3) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn symmetric_model_ties_to_first_language() {
    let p = MappingModel::zeros(3, 2).predict(&[0.3, 0.3, 0.4]).unwrap();
    assert_eq!(p.probabilities, [0.5, 0.5]);
    assert_eq!(p.label, Side::L1);
    assert!(MappingModel::zeros(3, 2).predict(&[0.5, 0.5]).is_err());
}

#[test]
fn separable_toy_set_is_learned() {
    let inputs = vec![
        vec![0.9, 0.1],
        vec![0.8, 0.2],
        vec![0.7, 0.3],
        vec![0.3, 0.7],
        vec![0.2, 0.8],
        vec![0.1, 0.9],
    ];
    let labels = vec![Side::L1, Side::L1, Side::L1, Side::L2, Side::L2, Side::L2];
    let data = dataset(inputs, labels);
    let config = TrainConfig {
        validation_fraction: 0.0,
        ..TrainConfig::default()
    };
    let (model, report) = train_mapping(&data, &config).unwrap();
    assert_eq!(mlid::mapping::accuracy(&model, &data).unwrap(), 1.0);
    for (x, &y) in data.inputs.iter().zip(&data.labels) {
        assert_eq!(model.predict(x).unwrap().label, y);
    }
    assert!(report.epochs_run <= 500);
    for w in report
        .train_loss
        .iter()
        .step_by(50)
        .collect::<Vec<_>>()
        .windows(2)
    {
        assert!(*w[1] <= *w[0] + 1e-9);
    }
    let (again, _) = train_mapping(&data, &config).unwrap();
    assert_eq!(again.to_json(), model.to_json());
    let single = dataset(
        vec![vec![0.5, 0.5], vec![0.4, 0.6]],
        vec![Side::L1, Side::L1],
    );
    assert!(train_mapping(&single, &config).is_err());
}

#[test]
fn cross_validation_on_separable_and_shuffled_data() {
    let (inputs, labels) = separable_posteriors(50, 8, 1);
    let data = dataset(inputs.clone(), labels.clone());
    let config = TrainConfig::default();
    let report = cross_validate(&data, 5, &config).unwrap();
    assert_eq!(report.fold_f1.len(), 5);
    assert_eq!(report.mean_f1, 1.0);

    let mut means = Vec::new();
    for seed in 0..4 {
        let mut shuffled = labels.clone();
        shuffled.shuffle(&mut rng(100 + seed));
        let config = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        means.push(
            cross_validate(&dataset(inputs.clone(), shuffled), 5, &config)
                .unwrap()
                .mean_f1,
        );
    }
    let avg = means.iter().sum::<f64>() / means.len() as f64;
    assert!((0.3..=0.7).contains(&avg), "{means:?}");

    let tiny = vec![Side::L1, Side::L2, Side::L1];
    assert!(stratified_folds(&tiny, 3, 0).is_err());
    assert!(stratified_folds(&tiny, 4, 0).is_err());
}

fn posteriors_for(corpus: &Corpus) -> PosteriorSet {
    let records = corpus
        .utterances()
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let a = 0.2 + 0.6 * ((i % 7) as f64 / 7.0);
            PosteriorRecord {
                id: u.id.clone(),
                vector: vec![a, 1.0 - a],
            }
        })
        .collect();
    PosteriorSet::new(records).unwrap()
}

#[test]
fn dataset_sizes_follow_coverage() {
    let pair = en_zh();
    let mut spec = SynthSpec::builtin(pair.clone(), GrammarFamily::DistinctOrder, 4).unwrap();
    spec.count = 200;
    spec.singleton_only = false;
    let cs = generate(&spec).unwrap().corpus;
    let mono = generate(&spec.monolingual(Side::L1, 10, 5)).unwrap().corpus;
    let mut utterances = cs.utterances().to_vec();
    utterances.extend(mono.utterances().iter().cloned());
    let corpus = Corpus::new(pair, utterances).unwrap();
    let posteriors = posteriors_for(&corpus);
    let n_cs = corpus.code_switched().count();

    let verdicts = annotate(&corpus, &SingletonPrinciple).unwrap();
    let data = assemble_dataset(&corpus, &posteriors, Provenance::P11, &verdicts).unwrap();
    let cov = coverage(&corpus, &SingletonPrinciple).unwrap();
    assert!(cov < 1.0);
    assert_eq!(data.len() as f64, cov * n_cs as f64);

    let mono_data = assemble_dataset(
        &mono,
        &posteriors_for(&mono),
        Provenance::MonolingualLid,
        &[],
    )
    .unwrap();
    assert_eq!(mono_data.len(), 10);
    let mixed = assemble_dataset(&corpus, &posteriors, Provenance::MonolingualLid, &[]).unwrap();
    assert_eq!(mixed.len(), corpus.len() - n_cs);

    let all = annotate(&corpus, &TokenMajority).unwrap();
    assert!(assemble_dataset(&corpus, &posteriors, Provenance::P11, &all).is_err());

    let partial = PosteriorSet::new(posteriors.records()[1..].to_vec()).unwrap();
    assert!(
        assemble_dataset(&corpus, &partial, Provenance::MonolingualLid, &[]).is_err()
            || assemble_dataset(&corpus, &partial, Provenance::P11, &verdicts).is_err()
    );
}

#[test]
fn posterior_csv_validation() {
    assert!(PosteriorSet::from_csv("id,p_0,p_1\na,0.5,0.5\n", "t").is_ok());
    assert!(PosteriorSet::from_csv("id,p_0,p_1\na,0.5,0.6\n", "t").is_err());
    assert!(PosteriorSet::from_csv("id,p_0,p_1\na,1.5,-0.5\n", "t").is_err());
    assert!(PosteriorSet::from_csv("id,p_0,p_1\na,0.5,0.5\nb,1.0\n", "t").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradient_check_on_random_models(seed in any::<u64>(), dim in 2usize..8, hidden in 1usize..10, batch_seed in any::<u64>()) {
        let model = MappingModel::init(dim, hidden, seed);
        let (x, y) = random_batch(&mut rng(batch_seed), 4, dim);
        prop_assert!(gradient_check(&model, &x, &y).unwrap() < 1e-4);
    }

    #[test]
    fn softmax_sums_to_one(seed in any::<u64>(), input in prop::collection::vec(0.0f64..1.0, 6)) {
        let p = MappingModel::init(6, 8, seed).predict(&input).unwrap();
        prop_assert!((p.probabilities[0] + p.probabilities[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn class_weights_balance_classes(bits in prop::collection::vec(any::<bool>(), 1..40)) {
        let labels: Vec<Side> = bits.iter().map(|&b| if b { Side::L1 } else { Side::L2 }).collect();
        let w = class_weights(&labels);
        let total: f64 = w.iter().sum();
        prop_assert!((total - labels.len() as f64).abs() < 1e-9);
        for side in [Side::L1, Side::L2] {
            let mass: f64 = w.iter().zip(&labels).filter(|(_, l)| **l == side).map(|(x, _)| x).sum();
            if labels.contains(&side) && labels.contains(&side.other()) {
                prop_assert!((mass - labels.len() as f64 / 2.0).abs() < 1e-9);
            }
        }
    }
}
