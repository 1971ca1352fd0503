use offload_core::dataset::{label_instances, LabelRecord, LabelSolver};
use offload_core::instance_gen::{derive_seed, generate_instances, RangeConfig};
use offload_core::mtl::{
    decode_model, encode_model, evaluate, featurize, infer_solution, loss, loss_and_gradients,
    loss_terms, raw_features, train, DecisionRule, FeatureStats, MtlModel, Sample, TrainConfig,
};
use offload_core::{decision_index, decisions_from_index, Error, OffloadInstance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn labeled(n: usize, count: usize, seed: u64) -> Vec<LabelRecord> {
    let insts = generate_instances(n, count, &RangeConfig::default(), seed).unwrap();
    label_instances(&insts, &LabelSolver::Exhaustive).unwrap()
}

fn samples(records: &[LabelRecord], stats: &FeatureStats) -> Vec<Sample> {
    records
        .iter()
        .map(|r| Sample::from_record(r, stats).unwrap())
        .collect()
}

fn fitted_stats(records: &[LabelRecord]) -> FeatureStats {
    let rows: Vec<Vec<f64>> = records.iter().map(|r| raw_features(&r.instance)).collect();
    FeatureStats::fit(&rows).unwrap()
}

fn random_model(n: usize, hidden: &[usize], stats: FeatureStats, seed: u64) -> MtlModel {
    MtlModel::init(n, hidden, stats, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn perturbed_loss(model: &MtlModel, t: usize, i: usize, delta: f64, batch: &[Sample]) -> f64 {
    let mut m = model.clone();
    m.tensors_mut()[t][i] += delta;
    loss(&m, batch, 1.0, 1.0)
}

#[test]
fn gradients_match_central_differences() {
    let records = labeled(3, 200, 11);
    let stats = fitted_stats(&records);
    let all = samples(&records, &stats);
    let mut worst: f64 = 0.0;
    for trial in 0..20u64 {
        let model = random_model(3, &[16, 8], stats.clone(), 100 + trial);
        let start = (trial as usize * 7) % (all.len() - 3);
        let batch = &all[start..start + 3];
        let (_, grads) = loss_and_gradients(&model, batch, 1.0, 1.0);
        let h = 1e-6;
        for (t, g) in grads.iter().enumerate() {
            for (i, &analytic) in g.iter().enumerate() {
                let numeric = (perturbed_loss(&model, t, i, h, batch)
                    - perturbed_loss(&model, t, i, -h, batch))
                    / (2.0 * h);
                let scale = analytic.abs().max(numeric.abs());
                if scale < 1e-7 {
                    continue;
                }
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        }
    }
    assert!(worst < 1e-4, "worst relative gradient error {worst}");
}

#[test]
fn loss_weights_are_additive() {
    let records = labeled(2, 64, 3);
    let stats = fitted_stats(&records);
    let batch = samples(&records, &stats);
    let model = random_model(2, &[16, 8], stats, 9);
    let both = loss(&model, &batch, 1.0, 1.0);
    let ce = loss(&model, &batch, 1.0, 0.0);
    let mse = loss(&model, &batch, 0.0, 1.0);
    assert!((both - (ce + mse)).abs() < 1e-12);
    let t = loss_terms(&model, &batch, 2.0, 3.0);
    assert!((t.total - (2.0 * t.ce + 3.0 * t.mse)).abs() < 1e-12);
}

#[test]
fn overfits_small_set() {
    let records = labeled(2, 32, 21);
    let cfg = TrainConfig {
        epochs: 5000,
        batch_size: 32,
        learning_rate: 1e-2,
        hidden_sizes: vec![32, 32],
        ..TrainConfig::default()
    };
    let out = train(&records, &cfg).unwrap();
    let last = out.log.last().unwrap();
    assert!(last.loss < 1e-3, "final training loss {}", last.loss);
}

#[test]
fn same_seed_gives_identical_model_bytes() {
    let records = labeled(2, 500, 4);
    let cfg = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let a = encode_model(&train(&records, &cfg).unwrap().model);
    let b = encode_model(&train(&records, &cfg).unwrap().model);
    assert_eq!(a, b);
    let other = TrainConfig { seed: 1, ..cfg };
    assert_ne!(a, encode_model(&train(&records, &other).unwrap().model));
}

#[test]
fn model_file_round_trip_and_size() {
    let records = labeled(2, 200, 5);
    let model = train(
        &records,
        &TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        },
    )
    .unwrap()
    .model;
    let bytes = encode_model(&model);
    assert!(bytes.starts_with(b"mtl-model v1\n"));
    assert!(bytes.len() <= 2048, "{} bytes", bytes.len());
    let back = decode_model(&bytes).unwrap();
    assert_eq!(back, model);
    assert_eq!(encode_model(&back), bytes);
    assert!(decode_model(&bytes[..bytes.len() - 1]).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(decode_model(&extra).is_err());
}

fn permute(inst: &OffloadInstance, perm: &[usize]) -> OffloadInstance {
    OffloadInstance {
        vehicles: perm.iter().map(|&p| inst.vehicles[p]).collect(),
        ..inst.clone()
    }
}

fn permute_record(r: &LabelRecord, perm: &[usize]) -> LabelRecord {
    let n = perm.len();
    let d = decisions_from_index(r.decision, n);
    LabelRecord {
        instance: permute(&r.instance, perm),
        decision: decision_index(&perm.iter().map(|&p| d[p]).collect::<Vec<_>>()),
        alloc: perm.iter().map(|&p| r.alloc[p]).collect(),
        cost: r.cost,
    }
}

#[test]
fn relabeling_vehicles_is_covariant() {
    let perm = [2, 0, 3, 1];
    let records = labeled(4, 100, 8);
    let permuted: Vec<LabelRecord> = records.iter().map(|r| permute_record(r, &perm)).collect();

    // the oracle labels follow the relabeling
    let relabeled = label_instances(
        &permuted
            .iter()
            .map(|r| r.instance.clone())
            .collect::<Vec<_>>(),
        &LabelSolver::Exhaustive,
    )
    .unwrap();
    for (a, b) in relabeled.iter().zip(&permuted) {
        assert_eq!(a.decision, b.decision);
        assert!((a.cost - b.cost).abs() <= 1e-12 * a.cost);
    }

    // feature blocks move with the vehicles
    let stats = FeatureStats::identity(offload_core::mtl::feature_len(4));
    let x = featurize(&records[0].instance, &stats).unwrap();
    let y = featurize(&permuted[0].instance, &stats).unwrap();
    for (slot, &p) in perm.iter().enumerate() {
        assert_eq!(y[slot * 6..slot * 6 + 6], x[p * 6..p * 6 + 6]);
    }

    // a model with no vehicle preference scores both datasets identically
    let model = MtlModel::zeros(4, &[16, 8], stats.clone()).unwrap();
    let a = loss(&model, &samples(&records, &stats), 1.0, 1.0);
    let b = loss(&model, &samples(&permuted, &stats), 1.0, 1.0);
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn beats_random_guessing() {
    for n in [2usize, 3, 4] {
        let train_set = labeled(n, 4000, derive_seed(30, n as u64));
        let test_set = labeled(n, 1000, derive_seed(31, n as u64));
        let cfg = TrainConfig {
            epochs: 40,
            ..TrainConfig::default()
        };
        let model = train(&train_set, &cfg).unwrap().model;
        let m = evaluate(&model, &test_set, DecisionRule::ClassArgmax).unwrap();
        let baseline = 1.0 / (1u32 << n) as f64;
        assert!(
            m.class_accuracy > baseline,
            "N={n}: {} vs {baseline}",
            m.class_accuracy
        );
        assert!(m.reg_mse >= 0.0);
    }
}

#[test]
fn all_local_choice_zeroes_allocation() {
    let records = labeled(2, 10, 2);
    let stats = fitted_stats(&records);
    let mut model = MtlModel::zeros(2, &[4], stats).unwrap();
    // force class 0 (all local) and a large regression output
    model.class_head.bias[0] = 10.0;
    model.reg_head.bias = vec![0.7, 0.7];
    for r in &records {
        let sol = infer_solution(&model, &r.instance).unwrap();
        assert_eq!(sol.decisions, vec![false, false]);
        assert_eq!(sol.alloc, vec![0.0, 0.0]);
    }
}

#[test]
fn chosen_offloaders_share_full_budget() {
    let records = labeled(3, 20, 12);
    let stats = fitted_stats(&records);
    let mut model = MtlModel::zeros(3, &[4], stats).unwrap();
    model.class_head.bias[0b101] = 10.0;
    model.reg_head.bias = vec![0.2, 0.5, 0.1];
    let sol = infer_solution(&model, &records[0].instance).unwrap();
    assert_eq!(sol.decisions, vec![true, false, true]);
    assert!((sol.alloc[0] - 2.0 / 3.0).abs() < 1e-12);
    assert!((sol.alloc[2] - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn zero_share_falls_back_to_closed_form() {
    let records = labeled(2, 5, 13);
    let stats = fitted_stats(&records);
    let mut model = MtlModel::zeros(2, &[4], stats).unwrap();
    model.class_head.bias[0b11] = 10.0;
    model.reg_head.bias = vec![0.9, -1.0];
    let inst = &records[0].instance;
    let sol = infer_solution(&model, inst).unwrap();
    assert_eq!(
        sol.alloc,
        offload_core::solvers::optimal_allocation(inst, &[true, true])
    );
}

#[test]
fn alloc_support_rule_thresholds_regression() {
    let records = labeled(3, 5, 14);
    let stats = fitted_stats(&records);
    let mut model = MtlModel::zeros(3, &[4], stats).unwrap();
    model.reg_head.bias = vec![0.3, 0.01, 0.5];
    let sol = offload_core::mtl::infer_solution_with(
        &model,
        &records[0].instance,
        DecisionRule::AllocSupport { threshold: 0.05 },
    )
    .unwrap();
    assert_eq!(sol.decisions, vec![true, false, true]);
}

#[test]
fn wrong_fleet_size_is_shape_error() {
    let records = labeled(2, 5, 15);
    let model = MtlModel::zeros(2, &[4], fitted_stats(&records)).unwrap();
    let inst = &labeled(3, 1, 16)[0].instance;
    assert!(matches!(infer_solution(&model, inst), Err(Error::Shape(_))));
}

#[test]
fn divergence_is_reported() {
    let records = labeled(2, 256, 17);
    let cfg = TrainConfig {
        learning_rate: 1e300,
        epochs: 50,
        ..TrainConfig::default()
    };
    match train(&records, &cfg) {
        Err(Error::Divergence { .. }) => {}
        other => panic!("expected divergence, got {:?}", other.map(|o| o.log.len())),
    }
}
