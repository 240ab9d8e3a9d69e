use super::*;
use crate::network::{
    forward_batch, forward_single_batch, geometric_mean_fusion, Batch, ForwardOptions, ParameterGroups, Params,
    SharedActivation, Topology,
};
use crate::numerics::{Matrix, SeededRng};
use crate::testutil::{random_batch, random_params, tiny_topology, toy_dataset};

const EPS: f64 = 1e-5;

fn flat(p: &Params) -> Vec<(String, Vec<f64>)> {
    let mut out = Vec::new();
    p.for_each_group(&mut |n, v| out.push((n.to_owned(), v.to_vec())));
    out
}

fn set_entry(p: &mut Params, group: usize, idx: usize, delta: f64) {
    let mut g = 0;
    p.for_each_group_mut(&mut |_, v| {
        if g == group {
            v[idx] += delta;
        }
        g += 1;
    });
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Compares every analytic gradient entry with a central difference.
fn check_fused_gradients(t: &Topology, p: &Params, batch: &Batch, masks: Option<&[Vec<Matrix>]>, l2: f64) {
    let opts = ForwardOptions::train();
    let trace = forward_batch(batch, p, t, &opts, masks).unwrap();
    let grads = backward(&trace, &batch.labels, p, t, l2).unwrap();
    let analytic = flat(&grads);
    let mut worst = 0.0f64;
    for (gi, (name, values)) in analytic.iter().enumerate() {
        for (i, &a) in values.iter().enumerate() {
            let mut plus = p.clone();
            set_entry(&mut plus, gi, i, EPS);
            let mut minus = p.clone();
            set_entry(&mut minus, gi, i, -EPS);
            let lp = fused_loss(batch, &plus, t, &opts, masks, l2).unwrap();
            let lm = fused_loss(batch, &minus, t, &opts, masks, l2).unwrap();
            let numeric = (lp - lm) / (2.0 * EPS);
            let err = relative_error(a, numeric);
            worst = worst.max(err);
            assert!(err < 1e-4, "{name}[{i}]: analytic {a} numeric {numeric}");
        }
    }
    assert!(worst < 1e-4);
}

#[test]
fn fused_gradients_match_finite_differences() {
    for (seed, act) in [(1, SharedActivation::Tanh), (2, SharedActivation::Linear)] {
        let t = tiny_topology(3, 4, act);
        let mut rng = SeededRng::new(seed);
        let p = random_params(&t, &mut rng, 0.6);
        let batch = random_batch(&t, &mut rng, 5);
        check_fused_gradients(&t, &p, &batch, None, 1e-3);
    }
}

#[test]
fn gradients_match_with_closed_gate() {
    let t = tiny_topology(3, 3, SharedActivation::Tanh);
    let mut rng = SeededRng::new(3);
    let mut p = random_params(&t, &mut rng, 0.6);
    p.shared.set_gamma(0.0).unwrap();
    let batch = random_batch(&t, &mut rng, 4);
    check_fused_gradients(&t, &p, &batch, None, 1e-3);
    let trace = forward_batch(&batch, &p, &t, &ForwardOptions::train(), None).unwrap();
    let g = backward(&trace, &batch.labels, &p, &t, 1e-3).unwrap();
    for r in 0..t.fused_dim() {
        for c in 0..t.shared_units() {
            if crate::network::is_off_diagonal(&t, r, c) {
                assert_eq!(g.shared.w1[(r, c)], 0.0);
            }
        }
    }
}

#[test]
fn gradients_match_with_missing_modalities_and_hidden_masks() {
    let t = tiny_topology(3, 3, SharedActivation::Tanh);
    let mut rng = SeededRng::new(4);
    let p = random_params(&t, &mut rng, 0.6);
    let mut batch = random_batch(&t, &mut rng, 6);
    apply_moddrop_batch(&mut batch, &[0.5, 0.5, 0.0], &mut rng).unwrap();
    let masks: Vec<Vec<Matrix>> = p
        .paths
        .iter()
        .map(|path| hidden_masks(path, batch.len(), 0.7, &mut rng).unwrap())
        .collect();
    check_fused_gradients(&t, &p, &batch, Some(&masks), 1e-3);
}

#[test]
fn single_path_gradients_match_finite_differences() {
    let t = tiny_topology(2, 3, SharedActivation::Tanh);
    let mut rng = SeededRng::new(5);
    let p = random_params(&t, &mut rng, 0.7);
    let batch = random_batch(&t, &mut rng, 5);
    let opts = ForwardOptions::train();
    let l2 = 1e-3;
    for k in 0..2 {
        let trace = forward_single_batch(k, &batch.inputs[k], &p, &t, &opts, None).unwrap();
        let g = backward_single(&trace, &batch.labels, &p, l2).unwrap();
        let mut analytic = Vec::new();
        g.for_each_group(&mut |_, v| analytic.push(v.to_vec()));
        for (gi, values) in analytic.iter().enumerate() {
            for (i, &a) in values.iter().enumerate() {
                let bump = |d: f64| {
                    let mut q = p.clone();
                    let mut n = 0;
                    q.paths[k].for_each_group_mut(&mut |_, v| {
                        if n == gi {
                            v[i] += d;
                        }
                        n += 1;
                    });
                    single_loss(k, &batch.inputs[k], &batch.labels, &q, &t, &opts, None, l2).unwrap()
                };
                let numeric = (bump(EPS) - bump(-EPS)) / (2.0 * EPS);
                assert!(relative_error(a, numeric) < 1e-4, "path {k} group {gi}[{i}]: {a} vs {numeric}");
            }
        }
    }
}

#[test]
fn penalty_gradient_is_two_alpha_w() {
    let t = tiny_topology(2, 3, SharedActivation::Tanh);
    let mut rng = SeededRng::new(6);
    let p = random_params(&t, &mut rng, 0.8);
    let batch = random_batch(&t, &mut rng, 3);
    let trace = forward_batch(&batch, &p, &t, &ForwardOptions::train(), None).unwrap();
    let alpha = 0.01;
    let with = flat(&backward(&trace, &batch.labels, &p, &t, alpha).unwrap());
    let without = flat(&backward(&trace, &batch.labels, &p, &t, 0.0).unwrap());
    for (((name, a), (_, b)), (_, w)) in with.iter().zip(&without).zip(flat(&p)) {
        let is_weight = !name.ends_with("bias") && !name.ends_with("b1") && !name.ends_with("b2");
        for ((x, y), w) in a.iter().zip(b).zip(&w) {
            let expect = if is_weight && !name.contains("head") { 2.0 * alpha * w } else { 0.0 };
            assert!((x - y - expect).abs() < 1e-15, "{name}: {} vs {expect}", x - y);
        }
    }
}

#[test]
fn zero_inputs_and_weights_give_zero_input_layer_gradient() {
    let t = tiny_topology(2, 3, SharedActivation::Tanh);
    let p = Params::zeros(&t);
    let mut batch = random_batch(&t, &mut SeededRng::new(7), 4);
    for x in &mut batch.inputs {
        x.as_mut_slice().fill(0.0);
    }
    let trace = forward_batch(&batch, &p, &t, &ForwardOptions::train(), None).unwrap();
    let g = backward(&trace, &batch.labels, &p, &t, 1e-4).unwrap();
    for path in &g.paths {
        assert!(path.layers[0].weights.as_slice().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn dropped_modality_gradient_matches_reduced_network() {
    let t = tiny_topology(3, 3, SharedActivation::Tanh);
    let mut rng = SeededRng::new(8);
    let p = random_params(&t, &mut rng, 0.7);
    let k = 1;
    let batch = random_batch(&t, &mut rng, 1);
    let mut dropped = batch.clone();
    dropped.present[k][0] = false;
    dropped.inputs[k].as_mut_slice().fill(0.0);
    let opts = ForwardOptions::train();
    let trace = forward_batch(&dropped, &p, &t, &opts, None).unwrap();
    let g = backward(&trace, &dropped.labels, &p, &t, 1e-3).unwrap();
    assert!(flat_path_is_zero(&g, k));

    // The reduced network: path k disconnected from the shared layer.
    let mut reduced = p.clone();
    let off = t.fused_offsets()[k];
    let rows = off..off + t.paths()[k].output_dim();
    for r in rows.clone() {
        reduced.shared.w1.row_mut(r).fill(0.0);
    }
    let rtrace = forward_batch(&batch, &reduced, &t, &opts, None).unwrap();
    let rg = backward(&rtrace, &batch.labels, &reduced, &t, 1e-3).unwrap();
    for m in (0..3).filter(|&m| m != k) {
        assert_eq!(g.paths[m].layers, rg.paths[m].layers);
    }
    for r in (0..t.fused_dim()).filter(|r| !rows.contains(r)) {
        assert_eq!(g.shared.w1.row(r), rg.shared.w1.row(r));
    }
    assert_eq!(g.shared.b1, rg.shared.b1);
    assert_eq!(g.shared.w2, rg.shared.w2);
    assert_eq!(g.shared.b2, rg.shared.b2);
}

fn flat_path_is_zero(g: &Params, k: usize) -> bool {
    let mut zero = true;
    g.paths[k].for_each_group(&mut |_, v| zero &= v.iter().all(|&x| x == 0.0));
    zero
}

#[test]
fn backward_rejects_eval_traces() {
    let t = tiny_topology(2, 3, SharedActivation::Tanh);
    let mut rng = SeededRng::new(9);
    let p = random_params(&t, &mut rng, 0.5);
    let batch = random_batch(&t, &mut rng, 2);
    let trace = forward_batch(&batch, &p, &t, &ForwardOptions::default(), None).unwrap();
    assert!(backward(&trace, &batch.labels, &p, &t, 0.0).is_err());
    let other = random_params(&tiny_topology(3, 3, SharedActivation::Tanh), &mut rng, 0.5);
    let trace = forward_batch(&batch, &p, &t, &ForwardOptions::train(), None).unwrap();
    assert!(backward(&trace, &batch.labels, &other, &t, 0.0).is_err());
}

#[test]
fn cross_entropy_examples() {
    assert_eq!(cross_entropy_loss(&[0.0, 1.0, 0.0], 1).unwrap(), 0.0);
    assert!((cross_entropy_loss(&[0.1; 10], 3).unwrap() - 10f64.ln()).abs() < 1e-12);
    assert!((cross_entropy_loss(&[0.25, 0.75], 0).unwrap() - 1.386294).abs() < 1e-6);
    assert!((cross_entropy_loss(&[0.0, 1.0], 0).unwrap() - 1e-300f64.ln().abs()).abs() < 1e-9);
    assert!(cross_entropy_loss(&[0.5, 0.5], 2).is_err());
}

#[test]
fn eval_scaling_matches_mask_expectation_for_linear_probe() {
    let mut rng = SeededRng::new(10);
    let x: Vec<f64> = (0..20).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let w: Vec<f64> = (0..20).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let keep = 0.8;
    let eval: f64 = x.iter().zip(&w).map(|(a, b)| keep * a * b).sum();
    let n = 10_000;
    let outs: Vec<f64> = (0..n)
        .map(|_| {
            let mut xm = x.clone();
            apply_input_dropout(&mut xm, keep, &mut rng).unwrap();
            xm.iter().zip(&w).map(|(a, b)| a * b).sum()
        })
        .collect();
    let mean = outs.iter().sum::<f64>() / n as f64;
    let var = outs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let band = 3.0 * (var / n as f64).sqrt();
    assert!((mean - eval).abs() <= band, "{mean} vs {eval} (band {band})");
}

fn small_config() -> TrainingConfig {
    TrainingConfig {
        learning_rate: 0.2,
        batch_size: 16,
        patience: 5,
        l2: 1e-4,
        seed: 11,
        ..Default::default()
    }
}

#[test]
fn zero_learning_rate_leaves_path_unchanged() {
    let t = tiny_topology(2, 3, SharedActivation::Tanh);
    let train = toy_dataset(&t, 64, 0.5, 1);
    let val = toy_dataset(&t, 32, 0.5, 2);
    let p = Params::random(&t, &mut SeededRng::new(3));
    let cfg = TrainingConfig {
        learning_rate: 0.0,
        ..small_config()
    };
    let (path, _) = pretrain_modality(0, &p, &t, &train, &val, &cfg, 3, &mut TrainLog::default()).unwrap();
    assert_eq!(path, p.paths[0]);
}

#[test]
fn separable_data_is_learned_exactly() {
    let t = Topology::new(vec![crate::network::PathSpec::new(2, vec![4])], 2, SharedActivation::Tanh).unwrap();
    let mut rng = SeededRng::new(12);
    let n = 200;
    let mut x = Matrix::zeros(n, 2);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % 2;
        let side = if y == 1 { 1.0 } else { -1.0 };
        x[(i, 0)] = side * rng.uniform(0.5, 1.5);
        x[(i, 1)] = rng.uniform(-1.0, 1.0);
        labels.push(y);
    }
    let data = Dataset::new(vec![x], labels).unwrap();
    let p = Params::random(&t, &mut SeededRng::new(4));
    let mut log = TrainLog::default();
    let (path, outcome) = pretrain_modality(0, &p, &t, &data, &data, &small_config(), 50, &mut log).unwrap();
    let mut trained = p.clone();
    trained.paths[0] = path;
    let ev = evaluate_single(0, &trained, &t, &data, &ForwardOptions::default()).unwrap();
    assert_eq!(ev.errors, 0);
    assert!(outcome.best.loss <= outcome.initial.loss);
    assert!(!log.records.is_empty());
}

#[test]
fn pretraining_rejects_missing_data() {
    let t = tiny_topology(2, 3, SharedActivation::Tanh);
    let mut train = toy_dataset(&t, 8, 0.5, 1);
    for i in 0..8 {
        train.mark_absent(1, i);
    }
    let p = Params::random(&t, &mut SeededRng::new(3));
    let r = pretrain_modality(1, &p, &t, &train, &train, &small_config(), 2, &mut TrainLog::default());
    assert!(r.is_err());
}

fn staged(seed: u64, moddrop: bool) -> (Topology, Dataset, TrainedModel) {
    let t = tiny_topology(2, 3, SharedActivation::Tanh);
    let train = toy_dataset(&t, 240, 1.2, 21);
    let val = toy_dataset(&t, 120, 1.2, 22);
    let cfg = TrainingConfig {
        seed,
        input_keep: 0.9,
        moddrop_keep: vec![0.8, 0.8],
        ..small_config()
    };
    let plan = StagePlan::standard(8, 4, 4, moddrop);
    let model = train_staged(&t, &train, &val, &cfg, &plan).unwrap();
    (t, val, model)
}

#[test]
fn fixed_seed_gives_identical_weights() {
    let (_, _, a) = staged(5, true);
    let (_, _, b) = staged(5, true);
    assert_eq!(a.params, b.params);
    assert_eq!(a.log, b.log);
    let (_, _, c) = staged(6, true);
    assert_ne!(a.params, c.params);
}

#[test]
fn every_stage_ends_no_worse_than_it_started() {
    let (_, _, m) = staged(7, true);
    assert_eq!(m.pretrain.len(), 2);
    assert_eq!(m.fusion.len(), 2);
    for o in m.pretrain.iter().chain(&m.fusion) {
        assert!(o.best.loss <= o.initial.loss);
    }
    let tsv = m.log.to_tsv();
    assert!(tsv.starts_with(TrainLog::HEADER));
    assert!(tsv.contains("\tfuse_relaxed\t"));
}

#[test]
fn frozen_fusion_is_at_least_as_accurate_as_geometric_mean() {
    let t = tiny_topology(2, 3, SharedActivation::Tanh);
    let train = toy_dataset(&t, 240, 1.5, 31);
    let val = toy_dataset(&t, 200, 1.5, 32);
    let cfg = small_config();
    let plan = StagePlan::new(vec![
        StageSpec::new(StageKind::Pretrain, 10, false),
        StageSpec::new(StageKind::FuseFrozen, 10, false),
    ])
    .unwrap();
    let m = train_staged(&t, &train, &val, &cfg, &plan).unwrap();
    let opts = ForwardOptions::default();
    let per: Vec<Matrix> = (0..2)
        .map(|k| predict_single(k, &m.initial_fusion, &t, &val, &opts).unwrap())
        .collect();
    let mut geo_errors = 0;
    for i in 0..val.len() {
        let fused = geometric_mean_fusion(&[per[0].row(i).to_vec(), per[1].row(i).to_vec()]).unwrap();
        if crate::network::argmax(&fused) != val.labels[i] {
            geo_errors += 1;
        }
    }
    let trained = evaluate(&m.params, &t, &val, &opts).unwrap();
    assert!(trained.errors <= geo_errors, "{} > {geo_errors}", trained.errors);
}
