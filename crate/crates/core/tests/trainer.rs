use std::path::PathBuf;

use approx::assert_abs_diff_eq;
use rrl_core::binarizer::{sample_bounds, BinarizationBounds};
use rrl_core::data::{load_dataset, Dataset, FeatureSchema};
use rrl_core::laf::{LafKind, NlafParams, NlafPreset};
use rrl_core::model::{cross_entropy, LinearHead, LogicalLayer, ModelConfig, RrlModel};
use rrl_core::numerics::{uniform_matrix, DenseMatrix, Rng};
use rrl_core::trainer::*;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Model over `n` inputs fed directly as `u⁽⁰⁾` (schema of single-category
/// discrete features, no continuous ones).
fn schema_with_inputs(n: usize) -> FeatureSchema {
    let mut text = String::new();
    for j in 0..n {
        text.push_str(&format!("f{j},discrete,t\n"));
    }
    text.push_str("y,label,a,b\n");
    FeatureSchema::parse(&text).unwrap()
}

fn no_bounds() -> BinarizationBounds {
    BinarizationBounds::from_thresholds(DenseMatrix::zeros(0, 1), DenseMatrix::zeros(0, 1)).unwrap()
}

fn random_model(n: usize, widths: &[usize], preset: NlafPreset, head_skip: bool, seed: u64) -> RrlModel {
    let config = ModelConfig {
        widths: widths.to_vec(),
        laf: LafKind::Nlaf(NlafParams::preset(preset)),
        skip_connections: true,
        head_skip,
        initial_temperature: 1.0,
    };
    let mut rng = Rng::new(seed);
    let mut model = RrlModel::new(schema_with_inputs(n), no_bounds(), &config, &mut rng).unwrap();
    // Spread weights over the whole unit interval so both sides of 0.5 occur.
    for layer in &mut model.layers {
        layer.w_conj = uniform_matrix(&mut rng, layer.w_conj.rows(), layer.w_conj.cols(), 0.0, 1.0).unwrap();
        layer.w_disj = uniform_matrix(&mut rng, layer.w_disj.rows(), layer.w_disj.cols(), 0.0, 1.0).unwrap();
    }
    model
}

fn random_binary(rng: &mut Rng, rows: usize, cols: usize) -> DenseMatrix {
    let values = (0..rows * cols).map(|_| if rng.uniform(0.0, 1.0) < 0.5 { 0.0 } else { 1.0 }).collect();
    DenseMatrix::from_vec(rows, cols, values).unwrap()
}

fn random_labels(rng: &mut Rng, rows: usize) -> DenseMatrix {
    let mut y = DenseMatrix::zeros(rows, 2);
    for i in 0..rows {
        y.set(i, rng.index(2), 1.0);
    }
    y
}

/// Independent NLAF evaluation without range checks, so finite-difference
/// probes may step slightly outside `[0, 1]`.
mod oracle {
    use super::*;

    fn g(p: (f64, i32, i32), x: f64) -> f64 {
        1.0 - 1.0 / (1.0 - (p.0 * x).powi(p.1))
    }

    fn node(p: (f64, i32, i32), conj: bool, h: &[f64], w: &[f64]) -> f64 {
        let s: f64 = h
            .iter()
            .zip(w)
            .map(|(&h, &w)| g(p, if conj { 1.0 - h } else { h }) * g(p, w))
            .sum();
        let q = (1.0 + s.max(0.0)).powi(-p.2);
        if conj {
            q
        } else {
            1.0 - q
        }
    }

    pub fn layer(layer: &LogicalLayer, input: &[f64]) -> Vec<f64> {
        let LafKind::Nlaf(params) = layer.laf else {
            panic!("oracle covers the NLAF only")
        };
        let p = (params.alpha, params.beta as i32, params.gamma as i32);
        let conj = (0..layer.w_conj.rows()).map(|i| node(p, true, input, layer.w_conj.row(i)));
        let disj = (0..layer.w_disj.rows()).map(|i| node(p, false, input, layer.w_disj.row(i)));
        conj.chain(disj).collect()
    }

    /// `Σ scion ⊙ head_input` for one row under the surrogate each mode
    /// differentiates. Hierarchical: every layer reads the discrete outputs
    /// shifted by how far the continuous outputs moved from `base`.
    /// Single: every layer reads the continuous outputs of its sources.
    pub fn surrogate(
        model: &RrlModel,
        u0: &[f64],
        discrete: &[Vec<f64>],
        base: Option<&[Vec<f64>]>,
        scion: &[f64],
    ) -> f64 {
        let mut cont: Vec<Vec<f64>> = vec![u0.to_vec()];
        let read = |sources: &[usize], cont: &[Vec<f64>]| -> Vec<f64> {
            let mut out = Vec::new();
            for &s in sources {
                match base {
                    Some(base) if s > 0 => out.extend(
                        discrete[s].iter().zip(&cont[s]).zip(&base[s]).map(|((d, c), b)| d + (c - b)),
                    ),
                    _ => out.extend(&cont[s]),
                }
            }
            out
        };
        for layer in &model.layers {
            let input = read(&layer.sources, &cont);
            cont.push(self::layer(layer, &input));
        }
        read(&model.head.sources, &cont).iter().zip(scion).map(|(a, b)| a * b).sum()
    }

    /// Continuous outputs of the hierarchical surrogate at unshifted inputs:
    /// each layer applied to the discrete outputs below it.
    pub fn base_outputs(model: &RrlModel, discrete: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut out = vec![discrete[0].clone()];
        for layer in &model.layers {
            let input: Vec<f64> = layer.sources.iter().flat_map(|&s| discrete[s].clone()).collect();
            out.push(self::layer(layer, &input));
        }
        out
    }
}

fn row_outputs(outputs: &[DenseMatrix], i: usize) -> Vec<Vec<f64>> {
    outputs.iter().map(|o| o.row(i).to_vec()).collect()
}

/// Central differences of the surrogate with respect to every logical
/// weight, summed over the rows of `u0`.
fn surrogate_gradients(model: &RrlModel, u0: &DenseMatrix, scion: &DenseMatrix, hierarchical: bool) -> Vec<(DenseMatrix, DenseMatrix)> {
    let discrete = model.forward_discrete(u0).unwrap().outputs;
    let rows: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = (0..u0.rows())
        .map(|i| {
            let d = row_outputs(&discrete, i);
            let b = oracle::base_outputs(model, &d);
            (d, b)
        })
        .collect();
    let total = |m: &RrlModel| -> f64 {
        (0..u0.rows())
            .map(|i| {
                let (d, b) = &rows[i];
                oracle::surrogate(m, u0.row(i), d, hierarchical.then_some(b.as_slice()), scion.row(i))
            })
            .sum()
    };
    let h = 1e-6;
    let mut out = Vec::new();
    for l in 0..model.layers.len() {
        let mut halves = Vec::new();
        for conj in [true, false] {
            let w = if conj { &model.layers[l].w_conj } else { &model.layers[l].w_disj };
            let mut grad = DenseMatrix::zeros(w.rows(), w.cols());
            for r in 0..w.rows() {
                for c in 0..w.cols() {
                    let probe = |delta: f64| {
                        let mut m = model.clone();
                        let w = if conj { &mut m.layers[l].w_conj } else { &mut m.layers[l].w_disj };
                        w.set(r, c, w.get(r, c) + delta);
                        total(&m)
                    };
                    grad.set(r, c, (probe(h) - probe(-h)) / (2.0 * h));
                }
            }
            halves.push(grad);
        }
        let disj = halves.pop().unwrap();
        let conj = halves.pop().unwrap();
        out.push((conj, disj));
    }
    out
}

fn assert_close(analytic: &DenseMatrix, numeric: &DenseMatrix, what: &str) {
    for (a, n) in analytic.as_slice().iter().zip(numeric.as_slice()) {
        let err = (a - n).abs();
        // Rounding noise of the central difference is about 1e-10 here.
        assert!(
            err <= 1e-4 * a.abs().max(n.abs()) + 1e-8,
            "{what}: analytic {a} vs numeric {n}"
        );
    }
}

#[test]
fn grafted_gradients_match_surrogate_finite_differences() {
    let mut rng = Rng::new(11);
    let model = random_model(5, &[3, 2, 2], NlafPreset::C, true, 3);
    let u0 = random_binary(&mut rng, 6, 5);
    let n_head: usize = model.head.sources.iter().map(|&s| model.output_widths()[s]).sum();
    let scion = uniform_matrix(&mut rng, 6, n_head, -1.0, 1.0).unwrap();
    for (mode, hierarchical) in [(GraftingMode::Single, false), (GraftingMode::Hierarchical, true)] {
        let analytic = graft_backward(&model, &u0, &scion, mode).unwrap();
        let numeric = surrogate_gradients(&model, &u0, &scion, hierarchical);
        for (l, ((ac, ad), (nc, nd))) in analytic.iter().zip(&numeric).enumerate() {
            assert_close(ac, nc, &format!("{mode:?} layer {} conj", l + 1));
            assert_close(ad, nd, &format!("{mode:?} layer {} disj", l + 1));
        }
    }
}

#[test]
fn worked_two_layer_example() {
    // Layer 1: two conjunctions over three inputs; layer 2: one disjunction.
    let laf = LafKind::Nlaf(NlafParams::preset(NlafPreset::C));
    let layers = vec![
        LogicalLayer {
            w_conj: DenseMatrix::from_rows(&[[0.6, 0.1, 0.7], [0.3, 0.7, 0.1]]).unwrap(),
            w_disj: DenseMatrix::zeros(0, 3),
            laf,
            sources: vec![0],
        },
        LogicalLayer {
            w_conj: DenseMatrix::zeros(0, 2),
            w_disj: DenseMatrix::from_rows(&[[0.9, 0.2]]).unwrap(),
            laf,
            sources: vec![1],
        },
    ];
    let model = RrlModel {
        schema: schema_with_inputs(3),
        bounds: no_bounds(),
        layers,
        head: LinearHead {
            weights: DenseMatrix::from_rows(&[[1.0], [-1.0]]).unwrap(),
            biases: vec![0.0, 0.0],
            log_temperature: 0.0,
            sources: vec![2],
        },
    };
    model.validate().unwrap();
    let u0 = DenseMatrix::from_rows(&[[1.0, 0.0, 1.0]]).unwrap();
    let g = model.forward_grafting(&u0).unwrap();
    assert_eq!(g.discrete.outputs[1].as_slice(), &[1.0, 0.0]);
    assert_eq!(g.discrete.outputs[2].as_slice(), &[1.0]);
    assert_abs_diff_eq!(g.continuous_outputs[1].get(0, 0), 0.994, epsilon = 1e-3);
    assert_abs_diff_eq!(g.continuous_outputs[1].get(0, 1), 0.147, epsilon = 1e-3);
    assert_abs_diff_eq!(g.continuous_outputs[2].get(0, 0), 0.985, epsilon = 1e-3);

    let scion = DenseMatrix::from_rows(&[[1.0]]).unwrap();
    let grads = graft_backward(&model, &u0, &scion, GraftingMode::Hierarchical).unwrap();
    let numeric = surrogate_gradients(&model, &u0, &scion, true);
    assert_close(&grads[1].1, &numeric[1].1, "layer 2");
    assert_close(&grads[0].0, &numeric[0].0, "layer 1");

    // Layer 2's gradient is the Jacobian of ũ⁽²⁾ at the discrete u⁽¹⁾ = [1, 0].
    let h = 1e-6;
    for j in 0..2 {
        let at = |delta: f64| {
            let mut w = model.layers[1].w_disj.row(0).to_vec();
            w[j] += delta;
            let mut layer = model.layers[1].clone();
            layer.w_disj = DenseMatrix::from_rows(&[w]).unwrap();
            oracle::layer(&layer, &[1.0, 0.0])[0]
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        assert_abs_diff_eq!(grads[1].1.get(0, j), fd, epsilon = 1e-8);
    }
    // u⁽¹⁾₂ = 0 and G'(0) = 0: the disjunction passes nothing back to
    // node 2 of layer 1. Node 1 only moves on the literal whose input is 0,
    // the one place where the conjunction sees 1 − h = 1.
    assert_eq!(grads[1].1.get(0, 1), 0.0);
    assert!(grads[0].0.row(1).iter().all(|&g| g == 0.0));
    assert!(grads[0].0.get(0, 1).abs() > 0.0);
    assert_eq!(grads[0].0.get(0, 0), 0.0);
}

#[test]
fn zero_scion_gives_zero_gradients() {
    let mut rng = Rng::new(5);
    let mut model = random_model(6, &[4, 3], NlafPreset::B, false, 1);
    model.head.weights = DenseMatrix::zeros(model.head.weights.rows(), model.head.weights.cols());
    let u0 = random_binary(&mut rng, 8, 6);
    let y = random_labels(&mut rng, 8);
    for mode in [GraftingMode::Single, GraftingMode::Hierarchical, GraftingMode::Ste] {
        let (_, grads) = gradients(&model, &u0, &y, mode, 0.0).unwrap();
        for (c, d) in &grads.layers {
            assert_eq!(c.max_abs(), 0.0);
            assert_eq!(d.max_abs(), 0.0);
        }
    }
}

#[test]
fn depth_one_modes_agree_exactly() {
    let mut rng = Rng::new(9);
    let model = random_model(7, &[5], NlafPreset::B, false, 2);
    let u0 = random_binary(&mut rng, 10, 7);
    let y = random_labels(&mut rng, 10);
    let single = graft_single_backward(&model, &u0, &y, 1e-4).unwrap();
    let hier = graft_hierarchical_backward(&model, &u0, &y, 1e-4).unwrap();
    assert_eq!(single, hier);
}

#[test]
fn l2_term_adds_two_lambda_w() {
    let mut rng = Rng::new(4);
    let model = random_model(4, &[3], NlafPreset::C, false, 8);
    let u0 = random_binary(&mut rng, 5, 4);
    let y = random_labels(&mut rng, 5);
    let plain = graft_hierarchical_backward(&model, &u0, &y, 0.0).unwrap();
    let lambda = 0.01;
    let with = graft_hierarchical_backward(&model, &u0, &y, lambda).unwrap();
    let diff = with.layers[0].0.as_slice().iter().zip(plain.layers[0].0.as_slice());
    for ((a, b), w) in diff.zip(model.layers[0].w_conj.as_slice()) {
        assert_abs_diff_eq!(a - b, 2.0 * lambda * w, epsilon = 1e-15);
    }
    assert_eq!(with.head_weights, plain.head_weights);
}

#[test]
fn ste_gradients_vanish_at_discrete_corners() {
    let mut rng = Rng::new(21);
    let model = random_model(8, &[6], NlafPreset::B, false, 4);
    let u0 = random_binary(&mut rng, 16, 8);
    let y = random_labels(&mut rng, 16);
    let grads = ste_backward(&model, &u0, &y, 0.0).unwrap();
    let layer_max = grads.layers.iter().map(|(c, d)| c.max_abs().max(d.max_abs())).fold(0.0, f64::max);
    assert!(layer_max < 1e-2, "max STE gradient {layer_max}");
    // Grafting at the same point still carries a usable signal.
    let hier = graft_hierarchical_backward(&model, &u0, &y, 0.0).unwrap();
    let hier_max = hier.layers.iter().map(|(c, d)| c.max_abs().max(d.max_abs())).fold(0.0, f64::max);
    assert!(hier_max > 10.0 * layer_max, "grafted {hier_max} vs STE {layer_max}");
}

#[test]
fn ste_misses_a_threshold_flip() {
    // One conjunction over input 0; the instance has input 0 off, so the
    // node fires only when its weight drops below 0.5.
    let laf = LafKind::Nlaf(NlafParams::preset(NlafPreset::B));
    let delta = 0.01;
    let build = |w: f64| RrlModel {
        schema: schema_with_inputs(2),
        bounds: no_bounds(),
        layers: vec![LogicalLayer {
            w_conj: DenseMatrix::from_rows(&[[w, 0.0]]).unwrap(),
            w_disj: DenseMatrix::zeros(0, 2),
            laf,
            sources: vec![0],
        }],
        head: LinearHead {
            weights: DenseMatrix::from_rows(&[[-2.0], [2.0]]).unwrap(),
            biases: vec![0.0, 0.0],
            log_temperature: 0.0,
            sources: vec![1],
        },
    };
    let u0 = DenseMatrix::from_rows(&[[0.0, 1.0]]).unwrap();
    let y = DenseMatrix::from_rows(&[[0.0, 1.0]]).unwrap();
    let loss_at = |w: f64| {
        let m = build(w);
        cross_entropy(&m.forward_discrete(&u0).unwrap().logits, &y, 1.0).unwrap().0
    };
    let above = build(0.5 + delta);
    assert_eq!(above.predict_encoded(&u0).unwrap(), vec![0]);
    assert_eq!(build(0.5 - delta).predict_encoded(&u0).unwrap(), vec![1]);
    let secant = (loss_at(0.5 + delta) - loss_at(0.5 - delta)) / (2.0 * delta);
    assert!(secant > 1.0, "crossing the threshold changes the loss sharply ({secant})");
    let ste = ste_backward(&above, &u0, &y, 0.0).unwrap().layers[0].0.get(0, 0);
    assert!(ste.abs() < 1e-2, "STE gradient {ste} does not reflect the flip");
}

fn toy_model_for_adam() -> RrlModel {
    random_model(3, &[2], NlafPreset::C, false, 6)
}

fn zero_gradients(model: &RrlModel) -> Gradients {
    Gradients {
        layers: model
            .layers
            .iter()
            .map(|l| {
                (
                    DenseMatrix::zeros(l.w_conj.rows(), l.w_conj.cols()),
                    DenseMatrix::zeros(l.w_disj.rows(), l.w_disj.cols()),
                )
            })
            .collect(),
        head_weights: DenseMatrix::zeros(model.head.weights.rows(), model.head.weights.cols()),
        head_biases: vec![0.0; model.class_count()],
        log_temperature: 0.0,
    }
}

#[test]
fn adam_zero_gradient_is_a_no_op() {
    let mut model = toy_model_for_adam();
    let before = model.clone();
    let grads = zero_gradients(&model);
    let mut state = AdamState::new(&model);
    for _ in 0..5 {
        adam_step(&mut model, &grads, &mut state, 0.1).unwrap();
    }
    assert_eq!(model, before);
    assert_eq!(state.step_count(), 5);
}

#[test]
fn adam_constant_gradient_steps_by_learning_rate() {
    let mut model = toy_model_for_adam();
    let mut grads = zero_gradients(&model);
    grads.head_biases = vec![0.3, -2.0];
    let mut state = AdamState::new(&model);
    let lr = 1e-3;
    let mut previous = model.head.biases.clone();
    for _ in 0..50 {
        adam_step(&mut model, &grads, &mut state, lr).unwrap();
        for (p, (now, g)) in previous.iter().zip(model.head.biases.iter().zip(&grads.head_biases)) {
            // With bias correction m̂ = g and v̂ = g², so every step is
            // lr·g/(|g| + ε).
            let expected = -lr * g / (g.abs() + state.eps);
            assert_abs_diff_eq!(now - p, expected, epsilon = 1e-12);
        }
        previous = model.head.biases.clone();
    }
}

#[test]
fn adam_projects_logical_weights() {
    let mut model = toy_model_for_adam();
    model.layers[0].w_conj.set(0, 0, 1.0);
    model.layers[0].w_conj.set(0, 1, 0.0);
    let mut grads = zero_gradients(&model);
    grads.layers[0].0.set(0, 0, -5.0);
    grads.layers[0].0.set(0, 1, 5.0);
    let mut state = AdamState::new(&model);
    for _ in 0..10 {
        adam_step(&mut model, &grads, &mut state, 0.5).unwrap();
    }
    assert_eq!(model.layers[0].w_conj.get(0, 0), 1.0);
    assert_eq!(model.layers[0].w_conj.get(0, 1), 0.0);
    model.validate().unwrap();
}

#[test]
fn adam_rejects_mismatched_gradients() {
    let mut model = toy_model_for_adam();
    let mut grads = zero_gradients(&model);
    grads.head_biases.push(0.0);
    let mut state = AdamState::new(&model);
    assert!(adam_step(&mut model, &grads, &mut state, 0.1).is_err());
}

#[test]
fn config_validation_and_schedule() {
    let config = TrainConfig::default();
    config.validate().unwrap();
    assert!(TrainConfig { batch_size: 0, ..config.clone() }.validate().is_err());
    assert!(TrainConfig { learning_rate: 0.0, ..config.clone() }.validate().is_err());
    assert!(TrainConfig { lr_decay_factor: 1.5, ..config.clone() }.validate().is_err());
    let c = TrainConfig { learning_rate: 0.01, lr_decay_every: 10, ..config };
    assert_eq!(c.learning_rate_at(9), 0.01);
    assert_abs_diff_eq!(c.learning_rate_at(10), 0.0075, epsilon = 1e-15);
    assert_abs_diff_eq!(c.learning_rate_at(25), 0.01 * 0.75 * 0.75, epsilon = 1e-15);
}

/// Two continuous features in [0, 1]; the class is `x0 > 0.5`.
fn separable_toy() -> Dataset {
    let schema = FeatureSchema::parse("x0,continuous\nx1,continuous\ny,label,low,high\n").unwrap();
    let mut rng = Rng::new(77);
    let mut values = Vec::new();
    let mut classes = Vec::new();
    for i in 0..64 {
        // Keep a margin around the boundary.
        let x0 = if i % 2 == 0 { rng.uniform(0.0, 0.4) } else { rng.uniform(0.6, 1.0) };
        values.extend([x0, rng.uniform(0.0, 1.0)]);
        classes.push(i % 2);
    }
    Dataset::from_parts(schema, DenseMatrix::from_vec(64, 2, values).unwrap(), DenseMatrix::zeros(64, 0), classes).unwrap()
}

#[test]
fn separable_toy_converges_within_200_steps() {
    let ds = separable_toy();
    let rng = Rng::new(1);
    let bounds = sample_bounds(&ds, 6, &mut rng.derive(0)).unwrap();
    let config = ModelConfig {
        widths: vec![4],
        laf: LafKind::Nlaf(NlafParams::preset(NlafPreset::C)),
        initial_temperature: 0.1,
        ..ModelConfig::default()
    };
    let model = RrlModel::new(ds.schema().clone(), bounds, &config, &mut rng.derive(1)).unwrap();

    // Exhaustive search over single atoms confirms a perfect rule exists.
    let u0 = model.encode(&ds).unwrap();
    let perfect = (0..u0.cols()).any(|j| {
        (0..ds.len()).all(|i| (u0.get(i, j) == 1.0) == (ds.classes()[i] == 1))
            || (0..ds.len()).all(|i| (u0.get(i, j) == 1.0) == (ds.classes()[i] == 0))
    });
    assert!(perfect, "bounds admit no separating atom");

    // 64 rows in batches of 32: 100 epochs are 200 Adam steps.
    let train = TrainConfig {
        epochs: 100,
        learning_rate: 0.01,
        ..TrainConfig::default()
    };
    let fit = fit(model, &ds, None, &train).unwrap();
    assert_eq!(fit.history.len(), 100);
    assert!(fit.final_discrete_loss() < 0.1, "loss {}", fit.final_discrete_loss());
}

#[test]
fn fit_is_deterministic_and_keeps_weights_projected() {
    let ds = separable_toy();
    let mut rng = Rng::new(3);
    let bounds = sample_bounds(&ds, 3, &mut rng).unwrap();
    let model = RrlModel::new(ds.schema().clone(), bounds, &ModelConfig { widths: vec![3, 3], ..ModelConfig::default() }, &mut rng).unwrap();
    let valid = ds.subset(&(0..16).collect::<Vec<_>>());
    let train = TrainConfig { epochs: 12, batch_size: 7, seed: 42, ..TrainConfig::default() };
    let a = fit(model.clone(), &ds, Some(&valid), &train).unwrap();
    let b = fit(model, &ds, Some(&valid), &train).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.model, b.model);
    assert_eq!(a.last_model, b.last_model);
    assert_eq!(a.history.len(), 12);
    assert!(a.history.iter().all(|r| r.discrete_loss.is_finite() && r.continuous_loss.is_finite()));
    assert!(a.history.iter().all(|r| r.valid_macro_f1.is_some()));
    a.last_model.validate().unwrap();
    // The kept snapshot is the best by validation F1.
    let best = a.history[a.best_epoch].valid_macro_f1.unwrap();
    assert!(a.history.iter().all(|r| r.valid_macro_f1.unwrap() <= best));
}

#[test]
fn tic_tac_toe_training_loss_falls_below_threshold() {
    let dir = data_dir();
    let ds = load_dataset(dir.join("tic-tac-toe.csv"), dir.join("tic-tac-toe.schema")).unwrap();
    let mut rng = Rng::new(0);
    let bounds = sample_bounds(&ds, 1, &mut rng).unwrap();
    let config = ModelConfig {
        widths: vec![16],
        laf: LafKind::Nlaf(NlafParams::preset(NlafPreset::C)),
        initial_temperature: 0.01,
        ..ModelConfig::default()
    };
    let model = RrlModel::new(ds.schema().clone(), bounds, &config, &mut rng).unwrap();
    let train = TrainConfig {
        epochs: 400,
        lr_decay_every: 200,
        ..TrainConfig::default()
    };
    let fit = fit(model, &ds, None, &train).unwrap();
    assert!(fit.final_discrete_loss() < 0.05, "final loss {}", fit.final_discrete_loss());
}
