//! Gradient Grafting training.
//!
//! Every mode takes the loss gradient at the discrete model's output (the
//! "scion") and pushes it back through continuous LAF Jacobians. The modes
//! differ only in where those Jacobians are evaluated:
//!
//! * [`GraftingMode::Single`]: the fully continuous network `û⁽ˡ⁾`.
//! * [`GraftingMode::Hierarchical`]: each layer's LAF applied to the discrete
//!   outputs of the layers below, so every layer boundary is grafted too.
//! * [`GraftingMode::Ste`]: the LAF at discrete inputs *and* binarized weights
//!   `q(Ŵ)`, with `q` treated as the identity on the way back.

use serde::{Deserialize, Serialize};

use crate::data::{macro_f1, Dataset};
use crate::error::{Result, RrlError};
use crate::laf::binarize_weights;
use crate::model::{cross_entropy, laf_layer, Forward, LayerCache, RrlModel};
use crate::numerics::{matmul, matmul_transa, DenseMatrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraftingMode {
    Single,
    Hierarchical,
    Ste,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub l2_lambda: f64,
    pub grafting: GraftingMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            learning_rate: 2e-3,
            lr_decay_factor: 0.75,
            lr_decay_every: 100,
            l2_lambda: 1e-6,
            grafting: GraftingMode::Hierarchical,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(RrlError::InvalidArgument("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(RrlError::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return Err(RrlError::InvalidArgument(format!(
                "learning-rate decay must lie in (0, 1], got {}",
                self.lr_decay_factor
            )));
        }
        if self.lr_decay_every == 0 {
            return Err(RrlError::InvalidArgument("lr_decay_every must be at least 1".into()));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(RrlError::InvalidArgument(format!(
                "l2 lambda must be non-negative, got {}",
                self.l2_lambda
            )));
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_decay_factor.powi((epoch / self.lr_decay_every) as i32)
    }
}

/// Gradients of every trainable parameter, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// `(conj, disj)` weight gradients per logical layer.
    pub layers: Vec<(DenseMatrix, DenseMatrix)>,
    pub head_weights: DenseMatrix,
    pub head_biases: Vec<f64>,
    pub log_temperature: f64,
}

impl Gradients {
    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .map(|(c, d)| c.max_abs().max(d.max_abs()))
            .fold(self.head_weights.max_abs(), f64::max)
            .max(self.head_biases.iter().fold(0.0, |m, v| m.max(v.abs())))
            .max(self.log_temperature.abs())
    }

    fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for (c, d) in &self.layers {
            out.push(c.as_slice());
            out.push(d.as_slice());
        }
        out.push(self.head_weights.as_slice());
        out.push(&self.head_biases);
        out.push(std::slice::from_ref(&self.log_temperature));
        out
    }
}

/// Trainable parameters in a fixed order: per layer conj then disj weights,
/// then head weights, biases and log-temperature. The flag marks slices that
/// are projected onto `[0, 1]`.
fn parameter_slices(model: &mut RrlModel) -> Vec<(&mut [f64], bool)> {
    let mut out: Vec<(&mut [f64], bool)> = Vec::new();
    for layer in &mut model.layers {
        out.push((layer.w_conj.as_mut_slice(), true));
        out.push((layer.w_disj.as_mut_slice(), true));
    }
    out.push((model.head.weights.as_mut_slice(), false));
    out.push((&mut model.head.biases, false));
    out.push((std::slice::from_mut(&mut model.head.log_temperature), false));
    out
}

/// Discrete forward pass plus the LAF caches whose Jacobians `mode` uses.
fn grafting_pass(model: &RrlModel, u0: &DenseMatrix, mode: GraftingMode) -> Result<(Forward, Vec<LayerCache>)> {
    match mode {
        GraftingMode::Hierarchical => {
            let g = model.forward_grafting(u0)?;
            Ok((g.discrete, g.caches))
        }
        GraftingMode::Single => {
            let discrete = model.forward_discrete(u0)?;
            let (_, caches) = model.forward_continuous(u0)?;
            Ok((discrete, caches))
        }
        GraftingMode::Ste => {
            let discrete = model.forward_discrete(u0)?;
            let mut caches = Vec::with_capacity(model.layers.len());
            for layer in &model.layers {
                let input = RrlModel::gather(&layer.sources, &discrete.outputs)?;
                let wc = binarize_weights(&layer.w_conj);
                let wd = binarize_weights(&layer.w_disj);
                caches.push(laf_layer(layer, &input, &wc, &wd)?.1);
            }
            Ok((discrete, caches))
        }
    }
}

/// Logical-weight gradients for a given loss gradient with respect to the
/// head input (the discrete outputs the head reads), without the L2 term.
pub fn graft_backward(
    model: &RrlModel,
    u0: &DenseMatrix,
    grad_head_input: &DenseMatrix,
    mode: GraftingMode,
) -> Result<Vec<(DenseMatrix, DenseMatrix)>> {
    let widths = model.output_widths();
    let n_head: usize = model.head.sources.iter().map(|&s| widths[s]).sum();
    if grad_head_input.shape() != (u0.rows(), n_head) {
        return Err(RrlError::Shape(format!(
            "head-input gradient is {:?}, expected ({}, {n_head})",
            grad_head_input.shape(),
            u0.rows()
        )));
    }
    let (_, caches) = grafting_pass(model, u0, mode)?;
    let mut upstream: Vec<Option<DenseMatrix>> = vec![None; widths.len()];
    scatter(grad_head_input, &model.head.sources, &widths, &mut upstream);
    backward_layers(model, &caches, &widths, upstream, 0.0)
}

/// Discrete cross-entropy of a batch and the grafted gradients of
/// `CE + λ·ΣŴ²`.
pub fn gradients(
    model: &RrlModel,
    u0: &DenseMatrix,
    y: &DenseMatrix,
    mode: GraftingMode,
    l2_lambda: f64,
) -> Result<(f64, Gradients)> {
    let (discrete, caches) = grafting_pass(model, u0, mode)?;
    let (ce, g_logits, g_theta) = cross_entropy(&discrete.logits, y, model.head.temperature())?;

    let head_input = RrlModel::gather(&model.head.sources, &discrete.outputs)?;
    let head_weights = matmul_transa(&g_logits, &head_input)?;
    let mut head_biases = vec![0.0; model.class_count()];
    for i in 0..g_logits.rows() {
        for (b, g) in head_biases.iter_mut().zip(g_logits.row(i)) {
            *b += g;
        }
    }
    // The scion: loss gradient at the discrete head input.
    let scion = matmul(&g_logits, &model.head.weights)?;
    let widths = model.output_widths();
    let mut upstream: Vec<Option<DenseMatrix>> = vec![None; widths.len()];
    scatter(&scion, &model.head.sources, &widths, &mut upstream);

    let layers = backward_layers(model, &caches, &widths, upstream, l2_lambda)?;
    let grads = Gradients {
        layers,
        head_weights,
        head_biases,
        log_temperature: g_theta,
    };
    if grads.slices().iter().any(|s| s.iter().any(|v| !v.is_finite())) {
        return Err(RrlError::NonFinite("gradient".into()));
    }
    Ok((ce, grads))
}

/// Adds the column blocks of `grad` (laid out as the concatenation of
/// `sources`) onto the per-output upstream gradients. `u⁽⁰⁾` has no
/// parameters and is skipped.
fn scatter(grad: &DenseMatrix, sources: &[usize], widths: &[usize], upstream: &mut [Option<DenseMatrix>]) {
    let mut offset = 0;
    for &s in sources {
        let w = widths[s];
        if s > 0 {
            match &mut upstream[s] {
                Some(acc) => acc.add_assign(&grad.column_block(offset, w)),
                slot @ None => *slot = Some(grad.column_block(offset, w)),
            }
        }
        offset += w;
    }
}

fn backward_layers(
    model: &RrlModel,
    caches: &[LayerCache],
    widths: &[usize],
    mut upstream: Vec<Option<DenseMatrix>>,
    l2_lambda: f64,
) -> Result<Vec<(DenseMatrix, DenseMatrix)>> {
    let mut grads: Vec<Option<(DenseMatrix, DenseMatrix)>> = vec![None; model.layers.len()];
    for (i, layer) in model.layers.iter().enumerate().rev() {
        let l = i + 1;
        let (mut gc, mut gd) = match upstream[l].take() {
            Some(up) => {
                let nc = layer.conj_count();
                let up_c = up.column_block(0, nc);
                let up_d = up.column_block(nc, layer.w_disj.rows());
                let (gin_c, gc) = layer.laf.backward(&caches[i].conj, &up_c)?;
                let (gin_d, gd) = layer.laf.backward(&caches[i].disj, &up_d)?;
                let mut gin = gin_c;
                gin.add_assign(&gin_d);
                scatter(&gin, &layer.sources, widths, &mut upstream);
                (gc, gd)
            }
            None => (
                DenseMatrix::zeros(layer.w_conj.rows(), layer.w_conj.cols()),
                DenseMatrix::zeros(layer.w_disj.rows(), layer.w_disj.cols()),
            ),
        };
        if l2_lambda > 0.0 {
            for (g, w) in [(&mut gc, &layer.w_conj), (&mut gd, &layer.w_disj)] {
                for (g, w) in g.as_mut_slice().iter_mut().zip(w.as_slice()) {
                    *g += 2.0 * l2_lambda * w;
                }
            }
        }
        grads[i] = Some((gc, gd));
    }
    Ok(grads.into_iter().map(|g| g.expect("every layer visited")).collect())
}

pub fn graft_single_backward(model: &RrlModel, u0: &DenseMatrix, y: &DenseMatrix, l2_lambda: f64) -> Result<Gradients> {
    Ok(gradients(model, u0, y, GraftingMode::Single, l2_lambda)?.1)
}

pub fn graft_hierarchical_backward(model: &RrlModel, u0: &DenseMatrix, y: &DenseMatrix, l2_lambda: f64) -> Result<Gradients> {
    Ok(gradients(model, u0, y, GraftingMode::Hierarchical, l2_lambda)?.1)
}

pub fn ste_backward(model: &RrlModel, u0: &DenseMatrix, y: &DenseMatrix, l2_lambda: f64) -> Result<Gradients> {
    Ok(gradients(model, u0, y, GraftingMode::Ste, l2_lambda)?.1)
}

/// Adam moments for every parameter slice of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(model: &RrlModel) -> Self {
        let mut shadow = model.clone();
        let sizes: Vec<usize> = parameter_slices(&mut shadow).iter().map(|(s, _)| s.len()).collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update, followed by clamping every logical
/// weight into `[0, 1]`.
pub fn adam_step(model: &mut RrlModel, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    let grad_slices = grads.slices();
    let params = parameter_slices(model);
    if params.len() != grad_slices.len()
        || params.len() != state.first.len()
        || params.iter().zip(&grad_slices).zip(&state.first).any(|(((p, _), g), m)| p.len() != g.len() || p.len() != m.len())
    {
        return Err(RrlError::Shape("gradients or optimizer state do not match the model".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (k, ((param, project), grad)) in params.into_iter().zip(grad_slices).enumerate() {
        let (m, v) = (&mut state.first[k], &mut state.second[k]);
        for j in 0..param.len() {
            let g = grad[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            // A parameter whose gradient stays exactly zero (a weight pinned
            // at 0) has moments decaying into subnormals, which are slow to
            // compute with. At that size they move nothing, so flush them.
            if m[j].abs() < f64::MIN_POSITIVE {
                m[j] = 0.0;
            }
            if v[j] < f64::MIN_POSITIVE {
                v[j] = 0.0;
            }
            let update = lr * (m[j] / bc1) / ((v[j] / bc2).sqrt() + state.eps);
            let next = param[j] - update;
            if !next.is_finite() {
                return Err(RrlError::NonFinite("parameter update".into()));
            }
            param[j] = if project { next.clamp(0.0, 1.0) } else { next };
        }
    }
    Ok(())
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Cross-entropy of the discrete model on the whole training set.
    pub discrete_loss: f64,
    /// Cross-entropy of the fully continuous network on the whole training set.
    pub continuous_loss: f64,
    /// Macro-F1 of the discrete model on the validation set, if there is one.
    pub valid_macro_f1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Snapshot with the best validation macro-F1 (ties: lower training loss,
    /// then earlier epoch). Without validation data, the lowest training loss.
    pub model: RrlModel,
    pub best_epoch: usize,
    /// Model after the last epoch.
    pub last_model: RrlModel,
    pub history: Vec<EpochRecord>,
}

impl FitResult {
    pub fn final_discrete_loss(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.discrete_loss)
    }
}

/// Trains `model` on `train` with shuffled mini-batches (reshuffled every
/// epoch from a stream derived from the seed) and keeps the best snapshot.
pub fn fit(model: RrlModel, train: &Dataset, valid: Option<&Dataset>, config: &TrainConfig) -> Result<FitResult> {
    fit_with(model, train, valid, config, |_| {})
}

/// [`fit`] with a callback invoked after every epoch.
pub fn fit_with(
    mut model: RrlModel,
    train: &Dataset,
    valid: Option<&Dataset>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<FitResult> {
    config.validate()?;
    model.validate()?;
    if train.is_empty() {
        return Err(RrlError::Data("training set is empty".into()));
    }
    let u0 = model.encode(train)?;
    let y = train.labels();
    let valid_u0 = match valid {
        Some(v) if !v.is_empty() => Some((model.encode(v)?, v.classes())),
        _ => None,
    };
    let master = Rng::new(config.seed);
    let mut adam = AdamState::new(&model);
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(RrlModel, usize, f64, f64)> = None;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..config.epochs {
        let lr = config.learning_rate_at(epoch);
        let mut rng = master.derive(epoch as u64);
        order.sort_unstable();
        rng.shuffle(&mut order);
        for batch in order.chunks(config.batch_size) {
            let bu = u0.select_rows(batch);
            let by = y.select_rows(batch);
            let (_, grads) = gradients(&model, &bu, &by, config.grafting, config.l2_lambda)?;
            adam_step(&mut model, &grads, &mut adam, lr)?;
        }

        let (discrete_loss, continuous_loss) = full_losses(&model, &u0, y)?;
        let valid_macro_f1 = match &valid_u0 {
            Some((vu, classes)) => Some(macro_f1(classes, &model.predict_encoded(vu)?, model.class_count())?),
            None => None,
        };
        let record = EpochRecord {
            epoch,
            discrete_loss,
            continuous_loss,
            valid_macro_f1,
        };
        on_epoch(&record);
        let f1 = valid_macro_f1.unwrap_or(0.0);
        let improves = match &best {
            None => true,
            Some((_, _, best_f1, best_loss)) => f1 > *best_f1 || (f1 == *best_f1 && discrete_loss < *best_loss),
        };
        if improves {
            best = Some((model.clone(), epoch, f1, discrete_loss));
        }
        history.push(record);
    }
    let (best_model, best_epoch) = match best {
        Some((m, e, _, _)) => (m, e),
        None => (model.clone(), 0),
    };
    Ok(FitResult {
        model: best_model,
        best_epoch,
        last_model: model,
        history,
    })
}

/// Rows per block when scoring the whole training split. Small blocks stay
/// in cache and reuse allocations instead of faulting in fresh pages.
const EVAL_CHUNK: usize = 512;

/// Mean discrete and continuous cross-entropy over every row of `u0`.
fn full_losses(model: &RrlModel, u0: &DenseMatrix, y: &DenseMatrix) -> Result<(f64, f64)> {
    let temperature = model.head.temperature();
    let (mut discrete, mut continuous) = (0.0, 0.0);
    let rows: Vec<usize> = (0..u0.rows()).collect();
    for chunk in rows.chunks(EVAL_CHUNK) {
        let (cu, cy) = (u0.select_rows(chunk), y.select_rows(chunk));
        let weight = chunk.len() as f64;
        discrete += weight * cross_entropy(&model.forward_discrete(&cu)?.logits, &cy, temperature)?.0;
        continuous += weight * cross_entropy(&model.forward_continuous(&cu)?.0.logits, &cy, temperature)?.0;
    }
    let n = u0.rows().max(1) as f64;
    Ok((discrete / n, continuous / n))
}

/// Discrete training accuracy helper used by tests and reports.
pub fn accuracy(model: &RrlModel, ds: &Dataset) -> Result<f64> {
    let pred = model.predict(ds)?;
    let hits = pred.iter().zip(ds.classes()).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / ds.len().max(1) as f64)
}
