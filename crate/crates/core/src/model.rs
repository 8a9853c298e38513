//! The full network: binarization layer, logical layers wired through skip
//! connections, and a linear head with a trainable softmax temperature.
//!
//! Outputs are indexed by layer: index 0 is `u⁽⁰⁾` (the binarized input) and
//! index `l ≥ 1` is the output of logical layer `l`. Every logical layer and
//! the head read the horizontal concatenation of a list of such outputs, its
//! `sources`.

use serde::{Deserialize, Serialize};

use crate::binarizer::{assemble_u0_batch, BinarizationBounds};
use crate::data::{Dataset, FeatureSchema};
use crate::error::{Result, RrlError};
use crate::laf::{binarize_weights, discrete_forward, LafCache, LafKind, NodeKind};
use crate::numerics::{exact_sum, matmul_transb, uniform_matrix, DenseMatrix, Rng};

/// Upper end of the uniform range used to initialize logical weights.
pub const INIT_WEIGHT_MAX: f64 = 0.6;

/// One logical layer: `w_conj` (conjunction nodes) and `w_disj` (disjunction
/// nodes), each `nodes × n_in` with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalLayer {
    pub w_conj: DenseMatrix,
    pub w_disj: DenseMatrix,
    pub laf: LafKind,
    pub sources: Vec<usize>,
}

impl LogicalLayer {
    pub fn input_width(&self) -> usize {
        self.w_conj.cols()
    }

    /// `n_out`: conjunction nodes followed by disjunction nodes.
    pub fn output_width(&self) -> usize {
        self.w_conj.rows() + self.w_disj.rows()
    }

    pub fn conj_count(&self) -> usize {
        self.w_conj.rows()
    }

    /// Weights of one half.
    pub fn weights(&self, node: NodeKind) -> &DenseMatrix {
        match node {
            NodeKind::Conj => &self.w_conj,
            NodeKind::Disj => &self.w_disj,
        }
    }
}

/// Linear head `logits = W·u + b`; the softmax divides logits by
/// `τ = exp(log_temperature)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub weights: DenseMatrix,
    pub biases: Vec<f64>,
    pub log_temperature: f64,
    pub sources: Vec<usize>,
}

impl LinearHead {
    pub fn temperature(&self) -> f64 {
        self.log_temperature.exp()
    }
}

/// Layer layout used to build a fresh model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Per logical layer, the number of conjunction nodes (and, equally, of
    /// disjunction nodes).
    pub widths: Vec<usize>,
    pub laf: LafKind,
    /// Layers from the third on also read the output two layers down.
    pub skip_connections: bool,
    /// The head also reads the second-to-last logical layer.
    pub head_skip: bool,
    pub initial_temperature: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            widths: vec![32],
            laf: LafKind::default(),
            skip_connections: true,
            head_skip: false,
            initial_temperature: 1.0,
        }
    }
}

/// Sources of logical layer `l` (1-based) under the default plan: layer 1
/// reads `u⁽⁰⁾`, layer 2 reads layer 1, and every later layer reads the two
/// layers below it.
pub fn default_sources(l: usize, skip_connections: bool) -> Vec<usize> {
    match l {
        0 => panic!("logical layers are numbered from 1"),
        1 | 2 => vec![l - 1],
        _ if skip_connections => vec![l - 1, l - 2],
        _ => vec![l - 1],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrlModel {
    pub schema: FeatureSchema,
    pub bounds: BinarizationBounds,
    pub layers: Vec<LogicalLayer>,
    pub head: LinearHead,
}

/// Per-layer outputs of a forward pass (index 0 is `u⁽⁰⁾`) and the logits.
#[derive(Debug, Clone)]
pub struct Forward {
    pub outputs: Vec<DenseMatrix>,
    pub logits: DenseMatrix,
}

/// LAF caches of the conjunction and disjunction halves of one layer.
#[derive(Debug, Clone)]
pub struct LayerCache {
    pub conj: LafCache,
    pub disj: LafCache,
}

/// Result of the grafting forward pass: the discrete path that feeds every
/// layer, plus the continuous outputs `ũ⁽ˡ⁾ = LAF(u⁽ˡ⁻¹⁾, Ŵ⁽ˡ⁾)` with their caches.
#[derive(Debug, Clone)]
pub struct GraftingForward {
    pub discrete: Forward,
    pub continuous_outputs: Vec<DenseMatrix>,
    pub continuous_logits: DenseMatrix,
    pub caches: Vec<LayerCache>,
}

impl RrlModel {
    /// Fresh model with logical weights drawn from `U[0, 0.6]` and head
    /// weights and biases from `U(−1/√n, 1/√n)`.
    pub fn new(
        schema: FeatureSchema,
        bounds: BinarizationBounds,
        config: &ModelConfig,
        rng: &mut Rng,
    ) -> Result<Self> {
        if config.widths.is_empty() || config.widths.contains(&0) {
            return Err(RrlError::InvalidArgument(
                "at least one logical layer of non-zero width is required".into(),
            ));
        }
        if !(config.initial_temperature > 0.0 && config.initial_temperature.is_finite()) {
            return Err(RrlError::InvalidArgument(format!(
                "initial temperature must be positive, got {}",
                config.initial_temperature
            )));
        }
        config.laf.validate()?;
        if schema.continuous_count() != bounds.feature_count() {
            return Err(RrlError::Shape(format!(
                "schema has {} continuous features, bounds cover {}",
                schema.continuous_count(),
                bounds.feature_count()
            )));
        }
        let n0 = bounds.output_width() + schema.binary_width();
        if n0 == 0 {
            return Err(RrlError::InvalidArgument("model has no input features".into()));
        }
        let mut widths = vec![n0];
        let mut layers = Vec::with_capacity(config.widths.len());
        for (i, &w) in config.widths.iter().enumerate() {
            let sources = default_sources(i + 1, config.skip_connections);
            let n_in: usize = sources.iter().map(|&s| widths[s]).sum();
            layers.push(LogicalLayer {
                w_conj: uniform_matrix(rng, w, n_in, 0.0, INIT_WEIGHT_MAX)?,
                w_disj: uniform_matrix(rng, w, n_in, 0.0, INIT_WEIGHT_MAX)?,
                laf: config.laf,
                sources,
            });
            widths.push(2 * w);
        }
        let last = layers.len();
        let head_sources = if config.head_skip && last >= 2 {
            vec![last, last - 1]
        } else {
            vec![last]
        };
        let n_head: usize = head_sources.iter().map(|&s| widths[s]).sum();
        let m = schema.class_count();
        let bound = 1.0 / (n_head as f64).sqrt();
        let head = LinearHead {
            weights: uniform_matrix(rng, m, n_head, -bound, bound)?,
            biases: (0..m).map(|_| rng.uniform(-bound, bound)).collect(),
            log_temperature: config.initial_temperature.ln(),
            sources: head_sources,
        };
        let model = Self {
            schema,
            bounds,
            layers,
            head,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks widths, source lists and parameter ranges.
    pub fn validate(&self) -> Result<()> {
        let widths = self.output_widths();
        for (i, layer) in self.layers.iter().enumerate() {
            let l = i + 1;
            check_sources(&layer.sources, l, "layer")?;
            let n_in: usize = layer.sources.iter().map(|&s| widths[s]).sum();
            if layer.w_conj.cols() != n_in || layer.w_disj.cols() != n_in {
                return Err(RrlError::Shape(format!(
                    "layer {l} weights expect {} inputs, sources provide {n_in}",
                    layer.w_conj.cols()
                )));
            }
            if layer.output_width() == 0 {
                return Err(RrlError::Shape(format!("layer {l} has no nodes")));
            }
            for w in [&layer.w_conj, &layer.w_disj] {
                if w.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(RrlError::OutOfRange(format!(
                        "layer {l} has weights outside [0, 1]"
                    )));
                }
            }
            layer.laf.validate()?;
        }
        check_sources(&self.head.sources, self.layers.len() + 1, "head")?;
        let n_head: usize = self.head.sources.iter().map(|&s| widths[s]).sum();
        let m = self.schema.class_count();
        if self.head.weights.shape() != (m, n_head) || self.head.biases.len() != m {
            return Err(RrlError::Shape(format!(
                "head is {:?} with {} biases, expected ({m}, {n_head})",
                self.head.weights.shape(),
                self.head.biases.len()
            )));
        }
        self.head.weights.ensure_finite("head weights")?;
        if !self.head.biases.iter().all(|b| b.is_finite()) || !self.head.log_temperature.is_finite() {
            return Err(RrlError::NonFinite("head biases or temperature".into()));
        }
        Ok(())
    }

    /// Width of `u⁽⁰⁾`.
    pub fn input_width(&self) -> usize {
        self.bounds.output_width() + self.schema.binary_width()
    }

    /// Widths of every output, index 0 being `u⁽⁰⁾`.
    pub fn output_widths(&self) -> Vec<usize> {
        std::iter::once(self.input_width())
            .chain(self.layers.iter().map(LogicalLayer::output_width))
            .collect()
    }

    pub fn class_count(&self) -> usize {
        self.schema.class_count()
    }

    /// `u⁽⁰⁾` of every row of `ds`; fails if `ds` was loaded with another schema.
    pub fn encode(&self, ds: &Dataset) -> Result<DenseMatrix> {
        if ds.schema() != &self.schema {
            return Err(RrlError::Schema(
                "dataset schema differs from the model's schema".into(),
            ));
        }
        assemble_u0_batch(&self.bounds, ds)
    }

    /// Horizontal concatenation of `outputs[s]` for `s` in `sources`.
    pub fn gather(sources: &[usize], outputs: &[DenseMatrix]) -> Result<DenseMatrix> {
        if let [single] = sources {
            return Ok(outputs[*single].clone());
        }
        let parts: Vec<&DenseMatrix> = sources.iter().map(|&s| &outputs[s]).collect();
        DenseMatrix::hconcat(&parts)
    }

    fn check_input(&self, u0: &DenseMatrix) -> Result<()> {
        if u0.cols() != self.input_width() {
            return Err(RrlError::Shape(format!(
                "input has width {}, model expects {}",
                u0.cols(),
                self.input_width()
            )));
        }
        Ok(())
    }

    /// Exact Boolean evaluation with binarized weights `q(Ŵ)`.
    ///
    /// Each logit is the correctly rounded sum of the bias and the head
    /// weights of the active inputs, so it does not depend on summation order.
    pub fn forward_discrete(&self, u0: &DenseMatrix) -> Result<Forward> {
        self.check_input(u0)?;
        let mut outputs = vec![u0.clone()];
        for layer in &self.layers {
            let input = Self::gather(&layer.sources, &outputs)?;
            let conj = discrete_forward(NodeKind::Conj, &input, &binarize_weights(&layer.w_conj))?;
            let disj = discrete_forward(NodeKind::Disj, &input, &binarize_weights(&layer.w_disj))?;
            outputs.push(DenseMatrix::hconcat(&[&conj, &disj])?);
        }
        let head_input = Self::gather(&self.head.sources, &outputs)?;
        let logits = self.discrete_logits(&head_input);
        Ok(Forward { outputs, logits })
    }

    fn discrete_logits(&self, u: &DenseMatrix) -> DenseMatrix {
        let m = self.class_count();
        let mut logits = DenseMatrix::zeros(u.rows(), m);
        let mut active = Vec::with_capacity(u.cols());
        for i in 0..u.rows() {
            active.clear();
            active.extend(u.row(i).iter().enumerate().filter(|(_, &v)| v == 1.0).map(|(j, _)| j));
            for c in 0..m {
                let w = self.head.weights.row(c);
                let terms = std::iter::once(self.head.biases[c]).chain(active.iter().map(|&j| w[j]));
                logits.set(i, c, exact_sum(terms));
            }
        }
        logits
    }

    /// `W·u + b` for continuous head inputs.
    pub fn continuous_logits(&self, u: &DenseMatrix) -> Result<DenseMatrix> {
        let mut logits = matmul_transb(u, &self.head.weights)?;
        for i in 0..logits.rows() {
            for (v, b) in logits.row_mut(i).iter_mut().zip(&self.head.biases) {
                *v += b;
            }
        }
        Ok(logits)
    }

    /// Fully continuous pass: every layer applies its LAF to the continuous
    /// outputs of its sources.
    pub fn forward_continuous(&self, u0: &DenseMatrix) -> Result<(Forward, Vec<LayerCache>)> {
        self.check_input(u0)?;
        let mut outputs = vec![u0.clone()];
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = Self::gather(&layer.sources, &outputs)?;
            let (out, cache) = laf_layer(layer, &input, &layer.w_conj, &layer.w_disj)?;
            outputs.push(out);
            caches.push(cache);
        }
        let head_input = Self::gather(&self.head.sources, &outputs)?;
        let logits = self.continuous_logits(&head_input)?;
        Ok((Forward { outputs, logits }, caches))
    }

    /// Grafting pass: the discrete path feeds every layer, and each layer
    /// also evaluates its LAF on those discrete inputs.
    pub fn forward_grafting(&self, u0: &DenseMatrix) -> Result<GraftingForward> {
        let discrete = self.forward_discrete(u0)?;
        let mut continuous_outputs = vec![u0.clone()];
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = Self::gather(&layer.sources, &discrete.outputs)?;
            let (out, cache) = laf_layer(layer, &input, &layer.w_conj, &layer.w_disj)?;
            continuous_outputs.push(out);
            caches.push(cache);
        }
        let head_input = Self::gather(&self.head.sources, &continuous_outputs)?;
        let continuous_logits = self.continuous_logits(&head_input)?;
        Ok(GraftingForward {
            discrete,
            continuous_outputs,
            continuous_logits,
            caches,
        })
    }

    /// Class with the largest discrete logit for every row of `u0`; ties go
    /// to the lower class index.
    pub fn predict_encoded(&self, u0: &DenseMatrix) -> Result<Vec<usize>> {
        self.check_input(u0)?;
        // Row blocks keep the intermediate matrices small on large inputs.
        let rows: Vec<usize> = (0..u0.rows()).collect();
        let mut out = Vec::with_capacity(rows.len());
        for chunk in rows.chunks(512) {
            out.extend(argmax_rows(&self.forward_discrete(&u0.select_rows(chunk))?.logits));
        }
        Ok(out)
    }

    pub fn predict(&self, ds: &Dataset) -> Result<Vec<usize>> {
        self.predict_encoded(&self.encode(ds)?)
    }

    /// `λ · Σ Ŵ²` over every logical weight.
    pub fn l2_penalty(&self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            return 0.0;
        }
        lambda
            * self
                .layers
                .iter()
                .map(|l| l.w_conj.sum_of_squares() + l.w_disj.sum_of_squares())
                .sum::<f64>()
    }

    /// Number of logical weights above the 0.5 threshold.
    pub fn active_weight_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.w_conj.as_slice().iter().chain(l.w_disj.as_slice()))
            .filter(|&&v| v > 0.5)
            .count()
    }
}

fn check_sources(sources: &[usize], l: usize, what: &str) -> Result<()> {
    if sources.is_empty() {
        return Err(RrlError::Shape(format!("{what} {l} has no sources")));
    }
    let mut seen = sources.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != sources.len() || sources.iter().any(|&s| s >= l) {
        return Err(RrlError::Shape(format!(
            "{what} {l} sources {sources:?} must be distinct earlier outputs"
        )));
    }
    Ok(())
}

/// Continuous output of one layer (conjunction half then disjunction half)
/// for the given input and weights.
pub fn laf_layer(
    layer: &LogicalLayer,
    input: &DenseMatrix,
    w_conj: &DenseMatrix,
    w_disj: &DenseMatrix,
) -> Result<(DenseMatrix, LayerCache)> {
    let (conj, conj_cache) = layer.laf.forward(NodeKind::Conj, input, w_conj)?;
    let (disj, disj_cache) = layer.laf.forward(NodeKind::Disj, input, w_disj)?;
    let out = DenseMatrix::hconcat(&[&conj, &disj])?;
    Ok((
        out,
        LayerCache {
            conj: conj_cache,
            disj: disj_cache,
        },
    ))
}

/// Index of the largest entry of every row, lowest index on ties.
pub fn argmax_rows(m: &DenseMatrix) -> Vec<usize> {
    (0..m.rows())
        .map(|i| {
            let row = m.row(i);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Softmax cross-entropy of `logits / τ` against one-hot `y`, averaged over
/// rows, with the gradient of that mean with respect to the logits and to
/// `θ = ln τ`.
pub fn cross_entropy(logits: &DenseMatrix, y: &DenseMatrix, temperature: f64) -> Result<(f64, DenseMatrix, f64)> {
    if logits.shape() != y.shape() {
        return Err(RrlError::Shape(format!(
            "logits {:?} vs labels {:?}",
            logits.shape(),
            y.shape()
        )));
    }
    if !(temperature > 0.0) {
        return Err(RrlError::OutOfRange(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let n = logits.rows() as f64;
    let mut loss = 0.0;
    let mut grad = DenseMatrix::zeros(logits.rows(), logits.cols());
    let mut grad_theta = 0.0;
    for i in 0..logits.rows() {
        let z: Vec<f64> = logits.row(i).iter().map(|v| v / temperature).collect();
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = z.iter().map(|v| (v - max).exp()).sum();
        let log_denom = denom.ln() + max;
        for (c, &zc) in z.iter().enumerate() {
            let p = (zc - log_denom).exp();
            let yc = y.get(i, c);
            loss -= yc * (zc - log_denom);
            // dL/dz = p − y; z = logit / τ, and dz/dθ = −z.
            let gz = (p - yc) / n;
            grad.set(i, c, gz / temperature);
            grad_theta -= gz * zc;
        }
    }
    let loss = loss / n;
    if !loss.is_finite() || !grad_theta.is_finite() {
        return Err(RrlError::NonFinite("cross-entropy".into()));
    }
    grad.ensure_finite("logit gradient")?;
    Ok((loss, grad, grad_theta))
}

/// Training objective: cross-entropy plus the L2 penalty on logical weights.
pub fn loss(model: &RrlModel, logits: &DenseMatrix, y: &DenseMatrix, lambda: f64) -> Result<f64> {
    let (ce, _, _) = cross_entropy(logits, y, model.head.temperature())?;
    Ok(ce + model.l2_penalty(lambda))
}
