//! Logical activation functions: the exact discrete AND/OR gates and three
//! continuous surrogates (product form, log-improved form, and the decoupled
//! form computed through a single matrix product).
//!
//! Scalar functions evaluate one node on one input vector. [`LafKind::forward`]
//! and [`LafKind::backward`] work on a whole batch `H` (`B × n`) against a
//! weight matrix `W` (`l × n`, one row per node).

use serde::{Deserialize, Serialize};

use crate::error::{Result, RrlError};
use crate::numerics::{map_elementwise, matmul, matmul_transa, matmul_transb, DenseMatrix};

/// Default `ε` of the log-improved functions.
pub const DEFAULT_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Conj,
    Disj,
}

/// Parameters `(α, β, γ)` of the decoupled activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlafParams {
    pub alpha: f64,
    pub beta: u32,
    pub gamma: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NlafPreset {
    A,
    B,
    C,
}

impl NlafParams {
    pub fn new(alpha: f64, beta: u32, gamma: u32) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(RrlError::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        if beta == 0 || gamma == 0 {
            return Err(RrlError::InvalidArgument(
                "beta and gamma must be positive".into(),
            ));
        }
        Ok(Self { alpha, beta, gamma })
    }

    /// `a = (0.999, 8, 1)`, `b = (0.999, 8, 3)`, `c = (0.9, 3, 3)`.
    pub fn preset(preset: NlafPreset) -> Self {
        let (alpha, beta, gamma) = match preset {
            NlafPreset::A => (0.999, 8, 1),
            NlafPreset::B => (0.999, 8, 3),
            NlafPreset::C => (0.9, 3, 3),
        };
        Self { alpha, beta, gamma }
    }

    fn g(&self, x: f64) -> f64 {
        1.0 - 1.0 / (1.0 - pow_u(self.alpha * x, self.beta))
    }

    #[cfg(test)]
    fn g_prime(&self, x: f64) -> f64 {
        self.g_with_prime(x).1
    }

    /// `(G(x), G'(x))` sharing one power computation.
    #[inline]
    fn g_with_prime(&self, x: f64) -> (f64, f64) {
        let ax = self.alpha * x;
        let lower = pow_u(ax, self.beta - 1);
        let denom = 1.0 - lower * ax;
        let g = 1.0 - 1.0 / denom;
        (g, -self.alpha * self.beta as f64 * lower / (denom * denom))
    }

    /// `(1 + s)^(−γ)`.
    #[inline]
    fn q_of(&self, s: f64) -> f64 {
        1.0 / pow_u(1.0 + s, self.gamma)
    }
}

/// `x^n` by square-and-multiply; `f64::powi` compiles to an out-of-line
/// call that dominates the elementwise passes.
#[inline]
fn pow_u(mut x: f64, mut n: u32) -> f64 {
    let mut acc = 1.0;
    while n > 0 {
        if n & 1 == 1 {
            acc *= x;
        }
        x *= x;
        n >>= 1;
    }
    acc
}

impl Default for NlafParams {
    fn default() -> Self {
        Self::preset(NlafPreset::B)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LafKind {
    /// Product form `Π(1 − w(1 − h))` and `1 − Π(1 − hw)`.
    Original,
    /// Product form with `ε` inside each factor, projected by
    /// `P(v) = 1 / (1 − ln v)`. With `derivative_trick`, the backward pass
    /// uses `P(P(v)²) / v` as `dP/dv` instead of `P(v)² / v`.
    LogImproved { epsilon: f64, derivative_trick: bool },
    Nlaf(NlafParams),
}

impl Default for LafKind {
    fn default() -> Self {
        LafKind::Nlaf(NlafParams::default())
    }
}

impl LafKind {
    pub fn log_improved() -> Self {
        LafKind::LogImproved {
            epsilon: DEFAULT_EPSILON,
            derivative_trick: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LafKind::Original => Ok(()),
            LafKind::LogImproved { epsilon, .. } if epsilon > 0.0 && epsilon.is_finite() => Ok(()),
            LafKind::LogImproved { epsilon, .. } => Err(RrlError::InvalidArgument(format!(
                "epsilon must be positive, got {epsilon}"
            ))),
            LafKind::Nlaf(p) => NlafParams::new(p.alpha, p.beta, p.gamma).map(|_| ()),
        }
    }
}

fn check_unit(values: &[f64], what: &str) -> Result<()> {
    match values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(RrlError::OutOfRange(format!("{what} entry {v} outside [0, 1]"))),
        None => Ok(()),
    }
}

fn check_binary(values: &[f64], what: &str) -> Result<()> {
    match values.iter().find(|&&v| v != 0.0 && v != 1.0) {
        Some(v) => Err(RrlError::OutOfRange(format!("{what} entry {v} is not binary"))),
        None => Ok(()),
    }
}

fn check_pair(h: &[f64], w: &[f64]) -> Result<()> {
    if h.len() != w.len() {
        return Err(RrlError::Shape(format!(
            "input has {} entries, weights have {}",
            h.len(),
            w.len()
        )));
    }
    Ok(())
}

/// AND over the inputs selected by `w`; an empty selection yields 1.
pub fn discrete_conj(u: &[f64], w: &[f64]) -> Result<f64> {
    check_pair(u, w)?;
    check_binary(u, "input")?;
    check_binary(w, "weight")?;
    let all = u.iter().zip(w).all(|(&u, &w)| w == 0.0 || u == 1.0);
    Ok(if all { 1.0 } else { 0.0 })
}

/// OR over the inputs selected by `w`; an empty selection yields 0.
pub fn discrete_disj(u: &[f64], w: &[f64]) -> Result<f64> {
    check_pair(u, w)?;
    check_binary(u, "input")?;
    check_binary(w, "weight")?;
    let any = u.iter().zip(w).any(|(&u, &w)| w == 1.0 && u == 1.0);
    Ok(if any { 1.0 } else { 0.0 })
}

pub fn conj_original(h: &[f64], w: &[f64]) -> Result<f64> {
    check_pair(h, w)?;
    check_unit(h, "input")?;
    check_unit(w, "weight")?;
    Ok(h.iter().zip(w).map(|(&h, &w)| 1.0 - w * (1.0 - h)).product())
}

pub fn disj_original(h: &[f64], w: &[f64]) -> Result<f64> {
    check_pair(h, w)?;
    check_unit(h, "input")?;
    check_unit(w, "weight")?;
    Ok(1.0 - h.iter().zip(w).map(|(&h, &w)| 1.0 - h * w).product::<f64>())
}

/// `P(v) = 1 / (1 − ln v)` given `ln v`, capped at 1 because `ε` can push
/// the product a hair above 1.
fn project_log(log_v: f64) -> f64 {
    (1.0 / (1.0 - log_v)).min(1.0)
}

pub fn conj_log_improved(h: &[f64], w: &[f64], eps: f64) -> Result<f64> {
    check_pair(h, w)?;
    check_unit(h, "input")?;
    check_unit(w, "weight")?;
    let log_v: f64 = h.iter().zip(w).map(|(&h, &w)| (1.0 - w * (1.0 - h) + eps).ln()).sum();
    Ok(project_log(log_v))
}

pub fn disj_log_improved(h: &[f64], w: &[f64], eps: f64) -> Result<f64> {
    check_pair(h, w)?;
    check_unit(h, "input")?;
    check_unit(w, "weight")?;
    let log_v: f64 = h.iter().zip(w).map(|(&h, &w)| (1.0 - h * w + eps).ln()).sum();
    Ok(1.0 - project_log(log_v))
}

/// `G(x) = 1 − 1/(1 − (αx)^β)`, mapping `[0, 1]` onto `[G(1), 0]`.
pub fn g_func(x: f64, alpha: f64, beta: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(RrlError::OutOfRange(format!("G is defined on [0, 1], got {x}")));
    }
    Ok(NlafParams::new(alpha, beta, 1)?.g(x))
}

/// `P(x) = (1 − x)^(−γ)`, mapping `(−∞, 0]` onto `(0, 1]`.
pub fn p_func(x: f64, gamma: u32) -> Result<f64> {
    if x > 0.0 || x.is_nan() {
        return Err(RrlError::OutOfRange(format!("P is defined on (-inf, 0], got {x}")));
    }
    Ok((1.0 - x).powi(-(gamma as i32)))
}

fn q_scalar(h: &[f64], w: &[f64], p: &NlafParams) -> f64 {
    let s: f64 = h.iter().zip(w).map(|(&h, &w)| p.g(h) * p.g(w)).sum();
    p.q_of(s.max(0.0))
}

/// `Conj₊(h, w) = Q(1 − h, w)`.
pub fn conj_nlaf(h: &[f64], w: &[f64], params: &NlafParams) -> Result<f64> {
    check_pair(h, w)?;
    check_unit(h, "input")?;
    check_unit(w, "weight")?;
    let neg: Vec<f64> = h.iter().map(|v| 1.0 - v).collect();
    Ok(q_scalar(&neg, w, params))
}

/// `Disj₊(h, w) = 1 − Q(h, w)`.
pub fn disj_nlaf(h: &[f64], w: &[f64], params: &NlafParams) -> Result<f64> {
    check_pair(h, w)?;
    check_unit(h, "input")?;
    check_unit(w, "weight")?;
    Ok(1.0 - q_scalar(h, w, params))
}

/// `Q(H, W) = P(−G(H)·G(W)ᵀ)` for a whole batch, through one matrix product.
pub fn q_batch(h: &DenseMatrix, w: &DenseMatrix, params: &NlafParams) -> Result<DenseMatrix> {
    check_unit(h.as_slice(), "input")?;
    check_unit(w.as_slice(), "weight")?;
    let gh = map_elementwise(h, |x| params.g(x))?;
    let gw = map_elementwise(w, |x| params.g(x))?;
    let s = matmul_transb(&gh, &gw)?;
    map_elementwise(&s, |s| params.q_of(s.max(0.0)))
}

/// `q(Ŵ)`: 1 where the weight is strictly above 0.5.
pub fn binarize_weights(w: &DenseMatrix) -> DenseMatrix {
    let values = w.as_slice().iter().map(|&v| if v > 0.5 { 1.0 } else { 0.0 }).collect();
    DenseMatrix::from_vec(w.rows(), w.cols(), values).expect("same shape")
}

/// Exact gates for a batch of binary inputs `u` (`B × n`) against binary
/// weights (`l × n`).
pub fn discrete_forward(node: NodeKind, u: &DenseMatrix, w_bin: &DenseMatrix) -> Result<DenseMatrix> {
    check_binary(u.as_slice(), "input")?;
    check_binary(w_bin.as_slice(), "weight")?;
    // Counts of selected inputs that are 0 (conj) or 1 (disj); the products
    // are sums of exact small integers.
    let (source, fire): (DenseMatrix, fn(f64) -> f64) = match node {
        NodeKind::Conj => (
            map_elementwise(u, |v| 1.0 - v)?,
            |c| if c == 0.0 { 1.0 } else { 0.0 },
        ),
        NodeKind::Disj => (u.clone(), |c| if c > 0.0 { 1.0 } else { 0.0 }),
    };
    let counts = matmul_transb(&source, w_bin)?;
    map_elementwise(&counts, fire)
}

/// `G` and `G'` of every entry.
fn g_pair(x: &DenseMatrix, params: &NlafParams) -> Result<(DenseMatrix, DenseMatrix)> {
    // Grafting feeds binary inputs, so the two corner values cover most entries.
    let (zero, one) = (params.g_with_prime(0.0), params.g_with_prime(1.0));
    let (g, dg): (Vec<f64>, Vec<f64>) = x
        .as_slice()
        .iter()
        .map(|&v| match v {
            0.0 => zero,
            1.0 => one,
            _ => params.g_with_prime(v),
        })
        .unzip();
    let g = DenseMatrix::from_vec(x.rows(), x.cols(), g)?;
    let dg = DenseMatrix::from_vec(x.rows(), x.cols(), dg)?;
    g.ensure_finite("G")?;
    dg.ensure_finite("G'")?;
    Ok((g, dg))
}

/// Values kept from a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct LafCache {
    node: NodeKind,
    inner: CacheInner,
}

#[derive(Debug, Clone)]
enum CacheInner {
    Direct {
        h: DenseMatrix,
        w: DenseMatrix,
        /// Pre-clamp projected value for the log-improved form.
        p: Option<DenseMatrix>,
    },
    Nlaf {
        /// `G(X)` and `G'(X)` where `X = 1 − H` (conj) or `H` (disj).
        gx: DenseMatrix,
        dgx: DenseMatrix,
        gw: DenseMatrix,
        dgw: DenseMatrix,
        s: DenseMatrix,
        q: DenseMatrix,
    },
}

impl LafKind {
    /// Continuous outputs of `l` nodes of one kind for a batch.
    pub fn forward(&self, node: NodeKind, h: &DenseMatrix, w: &DenseMatrix) -> Result<(DenseMatrix, LafCache)> {
        if h.cols() != w.cols() {
            return Err(RrlError::Shape(format!(
                "layer input has width {}, weights expect {}",
                h.cols(),
                w.cols()
            )));
        }
        check_unit(h.as_slice(), "input")?;
        check_unit(w.as_slice(), "weight")?;
        match *self {
            LafKind::Original => {
                let out = direct_forward(h, w, |h, w| match node {
                    NodeKind::Conj => 1.0 - w * (1.0 - h),
                    NodeKind::Disj => 1.0 - h * w,
                });
                let out = match node {
                    NodeKind::Conj => out,
                    NodeKind::Disj => map_elementwise(&out, |v| 1.0 - v)?,
                };
                let cache = CacheInner::Direct {
                    h: h.clone(),
                    w: w.clone(),
                    p: None,
                };
                Ok((out, LafCache { node, inner: cache }))
            }
            LafKind::LogImproved { epsilon, .. } => {
                let log_v = log_v_sum(h, w, node, epsilon);
                let p = map_elementwise(&log_v, |s| 1.0 / (1.0 - s))?;
                let out = map_elementwise(&p, |p| match node {
                    NodeKind::Conj => p.min(1.0),
                    NodeKind::Disj => 1.0 - p.min(1.0),
                })?;
                let cache = CacheInner::Direct {
                    h: h.clone(),
                    w: w.clone(),
                    p: Some(p),
                };
                Ok((out, LafCache { node, inner: cache }))
            }
            LafKind::Nlaf(params) => {
                let x = match node {
                    NodeKind::Conj => map_elementwise(h, |v| 1.0 - v)?,
                    NodeKind::Disj => h.clone(),
                };
                let (gx, dgx) = g_pair(&x, &params)?;
                let (gw, dgw) = g_pair(w, &params)?;
                let s = map_elementwise(&matmul_transb(&gx, &gw)?, |v| v.max(0.0))?;
                let q = map_elementwise(&s, |s| params.q_of(s))?;
                let out = match node {
                    NodeKind::Conj => q.clone(),
                    NodeKind::Disj => map_elementwise(&q, |v| 1.0 - v)?,
                };
                let cache = CacheInner::Nlaf {
                    gx,
                    dgx,
                    gw,
                    dgw,
                    s,
                    q,
                };
                Ok((out, LafCache { node, inner: cache }))
            }
        }
    }

    /// Continuous outputs only.
    pub fn eval(&self, node: NodeKind, h: &DenseMatrix, w: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(self.forward(node, h, w)?.0)
    }

    /// Gradients with respect to the inputs (`B × n`) and the weights
    /// (`l × n`), given the upstream gradient of the outputs (`B × l`).
    pub fn backward(&self, cache: &LafCache, upstream: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
        let node = cache.node;
        let (grad_h, grad_w) = match (&cache.inner, *self) {
            (CacheInner::Direct { h, w, p: None }, LafKind::Original) => {
                check_upstream(upstream, h.rows(), w.rows())?;
                original_backward(node, h, w, upstream)
            }
            (
                CacheInner::Direct { h, w, p: Some(p) },
                LafKind::LogImproved {
                    epsilon,
                    derivative_trick,
                },
            ) => {
                check_upstream(upstream, h.rows(), w.rows())?;
                log_improved_backward(node, h, w, p, upstream, epsilon, derivative_trick)
            }
            (
                CacheInner::Nlaf {
                    gx,
                    dgx,
                    gw,
                    dgw,
                    s,
                    q,
                },
                LafKind::Nlaf(params),
            ) => {
                check_upstream(upstream, gx.rows(), gw.rows())?;
                let gamma = params.gamma as f64;
                // dQ/dS = −γ (1 + S)^(−γ−1) = −γ Q / (1 + S); the disjunction
                // output is 1 − Q, which flips the sign.
                let sign = match node {
                    NodeKind::Conj => -gamma,
                    NodeKind::Disj => gamma,
                };
                let d_values = upstream
                    .as_slice()
                    .iter()
                    .zip(q.as_slice())
                    .zip(s.as_slice())
                    .map(|((&u, &q), &s)| sign * u * q / (1.0 + s))
                    .collect();
                let d = DenseMatrix::from_vec(q.rows(), q.cols(), d_values)?;
                let mut grad_x = matmul(&d, gw)?;
                grad_x.mul_assign_elementwise(dgx);
                if node == NodeKind::Conj {
                    grad_x.scale(-1.0);
                }
                let mut grad_w = matmul_transa(&d, gx)?;
                grad_w.mul_assign_elementwise(dgw);
                (grad_x, grad_w)
            }
            _ => {
                return Err(RrlError::InvalidArgument(
                    "cache was produced by a different activation".into(),
                ))
            }
        };
        grad_h.ensure_finite("input gradient")?;
        grad_w.ensure_finite("weight gradient")?;
        Ok((grad_h, grad_w))
    }
}

fn check_upstream(upstream: &DenseMatrix, rows: usize, cols: usize) -> Result<()> {
    if upstream.shape() != (rows, cols) {
        return Err(RrlError::Shape(format!(
            "upstream gradient is {:?}, expected ({rows}, {cols})",
            upstream.shape()
        )));
    }
    Ok(())
}

/// `out[i][r] = Π_j f(h[i][j], w[r][j])`.
fn direct_forward(h: &DenseMatrix, w: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(h.rows(), w.rows());
    for i in 0..h.rows() {
        let hr = h.row(i);
        for r in 0..w.rows() {
            let v = hr.iter().zip(w.row(r)).map(|(&h, &w)| f(h, w)).product();
            out.set(i, r, v);
        }
    }
    out
}

/// `ln Π_j (F(h, w) + ε)`, accumulated as a sum of logs so it cannot underflow.
fn log_v_sum(h: &DenseMatrix, w: &DenseMatrix, node: NodeKind, eps: f64) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(h.rows(), w.rows());
    for i in 0..h.rows() {
        let hr = h.row(i);
        for r in 0..w.rows() {
            let s: f64 = hr
                .iter()
                .zip(w.row(r))
                .map(|(&h, &w)| match node {
                    NodeKind::Conj => (1.0 - w * (1.0 - h) + eps).ln(),
                    NodeKind::Disj => (1.0 - h * w + eps).ln(),
                })
                .sum();
            out.set(i, r, s);
        }
    }
    out
}

fn original_backward(node: NodeKind, h: &DenseMatrix, w: &DenseMatrix, upstream: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let n = h.cols();
    let mut grad_h = DenseMatrix::zeros(h.rows(), n);
    let mut grad_w = DenseMatrix::zeros(w.rows(), n);
    let mut factors = vec![0.0; n];
    let mut suffix = vec![0.0; n + 1];
    for i in 0..h.rows() {
        let hr = h.row(i).to_vec();
        for r in 0..w.rows() {
            let up = upstream.get(i, r);
            if up == 0.0 {
                continue;
            }
            let wr = w.row(r);
            for j in 0..n {
                factors[j] = match node {
                    NodeKind::Conj => 1.0 - wr[j] * (1.0 - hr[j]),
                    NodeKind::Disj => 1.0 - hr[j] * wr[j],
                };
            }
            suffix[n] = 1.0;
            for j in (0..n).rev() {
                suffix[j] = suffix[j + 1] * factors[j];
            }
            // Product of all factors except j, without dividing by a
            // possibly zero factor.
            let mut prefix = 1.0;
            for j in 0..n {
                let others = prefix * suffix[j + 1];
                let (dh, dw) = match node {
                    NodeKind::Conj => (wr[j] * others, -(1.0 - hr[j]) * others),
                    NodeKind::Disj => (wr[j] * others, hr[j] * others),
                };
                let gh = grad_h.row_mut(i);
                gh[j] += up * dh;
                grad_w.row_mut(r)[j] += up * dw;
                prefix *= factors[j];
            }
        }
    }
    (grad_h, grad_w)
}

fn log_improved_backward(
    node: NodeKind,
    h: &DenseMatrix,
    w: &DenseMatrix,
    p: &DenseMatrix,
    upstream: &DenseMatrix,
    eps: f64,
    trick: bool,
) -> (DenseMatrix, DenseMatrix) {
    let n = h.cols();
    let mut grad_h = DenseMatrix::zeros(h.rows(), n);
    let mut grad_w = DenseMatrix::zeros(w.rows(), n);
    for i in 0..h.rows() {
        for r in 0..w.rows() {
            let up = upstream.get(i, r);
            if up == 0.0 {
                continue;
            }
            let pv = p.get(i, r);
            // v · dP/dv: either P² or, with the trick, P(P²) = 1/(1 − 2 ln P).
            let phi = if trick { 1.0 / (1.0 - 2.0 * pv.ln()) } else { pv * pv };
            let scale = up * phi;
            for j in 0..n {
                let (hj, wj) = (h.get(i, j), w.get(r, j));
                let (dh, dw) = match node {
                    NodeKind::Conj => {
                        let f = 1.0 - wj * (1.0 - hj) + eps;
                        (wj / f, -(1.0 - hj) / f)
                    }
                    // out = 1 − P, and each factor decreases in h and w.
                    NodeKind::Disj => {
                        let f = 1.0 - hj * wj + eps;
                        (wj / f, hj / f)
                    }
                };
                grad_h.row_mut(i)[j] += scale * dh;
                grad_w.row_mut(r)[j] += scale * dw;
            }
        }
    }
    (grad_h, grad_w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const C: NlafParams = NlafParams {
        alpha: 0.9,
        beta: 3,
        gamma: 3,
    };

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn discrete_gates() {
        assert_eq!(discrete_conj(&[1.0, 0.0, 1.0], &[1.0, 0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(discrete_conj(&[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(discrete_conj(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(discrete_disj(&[1.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(discrete_disj(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(discrete_disj(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert!(discrete_conj(&[0.5], &[1.0]).is_err());
        assert!(discrete_disj(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn original_scalar_values() {
        assert_eq!(conj_original(&[1.0, 1.0, 1.0], &[0.3, 0.9, 0.1]).unwrap(), 1.0);
        assert_abs_diff_eq!(conj_original(&[0.5, 0.8], &[1.0, 0.5]).unwrap(), 0.45, epsilon = 1e-15);
        assert_abs_diff_eq!(disj_original(&[0.5, 0.8], &[1.0, 0.5]).unwrap(), 0.7, epsilon = 1e-15);
        assert_eq!(disj_original(&[0.0, 0.0], &[0.4, 1.0]).unwrap(), 0.0);
        assert!(conj_original(&[1.2], &[0.5]).is_err());
    }

    #[test]
    fn log_improved_scalar_values() {
        assert_abs_diff_eq!(conj_log_improved(&[1.0], &[1.0], 1e-10).unwrap(), 1.0, epsilon = 1e-9);
        let expected = 1.0 / (1.0 - (1e-10f64).ln());
        assert_abs_diff_eq!(conj_log_improved(&[0.0], &[1.0], 1e-10).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.0416, epsilon = 1e-4);
        assert_abs_diff_eq!(disj_log_improved(&[1.0], &[1.0], 1e-10).unwrap(), 0.9584, epsilon = 1e-4);
        assert_abs_diff_eq!(disj_log_improved(&[0.0, 0.0], &[1.0, 0.3], 1e-10).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn log_improved_survives_wide_fan_in() {
        let mut rng = crate::numerics::Rng::new(5);
        let h: Vec<f64> = (0..5000).map(|_| rng.uniform(0.0, 1.0)).collect();
        let w: Vec<f64> = (0..5000).map(|_| rng.uniform(0.0, 1.0)).collect();
        assert_eq!(conj_original(&h, &w).unwrap(), 0.0, "plain product underflows");
        let v = conj_log_improved(&h, &w, 1e-10).unwrap();
        assert!(v > 0.0);
        let kind = LafKind::LogImproved {
            epsilon: 1e-10,
            derivative_trick: false,
        };
        let (hm, wm) = (DenseMatrix::from_vec(1, 5000, h).unwrap(), DenseMatrix::from_vec(1, 5000, w).unwrap());
        let (_, cache) = kind.forward(NodeKind::Conj, &hm, &wm).unwrap();
        let (_, gw) = kind.backward(&cache, &DenseMatrix::filled(1, 1, 1.0)).unwrap();
        assert!(gw.as_slice().iter().all(|g| g.is_finite() && *g < 0.0));
    }

    #[test]
    fn g_and_p_values() {
        assert_eq!(g_func(0.0, 0.9, 3).unwrap(), 0.0);
        assert_abs_diff_eq!(g_func(1.0, 0.9, 3).unwrap(), -2.690, epsilon = 1e-3);
        assert_abs_diff_eq!(g_func(1.0, 0.999, 8).unwrap(), -124.4, epsilon = 0.1);
        assert!(g_func(1.1, 0.9, 3).is_err());
        assert!(g_func(0.5, 1.0, 3).is_err());
        assert_eq!(p_func(0.0, 3).unwrap(), 1.0);
        assert_eq!(p_func(-1.0, 1).unwrap(), 0.5);
        assert_eq!(p_func(-1.0, 3).unwrap(), 0.125);
        assert!(p_func(0.1, 1).is_err());
    }

    #[test]
    fn q_batch_values() {
        let q = q_batch(&m(&[&[1.0]]), &m(&[&[1.0]]), &C).unwrap();
        assert_abs_diff_eq!(q.get(0, 0), 0.00179, epsilon = 1e-4);
        let h = m(&[&[0.2, 0.9, 1.0], &[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]]);
        let zero = q_batch(&h, &m(&[&[0.0, 0.0, 0.0]]), &C).unwrap();
        assert!(zero.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn toy_layer_golden_values() {
        let u = [1.0, 0.0, 1.0];
        let w1 = [0.6, 0.1, 0.7];
        let w2 = [0.3, 0.7, 0.1];
        assert_abs_diff_eq!(conj_nlaf(&u, &w1, &C).unwrap(), 0.994, epsilon = 1e-3);
        assert_abs_diff_eq!(conj_nlaf(&u, &w2, &C).unwrap(), 0.147, epsilon = 1e-3);
        let wq = binarize_weights(&m(&[&w1, &w2]));
        assert_eq!(wq, m(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]));
        let out = discrete_forward(NodeKind::Conj, &m(&[&u]), &wq).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 0.0]);
    }

    fn random_matrix(rng: &mut crate::numerics::Rng, rows: usize, cols: usize) -> DenseMatrix {
        crate::numerics::uniform_matrix(rng, rows, cols, 0.0, 1.0).unwrap()
    }

    fn kinds() -> Vec<LafKind> {
        vec![
            LafKind::Original,
            LafKind::log_improved(),
            LafKind::Nlaf(NlafParams::preset(NlafPreset::A)),
            LafKind::Nlaf(NlafParams::preset(NlafPreset::B)),
            LafKind::Nlaf(C),
        ]
    }

    fn scalar(kind: &LafKind, node: NodeKind, h: &[f64], w: &[f64]) -> f64 {
        match (kind, node) {
            (LafKind::Original, NodeKind::Conj) => conj_original(h, w),
            (LafKind::Original, NodeKind::Disj) => disj_original(h, w),
            (LafKind::LogImproved { epsilon, .. }, NodeKind::Conj) => conj_log_improved(h, w, *epsilon),
            (LafKind::LogImproved { epsilon, .. }, NodeKind::Disj) => disj_log_improved(h, w, *epsilon),
            (LafKind::Nlaf(p), NodeKind::Conj) => conj_nlaf(h, w, p),
            (LafKind::Nlaf(p), NodeKind::Disj) => disj_nlaf(h, w, p),
        }
        .unwrap()
    }

    #[test]
    fn batch_forward_matches_scalar_functions() {
        let mut rng = crate::numerics::Rng::new(11);
        let h = random_matrix(&mut rng, 4, 6);
        let w = random_matrix(&mut rng, 3, 6);
        for kind in kinds() {
            for node in [NodeKind::Conj, NodeKind::Disj] {
                let out = kind.eval(node, &h, &w).unwrap();
                for i in 0..4 {
                    for r in 0..3 {
                        let expected = scalar(&kind, node, h.row(i), w.row(r));
                        let got = out.get(i, r);
                        assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1e-300), "{kind:?} {node:?}");
                    }
                }
            }
        }
        let q = q_batch(&h, &w, &C).unwrap();
        let neg = map_elementwise(&h, |v| 1.0 - v).unwrap();
        assert_eq!(q, LafKind::Nlaf(C).eval(NodeKind::Conj, &neg, &w).unwrap());
    }

    #[test]
    fn boolean_fidelity_exhaustive() {
        for kind in kinds() {
            let tol = match kind {
                LafKind::Original => 0.0,
                _ => 0.05,
            };
            for n in 1..=4usize {
                for bits in 0..(1u32 << (2 * n)) {
                    let h: Vec<f64> = (0..n).map(|j| ((bits >> j) & 1) as f64).collect();
                    let w: Vec<f64> = (0..n).map(|j| ((bits >> (n + j)) & 1) as f64).collect();
                    let dc = discrete_conj(&h, &w).unwrap();
                    let dd = discrete_disj(&h, &w).unwrap();
                    let complement: Vec<f64> = h.iter().map(|v| 1.0 - v).collect();
                    assert_eq!(dd, 1.0 - discrete_conj(&complement, &w).unwrap());
                    assert!((scalar(&kind, NodeKind::Conj, &h, &w) - dc).abs() <= tol, "{kind:?} {h:?} {w:?}");
                    assert!((scalar(&kind, NodeKind::Disj, &h, &w) - dd).abs() <= tol, "{kind:?} {h:?} {w:?}");
                }
            }
        }
    }

    /// Central-difference check of `backward` against `eval`, contracting the
    /// output with a fixed random upstream matrix.
    fn finite_difference_check(kind: LafKind, node: NodeKind, seed: u64) {
        let mut rng = crate::numerics::Rng::new(seed);
        let h = crate::numerics::uniform_matrix(&mut rng, 3, 5, 0.05, 0.95).unwrap();
        let w = crate::numerics::uniform_matrix(&mut rng, 2, 5, 0.05, 0.95).unwrap();
        let up = crate::numerics::uniform_matrix(&mut rng, 3, 2, -1.0, 1.0).unwrap();
        let objective = |h: &DenseMatrix, w: &DenseMatrix| -> f64 {
            let out = kind.eval(node, h, w).unwrap();
            out.as_slice().iter().zip(up.as_slice()).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = kind.forward(node, &h, &w).unwrap();
        let (gh, gw) = kind.backward(&cache, &up).unwrap();
        let step = 1e-6;
        let check = |analytic: f64, plus: f64, minus: f64| {
            let numeric = (plus - minus) / (2.0 * step);
            // Central differences of an O(1) objective carry ~1e-10 absolute
            // rounding noise, so tiny gradients are compared against a floor.
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5);
            assert!(rel < 1e-4, "{kind:?} {node:?}: analytic {analytic} numeric {numeric}");
        };
        for idx in 0..h.as_slice().len() {
            let (mut hp, mut hm) = (h.clone(), h.clone());
            hp.as_mut_slice()[idx] += step;
            hm.as_mut_slice()[idx] -= step;
            check(gh.as_slice()[idx], objective(&hp, &w), objective(&hm, &w));
        }
        for idx in 0..w.as_slice().len() {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp.as_mut_slice()[idx] += step;
            wm.as_mut_slice()[idx] -= step;
            check(gw.as_slice()[idx], objective(&h, &wp), objective(&h, &wm));
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let plain = LafKind::LogImproved {
            epsilon: 1e-10,
            derivative_trick: false,
        };
        for (seed, kind) in [LafKind::Original, plain, LafKind::Nlaf(C), LafKind::Nlaf(NlafParams::preset(NlafPreset::B))]
            .into_iter()
            .enumerate()
        {
            for node in [NodeKind::Conj, NodeKind::Disj] {
                finite_difference_check(kind, node, seed as u64 * 7 + 1);
            }
        }
    }

    #[test]
    fn derivative_trick_keeps_sign_and_grows_magnitude() {
        let mut rng = crate::numerics::Rng::new(3);
        let h = random_matrix(&mut rng, 5, 8);
        let w = random_matrix(&mut rng, 4, 8);
        let up = DenseMatrix::filled(5, 4, 1.0);
        for node in [NodeKind::Conj, NodeKind::Disj] {
            let grads = |trick| {
                let kind = LafKind::LogImproved {
                    epsilon: 1e-10,
                    derivative_trick: trick,
                };
                let (_, cache) = kind.forward(node, &h, &w).unwrap();
                kind.backward(&cache, &up).unwrap()
            };
            let (ph, pw) = grads(false);
            let (th, tw) = grads(true);
            for (p, t) in ph.as_slice().iter().chain(pw.as_slice()).zip(th.as_slice().iter().chain(tw.as_slice())) {
                assert!(p.signum() == t.signum() || *p == 0.0);
                assert!(t.abs() >= p.abs());
            }
        }
    }

    #[test]
    fn weight_gradient_vanishes_where_input_is_true() {
        let h = m(&[&[1.0, 0.3]]);
        let w = m(&[&[0.4, 0.6]]);
        for kind in kinds() {
            let (_, cache) = kind.forward(NodeKind::Conj, &h, &w).unwrap();
            let (_, gw) = kind.backward(&cache, &m(&[&[1.0]])).unwrap();
            assert_eq!(gw.get(0, 0), 0.0, "{kind:?}");
        }
    }

    #[test]
    fn nlaf_input_gradient_vanishes_for_zero_weight() {
        let h = m(&[&[0.4, 0.3]]);
        let w = m(&[&[0.0, 0.6]]);
        let kind = LafKind::Nlaf(C);
        for node in [NodeKind::Conj, NodeKind::Disj] {
            let (_, cache) = kind.forward(node, &h, &w).unwrap();
            let (gh, _) = kind.backward(&cache, &m(&[&[1.0]])).unwrap();
            assert_eq!(gh.get(0, 0), 0.0);
            assert!(gh.get(0, 1) != 0.0);
        }
    }

    fn max_corner_gradient(params: NlafParams, n: usize) -> f64 {
        let kind = LafKind::Nlaf(params);
        let mut max_grad: f64 = 0.0;
        for bits in 0..(1u32 << (2 * n)) {
            let h: Vec<f64> = (0..n).map(|j| ((bits >> j) & 1) as f64).collect();
            let w: Vec<f64> = (0..n).map(|j| ((bits >> (n + j)) & 1) as f64).collect();
            let (hm, wm) = (DenseMatrix::from_vec(1, n, h).unwrap(), DenseMatrix::from_vec(1, n, w).unwrap());
            for node in [NodeKind::Conj, NodeKind::Disj] {
                let (_, cache) = kind.forward(node, &hm, &wm).unwrap();
                let (gh, gw) = kind.backward(&cache, &m(&[&[1.0]])).unwrap();
                max_grad = max_grad.max(gh.max_abs()).max(gw.max_abs());
            }
        }
        max_grad
    }

    #[test]
    fn nlaf_gradients_are_small_at_discrete_corners() {
        assert!(max_corner_gradient(NlafParams::preset(NlafPreset::B), 3) < 1e-2);
        // With γ = 1 the largest corner gradient is the weight gradient of a
        // single violated literal: G(1)·G'(1) / (1 + G(1)²)².
        let a = NlafParams::preset(NlafPreset::A);
        let (g1, dg1) = (a.g(1.0), a.g_prime(1.0));
        let single = (g1 * dg1 / (1.0 + g1 * g1).powi(2)).abs();
        assert_abs_diff_eq!(single, 0.0648, epsilon = 1e-4);
        assert_abs_diff_eq!(max_corner_gradient(a, 3), single, epsilon = 1e-12);
    }

    #[test]
    fn vanishing_gradient_contrast() {
        let mut rng = crate::numerics::Rng::new(2024);
        let h = random_matrix(&mut rng, 1, 500);
        let w = random_matrix(&mut rng, 1, 500);
        let median_abs_wgrad = |kind: LafKind| {
            let (_, cache) = kind.forward(NodeKind::Conj, &h, &w).unwrap();
            let (_, gw) = kind.backward(&cache, &m(&[&[1.0]])).unwrap();
            let mut g: Vec<f64> = gw.as_slice().iter().map(|v| v.abs()).collect();
            g.sort_by(f64::total_cmp);
            g[g.len() / 2]
        };
        let original = median_abs_wgrad(LafKind::Original);
        let nlaf = median_abs_wgrad(LafKind::Nlaf(NlafParams::default()));
        assert!(original * 1e6 <= nlaf, "original {original:e}, nlaf {nlaf:e}");
    }

    #[test]
    fn mismatched_cache_is_rejected() {
        let h = m(&[&[0.5]]);
        let (_, cache) = LafKind::Original.forward(NodeKind::Conj, &h, &h).unwrap();
        assert!(LafKind::Nlaf(C).backward(&cache, &h).is_err());
        assert!(LafKind::Original.backward(&cache, &m(&[&[1.0, 1.0]])).is_err());
    }

    proptest! {
        #[test]
        fn outputs_in_unit_interval_and_monotone(
            h in prop::collection::vec(0.0f64..=1.0, 1..7),
            w_seed in any::<u64>(),
            j_seed in any::<usize>(),
            bump in 0.0f64..=1.0,
        ) {
            let n = h.len();
            let mut rng = crate::numerics::Rng::new(w_seed);
            let w: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 1.0)).collect();
            let j = j_seed % n;
            let mut higher = h.clone();
            higher[j] = h[j] + (1.0 - h[j]) * bump;
            for kind in kinds() {
                for node in [NodeKind::Conj, NodeKind::Disj] {
                    let a = scalar(&kind, node, &h, &w);
                    let b = scalar(&kind, node, &higher, &w);
                    prop_assert!((0.0..=1.0).contains(&a));
                    prop_assert!(b >= a - 1e-15, "{:?} {:?} not monotone", kind, node);
                }
            }
        }
    }
}
