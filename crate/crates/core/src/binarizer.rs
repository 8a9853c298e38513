//! The binarization layer: fixed random lower/upper thresholds turn each
//! continuous feature into `2k` Boolean comparisons.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureSchema};
use crate::error::{Result, RrlError};
use crate::numerics::{DenseMatrix, Rng};

/// Frozen thresholds: `lower[j][i]` is `T_{j,i}`, `upper[j][i]` is `H_{j,i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBounds")]
pub struct BinarizationBounds {
    k: usize,
    lower: DenseMatrix,
    upper: DenseMatrix,
    ranges: Vec<(f64, f64)>,
}

#[derive(Deserialize)]
struct RawBounds {
    k: usize,
    lower: DenseMatrix,
    upper: DenseMatrix,
    ranges: Vec<(f64, f64)>,
}

impl TryFrom<RawBounds> for BinarizationBounds {
    type Error = RrlError;

    fn try_from(raw: RawBounds) -> Result<Self> {
        let mut bounds = Self::from_thresholds(raw.lower, raw.upper)?;
        if raw.k != bounds.k || raw.ranges.len() != bounds.feature_count() {
            return Err(RrlError::Shape(format!(
                "bounds declare k = {} and {} ranges for a {}x{} threshold table",
                raw.k,
                raw.ranges.len(),
                bounds.feature_count(),
                bounds.k
            )));
        }
        bounds.ranges = raw.ranges;
        Ok(bounds)
    }
}

impl BinarizationBounds {
    /// Builds bounds from explicit thresholds; the observed ranges are taken
    /// to be the thresholds' own spans.
    pub fn from_thresholds(lower: DenseMatrix, upper: DenseMatrix) -> Result<Self> {
        if lower.shape() != upper.shape() {
            return Err(RrlError::Shape(format!(
                "lower bounds {:?} vs upper bounds {:?}",
                lower.shape(),
                upper.shape()
            )));
        }
        lower.ensure_finite("lower bounds")?;
        upper.ensure_finite("upper bounds")?;
        let ranges = (0..lower.rows())
            .map(|j| {
                lower.row(j).iter().chain(upper.row(j)).fold(
                    (f64::INFINITY, f64::NEG_INFINITY),
                    |(lo, hi), &v| (lo.min(v), hi.max(v)),
                )
            })
            .collect();
        Ok(Self {
            k: lower.cols(),
            lower,
            upper,
            ranges,
        })
    }

    /// Bounds-per-side count `k`.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of continuous features `m`.
    pub fn feature_count(&self) -> usize {
        self.lower.rows()
    }

    pub fn lower(&self) -> &DenseMatrix {
        &self.lower
    }

    pub fn upper(&self) -> &DenseMatrix {
        &self.upper
    }

    /// Observed `(min, max)` of each feature at sampling time.
    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    /// Width of the binarized continuous block, `2km`.
    pub fn output_width(&self) -> usize {
        2 * self.k * self.feature_count()
    }
}

/// Samples `k` lower and `k` upper thresholds per continuous feature,
/// uniformly within the feature's observed range in `ds` clipped to three
/// standard deviations around its mean, so long tails do not soak up
/// thresholds that almost no row separates.
///
/// A constant feature gets all its thresholds equal to that constant.
pub fn sample_bounds(ds: &Dataset, k: usize, rng: &mut Rng) -> Result<BinarizationBounds> {
    if k == 0 {
        return Err(RrlError::InvalidArgument("k must be at least 1".into()));
    }
    let c = ds.continuous();
    let m = c.cols();
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); m];
    let mut sums = vec![(0.0, 0.0); m];
    for i in 0..c.rows() {
        for ((r, s), &v) in ranges.iter_mut().zip(&mut sums).zip(c.row(i)) {
            r.0 = r.0.min(v);
            r.1 = r.1.max(v);
            s.0 += v;
            s.1 += v * v;
        }
    }
    let n = c.rows().max(1) as f64;
    let windows: Vec<(f64, f64)> = ranges
        .iter()
        .zip(&sums)
        .map(|(&(lo, hi), &(s, ss))| {
            let mean = s / n;
            let sd = (ss / n - mean * mean).max(0.0).sqrt();
            let clipped = (lo.max(mean - 3.0 * sd), hi.min(mean + 3.0 * sd));
            if clipped.0 < clipped.1 {
                clipped
            } else {
                (lo, hi)
            }
        })
        .collect();
    let draw = |rng: &mut Rng| {
        let mut t = DenseMatrix::zeros(m, k);
        for (j, &(lo, hi)) in windows.iter().enumerate() {
            for v in t.row_mut(j) {
                *v = if lo < hi { rng.uniform(lo, hi) } else { lo };
            }
        }
        t
    };
    let lower = draw(rng);
    let upper = draw(rng);
    Ok(BinarizationBounds {
        k,
        lower,
        upper,
        ranges,
    })
}

/// Bound-comparison indicators of one instance: per feature, `k` entries
/// `c_j > T_{j,i}` followed by `k` entries `c_j < H_{j,i}` (strict).
pub fn binarize(bounds: &BinarizationBounds, c: &[f64]) -> Result<Vec<f64>> {
    let m = bounds.feature_count();
    if c.len() != m {
        return Err(RrlError::Shape(format!(
            "instance has {} continuous values, bounds expect {m}",
            c.len()
        )));
    }
    let mut out = Vec::with_capacity(bounds.output_width());
    write_binarized(bounds, c, &mut out);
    Ok(out)
}

fn write_binarized(bounds: &BinarizationBounds, c: &[f64], out: &mut Vec<f64>) {
    let indicator = |x: f64| if x > 0.0 { 1.0 } else { 0.0 };
    for (j, &cj) in c.iter().enumerate() {
        out.extend(bounds.lower.row(j).iter().map(|&t| indicator(cj - t)));
        out.extend(bounds.upper.row(j).iter().map(|&h| indicator(h - cj)));
    }
}

/// Input vector `u⁽⁰⁾` of one instance: binarized continuous block followed
/// by the one-hot discrete block.
pub fn assemble_u0(bounds: &BinarizationBounds, c: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let mut out = binarize(bounds, c)?;
    out.extend_from_slice(b);
    Ok(out)
}

/// `u⁽⁰⁾` for every row of `ds`, as an `N × (2km + b)` matrix.
pub fn assemble_u0_batch(bounds: &BinarizationBounds, ds: &Dataset) -> Result<DenseMatrix> {
    let c = ds.continuous();
    let b = ds.binary();
    if c.cols() != bounds.feature_count() {
        return Err(RrlError::Shape(format!(
            "dataset has {} continuous features, bounds expect {}",
            c.cols(),
            bounds.feature_count()
        )));
    }
    let width = bounds.output_width() + b.cols();
    let mut values = Vec::with_capacity(ds.len() * width);
    for i in 0..ds.len() {
        write_binarized(bounds, c.row(i), &mut values);
        values.extend_from_slice(b.row(i));
    }
    DenseMatrix::from_vec(ds.len(), width, values)
}

/// Human-readable atom for every `u⁽⁰⁾` dimension, in assembly order.
pub fn bound_feature_names(bounds: &BinarizationBounds, schema: &FeatureSchema) -> Vec<String> {
    let mut names = Vec::with_capacity(bounds.output_width() + schema.binary_width());
    for (j, name) in schema.continuous_names().into_iter().enumerate() {
        if j >= bounds.feature_count() {
            break;
        }
        for &t in bounds.lower.row(j) {
            names.push(format!("{name} > {}", format_significant(t, 6)));
        }
        for &h in bounds.upper.row(j) {
            names.push(format!("{name} < {}", format_significant(h, 6)));
        }
    }
    for (name, cats) in schema.discrete_features() {
        for cat in cats {
            names.push(format!("{name} == {cat}"));
        }
    }
    names
}

/// `v` rounded to `digits` significant digits, without trailing zeros but
/// keeping at least one decimal (`52.0`, `37.5`, `0.000123`, `1.5e+09`).
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v:.1}");
    }
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -5 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}"))
}

fn trim_zeros(s: &str) -> String {
    if !s.contains('.') {
        return format!("{s}.0");
    }
    let t = s.trim_end_matches('0');
    if t.ends_with('.') {
        format!("{t}0")
    } else {
        t.to_string()
    }
}
