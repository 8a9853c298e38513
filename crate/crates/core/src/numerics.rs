//! Dense row-major matrices, elementwise maps, exact summation and seeded
//! randomness.
//!
//! Everything in the crate runs on `f64`. The logical activation functions
//! produce values spanning hundreds of orders of magnitude near the Boolean
//! corners, and single precision would flatten exactly the effects the
//! gradient diagnostics look for.

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RrlError};

/// Name of the pseudo-random generator, recorded in model files so a run can
/// be replayed with the same stream.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng/seed_from_u64";

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

/// Unchecked serialized form; deserialization goes through
/// [`DenseMatrix::from_vec`] so the length is validated.
#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl TryFrom<RawMatrix> for DenseMatrix {
    type Error = RrlError;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        DenseMatrix::from_vec(raw.rows, raw.cols, raw.values)
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            values: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from row-major values.
    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(RrlError::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(RrlError::Shape(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            values,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.rows && col < self.cols);
        self.values[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.rows && col < self.cols);
        self.values[row * self.cols + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.values[j * self.rows + i] = self.values[i * self.cols + j];
            }
        }
        t
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            values,
        }
    }

    /// Concatenates matrices with equal row counts side by side.
    pub fn hconcat(parts: &[&DenseMatrix]) -> Result<Self> {
        let rows = parts.first().map_or(0, |p| p.rows);
        if let Some(bad) = parts.iter().find(|p| p.rows != rows) {
            return Err(RrlError::Shape(format!(
                "cannot concatenate blocks with {} and {rows} rows",
                bad.rows
            )));
        }
        let cols: usize = parts.iter().map(|p| p.cols).sum();
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for p in parts {
                values.extend_from_slice(p.row(i));
            }
        }
        Ok(Self { rows, cols, values })
    }

    /// Copies the column range `[start, start + width)`.
    pub fn column_block(&self, start: usize, width: usize) -> Self {
        debug_assert!(start + width <= self.cols);
        let mut values = Vec::with_capacity(self.rows * width);
        for i in 0..self.rows {
            values.extend_from_slice(&self.row(i)[start..start + width]);
        }
        Self {
            rows: self.rows,
            cols: width,
            values,
        }
    }

    pub fn add_assign(&mut self, other: &DenseMatrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    /// Elementwise (Hadamard) product in place.
    pub fn mul_assign_elementwise(&mut self, other: &DenseMatrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a *= b;
        }
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Returns an error naming `what` if any entry is NaN or infinite.
    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(p) => Err(RrlError::NonFinite(format!(
                "{what}: entry ({}, {}) is {}",
                p / self.cols.max(1),
                p % self.cols.max(1),
                self.values[p]
            ))),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `out = A · B` for `m × k` by `k × n` operands given as slices with
/// explicit (row, column) strides, so transposes cost nothing.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_strides: (usize, usize), b: &[f64], b_strides: (usize, usize)) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(m, n);
    if m == 0 || k == 0 || n == 0 {
        return out;
    }
    // The last element each operand can address must lie inside its slice.
    assert!((m - 1) * a_strides.0 + (k - 1) * a_strides.1 < a.len());
    assert!((k - 1) * b_strides.0 + (n - 1) * b_strides.1 < b.len());
    // SAFETY: the asserts above bound every index dgemm reads, and `out` is
    // a fresh m × n row-major buffer.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            0.0,
            out.values.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    out
}

/// Matrix product `a · b`.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.rows {
        return Err(RrlError::Shape(format!(
            "matmul of {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    Ok(gemm(a.rows, a.cols, b.cols, &a.values, (a.cols, 1), &b.values, (b.cols, 1)))
}

/// Product `a · bᵀ` without materializing the transpose.
///
/// This is the shape every logical layer uses: a batch `m × n` against a
/// weight matrix stored as `l × n`.
pub fn matmul_transb(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.cols {
        return Err(RrlError::Shape(format!(
            "matmul of {}x{} by transposed {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    Ok(gemm(a.rows, a.cols, b.rows, &a.values, (a.cols, 1), &b.values, (1, b.cols)))
}

/// Product `aᵀ · b` without materializing the transpose.
pub fn matmul_transa(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows != b.rows {
        return Err(RrlError::Shape(format!(
            "matmul of transposed {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    Ok(gemm(a.cols, a.rows, b.cols, &a.values, (1, a.cols), &b.values, (b.cols, 1)))
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators let the compiler vectorize the loop.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Applies `f` to every entry. Fails if `f` produces a non-finite value.
pub fn map_elementwise(m: &DenseMatrix, f: impl Fn(f64) -> f64) -> Result<DenseMatrix> {
    let out = DenseMatrix {
        rows: m.rows,
        cols: m.cols,
        values: m.values.iter().map(|&v| f(v)).collect(),
    };
    out.ensure_finite("map_elementwise")?;
    Ok(out)
}

/// Correctly rounded sum of `values` (Shewchuk's partials, as in Python's
/// `math.fsum`).
///
/// The result depends only on the multiset of inputs, never on their order,
/// which is what lets extracted rule sets reproduce model logits bit for bit.
pub fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut kept = 0;
        for i in 0..partials.len() {
            let mut y = partials[i];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        if x != 0.0 {
            partials.push(x);
        }
    }
    // Round the partials to a single double, handling the half-way case.
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        let yr = x - hi;
        if y == yr {
            hi = x;
        }
    }
    hi
}

/// Seeded pseudo-random generator. Identical seeds give identical streams.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent generator for a named sub-task (a fold, an epoch, ...).
    ///
    /// The child seed is a SplitMix64 mix of the parent seed and `stream`, so
    /// it does not depend on how much of the parent stream was consumed.
    pub fn derive(&self, stream: u64) -> Rng {
        Rng::new(splitmix64(
            self.seed ^ splitmix64(stream.wrapping_add(0x9E37_79B9_7F4A_7C15)),
        ))
    }

    /// Uniform draw from `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.inner.gen::<f64>()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Matrix of i.i.d. uniform draws from `[lo, hi)`, filled row by row.
pub fn uniform_matrix(rng: &mut Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Result<DenseMatrix> {
    if !(lo < hi) {
        return Err(RrlError::InvalidArgument(format!(
            "uniform range requires lo < hi, got [{lo}, {hi})"
        )));
    }
    let values = (0..rows * cols).map(|_| rng.uniform(lo, hi)).collect();
    Ok(DenseMatrix { rows, cols, values })
}
