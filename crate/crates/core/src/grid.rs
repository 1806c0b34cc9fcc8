//! Uniform 1-D grids, sampled functions, and dense operator matrices.
//!
//! Everything downstream works on a uniform grid: finite-difference
//! differentiation matrices (second-order central stencils inside, one-sided
//! second-order stencils on the two boundary rows), trapezoid quadrature,
//! cumulative integrals anchored at a chosen grid point, and the discrete
//! parity operator. Operator matrices are stored dense (desk scale,
//! n ≲ 4000) but carry a bandwidth bound so products, applications, and
//! residual norms run in O(n·band²) rather than O(n³).
//!
//! Grids built over a symmetric range `[-L, L]` satisfy `x[i] == -x[n-1-i]`
//! exactly (the points are mirrored by construction), which parity and the
//! gauge operators rely on.

use std::fmt;
use std::io;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

/// Errors from grid construction and grid-level operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("invalid range: x_min = {x_min} must be strictly below x_max = {x_max}")]
    InvalidRange { x_min: f64, x_max: f64 },
    #[error("too few points: n = {n}, need at least 3")]
    TooFewPoints { n: usize },
    #[error("grid is not symmetric about the origin (x_min = {x_min}, x_max = {x_max})")]
    NotSymmetric { x_min: f64, x_max: f64 },
    #[error("x0 = {x0} is not a grid point (nearest grid point is {nearest})")]
    X0NotOnGrid { x0: f64, nearest: f64 },
    #[error("value vector has length {got}, grid has {want} points")]
    LengthMismatch { got: usize, want: usize },
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("matrix is {rows}×{cols}, grid needs {want}×{want}")]
    DimensionMismatch { rows: usize, cols: usize, want: usize },
}

/// A uniform 1-D grid.
#[derive(Debug, Clone)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
    h: f64,
    points: Vec<f64>,
    symmetric: bool,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.x_min == other.x_min && self.x_max == other.x_max && self.n == other.n
    }
}

impl Grid {
    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Number of grid points.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Grid spacing `(x_max − x_min)/(n − 1)`.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// The ordered grid points.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Whether the grid is symmetric about the origin (`x_min == −x_max`).
    ///
    /// Symmetric grids carry the exact mirror property
    /// `x[i] == -x[n-1-i]`, required before parity is used.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Index of the grid point equal to `x0`, or an error naming the nearest
    /// grid point. The match tolerance is a small fraction of the spacing.
    pub fn index_of(&self, x0: f64) -> Result<usize, GridError> {
        let pos = (x0 - self.x_min) / self.h;
        let i = pos.round().clamp(0.0, (self.n - 1) as f64) as usize;
        let nearest = self.points[i];
        if (nearest - x0).abs() <= 1e-8 * self.h.max(1e-300) {
            Ok(i)
        } else {
            Err(GridError::X0NotOnGrid { x0, nearest })
        }
    }

    /// Anchor point for indefinite integrals: `0` when the grid contains it,
    /// otherwise the left endpoint. Integration constants downstream are
    /// conventions, so only reproducibility matters here.
    pub fn anchor(&self) -> f64 {
        if self.index_of(0.0).is_ok() {
            0.0
        } else {
            self.x_min
        }
    }
}

/// Build a uniform grid.
///
/// A symmetric range is detected from `x_min == −x_max`; in that case the
/// points are mirrored around the midpoint so the symmetry is exact, with a
/// literal `0.0` at the center for odd `n`.
pub fn make_grid(x_min: f64, x_max: f64, n: usize) -> Result<Arc<Grid>, GridError> {
    if !(x_min < x_max) {
        return Err(GridError::InvalidRange { x_min, x_max });
    }
    if n < 3 {
        return Err(GridError::TooFewPoints { n });
    }
    let h = (x_max - x_min) / ((n - 1) as f64);
    let symmetric = x_min == -x_max;
    let mut points: Vec<f64> = (0..n).map(|i| x_min + i as f64 * h).collect();
    points[n - 1] = x_max;
    if symmetric {
        for i in 0..n / 2 {
            let v = x_min + i as f64 * h;
            points[i] = v;
            points[n - 1 - i] = -v;
        }
        if n % 2 == 1 {
            points[n / 2] = 0.0;
        }
    }
    Ok(Arc::new(Grid {
        x_min,
        x_max,
        n,
        h,
        points,
        symmetric,
    }))
}

fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

// ---------------------------------------------------------------------------
// SampledFunction
// ---------------------------------------------------------------------------

/// A complex-valued function tabulated on a grid.
#[derive(Debug, Clone)]
pub struct SampledFunction {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl SampledFunction {
    pub fn from_values(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Self, GridError> {
        if values.len() != grid.n() {
            return Err(GridError::LengthMismatch {
                got: values.len(),
                want: grid.n(),
            });
        }
        Ok(SampledFunction { grid, values })
    }

    pub fn from_real_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self, GridError> {
        let values = values
            .into_iter()
            .map(|v| Complex64::new(v, 0.0))
            .collect();
        Self::from_values(grid, values)
    }

    pub fn from_real_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid
            .points()
            .iter()
            .map(|&x| Complex64::new(f(x), 0.0))
            .collect();
        SampledFunction {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn from_complex_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.points().iter().map(|&x| f(x)).collect();
        SampledFunction {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn constant(grid: &Arc<Grid>, value: Complex64) -> Self {
        SampledFunction {
            grid: Arc::clone(grid),
            values: vec![value; grid.n()],
        }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::constant(grid, Complex64::new(0.0, 0.0))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Real parts of the samples.
    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag_abs(&self) -> f64 {
        self.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Largest |value| over the interior, excluding `band` points per end.
    pub fn interior_max_abs(&self, band: usize) -> f64 {
        let n = self.len();
        if 2 * band >= n {
            return 0.0;
        }
        self.values[band..n - band]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        SampledFunction {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&z| f(z)).collect(),
        }
    }

    /// Pointwise combination with another sample set on the same grid.
    pub fn zip_with(
        &self,
        other: &SampledFunction,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self, GridError> {
        if !same_grid(&self.grid, &other.grid) {
            return Err(GridError::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(SampledFunction {
            grid: Arc::clone(&self.grid),
            values,
        })
    }

    pub fn add(&self, other: &SampledFunction) -> Result<Self, GridError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SampledFunction) -> Result<Self, GridError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &SampledFunction) -> Result<Self, GridError> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|z| s * z)
    }

    /// Samples reversed in `x` (the parity image). Requires a symmetric grid.
    pub fn parity_flip(&self) -> Result<Self, GridError> {
        if !self.grid.is_symmetric() {
            return Err(GridError::NotSymmetric {
                x_min: self.grid.x_min(),
                x_max: self.grid.x_max(),
            });
        }
        let mut values = self.values.clone();
        values.reverse();
        Ok(SampledFunction {
            grid: Arc::clone(&self.grid),
            values,
        })
    }

    /// CSV serialization with the documented column order `x,re,im`.
    pub fn write_csv<W: io::Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "x,re,im")?;
        for (x, z) in self.grid.points().iter().zip(&self.values) {
            writeln!(w, "{x:e},{:e},{:e}", z.re, z.im)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Differentiation, quadrature, parity
// ---------------------------------------------------------------------------

/// Derivative order for [`diff_matrix`] and [`derivative`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffOrder {
    First,
    Second,
}

/// Finite-difference differentiation matrix.
///
/// Interior rows carry the central second-order stencil; the two boundary
/// rows carry one-sided second-order stencils:
///
/// * first derivative: `(-3/2, 2, -1/2)/h` at the left end and its mirror on
///   the right;
/// * second derivative: `(2, -5, 4, -1)/h²` at the left end and its mirror.
pub fn diff_matrix(grid: &Arc<Grid>, order: DiffOrder) -> OperatorMatrix {
    let n = grid.n();
    let h = grid.h();
    let mut entries = Array2::<Complex64>::zeros((n, n));
    let c = |v: f64| Complex64::new(v, 0.0);
    match order {
        DiffOrder::First => {
            for i in 1..n - 1 {
                entries[[i, i - 1]] = c(-0.5 / h);
                entries[[i, i + 1]] = c(0.5 / h);
            }
            entries[[0, 0]] = c(-1.5 / h);
            entries[[0, 1]] = c(2.0 / h);
            entries[[0, 2]] = c(-0.5 / h);
            entries[[n - 1, n - 3]] = c(0.5 / h);
            entries[[n - 1, n - 2]] = c(-2.0 / h);
            entries[[n - 1, n - 1]] = c(1.5 / h);
        }
        DiffOrder::Second => {
            let h2 = h * h;
            for i in 1..n - 1 {
                entries[[i, i - 1]] = c(1.0 / h2);
                entries[[i, i]] = c(-2.0 / h2);
                entries[[i, i + 1]] = c(1.0 / h2);
            }
            entries[[0, 0]] = c(2.0 / h2);
            entries[[0, 1]] = c(-5.0 / h2);
            entries[[0, 2]] = c(4.0 / h2);
            entries[[0, 3]] = c(-1.0 / h2);
            entries[[n - 1, n - 4]] = c(-1.0 / h2);
            entries[[n - 1, n - 3]] = c(4.0 / h2);
            entries[[n - 1, n - 2]] = c(-5.0 / h2);
            entries[[n - 1, n - 1]] = c(2.0 / h2);
        }
    }
    let band = match order {
        DiffOrder::First => 2,
        DiffOrder::Second => 3,
    };
    OperatorMatrix {
        grid: Arc::clone(grid),
        entries,
        band,
    }
}

/// Numerical derivative of sampled data, applying the same stencils as
/// [`diff_matrix`] directly in O(n).
pub fn derivative(f: &SampledFunction, order: DiffOrder) -> SampledFunction {
    let n = f.len();
    let h = f.grid().h();
    let v = f.values();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    match order {
        DiffOrder::First => {
            for i in 1..n - 1 {
                out[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
            }
            out[0] = (-1.5 * v[0] + 2.0 * v[1] - 0.5 * v[2]) / h;
            out[n - 1] = (0.5 * v[n - 3] - 2.0 * v[n - 2] + 1.5 * v[n - 1]) / h;
        }
        DiffOrder::Second => {
            let h2 = h * h;
            for i in 1..n - 1 {
                out[i] = (v[i - 1] - 2.0 * v[i] + v[i + 1]) / h2;
            }
            out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2;
            out[n - 1] = (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / h2;
        }
    }
    SampledFunction {
        grid: Arc::clone(f.grid()),
        values: out,
    }
}

/// Trapezoid quadrature over the full grid.
pub fn integrate(f: &SampledFunction) -> Complex64 {
    let v = f.values();
    let n = v.len();
    let h = f.grid().h();
    let mut sum = Complex64::new(0.0, 0.0);
    for &z in &v[1..n - 1] {
        sum += z;
    }
    sum += 0.5 * (v[0] + v[n - 1]);
    sum * h
}

/// Cumulative trapezoid integral `F(x_i) = ∫_{x0}^{x_i} f`, with `F(x0) = 0`.
///
/// `x0` must be a grid point; the accumulation runs outward in both
/// directions from it.
pub fn cumulative_integral(
    f: &SampledFunction,
    x0: f64,
) -> Result<SampledFunction, GridError> {
    let i0 = f.grid().index_of(x0)?;
    let v = f.values();
    let n = v.len();
    let h = f.grid().h();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for i in i0 + 1..n {
        out[i] = out[i - 1] + 0.5 * h * (v[i - 1] + v[i]);
    }
    for i in (0..i0).rev() {
        out[i] = out[i + 1] - 0.5 * h * (v[i] + v[i + 1]);
    }
    Ok(SampledFunction {
        grid: Arc::clone(f.grid()),
        values: out,
    })
}

/// The discrete parity operator: the anti-diagonal permutation
/// `(Pv)_i = v_{n-1-i}`. Requires a symmetric grid.
pub fn parity_matrix(grid: &Arc<Grid>) -> Result<OperatorMatrix, GridError> {
    if !grid.is_symmetric() {
        return Err(GridError::NotSymmetric {
            x_min: grid.x_min(),
            x_max: grid.x_max(),
        });
    }
    let n = grid.n();
    let mut entries = Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        entries[[i, n - 1 - i]] = Complex64::new(1.0, 0.0);
    }
    Ok(OperatorMatrix {
        grid: Arc::clone(grid),
        entries,
        band: n - 1,
    })
}

// ---------------------------------------------------------------------------
// OperatorMatrix
// ---------------------------------------------------------------------------

/// A dense complex matrix tied to a grid, with a bandwidth bound.
///
/// `band` is an upper bound on `|i − j|` over nonzero entries; products,
/// matrix-vector applications, and norms exploit it. Zeroing entries may
/// leave the bound loose, which is harmless.
#[derive(Clone)]
pub struct OperatorMatrix {
    grid: Arc<Grid>,
    entries: Array2<Complex64>,
    band: usize,
}

impl fmt::Debug for OperatorMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorMatrix")
            .field("n", &self.grid.n())
            .field("band", &self.band)
            .finish()
    }
}

fn scan_band(entries: &Array2<Complex64>) -> usize {
    let n = entries.nrows();
    let mut band = 0usize;
    for i in 0..n {
        for j in 0..n {
            if entries[[i, j]] != Complex64::new(0.0, 0.0) {
                let d = i.abs_diff(j);
                if d > band {
                    band = d;
                }
            }
        }
    }
    band
}

impl OperatorMatrix {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        let n = grid.n();
        OperatorMatrix {
            grid: Arc::clone(grid),
            entries: Array2::zeros((n, n)),
            band: 0,
        }
    }

    pub fn identity(grid: &Arc<Grid>) -> Self {
        let n = grid.n();
        let mut entries = Array2::<Complex64>::zeros((n, n));
        for i in 0..n {
            entries[[i, i]] = Complex64::new(1.0, 0.0);
        }
        OperatorMatrix {
            grid: Arc::clone(grid),
            entries,
            band: 0,
        }
    }

    /// Wrap raw entries; scans them once for the bandwidth bound.
    pub fn from_entries(grid: Arc<Grid>, entries: Array2<Complex64>) -> Result<Self, GridError> {
        if entries.nrows() != grid.n() || entries.ncols() != grid.n() {
            return Err(GridError::DimensionMismatch {
                rows: entries.nrows(),
                cols: entries.ncols(),
                want: grid.n(),
            });
        }
        let band = scan_band(&entries);
        Ok(OperatorMatrix {
            grid,
            entries,
            band,
        })
    }

    /// Diagonal matrix from samples.
    pub fn diagonal(f: &SampledFunction) -> Self {
        let n = f.len();
        let mut entries = Array2::<Complex64>::zeros((n, n));
        for (i, &z) in f.values().iter().enumerate() {
            entries[[i, i]] = z;
        }
        OperatorMatrix {
            grid: Arc::clone(f.grid()),
            entries,
            band: 0,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    /// Upper bound on `|i − j|` over nonzero entries.
    pub fn band(&self) -> usize {
        self.band
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let n = self.n();
        let mut entries = Array2::<Complex64>::zeros((n, n));
        for i in 0..n {
            for j in i.saturating_sub(self.band)..(i + self.band + 1).min(n) {
                entries[[j, i]] = self.entries[[i, j]].conj();
            }
        }
        OperatorMatrix {
            grid: Arc::clone(&self.grid),
            entries,
            band: self.band,
        }
    }

    /// Band-aware matrix product.
    pub fn matmul(&self, rhs: &OperatorMatrix) -> Result<Self, GridError> {
        if !same_grid(&self.grid, &rhs.grid) {
            return Err(GridError::GridMismatch);
        }
        let n = self.n();
        let ba = self.band.min(n - 1);
        let bb = rhs.band.min(n - 1);
        let bc = (ba + bb).min(n - 1);
        let mut entries = Array2::<Complex64>::zeros((n, n));
        for i in 0..n {
            let k_lo = i.saturating_sub(ba);
            let k_hi = (i + ba + 1).min(n);
            for k in k_lo..k_hi {
                let a = self.entries[[i, k]];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let j_lo = k.saturating_sub(bb);
                let j_hi = (k + bb + 1).min(n);
                for j in j_lo..j_hi {
                    entries[[i, j]] += a * rhs.entries[[k, j]];
                }
            }
        }
        Ok(OperatorMatrix {
            grid: Arc::clone(&self.grid),
            entries,
            band: bc,
        })
    }

    pub fn add(&self, rhs: &OperatorMatrix) -> Result<Self, GridError> {
        if !same_grid(&self.grid, &rhs.grid) {
            return Err(GridError::GridMismatch);
        }
        OperatorMatrix::from_entries_with_band(
            Arc::clone(&self.grid),
            &self.entries + &rhs.entries,
            self.band.max(rhs.band),
        )
    }

    pub fn sub(&self, rhs: &OperatorMatrix) -> Result<Self, GridError> {
        if !same_grid(&self.grid, &rhs.grid) {
            return Err(GridError::GridMismatch);
        }
        OperatorMatrix::from_entries_with_band(
            Arc::clone(&self.grid),
            &self.entries - &rhs.entries,
            self.band.max(rhs.band),
        )
    }

    fn from_entries_with_band(
        grid: Arc<Grid>,
        entries: Array2<Complex64>,
        band: usize,
    ) -> Result<Self, GridError> {
        Ok(OperatorMatrix {
            grid,
            entries,
            band,
        })
    }

    pub fn scale(&self, s: Complex64) -> Self {
        OperatorMatrix {
            grid: Arc::clone(&self.grid),
            entries: self.entries.mapv(|z| s * z),
            band: self.band,
        }
    }

    /// Band-aware matrix-vector product.
    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        assert_eq!(v.len(), n, "vector length must match grid size");
        let b = self.band.min(n - 1);
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let j_lo = i.saturating_sub(b);
            let j_hi = (i + b + 1).min(n);
            let mut acc = Complex64::new(0.0, 0.0);
            for j in j_lo..j_hi {
                acc += self.entries[[i, j]] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Frobenius norm over the interior block, excluding `band_rows` rows and
    /// columns at each end.
    pub fn interior_frobenius(&self, band_rows: usize) -> f64 {
        let n = self.n();
        if 2 * band_rows >= n {
            return 0.0;
        }
        let b = self.band.min(n - 1);
        let mut sum = 0.0;
        for i in band_rows..n - band_rows {
            let j_lo = i.saturating_sub(b).max(band_rows);
            let j_hi = (i + b + 1).min(n - band_rows);
            for j in j_lo..j_hi {
                sum += self.entries[[i, j]].norm_sqr();
            }
        }
        sum.sqrt()
    }

    /// Zero the first and last row and column (Dirichlet closure: fields
    /// vanish at the grid ends, so those degrees of freedom are removed).
    pub fn close_dirichlet(&mut self) {
        let n = self.n();
        for j in 0..n {
            self.entries[[0, j]] = Complex64::new(0.0, 0.0);
            self.entries[[n - 1, j]] = Complex64::new(0.0, 0.0);
        }
        for i in 0..n {
            self.entries[[i, 0]] = Complex64::new(0.0, 0.0);
            self.entries[[i, n - 1]] = Complex64::new(0.0, 0.0);
        }
    }

    /// The interior block (rows and columns `1..n-1`) as a plain array —
    /// the faithful discrete operator once Dirichlet ends are removed.
    pub fn interior_block(&self) -> Array2<Complex64> {
        let n = self.n();
        self.entries
            .slice(ndarray::s![1..n - 1, 1..n - 1])
            .to_owned()
    }

    /// Largest Hermitian-part defect ‖O − O†‖ over the interior.
    pub fn hermitian_defect(&self, band_rows: usize) -> f64 {
        self.sub(&self.adjoint())
            .expect("same grid")
            .interior_frobenius(band_rows)
    }

    /// Largest anti-Hermitian-part defect ‖O + O†‖ over the interior.
    pub fn anti_hermitian_defect(&self, band_rows: usize) -> f64 {
        self.add(&self.adjoint())
            .expect("same grid")
            .interior_frobenius(band_rows)
    }

    /// Binary export: row-major, each entry as little-endian `f64` pairs
    /// `(re, im)`, preceded by a `u64` dimension.
    pub fn write_binary<W: io::Write>(&self, w: &mut W) -> io::Result<()> {
        let n = self.n();
        w.write_all(&(n as u64).to_le_bytes())?;
        for i in 0..n {
            for j in 0..n {
                let z = self.entries[[i, j]];
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// CSV export (small n): header `i,j,re,im`, nonzero entries only.
    pub fn write_csv<W: io::Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "i,j,re,im")?;
        let n = self.n();
        for i in 0..n {
            for j in 0..n {
                let z = self.entries[[i, j]];
                if z != Complex64::new(0.0, 0.0) {
                    writeln!(w, "{i},{j},{:e},{:e}", z.re, z.im)?;
                }
            }
        }
        Ok(())
    }
}
