//! The coordinate-transformation machinery linking the second-order
//! similarity operator to the first-order one: the Jacobian profile
//! R(x) = dx/dξ and its reciprocal S, the new coordinate ξ, the modified
//! mass 𝓤(ξ) = U·dξ/dx, the generating-function mapping F ↦ f, and the
//! constant-mass closed forms with their pivot ODE.
//!
//! Conventions: quadratures anchor at the grid anchor (0 when on the grid,
//! otherwise the left end); vector residuals report the interior maximum
//! excluding four points per end (two derivative applications contaminate
//! up to four one-sided rows); re-tabulation between x and ξ uses monotone
//! piecewise-cubic (Fritsch–Carlson) interpolation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::Arc;

use crate::grid::{
    cumulative_integral, derivative, make_grid, DiffOrder, Grid, GridError, SampledFunction,
};
use crate::verify::ResidualReport;
use thiserror::Error;

/// Interior exclusion band for pointwise (vector) residuals.
pub const VECTOR_BAND: usize = 4;

/// Default exclusion margin around the |σ| = 4 branch point, in σ units.
pub const DEFAULT_SIGMA_MARGIN: f64 = 0.25;

/// Errors from coordinate-map construction and checks.
#[derive(Debug, Error)]
pub enum CoordMapError {
    #[error("map factor R touches an excluded value near x = {x} (R = {value})")]
    SingularR { x: f64, value: f64 },
    #[error("map factor R must be positive, got R({x}) = {value}")]
    NonPositiveR { x: f64, value: f64 },
    #[error("divisor vanishes near x = {x}")]
    DivisorVanishes { x: f64 },
    #[error("sigma profile enters the excluded band |sigma| < {limit} at x = {x} (sigma = {sigma})")]
    SigmaDomain { x: f64, sigma: f64, limit: f64 },
    #[error("interpolation nodes are not strictly increasing at index {index}")]
    NonMonotone { index: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Which root of the constant-mass quadratic to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

// ---------------------------------------------------------------------------
// Monotone piecewise-cubic interpolation (Fritsch–Carlson).
// ---------------------------------------------------------------------------

/// Monotone piecewise-cubic Hermite interpolant. Node slopes follow the
/// Fritsch–Carlson weighted harmonic mean, which preserves monotonicity of
/// the data and reproduces linear data exactly.
#[derive(Debug, Clone)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    /// Build from strictly increasing abscissae.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, CoordMapError> {
        assert_eq!(xs.len(), ys.len(), "abscissae/ordinate length mismatch");
        assert!(xs.len() >= 2, "need at least two nodes");
        for i in 1..xs.len() {
            if xs[i] <= xs[i - 1] {
                return Err(CoordMapError::NonMonotone { index: i });
            }
        }
        let n = xs.len();
        let h: Vec<f64> = (0..n - 1).map(|i| xs[i + 1] - xs[i]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] <= 0.0 {
                d[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        d[0] = edge_slope(h[0], h.get(1).copied().unwrap_or(h[0]), delta[0], *delta.get(1).unwrap_or(&delta[0]));
        d[n - 1] = edge_slope(
            h[n - 2],
            if n >= 3 { h[n - 3] } else { h[n - 2] },
            delta[n - 2],
            if n >= 3 { delta[n - 3] } else { delta[n - 2] },
        );
        Ok(Pchip { xs, ys, d })
    }

    fn segment(&self, x: f64) -> usize {
        // Index i with xs[i] <= x < xs[i+1], clamped to valid segments so
        // out-of-range queries extend the end cubics.
        let n = self.xs.len();
        let pos = self.xs.partition_point(|&v| v <= x);
        pos.clamp(1, n - 1) - 1
    }

    /// Evaluate the interpolant (end cubics extend beyond the data range).
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1, d0, d1) = (self.ys[i], self.ys[i + 1], self.d[i], self.d[i + 1]);
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
    }

    /// Derivative of the interpolant.
    pub fn eval_derivative(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1, d0, d1) = (self.ys[i], self.ys[i + 1], self.d[i], self.d[i + 1]);
        let dh00 = 6.0 * t * t - 6.0 * t;
        let dh10 = 3.0 * t * t - 4.0 * t + 1.0;
        let dh01 = -6.0 * t * t + 6.0 * t;
        let dh11 = 3.0 * t * t - 2.0 * t;
        (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1
    }
}

// Non-centered three-point end slope with the standard monotonicity clamps.
fn edge_slope(h0: f64, h1: f64, delta0: f64, delta1: f64) -> f64 {
    let mut d = ((2.0 * h0 + h1) * delta0 - h0 * delta1) / (h0 + h1);
    if d * delta0 <= 0.0 {
        d = 0.0;
    } else if delta0 * delta1 < 0.0 && d.abs() > 3.0 * delta0.abs() {
        d = 3.0 * delta0;
    }
    d
}

// ---------------------------------------------------------------------------
// Core map constructions.
// ---------------------------------------------------------------------------

fn reject_singular_r(r: &SampledFunction) -> Result<(), CoordMapError> {
    let xs = r.grid().points();
    for (i, z) in r.values().iter().enumerate() {
        if z.norm() < 1e-9 || (z - Complex64::new(1.0, 0.0)).norm() < 1e-9 {
            return Err(CoordMapError::SingularR {
                x: xs[i],
                value: z.re,
            });
        }
    }
    Ok(())
}

fn require_positive_r(r: &SampledFunction) -> Result<(), CoordMapError> {
    let xs = r.grid().points();
    for (i, z) in r.values().iter().enumerate() {
        if z.re <= 0.0 {
            return Err(CoordMapError::NonPositiveR {
                x: xs[i],
                value: z.re,
            });
        }
    }
    Ok(())
}

/// Jacobian profile from the second-order generating function:
/// R(x) = 1 + δ·exp(−2∫ F/U), anchored at the grid anchor. Rejects
/// profiles touching the excluded values 0 and 1 within 1e−9 (δ = 0 always
/// trips this: it gives R ≡ 1).
pub fn r_from_big_f(
    big_f: &SampledFunction,
    u: &SampledFunction,
    delta: f64,
) -> Result<SampledFunction, CoordMapError> {
    let ratio = big_f.zip_with(u, |f, u| -2.0 * f / u)?;
    let cum = cumulative_integral(&ratio, ratio.grid().anchor())?;
    let r = cum.map(|z| Complex64::new(1.0, 0.0) + delta * z.exp());
    reject_singular_r(&r)?;
    Ok(r)
}

/// The two displayed forms of the mapped generating function, plus their
/// interior gap. `f` is the similarity form S·F = F/R; `alternate` is
/// F + U·(ln√R)′. The forms agree only when F and R are themselves related
/// by the Jacobian construction; the gap is reported, not asserted.
#[derive(Debug, Clone)]
pub struct FMapping {
    pub f: SampledFunction,
    pub alternate: SampledFunction,
    pub form_gap: f64,
}

/// Map the second-order generating function to the first-order one.
pub fn map_f(
    big_f: &SampledFunction,
    u: &SampledFunction,
    r: &SampledFunction,
) -> Result<FMapping, CoordMapError> {
    reject_singular_r(r)?;
    let f = big_f.zip_with(r, |f, r| f / r)?;
    let half_ln_r = r.map(|z| 0.5 * z.ln());
    let correction = derivative(&half_ln_r, DiffOrder::First);
    let alternate = big_f.zip_with(&u.mul(&correction)?, |f, c| f + c)?;
    let form_gap = f
        .zip_with(&alternate, |a, b| a - b)?
        .interior_max_abs(VECTOR_BAND);
    Ok(FMapping {
        f,
        alternate,
        form_gap,
    })
}

/// New coordinate from the Jacobian: ξ(x) = ∫ dx′/R, strictly increasing
/// for positive R.
pub fn xi_from_r(r: &SampledFunction) -> Result<SampledFunction, CoordMapError> {
    require_positive_r(r)?;
    let integrand = r.map(|z| Complex64::new(1.0, 0.0) / z);
    Ok(cumulative_integral(&integrand, r.grid().anchor())?)
}

/// Modified mass in both tabulations: on the original x grid and
/// re-tabulated onto a uniform ξ grid.
#[derive(Debug, Clone)]
pub struct ModifiedMass {
    /// 𝓤 = U/R sampled against x.
    pub on_x: SampledFunction,
    /// ξ(x) on the x grid.
    pub xi: SampledFunction,
    /// Uniform grid spanning [ξ(x_min), ξ(x_max)] with the same point count.
    pub xi_grid: Arc<Grid>,
    /// 𝓤 re-tabulated at the uniform ξ nodes.
    pub on_xi: SampledFunction,
}

/// Modified mass 𝓤 = U·dξ/dx = U/R.
pub fn modified_mass(
    u: &SampledFunction,
    r: &SampledFunction,
) -> Result<ModifiedMass, CoordMapError> {
    require_positive_r(r)?;
    let on_x = u.zip_with(r, |u, r| u / r)?;
    let xi = xi_from_r(r)?;
    let xi_vals = xi.real_values();
    let xi_grid = make_grid(xi_vals[0], xi_vals[xi_vals.len() - 1], xi_vals.len())?;
    let interp = Pchip::new(xi_vals, on_x.real_values())?;
    let on_xi = SampledFunction::from_real_fn(&xi_grid, |q| interp.eval(q));
    Ok(ModifiedMass {
        on_x,
        xi,
        xi_grid,
        on_xi,
    })
}

/// Residual of the mapped-generating-function identity f(ξ) = 𝓤′(ξ)/2,
/// with G identified as the Jacobian R. `f` is the similarity-form output
/// of [`map_f`]; 𝓤′ is the ξ-derivative of the modified mass, taken on the
/// uniform ξ re-tabulation and read back on the x grid.
///
/// Since 𝓤′(ξ)/2 = U′/2 − UR′/(2R) by the chain rule, the identity closes
/// exactly when F = (RU′ − UR′)/2. For an unpaired (F, R) — in particular
/// when R is generated from F itself — the two sides differ at order one,
/// and the report says so.
pub fn check_f_transform(
    u: &SampledFunction,
    big_f: &SampledFunction,
    big_g: &SampledFunction,
) -> Result<ResidualReport, CoordMapError> {
    let r = big_g;
    reject_singular_r(r)?;
    let mapping = map_f(big_f, u, r)?;
    let mass = modified_mass(u, r)?;
    // ξ-derivative of 𝓤 on the uniform ξ grid, then back to the x grid as a
    // function of ξ(x).
    let du_on_xi = derivative(&mass.on_xi, DiffOrder::First);
    let back = Pchip::new(mass.xi_grid.points().to_vec(), du_on_xi.real_values())?;
    let xi_vals = mass.xi.real_values();
    let n = u.len();
    let mut diff = Vec::with_capacity(n);
    let mut sup_a: f64 = 0.0;
    let mut sup_b: f64 = 0.0;
    let f_vals = mapping.f.values();
    for i in 0..n {
        let side_a = f_vals[i].re;
        let side_b = 0.5 * back.eval(xi_vals[i]);
        if i >= VECTOR_BAND && i < n - VECTOR_BAND {
            sup_a = sup_a.max(side_a.abs());
            sup_b = sup_b.max(side_b.abs());
        }
        diff.push(Complex64::new(side_a - side_b, f_vals[i].im));
    }
    let diff = SampledFunction::from_values(u.grid().clone(), diff)?;
    let absolute = diff.interior_max_abs(VECTOR_BAND);
    Ok(ResidualReport {
        name: "f_transform".to_string(),
        absolute,
        relative: absolute / sup_a.max(sup_b).max(1e-300),
        grid_n: n,
        interior_band: VECTOR_BAND,
    })
}

/// σ(x) = λ₁·∫ dx′/U² + λ₂, anchored at the grid anchor.
pub fn sigma_profile(
    u: &SampledFunction,
    lambda1: f64,
    lambda2: f64,
) -> Result<SampledFunction, CoordMapError> {
    let xs = u.grid().points();
    for (i, z) in u.values().iter().enumerate() {
        if z.re <= 0.0 {
            return Err(CoordMapError::DivisorVanishes { x: xs[i] });
        }
    }
    let integrand = u.map(|z| Complex64::new(1.0, 0.0) / (z * z));
    let cum = cumulative_integral(&integrand, u.grid().anchor())?;
    Ok(cum.map(|z| lambda1 * z + lambda2))
}

/// Constant-mass closed form R = σ²/8 − 1 ± (σ/2)·√(σ²/16 − 1). The square
/// root is real only for |σ| ≥ 4; `margin` widens the rejected band around
/// the branch point (where R passes through the excluded value 1).
pub fn r_closed_form(
    sigma: &SampledFunction,
    branch: Branch,
    margin: f64,
) -> Result<SampledFunction, CoordMapError> {
    let limit = 4.0 + margin;
    let xs = sigma.grid().points();
    let mut vals = Vec::with_capacity(sigma.len());
    for (i, z) in sigma.values().iter().enumerate() {
        let s = z.re;
        if s.abs() < limit {
            return Err(CoordMapError::SigmaDomain {
                x: xs[i],
                sigma: s,
                limit,
            });
        }
        let root = (s * s / 16.0 - 1.0).sqrt();
        let r = match branch {
            Branch::Plus => s * s / 8.0 - 1.0 + (s / 2.0) * root,
            Branch::Minus => s * s / 8.0 - 1.0 - (s / 2.0) * root,
        };
        vals.push(Complex64::new(r, 0.0));
    }
    Ok(SampledFunction::from_values(sigma.grid().clone(), vals)?)
}

/// Interior max residual of the pivot equation R″ + θR′ − χ(R)·R′², with
/// θ = 2(ln U)′ and χ(R) = (R−3)/(2R(R−1)), all derivatives numerical.
pub fn pivot_ode_residual(
    r: &SampledFunction,
    u: &SampledFunction,
) -> Result<ResidualReport, CoordMapError> {
    reject_singular_r(r)?;
    let xs = u.grid().points();
    for (i, z) in u.values().iter().enumerate() {
        if z.re <= 0.0 {
            return Err(CoordMapError::DivisorVanishes { x: xs[i] });
        }
    }
    let rp = derivative(r, DiffOrder::First);
    let rpp = derivative(r, DiffOrder::Second);
    let up = derivative(u, DiffOrder::First);
    let n = r.len();
    let mut absolute: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in VECTOR_BAND..n - VECTOR_BAND {
        let rv = r.values()[i].re;
        let rpv = rp.values()[i].re;
        let rppv = rpp.values()[i].re;
        let theta = 2.0 * up.values()[i].re / u.values()[i].re;
        let chi = (rv - 3.0) / (2.0 * rv * (rv - 1.0));
        let res = rppv + theta * rpv - chi * rpv * rpv;
        absolute = absolute.max(res.abs());
        scale = scale
            .max(rppv.abs())
            .max((theta * rpv).abs())
            .max((chi * rpv * rpv).abs());
    }
    Ok(ResidualReport {
        name: "pivot_ode".to_string(),
        absolute,
        relative: absolute / scale.max(1e-300),
        grid_n: n,
        interior_band: VECTOR_BAND,
    })
}

/// Constant-mass coordinate: ξ(x) = c + ∫ dx′/R(σ(x′)) for the chosen
/// branch, anchored at the grid anchor.
pub fn xi_closed_form(
    sigma: &SampledFunction,
    branch: Branch,
    c: f64,
    margin: f64,
) -> Result<SampledFunction, CoordMapError> {
    let r = r_closed_form(sigma, branch, margin)?;
    let xi = xi_from_r(&r)?;
    Ok(xi.map(|z| z + c))
}

// ---------------------------------------------------------------------------
// The assembled map.
// ---------------------------------------------------------------------------

/// Immutable bundle of every profile attached to one coordinate map.
#[derive(Debug, Clone)]
pub struct CoordinateMap {
    pub grid_x: Arc<Grid>,
    /// Jacobian R = dx/dξ.
    pub r: SampledFunction,
    /// Reciprocal S = 1/R.
    pub s: SampledFunction,
    /// New coordinate ξ(x).
    pub xi: SampledFunction,
    /// Modified mass 𝓤 = U·dξ/dx.
    pub u_modified: SampledFunction,
    /// Z = U/G.
    pub z: SampledFunction,
    /// σ profile for the closed forms.
    pub sigma: SampledFunction,
    pub branch: Branch,
}

/// Plain-number image of a map for serialization.
#[derive(Debug, Clone, Serialize)]
pub struct CoordinateMapRecord {
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub xi: Vec<f64>,
    pub u_modified: Vec<f64>,
    pub z: Vec<f64>,
    pub sigma: Vec<f64>,
    pub branch: Branch,
}

impl CoordinateMap {
    /// Build the full map from the mass profile, the two generating
    /// functions, and the map parameters. Requires the resulting R to be
    /// positive (so ξ is strictly increasing) and G nonvanishing.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        u: &SampledFunction,
        big_g: &SampledFunction,
        big_f: &SampledFunction,
        delta: f64,
        lambda1: f64,
        lambda2: f64,
        branch: Branch,
    ) -> Result<CoordinateMap, CoordMapError> {
        let r = r_from_big_f(big_f, u, delta)?;
        require_positive_r(&r)?;
        let s = r.map(|z| Complex64::new(1.0, 0.0) / z);
        let xi = xi_from_r(&r)?;
        let u_modified = u.zip_with(&r, |u, r| u / r)?;
        let g_scale = big_g.max_abs().max(1.0);
        let xs = big_g.grid().points();
        for (i, z) in big_g.values().iter().enumerate() {
            if z.norm() < 1e-14 * g_scale {
                return Err(CoordMapError::DivisorVanishes { x: xs[i] });
            }
        }
        let z = u.zip_with(big_g, |u, g| u / g)?;
        let sigma = sigma_profile(u, lambda1, lambda2)?;
        Ok(CoordinateMap {
            grid_x: u.grid().clone(),
            r,
            s,
            xi,
            u_modified,
            z,
            sigma,
            branch,
        })
    }

    /// Largest pointwise deviation of R·S from 1.
    pub fn reciprocal_defect(&self) -> f64 {
        self.r
            .values()
            .iter()
            .zip(self.s.values())
            .map(|(r, s)| (r * s - Complex64::new(1.0, 0.0)).norm())
            .fold(0.0, f64::max)
    }

    /// True when ξ is strictly increasing.
    pub fn xi_monotone(&self) -> bool {
        self.xi
            .values()
            .windows(2)
            .all(|w| w[1].re > w[0].re)
    }

    pub fn record(&self) -> CoordinateMapRecord {
        CoordinateMapRecord {
            x: self.grid_x.points().to_vec(),
            r: self.r.real_values(),
            s: self.s.real_values(),
            xi: self.xi.real_values(),
            u_modified: self.u_modified.real_values(),
            z: self.z.real_values(),
            sigma: self.sigma.real_values(),
            branch: self.branch,
        }
    }

    /// Paired-column export: x, R, ξ, 𝓤.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "x,R,xi,U_modified")?;
        let xs = self.grid_x.points();
        for i in 0..self.grid_x.n() {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e}",
                xs[i],
                self.r.values()[i].re,
                self.xi.values()[i].re,
                self.u_modified.values()[i].re,
            )?;
        }
        Ok(())
    }
}
