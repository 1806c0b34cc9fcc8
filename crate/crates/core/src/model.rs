//! Scalar model data for the position-dependent-mass constructions.
//!
//! A [`ModelSpec`] carries the user-supplied expressions — the mass profile
//! `U` (with `U = 1/√(2m)`), the real gauge function `a`, and the two
//! generating functions `G` and `g` — plus the scalar constants ε, γ, δ, λ₁,
//! λ₂. From these the module derives everything scalar the operator builders
//! need:
//!
//! * the gauge phase `α(x) = −2∫₀ˣ a/U`,
//! * the real first-order coefficient `F = U′/2 − U·G′/(2G)` paired with `G`
//!   (so that `W = F + iG` makes the second-order similarity operator
//!   factorizable),
//! * the first-order generating function `f = U′/2` paired with `g`
//!   (`w = f + ig`),
//! * the complex potentials `V₊ = F² − G² − (UF)′ − 2iUG′ + ε` and
//!   `V₋ = w² − (Uw)′ + γ`,
//! * the residual of the third-order identity that `F` must satisfy, and
//! * the kernel eigenfunction `Ψ = exp[−∫₀ˣ F/U − i∫₀ˣ (G−a)/U]`.
//!
//! The imaginary part of the gauge function is identically zero throughout
//! (`A = a` real); the construction requires it and the general pathway is
//! deliberately not exposed. All derivatives are finite differences from the
//! grid module, so residual accuracy is a convergence order, not an absolute.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::exprlang::{eval_expr, Expr, ExprError};
use crate::grid::{
    cumulative_integral, derivative, integrate, DiffOrder, Grid, GridError, SampledFunction,
};

/// Errors from model-data construction.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("expression evaluation failed at x = {x}: {source}")]
    Eval { x: f64, source: ExprError },
    #[error("mass profile U must be positive: U({x}) = {value}")]
    NonPositiveU { x: f64, value: f64 },
    #[error("G vanishes near x = {x}; F = U′/2 − U·G′/(2G) needs G ≠ 0")]
    GZero { x: f64 },
    #[error("G′ vanishes near x = {x}; the generating identity divides by G′")]
    GPrimeVanishes { x: f64 },
    #[error("kernel-eigenfunction exponent reaches {max_abs:.1}; |Re| must stay below 700")]
    ExponentOverflow { max_abs: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// User-level description of one model: expressions plus scalar parameters.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    /// Mass profile U(x) > 0.
    pub u_expr: Expr,
    /// Real gauge function a(x) (the imaginary part b is identically zero).
    pub a_expr: Expr,
    /// Imaginary part G of the second-order coefficient W = F + iG.
    pub big_g_expr: Expr,
    /// Imaginary part g of the first-order coefficient w = f + ig.
    pub small_g_expr: Expr,
    /// Additive real constant in V₊ (doubles as the real eigenvalue of the
    /// kernel eigenfunction).
    pub epsilon: f64,
    /// Additive real constant in V₋.
    pub gamma: f64,
    /// Offset in the auxiliary map factor R = 1 + δ·exp(−2∫F/U).
    pub delta: f64,
    /// First chain parameter.
    pub lambda1: f64,
    /// Second chain parameter.
    pub lambda2: f64,
}

impl ModelSpec {
    /// Parse a spec from expression sources; constants default to
    /// ε = γ = 0, δ = 1, λ₁ = λ₂ = 1.
    pub fn parse(u: &str, a: &str, big_g: &str, small_g: &str) -> Result<Self, ExprError> {
        Ok(ModelSpec {
            u_expr: crate::exprlang::parse_expr(u)?,
            a_expr: crate::exprlang::parse_expr(a)?,
            big_g_expr: crate::exprlang::parse_expr(big_g)?,
            small_g_expr: crate::exprlang::parse_expr(small_g)?,
            epsilon: 0.0,
            gamma: 0.0,
            delta: 1.0,
            lambda1: 1.0,
            lambda2: 1.0,
        })
    }
}

/// The two potentials attached to one model.
#[derive(Debug, Clone)]
pub struct PotentialPair {
    pub v_plus: SampledFunction,
    pub v_minus: SampledFunction,
}

/// Evaluate an expression on every grid point.
pub fn sample_expr(e: &Expr, grid: &Arc<Grid>) -> Result<SampledFunction, ModelError> {
    let mut values = Vec::with_capacity(grid.n());
    for &x in grid.points() {
        let v = eval_expr(e, x).map_err(|source| ModelError::Eval { x, source })?;
        values.push(Complex64::new(v, 0.0));
    }
    Ok(SampledFunction::from_values(Arc::clone(grid), values)?)
}

/// Sample the mass profile and enforce positivity.
pub fn sample_u(spec: &ModelSpec, grid: &Arc<Grid>) -> Result<SampledFunction, ModelError> {
    let u = sample_expr(&spec.u_expr, grid)?;
    for (&x, z) in grid.points().iter().zip(u.values()) {
        if z.re <= 0.0 {
            return Err(ModelError::NonPositiveU { x, value: z.re });
        }
    }
    Ok(u)
}

/// Gauge phase α(x) = −2 ∫₀ˣ a/U (real, anchored at the grid anchor).
pub fn gauge_phase_alpha(spec: &ModelSpec, grid: &Arc<Grid>) -> Result<SampledFunction, ModelError> {
    let u = sample_u(spec, grid)?;
    let a = sample_expr(&spec.a_expr, grid)?;
    let ratio = a.zip_with(&u, |a, u| a / u)?;
    let cum = cumulative_integral(&ratio, grid.anchor())?;
    Ok(cum.scale(Complex64::new(-2.0, 0.0)))
}

/// F from sampled data: F = U′/2 − U·G′/(2G), derivatives numerical.
/// Rejects G with a zero or a sign change on the grid.
pub fn big_f_from_samples(
    u: &SampledFunction,
    big_g: &SampledFunction,
) -> Result<SampledFunction, ModelError> {
    let xs = u.grid().points();
    let gv = big_g.values();
    for i in 0..gv.len() {
        if gv[i].norm() < 1e-14 {
            return Err(ModelError::GZero { x: xs[i] });
        }
        if i + 1 < gv.len() && gv[i].re * gv[i + 1].re < 0.0 {
            return Err(ModelError::GZero { x: xs[i] });
        }
    }
    let up = derivative(u, DiffOrder::First);
    let gp = derivative(big_g, DiffOrder::First);
    let mut values = Vec::with_capacity(gv.len());
    for i in 0..gv.len() {
        values.push(0.5 * up.values()[i] - u.values()[i] * gp.values()[i] / (2.0 * gv[i]));
    }
    Ok(SampledFunction::from_values(Arc::clone(u.grid()), values)?)
}

/// F from the spec's expressions (samples U and G, then applies
/// [`big_f_from_samples`]).
pub fn big_f_from_g(spec: &ModelSpec, grid: &Arc<Grid>) -> Result<SampledFunction, ModelError> {
    let u = sample_u(spec, grid)?;
    let big_g = sample_expr(&spec.big_g_expr, grid)?;
    big_f_from_samples(&u, &big_g)
}

/// First-order generating function f = U′/2 (numerical derivative).
pub fn small_f_from_u(spec: &ModelSpec, grid: &Arc<Grid>) -> Result<SampledFunction, ModelError> {
    let u = sample_u(spec, grid)?;
    Ok(derivative(&u, DiffOrder::First).scale(Complex64::new(0.5, 0.0)))
}

/// Second-order potential V₊ = F² − G² − (UF)′ − 2iUG′ + ε.
pub fn potential_v_plus(
    f: &SampledFunction,
    big_g: &SampledFunction,
    u: &SampledFunction,
    epsilon: f64,
) -> Result<SampledFunction, ModelError> {
    let uf = u.mul(f)?;
    let uf_p = derivative(&uf, DiffOrder::First);
    let gp = derivative(big_g, DiffOrder::First);
    let mut values = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        let fv = f.values()[i];
        let gv = big_g.values()[i];
        let v = fv * fv - gv * gv - uf_p.values()[i]
            - Complex64::new(0.0, 2.0) * u.values()[i] * gp.values()[i]
            + epsilon;
        values.push(v);
    }
    Ok(SampledFunction::from_values(Arc::clone(u.grid()), values)?)
}

/// First-order potential V₋ = w² − (Uw)′ + γ with w = f + ig.
pub fn potential_v_minus(
    f: &SampledFunction,
    g_fn: &SampledFunction,
    u: &SampledFunction,
    gamma: f64,
) -> Result<SampledFunction, ModelError> {
    let w = f.zip_with(g_fn, |f, g| f + Complex64::new(0.0, 1.0) * g)?;
    let uw = u.mul(&w)?;
    let uw_p = derivative(&uw, DiffOrder::First);
    let mut values = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        values.push(w.values()[i] * w.values()[i] - uw_p.values()[i] + gamma);
    }
    Ok(SampledFunction::from_values(Arc::clone(u.grid()), values)?)
}

/// Both potentials from a spec: V₊ from (F, G), V₋ from (f, g).
pub fn potentials(spec: &ModelSpec, grid: &Arc<Grid>) -> Result<PotentialPair, ModelError> {
    let u = sample_u(spec, grid)?;
    let big_g = sample_expr(&spec.big_g_expr, grid)?;
    let small_g = sample_expr(&spec.small_g_expr, grid)?;
    let f_upper = big_f_from_samples(&u, &big_g)?;
    let f_lower = derivative(&u, DiffOrder::First).scale(Complex64::new(0.5, 0.0));
    Ok(PotentialPair {
        v_plus: potential_v_plus(&f_upper, &big_g, &u, spec.epsilon)?,
        v_minus: potential_v_minus(&f_lower, &small_g, &u, spec.gamma)?,
    })
}

/// Max interior residual of the third-order identity that F must satisfy
/// for V₊ to close:
///
/// ```text
/// F² − (UF)′ = (G/G′)(−FF′ + ½(UF)″)
///            + (1/G′)(¼[U²G″]′ − (G/4)[UU″]′ + (U′U/4)[G/U]″ + (U′²U/2)[G/U]′)
///            − U″U/4
/// ```
///
/// All derivatives are nested first-difference applications, so a 4-point
/// band at each end is excluded from the maximum. Errors when G′ comes too
/// close to zero anywhere on the interior (the identity divides by it).
pub fn third_order_identity_residual(
    f: &SampledFunction,
    big_g: &SampledFunction,
    u: &SampledFunction,
) -> Result<f64, ModelError> {
    let d = |s: &SampledFunction| derivative(s, DiffOrder::First);
    let gp = d(big_g);
    let n = u.len();
    let xs = u.grid().points();
    let gp_scale = gp.interior_max_abs(1).max(1.0);
    for i in 1..n - 1 {
        if gp.values()[i].norm() < 1e-10 * gp_scale {
            return Err(ModelError::GPrimeVanishes { x: xs[i] });
        }
    }
    let up = d(u);
    let uf = u.mul(f)?;
    let uf_p = d(&uf);
    let uf_pp = d(&uf_p);
    let fp = d(f);
    let g_over_u = big_g.zip_with(u, |g, u| g / u)?;
    let gu_p = d(&g_over_u);
    let gu_pp = d(&gu_p);
    let u2_gpp = u.zip_with(&d(&gp), |u, gpp| u * u * gpp)?;
    let term_a = d(&u2_gpp);
    let upp = d(&up);
    let u_upp = u.mul(&upp)?;
    let term_b = d(&u_upp);
    let mut resid = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let (uv, uvp, uvpp) = (u.values()[i], up.values()[i], upp.values()[i]);
        let (gv, gvp) = (big_g.values()[i], gp.values()[i]);
        let fv = f.values()[i];
        let lhs = fv * fv - uf_p.values()[i];
        let rhs = (gv / gvp) * (-fv * fp.values()[i] + 0.5 * uf_pp.values()[i])
            + (1.0 / gvp)
                * (0.25 * term_a.values()[i] - (gv / 4.0) * term_b.values()[i]
                    + (uvp * uv / 4.0) * gu_pp.values()[i]
                    + (uvp * uvp * uv / 2.0) * gu_p.values()[i])
            - uvpp * uv / 4.0;
        resid[i] = lhs - rhs;
    }
    let resid = SampledFunction::from_values(Arc::clone(u.grid()), resid)?;
    Ok(resid.interior_max_abs(4))
}

/// Kernel eigenfunction Ψ(x) = exp[−∫₀ˣ F/U − i∫₀ˣ (G−a)/U], normalized to
/// unit trapezoid L² norm. Errors when the real exponent leaves ±700
/// (`exp` would overflow before normalization could rescue it).
pub fn kernel_eigenfunction(
    f: &SampledFunction,
    big_g: &SampledFunction,
    a: &SampledFunction,
    u: &SampledFunction,
) -> Result<SampledFunction, ModelError> {
    let grid = u.grid();
    let ratio_re = f.zip_with(u, |f, u| f / u)?;
    let cum_re = cumulative_integral(&ratio_re, grid.anchor())?;
    let ratio_im = big_g.zip_with(a, |g, a| g - a)?.zip_with(u, |d, u| d / u)?;
    let cum_im = cumulative_integral(&ratio_im, grid.anchor())?;
    let max_abs = cum_re.max_abs();
    if max_abs > 700.0 {
        return Err(ModelError::ExponentOverflow { max_abs });
    }
    let mut values = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        let expo = -cum_re.values()[i] - Complex64::new(0.0, 1.0) * cum_im.values()[i];
        values.push(expo.exp());
    }
    let psi = SampledFunction::from_values(Arc::clone(grid), values)?;
    let norm_sq = integrate(&psi.map(|z| Complex64::new(z.norm_sqr(), 0.0)));
    let norm = norm_sq.re.sqrt();
    Ok(psi.scale(Complex64::new(1.0 / norm, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse_expr;
    use crate::grid::make_grid;

    fn spec(u: &str, a: &str, big_g: &str, small_g: &str) -> ModelSpec {
        ModelSpec::parse(u, a, big_g, small_g).expect("parse spec")
    }

    #[test]
    fn sample_u_enforces_positivity() {
        let g = make_grid(-4.0, 4.0, 101).unwrap();
        let s = spec("1", "0", "1", "0");
        let u = sample_u(&s, &g).unwrap();
        assert!(u.values().iter().all(|z| z.re == 1.0));

        let s = spec("1 + x^2", "0", "1", "0");
        assert!(sample_u(&s, &g).is_ok());

        let g1 = make_grid(-1.0, 1.0, 11).unwrap();
        let s = spec("x", "0", "1", "0");
        assert!(matches!(
            sample_u(&s, &g1),
            Err(ModelError::NonPositiveU { .. })
        ));
    }

    #[test]
    fn gauge_phase_examples() {
        let g = make_grid(-4.0, 4.0, 2001).unwrap();
        let s = spec("1", "0", "1", "0");
        let alpha = gauge_phase_alpha(&s, &g).unwrap();
        assert!(alpha.max_abs() < 1e-15);

        // a = x, U = 1: α = −2·x²/2 = −x².
        let s = spec("1", "x", "1", "0");
        let alpha = gauge_phase_alpha(&s, &g).unwrap();
        let mut max_err: f64 = 0.0;
        for (i, &x) in g.points().iter().enumerate() {
            max_err = max_err.max((alpha.values()[i].re - (-x * x)).abs());
        }
        assert!(max_err < 1e-6, "max err {max_err}");

        // Even a gives odd α.
        let s = spec("1", "exp(-x^2)", "1", "0");
        let alpha = gauge_phase_alpha(&s, &g).unwrap();
        let flipped = alpha.parity_flip().unwrap();
        let odd_defect = alpha.add(&flipped).unwrap().max_abs();
        assert!(odd_defect < 1e-10, "odd defect {odd_defect}");
    }

    #[test]
    fn big_f_examples() {
        // U = 1, G = const: F vanishes up to boundary-stencil roundoff
        // (the one-sided rows leave ~1e−16/h on non-dyadic constants).
        let g = make_grid(-4.0, 4.0, 201).unwrap();
        let s = spec("1", "0", "0.7", "0");
        let f = big_f_from_g(&s, &g).unwrap();
        assert!(f.max_abs() < 1e-12);

        // U = 1, G = exp(x): F = −G′/(2G) ≈ −1/2.
        let g = make_grid(-2.0, 2.0, 2001).unwrap();
        let s = spec("1", "0", "exp(x)", "0");
        let f = big_f_from_g(&s, &g).unwrap();
        let mut max_err: f64 = 0.0;
        for i in 1..g.n() - 1 {
            max_err = max_err.max((f.values()[i].re - (-0.5)).abs());
        }
        assert!(max_err < 1e-5, "interior err {max_err}");

        // G with a zero on the grid is rejected.
        let godd = make_grid(-1.0, 1.0, 101).unwrap();
        let s = spec("1", "0", "x", "0");
        assert!(matches!(
            big_f_from_g(&s, &godd),
            Err(ModelError::GZero { .. })
        ));
        // Sign change without an exact zero is also rejected.
        let geven = make_grid(-1.0, 1.0, 100).unwrap();
        assert!(matches!(
            big_f_from_g(&s, &geven),
            Err(ModelError::GZero { .. })
        ));
    }

    #[test]
    fn small_f_examples() {
        let g = make_grid(-2.0, 2.0, 1001).unwrap();
        let s = spec("1", "0", "1", "0");
        assert!(small_f_from_u(&s, &g).unwrap().max_abs() == 0.0);

        let s = spec("1 + x^2", "0", "1", "0");
        let f = small_f_from_u(&s, &g).unwrap();
        let mut max_err: f64 = 0.0;
        for (i, &x) in g.points().iter().enumerate() {
            max_err = max_err.max((f.values()[i].re - x).abs());
        }
        assert!(max_err < 1e-5, "err {max_err}");

        let s = spec("cosh(x)", "0", "1", "0");
        let f = small_f_from_u(&s, &g).unwrap();
        let mut max_err: f64 = 0.0;
        for (i, &x) in g.points().iter().enumerate().skip(1).take(g.n() - 2) {
            max_err = max_err.max((f.values()[i].re - 0.5 * x.sinh()).abs());
        }
        assert!(max_err < 1e-5, "err {max_err}");
    }

    #[test]
    fn v_plus_examples() {
        let g = make_grid(-2.0, 2.0, 401).unwrap();
        let u = SampledFunction::from_real_fn(&g, |_| 1.0);
        let zero = SampledFunction::zeros(&g);

        // F = 0, G = c: V₊ = −c² + ε (up to boundary-stencil roundoff in
        // the −2iUG′ term).
        let gc = SampledFunction::from_real_fn(&g, |_| 0.7);
        let v = potential_v_plus(&zero, &gc, &u, 0.3).unwrap();
        for z in v.values() {
            assert!((z - Complex64::new(-0.49 + 0.3, 0.0)).norm() < 1e-12);
        }

        // F = x, G = 0: V₊ = x² − 1 (exact for linear data).
        let fx = SampledFunction::from_real_fn(&g, |x| x);
        let v = potential_v_plus(&fx, &zero, &u, 0.0).unwrap();
        for (i, &x) in g.points().iter().enumerate() {
            assert!((v.values()[i] - Complex64::new(x * x - 1.0, 0.0)).norm() < 1e-12);
        }

        // F = 0, G = x: V₊ = −x² − 2i.
        let gx = SampledFunction::from_real_fn(&g, |x| x);
        let v = potential_v_plus(&zero, &gx, &u, 0.0).unwrap();
        for (i, &x) in g.points().iter().enumerate() {
            assert!((v.values()[i] - Complex64::new(-x * x, -2.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn v_minus_examples() {
        let g = make_grid(-2.0, 2.0, 1001).unwrap();
        let u1 = SampledFunction::from_real_fn(&g, |_| 1.0);
        let zero = SampledFunction::zeros(&g);

        let v = potential_v_minus(&zero, &zero, &u1, 0.25).unwrap();
        for z in v.values() {
            assert!((z - Complex64::new(0.25, 0.0)).norm() < 1e-14);
        }

        // U = 1, g = x: w = ix, V₋ = −x² − i.
        let gx = SampledFunction::from_real_fn(&g, |x| x);
        let v = potential_v_minus(&zero, &gx, &u1, 0.0).unwrap();
        for (i, &x) in g.points().iter().enumerate() {
            assert!((v.values()[i] - Complex64::new(-x * x, -1.0)).norm() < 1e-12);
        }

        // U = 1 + x², f = x, g = 0: V₋ = x² − (1 + 3x²) = −2x² − 1.
        let u = SampledFunction::from_real_fn(&g, |x| 1.0 + x * x);
        let fx = SampledFunction::from_real_fn(&g, |x| x);
        let v = potential_v_minus(&fx, &zero, &u, 0.0).unwrap();
        let mut max_err: f64 = 0.0;
        for (i, &x) in g.points().iter().enumerate() {
            max_err = max_err.max((v.values()[i] - Complex64::new(-2.0 * x * x - 1.0, 0.0)).norm());
        }
        assert!(max_err < 1e-4, "err {max_err}");
    }

    #[test]
    fn conjugation_identity_for_v_plus() {
        // V₊ − V₊* + 4iUG′ vanishes: the imaginary part of V₊ is −2UG′.
        let g = make_grid(-3.0, 3.0, 801).unwrap();
        let s = spec("1 + x^2", "0", "2 + sin(x)", "0");
        let u = sample_u(&s, &g).unwrap();
        let big_g = sample_expr(&s.big_g_expr, &g).unwrap();
        let f = big_f_from_samples(&u, &big_g).unwrap();
        let v = potential_v_plus(&f, &big_g, &u, 0.0).unwrap();
        let gp = derivative(&big_g, DiffOrder::First);
        let mut max_defect: f64 = 0.0;
        for i in 0..g.n() {
            let defect = v.values()[i] - v.values()[i].conj()
                + Complex64::new(0.0, 4.0) * u.values()[i] * gp.values()[i];
            max_defect = max_defect.max(defect.norm());
        }
        assert!(max_defect < 1e-12, "defect {max_defect}");
    }

    #[test]
    fn constant_g_reduces_to_real_potential() {
        // G constant: Im V₊ ≡ 0 and F = U′/2.
        let g = make_grid(-3.0, 3.0, 801).unwrap();
        let s = spec("1 + x^2", "0", "0.9", "0");
        let u = sample_u(&s, &g).unwrap();
        let big_g = sample_expr(&s.big_g_expr, &g).unwrap();
        let f = big_f_from_samples(&u, &big_g).unwrap();
        let up_half = derivative(&u, DiffOrder::First).scale(Complex64::new(0.5, 0.0));
        assert!(f.sub(&up_half).unwrap().max_abs() < 1e-12);
        let v = potential_v_plus(&f, &big_g, &u, 0.1).unwrap();
        assert!(v.max_imag_abs() < 1e-11);
    }

    #[test]
    fn generating_identity_residual() {
        let g = make_grid(-2.0, 2.0, 2001).unwrap();
        let s = spec("1", "0", "exp(x)", "0");
        let u = sample_u(&s, &g).unwrap();
        let big_g = sample_expr(&s.big_g_expr, &g).unwrap();
        let f = big_f_from_samples(&u, &big_g).unwrap();
        let r = third_order_identity_residual(&f, &big_g, &u).unwrap();
        assert!(r < 1e-4, "residual {r}");

        // A perturbed F breaks the identity by orders of magnitude.
        let f_bad = f.map(|z| z + 0.1);
        let r_bad = third_order_identity_residual(&f_bad, &big_g, &u).unwrap();
        assert!(r_bad > 1e-2, "perturbed residual {r_bad}");

        // Constant G: the identity divides by G′ = 0.
        let gc = SampledFunction::from_real_fn(&g, |_| 0.7);
        assert!(matches!(
            third_order_identity_residual(&f, &gc, &u),
            Err(ModelError::GPrimeVanishes { .. })
        ));
    }

    #[test]
    fn kernel_eigenfunction_examples() {
        // U = 1, F = x, G = a = 0: Ψ ∝ exp(−x²/2).
        let g = make_grid(-6.0, 6.0, 2001).unwrap();
        let u = SampledFunction::from_real_fn(&g, |_| 1.0);
        let fx = SampledFunction::from_real_fn(&g, |x| x);
        let zero = SampledFunction::zeros(&g);
        let psi = kernel_eigenfunction(&fx, &zero, &zero, &u).unwrap();
        let mut gauss = SampledFunction::from_real_fn(&g, |x| (-0.5 * x * x).exp());
        let norm = integrate(&gauss.map(|z| Complex64::new(z.norm_sqr(), 0.0)))
            .re
            .sqrt();
        gauss = gauss.scale(Complex64::new(1.0 / norm, 0.0));
        let gap = psi.sub(&gauss).unwrap().max_abs();
        assert!(gap < 1e-6, "gap {gap}");

        // U = 1 + x², G = c, a = 0 gives F = x and |Ψ| ∝ (1 + x²)^{−1/2}.
        let g4 = make_grid(-4.0, 4.0, 2001).unwrap();
        let s = spec("1 + x^2", "0", "0.7", "0");
        let u = sample_u(&s, &g4).unwrap();
        let big_g = sample_expr(&s.big_g_expr, &g4).unwrap();
        let f = big_f_from_samples(&u, &big_g).unwrap();
        let a0 = SampledFunction::zeros(&g4);
        let psi = kernel_eigenfunction(&f, &big_g, &a0, &u).unwrap();
        let mut target = SampledFunction::from_real_fn(&g4, |x| 1.0 / (1.0 + x * x).sqrt());
        let norm = integrate(&target.map(|z| Complex64::new(z.norm_sqr(), 0.0)))
            .re
            .sqrt();
        target = target.scale(Complex64::new(1.0 / norm, 0.0));
        let mut max_err: f64 = 0.0;
        for i in 0..g4.n() {
            max_err = max_err.max((psi.values()[i].norm() - target.values()[i].re).abs());
        }
        assert!(max_err < 1e-5, "modulus gap {max_err}");

        // All-zero data: constant eigenfunction.
        let psi = kernel_eigenfunction(&zero, &zero, &zero, &u1_on(&g)).unwrap();
        let first = psi.values()[0];
        assert!(psi.values().iter().all(|z| (z - first).norm() < 1e-14));

        // Overflow guard.
        let fbig = SampledFunction::from_real_fn(&g, |_| 150.0);
        assert!(matches!(
            kernel_eigenfunction(&fbig, &zero, &zero, &u1_on(&g)),
            Err(ModelError::ExponentOverflow { .. })
        ));
    }

    fn u1_on(g: &Arc<Grid>) -> SampledFunction {
        SampledFunction::from_real_fn(g, |_| 1.0)
    }

    #[test]
    fn spec_parse_rejects_bad_expressions() {
        assert!(ModelSpec::parse("1 +", "0", "1", "0").is_err());
        let s = ModelSpec::parse("1", "0", "1", "0").unwrap();
        assert_eq!(s.delta, 1.0);
        assert_eq!(s.lambda1, 1.0);
        let _ = parse_expr("1").unwrap();
    }
}
