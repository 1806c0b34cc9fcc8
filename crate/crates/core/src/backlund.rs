//! Transformations of the pivot ODE family {χ, φ}: the variable swap Ŝ and
//! the quadrature-based transform B̂, evaluated along a concrete pivot
//! solution, with the three-fold closure identities and the commutation
//! check between the two transforms.
//!
//! The family notation {χ, φ} stands for the equation
//! R″ + θ(x)R′ = χ(R)·φ(R′). Ŝ swaps dependent and independent variables,
//! sending φ to φ♯(q) = −q³·φ(1/q) and re-reading χ against the new
//! dependent variable. B̂ introduces x̄ = ∫dp/φ(p), R̄ = λ∫dx; along a pivot
//! this is computed by quadrature with the base point at the left end of
//! the pivot domain, so closure statements hold modulo the recorded
//! additive constants.
//!
//! Transformed coefficient functions exist only through the pivot's
//! variable chain; they are carried as pivot-anchored tables and are
//! invertible as functions only where their argument samples are monotone.

use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

use crate::coordmap::{r_closed_form, Branch, CoordMapError, Pchip, DEFAULT_SIGMA_MARGIN};
use crate::grid::{derivative, DiffOrder, Grid, GridError, SampledFunction};

/// Probes per family for fingerprint and commutation comparisons.
pub const PROBE_COUNT: usize = 64;

/// Interior exclusion band for chain defects (quadratures and one
/// derivative contaminate a few points per end).
pub const CHAIN_BAND: usize = 4;

/// Errors from family transforms and chain checks.
#[derive(Debug, Error)]
pub enum BacklundError {
    #[error("chi has a pole at R = {r}")]
    ChiPole { r: f64 },
    #[error("function argument {arg} outside domain: {what}")]
    Domain { arg: f64, what: &'static str },
    #[error("chi vanishes or changes sign along the pivot near x = {x}")]
    VanishingChi { x: f64 },
    #[error("phi vanishes along the pivot near x = {x}")]
    VanishingPhi { x: f64 },
    #[error("R' vanishes along the pivot near x = {x}")]
    VanishingP { x: f64 },
    #[error("pivot does not satisfy the family ODE (relative residual {residual})")]
    NotASolution { residual: f64 },
    #[error("transformed coordinate is not strictly increasing at index {index}")]
    NonMonotoneCoordinate { index: usize },
    #[error("pivot-anchored function has non-monotone argument samples and cannot be inverted")]
    NotInvertible,
    #[error("chain has {got} stages; closure needs 3")]
    IncompleteChain { got: usize },
    #[error(transparent)]
    CoordMap(#[from] CoordMapError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Pivot-equation coefficient χ(R) = (R−3)/(2R(R−1)).
pub fn chi_cm(r: f64) -> Result<f64, BacklundError> {
    if r.abs() < 1e-12 || (r - 1.0).abs() < 1e-12 {
        return Err(BacklundError::ChiPole { r });
    }
    Ok((r - 3.0) / (2.0 * r * (r - 1.0)))
}

/// dχ/dR for the same coefficient.
pub fn dchi_cm(r: f64) -> Result<f64, BacklundError> {
    if r.abs() < 1e-12 || (r - 1.0).abs() < 1e-12 {
        return Err(BacklundError::ChiPole { r });
    }
    let den = 2.0 * r * r * (r - 1.0) * (r - 1.0);
    Ok(-(r * r - 6.0 * r + 3.0) / den)
}

// ---------------------------------------------------------------------------
// Coefficient function objects.
// ---------------------------------------------------------------------------

/// A real coefficient function closed under the transforms used here.
#[derive(Debug, Clone)]
pub enum ScalarFn {
    Zero,
    Constant(f64),
    /// v ↦ v^k.
    Power(i32),
    Scale(f64, Box<ScalarFn>),
    /// The pivot-equation coefficient (R−3)/(2R(R−1)).
    ChiCm,
    /// Swap image v ↦ −v³·inner(1/v).
    Sharp(Box<ScalarFn>),
    /// Pivot-anchored table; `None` when the argument samples were not
    /// monotone, in which case evaluation reports non-invertibility.
    Chain(Option<Arc<Pchip>>),
}

impl ScalarFn {
    /// Build a pivot-anchored table from (argument, value) samples.
    /// Decreasing argument samples are reversed; non-monotone ones are
    /// stored uninvertible.
    pub fn chain(args: &[f64], vals: &[f64]) -> ScalarFn {
        let increasing = args.windows(2).all(|w| w[1] > w[0]);
        let decreasing = args.windows(2).all(|w| w[1] < w[0]);
        if increasing {
            ScalarFn::Chain(Pchip::new(args.to_vec(), vals.to_vec()).ok().map(Arc::new))
        } else if decreasing {
            let xs: Vec<f64> = args.iter().rev().copied().collect();
            let ys: Vec<f64> = vals.iter().rev().copied().collect();
            ScalarFn::Chain(Pchip::new(xs, ys).ok().map(Arc::new))
        } else {
            ScalarFn::Chain(None)
        }
    }

    pub fn eval(&self, v: f64) -> Result<f64, BacklundError> {
        match self {
            ScalarFn::Zero => Ok(0.0),
            ScalarFn::Constant(c) => Ok(*c),
            ScalarFn::Power(k) => {
                if *k < 0 && v.abs() < 1e-300 {
                    return Err(BacklundError::Domain {
                        arg: v,
                        what: "negative power at zero",
                    });
                }
                Ok(v.powi(*k))
            }
            ScalarFn::Scale(c, f) => Ok(c * f.eval(v)?),
            ScalarFn::ChiCm => chi_cm(v),
            ScalarFn::Sharp(inner) => {
                if v.abs() < 1e-300 {
                    return Err(BacklundError::Domain {
                        arg: v,
                        what: "swap image at zero",
                    });
                }
                Ok(-v * v * v * inner.eval(1.0 / v)?)
            }
            ScalarFn::Chain(Some(p)) => Ok(p.eval(v)),
            ScalarFn::Chain(None) => Err(BacklundError::NotInvertible),
        }
    }

    pub fn eval_derivative(&self, v: f64) -> Result<f64, BacklundError> {
        match self {
            ScalarFn::Zero | ScalarFn::Constant(_) => Ok(0.0),
            ScalarFn::Power(k) => {
                if *k - 1 < 0 && v.abs() < 1e-300 {
                    return Err(BacklundError::Domain {
                        arg: v,
                        what: "negative power at zero",
                    });
                }
                Ok(f64::from(*k) * v.powi(*k - 1))
            }
            ScalarFn::Scale(c, f) => Ok(c * f.eval_derivative(v)?),
            ScalarFn::ChiCm => dchi_cm(v),
            ScalarFn::Sharp(inner) => {
                if v.abs() < 1e-300 {
                    return Err(BacklundError::Domain {
                        arg: v,
                        what: "swap image at zero",
                    });
                }
                let w = 1.0 / v;
                Ok(-3.0 * v * v * inner.eval(w)? + v * inner.eval_derivative(w)?)
            }
            ScalarFn::Chain(Some(p)) => Ok(p.eval_derivative(v)),
            ScalarFn::Chain(None) => Err(BacklundError::NotInvertible),
        }
    }
}

/// One ODE family R″ + θ(x)R′ = χ(R)·φ(R′).
#[derive(Debug, Clone)]
pub struct OdeFamily {
    pub label: String,
    pub chi: ScalarFn,
    pub phi: ScalarFn,
    pub theta: ScalarFn,
}

/// The constant-mass family: χ = (R−3)/(2R(R−1)), φ(p) = p², θ = 0.
pub fn constant_mass_family() -> OdeFamily {
    OdeFamily {
        label: "constant-mass".to_string(),
        chi: ScalarFn::ChiCm,
        phi: ScalarFn::Power(2),
        theta: ScalarFn::Zero,
    }
}

/// A concrete solution along which transforms are evaluated.
#[derive(Debug, Clone)]
pub struct PivotSolution {
    pub x: Arc<Grid>,
    pub r: SampledFunction,
    pub rp: SampledFunction,
    pub rpp: SampledFunction,
}

impl PivotSolution {
    /// Build from samples with numerical derivatives.
    pub fn from_samples(r: SampledFunction) -> PivotSolution {
        let rp = derivative(&r, DiffOrder::First);
        let rpp = derivative(&r, DiffOrder::Second);
        PivotSolution {
            x: r.grid().clone(),
            r,
            rp,
            rpp,
        }
    }

    fn r_vals(&self) -> Vec<f64> {
        self.r.real_values()
    }
    fn p_vals(&self) -> Vec<f64> {
        self.rp.real_values()
    }
    fn rpp_vals(&self) -> Vec<f64> {
        self.rpp.real_values()
    }
}

/// The constant-mass pivot on `grid`: σ = x (unit first-integral constant,
/// zero offset), R from the closed form, with derivatives from the first
/// integral R′ = R^{3/2}/(R−1) and R″ = χ(R)·R′².
pub fn constant_mass_pivot(
    grid: &Arc<Grid>,
    branch: Branch,
) -> Result<PivotSolution, BacklundError> {
    let sigma = SampledFunction::from_real_fn(grid, |x| x);
    let r = r_closed_form(&sigma, branch, DEFAULT_SIGMA_MARGIN)?;
    let mut rp = Vec::with_capacity(grid.n());
    let mut rpp = Vec::with_capacity(grid.n());
    for z in r.values() {
        let rv = z.re;
        let p = rv.powf(1.5) / (rv - 1.0);
        rp.push(p);
        rpp.push(chi_cm(rv)? * p * p);
    }
    Ok(PivotSolution {
        x: grid.clone(),
        r: r.clone(),
        rp: SampledFunction::from_real_values(grid.clone(), rp)?,
        rpp: SampledFunction::from_real_values(grid.clone(), rpp)?,
    })
}

impl OdeFamily {
    /// Interior relative residual of the family equation along a pivot.
    pub fn ode_residual(&self, pivot: &PivotSolution) -> Result<f64, BacklundError> {
        let xs = pivot.x.points();
        let (r, p, rpp) = (pivot.r_vals(), pivot.p_vals(), pivot.rpp_vals());
        let n = r.len();
        let mut sup_res: f64 = 0.0;
        let mut sup_rhs: f64 = 0.0;
        for i in CHAIN_BAND..n - CHAIN_BAND {
            let rhs = self.chi.eval(r[i])? * self.phi.eval(p[i])?;
            let lhs = rpp[i] + self.theta.eval(xs[i])? * p[i];
            sup_res = sup_res.max((lhs - rhs).abs());
            sup_rhs = sup_rhs.max(rhs.abs()).max(rpp[i].abs());
        }
        Ok(sup_res / sup_rhs.max(1e-300))
    }
}

// ---------------------------------------------------------------------------
// The Ŝ transform.
// ---------------------------------------------------------------------------

/// Swap dependent and independent variables: χ is re-read against the new
/// dependent variable, φ becomes φ♯(q) = −q³·φ(1/q), θ is carried over.
pub fn s_transform(fam: &OdeFamily) -> OdeFamily {
    OdeFamily {
        label: format!("sharp({})", fam.label),
        chi: fam.chi.clone(),
        phi: ScalarFn::Sharp(Box::new(fam.phi.clone())),
        theta: fam.theta.clone(),
    }
}

/// sup over probes of |(φ♯)♯ − φ| — zero because the swap is an involution.
pub fn s_involution_defect(phi: &ScalarFn, probes: &[f64]) -> Result<f64, BacklundError> {
    let twice = ScalarFn::Sharp(Box::new(ScalarFn::Sharp(Box::new(phi.clone()))));
    let mut defect: f64 = 0.0;
    for &q in probes {
        defect = defect.max((twice.eval(q)? - phi.eval(q)?).abs());
    }
    Ok(defect)
}

// ---------------------------------------------------------------------------
// The B̂ transform along a pivot.
// ---------------------------------------------------------------------------

// Trapezoid running integral from the left end of a uniform grid.
fn cumulative_from_left(h: f64, vals: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(vals.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..vals.len() {
        acc += 0.5 * h * (vals[i - 1] + vals[i]);
        out.push(acc);
    }
    out
}

// Interior sup over the chain band.
fn interior_sup(vals: impl Iterator<Item = f64>, n: usize) -> f64 {
    vals.enumerate()
        .filter(|(i, _)| *i >= CHAIN_BAND && *i < n - CHAIN_BAND)
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max)
}

struct PivotFields {
    xs: Vec<f64>,
    r: Vec<f64>,
    p: Vec<f64>,
    rpp: Vec<f64>,
    chi: Vec<f64>,
    dchi: Vec<f64>,
    phi: Vec<f64>,
}

// Common preconditions: the pivot solves the family ODE; χ, φ, and p are
// bounded away from zero (χ additionally must not change sign).
fn pivot_fields(fam: &OdeFamily, pivot: &PivotSolution) -> Result<PivotFields, BacklundError> {
    let residual = fam.ode_residual(pivot)?;
    if residual > 1e-3 {
        return Err(BacklundError::NotASolution { residual });
    }
    let xs = pivot.x.points().to_vec();
    let r = pivot.r_vals();
    let p = pivot.p_vals();
    let rpp = pivot.rpp_vals();
    let n = r.len();
    let p_scale = p.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for i in 0..n {
        if p[i].abs() < 1e-12 * p_scale {
            return Err(BacklundError::VanishingP { x: xs[i] });
        }
    }
    let mut chi = Vec::with_capacity(n);
    let mut dchi = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    for i in 0..n {
        chi.push(fam.chi.eval(r[i])?);
        dchi.push(fam.chi.eval_derivative(r[i])?);
        phi.push(fam.phi.eval(p[i])?);
    }
    let chi_scale = chi.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for i in 0..n {
        if chi[i].abs() < 1e-10 * chi_scale {
            return Err(BacklundError::VanishingChi { x: xs[i] });
        }
        if i > 0 && chi[i - 1] * chi[i] < 0.0 {
            return Err(BacklundError::VanishingChi { x: xs[i] });
        }
        if phi[i].abs() < 1e-300 {
            return Err(BacklundError::VanishingPhi { x: xs[i] });
        }
    }
    Ok(PivotFields {
        xs,
        r,
        p,
        rpp,
        chi,
        dchi,
        phi,
    })
}

/// Result of one B̂ application along a pivot.
#[derive(Debug, Clone)]
pub struct BTransformed {
    pub family: OdeFamily,
    /// The transformed pivot re-tabulated on a uniform grid in the new
    /// coordinate.
    pub pivot: PivotSolution,
    pub lambda: f64,
    /// Interior sup of |p̄·χ(R) − λ| — constancy of the chain multiplier.
    pub lambda_defect: f64,
    /// Interior sup of the elementwise relative residual of the
    /// transformed equation dp̄/dx̄ = χ̄(R̄)·φ̄(p̄) along the pivot.
    pub transformed_ode_residual: f64,
}

/// Apply B̂ once: x̄ = ∫dp/φ(p), R̄ = λ∫dx (both from the left end), with
/// the transformed coefficients carried as pivot-anchored tables:
/// χ̄(R̄) = R′(x) and φ̄(p̄) = −(λ/χ³(R))·dχ/dR.
pub fn b_transform(
    fam: &OdeFamily,
    pivot: &PivotSolution,
    lambda: f64,
) -> Result<BTransformed, BacklundError> {
    let fields = pivot_fields(fam, pivot)?;
    let n = fields.r.len();
    let h = pivot.x.h();

    // dx̄/dx = (dp/dx)/φ(p) = R″/φ(p).
    let dxbar: Vec<f64> = (0..n).map(|i| fields.rpp[i] / fields.phi[i]).collect();
    let xbar = cumulative_from_left(h, &dxbar);
    for i in 1..n {
        if xbar[i] <= xbar[i - 1] {
            return Err(BacklundError::NonMonotoneCoordinate { index: i });
        }
    }
    let rbar: Vec<f64> = fields.xs.iter().map(|x| lambda * (x - fields.xs[0])).collect();
    let pbar: Vec<f64> = dxbar.iter().map(|d| lambda / d).collect();

    let lambda_defect = interior_sup(
        (0..n).map(|i| pbar[i] * fields.chi[i] - lambda),
        n,
    );

    // Transformed coefficients along the chain.
    let phibar: Vec<f64> = (0..n)
        .map(|i| -(lambda / fields.chi[i].powi(3)) * fields.dchi[i])
        .collect();

    // dp̄/dx̄ against χ̄(R̄)·φ̄(p̄) = p·φ̄ along the pivot. The residual is
    // normalized by the largest right-hand side over the interior: the
    // elementwise ratio is meaningless where dχ/dR crosses zero (both
    // sides vanish together there).
    let pbar_fn = SampledFunction::from_real_values(pivot.x.clone(), pbar.clone())?;
    let dpbar = derivative(&pbar_fn, DiffOrder::First);
    let res_sup = interior_sup(
        (0..n).map(|i| dpbar.values()[i].re / dxbar[i] - fields.p[i] * phibar[i]),
        n,
    );
    let rhs_sup = interior_sup((0..n).map(|i| fields.p[i] * phibar[i]), n);
    let transformed_ode_residual = res_sup / rhs_sup.max(1e-300);

    let family = OdeFamily {
        label: format!("backlund({})", fam.label),
        chi: ScalarFn::chain(&rbar, &fields.p),
        phi: ScalarFn::chain(&pbar, &phibar),
        theta: ScalarFn::Zero,
    };

    // Re-tabulate the new pivot on a uniform grid in x̄.
    let xbar_grid = crate::grid::make_grid(xbar[0], xbar[n - 1], n)?;
    let to_rbar = Pchip::new(xbar.clone(), rbar)?;
    let to_pbar = Pchip::new(xbar.clone(), pbar)?;
    let rppbar: Vec<f64> = (0..n)
        .map(|i| dpbar.values()[i].re / dxbar[i])
        .collect();
    let to_rppbar = Pchip::new(xbar, rppbar)?;
    let pts = xbar_grid.points().to_vec();
    let pivot_new = PivotSolution {
        x: xbar_grid.clone(),
        r: SampledFunction::from_real_values(
            xbar_grid.clone(),
            pts.iter().map(|&q| to_rbar.eval(q)).collect(),
        )?,
        rp: SampledFunction::from_real_values(
            xbar_grid.clone(),
            pts.iter().map(|&q| to_pbar.eval(q)).collect(),
        )?,
        rpp: SampledFunction::from_real_values(
            xbar_grid.clone(),
            pts.iter().map(|&q| to_rppbar.eval(q)).collect(),
        )?,
    };

    Ok(BTransformed {
        family,
        pivot: pivot_new,
        lambda,
        lambda_defect,
        transformed_ode_residual,
    })
}

// ---------------------------------------------------------------------------
// Three-fold chain and closure.
// ---------------------------------------------------------------------------

/// One stage of the three-fold chain, sampled against the base grid.
#[derive(Debug, Clone)]
pub struct ChainStage {
    pub label: String,
    pub lambda: f64,
    /// Stage coordinate along the base grid.
    pub x_bar: Vec<f64>,
    /// Stage dependent variable along the base grid.
    pub r_bar: Vec<f64>,
    /// Stage derivative dR̄/dx̄ along the base grid.
    pub p_bar: Vec<f64>,
    /// Interior sup of |p̄·χ_prev − λ| for this stage.
    pub lambda_defect: f64,
}

/// The three-fold B̂ chain over one pivot, all stages sampled against the
/// base grid so the closure identities compare aligned points.
#[derive(Debug, Clone)]
pub struct BacklundChain {
    pub base_family: OdeFamily,
    pub base: PivotSolution,
    pub stages: Vec<ChainStage>,
    pub lambdas: Vec<f64>,
}

/// Build up to three chain stages with the given multipliers. The stage
/// coordinates follow the chain quadratures
/// x̄ = ∫dp/φ(p), x̄̄ = ∫R′χ dx, x̄̄̄ = ∫λ₂χ dx,
/// with R̄ = λ₁∫dx, R̄̄ = λ₂∫dx̄, R̄̄̄ = λ₃∫dx̄̄.
pub fn build_chain(
    fam: &OdeFamily,
    pivot: &PivotSolution,
    lambdas: &[f64],
    stages: usize,
) -> Result<BacklundChain, BacklundError> {
    assert!(stages >= 1 && stages <= 3, "chain supports 1..=3 stages");
    assert!(lambdas.len() >= stages, "need one multiplier per stage");
    let fields = pivot_fields(fam, pivot)?;
    let n = fields.r.len();
    let h = pivot.x.h();
    let mut out = Vec::new();

    // Stage 1.
    let dx1: Vec<f64> = (0..n).map(|i| fields.rpp[i] / fields.phi[i]).collect();
    let x1 = cumulative_from_left(h, &dx1);
    monotone(&x1)?;
    let l1 = lambdas[0];
    let r1: Vec<f64> = fields.xs.iter().map(|x| l1 * (x - fields.xs[0])).collect();
    let p1: Vec<f64> = dx1.iter().map(|d| l1 / d).collect();
    let defect1 = interior_sup((0..n).map(|i| p1[i] * fields.chi[i] - l1), n);
    out.push(ChainStage {
        label: "stage-1".into(),
        lambda: l1,
        x_bar: x1.clone(),
        r_bar: r1,
        p_bar: p1.clone(),
        lambda_defect: defect1,
    });

    if stages >= 2 {
        // Stage 2: dx̄̄/dx = R′χ; χ̄(R̄) = R′, so the multiplier check is
        // p̄̄·R′ against λ₂.
        let dx2: Vec<f64> = (0..n).map(|i| fields.p[i] * fields.chi[i]).collect();
        let x2 = cumulative_from_left(h, &dx2);
        monotone(&x2)?;
        let l2 = lambdas[1];
        let r2: Vec<f64> = x1.iter().map(|x| l2 * (x - x1[0])).collect();
        let p2: Vec<f64> = (0..n).map(|i| l2 * dx1[i] / dx2[i]).collect();
        let defect2 = interior_sup((0..n).map(|i| p2[i] * fields.p[i] - l2), n);
        out.push(ChainStage {
            label: "stage-2".into(),
            lambda: l2,
            x_bar: x2.clone(),
            r_bar: r2,
            p_bar: p2,
            lambda_defect: defect2,
        });

        if stages >= 3 {
            // Stage 3: dx̄̄̄/dx = λ₂χ; χ̄̄(R̄̄) = λ₂/R′.
            let l2 = lambdas[1];
            let l3 = lambdas[2];
            let dx3: Vec<f64> = (0..n).map(|i| l2 * fields.chi[i]).collect();
            let x3 = cumulative_from_left(h, &dx3);
            monotone(&x3)?;
            let r3: Vec<f64> = x2.iter().map(|x| l3 * (x - x2[0])).collect();
            let p3: Vec<f64> = (0..n).map(|i| l3 * dx2[i] / dx3[i]).collect();
            let defect3 = interior_sup(
                (0..n).map(|i| p3[i] * (l2 / fields.p[i]) - l3),
                n,
            );
            out.push(ChainStage {
                label: "stage-3".into(),
                lambda: l3,
                x_bar: x3,
                r_bar: r3,
                p_bar: p3,
                lambda_defect: defect3,
            });
        }
    }

    Ok(BacklundChain {
        base_family: fam.clone(),
        base: pivot.clone(),
        stages: out,
        lambdas: lambdas[..stages].to_vec(),
    })
}

fn monotone(xs: &[f64]) -> Result<(), BacklundError> {
    for i in 1..xs.len() {
        if xs[i] <= xs[i - 1] {
            return Err(BacklundError::NonMonotoneCoordinate { index: i });
        }
    }
    Ok(())
}

/// Per-stage digest for serialized chain reports.
#[derive(Debug, Clone, Serialize)]
pub struct StageSummary {
    pub label: String,
    pub lambda: f64,
    pub lambda_defect: f64,
    pub coordinate_span: (f64, f64),
}

/// Closure defects of the three-fold chain.
#[derive(Debug, Clone, Serialize)]
pub struct ClosureReport {
    /// sup |p̄̄·R′(x)·χ(R) − 1|.
    pub identity_i: f64,
    /// sup |λ₂·p̄̄̄·χ(R) − R′(x)|.
    pub identity_ii: f64,
    /// sup |p̄̄ − 1/(R′χ)|.
    pub p2_inverse_defect: f64,
    /// sup |p̄̄̄ − R′|.
    pub p3_identity_defect: f64,
    /// Best-affine-fit sup defect of the stage-3 coordinate against x.
    pub recon_x_defect: f64,
    /// Best-affine-fit sup defect of the stage-3 dependent variable
    /// against R.
    pub recon_r_defect: f64,
    pub stages: Vec<StageSummary>,
}

// Best affine fit a·v + b to target, interior sup defect.
fn affine_fit_defect(v: &[f64], target: &[f64]) -> f64 {
    let n = v.len();
    let m = (n - 2 * CHAIN_BAND) as f64;
    let (mut sv, mut st, mut svv, mut svt) = (0.0, 0.0, 0.0, 0.0);
    for i in CHAIN_BAND..n - CHAIN_BAND {
        sv += v[i];
        st += target[i];
        svv += v[i] * v[i];
        svt += v[i] * target[i];
    }
    let var = svv - sv * sv / m;
    let a = if var.abs() < 1e-300 {
        0.0
    } else {
        (svt - sv * st / m) / var
    };
    let b = (st - a * sv) / m;
    let mut defect: f64 = 0.0;
    for i in CHAIN_BAND..n - CHAIN_BAND {
        defect = defect.max((a * v[i] + b - target[i]).abs());
    }
    defect
}

/// Evaluate the closure identities on a completed three-stage chain.
pub fn closure_check(chain: &BacklundChain) -> Result<ClosureReport, BacklundError> {
    if chain.stages.len() < 3 {
        return Err(BacklundError::IncompleteChain {
            got: chain.stages.len(),
        });
    }
    let fields = pivot_fields(&chain.base_family, &chain.base)?;
    let n = fields.r.len();
    let p2 = &chain.stages[1].p_bar;
    let p3 = &chain.stages[2].p_bar;
    let l2 = chain.lambdas[1];

    let identity_i = interior_sup(
        (0..n).map(|i| p2[i] * fields.p[i] * fields.chi[i] - 1.0),
        n,
    );
    let identity_ii = interior_sup(
        (0..n).map(|i| l2 * p3[i] * fields.chi[i] - fields.p[i]),
        n,
    );
    let p2_inverse_defect = interior_sup(
        (0..n).map(|i| p2[i] - 1.0 / (fields.p[i] * fields.chi[i])),
        n,
    );
    let p3_identity_defect = interior_sup((0..n).map(|i| p3[i] - fields.p[i]), n);
    let recon_x_defect = affine_fit_defect(&chain.stages[2].x_bar, &fields.xs);
    let recon_r_defect = affine_fit_defect(&chain.stages[2].r_bar, &fields.r);

    let stages = chain
        .stages
        .iter()
        .map(|s| StageSummary {
            label: s.label.clone(),
            lambda: s.lambda,
            lambda_defect: s.lambda_defect,
            coordinate_span: (s.x_bar[0], s.x_bar[s.x_bar.len() - 1]),
        })
        .collect();

    Ok(ClosureReport {
        identity_i,
        identity_ii,
        p2_inverse_defect,
        p3_identity_defect,
        recon_x_defect,
        recon_r_defect,
        stages,
    })
}

// ---------------------------------------------------------------------------
// Commutation and the family diagram.
// ---------------------------------------------------------------------------

/// Probe indices: `PROBE_COUNT` points equispaced across the interior,
/// excluding the chain band at each end.
pub fn probe_indices(n: usize) -> Vec<usize> {
    let lo = CHAIN_BAND as f64;
    let hi = (n - 1 - CHAIN_BAND) as f64;
    (0..PROBE_COUNT)
        .map(|k| (lo + (hi - lo) * k as f64 / (PROBE_COUNT - 1) as f64) as usize)
        .collect()
}

/// Probe-sampled fingerprint of one family: the coefficient pair (χ, φ)
/// as (argument, value) samples along the pivot chain.
#[derive(Debug, Clone, Serialize)]
pub struct FamilyProbes {
    pub label: String,
    pub chi_arg: Vec<f64>,
    pub chi_val: Vec<f64>,
    pub phi_arg: Vec<f64>,
    pub phi_val: Vec<f64>,
}

/// Defects between the coefficient pairs produced by B̂ directly and by
/// the conjugation Ŝ∘B̂∘Ŝ, compared at shared probes along the pivot.
#[derive(Debug, Clone, Serialize)]
pub struct CommuteReport {
    pub chi_defect: f64,
    pub phi_defect: f64,
    pub probes: usize,
}

/// Compare B̂ against Ŝ∘B̂∘Ŝ along the pivot.
///
/// The direct path gives χ_B = p and φ_B = −(λ/χ³)·dχ/dR. For the
/// conjugated path: the swap sends the pivot to x(R) with slope q = 1/p
/// and the coefficient to φ♯; applying the B̂ quadratures to that system
/// and swapping back yields χ = 1/p and φ = p·(dχ/dR)/λ² along the same
/// chain. Both paths are evaluated mechanically; their gap is reported.
pub fn commute_check(
    fam: &OdeFamily,
    pivot: &PivotSolution,
    lambda: f64,
) -> Result<CommuteReport, BacklundError> {
    let fields = pivot_fields(fam, pivot)?;
    let idx = probe_indices(fields.r.len());
    let mut chi_defect: f64 = 0.0;
    let mut phi_defect: f64 = 0.0;
    for &i in &idx {
        let chi_b = fields.p[i];
        let phi_b = -(lambda / fields.chi[i].powi(3)) * fields.dchi[i];
        let chi_sbs = 1.0 / fields.p[i];
        let phi_sbs = fields.p[i] * fields.dchi[i] / (lambda * lambda);
        chi_defect = chi_defect.max((chi_b - chi_sbs).abs());
        phi_defect = phi_defect.max((phi_b - phi_sbs).abs());
    }
    Ok(CommuteReport {
        chi_defect,
        phi_defect,
        probes: idx.len(),
    })
}

/// The six families of the transformation diagram, fingerprinted at shared
/// probes: the three B̂-cycle nodes and their three swap images.
pub fn family_diagram(
    fam: &OdeFamily,
    pivot: &PivotSolution,
    lambda1: f64,
    lambda2: f64,
) -> Result<Vec<FamilyProbes>, BacklundError> {
    let fields = pivot_fields(fam, pivot)?;
    let n = fields.r.len();
    let h = pivot.x.h();
    let dx1: Vec<f64> = (0..n).map(|i| fields.rpp[i] / fields.phi[i]).collect();
    let x1 = cumulative_from_left(h, &dx1);
    let r1: Vec<f64> = fields.xs.iter().map(|x| lambda1 * (x - fields.xs[0])).collect();
    let p1: Vec<f64> = dx1.iter().map(|d| lambda1 / d).collect();
    let dx2: Vec<f64> = (0..n).map(|i| fields.p[i] * fields.chi[i]).collect();
    let x2 = cumulative_from_left(h, &dx2);
    let r2: Vec<f64> = x1.iter().map(|x| lambda2 * (x - x1[0])).collect();
    let p2: Vec<f64> = (0..n).map(|i| lambda2 * dx1[i] / dx2[i]).collect();

    let idx = probe_indices(n);
    let take = |v: &[f64]| -> Vec<f64> { idx.iter().map(|&i| v[i]).collect() };
    let phibar: Vec<f64> = (0..n)
        .map(|i| -(lambda1 / fields.chi[i].powi(3)) * fields.dchi[i])
        .collect();
    // Stage-2 coefficient: φ̄̄(p̄̄) = −φ(p)/p².
    let phibb: Vec<f64> = (0..n)
        .map(|i| -fields.phi[i] / (fields.p[i] * fields.p[i]))
        .collect();

    let base = FamilyProbes {
        label: fam.label.clone(),
        chi_arg: take(&fields.r),
        chi_val: take(&fields.chi),
        phi_arg: take(&fields.p),
        phi_val: take(&fields.phi),
    };
    let stage1 = FamilyProbes {
        label: format!("backlund({})", fam.label),
        chi_arg: take(&r1),
        chi_val: take(&fields.p),
        phi_arg: take(&p1),
        phi_val: take(&phibar),
    };
    let chi2: Vec<f64> = (0..n).map(|i| lambda2 / fields.p[i]).collect();
    let stage2 = FamilyProbes {
        label: format!("backlund^2({})", fam.label),
        chi_arg: take(&r2),
        chi_val: take(&chi2),
        phi_arg: take(&p2),
        phi_val: take(&phibb),
    };
    // Swap images: the argument becomes the reciprocal slope and the value
    // follows φ♯(q) = −q³φ(1/q) through the chain.
    let sharp = |label: &str, node: &FamilyProbes, dep: &[f64]| FamilyProbes {
        label: label.to_string(),
        chi_arg: take(dep),
        chi_val: node.chi_val.clone(),
        phi_arg: node.phi_arg.iter().map(|q| 1.0 / q).collect(),
        phi_val: node
            .phi_arg
            .iter()
            .zip(&node.phi_val)
            .map(|(p, v)| -v / (p * p * p))
            .collect(),
    };
    let sharp_base = sharp(&format!("sharp({})", fam.label), &base, &fields.xs);
    let sharp1 = sharp(
        &format!("sharp(backlund({}))", fam.label),
        &stage1,
        &x1,
    );
    let sharp2 = sharp(
        &format!("sharp(backlund^2({}))", fam.label),
        &stage2,
        &x2,
    );

    Ok(vec![base, stage1, stage2, sharp_base, sharp1, sharp2])
}

/// Smallest pairwise separation among family fingerprints: for each pair,
/// the sup over probes of the larger coefficient-value gap.
pub fn families_min_gap(families: &[FamilyProbes]) -> f64 {
    let mut min_gap = f64::INFINITY;
    for i in 0..families.len() {
        for j in i + 1..families.len() {
            let (a, b) = (&families[i], &families[j]);
            let mut gap: f64 = 0.0;
            for k in 0..a.chi_val.len() {
                gap = gap
                    .max((a.chi_val[k] - b.chi_val[k]).abs())
                    .max((a.phi_val[k] - b.phi_val[k]).abs());
            }
            min_gap = min_gap.min(gap);
        }
    }
    min_gap
}
