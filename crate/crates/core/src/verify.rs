//! Numerical verdicts: intertwining residuals, Hermiticity classification,
//! spectra, similarity-operator orthogonality, conservation under
//! Crank–Nicolson evolution, and the factorization / decomposition /
//! similarity identities of the coordinate-transformed construction.
//!
//! Conventions:
//!
//! * residual norms are interior Frobenius norms excluding
//!   [`INTERIOR_BAND`] rows and columns per boundary;
//! * relative residuals divide by the product of the two operand norms
//!   (for `ηH − H†η` the operands are `η` and `H`; for the two-sided
//!   identities they are the two assembled sides);
//! * the conservation functional is `Q(t) = Σ_i conj(χ_i)·(η̃Ψ₁)_i·h` with
//!   `χ(0) = Ψ₂(0) reversed in x` and both fields stepped by the *same*
//!   Crank–Nicolson propagator. Writing Ψ₂(t) for the flip of χ(t), the
//!   recorded quantity is `∫Ψ₂*(−x)·η̃Ψ₁ dx` and its time derivative is
//!   `i⟨Ψ₂, (η̃𝓗 − 𝓗†η̃)Ψ₁⟩`, so constancy of `Q` is exactly the
//!   intertwining statement.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{
    derivative, DiffOrder, GridError, OperatorMatrix, SampledFunction,
};
use crate::linalg::{interior_eigenvalues, BandedLu, LinalgError};

/// Rows and columns per boundary excluded from residual norms: one-sided
/// stencils contaminate two rows at each end after one operator product.
pub const INTERIOR_BAND: usize = 2;

/// Errors from verification runs.
#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("time step must be positive, got {dt}")]
    InvalidTimeStep { dt: f64 },
    #[error("map factor R touches a singular value near x = {x} (R = {value})")]
    SingularR { x: f64, value: f64 },
    #[error("map factor R must be positive, got R({x}) = {value}")]
    NonPositiveR { x: f64, value: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// One named residual: absolute and operand-normalized interior norms.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub name: String,
    pub absolute: f64,
    pub relative: f64,
    pub grid_n: usize,
    pub interior_band: usize,
}

impl ResidualReport {
    fn new(name: &str, diff: &OperatorMatrix, norm_a: f64, norm_b: f64) -> Self {
        let absolute = diff.interior_frobenius(INTERIOR_BAND);
        ResidualReport {
            name: name.to_string(),
            absolute,
            relative: absolute / (norm_a * norm_b).max(1e-300),
            grid_n: diff.n(),
            interior_band: INTERIOR_BAND,
        }
    }
}

/// Eigenvalue digest of one operator (interior block).
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    /// Interior eigenvalues sorted by real part, then imaginary part.
    pub eigenvalues: Vec<Complex64>,
    /// max |Im λ| — zero for a real spectrum.
    pub reality_max_imag: f64,
    /// Hausdorff distance between the spectrum and its complex conjugate —
    /// zero when eigenvalues are real or occur in conjugate pairs.
    pub conjugate_pair_defect: f64,
}

/// Time series of the conserved similarity integral.
#[derive(Debug, Clone, Serialize)]
pub struct ContinuityRecord {
    pub times: Vec<f64>,
    /// ∫Ψ₂*(−x)·η̃Ψ₁ dx at each step.
    pub rho_eta_integral: Vec<Complex64>,
}

impl ContinuityRecord {
    /// Largest relative excursion of the integral from its initial value.
    pub fn relative_drift(&self) -> f64 {
        let q0 = self.rho_eta_integral[0];
        let scale = q0.norm().max(1e-300);
        self.rho_eta_integral
            .iter()
            .map(|q| (q - q0).norm() / scale)
            .fold(0.0, f64::max)
    }
}

/// Hermiticity classification of a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HermiticityClass {
    Hermitian,
    AntiHermitian,
    Neither,
}

/// Interior Frobenius norm of ηH − H†η, absolute and relative to
/// ‖η‖·‖H‖.
pub fn intertwining_residual(
    eta: &OperatorMatrix,
    h: &OperatorMatrix,
) -> Result<ResidualReport, VerifyError> {
    let diff = eta.matmul(h)?.sub(&h.adjoint().matmul(eta)?)?;
    let norm_eta = eta.interior_frobenius(INTERIOR_BAND);
    let norm_h = h.interior_frobenius(INTERIOR_BAND);
    Ok(ResidualReport::new("intertwining", &diff, norm_eta, norm_h))
}

/// Classify an operator by its smaller adjoint defect; `Neither` when both
/// defects exceed 1e−6 of the operator norm.
pub fn hermiticity_class(o: &OperatorMatrix) -> (HermiticityClass, f64) {
    let herm = o.hermitian_defect(INTERIOR_BAND);
    let anti = o.anti_hermitian_defect(INTERIOR_BAND);
    let scale = o.interior_frobenius(INTERIOR_BAND).max(1e-300);
    let tol = 1e-6 * scale;
    if herm <= anti && herm <= tol {
        (HermiticityClass::Hermitian, herm)
    } else if anti < herm && anti <= tol {
        (HermiticityClass::AntiHermitian, anti)
    } else {
        (HermiticityClass::Neither, herm.min(anti))
    }
}

/// Full interior eigendecomposition digest.
pub fn spectrum(h: &OperatorMatrix) -> Result<SpectralReport, VerifyError> {
    let eigenvalues = interior_eigenvalues(h)?;
    let reality_max_imag = eigenvalues.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let mut defect: f64 = 0.0;
    for a in &eigenvalues {
        let mut nearest = f64::INFINITY;
        for b in &eigenvalues {
            nearest = nearest.min((a - b.conj()).norm());
        }
        defect = defect.max(nearest);
    }
    Ok(SpectralReport {
        eigenvalues,
        reality_max_imag,
        conjugate_pair_defect: defect,
    })
}

/// Biorthogonality functional (E₁ − E₂*)·∫ψ₂*(−x)·(η̃ψ₁)(x) dx.
pub fn eta_orthogonality(
    psi1: &SampledFunction,
    psi2: &SampledFunction,
    eta: &OperatorMatrix,
    e1: Complex64,
    e2: Complex64,
) -> Result<Complex64, VerifyError> {
    let flipped = psi2.parity_flip()?;
    let eta_psi1 = SampledFunction::from_values(eta.grid().clone(), eta.matvec(psi1.values()))?;
    let integrand = flipped.zip_with(&eta_psi1, |chi, ep| chi.conj() * ep)?;
    let q = crate::grid::integrate(&integrand);
    Ok((e1 - e2.conj()) * q)
}

/// Crank–Nicolson propagation of both fields with the similarity integral
/// recorded at every step (`steps + 1` samples including t = 0).
pub fn evolve_conservation(
    h: &OperatorMatrix,
    eta: &OperatorMatrix,
    psi1_0: &SampledFunction,
    psi2_0: &SampledFunction,
    dt: f64,
    steps: usize,
) -> Result<ContinuityRecord, VerifyError> {
    if !(dt > 0.0) {
        return Err(VerifyError::InvalidTimeStep { dt });
    }
    let n = h.n();
    let h_step = h.grid().h();
    let c = Complex64::new(0.0, dt / 2.0);
    let identity = OperatorMatrix::identity(h.grid());
    let m_plus = identity.add(&h.scale(c))?;
    let m_minus = identity.sub(&h.scale(c))?;
    let lu = BandedLu::factor(&m_plus)?;

    let mut psi1 = psi1_0.values().to_vec();
    let mut chi = psi2_0.parity_flip()?.values().to_vec();

    let record = |psi1: &[Complex64], chi: &[Complex64]| -> Complex64 {
        let eta_psi = eta.matvec(psi1);
        let mut q = Complex64::new(0.0, 0.0);
        for i in 0..n {
            q += chi[i].conj() * eta_psi[i];
        }
        q * h_step
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    times.push(0.0);
    values.push(record(&psi1, &chi));
    for k in 1..=steps {
        psi1 = lu.solve(&m_minus.matvec(&psi1));
        chi = lu.solve(&m_minus.matvec(&chi));
        times.push(k as f64 * dt);
        values.push(record(&psi1, &chi));
    }
    Ok(ContinuityRecord {
        times,
        rho_eta_integral: values,
    })
}

fn check_r_regular(r: &SampledFunction) -> Result<(), VerifyError> {
    let xs = r.grid().points();
    for (i, z) in r.values().iter().enumerate() {
        if z.norm() < 1e-9 || (z - Complex64::new(1.0, 0.0)).norm() < 1e-9 {
            return Err(VerifyError::SingularR {
                x: xs[i],
                value: z.re,
            });
        }
    }
    Ok(())
}

fn check_r_positive(r: &SampledFunction) -> Result<(), VerifyError> {
    let xs = r.grid().points();
    for (i, z) in r.values().iter().enumerate() {
        if z.re <= 0.0 {
            return Err(VerifyError::NonPositiveR {
                x: xs[i],
                value: z.re,
            });
        }
    }
    Ok(())
}

/// Residual of the factorized form: η̃₊ − (η̃₋† − c)(η̃₋ − c) with
/// c = (U/2)(ln R)′ as a diagonal. `eta_plus` is the reference product-mode
/// operator built from the mapped coefficients; `eta_minus_dag` should be
/// the exact matrix adjoint of `eta_minus`.
pub fn factorization_residual(
    eta_plus: &OperatorMatrix,
    eta_minus: &OperatorMatrix,
    eta_minus_dag: &OperatorMatrix,
    u: &SampledFunction,
    r: &SampledFunction,
) -> Result<ResidualReport, VerifyError> {
    check_r_regular(r)?;
    let ln_r = r.map(|z| Complex64::new(z.re.ln(), 0.0));
    let c = derivative(&ln_r, DiffOrder::First).zip_with(u, |dl, u| 0.5 * u * dl)?;
    let cd = OperatorMatrix::diagonal(&c);
    let left = eta_minus_dag.sub(&cd)?;
    let right = eta_minus.sub(&cd)?;
    let factored = left.matmul(&right)?;
    let diff = eta_plus.sub(&factored)?;
    Ok(ResidualReport::new(
        "factorization",
        &diff,
        eta_plus.interior_frobenius(INTERIOR_BAND),
        factored.interior_frobenius(INTERIOR_BAND),
    ))
}

/// Residual of the decomposition form: η̃₊ − [η̃₋†η̃₋ + U²R″/(2R)
/// + UU′R′/R − ((R−3)/(R−1))·(UR′/(2R))²].
pub fn decomposition_residual(
    eta_plus: &OperatorMatrix,
    eta_minus: &OperatorMatrix,
    eta_minus_dag: &OperatorMatrix,
    u: &SampledFunction,
    r: &SampledFunction,
) -> Result<ResidualReport, VerifyError> {
    check_r_regular(r)?;
    let rp = derivative(r, DiffOrder::First);
    let rpp = derivative(r, DiffOrder::Second);
    let up = derivative(u, DiffOrder::First);
    let n = u.len();
    let mut scalar = Vec::with_capacity(n);
    for i in 0..n {
        let (uv, uvp) = (u.values()[i], up.values()[i]);
        let (rv, rvp, rvpp) = (r.values()[i], rp.values()[i], rpp.values()[i]);
        let quarter = uv * rvp / (2.0 * rv);
        let s = uv * uv * rvpp / (2.0 * rv) + uv * uvp * rvp / rv
            - ((rv - 3.0) / (rv - 1.0)) * quarter * quarter;
        scalar.push(s);
    }
    let scalar = SampledFunction::from_values(u.grid().clone(), scalar)?;
    let decomposed = eta_minus_dag
        .matmul(eta_minus)?
        .add(&OperatorMatrix::diagonal(&scalar))?;
    let diff = eta_plus.sub(&decomposed)?;
    Ok(ResidualReport::new(
        "decomposition",
        &diff,
        eta_plus.interior_frobenius(INTERIOR_BAND),
        decomposed.interior_frobenius(INTERIOR_BAND),
    ))
}

/// Residual of the similarity form: ζ̃ − diag(√R)·η̃₋·diag(√R)⁻¹.
pub fn similarity_residual(
    zeta: &OperatorMatrix,
    eta_minus: &OperatorMatrix,
    r: &SampledFunction,
) -> Result<ResidualReport, VerifyError> {
    check_r_positive(r)?;
    let sqrt_r = r.map(|z| Complex64::new(z.re.sqrt(), 0.0));
    let inv_sqrt_r = r.map(|z| Complex64::new(1.0 / z.re.sqrt(), 0.0));
    let conjugated = OperatorMatrix::diagonal(&sqrt_r)
        .matmul(eta_minus)?
        .matmul(&OperatorMatrix::diagonal(&inv_sqrt_r))?;
    let diff = zeta.sub(&conjugated)?;
    Ok(ResidualReport::new(
        "similarity",
        &diff,
        conjugated.interior_frobenius(INTERIOR_BAND),
        zeta.interior_frobenius(INTERIOR_BAND),
    ))
}

/// Measured convergence order from residuals at successively finer spacings:
/// the smallest pairwise slope of log(residual) against log(h). Residuals at
/// roundoff (< 1e−12) report `infinity` — refinement below the noise floor
/// carries no order information.
pub fn refinement_order(spacings: &[f64], residuals: &[f64]) -> f64 {
    assert_eq!(spacings.len(), residuals.len());
    assert!(spacings.len() >= 2, "need at least two refinement levels");
    if residuals.iter().any(|&r| r < 1e-12) {
        return f64::INFINITY;
    }
    let mut order = f64::INFINITY;
    for i in 0..spacings.len() - 1 {
        let slope = (residuals[i] / residuals[i + 1]).ln() / (spacings[i] / spacings[i + 1]).ln();
        order = order.min(slope);
    }
    order
}
