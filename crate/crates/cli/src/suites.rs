//! The verification suites. Each suite builds the operators it needs from
//! the shared scenario, measures the relevant identity, and reports every
//! number it produced together with a pass/fail verdict against its headline
//! tolerance. Runtime failures inside a suite (domain violations, singular
//! profiles) mark the suite failed with the error text — they are suite
//! outcomes, not configuration errors.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use pdmverify_core::backlund::{
    build_chain, closure_check, commute_check, constant_mass_family,
    constant_mass_pivot, families_min_gap, family_diagram, probe_indices,
    s_involution_defect,
};
use pdmverify_core::coordmap::{
    pivot_ode_residual, r_closed_form, r_from_big_f, Branch, CoordinateMap,
    Pchip, DEFAULT_SIGMA_MARGIN,
};
use pdmverify_core::grid::{Grid, OperatorMatrix, SampledFunction};
use pdmverify_core::linalg::interior_eigenpairs;
use pdmverify_core::operators::{
    apply_tau, build_eta_minus, build_eta_plus, build_modified_h, build_zeta,
    EtaPlusMode,
};
use pdmverify_core::verify::{
    decomposition_residual, eta_orthogonality, evolve_conservation,
    factorization_residual, hermiticity_class, intertwining_residual,
    similarity_residual, spectrum, HermiticityClass, INTERIOR_BAND,
};

use crate::config::Suite;
use crate::report::SuiteReport;
use crate::scenario::Scenario;

/// R·S must multiply back to one at full double precision.
const RECIPROCAL_TOL: f64 = 1e-12;
/// The two closed-form map branches multiply to unity identically.
const BRANCH_PRODUCT_TOL: f64 = 1e-9;
/// ξ → x → ξ interpolation round trip.
const ROUND_TRIP_TOL: f64 = 1e-5;
/// Third chain stage reproduces the pivot derivative algebraically.
const P3_TOL: f64 = 1e-10;
/// Applying the swap twice is the identity, up to roundoff.
const INVOLUTION_TOL: f64 = 1e-10;
/// The six transformed families must be pairwise distinct by at least this
/// probe-table gap.
const FAMILY_GAP_MIN: f64 = 1e-3;

type Measurements = BTreeMap<String, f64>;
type Outcome = Result<(Measurements, bool, Option<String>), String>;

fn se(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Run one suite against the scenario at the given headline tolerance.
pub fn run(s: &Scenario, suite: Suite, tol: f64) -> SuiteReport {
    let outcome = match suite {
        Suite::BacklundClosure => backlund_closure(s, tol),
        Suite::Conservation => conservation(s, tol),
        Suite::Coordmap => coordmap(s, tol),
        Suite::Decomposition => decomposition(s, tol),
        Suite::Factorization => factorization(s, tol),
        Suite::Hermiticity => hermiticity(s, tol),
        Suite::IntertwineMinus => intertwine_minus(s, tol),
        Suite::IntertwinePlus => intertwine_plus(s, tol),
        Suite::Orthogonality => orthogonality(s, tol),
        Suite::Similarity => similarity(s, tol),
        Suite::Spectrum => spectrum_suite(s, tol),
        Suite::TauCheck => tau_check(s, tol),
    };
    match outcome {
        Ok((measurements, passed, note)) => SuiteReport {
            suite: suite.name(),
            passed,
            tolerance: tol,
            measurements,
            note,
        },
        Err(message) => SuiteReport::failure(suite, tol, message),
    }
}

fn build_h(s: &Scenario) -> Result<OperatorMatrix, String> {
    build_modified_h(&s.u, &s.a, &s.v_plus).map_err(se)
}

fn build_metric(s: &Scenario) -> Result<OperatorMatrix, String> {
    build_eta_plus(&s.u, &s.f_upper, &s.big_g, &s.a, EtaPlusMode::Product).map_err(se)
}

fn class_name(c: HermiticityClass) -> &'static str {
    match c {
        HermiticityClass::Hermitian => "hermitian",
        HermiticityClass::AntiHermitian => "anti-hermitian",
        HermiticityClass::Neither => "neither",
    }
}

// ---------------------------------------------------------------------------
// Operator-identity suites.
// ---------------------------------------------------------------------------

fn hermiticity(s: &Scenario, tol: f64) -> Outcome {
    let eta = build_metric(s)?;
    let eta_norm = eta.interior_frobenius(INTERIOR_BAND).max(1e-300);
    let eta_rel = eta.hermitian_defect(INTERIOR_BAND) / eta_norm;
    let (eta_class, _) = hermiticity_class(&eta);

    let h = build_h(s)?;
    let h_norm = h.interior_frobenius(INTERIOR_BAND).max(1e-300);
    let (h_class, _) = hermiticity_class(&h);

    let mut m = Measurements::new();
    m.insert("eta_plus_hermitian_defect".into(), eta_rel);
    m.insert(
        "h_hermitian_defect".into(),
        h.hermitian_defect(INTERIOR_BAND) / h_norm,
    );
    m.insert(
        "h_anti_hermitian_defect".into(),
        h.anti_hermitian_defect(INTERIOR_BAND) / h_norm,
    );
    let note = format!(
        "eta_plus is {}; h is {}",
        class_name(eta_class),
        class_name(h_class)
    );
    Ok((m, eta_rel <= tol, Some(note)))
}

fn intertwine_plus(s: &Scenario, tol: f64) -> Outcome {
    let eta = build_metric(s)?;
    let h = build_h(s)?;
    let rep = intertwining_residual(&eta, &h).map_err(se)?;
    let mut m = Measurements::new();
    m.insert("absolute".into(), rep.absolute);
    m.insert("relative".into(), rep.relative);
    Ok((m, rep.relative <= tol, None))
}

fn intertwine_minus(s: &Scenario, tol: f64) -> Outcome {
    let (eta, _) = build_eta_minus(&s.u, &s.f_lower, &s.small_g, &s.a).map_err(se)?;
    let h = build_modified_h(&s.u, &s.a, &s.v_minus).map_err(se)?;
    let rep = intertwining_residual(&eta, &h).map_err(se)?;
    let mut m = Measurements::new();
    m.insert("absolute".into(), rep.absolute);
    m.insert("relative".into(), rep.relative);
    Ok((m, rep.relative <= tol, None))
}

fn tau_check(s: &Scenario, tol: f64) -> Outcome {
    let h = build_h(s)?;
    let hadj = h.adjoint();
    let (x_min, x_max) = (s.grid.x_min(), s.grid.x_max());
    let span = x_max - x_min;
    let mid = 0.5 * (x_min + x_max);
    let smooth = SampledFunction::from_complex_fn(&s.grid, |x| {
        let t = (x - mid) / (0.15 * span);
        Complex64::new(-t * t, 4.0 * std::f64::consts::PI * (x - mid) / span).exp()
    });
    let rough = rough_probe(&s.grid);

    let smooth_defect = tau_defect(&h, &hadj, &s.alpha, smooth.values());
    let rough_defect = tau_defect(&h, &hadj, &s.alpha, &rough);

    let mut m = Measurements::new();
    m.insert("smooth_relative_defect".into(), smooth_defect);
    m.insert("rough_relative_defect".into(), rough_defect);
    let note = "gated on the smooth probe; the rough probe excites the \
                transpose's stencil-consistency error and is informational"
        .to_string();
    Ok((m, smooth_defect <= tol, Some(note)))
}

/// sup-relative interior difference between τ(Hv) and H†(τv).
fn tau_defect(
    h: &OperatorMatrix,
    hadj: &OperatorMatrix,
    alpha: &SampledFunction,
    v: &[Complex64],
) -> f64 {
    let left = apply_tau(alpha, &h.matvec(v));
    let right = hadj.matvec(&apply_tau(alpha, v));
    let n = left.len();
    let mut sup: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in INTERIOR_BAND..n - INTERIOR_BAND {
        sup = sup.max((left[i] - right[i]).norm());
        scale = scale.max(left[i].norm()).max(right[i].norm());
    }
    sup / scale.max(1e-300)
}

// Fixed-seed generator so repeated runs measure the identical probe and the
// report stays byte-reproducible.
fn rough_probe(grid: &Arc<Grid>) -> Vec<Complex64> {
    let mut state: u64 = 0x5DEECE66D;
    let mut next = move || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    (0..grid.n())
        .map(|_| Complex64::new(next(), next()))
        .collect()
}

// ---------------------------------------------------------------------------
// Spectral suites.
// ---------------------------------------------------------------------------

fn spectrum_suite(s: &Scenario, tol: f64) -> Outcome {
    let h = build_h(s)?;
    let rep = spectrum(&h).map_err(se)?;
    let mut m = Measurements::new();
    m.insert("conjugate_pair_defect".into(), rep.conjugate_pair_defect);
    m.insert("reality_max_imag".into(), rep.reality_max_imag);
    for (k, z) in rep.eigenvalues.iter().take(5).enumerate() {
        m.insert(format!("eigenvalue_{k}_re"), z.re);
        m.insert(format!("eigenvalue_{k}_im"), z.im);
    }
    Ok((m, rep.conjugate_pair_defect <= tol, None))
}

fn orthogonality(s: &Scenario, tol: f64) -> Outcome {
    if !s.grid.is_symmetric() {
        return Err("orthogonality needs a symmetric grid (x_min = -x_max): \
                    the pairing functional enters through a parity flip"
            .to_string());
    }
    let h = build_h(s)?;
    let (vals, vecs) = interior_eigenpairs(&h).map_err(se)?;
    if vals.len() < 3 {
        return Err(format!("need at least 3 interior modes, got {}", vals.len()));
    }
    let eta = build_metric(s)?;

    // Against the product metric the statement is plain biorthogonality,
    // (Eᵢ − Eⱼ*)·⟨ψⱼ, ηψᵢ⟩ = 0 with the ordinary inner product; passing the
    // second state pre-flipped cancels the parity flip inside the pairing
    // functional. The metric is only semi-definite (it annihilates the
    // kernel state), so overlaps are normalized by the largest diagonal
    // rather than per-mode.
    let diag_max = (0..3)
        .map(|k| eta_overlap(&eta, &vecs[k], &vecs[k]).norm())
        .fold(0.0_f64, f64::max)
        .max(1e-300);
    let mut m = Measurements::new();
    m.insert("diagonal_max".into(), diag_max);
    let mut worst: f64 = 0.0;
    for (i, j) in [(0usize, 1usize), (0, 2), (1, 2)] {
        let flipped = vecs[j].parity_flip().map_err(se)?;
        let value = eta_orthogonality(&vecs[i], &flipped, &eta, vals[i], vals[j])
            .map_err(se)?;
        m.insert(format!("pair_{i}{j}_functional"), value.norm());
        let relative = eta_overlap(&eta, &vecs[j], &vecs[i]).norm() / diag_max;
        m.insert(format!("pair_{i}{j}_relative"), relative);
        worst = worst.max(relative);
    }
    Ok((m, worst <= tol, None))
}

/// ⟨ψ, ηφ⟩ with the trapezoid weights of the grid.
fn eta_overlap(
    eta: &OperatorMatrix,
    psi: &SampledFunction,
    phi: &SampledFunction,
) -> Complex64 {
    let eta_phi = eta.matvec(phi.values());
    let h = psi.grid().h();
    let n = psi.len();
    let mut q = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        q += w * psi.values()[i].conj() * eta_phi[i];
    }
    q * h
}

fn conservation(s: &Scenario, tol: f64) -> Outcome {
    if !s.grid.is_symmetric() {
        return Err("conservation needs a symmetric grid (x_min = -x_max): \
                    the paired field enters through a parity flip"
            .to_string());
    }
    let h = build_h(s)?;
    let eta = build_metric(s)?;
    let (psi1, psi2) = crate::scenario::conservation_packets(&s.grid);
    let rec = evolve_conservation(&h, &eta, &psi1, &psi2, s.evolution.dt, s.evolution.steps)
        .map_err(se)?;
    let drift = rec.relative_drift();
    let q0 = rec.rho_eta_integral[0].norm();
    let mut m = Measurements::new();
    m.insert("relative_drift".into(), drift);
    m.insert("initial_magnitude".into(), q0);
    let note = (q0 < 1e-10)
        .then(|| "paired integral starts near zero; drift is noise-dominated".to_string());
    Ok((m, drift <= tol, note))
}

// ---------------------------------------------------------------------------
// Coordinate-mapped factored identities.
// ---------------------------------------------------------------------------

struct MappedPipeline {
    zeta: OperatorMatrix,
    eta_plus: OperatorMatrix,
    eta_minus: OperatorMatrix,
    eta_minus_dag: OperatorMatrix,
    r: SampledFunction,
}

/// The similarity-mapped first-order construction: R generated from the
/// second-order function F, and the reduced operator carrying f = F/R.
fn mapped_pipeline(s: &Scenario) -> Result<MappedPipeline, String> {
    let r = r_from_big_f(&s.f_upper, &s.u, s.delta).map_err(se)?;
    let f_over_r = s.f_upper.zip_with(&r, |f, r| f / r).map_err(se)?;
    let (zeta, _) = build_zeta(&s.u, &s.f_upper, &s.big_g, &s.a).map_err(se)?;
    let eta_plus = build_metric(s)?;
    // f = F/R is not tied to U′/2, so the reduced operator is assembled
    // through the unconstrained first-order builder.
    let (eta_minus, _) = build_zeta(&s.u, &f_over_r, &s.big_g, &s.a).map_err(se)?;
    let eta_minus_dag = eta_minus.adjoint();
    Ok(MappedPipeline { zeta, eta_plus, eta_minus, eta_minus_dag, r })
}

fn factorization(s: &Scenario, tol: f64) -> Outcome {
    let p = mapped_pipeline(s)?;
    let rep =
        factorization_residual(&p.eta_plus, &p.eta_minus, &p.eta_minus_dag, &s.u, &p.r)
            .map_err(se)?;
    let mut m = Measurements::new();
    m.insert("absolute".into(), rep.absolute);
    m.insert("relative".into(), rep.relative);
    Ok((m, rep.relative <= tol, None))
}

fn decomposition(s: &Scenario, tol: f64) -> Outcome {
    let p = mapped_pipeline(s)?;
    let rep =
        decomposition_residual(&p.eta_plus, &p.eta_minus, &p.eta_minus_dag, &s.u, &p.r)
            .map_err(se)?;
    let mut m = Measurements::new();
    m.insert("absolute".into(), rep.absolute);
    m.insert("relative".into(), rep.relative);
    Ok((m, rep.relative <= tol, None))
}

fn similarity(s: &Scenario, tol: f64) -> Outcome {
    let p = mapped_pipeline(s)?;
    let rep = similarity_residual(&p.zeta, &p.eta_minus, &p.r).map_err(se)?;
    let mut m = Measurements::new();
    m.insert("absolute".into(), rep.absolute);
    m.insert("relative".into(), rep.relative);
    Ok((m, rep.relative <= tol, None))
}

// ---------------------------------------------------------------------------
// Coordinate map and the transformation chain.
// ---------------------------------------------------------------------------

fn coordmap(s: &Scenario, tol: f64) -> Outcome {
    let map = CoordinateMap::assemble(
        &s.u, &s.big_g, &s.f_upper, s.delta, s.lambda1, s.lambda2, s.branch,
    )
    .map_err(se)?;
    let mut m = Measurements::new();
    let reciprocal = map.reciprocal_defect();
    let monotone = map.xi_monotone();
    m.insert("reciprocal_defect".into(), reciprocal);
    m.insert("xi_monotone".into(), if monotone { 1.0 } else { 0.0 });
    let mut pass = reciprocal <= RECIPROCAL_TOL && monotone;

    if monotone {
        let round_trip = xi_round_trip(&map)?;
        m.insert("xi_round_trip".into(), round_trip);
        pass = pass && round_trip <= ROUND_TRIP_TOL;
    }

    // The closed-form branches exist only where |σ| stays clear of the
    // branch point; when σ crosses that band the checks are skipped.
    let mut note = None;
    match r_closed_form(&map.sigma, s.branch, DEFAULT_SIGMA_MARGIN) {
        Ok(r_cf) => {
            m.insert("closed_form_domain".into(), 1.0);
            let other = match s.branch {
                Branch::Plus => Branch::Minus,
                Branch::Minus => Branch::Plus,
            };
            let r_other = r_closed_form(&map.sigma, other, DEFAULT_SIGMA_MARGIN)
                .map_err(se)?;
            let product = r_cf
                .zip_with(&r_other, |a, b| a * b - Complex64::new(1.0, 0.0))
                .map_err(se)?
                .max_abs();
            m.insert("branch_product_defect".into(), product);
            let ode = pivot_ode_residual(&r_cf, &s.u).map_err(se)?;
            m.insert("pivot_ode_absolute".into(), ode.absolute);
            m.insert("pivot_ode_relative".into(), ode.relative);
            pass = pass && product <= BRANCH_PRODUCT_TOL && ode.relative <= tol;
        }
        Err(e) => {
            m.insert("closed_form_domain".into(), 0.0);
            note = Some(format!("closed-form checks skipped: {e}"));
        }
    }
    Ok((m, pass, note))
}

/// ξ at midpoints, inverted back to x, then forward again: sup |ξ̂ − ξ| over
/// a double interpolation through both monotone tables.
fn xi_round_trip(map: &CoordinateMap) -> Result<f64, String> {
    let xs = map.grid_x.points();
    let xi = map.xi.real_values();
    let forward = Pchip::new(xs.to_vec(), xi.clone()).map_err(se)?;
    let inverse = Pchip::new(xi, xs.to_vec()).map_err(se)?;
    let mut worst: f64 = 0.0;
    for i in 0..xs.len() - 1 {
        let xm = 0.5 * (xs[i] + xs[i + 1]);
        let xi_m = forward.eval(xm);
        let back = inverse.eval(xi_m);
        worst = worst.max((forward.eval(back) - xi_m).abs());
    }
    Ok(worst)
}

fn backlund_closure(s: &Scenario, tol: f64) -> Outcome {
    let fam = constant_mass_family();
    let pivot = constant_mass_pivot(&s.grid, s.branch).map_err(se)?;
    let b = &s.backlund;
    let lambdas = [b.lambda1, b.lambda2, b.lambda3];
    let chain = build_chain(&fam, &pivot, &lambdas, 3).map_err(se)?;
    let closure = closure_check(&chain).map_err(se)?;

    let mut m = Measurements::new();
    let mut pass = true;
    for stage in &chain.stages {
        let key = format!("{}_lambda_defect", stage.label.replace('-', "_"));
        m.insert(key, stage.lambda_defect);
        pass = pass && stage.lambda_defect <= tol;
    }
    m.insert("p3_identity_defect".into(), closure.p3_identity_defect);
    pass = pass && closure.p3_identity_defect <= P3_TOL;

    let p_vals = pivot.rp.real_values();
    let probes: Vec<f64> = probe_indices(p_vals.len())
        .into_iter()
        .map(|i| p_vals[i])
        .collect();
    let involution = s_involution_defect(&fam.phi, &probes).map_err(se)?;
    m.insert("involution_defect".into(), involution);
    pass = pass && involution <= INVOLUTION_TOL;

    let families = family_diagram(&fam, &pivot, b.lambda1, b.lambda2).map_err(se)?;
    let gap = families_min_gap(&families);
    m.insert("family_count".into(), families.len() as f64);
    m.insert("families_min_gap".into(), gap);
    pass = pass && families.len() == 6 && gap >= FAMILY_GAP_MIN;

    let commute = commute_check(&fam, &pivot, b.lambda1).map_err(se)?;
    m.insert("closure_identity_i".into(), closure.identity_i);
    m.insert("closure_identity_ii".into(), closure.identity_ii);
    m.insert("p2_inverse_defect".into(), closure.p2_inverse_defect);
    m.insert("recon_x_defect".into(), closure.recon_x_defect);
    m.insert("recon_r_defect".into(), closure.recon_r_defect);
    m.insert("commute_chi_defect".into(), commute.chi_defect);
    m.insert("commute_phi_defect".into(), commute.phi_defect);

    let note = "closure_identity_i/ii, p2_inverse, recon_* and commute_* are \
                reported without gates; see the README on known results"
        .to_string();
    Ok((m, pass, Some(note)))
}
