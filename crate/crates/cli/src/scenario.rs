//! Sampled model data shared by the suites: the grid, every scalar profile,
//! both potentials, and the gauge phase, assembled once per run.

use std::sync::Arc;

use num_complex::Complex64;

use pdmverify_core::coordmap::Branch;
use pdmverify_core::exprlang::parse_expr;
use pdmverify_core::grid::{derivative, make_grid, DiffOrder, Grid, SampledFunction};
use pdmverify_core::model::{
    big_f_from_samples, gauge_phase_alpha, potential_v_minus, potential_v_plus,
    sample_expr, sample_u, ModelSpec,
};

use crate::config::{BacklundSection, ConfigError, EvolutionSection, RunConfig};

/// Everything the suites consume. Operator matrices are built per suite
/// (they are dense and large); scalar samples are built once here.
pub struct Scenario {
    pub grid: Arc<Grid>,
    pub u: SampledFunction,
    pub a: SampledFunction,
    pub big_g: SampledFunction,
    pub small_g: SampledFunction,
    /// Second-order generating function: the `model.f` override when given,
    /// otherwise the closed form from U and G.
    pub f_upper: SampledFunction,
    /// First-order generating function U′/2.
    pub f_lower: SampledFunction,
    pub v_plus: SampledFunction,
    pub v_minus: SampledFunction,
    pub alpha: SampledFunction,
    pub delta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub branch: Branch,
    pub evolution: EvolutionSection,
    pub backlund: BacklundSection,
}

fn model_err(message: impl ToString) -> ConfigError {
    ConfigError::Model { message: message.to_string() }
}

/// The packet pair used by the conservation suite and export: both parked
/// inside the walls, the second placed so its parity flip lands on the first
/// one's support — otherwise the paired integral starts near zero and
/// relative drift means nothing.
pub fn conservation_packets(grid: &Arc<Grid>) -> (SampledFunction, SampledFunction) {
    let span = grid.x_max() - grid.x_min();
    let c1 = grid.x_min() + 0.3 * span;
    let c2 = -c1 - 0.01 * span;
    let w = 2.0 * (0.05 * span) * (0.05 * span);
    let psi1 = SampledFunction::from_complex_fn(grid, |x| {
        Complex64::new(-(x - c1) * (x - c1) / w, -0.2 * x).exp()
    });
    let psi2 = SampledFunction::from_real_fn(grid, |x| {
        (-(x - c2) * (x - c2) / (0.9 * w)).exp()
    });
    (psi1, psi2)
}

/// Sample every profile the suites need. Failures here are configuration
/// errors: the model cannot be evaluated on the requested grid.
pub fn assemble(config: &RunConfig) -> Result<Scenario, ConfigError> {
    let g = &config.grid;
    let grid = make_grid(g.x_min, g.x_max, g.n).map_err(model_err)?;
    let m = &config.model;
    let spec = ModelSpec::parse(&m.u, &m.a, &m.big_g, &m.small_g).map_err(model_err)?;

    let u = sample_u(&spec, &grid).map_err(model_err)?;
    let a = sample_expr(&spec.a_expr, &grid).map_err(model_err)?;
    let big_g = sample_expr(&spec.big_g_expr, &grid).map_err(model_err)?;
    let small_g = sample_expr(&spec.small_g_expr, &grid).map_err(model_err)?;

    let f_upper = match &m.f {
        Some(src) => {
            let expr = parse_expr(src)
                .map_err(|e| model_err(format!("model.f: {e}")))?;
            sample_expr(&expr, &grid).map_err(|e| model_err(format!("model.f: {e}")))?
        }
        None => big_f_from_samples(&u, &big_g).map_err(|e| {
            model_err(format!(
                "{e}; when G vanishes, supply the generating function explicitly \
                 via model.f"
            ))
        })?,
    };
    let f_lower = derivative(&u, DiffOrder::First).scale(Complex64::new(0.5, 0.0));

    let v_plus = potential_v_plus(&f_upper, &big_g, &u, m.epsilon).map_err(model_err)?;
    let v_minus =
        potential_v_minus(&f_lower, &small_g, &u, m.gamma).map_err(model_err)?;
    let alpha = gauge_phase_alpha(&spec, &grid).map_err(model_err)?;

    Ok(Scenario {
        grid,
        u,
        a,
        big_g,
        small_g,
        f_upper,
        f_lower,
        v_plus,
        v_minus,
        alpha,
        delta: m.delta,
        lambda1: m.lambda1,
        lambda2: m.lambda2,
        branch: m.branch.to_branch(),
        evolution: config.evolution,
        backlund: config.backlund,
    })
}
