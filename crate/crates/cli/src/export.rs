//! Plot-data exports: plain CSV tables derived from the same scenario the
//! suites verify. Columns are fixed and documented in the README; all
//! numbers are printed with full round-trip precision.

use std::fmt::Write as _;

use pdmverify_core::coordmap::CoordinateMap;
use pdmverify_core::linalg::interior_eigenpairs;
use pdmverify_core::operators::{build_eta_plus, build_modified_h, EtaPlusMode};
use pdmverify_core::verify::evolve_conservation;

use crate::scenario::Scenario;

/// What to export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Potential,
    Eigenfunctions,
    Coordmap,
    Conservation,
}

impl Kind {
    pub fn parse(name: &str) -> Result<Kind, String> {
        match name {
            "potential" => Ok(Kind::Potential),
            "eigenfunctions" => Ok(Kind::Eigenfunctions),
            "coordmap" => Ok(Kind::Coordmap),
            "conservation" => Ok(Kind::Conservation),
            other => Err(format!(
                "unknown export kind {other:?} (expected potential, \
                 eigenfunctions, coordmap, or conservation)"
            )),
        }
    }
}

/// Render the requested table. Errors carry a plain message; the caller
/// decides the exit code.
pub fn render(s: &Scenario, kind: Kind) -> Result<String, String> {
    match kind {
        Kind::Potential => potential(s),
        Kind::Eigenfunctions => eigenfunctions(s),
        Kind::Coordmap => coordmap(s),
        Kind::Conservation => conservation(s),
    }
}

fn se(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn potential(s: &Scenario) -> Result<String, String> {
    let mut out = String::from("x,ReV,ImV\n");
    for (x, v) in s.grid.points().iter().zip(s.v_plus.values()) {
        let _ = writeln!(out, "{x:.17e},{:.17e},{:.17e}", v.re, v.im);
    }
    Ok(out)
}

fn eigenfunctions(s: &Scenario) -> Result<String, String> {
    let h = build_modified_h(&s.u, &s.a, &s.v_plus).map_err(se)?;
    let (_, vecs) = interior_eigenpairs(&h).map_err(se)?;
    let k = vecs.len().min(5);
    let mut out = String::from("x");
    for j in 0..k {
        let _ = write!(out, ",Re_psi_{j},Im_psi_{j}");
    }
    out.push('\n');
    for (i, x) in s.grid.points().iter().enumerate() {
        let _ = write!(out, "{x:.17e}");
        for mode in vecs.iter().take(k) {
            let z = mode.values()[i];
            let _ = write!(out, ",{:.17e},{:.17e}", z.re, z.im);
        }
        out.push('\n');
    }
    Ok(out)
}

fn coordmap(s: &Scenario) -> Result<String, String> {
    let map = CoordinateMap::assemble(
        &s.u, &s.big_g, &s.f_upper, s.delta, s.lambda1, s.lambda2, s.branch,
    )
    .map_err(se)?;
    let mut buf = Vec::new();
    map.write_csv(&mut buf).map_err(se)?;
    String::from_utf8(buf).map_err(se)
}

fn conservation(s: &Scenario) -> Result<String, String> {
    if !s.grid.is_symmetric() {
        return Err("conservation export needs a symmetric grid \
                    (x_min = -x_max)"
            .to_string());
    }
    let h = build_modified_h(&s.u, &s.a, &s.v_plus).map_err(se)?;
    let eta =
        build_eta_plus(&s.u, &s.f_upper, &s.big_g, &s.a, EtaPlusMode::Product).map_err(se)?;
    // Same packet recipe as the conservation suite, so the export shows the
    // series behind that verdict.
    let (psi1, psi2) = crate::scenario::conservation_packets(&s.grid);
    let rec = evolve_conservation(&h, &eta, &psi1, &psi2, s.evolution.dt, s.evolution.steps)
        .map_err(se)?;
    let mut out = String::from("t,ReQ,ImQ\n");
    for (t, q) in rec.times.iter().zip(&rec.rho_eta_integral) {
        let _ = writeln!(out, "{t:.17e},{:.17e},{:.17e}", q.re, q.im);
    }
    Ok(out)
}
