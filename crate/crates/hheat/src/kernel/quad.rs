//! Panel-based Gauss–Legendre quadrature for the kernel's λ-integral.
//!
//! The reduced (unit-time) integrand is
//!
//! ```text
//! A(λ) = (λ / sinh λ)^n · exp(−z² λ / (4 tanh λ)),                λ ≥ 0,
//! ```
//!
//! smooth after substituting the removable λ → 0 limits
//! `(λ/sinh λ)^n → 1`, `λ/tanh λ → 1`, and the target integral is
//! `∫₀^Λ A(λ) cos(λ·freq) dλ`. Panels are sized so each one sees at most a
//! quarter period of the cosine; the integrand's `e^{−nλ}` decay bounds the
//! truncation tail at Λ.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Cutoff, panel floor and Gauss–Legendre order for the λ-integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureParams {
    /// Integration cutoff Λ. With the `e^{−nλ}` integrand decay the
    /// neglected tail is below 1e−12 of the integrand scale for Λ ≥ 35;
    /// the default 60 is conservative.
    pub lambda_max: f64,
    /// Lower bound on the panel count (caps the panel width for slowly
    /// oscillating integrands).
    pub min_panels: u32,
    /// Gauss–Legendre nodes per panel.
    pub nodes_per_panel: u32,
}

impl Default for QuadratureParams {
    fn default() -> Self {
        QuadratureParams {
            lambda_max: 60.0,
            min_panels: 30,
            nodes_per_panel: 16,
        }
    }
}

impl QuadratureParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_max > 0.0) || self.min_panels == 0 || self.nodes_per_panel < 2 {
            return Err(Error::usage(
                "quadrature params need lambda_max > 0, min_panels >= 1, nodes_per_panel >= 2",
            ));
        }
        Ok(())
    }

    /// Panel count for a given oscillation frequency: width ≤ π/(2·freq).
    pub fn panel_count(&self, freq: f64) -> usize {
        let osc = (2.0 * freq.abs() * self.lambda_max / std::f64::consts::PI).ceil();
        (self.min_panels as f64).max(osc) as usize
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`, by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 2);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for k in 0..m {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=m {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[k] = x;
        weights[k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Unit-time integrand `A(λ)` with the removable singularity at λ = 0
/// substituted.
#[inline]
pub fn reduced_integrand(n: usize, zsq: f64, lambda: f64) -> f64 {
    debug_assert!(lambda >= 0.0);
    if lambda < 1e-12 {
        return (-zsq / 4.0).exp();
    }
    let s = lambda.sinh();
    let ratio = if s.is_finite() { lambda / s } else { 0.0 };
    if ratio == 0.0 {
        return 0.0;
    }
    ratio.powi(n as i32) * (-zsq * lambda / (4.0 * lambda.tanh())).exp()
}

/// λ-node / weighted-integrand pairs for one panel layout.
///
/// The layout is uniform over `[0, Λ]` with `panels` panels; node order is
/// panel-major, so downstream sums are deterministic.
pub fn integrand_nodes(
    n: usize,
    zsq: f64,
    panels: usize,
    params: &QuadratureParams,
    gl: &(Vec<f64>, Vec<f64>),
) -> Vec<(f64, f64)> {
    let width = params.lambda_max / panels as f64;
    let (ref xs, ref ws) = *gl;
    let mut out = Vec::with_capacity(panels * xs.len());
    for p in 0..panels {
        let a = p as f64 * width;
        let half = 0.5 * width;
        let mid = a + half;
        for (x, w) in xs.iter().zip(ws) {
            let lambda = mid + half * x;
            out.push((lambda, w * half * reduced_integrand(n, zsq, lambda)));
        }
    }
    out
}

/// `∫₀^Λ A(λ) cos(λ·freq) dλ` on a precomputed layout.
#[inline]
pub fn cosine_sum(nodes: &[(f64, f64)], freq: f64) -> f64 {
    let mut acc = 0.0;
    for &(lambda, wa) in nodes {
        acc += wa * (lambda * freq).cos();
    }
    acc
}

/// One-off evaluation of the reduced integral with a panel-refinement
/// convergence check: the layouts with `P` and `2P` panels must agree to
/// `tol`, else the quadrature is reported as non-convergent.
pub fn checked_integral(
    n: usize,
    zsq: f64,
    freq: f64,
    params: &QuadratureParams,
    tol: f64,
) -> Result<f64> {
    params.validate()?;
    let gl = gauss_legendre(params.nodes_per_panel as usize);
    let p = params.panel_count(freq);
    let coarse = cosine_sum(&integrand_nodes(n, zsq, p, params, &gl), freq);
    let fine = cosine_sum(&integrand_nodes(n, zsq, 2 * p, params, &gl), freq);
    if (fine - coarse).abs() > tol {
        return Err(Error::numerical(format!(
            "quadrature did not converge: panel refinement moved the value by {:.3e} (> {:.1e})",
            (fine - coarse).abs(),
            tol
        )));
    }
    Ok(fine)
}
