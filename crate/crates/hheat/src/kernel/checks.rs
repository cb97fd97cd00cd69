//! Empirical kernel estimates: two-sided Gaussian-type bounds and the
//! `t^{−1/2}` decay of `‖∇_H h_t‖₁`.

use super::{kernel_value, sample_kernel_field, KernelTable};
use crate::error::{Error, Result};
use crate::field::{apply_horizontal_gradient, lp_norm, GridField, GridSpec};
use crate::group::{koranyi_norm, HPoint};
use crate::util::fit_line;

/// Empirical sandwich constants
/// `lowAmp · t^{−Q/2} exp(−lowRate·|η|²/t) ≤ h_t(η) ≤ upAmp · t^{−Q/2} exp(−upRate·|η|²/t)`,
/// tightest over the given samples. The rates come from a least-squares
/// fit of `log(h_t t^{Q/2})` against `|η|²_H / t`; the amplitudes are then
/// shifted until every sample satisfies its side.
#[derive(Debug, Clone, Copy)]
pub struct GaussianBoundFit {
    pub low_amp: f64,
    pub low_rate: f64,
    pub up_amp: f64,
    pub up_rate: f64,
}

pub fn gaussian_bound_fit(
    table: &KernelTable,
    samples: &[(f64, HPoint)],
) -> Result<GaussianBoundFit> {
    if samples.is_empty() {
        return Err(Error::usage("gaussian_bound_fit needs samples"));
    }
    let n = table.n();
    let q_half = (n + 1) as f64;
    let params = table.params();
    let mut xs = Vec::with_capacity(samples.len());
    let mut ys = Vec::with_capacity(samples.len());
    for (t, p) in samples {
        let h = kernel_value(n, *t, p, params)?;
        if h <= 0.0 {
            return Err(Error::numerical(format!(
                "sample at t={t} has non-positive kernel value {h:.3e}"
            )));
        }
        let gauge = koranyi_norm(p);
        xs.push(gauge * gauge / t);
        ys.push((h * t.powf(q_half)).ln());
    }
    let (slope, _) = fit_line(&xs, &ys);
    let rate = (-slope).max(1e-12);

    // tightest amplitudes subject to the two-sided constraint
    let mut up_ln = f64::NEG_INFINITY;
    let mut low_ln = f64::INFINITY;
    for (x, y) in xs.iter().zip(&ys) {
        up_ln = up_ln.max(y + rate * x);
        low_ln = low_ln.min(y + rate * x);
    }
    Ok(GaussianBoundFit {
        low_amp: low_ln.exp(),
        low_rate: rate,
        up_amp: up_ln.exp(),
        up_rate: rate,
    })
}

/// Log-log decay of `‖∇_H h_t‖₁` and `‖∂_τ h_t‖₁` over a time list.
#[derive(Debug, Clone)]
pub struct GradientDecayReport {
    pub ts: Vec<f64>,
    pub grad_l1: Vec<f64>,
    pub dtau_l1: Vec<f64>,
    pub grad_slope: f64,
    pub dtau_slope: f64,
}

/// Sample `h_t` per time, differentiate on the grid, fit the slopes.
pub fn gradient_l1_check(table: &KernelTable, t_list: &[f64]) -> Result<GradientDecayReport> {
    if t_list.len() < 2 {
        return Err(Error::usage("gradient_l1_check needs at least two times"));
    }
    let spec = table.spec().clone();
    let mut grad_l1 = Vec::with_capacity(t_list.len());
    let mut dtau_l1 = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let ht = sample_kernel_field(table.n(), t, &spec, table.params())?;
        grad_l1.push(horizontal_gradient_l1(&ht)?);
        dtau_l1.push(tau_derivative_l1(&spec, &ht)?);
    }
    let lts: Vec<f64> = t_list.iter().map(|t| t.ln()).collect();
    let lg: Vec<f64> = grad_l1.iter().map(|v| v.ln()).collect();
    let ld: Vec<f64> = dtau_l1.iter().map(|v| v.ln()).collect();
    let (grad_slope, _) = fit_line(&lts, &lg);
    let (dtau_slope, _) = fit_line(&lts, &ld);
    Ok(GradientDecayReport {
        ts: t_list.to_vec(),
        grad_l1,
        dtau_l1,
        grad_slope,
        dtau_slope,
    })
}

/// `‖∇_H u‖₁ = ∫ (Σ_i (X_i u)² + (Y_i u)²)^{1/2}`.
pub fn horizontal_gradient_l1(u: &GridField) -> Result<f64> {
    let comps = apply_horizontal_gradient(u);
    let mut sq = vec![0.0; u.values().len()];
    for c in &comps {
        for (s, v) in sq.iter_mut().zip(c.values()) {
            *s += v * v;
        }
    }
    let mag = GridField::new(u.spec().clone(), sq.iter().map(|s| s.sqrt()).collect())?;
    lp_norm(&mag, 1.0)
}

fn tau_derivative_l1(spec: &GridSpec, u: &GridField) -> Result<f64> {
    let _ = spec;
    lp_norm(&crate::field::apply_tau_derivative(u), 1.0)
}
