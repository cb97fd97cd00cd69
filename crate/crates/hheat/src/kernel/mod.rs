//! Heat kernel of the horizontal Laplacian, by quadrature of its classical
//! λ-integral representation.
//!
//! All evaluations reduce to unit time through the parabolic scaling
//! `h_t(x, y, s) = t^{−(n+1)} h₁(x/√t, y/√t, s/t)` and then integrate
//!
//! ```text
//! h₁(z, τ) = π C_n ∫₀^Λ (λ/sinh λ)^n exp(−|z|²λ/(4 tanh λ)) cos(λτ/4) dλ,
//! C_n = (2π)^{−(n+2)} 2^{−n}.
//! ```
//!
//! The prefactor `π C_n` and the vertical frequency `τ/4` are pinned by two
//! requirements: `∫ h_t dη = 1`, and the semigroup generated must match the
//! lattice group law (twist factor 2) and vector fields (`X_i = ∂_{x_i} −
//! 2y_i ∂_τ`). The classical integral form as usually printed,
//! `F_t = 2 C_n ∫₀^∞ (…) cos(λτ) dλ`, belongs to a different normalization
//! of those conventions; [`formula_value`] evaluates it verbatim as a
//! closed-form quadrature oracle (`F₁(0) = 1/(32π)` for `n = 1`), and the
//! kernel used everywhere else is `h_t(z, τ) = (π/2)·F_t(z, τ/4)`, which the
//! Monte Carlo module validates independently.

pub mod checks;
pub mod convolve;
pub mod quad;

pub use checks::{gaussian_bound_fit, gradient_l1_check, GaussianBoundFit, GradientDecayReport};
pub use convolve::{group_convolve, heat_semigroup_apply};
pub use quad::QuadratureParams;

use crate::error::{Error, Result};
use crate::field::io::{read_f64, read_u32, write_field};
use crate::field::{integrate_field, interpolate, GridField, GridSpec};
use crate::group::{dilate, HPoint};
use rayon::prelude::*;
use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

/// Panel-refinement agreement required of every checked evaluation, on the
/// unit-time value scale.
pub const REFINEMENT_TOL: f64 = 1e-9;

/// Negative quadrature dust below this magnitude is clamped to zero;
/// anything more negative is a hard error.
pub const DUST_TOL: f64 = 1e-12;

/// Vertical support cutoff in reduced coordinates: `h₁(z, τ′)` decays at
/// least like `exp(−π|τ′|/8)`, so beyond `|τ′| = 70` the values sit below
/// 1e−12 of the kernel scale. Sampled fields flush those nodes to exact
/// zero, which also bounds the oscillation frequency the quadrature must
/// resolve and exposes sparsity to the convolution.
pub const REDUCED_TAU_CUT: f64 = 70.0;

fn formula_prefactor(n: usize) -> f64 {
    (2.0 * std::f64::consts::PI).powi(-(n as i32) - 2) * 2f64.powi(-(n as i32))
}

struct Reduced {
    zsq: f64,
    tau: f64,
    scale: f64,
}

fn reduce(n: usize, t: f64, p: &HPoint) -> Result<Reduced> {
    if p.n() != n {
        return Err(Error::usage(format!(
            "point dimension {} does not match n = {n}",
            p.n()
        )));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::usage(format!("time must be positive, got {t}")));
    }
    Ok(Reduced {
        zsq: p.horizontal_sq() / t,
        tau: p.tau() / t,
        scale: t.powi(-(n as i32) - 1),
    })
}

/// Normalized heat-kernel value `h_t(p)`.
pub fn kernel_value(n: usize, t: f64, p: &HPoint, params: &QuadratureParams) -> Result<f64> {
    let r = reduce(n, t, p)?;
    let i = quad::checked_integral(n, r.zsq, r.tau.abs() / 4.0, params, REFINEMENT_TOL)?;
    clamp_dust(r.scale * std::f64::consts::PI * formula_prefactor(n) * i)
}

/// Verbatim evaluation of the classical integral form (unit-frequency
/// cosine, prefactor `C_n`), kept as an independent quadrature oracle; it
/// is not itself a probability kernel.
pub fn formula_value(n: usize, t: f64, p: &HPoint, params: &QuadratureParams) -> Result<f64> {
    let r = reduce(n, t, p)?;
    let i = quad::checked_integral(n, r.zsq, r.tau.abs(), params, REFINEMENT_TOL)?;
    Ok(r.scale * 2.0 * formula_prefactor(n) * i)
}

fn clamp_dust(v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v > -DUST_TOL {
        Ok(0.0)
    } else {
        Err(Error::numerical(format!(
            "positivity invariant violated: kernel value {v:.3e} below -{DUST_TOL:.0e}"
        )))
    }
}

/// Sample `h_t` on a lattice by direct quadrature.
///
/// Columns sharing `|z|²` share one integrand evaluation; the panel layout
/// is sized for the largest vertical frequency on the grid, which only
/// over-resolves the slower nodes.
pub fn sample_kernel_field(
    n: usize,
    t: f64,
    spec: &GridSpec,
    params: &QuadratureParams,
) -> Result<GridField> {
    tabulate_values(n, t, spec, params, false)
}

fn tabulate_values(
    n: usize,
    t: f64,
    spec: &GridSpec,
    params: &QuadratureParams,
    refine_check: bool,
) -> Result<GridField> {
    params.validate()?;
    if spec.n() != n {
        return Err(Error::usage("grid dimension does not match n"));
    }
    if !(t > 0.0) {
        return Err(Error::usage(format!("time must be positive, got {t}")));
    }

    let nxc = spec.nx().pow(n as u32);
    let nyc = spec.ny().pow(n as u32);
    let ntau = spec.ntau();

    // squared horizontal radius of each x- and y-combination
    let hsq_combo = |count: usize, axis0: usize, combo: usize| -> f64 {
        let mut c = combo;
        let mut acc = 0.0;
        let len = spec.axis_len(axis0);
        for _ in 0..count {
            let i = c % len;
            c /= len;
            let v = spec.axis_coord(axis0, i);
            acc += v * v;
        }
        acc
    };
    let xsq: Vec<f64> = (0..nxc).map(|c| hsq_combo(n, 0, c)).collect();
    let ysq: Vec<f64> = (0..nyc).map(|c| hsq_combo(n, n, c)).collect();

    let reduced_tau: Vec<f64> = (0..ntau)
        .map(|k| (spec.axis_coord(2 * n, k) / t).abs())
        .collect();
    let freqs: Vec<Option<f64>> = reduced_tau
        .iter()
        .map(|&rt| (rt <= REDUCED_TAU_CUT).then_some(rt / 4.0))
        .collect();
    let max_freq = freqs.iter().flatten().cloned().fold(0.0, f64::max);
    let panels = params.panel_count(max_freq);
    let gl = quad::gauss_legendre(params.nodes_per_panel as usize);
    let pref = t.powi(-(n as i32) - 1) * std::f64::consts::PI * formula_prefactor(n);
    let unit_pref = std::f64::consts::PI * formula_prefactor(n);

    let mut groups: HashMap<u64, Vec<usize>> = HashMap::new();
    for cx in 0..nxc {
        for cy in 0..nyc {
            let zsq = (xsq[cx] + ysq[cy]) / t;
            groups.entry(zsq.to_bits()).or_default().push(cx * nyc + cy);
        }
    }
    let group_list: Vec<(u64, Vec<usize>)> = {
        let mut v: Vec<_> = groups.into_iter().collect();
        v.sort_by_key(|(bits, _)| *bits);
        v
    };

    let profiles: Vec<Result<(Vec<usize>, Vec<f64>)>> = group_list
        .into_par_iter()
        .map(|(bits, cols)| {
            let zsq = f64::from_bits(bits);
            let nodes = quad::integrand_nodes(n, zsq, panels, params, &gl);
            let fine;
            let fine_nodes_storage;
            if refine_check {
                fine_nodes_storage = quad::integrand_nodes(n, zsq, 2 * panels, params, &gl);
                fine = Some(&fine_nodes_storage);
            } else {
                fine = None;
            }
            let mut line = Vec::with_capacity(ntau);
            for f in &freqs {
                let Some(f) = *f else {
                    line.push(0.0);
                    continue;
                };
                let v = quad::cosine_sum(&nodes, f);
                let v = if let Some(fnodes) = fine {
                    let vf = quad::cosine_sum(fnodes, f);
                    if (unit_pref * (vf - v)).abs() > REFINEMENT_TOL {
                        return Err(Error::numerical(format!(
                            "quadrature did not converge at |z|²={zsq:.4}, freq={f:.4}: \
                             refinement moved the value by {:.3e}",
                            (unit_pref * (vf - v)).abs()
                        )));
                    }
                    vf
                } else {
                    v
                };
                line.push(clamp_dust(pref * v)?);
            }
            Ok((cols, line))
        })
        .collect();

    let mut values = vec![0.0; spec.len()];
    for p in profiles {
        let (cols, line) = p?;
        for col in cols {
            values[col * ntau..(col + 1) * ntau].copy_from_slice(&line);
        }
    }
    GridField::new(spec.clone(), values)
}

/// Tabulated unit-time kernel with its quadrature metadata.
///
/// All positive times derive from the table by parabolic scaling.
#[derive(Debug, Clone)]
pub struct KernelTable {
    n: usize,
    params: QuadratureParams,
    field: GridField,
}

impl KernelTable {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn params(&self) -> &QuadratureParams {
        &self.params
    }
    pub fn field(&self) -> &GridField {
        &self.field
    }
    pub fn spec(&self) -> &GridSpec {
        self.field.spec()
    }

    /// Construction-time invariant battery. Every failure names the
    /// violated invariant.
    fn verify_invariants(&self) -> Result<()> {
        let min = self.field.min_value();
        if min < 0.0 {
            return Err(Error::numerical(format!(
                "kernel table positivity invariant violated: min value {min:.3e}"
            )));
        }
        let mass = integrate_field(&self.field);
        if (mass - 1.0).abs() > 1e-2 {
            return Err(Error::numerical(format!(
                "kernel table normalization invariant violated: integral {mass:.6} \
                 differs from 1 by more than 1e-2"
            )));
        }
        self.verify_symmetry()?;
        Ok(())
    }

    /// `h(η) = h(−η)` on all reflection-paired lattice nodes.
    fn verify_symmetry(&self) -> Result<()> {
        let spec = self.spec();
        let axes = spec.axes();
        let mut mi = vec![0usize; axes];
        let scale = self.field.max_value().max(1e-300);
        for idx in 0..spec.len() {
            spec.multi_index(idx, &mut mi);
            // face nodes on the unpaired −L side have no lattice mirror
            if mi.iter().any(|&i| i == 0) {
                continue;
            }
            let mut ridx = 0usize;
            for ax in 0..axes {
                ridx = ridx * spec.axis_len(ax) + (spec.axis_len(ax) - mi[ax]);
            }
            let a = self.field.values()[idx];
            let b = self.field.values()[ridx];
            if (a - b).abs() > 1e-12 * scale {
                return Err(Error::numerical(format!(
                    "kernel table symmetry invariant violated at flat index {idx}: \
                     {a:.17e} vs {b:.17e}"
                )));
            }
        }
        Ok(())
    }
}

/// Build the unit-time kernel table with the refinement check enabled and
/// every table invariant verified.
pub fn tabulate_kernel(n: usize, spec: &GridSpec, params: &QuadratureParams) -> Result<KernelTable> {
    let field = tabulate_values(n, 1.0, spec, params, true)?;
    let table = KernelTable { n, params: *params, field };
    table.verify_invariants()?;
    Ok(table)
}

const TABLE_MAGIC: &[u8; 8] = b"HHEATKT1";
const TABLE_VERSION: u32 = 1;

impl KernelTable {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(TABLE_MAGIC)?;
        w.write_all(&TABLE_VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&self.params.lambda_max.to_le_bytes())?;
        w.write_all(&self.params.min_panels.to_le_bytes())?;
        w.write_all(&self.params.nodes_per_panel.to_le_bytes())?;
        write_field(&mut w, &self.field)
    }

    /// Load a cached table and re-verify every construction invariant, so
    /// a corrupted cache is reported by the invariant it breaks.
    pub fn load(path: &Path) -> Result<KernelTable> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != TABLE_MAGIC {
            return Err(Error::Format("bad kernel table magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != TABLE_VERSION {
            return Err(Error::Format(format!("unsupported table version {version}")));
        }
        let n = read_u32(&mut r)? as usize;
        let params = QuadratureParams {
            lambda_max: read_f64(&mut r)?,
            min_panels: read_u32(&mut r)?,
            nodes_per_panel: read_u32(&mut r)?,
        };
        let field = crate::field::io::read_field(&mut r)?;
        let table = KernelTable { n, params, field };
        table.verify_invariants()?;
        Ok(table)
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Cache file path for a `(n, spec, params)` key.
pub fn cache_path(dir: &Path, n: usize, spec: &GridSpec, params: &QuadratureParams) -> PathBuf {
    let mut key = Vec::new();
    key.extend_from_slice(&(n as u64).to_le_bytes());
    for v in [spec.nx(), spec.ny(), spec.ntau()] {
        key.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for v in [spec.lx(), spec.ly(), spec.ltau(), params.lambda_max] {
        key.extend_from_slice(&v.to_le_bytes());
    }
    for v in [params.min_panels, params.nodes_per_panel] {
        key.extend_from_slice(&v.to_le_bytes());
    }
    dir.join(format!("hheat-kernel-n{}-{:016x}.bin", n, fnv1a64(&key)))
}

/// Tabulate through a disk cache. Returns the table and whether it came
/// from disk.
pub fn tabulate_kernel_cached(
    n: usize,
    spec: &GridSpec,
    params: &QuadratureParams,
    cache_dir: &Path,
) -> Result<(KernelTable, bool)> {
    std::fs::create_dir_all(cache_dir)?;
    let path = cache_path(cache_dir, n, spec, params);
    if path.exists() {
        let table = KernelTable::load(&path)?;
        if table.n == n && table.spec() == spec && table.params == *params {
            return Ok((table, true));
        }
        return Err(Error::Format(format!(
            "cache file {} does not match its key",
            path.display()
        )));
    }
    let table = tabulate_kernel(n, spec, params)?;
    table.save(&path)?;
    Ok((table, false))
}

/// Sample `h_t` on an arbitrary lattice from the unit-time table via
/// parabolic scaling and multilinear interpolation.
pub fn kernel_field_from_table(table: &KernelTable, spec: &GridSpec, t: f64) -> Result<GridField> {
    if !(t > 0.0) {
        return Err(Error::usage(format!("time must be positive, got {t}")));
    }
    if spec.n() != table.n {
        return Err(Error::usage("grid dimension does not match table"));
    }
    let scale = t.powi(-(table.n as i32) - 1);
    let inv_sqrt = 1.0 / t.sqrt();
    let values: Vec<f64> = (0..spec.len())
        .into_par_iter()
        .map(|idx| {
            let p = spec.point_at(idx);
            let q = dilate(inv_sqrt, &p).expect("positive dilation factor");
            scale * interpolate(&table.field, &q).expect("matching dimension")
        })
        .collect();
    GridField::new(spec.clone(), values)
}

/// Analytic estimate of the kernel mass outside a box, from the exact
/// coordinate marginals: each horizontal coordinate is `N(0, 2t)` and the
/// vertical marginal is `(8t)^{−1} sech(πτ/(8t))`.
pub fn tail_mass_estimate(n: usize, t: f64, spec: &GridSpec) -> f64 {
    let gauss_tail = |l: f64| erfc(l / (2.0 * t.sqrt()));
    let tau_tail = (4.0 / std::f64::consts::PI)
        * (-std::f64::consts::PI * spec.ltau() / (8.0 * t)).exp().atan();
    (n as f64) * (gauss_tail(spec.lx()) + gauss_tail(spec.ly())) + tau_tail
}

/// Complementary error function (Abramowitz–Stegun 7.1.26 rational fit,
/// |error| < 1.5e−7; plenty for tail estimates).
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
    if x >= 0.0 {
        poly
    } else {
        2.0 - poly
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::group_inv;

    const ORIGIN_VALUE: f64 = 1.0 / 64.0;

    #[test]
    fn formula_origin_matches_closed_form() {
        // 2 C₁ ∫₀^∞ λ/sinh λ dλ = (π²/2) / (16π³) = 1/(32π)
        let p = HPoint::origin(1);
        let v = formula_value(1, 1.0, &p, &QuadratureParams::default()).unwrap();
        let expect = 1.0 / (32.0 * std::f64::consts::PI);
        assert!(
            (v - expect).abs() <= 1e-6 * expect,
            "got {v:.12e}, want {expect:.12e}"
        );
    }

    #[test]
    fn normalized_origin_value() {
        let p = HPoint::origin(1);
        let v = kernel_value(1, 1.0, &p, &QuadratureParams::default()).unwrap();
        assert!(
            (v - ORIGIN_VALUE).abs() <= 1e-10,
            "got {v:.12e}, want {ORIGIN_VALUE:.12e}"
        );
    }

    #[test]
    fn rejects_nonpositive_time() {
        let p = HPoint::origin(1);
        assert!(kernel_value(1, 0.0, &p, &QuadratureParams::default()).is_err());
        assert!(kernel_value(1, -1.0, &p, &QuadratureParams::default()).is_err());
    }

    #[test]
    fn kernel_is_even() {
        let params = QuadratureParams::default();
        for &(x, y, tau, t) in &[(0.5, -1.2, 2.0, 1.0), (1.0, 0.3, -4.0, 0.7), (2.0, 1.0, 7.5, 2.5)] {
            let p = HPoint::new1(x, y, tau);
            let a = kernel_value(1, t, &p, &params).unwrap();
            let b = kernel_value(1, t, &group_inv(&p), &params).unwrap();
            assert_eq!(a, b, "evenness must be exact by construction");
        }
    }

    #[test]
    fn parabolic_scaling_identity() {
        // h_{r²t}(rx, ry, r²s) = r^{−Q} h_t(x, y, s), Q = 4 for n = 1
        let params = QuadratureParams::default();
        let r = 2.0f64;
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut unit = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            let x = 4.0 * unit() - 2.0;
            let y = 4.0 * unit() - 2.0;
            let s = 10.0 * unit() - 5.0;
            let t = 0.5 + 2.0 * unit();
            let lhs = kernel_value(
                1,
                r * r * t,
                &HPoint::new1(r * x, r * y, r * r * s),
                &params,
            )
            .unwrap();
            let rhs = r.powi(-4) * kernel_value(1, t, &HPoint::new1(x, y, s), &params).unwrap();
            let denom = rhs.abs().max(1e-300);
            assert!(
                (lhs - rhs).abs() / denom <= 1e-10,
                "scaling identity off by {:.2e} at ({x},{y},{s},{t})",
                (lhs - rhs).abs() / denom
            );
        }
    }

    #[test]
    fn tabulated_kernel_invariants() {
        let table = test_support::small_table();
        let mass = integrate_field(table.field());
        assert!((mass - 1.0).abs() <= 1e-2, "mass {mass}");
        assert!(table.field().min_value() >= 0.0);

        // adding the analytic tail estimate tightens the normalization
        let corrected = mass + tail_mass_estimate(1, 1.0, table.spec());
        assert!((corrected - 1.0).abs() <= 2e-3, "corrected mass {corrected}");
    }

    #[test]
    fn vertical_marginal_matches_sech_law() {
        // ∫ h₁(z, τ) dz = (1/8) sech(πτ/8), an independent closed form
        let table = test_support::small_table();
        let spec = table.spec();
        let ntau = spec.ntau();
        let cell_xy = spec.hx() * spec.hy();
        for &k in &[ntau / 2, ntau / 2 + 6, ntau / 2 + 12] {
            let tau = spec.axis_coord(2, k);
            let mut sum = 0.0;
            for col in 0..spec.nx() * spec.ny() {
                sum += table.field().values()[col * ntau + k];
            }
            let got = sum * cell_xy;
            let want = 0.125 / (std::f64::consts::PI * tau / 8.0).cosh();
            // horizontal truncation bites harder at large |τ| (conditional
            // spread grows), hence the 2% allowance over three decades
            assert!(
                (got - want).abs() <= 2e-2 * want,
                "marginal at tau={tau}: got {got:.6e}, want {want:.6e}"
            );
        }
    }

    #[test]
    fn grid_refinement_moves_mass_little() {
        let params = QuadratureParams::default();
        let coarse = test_support::small_kernel_spec();
        let fine = GridSpec::new(1, 48, 48, 96, 5.0, 5.0, 30.0).unwrap();
        let mc = integrate_field(&sample_kernel_field(1, 1.0, &coarse, &params).unwrap());
        let mf = integrate_field(&sample_kernel_field(1, 1.0, &fine, &params).unwrap());
        assert!((mc - mf).abs() <= 5e-3, "coarse {mc}, fine {mf}");
    }

    #[test]
    fn table_scaling_route_agrees_with_direct_quadrature() {
        let table = test_support::small_table();
        let spec = table.spec().clone();
        let params = *table.params();
        for &t in &[0.5f64, 2.0] {
            let via_table = kernel_field_from_table(&table, &spec, t).unwrap();
            let direct = sample_kernel_field(1, t, &spec, &params).unwrap();
            let diff = via_table.zip(&direct, |a, b| a - b).unwrap();
            let l1 = crate::field::lp_norm(&diff, 1.0).unwrap();
            assert!(l1 <= 2e-2, "t={t}: route disagreement {l1}");
        }
        // t = 1 lands on lattice nodes, so the table route is exact there
        let same = kernel_field_from_table(&table, &spec, 1.0).unwrap();
        assert_eq!(same.values(), table.field().values());
    }

    #[test]
    fn cache_roundtrip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let spec = test_support::small_kernel_spec();
        let params = QuadratureParams::default();
        let (fresh, from_cache1) = tabulate_kernel_cached(1, &spec, &params, dir.path()).unwrap();
        assert!(!from_cache1);
        let (cached, from_cache2) = tabulate_kernel_cached(1, &spec, &params, dir.path()).unwrap();
        assert!(from_cache2);
        assert_eq!(fresh.field().values(), cached.field().values());
    }

    #[test]
    fn corrupted_cache_reports_broken_invariant() {
        let dir = tempfile::tempdir().unwrap();
        let spec = test_support::small_kernel_spec();
        let params = QuadratureParams::default();
        let (table, _) = tabulate_kernel_cached(1, &spec, &params, dir.path()).unwrap();
        let path = cache_path(dir.path(), 1, &spec, &params);

        // forge the cache with doubled values
        let doubled = KernelTable {
            n: table.n,
            params,
            field: table.field().scaled(2.0),
        };
        doubled.save(&path).unwrap();

        match tabulate_kernel_cached(1, &spec, &params, dir.path()) {
            Err(Error::Numerical(msg)) => {
                assert!(msg.contains("normalization"), "message: {msg}")
            }
            other => panic!("expected a named invariant failure, got {other:?}"),
        }
    }
}
