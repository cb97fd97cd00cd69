//! Sampled scalar fields on a rectangular `(x, y, τ)` lattice with Haar
//! (Lebesgue) cell measure, plus the discrete horizontal calculus.
//!
//! Lattice convention: an axis with `N` points (even, ≥ 8) and half-width
//! `L` places nodes at `(i − N/2)·h`, `h = 2L/N`, `i = 0..N`. The lattice
//! passes through the origin and is closed under in-range differences,
//! which keeps the horizontal part of group convolutions exactly on-grid.
//! The covered interval is `[−L, L − h]`; reflection `η → −η` pairs node
//! `i` with node `N − i` for `i ≥ 1`.
//!
//! Derivatives use second-order central differences in the interior and
//! one-sided second-order stencils at the faces. Mixed second derivatives
//! compose two first-derivative passes.

pub mod io;

use crate::error::{Error, Result};
use crate::group::HPoint;
use rayon::prelude::*;

/// Geometry of a `(2n+1)`-dimensional sampling lattice.
///
/// Axes are ordered `x_1..x_n, y_1..y_n, τ`; flat storage is row-major with
/// the τ index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    n: usize,
    nx: usize,
    ny: usize,
    ntau: usize,
    lx: f64,
    ly: f64,
    ltau: f64,
}

impl GridSpec {
    pub fn new(n: usize, nx: usize, ny: usize, ntau: usize, lx: f64, ly: f64, ltau: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::usage("grid needs n >= 1"));
        }
        for (name, count) in [("nx", nx), ("ny", ny), ("ntau", ntau)] {
            if count < 8 || count % 2 != 0 {
                return Err(Error::usage(format!(
                    "axis count {name} must be even and >= 8, got {count}"
                )));
            }
        }
        for (name, half) in [("lx", lx), ("ly", ly), ("ltau", ltau)] {
            if !(half > 0.0) || !half.is_finite() {
                return Err(Error::usage(format!(
                    "half-width {name} must be positive and finite, got {half}"
                )));
            }
        }
        Ok(GridSpec { n, nx, ny, ntau, lx, ly, ltau })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn ntau(&self) -> usize {
        self.ntau
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn ltau(&self) -> f64 {
        self.ltau
    }

    pub fn hx(&self) -> f64 {
        2.0 * self.lx / self.nx as f64
    }
    pub fn hy(&self) -> f64 {
        2.0 * self.ly / self.ny as f64
    }
    pub fn htau(&self) -> f64 {
        2.0 * self.ltau / self.ntau as f64
    }

    /// Product of all `2n+1` axis spacings.
    pub fn cell_volume(&self) -> f64 {
        self.hx().powi(self.n as i32) * self.hy().powi(self.n as i32) * self.htau()
    }

    /// Number of lattice nodes.
    pub fn len(&self) -> usize {
        self.nx.pow(self.n as u32) * self.ny.pow(self.n as u32) * self.ntau
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of axes, `2n + 1`.
    pub fn axes(&self) -> usize {
        2 * self.n + 1
    }

    pub fn axis_len(&self, axis: usize) -> usize {
        if axis < self.n {
            self.nx
        } else if axis < 2 * self.n {
            self.ny
        } else {
            self.ntau
        }
    }

    pub fn axis_spacing(&self, axis: usize) -> f64 {
        if axis < self.n {
            self.hx()
        } else if axis < 2 * self.n {
            self.hy()
        } else {
            self.htau()
        }
    }

    /// Shape vector `[nx; n] ++ [ny; n] ++ [ntau]`.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.axes());
        s.extend(std::iter::repeat(self.nx).take(self.n));
        s.extend(std::iter::repeat(self.ny).take(self.n));
        s.push(self.ntau);
        s
    }

    /// Node coordinate along an axis: `(i − N/2)·h`.
    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        (i as f64 - (self.axis_len(axis) / 2) as f64) * self.axis_spacing(axis)
    }

    /// Decode a flat index into per-axis indices.
    pub fn multi_index(&self, mut idx: usize, out: &mut [usize]) {
        debug_assert_eq!(out.len(), self.axes());
        for axis in (0..self.axes()).rev() {
            let len = self.axis_len(axis);
            out[axis] = idx % len;
            idx /= len;
        }
        debug_assert_eq!(idx, 0);
    }

    /// Group point at a flat index.
    pub fn point_at(&self, idx: usize) -> HPoint {
        let mut mi = vec![0usize; self.axes()];
        self.multi_index(idx, &mut mi);
        let x: Vec<f64> = (0..self.n).map(|a| self.axis_coord(a, mi[a])).collect();
        let y: Vec<f64> = (0..self.n)
            .map(|a| self.axis_coord(self.n + a, mi[self.n + a]))
            .collect();
        let tau = self.axis_coord(2 * self.n, mi[2 * self.n]);
        HPoint::new(x, y, tau).expect("lattice coordinates are finite")
    }
}

/// A real-valued function sampled on a [`GridSpec`] lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::usage(format!(
                "value count {} does not match grid size {}",
                values.len(),
                spec.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::numerical(format!(
                "non-finite value at flat index {i}"
            )));
        }
        Ok(GridField { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        let len = spec.len();
        GridField { spec, values: vec![0.0; len] }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Elementwise map into a new field on the same lattice.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> GridField {
        let values = self.values.par_iter().map(|&v| f(v)).collect();
        GridField { spec: self.spec.clone(), values }
    }

    pub fn scaled(&self, c: f64) -> GridField {
        self.map(|v| c * v)
    }

    /// Elementwise combination of two fields on the same lattice.
    pub fn zip(&self, other: &GridField, f: impl Fn(f64, f64) -> f64 + Sync) -> Result<GridField> {
        if self.spec != other.spec {
            return Err(Error::usage("grid spec mismatch"));
        }
        let values = self
            .values
            .par_iter()
            .zip(other.values.par_iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(GridField { spec: self.spec.clone(), values })
    }
}

/// Sample a pointwise function on every lattice node.
pub fn sample_function(spec: &GridSpec, f: impl Fn(&HPoint) -> f64 + Sync) -> Result<GridField> {
    let values: Vec<f64> = (0..spec.len())
        .into_par_iter()
        .map(|idx| f(&spec.point_at(idx)))
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        let p = spec.point_at(i);
        return Err(Error::numerical(format!(
            "sampled function is not finite at node {i} = (x={:?}, y={:?}, tau={})",
            p.x(),
            p.y(),
            p.tau()
        )));
    }
    GridField::new(spec.clone(), values)
}

/// Rectangle-rule integral `Σ values · cellVolume`.
pub fn integrate_field(u: &GridField) -> f64 {
    u.values.iter().sum::<f64>() * u.spec.cell_volume()
}

/// `L^p` norm for `p ∈ [1, ∞]`; pass `f64::INFINITY` for the sup norm.
pub fn lp_norm(u: &GridField, p: f64) -> Result<f64> {
    if p.is_infinite() && p > 0.0 {
        return Ok(u.values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    if !(p >= 1.0) {
        return Err(Error::usage(format!("lp_norm requires p >= 1, got {p}")));
    }
    let v = u.spec.cell_volume();
    if p == 1.0 {
        return Ok(u.values.iter().map(|x| x.abs()).sum::<f64>() * v);
    }
    if p == 2.0 {
        return Ok((u.values.iter().map(|x| x * x).sum::<f64>() * v).sqrt());
    }
    Ok((u.values.iter().map(|x| x.abs().powf(p)).sum::<f64>() * v).powf(1.0 / p))
}

fn axis_stride(shape: &[usize], axis: usize) -> usize {
    shape[axis + 1..].iter().product()
}

/// Per-axis finite difference, second-order, one-sided at faces.
fn axis_derivative(values: &[f64], shape: &[usize], axis: usize, h: f64, second: bool) -> Vec<f64> {
    let len = shape[axis];
    let stride = axis_stride(shape, axis);
    let block = stride * len;
    let total = values.len();
    let mut out = vec![0.0; total];
    let inv = 1.0 / h;
    let inv2 = inv * inv;

    out.par_chunks_mut(block)
        .zip(values.par_chunks(block))
        .for_each(|(ochunk, vchunk)| {
            for inner in 0..stride {
                let at = |i: usize| vchunk[inner + i * stride];
                for i in 0..len {
                    let d = if second {
                        if i == 0 {
                            (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) * inv2
                        } else if i == len - 1 {
                            (2.0 * at(len - 1) - 5.0 * at(len - 2) + 4.0 * at(len - 3)
                                - at(len - 4))
                                * inv2
                        } else {
                            (at(i + 1) - 2.0 * at(i) + at(i - 1)) * inv2
                        }
                    } else if i == 0 {
                        (-3.0 * at(0) + 4.0 * at(1) - at(2)) * 0.5 * inv
                    } else if i == len - 1 {
                        (3.0 * at(len - 1) - 4.0 * at(len - 2) + at(len - 3)) * 0.5 * inv
                    } else {
                        (at(i + 1) - at(i - 1)) * 0.5 * inv
                    };
                    ochunk[inner + i * stride] = d;
                }
            }
        });
    out
}

/// Discrete horizontal gradient `(X_1 u, …, X_n u, Y_1 u, …, Y_n u)` with
/// `X_i = ∂_{x_i} − 2 y_i ∂_τ` and `Y_i = ∂_{y_i} + 2 x_i ∂_τ`.
pub fn apply_horizontal_gradient(u: &GridField) -> Vec<GridField> {
    let spec = &u.spec;
    let n = spec.n();
    let shape = spec.shape();
    let tau_axis = 2 * n;
    let dtau = axis_derivative(&u.values, &shape, tau_axis, spec.htau(), false);

    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let dxi = axis_derivative(&u.values, &shape, i, spec.hx(), false);
        let mut vals = vec![0.0; u.values.len()];
        let yaxis = n + i;
        fill_with_coord(spec, &mut vals, yaxis, |yi, idx| dxi[idx] - 2.0 * yi * dtau[idx]);
        out.push(GridField { spec: spec.clone(), values: vals });
    }
    for i in 0..n {
        let dyi = axis_derivative(&u.values, &shape, n + i, spec.hy(), false);
        let mut vals = vec![0.0; u.values.len()];
        fill_with_coord(spec, &mut vals, i, |xi, idx| dyi[idx] + 2.0 * xi * dtau[idx]);
        out.push(GridField { spec: spec.clone(), values: vals });
    }
    out
}

/// Evaluate `vals[idx] = f(coord_along_axis(idx), idx)` over the lattice.
fn fill_with_coord(spec: &GridSpec, vals: &mut [f64], axis: usize, f: impl Fn(f64, usize) -> f64 + Sync) {
    let shape = spec.shape();
    let stride = axis_stride(&shape, axis);
    let len = shape[axis];
    vals.par_iter_mut().enumerate().for_each(|(idx, v)| {
        let i = (idx / stride) % len;
        let c = spec.axis_coord(axis, i);
        *v = f(c, idx);
    });
}

/// Discrete sub-Laplacian
/// `Δ_x u + Δ_y u + 4(|x|²+|y|²) ∂²_τ u + 4 Σ_i (x_i ∂²_{y_i τ} u − y_i ∂²_{x_i τ} u)`.
pub fn apply_sublaplacian(u: &GridField) -> GridField {
    let spec = &u.spec;
    let n = spec.n();
    let shape = spec.shape();
    let tau_axis = 2 * n;

    let mut acc = vec![0.0; u.values.len()];

    for axis in 0..n {
        let d = axis_derivative(&u.values, &shape, axis, spec.hx(), true);
        acc.par_iter_mut().zip(d.par_iter()).for_each(|(a, b)| *a += b);
    }
    for axis in n..2 * n {
        let d = axis_derivative(&u.values, &shape, axis, spec.hy(), true);
        acc.par_iter_mut().zip(d.par_iter()).for_each(|(a, b)| *a += b);
    }

    let d2tau = axis_derivative(&u.values, &shape, tau_axis, spec.htau(), true);
    {
        let nloc = n;
        let speccl = spec.clone();
        acc.par_iter_mut().enumerate().for_each(|(idx, a)| {
            let mut mi = vec![0usize; speccl.axes()];
            speccl.multi_index(idx, &mut mi);
            let mut hsq = 0.0;
            for ax in 0..nloc {
                let c = speccl.axis_coord(ax, mi[ax]);
                hsq += c * c;
            }
            for ax in nloc..2 * nloc {
                let c = speccl.axis_coord(ax, mi[ax]);
                hsq += c * c;
            }
            *a += 4.0 * hsq * d2tau[idx];
        });
    }

    let dtau = axis_derivative(&u.values, &shape, tau_axis, spec.htau(), false);
    for i in 0..n {
        let d_ytau = axis_derivative(&dtau, &shape, n + i, spec.hy(), false);
        fill_add_with_coord(spec, &mut acc, i, |xi, idx| 4.0 * xi * d_ytau[idx]);
        let d_xtau = axis_derivative(&dtau, &shape, i, spec.hx(), false);
        fill_add_with_coord(spec, &mut acc, n + i, |yi, idx| -4.0 * yi * d_xtau[idx]);
    }

    GridField { spec: spec.clone(), values: acc }
}

/// Plain vertical derivative `∂_τ u` (second-order stencils).
pub fn apply_tau_derivative(u: &GridField) -> GridField {
    let spec = &u.spec;
    let shape = spec.shape();
    let d = axis_derivative(&u.values, &shape, 2 * spec.n(), spec.htau(), false);
    GridField { spec: spec.clone(), values: d }
}

fn fill_add_with_coord(spec: &GridSpec, vals: &mut [f64], axis: usize, f: impl Fn(f64, usize) -> f64 + Sync) {
    let shape = spec.shape();
    let stride = axis_stride(&shape, axis);
    let len = shape[axis];
    vals.par_iter_mut().enumerate().for_each(|(idx, v)| {
        let i = (idx / stride) % len;
        let c = spec.axis_coord(axis, i);
        *v += f(c, idx);
    });
}

/// Multilinear interpolation with zero extension.
///
/// Nodes one lattice step beyond each face act as zero ghosts, so values
/// decay linearly to zero across the outermost half cell and vanish
/// outside the box.
pub fn interpolate(u: &GridField, p: &HPoint) -> Result<f64> {
    let spec = &u.spec;
    if p.n() != spec.n() {
        return Err(Error::usage("point dimension does not match grid"));
    }
    let axes = spec.axes();
    let mut base = vec![0isize; axes];
    let mut frac = vec![0.0f64; axes];
    for axis in 0..axes {
        let c = if axis < spec.n() {
            p.x()[axis]
        } else if axis < 2 * spec.n() {
            p.y()[axis - spec.n()]
        } else {
            p.tau()
        };
        let len = spec.axis_len(axis) as isize;
        let zeta = c / spec.axis_spacing(axis) + (len / 2) as f64;
        if !(zeta >= -1.0) || !(zeta <= len as f64) {
            return Ok(0.0);
        }
        let i0 = zeta.floor();
        base[axis] = i0 as isize;
        // snap roundoff-level fractions so nodal values reproduce exactly
        let f = zeta - i0;
        frac[axis] = if f < 1e-9 {
            0.0
        } else if f > 1.0 - 1e-9 {
            base[axis] += 1;
            0.0
        } else {
            f
        };
    }

    let shape = spec.shape();
    let mut total = 0.0;
    for corner in 0..(1usize << axes) {
        let mut w = 1.0;
        let mut idx: isize = 0;
        let mut inside = true;
        for axis in 0..axes {
            let hi = (corner >> axis) & 1 == 1;
            let i = base[axis] + if hi { 1 } else { 0 };
            w *= if hi { frac[axis] } else { 1.0 - frac[axis] };
            if i < 0 || i >= shape[axis] as isize {
                inside = false;
                break;
            }
            idx = idx * shape[axis] as isize + i;
        }
        if inside && w != 0.0 {
            total += w * u.values[idx as usize];
        }
    }
    Ok(total)
}


#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> GridSpec {
        GridSpec::new(1, 16, 16, 16, 2.0, 2.0, 2.0).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(GridSpec::new(1, 7, 8, 8, 1.0, 1.0, 1.0).is_err());
        assert!(GridSpec::new(1, 9, 8, 8, 1.0, 1.0, 1.0).is_err());
        assert!(GridSpec::new(1, 8, 8, 8, 0.0, 1.0, 1.0).is_err());
        assert!(GridSpec::new(0, 8, 8, 8, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn lattice_contains_origin_and_cell_volume_is_spacing_product() {
        let s = small_spec();
        assert_eq!(s.axis_coord(0, 8), 0.0);
        assert_eq!(s.axis_coord(2, 8), 0.0);
        let h = s.hx();
        assert!((s.cell_volume() - h * s.hy() * s.htau()).abs() < 1e-15);
        // n = 2 variant: volume is the product over all five axes
        let s2 = GridSpec::new(2, 8, 8, 8, 1.0, 1.0, 1.0).unwrap();
        let v = s2.hx() * s2.hx() * s2.hy() * s2.hy() * s2.htau();
        assert!((s2.cell_volume() - v).abs() < 1e-15);
        assert_eq!(s2.len(), 8usize.pow(5));
    }

    #[test]
    fn sampling_and_integration() {
        let s = small_spec();
        let zero = sample_function(&s, |_| 0.0).unwrap();
        assert_eq!(integrate_field(&zero), 0.0);

        let one = sample_function(&s, |_| 1.0).unwrap();
        let expect = (2.0 * s.lx()) * (2.0 * s.ly()) * (2.0 * s.ltau());
        assert!((integrate_field(&one) - expect).abs() < 1e-12 * expect);

        let bump = sample_function(&s, |p| (-p.horizontal_sq() - p.tau().powi(2)).exp()).unwrap();
        let scaled = bump.scaled(3.0);
        assert!((integrate_field(&scaled) - 3.0 * integrate_field(&bump)).abs() < 1e-12);

        // pointwise agreement at a node
        let idx = 1234;
        let p = s.point_at(idx);
        assert_eq!(bump.values()[idx], (-p.horizontal_sq() - p.tau().powi(2)).exp());
    }

    #[test]
    fn sampling_rejects_nan() {
        let s = small_spec();
        let r = sample_function(&s, |p| if p.tau() > 1.0 { f64::NAN } else { 0.0 });
        match r {
            Err(Error::Numerical(msg)) => assert!(msg.contains("node")),
            other => panic!("expected numerical error, got {other:?}"),
        }
    }

    #[test]
    fn lp_norms() {
        let s = small_spec();
        let zero = GridField::zeros(s.clone());
        assert_eq!(lp_norm(&zero, 1.0).unwrap(), 0.0);
        assert_eq!(lp_norm(&zero, f64::INFINITY).unwrap(), 0.0);

        let u = sample_function(&s, |p| (-p.horizontal_sq()).exp()).unwrap();
        assert!(lp_norm(&u, 0.5).is_err());
        let c = -2.5;
        let l2 = lp_norm(&u, 2.0).unwrap();
        let l2c = lp_norm(&u.scaled(c), 2.0).unwrap();
        assert!((l2c - c.abs() * l2).abs() <= 1e-12 * l2);

        // L¹ of a nonnegative field equals its integral
        let l1 = lp_norm(&u, 1.0).unwrap();
        assert!((l1 - integrate_field(&u)).abs() <= 1e-12 * l1);
    }

    #[test]
    fn gradient_on_constant_and_linear_fields() {
        let s = small_spec();
        let c = sample_function(&s, |_| 7.5).unwrap();
        for g in apply_horizontal_gradient(&c) {
            assert!(lp_norm(&g, f64::INFINITY).unwrap() <= 1e-12);
        }

        let u = sample_function(&s, |p| p.x()[0]).unwrap();
        let g = apply_horizontal_gradient(&u);
        for v in g[0].values() {
            assert!((v - 1.0).abs() <= 1e-11);
        }
        assert!(lp_norm(&g[1], f64::INFINITY).unwrap() <= 1e-11);
    }

    #[test]
    fn gradient_of_tau_couples_coordinates() {
        // u = τ: X₁u = −2y₁, Y₁u = 2x₁
        let s = small_spec();
        let u = sample_function(&s, |p| p.tau()).unwrap();
        let g = apply_horizontal_gradient(&u);
        let mut worst = 0.0f64;
        for idx in 0..s.len() {
            let p = s.point_at(idx);
            worst = worst.max((g[0].values()[idx] + 2.0 * p.y()[0]).abs());
            worst = worst.max((g[1].values()[idx] - 2.0 * p.x()[0]).abs());
        }
        assert!(worst <= 1e-10, "worst deviation {worst}");
    }

    /// Interior slab (skips `margin` nodes at every face).
    fn interior_max_diff(s: &GridSpec, a: &GridField, b: impl Fn(usize) -> f64, margin: usize) -> f64 {
        let mut mi = vec![0usize; s.axes()];
        let mut worst = 0.0f64;
        for idx in 0..s.len() {
            s.multi_index(idx, &mut mi);
            let interior = (0..s.axes())
                .all(|ax| mi[ax] >= margin && mi[ax] < s.axis_len(ax) - margin);
            if interior {
                worst = worst.max((a.values()[idx] - b(idx)).abs());
            }
        }
        worst
    }

    #[test]
    fn sublaplacian_on_polynomials() {
        let s = small_spec();
        // u = x₁² ⇒ Δ_H u = 2 (central differences exact on quadratics)
        let u = sample_function(&s, |p| p.x()[0] * p.x()[0]).unwrap();
        let lap = apply_sublaplacian(&u);
        let worst = interior_max_diff(&s, &lap, |_| 2.0, 1);
        assert!(worst <= 1e-8, "worst {worst}");

        // u = τ² ⇒ Δ_H u = 8(|x|²+|y|²)
        let u = sample_function(&s, |p| p.tau() * p.tau()).unwrap();
        let lap = apply_sublaplacian(&u);
        let worst = interior_max_diff(&s, &lap, |idx| 8.0 * s.point_at(idx).horizontal_sq(), 1);
        assert!(worst <= 1e-8, "worst {worst}");

        // u = x₁τ ⇒ Δ_H u = −4y₁ (checked against the analytic operator oracle)
        let u = sample_function(&s, |p| p.x()[0] * p.tau()).unwrap();
        let lap = apply_sublaplacian(&u);
        let worst = interior_max_diff(&s, &lap, |idx| -4.0 * s.point_at(idx).y()[0], 1);
        assert!(worst <= 1e-8, "worst {worst}");
    }

    #[test]
    fn sublaplacian_matches_analytic_oracle_at_second_order() {
        let oracle = test_oracle::gaussian_like();
        let mut errs = Vec::new();
        for &(nn, ll) in &[(16usize, 2.5f64), (32, 2.5)] {
            let s = GridSpec::new(1, nn, nn, nn, ll, ll, ll).unwrap();
            let u = sample_function(&s, |p| (oracle.f)(p)).unwrap();
            let lap = apply_sublaplacian(&u);
            let worst = interior_max_diff(&s, &lap, |idx| oracle.sublaplacian(&s.point_at(idx)), 1);
            errs.push(worst);
        }
        // halving all spacings must cut the interior error at least 3x
        assert!(
            errs[0] / errs[1] >= 3.0,
            "convergence ratio {} (errors {:?})",
            errs[0] / errs[1],
            errs
        );
    }

    #[test]
    fn horizontal_gradient_matches_analytic_oracle() {
        let oracle = test_oracle::gaussian_like();
        let mut errs = Vec::new();
        for &nn in &[16usize, 32] {
            let s = GridSpec::new(1, nn, nn, nn, 2.5, 2.5, 2.5).unwrap();
            let u = sample_function(&s, |p| (oracle.f)(p)).unwrap();
            let g = apply_horizontal_gradient(&u);
            let mut worst = 0.0f64;
            for comp in 0..2 {
                worst = worst.max(interior_max_diff(
                    &s,
                    &g[comp],
                    |idx| oracle.horizontal_gradient(&s.point_at(idx))[comp],
                    1,
                ));
            }
            errs.push(worst);
        }
        assert!(errs[1] <= 5e-2, "absolute error too large: {:?}", errs);
        assert!(
            errs[0] / errs[1] >= 3.0,
            "convergence ratio {} (errors {:?})",
            errs[0] / errs[1],
            errs
        );
    }

    #[test]
    fn interpolation_reproduces_nodes_and_linear_functions() {
        let s = small_spec();
        let u = sample_function(&s, |p| 0.5 * p.x()[0] - 1.5 * p.y()[0] + 0.25 * p.tau()).unwrap();

        // exact at nodes
        let idx = 777;
        let p = s.point_at(idx);
        assert_eq!(interpolate(&u, &p).unwrap(), u.values()[idx]);

        // multilinear exactness on a linear function at an interior off-node point
        let q = HPoint::new1(0.31, -0.77, 0.13);
        let expect = 0.5 * 0.31 - 1.5 * (-0.77) + 0.25 * 0.13;
        assert!((interpolate(&u, &q).unwrap() - expect).abs() <= 1e-12);

        // zero extension outside the box
        let far = HPoint::new1(5.0, 0.0, 0.0);
        assert_eq!(interpolate(&u, &far).unwrap(), 0.0);
    }

    #[test]
    fn interpolation_stays_within_neighbor_spread() {
        let s = small_spec();
        let u = sample_function(&s, |p| (-p.horizontal_sq() - p.tau().powi(2)).exp()).unwrap();
        // strictly interior probe points: interpolation is a convex combination
        for &(a, b, c) in &[(0.311, -0.42, 0.9), (1.2, 0.05, -1.11), (-0.73, 0.66, 0.21)] {
            let p = HPoint::new1(a, b, c);
            let v = interpolate(&u, &p).unwrap();
            assert!(v >= 0.0 && v <= u.max_value());
        }
    }
}
