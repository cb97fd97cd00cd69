//! Heisenberg group algebra on `R^{2n+1}`.
//!
//! A point is `(x, y, τ)` with `x, y ∈ R^n` and the group product
//!
//! ```text
//! (x, y, τ) ∘ (x', y', τ') = (x + x', y + y', τ + τ' + 2(x·y' − x'·y))
//! ```
//!
//! Parabolic dilations `δ_λ(x, y, τ) = (λx, λy, λ²τ)` are group
//! automorphisms with Jacobian `λ^Q`, `Q = 2n + 2`.

use crate::error::{Error, Result};

/// Group dimension bundle: `n` and the homogeneous dimension `Q = 2n + 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupDim {
    n: usize,
}

impl GroupDim {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::usage("group dimension n must be >= 1"));
        }
        Ok(GroupDim { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Homogeneous dimension `Q = 2n + 2`.
    pub fn q(&self) -> usize {
        2 * self.n + 2
    }
}

/// A point `η = (x, y, τ)` of the Heisenberg group.
///
/// Coordinates are finite doubles; `x` and `y` have equal length `n ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HPoint {
    x: Vec<f64>,
    y: Vec<f64>,
    tau: f64,
}

impl HPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>, tau: f64) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::usage(format!(
                "x and y must have equal nonzero length, got {} and {}",
                x.len(),
                y.len()
            )));
        }
        if !tau.is_finite() || x.iter().chain(y.iter()).any(|c| !c.is_finite()) {
            return Err(Error::usage("point coordinates must be finite"));
        }
        Ok(HPoint { x, y, tau })
    }

    /// Point for `n = 1`.
    pub fn new1(x: f64, y: f64, tau: f64) -> Self {
        HPoint::new(vec![x], vec![y], tau).expect("finite scalar coordinates")
    }

    /// Identity element of `H^n`.
    pub fn origin(n: usize) -> Self {
        HPoint {
            x: vec![0.0; n],
            y: vec![0.0; n],
            tau: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `|x|² + |y|²`, the squared horizontal radius.
    pub fn horizontal_sq(&self) -> f64 {
        let sx: f64 = self.x.iter().map(|v| v * v).sum();
        let sy: f64 = self.y.iter().map(|v| v * v).sum();
        sx + sy
    }
}

/// Group product `a ∘ b`.
pub fn group_mul(a: &HPoint, b: &HPoint) -> Result<HPoint> {
    if a.n() != b.n() {
        return Err(Error::usage(format!(
            "dimension mismatch: {} vs {}",
            a.n(),
            b.n()
        )));
    }
    let x: Vec<f64> = a.x.iter().zip(&b.x).map(|(u, v)| u + v).collect();
    let y: Vec<f64> = a.y.iter().zip(&b.y).map(|(u, v)| u + v).collect();
    let twist: f64 = a
        .x
        .iter()
        .zip(&b.y)
        .map(|(u, v)| u * v)
        .sum::<f64>()
        - b.x.iter().zip(&a.y).map(|(u, v)| u * v).sum::<f64>();
    Ok(HPoint {
        x,
        y,
        tau: a.tau + b.tau + 2.0 * twist,
    })
}

/// Group inverse: `η⁻¹ = −η`.
pub fn group_inv(a: &HPoint) -> HPoint {
    HPoint {
        x: a.x.iter().map(|v| -v).collect(),
        y: a.y.iter().map(|v| -v).collect(),
        tau: -a.tau,
    }
}

/// Parabolic dilation `δ_λ(x, y, τ) = (λx, λy, λ²τ)`, `λ > 0`.
pub fn dilate(lambda: f64, a: &HPoint) -> Result<HPoint> {
    if !(lambda > 0.0) {
        return Err(Error::usage(format!("dilation factor must be > 0, got {lambda}")));
    }
    Ok(HPoint {
        x: a.x.iter().map(|v| lambda * v).collect(),
        y: a.y.iter().map(|v| lambda * v).collect(),
        tau: lambda * lambda * a.tau,
    })
}

/// Korányi gauge `((|x|² + |y|²)² + τ²)^{1/4}`.
pub fn koranyi_norm(a: &HPoint) -> f64 {
    let h = a.horizontal_sq();
    (h * h + a.tau * a.tau).sqrt().sqrt()
}

/// Korányi distance `d(a, b) = |b⁻¹ ∘ a|`.
pub fn koranyi_dist(a: &HPoint, b: &HPoint) -> Result<f64> {
    Ok(koranyi_norm(&group_mul(&group_inv(b), a)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(x: f64, y: f64, tau: f64) -> HPoint {
        HPoint::new1(x, y, tau)
    }

    #[test]
    fn homogeneous_dimension() {
        assert_eq!(GroupDim::new(1).unwrap().q(), 4);
        assert_eq!(GroupDim::new(3).unwrap().q(), 8);
        assert!(GroupDim::new(0).is_err());
    }

    #[test]
    fn identity_element() {
        let e = HPoint::origin(1);
        let a = pt(0.3, -1.2, 2.5);
        assert_eq!(group_mul(&e, &a).unwrap(), a);
        assert_eq!(group_mul(&a, &e).unwrap(), a);
    }

    #[test]
    fn product_is_noncommutative() {
        let a = pt(1.0, 0.0, 0.0);
        let b = pt(0.0, 1.0, 0.0);
        let ab = group_mul(&a, &b).unwrap();
        let ba = group_mul(&b, &a).unwrap();
        assert_eq!(ab, pt(1.0, 1.0, 2.0));
        assert_eq!(ba, pt(1.0, 1.0, -2.0));
    }

    #[test]
    fn inverse_negates_and_cancels() {
        let a = pt(1.0, 2.0, 3.0);
        assert_eq!(group_inv(&a), pt(-1.0, -2.0, -3.0));
        assert_eq!(group_inv(&HPoint::origin(1)), HPoint::origin(1));
        assert_eq!(group_inv(&group_inv(&a)), a);
        let prod = group_mul(&a, &group_inv(&a)).unwrap();
        assert_eq!(prod, HPoint::origin(1));
    }

    #[test]
    fn dilation_examples() {
        let a = pt(1.0, 1.0, 1.0);
        assert_eq!(dilate(1.0, &a).unwrap(), a);
        assert_eq!(dilate(2.0, &a).unwrap(), pt(2.0, 2.0, 4.0));
        assert!(dilate(0.0, &a).is_err());
        assert!(dilate(-1.0, &a).is_err());
    }

    #[test]
    fn koranyi_values() {
        assert_eq!(koranyi_norm(&pt(1.0, 0.0, 0.0)), 1.0);
        assert_eq!(koranyi_norm(&pt(0.0, 0.0, 1.0)), 1.0);
        let a = pt(1.0, 0.0, 0.0);
        let o = HPoint::origin(1);
        assert_eq!(koranyi_dist(&a, &a).unwrap(), 0.0);
        assert_eq!(koranyi_dist(&a, &o).unwrap(), 1.0);
    }

    #[test]
    fn dimension_mismatch_is_usage_error() {
        let a = pt(1.0, 0.0, 0.0);
        let b = HPoint::new(vec![1.0, 0.0], vec![0.0, 0.0], 0.0).unwrap();
        assert!(group_mul(&a, &b).is_err());
        assert!(koranyi_dist(&a, &b).is_err());
    }

    fn coord() -> impl Strategy<Value = f64> {
        prop_oneof![-10.0..10.0f64, -0.5..0.5f64]
    }

    fn point3() -> impl Strategy<Value = HPoint> {
        (coord(), coord(), coord()).prop_map(|(x, y, t)| pt(x, y, t))
    }

    fn max_scale(points: &[&HPoint]) -> f64 {
        points
            .iter()
            .flat_map(|p| {
                let mut cs: Vec<f64> = p.x().iter().chain(p.y()).map(|v| v.abs()).collect();
                cs.push(p.tau().abs());
                cs
            })
            .fold(1.0f64, f64::max)
    }

    proptest! {
        #[test]
        fn associativity(a in point3(), b in point3(), c in point3()) {
            let lhs = group_mul(&group_mul(&a, &b).unwrap(), &c).unwrap();
            let rhs = group_mul(&a, &group_mul(&b, &c).unwrap()).unwrap();
            let scale = max_scale(&[&a, &b, &c]);
            let tol = 1e-12 * scale * scale;
            prop_assert!((lhs.x()[0] - rhs.x()[0]).abs() <= tol);
            prop_assert!((lhs.y()[0] - rhs.y()[0]).abs() <= tol);
            prop_assert!((lhs.tau() - rhs.tau()).abs() <= tol);
        }

        #[test]
        fn dilation_is_automorphism(a in point3(), b in point3(), li in 0usize..3) {
            let lambda = [0.5, 2.0, 10.0][li];
            let lhs = dilate(lambda, &group_mul(&a, &b).unwrap()).unwrap();
            let rhs = group_mul(&dilate(lambda, &a).unwrap(), &dilate(lambda, &b).unwrap()).unwrap();
            let scale = max_scale(&[&a, &b]);
            let tol = 1e-12 * lambda * lambda * scale * scale;
            prop_assert!((lhs.x()[0] - rhs.x()[0]).abs() <= tol);
            prop_assert!((lhs.y()[0] - rhs.y()[0]).abs() <= tol);
            prop_assert!((lhs.tau() - rhs.tau()).abs() <= tol);
        }

        #[test]
        fn norm_homogeneity(a in point3(), li in 0usize..3) {
            let lambda = [0.5, 2.0, 10.0][li];
            let lhs = koranyi_norm(&dilate(lambda, &a).unwrap());
            let rhs = lambda * koranyi_norm(&a);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        }

        #[test]
        fn distance_symmetry_and_left_invariance(
            a in point3(), b in point3(), z in point3()
        ) {
            let dab = koranyi_dist(&a, &b).unwrap();
            let dba = koranyi_dist(&b, &a).unwrap();
            prop_assert!((dab - dba).abs() <= 1e-12 * dab.max(1.0));

            let za = group_mul(&z, &a).unwrap();
            let zb = group_mul(&z, &b).unwrap();
            let dz = koranyi_dist(&za, &zb).unwrap();
            let scale = max_scale(&[&a, &b, &z]);
            prop_assert!((dz - dab).abs() <= 1e-11 * (dab + scale * scale));
        }
    }
}
