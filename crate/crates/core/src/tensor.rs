//! Minkowski geometry and symmetric 2-tensor algebra on raw components.
//!
//! Everything is stored by components in the order `(time, space1, space2, space3)`.
//! There is no index raising or lowering: pairings between covectors and vectors
//! are plain Euclidean sums of components, which is what the light ray
//! contractions `f_{jk} theta^j theta^k` need.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Packed index order of [`Sym2`]: `(00),(01),(02),(03),(11),(12),(13),(22),(23),(33)`.
pub const PAIRS: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 2),
    (2, 3),
    (3, 3),
];

/// Multiplicity of each packed component in a full 4x4 sum (off-diagonals count twice).
pub const FROBENIUS_WEIGHT: [f64; 10] = [1.0, 2.0, 2.0, 2.0, 1.0, 2.0, 2.0, 1.0, 2.0, 1.0];

/// Packed position of the `(j, k)` entry.
#[inline]
pub fn pair_index(j: usize, k: usize) -> usize {
    let (a, b) = if j <= k { (j, k) } else { (k, j) };
    match (a, b) {
        (0, b) => b,
        (1, b) => 3 + b,
        (2, b) => 5 + b,
        (3, 3) => 9,
        _ => panic!("tensor index out of range: ({j}, {k})"),
    }
}

/// Frequency / cotangent vector `eta = (eta0, eta1, eta2, eta3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covector(pub [f64; 4]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CausalClass {
    SpaceLike,
    TimeLike,
    LightLike,
}

impl Covector {
    pub fn new(e0: f64, e1: f64, e2: f64, e3: f64) -> Self {
        Covector([e0, e1, e2, e3])
    }

    #[inline]
    pub fn time(&self) -> f64 {
        self.0[0]
    }

    #[inline]
    pub fn spatial(&self) -> [f64; 3] {
        [self.0[1], self.0[2], self.0[3]]
    }

    /// Minkowski quadratic form `-(eta0)^2 + |eta'|^2`.
    #[inline]
    pub fn minkowski_q(&self) -> f64 {
        let e = &self.0;
        -e[0] * e[0] + e[1] * e[1] + e[2] * e[2] + e[3] * e[3]
    }

    #[inline]
    pub fn spatial_norm(&self) -> f64 {
        let e = &self.0;
        (e[1] * e[1] + e[2] * e[2] + e[3] * e[3]).sqrt()
    }

    #[inline]
    pub fn euclid_norm_sq(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Covector(self.0.map(|x| lambda * x))
    }

    /// Causal class with a relative band: space-like iff `q > eps |eta|^2`,
    /// time-like iff `q < -eps |eta|^2`, light-like otherwise.
    pub fn causal_class(&self, eps: f64) -> Result<CausalClass> {
        if eps < 0.0 || !eps.is_finite() {
            return Err(Error::invalid(format!("causal band eps must be >= 0, got {eps}")));
        }
        let n2 = self.euclid_norm_sq();
        if n2 == 0.0 {
            return Err(Error::ZeroCovector);
        }
        let q = self.minkowski_q();
        Ok(if q > eps * n2 {
            CausalClass::SpaceLike
        } else if q < -eps * n2 {
            CausalClass::TimeLike
        } else {
            CausalClass::LightLike
        })
    }
}

/// Free function form of [`Covector::minkowski_q`].
pub fn minkowski_q(eta: &Covector) -> f64 {
    eta.minkowski_q()
}

/// Free function form of [`Covector::causal_class`].
pub fn causal_class(eta: &Covector, eps: f64) -> Result<CausalClass> {
    eta.causal_class(eps)
}

/// Plain 4-vector: ray tangents `theta = (1, v)` and gauge vectors `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec4(pub [f64; 4]);

impl Vec4 {
    /// Future pointing light-like tangent `(1, v)` of the ray with spatial direction `v`.
    pub fn light_tangent(v: [f64; 3]) -> Self {
        Vec4([1.0, v[0], v[1], v[2]])
    }

    pub fn basis(i: usize) -> Self {
        let mut e = [0.0; 4];
        e[i] = 1.0;
        Vec4(e)
    }

    /// Euclidean component pairing with a covector.
    #[inline]
    pub fn pair(&self, eta: &Covector) -> f64 {
        self.0.iter().zip(eta.0.iter()).map(|(a, b)| a * b).sum()
    }
}

/// Symmetric 2-tensor stored as its 10 independent components (see [`PAIRS`]).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sym2(pub [f64; 10]);

impl Sym2 {
    pub const ZERO: Sym2 = Sym2([0.0; 10]);

    /// Minkowski metric `g = diag(-1, 1, 1, 1)`.
    pub fn metric() -> Self {
        let mut s = Sym2::ZERO;
        s.0[pair_index(0, 0)] = -1.0;
        s.0[pair_index(1, 1)] = 1.0;
        s.0[pair_index(2, 2)] = 1.0;
        s.0[pair_index(3, 3)] = 1.0;
        s
    }

    /// Tensor with a single independent entry `(j, k)` (and its mirror) equal to one.
    pub fn unit(j: usize, k: usize) -> Self {
        let mut s = Sym2::ZERO;
        s.0[pair_index(j, k)] = 1.0;
        s
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.0[pair_index(j, k)]
    }

    #[inline]
    pub fn set(&mut self, j: usize, k: usize, value: f64) {
        self.0[pair_index(j, k)] = value;
    }

    pub fn to_matrix(&self) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for (p, &(j, k)) in PAIRS.iter().enumerate() {
            m[j][k] = self.0[p];
            m[k][j] = self.0[p];
        }
        m
    }

    /// Packs the upper triangle; the lower triangle is ignored.
    pub fn from_matrix(m: &[[f64; 4]; 4]) -> Self {
        let mut s = Sym2::ZERO;
        for (p, &(j, k)) in PAIRS.iter().enumerate() {
            s.0[p] = m[j][k];
        }
        s
    }

    /// `sum_{j,k} f_{jk} theta^j theta^k` with off-diagonal entries counted twice.
    #[inline]
    pub fn contract(&self, theta: &Vec4) -> f64 {
        let t = &theta.0;
        let f = &self.0;
        f[0] * t[0] * t[0]
            + f[4] * t[1] * t[1]
            + f[7] * t[2] * t[2]
            + f[9] * t[3] * t[3]
            + 2.0
                * (f[1] * t[0] * t[1]
                    + f[2] * t[0] * t[2]
                    + f[3] * t[0] * t[3]
                    + f[5] * t[1] * t[2]
                    + f[6] * t[1] * t[3]
                    + f[8] * t[2] * t[3])
    }

    /// Frobenius pairing `sum_{jk} f_{jk} h_{jk}` over the full 4x4 arrays.
    #[inline]
    pub fn frobenius_dot(&self, other: &Sym2) -> f64 {
        (0..10).map(|p| FROBENIUS_WEIGHT[p] * self.0[p] * other.0[p]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_dot(self).sqrt()
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(mut self, rhs: Sym2) -> Sym2 {
        self += rhs;
        self
    }
}

impl AddAssign for Sym2 {
    fn add_assign(&mut self, rhs: Sym2) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, rhs: Sym2) -> Sym2 {
        self + (-rhs)
    }
}

impl Neg for Sym2 {
    type Output = Sym2;
    fn neg(self) -> Sym2 {
        Sym2(self.0.map(|x| -x))
    }
}

impl Mul<Sym2> for f64 {
    type Output = Sym2;
    fn mul(self, rhs: Sym2) -> Sym2 {
        Sym2(rhs.0.map(|x| self * x))
    }
}

/// `eta (x) w + w (x) eta`, i.e. `eta_j w_k + eta_k w_j`.
///
/// Carries no factor 1/2; this is the normalisation of the gauge generators
/// `c g + eta (x) w + w (x) eta`. The symmetric differential in
/// [`crate::field::d_sym`] does include the 1/2.
pub fn sym_outer(eta: &Covector, w: &Vec4) -> Sym2 {
    let mut s = Sym2::ZERO;
    for (p, &(j, k)) in PAIRS.iter().enumerate() {
        s.0[p] = eta.0[j] * w.0[k] + eta.0[k] * w.0[j];
    }
    s
}

/// Free function form of [`Sym2::contract`].
pub fn contract(f: &Sym2, theta: &Vec4) -> f64 {
    f.contract(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quadratic_form() {
        assert_eq!(Covector::new(1.0, 0.0, 0.0, 0.0).minkowski_q(), -1.0);
        assert_eq!(Covector::new(0.0, 1.0, 0.0, 0.0).minkowski_q(), 1.0);
        assert_eq!(Covector::new(3.0, 4.0, 0.0, 0.0).minkowski_q(), 7.0);
    }

    #[test]
    fn causal_classes() {
        let c = |e: [f64; 4]| Covector(e).causal_class(0.0).unwrap();
        assert_eq!(c([1.0, 0.0, 0.0, 0.0]), CausalClass::TimeLike);
        assert_eq!(c([0.0, 1.0, 0.0, 0.0]), CausalClass::SpaceLike);
        assert_eq!(c([1.0, 1.0, 0.0, 0.0]), CausalClass::LightLike);
        assert!(matches!(
            Covector([0.0; 4]).causal_class(0.0),
            Err(Error::ZeroCovector)
        ));
        assert!(Covector([1.0, 0.0, 0.0, 0.0]).causal_class(-1.0).is_err());
    }

    #[test]
    fn band_widens_light_cone() {
        let eta = Covector::new(1.0, 1.1, 0.0, 0.0);
        assert_eq!(eta.causal_class(0.0).unwrap(), CausalClass::SpaceLike);
        assert_eq!(eta.causal_class(0.1).unwrap(), CausalClass::LightLike);
    }

    #[test]
    fn contraction_examples() {
        let v = [0.6, 0.0, 0.8];
        let theta = Vec4::light_tangent(v);
        assert_eq!(Sym2::unit(0, 0).contract(&theta), 1.0);
        assert!(Sym2::metric().contract(&theta).abs() < 1e-15);

        let f = sym_outer(&Covector::new(0.0, 1.0, 0.0, 0.0), &Vec4::basis(2));
        let theta = Vec4::light_tangent([1.0, 0.0, 0.0]);
        assert_eq!(f.contract(&theta), 0.0);
    }

    #[test]
    fn sym_outer_examples() {
        let e1 = Covector::new(0.0, 1.0, 0.0, 0.0);
        let s = sym_outer(&e1, &Vec4::basis(1));
        let mut expect = Sym2::ZERO;
        expect.set(1, 1, 2.0);
        assert_eq!(s, expect);

        let s = sym_outer(&Covector::new(1.0, 0.0, 0.0, 0.0), &Vec4::basis(1));
        assert_eq!(s, Sym2::unit(0, 1));

        assert_eq!(sym_outer(&Covector([0.0; 4]), &Vec4::basis(3)), Sym2::ZERO);
        assert_eq!(sym_outer(&e1, &Vec4([0.0; 4])), Sym2::ZERO);
    }

    #[test]
    fn pair_index_covers_packing() {
        for (p, &(j, k)) in PAIRS.iter().enumerate() {
            assert_eq!(pair_index(j, k), p);
            assert_eq!(pair_index(k, j), p);
        }
    }

    fn unit_vector() -> impl Strategy<Value = [f64; 3]> {
        (0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU).prop_map(|(t, p)| {
            [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]
        })
    }

    fn vec4() -> impl Strategy<Value = [f64; 4]> {
        prop::array::uniform4(-5.0..5.0f64)
    }

    proptest! {
        #[test]
        fn class_is_scale_invariant(e in vec4(), lambda in 1e-3..1e3f64, eps in 0.0..0.5f64) {
            let eta = Covector(e);
            prop_assume!(eta.euclid_norm_sq() > 1e-6);
            // skip covectors sitting on a band edge where rounding decides the class
            let ratio = eta.minkowski_q() / eta.euclid_norm_sq();
            prop_assume!((ratio.abs() - eps).abs() > 1e-9);
            prop_assert_eq!(eta.causal_class(eps).unwrap(), eta.scaled(lambda).causal_class(eps).unwrap());
        }

        #[test]
        fn contract_of_sym_outer_factorises(e in vec4(), w in vec4(), th in vec4()) {
            let eta = Covector(e);
            let theta = Vec4(th);
            let lhs = sym_outer(&eta, &Vec4(w)).contract(&theta);
            let rhs = 2.0 * theta.pair(&eta) * Vec4(w).pair(&Covector(th));
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn metric_annihilates_light_tangents(v in unit_vector()) {
            prop_assert!(Sym2::metric().contract(&Vec4::light_tangent(v)).abs() < 1e-15);
        }

        #[test]
        fn pack_unpack_is_exact(c in prop::array::uniform10(-1e6..1e6f64)) {
            let s = Sym2(c);
            prop_assert_eq!(Sym2::from_matrix(&s.to_matrix()), s);
        }
    }
}
