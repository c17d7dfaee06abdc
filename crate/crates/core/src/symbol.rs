//! The normal-operator symbol `a(eta)`, its null space and regularised pseudoinverse.
//!
//! For a space-like `eta` the rays that sense `eta` have directions on the circle
//! `S_eta = { v in S^2 : eta0 + v . eta' = 0 }`, and
//!
//! ```text
//! a_{jklm}(eta) = q(eta)^{-1/2} \int_{S_eta} theta^j theta^k theta^l theta^m dl,   theta = (1, v)
//! ```
//!
//! with `dl` arc length. Time-like covectors give the zero operator.
//!
//! Operators on `Sym2` are stored as 10x10 arrays of raw components `a[p][q]` with
//! `p = (jk)`, `q = (lm)` in packed order. Contracting over the full `(l, m)` range
//! counts off-diagonal `q` twice, so `(a f)_p = sum_q a[p][q] w_q f_q`. In Mandel
//! coordinates `f~_p = sqrt(w_p) f_p` the same operator is the symmetric Gram
//! matrix `G = D a D`, `D = diag(sqrt(w))`, and the Frobenius pairing becomes the
//! Euclidean one.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{sym_outer, Covector, Sym2, Vec4, FROBENIUS_WEIGHT, PAIRS};

pub type Mat10 = SMatrix<f64, 10, 10>;
pub type Vec10 = SVector<f64, 10>;

pub const DEFAULT_N_PHI: usize = 32;
/// Trapezoid quadrature of a degree-4 trigonometric polynomial is exact from here on.
pub const MIN_N_PHI: usize = 9;

fn sqrt_weights() -> [f64; 10] {
    FROBENIUS_WEIGHT.map(f64::sqrt)
}

/// Packed tensor to Mandel coordinates.
pub fn to_mandel(f: &Sym2) -> Vec10 {
    let s = sqrt_weights();
    Vec10::from_fn(|p, _| s[p] * f.0[p])
}

pub fn from_mandel(v: &Vec10) -> Sym2 {
    let s = sqrt_weights();
    Sym2(std::array::from_fn(|p| v[p] / s[p]))
}

/// Circle of light directions `S_eta` for a space-like covector.
#[derive(Debug, Clone, PartialEq)]
pub struct CirclePatch {
    pub eta: Covector,
    pub center: [f64; 3],
    pub radius: f64,
    /// Orthonormal pair spanning the plane orthogonal to `eta'`.
    pub frame: [[f64; 3]; 2],
    pub n_phi: usize,
}

impl CirclePatch {
    pub fn node(&self, k: usize) -> [f64; 3] {
        let phi = TAU * k as f64 / self.n_phi as f64;
        let (s, c) = phi.sin_cos();
        let [e1, e2] = self.frame;
        std::array::from_fn(|i| self.center[i] + self.radius * (c * e1[i] + s * e2[i]))
    }

    pub fn nodes(&self) -> Vec<[f64; 3]> {
        (0..self.n_phi).map(|k| self.node(k)).collect()
    }

    /// Arc-length weight of each node, `2 pi r / N_phi`.
    pub fn arc_weight(&self) -> f64 {
        TAU * self.radius / self.n_phi as f64
    }
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Orthonormal `(e1, e2)` with `e1, e2 ⟂ n` and `(e1, e2, n/|n|)` right handed.
pub(crate) fn plane_frame(n: &[f64; 3]) -> [[f64; 3]; 2] {
    let len = norm3(n);
    let u = n.map(|x| x / len);
    let axis = (0..3)
        .min_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()))
        .unwrap_or(0);
    let mut e1 = [0.0; 3];
    e1[axis] = 1.0;
    let d = e1[axis] * u[axis];
    for i in 0..3 {
        e1[i] -= d * u[i];
    }
    let l1 = norm3(&e1);
    e1 = e1.map(|x| x / l1);
    let e2 = [
        u[1] * e1[2] - u[2] * e1[1],
        u[2] * e1[0] - u[0] * e1[2],
        u[0] * e1[1] - u[1] * e1[0],
    ];
    [e1, e2]
}

pub fn circle_points(eta: &Covector, n_phi: usize) -> Result<CirclePatch> {
    if n_phi < MIN_N_PHI {
        return Err(Error::invalid(format!("N_phi must be at least {MIN_N_PHI}, got {n_phi}")));
    }
    let q = eta.minkowski_q();
    if !(q > 0.0) {
        return Err(Error::NotSpaceLike(eta.0));
    }
    let sp = eta.spatial();
    let n2 = sp.iter().map(|x| x * x).sum::<f64>();
    let nrm = n2.sqrt();
    let center = sp.map(|x| -eta.time() * x / n2);
    Ok(CirclePatch {
        eta: *eta,
        center,
        radius: q.sqrt() / nrm,
        frame: plane_frame(&sp),
        n_phi,
    })
}

/// Tensor-valued operator on `Sym2`, e.g. the symbol `a(eta)`, its pseudoinverse
/// or a projector. See the module docs for the storage convention.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolOperator {
    raw: Mat10,
    pub eta: Covector,
    /// Evaluation point, present for weighted symbols only.
    pub x: Option<[f64; 4]>,
}

impl SymbolOperator {
    pub fn zero(eta: Covector) -> Self {
        SymbolOperator {
            raw: Mat10::zeros(),
            eta,
            x: None,
        }
    }

    pub fn identity(eta: Covector) -> Self {
        Self::from_gram(&Mat10::identity(), eta)
    }

    pub fn from_raw(raw: Mat10, eta: Covector) -> Self {
        SymbolOperator { raw, eta, x: None }
    }

    pub fn from_gram(gram: &Mat10, eta: Covector) -> Self {
        let s = sqrt_weights();
        let raw = Mat10::from_fn(|p, q| gram[(p, q)] / (s[p] * s[q]));
        SymbolOperator { raw, eta, x: None }
    }

    pub fn raw(&self) -> &Mat10 {
        &self.raw
    }

    /// Symmetric matrix of the operator in Mandel coordinates.
    pub fn gram(&self) -> Mat10 {
        let s = sqrt_weights();
        Mat10::from_fn(|p, q| s[p] * self.raw[(p, q)] * s[q])
    }

    /// `a_{jklm}` for arbitrary index order.
    pub fn component(&self, j: usize, k: usize, l: usize, m: usize) -> f64 {
        self.raw[(crate::tensor::pair_index(j, k), crate::tensor::pair_index(l, m))]
    }

    /// `(a f)_{jk} = sum_{l,m} a_{jklm} f_{lm}`.
    pub fn apply(&self, f: &Sym2) -> Sym2 {
        Sym2(std::array::from_fn(|p| {
            (0..10).map(|q| self.raw[(p, q)] * FROBENIUS_WEIGHT[q] * f.0[q]).sum()
        }))
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &SymbolOperator) -> SymbolOperator {
        let w = Mat10::from_diagonal(&Vec10::from(FROBENIUS_WEIGHT));
        SymbolOperator {
            raw: self.raw * w * other.raw,
            eta: self.eta,
            x: self.x,
        }
    }

    pub fn scaled(&self, factor: f64) -> SymbolOperator {
        SymbolOperator {
            raw: self.raw * factor,
            eta: self.eta,
            x: self.x,
        }
    }

    pub fn sub(&self, other: &SymbolOperator) -> SymbolOperator {
        SymbolOperator {
            raw: self.raw - other.raw,
            eta: self.eta,
            x: self.x,
        }
    }

    /// Frobenius norm of the full 4-index array.
    pub fn frobenius_norm(&self) -> f64 {
        self.gram().norm()
    }

    pub fn is_zero(&self) -> bool {
        self.raw.iter().all(|&x| x == 0.0)
    }

    /// Gram-matrix eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 10] {
        let mut ev: Vec<f64> = self.gram().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        std::array::from_fn(|i| ev[i])
    }

    /// Orthogonal projector onto the span of eigenvectors with `lambda >= floor * lambda_max`.
    pub fn range_projector(&self, floor: f64) -> Result<SymbolOperator> {
        let (vecs, vals, lmax) = self.eigen()?;
        let mut p = Mat10::zeros();
        for (i, &l) in vals.iter().enumerate() {
            if l >= floor * lmax {
                let v = vecs.column(i);
                p += v * v.transpose();
            }
        }
        Ok(SymbolOperator::from_gram(&p, self.eta))
    }

    fn eigen(&self) -> Result<(Mat10, Vec10, f64)> {
        let eig = self.gram().symmetric_eigen();
        let lmax = eig.eigenvalues.max();
        if !(lmax > 0.0) {
            return Err(Error::ZeroOperator);
        }
        Ok((eig.eigenvectors, eig.eigenvalues, lmax))
    }
}

/// `a(eta)`; zero for time-like `eta`, an error exactly on the light cone.
pub fn symbol_a(eta: &Covector, n_phi: usize) -> Result<SymbolOperator> {
    symbol_core(eta, n_phi, None::<fn([f64; 3]) -> f64>, None)
}

/// `a(x, eta)` with the ray weight `chi(y)` entering squared at `y = x' - x0 v`.
pub fn symbol_a_weighted<F>(eta: &Covector, n_phi: usize, chi: F, x: [f64; 4]) -> Result<SymbolOperator>
where
    F: Fn([f64; 3]) -> f64,
{
    let mut a = symbol_core(eta, n_phi, Some(chi), Some(x))?;
    a.x = Some(x);
    Ok(a)
}

fn symbol_core<F>(eta: &Covector, n_phi: usize, chi: Option<F>, x: Option<[f64; 4]>) -> Result<SymbolOperator>
where
    F: Fn([f64; 3]) -> f64,
{
    if n_phi < MIN_N_PHI {
        return Err(Error::invalid(format!("N_phi must be at least {MIN_N_PHI}, got {n_phi}")));
    }
    let q = eta.minkowski_q();
    if q < 0.0 {
        return Ok(SymbolOperator::zero(*eta));
    }
    if q == 0.0 {
        return Err(Error::LightLikeEvaluation(eta.0));
    }
    let patch = circle_points(eta, n_phi)?;
    let base = patch.arc_weight() / q.sqrt();
    let mut raw = Mat10::zeros();
    for k in 0..n_phi {
        let v = patch.node(k);
        let mut w = base;
        if let (Some(chi), Some(x)) = (&chi, x) {
            let c = chi([x[1] - x[0] * v[0], x[2] - x[0] * v[1], x[3] - x[0] * v[2]]);
            w *= c * c;
        }
        accumulate_theta4(&mut raw, &v, w);
    }
    Ok(SymbolOperator::from_raw(raw, *eta))
}

/// `raw += w * (theta theta)_p (theta theta)_q` for `theta = (1, v)`.
fn accumulate_theta4(raw: &mut Mat10, v: &[f64; 3], w: f64) {
    let theta = [1.0, v[0], v[1], v[2]];
    let t2: [f64; 10] = PAIRS.map(|(j, k)| theta[j] * theta[k]);
    for p in 0..10 {
        let wp = w * t2[p];
        for q in p..10 {
            let val = wp * t2[q];
            raw[(p, q)] += val;
            if q != p {
                raw[(q, p)] += val;
            }
        }
    }
}

/// Value of `a` approached from the space-like side at a light-like `eta`:
/// the circle collapses to `theta* = (1, -eta0 eta'/|eta'|^2)` and
/// `a = (2 pi / |eta'|) theta*^{(x)4}`.
pub fn lightcone_symbol(eta: &Covector) -> Result<SymbolOperator> {
    let sp = eta.spatial();
    let n2: f64 = sp.iter().map(|x| x * x).sum();
    if n2 == 0.0 {
        return Err(Error::ZeroCovector);
    }
    let v = sp.map(|x| -eta.time() * x / n2);
    let mut raw = Mat10::zeros();
    accumulate_theta4(&mut raw, &v, TAU / n2.sqrt());
    Ok(SymbolOperator::from_raw(raw, *eta))
}

/// Fourier transform of the normal-operator kernel with rays cut to `|s| <= reach`:
/// `a_S(eta) = int_{S^2} theta^{(x)4} 2 sin(S theta.eta) / (theta.eta) dv`.
///
/// Entire in `eta` and nonzero at time-like frequencies. As `S` grows it tends
/// to `2 pi a(eta)` in the sense of distributions, and sampled on a padded
/// frequency grid it realizes the aperiodic normal operator on a bounded box.
#[derive(Debug, Clone)]
pub struct TruncatedSymbol {
    reach: f64,
    /// Gauss-Legendre rules in the polar cosine, indexed by bucket.
    rules: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Polar nodes at which the azimuthal average (a quartic in the cosine) is sampled.
const POLAR_NODES: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];
const AZIMUTH_NODES: usize = 8;
const RULE_BASE: usize = 16;
const RULE_STEP: usize = 8;

impl TruncatedSymbol {
    /// Prepares quadrature rules good up to spatial frequency `max_spatial`.
    pub fn new(reach: f64, max_spatial: f64) -> Result<Self> {
        if !(reach > 0.0) || !(max_spatial >= 0.0) || !reach.is_finite() || !max_spatial.is_finite() {
            return Err(Error::invalid("truncated symbol needs reach > 0 and a finite frequency bound"));
        }
        let buckets = Self::bucket(reach * max_spatial) + 1;
        let rules = (0..buckets)
            .map(|b| {
                let m = RULE_BASE + RULE_STEP * b;
                let rule = gauss_quad::GaussLegendre::new(m.try_into().expect("rule degree is positive"));
                rule.iter().map(|(x, w)| (*x, *w)).unzip()
            })
            .collect();
        Ok(TruncatedSymbol { reach, rules })
    }

    pub fn reach(&self) -> f64 {
        self.reach
    }

    /// The kernel `2 sin(S w) / w` oscillates `S r / pi` times over the polar range.
    fn bucket(oscillation: f64) -> usize {
        ((0.75 * oscillation).ceil() as usize).div_ceil(RULE_STEP)
    }

    pub fn value(&self, eta: &Covector) -> Result<SymbolOperator> {
        let sp = eta.spatial();
        let r = sp.iter().map(|x| x * x).sum::<f64>().sqrt();
        let b = Self::bucket(self.reach * r);
        let (nodes, weights) = self
            .rules
            .get(b)
            .ok_or_else(|| Error::invalid(format!("spatial frequency {r} exceeds the prepared range")))?;
        let a = eta.time();
        let s = self.reach;
        // beta_i = int l_i(c) K(c) dc for the Lagrange basis on POLAR_NODES
        let mut beta = [0.0; 5];
        for (&c, &w) in nodes.iter().zip(weights) {
            let arg = a + r * c;
            let k = if (s * arg).abs() < 1e-8 {
                2.0 * s
            } else {
                2.0 * (s * arg).sin() / arg
            };
            for (i, bi) in beta.iter_mut().enumerate() {
                *bi += w * k * lagrange(i, c);
            }
        }
        let e = if r > 0.0 { sp.map(|x| x / r) } else { [0.0, 0.0, 1.0] };
        let (e1, e2) = orthonormal_pair(&e);
        let dphi = TAU / AZIMUTH_NODES as f64;
        let mut raw = Mat10::zeros();
        for (i, &c) in POLAR_NODES.iter().enumerate() {
            let st = (1.0 - c * c).max(0.0).sqrt();
            for k in 0..AZIMUTH_NODES {
                let (sn, cs) = (dphi * k as f64).sin_cos();
                let v: [f64; 3] = std::array::from_fn(|d| c * e[d] + st * (cs * e1[d] + sn * e2[d]));
                accumulate_theta4(&mut raw, &v, beta[i] * dphi);
            }
        }
        Ok(SymbolOperator::from_raw(raw, *eta))
    }
}

fn lagrange(i: usize, c: f64) -> f64 {
    let xi = POLAR_NODES[i];
    POLAR_NODES
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &xj)| (c - xj) / (xi - xj))
        .product()
}

/// Two unit vectors completing `e` to an orthonormal frame.
fn orthonormal_pair(e: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let helper = if e[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d: f64 = (0..3).map(|i| helper[i] * e[i]).sum();
    let mut e1: [f64; 3] = std::array::from_fn(|i| helper[i] - d * e[i]);
    let n = e1.iter().map(|x| x * x).sum::<f64>().sqrt();
    e1 = e1.map(|x| x / n);
    let e2 = [
        e[1] * e1[2] - e[2] * e1[1],
        e[2] * e1[0] - e[0] * e1[2],
        e[0] * e1[1] - e[1] * e1[0],
    ];
    (e1, e2)
}

/// The five generators `g, sym(eta (x) e_0), ..., sym(eta (x) e_3)` of the symbol's kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct NullBasis {
    pub eta: Covector,
    pub generators: [Sym2; 5],
}

pub fn null_basis(eta: &Covector) -> Result<NullBasis> {
    if !(eta.minkowski_q() > 0.0) {
        return Err(Error::NotSpaceLike(eta.0));
    }
    let generators = std::array::from_fn(|i| {
        if i == 0 {
            Sym2::metric()
        } else {
            sym_outer(eta, &Vec4::basis(i - 1))
        }
    });
    Ok(NullBasis {
        eta: *eta,
        generators,
    })
}

impl NullBasis {
    fn mandel_columns(&self) -> SMatrix<f64, 10, 5> {
        SMatrix::<f64, 10, 5>::from_fn(|p, i| to_mandel(&self.generators[i])[p])
    }

    /// Determinant of the Frobenius Gram matrix of the generators.
    pub fn gram_determinant(&self) -> f64 {
        let m = self.mandel_columns();
        (m.transpose() * m).determinant()
    }

    /// Frobenius-orthonormal basis of the span, as Mandel columns.
    pub fn orthonormal(&self) -> SMatrix<f64, 10, 5> {
        self.mandel_columns().qr().q()
    }

    /// Frobenius-orthogonal projector onto the complement of the span.
    pub fn complement_projector(&self) -> SymbolOperator {
        let q = self.orthonormal();
        SymbolOperator::from_gram(&(Mat10::identity() - q * q.transpose()), self.eta)
    }
}

/// Cutoff band and pseudoinverse regularisation.
///
/// With `rho = q(eta) / |eta|^2`, the space-like taper is 1 for `rho >= eps`, 0 for
/// `rho <= (1 - taper_width) eps`, and a cosine ramp in between. `taper_width = 0`
/// selects the sharp indicator of `rho >= eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub eps: f64,
    pub taper_width: f64,
    pub pinv_floor: f64,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        CutoffSpec {
            eps: 0.05,
            taper_width: 0.5,
            pinv_floor: 1e-8,
        }
    }
}

impl CutoffSpec {
    pub fn new(eps: f64, taper_width: f64, pinv_floor: f64) -> Result<Self> {
        let spec = CutoffSpec {
            eps,
            taper_width,
            pinv_floor,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sharp(eps: f64) -> Self {
        CutoffSpec {
            eps,
            taper_width: 0.0,
            ..CutoffSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::invalid(format!("eps must lie in (0, 1], got {}", self.eps)));
        }
        if !(0.0..=1.0).contains(&self.taper_width) {
            return Err(Error::invalid(format!(
                "taper width must lie in [0, 1], got {}",
                self.taper_width
            )));
        }
        if !(self.pinv_floor > 0.0 && self.pinv_floor < 1.0) {
            return Err(Error::invalid(format!(
                "pseudoinverse floor must lie in (0, 1), got {}",
                self.pinv_floor
            )));
        }
        Ok(())
    }

    pub fn is_sharp(&self) -> bool {
        self.taper_width == 0.0
    }

    fn ramp(&self, rho: f64) -> f64 {
        if rho >= self.eps {
            return 1.0;
        }
        if self.is_sharp() {
            return 0.0;
        }
        let lo = (1.0 - self.taper_width) * self.eps;
        if rho <= lo {
            return 0.0;
        }
        let t = (rho - lo) / (self.taper_width * self.eps);
        0.5 * (1.0 - (PI * t).cos())
    }

    /// Space-like band taper; 0 at `eta = 0`.
    pub fn taper(&self, eta: &Covector) -> f64 {
        let n2 = eta.euclid_norm_sq();
        if n2 == 0.0 {
            return 0.0;
        }
        self.ramp(eta.minkowski_q() / n2)
    }

    /// Mirror image of [`CutoffSpec::taper`] on the time-like side.
    pub fn timelike_taper(&self, eta: &Covector) -> f64 {
        let n2 = eta.euclid_norm_sq();
        if n2 == 0.0 {
            return 0.0;
        }
        self.ramp(-eta.minkowski_q() / n2)
    }

    /// True where the parametrix multiplier can be nonzero.
    pub fn in_kept_band(&self, eta: &Covector) -> bool {
        self.taper(eta) > 0.0
    }
}

/// Minimal-norm pseudoinverse: Gram eigenvalues below `pinv_floor * lambda_max` are dropped.
pub fn pinv_b(a: &SymbolOperator, spec: &CutoffSpec) -> Result<SymbolOperator> {
    let (vecs, vals, lmax) = a.eigen()?;
    let mut inv = Mat10::zeros();
    for (i, &l) in vals.iter().enumerate() {
        if l >= spec.pinv_floor * lmax {
            let v = vecs.column(i);
            inv += v * v.transpose() / l;
        }
    }
    let mut b = SymbolOperator::from_gram(&inv, a.eta);
    b.x = a.x;
    Ok(b)
}

/// Largest componentwise deviation `|lambda a(lambda eta) - a(eta)|`, relative to `||a(eta)||`.
pub fn symbol_order_check(eta: &Covector, lambda: f64, n_phi: usize) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("scale must be positive"));
    }
    if !(eta.minkowski_q() > 0.0) {
        return Err(Error::NotSpaceLike(eta.0));
    }
    let a = symbol_a(eta, n_phi)?;
    let b = symbol_a(&eta.scaled(lambda), n_phi)?.scaled(lambda);
    let dev = (b.raw - a.raw).amax();
    Ok(dev / a.frobenius_norm())
}

/// Relative distance of `a(eta_delta)` from its rank-one cone limit, where
/// `eta_delta` keeps the spatial part of the light-like `direction` (rescaled to
/// `|eta'| = 1`) and moves `eta0` toward zero until `q(eta_delta) = delta`.
pub fn lightcone_limit_check(direction: &Covector, delta: f64, n_phi: usize) -> Result<f64> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::invalid(format!("delta must lie in (0, 0.5), got {delta}")));
    }
    let sn = direction.spatial_norm();
    if sn == 0.0 {
        return Err(Error::NotLightLike(direction.0));
    }
    let unit = direction.scaled(1.0 / sn);
    if unit.minkowski_q().abs() > 1e-12 {
        return Err(Error::NotLightLike(direction.0));
    }
    let t0 = unit.time().signum() * (1.0 - delta).sqrt();
    let eta = Covector([t0, unit.0[1], unit.0[2], unit.0[3]]);
    let a = symbol_a(&eta, n_phi)?;
    let limit = lightcone_symbol(&eta)?;
    // the collapse point rescaled onto the unit sphere
    let c = circle_points(&eta, n_phi)?.center;
    let cn = norm3(&c);
    let mut raw = Mat10::zeros();
    accumulate_theta4(&mut raw, &c.map(|x| x / cn), 1.0);
    let diff = SymbolOperator::from_raw(a.raw - raw * limit.raw[(0, 0)], eta);
    Ok(diff.frobenius_norm() / a.frobenius_norm())
}

/// Multi-indices `j <= k <= l <= m` of the 35 independent components.
pub fn independent_indices() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(35);
    for j in 0..4 {
        for k in j..4 {
            for l in k..4 {
                for m in l..4 {
                    out.push([j, k, l, m]);
                }
            }
        }
    }
    out
}

/// One atlas row: the 35 independent components and 10 ascending Gram eigenvalues.
/// Light-like covectors use the cone limit value.
pub fn atlas_row(eta: &Covector, n_phi: usize) -> Result<([f64; 35], [f64; 10])> {
    let a = match symbol_a(eta, n_phi) {
        Err(Error::LightLikeEvaluation(_)) => lightcone_symbol(eta)?,
        other => other?,
    };
    let idx = independent_indices();
    let comps = std::array::from_fn(|i| {
        let [j, k, l, m] = idx[i];
        a.component(j, k, l, m)
    });
    Ok((comps, a.eigenvalues()))
}

/// Writes the symbol atlas CSV for the given covectors.
pub fn write_atlas_csv<W: Write>(out: &mut W, etas: &[Covector], n_phi: usize) -> Result<()> {
    let mut header = vec!["eta0".to_string(), "eta1".into(), "eta2".into(), "eta3".into()];
    for [j, k, l, m] in independent_indices() {
        header.push(format!("a{j}{k}{l}{m}"));
    }
    for i in 0..10 {
        header.push(format!("lambda{i}"));
    }
    writeln!(out, "{}", header.join(","))?;
    for eta in etas {
        let (comps, eig) = atlas_row(eta, n_phi)?;
        let cells: Vec<String> = eta
            .0
            .iter()
            .chain(comps.iter())
            .chain(eig.iter())
            .map(|x| format!("{x:.17e}"))
            .collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_truncated(eta: &Covector, reach: f64) -> Mat10 {
        let sphere = crate::sphere::SphereQuadrature::new(crate::sphere::SphereSampler::LatLong, 80_000).unwrap();
        let mut raw = Mat10::zeros();
        for (v, w) in sphere.directions.iter().zip(&sphere.weights) {
            let arg = eta.time() + (0..3).map(|i| v[i] * eta.spatial()[i]).sum::<f64>();
            let k = if arg.abs() < 1e-12 { 2.0 * reach } else { 2.0 * (reach * arg).sin() / arg };
            accumulate_theta4(&mut raw, v, w * k);
        }
        raw
    }

    #[test]
    fn truncated_symbol_matches_brute_force_sphere_quadrature() {
        let ts = TruncatedSymbol::new(1.5, 10.0).unwrap();
        for eta in [
            Covector::new(1.2, 2.0, -0.7, 0.4),
            Covector::new(3.0, 1.0, 0.5, 0.0),
            Covector::new(0.0, 0.0, 0.0, 0.0),
            Covector::new(-0.5, 0.0, 0.0, 0.0),
            Covector::new(2.0, 2.0, 0.0, 0.0),
        ] {
            let got = ts.value(&eta).unwrap();
            let want = brute_truncated(&eta, 1.5);
            let err = (got.raw() - want).norm() / want.norm();
            assert!(err < 1e-4, "{eta:?}: {err}");
        }
    }

    #[test]
    fn truncated_symbol_is_even_and_tends_to_the_full_symbol() {
        let ts = TruncatedSymbol::new(2.0, 10.0).unwrap();
        let eta = Covector::new(0.8, 1.1, -2.0, 0.3);
        let plus = ts.value(&eta).unwrap();
        let minus = ts.value(&eta.scaled(-1.0)).unwrap();
        assert!((plus.raw() - minus.raw()).norm() <= 1e-12 * plus.raw().norm());

        let full = symbol_a(&eta, 64).unwrap().scaled(TAU);
        let errs: Vec<f64> = [50.0, 400.0, 3200.0]
            .iter()
            .map(|&reach| {
                let ts = TruncatedSymbol::new(reach, 3.0).unwrap();
                (ts.value(&eta).unwrap().raw() - full.raw()).norm() / full.raw().norm()
            })
            .collect();
        assert!(errs[2] < 0.2 * errs[0] && errs[2] < 1e-2, "{errs:?}");
    }
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spacelike(rng: &mut impl Rng, min_rho: f64) -> Covector {
        loop {
            let eta = Covector(std::array::from_fn(|_| rng.gen_range(-3.0..3.0)));
            let n2 = eta.euclid_norm_sq();
            if n2 > 1e-3 && eta.minkowski_q() >= min_rho * n2 {
                return eta;
            }
        }
    }

    #[test]
    fn circle_examples() {
        let p = circle_points(&Covector::new(0.0, 1.0, 0.0, 0.0), 16).unwrap();
        assert!((p.radius - 1.0).abs() < 1e-15);
        assert_eq!(p.center, [0.0; 3]);
        for v in p.nodes() {
            assert!(v[0].abs() < 1e-15);
            assert!((norm3(&v) - 1.0).abs() < 1e-14);
        }
        let p = circle_points(&Covector::new(1.0, 2.0, 0.0, 0.0), 16).unwrap();
        assert!((p.radius - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((p.center[0] + 0.5).abs() < 1e-15);
        assert!(matches!(
            circle_points(&Covector::new(2.0, 1.0, 0.0, 0.0), 16),
            Err(Error::NotSpaceLike(_))
        ));
        assert!(circle_points(&Covector::new(0.0, 1.0, 0.0, 0.0), 8).is_err());
    }

    #[test]
    fn nodes_satisfy_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let eta = random_spacelike(&mut rng, 0.0);
            let p = circle_points(&eta, 17).unwrap();
            for v in p.nodes() {
                assert!((norm3(&v) - 1.0).abs() < 1e-12);
                let resid = eta.time() + v[0] * eta.0[1] + v[1] * eta.0[2] + v[2] * eta.0[3];
                assert!(resid.abs() < 1e-12 * (1.0 + eta.euclid_norm_sq().sqrt()));
            }
        }
    }

    #[test]
    fn symbol_examples() {
        let a = symbol_a(&Covector::new(0.0, 1.0, 0.0, 0.0), 32).unwrap();
        assert!((a.component(0, 0, 0, 0) - TAU).abs() < 1e-13);
        assert!((a.component(2, 2, 2, 2) - 0.75 * PI).abs() < 1e-13);
        assert!((a.component(2, 2, 3, 3) - 0.25 * PI).abs() < 1e-13);
        assert!((a.component(2, 3, 2, 3) - 0.25 * PI).abs() < 1e-13);
        let a2 = symbol_a(&Covector::new(0.0, 2.0, 0.0, 0.0), 32).unwrap();
        assert!((a2.component(0, 0, 0, 0) - PI).abs() < 1e-13);
        let t = symbol_a(&Covector::new(2.0, 1.0, 0.0, 0.0), 32).unwrap();
        assert!(t.is_zero());
        let t = symbol_a(&Covector::new(1.0, 0.0, 0.0, 0.0), 32).unwrap();
        assert!(t.is_zero());
        assert!(matches!(
            symbol_a(&Covector::new(1.0, 1.0, 0.0, 0.0), 32),
            Err(Error::LightLikeEvaluation(_))
        ));
    }

    #[test]
    fn unit_weight_matches_unweighted() {
        let eta = Covector::new(0.3, 1.0, -0.4, 0.2);
        let a = symbol_a(&eta, 32).unwrap();
        let b = symbol_a_weighted(&eta, 32, |_| 1.0, [0.2, 0.1, 0.0, -0.3]).unwrap();
        assert!((a.raw - b.raw).amax() < 1e-15);
        assert_eq!(b.x, Some([0.2, 0.1, 0.0, -0.3]));
    }

    #[test]
    fn weighted_symbol_converges_under_doubling() {
        let eta = Covector::new(0.3, 1.0, -0.4, 0.2);
        let chi = |y: [f64; 3]| (-(y[0] * y[0] + y[1] * y[1] + y[2] * y[2])).exp();
        let x = [0.7, 0.1, 0.2, -0.3];
        let a16 = symbol_a_weighted(&eta, 16, chi, x).unwrap();
        let a32 = symbol_a_weighted(&eta, 32, chi, x).unwrap();
        let a64 = symbol_a_weighted(&eta, 64, chi, x).unwrap();
        let e1 = (a16.raw - a64.raw).norm();
        let e2 = (a32.raw - a64.raw).norm();
        assert!(e2 < e1 && e2 < 1e-10 * a64.raw.norm());
    }

    #[test]
    fn gram_is_symmetric_with_rank_five() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = symbol_a(&random_spacelike(&mut rng, 0.1), 32).unwrap();
            let g = a.gram();
            assert!((g - g.transpose()).amax() == 0.0);
            let ev = a.eigenvalues();
            let lmax = ev[9];
            assert!(ev[0] >= -1e-12 * lmax);
            assert_eq!(ev.iter().filter(|&&l| l > 1e-8 * lmax).count(), 5);
        }
    }

    #[test]
    fn null_basis_examples() {
        let eta = Covector::new(0.0, 1.0, 0.0, 0.0);
        let nb = null_basis(&eta).unwrap();
        assert_eq!(nb.generators[0], Sym2::metric());
        assert_eq!(nb.generators[2].get(1, 1), 2.0);
        assert!(nb.gram_determinant() > 0.0);
        assert!(null_basis(&Covector::new(1.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn pseudoinverse_examples() {
        let a = symbol_a(&Covector::new(0.0, 1.0, 0.0, 0.0), 32).unwrap();
        let b = pinv_b(&a, &CutoffSpec::default()).unwrap();
        let ba = b.compose(&a);
        let idem = ba.compose(&ba).sub(&ba).frobenius_norm() / ba.frobenius_norm();
        assert!(idem < 1e-10);
        let ev = ba.eigenvalues();
        assert_eq!(ev.iter().filter(|&&l| l > 0.5).count(), 5);
        assert!(ba.apply(&Sym2::metric()).frobenius_norm() < 1e-12);
        assert!(matches!(
            pinv_b(&SymbolOperator::zero(Covector::new(1.0, 0.0, 0.0, 0.0)), &CutoffSpec::default()),
            Err(Error::ZeroOperator)
        ));
    }

    #[test]
    fn compose_matches_sequential_application() {
        let eta = Covector::new(0.4, 1.0, 0.5, -0.2);
        let a = symbol_a(&eta, 32).unwrap();
        let b = pinv_b(&a, &CutoffSpec::default()).unwrap();
        let f = Sym2(std::array::from_fn(|p| (p as f64 * 0.7).sin()));
        let lhs = b.compose(&a).apply(&f);
        let rhs = b.apply(&a.apply(&f));
        assert!((lhs - rhs).frobenius_norm() < 1e-12 * rhs.frobenius_norm().max(1.0));
        let id = SymbolOperator::identity(eta);
        assert!((id.apply(&f) - f).frobenius_norm() < 1e-15);
    }

    #[test]
    fn order_check_examples() {
        let e = symbol_order_check(&Covector::new(0.0, 1.0, 0.0, 0.0), 2.0, 32).unwrap();
        assert!(e <= 1e-12);
        let e = symbol_order_check(&Covector::new(1.0, 2.0, 0.0, 0.0), 10.0, 32).unwrap();
        assert!(e <= 1e-12);
        let e = symbol_order_check(&Covector::new(1.0, 2.0, 0.0, 0.0), 1.0, 32).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn lightcone_limit_decreases() {
        let dir = Covector::new(1.0, 1.0, 0.0, 0.0).scaled(1.0 / 2f64.sqrt());
        let devs: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&d| lightcone_limit_check(&dir, d, 32).unwrap())
            .collect();
        assert!(devs.windows(2).all(|w| w[1] < w[0]), "{devs:?}");
        assert!(lightcone_limit_check(&dir, 1e-6, 32).unwrap() < 1e-3);
        assert!(lightcone_limit_check(&Covector::new(0.0, 1.0, 0.0, 0.0), 1e-2, 32).is_err());
    }

    #[test]
    fn taper_shape() {
        let spec = CutoffSpec::default();
        let deep = Covector::new(0.0, 1.0, 0.0, 0.0);
        assert_eq!(spec.taper(&deep), 1.0);
        assert_eq!(spec.taper(&Covector::new(1.0, 1.0, 0.0, 0.0)), 0.0);
        assert_eq!(spec.taper(&Covector([0.0; 4])), 0.0);
        let mut last = 0.0;
        for i in 0..=100 {
            let rho = 0.06 * i as f64 / 100.0;
            // q / |eta|^2 = rho for eta = (t, 1, 0, 0) with t^2 = (1 - rho) / (1 + rho)
            let t = ((1.0 - rho) / (1.0 + rho)).sqrt();
            let v = spec.taper(&Covector::new(t, 1.0, 0.0, 0.0));
            assert!(v >= last - 1e-15);
            last = v;
        }
        let sharp = CutoffSpec::sharp(0.05);
        for t in [0.0, 0.5, 0.9, 0.99, 1.0, 1.5] {
            let v = sharp.taper(&Covector::new(t, 1.0, 0.0, 0.0));
            assert!(v == 0.0 || v == 1.0);
        }
        assert!(CutoffSpec::new(0.0, 0.5, 1e-8).is_err());
        assert!(CutoffSpec::new(0.05, 1.5, 1e-8).is_err());
    }

    #[test]
    fn atlas_csv_shape() {
        let mut buf = Vec::new();
        let etas = [
            Covector::new(0.0, 1.0, 0.0, 0.0),
            Covector::new(2.0, 1.0, 0.0, 0.0),
            Covector::new(1.0, 1.0, 0.0, 0.0),
        ];
        write_atlas_csv(&mut buf, &etas, 32).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        for l in &lines {
            assert_eq!(l.split(',').count(), 4 + 35 + 10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn null_generators_are_annihilated(
            e in prop::array::uniform4(-3.0f64..3.0),
        ) {
            let eta = Covector(e);
            prop_assume!(eta.minkowski_q() > 1e-3 * eta.euclid_norm_sq());
            let a = symbol_a(&eta, 32).unwrap();
            for n in null_basis(&eta).unwrap().generators {
                let r = a.apply(&n).frobenius_norm() / (a.frobenius_norm() * n.frobenius_norm());
                prop_assert!(r <= 1e-12, "residual {r}");
            }
        }

        #[test]
        fn full_index_symmetry(e in prop::array::uniform4(-3.0f64..3.0)) {
            let eta = Covector(e);
            prop_assume!(eta.minkowski_q() > 1e-3 * eta.euclid_norm_sq());
            let a = symbol_a(&eta, 32).unwrap();
            for j in 0..4 { for k in 0..4 { for l in 0..4 { for m in 0..4 {
                let v = a.component(j, k, l, m);
                prop_assert_eq!(v, a.component(k, j, l, m));
                prop_assert_eq!(v, a.component(j, k, m, l));
                prop_assert_eq!(v, a.component(l, m, j, k));
            }}}}
        }

        #[test]
        fn homogeneity_minus_one(
            e in prop::array::uniform4(-3.0f64..3.0),
            lam in prop::sample::select(vec![0.5, 2.0, 10.0]),
        ) {
            let eta = Covector(e);
            prop_assume!(eta.minkowski_q() > 1e-3 * eta.euclid_norm_sq());
            prop_assert!(symbol_order_check(&eta, lam, 32).unwrap() <= 1e-12);
        }

        #[test]
        fn pseudoinverse_identities(e in prop::array::uniform4(-3.0f64..3.0)) {
            let eta = Covector(e);
            prop_assume!(eta.minkowski_q() > 0.05 * eta.euclid_norm_sq());
            let a = symbol_a(&eta, 32).unwrap();
            let b = pinv_b(&a, &CutoffSpec::default()).unwrap();
            let aba = a.compose(&b).compose(&a);
            prop_assert!(aba.sub(&a).frobenius_norm() <= 1e-10 * a.frobenius_norm());
            let bab = b.compose(&a).compose(&b);
            prop_assert!(bab.sub(&b).frobenius_norm() <= 1e-10 * b.frobenius_norm());
            let pi = null_basis(&eta).unwrap().complement_projector();
            prop_assert!(b.compose(&a).sub(&pi).frobenius_norm() <= 1e-10);
        }
    }
}
