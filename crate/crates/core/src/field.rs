//! Gridded symmetric 2-tensor fields on a 4D box, the symmetric differential and
//! gauge fields.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{fft_frequencies, transform_axis};
use crate::tensor::{pair_index, Sym2, FROBENIUS_WEIGHT, PAIRS};

/// Regular grid `x(i) = origin + i * spacing` (componentwise) with `i0` slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid4 {
    pub dims: [usize; 4],
    pub spacing: [f64; 4],
    pub origin: [f64; 4],
}

impl Grid4 {
    pub fn new(dims: [usize; 4], spacing: [f64; 4], origin: [f64; 4]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::invalid(format!("grid dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(Error::invalid(format!("grid spacing must be positive, got {spacing:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::invalid("grid origin must be finite"));
        }
        Ok(Grid4 {
            dims,
            spacing,
            origin,
        })
    }

    /// `n^4` points covering the periodic cell `[lo, hi)^4`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        assert!(n > 0 && hi > lo, "invalid cube grid");
        let h = (hi - lo) / n as f64;
        Grid4 {
            dims: [n; 4],
            spacing: [h; 4],
            origin: [lo; 4],
        }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn strides(&self) -> [usize; 4] {
        let d = self.dims;
        [d[1] * d[2] * d[3], d[2] * d[3], d[3], 1]
    }

    #[inline]
    pub fn flat(&self, idx: [usize; 4]) -> usize {
        let d = self.dims;
        ((idx[0] * d[1] + idx[1]) * d[2] + idx[2]) * d[3] + idx[3]
    }

    #[inline]
    pub fn unflat(&self, mut flat: usize) -> [usize; 4] {
        let mut idx = [0; 4];
        for axis in (0..4).rev() {
            idx[axis] = flat % self.dims[axis];
            flat /= self.dims[axis];
        }
        idx
    }

    #[inline]
    pub fn point(&self, idx: [usize; 4]) -> [f64; 4] {
        std::array::from_fn(|a| self.origin[a] + idx[a] as f64 * self.spacing[a])
    }

    pub fn point_flat(&self, flat: usize) -> [f64; 4] {
        self.point(self.unflat(flat))
    }

    /// Coordinates of the last sample along each axis.
    pub fn last_point(&self) -> [f64; 4] {
        std::array::from_fn(|a| self.origin[a] + (self.dims[a] - 1) as f64 * self.spacing[a])
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Same spacing and origin, `factor` times as many samples per axis.
    pub fn padded(&self, factor: usize) -> Grid4 {
        Grid4 {
            dims: self.dims.map(|n| n * factor),
            spacing: self.spacing,
            origin: self.origin,
        }
    }

    /// Grid with `factor` times the points per axis and the same spacing, centred
    /// on this one (the original sits at index offset `(factor - 1) n / 2`).
    pub fn extended(&self, factor: usize) -> Grid4 {
        let offset = self.extension_offset(factor);
        Grid4 {
            dims: self.dims.map(|n| n * factor),
            spacing: self.spacing,
            origin: std::array::from_fn(|a| self.origin[a] - offset[a] as f64 * self.spacing[a]),
        }
    }

    fn extension_offset(&self, factor: usize) -> [usize; 4] {
        self.dims.map(|n| (factor.max(1) - 1) * n / 2)
    }

    /// Index offset of `self` inside `outer` when both share spacing and lattice.
    pub fn offset_in(&self, outer: &Grid4) -> Result<[usize; 4]> {
        let mut off = [0usize; 4];
        for a in 0..4 {
            let same_h = (self.spacing[a] - outer.spacing[a]).abs() <= 1e-12 * self.spacing[a];
            let k = (self.origin[a] - outer.origin[a]) / outer.spacing[a];
            let kr = k.round();
            if !same_h || (k - kr).abs() > 1e-9 || kr < 0.0 || kr as usize + self.dims[a] > outer.dims[a] {
                return Err(Error::DimensionMismatch(format!("axis {a}: grid is not a sub-lattice of the outer grid")));
            }
            off[a] = kr as usize;
        }
        Ok(off)
    }

    /// Angular frequencies per axis, FFT order.
    pub fn frequencies(&self) -> [Vec<f64>; 4] {
        std::array::from_fn(|a| fft_frequencies(self.dims[a], self.spacing[a]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Position,
    Frequency,
}

impl Domain {
    pub fn name(&self) -> &'static str {
        match self {
            Domain::Position => "position",
            Domain::Frequency => "frequency",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Position(Vec<f64>),
    Frequency(Vec<Complex64>),
}

/// Sym2-valued field on a [`Grid4`]: 10 component arrays, component index outermost.
#[derive(Debug, Clone, PartialEq)]
pub struct Sym2Field {
    grid: Grid4,
    data: FieldData,
}

impl Sym2Field {
    pub fn zeros(grid: Grid4) -> Self {
        let n = grid.len();
        Sym2Field {
            grid,
            data: FieldData::Position(vec![0.0; 10 * n]),
        }
    }

    pub fn from_position_data(grid: Grid4, data: Vec<f64>) -> Result<Self> {
        if data.len() != 10 * grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values, got {}",
                10 * grid.len(),
                data.len()
            )));
        }
        Ok(Sym2Field {
            grid,
            data: FieldData::Position(data),
        })
    }

    pub fn from_frequency_data(grid: Grid4, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != 10 * grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values, got {}",
                10 * grid.len(),
                data.len()
            )));
        }
        Ok(Sym2Field {
            grid,
            data: FieldData::Frequency(data),
        })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn<F>(grid: Grid4, f: F) -> Self
    where
        F: Fn([f64; 4]) -> Sym2 + Sync,
    {
        let n = grid.len();
        let samples: Vec<Sym2> = (0..n).into_par_iter().map(|i| f(grid.point_flat(i))).collect();
        let mut data = vec![0.0; 10 * n];
        for (i, s) in samples.iter().enumerate() {
            for p in 0..10 {
                data[p * n + i] = s.0[p];
            }
        }
        Sym2Field {
            grid,
            data: FieldData::Position(data),
        }
    }

    /// `profile(x) * u` for a scalar profile and a fixed amplitude tensor.
    pub fn from_profile<F>(grid: Grid4, u: &Sym2, profile: F) -> Self
    where
        F: Fn([f64; 4]) -> f64 + Sync,
    {
        let n = grid.len();
        let prof: Vec<f64> = (0..n).into_par_iter().map(|i| profile(grid.point_flat(i))).collect();
        let mut data = vec![0.0; 10 * n];
        for p in 0..10 {
            if u.0[p] != 0.0 {
                for (d, v) in data[p * n..(p + 1) * n].iter_mut().zip(&prof) {
                    *d = u.0[p] * v;
                }
            }
        }
        Sym2Field {
            grid,
            data: FieldData::Position(data),
        }
    }

    pub fn grid(&self) -> &Grid4 {
        &self.grid
    }

    pub fn domain(&self) -> Domain {
        match self.data {
            FieldData::Position(_) => Domain::Position,
            FieldData::Frequency(_) => Domain::Frequency,
        }
    }

    pub fn data(&self) -> &FieldData {
        &self.data
    }

    pub fn into_data(self) -> FieldData {
        self.data
    }

    pub fn require(&self, domain: Domain) -> Result<()> {
        if self.domain() == domain {
            Ok(())
        } else {
            Err(Error::DomainMismatch {
                expected: domain.name(),
                found: self.domain().name(),
            })
        }
    }

    pub fn values(&self) -> Result<&[f64]> {
        match &self.data {
            FieldData::Position(v) => Ok(v),
            FieldData::Frequency(_) => Err(Error::DomainMismatch {
                expected: "position",
                found: "frequency",
            }),
        }
    }

    pub fn values_mut(&mut self) -> Result<&mut [f64]> {
        match &mut self.data {
            FieldData::Position(v) => Ok(v),
            FieldData::Frequency(_) => Err(Error::DomainMismatch {
                expected: "position",
                found: "frequency",
            }),
        }
    }

    pub fn spectrum(&self) -> Result<&[Complex64]> {
        match &self.data {
            FieldData::Frequency(v) => Ok(v),
            FieldData::Position(_) => Err(Error::DomainMismatch {
                expected: "frequency",
                found: "position",
            }),
        }
    }

    /// Component `p` (packed order) of a position-domain field.
    pub fn component(&self, p: usize) -> Result<&[f64]> {
        let n = self.grid.len();
        Ok(&self.values()?[p * n..(p + 1) * n])
    }

    pub fn component_mut(&mut self, p: usize) -> Result<&mut [f64]> {
        let n = self.grid.len();
        Ok(&mut self.values_mut()?[p * n..(p + 1) * n])
    }

    /// Tensor at flat grid index (position domain).
    pub fn at(&self, flat: usize) -> Result<Sym2> {
        let n = self.grid.len();
        let v = self.values()?;
        Ok(Sym2(std::array::from_fn(|p| v[p * n + flat])))
    }

    pub fn set(&mut self, flat: usize, value: &Sym2) -> Result<()> {
        let n = self.grid.len();
        let v = self.values_mut()?;
        for p in 0..10 {
            v[p * n + flat] = value.0[p];
        }
        Ok(())
    }

    /// `sum_x sum_{jk} f_{jk} h_{jk} dx` over the grid.
    pub fn l2_dot(&self, other: &Sym2Field) -> Result<f64> {
        self.check_same_grid(other)?;
        let (a, b) = (self.values()?, other.values()?);
        let n = self.grid.len();
        let mut total = 0.0;
        for p in 0..10 {
            let s: f64 = a[p * n..(p + 1) * n]
                .iter()
                .zip(&b[p * n..(p + 1) * n])
                .map(|(x, y)| x * y)
                .sum();
            total += FROBENIUS_WEIGHT[p] * s;
        }
        Ok(total * self.grid.cell_volume())
    }

    pub fn l2_norm(&self) -> f64 {
        match &self.data {
            FieldData::Position(_) => self.l2_dot(self).map(f64::sqrt).unwrap_or(f64::NAN),
            FieldData::Frequency(v) => {
                let n = self.grid.len();
                let mut total = 0.0;
                for p in 0..10 {
                    let s: f64 = v[p * n..(p + 1) * n].iter().map(|z| z.norm_sqr()).sum();
                    total += FROBENIUS_WEIGHT[p] * s;
                }
                total.sqrt()
            }
        }
    }

    /// Relative L2 distance `||self - reference|| / ||reference||`.
    pub fn rel_l2_error(&self, reference: &Sym2Field) -> Result<f64> {
        let diff = self.sub(reference)?;
        Ok(diff.l2_norm() / reference.l2_norm())
    }

    /// `||self||^2 / ||reference||^2`.
    pub fn energy_ratio(&self, reference: &Sym2Field) -> f64 {
        let r = reference.l2_norm();
        let s = self.l2_norm();
        (s * s) / (r * r)
    }

    pub fn sub(&self, other: &Sym2Field) -> Result<Sym2Field> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Sym2Field) -> Result<Sym2Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scaled(&self, factor: f64) -> Result<Sym2Field> {
        let v: Vec<f64> = self.values()?.iter().map(|x| factor * x).collect();
        Sym2Field::from_position_data(self.grid.clone(), v)
    }

    /// Pointwise product with a scalar field sampled on the same grid.
    pub fn masked(&self, mask: &[f64]) -> Result<Sym2Field> {
        let n = self.grid.len();
        if mask.len() != n {
            return Err(Error::DimensionMismatch("mask length".into()));
        }
        let src = self.values()?;
        let v: Vec<f64> = src.iter().enumerate().map(|(i, x)| x * mask[i % n]).collect();
        Sym2Field::from_position_data(self.grid.clone(), v)
    }

    fn zip_with(&self, other: &Sym2Field, op: impl Fn(f64, f64) -> f64) -> Result<Sym2Field> {
        self.check_same_grid(other)?;
        let v: Vec<f64> = self
            .values()?
            .iter()
            .zip(other.values()?)
            .map(|(a, b)| op(*a, *b))
            .collect();
        Sym2Field::from_position_data(self.grid.clone(), v)
    }

    fn check_same_grid(&self, other: &Sym2Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch(format!(
                "grids differ: {:?} vs {:?}",
                self.grid.dims, other.grid.dims
            )));
        }
        Ok(())
    }

    /// Zero-extends onto `outer`, which must contain this grid on the same lattice.
    pub fn embed(&self, outer: &Grid4) -> Result<Sym2Field> {
        let off = self.grid.offset_in(outer)?;
        let values = self.values()?;
        let (n, m) = (self.grid.len(), outer.len());
        let mut data = vec![0.0; 10 * m];
        for flat in 0..n {
            let idx = self.grid.unflat(flat);
            let o = outer.flat(std::array::from_fn(|a| idx[a] + off[a]));
            for p in 0..10 {
                data[p * m + o] = values[p * n + flat];
            }
        }
        Sym2Field::from_position_data(outer.clone(), data)
    }

    /// Restriction to `inner`, which must lie inside this grid on the same lattice.
    pub fn crop(&self, inner: &Grid4) -> Result<Sym2Field> {
        let off = inner.offset_in(&self.grid)?;
        let values = self.values()?;
        let (n, m) = (inner.len(), self.grid.len());
        let mut data = vec![0.0; 10 * n];
        for flat in 0..n {
            let idx = inner.unflat(flat);
            let o = self.grid.flat(std::array::from_fn(|a| idx[a] + off[a]));
            for p in 0..10 {
                data[p * n + flat] = values[p * m + o];
            }
        }
        Sym2Field::from_position_data(inner.clone(), data)
    }

    /// Inclusive index ranges containing every nonzero sample, or `None` for a zero field.
    pub fn support_index_bounds(&self) -> Option<[(usize, usize); 4]> {
        let v = self.values().ok()?;
        let n = self.grid.len();
        let mut lo = [usize::MAX; 4];
        let mut hi = [0usize; 4];
        let mut any = false;
        for i in 0..n {
            if (0..10).any(|p| v[p * n + i] != 0.0) {
                any = true;
                let idx = self.grid.unflat(i);
                for a in 0..4 {
                    lo[a] = lo[a].min(idx[a]);
                    hi[a] = hi[a].max(idx[a]);
                }
            }
        }
        any.then(|| std::array::from_fn(|a| (lo[a], hi[a])))
    }

    /// True when some nonzero sample sits on the outermost layer of the grid.
    pub fn touches_boundary(&self) -> bool {
        match self.support_index_bounds() {
            None => false,
            Some(b) => (0..4).any(|a| b[a].0 == 0 || b[a].1 + 1 == self.grid.dims[a]),
        }
    }
}

/// Derivative scheme for [`d_sym`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeScheme {
    /// FFT derivative, periodic wrap.
    Spectral,
    /// Second-order central differences, one-sided second-order stencils at the edges.
    CentralDifference,
}

/// A one-form `w = (w_0, w_1, w_2, w_3)` with each component sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OneForm {
    pub grid: Grid4,
    pub components: [Vec<f64>; 4],
}

impl OneForm {
    pub fn from_fn<F>(grid: Grid4, f: F) -> Self
    where
        F: Fn([f64; 4]) -> [f64; 4] + Sync,
    {
        let n = grid.len();
        let samples: Vec<[f64; 4]> = (0..n).into_par_iter().map(|i| f(grid.point_flat(i))).collect();
        let components = std::array::from_fn(|c| samples.iter().map(|s| s[c]).collect());
        OneForm { grid, components }
    }

    pub fn zeros(grid: Grid4) -> Self {
        let n = grid.len();
        OneForm {
            grid,
            components: std::array::from_fn(|_| vec![0.0; n]),
        }
    }
}

/// Partial derivative of a sampled scalar along `axis`.
pub fn partial(grid: &Grid4, values: &[f64], axis: usize, scheme: DerivativeScheme) -> Vec<f64> {
    match scheme {
        DerivativeScheme::Spectral => spectral_partial(grid, values, axis),
        DerivativeScheme::CentralDifference => fd_partial(grid, values, axis),
    }
}

fn fd_partial(grid: &Grid4, values: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.dims[axis];
    let stride = grid.strides()[axis];
    let h = grid.spacing[axis];
    let mut out = vec![0.0; values.len()];
    if n == 1 {
        return out;
    }
    out.par_iter_mut().enumerate().for_each(|(flat, o)| {
        let i = (flat / stride) % n;
        let at = |k: usize| values[flat - i * stride + k * stride];
        *o = if n == 2 {
            (at(1) - at(0)) / h
        } else if i == 0 {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
        } else if i == n - 1 {
            (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
        } else {
            (at(i + 1) - at(i - 1)) / (2.0 * h)
        };
    });
    out
}

fn spectral_partial(grid: &Grid4, values: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.dims[axis];
    let mut planner = rustfft::FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut data: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    transform_axis(&mut data, grid.dims, axis, fwd.as_ref());
    let freqs = fft_frequencies(n, grid.spacing[axis]);
    let stride = grid.strides()[axis];
    data.par_iter_mut().enumerate().for_each(|(flat, z)| {
        let i = (flat / stride) % n;
        // the Nyquist mode of an even length has no consistent real derivative
        let k = if n % 2 == 0 && i == n / 2 { 0.0 } else { freqs[i] };
        *z *= Complex64::new(0.0, k);
    });
    transform_axis(&mut data, grid.dims, axis, inv.as_ref());
    data.iter().map(|z| z.re / n as f64).collect()
}

/// Symmetric differential `(d^s w)_{ij} = (d_i w_j + d_j w_i) / 2`.
///
/// The connection is flat, so covariant derivatives are plain partials.
pub fn d_sym(omega: &OneForm, scheme: DerivativeScheme) -> Result<Sym2Field> {
    let grid = &omega.grid;
    let n = grid.len();
    if omega.components.iter().any(|c| c.len() != n) {
        return Err(Error::DimensionMismatch("one-form component length does not match grid".into()));
    }
    // d[i][j] = d_i w_j
    let mut d: Vec<Vec<Vec<f64>>> = Vec::with_capacity(4);
    for i in 0..4 {
        d.push((0..4).map(|j| partial(grid, &omega.components[j], i, scheme)).collect());
    }
    let mut data = vec![0.0; 10 * n];
    for (p, &(i, j)) in PAIRS.iter().enumerate() {
        let out = &mut data[p * n..(p + 1) * n];
        for (k, o) in out.iter_mut().enumerate() {
            *o = 0.5 * (d[i][j][k] + d[j][i][k]);
        }
    }
    Sym2Field::from_position_data(grid.clone(), data)
}

/// A gauge field `c g + d^s w` with a flag raised when its support reaches the grid edge.
#[derive(Debug, Clone)]
pub struct GaugeField {
    pub field: Sym2Field,
    pub boundary_warning: bool,
}

pub fn gauge_field(c: &[f64], omega: &OneForm, scheme: DerivativeScheme) -> Result<GaugeField> {
    let grid = omega.grid.clone();
    let n = grid.len();
    if c.len() != n {
        return Err(Error::DimensionMismatch("scalar c does not match grid".into()));
    }
    let mut field = d_sym(omega, scheme)?;
    let g = Sym2::metric();
    {
        let v = field.values_mut()?;
        for a in 0..4 {
            let p = pair_index(a, a);
            for (k, ck) in c.iter().enumerate() {
                v[p * n + k] += g.0[p] * ck;
            }
        }
    }
    let mut probe = Sym2Field::zeros(grid.clone());
    {
        // support of the inputs, not of the derivative output
        let v = probe.values_mut()?;
        for k in 0..n {
            let nonzero = c[k] != 0.0 || omega.components.iter().any(|w| w[k] != 0.0);
            v[k] = if nonzero { 1.0 } else { 0.0 };
        }
    }
    Ok(GaugeField {
        boundary_warning: probe.touches_boundary(),
        field,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn small_grid() -> Grid4 {
        Grid4::cube(8, -1.0, 1.0)
    }

    #[test]
    fn grid_indexing_round_trip() {
        let g = Grid4::new([3, 4, 5, 6], [0.1, 0.2, 0.3, 0.4], [1.0, 2.0, 3.0, 4.0]).unwrap();
        for flat in [0, 7, 119, 359] {
            assert_eq!(g.flat(g.unflat(flat)), flat);
        }
        let p = g.point([1, 2, 3, 4]);
        assert!((p[3] - 5.6).abs() < 1e-12);
        assert!(Grid4::new([0, 1, 1, 1], [1.0; 4], [0.0; 4]).is_err());
        assert!(Grid4::new([1; 4], [1.0, -1.0, 1.0, 1.0], [0.0; 4]).is_err());
    }

    #[test]
    fn linear_time_potential_gives_unit_00() {
        let grid = small_grid();
        let omega = OneForm::from_fn(grid.clone(), |x| [x[0], 0.0, 0.0, 0.0]);
        let ds = d_sym(&omega, DerivativeScheme::CentralDifference).unwrap();
        for flat in 0..grid.len() {
            let t = ds.at(flat).unwrap();
            assert!((t.get(0, 0) - 1.0).abs() < 1e-12);
            for k in 1..4 {
                assert!(t.get(0, k).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_one_form_has_zero_differential() {
        let grid = small_grid();
        let omega = OneForm::from_fn(grid.clone(), |_| [1.0, -2.0, 0.5, 3.0]);
        for scheme in [DerivativeScheme::Spectral, DerivativeScheme::CentralDifference] {
            let ds = d_sym(&omega, scheme).unwrap();
            assert!(ds.values().unwrap().iter().all(|x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn spectral_derivative_of_periodic_sines() {
        let grid = small_grid();
        let len = 2.0;
        let omega = OneForm::from_fn(grid.clone(), |x| {
            std::array::from_fn(|j| (TAU * x[j] / len).sin())
        });
        let ds = d_sym(&omega, DerivativeScheme::Spectral).unwrap();
        for flat in 0..grid.len() {
            let x = grid.point_flat(flat);
            let t = ds.at(flat).unwrap();
            for j in 0..4 {
                let exact = TAU / len * (TAU * x[j] / len).cos();
                assert!((t.get(j, j) - exact).abs() < 1e-12);
                for k in j + 1..4 {
                    assert!(t.get(j, k).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn d_sym_is_linear() {
        let grid = small_grid();
        let a = OneForm::from_fn(grid.clone(), |x| [x[1] * x[2], x[0].sin(), 0.0, x[3]]);
        let b = OneForm::from_fn(grid.clone(), |x| [0.0, x[0] * x[0], x[2].cos(), 1.0]);
        let sum = OneForm {
            grid: grid.clone(),
            components: std::array::from_fn(|c| {
                a.components[c].iter().zip(&b.components[c]).map(|(p, q)| 2.0 * p - q).collect()
            }),
        };
        for scheme in [DerivativeScheme::Spectral, DerivativeScheme::CentralDifference] {
            let lhs = d_sym(&sum, scheme).unwrap();
            let rhs = d_sym(&a, scheme)
                .unwrap()
                .scaled(2.0)
                .unwrap()
                .sub(&d_sym(&b, scheme).unwrap())
                .unwrap();
            assert!(lhs.sub(&rhs).unwrap().l2_norm() < 1e-12 * (1.0 + rhs.l2_norm()));
        }
    }

    #[test]
    fn gauge_field_of_scalar_bump_is_metric_multiple() {
        let grid = small_grid();
        let c: Vec<f64> = (0..grid.len())
            .map(|i| {
                let x = grid.point_flat(i);
                (-x.iter().map(|v| v * v).sum::<f64>() / 0.1).exp()
            })
            .collect();
        let gf = gauge_field(&c, &OneForm::zeros(grid.clone()), DerivativeScheme::Spectral).unwrap();
        for (i, ci) in c.iter().enumerate() {
            let t = gf.field.at(i).unwrap();
            assert_eq!(t, *ci * Sym2::metric());
        }
        // the Gaussian is nonzero everywhere on the grid
        assert!(gf.boundary_warning);

        let zero = gauge_field(&vec![0.0; grid.len()], &OneForm::zeros(grid.clone()), DerivativeScheme::Spectral)
            .unwrap();
        assert_eq!(zero.field.l2_norm(), 0.0);
        assert!(!zero.boundary_warning);
    }

    #[test]
    fn domain_checks() {
        let f = Sym2Field::zeros(small_grid());
        assert!(f.spectrum().is_err());
        assert!(f.require(Domain::Frequency).is_err());
        assert!(f.require(Domain::Position).is_ok());
        let bad = Sym2Field::from_position_data(small_grid(), vec![0.0; 3]);
        assert!(bad.is_err());
    }
}
