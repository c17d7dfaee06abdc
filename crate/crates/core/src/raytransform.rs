//! Light ray transform, backprojection and the geometric normal operator.
//!
//! A light ray through `(0, y)` with direction `v in S^2` is `gamma(s) = (s, y + s v)`
//! with tangent `theta = (1, v)`. The transform of a tensor field is
//!
//! ```text
//! L f(y, v) = \int f_{lm}(s, y + s v) theta^l theta^m ds
//! ```
//!
//! sampled on a [`RayGrid`]: a lattice of crossing points `y`, a sphere quadrature
//! for `v`, and a uniform trapezoid rule in `s`.
//!
//! When the crossing-point lattice is a sublattice-aligned copy of the field's
//! spatial lattice, the displacement between a crossing point and each quadrature
//! sample depends on `v` and `s` only. The per-ray sums then collapse into one
//! sparse stencil per direction, which gives the same quadrature with far less
//! work. Other ray grids fall back to per-ray evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid4, Sym2Field};
use crate::interp::{sample, Interpolation};
use crate::sphere::{SphereQuadrature, SphereSampler};
use crate::tensor::{Covector, Sym2, Vec4, FROBENIUS_WEIGHT, PAIRS};

/// Weight `chi(y)` on crossing points.
pub type RayWeight = dyn Fn([f64; 3]) -> f64 + Sync;

pub const DEFAULT_N_V: usize = 576;
pub const DEFAULT_N_S: usize = 257;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightRay {
    pub y: [f64; 3],
    pub v: [f64; 3],
}

impl LightRay {
    /// `v` must be a unit vector to 1e-12.
    pub fn new(y: [f64; 3], v: [f64; 3]) -> Result<Self> {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("ray direction must be a unit vector, |v| = {n}")));
        }
        Ok(LightRay { y, v })
    }

    pub fn tangent(&self) -> Vec4 {
        Vec4::light_tangent(self.v)
    }

    pub fn point(&self, s: f64) -> [f64; 4] {
        [s, self.y[0] + s * self.v[0], self.y[1] + s * self.v[1], self.y[2] + s * self.v[2]]
    }
}

/// Crossing-point region in the `t = 0` slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Region {
    Box { lo: [f64; 3], hi: [f64; 3] },
    Ball { center: [f64; 3], radius: f64 },
}

impl Region {
    pub fn contains(&self, y: &[f64; 3]) -> bool {
        const TOL: f64 = 1e-12;
        match self {
            Region::Box { lo, hi } => (0..3).all(|a| y[a] >= lo[a] - TOL && y[a] <= hi[a] + TOL),
            Region::Ball { center, radius } => dist3(y, center) <= radius + TOL,
        }
    }

    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        match self {
            Region::Box { lo, hi } => (*lo, *hi),
            Region::Ball { center, radius } => (center.map(|c| c - radius), center.map(|c| c + radius)),
        }
    }

    /// Smallest and largest distance from `p` to a point of the region.
    pub fn distance_range(&self, p: &[f64; 3]) -> (f64, f64) {
        match self {
            Region::Box { lo, hi } => {
                let mut near = 0.0;
                let mut far = 0.0;
                for a in 0..3 {
                    let below = (lo[a] - p[a]).max(0.0);
                    let above = (p[a] - hi[a]).max(0.0);
                    let n = below.max(above);
                    let f = (p[a] - lo[a]).abs().max((p[a] - hi[a]).abs());
                    near += n * n;
                    far += f * f;
                }
                (near.sqrt(), far.sqrt())
            }
            Region::Ball { center, radius } => {
                let d = dist3(p, center);
                ((d - radius).max(0.0), d + radius)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Region::Box { lo, hi } if (0..3).all(|a| lo[a] <= hi[a]) => Ok(()),
            Region::Ball { radius, .. } if *radius >= 0.0 => Ok(()),
            _ => Err(Error::invalid(format!("degenerate region {self:?}"))),
        }
    }
}

fn dist3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// True iff some light ray through `p` crosses `t = 0` inside `region`, i.e. the
/// light sphere of radius `|p0|` about `p'` meets the region.
pub fn in_lu(p: &[f64; 4], region: &Region) -> bool {
    let (near, far) = region.distance_range(&[p[1], p[2], p[3]]);
    let r = p[0].abs();
    near <= r && r <= far
}

/// Projection of a null bicharacteristic: `t -> x + t (-xi0, xi')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowoutLine {
    pub origin: [f64; 4],
    pub direction: [f64; 4],
}

impl FlowoutLine {
    pub fn point(&self, t: f64) -> [f64; 4] {
        std::array::from_fn(|a| self.origin[a] + t * self.direction[a])
    }
}

/// Flowout line through `x` for a light-like `xi` (`|q(xi)| <= tol |xi|^2`).
pub fn flowout_line(x: [f64; 4], xi: &Covector, tol: f64) -> Result<FlowoutLine> {
    let n2 = xi.euclid_norm_sq();
    if n2 == 0.0 || xi.minkowski_q().abs() > tol * n2 {
        return Err(Error::NotLightLike(xi.0));
    }
    Ok(FlowoutLine {
        origin: x,
        direction: [-xi.0[0], xi.0[1], xi.0[2], xi.0[3]],
    })
}

/// Regular lattice of crossing points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YGrid {
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    pub dims: [usize; 3],
}

impl YGrid {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, flat: usize) -> [f64; 3] {
        let i2 = flat % self.dims[2];
        let i1 = (flat / self.dims[2]) % self.dims[1];
        let i0 = flat / (self.dims[1] * self.dims[2]);
        [
            self.origin[0] + i0 as f64 * self.spacing[0],
            self.origin[1] + i1 as f64 * self.spacing[1],
            self.origin[2] + i2 as f64 * self.spacing[2],
        ]
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Lattice covering `[lo, hi]` with the given spacing, anchored at `lo`.
    pub fn covering(lo: [f64; 3], hi: [f64; 3], spacing: [f64; 3]) -> Result<Self> {
        if spacing.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::invalid("crossing-point spacing must be positive"));
        }
        let dims = std::array::from_fn(|a| ((hi[a] - lo[a]) / spacing[a] + 1e-9).floor() as usize + 1);
        Ok(YGrid {
            origin: lo,
            spacing,
            dims,
        })
    }
}

/// Uniform trapezoid rule on `[-s_max, s_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineQuadrature {
    pub s_max: f64,
    pub n_s: usize,
}

impl LineQuadrature {
    pub fn new(s_max: f64, n_s: usize) -> Result<Self> {
        if !(s_max > 0.0 && s_max.is_finite()) || n_s < 2 {
            return Err(Error::invalid(format!(
                "line quadrature needs s_max > 0 and N_s >= 2, got {s_max}, {n_s}"
            )));
        }
        Ok(LineQuadrature { s_max, n_s })
    }

    pub fn step(&self) -> f64 {
        2.0 * self.s_max / (self.n_s - 1) as f64
    }

    pub fn node(&self, n: usize) -> f64 {
        -self.s_max + n as f64 * self.step()
    }

    pub fn weight(&self, n: usize) -> f64 {
        if n == 0 || n + 1 == self.n_s {
            0.5 * self.step()
        } else {
            self.step()
        }
    }
}

/// Sampling parameters for an automatically sized ray grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayParams {
    pub n_v: usize,
    pub n_s: usize,
    pub sampler: SphereSampler,
    pub interpolation: Interpolation,
}

impl Default for RayParams {
    fn default() -> Self {
        RayParams {
            n_v: DEFAULT_N_V,
            n_s: DEFAULT_N_S,
            sampler: SphereSampler::Fibonacci,
            interpolation: Interpolation::Multilinear,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayGrid {
    pub region: Region,
    pub ygrid: YGrid,
    pub sphere: SphereQuadrature,
    pub line: LineQuadrature,
}

impl RayGrid {
    pub fn new(region: Region, ygrid: YGrid, sphere: SphereQuadrature, line: LineQuadrature) -> Result<Self> {
        region.validate()?;
        Ok(RayGrid {
            region,
            ygrid,
            sphere,
            line,
        })
    }

    /// Crossing points on the field's spatial lattice covering every ray that can
    /// meet the support of `f`; `s_max` is the largest `|t|` over that support.
    pub fn auto(f: &Sym2Field, params: &RayParams) -> Result<Self> {
        let grid = f.grid();
        let m = params.interpolation.margin() as i64;
        let bounds = f.support_index_bounds().unwrap_or_else(|| std::array::from_fn(|a| (0, grid.dims[a] - 1)));
        let lo_idx: [i64; 4] = std::array::from_fn(|a| bounds[a].0 as i64 - m);
        let hi_idx: [i64; 4] = std::array::from_fn(|a| bounds[a].1 as i64 + m);
        let t_lo = grid.origin[0] + lo_idx[0] as f64 * grid.spacing[0];
        let t_hi = grid.origin[0] + hi_idx[0] as f64 * grid.spacing[0];
        let t_max = t_lo.abs().max(t_hi.abs()).max(grid.spacing[0]);
        let line = LineQuadrature::new(t_max, params.n_s)?;
        let mut y_lo = [0i64; 3];
        let mut dims = [0usize; 3];
        for a in 0..3 {
            let h = grid.spacing[a + 1];
            let reach = (t_max / h - 1e-9).ceil() as i64;
            y_lo[a] = lo_idx[a + 1] - reach;
            dims[a] = (hi_idx[a + 1] + reach - y_lo[a] + 1) as usize;
        }
        let ygrid = YGrid {
            origin: std::array::from_fn(|a| grid.origin[a + 1] + y_lo[a] as f64 * grid.spacing[a + 1]),
            spacing: [grid.spacing[1], grid.spacing[2], grid.spacing[3]],
            dims,
        };
        let last = ygrid.point(ygrid.len() - 1);
        let region = Region::Box {
            lo: ygrid.origin,
            hi: last,
        };
        let sphere = SphereQuadrature::new(params.sampler, params.n_v)?;
        RayGrid::new(region, ygrid, sphere, line)
    }

    /// Same crossing points and line rule with a different direction count.
    pub fn with_directions(&self, sampler: SphereSampler, n_v: usize) -> Result<Self> {
        let mut out = self.clone();
        out.sphere = SphereQuadrature::new(sampler, n_v)?;
        Ok(out)
    }

    pub fn with_line_nodes(&self, n_s: usize) -> Result<Self> {
        let mut out = self.clone();
        out.line = LineQuadrature::new(self.line.s_max, n_s)?;
        Ok(out)
    }

    pub fn n_y(&self) -> usize {
        self.ygrid.len()
    }

    pub fn n_v(&self) -> usize {
        self.sphere.len()
    }

    pub fn ray(&self, i_y: usize, i_v: usize) -> LightRay {
        LightRay {
            y: self.ygrid.point(i_y),
            v: self.sphere.directions[i_v],
        }
    }

    fn inside_mask(&self) -> Vec<bool> {
        (0..self.n_y()).map(|i| self.region.contains(&self.ygrid.point(i))).collect()
    }

    /// Integer offset of the crossing lattice within the field's spatial lattice,
    /// if the two lattices coincide.
    fn lattice_offset(&self, grid: &Grid4) -> Option<[i64; 3]> {
        let mut off = [0i64; 3];
        for a in 0..3 {
            let h = grid.spacing[a + 1];
            if (self.ygrid.spacing[a] - h).abs() > 1e-12 * h {
                return None;
            }
            let k = (self.ygrid.origin[a] - grid.origin[a + 1]) / h;
            if (k - k.round()).abs() > 1e-9 {
                return None;
            }
            off[a] = k.round() as i64;
        }
        Some(off)
    }
}

/// Transform values on a [`RayGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RayData {
    pub rays: RayGrid,
    /// Direction-major internally: `values[i_v * n_y + i_y]`.
    values: Vec<f64>,
    pub field_id: String,
    pub interpolation: Interpolation,
}

impl RayData {
    pub fn zeros(rays: RayGrid) -> Self {
        let n = rays.n_y() * rays.n_v();
        RayData {
            rays,
            values: vec![0.0; n],
            field_id: String::new(),
            interpolation: Interpolation::Multilinear,
        }
    }

    /// Builds from values in `(i_y outer, i_v inner)` order.
    pub fn from_y_major(rays: RayGrid, data: &[f64]) -> Result<Self> {
        let (ny, nv) = (rays.n_y(), rays.n_v());
        if data.len() != ny * nv {
            return Err(Error::DimensionMismatch(format!("expected {} ray values, got {}", ny * nv, data.len())));
        }
        let mut values = vec![0.0; ny * nv];
        for iy in 0..ny {
            for iv in 0..nv {
                values[iv * ny + iy] = data[iy * nv + iv];
            }
        }
        Ok(RayData {
            rays,
            values,
            field_id: String::new(),
            interpolation: Interpolation::Multilinear,
        })
    }

    /// Values in `(i_y outer, i_v inner)` order.
    pub fn to_y_major(&self) -> Vec<f64> {
        let (ny, nv) = (self.rays.n_y(), self.rays.n_v());
        let mut out = vec![0.0; ny * nv];
        for iv in 0..nv {
            for iy in 0..ny {
                out[iy * nv + iv] = self.values[iv * ny + iy];
            }
        }
        out
    }

    pub fn get(&self, i_y: usize, i_v: usize) -> f64 {
        self.values[i_v * self.rays.n_y() + i_y]
    }

    pub fn set(&mut self, i_y: usize, i_v: usize, value: f64) {
        let ny = self.rays.n_y();
        self.values[i_v * ny + i_y] = value;
    }

    pub fn direction_slice(&self, i_v: usize) -> &[f64] {
        let ny = self.rays.n_y();
        &self.values[i_v * ny..(i_v + 1) * ny]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `sum_{y, v} u w_v dy` with `dy` the crossing-cell volume.
    pub fn dot(&self, other: &RayData) -> Result<f64> {
        if self.values.len() != other.values.len() {
            return Err(Error::DimensionMismatch("ray data sizes differ".into()));
        }
        let ny = self.rays.n_y();
        let mut total = 0.0;
        for (iv, w) in self.rays.sphere.weights.iter().enumerate() {
            let s: f64 = self.values[iv * ny..(iv + 1) * ny]
                .iter()
                .zip(&other.values[iv * ny..(iv + 1) * ny])
                .map(|(a, b)| a * b)
                .sum();
            total += w * s;
        }
        Ok(total * self.rays.ygrid.cell_volume())
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).map(f64::sqrt).unwrap_or(f64::NAN)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// `theta_j theta_k` times the Frobenius multiplicity, so that
/// `sum_p w[p] f_p = f_{lm} theta^l theta^m`.
fn contraction_weights(v: &[f64; 3]) -> [f64; 10] {
    let t = [1.0, v[0], v[1], v[2]];
    std::array::from_fn(|p| {
        let (j, k) = PAIRS[p];
        FROBENIUS_WEIGHT[p] * t[j] * t[k]
    })
}

fn outer_weights(v: &[f64; 3]) -> [f64; 10] {
    let t = [1.0, v[0], v[1], v[2]];
    PAIRS.map(|(j, k)| t[j] * t[k])
}

/// Interpolation coefficients of all ten components.
fn coefficients(f: &Sym2Field, interp: Interpolation) -> Result<Vec<f64>> {
    let mut c = f.values()?.to_vec();
    if interp == Interpolation::CubicBSpline {
        let n = f.grid().len();
        let dims = f.grid().dims;
        for chunk in c.chunks_mut(n) {
            interp.prepare(chunk, &dims);
        }
    }
    Ok(c)
}

/// Forward transform of a gridded field. `chi` multiplies each ray by `chi(y)`.
pub fn forward(f: &Sym2Field, rays: &RayGrid, interp: Interpolation, chi: Option<&RayWeight>) -> Result<RayData> {
    let coef = coefficients(f, interp)?;
    let grid = f.grid();
    let mut values = match rays.lattice_offset(grid) {
        Some(off) => forward_stencil(&coef, grid, rays, off, interp),
        None => {
            let ny = rays.n_y();
            let all: Vec<Vec<f64>> = (0..rays.n_v())
                .into_par_iter()
                .map(|iv| {
                    (0..ny)
                        .map(|iy| ray_integral(&coef, grid, &rays.ray(iy, iv), &rays.line, interp))
                        .collect()
                })
                .collect();
            all.concat()
        }
    };
    apply_ray_weight(&mut values, rays, chi);
    Ok(RayData {
        rays: rays.clone(),
        values,
        field_id: String::new(),
        interpolation: interp,
    })
}

fn apply_ray_weight(values: &mut [f64], rays: &RayGrid, chi: Option<&RayWeight>) {
    let ny = rays.n_y();
    let inside = rays.inside_mask();
    let weight: Vec<f64> = (0..ny)
        .map(|iy| {
            if !inside[iy] {
                0.0
            } else {
                chi.map_or(1.0, |c| c(rays.ygrid.point(iy)))
            }
        })
        .collect();
    if weight.iter().all(|&w| w == 1.0) {
        return;
    }
    values.par_chunks_mut(ny).for_each(|slice| {
        for (u, w) in slice.iter_mut().zip(&weight) {
            *u *= w;
        }
    });
}

/// Inclusive time-slice range holding nonzero coefficients.
fn nonzero_slices(coef: &[f64], grid: &Grid4) -> Vec<bool> {
    let n = grid.len();
    let ns = n / grid.dims[0];
    (0..grid.dims[0])
        .map(|i| (0..10).any(|p| coef[p * n + i * ns..p * n + (i + 1) * ns].iter().any(|&x| x != 0.0)))
        .collect()
}

fn forward_stencil(coef: &[f64], grid: &Grid4, rays: &RayGrid, off: [i64; 3], interp: Interpolation) -> Vec<f64> {
    let n = grid.len();
    let [nt, m0, m1, m2] = grid.dims;
    let ns = m0 * m1 * m2;
    let yd = rays.ygrid.dims;
    let ny = rays.n_y();
    let live = nonzero_slices(coef, grid);
    let width = interp.width();
    let line = rays.line;
    let h = grid.spacing;
    let per_direction: Vec<Vec<f64>> = rays
        .sphere
        .directions
        .par_iter()
        .map(|v| {
            let cw = contraction_weights(v);
            let mut c = vec![0.0; n];
            for i in (0..nt).filter(|&i| live[i]) {
                let dst = &mut c[i * ns..(i + 1) * ns];
                for (p, &w) in cw.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let src = &coef[p * n + i * ns..p * n + (i + 1) * ns];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
            let mut entries: Vec<([i64; 4], f64)> = Vec::new();
            for k in 0..line.n_s {
                let s = line.node(k);
                let ws = line.weight(k);
                let (tb, tw) = interp.taps((s - grid.origin[0]) / h[0]);
                let sp: [(i64, [f64; 4]); 3] = std::array::from_fn(|a| interp.taps(s * v[a] / h[a + 1]));
                for it in 0..width {
                    let j = tb + it as i64;
                    if j < 0 || j >= nt as i64 || !live[j as usize] || tw[it] == 0.0 {
                        continue;
                    }
                    for i0 in 0..width {
                        for i1 in 0..width {
                            for i2 in 0..width {
                                let w = ws * tw[it] * sp[0].1[i0] * sp[1].1[i1] * sp[2].1[i2];
                                if w != 0.0 {
                                    entries.push((
                                        [j, sp[0].0 + i0 as i64, sp[1].0 + i1 as i64, sp[2].0 + i2 as i64],
                                        w,
                                    ));
                                }
                            }
                        }
                    }
                }
            }
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut merged: Vec<([i64; 4], f64)> = Vec::with_capacity(entries.len() / 4);
            for (key, w) in entries {
                match merged.last_mut() {
                    Some(last) if last.0 == key => last.1 += w,
                    _ => merged.push((key, w)),
                }
            }
            let mut u = vec![0.0; ny];
            for ([j, d0, d1, d2], w) in merged {
                let slice = &c[j as usize * ns..(j as usize + 1) * ns];
                let s0 = off[0] + d0;
                let s1 = off[1] + d1;
                let s2 = off[2] + d2;
                let (a0, b0) = overlap(s0, yd[0], m0);
                let (a1, b1) = overlap(s1, yd[1], m1);
                let (a2, b2) = overlap(s2, yd[2], m2);
                if a0 >= b0 || a1 >= b1 || a2 >= b2 {
                    continue;
                }
                let len = b2 - a2;
                for iy0 in a0..b0 {
                    let z0 = (iy0 as i64 + s0) as usize;
                    for iy1 in a1..b1 {
                        let z1 = (iy1 as i64 + s1) as usize;
                        let urow = &mut u[(iy0 * yd[1] + iy1) * yd[2] + a2..][..len];
                        let crow = &slice[(z0 * m1 + z1) * m2 + (a2 as i64 + s2) as usize..][..len];
                        for (a, b) in urow.iter_mut().zip(crow) {
                            *a += w * b;
                        }
                    }
                }
            }
            u
        })
        .collect();
    per_direction.concat()
}

/// Index range `[a, b)` of `i in 0..len_y` with `i + shift in 0..len_z`.
#[inline]
fn overlap(shift: i64, len_y: usize, len_z: usize) -> (usize, usize) {
    let a = (-shift).max(0);
    let b = (len_y as i64).min(len_z as i64 - shift);
    if b <= a {
        (0, 0)
    } else {
        (a as usize, b as usize)
    }
}

/// Trapezoid sum of `f_{lm} theta^l theta^m` along one ray, interpolating the
/// coefficient array of all ten components.
fn ray_integral(coef: &[f64], grid: &Grid4, ray: &LightRay, line: &LineQuadrature, interp: Interpolation) -> f64 {
    let cw = contraction_weights(&ray.v);
    let n = grid.len();
    let width = interp.width();
    let strides = grid.strides();
    let (s_lo, s_hi) = ray_clip(grid, ray, interp.margin() as f64);
    let mut total = 0.0;
    for k in 0..line.n_s {
        let s = line.node(k);
        if s < s_lo || s > s_hi {
            continue;
        }
        let x = ray.point(s);
        let taps: [(i64, [f64; 4]); 4] =
            std::array::from_fn(|a| interp.taps((x[a] - grid.origin[a]) / grid.spacing[a]));
        let mut acc = 0.0;
        for i0 in 0..width {
            let j0 = taps[0].0 + i0 as i64;
            if j0 < 0 || j0 >= grid.dims[0] as i64 {
                continue;
            }
            for i1 in 0..width {
                let j1 = taps[1].0 + i1 as i64;
                if j1 < 0 || j1 >= grid.dims[1] as i64 {
                    continue;
                }
                for i2 in 0..width {
                    let j2 = taps[2].0 + i2 as i64;
                    if j2 < 0 || j2 >= grid.dims[2] as i64 {
                        continue;
                    }
                    let w012 = taps[0].1[i0] * taps[1].1[i1] * taps[2].1[i2];
                    for i3 in 0..width {
                        let j3 = taps[3].0 + i3 as i64;
                        if j3 < 0 || j3 >= grid.dims[3] as i64 {
                            continue;
                        }
                        let flat = j0 as usize * strides[0]
                            + j1 as usize * strides[1]
                            + j2 as usize * strides[2]
                            + j3 as usize;
                        let mut val = 0.0;
                        for p in 0..10 {
                            val += cw[p] * coef[p * n + flat];
                        }
                        acc += w012 * taps[3].1[i3] * val;
                    }
                }
            }
        }
        total += line.weight(k) * acc;
    }
    total
}

/// Parameter interval on which the ray can see the grid (plus `margin` cells).
fn ray_clip(grid: &Grid4, ray: &LightRay, margin: f64) -> (f64, f64) {
    let last = grid.last_point();
    let mut lo = grid.origin[0] - margin * grid.spacing[0];
    let mut hi = last[0] + margin * grid.spacing[0];
    for a in 0..3 {
        let (glo, ghi) = (
            grid.origin[a + 1] - margin * grid.spacing[a + 1],
            last[a + 1] + margin * grid.spacing[a + 1],
        );
        let (y, v) = (ray.y[a], ray.v[a]);
        if v == 0.0 {
            if y < glo || y > ghi {
                return (1.0, -1.0);
            }
        } else {
            let (t1, t2) = ((glo - y) / v, (ghi - y) / v);
            lo = lo.max(t1.min(t2));
            hi = hi.min(t1.max(t2));
        }
    }
    (lo, hi)
}

/// Forward transform of a gridded field along arbitrary rays.
pub fn forward_rays(f: &Sym2Field, rays: &[LightRay], line: &LineQuadrature, interp: Interpolation) -> Result<Vec<f64>> {
    let coef = coefficients(f, interp)?;
    let grid = f.grid();
    Ok(rays.par_iter().map(|r| ray_integral(&coef, grid, r, line, interp)).collect())
}

/// Forward transform of an analytic field along arbitrary rays.
pub fn forward_analytic_rays<F>(f: F, rays: &[LightRay], line: &LineQuadrature) -> Vec<f64>
where
    F: Fn([f64; 4]) -> Sym2 + Sync,
{
    rays.par_iter()
        .map(|ray| {
            let theta = ray.tangent();
            (0..line.n_s)
                .map(|k| line.weight(k) * f(ray.point(line.node(k))).contract(&theta))
                .sum()
        })
        .collect()
}

/// Forward transform of an analytic field on a ray grid.
pub fn forward_analytic<F>(f: F, rays: &RayGrid, chi: Option<&RayWeight>) -> RayData
where
    F: Fn([f64; 4]) -> Sym2 + Sync,
{
    let ny = rays.n_y();
    let all: Vec<Vec<f64>> = (0..rays.n_v())
        .into_par_iter()
        .map(|iv| {
            let list: Vec<LightRay> = (0..ny).map(|iy| rays.ray(iy, iv)).collect();
            let theta = Vec4::light_tangent(rays.sphere.directions[iv]);
            list.iter()
                .map(|ray| {
                    (0..rays.line.n_s)
                        .map(|k| rays.line.weight(k) * f(ray.point(rays.line.node(k))).contract(&theta))
                        .sum()
                })
                .collect()
        })
        .collect();
    let mut values = all.concat();
    apply_ray_weight(&mut values, rays, chi);
    RayData {
        rays: rays.clone(),
        values,
        field_id: String::new(),
        interpolation: Interpolation::Multilinear,
    }
}

/// Backprojection `(L^t u)_{jk}(x) = sum_v w_v chi(y) u(y, v) theta^j theta^k`,
/// `y = x' - x0 v`, with `u` trilinear in `y` and zero outside the region.
pub fn adjoint(u: &RayData, grid: &Grid4, chi: Option<&RayWeight>) -> Result<Sym2Field> {
    adjoint_with(u, grid, chi, Interpolation::Multilinear)
}

/// [`adjoint`] with a choice of interpolation in `y` (trilinear or cubic B-spline).
pub fn adjoint_with(u: &RayData, grid: &Grid4, chi: Option<&RayWeight>, interp: Interpolation) -> Result<Sym2Field> {
    let rays = &u.rays;
    let ny = rays.n_y();
    let mut weighted = u.values.clone();
    apply_ray_weight(&mut weighted, rays, chi);
    if interp != Interpolation::Multilinear {
        let dims = rays.ygrid.dims;
        weighted.par_chunks_mut(ny).for_each(|slice| interp.prepare(slice, &dims));
    }
    let data = match rays.lattice_offset(grid) {
        Some(off) => adjoint_stencil(&weighted, rays, grid, off, interp),
        None => {
            let n = grid.len();
            let per_point: Vec<[f64; 10]> = (0..n)
                .into_par_iter()
                .map(|flat| {
                    let x = grid.point_flat(flat);
                    let mut acc = [0.0; 10];
                    for (iv, v) in rays.sphere.directions.iter().enumerate() {
                        let pos: [f64; 3] = std::array::from_fn(|a| {
                            (x[a + 1] - x[0] * v[a] - rays.ygrid.origin[a]) / rays.ygrid.spacing[a]
                        });
                        let val = sample(
                            &weighted[iv * ny..(iv + 1) * ny],
                            rays.ygrid.dims,
                            pos,
                            interp,
                        );
                        if val != 0.0 {
                            let ow = outer_weights(v);
                            let wv = rays.sphere.weights[iv] * val;
                            for p in 0..10 {
                                acc[p] += wv * ow[p];
                            }
                        }
                    }
                    acc
                })
                .collect();
            let mut data = vec![0.0; 10 * n];
            for (flat, acc) in per_point.iter().enumerate() {
                for p in 0..10 {
                    data[p * n + flat] = acc[p];
                }
            }
            data
        }
    };
    Sym2Field::from_position_data(grid.clone(), data)
}

fn adjoint_stencil(weighted: &[f64], rays: &RayGrid, grid: &Grid4, off: [i64; 3], interp: Interpolation) -> Vec<f64> {
    let n = grid.len();
    let [nt, m0, m1, m2] = grid.dims;
    let ns = m0 * m1 * m2;
    let yd = rays.ygrid.dims;
    let ny = rays.n_y();
    let width = interp.width();
    let slices: Vec<Vec<f64>> = (0..nt)
        .into_par_iter()
        .map(|i| {
            let t = grid.origin[0] + i as f64 * grid.spacing[0];
            let mut acc = vec![0.0; 10 * ns];
            let mut srow = vec![0.0; ns];
            let mut t2 = Vec::new();
            let mut t1 = Vec::new();
            for (iv, v) in rays.sphere.directions.iter().enumerate() {
                let uv = &weighted[iv * ny..(iv + 1) * ny];
                let taps: [(i64, [f64; 4]); 3] =
                    std::array::from_fn(|a| interp.taps(-t * v[a] / grid.spacing[a + 1]));
                // y index along axis a = x index + shift[a] + tap
                let shift: [i64; 3] = std::array::from_fn(|a| taps[a].0 - off[a]);
                let reach = |a: usize, m: usize| -> bool {
                    let (lo, hi) = overlap(shift[a] + width as i64 - 1, m, yd[a] + width - 1);
                    lo < hi
                };
                if !(reach(0, m0) && reach(1, m1) && reach(2, m2)) {
                    continue;
                }
                // separable passes: axis 2, then 1, then 0
                t2.clear();
                t2.resize(yd[0] * yd[1] * m2, 0.0);
                for r in 0..yd[0] * yd[1] {
                    let src = &uv[r * yd[2]..(r + 1) * yd[2]];
                    let dst = &mut t2[r * m2..(r + 1) * m2];
                    for (c, &w) in taps[2].1[..width].iter().enumerate() {
                        if w == 0.0 {
                            continue;
                        }
                        let (a2, b2) = overlap(shift[2] + c as i64, m2, yd[2]);
                        for x2 in a2..b2 {
                            dst[x2] += w * src[(x2 as i64 + shift[2] + c as i64) as usize];
                        }
                    }
                }
                t1.clear();
                t1.resize(yd[0] * m1 * m2, 0.0);
                for y0 in 0..yd[0] {
                    for (c, &w) in taps[1].1[..width].iter().enumerate() {
                        if w == 0.0 {
                            continue;
                        }
                        let (a1, b1) = overlap(shift[1] + c as i64, m1, yd[1]);
                        for x1 in a1..b1 {
                            let y1 = (x1 as i64 + shift[1] + c as i64) as usize;
                            let src = &t2[(y0 * yd[1] + y1) * m2..][..m2];
                            let dst = &mut t1[(y0 * m1 + x1) * m2..][..m2];
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d += w * s;
                            }
                        }
                    }
                }
                srow.iter_mut().for_each(|x| *x = 0.0);
                let mut any = false;
                for (c, &w) in taps[0].1[..width].iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let (a0, b0) = overlap(shift[0] + c as i64, m0, yd[0]);
                    for x0 in a0..b0 {
                        any = true;
                        let y0 = (x0 as i64 + shift[0] + c as i64) as usize;
                        let src = &t1[y0 * m1 * m2..][..m1 * m2];
                        let dst = &mut srow[x0 * m1 * m2..][..m1 * m2];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += w * s;
                        }
                    }
                }
                if !any {
                    continue;
                }
                let ow = outer_weights(v);
                let wv = rays.sphere.weights[iv];
                for p in 0..10 {
                    let c = wv * ow[p];
                    for (d, s) in acc[p * ns..(p + 1) * ns].iter_mut().zip(&srow) {
                        *d += c * s;
                    }
                }
            }
            acc
        })
        .collect();
    let mut data = vec![0.0; 10 * n];
    for (i, acc) in slices.iter().enumerate() {
        for p in 0..10 {
            data[p * n + i * ns..p * n + (i + 1) * ns].copy_from_slice(&acc[p * ns..(p + 1) * ns]);
        }
    }
    data
}

/// Geometric normal operator as backprojection of the forward transform, with
/// `interp` used on both sides.
pub fn normal_geometric(f: &Sym2Field, rays: &RayGrid, interp: Interpolation, chi: Option<&RayWeight>) -> Result<Sym2Field> {
    let u = forward(f, rays, interp, chi)?;
    adjoint_with(&u, f.grid(), chi, interp)
}

/// Geometric normal operator at selected points by direct double quadrature: for
/// each direction the ray through `x` itself is integrated, so no interpolation
/// in `y` is involved. `chi` enters squared.
pub fn normal_geometric_direct(
    f: &Sym2Field,
    points: &[[f64; 4]],
    sphere: &SphereQuadrature,
    line: &LineQuadrature,
    interp: Interpolation,
    chi: Option<&RayWeight>,
) -> Result<Vec<Sym2>> {
    let coef = coefficients(f, interp)?;
    let grid = f.grid();
    Ok(points
        .par_iter()
        .map(|x| {
            let mut acc = Sym2::ZERO;
            for (v, w) in sphere.directions.iter().zip(&sphere.weights) {
                let y = [x[1] - x[0] * v[0], x[2] - x[0] * v[1], x[3] - x[0] * v[2]];
                let c = chi.map_or(1.0, |c| c(y));
                if c == 0.0 {
                    continue;
                }
                let val = ray_integral(&coef, grid, &LightRay { y, v: *v }, line, interp);
                acc += (w * c * c * val) * Sym2(outer_weights(v));
            }
            acc
        })
        .collect())
}
