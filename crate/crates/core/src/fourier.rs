//! Fourier multipliers with 10x10 tensor symbols: the normal operator, band
//! cutoffs, the gauge projector and the parametrix.
//!
//! DFT convention: unnormalised forward sum, `1/N` on the inverse, phase `x . eta`
//! with the Euclidean pairing. A multiplier `m(eta)` acts on the spectrum in
//! Mandel coordinates, so it is a symmetric 10x10 matrix per frequency.
//!
//! The continuous normal operator of the ray transform is the multiplier
//! `2 pi a(eta)`: the inner integral over the ray parameter produces
//! `\int e^{i r sigma} dr = 2 pi delta(sigma)`. The parametrix therefore carries
//! `b(eta) / (2 pi)`.
//!
//! On an even-length axis the Nyquist bin is its own mirror, so the Hermitian
//! partner of such a frequency is not `-eta`. Tensor-valued multipliers depend on
//! the sign pattern of `eta` and are set to zero on those planes; the scalar
//! band cutoffs are even in every component and are applied there as usual.

use std::collections::{HashMap, HashSet};
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft4;
use crate::field::{Grid4, Sym2Field};
use crate::symbol::{
    from_mandel, lightcone_symbol, pinv_b, plane_frame, symbol_a, to_mandel, CutoffSpec, Mat10, NullBasis, TruncatedSymbol,
    Vec10, DEFAULT_N_PHI,
};
use crate::tensor::{Covector, Sym2, Vec4, sym_outer};

/// Relative size of `|q(eta)| / |eta|^2` below which a grid frequency is treated
/// as lying on the light cone.
pub const CONE_TOL: f64 = 1e-12;

/// Dual grid of a [`Grid4`] under the DFT.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    pub dims: [usize; 4],
    pub axes: [Vec<f64>; 4],
}

impl FrequencyGrid {
    pub fn new(grid: &Grid4) -> Self {
        FrequencyGrid {
            dims: grid.dims,
            axes: grid.frequencies(),
        }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn eta(&self, mut flat: usize) -> Covector {
        let mut e = [0.0; 4];
        for a in (0..4).rev() {
            e[a] = self.axes[a][flat % self.dims[a]];
            flat /= self.dims[a];
        }
        Covector(e)
    }
}

/// Componentwise forward DFT.
pub fn fft_field(f: &Sym2Field) -> Result<Sym2Field> {
    let v = f.values()?;
    let grid = f.grid().clone();
    let n = grid.len();
    let plan = Fft4::new(grid.dims);
    let mut out: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    for chunk in out.chunks_mut(n) {
        plan.forward(chunk);
    }
    Sym2Field::from_frequency_data(grid, out)
}

/// Componentwise inverse DFT, keeping the real part. Returns the field and the
/// largest discarded imaginary part.
pub fn ifft_field(f: &Sym2Field) -> Result<(Sym2Field, f64)> {
    let spec = f.spectrum()?;
    let grid = f.grid().clone();
    let n = grid.len();
    let plan = Fft4::new(grid.dims);
    let mut data = spec.to_vec();
    for chunk in data.chunks_mut(n) {
        plan.inverse(chunk);
    }
    let max_imag = data.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    let real = data.iter().map(|z| z.re).collect();
    Ok((Sym2Field::from_position_data(grid, real)?, max_imag))
}

/// Largest `|F(eta) - conj(F(-eta))|` relative to the largest `|F|`.
pub fn hermitian_defect(f: &Sym2Field) -> Result<f64> {
    let spec = f.spectrum()?;
    let grid = f.grid();
    let n = grid.len();
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for p in 0..10 {
        let c = &spec[p * n..(p + 1) * n];
        for (flat, z) in c.iter().enumerate() {
            let idx = grid.unflat(flat);
            let mirror: [usize; 4] = std::array::from_fn(|a| (grid.dims[a] - idx[a]) % grid.dims[a]);
            worst = worst.max((z - c[grid.flat(mirror)].conj()).norm());
            scale = scale.max(z.norm());
        }
    }
    Ok(if scale == 0.0 { 0.0 } else { worst / scale })
}

/// Behaviour of the gauge projector at time-like frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeLikeConvention {
    /// Leave time-like frequencies untouched.
    #[default]
    Identity,
    /// Project out the span of the same five generators there as well.
    Project,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MultiplierKind {
    /// `2 pi a(eta)`, zero at time-like `eta`, the cone limit on the cone.
    Normal,
    /// `taper(eta) b(eta) / (2 pi)`.
    Parametrix,
    /// `taper(eta) Id`.
    Cutoff,
    /// Mirror-image taper on the time-like side, times `Id`.
    TimeLikeCutoff,
    /// Frobenius projector onto the complement of the gauge generators.
    GaugeProjector,
    /// `taper(eta) b(eta) a(eta)`: parametrix composed with the normal operator.
    ParametrixNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSpec {
    pub kind: MultiplierKind,
    pub cutoff: CutoffSpec,
    pub n_phi: usize,
    pub timelike: TimeLikeConvention,
}

impl MultiplierKind {
    /// True for the matrix-valued kinds that are zeroed on Nyquist planes.
    pub fn is_tensorial(&self) -> bool {
        !matches!(self, MultiplierKind::Cutoff | MultiplierKind::TimeLikeCutoff)
    }
}

impl MultiplierSpec {
    pub fn new(kind: MultiplierKind, cutoff: CutoffSpec) -> Self {
        MultiplierSpec {
            kind,
            cutoff,
            n_phi: DEFAULT_N_PHI,
            timelike: TimeLikeConvention::Identity,
        }
    }

    pub fn normal() -> Self {
        Self::new(MultiplierKind::Normal, CutoffSpec::default())
    }

    pub fn parametrix(cutoff: CutoffSpec) -> Self {
        Self::new(MultiplierKind::Parametrix, cutoff)
    }

    pub fn gauge_projector(timelike: TimeLikeConvention) -> Self {
        MultiplierSpec {
            timelike,
            ..Self::new(MultiplierKind::GaugeProjector, CutoffSpec::default())
        }
    }

    /// Multiplier value at `eta` (zero at `eta = 0`).
    pub fn value(&self, eta: &Covector) -> Result<MultiplierValue> {
        let n2 = eta.euclid_norm_sq();
        if n2 == 0.0 {
            return Ok(MultiplierValue::Zero);
        }
        let q = eta.minkowski_q();
        let on_cone = q.abs() <= CONE_TOL * n2;
        match self.kind {
            MultiplierKind::Normal => {
                if on_cone {
                    Ok(MultiplierValue::Matrix(lightcone_symbol(eta)?.gram() * TAU))
                } else if q < 0.0 {
                    Ok(MultiplierValue::Zero)
                } else {
                    Ok(MultiplierValue::Matrix(symbol_a(eta, self.n_phi)?.gram() * TAU))
                }
            }
            MultiplierKind::Cutoff => Ok(MultiplierValue::scalar(self.cutoff.taper(eta))),
            MultiplierKind::TimeLikeCutoff => Ok(MultiplierValue::scalar(self.cutoff.timelike_taper(eta))),
            MultiplierKind::Parametrix | MultiplierKind::ParametrixNormal => {
                let taper = self.cutoff.taper(eta);
                if taper == 0.0 {
                    return Ok(MultiplierValue::Zero);
                }
                let a = symbol_a(eta, self.n_phi)?;
                let b = pinv_b(&a, &self.cutoff)?;
                let m = if self.kind == MultiplierKind::Parametrix {
                    b.gram() * (taper / TAU)
                } else {
                    b.gram() * a.gram() * taper
                };
                Ok(MultiplierValue::Matrix(m))
            }
            MultiplierKind::GaugeProjector => {
                if q < 0.0 && !on_cone && self.timelike == TimeLikeConvention::Identity {
                    Ok(MultiplierValue::Identity)
                } else {
                    Ok(MultiplierValue::Matrix(gauge_projector_at(eta).gram()))
                }
            }
        }
    }
}

/// Projector onto the Frobenius complement of `{g, sym(eta (x) e_i)}` at any `eta != 0`.
fn gauge_projector_at(eta: &Covector) -> crate::symbol::SymbolOperator {
    let generators = std::array::from_fn(|i| {
        if i == 0 {
            Sym2::metric()
        } else {
            sym_outer(eta, &Vec4::basis(i - 1))
        }
    });
    NullBasis { eta: *eta, generators }.complement_projector()
}

#[derive(Debug, Clone, PartialEq)]
pub enum MultiplierValue {
    Zero,
    Identity,
    Scalar(f64),
    Matrix(Mat10),
}

impl MultiplierValue {
    fn scalar(s: f64) -> Self {
        if s == 0.0 {
            MultiplierValue::Zero
        } else if s == 1.0 {
            MultiplierValue::Identity
        } else {
            MultiplierValue::Scalar(s)
        }
    }

    /// Applies to a spectrum vector in Mandel coordinates.
    #[inline]
    pub fn apply(&self, z: &mut [Complex64; 10]) {
        match self {
            MultiplierValue::Zero => *z = [Complex64::default(); 10],
            MultiplierValue::Identity => {}
            MultiplierValue::Scalar(s) => z.iter_mut().for_each(|c| *c *= *s),
            MultiplierValue::Matrix(m) => {
                let src = *z;
                for (p, out) in z.iter_mut().enumerate() {
                    let mut acc = Complex64::default();
                    for (q, s) in src.iter().enumerate() {
                        acc += s * m[(p, q)];
                    }
                    *out = acc;
                }
            }
        }
    }
}

fn mandel_scale() -> [f64; 10] {
    to_mandel(&Sym2([1.0; 10])).into()
}

/// How tensor multipliers are evaluated on the frequency grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Evaluation {
    /// At every frequency.
    Direct,
    /// Once per `(eta0, |eta'|)` and rotated into place; see [`RotationTable`].
    Rotated,
}

/// `F^{-1}[m(eta) F f]` on the grid zero-padded by `pad` along every axis, cropped
/// back to the original grid. `pad = 1` is the plain periodic multiplier.
pub fn apply_multiplier(f: &Sym2Field, spec: &MultiplierSpec, pad: usize) -> Result<Sym2Field> {
    spec.cutoff.validate()?;
    apply_with(f, pad, spec.kind.is_tensorial(), Evaluation::Rotated, |eta| spec.value(eta))
}

/// [`apply_multiplier`] evaluating the multiplier afresh at every frequency.
pub fn apply_multiplier_direct(f: &Sym2Field, spec: &MultiplierSpec, pad: usize) -> Result<Sym2Field> {
    spec.cutoff.validate()?;
    apply_with(f, pad, spec.kind.is_tensorial(), Evaluation::Direct, |eta| spec.value(eta))
}

/// Mandel matrix of `f -> L f L^T` with `L = diag(1, Q)` for an orthogonal `Q`
/// given by its columns.
fn mandel_rotation(cols: &[[f64; 3]; 3]) -> Mat10 {
    let mut l = [[0.0; 4]; 4];
    l[0][0] = 1.0;
    for (j, c) in cols.iter().enumerate() {
        for i in 0..3 {
            l[i + 1][j + 1] = c[i];
        }
    }
    let mut r = Mat10::zeros();
    for q in 0..10 {
        let mut e = Vec10::zeros();
        e[q] = 1.0;
        let t = from_mandel(&e).to_matrix();
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, o) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for a in 0..4 {
                    for b in 0..4 {
                        acc += l[i][a] * t[a][b] * l[j][b];
                    }
                }
                *o = acc;
            }
        }
        r.set_column(q, &to_mandel(&Sym2::from_matrix(&out)));
    }
    r
}

/// Every tensor multiplier here commutes with spatial rotations `Q`:
/// `m(Q eta) = R_Q m(eta) R_Q^T`. The table holds `m` at `(eta0, 0, 0, |eta'|)`
/// for each distinct pair on the grid.
struct RotationTable {
    values: HashMap<(u64, u64), MultiplierValue>,
}

impl RotationTable {
    fn key(eta: &Covector) -> (u64, u64) {
        (eta.time().to_bits(), eta.spatial_norm().to_bits())
    }

    fn build<F>(etas: impl Iterator<Item = Covector>, value: &F) -> Result<Self>
    where
        F: Fn(&Covector) -> Result<MultiplierValue> + Sync,
    {
        let keys: HashSet<(u64, u64)> = etas.map(|e| Self::key(&e)).collect();
        let mut keys: Vec<(u64, u64)> = keys.into_iter().collect();
        keys.sort_unstable();
        let values = keys
            .par_iter()
            .map(|&(t, r)| Ok(((t, r), value(&Covector([f64::from_bits(t), 0.0, 0.0, f64::from_bits(r)]))?)))
            .collect::<Result<HashMap<_, _>>>()?;
        Ok(RotationTable { values })
    }

    fn value(&self, eta: &Covector) -> MultiplierValue {
        let v = &self.values[&Self::key(eta)];
        let MultiplierValue::Matrix(m) = v else {
            return v.clone();
        };
        let sp = eta.spatial();
        let r = eta.spatial_norm();
        if r == 0.0 {
            return v.clone();
        }
        let [e1, e2] = plane_frame(&sp);
        let rot = mandel_rotation(&[e1, e2, sp.map(|x| x / r)]);
        MultiplierValue::Matrix(rot * m * rot.transpose())
    }
}

/// Shared driver: `value` is evaluated at every frequency carrying data.
fn apply_with<F>(f: &Sym2Field, pad: usize, tensorial: bool, evaluation: Evaluation, value: F) -> Result<Sym2Field>
where
    F: Fn(&Covector) -> Result<MultiplierValue> + Sync,
{
    if pad == 0 {
        return Err(Error::invalid("padding factor must be at least 1"));
    }
    let values = f.values()?;
    let grid = f.grid();
    let padded = grid.padded(pad);
    let n = grid.len();
    let np = padded.len();
    let scale = mandel_scale();

    // frequency-major Mandel spectrum
    let plan = Fft4::new(padded.dims);
    let mut spectra: Vec<[Complex64; 10]> = vec![[Complex64::default(); 10]; np];
    {
        let mut buf = vec![Complex64::default(); np];
        for p in 0..10 {
            buf.iter_mut().for_each(|z| *z = Complex64::default());
            let comp = &values[p * n..(p + 1) * n];
            if comp.iter().all(|&x| x == 0.0) {
                continue;
            }
            for (flat, &x) in comp.iter().enumerate() {
                buf[padded.flat(grid.unflat(flat))] = Complex64::new(scale[p] * x, 0.0);
            }
            plan.forward(&mut buf);
            for (s, z) in spectra.iter_mut().zip(&buf) {
                s[p] = *z;
            }
        }
    }

    let freqs = FrequencyGrid::new(&padded);
    let nyquist: [Option<usize>; 4] = std::array::from_fn(|a| {
        let d = padded.dims[a];
        (tensorial && d % 2 == 0).then_some(d / 2)
    });
    // every multiplier is even in eta: evaluate once per mirror pair of frequencies
    let dims = padded.dims;
    let plane = np / dims[0];
    let mirror_in_plane = |j: usize| -> usize {
        let i1 = j / (dims[2] * dims[3]);
        let i2 = (j / dims[3]) % dims[2];
        let i3 = j % dims[3];
        let m = |i: usize, d: usize| (d - i) % d;
        (m(i1, dims[1]) * dims[2] + m(i2, dims[2])) * dims[3] + m(i3, dims[3])
    };
    let mut planes: Vec<Option<&mut [[Complex64; 10]]>> = spectra.chunks_mut(plane).map(Some).collect();
    let mut jobs = Vec::new();
    for i0 in 0..dims[0] {
        let m0 = (dims[0] - i0) % dims[0];
        if m0 < i0 {
            continue;
        }
        let first = planes[i0].take().expect("plane taken once");
        let second = if m0 == i0 { None } else { planes[m0].take() };
        jobs.push((i0, first, second));
    }
    let is_nyquist = |k: usize| {
        let idx = padded.unflat(k);
        (0..4).any(|a| nyquist[a] == Some(idx[a]))
    };
    let table = match evaluation {
        Evaluation::Rotated if tensorial => Some(RotationTable::build(
            (0..np).filter(|&k| !is_nyquist(k)).map(|k| freqs.eta(k)),
            &value,
        )?),
        _ => None,
    };
    let is_zero = |z: &[Complex64; 10]| z.iter().all(|c| c.re == 0.0 && c.im == 0.0);
    jobs.into_par_iter().try_for_each(|(i0, first, mut second)| -> Result<()> {
        for j in 0..plane {
            let k = i0 * plane + j;
            let jm = mirror_in_plane(j);
            // within a self-mirrored plane, visit each pair from its lower index
            if second.is_none() && jm < j {
                continue;
            }
            let partner_zero = match &second {
                Some(p) => is_zero(&p[jm]),
                None => is_zero(&first[jm]),
            };
            if is_zero(&first[j]) && partner_zero {
                continue;
            }
            let value = if is_nyquist(k) {
                MultiplierValue::Zero
            } else if let Some(t) = &table {
                t.value(&freqs.eta(k))
            } else {
                value(&freqs.eta(k))?
            };
            value.apply(&mut first[j]);
            match second {
                Some(ref mut p) => value.apply(&mut p[jm]),
                None if jm != j => value.apply(&mut first[jm]),
                None => {}
            }
        }
        Ok(())
    })?;

    let mut out = vec![0.0; 10 * n];
    let mut buf = vec![Complex64::default(); np];
    for p in 0..10 {
        for (b, s) in buf.iter_mut().zip(&spectra) {
            *b = s[p];
        }
        plan.inverse(&mut buf);
        for (flat, o) in out[p * n..(p + 1) * n].iter_mut().enumerate() {
            *o = buf[padded.flat(grid.unflat(flat))].re / scale[p];
        }
    }
    Sym2Field::from_position_data(grid.clone(), out)
}

/// Periodic gauge projection of `f` (exactly idempotent).
pub fn gauge_project(f: &Sym2Field, timelike: TimeLikeConvention) -> Result<Sym2Field> {
    apply_multiplier(f, &MultiplierSpec::gauge_projector(timelike), 1)
}

/// Fourier realisation of the normal operator.
pub fn normal_fourier(f: &Sym2Field, n_phi: usize, pad: usize) -> Result<Sym2Field> {
    let spec = MultiplierSpec {
        n_phi,
        ..MultiplierSpec::normal()
    };
    apply_multiplier(f, &spec, pad)
}

/// Aperiodic Fourier realisation of the normal operator on the box of `f`.
///
/// Uses the symbol of rays cut to the time extent `S` of the box, which already
/// covers every pair of box points joined by a light ray, so nothing is lost by
/// the cut. Zero padding by `pad` keeps periodic images out of the box when
/// `pad L_a >= L_a + S` on every axis (`pad >= 2` on a cube).
pub fn normal_fourier_aperiodic(f: &Sym2Field, pad: usize) -> Result<Sym2Field> {
    let grid = f.grid();
    let extent: [f64; 4] = std::array::from_fn(|a| grid.dims[a] as f64 * grid.spacing[a]);
    let reach = extent[0];
    for (a, &l) in extent.iter().enumerate() {
        if (pad as f64) * l < l + reach - 1e-12 {
            return Err(Error::invalid(format!(
                "padding factor {pad} lets periodic images reach the box along axis {a}"
            )));
        }
    }
    let max_spatial = (1..4).map(|a| (PI / grid.spacing[a]).powi(2)).sum::<f64>().sqrt();
    let symbol = TruncatedSymbol::new(reach, max_spatial)?;
    apply_with(f, pad, true, Evaluation::Rotated, |eta| Ok(MultiplierValue::Matrix(symbol.value(eta)?.gram())))
}

/// Parametrix applied to backprojected data: `F^{-1}[taper b / (2 pi) F (L^t u)]`.
pub fn reconstruct_from_backprojection(backprojected: &Sym2Field, cutoff: &CutoffSpec, n_phi: usize, pad: usize) -> Result<Sym2Field> {
    let spec = MultiplierSpec {
        n_phi,
        ..MultiplierSpec::parametrix(*cutoff)
    };
    apply_multiplier(backprojected, &spec, pad)
}

/// All-Fourier reference path `F^{-1}[taper b a F f]`.
pub fn reconstruct_fourier(f: &Sym2Field, cutoff: &CutoffSpec, n_phi: usize) -> Result<Sym2Field> {
    let spec = MultiplierSpec {
        n_phi,
        ..MultiplierSpec::new(MultiplierKind::ParametrixNormal, *cutoff)
    };
    apply_multiplier(f, &spec, 1)
}

/// Spectral energy split by causal band: `rho = q / |eta|^2` above `eps`, below
/// `-eps`, and in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandEnergies {
    pub space_like: f64,
    pub time_like: f64,
    pub cone: f64,
    pub dc: f64,
}

impl BandEnergies {
    pub fn total(&self) -> f64 {
        self.space_like + self.time_like + self.cone + self.dc
    }
}

pub fn band_energies(f: &Sym2Field, eps: f64) -> Result<BandEnergies> {
    let spec = fft_field(f)?;
    let data = spec.spectrum()?;
    let grid = f.grid();
    let n = grid.len();
    let freqs = FrequencyGrid::new(grid);
    let weights = crate::tensor::FROBENIUS_WEIGHT;
    let mut e = BandEnergies {
        space_like: 0.0,
        time_like: 0.0,
        cone: 0.0,
        dc: 0.0,
    };
    for k in 0..n {
        let en: f64 = (0..10).map(|p| weights[p] * data[p * n + k].norm_sqr()).sum();
        let eta = freqs.eta(k);
        let n2 = eta.euclid_norm_sq();
        if n2 == 0.0 {
            e.dc += en;
            continue;
        }
        let rho = eta.minkowski_q() / n2;
        if rho >= eps {
            e.space_like += en;
        } else if rho <= -eps {
            e.time_like += en;
        } else {
            e.cone += en;
        }
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: &Grid4, seed: u64) -> Sym2Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..10 * grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Sym2Field::from_position_data(grid.clone(), data).unwrap()
    }

    #[test]
    fn fft_round_trip_and_hermitian() {
        let grid = Grid4::cube(6, -1.0, 1.0);
        let f = random_field(&grid, 1);
        let spec = fft_field(&f).unwrap();
        assert!(hermitian_defect(&spec).unwrap() < 1e-13);
        let (back, imag) = ifft_field(&spec).unwrap();
        assert!(back.rel_l2_error(&f).unwrap() < 1e-13);
        assert!(imag < 1e-12);
        assert!(ifft_field(&f).is_err());
        assert!(fft_field(&spec).is_err());
    }

    #[test]
    fn delta_has_flat_spectrum() {
        let grid = Grid4::cube(4, 0.0, 1.0);
        let mut f = Sym2Field::zeros(grid.clone());
        f.set(0, &Sym2::unit(1, 2)).unwrap();
        let spec = fft_field(&f).unwrap();
        let n = grid.len();
        let comp = &spec.spectrum().unwrap()[5 * n..6 * n];
        assert!(comp.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn frequency_grid_layout() {
        let grid = Grid4::new([2, 3, 4, 5], [0.5, 1.0, 0.25, 2.0], [0.0; 4]).unwrap();
        let fg = FrequencyGrid::new(&grid);
        let eta = fg.eta(grid.flat([1, 2, 3, 4]));
        assert_eq!(eta.0[0], fg.axes[0][1]);
        assert_eq!(eta.0[3], fg.axes[3][4]);
        assert!(fg.eta(0).0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gauge_projector_is_idempotent() {
        let grid = Grid4::cube(6, -1.0, 1.0);
        let f = random_field(&grid, 2);
        for conv in [TimeLikeConvention::Identity, TimeLikeConvention::Project] {
            let p1 = gauge_project(&f, conv).unwrap();
            let p2 = gauge_project(&p1, conv).unwrap();
            assert!(p2.rel_l2_error(&p1).unwrap() < 1e-12);
        }
    }

    #[test]
    fn normal_multiplier_annihilates_metric_multiples() {
        let grid = Grid4::cube(8, -1.0, 1.0);
        let c = |x: [f64; 4]| (-x.iter().map(|v| v * v).sum::<f64>() / 0.1).exp();
        let f = Sym2Field::from_profile(grid.clone(), &Sym2::metric(), c);
        let g = Sym2Field::from_profile(grid, &Sym2::unit(1, 1), c);
        let nf = normal_fourier(&f, 16, 1).unwrap();
        let ng = normal_fourier(&g, 16, 1).unwrap();
        assert!(nf.l2_norm() <= 1e-10 * ng.l2_norm());
    }

    #[test]
    fn sharp_cutoff_is_idempotent() {
        let grid = Grid4::cube(6, -1.0, 1.0);
        let f = random_field(&grid, 3);
        let spec = MultiplierSpec::new(MultiplierKind::Cutoff, CutoffSpec::sharp(0.05));
        let c1 = apply_multiplier(&f, &spec, 1).unwrap();
        let c2 = apply_multiplier(&c1, &spec, 1).unwrap();
        assert!(c2.rel_l2_error(&c1).unwrap() < 1e-12);
    }

    #[test]
    fn parametrix_identity_on_random_fields() {
        let grid = Grid4::cube(6, -1.0, 1.0);
        let cutoff = CutoffSpec::default();
        let f = random_field(&grid, 4);
        let lhs = reconstruct_fourier(&f, &cutoff, 32).unwrap();
        let proj = gauge_project(&f, TimeLikeConvention::Identity).unwrap();
        let rhs = apply_multiplier(&proj, &MultiplierSpec::new(MultiplierKind::Cutoff, cutoff), 1).unwrap();
        assert!(lhs.rel_l2_error(&rhs).unwrap() < 1e-9);
    }

    #[test]
    fn multipliers_are_finite_everywhere() {
        let grid = Grid4::cube(8, -1.0, 1.0);
        let fg = FrequencyGrid::new(&grid);
        for kind in [
            MultiplierKind::Normal,
            MultiplierKind::Parametrix,
            MultiplierKind::Cutoff,
            MultiplierKind::GaugeProjector,
            MultiplierKind::ParametrixNormal,
        ] {
            let spec = MultiplierSpec::new(kind, CutoffSpec::default());
            for k in 0..fg.len() {
                if let MultiplierValue::Matrix(m) = spec.value(&fg.eta(k)).unwrap() {
                    assert!(m.iter().all(|x| x.is_finite()));
                }
            }
        }
    }

    #[test]
    fn translation_equivariance() {
        let grid = Grid4::cube(6, -1.0, 1.0);
        let f = random_field(&grid, 5);
        let shift = [1usize, 2, 0, 3];
        let n = grid.len();
        let roll = |src: &Sym2Field| {
            let v = src.values().unwrap();
            let mut out = vec![0.0; 10 * n];
            for flat in 0..n {
                let idx = grid.unflat(flat);
                let to: [usize; 4] = std::array::from_fn(|a| (idx[a] + shift[a]) % grid.dims[a]);
                for p in 0..10 {
                    out[p * n + grid.flat(to)] = v[p * n + flat];
                }
            }
            Sym2Field::from_position_data(grid.clone(), out).unwrap()
        };
        let spec = MultiplierSpec::normal();
        let a = roll(&apply_multiplier(&f, &spec, 1).unwrap());
        let b = apply_multiplier(&roll(&f), &spec, 1).unwrap();
        assert!(a.rel_l2_error(&b).unwrap() < 1e-12);
    }

    #[test]
    fn rotated_evaluation_matches_direct() {
        let grid = Grid4::new([8, 8, 6, 8], [0.25, 0.25, 0.3, 0.25], [-1.0; 4]).unwrap();
        let f = random_field(&grid, 6);
        for kind in [
            MultiplierKind::Normal,
            MultiplierKind::Parametrix,
            MultiplierKind::GaugeProjector,
            MultiplierKind::ParametrixNormal,
        ] {
            let spec = MultiplierSpec::new(kind, CutoffSpec::default());
            for pad in [1, 2] {
                let a = apply_multiplier(&f, &spec, pad).unwrap();
                let b = apply_multiplier_direct(&f, &spec, pad).unwrap();
                assert!(a.rel_l2_error(&b).unwrap() < 1e-11, "{kind:?} pad {pad}");
            }
        }
    }
}
