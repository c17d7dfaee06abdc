//! Synthetic tensor fields with controlled wavefront sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{gauge_field, DerivativeScheme, Grid4, OneForm, Sym2Field};
use crate::fourier::{apply_multiplier, gauge_project, MultiplierKind, MultiplierSpec, TimeLikeConvention};
use crate::symbol::CutoffSpec;
use crate::tensor::{CausalClass, Covector, Sym2, PAIRS};

/// `1` below 0, `0` above 1, quintic smoothstep in between (C^2).
#[inline]
pub fn c2_ramp_down(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

#[inline]
fn c2_ramp_down_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        -30.0 * t * t * (1.0 - t) * (1.0 - t)
    }
}

/// Product window: 1 on `|x_a - center_a| <= flat_a`, C^2 ramp to 0 over `ramp_a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: [f64; 4],
    pub flat: [f64; 4],
    pub ramp: [f64; 4],
}

impl Window {
    pub fn value(&self, x: &[f64; 4]) -> f64 {
        let mut w = 1.0;
        for a in 0..4 {
            let d = (x[a] - self.center[a]).abs() - self.flat[a];
            w *= c2_ramp_down(d / self.ramp[a]);
            if w == 0.0 {
                break;
            }
        }
        w
    }

    /// Closed support box.
    pub fn support(&self) -> ([f64; 4], [f64; 4]) {
        (
            std::array::from_fn(|a| self.center[a] - self.flat[a] - self.ramp[a]),
            std::array::from_fn(|a| self.center[a] + self.flat[a] + self.ramp[a]),
        )
    }

    fn validate(&self) -> Result<()> {
        if (0..4).any(|a| !(self.flat[a] >= 0.0) || !(self.ramp[a] > 0.0)) {
            return Err(Error::invalid("window needs flat >= 0 and ramp > 0 on every axis"));
        }
        Ok(())
    }
}

/// Scalar profile with analytic gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Profile {
    /// `exp(-|x - c|^2 / (2 sigma^2))`, cut off smoothly between `cutoff - 1` and
    /// `cutoff` standard deviations.
    Gaussian {
        center: [f64; 4],
        sigma: f64,
        #[serde(default = "default_cutoff_sigmas")]
        cutoff: f64,
    },
    /// `(1 - |x - c|^2 / R^2)^3` inside the ball, C^2 and compactly supported.
    Bump { center: [f64; 4], radius: f64 },
}

fn default_cutoff_sigmas() -> f64 {
    3.0
}

impl Profile {
    pub fn gaussian(center: [f64; 4], sigma: f64) -> Self {
        Profile::Gaussian {
            center,
            sigma,
            cutoff: default_cutoff_sigmas(),
        }
    }

    pub fn value(&self, x: &[f64; 4]) -> f64 {
        match *self {
            Profile::Gaussian { center, sigma, cutoff } => {
                let r2: f64 = (0..4).map(|a| (x[a] - center[a]).powi(2)).sum();
                let rho = r2.sqrt() / sigma;
                if rho >= cutoff {
                    return 0.0;
                }
                (-0.5 * rho * rho).exp() * c2_ramp_down(rho - (cutoff - 1.0))
            }
            Profile::Bump { center, radius } => {
                let r2: f64 = (0..4).map(|a| (x[a] - center[a]).powi(2)).sum();
                let s = 1.0 - r2 / (radius * radius);
                if s <= 0.0 {
                    0.0
                } else {
                    s * s * s
                }
            }
        }
    }

    pub fn gradient(&self, x: &[f64; 4]) -> [f64; 4] {
        match *self {
            Profile::Gaussian { center, sigma, cutoff } => {
                let d: [f64; 4] = std::array::from_fn(|a| x[a] - center[a]);
                let r = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                let rho = r / sigma;
                if rho >= cutoff {
                    return [0.0; 4];
                }
                let g = (-0.5 * rho * rho).exp();
                let t = rho - (cutoff - 1.0);
                let w = c2_ramp_down(t);
                // d/dr [g w] = g (-r / sigma^2) w + g w'(t) / sigma
                let dr = g * (-r / (sigma * sigma)) * w + g * c2_ramp_down_derivative(t) / sigma;
                if r == 0.0 {
                    [0.0; 4]
                } else {
                    d.map(|v| dr * v / r)
                }
            }
            Profile::Bump { center, radius } => {
                let d: [f64; 4] = std::array::from_fn(|a| x[a] - center[a]);
                let r2: f64 = d.iter().map(|v| v * v).sum();
                let s = 1.0 - r2 / (radius * radius);
                if s <= 0.0 {
                    [0.0; 4]
                } else {
                    d.map(|v| -6.0 * s * s * v / (radius * radius))
                }
            }
        }
    }

    /// Centre and radius of a ball containing the support.
    pub fn support_ball(&self) -> ([f64; 4], f64) {
        match *self {
            Profile::Gaussian { center, sigma, cutoff } => (center, cutoff * sigma),
            Profile::Bump { center, radius } => (center, radius),
        }
    }

    pub fn validate(&self, grid: &Grid4) -> Result<()> {
        match *self {
            Profile::Gaussian { sigma, cutoff, .. } => {
                if !(sigma > 0.0) || !(cutoff >= 1.0) {
                    return Err(Error::invalid("Gaussian needs sigma > 0 and cutoff >= 1"));
                }
                let h = grid.spacing.iter().cloned().fold(0.0, f64::max);
                if sigma < h {
                    return Err(Error::invalid(format!(
                        "sigma = {sigma} is below the grid spacing {h} and cannot be resolved"
                    )));
                }
            }
            Profile::Bump { radius, .. } => {
                if !(radius > 0.0) {
                    return Err(Error::invalid("bump radius must be positive"));
                }
            }
        }
        let (c, r) = self.support_ball();
        check_inside(grid, &c, &c, r)
    }
}

/// Error unless the box `[lo - r, hi + r]` lies at least one cell inside the grid.
fn check_inside(grid: &Grid4, lo: &[f64; 4], hi: &[f64; 4], r: f64) -> Result<()> {
    let last = grid.last_point();
    for a in 0..4 {
        let inner_lo = grid.origin[a] + grid.spacing[a];
        let inner_hi = last[a] - grid.spacing[a];
        if lo[a] - r < inner_lo - 1e-12 || hi[a] + r > inner_hi + 1e-12 {
            return Err(Error::SupportOverflow(format!(
                "axis {a}: support [{}, {}] not inside [{inner_lo}, {inner_hi}]",
                lo[a] - r,
                hi[a] + r
            )));
        }
    }
    Ok(())
}

/// Which causal band [`bandlimit`] keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Band {
    #[default]
    All,
    SpaceLike,
    TimeLike,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandlimitSpec {
    pub keep: Band,
    #[serde(default)]
    pub gauge_project: bool,
    #[serde(default)]
    pub cutoff: Option<CutoffSpec>,
}

/// Keeps one causal band (periodic cutoff multiplier), optionally gauge-projected.
pub fn bandlimit(f: &Sym2Field, keep: Band, cutoff: &CutoffSpec, project: bool) -> Result<Sym2Field> {
    let mut out = match keep {
        Band::All => f.clone(),
        Band::SpaceLike => apply_multiplier(f, &MultiplierSpec::new(MultiplierKind::Cutoff, *cutoff), 1)?,
        Band::TimeLike => apply_multiplier(f, &MultiplierSpec::new(MultiplierKind::TimeLikeCutoff, *cutoff), 1)?,
    };
    if project {
        out = gauge_project(&out, TimeLikeConvention::Identity)?;
    }
    Ok(out)
}

/// Gauge phantom `c g + d^s w` with `c = amplitude * profile` and
/// `w_j = amplitudes[j] * profile`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeSpec {
    pub c: Option<(f64, Profile)>,
    pub omega: Option<([f64; 4], Profile)>,
}

impl GaugeSpec {
    /// Exact tensor value, with analytic derivatives.
    pub fn value(&self, x: &[f64; 4]) -> Sym2 {
        let mut out = Sym2::ZERO;
        if let Some((amp, prof)) = &self.c {
            out += (amp * prof.value(x)) * Sym2::metric();
        }
        if let Some((amps, prof)) = &self.omega {
            let g = prof.gradient(x);
            for (p, &(j, k)) in PAIRS.iter().enumerate() {
                out.0[p] += 0.5 * (g[j] * amps[k] + g[k] * amps[j]);
            }
        }
        out
    }
}

fn plane_profile(normal: &Covector, offset: f64, delta: f64, window: &Window, x: &[f64; 4]) -> f64 {
    let w = window.value(x);
    if w == 0.0 {
        return 0.0;
    }
    let s: f64 = (0..4).map(|a| x[a] * normal.0[a]).sum::<f64>() - offset;
    w * (-0.5 * s * s / (delta * delta)).exp()
}

/// Phantom description, as read from JSON configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhantomSpec {
    GaussianBump {
        amplitude: Sym2,
        profile: Profile,
    },
    PlaneConormal {
        amplitude: Sym2,
        /// Unit conormal, Euclidean normalisation.
        normal: Covector,
        #[serde(default)]
        offset: f64,
        delta: f64,
        window: Window,
    },
    Gauge {
        spec: GaugeSpec,
        #[serde(default = "default_scheme")]
        scheme: DerivativeScheme,
    },
}

fn default_scheme() -> DerivativeScheme {
    DerivativeScheme::Spectral
}

/// Phantom plus optional band-limiting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomConfig {
    pub phantom: PhantomSpec,
    #[serde(default)]
    pub bandlimit: Option<BandlimitSpec>,
}

impl PhantomSpec {
    /// Causal class of the plane conormal (plane kind only).
    pub fn conormal_class(&self) -> Option<CausalClass> {
        match self {
            PhantomSpec::PlaneConormal { normal, .. } => normal.causal_class(1e-9).ok(),
            _ => None,
        }
    }

    /// Analytic tensor value.
    pub fn value(&self, x: &[f64; 4]) -> Sym2 {
        match self {
            PhantomSpec::GaussianBump { amplitude, profile } => profile.value(x) * *amplitude,
            PhantomSpec::PlaneConormal {
                amplitude,
                normal,
                offset,
                delta,
                window,
            } => plane_profile(normal, *offset, *delta, window, x) * *amplitude,
            PhantomSpec::Gauge { spec, .. } => spec.value(x),
        }
    }

    pub fn validate(&self, grid: &Grid4) -> Result<()> {
        match self {
            PhantomSpec::GaussianBump { profile, .. } => profile.validate(grid),
            PhantomSpec::PlaneConormal {
                normal, delta, window, ..
            } => {
                let n = normal.euclid_norm_sq().sqrt();
                if (n - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!("plane conormal must have unit length, |nu| = {n}")));
                }
                if !(*delta > 0.0) {
                    return Err(Error::invalid("plane profile width must be positive"));
                }
                window.validate()?;
                let (lo, hi) = window.support();
                check_inside(grid, &lo, &hi, 0.0)
            }
            PhantomSpec::Gauge { spec, .. } => {
                for prof in spec.c.iter().map(|c| c.1).chain(spec.omega.iter().map(|o| o.1)) {
                    prof.validate(grid)?;
                }
                Ok(())
            }
        }
    }

    /// Samples the phantom on `grid` after validating its support.
    pub fn make(&self, grid: &Grid4) -> Result<Sym2Field> {
        self.validate(grid)?;
        match self {
            PhantomSpec::GaussianBump { amplitude, profile } => {
                Ok(Sym2Field::from_profile(grid.clone(), amplitude, |x| profile.value(&x)))
            }
            PhantomSpec::PlaneConormal {
                amplitude,
                normal,
                offset,
                delta,
                window,
            } => Ok(Sym2Field::from_profile(grid.clone(), amplitude, |x| {
                plane_profile(normal, *offset, *delta, window, &x)
            })),
            PhantomSpec::Gauge { spec, scheme } => make_gauge(spec, grid, *scheme),
        }
    }
}

impl PhantomConfig {
    pub fn make(&self, grid: &Grid4) -> Result<Sym2Field> {
        let f = self.phantom.make(grid)?;
        match &self.bandlimit {
            None => Ok(f),
            Some(b) => bandlimit(&f, b.keep, &b.cutoff.unwrap_or_default(), b.gauge_project),
        }
    }
}

/// Gaussian bump `u exp(-|x - c|^2 / (2 sigma^2))` (smoothly cut off at 3 sigma).
pub fn make_gaussian(u: &Sym2, center: [f64; 4], sigma: f64, grid: &Grid4) -> Result<Sym2Field> {
    PhantomSpec::GaussianBump {
        amplitude: *u,
        profile: Profile::gaussian(center, sigma),
    }
    .make(grid)
}

/// `u exp(-(x . nu)^2 / (2 delta^2)) W(x)`.
pub fn make_plane_conormal(u: &Sym2, nu: &Covector, delta: f64, window: &Window, grid: &Grid4) -> Result<Sym2Field> {
    PhantomSpec::PlaneConormal {
        amplitude: *u,
        normal: *nu,
        offset: 0.0,
        delta,
        window: *window,
    }
    .make(grid)
}

/// Sampled `c` and `w` fed through [`gauge_field`].
pub fn make_gauge(spec: &GaugeSpec, grid: &Grid4, scheme: DerivativeScheme) -> Result<Sym2Field> {
    let n = grid.len();
    let c: Vec<f64> = match &spec.c {
        Some((amp, prof)) => (0..n).map(|i| amp * prof.value(&grid.point_flat(i))).collect(),
        None => vec![0.0; n],
    };
    let omega = match &spec.omega {
        Some((amps, prof)) => OneForm::from_fn(grid.clone(), |x| {
            let b = prof.value(&x);
            amps.map(|a| a * b)
        }),
        None => OneForm::zeros(grid.clone()),
    };
    Ok(gauge_field(&c, &omega, scheme)?.field)
}

/// Grid points on the plane `x . nu = offset` (within half a cell) where the
/// window is positive: the singular support of a plane phantom.
pub fn plane_singular_support(spec: &PhantomSpec, grid: &Grid4) -> Vec<[f64; 4]> {
    let PhantomSpec::PlaneConormal {
        normal, offset, window, ..
    } = spec
    else {
        return Vec::new();
    };
    let h = grid.spacing.iter().cloned().fold(f64::INFINITY, f64::min);
    (0..grid.len())
        .map(|i| grid.point_flat(i))
        .filter(|x| {
            let s: f64 = (0..4).map(|a| x[a] * normal.0[a]).sum::<f64>() - offset;
            s.abs() <= 0.5 * h && window.value(x) > 0.0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::band_energies;

    fn grid() -> Grid4 {
        Grid4::cube(16, -1.0, 1.0)
    }

    fn window() -> Window {
        Window {
            center: [0.0; 4],
            flat: [0.3; 4],
            ramp: [0.4; 4],
        }
    }

    #[test]
    fn ramp_is_c2() {
        let h = 1e-5;
        for t in [0.0, 1.0] {
            let d1 = (c2_ramp_down(t + h) - c2_ramp_down(t - h)) / (2.0 * h);
            assert!(d1.abs() < 1e-8);
        }
        assert!((c2_ramp_down(0.5) - 0.5).abs() < 1e-15);
        for t in [0.1, 0.4, 0.8] {
            let fd = (c2_ramp_down(t + h) - c2_ramp_down(t - h)) / (2.0 * h);
            assert!((fd - c2_ramp_down_derivative(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn profile_gradients_match_finite_differences() {
        let profiles = [
            Profile::gaussian([0.1, 0.0, -0.1, 0.2], 0.3),
            Profile::Bump {
                center: [0.0; 4],
                radius: 0.7,
            },
        ];
        let x = [0.2, -0.15, 0.1, 0.25];
        for p in profiles {
            let g = p.gradient(&x);
            for a in 0..4 {
                let mut xp = x;
                let mut xm = x;
                xp[a] += 1e-6;
                xm[a] -= 1e-6;
                let fd = (p.value(&xp) - p.value(&xm)) / 2e-6;
                assert!((fd - g[a]).abs() < 1e-6, "{p:?} axis {a}");
            }
        }
    }

    #[test]
    fn gaussian_validation() {
        let g = grid();
        assert!(make_gaussian(&Sym2::unit(0, 0), [0.0; 4], 0.2, &g).is_ok());
        assert!(matches!(
            make_gaussian(&Sym2::unit(0, 0), [0.0; 4], 0.4, &g),
            Err(Error::SupportOverflow(_))
        ));
        assert!(make_gaussian(&Sym2::unit(0, 0), [0.0; 4], 0.05, &g).is_err());
    }

    #[test]
    fn phantoms_vanish_outside_support() {
        let g = grid();
        let f = make_plane_conormal(&Sym2::unit(1, 1), &Covector::new(0.0, 1.0, 0.0, 0.0), 0.15, &window(), &g).unwrap();
        let (lo, hi) = window().support();
        for i in 0..g.len() {
            let x = g.point_flat(i);
            if (0..4).any(|a| x[a] < lo[a] || x[a] > hi[a]) {
                assert_eq!(f.at(i).unwrap(), Sym2::ZERO);
            }
        }
        assert!(!f.touches_boundary());
    }

    #[test]
    fn plane_classes() {
        let mk = |nu: Covector| PhantomSpec::PlaneConormal {
            amplitude: Sym2::unit(0, 0),
            normal: nu,
            offset: 0.0,
            delta: 0.1,
            window: window(),
        };
        assert_eq!(mk(Covector::new(0.0, 1.0, 0.0, 0.0)).conormal_class(), Some(CausalClass::SpaceLike));
        assert_eq!(mk(Covector::new(1.0, 0.0, 0.0, 0.0)).conormal_class(), Some(CausalClass::TimeLike));
        let s = 0.5f64.sqrt();
        assert_eq!(mk(Covector::new(s, s, 0.0, 0.0)).conormal_class(), Some(CausalClass::LightLike));
        assert!(mk(Covector::new(1.0, 1.0, 0.0, 0.0)).make(&grid()).is_err());
    }

    #[test]
    fn bandlimit_energy_bookkeeping() {
        let g = grid();
        let cutoff = CutoffSpec::default();
        let u = Sym2::unit(2, 3);
        let space = make_plane_conormal(&u, &Covector::new(0.0, 1.0, 0.0, 0.0), 0.12, &window(), &g).unwrap();
        let time = make_plane_conormal(&u, &Covector::new(1.0, 0.0, 0.0, 0.0), 0.12, &window(), &g).unwrap();
        let ks = bandlimit(&space, Band::SpaceLike, &cutoff, false).unwrap();
        let kt = bandlimit(&time, Band::SpaceLike, &cutoff, false).unwrap();
        assert!(ks.energy_ratio(&space) >= 0.75, "{}", ks.energy_ratio(&space));
        // low-frequency window content keeps a sizeable share in the other band at this resolution
        assert!(kt.energy_ratio(&time) <= 0.4, "{}", kt.energy_ratio(&time));
        assert!(ks.energy_ratio(&space) > 2.0 * kt.energy_ratio(&time));
        let all = bandlimit(&space, Band::All, &cutoff, false).unwrap();
        assert_eq!(all, space);
        let e = band_energies(&space, cutoff.eps).unwrap();
        assert!(e.space_like / e.total() > 0.75);
    }

    #[test]
    fn gauge_spec_matches_gridded_gauge_field() {
        let spec = GaugeSpec {
            c: Some((0.5, Profile::gaussian([0.0; 4], 0.2))),
            omega: Some(([1.0, -0.5, 0.25, 0.75], Profile::gaussian([0.05, 0.0, 0.0, -0.05], 0.2))),
        };
        let err = |n| {
            let g = Grid4::cube(n, -1.0, 1.0);
            let gridded = make_gauge(&spec, &g, DerivativeScheme::Spectral).unwrap();
            let exact = Sym2Field::from_fn(g, |x| spec.value(&x));
            gridded.rel_l2_error(&exact).unwrap()
        };
        let (coarse, fine) = (err(16), err(32));
        assert!(fine < 0.25 * coarse && fine < 0.02, "{coarse} {fine}");
        let g = Grid4::cube(16, -1.0, 1.0);
        let zero = make_gauge(&GaugeSpec { c: None, omega: None }, &g, DerivativeScheme::Spectral).unwrap();
        assert_eq!(zero.l2_norm(), 0.0);
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = PhantomConfig {
            phantom: PhantomSpec::PlaneConormal {
                amplitude: Sym2::unit(1, 2),
                normal: Covector::new(0.0, 1.0, 0.0, 0.0),
                offset: 0.0,
                delta: 0.1,
                window: window(),
            },
            bandlimit: Some(BandlimitSpec {
                keep: Band::SpaceLike,
                gauge_project: true,
                cutoff: None,
            }),
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: PhantomConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
