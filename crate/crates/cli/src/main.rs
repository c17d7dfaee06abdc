//! `minkray` command line driver: symbol atlas and checks, the transform
//! pipeline on `.t2f` / `.rays` files, artifact measurements and the
//! acceptance suite. Exit codes: 0 pass, 1 metric failure, 2 usage, 3 I/O.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use minkray::experiments::{
    artifact_mask, mask_energy_fraction, plane_phantom, reconstruct_geometric, reconstruct_reference, run_criterion,
    run_suite, SuiteConfig, Thresholds, CRITERIA,
};
use minkray::fourier::{band_energies, normal_fourier_aperiodic};
use minkray::interp::Interpolation;
use minkray::io::{load_field, load_rays, save_field, save_rays};
use minkray::phantoms::{Band, BandlimitSpec, GaugeSpec, PhantomConfig, PhantomSpec, Profile};
use minkray::raytransform::{adjoint_with, forward, in_lu, normal_geometric, RayGrid, RayParams, Region};
use minkray::report::{unix_timestamp, write_slice, ExperimentReport, Threshold};
use minkray::sphere::SphereSampler;
use minkray::symbol::write_atlas_csv;
use minkray::{CausalClass, Covector, CutoffSpec, Grid4, Sym2, Sym2Field};

#[derive(Parser, Debug)]
#[command(name = "minkray", version, about = "Light ray transform toolkit for symmetric 2-tensors on 3+1 Minkowski space")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every command. Unset values fall back to the command's defaults.
#[derive(Args, Debug, Clone)]
struct Common {
    /// Points per axis of the working grid [default: 32].
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Box edge range `a,b` on every axis [default: -1,1].
    #[arg(long = "box", global = true, value_parser = parse_pair, allow_hyphen_values = true)]
    box_range: Option<[f64; 2]>,
    /// Circle quadrature nodes of the symbol [default: 32].
    #[arg(long, global = true)]
    n_phi: Option<usize>,
    /// Line quadrature nodes per ray [default: 257].
    #[arg(long, global = true)]
    n_s: Option<usize>,
    /// Sphere directions [default: 576].
    #[arg(long, global = true)]
    n_v: Option<usize>,
    /// Space-like band margin `eps` of the cutoff [default: 0.05].
    #[arg(long, global = true)]
    eps_band: Option<f64>,
    /// Taper width of the cutoff (0 for sharp) [default: 0.5].
    #[arg(long, global = true)]
    taper: Option<f64>,
    /// Relative eigenvalue floor of the pseudoinverse [default: 1e-8].
    #[arg(long, global = true)]
    pinv_floor: Option<f64>,
    /// Seed of every random draw [default: 7].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to MINKRAY_THREADS, then all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Record that a reproducible run was requested. Reductions always use a
    /// fixed order, so results do not depend on the thread count.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Directory for reports and images.
    #[arg(long, global = true, default_value = "minkray-out")]
    out: PathBuf,
    /// Omit timestamps and runtimes so identical runs give identical reports.
    #[arg(long, global = true)]
    no_timestamps: bool,
    /// Interpolation of gridded fields along rays [default: linear].
    #[arg(long, global = true, value_enum)]
    interpolation: Option<InterpArg>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normal-operator symbol: atlas export and self-checks.
    Symbol {
        #[command(subcommand)]
        action: SymbolAction,
    },
    /// Synthetic fields.
    Phantom {
        #[command(subcommand)]
        action: PhantomAction,
    },
    /// Light ray transform of a `.t2f` field into `.rays` data.
    Forward(ForwardArgs),
    /// Backprojection of `.rays` data onto a grid.
    Adjoint(AdjointArgs),
    /// Normal operator, by ray quadrature or as a Fourier multiplier.
    Normal(NormalArgs),
    /// Parametrix reconstruction from the field's own ray data.
    Reconstruct(ReconstructArgs),
    /// Reconstruction of a plane phantom and its artifact measurement.
    Artifacts(ArtifactArgs),
    /// Whether points lie on a light ray through a region of the t = 0 slice.
    Lu(LuArgs),
    /// Acceptance experiments with one report per criterion.
    Suite(SuiteArgs),
}

#[derive(Subcommand, Debug)]
enum SymbolAction {
    /// Writes the symbol atlas CSV.
    Eval {
        /// Covector `e0,e1,e2,e3`; repeat for several rows. Default: a diagnostic sweep.
        #[arg(long, value_parser = parse_vec4, allow_hyphen_values = true)]
        eta: Vec<[f64; 4]>,
        /// CSV file; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Runs the closed-form, quadrature, null-space, rank, homogeneity,
    /// light-cone and pseudoinverse checks.
    Check {
        /// Random covectors per check.
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Subcommand, Debug)]
enum PhantomAction {
    /// Samples a phantom on the working grid and writes it as `.t2f`.
    Make(PhantomArgs),
}

#[derive(Args, Debug)]
struct PhantomArgs {
    #[arg(long, value_enum, default_value_t = PhantomKind::Gaussian)]
    kind: PhantomKind,
    /// JSON phantom description; overrides the kind options.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Width of the Gaussian profiles.
    #[arg(long, default_value_t = 0.25)]
    sigma: f64,
    /// Plane conormal `n0,n1,n2,n3`, normalised on read.
    #[arg(long, value_parser = parse_vec4, allow_hyphen_values = true)]
    nu: Option<[f64; 4]>,
    /// Causal band kept after sampling.
    #[arg(long, value_enum, default_value_t = BandArg::All)]
    band: BandArg,
    /// Gauge-project after band-limiting.
    #[arg(long)]
    project: bool,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct ForwardArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct AdjointArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Field whose grid receives the backprojection; the working grid otherwise.
    #[arg(long)]
    like: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NormalArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = PathArg::Geometric)]
    path: PathArg,
    /// Field to compare against, e.g. the other path's output.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Largest relative L2 error against the reference [default: 0.03].
    #[arg(long)]
    max_error: Option<f64>,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = PathArg::Geometric)]
    path: PathArg,
    /// The parametrix runs on the grid extended this many times.
    #[arg(long, default_value_t = 2)]
    extension: usize,
    /// Field to compare against.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Largest relative L2 error against the reference.
    #[arg(long)]
    max_error: Option<f64>,
    /// Largest recovered to input energy ratio.
    #[arg(long)]
    max_energy_ratio: Option<f64>,
}

#[derive(Args, Debug)]
struct ArtifactArgs {
    /// Plane conormal `n0,n1,n2,n3`, normalised on read [default: light-like (1,1,0,0)].
    #[arg(long, value_parser = parse_vec4, allow_hyphen_values = true)]
    nu: Option<[f64; 4]>,
    /// Use the zero field instead of the plane phantom.
    #[arg(long)]
    empty: bool,
    /// Mask dilation in cells.
    #[arg(long, default_value_t = 2)]
    dilate: usize,
    #[arg(long, default_value_t = 2)]
    extension: usize,
    /// Smallest energy fraction inside the flowout mask [default: 0.6].
    #[arg(long)]
    min_fraction: Option<f64>,
}

#[derive(Args, Debug)]
struct LuArgs {
    /// `ball:cx,cy,cz,r` or `box:x0,y0,z0,x1,y1,z1`.
    #[arg(long, value_parser = parse_region, allow_hyphen_values = true)]
    region: Region,
    /// Point `t,x,y,z`; repeat for several.
    #[arg(long, value_parser = parse_vec4, allow_hyphen_values = true, required = true)]
    point: Vec<[f64; 4]>,
}

#[derive(Args, Debug)]
struct SuiteArgs {
    /// 32^4 desk mode instead of the 16^4 quick mode.
    #[arg(long)]
    full: bool,
    /// JSON thresholds replacing the defaults.
    #[arg(long)]
    thresholds: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum InterpArg {
    Linear,
    Cubic,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum PathArg {
    Geometric,
    Fourier,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum PhantomKind {
    Gaussian,
    Plane,
    Gauge,
    Empty,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum BandArg {
    All,
    SpaceLike,
    TimeLike,
}

/// Usage errors found after parsing (exit 2).
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn parse_floats<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got `{s}`"));
    }
    let mut out = [0.0f64; N];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
        if !o.is_finite() {
            return Err(format!("`{p}` is not finite"));
        }
    }
    Ok(out)
}

fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let p = parse_floats::<2>(s)?;
    if p[0] >= p[1] {
        return Err(format!("box range `{s}` must be increasing"));
    }
    Ok(p)
}

fn parse_vec4(s: &str) -> std::result::Result<[f64; 4], String> {
    parse_floats::<4>(s)
}

fn parse_region(s: &str) -> std::result::Result<Region, String> {
    let (kind, rest) = s.split_once(':').ok_or_else(|| format!("region `{s}` needs a `ball:` or `box:` prefix"))?;
    match kind {
        "ball" => {
            let [x, y, z, r] = parse_floats::<4>(rest)?;
            if r < 0.0 {
                return Err(format!("ball radius {r} is negative"));
            }
            Ok(Region::Ball {
                center: [x, y, z],
                radius: r,
            })
        }
        "box" => {
            let v = parse_floats::<6>(rest)?;
            let lo = [v[0], v[1], v[2]];
            let hi = [v[3], v[4], v[5]];
            if (0..3).any(|a| lo[a] > hi[a]) {
                return Err(format!("box corners {lo:?} and {hi:?} are not ordered"));
            }
            Ok(Region::Box { lo, hi })
        }
        other => Err(format!("unknown region kind `{other}`")),
    }
}

/// Effective settings after defaults.
struct Settings {
    grid: Grid4,
    n_phi: usize,
    n_s: usize,
    n_v: usize,
    cutoff: CutoffSpec,
    seed: u64,
    interpolation: Interpolation,
    threads: usize,
    deterministic: bool,
    timestamps: bool,
    out: PathBuf,
}

impl Settings {
    fn resolve(c: &Common) -> Result<Self> {
        let n = c.grid.unwrap_or(32);
        if n < 4 {
            return Err(usage(format!("--grid {n} is too small")));
        }
        let [lo, hi] = c.box_range.unwrap_or([-1.0, 1.0]);
        let defaults = CutoffSpec::default();
        let cutoff = CutoffSpec::new(
            c.eps_band.unwrap_or(defaults.eps),
            c.taper.unwrap_or(defaults.taper_width),
            c.pinv_floor.unwrap_or(defaults.pinv_floor),
        )
        .map_err(|e| usage(e.to_string()))?;
        Ok(Settings {
            grid: Grid4::cube(n, lo, hi),
            n_phi: c.n_phi.unwrap_or(minkray::symbol::DEFAULT_N_PHI),
            n_s: c.n_s.unwrap_or(minkray::raytransform::DEFAULT_N_S),
            n_v: c.n_v.unwrap_or(minkray::raytransform::DEFAULT_N_V),
            cutoff,
            seed: c.seed.unwrap_or(7),
            interpolation: match c.interpolation {
                Some(InterpArg::Cubic) => Interpolation::CubicBSpline,
                _ => Interpolation::Multilinear,
            },
            threads: rayon::current_num_threads(),
            deterministic: c.deterministic,
            timestamps: !c.no_timestamps,
            out: c.out.clone(),
        })
    }

    fn ray_params(&self) -> RayParams {
        RayParams {
            n_v: self.n_v,
            n_s: self.n_s,
            sampler: SphereSampler::Fibonacci,
            interpolation: self.interpolation,
        }
    }

    fn report(&self, id: &str) -> ExperimentReport {
        let mut r = ExperimentReport::new(id);
        r.param("n_phi", self.n_phi)
            .param("n_s", self.n_s)
            .param("n_v", self.n_v)
            .param("cutoff", self.cutoff)
            .param("interpolation", self.interpolation)
            .param("seed", self.seed)
            .param("deterministic", self.deterministic);
        r
    }

    /// Finalises `r`, writes it to the output directory and returns whether it passed.
    fn emit(&self, mut r: ExperimentReport, start: Instant) -> Result<bool> {
        r.runtime("total", start.elapsed().as_secs_f64());
        if self.timestamps {
            r.timestamp = Some(unix_timestamp());
        } else {
            r.strip_timing();
        }
        let passed = r.finish();
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(format!("{}.json", r.id));
        r.write(&path).with_context(|| format!("writing {}", path.display()))?;
        print_verdict(&r);
        Ok(passed)
    }
}

fn print_verdict(r: &ExperimentReport) {
    println!("{} {}", if r.passed { "PASS" } else { "FAIL" }, r.id);
    for f in r.failures() {
        println!("  {f}");
    }
}

fn unit(v: [f64; 4], flag: &str) -> Result<Covector> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        return Err(usage(format!("{flag} must be non-zero")));
    }
    Ok(Covector(v.map(|x| x / n)))
}

fn load(path: &Path) -> Result<Sym2Field> {
    load_field(path).with_context(|| format!("reading {}", path.display()))
}

fn save(path: &Path, f: &Sym2Field) -> Result<()> {
    save_field(path, f).with_context(|| format!("writing {}", path.display()))
}

fn field_metrics(r: &mut ExperimentReport, prefix: &str, f: &Sym2Field, eps: f64) -> Result<()> {
    r.metric(&format!("{prefix}l2_norm"), f.l2_norm());
    if f.grid().dims.iter().all(|n| n % 2 == 0) {
        let e = band_energies(f, eps)?;
        let total = e.total();
        let frac = |x: f64| if total > 0.0 { x / total } else { 0.0 };
        r.metric(&format!("{prefix}space_like_energy_fraction"), frac(e.space_like))
            .metric(&format!("{prefix}time_like_energy_fraction"), frac(e.time_like))
            .metric(&format!("{prefix}cone_energy_fraction"), frac(e.cone + e.dc));
    }
    Ok(())
}

fn symbol_eval(s: &Settings, eta: &[[f64; 4]], output: Option<&Path>) -> Result<bool> {
    let etas: Vec<Covector> = if eta.is_empty() {
        // sweep eta0 across the cone at three spatial magnitudes
        let mut v = Vec::new();
        for m in [0.5, 1.0, 2.0] {
            for i in 0..=16 {
                let t = -2.0 + 0.25 * i as f64;
                v.push(Covector([t * m, m, 0.0, 0.0]));
            }
        }
        v
    } else {
        eta.iter().map(|e| Covector(*e)).collect()
    };
    if etas.iter().any(|e| e.0.iter().all(|x| *x == 0.0)) {
        return Err(usage("--eta must be non-zero"));
    }
    let mut buf = Vec::new();
    write_atlas_csv(&mut buf, &etas, s.n_phi)?;
    match output {
        Some(p) => fs::write(p, buf).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{}", String::from_utf8_lossy(&buf)),
    }
    Ok(true)
}

fn suite_config(c: &Common, s: &Settings, full: bool) -> SuiteConfig {
    let mut cfg = if full { SuiteConfig::full() } else { SuiteConfig::ci() };
    if let Some(n) = c.grid {
        cfg.grid = n;
    }
    if let Some(b) = c.box_range {
        cfg.box_range = b;
    }
    cfg.n_phi = s.n_phi;
    cfg.n_s = s.n_s;
    cfg.n_v = s.n_v;
    cfg.cutoff = s.cutoff;
    cfg.seed = s.seed;
    cfg.timestamps = s.timestamps;
    cfg
}

fn write_report(dir: &Path, r: &ExperimentReport) -> Result<()> {
    let path = dir.join(format!("{}.json", r.id));
    r.write(&path).with_context(|| format!("writing {}", path.display()))
}

fn symbol_check(c: &Common, s: &Settings, samples: Option<usize>) -> Result<bool> {
    let mut cfg = suite_config(c, s, false);
    cfg.symbol_samples = samples;
    if samples == Some(0) {
        return Err(usage("--samples must be positive"));
    }
    let dir = s.out.join("symbol-check");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut all = true;
    for k in 1..=7 {
        let r = run_criterion(k, &cfg, None)?;
        write_report(&dir, &r)?;
        print_verdict(&r);
        all &= r.passed;
    }
    Ok(all)
}

fn phantom_make(s: &Settings, a: &PhantomArgs) -> Result<bool> {
    let start = Instant::now();
    let config = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<PhantomConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let gaussian = Profile::gaussian([0.0; 4], a.sigma);
            let phantom = match a.kind {
                PhantomKind::Gaussian | PhantomKind::Empty => PhantomSpec::GaussianBump {
                    amplitude: if a.kind == PhantomKind::Empty {
                        Sym2::ZERO
                    } else {
                        Sym2::unit(0, 0) + 0.5 * Sym2::unit(1, 2) - 0.3 * Sym2::unit(3, 3)
                    },
                    profile: gaussian,
                },
                PhantomKind::Plane => plane_phantom(unit(a.nu.unwrap_or([0.0, 1.0, 0.0, 0.0]), "--nu")?),
                PhantomKind::Gauge => PhantomSpec::Gauge {
                    spec: GaugeSpec {
                        c: Some((0.5, gaussian)),
                        omega: Some(([0.3, 1.0, -0.5, 0.7], gaussian)),
                    },
                    scheme: minkray::field::DerivativeScheme::Spectral,
                },
            };
            let keep = match a.band {
                BandArg::All => Band::All,
                BandArg::SpaceLike => Band::SpaceLike,
                BandArg::TimeLike => Band::TimeLike,
            };
            let bandlimit = (!matches!(keep, Band::All) || a.project).then_some(BandlimitSpec {
                keep,
                gauge_project: a.project,
                cutoff: Some(s.cutoff),
            });
            PhantomConfig { phantom, bandlimit }
        }
    };
    let f = config.make(&s.grid).map_err(|e| usage(e.to_string()))?;
    save(&a.output, &f)?;
    let mut r = s.report("phantom-make");
    r.param("grid", s.grid.dims).param("box", [s.grid.origin[0], s.grid.last_point()[0]]);
    r.param("phantom", &config).param("output", a.output.display().to_string());
    field_metrics(&mut r, "", &f, s.cutoff.eps)?;
    s.emit(r, start)
}

fn cmd_forward(s: &Settings, a: &ForwardArgs) -> Result<bool> {
    let start = Instant::now();
    let f = load(&a.input)?;
    let rays = RayGrid::auto(&f, &s.ray_params())?;
    let u = forward(&f, &rays, s.interpolation, None)?;
    save_rays(&a.output, &u).with_context(|| format!("writing {}", a.output.display()))?;
    let mut r = s.report("forward");
    r.param("input", a.input.display().to_string())
        .param("output", a.output.display().to_string())
        .param("n_y", rays.n_y())
        .param("s_max", rays.line.s_max);
    r.metric("data_norm", u.norm()).metric("data_max_abs", u.max_abs());
    s.emit(r, start)
}

fn cmd_adjoint(s: &Settings, a: &AdjointArgs) -> Result<bool> {
    let start = Instant::now();
    let u = load_rays(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let grid = match &a.like {
        Some(p) => load(p)?.grid().clone(),
        None => s.grid.clone(),
    };
    let g = adjoint_with(&u, &grid, None, s.interpolation)?;
    save(&a.output, &g)?;
    let mut r = s.report("adjoint");
    r.param("input", a.input.display().to_string())
        .param("output", a.output.display().to_string())
        .param("grid", grid.dims);
    r.metric("l2_norm", g.l2_norm());
    s.emit(r, start)
}

fn path_name(p: PathArg) -> &'static str {
    match p {
        PathArg::Geometric => "geometric",
        PathArg::Fourier => "fourier",
    }
}

fn compare(r: &mut ExperimentReport, out: &Sym2Field, reference: Option<&Path>, max: Option<f64>) -> Result<()> {
    if let Some(p) = reference {
        let refield = load(p)?;
        r.param("reference", p.display().to_string());
        r.metric("rel_l2_error", out.rel_l2_error(&refield)?);
        if let Some(m) = max {
            r.threshold(Threshold::max("rel_l2_error", m));
        }
    } else if max.is_some() {
        return Err(usage("--max-error needs --reference"));
    }
    Ok(())
}

fn cmd_normal(s: &Settings, a: &NormalArgs) -> Result<bool> {
    let start = Instant::now();
    let f = load(&a.input)?;
    let n = match a.path {
        PathArg::Geometric => {
            let rays = RayGrid::auto(&f, &s.ray_params())?;
            normal_geometric(&f, &rays, s.interpolation, None)?
        }
        PathArg::Fourier => normal_fourier_aperiodic(&f, 2)?,
    };
    save(&a.output, &n)?;
    let mut r = s.report(&format!("normal-{}", path_name(a.path)));
    r.param("path", path_name(a.path))
        .param("input", a.input.display().to_string())
        .param("output", a.output.display().to_string());
    if a.path == PathArg::Fourier {
        r.param("symbol", "truncated to the rays meeting the grid, pad 2");
    }
    r.metric("l2_norm", n.l2_norm());
    let max = a.reference.as_ref().map(|_| a.max_error.unwrap_or(Thresholds::default().geometric_fourier));
    compare(&mut r, &n, a.reference.as_deref(), max.or(a.max_error))?;
    s.emit(r, start)
}

fn cmd_reconstruct(s: &Settings, a: &ReconstructArgs) -> Result<bool> {
    let start = Instant::now();
    if a.extension == 0 {
        return Err(usage("--extension must be at least 1"));
    }
    let f = load(&a.input)?;
    let rec = match a.path {
        PathArg::Geometric => reconstruct_geometric(&f, &s.ray_params(), &s.cutoff, s.n_phi, a.extension)?,
        PathArg::Fourier => reconstruct_reference(&f, &s.cutoff, s.n_phi, a.extension)?,
    };
    save(&a.output, &rec)?;
    let mut r = s.report(&format!("reconstruct-{}", path_name(a.path)));
    r.param("path", path_name(a.path))
        .param("extension", a.extension)
        .param("input", a.input.display().to_string())
        .param("output", a.output.display().to_string());
    r.metric("energy_ratio", rec.energy_ratio(&f))
        .metric("rel_l2_error_vs_input", rec.rel_l2_error(&f)?);
    if let Some(m) = a.max_energy_ratio {
        r.threshold(Threshold::max("energy_ratio", m));
    }
    compare(&mut r, &rec, a.reference.as_deref(), a.max_error)?;
    s.emit(r, start)
}

fn cmd_artifacts(s: &Settings, a: &ArtifactArgs) -> Result<bool> {
    let start = Instant::now();
    let nu = unit(a.nu.unwrap_or([FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0, 0.0]), "--nu")?;
    let class = nu.causal_class(1e-9)?;
    let spec = plane_phantom(nu);
    let f = if a.empty {
        Sym2Field::zeros(s.grid.clone())
    } else {
        spec.make(&s.grid).map_err(|e| usage(e.to_string()))?
    };
    let params = s.ray_params();
    let rec = reconstruct_geometric(&f, &params, &s.cutoff, s.n_phi, a.extension)?;
    let mut r = s.report("artifacts");
    r.param("grid", s.grid.dims)
        .param("extension", a.extension)
        .param("phantom", if a.empty { serde_json::json!("empty") } else { serde_json::to_value(&spec)? })
        .param("conormal_class", format!("{class:?}"));
    let energy = rec.energy_ratio(&f);
    r.metric("output_input_energy_ratio", if energy.is_finite() { energy } else { 0.0 });
    if class == CausalClass::LightLike {
        let points = minkray::phantoms::plane_singular_support(&spec, &s.grid);
        let mask = artifact_mask(&nu, &points, &s.grid, a.dilate)?;
        let volume = mask.iter().filter(|m| **m).count() as f64 / mask.len() as f64;
        r.param("mask_dilation_cells", a.dilate);
        r.metric("mask_energy_fraction", mask_energy_fraction(&rec, &mask)?)
            .metric("mask_volume_fraction", volume);
        if a.empty {
            r.note("empty phantom: no threshold applies");
        } else {
            let min = a.min_fraction.unwrap_or(Thresholds::default().artifact_fraction);
            r.threshold(Threshold::min("mask_energy_fraction", min));
        }
        fs::create_dir_all(&s.out).with_context(|| format!("creating {}", s.out.display()))?;
        let c = s.grid.dims.map(|n| n / 2);
        for (name, field) in [("artifacts-input", &f), ("artifacts-reconstruction", &rec)] {
            for (rows, cols, tag) in [(0, 1, "t-x1"), (1, 2, "x1-x2")] {
                let img = write_slice(&s.out, &format!("{name}-{tag}.pgm"), field, rows, cols, c)?;
                r.images.push(img);
            }
        }
    } else {
        let reference = reconstruct_reference(&f, &s.cutoff, s.n_phi, a.extension)?;
        let err = if reference.l2_norm() > 0.0 { rec.rel_l2_error(&reference)? } else { rec.l2_norm() };
        r.metric("rel_l2_error_vs_fourier", err);
        r.note("conormal is not light-like: reconstruction error reported instead of a flowout mask");
    }
    s.emit(r, start)
}

fn cmd_lu(a: &LuArgs) -> Result<bool> {
    let verdicts: Vec<serde_json::Value> = a
        .point
        .iter()
        .map(|p| serde_json::json!({ "point": p, "in_lu": in_lu(p, &a.region) }))
        .collect();
    let out = serde_json::json!({ "region": a.region, "verdicts": verdicts });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(true)
}

fn cmd_suite(c: &Common, s: &Settings, a: &SuiteArgs) -> Result<bool> {
    let mut cfg = suite_config(c, s, a.full);
    if let Some(p) = &a.thresholds {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        cfg.thresholds = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
    }
    fs::create_dir_all(&s.out).with_context(|| format!("creating {}", s.out.display()))?;
    let reports = run_suite(&cfg, Some(&s.out), |r| {
        let title = CRITERIA.iter().find(|(id, _)| *id == r.id).map_or("", |c| c.1);
        println!("{} {} ({title})", if r.passed { "PASS" } else { "FAIL" }, r.id);
        for f in r.failures() {
            println!("  {f}");
        }
    })?;
    let config_path = s.out.join("suite-config.json");
    fs::write(&config_path, serde_json::to_string_pretty(&cfg)? + "\n")
        .with_context(|| format!("writing {}", config_path.display()))?;
    let passed = reports.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria passed", reports.len());
    Ok(passed == reports.len())
}

fn run(cli: &Cli) -> Result<bool> {
    let c = &cli.common;
    let threads = match c.threads {
        Some(n) => Some(n),
        None => match std::env::var("MINKRAY_THREADS") {
            Ok(v) => Some(v.trim().parse().map_err(|_| usage(format!("MINKRAY_THREADS=`{v}` is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(usage("thread count must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut s = Settings::resolve(c)?;
    s.threads = rayon::current_num_threads();
    match &cli.command {
        Command::Symbol { action } => match action {
            SymbolAction::Eval { eta, output } => symbol_eval(&s, eta, output.as_deref()),
            SymbolAction::Check { samples } => symbol_check(c, &s, *samples),
        },
        Command::Phantom {
            action: PhantomAction::Make(a),
        } => phantom_make(&s, a),
        Command::Forward(a) => cmd_forward(&s, a),
        Command::Adjoint(a) => cmd_adjoint(&s, a),
        Command::Normal(a) => cmd_normal(&s, a),
        Command::Reconstruct(a) => cmd_reconstruct(&s, a),
        Command::Artifacts(a) => cmd_artifacts(&s, a),
        Command::Lu(a) => cmd_lu(a),
        Command::Suite(a) => cmd_suite(c, &s, a),
    }
}

/// 3 for file and format errors, 2 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<minkray::Error>() {
            return match e {
                minkray::Error::Io(_) | minkray::Error::Format { .. } | minkray::Error::Json(_) => 3,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_regions_and_vectors() {
        assert_eq!(
            parse_region("ball:0,0,0,0.5").unwrap(),
            Region::Ball {
                center: [0.0; 3],
                radius: 0.5
            }
        );
        assert!(matches!(parse_region("box:-1,-1,-1,1,1,1").unwrap(), Region::Box { .. }));
        assert!(parse_region("ball:0,0,0").is_err());
        assert!(parse_region("box:1,0,0,0,1,1").is_err());
        assert!(parse_region("cone:1,2,3,4").is_err());
        assert_eq!(parse_vec4("1, -2,3,4").unwrap(), [1.0, -2.0, 3.0, 4.0]);
        assert!(parse_vec4("1,2,x,4").is_err());
        assert!(parse_pair("1,-1").is_err());
    }

    #[test]
    fn io_errors_map_to_exit_three() {
        let e = anyhow::Error::from(minkray::Error::Format {
            field: "dims".into(),
            message: "bad".into(),
        });
        assert_eq!(exit_code(&e), 3);
        let e = anyhow::Error::from(std::io::Error::other("x")).context("reading");
        assert_eq!(exit_code(&e), 3);
        assert_eq!(exit_code(&usage("bad flag")), 2);
        assert_eq!(exit_code(&anyhow::Error::from(minkray::Error::ZeroCovector)), 2);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
