//! Command-line front end: argument parsing, subcommand dispatch and report
//! writing. Reports never contain timings or the worker count, so identical
//! configurations produce identical bytes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, ValueEnum};

use affinity_core::equilibrium::{bernoulli_lower_estimate, diagnostics, local_dimension_samples};
use affinity_core::io::{fmt17, parse_ifs_file, pressure_csv, KvReport};
use affinity_core::{
    affinity_dimension_with, attractor_points, box_dimension, render_pgm, validate_ifs, verify_axioms, with_workers,
    AffineIfs, Bounds, Budget, CylinderFunction, Driver, FileCache, PartitionCache, PointCloud, Pressure, VERSION,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_VIOLATION: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Affinity dimension from the roots of P_n.
    Dim,
    /// P_n(t) on a grid of t values.
    Pressure,
    /// Cesàro equilibrium approximant and its diagnostics.
    Measure,
    /// Sampled check of the cylinder-function axioms.
    Verify,
    /// Chaos-game greymap of the attractor.
    Render,
    /// Box-counting dimension of a chaos-game cloud.
    Boxdim,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Dim => "dim",
            Command::Pressure => "pressure",
            Command::Measure => "measure",
            Command::Verify => "verify",
            Command::Render => "render",
            Command::Boxdim => "boxdim",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DriverKind {
    Uniform,
    Equilibrium,
}

#[derive(Debug, Parser)]
#[command(
    name = "affinity",
    version,
    about = "Pressure, equilibrium measures and affinity dimension of self-affine IFS"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// IFS description (JSON).
    #[arg(long)]
    pub ifs: PathBuf,
    /// Single parameter value.
    #[arg(long, conflicts_with = "t_grid")]
    pub t: Option<f64>,
    /// `A:B:STEP` or a comma-separated strictly increasing list.
    #[arg(long = "t-grid")]
    pub t_grid: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub nmax: usize,
    /// Cylinder depth of measures.
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    /// Root tolerance in t.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Maximum number of words enumerated per level.
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long, value_enum, default_value_t = DriverKind::Uniform)]
    pub driver: DriverKind,
    /// Chaos-game points.
    #[arg(long, default_value_t = 1_000_000)]
    pub count: usize,
    #[arg(long = "burn-in", default_value_t = 100)]
    pub burn_in: usize,
    /// Side of the rendered image in pixels.
    #[arg(long, default_value_t = 512)]
    pub resolution: usize,
    /// Random samples for `verify` and local-dimension estimates.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Box sizes are extent·2^-j for j in `A:B`.
    #[arg(long, default_value = "3:8")]
    pub levels: String,
    /// Persistent partition-sum cache file.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

/// Validated run parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub ifs: PathBuf,
    pub t: Option<f64>,
    pub t_grid: Option<Vec<f64>>,
    pub n_max: usize,
    pub depth: usize,
    pub tol: f64,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
    pub budget: Option<u64>,
    pub driver: DriverKind,
    pub count: usize,
    pub burn_in: usize,
    pub resolution: usize,
    pub samples: usize,
    pub levels: (i32, i32),
    pub cache: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> anyhow::Result<Self> {
        if !(cli.tol > 0.0 && cli.tol.is_finite()) {
            bail!("--tol must be positive, got {}", cli.tol);
        }
        if cli.nmax == 0 {
            bail!("--nmax must be at least 1");
        }
        if cli.depth == 0 {
            bail!("--depth must be at least 1");
        }
        let workers = match cli.workers {
            Some(0) => bail!("--workers must be at least 1"),
            Some(w) => w,
            None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        };
        if let Some(t) = cli.t {
            if !(t >= 0.0 && t.is_finite()) {
                bail!("--t must be finite and non-negative, got {t}");
            }
        }
        let t_grid = cli.t_grid.as_deref().map(parse_grid).transpose()?;
        Ok(Self {
            command: cli.command,
            ifs: cli.ifs,
            t: cli.t,
            t_grid,
            n_max: cli.nmax,
            depth: cli.depth,
            tol: cli.tol,
            seed: cli.seed,
            workers,
            out: cli.out,
            budget: cli.budget,
            driver: cli.driver,
            count: cli.count,
            burn_in: cli.burn_in,
            resolution: cli.resolution,
            samples: cli.samples,
            levels: parse_levels(&cli.levels)?,
            cache: cli.cache,
        })
    }

    fn budget(&self) -> Budget {
        self.budget.map(Budget::new).unwrap_or_default()
    }

    /// Everything that affects results; the worker count and output
    /// directory are deliberately absent.
    fn echo(&self, report: &mut KvReport) {
        report.push("config.ifs", self.ifs.display());
        match (&self.t, &self.t_grid) {
            (Some(t), _) => report.push_f64("config.t", *t),
            (None, Some(g)) => report.push("config.t_grid", g.iter().map(|t| fmt17(*t)).collect::<Vec<_>>().join(",")),
            (None, None) => report.push("config.t", "auto"),
        };
        report
            .push("config.nmax", self.n_max)
            .push("config.depth", self.depth)
            .push_f64("config.tol", self.tol)
            .push("config.seed", self.seed)
            .push("config.budget", self.budget().max_words);
        match self.command {
            Command::Render | Command::Boxdim => {
                report
                    .push("config.driver", format!("{:?}", self.driver).to_lowercase())
                    .push("config.count", self.count)
                    .push("config.burn_in", self.burn_in);
                if self.command == Command::Render {
                    report.push("config.resolution", self.resolution);
                } else {
                    report.push("config.levels", format!("{}:{}", self.levels.0, self.levels.1));
                }
            }
            Command::Verify | Command::Measure => {
                report.push("config.samples", self.samples);
            }
            _ => {}
        }
    }
}

/// `A:B:STEP` (inclusive of `B` up to rounding) or `a,b,c`; the result must
/// be strictly increasing.
pub fn parse_grid(text: &str) -> anyhow::Result<Vec<f64>> {
    let num = |s: &str| -> anyhow::Result<f64> {
        let v: f64 = s.trim().parse().with_context(|| format!("invalid number `{s}` in t grid"))?;
        if !(v >= 0.0 && v.is_finite()) {
            bail!("t grid values must be finite and non-negative, got {v}");
        }
        Ok(v)
    };
    let grid = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            bail!("t grid `{text}` must have the form A:B:STEP");
        }
        let (a, b, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if step <= 0.0 {
            bail!("t grid step must be positive");
        }
        if b < a {
            bail!("t grid must be sorted: {a} > {b}");
        }
        let count = ((b - a) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| a + i as f64 * step).collect()
    } else {
        text.split(',').map(num).collect::<anyhow::Result<Vec<f64>>>()?
    };
    if grid.is_empty() {
        bail!("t grid is empty");
    }
    if let Some(p) = grid.windows(2).find(|p| p[1] <= p[0]) {
        bail!("t grid must be strictly increasing: {} is followed by {}", p[0], p[1]);
    }
    Ok(grid)
}

fn parse_levels(text: &str) -> anyhow::Result<(i32, i32)> {
    let (a, b) = text.split_once(':').with_context(|| format!("--levels `{text}` must have the form A:B"))?;
    let (a, b): (i32, i32) = (a.trim().parse()?, b.trim().parse()?);
    if b < a + 2 {
        bail!("--levels needs at least three scales, got {a}:{b}");
    }
    Ok((a, b))
}

/// Exit status and the files written.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub exit: u8,
    pub artifacts: Vec<PathBuf>,
}

/// Runs one subcommand inside a pool of `config.workers` threads.
pub fn run(config: &RunConfig) -> anyhow::Result<Outcome> {
    let ifs = parse_ifs_file(&config.ifs).with_context(|| format!("reading {}", config.ifs.display()))?;
    fs::create_dir_all(&config.out).with_context(|| format!("creating {}", config.out.display()))?;
    let mut report = KvReport::new();
    report.push("tool", "affinity").push("version", VERSION).push("command", config.command.name());
    config.echo(&mut report);
    report
        .push("ifs.name", ifs.name())
        .push("ifs.hash", ifs.content_hash())
        .push("ifs.dimension", ifs.dim())
        .push("ifs.maps", ifs.len());
    let mut run = Run { config, ifs: &ifs, report, artifacts: Vec::new() };
    let exit = with_workers(config.workers, || run.dispatch())?;
    run.write_report()?;
    Ok(Outcome { exit, artifacts: run.artifacts })
}

struct Run<'a> {
    config: &'a RunConfig,
    ifs: &'a AffineIfs,
    report: KvReport,
    artifacts: Vec<PathBuf>,
}

impl Run<'_> {
    fn dispatch(&mut self) -> anyhow::Result<u8> {
        match self.config.command {
            Command::Dim => self.dim(),
            Command::Pressure => self.pressure(),
            Command::Measure => self.measure(),
            Command::Verify => self.verify(),
            Command::Render => self.render(),
            Command::Boxdim => self.boxdim(),
        }
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.config.out.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.artifacts.push(path);
        Ok(())
    }

    fn write_report(&mut self) -> anyhow::Result<()> {
        let text = self.report.render();
        let name = format!("{}.txt", self.config.command.name());
        self.write(&name, text.as_bytes())
    }

    fn cache(&self) -> anyhow::Result<Option<Arc<dyn PartitionCache>>> {
        match &self.config.cache {
            Some(path) => {
                let cache = FileCache::open(path).with_context(|| format!("opening cache {}", path.display()))?;
                Ok(Some(Arc::new(cache)))
            }
            None => Ok(None),
        }
    }

    fn natural(&self) -> anyhow::Result<CylinderFunction> {
        Ok(CylinderFunction::natural(self.ifs.clone())?)
    }

    /// `--t` if given, otherwise the root of `P_n` at `n = --nmax`.
    fn resolve_t(&mut self, cf: &CylinderFunction) -> anyhow::Result<f64> {
        if let Some(t) = self.config.t {
            return Ok(t);
        }
        let engine = Pressure::new(cf).with_budget(self.config.budget());
        let root = engine.root(self.config.n_max, self.config.tol)?;
        self.report.push("t.source", format!("root of P_{}", self.config.n_max));
        Ok(root.t)
    }

    fn dim(&mut self) -> anyhow::Result<u8> {
        let c = self.config;
        let dim = affinity_dimension_with(self.ifs, c.n_max, c.tol, c.budget(), self.cache()?)?;
        log::info!("dim: {} levels in {:.3?}", dim.roots.len(), dim.wall_time);
        let r = &mut self.report;
        for (n, t) in &dim.roots {
            r.push_f64(format!("t_{n}"), *t);
        }
        r.push("levels_computed", dim.roots.len())
            .push_f64("upper_bound", dim.upper_bound)
            .push_f64("extrapolated", dim.extrapolated.value)
            .push("extrapolation.method", dim.extrapolated.method)
            .push(
                "extrapolation.levels",
                dim.extrapolated.levels_used.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","),
            )
            .push_f64("prediction", dim.prediction)
            .push_f64("dimension", dim.prediction)
            .push("norm_below_half", dim.norm_below_half);
        for (i, w) in dim.warnings.iter().enumerate() {
            r.push(format!("warning.{i}"), w);
        }
        Ok(EXIT_OK)
    }

    fn pressure(&mut self) -> anyhow::Result<u8> {
        let c = self.config;
        let grid = match (&c.t_grid, c.t) {
            (Some(g), _) => g.clone(),
            (None, Some(t)) => vec![t],
            (None, None) => bail!("pressure needs --t or --t-grid"),
        };
        let cf = self.natural()?;
        let mut engine = Pressure::new(&cf).with_budget(c.budget());
        if let Some(cache) = self.cache()? {
            engine = engine.with_cache(cache);
        }
        let mut rows = Vec::new();
        for (i, &t) in grid.iter().enumerate() {
            let seq = engine.sequence(t, c.n_max)?;
            rows.extend(seq.per_level.iter().map(|&(n, p)| (t, n, p)));
            self.report
                .push_f64(format!("t.{i}"), t)
                .push_f64(format!("fekete_upper.{i}"), seq.fekete_upper)
                .push_f64(format!("extrapolated.{i}"), seq.extrapolated.value)
                .push(format!("partial.{i}"), seq.partial);
        }
        self.report.push("rows", rows.len());
        self.write("pressure.csv", pressure_csv(&rows).as_bytes())?;
        Ok(EXIT_OK)
    }

    fn measure(&mut self) -> anyhow::Result<u8> {
        let c = self.config;
        let cf = self.natural()?;
        let t = self.resolve_t(&cf)?;
        let n = c.n_max;
        if c.depth >= n {
            bail!("--depth {} must be smaller than --nmax {n}", c.depth);
        }
        let (mu, diag) = diagnostics(&cf, t, n, c.depth)?;
        let local = local_dimension_samples(&cf, t, n, c.samples, c.seed)?;
        let bern = bernoulli_lower_estimate(&cf, t, c.depth, 50)?;
        self.report
            .push_f64("t", t)
            .push("provenance", mu.provenance())
            .push_f64("entropy_k", diag.entropy_k)
            .push_f64("energy_k", diag.energy_k)
            .push_f64("pressure_upper", diag.pressure_upper)
            .push_f64("gap", diag.gap)
            .push_f64("invariance_defect_max", diag.invariance_defect_max)
            .push_f64("local_dimension.mean", local.mean)
            .push_f64("local_dimension.std_dev", local.std_dev)
            .push("bernoulli.p", bern.p.iter().map(|p| fmt17(*p)).collect::<Vec<_>>().join(","))
            .push_f64("bernoulli.score", bern.score);
        self.write("measure.csv", mu.to_csv().as_bytes())?;
        Ok(EXIT_OK)
    }

    fn verify(&mut self) -> anyhow::Result<u8> {
        let c = self.config;
        let validation = validate_ifs(self.ifs)?;
        let cf = self.natural()?;
        let grid = match (&c.t_grid, c.t) {
            (Some(g), _) => g.clone(),
            (None, Some(t)) => vec![t],
            (None, None) => {
                let d = self.ifs.dim() as f64;
                (0..=(4.0 * d + 2.0) as usize).map(|i| 0.25 * i as f64).collect()
            }
        };
        let axioms = verify_axioms(&cf, &grid, c.n_max, c.samples, c.seed)?;
        let violated = axioms.violated();
        self.report
            .push("kind", cf.kind())
            .push("samples", axioms.samples)
            .push_f64("bvp_max_ratio", axioms.bvp_max_ratio)
            .push_f64("worst_subchain_violation", axioms.worst_subchain_violation)
            .push_f64("worst_param_violation", axioms.worst_param_violation)
            .push("norm_below_half", validation.norm_below_half)
            .push("violated", violated);
        for (i, w) in validation.warnings.iter().enumerate() {
            self.report.push(format!("warning.{i}"), w);
        }
        Ok(if violated { EXIT_VIOLATION } else { EXIT_OK })
    }

    fn cloud(&mut self) -> anyhow::Result<PointCloud> {
        let c = self.config;
        let driver = match c.driver {
            DriverKind::Uniform => Driver::Uniform,
            DriverKind::Equilibrium => {
                let cf = self.natural()?;
                let t = self.resolve_t(&cf)?;
                if c.depth >= c.n_max {
                    bail!("--depth {} must be smaller than --nmax {}", c.depth, c.n_max);
                }
                let (mu, _) = diagnostics(&cf, t, c.n_max, c.depth)?;
                self.report.push_f64("t", t);
                Driver::Measure(mu)
            }
        };
        let cloud = attractor_points(self.ifs, &driver, c.count, c.burn_in, c.seed)?;
        self.report.push("driver", driver.label()).push("points", cloud.len());
        Ok(cloud)
    }

    fn render(&mut self) -> anyhow::Result<u8> {
        let cloud = self.cloud()?;
        let bounds = Bounds::of_cloud(&cloud, 0.02);
        let pgm = render_pgm(&cloud, self.config.resolution, bounds)?;
        self.report
            .push_f64("bounds.x_min", bounds.x_min)
            .push_f64("bounds.x_max", bounds.x_max)
            .push_f64("bounds.y_min", bounds.y_min)
            .push_f64("bounds.y_max", bounds.y_max);
        self.write("attractor.pgm", &pgm)?;
        Ok(EXIT_OK)
    }

    fn boxdim(&mut self) -> anyhow::Result<u8> {
        let cloud = self.cloud()?;
        let scales = box_scales(&cloud, self.config.levels);
        let est = box_dimension(&cloud, &scales)?;
        let r = &mut self.report;
        for (j, (s, n)) in est.scales.iter().zip(&est.counts).enumerate() {
            r.push_f64(format!("scale.{j}"), *s).push(format!("boxes.{j}"), n);
        }
        r.push_f64("estimate", est.estimate).push_f64("fit_residual", est.residual);
        Ok(EXIT_OK)
    }
}

/// `extent · 2^-j` for `j` in the inclusive range, where `extent` is the
/// longest side of the cloud's bounding box.
pub fn box_scales(cloud: &PointCloud, (a, b): (i32, i32)) -> Vec<f64> {
    let d = cloud.dim();
    let mut extent: f64 = 0.0;
    for axis in 0..d {
        let (lo, hi) =
            cloud.points().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[axis]), hi.max(p[axis])));
        extent = extent.max(hi - lo);
    }
    if !(extent > 0.0) {
        extent = 1.0;
    }
    (a..=b).map(|j| extent * 2f64.powi(-j)).collect()
}

/// Parses `args`, runs, and maps every failure to exit status 1 with a
/// message on stderr.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = RunConfig::from_cli(cli).and_then(|config| run(&config));
    match outcome {
        Ok(outcome) => {
            for path in &outcome.artifacts {
                log::info!("wrote {}", path.display());
            }
            outcome.exit
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}
