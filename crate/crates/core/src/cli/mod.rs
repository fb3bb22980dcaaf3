//! Config-driven experiment runner behind the `shallow-rates` binary.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

pub use config::{ExperimentConfig, Method};

use crate::error::{Error, Result};
use crate::metrics::{aggregate_points, rate_fit, smoothness_bound, sobolev_error, target_sobolev_norm, RateFit, RatePoint};
use crate::network::{assemble_approx, assemble_periodic, assemble_plain, assemble_stratified, TwoLayerNetwork};
use crate::oracle::{
    approx_identity_check, envelope_domination_check, envelope_integral_check, normalization_check, periodic_identity_check,
    representation_identity_check, QuadratureSpec,
};
use crate::representation::{KernelOptions, MollifierPair, RepresentationKernel};
use crate::rng::domain;
use crate::sampler::{
    build_stratified_plan_from_pilot, draw_law, draw_pilot, draw_stratified, write_samples_csv, FeatureLaw, FeatureSample,
    DEFAULT_CELL_BUDGET,
};
use crate::target::SpectralTarget;

/// Version of the CSV layouts written by this module.
pub const SCHEMA_VERSION: u32 = 1;

pub const RATE_HEADER: [&str; 10] = ["method", "d", "m", "activation", "target", "n", "seed", "error", "std_error", "wall_ms"];
pub const FIT_HEADER: [&str; 6] = ["method", "slope", "intercept", "residual", "n_min", "n_max"];

/// Quadrature tolerance for kernel constants.
const KERNEL_TOL: f64 = 1e-10;

/// Runtime options shared by all subcommands.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed_offset: u64,
    /// Record wall-clock times; off by default so that outputs are reproducible.
    pub timing: bool,
}

/// Runs `f` on a pool with the requested thread count.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Frozen pieces of one experiment, in recentered coordinates.
pub struct Experiment {
    pub config: ExperimentConfig,
    /// Target translated so that Ω is centered at the origin.
    pub centered_target: SpectralTarget,
    pub center: Vec<f64>,
    /// Kernel and law for every method except approx (which depends on n).
    pub kernel: Option<RepresentationKernel>,
    pub law: Option<FeatureLaw>,
    mollifier: Option<Arc<MollifierPair>>,
}

/// Feature draws for one (n, seed).
pub enum Draws {
    Flat(Vec<FeatureSample>),
    Grouped {
        plan: crate::sampler::StratifiedPlan,
        groups: Vec<crate::sampler::CellSamples>,
    },
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        let center = config.domain.centroid();
        let neg: Vec<f64> = center.iter().map(|c| -c).collect();
        let centered_target = config.target.translated(&neg);
        let opts = KernelOptions {
            tol: KERNEL_TOL,
            frequency: config.frequency,
            ..KernelOptions::default()
        };
        let radius = config.domain.radius();
        let (kernel, mollifier) = match config.method {
            Method::Plain | Method::Stratified => (
                Some(RepresentationKernel::decaying(config.activation.clone(), &centered_target, radius, config.m, &opts)?),
                None,
            ),
            Method::Periodic | Method::StratifiedPeriodic => (
                Some(RepresentationKernel::periodic(config.activation.clone(), &centered_target, config.m, &opts)?),
                None,
            ),
            Method::Approx => (None, Some(MollifierPair::shared_default())),
        };
        let law = match &kernel {
            Some(k) => Some(FeatureLaw::for_kernel(k, &centered_target, KERNEL_TOL)?),
            None => None,
        };
        Ok(Self {
            config,
            centered_target,
            center,
            kernel,
            law,
            mollifier,
        })
    }

    /// ε used by the approx method at size n.
    pub fn epsilon(&self, n: usize) -> f64 {
        self.config.epsilon.unwrap_or((n as f64).powf(-0.25))
    }

    /// Kernel for size n (approx kernels depend on ε).
    pub fn kernel_for(&self, n: usize) -> Result<RepresentationKernel> {
        match &self.kernel {
            Some(k) => Ok(k.clone()),
            None => {
                let opts = KernelOptions {
                    tol: KERNEL_TOL,
                    frequency: self.config.frequency,
                    ..KernelOptions::default()
                };
                RepresentationKernel::approx(
                    self.config.activation.clone(),
                    &self.centered_target,
                    self.mollifier.clone().expect("approx experiments carry a mollifier"),
                    self.epsilon(n),
                    &opts,
                )
            }
        }
    }

    /// Feature draws in recentered coordinates.
    pub fn draw(&self, kernel: &RepresentationKernel, n: usize, seed: u64) -> Result<Draws> {
        let t = &self.centered_target;
        match self.config.method {
            Method::Plain => Ok(Draws::Flat(draw_law(self.law.as_ref().unwrap(), t, n, seed, domain::PLAIN)?)),
            Method::Periodic => Ok(Draws::Flat(draw_law(self.law.as_ref().unwrap(), t, n, seed, domain::PERIODIC)?)),
            Method::Approx => {
                let law = FeatureLaw::for_kernel(kernel, t, KERNEL_TOL)?;
                Ok(Draws::Flat(draw_law(&law, t, n, seed, domain::APPROX)?))
            }
            Method::Stratified | Method::StratifiedPeriodic => {
                let law = self.law.as_ref().unwrap();
                let pilot = draw_pilot(law, t, kernel, self.config.pilot_factor * n, seed)?;
                let plan = build_stratified_plan_from_pilot(t, kernel, n, self.config.smoothness, &pilot)?;
                let groups = draw_stratified(&plan, law, t, kernel, seed, DEFAULT_CELL_BUDGET)?;
                Ok(Draws::Grouped { plan, groups })
            }
        }
    }

    /// Network for (n, seed) in the original coordinates.
    pub fn network(&self, n: usize, seed: u64) -> Result<TwoLayerNetwork> {
        let kernel = self.kernel_for(n)?;
        let t = &self.centered_target;
        let net = match self.draw(&kernel, n, seed)? {
            Draws::Flat(s) => match self.config.method {
                Method::Plain => assemble_plain(&s, &kernel, t)?,
                Method::Periodic => assemble_periodic(&s, &kernel, t)?,
                _ => assemble_approx(&s, &kernel, t)?,
            },
            Draws::Grouped { plan, groups } => assemble_stratified(&plan, &groups, &kernel)?,
        };
        Ok(net.with_input_shift(&self.center))
    }

    /// H^m(Ω) error of the network for (n, seed).
    pub fn error(&self, n: usize, seed: u64) -> Result<crate::metrics::NormEstimate> {
        let net = self.network(n, seed)?;
        sobolev_error(&net, &self.config.target, self.config.m, &self.config.domain, self.config.n_quad, 0)
    }
}

/// One row of the rate table.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub seed: u64,
    pub error: f64,
    pub std_error: f64,
    pub wall_ms: u128,
}

#[derive(Debug, Clone)]
pub struct RateOutcome {
    pub rows: Vec<RateRow>,
    pub fit: Option<RateFit>,
    pub files: Vec<PathBuf>,
}

fn out_dir(opts: &RunOptions) -> Result<PathBuf> {
    let dir = opts.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Samples, assembles and measures every (n, seed) job, then fits the rate.
pub fn run_rate(config: &ExperimentConfig, opts: &RunOptions) -> Result<RateOutcome> {
    let exp = with_threads(opts.threads, || Experiment::prepare(config.clone()))??;
    let jobs: Vec<(usize, u64)> = config
        .n_grid
        .iter()
        .flat_map(|&n| config.seeds.iter().map(move |&s| (n, s + opts.seed_offset)))
        .collect();
    let rows: Vec<RateRow> = with_threads(opts.threads, || {
        jobs.par_iter()
            .map(|&(n, seed)| {
                let t0 = Instant::now();
                let e = exp.error(n, seed)?;
                Ok(RateRow {
                    n,
                    seed,
                    error: e.estimate,
                    std_error: e.std_error,
                    wall_ms: if opts.timing { t0.elapsed().as_millis() } else { 0 },
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let points: Vec<RatePoint> = rows
        .iter()
        .map(|r| RatePoint {
            n: r.n,
            error: r.error,
            seed: r.seed,
        })
        .collect();
    let fit = match rate_fit(&points, config.aggregate) {
        Ok(f) => Some(f),
        Err(Error::InsufficientData(_)) => None,
        Err(e) => return Err(e),
    };

    let dir = out_dir(opts)?;
    let method = config.method.to_string();
    let d = config.domain.dim().to_string();
    let m = config.m.to_string();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RATE_HEADER)?;
    for r in &rows {
        w.write_record([
            method.as_str(),
            &d,
            &m,
            config.activation.label(),
            config.target.label(),
            &r.n.to_string(),
            &r.seed.to_string(),
            &format!("{:e}", r.error),
            &format!("{:e}", r.std_error),
            &r.wall_ms.to_string(),
        ])?;
    }
    let rate_path = dir.join("rate.csv");
    write_file(&rate_path, &w.into_inner().map_err(|e| Error::Io(e.to_string()))?)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(FIT_HEADER)?;
    if let Some(f) = &fit {
        w.write_record([
            method.clone(),
            format!("{:e}", f.slope),
            format!("{:e}", f.intercept),
            format!("{:e}", f.residual),
            f.n_min.to_string(),
            f.n_max.to_string(),
        ])?;
    }
    let fit_path = dir.join("fit.csv");
    write_file(&fit_path, &w.into_inner().map_err(|e| Error::Io(e.to_string()))?)?;

    let mut dat = String::new();
    if let Some(f) = &fit {
        let _ = writeln!(dat, "# {method}: slope {:e}, intercept {:e} ({})", f.slope, f.intercept, config.aggregate);
    }
    for (n, e) in aggregate_points(&points, config.aggregate)? {
        let _ = writeln!(dat, "{n} {e:e}");
    }
    let dat_path = dir.join("fit.dat");
    write_file(&dat_path, dat.as_bytes())?;

    let manifest = format!(
        "schema_version = {SCHEMA_VERSION}\nmethod = \"{method}\"\nactivation = \"{}\"\ntarget = \"{}\"\nd = {d}\nm = {m}\naggregate = \"{}\"\nrate_columns = {:?}\nfit_columns = {:?}\n",
        config.activation.label(),
        config.target.label().replace('"', "'"),
        config.aggregate,
        RATE_HEADER,
        FIT_HEADER,
    );
    let manifest_path = dir.join("manifest.toml");
    write_file(&manifest_path, manifest.as_bytes())?;

    Ok(RateOutcome {
        rows,
        fit,
        files: vec![rate_path, fit_path, dat_path, manifest_path],
    })
}

/// One line of the verify report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: String,
    pub passed: bool,
}

impl Check {
    fn below(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold: format!("< {limit:e}"),
            passed: value < limit,
        }
    }

    fn equals_zero(name: &str, count: usize) -> Self {
        Self {
            name: name.into(),
            value: count as f64,
            threshold: "= 0".into(),
            passed: count == 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{} {:<28} {:>14.6e} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.threshold
            );
        }
        s
    }
}

/// Envelope, normalization, representation-identity and smoothness checks
/// for the configured activation and target.
pub fn run_verify(config: &ExperimentConfig, opts: &RunOptions) -> Result<VerifyReport> {
    let exp = with_threads(opts.threads, || Experiment::prepare(config.clone()))??;
    let spec = QuadratureSpec::default();
    let d = config.domain.dim();
    let mut checks = Vec::new();
    let xs: Vec<Vec<f64>> = (0..10)
        .map(|i| {
            let u = vec![(i as f64 + 0.5) / 10.0; d];
            config.domain.map_unit(&u).iter().zip(&exp.center).map(|(x, c)| x - c).collect()
        })
        .collect();
    match config.method {
        Method::Plain | Method::Stratified => {
            let k = exp.kernel.as_ref().unwrap();
            let rep = envelope_domination_check(k, &config.domain, 10_000, 1)?;
            checks.push(Check::equals_zero("envelope_domination", rep.domination_violations));
            checks.push(Check::equals_zero("triangle_bound", rep.triangle_violations));
            let mut worst: f64 = 0.0;
            for w in [0.0, 0.5, 1.0, 3.0, 10.0] {
                worst = worst.max(envelope_integral_check(w, k.radius, k.a, k.p, &spec)?);
            }
            checks.push(Check::below("envelope_integral", worst, 1e-8));
            if d == 1 {
                checks.push(Check::below("normalization", normalization_check(&exp.centered_target, k, &spec)?, 1e-4));
                let x1: Vec<f64> = xs.iter().map(|x| x[0]).collect();
                checks.push(Check::below(
                    "representation_identity",
                    representation_identity_check(&exp.centered_target, k, &x1, &spec)?,
                    1e-4,
                ));
            }
        }
        Method::Periodic | Method::StratifiedPeriodic => {
            if exp.centered_target.bumps().is_empty() {
                let k = exp.kernel.as_ref().unwrap();
                let limit = if config.activation.m_max() > 0 { 1e-10 } else { 1e-6 };
                checks.push(Check::below(
                    "periodic_identity",
                    periodic_identity_check(&exp.centered_target, k, &xs, &spec)?,
                    limit,
                ));
            }
        }
        Method::Approx => {
            let k = exp.kernel_for(config.n_grid[0])?;
            let m = exp.mollifier.clone().unwrap();
            let dev = approx_identity_check(&config.activation, &m, &[0.1, 0.05], k.a, &[1.0], &spec)?;
            let ratio = dev[0] / dev[1];
            checks.push(Check {
                name: "approx_epsilon_ratio".into(),
                value: ratio,
                threshold: "in [1.5, 2.5]".into(),
                passed: (1.5..=2.5).contains(&ratio),
            });
        }
    }
    let sb = smoothness_bound(&config.target, config.m, &config.domain, 1e-8)?;
    checks.push(Check {
        name: "smoothness_bound".into(),
        value: sb.lhs,
        threshold: format!("<= {:e}", sb.rhs),
        passed: sb.holds,
    });
    let report = VerifyReport { checks };
    if opts.out.is_some() {
        let dir = out_dir(opts)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["check", "value", "threshold", "passed"])?;
        for c in &report.checks {
            w.write_record([c.name.clone(), format!("{:e}", c.value), c.threshold.clone(), c.passed.to_string()])?;
        }
        write_file(&dir.join("verify.csv"), &w.into_inner().map_err(|e| Error::Io(e.to_string()))?)?;
    }
    Ok(report)
}

/// One row of the norms table.
#[derive(Debug, Clone, PartialEq)]
pub struct NormRow {
    pub norm: String,
    pub order: usize,
    pub value: Option<f64>,
    pub std_error: Option<f64>,
    pub status: String,
}

/// ‖f‖_{B^s} for s = 0..m+2 and the quadrature ‖f‖_{H^m(Ω)}.
pub fn run_norms(config: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<NormRow>> {
    let mut rows = Vec::new();
    for s in 0..=config.m + 2 {
        let row = match config.target.barron_norm(s as f64, 1e-12) {
            Ok(v) => NormRow {
                norm: "barron".into(),
                order: s,
                value: Some(v),
                std_error: None,
                status: "ok".into(),
            },
            Err(e) => NormRow {
                norm: "barron".into(),
                order: s,
                value: None,
                std_error: None,
                status: e.name().into(),
            },
        };
        rows.push(row);
    }
    let h = target_sobolev_norm(&config.target, config.m, &config.domain, config.n_quad)?;
    rows.push(NormRow {
        norm: "sobolev".into(),
        order: config.m,
        value: Some(h.estimate),
        std_error: Some(h.std_error),
        status: "ok".into(),
    });
    let dir = out_dir(opts)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["norm", "order", "value", "std_error", "status"])?;
    for r in &rows {
        w.write_record([
            r.norm.clone(),
            r.order.to_string(),
            r.value.map(|v| format!("{v:e}")).unwrap_or_default(),
            r.std_error.map(|v| format!("{v:e}")).unwrap_or_default(),
            r.status.clone(),
        ])?;
    }
    write_file(&dir.join("norms.csv"), &w.into_inner().map_err(|e| Error::Io(e.to_string()))?)?;
    Ok(rows)
}

/// Dumps the feature samples of every (n, seed) job, in recentered coordinates.
pub fn run_sample(config: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<PathBuf>> {
    let exp = with_threads(opts.threads, || Experiment::prepare(config.clone()))??;
    let dir = out_dir(opts)?;
    let d = config.domain.dim();
    let mut files = Vec::new();
    for &n in &config.n_grid {
        let kernel = exp.kernel_for(n)?;
        for &s in &config.seeds {
            let seed = s + opts.seed_offset;
            let draws = with_threads(opts.threads, || exp.draw(&kernel, n, seed))??;
            let mut buf = Vec::new();
            match draws {
                Draws::Flat(samples) => write_samples_csv(&mut buf, &samples, None, d)?,
                Draws::Grouped { groups, .. } => {
                    let samples: Vec<FeatureSample> = groups.iter().flat_map(|g| g.samples.iter().cloned()).collect();
                    let cells: Vec<usize> = groups.iter().flat_map(|g| std::iter::repeat_n(g.cell_id, g.samples.len())).collect();
                    write_samples_csv(&mut buf, &samples, Some(&cells), d)?;
                }
            }
            let path = dir.join(format!("samples_n{n}_seed{seed}.csv"));
            write_file(&path, &buf)?;
            files.push(path);
        }
    }
    Ok(files)
}
