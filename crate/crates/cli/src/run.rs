//! Mode dispatch.

use std::fmt;
use std::sync::Arc;

use nonmarkov::error::Result as CoreResult;
use nonmarkov::oracle::{langevin_means, Embedding, LangevinConfig};
use nonmarkov::quantifiers::{quantify, Diagnostics, Selection};
use nonmarkov::response::{chi_qq, chi_time, propagate_means, propagate_means_series, ModelParams, RealMatrix2};
use nonmarkov::spectral::{InterpolatedKernel, MemoryKernel, Resonance, SpectralDensity, TabulatedDensity};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{ConfigError, Engine, Mode, Param, RunConfig, SdSpec};
use crate::output::{num, write_plot_script, CsvSink, Plot};

/// Samples of `Im γ̃` used to interpolate a tabulated kernel.
const TABLE_POINTS: usize = 1500;
/// Langevin means must agree with propagation within this many standard errors.
const LANGEVIN_Z: f64 = 3.0;
const LANGEVIN_TIMES: usize = 20;
/// Embedding and analytic responses must agree to this absolute level.
const EMBEDDING_ABS: f64 = 1e-3;
const EMBEDDING_REL: f64 = 1e-3;

#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Numerical(String),
    Oracle(String),
    Io(std::io::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Oracle(_) => 4,
            Failure::Io(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "{e}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Oracle(m) => write!(f, "oracle mismatch: {m}"),
            Failure::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

#[derive(Clone)]
enum Bath {
    Density(SpectralDensity),
    Table(Arc<InterpolatedKernel>),
}

/// Memory kernel for one grid point, optionally sign-flipped for fault
/// injection.
#[derive(Clone)]
pub struct Kernel {
    bath: Bath,
    flip: bool,
}

impl Kernel {
    fn sign(&self) -> f64 {
        if self.flip {
            -1.0
        } else {
            1.0
        }
    }

    fn inner(&self) -> &dyn MemoryKernel {
        match &self.bath {
            Bath::Density(sd) => sd,
            Bath::Table(t) => t.as_ref(),
        }
    }
}

impl MemoryKernel for Kernel {
    fn gamma_tilde(&self, omega: f64) -> CoreResult<Complex64> {
        Ok(self.inner().gamma_tilde(omega)? * self.sign())
    }

    fn gamma_tilde_prime(&self, omega: f64) -> CoreResult<Complex64> {
        Ok(self.inner().gamma_tilde_prime(omega)? * self.sign())
    }

    fn high_frequency_friction(&self) -> f64 {
        self.inner().high_frequency_friction() * self.sign()
    }

    fn is_decoupled(&self) -> bool {
        self.inner().is_decoupled()
    }

    fn features(&self) -> Vec<f64> {
        self.inner().features()
    }

    fn resonances(&self, omega0: f64) -> Vec<Resonance> {
        self.inner().resonances(omega0)
    }
}

/// Everything needed to evaluate one parameter point.
struct Context {
    cfg: RunConfig,
    table: Option<Arc<InterpolatedKernel>>,
}

/// Model settings after applying a swept value.
#[derive(Debug, Clone, Copy)]
struct Point {
    d: f64,
    gamma: f64,
    omega: f64,
    params: ModelParams,
}

impl Context {
    fn new(cfg: &RunConfig) -> Result<Self, Failure> {
        let table = match &cfg.sd {
            SdSpec::Tabulated(path) => {
                let density = TabulatedDensity::load(path).map_err(|e| ConfigError::new("sd", e.to_string()))?;
                let kernel =
                    InterpolatedKernel::new(density, TABLE_POINTS).map_err(|e| Failure::Numerical(e.to_string()))?;
                Some(Arc::new(kernel))
            }
            _ => None,
        };
        Ok(Self { cfg: cfg.clone(), table })
    }

    fn point(&self, value: Option<f64>) -> Point {
        let c = &self.cfg;
        let mut p = Point {
            d: c.d,
            gamma: c.gamma,
            omega: c.omega_big,
            params: ModelParams {
                omega0: 1.0,
                beta: c.beta,
                hbar: c.hbar,
                cutoff: c.cutoff,
            },
        };
        if let Some(v) = value {
            match c.param {
                Param::D => p.d = v,
                Param::Gamma => p.gamma = v,
                Param::Omega => p.omega = v,
                Param::Beta => p.params.beta = v,
                Param::Hbar => p.params.hbar = v,
            }
        }
        p
    }

    fn current_value(&self) -> f64 {
        let c = &self.cfg;
        match c.param {
            Param::D => c.d,
            Param::Gamma => c.gamma,
            Param::Omega => c.omega_big,
            Param::Beta => c.beta,
            Param::Hbar => c.hbar,
        }
    }

    fn kernel(&self, p: &Point) -> CoreResult<Kernel> {
        let bath = match (&self.cfg.sd, &self.table) {
            (SdSpec::Tabulated(_), Some(t)) => Bath::Table(Arc::clone(t)),
            (SdSpec::Peaked, _) => Bath::Density(SpectralDensity::peaked_any_width(p.d, p.gamma, p.omega)?),
            _ => Bath::Density(SpectralDensity::ohmic(p.d)?),
        };
        Ok(Kernel {
            bath,
            flip: self.cfg.flip_gamma_sign,
        })
    }
}

pub fn run(cfg: &RunConfig) -> Result<(), Failure> {
    let ctx = Context::new(cfg)?;
    match cfg.mode {
        Mode::Quantify => {
            let v = ctx.current_value();
            sweep(&ctx, &[v], false)
        }
        Mode::Sweep => {
            let range = cfg.range.expect("validated");
            sweep(&ctx, &range.grid(), range.log)
        }
        Mode::Means => means(&ctx),
        Mode::OracleCheck => oracle_check(&ctx),
    }
}

struct Row {
    value: f64,
    selection: Selection,
    n1: Option<RealMatrix2>,
    n2: Option<RealMatrix2>,
    diagnostics: Diagnostics,
    error: Option<String>,
}

impl Row {
    fn fields(&self) -> Vec<String> {
        // Failed rows carry NaN in the requested columns.
        let pick = |m: &Option<RealMatrix2>, wanted: bool, i: usize, j: usize| {
            num(match (m, &self.error) {
                (_, Some(_)) => wanted.then_some(f64::NAN),
                (Some(m), None) => Some(m[i][j]),
                (None, None) => None,
            })
        };
        let (w1, w2) = (self.selection.wants_n1(), self.selection.wants_n2());
        let ok = self.error.is_none();
        vec![
            num(Some(self.value)),
            pick(&self.n1, w1, 0, 0),
            pick(&self.n1, w1, 0, 1),
            pick(&self.n1, w1, 1, 1),
            pick(&self.n2, w2, 0, 0),
            pick(&self.n2, w2, 0, 1),
            pick(&self.n2, w2, 1, 1),
            num(ok.then(|| self.diagnostics.max_relative_tail())),
            if ok { self.diagnostics.total_panels().to_string() } else { String::new() },
            num(self.diagnostics.covariance.map(|c| c.cutoff_change)),
            if ok { self.diagnostics.cutoff_sensitive().to_string() } else { String::new() },
            self.error.clone().unwrap_or_default(),
        ]
    }
}

fn evaluate(ctx: &Context, value: f64) -> Row {
    let p = ctx.point(Some(value));
    let result = ctx
        .kernel(&p)
        .and_then(|k| quantify(&p.params, &k, ctx.cfg.quantifier, &ctx.cfg.quadrature));
    match result {
        Ok(r) => Row {
            value,
            selection: ctx.cfg.quantifier,
            n1: r.n1,
            n2: r.n2,
            diagnostics: r.diagnostics,
            error: None,
        },
        Err(e) => Row {
            value,
            selection: ctx.cfg.quantifier,
            n1: None,
            n2: None,
            diagnostics: Diagnostics::default(),
            error: Some(e.to_string()),
        },
    }
}

fn sweep(ctx: &Context, grid: &[f64], log_x: bool) -> Result<(), Failure> {
    let label = ctx.cfg.param.label();
    let header = [
        label,
        "n1_qq",
        "n1_qp",
        "n1_pp",
        "n2_qq",
        "n2_qp",
        "n2_pp",
        "max_rel_tail",
        "panels",
        "cutoff_change",
        "cutoff_sensitive",
        "error",
    ];
    let mut sink = CsvSink::open(ctx.cfg.out.as_deref(), &header)
        .map_err(|e| ConfigError::new("out", e.to_string()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.cfg.threads)
        .build()
        .map_err(|e| ConfigError::new("threads", e.to_string()))?;
    let width = pool.current_num_threads().max(1);
    let mut failures = Vec::new();
    let mut notes = Vec::new();
    // Chunks of one row per worker keep rows in grid order while each is
    // flushed as soon as its chunk completes.
    for (c, chunk) in grid.chunks(width).enumerate() {
        let rows: Vec<Row> = pool.install(|| chunk.par_iter().map(|&v| evaluate(ctx, v)).collect());
        for (k, row) in rows.iter().enumerate() {
            sink.row(row.fields())?;
            let index = c * width + k;
            if let Some(e) = &row.error {
                failures.push(format!("grid point {index} ({label} = {}): {e}", row.value));
            }
            for n in &row.diagnostics.notes {
                notes.push(format!("{label} = {}: {n}", row.value));
            }
        }
    }
    notes.dedup();
    for n in &notes {
        eprintln!("note: {n}");
    }
    if let Some(path) = sink.path() {
        let q = ctx.cfg.quantifier;
        let mut series = Vec::new();
        if q.wants_n1() {
            series.extend([(2, "n1_qq".to_string()), (3, "n1_qp".into()), (4, "n1_pp".into())]);
        }
        if q.wants_n2() {
            series.extend([(5, "n2_qq".to_string()), (6, "n2_qp".into()), (7, "n2_pp".into())]);
        }
        write_plot_script(
            path,
            &Plot {
                xlabel: label,
                ylabel: "distance",
                log_x,
                series,
            },
        )?;
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(failures.join("; ")))
    }
}

fn means(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let (times, q, p) = match cfg.engine {
        Engine::Propagate => {
            let n = cfg.points;
            let times: Vec<f64> = (0..n).map(|i| cfg.t_max * i as f64 / (n - 1) as f64).collect();
            let pt = ctx.point(None);
            let k = ctx.kernel(&pt).map_err(|e| Failure::Numerical(e.to_string()))?;
            let m = propagate_means_series(&pt.params, &k, cfg.aq, cfg.ap, &times, &cfg.quadrature)
                .map_err(|e| Failure::Numerical(e.to_string()))?;
            let (q, p) = m.into_iter().unzip();
            (times, q, p)
        }
        Engine::Langevin => {
            let lc = langevin_config(cfg, cfg.points.saturating_sub(1).max(1));
            let s = langevin_means(&lc).map_err(|e| Failure::Numerical(e.to_string()))?;
            (s.times, s.q_mean, s.p_mean)
        }
    };
    let mut sink = CsvSink::open(cfg.out.as_deref(), &["t", "q_mean", "p_mean"])
        .map_err(|e| ConfigError::new("out", e.to_string()))?;
    for i in 0..times.len() {
        sink.row([num(Some(times[i])), num(Some(q[i])), num(Some(p[i]))])?;
    }
    if let Some(path) = sink.path() {
        write_plot_script(
            path,
            &Plot {
                xlabel: "t",
                ylabel: "mean",
                log_x: false,
                series: vec![(2, "q_mean".into()), (3, "p_mean".into())],
            },
        )?;
    }
    Ok(())
}

/// Langevin settings recording `intervals` evenly spaced times after `t = 0`.
fn langevin_config(cfg: &RunConfig, intervals: usize) -> LangevinConfig {
    let base = LangevinConfig {
        d: cfg.d,
        omega0: 1.0,
        beta: cfg.beta,
        t_max: cfg.t_max,
        n_traj: cfg.n_traj,
        seed: cfg.seed,
        a_q: cfg.aq,
        a_p: cfg.ap,
        ..LangevinConfig::default()
    };
    let dt = base.max_dt();
    let steps = (cfg.t_max / dt).ceil() as usize;
    let stride = steps.div_ceil(intervals).max(1);
    // Round the step down so that the recorded grid ends exactly at t_max.
    let dt = cfg.t_max / (stride * intervals) as f64;
    LangevinConfig {
        dt,
        t_max: cfg.t_max,
        record_stride: stride,
        ..base
    }
}

fn oracle_check(ctx: &Context) -> Result<(), Failure> {
    match ctx.cfg.sd {
        SdSpec::Ohmic => langevin_check(ctx),
        SdSpec::Peaked => embedding_check(ctx),
        SdSpec::Tabulated(_) => Err(ConfigError::new("sd", "oracle checks need an ohmic or peaked density").into()),
    }
}

fn numerical(e: nonmarkov::error::Error) -> Failure {
    Failure::Numerical(e.to_string())
}

fn langevin_check(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let lc = langevin_config(cfg, LANGEVIN_TIMES);
    let series = langevin_means(&lc).map_err(numerical)?;
    let pt = ctx.point(None);
    let k = ctx.kernel(&pt).map_err(numerical)?;
    let mut worst = (0.0, 0.0, "q");
    for i in 1..series.times.len() {
        let t = series.times[i];
        let (q, p) = propagate_means(&pt.params, &k, cfg.aq, cfg.ap, t, &cfg.quadrature).map_err(numerical)?;
        for (label, analytic, mean, se) in [
            ("q", q, series.q_mean[i], series.q_se[i]),
            ("p", p, series.p_mean[i], series.p_se[i]),
        ] {
            let z = (mean - analytic).abs() / se;
            if !(z <= worst.1) {
                worst = (t, z, label);
            }
        }
    }
    println!(
        "langevin vs propagation ({} trajectories, {} times): worst deviation {:.3} standard errors in {} at t = {} (tolerance {})",
        lc.n_traj,
        series.times.len() - 1,
        worst.1,
        worst.2,
        worst.0,
        LANGEVIN_Z
    );
    if worst.1 <= LANGEVIN_Z {
        println!("PASS");
        Ok(())
    } else {
        Err(Failure::Oracle(format!(
            "langevin vs propagation: {:.3} standard errors in {} at t = {}",
            worst.1, worst.2, worst.0
        )))
    }
}

fn embedding_check(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let pt = ctx.point(None);
    let emb = Embedding::new(pt.d, pt.gamma, pt.omega, 1.0).map_err(|e| ConfigError::new("gamma", e.to_string()))?;
    let k = ctx.kernel(&pt).map_err(numerical)?;

    let n = cfg.points;
    let times: Vec<f64> = (0..n).map(|i| cfg.t_max * i as f64 / (n - 1) as f64).collect();
    let traj = emb.trajectory(&times).map_err(numerical)?;
    let analytic: Vec<f64> = times
        .par_iter()
        .map(|&t| chi_time(&pt.params, &k, t, &cfg.quadrature).map(|m| m[0][0]))
        .collect::<CoreResult<_>>()
        .map_err(numerical)?;
    let (mut t_worst, mut dev_t) = (0.0, 0.0);
    for ((t, s), a) in times.iter().zip(&traj).zip(&analytic) {
        let dev = (s.q - a).abs();
        if !(dev <= dev_t) {
            (t_worst, dev_t) = (*t, dev);
        }
    }
    println!("embedding vs chi_time on [0, {}]: worst |Δχ_qq| = {dev_t:.3e} at t = {t_worst} (tolerance {EMBEDDING_ABS:e})", cfg.t_max);

    let top = 3.0 * pt.omega.max(1.0);
    let omegas: Vec<f64> = (0..20).map(|i| top * (i as f64 + 0.5) / 20.0).collect();
    let rel: Vec<(f64, f64)> = omegas
        .par_iter()
        .map(|&w| {
            let a = emb.fourier(w)?;
            let b = chi_qq(&pt.params, &k, w)?;
            Ok((w, (a - b).norm() / b.norm()))
        })
        .collect::<CoreResult<_>>()
        .map_err(numerical)?;
    let (w_worst, dev_w) = rel
        .into_iter()
        .fold((0.0, 0.0), |acc, (w, d)| if !(d <= acc.1) { (w, d) } else { acc });
    println!("embedding vs chi_qq on 20 frequencies: worst relative deviation {dev_w:.3e} at ω = {w_worst} (tolerance {EMBEDDING_REL:e})");

    let mut bad = Vec::new();
    if !(dev_t <= EMBEDDING_ABS) {
        bad.push(format!("time domain: {dev_t:.3e} at t = {t_worst}"));
    }
    if !(dev_w <= EMBEDDING_REL) {
        bad.push(format!("frequency domain: {dev_w:.3e} at ω = {w_worst}"));
    }
    if bad.is_empty() {
        println!("PASS");
        Ok(())
    } else {
        Err(Failure::Oracle(bad.join("; ")))
    }
}
