//! Run configuration: a `key = value` file merged with command-line flags.
//!
//! Every file key is also a flag (`omega-big = 2` ↔ `--omega-big 2`); flags
//! win. Values stay strings until the merge so that a bad value is reported
//! against the key it came from.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::Parser;
use nonmarkov::quadrature::QuadratureConfig;
use nonmarkov::quantifiers::Selection;

#[derive(Parser, Debug, Default)]
#[command(name = "nonmarkov", version, about = "Non-Markovianity quantifiers for quantum Brownian motion")]
pub struct Cli {
    /// quantify | sweep | means | oracle-check
    #[arg(long)]
    pub mode: Option<String>,
    /// ohmic | peaked | tabulated:<path>
    #[arg(long)]
    pub sd: Option<String>,
    /// Coupling strength D
    #[arg(long, allow_hyphen_values = true)]
    pub d: Option<String>,
    /// Width Γ of the peaked density
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<String>,
    /// Centre Ω of the peaked density
    #[arg(long = "omega-big", allow_hyphen_values = true)]
    pub omega_big: Option<String>,
    /// Inverse temperature β (in units of 1/ω0)
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
    /// Planck constant; 0 selects the classical branch
    #[arg(long, allow_hyphen_values = true)]
    pub hbar: Option<String>,
    /// UV cutoff Λ for the momentum variance
    #[arg(long, allow_hyphen_values = true)]
    pub cutoff: Option<String>,
    /// Swept parameter: D | gamma | omega | beta | hbar
    #[arg(long)]
    pub param: Option<String>,
    /// start:stop:steps[:log]
    #[arg(long)]
    pub range: Option<String>,
    /// n1 | n2 | both
    #[arg(long)]
    pub quantifier: Option<String>,
    /// Position component of the kick
    #[arg(long, allow_hyphen_values = true)]
    pub aq: Option<String>,
    /// Momentum component of the kick
    #[arg(long, allow_hyphen_values = true)]
    pub ap: Option<String>,
    /// Monte Carlo seed
    #[arg(long)]
    pub seed: Option<String>,
    /// Output CSV path (stdout when absent)
    #[arg(long)]
    pub out: Option<String>,
    /// Time window for means and oracle checks
    #[arg(long = "t-max", allow_hyphen_values = true)]
    pub t_max: Option<String>,
    /// Number of time points in means mode
    #[arg(long)]
    pub points: Option<String>,
    /// propagate | langevin (means mode)
    #[arg(long)]
    pub engine: Option<String>,
    /// Langevin ensemble size
    #[arg(long = "n-traj")]
    pub n_traj: Option<String>,
    /// Worker threads for sweeps (0 = all cores)
    #[arg(long)]
    pub threads: Option<String>,
    /// Quadrature truncation half-width W
    #[arg(long = "half-width")]
    pub half_width: Option<String>,
    /// Quadrature relative tolerance
    #[arg(long = "rel-tol")]
    pub rel_tol: Option<String>,
    /// Key = value configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Test hook: flip the sign of the memory kernel on the analytic side.
    #[arg(long = "fault-flip-gamma-sign", hide = true)]
    pub flip_gamma_sign: bool,
}

/// Keys accepted in configuration files.
pub const KEYS: [&str; 22] = [
    "mode", "sd", "d", "gamma", "omega-big", "beta", "hbar", "cutoff", "param", "range", "quantifier",
    "aq", "ap", "seed", "out", "t-max", "points", "engine", "n-traj", "threads", "half-width", "rel-tol",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error in `{}`: {}", self.key, self.reason)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Quantify,
    Sweep,
    Means,
    OracleCheck,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SdSpec {
    Ohmic,
    Peaked,
    Tabulated(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    D,
    Gamma,
    Omega,
    Beta,
    Hbar,
}

impl Param {
    pub fn label(self) -> &'static str {
        match self {
            Param::D => "D",
            Param::Gamma => "gamma",
            Param::Omega => "omega",
            Param::Beta => "beta",
            Param::Hbar => "hbar",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "d" => Param::D,
            "gamma" => Param::Gamma,
            "omega" | "omega-big" => Param::Omega,
            "beta" => Param::Beta,
            "hbar" => Param::Hbar,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    pub log: bool,
}

impl Range {
    pub fn grid(&self) -> Vec<f64> {
        let n = self.steps;
        (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                if i == 0 {
                    self.start
                } else if i == n - 1 {
                    self.stop
                } else if self.log {
                    (self.start.ln() + s * (self.stop.ln() - self.start.ln())).exp()
                } else {
                    self.start + s * (self.stop - self.start)
                }
            })
            .collect()
    }

    fn parse(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(format!("expected start:stop:steps[:log], got `{s}`"));
        }
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
        let start = num(parts[0])?;
        let stop = num(parts[1])?;
        let steps: usize = parts[2].trim().parse().map_err(|e| format!("steps `{}`: {e}", parts[2]))?;
        let log = match parts.get(3).map(|t| t.trim()) {
            None | Some("lin") | Some("linear") => false,
            Some("log") => true,
            Some(other) => return Err(format!("spacing must be `log` or `lin`, got `{other}`")),
        };
        if steps < 2 {
            return Err(format!("steps must be >= 2, got {steps}"));
        }
        if !(start.is_finite() && stop.is_finite()) {
            return Err("bounds must be finite".into());
        }
        if log && !(start > 0.0 && stop > 0.0) {
            return Err("log spacing needs positive bounds".into());
        }
        Ok(Self { start, stop, steps, log })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Propagate,
    Langevin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub sd: SdSpec,
    pub d: f64,
    pub gamma: f64,
    pub omega_big: f64,
    pub beta: f64,
    pub hbar: f64,
    pub cutoff: f64,
    pub param: Param,
    pub range: Option<Range>,
    pub quantifier: Selection,
    pub aq: f64,
    pub ap: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub t_max: f64,
    pub points: usize,
    pub engine: Engine,
    pub n_traj: usize,
    pub threads: usize,
    pub quadrature: QuadratureConfig,
    pub flip_gamma_sign: bool,
}

/// Parse a configuration file into `key -> value`.
pub fn parse_file(text: &str) -> Result<HashMap<String, String>, ConfigError> {
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::new(line, format!("line {}: expected `key = value`", i + 1)));
        };
        let key = k.trim().replace('_', "-").to_ascii_lowercase();
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::new(key, format!("line {}: unknown key", i + 1)));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

struct Sources<'a> {
    flags: HashMap<&'static str, &'a str>,
    file: HashMap<String, String>,
}

impl Sources<'_> {
    fn get(&self, key: &str) -> Option<&str> {
        self.flags
            .get(key)
            .copied()
            .or_else(|| self.file.get(key).map(String::as_str))
    }

    fn num(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ConfigError::new(key, format!("`{s}` is not a finite number"))),
        }
    }

    fn int<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse::<T>()
                .map_err(|_| ConfigError::new(key, format!("`{s}` is not a non-negative integer"))),
        }
    }
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self, ConfigError> {
        let file = match &cli.config {
            Some(path) => load_file(path)?,
            None => HashMap::new(),
        };
        let mut flags = HashMap::new();
        let pairs: [(&'static str, &Option<String>); 22] = [
            ("mode", &cli.mode),
            ("sd", &cli.sd),
            ("d", &cli.d),
            ("gamma", &cli.gamma),
            ("omega-big", &cli.omega_big),
            ("beta", &cli.beta),
            ("hbar", &cli.hbar),
            ("cutoff", &cli.cutoff),
            ("param", &cli.param),
            ("range", &cli.range),
            ("quantifier", &cli.quantifier),
            ("aq", &cli.aq),
            ("ap", &cli.ap),
            ("seed", &cli.seed),
            ("out", &cli.out),
            ("t-max", &cli.t_max),
            ("points", &cli.points),
            ("engine", &cli.engine),
            ("n-traj", &cli.n_traj),
            ("threads", &cli.threads),
            ("half-width", &cli.half_width),
            ("rel-tol", &cli.rel_tol),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                flags.insert(k, v.as_str());
            }
        }
        let mut cfg = Self::resolve(&Sources { flags, file })?;
        cfg.flip_gamma_sign = cli.flip_gamma_sign;
        Ok(cfg)
    }

    fn resolve(src: &Sources) -> Result<Self, ConfigError> {
        let mode = match src.get("mode").unwrap_or("quantify") {
            "quantify" => Mode::Quantify,
            "sweep" => Mode::Sweep,
            "means" => Mode::Means,
            "oracle-check" | "oracle" => Mode::OracleCheck,
            other => return Err(ConfigError::new("mode", format!("unknown mode `{other}`"))),
        };
        let sd = match src.get("sd").unwrap_or("ohmic") {
            "ohmic" => SdSpec::Ohmic,
            "peaked" => SdSpec::Peaked,
            other => match other.strip_prefix("tabulated:") {
                Some(path) if !path.is_empty() => SdSpec::Tabulated(PathBuf::from(path)),
                _ => return Err(ConfigError::new("sd", format!("expected ohmic, peaked or tabulated:<path>, got `{other}`"))),
            },
        };
        let default_d = if sd == SdSpec::Peaked { 1.0 } else { 0.2 };
        let d = src.num("d", default_d)?;
        let gamma = src.num("gamma", 0.5)?;
        let omega_big = src.num("omega-big", 2.0)?;
        let beta = src.num("beta", 1.0)?;
        let hbar = src.num("hbar", 1.0)?;
        let cutoff = src.num("cutoff", 1e3)?;
        let default_param = if matches!(sd, SdSpec::Tabulated(_)) { "beta" } else { "D" };
        let param_s = src.get("param").unwrap_or(default_param);
        let param = Param::parse(param_s)
            .ok_or_else(|| ConfigError::new("param", format!("expected D, gamma, omega, beta or hbar, got `{param_s}`")))?;
        let range = src
            .get("range")
            .map(|s| Range::parse(s).map_err(|e| ConfigError::new("range", e)))
            .transpose()?;
        let quantifier = match src.get("quantifier").unwrap_or("both") {
            "n1" => Selection::N1,
            "n2" => Selection::N2,
            "both" => Selection::Both,
            other => return Err(ConfigError::new("quantifier", format!("expected n1, n2 or both, got `{other}`"))),
        };
        let aq = src.num("aq", 1.0)?;
        let ap = src.num("ap", 1.0)?;
        let seed = src.int("seed", 0x5eed_u64)?;
        let out = src.get("out").map(PathBuf::from);
        let default_t = if mode == Mode::OracleCheck && sd == SdSpec::Peaked { 50.0 } else { 20.0 };
        let t_max = src.num("t-max", default_t)?;
        let points = src.int("points", 201_usize)?;
        let engine = match src.get("engine").unwrap_or("propagate") {
            "propagate" => Engine::Propagate,
            "langevin" => Engine::Langevin,
            other => return Err(ConfigError::new("engine", format!("expected propagate or langevin, got `{other}`"))),
        };
        let n_traj = src.int("n-traj", 100_000_usize)?;
        let threads = src.int("threads", 0_usize)?;
        let defaults = QuadratureConfig::default();
        let quadrature = QuadratureConfig {
            half_width: src.num("half-width", defaults.half_width)?,
            rel_tol: src.num("rel-tol", defaults.rel_tol)?,
            ..defaults
        };

        let cfg = Self {
            mode,
            sd,
            d,
            gamma,
            omega_big,
            beta,
            hbar,
            cutoff,
            param,
            range,
            quantifier,
            aq,
            ap,
            seed,
            out,
            t_max,
            points,
            engine,
            n_traj,
            threads,
            quadrature,
            flip_gamma_sign: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::new(key, format!("must be > 0, got {v}")))
            }
        };
        if self.d < 0.0 {
            return Err(ConfigError::new("d", format!("must be >= 0, got {}", self.d)));
        }
        positive("gamma", self.gamma)?;
        positive("omega-big", self.omega_big)?;
        positive("beta", self.beta)?;
        if self.hbar < 0.0 {
            return Err(ConfigError::new("hbar", format!("must be >= 0, got {}", self.hbar)));
        }
        if self.cutoff <= 1.0 {
            return Err(ConfigError::new("cutoff", format!("must exceed omega0 = 1, got {}", self.cutoff)));
        }
        positive("t-max", self.t_max)?;
        if self.points < 2 {
            return Err(ConfigError::new("points", "must be >= 2"));
        }
        positive("half-width", self.quadrature.half_width)?;
        positive("rel-tol", self.quadrature.rel_tol)?;
        if self.n_traj < 1000 {
            return Err(ConfigError::new("n-traj", format!("must be >= 1000, got {}", self.n_traj)));
        }
        if let SdSpec::Tabulated(_) = self.sd {
            if matches!(self.param, Param::D | Param::Gamma | Param::Omega) && self.mode == Mode::Sweep {
                return Err(ConfigError::new(
                    "param",
                    format!("`{}` does not apply to a tabulated density", self.param.label()),
                ));
            }
        }
        if self.mode == Mode::Sweep {
            let Some(r) = self.range else {
                return Err(ConfigError::new("range", "sweep mode needs a range"));
            };
            // D and ħ may be zero; the rest are strictly positive.
            let lo = r.start.min(r.stop);
            let ok = match self.param {
                Param::D | Param::Hbar => lo >= 0.0,
                _ => lo > 0.0,
            };
            if !ok {
                return Err(ConfigError::new(
                    "range",
                    format!("values of `{}` must be {}", self.param.label(), match self.param {
                        Param::D | Param::Hbar => "non-negative",
                        _ => "positive",
                    }),
                ));
            }
        }
        if self.engine == Engine::Langevin && self.sd != SdSpec::Ohmic {
            return Err(ConfigError::new("engine", "the Langevin engine needs an ohmic density"));
        }
        Ok(())
    }
}

fn load_file(path: &Path) -> Result<HashMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
    parse_file(&text)
}
