//! Run configuration: a JSON document whose fields can all be overridden
//! from the command line.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use trapbec_core::{make_gaussian_potential, Potential};

/// Subcommands of the `trapbec` binary.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Ideal trapped gas in closed form.
    Ideal,
    /// Semiclassical self-consistent minimiser at one (beta, lambda).
    Solve,
    /// Critical inverse temperature for one coupling.
    Tc,
    /// First-order shift coefficient of the critical temperature.
    Xi,
    /// Critical temperatures on a coupling grid and the extrapolated slope.
    Slope,
    /// Finite-N Hartree Gibbs state.
    Hartree,
    /// Hartree states against the semiclassical minimiser for several N.
    Compare,
    /// Seeded inequality property suites.
    Props,
    /// Semiclassical solves over a (lambda, beta) grid.
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ideal => "ideal",
            Command::Solve => "solve",
            Command::Tc => "tc",
            Command::Xi => "xi",
            Command::Slope => "slope",
            Command::Hartree => "hartree",
            Command::Compare => "compare",
            Command::Props => "props",
            Command::Sweep => "sweep",
        }
    }
}

/// Fully resolved configuration of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub beta: Option<f64>,
    pub omega: f64,
    pub lambda: f64,
    pub betas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub n: Option<usize>,
    pub ns: Vec<usize>,
    /// `gaussian:a=<amplitude>,sigma=<width>` or `table:<path>`.
    pub potential: String,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub n_grid: Option<usize>,
    pub damping: Option<f64>,
    pub validate: bool,
    pub seed: u64,
    pub suite: String,
    pub instances: Option<usize>,
    pub workers: Option<usize>,
    /// Stem of the artifact files; defaults to the command name.
    pub name: Option<String>,
    pub output_dir: PathBuf,
    pub cache: bool,
    pub cache_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            beta: None,
            omega: 1.0,
            lambda: 0.0,
            betas: Vec::new(),
            lambdas: Vec::new(),
            n: None,
            ns: Vec::new(),
            potential: "gaussian:a=1,sigma=1".into(),
            tol: None,
            max_iter: None,
            n_grid: None,
            damping: None,
            validate: true,
            seed: 7,
            suite: "all".into(),
            instances: None,
            workers: None,
            name: None,
            output_dir: PathBuf::from("results"),
            cache: true,
            cache_dir: None,
        }
    }
}

/// Command-line overrides; every field of [`RunConfig`] has a flag.
#[derive(Args, Debug, Default)]
pub struct Overrides {
    /// JSON configuration file; flags take precedence over its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated inverse temperatures.
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    /// Comma-separated couplings.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Particle number.
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated particle numbers.
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    /// Potential: `gaussian:a=1,sigma=1` or `table:<path>`.
    #[arg(long)]
    pub potential: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub n_grid: Option<usize>,
    #[arg(long)]
    pub damping: Option<f64>,
    /// Skip the standing-assumption check on the potential.
    #[arg(long)]
    pub no_validate: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Property suite name or `all`.
    #[arg(long)]
    pub suite: Option<String>,
    /// Number of random instances per suite.
    #[arg(long)]
    pub instances: Option<usize>,
    /// Worker threads for sweeps.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Stem of the artifact files.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Ignore and do not write the result cache.
    #[arg(long)]
    pub no_cache: bool,
    /// Cache directory; also settable through TRAPBEC_CACHE_DIR.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

/// Invalid configuration; maps to exit status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl RunConfig {
    /// Loads the optional config file and applies the overrides.
    pub fn resolve(command: Command, o: &Overrides) -> Result<Self, ConfigError> {
        let mut c = match &o.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| bad(format!("cannot read config {}: {e}", path.display())))?;
                serde_json::from_str::<RunConfig>(&text)
                    .map_err(|e| bad(format!("invalid config {}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        c.command = Some(command);
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &o.$field {
                    c.$field = v.clone();
                }
            )*};
        }
        macro_rules! set_opt {
            ($($field:ident),*) => {$(
                if o.$field.is_some() {
                    c.$field = o.$field.clone();
                }
            )*};
        }
        set!(omega, lambda, betas, lambdas, ns, potential, seed, suite, output_dir);
        set_opt!(beta, n, tol, max_iter, n_grid, damping, instances, workers, name, cache_dir);
        if o.no_validate {
            c.validate = false;
        }
        if o.no_cache {
            c.cache = false;
        }
        c.validate_fields()?;
        Ok(c)
    }

    pub fn command(&self) -> Command {
        self.command.unwrap_or(Command::Ideal)
    }

    fn validate_fields(&self) -> Result<(), ConfigError> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(bad(format!("{name} must be positive and finite, got {x}")))
            }
        };
        positive("omega", self.omega)?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(bad(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if let Some(b) = self.beta {
            positive("beta", b)?;
        }
        for &b in &self.betas {
            positive("betas", b)?;
        }
        for &l in &self.lambdas {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(bad(format!("lambdas must be >= 0, got {l}")));
            }
        }
        if let Some(t) = self.tol {
            positive("tol", t)?;
        }
        if let Some(d) = self.damping {
            if !(d > 0.0 && d <= 1.0) {
                return Err(bad(format!("damping must lie in (0, 1], got {d}")));
            }
        }
        if self.workers == Some(0) {
            return Err(bad("workers must be >= 1"));
        }
        let need_beta = matches!(
            self.command(),
            Command::Ideal | Command::Solve | Command::Hartree | Command::Compare
        );
        if need_beta && self.beta.is_none() {
            return Err(bad(format!(
                "command {} needs --beta",
                self.command().name()
            )));
        }
        match self.command() {
            Command::Slope if self.lambdas.is_empty() => {
                return Err(bad("slope needs a nonempty --lambdas grid"))
            }
            Command::Slope if self.lambdas.contains(&0.0) => {
                return Err(bad("slope needs positive couplings"))
            }
            Command::Sweep if self.betas.is_empty() => {
                return Err(bad("sweep needs a nonempty --betas grid"))
            }
            Command::Hartree if self.n.is_none() => return Err(bad("hartree needs --n")),
            Command::Compare if self.ns.is_empty() && self.n.is_none() => {
                return Err(bad("compare needs --ns or --n"))
            }
            _ => {}
        }
        if self.command() == Command::Props && self.suite != "all" {
            trapbec_core::Suite::from_name(&self.suite).map_err(|e| bad(e.to_string()))?;
        }
        self.potential()?;
        Ok(())
    }

    /// Builds the interaction potential (unit coupling).
    pub fn potential(&self) -> Result<Potential, ConfigError> {
        parse_potential(&self.potential)
    }

    pub fn stem(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.command().name().to_string())
    }

    /// The part of the configuration that determines the result: runtime
    /// toggles (output location, caching, worker count) are cleared.
    pub fn physics_view(&self) -> RunConfig {
        RunConfig {
            name: None,
            output_dir: PathBuf::new(),
            cache: true,
            cache_dir: None,
            workers: None,
            ..self.clone()
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        if let Some(dir) = &self.cache_dir {
            return dir.clone();
        }
        match std::env::var_os("TRAPBEC_CACHE_DIR") {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => PathBuf::from("cache"),
        }
    }

    /// Path of a tabulated potential, if any.
    pub fn table_path(&self) -> Option<&Path> {
        self.potential.strip_prefix("table:").map(Path::new)
    }
}

/// Parses `gaussian:a=1,sigma=1` or `table:<path>`.
pub fn parse_potential(spec: &str) -> Result<Potential, ConfigError> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    match kind {
        "gaussian" => {
            let (mut a, mut sigma) = (1.0, 1.0);
            for kv in rest.split(',').filter(|s| !s.is_empty()) {
                let (k, v) = kv.split_once('=').ok_or_else(|| {
                    bad(format!("expected key=value in potential spec, got '{kv}'"))
                })?;
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|e| bad(format!("bad value for '{k}' in potential spec: {e}")))?;
                match k.trim() {
                    "a" | "amplitude" => a = v,
                    "sigma" | "width" => sigma = v,
                    other => return Err(bad(format!("unknown gaussian parameter '{other}'"))),
                }
            }
            make_gaussian_potential(a, sigma).map_err(|e| bad(e.to_string()))
        }
        "table" => {
            let path = Path::new(rest);
            if !path.is_file() {
                return Err(bad(format!(
                    "potential table {} does not exist",
                    path.display()
                )));
            }
            Potential::from_table_file(path).map_err(|e| bad(e.to_string()))
        }
        other => Err(bad(format!("unknown potential kind '{other}'"))),
    }
}
