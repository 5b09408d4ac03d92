//! Run configuration: a TOML key=value file overridden by flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use dichotomy::corpus::{get_example, parse_params, ExampleEntry};
use dichotomy::dichotomy_fit::FitSettings;
use dichotomy::growth::{GrowthRate, RateKind};
use dichotomy::spectrum::SpectrumKind;
use dichotomy::system::LinearSystem;
use dichotomy::Window;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_WINDOW: u32 = 400;
pub const DEFAULT_GRID_STEP: f64 = 0.05;

/// `N` for `[−N, N]`, or `LO,HI`.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(try_from = "RawWindow")]
pub struct WindowSpec(pub Window);

#[derive(Deserialize)]
#[serde(untagged)]
enum RawWindow {
    Half(u32),
    Pair([i64; 2]),
    Text(String),
}

impl TryFrom<RawWindow> for WindowSpec {
    type Error = String;

    fn try_from(raw: RawWindow) -> Result<Self, String> {
        match raw {
            RawWindow::Half(n) => Ok(WindowSpec(Window::symmetric(n))),
            RawWindow::Pair([lo, hi]) => Window::new(lo, hi).map(WindowSpec).map_err(|e| e.to_string()),
            RawWindow::Text(s) => s.parse(),
        }
    }
}

impl FromStr for WindowSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some((lo, hi)) = s.split_once(',') {
            let p = |v: &str| v.trim().parse::<i64>().map_err(|_| format!("bad window bound {v:?}"));
            return Window::new(p(lo)?, p(hi)?).map(WindowSpec).map_err(|e| e.to_string());
        }
        let n: u32 = s.parse().map_err(|_| format!("window must be N or LO,HI, got {s:?}"))?;
        Ok(WindowSpec(Window::symmetric(n)))
    }
}

/// Settings shared by all commands. Each key is both a flag (`--grid-step`)
/// and a config-file key (`grid_step`).
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigArgs {
    /// Config file of `key = value` lines; flags take precedence.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Corpus example name (see `corpus list`).
    #[arg(long, global = true)]
    pub corpus: Option<String>,
    /// Corpus parameters, e.g. `ω=2,a=1`.
    #[arg(long, global = true)]
    pub params: Option<String>,
    /// System CSV (`window,LO,HI` then `n,a11,…,add` rows) instead of a corpus entry.
    #[arg(long, global = true)]
    pub system_csv: Option<PathBuf>,
    /// exponential, polynomial, quadratic or cubic; defaults to the corpus entry's rate.
    #[arg(long, global = true)]
    pub rate: Option<String>,
    /// Growth-rate table CSV (`n,L` rows) instead of a named rate.
    #[arg(long, global = true)]
    pub rate_csv: Option<PathBuf>,
    /// uniform, nonuniform, slow or upp.
    #[arg(long, global = true)]
    pub class: Option<String>,
    /// `N` for [−N, N], or `LO,HI`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub window: Option<WindowSpec>,
    /// Lower end of the γ range; defaults to the growth-fit range.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gamma_min: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gamma_max: Option<f64>,
    #[arg(long, global = true)]
    pub grid_step: Option<f64>,
    /// Bisection tolerance for interval endpoints; defaults to grid_step/8.
    #[arg(long, global = true)]
    pub refinement_tol: Option<f64>,
    #[arg(long, global = true)]
    pub log_k_cap: Option<f64>,
    #[arg(long, global = true)]
    pub theta_cap: Option<f64>,
    #[arg(long, global = true)]
    pub alpha_min: Option<f64>,
    #[arg(long, global = true)]
    pub beta_min: Option<f64>,
    /// Weight m in α + mθ < 0 and β − mν > 0 (1 or 2).
    #[arg(long, global = true)]
    pub multiplier: Option<u8>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps; output does not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

impl ConfigArgs {
    /// Flags merged over the config file, if any.
    pub fn merged(self) -> Result<ConfigArgs, CliError> {
        let file = match &self.config {
            Some(path) => load_file(path)?,
            None => ConfigArgs::default(),
        };
        Ok(ConfigArgs {
            config: self.config,
            corpus: self.corpus.or(file.corpus),
            params: self.params.or(file.params),
            system_csv: self.system_csv.or(file.system_csv),
            rate: self.rate.or(file.rate),
            rate_csv: self.rate_csv.or(file.rate_csv),
            class: self.class.or(file.class),
            window: self.window.or(file.window),
            gamma_min: self.gamma_min.or(file.gamma_min),
            gamma_max: self.gamma_max.or(file.gamma_max),
            grid_step: self.grid_step.or(file.grid_step),
            refinement_tol: self.refinement_tol.or(file.refinement_tol),
            log_k_cap: self.log_k_cap.or(file.log_k_cap),
            theta_cap: self.theta_cap.or(file.theta_cap),
            alpha_min: self.alpha_min.or(file.alpha_min),
            beta_min: self.beta_min.or(file.beta_min),
            multiplier: self.multiplier.or(file.multiplier),
            out: self.out.or(file.out),
            seed: self.seed.or(file.seed),
            jobs: self.jobs.or(file.jobs),
        })
    }
}

fn load_file(path: &Path) -> Result<ConfigArgs, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Where the system comes from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemSource {
    Corpus {
        name: String,
        #[serde(serialize_with = "as_map")]
        params: Vec<(String, f64)>,
    },
    Csv {
        path: PathBuf,
    },
}

fn as_map<S: serde::Serializer>(params: &[(String, f64)], s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(params.iter().map(|(k, v)| (k, v)))
}

/// Validated settings, before the system is loaded.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub source: SystemSource,
    pub rate: Option<String>,
    pub rate_csv: Option<PathBuf>,
    pub class: SpectrumKind,
    pub window: Option<Window>,
    pub gamma_range: Option<(f64, f64)>,
    pub grid_step: f64,
    pub refinement_tol: f64,
    pub fit: FitSettings<f64>,
    pub out: PathBuf,
    pub seed: u64,
    pub jobs: Option<usize>,
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn from_args(args: ConfigArgs) -> Result<Self, CliError> {
        let args = args.merged()?;
        let source = match (&args.corpus, &args.system_csv) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("give either corpus or system_csv, not both".into()))
            }
            (None, None) => return Err(CliError::Config("no system: set corpus or system_csv".into())),
            (Some(name), None) => SystemSource::Corpus {
                name: name.clone(),
                params: parse_params(args.params.as_deref().unwrap_or(""))?,
            },
            (None, Some(path)) => {
                if args.params.is_some() {
                    return Err(CliError::Config("params apply to corpus entries only".into()));
                }
                SystemSource::Csv { path: path.clone() }
            }
        };
        if args.rate.is_some() && args.rate_csv.is_some() {
            return Err(CliError::Config("give either rate or rate_csv, not both".into()));
        }
        let class = match &args.class {
            Some(c) => c.parse::<SpectrumKind>().map_err(CliError::Config)?,
            None => SpectrumKind::Nonuniform,
        };
        let gamma_range = match (args.gamma_min, args.gamma_max) {
            (None, None) => None,
            (Some(lo), Some(hi)) if lo < hi && lo.is_finite() && hi.is_finite() => Some((lo, hi)),
            (Some(lo), Some(hi)) => {
                return Err(CliError::Config(format!("γ range [{lo}, {hi}] must be finite and increasing")))
            }
            _ => return Err(CliError::Config("set both gamma_min and gamma_max, or neither".into())),
        };
        let grid_step = positive("grid_step", args.grid_step.unwrap_or(DEFAULT_GRID_STEP))?;
        let refinement_tol = positive("refinement_tol", args.refinement_tol.unwrap_or(grid_step / 8.0))?;
        let d = FitSettings::<f64>::default();
        let fit = FitSettings {
            log_k_cap: args.log_k_cap.unwrap_or(d.log_k_cap),
            theta_cap: args.theta_cap.unwrap_or(d.theta_cap),
            alpha_min: args.alpha_min.unwrap_or(d.alpha_min),
            beta_min: args.beta_min.unwrap_or(d.beta_min),
            multiplier: args.multiplier.unwrap_or(d.multiplier),
            sigma_min: d.sigma_min,
        };
        fit.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if args.jobs == Some(0) {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        Ok(RunConfig {
            source,
            rate: args.rate,
            rate_csv: args.rate_csv,
            class,
            window: args.window.map(|w| w.0),
            gamma_range,
            grid_step,
            refinement_tol,
            fit,
            out: args.out.unwrap_or_else(|| PathBuf::from(".")),
            seed: args.seed.unwrap_or(0),
            jobs: args.jobs,
        })
    }

    /// Loads the system and rate and fixes the window.
    pub fn load(&self) -> Result<Loaded, CliError> {
        let (entry, system, csv_window) = match &self.source {
            SystemSource::Corpus { name, params } => {
                let e = get_example::<f64>(name, params)?;
                let sys = e.system.clone();
                (Some(e), sys, None)
            }
            SystemSource::Csv { path } => {
                let (sys, w) = LinearSystem::from_csv(path)?;
                (None, sys, Some(w))
            }
        };
        let rate = if let Some(path) = &self.rate_csv {
            GrowthRate::from_csv(path)?
        } else if let Some(name) = &self.rate {
            match name.parse::<RateKind>().map_err(CliError::Config)? {
                RateKind::Exponential => GrowthRate::exponential(),
                RateKind::Polynomial => GrowthRate::polynomial(),
                RateKind::Quadratic => GrowthRate::quadratic(),
                RateKind::Cubic => GrowthRate::cubic(),
                RateKind::Custom => {
                    return Err(CliError::Config("custom rates are read with rate_csv".into()))
                }
            }
        } else if let Some(e) = &entry {
            e.rate.clone()
        } else {
            GrowthRate::exponential()
        };
        let window = self
            .window
            .or(csv_window)
            .unwrap_or_else(|| Window::symmetric(DEFAULT_WINDOW));
        system.ensure_covers(window)?;
        rate.ensure_covers(window)?;
        Ok(Loaded {
            entry,
            system,
            rate,
            window,
        })
    }
}

pub struct Loaded {
    pub entry: Option<ExampleEntry<f64>>,
    pub system: LinearSystem<f64>,
    pub rate: GrowthRate<f64>,
    pub window: Window,
}

impl Loaded {
    pub fn description(&self) -> String {
        match &self.entry {
            Some(e) => e.description(),
            None => self.system.label().to_string(),
        }
    }
}

/// The configuration actually used, embedded in every output. Worker count
/// and output directory are excluded: they do not affect results.
#[derive(Clone, Debug, Serialize)]
pub struct EffectiveConfig {
    pub system: SystemSource,
    pub description: String,
    pub rate: String,
    pub class: SpectrumKind,
    pub window: Window,
    pub gamma_range: Option<(f64, f64)>,
    pub grid_step: f64,
    pub refinement_tol: f64,
    pub fit: FitSettings<f64>,
    pub seed: u64,
}

impl EffectiveConfig {
    pub fn new(cfg: &RunConfig, loaded: &Loaded, gamma_range: Option<(f64, f64)>) -> Self {
        EffectiveConfig {
            system: cfg.source.clone(),
            description: loaded.description(),
            rate: loaded.rate.label().to_string(),
            class: cfg.class,
            window: loaded.window,
            gamma_range,
            grid_step: cfg.grid_step,
            refinement_tol: cfg.refinement_tol,
            fit: cfg.fit,
            seed: cfg.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_forms() {
        assert_eq!("30".parse::<WindowSpec>().unwrap().0, Window::symmetric(30));
        assert_eq!("-5, 9".parse::<WindowSpec>().unwrap().0, Window::new(-5, 9).unwrap());
        assert!("9,-5".parse::<WindowSpec>().is_err());
        assert!("x".parse::<WindowSpec>().is_err());
    }

    #[test]
    fn file_values_yield_to_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "# comment\ncorpus = \"ex731\"\nparams = \"ω=2,a=1\"\nwindow = 40\ngrid_step = 0.1\nseed = 7\n",
        )
        .unwrap();
        let args = ConfigArgs {
            config: Some(path),
            grid_step: Some(0.2),
            ..Default::default()
        };
        let cfg = RunConfig::from_args(args).unwrap();
        assert_eq!(cfg.grid_step, 0.2);
        assert_eq!(cfg.window, Some(Window::symmetric(40)));
        assert_eq!(cfg.seed, 7);
        assert!((cfg.refinement_tol - 0.025).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "corpus = \"ex731\"\ngrid = 0.1\n").unwrap();
        let args = ConfigArgs {
            config: Some(path),
            ..Default::default()
        };
        assert!(matches!(RunConfig::from_args(args), Err(CliError::Config(_))));
        let args = ConfigArgs {
            corpus: Some("ex731".into()),
            refinement_tol: Some(-1.0),
            ..Default::default()
        };
        assert!(matches!(RunConfig::from_args(args), Err(CliError::Config(_))));
    }
}
