//! Subcommand implementations. Each writes its files under the output
//! directory and returns a one-line summary for stdout.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use dichotomy::corpus::{get_example, registry, Reference};
use dichotomy::dichotomy_fit::{
    growth_fit, upp_check, usp_check, DichotomyParams, FitClass, FitError, FitReport, Fitter, GrowthFit,
    UppReport, UspReport,
};
use dichotomy::kinematics::{invariance_experiment, transform, KinematicsError, SimilarityMap};
use dichotomy::output::sig12;
use dichotomy::ratio_maps::{sweep_at, sweep_ratios};
use dichotomy::spectrum::{
    default_gamma_range, estimate_with, Gap, SpectralInterval, SpectrumFlag, SpectrumKind, SweepSettings,
};
use dichotomy::system::{coordinate_projector, EvolutionOperator, LinearSystem};
use dichotomy::Window;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{EffectiveConfig, Loaded, RunConfig, SystemSource};
use crate::error::CliError;
use crate::output::OutDir;

fn fitter(cfg: &RunConfig, l: &Loaded) -> Result<Fitter<f64>, CliError> {
    Ok(Fitter::new(&l.system, &l.rate, l.window, cfg.fit)?)
}

fn gamma_range(cfg: &RunConfig, l: &Loaded, extra: &[&LinearSystem<f64>]) -> Result<(f64, f64), CliError> {
    if let Some(r) = cfg.gamma_range {
        return Ok(r);
    }
    let mut r = default_gamma_range(&l.system, &l.rate, l.window, cfg.fit)?;
    for sys in extra {
        let s = default_gamma_range(sys, &l.rate, l.window, cfg.fit)?;
        r = (r.0.min(s.0), r.1.max(s.1));
    }
    Ok(r)
}

fn sweep_settings(cfg: &RunConfig, l: &Loaded, range: (f64, f64)) -> Result<SweepSettings<f64>, CliError> {
    let s = SweepSettings::new(range, cfg.grid_step, l.window, cfg.fit).with_refinement_tol(cfg.refinement_tol);
    s.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(s)
}

fn effective(cfg: &RunConfig, l: &Loaded, range: Option<(f64, f64)>) -> EffectiveConfig {
    let mut e = EffectiveConfig::new(cfg, l, range);
    if let (SystemSource::Corpus { name, .. }, Some(entry)) = (&cfg.source, &l.entry) {
        e.system = SystemSource::Corpus {
            name: name.clone(),
            params: entry.params.clone(),
        };
    }
    e
}

fn show_intervals(iv: &[SpectralInterval<f64>]) -> String {
    if iv.is_empty() {
        return "∅".into();
    }
    iv.iter()
        .map(|i| {
            format!(
                "{}{}, {}{}",
                if i.lo_open { '(' } else { '[' },
                sig12(i.lo),
                sig12(i.hi),
                if i.hi_open { ')' } else { ']' }
            )
        })
        .collect::<Vec<_>>()
        .join(" ∪ ")
}

#[derive(Serialize)]
struct SpectrumOut<'a> {
    system: String,
    spectrum: SpectrumKind,
    dim: usize,
    intervals: &'a [SpectralInterval<f64>],
    gaps: &'a [Gap<f64>],
    gap_ranks: &'a [usize],
    flags: &'a [SpectrumFlag],
    grid_points: usize,
    grid_csv: &'a str,
    reference: Option<&'a Reference<f64>>,
}

pub fn spectrum(cfg: &RunConfig) -> Result<String, CliError> {
    let l = cfg.load()?;
    let out = OutDir::create(&cfg.out)?;
    let range = gamma_range(cfg, &l, &[])?;
    let settings = sweep_settings(cfg, &l, range)?;
    let est = estimate_with(&fitter(cfg, &l)?, cfg.class, settings)?;
    let eff = effective(cfg, &l, Some(range));
    let mut w = out.csv("grid.csv", &eff)?;
    writeln!(w, "gamma,member,margin,rank")?;
    for g in &est.grid {
        let rank = g.rank.map(|r| r.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{}", sig12(g.gamma), g.member, sig12(g.margin), rank)?;
    }
    w.flush()?;
    let res = SpectrumOut {
        system: l.description(),
        spectrum: est.spectrum,
        dim: est.dim,
        intervals: &est.intervals,
        gaps: &est.gaps,
        gap_ranks: &est.gap_ranks,
        flags: &est.flags,
        grid_points: est.grid.len(),
        grid_csv: "grid.csv",
        reference: l.entry.as_ref().and_then(|e| e.reference(cfg.class)),
    };
    let path = out.write_json("spectrum.json", "spectrum", &eff, &res)?;
    let flags = if est.flags.is_empty() {
        String::new()
    } else {
        format!(" flags {:?}", est.flags)
    };
    Ok(format!(
        "{} spectrum of {}: {}{flags} → {}",
        cfg.class,
        l.description(),
        show_intervals(&est.intervals),
        path.display()
    ))
}

#[derive(Args, Debug, Clone)]
pub struct RatioArgs {
    /// 0-based gap index (left to right); all gaps when absent.
    #[arg(long)]
    pub gap: Option<usize>,
    /// Samples per gap.
    #[arg(long, default_value_t = 40)]
    pub samples: usize,
    /// Explicit γ values, e.g. `1.5,2,3,5`, instead of automatic sampling.
    #[arg(long, allow_hyphen_values = true)]
    pub gammas: Option<String>,
    /// Largest |γ| sampled on unbounded gaps; defaults to the growth bound + 10.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Take the gaps from an earlier `spectrum.json` instead of recomputing them.
    #[arg(long)]
    pub spectrum_json: Option<PathBuf>,
}

#[derive(Serialize)]
struct RatioFile {
    index: usize,
    gap: Gap<f64>,
    csv: String,
    samples: usize,
    flagged: bool,
    monotone: bool,
}

#[derive(Serialize)]
struct RatiosOut {
    system: String,
    gaps_from: String,
    files: Vec<RatioFile>,
}

#[derive(Deserialize)]
struct SpectrumDoc {
    result: SpectrumDocResult,
}

#[derive(Deserialize)]
struct SpectrumDocResult {
    gaps: Vec<Gap<f64>>,
}

/// Parses a γ list and returns it sorted and deduplicated.
fn parse_gammas(s: &str) -> Result<Vec<f64>, CliError> {
    let mut v = s
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::Config(format!("bad γ value {v:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

fn gaps_from_json(path: &Path) -> Result<Vec<Gap<f64>>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let doc: SpectrumDoc =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(doc.result.gaps)
}

pub fn ratios(cfg: &RunConfig, args: &RatioArgs) -> Result<String, CliError> {
    let l = cfg.load()?;
    let out = OutDir::create(&cfg.out)?;
    let f = fitter(cfg, &l)?;
    let gammas = args.gammas.as_deref().map(parse_gammas).transpose()?;
    let (gaps, range, source) = match &args.spectrum_json {
        Some(p) => (gaps_from_json(p)?, cfg.gamma_range, p.display().to_string()),
        None => {
            let range = gamma_range(cfg, &l, &[])?;
            let est = estimate_with(&f, SpectrumKind::Nonuniform, sweep_settings(cfg, &l, range)?)?;
            (est.gaps, Some(range), "computed".to_string())
        }
    };
    let chosen: Vec<usize> = match args.gap {
        Some(i) if i < gaps.len() => vec![i],
        Some(i) => {
            return Err(CliError::Config(format!(
                "gap index {i} out of range: the spectrum has {} gaps",
                gaps.len()
            )))
        }
        None => (0..gaps.len()).collect(),
    };
    let eff = effective(cfg, &l, range);
    let mut files = Vec::new();
    for i in chosen {
        let gap = &gaps[i];
        let curve = match &gammas {
            Some(gs) => sweep_at(&f, gap, gs)?,
            None => sweep_ratios(&f, gap, args.samples, args.horizon)?,
        };
        let name = format!("ratios_gap{i}.csv");
        let w = out.csv(&name, &eff)?;
        curve.write_csv(w)?;
        files.push(RatioFile {
            index: i,
            gap: gap.clone(),
            csv: name,
            samples: curve.samples.len(),
            flagged: curve.flagged,
            monotone: curve.is_monotone(1e-9),
        });
    }
    let n = files.len();
    let res = RatiosOut {
        system: l.description(),
        gaps_from: source,
        files,
    };
    let path = out.write_json("ratios.json", "ratios", &eff, &res)?;
    Ok(format!("{n} ratio curve(s) for {} → {}", l.description(), path.display()))
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    /// Parameters as inline JSON or a path to a JSON file, e.g.
    /// `{"class":"slow","projector":"id","alpha":-1,"theta":2,"k":1}`.
    #[arg(long)]
    pub params_json: String,
    /// γ of the weighted system; overrides the JSON's `gamma`.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
enum ProjectorSpec {
    Named(String),
    Indices(Vec<usize>),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct VerifyInput {
    class: FitClass,
    projector: ProjectorSpec,
    alpha: Option<f64>,
    beta: Option<f64>,
    theta: Option<f64>,
    nu: Option<f64>,
    k: Option<f64>,
    log_k: Option<f64>,
    gamma: Option<f64>,
}

#[derive(Serialize)]
struct VerifyOut {
    system: String,
    input: VerifyInput,
    gamma: f64,
    stable_indices: Vec<usize>,
    feasible: bool,
    rejected: Option<String>,
    report: Option<FitReport<f64>>,
}

fn read_verify_input(s: &str) -> Result<VerifyInput, CliError> {
    let text = if s.trim_start().starts_with('{') {
        s.to_string()
    } else {
        std::fs::read_to_string(s).map_err(|e| CliError::Config(format!("cannot read {s}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("params JSON: {e}")))
}

pub fn verify(cfg: &RunConfig, args: &VerifyArgs) -> Result<String, CliError> {
    let l = cfg.load()?;
    let out = OutDir::create(&cfg.out)?;
    let input = read_verify_input(&args.params_json)?;
    let d = l.system.dim();
    let stable_indices = match &input.projector {
        ProjectorSpec::Named(n) if n.eq_ignore_ascii_case("id") => (1..=d).collect(),
        ProjectorSpec::Named(n) if n.eq_ignore_ascii_case("zero") => Vec::new(),
        ProjectorSpec::Named(n) => {
            return Err(CliError::Config(format!("projector must be \"id\", \"zero\" or a list of indices, got {n:?}")))
        }
        ProjectorSpec::Indices(v) => v.clone(),
    };
    let log_k = match (input.k, input.log_k) {
        (Some(_), Some(_)) => return Err(CliError::Config("give k or log_k, not both".into())),
        (Some(k), None) if k >= 1.0 => k.ln(),
        (Some(k), None) => return Err(CliError::Config(format!("K must be at least 1, got {k}"))),
        (None, Some(lk)) => lk,
        (None, None) => 0.0,
    };
    let gamma = args.gamma.or(input.gamma).unwrap_or(0.0);
    let params = DichotomyParams::new(input.class, input.alpha, input.beta, input.theta, input.nu, log_k);
    let p = coordinate_projector(d, &stable_indices)?;
    let (report, rejected) = match fitter(cfg, &l)?.verify(&p, &params, gamma) {
        Ok(r) => (Some(r), None),
        Err(e @ FitError::ClassInvariant { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let feasible = report.as_ref().is_some_and(|r| r.feasible);
    let slack = report.as_ref().map(|r| r.worst_slack);
    let res = VerifyOut {
        system: l.description(),
        input,
        gamma,
        stable_indices,
        feasible,
        rejected: rejected.clone(),
        report,
    };
    let eff = effective(cfg, &l, None);
    let path = out.write_json("verify.json", "verify", &eff, &res)?;
    match (rejected, slack) {
        (Some(why), _) => Err(CliError::Numeric(format!("rejected: {why} ({})", path.display()))),
        (None, Some(s)) if !feasible => Err(CliError::Numeric(format!(
            "infeasible: worst slack {} on {} ({})",
            sig12(s),
            l.window,
            path.display()
        ))),
        _ => Ok(format!("feasible: worst slack {} → {}", sig12(slack.unwrap_or(f64::NEG_INFINITY)), path.display())),
    }
}

#[derive(Args, Debug, Clone)]
pub struct SimilarityArgs {
    /// `identity`, `exp-scaling:SIGMA` for S(n) = e^{σn}·Id, or `csv:PATH`
    /// (same format as a system CSV).
    #[arg(long, allow_hyphen_values = true)]
    pub map: String,
    /// log M in log‖S(n)^{±1}‖ ≤ log M + θ_S·λ(n); default 0.
    #[arg(long)]
    pub log_m: Option<f64>,
    /// θ_S; defaults to |σ| for exp-scaling and 0 otherwise.
    #[arg(long)]
    pub theta_s: Option<f64>,
}

fn similarity_map(args: &SimilarityArgs, l: &Loaded) -> Result<SimilarityMap<f64>, CliError> {
    let d = l.system.dim();
    let (map, theta) = if args.map == "identity" {
        (SimilarityMap::identity(d, &l.rate), 0.0)
    } else if let Some(s) = args.map.strip_prefix("exp-scaling:") {
        let sigma: f64 = s
            .parse()
            .ok()
            .filter(|x: &f64| x.is_finite())
            .ok_or_else(|| CliError::Config(format!("bad σ {s:?}")))?;
        (SimilarityMap::exp_scaling(d, sigma, &l.rate), sigma.abs())
    } else if let Some(p) = args.map.strip_prefix("csv:") {
        let (sys, w) = LinearSystem::from_csv(p)?;
        if !w.contains_window(&Window::new(l.window.lo(), l.window.hi() + 1).expect("window")) {
            return Err(CliError::Config(format!("map CSV covers {w}, need {} plus one step", l.window)));
        }
        (SimilarityMap::from_system(&sys, &l.rate), 0.0)
    } else {
        return Err(CliError::Config(format!(
            "map must be identity, exp-scaling:SIGMA or csv:PATH, got {:?}",
            args.map
        )));
    };
    if map.dim() != d {
        return Err(CliError::Config(format!("map dimension {} ≠ system dimension {d}", map.dim())));
    }
    Ok(map.with_bounds(args.log_m.unwrap_or(0.0), args.theta_s.unwrap_or(theta)))
}

pub fn similarity(cfg: &RunConfig, args: &SimilarityArgs) -> Result<String, CliError> {
    let l = cfg.load()?;
    let out = OutDir::create(&cfg.out)?;
    let s = similarity_map(args, &l)?;
    let b = transform(&l.system, &s, l.window)?;
    let range = gamma_range(cfg, &l, &[&b])?;
    let settings = sweep_settings(cfg, &l, range)?;
    let eff = effective(cfg, &l, Some(range));
    match invariance_experiment(&l.system, &s, &l.rate, cfg.class, settings) {
        Ok(rep) => {
            let path = out.write_json("similarity.json", "similarity", &eff, &rep)?;
            let disp: Vec<String> = rep.diffs.iter().map(|d| sig12(d.displacement)).collect();
            let flags = |f: &[SpectrumFlag]| {
                if f.is_empty() {
                    String::new()
                } else {
                    format!(" {f:?}")
                }
            };
            Ok(format!(
                "{}: A {}{} vs B {}{}; displacements [{}]; non-invariance {} → {}",
                s.label(),
                show_intervals(&rep.spectrum_a.intervals),
                flags(&rep.spectrum_a.flags),
                show_intervals(&rep.spectrum_b.intervals),
                flags(&rep.spectrum_b.flags),
                disp.join(", "),
                if rep.non_invariance_demonstrated { "demonstrated" } else { "not demonstrated" },
                path.display()
            ))
        }
        Err(KinematicsError::Degenerate(report)) => {
            let path = out.write_json("nondegeneracy.json", "similarity", &eff, &report)?;
            Err(CliError::Numeric(format!(
                "S is not weakly nondegenerate on {}: slack {} (S), {} (S⁻¹) → {}",
                report.window,
                sig12(report.slack),
                sig12(report.slack_inv),
                path.display()
            )))
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Args, Debug, Clone)]
pub struct DiagnoseArgs {
    /// USP bound factor: a direction is bounded if sup‖Φ(k,0)e_i‖ ≤ factor.
    #[arg(long, default_value_t = 10.0)]
    pub bound_factor: f64,
    /// Class for the UPP check.
    #[arg(long, default_value = "slow")]
    pub upp_class: String,
    /// γ for the UPP check.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub gamma: f64,
    /// Random ordered triples for the cocycle spot check.
    #[arg(long, default_value_t = 64)]
    pub triples: usize,
}

#[derive(Serialize)]
struct CocycleCheck {
    triples: usize,
    seed: u64,
    max_relative_error: f64,
}

#[derive(Serialize)]
struct DiagnoseOut {
    system: String,
    growth: GrowthFit<f64>,
    usp: Option<UspReport<f64>>,
    usp_holds: Option<bool>,
    upp: Option<UppReport<f64>>,
    skipped: Vec<String>,
    cocycle: CocycleCheck,
}

fn cocycle_spot_check(sys: &LinearSystem<f64>, window: Window, count: usize, seed: u64) -> Result<f64, CliError> {
    let op = EvolutionOperator::new(sys);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    if window.len() < 3 {
        return Ok(worst);
    }
    for _ in 0..count {
        let mut t = [0i64; 3];
        while !(t[0] < t[1] && t[1] < t[2]) {
            for x in t.iter_mut() {
                *x = rng.gen_range(window.lo()..=window.hi());
            }
            t.sort_unstable();
        }
        let (n, m, k) = (t[0], t[1], t[2]);
        let lhs = op.transition(k, m)?.mul(&op.transition(m, n)?);
        worst = worst.max(lhs.relative_distance(&op.transition(k, n)?));
    }
    Ok(worst)
}

pub fn diagnose(cfg: &RunConfig, args: &DiagnoseArgs) -> Result<String, CliError> {
    let l = cfg.load()?;
    let out = OutDir::create(&cfg.out)?;
    let upp_class: FitClass = args.upp_class.parse().map_err(CliError::Config)?;
    if !(args.bound_factor > 0.0) {
        return Err(CliError::Config("bound_factor must be positive".into()));
    }
    let growth = growth_fit(&l.system, &l.rate, l.window, cfg.fit)?;
    let mut skipped = Vec::new();
    let (usp, upp) = if !l.system.is_diagonal() {
        skipped.push("USP and UPP need a diagonal system".to_string());
        (None, None)
    } else if !l.window.contains(0) {
        skipped.push(format!("USP needs a window containing 0, got {}", l.window));
        let upp = upp_check(&l.system, &l.rate, l.window, upp_class, args.gamma, cfg.fit)?;
        (None, Some(upp))
    } else {
        let usp = usp_check(&l.system, l.window, args.bound_factor)?;
        let upp = upp_check(&l.system, &l.rate, l.window, upp_class, args.gamma, cfg.fit)?;
        (Some(usp), Some(upp))
    };
    let cocycle = CocycleCheck {
        triples: args.triples,
        seed: cfg.seed,
        max_relative_error: cocycle_spot_check(&l.system, l.window, args.triples, cfg.seed)?,
    };
    let summary = format!(
        "growth a {} ε {} log K {}; USP {}; UPP {}",
        sig12(growth.a_hat),
        sig12(growth.eps_hat),
        sig12(growth.log_k_hat),
        usp.as_ref().map_or("skipped", |u| if u.holds() { "holds" } else { "violated" }),
        upp.as_ref().map_or("skipped".to_string(), |u| format!("{:?}", u.status).to_lowercase()),
    );
    let res = DiagnoseOut {
        system: l.description(),
        growth,
        usp_holds: usp.as_ref().map(|u| u.holds()),
        usp,
        upp,
        skipped,
        cocycle,
    };
    let eff = effective(cfg, &l, None);
    let path = out.write_json("diagnose.json", "diagnose", &eff, &res)?;
    Ok(format!("{}: {summary} → {}", l.description(), path.display()))
}

pub fn corpus_list() -> String {
    let mut s = String::new();
    for item in registry() {
        let params: Vec<String> = item.params.iter().map(|(n, v)| format!("{n}={v}")).collect();
        s.push_str(&format!(
            "{:<11} rate {:<11} params [{}]{}\n    {}\n",
            item.name,
            item.rate.to_string(),
            params.join(", "),
            item.constraint.map(|c| format!(" requires {c}")).unwrap_or_default(),
            item.summary
        ));
    }
    s
}

pub fn corpus_show(name: &str, params: Option<&str>) -> Result<String, CliError> {
    let ps = dichotomy::corpus::parse_params(params.unwrap_or(""))?;
    let e = get_example::<f64>(name, &ps)?;
    let item = registry().iter().find(|i| i.name == name).expect("registered");
    let mut s = format!("{}\n  {}\n  rate {}, dimension {}\n", e.description(), item.summary, e.rate.label(), e.system.dim());
    if let Some(c) = item.constraint {
        s.push_str(&format!("  requires {c}\n"));
    }
    s.push_str("  reference spectra:\n");
    for r in &e.references {
        s.push_str(&format!(
            "    {:<10} {:<24} {:<10} {}\n",
            r.spectrum.to_string(),
            r.set.to_string(),
            r.provenance.to_string(),
            r.formula
        ));
    }
    for n in &e.notes {
        s.push_str(&format!("  note: {n}\n"));
    }
    Ok(s)
}
