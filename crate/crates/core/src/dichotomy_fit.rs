//! Verification and optimal fitting of μ-dichotomy constants on a window,
//! (Nμ,ε)-growth fitting, and the USP/UPP diagnostics.
//!
//! Every fit is a windowed certificate: the constraints range over all pairs
//! of the window, and `log K` is capped so that a finite window cannot absorb
//! everything into the constant.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::growth::GrowthRate;
use crate::lp::{self, Bounds, LpOutcome, Row};
use crate::pairs::{self, ConstraintSet, DiagonalLogs, Side};
use crate::scalar::{lit, to_f64, Real};
use crate::system::{LinearSystem, ProjectorFamily, SystemError, SIGMA_MIN};
use crate::window::Window;

#[derive(Debug, Error)]
pub enum FitError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Growth(#[from] crate::growth::GrowthError),
    #[error("parameters violate the {class} class: {reason}")]
    ClassInvariant { class: FitClass, reason: String },
    #[error("parameter {0} is required for this projector")]
    MissingParameter(&'static str),
    #[error("invalid fit settings: {0}")]
    Settings(String),
    #[error("growth bound infeasible with logK_cap = {cap}; increase the cap")]
    GrowthInfeasible { cap: f64 },
    #[error("{0} diagnostic requires diagonal structure")]
    NotDiagonal(&'static str),
    #[error("projector dimension {got} does not match system dimension {expected}")]
    ProjectorDimension { expected: usize, got: usize },
    #[error("window {0} must contain 0")]
    WindowMissesOrigin(Window),
}

/// Dichotomy class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitClass {
    /// `θ = ν = 0`.
    Uniform,
    /// `α + θ < 0` and `β − ν > 0`.
    Nonuniform,
    /// Only `α < 0 < β`.
    Slow,
}

impl fmt::Display for FitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitClass::Uniform => "uniform",
            FitClass::Nonuniform => "nonuniform",
            FitClass::Slow => "slow",
        })
    }
}

impl FromStr for FitClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(FitClass::Uniform),
            "nonuniform" => Ok(FitClass::Nonuniform),
            "slow" => Ok(FitClass::Slow),
            other => Err(format!("unknown class {other:?} (uniform|nonuniform|slow)")),
        }
    }
}

/// Caps, floors and knobs shared by all fits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSettings<T> {
    pub log_k_cap: T,
    pub theta_cap: T,
    pub alpha_min: T,
    pub beta_min: T,
    /// Weight `m` in `α + m·θ < 0` and `β − m·ν > 0` (1 or 2).
    pub multiplier: u8,
    pub sigma_min: T,
}

impl<T: Real> Default for FitSettings<T> {
    fn default() -> Self {
        FitSettings {
            log_k_cap: lit(10.0),
            theta_cap: lit(100.0),
            alpha_min: lit(1e-3),
            beta_min: lit(1e-3),
            multiplier: 1,
            sigma_min: lit(SIGMA_MIN),
        }
    }
}

impl<T: Real> FitSettings<T> {
    pub fn validate(&self) -> Result<(), FitError> {
        let pos = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(FitError::Settings(format!("{name} must be positive and finite, got {v}")))
            }
        };
        pos("alpha_min", self.alpha_min)?;
        pos("beta_min", self.beta_min)?;
        pos("sigma_min", self.sigma_min)?;
        if !(self.log_k_cap >= T::zero() && self.log_k_cap.is_finite()) {
            return Err(FitError::Settings(format!(
                "logK_cap must be nonnegative and finite, got {}",
                self.log_k_cap
            )));
        }
        if !(self.theta_cap >= T::zero() && self.theta_cap.is_finite()) {
            return Err(FitError::Settings(format!(
                "theta_cap must be nonnegative and finite, got {}",
                self.theta_cap
            )));
        }
        if !matches!(self.multiplier, 1 | 2) {
            return Err(FitError::Settings(format!(
                "multiplier must be 1 or 2, got {}",
                self.multiplier
            )));
        }
        Ok(())
    }

    pub fn with_log_k_cap(mut self, cap: T) -> Self {
        self.log_k_cap = cap;
        self
    }

    fn m(&self) -> T {
        lit(self.multiplier as f64)
    }
}

/// Dichotomy parameters `(α, β, θ, ν, log K)`; absent entries play the role
/// of the asterisk for `P = Id` / `P = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DichotomyParams<T> {
    pub class: FitClass,
    #[serde(with = "crate::serde_ext::opt_float", default)]
    pub alpha: Option<T>,
    #[serde(with = "crate::serde_ext::opt_float", default)]
    pub beta: Option<T>,
    #[serde(with = "crate::serde_ext::opt_float", default)]
    pub theta: Option<T>,
    #[serde(with = "crate::serde_ext::opt_float", default)]
    pub nu: Option<T>,
    #[serde(with = "crate::serde_ext::float")]
    pub log_k: T,
}

impl<T: Real> DichotomyParams<T> {
    pub fn new(
        class: FitClass,
        alpha: Option<T>,
        beta: Option<T>,
        theta: Option<T>,
        nu: Option<T>,
        log_k: T,
    ) -> Self {
        DichotomyParams {
            class,
            alpha,
            beta,
            theta,
            nu,
            log_k,
        }
    }

    /// Stable-only parameters `(α, θ)`.
    pub fn stable(class: FitClass, alpha: T, theta: T, log_k: T) -> Self {
        Self::new(class, Some(alpha), None, Some(theta), None, log_k)
    }

    /// Unstable-only parameters `(β, ν)`.
    pub fn unstable(class: FitClass, beta: T, nu: T, log_k: T) -> Self {
        Self::new(class, None, Some(beta), None, Some(nu), log_k)
    }

    /// Checks the sign and class invariants with weight `multiplier`.
    pub fn check(&self, multiplier: u8) -> Result<(), FitError> {
        let fail = |reason: String| FitError::ClassInvariant {
            class: self.class,
            reason,
        };
        let m: T = lit(multiplier as f64);
        let theta = self.theta.unwrap_or(T::zero());
        let nu = self.nu.unwrap_or(T::zero());
        if let Some(a) = self.alpha {
            if !(a < T::zero()) {
                return Err(fail(format!("α = {a} must be negative")));
            }
        }
        if let Some(b) = self.beta {
            if !(b > T::zero()) {
                return Err(fail(format!("β = {b} must be positive")));
            }
        }
        if theta < T::zero() || nu < T::zero() {
            return Err(fail("θ and ν must be nonnegative".into()));
        }
        if !(self.log_k >= T::zero()) {
            return Err(fail(format!("log K = {} must be nonnegative", self.log_k)));
        }
        match self.class {
            FitClass::Uniform => {
                if theta != T::zero() || nu != T::zero() {
                    return Err(fail("uniform requires θ = ν = 0".into()));
                }
            }
            FitClass::Nonuniform => {
                if let Some(a) = self.alpha {
                    if !(a + m * theta < T::zero()) {
                        return Err(fail(format!(
                            "α + {multiplier}θ = {} must be negative",
                            a + m * theta
                        )));
                    }
                }
                if let Some(b) = self.beta {
                    if !(b - m * nu > T::zero()) {
                        return Err(fail(format!(
                            "β − {multiplier}ν = {} must be positive",
                            b - m * nu
                        )));
                    }
                }
            }
            FitClass::Slow => {}
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitSide {
    Stable,
    Unstable,
    Both,
}

/// Outcome of a fit or a verification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FitReport<T> {
    pub side: FitSide,
    pub class: FitClass,
    #[serde(with = "crate::serde_ext::float")]
    pub gamma: T,
    pub feasible: bool,
    /// Set for feasible fits and for verifications.
    pub params: Option<DichotomyParams<T>>,
    /// `α + mθ` (stable) or `β − mν` (unstable); absent for verifications
    /// and vacuous sides.
    #[serde(with = "crate::serde_ext::opt_float", default)]
    pub objective: Option<T>,
    /// Max over pairs of lhs − rhs in log scale; `−inf` when no pair applies.
    #[serde(with = "crate::serde_ext::float")]
    pub worst_slack: T,
    /// Pair `(k, n)` realizing the worst slack, or the constraint that makes
    /// the program infeasible.
    pub binding: Option<(i64, i64)>,
    pub n_constraints: usize,
    pub n_active: usize,
    pub window: Window,
    pub settings: FitSettings<T>,
}

impl<T: Real> FitReport<T> {
    /// True when the side has no constraints (`P = 0` stable, `P = Id` unstable).
    pub fn is_vacuous(&self) -> bool {
        self.n_constraints == 0 && self.feasible && self.objective.is_none()
    }
}

/// `(a, ε, log K̂)` of an (Nμ,ε)-growth bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit<T> {
    pub a_hat: T,
    pub eps_hat: T,
    pub log_k_hat: T,
    pub window: Window,
    pub log_k_cap: T,
    pub n_constraints: usize,
    pub n_active: usize,
}

/// Result of fitting both sides of one coordinate split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SplitFit<T> {
    /// 1-based stable coordinates.
    pub stable_indices: Vec<usize>,
    pub rank: usize,
    pub stable: FitReport<T>,
    pub unstable: FitReport<T>,
    pub feasible: bool,
    #[serde(with = "crate::serde_ext::float")]
    pub margin: T,
}

type CacheKey = (Vec<bool>, Side);

/// Fits on one `(system, rate, window, settings)` with cached constraint tables.
pub struct Fitter<T> {
    sys: LinearSystem<T>,
    rate: GrowthRate<T>,
    window: Window,
    settings: FitSettings<T>,
    cache: Mutex<HashMap<CacheKey, Arc<ConstraintSet<T>>>>,
}

impl<T: Real> Fitter<T> {
    pub fn new(
        sys: &LinearSystem<T>,
        rate: &GrowthRate<T>,
        window: Window,
        settings: FitSettings<T>,
    ) -> Result<Self, FitError> {
        settings.validate()?;
        sys.ensure_covers(window)?;
        rate.ensure_covers(window)?;
        Ok(Fitter {
            sys: sys.clone(),
            rate: rate.clone(),
            window,
            settings,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn system(&self) -> &LinearSystem<T> {
        &self.sys
    }

    pub fn rate(&self) -> &GrowthRate<T> {
        &self.rate
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn settings(&self) -> &FitSettings<T> {
        &self.settings
    }

    /// Constraint table for `p` on `side`; cached for coordinate projectors.
    pub fn table(
        &self,
        p: &ProjectorFamily<T>,
        side: Side,
    ) -> Result<Arc<ConstraintSet<T>>, FitError> {
        if p.dim() != self.sys.dim() {
            return Err(FitError::ProjectorDimension {
                expected: self.sys.dim(),
                got: p.dim(),
            });
        }
        let key = p.coordinate_mask().map(|m| {
            let m = if side == Side::Growth {
                Vec::new()
            } else {
                m.to_vec()
            };
            (m, side)
        });
        if let Some(key) = &key {
            if let Some(t) = self.cache.lock().expect("poisoned").get(key) {
                return Ok(t.clone());
            }
        }
        let t = Arc::new(pairs::build(
            &self.sys,
            &self.rate,
            p,
            side,
            self.window,
            self.settings.sigma_min,
        )?);
        if let Some(key) = key {
            self.cache
                .lock()
                .expect("poisoned")
                .entry(key)
                .or_insert_with(|| t.clone());
        }
        Ok(t)
    }

    /// Builds every table a sweep over `splits` will need, in parallel.
    pub fn prepare(&self, splits: &[Vec<usize>]) -> Result<(), FitError> {
        use rayon::prelude::*;
        let jobs: Vec<(Vec<usize>, Side)> = splits
            .iter()
            .flat_map(|s| [(s.clone(), Side::Stable), (s.clone(), Side::Unstable)])
            .collect();
        jobs.par_iter()
            .map(|(s, side)| {
                let p = crate::system::coordinate_projector(self.sys.dim(), s)?;
                self.table(&p, *side).map(|_| ())
            })
            .collect::<Result<Vec<()>, FitError>>()?;
        Ok(())
    }

    fn vacuous_report(&self, side: FitSide, class: FitClass, gamma: T) -> FitReport<T> {
        FitReport {
            side,
            class,
            gamma,
            feasible: true,
            params: None,
            objective: None,
            worst_slack: T::neg_infinity(),
            binding: None,
            n_constraints: 0,
            n_active: 0,
            window: self.window,
            settings: self.settings,
        }
    }

    /// Optimal constants on one side for the γ-weighted system.
    ///
    /// Stable: minimize `α + mθ`. Unstable: maximize `β − mν`.
    pub fn fit(
        &self,
        p: &ProjectorFamily<T>,
        side: Side,
        class: FitClass,
        gamma: T,
    ) -> Result<FitReport<T>, FitError> {
        let fit_side = match side {
            Side::Stable => FitSide::Stable,
            Side::Unstable => FitSide::Unstable,
            Side::Growth => {
                return Err(FitError::Settings("use growth() for growth fits".into()))
            }
        };
        let t = self.table(p, side)?;
        if t.is_vacuous() {
            return Ok(self.vacuous_report(fit_side, class, gamma));
        }
        let st = &self.settings;
        let cap = st.log_k_cap;
        let m = st.m();
        let floor = match side {
            Side::Stable => st.alpha_min,
            _ => st.beta_min,
        };
        let w_cap = if class == FitClass::Uniform {
            T::zero()
        } else {
            st.theta_cap
        };
        let rows: Vec<Row<T>> = t
            .active
            .iter()
            .map(|c| Row {
                x: c.x,
                y: c.y,
                r: t.weighted_v(c, gamma) - cap,
            })
            .collect();
        let bounds = Bounds {
            s_lo: None,
            s_hi: Some(-floor),
            w_cap,
            m,
        };
        let mut report = FitReport {
            side: fit_side,
            class,
            gamma,
            feasible: false,
            params: None,
            objective: None,
            worst_slack: T::nan(),
            binding: None,
            n_constraints: t.total,
            n_active: t.active.len(),
            window: self.window,
            settings: *st,
        };
        let (s, w) = match lp::solve(&rows, &bounds) {
            LpOutcome::Optimal { s, w } => (s, w),
            LpOutcome::Unbounded => {
                // Only x = 0 rows constrain; the slope is free to −∞.
                let flat: Vec<Row<T>> = rows.iter().filter(|r| r.x == T::zero()).cloned().collect();
                (T::neg_infinity(), lp::min_weight(&flat, &T::zero()))
            }
            LpOutcome::Infeasible { binding } => {
                let (e, arg) = t.max_excess(gamma, -floor, w_cap);
                report.worst_slack = e - cap;
                report.binding = binding.map(|i| (t.active[i].k, t.active[i].n)).or(arg);
                return Ok(report);
            }
        };
        let (excess, arg) = if s == T::neg_infinity() {
            let mut best = T::neg_infinity();
            let mut arg = None;
            for c in t.active.iter().filter(|c| c.x == T::zero()) {
                let e = t.weighted_v(c, gamma) - w * c.y;
                if e > best || arg.is_none() {
                    best = e;
                    arg = Some((c.k, c.n));
                }
            }
            (best, arg)
        } else {
            t.max_excess(gamma, s, w)
        };
        let log_k = excess.max(T::zero());
        let objective = s + m * w;
        let (params, obj) = match side {
            Side::Stable => (DichotomyParams::stable(class, s, w, log_k), objective),
            _ => (DichotomyParams::unstable(class, -s, w, log_k), -objective),
        };
        report.feasible = match (class, side) {
            (FitClass::Nonuniform, Side::Stable) => obj <= -floor,
            (FitClass::Nonuniform, _) => obj >= floor,
            _ => true,
        };
        report.params = Some(params);
        report.objective = Some(obj);
        report.worst_slack = excess - log_k;
        report.binding = arg;
        Ok(report)
    }

    /// Checks `params` on both sides of `p` for the γ-weighted system.
    pub fn verify(
        &self,
        p: &ProjectorFamily<T>,
        params: &DichotomyParams<T>,
        gamma: T,
    ) -> Result<FitReport<T>, FitError> {
        params.check(self.settings.multiplier)?;
        let mut worst = T::neg_infinity();
        let mut binding = None;
        let mut n_constraints = 0;
        let mut n_active = 0;
        for side in [Side::Stable, Side::Unstable] {
            let t = self.table(p, side)?;
            if t.is_vacuous() {
                continue;
            }
            let (s, w) = match side {
                Side::Stable => (
                    params.alpha.ok_or(FitError::MissingParameter("alpha"))?,
                    params.theta.unwrap_or(T::zero()),
                ),
                _ => (
                    -params.beta.ok_or(FitError::MissingParameter("beta"))?,
                    params.nu.unwrap_or(T::zero()),
                ),
            };
            let (e, arg) = t.max_excess(gamma, s, w);
            if e - params.log_k > worst || binding.is_none() {
                worst = e - params.log_k;
                binding = arg;
            }
            n_constraints += t.total;
            n_active += t.active.len();
        }
        Ok(FitReport {
            side: FitSide::Both,
            class: params.class,
            gamma,
            feasible: worst <= T::zero(),
            params: Some(*params),
            objective: None,
            worst_slack: worst,
            binding,
            n_constraints,
            n_active,
            window: self.window,
            settings: self.settings,
        })
    }

    /// Fits both sides of the coordinate split `stable_indices` (1-based).
    pub fn fit_split(
        &self,
        stable_indices: &[usize],
        class: FitClass,
        gamma: T,
    ) -> Result<SplitFit<T>, FitError> {
        let p = crate::system::coordinate_projector(self.sys.dim(), stable_indices)?;
        let stable = self.fit(&p, Side::Stable, class, gamma)?;
        let unstable = self.fit(&p, Side::Unstable, class, gamma)?;
        let feasible = stable.feasible && unstable.feasible;
        let side_margin = |r: &FitReport<T>, stable_side: bool| -> T {
            if r.is_vacuous() {
                return T::infinity();
            }
            let Some(params) = r.params else {
                return T::neg_infinity();
            };
            match (class, stable_side) {
                (FitClass::Nonuniform, true) => -r.objective.expect("fitted"),
                (FitClass::Nonuniform, false) => r.objective.expect("fitted"),
                (_, true) => -params.alpha.expect("stable"),
                (_, false) => params.beta.expect("unstable"),
            }
        };
        let margin = side_margin(&stable, true).min(side_margin(&unstable, false));
        Ok(SplitFit {
            stable_indices: stable_indices.to_vec(),
            rank: stable_indices.len(),
            stable,
            unstable,
            feasible,
            margin,
        })
    }

    /// Minimal `a + ε` over `log‖Φ(k,n)‖ ≤ log K̂ + a|L(k)−L(n)| + ε·λ(n)`.
    pub fn growth(&self) -> Result<GrowthFit<T>, FitError> {
        let p = ProjectorFamily::identity(self.sys.dim());
        let t = self.table(&p, Side::Growth)?;
        let cap = self.settings.log_k_cap;
        let rows: Vec<Row<T>> = t
            .active
            .iter()
            .map(|c| Row {
                x: c.x,
                y: c.y,
                r: c.v - cap,
            })
            .collect();
        let bounds = Bounds {
            s_lo: Some(T::zero()),
            s_hi: None,
            w_cap: self.settings.theta_cap,
            m: T::one(),
        };
        match lp::solve(&rows, &bounds) {
            LpOutcome::Optimal { s, w } => {
                let (e, _) = t.max_excess(T::zero(), s, w);
                Ok(GrowthFit {
                    a_hat: s,
                    eps_hat: w,
                    log_k_hat: e.max(T::zero()),
                    window: self.window,
                    log_k_cap: cap,
                    n_constraints: t.total,
                    n_active: t.active.len(),
                })
            }
            _ => Err(FitError::GrowthInfeasible { cap: to_f64(cap) }),
        }
    }
}

/// Checks `params` on `window`.
pub fn verify<T: Real>(
    sys: &LinearSystem<T>,
    rate: &GrowthRate<T>,
    p: &ProjectorFamily<T>,
    params: &DichotomyParams<T>,
    window: Window,
    settings: FitSettings<T>,
) -> Result<FitReport<T>, FitError> {
    params.check(settings.multiplier)?;
    Fitter::new(sys, rate, window, settings)?.verify(p, params, T::zero())
}

/// Minimizes `α + mθ` on the stable side of `p`.
pub fn fit_stable<T: Real>(
    sys: &LinearSystem<T>,
    rate: &GrowthRate<T>,
    p: &ProjectorFamily<T>,
    window: Window,
    class: FitClass,
    settings: FitSettings<T>,
) -> Result<FitReport<T>, FitError> {
    Fitter::new(sys, rate, window, settings)?.fit(p, Side::Stable, class, T::zero())
}

/// Maximizes `β − mν` on the unstable side of `p`.
pub fn fit_unstable<T: Real>(
    sys: &LinearSystem<T>,
    rate: &GrowthRate<T>,
    p: &ProjectorFamily<T>,
    window: Window,
    class: FitClass,
    settings: FitSettings<T>,
) -> Result<FitReport<T>, FitError> {
    Fitter::new(sys, rate, window, settings)?.fit(p, Side::Unstable, class, T::zero())
}

/// (Nμ,ε)-growth constants on `window`.
pub fn growth_fit<T: Real>(
    sys: &LinearSystem<T>,
    rate: &GrowthRate<T>,
    window: Window,
    settings: FitSettings<T>,
) -> Result<GrowthFit<T>, FitError> {
    Fitter::new(sys, rate, window, settings)?.growth()
}

/// Candidate stable index sets: every coordinate subset for diagonal
/// systems (by rank, then lexicographically), else only `P = 0` and `P = Id`.
pub fn candidate_splits<T: Real>(sys: &LinearSystem<T>) -> Vec<Vec<usize>> {
    let d = sys.dim();
    if !sys.is_diagonal() || d > 16 {
        return vec![Vec::new(), (1..=d).collect()];
    }
    let mut out: Vec<Vec<usize>> = (0u32..(1 << d))
        .map(|bits| (0..d).filter(|i| bits & (1 << i) != 0).map(|i| i + 1).collect())
        .collect();
    out.sort_by(|a: &Vec<usize>, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    out
}

/// Unbounded-solutions diagnostic for diagonal systems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct UspReport<T> {
    pub window: Window,
    #[serde(with = "crate::serde_ext::float")]
    pub bound_factor: T,
    /// `sup_k log|Φ_ii(k,0)|` per coordinate.
    pub sup_log: Vec<T>,
    /// 1-based directions whose solution stays within the bound.
    pub flagged: Vec<usize>,
}

impl<T> UspReport<T> {
    /// True when no direction is flagged.
    pub fn holds(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Flags coordinate directions whose solution through `e_i` at `n = 0`
/// satisfies `sup_k log‖Φ(k,0)e_i‖ ≤ log(bound_factor)` on the window.
pub fn usp_check<T: Real>(
    sys: &LinearSystem<T>,
    window: Window,
    bound_factor: T,
) -> Result<UspReport<T>, FitError> {
    if !window.contains(0) {
        return Err(FitError::WindowMissesOrigin(window));
    }
    if !(bound_factor > T::zero()) {
        return Err(FitError::Settings("bound_factor must be positive".into()));
    }
    let logs = DiagonalLogs::new(sys, window)?.ok_or(FitError::NotDiagonal("USP"))?;
    let d = sys.dim();
    let mut sup_log = vec![T::neg_infinity(); d];
    for k in window.iter() {
        let vals = logs.all(k, 0, d)?;
        for i in 0..d {
            sup_log[i] = sup_log[i].max(vals[i]);
        }
    }
    let bound = bound_factor.ln();
    let flagged = (0..d).filter(|&i| sup_log[i] <= bound).map(|i| i + 1).collect();
    Ok(UspReport {
        window,
        bound_factor,
        sup_log,
        flagged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UppStatus {
    /// Exactly one coordinate projector is feasible.
    Holds,
    /// Two or more are feasible.
    Violated,
    /// None is feasible; the system has no dichotomy of this class here.
    NoDichotomy,
}

/// Unique-projector diagnostic for diagonal systems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct UppReport<T> {
    #[serde(with = "crate::serde_ext::float")]
    pub gamma: T,
    pub class: FitClass,
    pub window: Window,
    /// Feasible stable index sets (1-based).
    pub feasible: Vec<Vec<usize>>,
    pub status: UppStatus,
}

/// Lists every coordinate projector for which `class` is feasible for the
/// γ-weighted system.
pub fn upp_check<T: Real>(
    sys: &LinearSystem<T>,
    rate: &GrowthRate<T>,
    window: Window,
    class: FitClass,
    gamma: T,
    settings: FitSettings<T>,
) -> Result<UppReport<T>, FitError> {
    if !sys.is_diagonal() {
        return Err(FitError::NotDiagonal("UPP"));
    }
    let fitter = Fitter::new(sys, rate, window, settings)?;
    let mut feasible = Vec::new();
    for split in candidate_splits(sys) {
        if fitter.fit_split(&split, class, gamma)?.feasible {
            feasible.push(split);
        }
    }
    let status = match feasible.len() {
        0 => UppStatus::NoDichotomy,
        1 => UppStatus::Holds,
        _ => UppStatus::Violated,
    };
    Ok(UppReport {
        gamma,
        class,
        window,
        feasible,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::coordinate_projector;

    fn ex707() -> LinearSystem<f64> {
        LinearSystem::scalar_log("ex707", |n| -(2 * n + 1) as f64)
            .with_closed_form(Arc::new(|k, n| vec![-((k * k - n * n) as f64)]))
    }

    fn autonomous(c: f64) -> LinearSystem<f64> {
        LinearSystem::scalar_log("auto", move |_| c)
            .with_closed_form(Arc::new(move |k, n| vec![c * (k - n) as f64]))
    }

    fn id() -> ProjectorFamily<f64> {
        coordinate_projector(1, &[1]).unwrap()
    }

    fn zero() -> ProjectorFamily<f64> {
        coordinate_projector(1, &[]).unwrap()
    }

    #[test]
    fn verify_quadratic_examples() {
        let q = GrowthRate::quadratic();
        let w = Window::new(-20, 20).unwrap();
        let s = FitSettings::default();
        let st = DichotomyParams::stable(FitClass::Slow, -1.0, 2.0, 0.0);
        let r = verify(&ex707(), &q, &id(), &st, w, s).unwrap();
        assert!(r.feasible && r.worst_slack <= 0.0);
        let un = DichotomyParams::unstable(FitClass::Slow, 1.0, 2.0, 0.0);
        assert!(verify(&ex707(), &q, &zero(), &un, w, s).unwrap().feasible);
        let bad = DichotomyParams::stable(FitClass::Nonuniform, -1.0, 2.0, 0.0);
        assert!(matches!(
            verify(&ex707(), &q, &id(), &bad, w, s),
            Err(FitError::ClassInvariant { .. })
        ));
    }

    #[test]
    fn single_point_window() {
        let w = Window::new(3, 3).unwrap();
        let p = DichotomyParams::stable(FitClass::Slow, -1.0, 0.0, 0.0);
        let r = verify(&ex707(), &GrowthRate::exponential(), &id(), &p, w, FitSettings::default())
            .unwrap();
        assert!(r.feasible);
        assert_eq!(r.worst_slack, 0.0);
    }

    #[test]
    fn autonomous_fits_are_exact() {
        let e = GrowthRate::exponential();
        let w = Window::new(-30, 30).unwrap();
        let exact = FitSettings::default().with_log_k_cap(0.0);
        let f = Fitter::new(&autonomous(0.5), &e, w, exact).unwrap();
        let st = f.fit(&id(), Side::Stable, FitClass::Nonuniform, 2.0).unwrap();
        assert!(st.feasible);
        assert_eq!(st.objective, Some(-1.5));
        let p = st.params.unwrap();
        assert_eq!((p.theta, p.log_k), (Some(0.0), 0.0));
        let un = f.fit(&zero(), Side::Unstable, FitClass::Nonuniform, -1.0).unwrap();
        assert_eq!(un.objective, Some(1.5));
        // Inside the spectrum no split works.
        assert!(!f.fit_split(&[1], FitClass::Uniform, 0.5).unwrap().feasible);
        assert!(!f.fit_split(&[], FitClass::Uniform, 0.5).unwrap().feasible);
    }

    #[test]
    fn positive_cap_steepens_by_cap_over_span() {
        // The cap is spent on the longest pair: α = c − γ − cap/(L(hi) − L(lo)).
        let e = GrowthRate::exponential();
        let w = Window::new(-30, 30).unwrap();
        let f = Fitter::new(&autonomous(0.5), &e, w, FitSettings::default()).unwrap();
        let st = f.fit(&id(), Side::Stable, FitClass::Nonuniform, 2.0).unwrap();
        assert!((st.objective.unwrap() - (-1.5 - 10.0 / 60.0)).abs() < 1e-12);
        assert_eq!(st.params.unwrap().log_k, 10.0);
        assert_eq!(st.binding, Some((30, -30)));
    }

    #[test]
    fn ex707_at_minus_one_is_not_stable() {
        let q = GrowthRate::quadratic();
        let w = Window::new(-200, 200).unwrap();
        let f = Fitter::new(&ex707(), &q, w, FitSettings::default()).unwrap();
        let r = f.fit(&id(), Side::Stable, FitClass::Slow, -1.0).unwrap();
        assert!(!r.feasible);
        assert!(r.binding.is_some());
        assert!(r.worst_slack > 0.0);
    }

    #[test]
    fn growth_of_simple_systems() {
        let e = GrowthRate::exponential();
        let w = Window::new(-15, 15).unwrap();
        let exact = FitSettings::default().with_log_k_cap(0.0);
        let g = growth_fit(&autonomous(-0.7), &e, w, exact).unwrap();
        assert!((g.a_hat - 0.7).abs() < 1e-12 && g.eps_hat == 0.0);
        let g = growth_fit(&LinearSystem::identity(2), &e, w, FitSettings::default()).unwrap();
        assert_eq!((g.a_hat, g.eps_hat, g.log_k_hat), (0.0, 0.0, 0.0));
    }

    #[test]
    fn usp_and_upp_on_ex707() {
        let u = usp_check(&ex707(), Window::new(-50, 50).unwrap(), 10.0).unwrap();
        assert_eq!(u.flagged, vec![1]);
        let r = upp_check(
            &ex707(),
            &GrowthRate::quadratic(),
            Window::new(-50, 50).unwrap(),
            FitClass::Slow,
            0.0,
            FitSettings::default(),
        )
        .unwrap();
        assert_eq!(r.status, UppStatus::Violated);
        assert_eq!(r.feasible.len(), 2);
    }

    #[test]
    fn diagnostics_need_diagonal_systems() {
        let dense = LinearSystem::dense("m", 1, |_| crate::linalg::Mat::scalar(2.0));
        assert!(matches!(
            usp_check(&dense, Window::new(-2, 2).unwrap(), 10.0),
            Err(FitError::NotDiagonal(_))
        ));
    }

    #[test]
    fn splits_order() {
        let sys = LinearSystem::<f64>::identity(3);
        let s = candidate_splits(&sys);
        assert_eq!(s.len(), 8);
        assert_eq!(s[0], Vec::<usize>::new());
        assert_eq!(s[1], vec![1]);
        assert_eq!(s[4], vec![1, 2]);
        assert_eq!(s[7], vec![1, 2, 3]);
    }

    #[test]
    fn settings_validation() {
        let s = FitSettings::<f64> { multiplier: 3, ..Default::default() };
        assert!(s.validate().is_err());
        let s = FitSettings::<f64> { alpha_min: 0.0, ..Default::default() };
        assert!(s.validate().is_err());
    }
}
