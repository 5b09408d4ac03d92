//! Closed-form example systems with reference spectra.
//!
//! Every scalar entry carries a [`BlockProfile`]: the exact admissible
//! regions of its stable (`P = Id`) and unstable (`P = 0`) constants as
//! functions of γ. Reference spectra of every class, including those of
//! block-diagonal compositions, are computed from profiles by enumerating
//! coordinate splits; published values are stored alongside and must agree.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::growth::{GrowthRate, RateKind};
use crate::linalg::LogScalar;
use crate::scalar::{lit, to_f64, Real};
use crate::spectrum::SpectrumKind;
use crate::system::LinearSystem;

#[derive(Debug, Error, PartialEq)]
pub enum CorpusError {
    #[error("unknown example {0:?}; see `corpus list`")]
    UnknownExample(String),
    #[error("{name} has no parameter {param:?} (parameters: {allowed})")]
    UnknownParameter {
        name: String,
        param: String,
        allowed: String,
    },
    #[error("{name} requires {constraint}; got {params}")]
    Constraint {
        name: String,
        constraint: &'static str,
        params: String,
    },
    #[error("cannot parse parameter {0:?}; expected name=value")]
    BadParameter(String),
    #[error("diagonal_compose needs at least one entry")]
    Empty,
    #[error("{0} has no block profile (only diagonal corpus entries compose)")]
    NoProfile(String),
    #[error("mixed growth rates: {0} and {1}")]
    MixedRates(String, String),
}

/// Where a reference value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Stated for the example in its published source.
    Published,
    /// Computed here from the closed form.
    Computed,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Published => "published",
            Provenance::Computed => "computed",
        })
    }
}

/// Interval with possibly infinite or open ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RefInterval<T> {
    #[serde(with = "crate::serde_ext::float")]
    pub lo: T,
    #[serde(with = "crate::serde_ext::float")]
    pub hi: T,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl<T: Real> RefInterval<T> {
    pub fn closed(lo: T, hi: T) -> Self {
        RefInterval {
            lo,
            hi,
            lo_open: !lo.is_finite(),
            hi_open: !hi.is_finite(),
        }
    }

    pub fn open(lo: T, hi: T) -> Self {
        RefInterval {
            lo,
            hi,
            lo_open: true,
            hi_open: true,
        }
    }

    pub fn contains(&self, g: T) -> bool {
        let left = if self.lo_open { g > self.lo } else { g >= self.lo };
        let right = if self.hi_open { g < self.hi } else { g <= self.hi };
        left && right
    }
}

impl<T: Real> fmt::Display for RefInterval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let end = |x: T| {
            if x == T::infinity() {
                "∞".to_string()
            } else if x == T::neg_infinity() {
                "−∞".to_string()
            } else {
                format!("{}", to_f64(x))
            }
        };
        if self.lo == self.hi && !self.lo_open && !self.hi_open {
            return write!(f, "{{{}}}", end(self.lo));
        }
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_open { '(' } else { '[' },
            end(self.lo),
            end(self.hi),
            if self.hi_open { ')' } else { ']' }
        )
    }
}

/// A finite union of disjoint intervals, in increasing order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RefSet<T> {
    pub intervals: Vec<RefInterval<T>>,
}

impl<T: Real> RefSet<T> {
    pub fn empty() -> Self {
        RefSet { intervals: Vec::new() }
    }

    pub fn real_line() -> Self {
        RefSet {
            intervals: vec![RefInterval::open(T::neg_infinity(), T::infinity())],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, g: T) -> bool {
        self.intervals.iter().any(|i| i.contains(g))
    }
}

impl<T: Real> fmt::Display for RefSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return f.write_str("∅");
        }
        if *self == RefSet::real_line() {
            return f.write_str("ℝ");
        }
        let parts: Vec<String> = self.intervals.iter().map(|i| i.to_string()).collect();
        f.write_str(&parts.join(" ∪ "))
    }
}

/// Reference spectrum of one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Reference<T> {
    pub spectrum: SpectrumKind,
    pub set: RefSet<T>,
    pub provenance: Provenance,
    /// Symbolic form, e.g. `[−ω−3a, −ω+3a]`.
    pub formula: String,
}

/// Exact admissible constants of one scalar coordinate, as thresholds
/// in γ (all relative to the unweighted system):
///
/// - stable: `(α, θ)` is admissible iff `α ≥ st_rate − γ`, `θ ≥ st_theta`
///   and `α + θ ≥ st_joint − γ`;
/// - unstable: `(β, ν)` is admissible iff `β ≤ un_rate − γ`, `ν ≥ un_nu`
///   and `β − ν ≤ un_joint − γ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BlockProfile<T> {
    #[serde(with = "crate::serde_ext::float")]
    pub st_rate: T,
    #[serde(with = "crate::serde_ext::float")]
    pub st_theta: T,
    #[serde(with = "crate::serde_ext::float")]
    pub st_joint: T,
    #[serde(with = "crate::serde_ext::float")]
    pub un_rate: T,
    #[serde(with = "crate::serde_ext::float")]
    pub un_nu: T,
    #[serde(with = "crate::serde_ext::float")]
    pub un_joint: T,
}

impl<T: Real> BlockProfile<T> {
    /// Autonomous `e^c`.
    pub fn autonomous(c: T) -> Self {
        BlockProfile {
            st_rate: c,
            st_theta: T::zero(),
            st_joint: c,
            un_rate: c,
            un_nu: T::zero(),
            un_joint: c,
        }
    }
}

/// γ above which the stable side of `blocks` is admissible in `class`.
fn stable_threshold<T: Real>(blocks: &[&BlockProfile<T>], class: SpectrumKind) -> T {
    if blocks.is_empty() {
        return T::neg_infinity();
    }
    let rate = blocks.iter().map(|b| b.st_rate).fold(T::neg_infinity(), T::max);
    let theta = blocks.iter().map(|b| b.st_theta).fold(T::zero(), T::max);
    let joint = blocks.iter().map(|b| b.st_joint).fold(T::neg_infinity(), T::max);
    match class {
        SpectrumKind::Uniform if theta > T::zero() => T::infinity(),
        SpectrumKind::Uniform => rate.max(joint),
        SpectrumKind::Nonuniform => (rate + theta).max(joint),
        SpectrumKind::Slow | SpectrumKind::Upp => rate,
    }
}

/// γ below which the unstable side of `blocks` is admissible in `class`.
fn unstable_threshold<T: Real>(blocks: &[&BlockProfile<T>], class: SpectrumKind) -> T {
    if blocks.is_empty() {
        return T::infinity();
    }
    let rate = blocks.iter().map(|b| b.un_rate).fold(T::infinity(), T::min);
    let nu = blocks.iter().map(|b| b.un_nu).fold(T::zero(), T::max);
    let joint = blocks.iter().map(|b| b.un_joint).fold(T::infinity(), T::min);
    match class {
        SpectrumKind::Uniform if nu > T::zero() => T::neg_infinity(),
        SpectrumKind::Uniform => rate.min(joint),
        SpectrumKind::Nonuniform => (rate - nu).min(joint),
        SpectrumKind::Slow | SpectrumKind::Upp => rate,
    }
}

/// Exact spectrum of the diagonal system with coordinate `profiles`.
///
/// Each split `S` has the open resolvent interval
/// `(stable_threshold(S), unstable_threshold(Sᶜ))`; γ is resolvent if
/// exactly one split contains it (any split for the slow class).
pub fn profile_spectrum<T: Real>(profiles: &[BlockProfile<T>], class: SpectrumKind) -> RefSet<T> {
    let d = profiles.len();
    let mut windows = Vec::with_capacity(1 << d);
    for mask in 0u32..(1 << d) {
        let (st, un): (Vec<_>, Vec<_>) = (0..d).partition(|&i| mask & (1 << i) != 0);
        let st: Vec<&BlockProfile<T>> = st.into_iter().map(|i| &profiles[i]).collect();
        let un: Vec<&BlockProfile<T>> = un.into_iter().map(|i| &profiles[i]).collect();
        windows.push((stable_threshold(&st, class), unstable_threshold(&un, class)));
    }
    let member = |g: T| {
        let count = windows.iter().filter(|(lo, hi)| *lo < g && g < *hi).count();
        match class {
            SpectrumKind::Slow => count >= 1,
            _ => count == 1,
        }
    };
    let mut cuts: Vec<T> = windows
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .filter(|x| x.is_finite())
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    cuts.dedup();
    // Atoms in order: open segments and the cut points between them.
    let mut atoms: Vec<(T, T, bool)> = Vec::new(); // (lo, hi, is_point)
    let mut prev = T::neg_infinity();
    for &c in &cuts {
        atoms.push((prev, c, false));
        atoms.push((c, c, true));
        prev = c;
    }
    atoms.push((prev, T::infinity(), false));
    let sample = |&(lo, hi, point): &(T, T, bool)| -> T {
        match (point, lo.is_finite(), hi.is_finite()) {
            (true, _, _) => lo,
            (false, true, true) => (lo + hi) / lit(2.0),
            (false, true, false) => lo + T::one(),
            (false, false, true) => hi - T::one(),
            (false, false, false) => T::zero(),
        }
    };
    let mut out: Vec<RefInterval<T>> = Vec::new();
    let mut open_run: Option<RefInterval<T>> = None;
    for atom in &atoms {
        let spectral = !member(sample(atom));
        let (lo, hi, point) = *atom;
        match (&mut open_run, spectral) {
            (Some(run), true) => {
                run.hi = hi;
                run.hi_open = !point;
            }
            (None, true) => {
                open_run = Some(RefInterval {
                    lo,
                    hi,
                    lo_open: !point,
                    hi_open: !point,
                });
            }
            (Some(_), false) => out.push(open_run.take().expect("run")),
            (None, false) => {}
        }
    }
    out.extend(open_run);
    RefSet { intervals: out }
}

/// A corpus entry.
#[derive(Clone)]
pub struct ExampleEntry<T> {
    pub name: String,
    pub params: Vec<(String, T)>,
    pub system: LinearSystem<T>,
    pub rate: GrowthRate<T>,
    pub references: Vec<Reference<T>>,
    /// Per-coordinate profiles (diagonal entries only).
    pub profile: Option<Vec<BlockProfile<T>>>,
    pub notes: Vec<String>,
}

impl<T: Real> fmt::Debug for ExampleEntry<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExampleEntry")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("system", &self.system)
            .field("rate", &self.rate.label())
            .field("references", &self.references)
            .finish()
    }
}

impl<T: Real> ExampleEntry<T> {
    pub fn reference(&self, class: SpectrumKind) -> Option<&Reference<T>> {
        self.references.iter().find(|r| r.spectrum == class)
    }

    pub fn param(&self, name: &str) -> Option<T> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// `name(p=v, …)`.
    pub fn description(&self) -> String {
        if self.params.is_empty() {
            return self.name.clone();
        }
        let ps: Vec<String> = self
            .params
            .iter()
            .map(|(n, v)| format!("{n}={}", to_f64(*v)))
            .collect();
        format!("{}({})", self.name, ps.join(", "))
    }
}

/// Registry metadata for `corpus list`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegistryItem {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static [(&'static str, f64)],
    pub constraint: Option<&'static str>,
    pub rate: RateKind,
}

const REGISTRY: &[RegistryItem] = &[
    RegistryItem {
        name: "ex707",
        summary: "x(n+1) = e^{−2n−1} x(n); slow but not unique-projector under the quadratic rate",
        params: &[],
        constraint: None,
        rate: RateKind::Quadratic,
    },
    RegistryItem {
        name: "ex718",
        summary: "A(n) = e for n < −1, 1/e for n ≥ −1; bounded nontrivial solution",
        params: &[],
        constraint: None,
        rate: RateKind::Exponential,
    },
    RegistryItem {
        name: "ex708",
        summary: "oscillating scalar exp(−ω + a(n+1)cos(n+1) − an cos n − a sin(n+1) + a sin n)",
        params: &[("omega", 2.0), ("a", 0.8)],
        constraint: Some("3a > ω > 2a"),
        rate: RateKind::Exponential,
    },
    RegistryItem {
        name: "ex731",
        summary: "same coefficient as ex708 on the wider range 3a > ω > a",
        params: &[("omega", 2.0), ("a", 1.0)],
        constraint: Some("3a > ω > a"),
        rate: RateKind::Exponential,
    },
    RegistryItem {
        name: "ex735",
        summary: "ex731 with ω replaced by ω − a (its transform by S(n) = e^{−an})",
        params: &[("omega", 2.0), ("a", 1.0)],
        constraint: Some("3a > ω > a"),
        rate: RateKind::Exponential,
    },
    RegistryItem {
        name: "autonomous",
        summary: "x(n+1) = e^c x(n)",
        params: &[("c", 0.0)],
        constraint: None,
        rate: RateKind::Exponential,
    },
];

pub fn registry() -> &'static [RegistryItem] {
    REGISTRY
}

/// Canonical parameter name (`ω` and `omega` are the same).
fn canonical(name: &str) -> &str {
    match name {
        "ω" | "w" => "omega",
        other => other,
    }
}

/// Parses `"ω=2,a=1"`.
pub fn parse_params(s: &str) -> Result<Vec<(String, f64)>, CorpusError> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| CorpusError::BadParameter(p.to_string()))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| CorpusError::BadParameter(p.to_string()))?;
            Ok((canonical(k.trim()).to_string(), v))
        })
        .collect()
}

fn rate_for<T: Real>(kind: RateKind) -> GrowthRate<T> {
    match kind {
        RateKind::Quadratic => GrowthRate::quadratic(),
        RateKind::Polynomial => GrowthRate::polynomial(),
        RateKind::Cubic => GrowthRate::cubic(),
        _ => GrowthRate::exponential(),
    }
}

fn oscillating<T: Real>(label: String, omega: T, a: T) -> LinearSystem<T> {
    let t = |n: i64| -> T { lit(n as f64) };
    LinearSystem::scalar_log(label, move |n| {
        let (n0, n1) = (t(n), t(n + 1));
        -omega + a * n1 * n1.cos() - a * n0 * n0.cos() - a * n1.sin() + a * n0.sin()
    })
    .with_closed_form(Arc::new(move |k, n| {
        let (k, n) = (t(k), t(n));
        vec![-omega * (k - n) + a * k * k.cos() - a * n * n.cos() - a * k.sin() + a * n.sin()]
    }))
}

/// Profile of the oscillating family: nonuniformity `2a` on both sides.
fn oscillating_profile<T: Real>(omega: T, a: T) -> BlockProfile<T> {
    let two_a = a + a;
    BlockProfile {
        st_rate: a - omega,
        st_theta: two_a,
        st_joint: T::neg_infinity(),
        un_rate: -omega - a,
        un_nu: two_a,
        un_joint: T::infinity(),
    }
}

/// Profile of a coefficient that contracts by `e^{-1}` on one half-line
/// and expands by `e` on the other (ex707 under `q`, ex718 under `e^n`).
fn switching_profile<T: Real>() -> BlockProfile<T> {
    let one = T::one();
    BlockProfile {
        st_rate: -one,
        st_theta: T::zero(),
        st_joint: one,
        un_rate: one,
        un_nu: T::zero(),
        un_joint: -one,
    }
}

/// Builds a corpus entry; `params` override the registry defaults.
pub fn get_example<T: Real>(
    name: &str,
    params: &[(String, f64)],
) -> Result<ExampleEntry<T>, CorpusError> {
    let item = REGISTRY
        .iter()
        .find(|r| r.name == name)
        .ok_or_else(|| CorpusError::UnknownExample(name.to_string()))?;
    let mut values: Vec<(String, f64)> = item.params.iter().map(|(n, v)| (n.to_string(), *v)).collect();
    for (k, v) in params {
        let key = canonical(k);
        let slot = values.iter_mut().find(|(n, _)| n == key).ok_or_else(|| {
            CorpusError::UnknownParameter {
                name: name.to_string(),
                param: k.clone(),
                allowed: if item.params.is_empty() {
                    "none".into()
                } else {
                    item.params.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
                },
            }
        })?;
        slot.1 = *v;
    }
    let get = |n: &str| values.iter().find(|(k, _)| k == n).map(|(_, v)| *v).expect("registered");
    let shown = values
        .iter()
        .map(|(n, v)| format!("{n}={v}"))
        .collect::<Vec<_>>()
        .join(", ");
    let guard = |ok: bool| -> Result<(), CorpusError> {
        if ok {
            Ok(())
        } else {
            Err(CorpusError::Constraint {
                name: name.to_string(),
                constraint: item.constraint.expect("guarded entries have a constraint"),
                params: shown.clone(),
            })
        }
    };
    let rate = rate_for::<T>(item.rate);
    let label = if shown.is_empty() {
        name.to_string()
    } else {
        format!("{name}({shown})")
    };
    let published = |class, set, formula: &str| Reference {
        spectrum: class,
        set,
        provenance: Provenance::Published,
        formula: formula.to_string(),
    };
    let (system, profile, mut references, notes): (LinearSystem<T>, BlockProfile<T>, Vec<Reference<T>>, Vec<String>) =
        match name {
            "ex707" => {
                let sys = LinearSystem::scalar_log(label, |n| -lit::<T>((2 * n + 1) as f64))
                    .with_closed_form(Arc::new(|k, n| vec![-lit::<T>((k * k - n * n) as f64)]));
                let one = T::one();
                let refs = vec![
                    published(
                        SpectrumKind::Nonuniform,
                        RefSet { intervals: vec![RefInterval::closed(-one, one)] },
                        "[−1, 1]",
                    ),
                    published(SpectrumKind::Slow, RefSet::empty(), "∅"),
                    published(
                        SpectrumKind::Upp,
                        RefSet { intervals: vec![RefInterval::open(-one, one)] },
                        "(−1, 1)",
                    ),
                ];
                let notes = vec![
                    "log Φ(k,n) = n² − k²".to_string(),
                    "nontrivial solutions are bounded, so USP fails; P = 0 and P = Id both give slow dichotomies for |γ| < 1".to_string(),
                    "uniform reference computed from the closed form: Id is a uniform dichotomy for γ > 1 and P = 0 for γ < −1".to_string(),
                ];
                (sys, switching_profile(), refs, notes)
            }
            "ex718" => {
                let sys = LinearSystem::scalar_log(label, |n| if n < -1 { T::one() } else { -T::one() })
                    .with_closed_form(Arc::new(|k, n| {
                        let f = |m: i64| -> T { lit(if m >= 0 { -m } else { m + 2 } as f64) };
                        vec![f(k) - f(n)]
                    }));
                let notes = vec![
                    "log Φ(k,0) = −k for k ≥ 0 and k + 2 for k ≤ −1".to_string(),
                    "nontrivial solutions are bounded, so USP fails and P = 0, P = Id both fit near γ = 0".to_string(),
                ];
                (sys, switching_profile(), Vec::new(), notes)
            }
            "ex708" | "ex731" | "ex735" => {
                let (omega, a) = (get("omega"), get("a"));
                if name == "ex708" {
                    guard(3.0 * a > omega && omega > 2.0 * a)?;
                } else {
                    guard(3.0 * a > omega && omega > a)?;
                }
                let (om, at): (T, T) = (lit(omega), lit(a));
                let eff = if name == "ex735" { om - at } else { om };
                let sys = oscillating(label, eff, at);
                let three_a = at + at + at;
                let mut refs = Vec::new();
                let mut notes = vec![format!(
                    "log Φ(k,n) = −{w}(k−n) + a·k·cos k − a·n·cos n − a·sin k + a·sin n",
                    w = if name == "ex735" { "(ω−a)" } else { "ω" }
                )];
                match name {
                    "ex731" => {
                        refs.push(published(
                            SpectrumKind::Nonuniform,
                            RefSet { intervals: vec![RefInterval::closed(-om - three_a, -om + three_a)] },
                            "[−ω−3a, −ω+3a]",
                        ));
                        refs.push(published(SpectrumKind::Uniform, RefSet::real_line(), "ℝ"));
                        notes.push("‖Φ(k,n)‖ ≤ e^{2a} e^{(ω+a)|k−n|} e^{2a|n|}".into());
                        notes.push("st(γ) = −ω−γ+3a on (−ω+3a, ∞); un(γ) = −ω−γ−3a on (−∞, −ω−3a)".into());
                    }
                    "ex735" => {
                        refs.push(published(
                            SpectrumKind::Nonuniform,
                            RefSet { intervals: vec![RefInterval::closed(-om - at - at, -om + at + three_a)] },
                            "[−ω−2a, −ω+4a]",
                        ));
                    }
                    _ => {
                        notes.push("has both the unbounded solutions and the unique projector property".into());
                    }
                }
                (sys, oscillating_profile(eff, at), refs, notes)
            }
            "autonomous" => {
                let c: T = lit(get("c"));
                let sys = LinearSystem::scalar_log(label, move |_| c)
                    .with_closed_form(Arc::new(move |k, n| vec![c * lit((k - n) as f64)]));
                (sys, BlockProfile::autonomous(c), Vec::new(), vec!["log Φ(k,n) = c(k−n)".into()])
            }
            _ => unreachable!("registry and constructors agree"),
        };
    add_computed(&mut references, std::slice::from_ref(&profile));
    Ok(ExampleEntry {
        name: name.to_string(),
        params: values.iter().map(|(n, v)| (n.clone(), lit(*v))).collect(),
        system,
        rate,
        references,
        profile: Some(vec![profile]),
        notes,
    })
}

const CLASSES: [SpectrumKind; 4] = [
    SpectrumKind::Uniform,
    SpectrumKind::Nonuniform,
    SpectrumKind::Slow,
    SpectrumKind::Upp,
];

/// Adds profile-computed references for classes without one.
fn add_computed<T: Real>(refs: &mut Vec<Reference<T>>, profiles: &[BlockProfile<T>]) {
    for class in CLASSES {
        if refs.iter().any(|r| r.spectrum == class) {
            continue;
        }
        let set = profile_spectrum(profiles, class);
        refs.push(Reference {
            spectrum: class,
            formula: set.to_string(),
            set,
            provenance: Provenance::Computed,
        });
    }
    refs.sort_by_key(|r| CLASSES.iter().position(|c| *c == r.spectrum));
}

/// Block-diagonal system of diagonal entries sharing one growth rate.
pub fn diagonal_compose<T: Real>(entries: &[ExampleEntry<T>]) -> Result<ExampleEntry<T>, CorpusError> {
    let first = entries.first().ok_or(CorpusError::Empty)?;
    let mut profiles = Vec::new();
    for e in entries {
        if e.rate.kind() != first.rate.kind() || e.rate.label() != first.rate.label() {
            return Err(CorpusError::MixedRates(
                first.rate.label().to_string(),
                e.rate.label().to_string(),
            ));
        }
        let p = e
            .profile
            .as_ref()
            .filter(|_| e.system.is_diagonal())
            .ok_or_else(|| CorpusError::NoProfile(e.name.clone()))?;
        profiles.extend(p.iter().copied());
    }
    let parts: Vec<LinearSystem<T>> = entries.iter().map(|e| e.system.clone()).collect();
    let dim: usize = parts.iter().map(|s| s.dim()).sum();
    let label = format!(
        "compose[{}]",
        entries.iter().map(|e| e.description()).collect::<Vec<_>>().join(", ")
    );
    let diag_parts = parts.clone();
    let mut system = LinearSystem::diagonal_log(label.clone(), dim, move |n| {
        diag_parts
            .iter()
            .flat_map(|s| s.log_diag(n).expect("diagonal parts"))
            .collect::<Vec<LogScalar<T>>>()
    });
    if parts.iter().all(|s| s.closed_form().is_some()) {
        let cfs: Vec<_> = parts.iter().map(|s| s.closed_form().expect("checked").clone()).collect();
        system = system.with_closed_form(Arc::new(move |k, n| cfs.iter().flat_map(|f| f(k, n)).collect()));
    }
    let mut references = Vec::new();
    add_computed(&mut references, &profiles);
    Ok(ExampleEntry {
        name: label,
        params: Vec::new(),
        system,
        rate: first.rate.clone(),
        references,
        profile: Some(profiles),
        notes: vec!["references computed from the block profiles".into()],
    })
}
