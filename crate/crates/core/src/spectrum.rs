//! Dichotomy spectra by γ-grid sweep plus endpoint bisection.
//!
//! Each γ is classified by fitting every candidate coordinate split of the
//! γ-weighted system. Resolvent runs of the grid become spectral gaps, and
//! every member/non-member edge is bisected down to the refinement tolerance.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dichotomy_fit::{candidate_splits, FitClass, FitError, FitSettings, Fitter, SplitFit};
use crate::growth::GrowthRate;
use crate::scalar::{lit, to_f64, Real};
use crate::system::LinearSystem;
use crate::window::Window;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("invalid spectrum settings: {0}")]
    Settings(String),
    #[error("γ = {0} is not in the resolvent")]
    NotInResolvent(f64),
}

/// Which spectrum is estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    Uniform,
    Nonuniform,
    Slow,
    /// Slow class with the unique-projector requirement.
    Upp,
}

impl SpectrumKind {
    pub fn fit_class(self) -> FitClass {
        match self {
            SpectrumKind::Uniform => FitClass::Uniform,
            SpectrumKind::Nonuniform => FitClass::Nonuniform,
            SpectrumKind::Slow | SpectrumKind::Upp => FitClass::Slow,
        }
    }

    /// Whether a resolvent point needs exactly one feasible split.
    fn needs_unique(self) -> bool {
        self != SpectrumKind::Slow
    }
}

impl From<FitClass> for SpectrumKind {
    fn from(c: FitClass) -> Self {
        match c {
            FitClass::Uniform => SpectrumKind::Uniform,
            FitClass::Nonuniform => SpectrumKind::Nonuniform,
            FitClass::Slow => SpectrumKind::Slow,
        }
    }
}

impl fmt::Display for SpectrumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpectrumKind::Uniform => "uniform",
            SpectrumKind::Nonuniform => "nonuniform",
            SpectrumKind::Slow => "slow",
            SpectrumKind::Upp => "upp",
        })
    }
}

impl FromStr for SpectrumKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "upp" => Ok(SpectrumKind::Upp),
            other => other.parse::<FitClass>().map(Into::into).map_err(|_| {
                format!("unknown class {other:?} (uniform|nonuniform|slow|upp)")
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Resolvent,
    /// No split is feasible.
    NoProjector,
    /// Several splits are feasible where uniqueness is required.
    MultipleProjectors,
}

/// Classification of one γ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ResolventVerdict<T> {
    #[serde(with = "crate::serde_ext::float")]
    pub gamma: T,
    pub member: bool,
    pub spectrum: SpectrumKind,
    pub kind: VerdictKind,
    pub projector_rank: Option<usize>,
    /// Accepted split for members.
    pub stable_indices: Option<Vec<usize>>,
    /// Accepted split's margin for members; for non-members the largest
    /// split margin when none is feasible, and 0 when several are.
    #[serde(with = "crate::serde_ext::float")]
    pub margin: T,
    pub feasible_splits: Vec<Vec<usize>>,
    pub fits: Vec<SplitFit<T>>,
}

/// Classifies γ with a prepared fitter.
pub fn resolvent_test_with<T: Real>(
    fitter: &Fitter<T>,
    gamma: T,
    spectrum: SpectrumKind,
) -> Result<ResolventVerdict<T>, SpectrumError> {
    let class = spectrum.fit_class();
    let fits: Vec<SplitFit<T>> = candidate_splits(fitter.system())
        .iter()
        .map(|s| fitter.fit_split(s, class, gamma))
        .collect::<Result<_, _>>()?;
    let feasible: Vec<&SplitFit<T>> = fits.iter().filter(|f| f.feasible).collect();
    let accepted = match (spectrum.needs_unique(), feasible.len()) {
        (_, 0) => None,
        (false, _) | (true, 1) => Some(feasible[0]),
        _ => None,
    };
    let kind = match (accepted, feasible.len()) {
        (Some(_), _) => VerdictKind::Resolvent,
        (None, 0) => VerdictKind::NoProjector,
        _ => VerdictKind::MultipleProjectors,
    };
    let margin = match (accepted, kind) {
        (Some(f), _) => f.margin,
        (None, VerdictKind::NoProjector) => fits
            .iter()
            .map(|f| f.margin)
            .fold(T::neg_infinity(), T::max),
        _ => T::zero(),
    };
    Ok(ResolventVerdict {
        gamma,
        member: accepted.is_some(),
        spectrum,
        kind,
        projector_rank: accepted.map(|f| f.rank),
        stable_indices: accepted.map(|f| f.stable_indices.clone()),
        margin,
        feasible_splits: feasible.iter().map(|f| f.stable_indices.clone()).collect(),
        fits,
    })
}

/// Classifies γ for `sys` on `window`.
pub fn resolvent_test<T: Real>(
    sys: &LinearSystem<T>,
    rate: &GrowthRate<T>,
    gamma: T,
    spectrum: SpectrumKind,
    window: Window,
    settings: FitSettings<T>,
) -> Result<ResolventVerdict<T>, SpectrumError> {
    let fitter = Fitter::new(sys, rate, window, settings)?;
    resolvent_test_with(&fitter, gamma, spectrum)
}

/// Sweep configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SweepSettings<T> {
    pub gamma_lo: T,
    pub gamma_hi: T,
    pub grid_step: T,
    pub refinement_tol: T,
    pub window: Window,
    pub fit: FitSettings<T>,
}

impl<T: Real> SweepSettings<T> {
    /// Settings with `refinement_tol = grid_step/8`.
    pub fn new(gamma_range: (T, T), grid_step: T, window: Window, fit: FitSettings<T>) -> Self {
        SweepSettings {
            gamma_lo: gamma_range.0,
            gamma_hi: gamma_range.1,
            grid_step,
            refinement_tol: grid_step / lit(8.0),
            window,
            fit,
        }
    }

    pub fn with_refinement_tol(mut self, tol: T) -> Self {
        self.refinement_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<(), SpectrumError> {
        let bad = |m: String| Err(SpectrumError::Settings(m));
        if !(self.grid_step > T::zero() && self.grid_step.is_finite()) {
            return bad(format!("grid_step must be positive, got {}", self.grid_step));
        }
        if !(self.refinement_tol > T::zero() && self.refinement_tol.is_finite()) {
            return bad(format!(
                "refinement_tol must be positive, got {}",
                self.refinement_tol
            ));
        }
        if !(self.gamma_lo < self.gamma_hi && self.gamma_lo.is_finite() && self.gamma_hi.is_finite()) {
            return bad(format!(
                "γ range [{}, {}] must be finite and increasing",
                self.gamma_lo, self.gamma_hi
            ));
        }
        let points = to_f64((self.gamma_hi - self.gamma_lo) / self.grid_step);
        if points > 1e6 {
            return bad(format!("γ grid would have {points:.0} points"));
        }
        self.fit.validate()?;
        Ok(())
    }

    /// `γ_j = lo + j·step` up to `hi`.
    pub fn grid(&self) -> Vec<T> {
        let count = to_f64((self.gamma_hi - self.gamma_lo) / self.grid_step + lit(1e-9)).floor() as usize;
        (0..=count)
            .map(|j| self.gamma_lo + lit::<T>(j as f64) * self.grid_step)
            .collect()
    }
}

/// Default γ range `[−(â+ε̂)−1, (â+ε̂)+1]` from a growth fit.
pub fn default_gamma_range<T: Real>(
    sys: &LinearSystem<T>,
    rate: &GrowthRate<T>,
    window: Window,
    fit: FitSettings<T>,
) -> Result<(T, T), SpectrumError> {
    let g = Fitter::new(sys, rate, window, fit)?.growth()?;
    let r = g.a_hat + g.eps_hat + T::one();
    Ok((-r, r))
}

/// One spectral interval; endpoints may be open only for the UPP spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SpectralInterval<T> {
    #[serde(with = "crate::serde_ext::float")]
    pub lo: T,
    #[serde(with = "crate::serde_ext::float")]
    pub hi: T,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl<T: Real> SpectralInterval<T> {
    pub fn contains(&self, g: T) -> bool {
        let left = if self.lo_open { g > self.lo } else { g >= self.lo };
        let right = if self.hi_open { g < self.hi } else { g <= self.hi };
        left && right
    }
}

/// A spectral gap with its projector; unbounded ends are `±inf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Gap<T> {
    #[serde(with = "crate::serde_ext::float")]
    pub lo: T,
    #[serde(with = "crate::serde_ext::float")]
    pub hi: T,
    pub rank: usize,
    /// 1-based stable coordinates of the split accepted at the gap's first sample.
    pub stable_indices: Vec<usize>,
}

impl<T: Real> Gap<T> {
    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    /// Strict interior membership.
    pub fn contains(&self, g: T) -> bool {
        self.lo < g && g < self.hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumFlag {
    /// The spectrum reaches an end of the γ range, or the resolvent is empty.
    MayExceedRange,
    /// The outermost gaps do not have ranks 0 and d.
    RangeTooSmall,
    /// Two gaps around an interval report equal ranks.
    SuspectSpuriousInterval,
    /// More than d intervals.
    TooManyIntervals,
    /// Gap ranks decrease somewhere left to right.
    NonMonotoneRanks,
}

/// One grid point, for plotting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GridPoint<T> {
    #[serde(with = "crate::serde_ext::float")]
    pub gamma: T,
    pub member: bool,
    #[serde(with = "crate::serde_ext::float")]
    pub margin: T,
    pub rank: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SpectrumEstimate<T> {
    pub spectrum: SpectrumKind,
    pub dim: usize,
    pub intervals: Vec<SpectralInterval<T>>,
    pub gaps: Vec<Gap<T>>,
    pub gap_ranks: Vec<usize>,
    pub flags: Vec<SpectrumFlag>,
    pub settings: SweepSettings<T>,
    pub grid: Vec<GridPoint<T>>,
}

impl<T: Real> SpectrumEstimate<T> {
    pub fn has_flag(&self, f: SpectrumFlag) -> bool {
        self.flags.contains(&f)
    }

    /// True when γ lies in some spectral interval.
    pub fn contains(&self, g: T) -> bool {
        self.intervals.iter().any(|i| i.contains(g))
    }
}

/// Compact record of an evaluated γ.
#[derive(Clone, Debug)]
struct Sample<T> {
    gamma: T,
    member: bool,
    kind: VerdictKind,
    rank: Option<usize>,
    feasible: Vec<Vec<usize>>,
}

impl<T: Real> From<&ResolventVerdict<T>> for Sample<T> {
    fn from(v: &ResolventVerdict<T>) -> Self {
        Sample {
            gamma: v.gamma,
            member: v.member,
            kind: v.kind,
            rank: v.projector_rank,
            feasible: v.feasible_splits.clone(),
        }
    }
}

fn disjoint(a: &[Vec<usize>], b: &[Vec<usize>]) -> bool {
    a.iter().all(|s| !b.contains(s))
}

/// Bisects between a member and a non-member sample; returns every
/// evaluated sample.
fn bisect_edge<T: Real>(
    fitter: &Fitter<T>,
    spectrum: SpectrumKind,
    a: &Sample<T>,
    b: &Sample<T>,
    tol: T,
) -> Result<Vec<Sample<T>>, SpectrumError> {
    let mut out = Vec::new();
    let (mut lo, mut hi) = (a.clone(), b.clone());
    while (hi.gamma - lo.gamma).abs() > tol {
        let mid = (lo.gamma + hi.gamma) / lit(2.0);
        let s = Sample::from(&resolvent_test_with(fitter, mid, spectrum)?);
        if s.member == lo.member {
            lo = s.clone();
        } else {
            hi = s.clone();
        }
        out.push(s);
    }
    Ok(out)
}

/// Looks for spectrum between two member samples with disjoint feasible
/// sets. Returns evaluated samples plus a point-interval location if no
/// non-member was found before the interval shrank below `tol`.
fn hidden_search<T: Real>(
    fitter: &Fitter<T>,
    spectrum: SpectrumKind,
    a: &Sample<T>,
    b: &Sample<T>,
    tol: T,
) -> Result<(Vec<Sample<T>>, Option<T>), SpectrumError> {
    let mut out = Vec::new();
    let (mut lo, mut hi) = (a.clone(), b.clone());
    loop {
        if (hi.gamma - lo.gamma).abs() <= tol {
            return Ok((out, Some((lo.gamma + hi.gamma) / lit(2.0))));
        }
        let mid = (lo.gamma + hi.gamma) / lit(2.0);
        let s = Sample::from(&resolvent_test_with(fitter, mid, spectrum)?);
        out.push(s.clone());
        if !s.member {
            let left = bisect_edge(fitter, spectrum, &lo, &s, tol)?;
            let right = bisect_edge(fitter, spectrum, &hi, &s, tol)?;
            out.extend(left);
            out.extend(right);
            return Ok((out, None));
        }
        if disjoint(&lo.feasible, &s.feasible) {
            hi = s;
        } else {
            lo = s;
        }
    }
}

enum EdgeJob<T> {
    Bisect(Sample<T>, Sample<T>),
    Hidden(Sample<T>, Sample<T>),
}

/// Estimates the spectrum of `spectrum` kind on the configured γ range.
pub fn estimate_spectrum<T: Real>(
    sys: &LinearSystem<T>,
    rate: &GrowthRate<T>,
    spectrum: SpectrumKind,
    settings: SweepSettings<T>,
) -> Result<SpectrumEstimate<T>, SpectrumError> {
    settings.validate()?;
    let fitter = Fitter::new(sys, rate, settings.window, settings.fit)?;
    estimate_with(&fitter, spectrum, settings)
}

/// Unique-projector slow spectrum.
pub fn upp_spectrum<T: Real>(
    sys: &LinearSystem<T>,
    rate: &GrowthRate<T>,
    settings: SweepSettings<T>,
) -> Result<SpectrumEstimate<T>, SpectrumError> {
    estimate_spectrum(sys, rate, SpectrumKind::Upp, settings)
}

/// [`estimate_spectrum`] with a prepared fitter (its window and fit
/// settings take precedence).
pub fn estimate_with<T: Real>(
    fitter: &Fitter<T>,
    spectrum: SpectrumKind,
    mut settings: SweepSettings<T>,
) -> Result<SpectrumEstimate<T>, SpectrumError> {
    settings.window = fitter.window();
    settings.fit = *fitter.settings();
    settings.validate()?;
    let d = fitter.system().dim();
    fitter.prepare(&candidate_splits(fitter.system()))?;
    let tol = settings.refinement_tol;
    let verdicts: Vec<ResolventVerdict<T>> = settings
        .grid()
        .par_iter()
        .map(|&g| resolvent_test_with(fitter, g, spectrum))
        .collect::<Result<_, _>>()?;
    let grid: Vec<GridPoint<T>> = verdicts
        .iter()
        .map(|v| GridPoint {
            gamma: v.gamma,
            member: v.member,
            margin: v.margin,
            rank: v.projector_rank,
        })
        .collect();
    let mut samples: Vec<Sample<T>> = verdicts.iter().map(Sample::from).collect();
    drop(verdicts);

    let mut jobs = Vec::new();
    for w in samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.member != b.member {
            let (m, n) = if a.member { (a, b) } else { (b, a) };
            jobs.push(EdgeJob::Bisect(m.clone(), n.clone()));
        } else if a.member && disjoint(&a.feasible, &b.feasible) {
            jobs.push(EdgeJob::Hidden(a.clone(), b.clone()));
        }
    }
    let refined: Vec<(Vec<Sample<T>>, Option<T>)> = jobs
        .par_iter()
        .map(|job| match job {
            EdgeJob::Bisect(m, n) => Ok((bisect_edge(fitter, spectrum, m, n, tol)?, None)),
            EdgeJob::Hidden(a, b) => hidden_search(fitter, spectrum, a, b, tol),
        })
        .collect::<Result<_, SpectrumError>>()?;
    for (extra, point) in refined {
        samples.extend(extra);
        if let Some(g) = point {
            samples.push(Sample {
                gamma: g,
                member: false,
                kind: VerdictKind::NoProjector,
                rank: None,
                feasible: Vec::new(),
            });
        }
    }
    samples.sort_by(|a, b| a.gamma.partial_cmp(&b.gamma).expect("finite γ"));

    // Closed endpoints are reported at the last spectral sample; open ones
    // (unique-projector failures only) at the adjacent resolvent sample.
    let upp = spectrum == SpectrumKind::Upp;
    let open = |s: &Sample<T>| upp && s.kind == VerdictKind::MultipleProjectors;
    let mut intervals: Vec<SpectralInterval<T>> = Vec::new();
    let mut runs = Vec::new();
    let mut i = 0;
    while i < samples.len() {
        let mut j = i;
        while j + 1 < samples.len() && samples[j + 1].member == samples[i].member {
            j += 1;
        }
        runs.push((i, j));
        i = j + 1;
    }
    for &(i, j) in &runs {
        if samples[i].member {
            continue;
        }
        let lo_open = i > 0 && open(&samples[i]);
        let hi_open = j + 1 < samples.len() && open(&samples[j]);
        intervals.push(SpectralInterval {
            lo: if lo_open { samples[i - 1].gamma } else { samples[i].gamma },
            hi: if hi_open { samples[j + 1].gamma } else { samples[j].gamma },
            lo_open,
            hi_open,
        });
    }
    let mut gaps = Vec::new();
    let mut k = 0;
    for &(i, _) in &runs {
        if !samples[i].member {
            k += 1;
            continue;
        }
        gaps.push(Gap {
            lo: if k == 0 { T::neg_infinity() } else { intervals[k - 1].hi },
            hi: if k < intervals.len() { intervals[k].lo } else { T::infinity() },
            rank: samples[i].rank.expect("members carry a rank"),
            stable_indices: samples[i].feasible[0].clone(),
        });
    }

    let mut flags = Vec::new();
    let first = samples.first().expect("nonempty grid");
    let last = samples.last().expect("nonempty grid");
    if !first.member || !last.member || gaps.is_empty() {
        flags.push(SpectrumFlag::MayExceedRange);
    }
    let gap_ranks: Vec<usize> = gaps.iter().map(|g| g.rank).collect();
    if spectrum != SpectrumKind::Slow {
        if (first.member && first.rank != Some(0)) || (last.member && last.rank != Some(d)) {
            flags.push(SpectrumFlag::RangeTooSmall);
        }
        if gap_ranks.windows(2).any(|w| w[0] == w[1]) {
            flags.push(SpectrumFlag::SuspectSpuriousInterval);
        }
        if gap_ranks.windows(2).any(|w| w[0] > w[1]) {
            flags.push(SpectrumFlag::NonMonotoneRanks);
        }
        if intervals.len() > d {
            flags.push(SpectrumFlag::TooManyIntervals);
        }
    }
    Ok(SpectrumEstimate {
        spectrum,
        dim: d,
        intervals,
        gaps,
        gap_ranks,
        flags,
        settings,
        grid,
    })
}

/// Projector rank of the gap containing γ.
pub fn dimension_map<T: Real>(est: &SpectrumEstimate<T>, gamma: T) -> Result<usize, SpectrumError> {
    if est.contains(gamma) {
        return Err(SpectrumError::NotInResolvent(to_f64(gamma)));
    }
    est.gaps
        .iter()
        .find(|g| g.lo <= gamma && gamma <= g.hi)
        .map(|g| g.rank)
        .ok_or(SpectrumError::NotInResolvent(to_f64(gamma)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn ex707() -> LinearSystem<f64> {
        LinearSystem::scalar_log("ex707", |n| -(2 * n + 1) as f64)
            .with_closed_form(Arc::new(|k, n| vec![-((k * k - n * n) as f64)]))
    }

    fn autonomous(c: f64) -> LinearSystem<f64> {
        LinearSystem::scalar_log("auto", move |_| c)
            .with_closed_form(Arc::new(move |k, n| vec![c * (k - n) as f64]))
    }

    fn sweep(range: (f64, f64), w: u32, cap: f64) -> SweepSettings<f64> {
        SweepSettings::new(
            range,
            0.05,
            Window::symmetric(w),
            FitSettings::default().with_log_k_cap(cap),
        )
    }

    #[test]
    fn off_grid_point_spectrum_is_found_between_grid_points() {
        let e = GrowthRate::exponential();
        let est = estimate_spectrum(&autonomous(0.53), &e, SpectrumKind::Uniform, sweep((-2.0, 2.0), 30, 0.0))
            .unwrap();
        assert_eq!(est.intervals.len(), 1, "{est:?}");
        let iv = est.intervals[0];
        assert!((iv.lo - 0.53).abs() <= 0.05 / 8.0 && (iv.hi - 0.53).abs() <= 0.05 / 8.0);
        assert_eq!(est.gap_ranks, vec![0, 1]);
        assert!(est.flags.is_empty(), "{:?}", est.flags);
        assert_eq!(dimension_map(&est, -1.0).unwrap(), 0);
        assert_eq!(dimension_map(&est, 1.0).unwrap(), 1);
        assert!(dimension_map(&est, iv.lo).is_err());
    }

    #[test]
    fn ex707_slow_spectrum_is_empty_but_upp_spectrum_is_open() {
        let q = GrowthRate::quadratic();
        let s = sweep((-3.0, 3.0), 60, 10.0);
        let slow = estimate_spectrum(&ex707(), &q, SpectrumKind::Slow, s).unwrap();
        assert!(slow.intervals.is_empty(), "{:?}", slow.intervals);
        let upp = upp_spectrum(&ex707(), &q, s).unwrap();
        assert_eq!(upp.intervals.len(), 1, "{:?}", upp.intervals);
        let iv = upp.intervals[0];
        assert!(iv.lo_open && iv.hi_open);
        assert!((iv.lo + 1.0).abs() <= 0.05 / 8.0 && (iv.hi - 1.0).abs() <= 0.05 / 8.0, "{iv:?}");
        assert!(!upp.contains(iv.hi));
        assert_eq!(upp.gap_ranks, vec![0, 1]);
    }

    #[test]
    fn verdict_kinds() {
        let q = GrowthRate::quadratic();
        let w = Window::symmetric(40);
        let s = FitSettings::default();
        let v = resolvent_test(&ex707(), &q, 0.0, SpectrumKind::Upp, w, s).unwrap();
        assert_eq!(v.kind, VerdictKind::MultipleProjectors);
        assert_eq!((v.member, v.margin), (false, 0.0));
        let v = resolvent_test(&ex707(), &q, 0.0, SpectrumKind::Slow, w, s).unwrap();
        assert!(v.member && v.margin > 0.0);
        assert_eq!(v.stable_indices, Some(vec![]));
        let e = GrowthRate::exponential();
        let exact = s.with_log_k_cap(0.0);
        let v = resolvent_test(&autonomous(0.0), &e, 0.0, SpectrumKind::Uniform, w, exact).unwrap();
        assert_eq!(v.kind, VerdictKind::NoProjector);
        assert!(v.margin < 0.0);
        // A positive cap lets both splits through at γ = c; two projectors
        // is not a dichotomy certificate.
        let v = resolvent_test(&autonomous(0.0), &e, 0.0, SpectrumKind::Uniform, w, s).unwrap();
        assert_eq!(v.kind, VerdictKind::MultipleProjectors);
    }

    #[test]
    fn range_flags() {
        let e = GrowthRate::exponential();
        // Spectrum {0.5} lies to the right of the range: only rank-0 resolvent.
        let est = estimate_spectrum(&autonomous(0.5), &e, SpectrumKind::Uniform, sweep((-1.0, 0.0), 20, 0.0))
            .unwrap();
        assert!(est.intervals.is_empty());
        assert!(est.has_flag(SpectrumFlag::RangeTooSmall));
        let est = estimate_spectrum(&autonomous(0.5), &e, SpectrumKind::Uniform, sweep((0.45, 0.55), 20, 0.0))
            .unwrap();
        assert!(!est.has_flag(SpectrumFlag::MayExceedRange));
        let est = estimate_spectrum(&autonomous(0.5), &e, SpectrumKind::Uniform, sweep((0.5, 0.6), 20, 0.0))
            .unwrap();
        assert!(est.has_flag(SpectrumFlag::MayExceedRange));
    }

    #[test]
    fn settings_validation() {
        let ok = sweep((-1.0, 1.0), 5, 0.0);
        assert!(ok.validate().is_ok());
        assert_eq!(ok.grid().len(), 41);
        let mut bad = ok;
        bad.grid_step = 0.0;
        assert!(matches!(bad.validate(), Err(SpectrumError::Settings(_))));
        let mut bad = ok;
        bad.gamma_hi = -2.0;
        assert!(bad.validate().is_err());
        assert!(ok.with_refinement_tol(-1.0).validate().is_err());
        assert_eq!("UPP".parse::<SpectrumKind>().unwrap(), SpectrumKind::Upp);
        assert_eq!("slow".parse::<SpectrumKind>().unwrap(), SpectrumKind::Slow);
        assert!("fast".parse::<SpectrumKind>().is_err());
    }
}
