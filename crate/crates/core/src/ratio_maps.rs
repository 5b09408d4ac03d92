//! Optimal stable and unstable ratio curves across spectral gaps.
//!
//! `st(γ)` is the minimal `α + mθ` of a nonuniform fit on the stable side of
//! the gap's projector, `un(γ)` the maximal `β − mν` on the unstable side,
//! both for the γ-weighted system on the fitter's window. Windowed optima
//! bound the true ones from the feasible side, so every curve records its
//! window and settings.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dichotomy_fit::{FitClass, FitError, FitSettings, Fitter};
use crate::output::sig12;
use crate::pairs::Side;
use crate::scalar::{lit, to_f64, Real};
use crate::spectrum::Gap;
use crate::system::{coordinate_projector, SystemError};
use crate::window::Window;

#[derive(Debug, Error)]
pub enum RatioError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("invalid ratio settings: {0}")]
    Settings(String),
    #[error("no crossing of the {side} threshold in [{lo}, {hi}]")]
    NoCrossing { side: &'static str, lo: f64, hi: f64 },
    #[error("CSV output failed: {0}")]
    Csv(#[from] csv::Error),
}

/// One γ of a ratio curve. Absent values are sides without a projector
/// component (`P = 0` has no `st`, `P = Id` no `un`) or infeasible programs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RatioSample<T> {
    #[serde(with = "crate::serde_ext::float")]
    pub gamma: T,
    #[serde(with = "crate::serde_ext::opt_float", default)]
    pub st: Option<T>,
    #[serde(with = "crate::serde_ext::opt_float", default)]
    pub un: Option<T>,
    pub feasible_st: bool,
    pub feasible_un: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RatioCurve<T> {
    pub gap: Gap<T>,
    pub samples: Vec<RatioSample<T>>,
    pub window: Window,
    pub settings: FitSettings<T>,
    /// Some sample inside the gap failed the nonuniform class.
    pub flagged: bool,
}

impl<T: Real> RatioCurve<T> {
    /// Both curves non-increasing in γ, with `slack` allowed per step.
    pub fn is_monotone(&self, slack: T) -> bool {
        let ok = |vals: Vec<T>| vals.windows(2).all(|w| w[1] <= w[0] + slack);
        ok(self.samples.iter().filter_map(|s| s.st).collect())
            && ok(self.samples.iter().filter_map(|s| s.un).collect())
    }

    /// Writes `gamma,st,un,feasible_st,feasible_un`; absent values are empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), RatioError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["gamma", "st", "un", "feasible_st", "feasible_un"])?;
        let opt = |v: Option<T>| v.map(|x| sig12(to_f64(x))).unwrap_or_default();
        for s in &self.samples {
            w.write_record([
                sig12(to_f64(s.gamma)),
                opt(s.st),
                opt(s.un),
                s.feasible_st.to_string(),
                s.feasible_un.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Ratio values at one γ for the split `stable_indices`.
pub fn ratio_at<T: Real>(
    fitter: &Fitter<T>,
    stable_indices: &[usize],
    gamma: T,
) -> Result<RatioSample<T>, RatioError> {
    let p = coordinate_projector(fitter.system().dim(), stable_indices)?;
    let st = fitter.fit(&p, Side::Stable, FitClass::Nonuniform, gamma)?;
    let un = fitter.fit(&p, Side::Unstable, FitClass::Nonuniform, gamma)?;
    Ok(RatioSample {
        gamma,
        st: st.objective,
        un: un.objective,
        feasible_st: st.feasible,
        feasible_un: un.feasible,
    })
}

/// Ratio curve of `gap` at the given γ values.
pub fn sweep_at<T: Real>(
    fitter: &Fitter<T>,
    gap: &Gap<T>,
    gammas: &[T],
) -> Result<RatioCurve<T>, RatioError> {
    fitter.prepare(std::slice::from_ref(&gap.stable_indices))?;
    let samples: Vec<RatioSample<T>> = gammas
        .par_iter()
        .map(|&g| ratio_at(fitter, &gap.stable_indices, g))
        .collect::<Result<_, _>>()?;
    let flagged = samples
        .iter()
        .any(|s| gap.contains(s.gamma) && !(s.feasible_st && s.feasible_un));
    Ok(RatioCurve {
        gap: gap.clone(),
        samples,
        window: fitter.window(),
        settings: *fitter.settings(),
        flagged,
    })
}

/// Default horizon `(â + ε̂) + 10` for unbounded gaps.
pub fn default_horizon<T: Real>(fitter: &Fitter<T>) -> Result<T, RatioError> {
    let g = fitter.growth()?;
    Ok(g.a_hat + g.eps_hat + lit(10.0))
}

/// Sample positions: uniform over the interior of a bounded gap; for an
/// unbounded side, geometric in the distance from the finite edge out to
/// `|γ| = horizon`.
pub fn sample_points<T: Real>(gap: &Gap<T>, n_samples: usize, horizon: T) -> Vec<T> {
    let n = n_samples;
    let nf: T = lit(n as f64);
    let uniform = |lo: T, hi: T| -> Vec<T> {
        (1..=n)
            .map(|i| lo + (hi - lo) * lit::<T>(i as f64) / (nf + T::one()))
            .collect()
    };
    // Distances D·r^(n−1−i), from D/(4n) up to D.
    let geometric = |edge: T, far: T| -> Vec<T> {
        let span = (far - edge).abs();
        let dir = if far > edge { T::one() } else { -T::one() };
        let ratio = (T::one() / (lit::<T>(4.0) * nf)).powf(T::one() / lit((n - 1).max(1) as f64));
        (0..n)
            .map(|i| edge + dir * span * ratio.powi((n - 1 - i) as i32))
            .collect()
    };
    match (gap.lo.is_finite(), gap.hi.is_finite()) {
        (true, true) => uniform(gap.lo, gap.hi),
        (true, false) => geometric(gap.lo, horizon.max(gap.lo + T::one())),
        (false, true) => {
            let mut v = geometric(gap.hi, (-horizon).min(gap.hi - T::one()));
            v.reverse();
            v
        }
        (false, false) => {
            let h = horizon.max(T::one());
            (0..n)
                .map(|i| -h + lit::<T>(2.0) * h * lit::<T>(i as f64) / lit((n - 1).max(1) as f64))
                .collect()
        }
    }
}

/// `n_samples` ratio samples across `gap`; `horizon` defaults to
/// [`default_horizon`].
pub fn sweep_ratios<T: Real>(
    fitter: &Fitter<T>,
    gap: &Gap<T>,
    n_samples: usize,
    horizon: Option<T>,
) -> Result<RatioCurve<T>, RatioError> {
    if n_samples < 2 {
        return Err(RatioError::Settings(format!(
            "n_samples must be at least 2, got {n_samples}"
        )));
    }
    let horizon = match horizon {
        Some(h) => h,
        None if gap.is_bounded() => T::zero(),
        None => default_horizon(fitter)?,
    };
    sweep_at(fitter, gap, &sample_points(gap, n_samples, horizon))
}

/// γ where the windowed ratio of `side` crosses its floor (`−α_min` for
/// the stable side, `β_min` for the unstable side), by bisection on the
/// nonuniform feasibility of that side.
pub fn boundary_locator<T: Real>(
    fitter: &Fitter<T>,
    stable_indices: &[usize],
    side: Side,
    bracket: (T, T),
    tol: T,
) -> Result<T, RatioError> {
    if !(tol > T::zero()) || !(bracket.0 < bracket.1) {
        return Err(RatioError::Settings(format!(
            "need tol > 0 and an increasing bracket, got tol {tol}, [{}, {}]",
            bracket.0, bracket.1
        )));
    }
    let name = match side {
        Side::Stable => "stable",
        Side::Unstable => "unstable",
        Side::Growth => return Err(RatioError::Settings("growth side has no ratio".into())),
    };
    let p = coordinate_projector(fitter.system().dim(), stable_indices)?;
    let feasible = |g: T| -> Result<bool, RatioError> {
        Ok(fitter.fit(&p, side, FitClass::Nonuniform, g)?.feasible)
    };
    let (mut lo, mut hi) = bracket;
    let f_lo = feasible(lo)?;
    if f_lo == feasible(hi)? {
        return Err(RatioError::NoCrossing {
            side: name,
            lo: to_f64(lo),
            hi: to_f64(hi),
        });
    }
    while hi - lo > tol {
        let mid = (lo + hi) / lit(2.0);
        if feasible(mid)? == f_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / lit(2.0))
}

/// `−st` of `P = Id` at `γ` and `un` of `P = 0` at `−γ`, per horizon entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DivergenceTable<T> {
    pub rows: Vec<DivergenceRow<T>>,
    /// Index of the first entry where `−st` fails to increase strictly.
    pub st_failure: Option<usize>,
    /// Index of the first entry where `un` fails to increase strictly.
    pub un_failure: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DivergenceRow<T> {
    #[serde(with = "crate::serde_ext::float")]
    pub gamma: T,
    #[serde(with = "crate::serde_ext::opt_float", default)]
    pub neg_st: Option<T>,
    #[serde(with = "crate::serde_ext::opt_float", default)]
    pub un: Option<T>,
}

impl<T: Real> DivergenceTable<T> {
    pub fn holds(&self) -> bool {
        self.st_failure.is_none() && self.un_failure.is_none()
    }
}

/// Evaluates `−st_Id(γ)` and `un_0(−γ)` along increasing `horizons`.
pub fn divergence_check<T: Real>(
    fitter: &Fitter<T>,
    horizons: &[T],
) -> Result<DivergenceTable<T>, RatioError> {
    if horizons.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(RatioError::Settings("horizons must increase".into()));
    }
    let d = fitter.system().dim();
    let all: Vec<usize> = (1..=d).collect();
    let id = coordinate_projector(d, &all)?;
    let zero = coordinate_projector(d, &[])?;
    let rows: Vec<DivergenceRow<T>> = horizons
        .iter()
        .map(|&g| {
            let st = fitter.fit(&id, Side::Stable, FitClass::Nonuniform, g)?;
            let un = fitter.fit(&zero, Side::Unstable, FitClass::Nonuniform, -g)?;
            Ok(DivergenceRow {
                gamma: g,
                neg_st: st.objective.map(|v| -v),
                un: un.objective,
            })
        })
        .collect::<Result<_, RatioError>>()?;
    let first_failure = |vals: Vec<Option<T>>| -> Option<usize> {
        (0..vals.len()).find(|&i| match (i.checked_sub(1).map(|j| vals[j]), vals[i]) {
            (_, None) => true,
            (Some(Some(prev)), Some(cur)) => !(cur > prev),
            _ => false,
        })
    };
    Ok(DivergenceTable {
        st_failure: first_failure(rows.iter().map(|r| r.neg_st).collect()),
        un_failure: first_failure(rows.iter().map(|r| r.un).collect()),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::GrowthRate;
    use crate::system::LinearSystem;
    use std::sync::Arc;

    fn autonomous(c: f64) -> LinearSystem<f64> {
        LinearSystem::scalar_log("auto", move |_| c)
            .with_closed_form(Arc::new(move |k, n| vec![c * (k - n) as f64]))
    }

    fn gap(lo: f64, hi: f64, idx: &[usize]) -> Gap<f64> {
        Gap {
            lo,
            hi,
            rank: idx.len(),
            stable_indices: idx.to_vec(),
        }
    }

    fn exact_fitter(c: f64) -> Fitter<f64> {
        Fitter::new(
            &autonomous(c),
            &GrowthRate::exponential(),
            Window::symmetric(30),
            FitSettings::default().with_log_k_cap(0.0),
        )
        .unwrap()
    }

    #[test]
    fn autonomous_ratios_are_lines() {
        let f = exact_fitter(1.0);
        let right = sweep_at(&f, &gap(1.0, f64::INFINITY, &[1]), &[1.5, 2.0, 4.0]).unwrap();
        for s in &right.samples {
            assert!((s.st.unwrap() - (1.0 - s.gamma)).abs() < 1e-12);
            assert_eq!(s.un, None);
            assert!(s.feasible_st && s.feasible_un);
        }
        assert!(!right.flagged && right.is_monotone(0.0));
        let left = sweep_at(&f, &gap(f64::NEG_INFINITY, 1.0, &[]), &[-3.0, 0.0, 0.5]).unwrap();
        for s in &left.samples {
            assert!((s.un.unwrap() - (1.0 - s.gamma)).abs() < 1e-12);
            assert_eq!(s.st, None);
        }
    }

    #[test]
    fn infeasible_sample_in_claimed_gap_flags_the_curve() {
        let f = exact_fitter(1.0);
        let c = sweep_at(&f, &gap(0.0, f64::INFINITY, &[1]), &[0.5, 2.0]).unwrap();
        assert!(c.flagged);
        assert!(!c.samples[0].feasible_st);
    }

    #[test]
    fn sample_points_cover_gaps() {
        let g = gap(1.0, 3.0, &[]);
        assert_eq!(sample_points(&g, 3, 0.0), vec![1.5, 2.0, 2.5]);
        let pts = sample_points(&gap(1.0, f64::INFINITY, &[1]), 5, 11.0);
        assert_eq!(pts.len(), 5);
        assert!((pts[4] - 11.0).abs() < 1e-12 && (pts[0] - 1.5).abs() < 1e-12);
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        let pts = sample_points(&gap(f64::NEG_INFINITY, -5.0, &[]), 4, 15.0);
        assert!((pts[0] + 15.0).abs() < 1e-12);
        assert!(pts.windows(2).all(|w| w[0] < w[1]) && pts[3] < -5.0);
    }

    #[test]
    fn boundary_of_autonomous_system() {
        let f = exact_fitter(0.25);
        let b = boundary_locator(&f, &[1], Side::Stable, (0.25, 2.25), 1e-4).unwrap();
        assert!((b - 0.25).abs() < 2e-3, "{b}");
        let b = boundary_locator(&f, &[], Side::Unstable, (-2.0, 0.25), 1e-4).unwrap();
        assert!((b - 0.25).abs() < 2e-3, "{b}");
        assert!(matches!(
            boundary_locator(&f, &[1], Side::Stable, (1.0, 2.0), 1e-4),
            Err(RatioError::NoCrossing { .. })
        ));
    }

    #[test]
    fn divergence_of_autonomous_zero() {
        let t = divergence_check(&exact_fitter(0.0), &[1.0, 2.0, 4.0]).unwrap();
        assert!(t.holds());
        let neg: Vec<f64> = t.rows.iter().map(|r| r.neg_st.unwrap()).collect();
        assert_eq!(neg, vec![1.0, 2.0, 4.0]);
        let un: Vec<f64> = t.rows.iter().map(|r| r.un.unwrap()).collect();
        assert_eq!(un, vec![1.0, 2.0, 4.0]);
        assert!(divergence_check(&exact_fitter(0.0), &[2.0, 1.0]).is_err());
    }

    #[test]
    fn csv_layout() {
        let f = exact_fitter(1.0);
        let c = sweep_at(&f, &gap(1.0, f64::INFINITY, &[1]), &[2.0]).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "gamma,st,un,feasible_st,feasible_un\n2.00000000000,-1.00000000000,,true,true\n"
        );
    }
}
