//! Weak kinematic similarity: weakly nondegenerate changes of variables
//! `x = S(n) y`, the transformed system `B(k) = S(k+1)⁻¹ A(k) S(k)`,
//! parameter transport and the spectrum non-invariance experiment.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dichotomy_fit::{DichotomyParams, FitClass, FitError, Fitter};
use crate::growth::GrowthRate;
use crate::linalg::{LogScalar, Scaled};
use crate::pairs::Side;
use crate::scalar::{lit, to_f64, Real};
use crate::spectrum::{estimate_spectrum, SpectrumError, SpectrumEstimate, SpectrumKind, SweepSettings};
use crate::system::{coordinate_projector, Coefficients, LinearSystem, SystemError, SIGMA_MIN};
use crate::window::Window;

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("S({n}) is singular")]
    Singular { n: i64 },
    #[error("S has dimension {map}, system has dimension {system}")]
    DimensionMismatch { map: usize, system: usize },
    #[error("lemma hypothesis requires θ=ν (got θ = {theta}, ν = {nu})")]
    ThetaNuMismatch { theta: f64, nu: f64 },
    #[error("transport needs nonuniform parameters, got {0}")]
    NotNonuniform(FitClass),
    #[error("S is not weakly nondegenerate on {}: slack {:.6} (S), {:.6} (S⁻¹)", .0.window, .0.slack, .0.slack_inv)]
    Degenerate(Box<NondegeneracyReport>),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

type DiagMap<T> = Arc<dyn Fn(i64) -> Vec<LogScalar<T>> + Send + Sync>;
type DenseMap<T> = Arc<dyn Fn(i64) -> Scaled<T> + Send + Sync>;

#[derive(Clone)]
enum MapKind<T> {
    Diagonal(DiagMap<T>),
    Dense(DenseMap<T>),
}

/// `n ↦ S(n)` with claimed bounds `log‖S(n)^{±1}‖ ≤ log M + θ_S·λ(n)`.
#[derive(Clone)]
pub struct SimilarityMap<T> {
    label: String,
    dim: usize,
    map: MapKind<T>,
    pub log_m: T,
    pub theta_s: T,
    pub rate: GrowthRate<T>,
}

impl<T: Real> fmt::Debug for SimilarityMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SimilarityMap")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("diagonal", &self.is_diagonal())
            .field("log_m", &self.log_m)
            .field("theta_s", &self.theta_s)
            .field("rate", &self.rate.label())
            .finish()
    }
}

impl<T: Real> SimilarityMap<T> {
    /// Diagonal map from per-coordinate log scalars.
    pub fn diagonal_log(
        label: impl Into<String>,
        dim: usize,
        rate: &GrowthRate<T>,
        f: impl Fn(i64) -> Vec<LogScalar<T>> + Send + Sync + 'static,
    ) -> Self {
        SimilarityMap {
            label: label.into(),
            dim,
            map: MapKind::Diagonal(Arc::new(f)),
            log_m: T::zero(),
            theta_s: T::zero(),
            rate: rate.clone(),
        }
    }

    /// General map in scaled form.
    pub fn dense_scaled(
        label: impl Into<String>,
        dim: usize,
        rate: &GrowthRate<T>,
        f: impl Fn(i64) -> Scaled<T> + Send + Sync + 'static,
    ) -> Self {
        SimilarityMap {
            label: label.into(),
            dim,
            map: MapKind::Dense(Arc::new(f)),
            log_m: T::zero(),
            theta_s: T::zero(),
            rate: rate.clone(),
        }
    }

    /// `S(n) = Id`.
    pub fn identity(dim: usize, rate: &GrowthRate<T>) -> Self {
        Self::diagonal_log("identity", dim, rate, move |_| {
            vec![LogScalar::positive(T::zero()); dim]
        })
    }

    /// `S(n) = e^{σn}·Id`.
    pub fn exp_scaling(dim: usize, sigma: T, rate: &GrowthRate<T>) -> Self {
        Self::diagonal_log(format!("exp-scaling(σ={sigma})"), dim, rate, move |n| {
            vec![LogScalar::positive(sigma * lit(n as f64)); dim]
        })
    }

    /// Uses the coefficients of `sys` as `S(n)`.
    pub fn from_system(sys: &LinearSystem<T>, rate: &GrowthRate<T>) -> Self {
        match sys.coefficients() {
            Coefficients::Diagonal(f) => {
                let f = f.clone();
                Self::diagonal_log(sys.label(), sys.dim(), rate, move |n| f(n))
            }
            Coefficients::Dense(f) => {
                let f = f.clone();
                Self::dense_scaled(sys.label(), sys.dim(), rate, move |n| f(n))
            }
        }
    }

    pub fn with_bounds(mut self, log_m: T, theta_s: T) -> Self {
        self.log_m = log_m;
        self.theta_s = theta_s;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.map, MapKind::Diagonal(_))
    }

    /// `S(n)` in scaled form.
    pub fn at(&self, n: i64) -> Scaled<T> {
        match &self.map {
            MapKind::Diagonal(f) => crate::linalg::scaled_diag(&f(n)),
            MapKind::Dense(f) => f(n),
        }
    }

    /// `S(n)⁻¹`.
    pub fn inverse_at(&self, n: i64) -> Result<Scaled<T>, KinematicsError> {
        match &self.map {
            MapKind::Diagonal(f) => {
                let d = f(n);
                if d.iter().any(|e| e.is_zero()) {
                    return Err(KinematicsError::Singular { n });
                }
                Ok(crate::linalg::scaled_diag(
                    &d.into_iter().map(LogScalar::recip).collect::<Vec<_>>(),
                ))
            }
            MapKind::Dense(f) => {
                let s = f(n);
                if s.is_zero() || s.mat.min_singular_value() < lit(SIGMA_MIN) {
                    return Err(KinematicsError::Singular { n });
                }
                s.inverse().ok_or(KinematicsError::Singular { n })
            }
        }
    }

    /// `n ↦ S(n)⁻¹` with the same claimed bounds.
    pub fn inverse(&self) -> SimilarityMap<T> {
        let map = match &self.map {
            MapKind::Diagonal(f) => {
                let f = f.clone();
                MapKind::Diagonal(Arc::new(move |n| f(n).into_iter().map(LogScalar::recip).collect()))
            }
            MapKind::Dense(f) => {
                let f = f.clone();
                let d = self.dim;
                MapKind::Dense(Arc::new(move |n| {
                    f(n).inverse().unwrap_or_else(|| {
                        Scaled::new(crate::linalg::Mat::zeros(d, d), T::nan())
                    })
                }))
            }
        };
        SimilarityMap {
            label: format!("({})⁻¹", self.label),
            dim: self.dim,
            map,
            log_m: self.log_m,
            theta_s: self.theta_s,
            rate: self.rate.clone(),
        }
    }
}

/// Worst slacks of the two nondegeneracy bounds over a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    pub window: Window,
    pub log_m: f64,
    pub theta_s: f64,
    /// `max_n log‖S(n)‖ − log M − θ_S·λ(n)`.
    #[serde(with = "crate::serde_ext::float")]
    pub slack: f64,
    pub binding: i64,
    /// Same for `S(n)⁻¹`.
    #[serde(with = "crate::serde_ext::float")]
    pub slack_inv: f64,
    pub binding_inv: i64,
    pub passes: bool,
}

/// Evaluates both bounds of `s` on `window`.
pub fn check_weakly_nondegenerate<T: Real>(
    s: &SimilarityMap<T>,
    window: Window,
) -> Result<NondegeneracyReport, KinematicsError> {
    s.rate.ensure_covers(window).map_err(SystemError::from)?;
    let (mut slack, mut binding) = (T::neg_infinity(), window.lo());
    let (mut slack_inv, mut binding_inv) = (T::neg_infinity(), window.lo());
    for n in window.iter() {
        let bound = s.log_m + s.theta_s * s.rate.weight(n);
        let e = s.at(n).log_norm() - bound;
        if e > slack {
            slack = e;
            binding = n;
        }
        let e = s.inverse_at(n)?.log_norm() - bound;
        if e > slack_inv {
            slack_inv = e;
            binding_inv = n;
        }
    }
    Ok(NondegeneracyReport {
        window,
        log_m: to_f64(s.log_m),
        theta_s: to_f64(s.theta_s),
        slack: to_f64(slack),
        binding,
        slack_inv: to_f64(slack_inv),
        binding_inv,
        passes: slack <= T::zero() && slack_inv <= T::zero(),
    })
}

/// `B(k) = S(k+1)⁻¹ A(k) S(k)`, defined on `window` (`S` must be invertible
/// on `[lo, hi + 1]`). Diagonal pairs stay diagonal and keep a closed form.
pub fn transform<T: Real>(
    sys: &LinearSystem<T>,
    s: &SimilarityMap<T>,
    window: Window,
) -> Result<LinearSystem<T>, KinematicsError> {
    if s.dim != sys.dim() {
        return Err(KinematicsError::DimensionMismatch {
            map: s.dim,
            system: sys.dim(),
        });
    }
    sys.ensure_covers(window)?;
    for n in window.lo()..=window.hi() + 1 {
        s.inverse_at(n)?;
    }
    let label = format!("{}∘{}", sys.label(), s.label);
    let d = sys.dim();
    let out = match (sys.coefficients(), &s.map) {
        (Coefficients::Diagonal(a), MapKind::Diagonal(sf)) => {
            let (a, sf_step) = (a.clone(), sf.clone());
            let mut b = LinearSystem::diagonal_log(label, d, move |k| {
                let sf = &sf_step;
                let (s1, s0) = (sf(k + 1), sf(k));
                a(k).into_iter()
                    .zip(s1.into_iter().zip(s0))
                    .map(|(ak, (s1, s0))| s1.recip().mul(ak).mul(s0))
                    .collect()
            });
            if let Some(cf) = sys.closed_form() {
                let (cf, sf) = (cf.clone(), sf.clone());
                b = b.with_closed_form(Arc::new(move |k, n| {
                    cf(k, n)
                        .into_iter()
                        .zip(sf(k).into_iter().zip(sf(n)))
                        .map(|(v, (sk, sn))| v - sk.log_abs + sn.log_abs)
                        .collect()
                }));
            }
            b
        }
        _ => {
            let a = sys.clone();
            let s = s.clone();
            LinearSystem::dense_scaled(label, d, move |k| {
                let inv = s.inverse_at(k + 1).unwrap_or_else(|_| {
                    Scaled::new(crate::linalg::Mat::zeros(d, d), T::nan())
                });
                inv.mul(&a.coefficient(k)).mul(&s.at(k))
            })
        }
    };
    Ok(out
        .with_invertible(sys.is_invertible())
        .with_domain(window))
}

/// Result of transporting dichotomy parameters through `S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", tag = "status", rename_all = "snake_case")]
pub enum Transport<T> {
    Feasible { params: DichotomyParams<T> },
    /// `min{−α, β} ≤ 4θ`.
    Infeasible {
        #[serde(with = "crate::serde_ext::float")]
        margin: T,
        #[serde(with = "crate::serde_ext::float")]
        required: T,
    },
}

impl<T: Real> Transport<T> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Transport::Feasible { .. })
    }
}

/// Transports nonuniform parameters `(α, β, θ, θ)` through a map with
/// bounds `(log M, θ_S)`: if `min{−α, β} > 4θ*` with `θ* = max(θ, θ_S)`,
/// the transformed system has `(α+θ*, β−θ*, 3θ*, 3θ*)` and
/// `log K' = log K + 2 log M`. Absent sides are ignored.
pub fn transported_params<T: Real>(
    params: &DichotomyParams<T>,
    theta_s: T,
    log_m: T,
) -> Result<Transport<T>, KinematicsError> {
    if params.class != FitClass::Nonuniform {
        return Err(KinematicsError::NotNonuniform(params.class));
    }
    let theta = match (params.theta, params.nu) {
        (Some(t), Some(v)) if t != v => {
            return Err(KinematicsError::ThetaNuMismatch {
                theta: to_f64(t),
                nu: to_f64(v),
            })
        }
        (Some(t), _) | (None, Some(t)) => t,
        (None, None) => T::zero(),
    };
    let th = theta.max(theta_s);
    let margin = [params.alpha.map(|a| -a), params.beta]
        .into_iter()
        .flatten()
        .fold(T::infinity(), T::min);
    let required = lit::<T>(4.0) * th;
    if !(margin > required) {
        return Ok(Transport::Infeasible { margin, required });
    }
    let three = lit::<T>(3.0) * th;
    Ok(Transport::Feasible {
        params: DichotomyParams::new(
            FitClass::Nonuniform,
            params.alpha.map(|a| a + th),
            params.beta.map(|b| b - th),
            params.alpha.map(|_| three),
            params.beta.map(|_| three),
            params.log_k + lit::<T>(2.0) * log_m,
        ),
    })
}

/// Outcome of the near-spectrum transport check at one γ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BreakdownPoint<T> {
    #[serde(with = "crate::serde_ext::float")]
    pub gamma: T,
    /// Fitted nonuniform parameters with `θ = ν = max(θ̂, ν̂)`; absent if
    /// γ is not in the nonuniform resolvent for this split.
    pub params: Option<DichotomyParams<T>>,
    pub transport: Option<Transport<T>>,
    /// The transport condition fails (or there is nothing to transport).
    pub breaks_down: bool,
}

/// Fits the γ-weighted system on `stable_indices` and tries to transport
/// the result through a map with bounds `(log M, θ_S)`.
pub fn breakdown_check<T: Real>(
    fitter: &Fitter<T>,
    stable_indices: &[usize],
    gamma: T,
    theta_s: T,
    log_m: T,
) -> Result<BreakdownPoint<T>, KinematicsError> {
    let p = coordinate_projector(fitter.system().dim(), stable_indices)?;
    let st = fitter.fit(&p, Side::Stable, FitClass::Nonuniform, gamma)?;
    let un = fitter.fit(&p, Side::Unstable, FitClass::Nonuniform, gamma)?;
    if !(st.feasible && un.feasible) {
        return Ok(BreakdownPoint {
            gamma,
            params: None,
            transport: None,
            breaks_down: true,
        });
    }
    let sp = st.params;
    let up = un.params;
    let theta = [sp.and_then(|p| p.theta), up.and_then(|p| p.nu)]
        .into_iter()
        .flatten()
        .fold(T::zero(), T::max);
    let log_k = [sp.map(|p| p.log_k), up.map(|p| p.log_k)]
        .into_iter()
        .flatten()
        .fold(T::zero(), T::max);
    let alpha = sp.and_then(|p| p.alpha);
    let beta = up.and_then(|p| p.beta);
    let params = DichotomyParams::new(
        FitClass::Nonuniform,
        alpha,
        beta,
        alpha.map(|_| theta),
        beta.map(|_| theta),
        log_k,
    );
    let transport = transported_params(&params, theta_s, log_m)?;
    Ok(BreakdownPoint {
        gamma,
        breaks_down: !transport.is_feasible(),
        params: Some(params),
        transport: Some(transport),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Lo,
    Hi,
}

/// Displacement of one interval endpoint between the two spectra.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointDiff {
    pub interval: usize,
    pub endpoint: Endpoint,
    pub a: f64,
    pub b: f64,
    /// `b − a` rounded to a multiple of the refinement tolerance.
    pub displacement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct InvarianceReport<T> {
    pub map: String,
    pub nondegeneracy: NondegeneracyReport,
    pub spectrum_a: SpectrumEstimate<T>,
    pub spectrum_b: SpectrumEstimate<T>,
    pub diffs: Vec<EndpointDiff>,
    pub interval_counts_match: bool,
    /// Some endpoint moved by more than 3 refinement tolerances, or the
    /// interval counts differ.
    pub non_invariance_demonstrated: bool,
}

/// Estimates the spectrum of `sys_a` and of its transform by `s` with the
/// same settings and compares endpoints.
pub fn invariance_experiment<T: Real>(
    sys_a: &LinearSystem<T>,
    s: &SimilarityMap<T>,
    rate: &GrowthRate<T>,
    spectrum: SpectrumKind,
    settings: SweepSettings<T>,
) -> Result<InvarianceReport<T>, KinematicsError> {
    let window = settings.window;
    let check = check_weakly_nondegenerate(s, window)?;
    if !check.passes {
        return Err(KinematicsError::Degenerate(Box::new(check)));
    }
    let sys_b = transform(sys_a, s, window)?;
    let (a, b) = rayon::join(
        || estimate_spectrum(sys_a, rate, spectrum, settings),
        || estimate_spectrum(&sys_b, rate, spectrum, settings),
    );
    let (a, b) = (a?, b?);
    let tol = to_f64(settings.refinement_tol);
    let quantize = |x: f64| (x / tol).round() * tol;
    let mut diffs = Vec::new();
    for (i, (ia, ib)) in a.intervals.iter().zip(&b.intervals).enumerate() {
        for (endpoint, ea, eb) in [
            (Endpoint::Lo, ia.lo, ib.lo),
            (Endpoint::Hi, ia.hi, ib.hi),
        ] {
            let (ea, eb) = (to_f64(ea), to_f64(eb));
            diffs.push(EndpointDiff {
                interval: i,
                endpoint,
                a: ea,
                b: eb,
                displacement: quantize(eb - ea),
            });
        }
    }
    let counts_match = a.intervals.len() == b.intervals.len();
    let moved = diffs.iter().any(|d| d.displacement.abs() > 3.0 * tol);
    Ok(InvarianceReport {
        map: s.label.clone(),
        nondegeneracy: check,
        spectrum_a: a,
        spectrum_b: b,
        diffs,
        interval_counts_match: counts_match,
        non_invariance_demonstrated: moved || !counts_match,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dichotomy_fit::FitSettings;
    use crate::system::EvolutionOperator;

    fn autonomous(c: f64) -> LinearSystem<f64> {
        LinearSystem::scalar_log("auto", move |_| c)
            .with_closed_form(Arc::new(move |k, n| vec![c * (k - n) as f64]))
    }

    fn exp() -> GrowthRate<f64> {
        GrowthRate::exponential()
    }

    #[test]
    fn nondegeneracy_of_exp_scalings() {
        let w = Window::symmetric(100);
        let s = SimilarityMap::exp_scaling(1, -1.0, &exp()).with_bounds(0.0, 2.0);
        let r = check_weakly_nondegenerate(&s, w).unwrap();
        assert!(r.passes);
        assert_eq!((r.slack, r.slack_inv), (0.0, 0.0));
        let id = check_weakly_nondegenerate(&SimilarityMap::identity(2, &exp()), w).unwrap();
        assert!(id.passes && id.slack == 0.0 && id.slack_inv == 0.0);
        let weak = s.with_bounds(0.0, 0.5);
        let r = check_weakly_nondegenerate(&weak, w).unwrap();
        assert!(!r.passes);
        assert_eq!((r.binding, r.binding_inv), (-100, 100));
        assert_eq!(r.slack, 50.0);
    }

    #[test]
    fn singular_map_is_reported() {
        let s = SimilarityMap::diagonal_log("s", 1, &exp(), |n| {
            vec![if n == 3 { LogScalar::from_value(0.0) } else { LogScalar::positive(0.0) }]
        });
        assert!(matches!(
            check_weakly_nondegenerate(&s, Window::symmetric(5)),
            Err(KinematicsError::Singular { n: 3 })
        ));
        assert!(matches!(
            transform(&autonomous(0.0), &s, Window::new(-5, 2).unwrap()),
            Err(KinematicsError::Singular { n: 3 })
        ));
    }

    #[test]
    fn autonomous_exp_scaling_shifts_the_exponent() {
        let w = Window::symmetric(20);
        let s = SimilarityMap::exp_scaling(1, 0.3, &exp());
        let b = transform(&autonomous(1.0), &s, w).unwrap();
        for k in [-20, 0, 7, 20] {
            assert!((b.log_diag(k).unwrap()[0].log_abs - 0.7).abs() < 1e-12);
        }
        let cf = b.closed_form().unwrap();
        assert!((cf(5, -3)[0] - 0.7 * 8.0).abs() < 1e-12);
        let same = transform(&autonomous(1.0), &SimilarityMap::identity(1, &exp()), w).unwrap();
        assert_eq!(same.log_diag(4).unwrap()[0].log_abs, 1.0);
    }

    #[test]
    fn dense_conjugacy() {
        use crate::linalg::Mat;
        let w = Window::symmetric(6);
        let a = LinearSystem::dense("rot", 2, |n| {
            let t = 0.3 * n as f64;
            Mat::from_rows(&[vec![t.cos(), -t.sin()], vec![t.sin(), 2.0 * t.cos() + 3.0]])
        });
        let s = SimilarityMap::dense_scaled("shear", 2, &exp(), |n| {
            Scaled::from_dense(Mat::from_rows(&[vec![1.0, 0.1 * n as f64], vec![0.0, 2.0]]))
        });
        let b = transform(&a, &s, w).unwrap();
        let (pa, pb) = (EvolutionOperator::new(&a), EvolutionOperator::new(&b));
        for (k, n) in [(3, -2), (6, -6), (0, 0), (-1, -4)] {
            let lhs = pa.transition(k, n).unwrap().mul(&s.at(n));
            let rhs = s.at(k).mul(&pb.transition(k, n).unwrap());
            assert!(lhs.relative_distance(&rhs) < 1e-9, "({k},{n})");
        }
    }

    #[test]
    fn lemma_transport_examples() {
        let p = |a, b, t| DichotomyParams::new(FitClass::Nonuniform, Some(a), Some(b), Some(t), Some(t), 0.0);
        let got = transported_params(&p(-5.0, 5.0, 1.0), 1.0, 0.0).unwrap();
        assert_eq!(got, Transport::Feasible { params: p(-4.0, 4.0, 3.0) });
        assert_eq!(
            transported_params(&p(-3.0, 3.0, 1.0), 1.0, 0.0).unwrap(),
            Transport::Infeasible { margin: 3.0, required: 4.0 }
        );
        let same = transported_params(&p(-5.0, 5.0, 0.0), 0.0, 0.0).unwrap();
        assert_eq!(same, Transport::Feasible { params: p(-5.0, 5.0, 0.0) });
        let mut bad = p(-5.0, 5.0, 1.0);
        bad.nu = Some(2.0);
        assert!(matches!(
            transported_params(&bad, 1.0, 0.0),
            Err(KinematicsError::ThetaNuMismatch { .. })
        ));
        let slow = DichotomyParams::stable(FitClass::Slow, -5.0, 1.0, 0.0);
        assert!(transported_params(&slow, 1.0, 0.0).is_err());
        // K picks up M on both sides.
        if let Transport::Feasible { params } = transported_params(&p(-5.0, 5.0, 1.0), 1.0, 0.5).unwrap() {
            assert_eq!(params.log_k, 1.0);
        } else {
            panic!("expected feasible");
        }
    }

    #[test]
    fn identity_experiment_has_no_displacement() {
        let settings = SweepSettings::new(
            (-1.0, 1.0),
            0.05,
            Window::symmetric(20),
            FitSettings::default().with_log_k_cap(0.0),
        );
        let r = invariance_experiment(
            &autonomous(0.3),
            &SimilarityMap::identity(1, &exp()),
            &exp(),
            SpectrumKind::Uniform,
            settings,
        )
        .unwrap();
        assert!(r.interval_counts_match && !r.non_invariance_demonstrated);
        assert!(r.diffs.iter().all(|d| d.displacement == 0.0));
        let shifted = invariance_experiment(
            &autonomous(0.3),
            &SimilarityMap::exp_scaling(1, 0.4, &exp()).with_bounds(0.0, 0.4),
            &exp(),
            SpectrumKind::Uniform,
            settings,
        )
        .unwrap();
        assert!(shifted.non_invariance_demonstrated);
        assert!(shifted.diffs.iter().all(|d| (d.displacement + 0.4).abs() < 0.01));
    }

    #[test]
    fn degenerate_map_is_rejected() {
        let settings = SweepSettings::new((-1.0, 1.0), 0.05, Window::symmetric(20), FitSettings::default());
        let s = SimilarityMap::exp_scaling(1, 1.0, &exp());
        assert!(matches!(
            invariance_experiment(&autonomous(0.0), &s, &exp(), SpectrumKind::Uniform, settings),
            Err(KinematicsError::Degenerate(_))
        ));
    }
}
