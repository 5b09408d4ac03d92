//! Coefficient sequences, log-stabilized evolution operators, invariant
//! projector families and γ-weighted systems.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::growth::GrowthRate;
use crate::linalg::{scaled_diag, LogScalar, Mat, Scaled};
use crate::scalar::{lit, Real};
use crate::window::Window;

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("no backward extension for Φ({k},{n}): system is not invertible and no projector was supplied")]
    NoBackwardExtension { k: i64, n: i64 },
    #[error("coefficient A({n}) is singular (relative σ_min {sigma:e}) although the system is flagged invertible")]
    Singular { n: i64, sigma: f64 },
    #[error("restriction of A({n}) to ker P({n}) is singular (σ_min {sigma:e})")]
    KernelRestrictionSingular { n: i64, sigma: f64 },
    #[error("coefficient A({n}) has dimension {got}, expected {expected}")]
    DimensionMismatch { n: i64, expected: usize, got: usize },
    #[error("initial vector must be nonzero")]
    ZeroVector,
    #[error("index {n} outside the system's domain {domain}")]
    OutOfDomain { n: i64, domain: Window },
    #[error("projector index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("P({n}) is not idempotent: ‖P²−P‖ = {err:e}")]
    NotIdempotent { n: i64, err: f64 },
    #[error("P({n}) has numerical rank {got}, expected {expected}")]
    RankMismatch { n: i64, expected: usize, got: usize },
    #[error("invariance A(n)P(n)=P(n+1)A(n) fails at n={n}: residual {err:e}")]
    NotInvariant { n: i64, err: f64 },
    #[error("system CSV: {0}")]
    Csv(String),
    #[error("cannot read system CSV {path}: {source}")]
    CsvRead {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Growth(#[from] crate::growth::GrowthError),
}

/// Default smallest admissible singular value for inverses.
pub const SIGMA_MIN: f64 = 1e-12;

type DenseFn<T> = Arc<dyn Fn(i64) -> Scaled<T> + Send + Sync>;
type DiagFn<T> = Arc<dyn Fn(i64) -> Vec<LogScalar<T>> + Send + Sync>;

/// Per-coordinate `log|Φ_ii(k,n)|` for diagonal systems with a closed form.
pub type ClosedForm<T> = Arc<dyn Fn(i64, i64) -> Vec<T> + Send + Sync>;

/// Coefficient representation.
#[derive(Clone)]
pub enum Coefficients<T> {
    /// General `d×d` coefficients in scaled form.
    Dense(DenseFn<T>),
    /// Diagonal coefficients as per-coordinate log scalars.
    Diagonal(DiagFn<T>),
}

/// `x(k+1) = A(k) x(k)` on ℤ.
#[derive(Clone)]
pub struct LinearSystem<T> {
    label: String,
    dim: usize,
    coeff: Coefficients<T>,
    invertible: bool,
    closed_form: Option<ClosedForm<T>>,
    domain: Option<Window>,
}

impl<T: Real> fmt::Debug for LinearSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearSystem")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("diagonal", &self.is_diagonal())
            .field("invertible", &self.invertible)
            .field("closed_form", &self.closed_form.is_some())
            .field("domain", &self.domain)
            .finish()
    }
}

impl<T: Real> LinearSystem<T> {
    /// Dense system from plain matrices.
    pub fn dense(
        label: impl Into<String>,
        dim: usize,
        f: impl Fn(i64) -> Mat<T> + Send + Sync + 'static,
    ) -> Self {
        Self::dense_scaled(label, dim, move |n| Scaled::from_dense(f(n)))
    }

    /// Dense system from scaled matrices (for coefficients beyond float range).
    pub fn dense_scaled(
        label: impl Into<String>,
        dim: usize,
        f: impl Fn(i64) -> Scaled<T> + Send + Sync + 'static,
    ) -> Self {
        LinearSystem {
            label: label.into(),
            dim,
            coeff: Coefficients::Dense(Arc::new(f)),
            invertible: true,
            closed_form: None,
            domain: None,
        }
    }

    /// Diagonal system from per-coordinate log scalars.
    pub fn diagonal_log(
        label: impl Into<String>,
        dim: usize,
        f: impl Fn(i64) -> Vec<LogScalar<T>> + Send + Sync + 'static,
    ) -> Self {
        LinearSystem {
            label: label.into(),
            dim,
            coeff: Coefficients::Diagonal(Arc::new(f)),
            invertible: true,
            closed_form: None,
            domain: None,
        }
    }

    /// Positive scalar system `A(n) = e^{f(n)}`.
    pub fn scalar_log(
        label: impl Into<String>,
        f: impl Fn(i64) -> T + Send + Sync + 'static,
    ) -> Self {
        Self::diagonal_log(label, 1, move |n| vec![LogScalar::positive(f(n))])
    }

    /// Constant identity system.
    pub fn identity(dim: usize) -> Self {
        Self::diagonal_log("identity", dim, move |_| {
            vec![LogScalar::positive(T::zero()); dim]
        })
        .with_closed_form(Arc::new(move |_, _| vec![T::zero(); dim]))
    }

    pub fn with_invertible(mut self, invertible: bool) -> Self {
        self.invertible = invertible;
        self
    }

    pub fn with_closed_form(mut self, cf: ClosedForm<T>) -> Self {
        self.closed_form = Some(cf);
        self
    }

    pub fn with_domain(mut self, domain: Window) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_invertible(&self) -> bool {
        self.invertible
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.coeff, Coefficients::Diagonal(_))
    }

    pub fn coefficients(&self) -> &Coefficients<T> {
        &self.coeff
    }

    pub fn closed_form(&self) -> Option<&ClosedForm<T>> {
        self.closed_form.as_ref()
    }

    pub fn domain(&self) -> Option<Window> {
        self.domain
    }

    /// Errors unless every coefficient needed for pairs inside `window` is defined.
    pub fn ensure_covers(&self, window: Window) -> Result<(), SystemError> {
        if let Some(d) = self.domain {
            for n in [window.lo(), window.hi()] {
                if !d.contains(n) {
                    return Err(SystemError::OutOfDomain { n, domain: d });
                }
            }
        }
        Ok(())
    }

    /// `A(n)` in scaled form.
    pub fn coefficient(&self, n: i64) -> Scaled<T> {
        match &self.coeff {
            Coefficients::Dense(f) => f(n),
            Coefficients::Diagonal(f) => scaled_diag(&f(n)),
        }
    }

    /// Per-coordinate log scalars for diagonal systems.
    pub fn log_diag(&self, n: i64) -> Option<Vec<LogScalar<T>>> {
        match &self.coeff {
            Coefficients::Diagonal(f) => Some(f(n)),
            Coefficients::Dense(_) => None,
        }
    }

    /// `A(n)⁻¹` in scaled form, checking the relative smallest singular value.
    pub fn inverse_coefficient(&self, n: i64, sigma_min: T) -> Result<Scaled<T>, SystemError> {
        if let Some(d) = self.log_diag(n) {
            if d.iter().any(|e| e.is_zero()) {
                return Err(SystemError::Singular { n, sigma: 0.0 });
            }
            return Ok(scaled_diag(&d.into_iter().map(LogScalar::recip).collect::<Vec<_>>()));
        }
        let a = self.coefficient(n);
        let sigma = a.mat.min_singular_value();
        if a.is_zero() || sigma <= sigma_min {
            return Err(SystemError::Singular {
                n,
                sigma: sigma.to_f64().unwrap_or(0.0),
            });
        }
        a.inverse().ok_or(SystemError::Singular {
            n,
            sigma: sigma.to_f64().unwrap_or(0.0),
        })
    }

    /// Checks dimensions and, for invertible systems, the σ_min condition on `window`.
    pub fn check(&self, window: Window, sigma_min: T) -> Result<(), SystemError> {
        self.ensure_covers(window)?;
        for n in window.iter() {
            let a = self.coefficient(n);
            if a.mat.rows() != self.dim || a.mat.cols() != self.dim {
                return Err(SystemError::DimensionMismatch {
                    n,
                    expected: self.dim,
                    got: a.mat.rows(),
                });
            }
            if self.invertible {
                self.inverse_coefficient(n, sigma_min)?;
            }
        }
        Ok(())
    }

    /// Reads a system CSV: a first record `window,LO,HI`, an optional header,
    /// then one row `n,a11,a12,…,add` per index of the window.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<(Self, Window), SystemError> {
        let path_str = path.as_ref().display().to_string();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path.as_ref())
            .map_err(|source| SystemError::CsvRead {
                path: path_str.clone(),
                source,
            })?;
        let mut records = rdr.records();
        let first = records
            .next()
            .ok_or_else(|| SystemError::Csv(format!("{path_str}: empty file")))?
            .map_err(|source| SystemError::CsvRead {
                path: path_str.clone(),
                source,
            })?;
        if first.len() != 3 || !first[0].eq_ignore_ascii_case("window") {
            return Err(SystemError::Csv(format!(
                "{path_str}: first record must be `window,LO,HI`"
            )));
        }
        let parse_i = |s: &str| {
            s.parse::<i64>()
                .map_err(|_| SystemError::Csv(format!("{path_str}: bad integer {s:?}")))
        };
        let window = Window::new(parse_i(&first[1])?, parse_i(&first[2])?)
            .map_err(|e| SystemError::Csv(format!("{path_str}: {e}")))?;
        let mut rows: HashMap<i64, Vec<f64>> = HashMap::new();
        let mut dim = None;
        for rec in records {
            let rec = rec.map_err(|source| SystemError::CsvRead {
                path: path_str.clone(),
                source,
            })?;
            let Ok(n) = rec[0].parse::<i64>() else {
                continue; // header row
            };
            let vals: Result<Vec<f64>, _> = rec.iter().skip(1).map(|s| s.parse::<f64>()).collect();
            let vals = vals
                .map_err(|_| SystemError::Csv(format!("{path_str}: bad number in row n={n}")))?;
            let d = (vals.len() as f64).sqrt().round() as usize;
            if d == 0 || d * d != vals.len() {
                return Err(SystemError::Csv(format!(
                    "{path_str}: row n={n} has {} entries, not a square count",
                    vals.len()
                )));
            }
            match dim {
                None => dim = Some(d),
                Some(d0) if d0 != d => {
                    return Err(SystemError::DimensionMismatch {
                        n,
                        expected: d0,
                        got: d,
                    })
                }
                _ => {}
            }
            if rows.insert(n, vals).is_some() {
                return Err(SystemError::Csv(format!("{path_str}: duplicate row n={n}")));
            }
        }
        let dim = dim.ok_or_else(|| SystemError::Csv(format!("{path_str}: no data rows")))?;
        // A coefficient is needed at every n in the window except possibly hi.
        for n in window.lo()..window.hi() {
            if !rows.contains_key(&n) {
                return Err(SystemError::Csv(format!("{path_str}: missing row n={n}")));
            }
        }
        let lo = window.lo();
        let count = (window.hi() - lo + 1) as usize;
        let mut mats: Vec<Option<Mat<T>>> = vec![None; count];
        let mut diagonal = true;
        for (n, vals) in &rows {
            if !window.contains(*n) {
                continue;
            }
            let m = Mat::from_rows(
                &vals
                    .chunks(dim)
                    .map(|r| r.iter().map(|&x| T::from_f64(x).unwrap_or(T::nan())).collect())
                    .collect::<Vec<Vec<T>>>(),
            );
            diagonal &= m.is_diagonal();
            mats[(*n - lo) as usize] = Some(m);
        }
        let label = path
            .as_ref()
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "csv".into());
        let sys = if diagonal {
            let table: Vec<Option<Vec<LogScalar<T>>>> = mats
                .iter()
                .map(|m| m.as_ref().map(|m| m.diagonal().into_iter().map(LogScalar::from_value).collect()))
                .collect();
            LinearSystem::diagonal_log(label, dim, move |n| {
                table[(n - lo) as usize]
                    .clone()
                    .unwrap_or_else(|| panic!("system queried at n={n} without a CSV row"))
            })
        } else {
            let table: Vec<Option<Scaled<T>>> = mats
                .into_iter()
                .map(|m| m.map(Scaled::from_dense))
                .collect();
            LinearSystem::dense_scaled(label, dim, move |n| {
                table[(n - lo) as usize]
                    .clone()
                    .unwrap_or_else(|| panic!("system queried at n={n} without a CSV row"))
            })
        }
        .with_domain(window);
        let check_window = Window::new(lo, (window.hi() - 1).max(lo)).expect("ordered");
        let invertible = check_window
            .iter()
            .all(|n| sys.inverse_coefficient(n, lit(SIGMA_MIN)).is_ok());
        Ok((sys.with_invertible(invertible), window))
    }
}

/// Invariant projector family `n ↦ P(n)`.
#[derive(Clone)]
pub struct ProjectorFamily<T> {
    dim: usize,
    rank: usize,
    proj: Arc<dyn Fn(i64) -> Mat<T> + Send + Sync>,
    coordinate: Option<Vec<bool>>,
}

impl<T: Real> fmt::Debug for ProjectorFamily<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProjectorFamily")
            .field("dim", &self.dim)
            .field("rank", &self.rank)
            .field("coordinate", &self.coordinate)
            .finish()
    }
}

impl<T: Real> ProjectorFamily<T> {
    pub fn new(
        dim: usize,
        rank: usize,
        proj: impl Fn(i64) -> Mat<T> + Send + Sync + 'static,
    ) -> Self {
        ProjectorFamily {
            dim,
            rank,
            proj: Arc::new(proj),
            coordinate: None,
        }
    }

    /// Constant diagonal 0/1 projector onto the coordinates marked `true`.
    pub fn from_mask(mask: Vec<bool>) -> Self {
        let dim = mask.len();
        let rank = mask.iter().filter(|&&b| b).count();
        let diag: Vec<T> = mask
            .iter()
            .map(|&b| if b { T::one() } else { T::zero() })
            .collect();
        let p = Mat::from_diag(&diag);
        ProjectorFamily {
            dim,
            rank,
            proj: Arc::new(move |_| p.clone()),
            coordinate: Some(mask),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_mask(vec![true; dim])
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_mask(vec![false; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_identity(&self) -> bool {
        self.rank == self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.rank == 0
    }

    /// Stable-coordinate mask for coordinate projectors.
    pub fn coordinate_mask(&self) -> Option<&[bool]> {
        self.coordinate.as_deref()
    }

    pub fn at(&self, n: i64) -> Mat<T> {
        (self.proj)(n)
    }

    /// `Id − P(n)`.
    pub fn complement_at(&self, n: i64) -> Mat<T> {
        Mat::identity(self.dim).sub(&self.at(n))
    }

    /// Orthonormal basis of `ker P(n)` as columns.
    pub fn kernel_basis(&self, n: i64) -> Mat<T> {
        self.complement_at(n).column_space_basis(lit(1e-8))
    }

    /// Checks idempotency, constant rank, invariance and the kernel
    /// restriction on `window`.
    pub fn validate(
        &self,
        sys: &LinearSystem<T>,
        window: Window,
        sigma_min: T,
    ) -> Result<(), SystemError> {
        for n in window.iter() {
            let p = self.at(n);
            let idem = p.matmul(&p).sub(&p).spectral_norm();
            if idem > lit(1e-10) {
                return Err(SystemError::NotIdempotent {
                    n,
                    err: idem.to_f64().unwrap_or(f64::NAN),
                });
            }
            let r = p.rank(lit(1e-8));
            if r != self.rank {
                return Err(SystemError::RankMismatch {
                    n,
                    expected: self.rank,
                    got: r,
                });
            }
        }
        for n in window.lo()..window.hi() {
            let a = sys.coefficient(n);
            let lhs = a.mat.matmul(&self.at(n));
            let rhs = self.at(n + 1).matmul(&a.mat);
            let err = lhs.sub(&rhs).spectral_norm();
            if err > lit::<T>(1e-8) * (T::one() + a.mat.spectral_norm()) {
                return Err(SystemError::NotInvariant {
                    n,
                    err: err.to_f64().unwrap_or(f64::NAN),
                });
            }
            if self.rank < self.dim {
                let c = self.kernel_coefficient(sys, n);
                let sigma = c.mat.min_singular_value();
                if c.is_zero() || sigma <= sigma_min {
                    return Err(SystemError::KernelRestrictionSingular {
                        n,
                        sigma: sigma.to_f64().unwrap_or(0.0),
                    });
                }
            }
        }
        Ok(())
    }

    /// `Q_{n+1}ᵀ A(n) Q_n`: the restriction of `A(n)` to `ker P(n) → ker P(n+1)`.
    fn kernel_coefficient(&self, sys: &LinearSystem<T>, n: i64) -> Scaled<T> {
        let q0 = self.kernel_basis(n);
        let q1 = self.kernel_basis(n + 1);
        let a = sys.coefficient(n);
        let m = q1.transpose().matmul(&a.mat).matmul(&q0);
        Scaled::new(m, a.log_scale)
    }

    /// Backward step on the kernel: `Q_n C_n⁻¹ Q_{n+1}ᵀ`, mapping
    /// `ker P(n+1) → ker P(n)`.
    pub fn kernel_backward_step(
        &self,
        sys: &LinearSystem<T>,
        n: i64,
        sigma_min: T,
    ) -> Result<Scaled<T>, SystemError> {
        let c = self.kernel_coefficient(sys, n);
        let sigma = c.mat.min_singular_value();
        if c.is_zero() || sigma <= sigma_min {
            return Err(SystemError::KernelRestrictionSingular {
                n,
                sigma: sigma.to_f64().unwrap_or(0.0),
            });
        }
        let inv = c.inverse().ok_or(SystemError::KernelRestrictionSingular {
            n,
            sigma: sigma.to_f64().unwrap_or(0.0),
        })?;
        let q0 = self.kernel_basis(n);
        let q1 = self.kernel_basis(n + 1);
        Ok(Scaled::new(
            q0.matmul(&inv.mat).matmul(&q1.transpose()),
            inv.log_scale,
        ))
    }
}

/// Constant coordinate projector with 1-based `stable_indices`.
pub fn coordinate_projector<T: Real>(
    d: usize,
    stable_indices: &[usize],
) -> Result<ProjectorFamily<T>, SystemError> {
    let mut mask = vec![false; d];
    for &i in stable_indices {
        if i == 0 || i > d {
            return Err(SystemError::IndexOutOfRange { index: i, dim: d });
        }
        mask[i - 1] = true;
    }
    Ok(ProjectorFamily::from_mask(mask))
}

/// Evolution operator with cached scaled partial products.
///
/// Forward chains `Φ(n+j, n)` and backward chains `Φ(n−j, n)` are cached per
/// starting index; a pair costs `|k−n|` steps the first time it is reached.
pub struct EvolutionOperator<T> {
    sys: LinearSystem<T>,
    projector: Option<ProjectorFamily<T>>,
    sigma_min: T,
    forward: RwLock<HashMap<i64, Vec<Scaled<T>>>>,
    backward: RwLock<HashMap<i64, Vec<Scaled<T>>>>,
}

impl<T: Real> EvolutionOperator<T> {
    pub fn new(sys: &LinearSystem<T>) -> Self {
        EvolutionOperator {
            sys: sys.clone(),
            projector: None,
            sigma_min: lit(SIGMA_MIN),
            forward: RwLock::new(HashMap::new()),
            backward: RwLock::new(HashMap::new()),
        }
    }

    /// Backward products through the kernel restriction of `p` when the
    /// system is not invertible.
    pub fn with_projector(mut self, p: &ProjectorFamily<T>) -> Self {
        self.projector = Some(p.clone());
        self
    }

    pub fn with_sigma_min(mut self, sigma_min: T) -> Self {
        self.sigma_min = sigma_min;
        self
    }

    pub fn system(&self) -> &LinearSystem<T> {
        &self.sys
    }

    fn check_index(&self, n: i64) -> Result<(), SystemError> {
        if let Some(d) = self.sys.domain {
            if !d.contains(n) {
                return Err(SystemError::OutOfDomain { n, domain: d });
            }
        }
        Ok(())
    }

    /// One backward step `Φ(j, j+1)` (on `ker P` for non-invertible systems).
    pub fn backward_step(&self, j: i64) -> Result<Scaled<T>, SystemError> {
        if self.sys.invertible {
            return self.sys.inverse_coefficient(j, self.sigma_min);
        }
        match &self.projector {
            Some(p) => p.kernel_backward_step(&self.sys, j, self.sigma_min),
            None => Err(SystemError::NoBackwardExtension { k: j, n: j + 1 }),
        }
    }

    /// Start of a backward chain at `n`: `Id` for invertible systems,
    /// `Id − P(n)` on the kernel route.
    fn backward_start(&self, n: i64) -> Scaled<T> {
        if self.sys.invertible {
            Scaled::identity(self.sys.dim)
        } else {
            let p = self.projector.as_ref().expect("checked by caller");
            Scaled::new(p.complement_at(n), T::zero())
        }
    }

    /// `Φ(k,n)` as `(M, s)` with `‖M‖ = 1`.
    ///
    /// For `k < n` on a non-invertible system with a projector, returns
    /// `Φ(k,n)(Id − P(n))`, the only part the backward extension defines.
    pub fn transition(&self, k: i64, n: i64) -> Result<Scaled<T>, SystemError> {
        if k == n {
            return Ok(Scaled::identity(self.sys.dim));
        }
        self.check_index(k)?;
        self.check_index(n)?;
        if k > n {
            let steps = (k - n) as usize;
            if let Some(chain) = self.forward.read().expect("poisoned").get(&n) {
                if let Some(v) = chain.get(steps) {
                    return Ok(v.clone());
                }
            }
            let mut map = self.forward.write().expect("poisoned");
            let chain = map
                .entry(n)
                .or_insert_with(|| vec![Scaled::identity(self.sys.dim)]);
            while chain.len() <= steps {
                let j = n + chain.len() as i64 - 1;
                let a = self.sys.coefficient(j);
                if self.sys.invertible && a.is_zero() {
                    return Err(SystemError::Singular { n: j, sigma: 0.0 });
                }
                let next = a.mul(chain.last().expect("nonempty"));
                chain.push(next);
            }
            Ok(chain[steps].clone())
        } else {
            if !self.sys.invertible && self.projector.is_none() {
                return Err(SystemError::NoBackwardExtension { k, n });
            }
            let steps = (n - k) as usize;
            if let Some(chain) = self.backward.read().expect("poisoned").get(&n) {
                if let Some(v) = chain.get(steps) {
                    return Ok(v.clone());
                }
            }
            let mut map = self.backward.write().expect("poisoned");
            let chain = map
                .entry(n)
                .or_insert_with(|| vec![self.backward_start(n)]);
            while chain.len() <= steps {
                let j = n - chain.len() as i64;
                let step = self.backward_step(j)?;
                let next = step.mul(chain.last().expect("nonempty"));
                chain.push(next);
            }
            Ok(chain[steps].clone())
        }
    }

    /// `log ‖Φ(k,n)‖`.
    pub fn log_norm(&self, k: i64, n: i64) -> Result<T, SystemError> {
        Ok(self.transition(k, n)?.log_norm())
    }
}

/// `(k, log‖Φ(k,n0)ξ‖)` for every `k` in `window`, by vector propagation.
pub fn solution_log_norms<T: Real>(
    op: &EvolutionOperator<T>,
    n0: i64,
    xi: &[T],
    window: Window,
) -> Result<Vec<(i64, T)>, SystemError> {
    let d = op.sys.dim;
    if xi.len() != d {
        return Err(SystemError::DimensionMismatch {
            n: n0,
            expected: d,
            got: xi.len(),
        });
    }
    if xi.iter().all(|&x| x == T::zero()) {
        return Err(SystemError::ZeroVector);
    }
    let col = |v: &[T]| {
        let rows: Vec<Vec<T>> = v.iter().map(|&x| vec![x]).collect();
        Mat::from_rows(&rows)
    };
    let start = Scaled::new(col(xi), T::zero());
    let mut out = Vec::with_capacity(window.len());
    if window.hi() >= n0 {
        let mut x = start.clone();
        for k in n0..=window.hi() {
            if k >= window.lo() {
                out.push((k, x.log_norm()));
            }
            if k < window.hi() {
                op.check_index(k)?;
                x = op.sys.coefficient(k).mul(&x);
            }
        }
    }
    if window.lo() < n0 {
        if !op.sys.invertible && op.projector.is_none() {
            return Err(SystemError::NoBackwardExtension {
                k: window.lo(),
                n: n0,
            });
        }
        let mut x = if op.sys.invertible {
            start
        } else {
            let p = op.projector.as_ref().expect("checked");
            Scaled::dense_mul(&p.complement_at(n0), &start)
        };
        let mut back = Vec::new();
        for k in (window.lo()..n0).rev() {
            op.check_index(k)?;
            x = op.backward_step(k)?.mul(&x);
            if k <= window.hi() {
                back.push((k, x.log_norm()));
            }
        }
        back.reverse();
        back.extend(out);
        out = back;
    }
    Ok(out)
}

/// The (μ,γ)-weighted system with coefficients `A(k)·(μ(k+1)/μ(k))^{−γ}`.
pub struct WeightedSystem<T> {
    base: LinearSystem<T>,
    rate: GrowthRate<T>,
    gamma: T,
    op: EvolutionOperator<T>,
}

/// Builds the γ-weighted system.
pub fn weighted<T: Real>(sys: &LinearSystem<T>, rate: &GrowthRate<T>, gamma: T) -> WeightedSystem<T> {
    WeightedSystem {
        base: sys.clone(),
        rate: rate.clone(),
        gamma,
        op: EvolutionOperator::new(sys),
    }
}

impl<T: Real> WeightedSystem<T> {
    pub fn base(&self) -> &LinearSystem<T> {
        &self.base
    }

    pub fn rate(&self) -> &GrowthRate<T> {
        &self.rate
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    /// `Φ_γ(k,n) = Φ(k,n)·e^{−γ(L(k)−L(n))}`.
    pub fn transition(&self, k: i64, n: i64) -> Result<Scaled<T>, SystemError> {
        let phi = self.op.transition(k, n)?;
        let shift = self.gamma * self.rate.log_ratio(k, n);
        Ok(Scaled {
            mat: phi.mat,
            log_scale: phi.log_scale - shift,
        })
    }

    pub fn log_norm(&self, k: i64, n: i64) -> Result<T, SystemError> {
        Ok(self.transition(k, n)?.log_norm())
    }

    /// The weighted system as a plain [`LinearSystem`].
    pub fn as_system(&self) -> LinearSystem<T> {
        let rate = self.rate.clone();
        let g = self.gamma;
        let label = format!("{}@γ={}", self.base.label, g);
        let mut out = match &self.base.coeff {
            Coefficients::Dense(f) => {
                let f = f.clone();
                let rate = rate.clone();
                LinearSystem::dense_scaled(label, self.base.dim, move |k| {
                    let a = f(k);
                    let shift = g * rate.log_ratio(k + 1, k);
                    Scaled {
                        mat: a.mat,
                        log_scale: a.log_scale - shift,
                    }
                })
            }
            Coefficients::Diagonal(f) => {
                let f = f.clone();
                let rate = rate.clone();
                LinearSystem::diagonal_log(label, self.base.dim, move |k| {
                    let shift = g * rate.log_ratio(k + 1, k);
                    f(k).into_iter()
                        .map(|e| LogScalar {
                            log_abs: e.log_abs - shift,
                            negative: e.negative,
                        })
                        .collect()
                })
            }
        };
        out.invertible = self.base.invertible;
        out.domain = self.base.domain;
        if let Some(cf) = &self.base.closed_form {
            let cf = cf.clone();
            out.closed_form = Some(Arc::new(move |k, n| {
                let shift = g * rate.log_ratio(k, n);
                cf(k, n).into_iter().map(|v| v - shift).collect()
            }));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex707() -> LinearSystem<f64> {
        LinearSystem::scalar_log("ex707", |n| -(2 * n + 1) as f64)
    }

    #[test]
    fn forward_and_identity_transitions() {
        let op = EvolutionOperator::new(&ex707());
        let t = op.transition(2, 0).unwrap();
        assert_eq!(t.mat[(0, 0)], 1.0);
        assert_eq!(t.log_scale, -4.0);
        let id = op.transition(5, 5).unwrap();
        assert_eq!(id, Scaled::identity(1));
    }

    #[test]
    fn backward_needs_invertibility_or_projector() {
        let sys = ex707().with_invertible(false);
        let op = EvolutionOperator::new(&sys);
        assert!(matches!(
            op.transition(-2, 0),
            Err(SystemError::NoBackwardExtension { .. })
        ));
        let p = ProjectorFamily::zero(1);
        let op = EvolutionOperator::new(&sys).with_projector(&p);
        // Φ(-2,0) = A(-2)⁻¹A(-1)⁻¹ = e^{-3}·e^{-1}.
        assert!((op.log_norm(-2, 0).unwrap() + 4.0).abs() < 1e-14);
    }

    #[test]
    fn kernel_route_on_singular_system() {
        // A = diag(0, 2): not invertible, but the kernel of P = diag(1,0) is.
        let sys = LinearSystem::dense("sing", 2, |_| Mat::from_diag(&[0.0f64, 2.0]))
            .with_invertible(false);
        let p = coordinate_projector::<f64>(2, &[1]).unwrap();
        p.validate(&sys, Window::new(-5, 5).unwrap(), 1e-12).unwrap();
        let op = EvolutionOperator::new(&sys).with_projector(&p);
        let t = op.transition(-3, 0).unwrap();
        assert!((t.log_scale + 3.0 * 2f64.ln()).abs() < 1e-13);
        assert!(t.mat[(0, 0)].abs() < 1e-15);
    }

    #[test]
    fn coordinate_projector_ranges() {
        let p = coordinate_projector::<f64>(2, &[1]).unwrap();
        assert_eq!(p.rank(), 1);
        assert_eq!(p.at(0), Mat::from_diag(&[1.0, 0.0]));
        assert!(coordinate_projector::<f64>(2, &[3]).is_err());
        assert!(coordinate_projector::<f64>(1, &[1]).unwrap().is_identity());
        assert!(coordinate_projector::<f64>(1, &[]).unwrap().is_zero());
    }

    #[test]
    fn projector_validation_detects_non_invariance() {
        let rot = LinearSystem::dense("rot", 2, |_| {
            Mat::from_rows(&[vec![0.0f64, -1.0], vec![1.0, 0.0]])
        });
        let p = coordinate_projector::<f64>(2, &[1]).unwrap();
        assert!(matches!(
            p.validate(&rot, Window::new(0, 3).unwrap(), 1e-12),
            Err(SystemError::NotInvariant { n: 0, .. })
        ));
    }

    #[test]
    fn weighted_examples() {
        let q = GrowthRate::<f64>::quadratic();
        let w0 = weighted(&ex707(), &q, 0.0);
        let base = EvolutionOperator::new(&ex707());
        assert_eq!(w0.transition(2, 0).unwrap(), base.transition(2, 0).unwrap());
        let wm1 = weighted(&ex707(), &q, -1.0);
        assert_eq!(wm1.transition(2, 0).unwrap().log_scale, 0.0);
        // The weighted system's own coefficients reproduce the same value.
        let as_sys = EvolutionOperator::new(&wm1.as_system());
        assert_eq!(as_sys.log_norm(2, 0).unwrap(), 0.0);
    }

    #[test]
    fn solution_norms_match_closed_form() {
        let op = EvolutionOperator::new(&ex707());
        let v = solution_log_norms(&op, 0, &[1.0], Window::new(0, 5).unwrap()).unwrap();
        for (k, l) in v {
            assert_eq!(l, -((k * k) as f64));
        }
        assert!(matches!(
            solution_log_norms(&op, 0, &[0.0], Window::new(0, 5).unwrap()),
            Err(SystemError::ZeroVector)
        ));
        let w = solution_log_norms(&op, 3, &[2.0], Window::new(3, 3).unwrap()).unwrap();
        assert_eq!(w, vec![(3, 2f64.ln())]);
    }

    #[test]
    fn csv_system_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sys.csv");
        let mut s = String::from("window,-2,2\nn,a11,a12,a21,a22\n");
        for n in -2..=2 {
            s.push_str(&format!("{n},0.5,0,0,2\n"));
        }
        std::fs::write(&p, s).unwrap();
        let (sys, w) = LinearSystem::<f64>::from_csv(&p).unwrap();
        assert_eq!(w, Window::new(-2, 2).unwrap());
        assert!(sys.is_diagonal() && sys.is_invertible());
        let op = EvolutionOperator::new(&sys);
        assert!((op.log_norm(2, -2).unwrap() - 4.0 * 2f64.ln()).abs() < 1e-13);
        assert!(op.transition(3, 0).is_err());
    }
}
