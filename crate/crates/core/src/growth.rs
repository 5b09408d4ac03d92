//! Discrete growth rates `μ: ℤ → ℝ⁺`, stored through `L(n) = log μ(n)`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{idx, Real};
use crate::window::Window;

#[derive(Debug, Error)]
pub enum GrowthError {
    #[error("custom rate must satisfy L(0)=0, got L(0)={0}")]
    NonzeroAtOrigin(f64),
    #[error("custom rate is decreasing at n={n}: L(n)={at} > L(n+1)={next}")]
    NotMonotone { n: i64, at: f64, next: f64 },
    #[error("custom rate has non-finite value at n={0}")]
    NonFinite(i64),
    #[error("custom rate needs a log function")]
    MissingCustomLog,
    #[error("rate {label} is undefined at n={n}")]
    OutOfDomain { label: String, n: i64 },
    #[error("rate table is missing n={0}; tables must cover a contiguous range")]
    TableGap(i64),
    #[error("rate table: {0}")]
    Table(String),
    #[error("cannot read rate CSV {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateKind {
    Exponential,
    Polynomial,
    Quadratic,
    Cubic,
    Custom,
}

impl fmt::Display for RateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RateKind::Exponential => "exponential",
            RateKind::Polynomial => "polynomial",
            RateKind::Quadratic => "quadratic",
            RateKind::Cubic => "cubic",
            RateKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for RateKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exponential" | "exp" => Ok(RateKind::Exponential),
            "polynomial" | "poly" => Ok(RateKind::Polynomial),
            "quadratic" => Ok(RateKind::Quadratic),
            "cubic" => Ok(RateKind::Cubic),
            "custom" => Ok(RateKind::Custom),
            other => Err(format!("unknown rate kind {other:?}")),
        }
    }
}

type LogFn<T> = Arc<dyn Fn(i64) -> T + Send + Sync>;

/// Growth rate; immutable and cheap to clone.
#[derive(Clone)]
pub struct GrowthRate<T> {
    label: String,
    kind: RateKind,
    log_fn: LogFn<T>,
    domain: Option<Window>,
    window_hint: i64,
}

impl<T: Real> fmt::Debug for GrowthRate<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GrowthRate")
            .field("label", &self.label)
            .field("kind", &self.kind)
            .field("domain", &self.domain)
            .field("window_hint", &self.window_hint)
            .finish()
    }
}

/// Largest n with n² exactly representable in f64.
const QUADRATIC_HINT: i64 = 94_906_265;
/// Largest n with n³ exactly representable in f64.
const CUBIC_HINT: i64 = 208_063;
const DEFAULT_HINT: i64 = 1 << 52;
/// Window over which custom rates are validated when their hint is huge.
const CUSTOM_CHECK_LIMIT: i64 = 100_000;

impl<T: Real> GrowthRate<T> {
    /// Built-in or custom rate; custom rates are validated on their hint window.
    pub fn make(kind: RateKind, custom_log: Option<LogFn<T>>) -> Result<Self, GrowthError> {
        match kind {
            RateKind::Exponential => Ok(Self::exponential()),
            RateKind::Polynomial => Ok(Self::polynomial()),
            RateKind::Quadratic => Ok(Self::quadratic()),
            RateKind::Cubic => Ok(Self::cubic()),
            RateKind::Custom => {
                let f = custom_log.ok_or(GrowthError::MissingCustomLog)?;
                Self::custom("custom", f, 1000)
            }
        }
    }

    pub fn exponential() -> Self {
        Self::builtin("exponential", RateKind::Exponential, DEFAULT_HINT, |n| idx(n))
    }

    pub fn polynomial() -> Self {
        Self::builtin("polynomial", RateKind::Polynomial, DEFAULT_HINT, |n| {
            if n == 0 {
                T::zero()
            } else {
                let l = idx::<T>(n.abs()).ln();
                if n > 0 {
                    l
                } else {
                    -l
                }
            }
        })
    }

    pub fn quadratic() -> Self {
        Self::builtin("quadratic", RateKind::Quadratic, QUADRATIC_HINT, |n| {
            let m = idx::<T>(n);
            let sq = m * m;
            if n < 0 {
                -sq
            } else {
                sq
            }
        })
    }

    pub fn cubic() -> Self {
        Self::builtin("cubic", RateKind::Cubic, CUBIC_HINT, |n| {
            let m = idx::<T>(n);
            m * m * m
        })
    }

    fn builtin(
        label: &str,
        kind: RateKind,
        window_hint: i64,
        f: impl Fn(i64) -> T + Send + Sync + 'static,
    ) -> Self {
        GrowthRate {
            label: label.to_string(),
            kind,
            log_fn: Arc::new(f),
            domain: None,
            window_hint,
        }
    }

    /// Custom rate from a log function, validated on `[-hint, hint]`
    /// (capped at 10⁵ points each side).
    pub fn custom(label: &str, log_fn: LogFn<T>, window_hint: i64) -> Result<Self, GrowthError> {
        let rate = GrowthRate {
            label: label.to_string(),
            kind: RateKind::Custom,
            log_fn,
            domain: None,
            window_hint,
        };
        let h = window_hint.min(CUSTOM_CHECK_LIMIT);
        rate.validate(Window::new(-h, h).expect("symmetric window"))?;
        Ok(rate)
    }

    /// Tabulated rate; only exact lookups inside the table are allowed.
    pub fn from_table(label: &str, table: &[(i64, T)]) -> Result<Self, GrowthError> {
        let map: BTreeMap<i64, T> = table.iter().copied().collect();
        if map.len() != table.len() {
            return Err(GrowthError::Table("duplicate index".into()));
        }
        let (&lo, _) = map
            .first_key_value()
            .ok_or_else(|| GrowthError::Table("empty table".into()))?;
        let (&hi, _) = map.last_key_value().expect("nonempty");
        for n in lo..=hi {
            if !map.contains_key(&n) {
                return Err(GrowthError::TableGap(n));
            }
        }
        if !(lo <= 0 && 0 <= hi) {
            return Err(GrowthError::Table("table must contain n=0".into()));
        }
        let domain = Window::new(lo, hi).expect("ordered keys");
        let values: Vec<T> = map.values().copied().collect();
        let label_owned = label.to_string();
        let rate = GrowthRate {
            label: label_owned.clone(),
            kind: RateKind::Custom,
            log_fn: Arc::new(move |n| {
                let i = n - lo;
                if i < 0 || i as usize >= values.len() {
                    panic!("rate {label_owned} queried outside its table at n={n}");
                }
                values[i as usize]
            }),
            domain: Some(domain),
            window_hint: (-lo).min(hi),
        };
        rate.validate(domain)?;
        Ok(rate)
    }

    /// Reads a two-column CSV `n,L(n)` (header optional).
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self, GrowthError> {
        let path_str = path.as_ref().display().to_string();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path.as_ref())
            .map_err(|source| GrowthError::Csv {
                path: path_str.clone(),
                source,
            })?;
        let mut table = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|source| GrowthError::Csv {
                path: path_str.clone(),
                source,
            })?;
            if rec.len() != 2 {
                return Err(GrowthError::Table(format!(
                    "{path_str}: record {} has {} fields, expected 2",
                    line + 1,
                    rec.len()
                )));
            }
            let (Ok(n), Ok(l)) = (rec[0].parse::<i64>(), rec[1].parse::<f64>()) else {
                if line == 0 {
                    continue; // header
                }
                return Err(GrowthError::Table(format!(
                    "{path_str}: cannot parse record {}",
                    line + 1
                )));
            };
            table.push((n, T::from_f64(l).ok_or(GrowthError::NonFinite(n))?));
        }
        let label = path
            .as_ref()
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "table".into());
        Self::from_table(&label, &table)
    }

    fn validate(&self, window: Window) -> Result<(), GrowthError> {
        let l0 = (self.log_fn)(0);
        if l0 != T::zero() {
            return Err(GrowthError::NonzeroAtOrigin(l0.to_f64().unwrap_or(f64::NAN)));
        }
        let mut prev = (self.log_fn)(window.lo());
        if !prev.is_finite() {
            return Err(GrowthError::NonFinite(window.lo()));
        }
        for n in (window.lo() + 1)..=window.hi() {
            let cur = (self.log_fn)(n);
            if !cur.is_finite() {
                return Err(GrowthError::NonFinite(n));
            }
            if cur < prev {
                return Err(GrowthError::NotMonotone {
                    n: n - 1,
                    at: prev.to_f64().unwrap_or(f64::NAN),
                    next: cur.to_f64().unwrap_or(f64::NAN),
                });
            }
            prev = cur;
        }
        Ok(())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> RateKind {
        self.kind
    }

    pub fn window_hint(&self) -> i64 {
        self.window_hint
    }

    /// Table domain for tabulated rates, `None` when defined on all of ℤ.
    pub fn domain(&self) -> Option<Window> {
        self.domain
    }

    /// Errors if `window` reaches outside the rate's domain.
    pub fn ensure_covers(&self, window: Window) -> Result<(), GrowthError> {
        if let Some(d) = self.domain {
            if !d.contains(window.lo()) {
                return Err(self.out_of_domain(window.lo()));
            }
            if !d.contains(window.hi()) {
                return Err(self.out_of_domain(window.hi()));
            }
        }
        Ok(())
    }

    fn out_of_domain(&self, n: i64) -> GrowthError {
        GrowthError::OutOfDomain {
            label: self.label.clone(),
            n,
        }
    }

    /// `L(n) = log μ(n)`.
    ///
    /// # Panics
    /// For tabulated rates queried outside the table; call
    /// [`ensure_covers`](Self::ensure_covers) or use [`try_log`](Self::try_log).
    pub fn log(&self, n: i64) -> T {
        (self.log_fn)(n)
    }

    pub fn try_log(&self, n: i64) -> Result<T, GrowthError> {
        match self.domain {
            Some(d) if !d.contains(n) => Err(self.out_of_domain(n)),
            _ => Ok((self.log_fn)(n)),
        }
    }

    /// `μ(n)`; may overflow to `inf` or underflow to 0.
    pub fn mu(&self, n: i64) -> T {
        self.log(n).exp()
    }

    /// `L(k) − L(n)`.
    pub fn log_ratio(&self, k: i64, n: i64) -> T {
        self.log(k) - self.log(n)
    }

    /// `λ(n) = sgn(n)·L(n) ≥ 0`, the log of the nonuniform weight `μ(n)^{sgn(n)}`.
    pub fn weight(&self, n: i64) -> T {
        match n.signum() {
            0 => T::zero(),
            1 => self.log(n),
            _ => -self.log(n),
        }
    }

    /// `L(hint) > 0 > L(-hint)`, the finite-window stand-in for μ→∞ / μ→0.
    pub fn diverges_on(&self, window: Window) -> bool {
        self.log(window.hi()) > T::zero() && self.log(window.lo()) < T::zero()
    }
}
