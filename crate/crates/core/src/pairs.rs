//! Windowed constraint tables `(x, y, v)` for the fitting programs.
//!
//! Each pair `(k, n)` of the window contributes `v = log‖Φ(k,n)Q(n)‖`
//! against the features `x = |L(k)−L(n)|` and `y = λ(n)`. Within one `y`
//! value only the upper convex hull of the `(x, v)` points can ever bind, and
//! a γ-weighting shears `v` by a multiple of `x`, which preserves that hull.
//! Tables are therefore built once per projector and side and reused for
//! every γ.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::growth::GrowthRate;
use crate::linalg::{Mat, Scaled};
use crate::scalar::Real;
use crate::system::{ClosedForm, EvolutionOperator, LinearSystem, ProjectorFamily, SystemError};
use crate::window::Window;

/// Which family of pairs a table holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `k ≥ n`, `Q = P`.
    Stable,
    /// `k ≤ n`, `Q = Id − P`.
    Unstable,
    /// All pairs, `Q = Id`.
    Growth,
}

impl Side {
    /// Sign `σ` in `v_γ = v − σ·γ·x`.
    pub fn shear_sign(self) -> i8 {
        match self {
            Side::Stable => 1,
            Side::Unstable => -1,
            Side::Growth => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constraint<T> {
    pub k: i64,
    pub n: i64,
    pub x: T,
    pub y: T,
    pub v: T,
}

/// Thinned constraints of one side.
#[derive(Clone, Debug)]
pub struct ConstraintSet<T> {
    pub side: Side,
    pub window: Window,
    /// Hull vertices; empty when the side is vacuous.
    pub active: Vec<Constraint<T>>,
    /// Number of window pairs with a finite value.
    pub total: usize,
}

impl<T: Real> ConstraintSet<T> {
    /// `v` of constraint `c` for the γ-weighted system.
    #[inline]
    pub fn weighted_v(&self, c: &Constraint<T>, gamma: T) -> T {
        match self.side.shear_sign() {
            1 => c.v - gamma * c.x,
            -1 => c.v + gamma * c.x,
            _ => c.v,
        }
    }

    /// `max_i (v_γ,i − s·x_i − w·y_i)` and its maximizer; `−∞` when empty.
    pub fn max_excess(&self, gamma: T, s: T, w: T) -> (T, Option<(i64, i64)>) {
        let mut best = T::neg_infinity();
        let mut arg = None;
        for c in &self.active {
            let e = self.weighted_v(c, gamma) - s * c.x - w * c.y;
            if e > best || arg.is_none() {
                best = e;
                arg = Some((c.k, c.n));
            }
        }
        (best, arg)
    }

    pub fn is_vacuous(&self) -> bool {
        self.active.is_empty()
    }
}

/// Per-coordinate `log|Φ_ii(k,n)|` for diagonal systems, from the closed form
/// when present and from prefix sums of `log|a_i|` otherwise.
pub struct DiagonalLogs<T> {
    closed: Option<ClosedForm<T>>,
    window: Window,
    /// `prefix[i][j] = Σ_{m<lo+j} log|a_i(m)|` over finite entries.
    prefix: Vec<Vec<T>>,
    /// Count of zero entries before `lo+j`.
    zeros: Vec<Vec<u32>>,
}

impl<T: Real> DiagonalLogs<T> {
    /// `None` for non-diagonal systems.
    pub fn new(sys: &LinearSystem<T>, window: Window) -> Result<Option<Self>, SystemError> {
        if !sys.is_diagonal() {
            return Ok(None);
        }
        sys.ensure_covers(window)?;
        let d = sys.dim();
        if let Some(cf) = sys.closed_form() {
            return Ok(Some(DiagonalLogs {
                closed: Some(cf.clone()),
                window,
                prefix: Vec::new(),
                zeros: Vec::new(),
            }));
        }
        let mut prefix = vec![vec![T::zero()]; d];
        let mut zeros = vec![vec![0u32]; d];
        for m in window.lo()..window.hi() {
            let entries = sys.log_diag(m).expect("diagonal");
            for i in 0..d {
                let last = *prefix[i].last().expect("nonempty");
                let z = *zeros[i].last().expect("nonempty");
                if entries[i].is_zero() {
                    prefix[i].push(last);
                    zeros[i].push(z + 1);
                } else {
                    prefix[i].push(last + entries[i].log_abs);
                    zeros[i].push(z);
                }
            }
        }
        Ok(Some(DiagonalLogs {
            closed: None,
            window,
            prefix,
            zeros,
        }))
    }

    /// `log|Φ_ii(k,n)|` for coordinate `i`; `−∞` when a zero entry lies on a
    /// forward path.
    ///
    /// # Errors
    /// Backward paths through a zero entry.
    pub fn coord(&self, i: usize, k: i64, n: i64) -> Result<T, SystemError> {
        if let Some(cf) = &self.closed {
            return Ok(cf(k, n)[i]);
        }
        let a = (k - self.window.lo()) as usize;
        let b = (n - self.window.lo()) as usize;
        let zk = self.zeros[i][a];
        let zn = self.zeros[i][b];
        if zk != zn {
            if k > n {
                return Ok(T::neg_infinity());
            }
            let first = (k..n)
                .find(|&m| self.zeros[i][(m - self.window.lo()) as usize + 1] != self.zeros[i][(m - self.window.lo()) as usize])
                .unwrap_or(k);
            return Err(SystemError::Singular { n: first, sigma: 0.0 });
        }
        Ok(self.prefix[i][a] - self.prefix[i][b])
    }

    /// All coordinates at once.
    pub fn all(&self, k: i64, n: i64, d: usize) -> Result<Vec<T>, SystemError> {
        if let Some(cf) = &self.closed {
            return Ok(cf(k, n));
        }
        (0..d).map(|i| self.coord(i, k, n)).collect()
    }
}

fn feature<T: Real>(rate: &GrowthRate<T>, k: i64, n: i64) -> (T, T) {
    ((rate.log(k) - rate.log(n)).abs(), rate.weight(n))
}

/// Raw (unthinned) finite constraints for one `n`.
fn row_for_n<T: Real>(
    side: Side,
    n: i64,
    window: Window,
    values: impl Fn(i64) -> Result<T, SystemError>,
    rate: &GrowthRate<T>,
) -> Result<Vec<Constraint<T>>, SystemError> {
    let ks: Box<dyn Iterator<Item = i64>> = match side {
        Side::Stable => Box::new(n..=window.hi()),
        Side::Unstable => Box::new((window.lo()..=n).rev()),
        Side::Growth => Box::new(window.iter()),
    };
    let mut out = Vec::new();
    for k in ks {
        let v = values(k)?;
        if v == T::neg_infinity() {
            continue;
        }
        let (x, y) = feature(rate, k, n);
        out.push(Constraint { k, n, x, y, v });
    }
    Ok(out)
}

/// Dense propagation of `Φ(·,n)Q` from `n` outward, in window order of `k`.
fn dense_row<T: Real>(
    op: &EvolutionOperator<T>,
    start: Mat<T>,
    n: i64,
    window: Window,
    side: Side,
) -> Result<Vec<(i64, T)>, SystemError> {
    let sys = op.system();
    let mut out = Vec::new();
    let q = Scaled::new(start, T::zero());
    if matches!(side, Side::Stable | Side::Growth) {
        let mut m = q.clone();
        for k in n..=window.hi() {
            out.push((k, m.log_norm()));
            if k < window.hi() && !m.is_zero() {
                m = sys.coefficient(k).mul(&m);
            }
        }
    }
    if matches!(side, Side::Unstable | Side::Growth) {
        let mut m = q;
        if side == Side::Unstable {
            out.push((n, m.log_norm()));
        }
        for k in (window.lo()..n).rev() {
            if !m.is_zero() {
                m = op.backward_step(k)?.mul(&m);
            }
            out.push((k, m.log_norm()));
        }
    }
    Ok(out)
}

/// Builds the thinned table for `side` with projector `p` (ignored for
/// [`Side::Growth`]).
pub fn build<T: Real>(
    sys: &LinearSystem<T>,
    rate: &GrowthRate<T>,
    p: &ProjectorFamily<T>,
    side: Side,
    window: Window,
    sigma_min: T,
) -> Result<ConstraintSet<T>, SystemError> {
    sys.ensure_covers(window)?;
    rate.ensure_covers(window)?;
    let vacuous = match side {
        Side::Stable => p.is_zero(),
        Side::Unstable => p.is_identity(),
        Side::Growth => false,
    };
    if vacuous {
        return Ok(ConstraintSet {
            side,
            window,
            active: Vec::new(),
            total: 0,
        });
    }
    let d = sys.dim();
    let mask: Option<Vec<bool>> = match side {
        Side::Stable => p.coordinate_mask().map(|m| m.to_vec()),
        Side::Unstable => p.coordinate_mask().map(|m| m.iter().map(|b| !b).collect()),
        Side::Growth => Some(vec![true; d]),
    };
    let diag = DiagonalLogs::new(sys, window)?;
    let rows: Vec<Vec<Constraint<T>>> = match (diag, mask) {
        (Some(logs), Some(mask)) => {
            let coords: Vec<usize> = (0..d).filter(|&i| mask[i]).collect();
            window
                .iter()
                .collect::<Vec<_>>()
                .par_iter()
                .map(|&n| {
                    row_for_n(
                        side,
                        n,
                        window,
                        |k| {
                            let mut best = T::neg_infinity();
                            for &i in &coords {
                                best = best.max(logs.coord(i, k, n)?);
                            }
                            Ok(best)
                        },
                        rate,
                    )
                })
                .collect::<Result<_, _>>()?
        }
        _ => {
            let op = EvolutionOperator::new(sys)
                .with_projector(p)
                .with_sigma_min(sigma_min);
            window
                .iter()
                .collect::<Vec<_>>()
                .par_iter()
                .map(|&n| {
                    let start = match side {
                        Side::Stable => p.at(n),
                        Side::Unstable => p.complement_at(n),
                        Side::Growth => Mat::identity(d),
                    };
                    let vals = dense_row(&op, start, n, window, side)?;
                    let mut out = Vec::with_capacity(vals.len());
                    for (k, v) in vals {
                        if v == T::neg_infinity() {
                            continue;
                        }
                        let (x, y) = feature(rate, k, n);
                        out.push(Constraint { k, n, x, y, v });
                    }
                    Ok(out)
                })
                .collect::<Result<_, SystemError>>()?
        }
    };
    let all: Vec<Constraint<T>> = rows.into_iter().flatten().collect();
    let total = all.len();
    Ok(ConstraintSet {
        side,
        window,
        active: thin(all),
        total,
    })
}

fn cmp<T: Real>(a: T, b: T) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// Keeps, for each distinct `y`, the vertices of the upper convex hull of the
/// `(x, v)` points. Output is sorted by `(y, x)`.
pub fn thin<T: Real>(mut all: Vec<Constraint<T>>) -> Vec<Constraint<T>> {
    all.retain(|c| c.v.is_finite());
    all.sort_by(|a, b| {
        cmp(a.y, b.y)
            .then(cmp(a.x, b.x))
            .then(cmp(b.v, a.v))
            .then(a.n.cmp(&b.n))
            .then(a.k.cmp(&b.k))
    });
    let mut out = Vec::new();
    let mut start = 0;
    while start < all.len() {
        let mut end = start;
        while end < all.len() && all[end].y == all[start].y {
            end += 1;
        }
        upper_hull(&all[start..end], &mut out);
        start = end;
    }
    out
}

/// Monotone-chain upper hull of points sorted by `x` (ties: largest `v` first).
fn upper_hull<T: Real>(pts: &[Constraint<T>], out: &mut Vec<Constraint<T>>) {
    let base = out.len();
    let mut last_x = None;
    for p in pts {
        if last_x == Some(p.x) {
            continue;
        }
        last_x = Some(p.x);
        while out.len() >= base + 2 {
            let a = out[out.len() - 2];
            let b = out[out.len() - 1];
            // Drop b unless it lies strictly above the chord a→p.
            let lhs = (b.v - a.v) * (p.x - a.x);
            let rhs = (p.v - a.v) * (b.x - a.x);
            if lhs <= rhs {
                out.pop();
            } else {
                break;
            }
        }
        out.push(*p);
    }
}
