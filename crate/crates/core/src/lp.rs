//! Exact solver for the two-variable programs behind every dichotomy fit:
//!
//! ```text
//! minimize   s + m·w
//! subject to x_i·s + y_i·w ≥ r_i     (x_i, y_i ≥ 0)
//!            s_lo ≤ s ≤ s_hi,  0 ≤ w ≤ w_cap
//! ```
//!
//! For fixed `s` the smallest feasible `w` is the upper envelope of the lines
//! `(r_i − x_i·s)/y_i` and zero, a convex decreasing function of `s`, so the
//! objective is convex piecewise linear and its minimizer is a breakpoint of
//! the envelope (or a bound). Everything is exact over any ordered field.

use crate::scalar::Field;

/// One constraint `x·s + y·w ≥ r`.
#[derive(Clone, Debug, PartialEq)]
pub struct Row<F> {
    pub x: F,
    pub y: F,
    pub r: F,
}

/// Bounds and objective weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds<F> {
    pub s_lo: Option<F>,
    pub s_hi: Option<F>,
    pub w_cap: F,
    /// Objective weight `m` of `w`.
    pub m: F,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome<F> {
    /// Lexicographically smallest optimal `(s, w)`.
    Optimal { s: F, w: F },
    /// `binding` is the row that cannot be met (`None`: the bounds conflict).
    Infeasible { binding: Option<usize> },
    /// The objective decreases without bound as `s → −∞`.
    Unbounded,
}

struct Line<F> {
    slope: F,
    intercept: F,
}

/// `s` where two envelope lines cross; requires `a.slope < b.slope`.
fn cross<F: Field>(a: &Line<F>, b: &Line<F>) -> F {
    (a.intercept.clone() - b.intercept.clone()) / (b.slope.clone() - a.slope.clone())
}

fn fmax<F: Field>(a: F, b: F) -> F {
    if b > a {
        b
    } else {
        a
    }
}

/// Smallest feasible `w` at `s`, ignoring the cap.
pub fn min_weight<F: Field>(rows: &[Row<F>], s: &F) -> F {
    let mut w = F::zero();
    for row in rows {
        if row.y > F::zero() {
            w = fmax(w, (row.r.clone() - row.x.clone() * s.clone()) / row.y.clone());
        }
    }
    w
}

/// Solves the program exactly.
///
/// # Panics
/// In debug builds, if some `x_i` or `y_i` is negative.
pub fn solve<F: Field>(rows: &[Row<F>], bounds: &Bounds<F>) -> LpOutcome<F> {
    let zero = F::zero();
    let cap = bounds.w_cap.clone();
    let mut lower: Option<(F, Option<usize>)> = bounds.s_lo.clone().map(|v| (v, None));
    let mut lines: Vec<Line<F>> = Vec::with_capacity(rows.len() + 1);
    for (i, row) in rows.iter().enumerate() {
        debug_assert!(row.x >= zero && row.y >= zero, "row {i} has a negative coefficient");
        if row.x == zero {
            if row.r > cap.clone() * row.y.clone() {
                return LpOutcome::Infeasible { binding: Some(i) };
            }
        } else {
            let t = (row.r.clone() - cap.clone() * row.y.clone()) / row.x.clone();
            if lower.as_ref().is_none_or(|(l, _)| t > *l) {
                lower = Some((t, Some(i)));
            }
        }
        if row.y > zero {
            lines.push(Line {
                slope: -(row.x.clone() / row.y.clone()),
                intercept: row.r.clone() / row.y.clone(),
            });
        }
    }
    if let (Some((l, b)), Some(u)) = (&lower, &bounds.s_hi) {
        if l > u {
            return LpOutcome::Infeasible { binding: *b };
        }
    }
    lines.push(Line {
        slope: zero.clone(),
        intercept: zero.clone(),
    });
    // Ascending slope; among equal slopes the largest intercept first.
    lines.sort_by(|a, b| {
        a.slope
            .partial_cmp(&b.slope)
            .expect("ordered field")
            .then(b.intercept.partial_cmp(&a.intercept).expect("ordered field"))
    });
    lines.dedup_by(|later, first| later.slope == first.slope);
    let mut hull: Vec<Line<F>> = Vec::with_capacity(lines.len());
    for line in lines {
        while hull.len() >= 2 {
            let a = &hull[hull.len() - 2];
            let b = &hull[hull.len() - 1];
            if cross(a, &line) <= cross(a, b) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(line);
    }
    // The last piece has slope 0, so some piece has 1 + m·slope ≥ 0.
    let j = hull
        .iter()
        .position(|l| F::one() + bounds.m.clone() * l.slope.clone() >= zero)
        .expect("zero line is on the envelope");
    let mut s = if j == 0 {
        None
    } else {
        Some(cross(&hull[j - 1], &hull[j]))
    };
    if let Some((l, _)) = lower {
        s = Some(match s {
            Some(v) => fmax(v, l),
            None => l,
        });
    }
    let Some(mut s) = s else {
        return LpOutcome::Unbounded;
    };
    if let Some(u) = &bounds.s_hi {
        if s > *u {
            s = u.clone();
        }
    }
    let w = min_weight(rows, &s);
    LpOutcome::Optimal { s, w }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(x: f64, y: f64, r: f64) -> Row<f64> {
        Row { x, y, r }
    }

    fn b(s_lo: Option<f64>, s_hi: Option<f64>, w_cap: f64) -> Bounds<f64> {
        Bounds {
            s_lo,
            s_hi,
            w_cap,
            m: 1.0,
        }
    }

    #[test]
    fn single_slope_constraint() {
        // s ≥ 2 from 1·s ≥ 2; objective minimized at s=2, w=0.
        let out = solve(&[row(1.0, 0.0, 2.0)], &b(None, None, 10.0));
        assert_eq!(out, LpOutcome::Optimal { s: 2.0, w: 0.0 });
    }

    #[test]
    fn trade_between_slope_and_weight() {
        // s + 2w ≥ 2 with objective s + w: w is cheaper per unit of relief
        // (2 per unit of objective), so push s down to its bound.
        let out = solve(&[row(1.0, 2.0, 2.0)], &b(Some(-4.0), Some(0.0), 100.0));
        assert_eq!(out, LpOutcome::Optimal { s: -4.0, w: 3.0 });
        // With weight capped at 1, s ≥ 0.
        let out = solve(&[row(1.0, 2.0, 2.0)], &b(Some(-4.0), Some(5.0), 1.0));
        assert_eq!(out, LpOutcome::Optimal { s: 0.0, w: 1.0 });
    }

    #[test]
    fn lexicographic_tie_break_takes_smallest_s() {
        // s + w ≥ 1: every point on the segment is optimal; smallest s wins.
        let out = solve(&[row(1.0, 1.0, 1.0)], &b(Some(-3.0), Some(3.0), 2.0));
        assert_eq!(out, LpOutcome::Optimal { s: -1.0, w: 2.0 });
    }

    #[test]
    fn infeasibility_reports_the_binding_row() {
        let rows = [row(0.0, 0.0, -1.0), row(0.0, 0.0, 0.5)];
        assert_eq!(
            solve(&rows, &b(None, None, 1.0)),
            LpOutcome::Infeasible { binding: Some(1) }
        );
        let rows = [row(1.0, 0.0, -5.0), row(2.0, 0.0, 1.0)];
        assert_eq!(
            solve(&rows, &b(None, Some(0.0), 1.0)),
            LpOutcome::Infeasible { binding: Some(1) }
        );
        assert_eq!(
            solve(&[], &b(Some(1.0), Some(0.0), 1.0)),
            LpOutcome::Infeasible { binding: None }
        );
    }

    #[test]
    fn unbounded_without_slope_constraints() {
        assert_eq!(solve(&[], &b(None, Some(0.0), 1.0)), LpOutcome::Unbounded);
        assert_eq!(
            solve(&[row(0.0, 1.0, 0.5)], &b(None, None, 1.0)),
            LpOutcome::Unbounded
        );
    }

    #[test]
    fn exact_over_rationals() {
        use num_rational::Ratio;
        let q = |a: i64, b: i64| Ratio::new(a, b);
        let rows = vec![
            Row { x: q(1, 1), y: q(0, 1), r: q(-7, 3) },
            Row { x: q(3, 1), y: q(1, 1), r: q(-5, 1) },
        ];
        let bounds = Bounds {
            s_lo: None,
            s_hi: Some(q(-1, 1000)),
            w_cap: q(100, 1),
            m: q(1, 1),
        };
        // Slope of w(s) is −3 < −1, so raising s pays until w hits zero at
        // s = −5/3, which is above the floor −7/3.
        assert_eq!(
            solve(&rows, &bounds),
            LpOutcome::Optimal { s: q(-5, 3), w: q(0, 1) }
        );
    }
}
