//! Shared helpers and independent oracles for the integration tests.

#![allow(dead_code)]

use dichotomy::corpus::{get_example, parse_params, ExampleEntry, RefSet};
use dichotomy::dichotomy_fit::{FitClass, FitSettings};
use dichotomy::growth::GrowthRate;
use dichotomy::kinematics::SimilarityMap;
use dichotomy::pairs::Side;
use dichotomy::spectrum::SpectrumEstimate;
use dichotomy::system::{coordinate_projector, weighted, EvolutionOperator, LinearSystem};
use dichotomy::Window;

pub fn ex(name: &str, params: &str) -> ExampleEntry<f64> {
    let ps = if params.is_empty() {
        Vec::new()
    } else {
        parse_params(params).unwrap()
    };
    get_example(name, &ps).unwrap()
}

/// Estimated intervals as `(lo, hi)` pairs.
pub fn intervals(est: &SpectrumEstimate<f64>) -> Vec<(f64, f64)> {
    est.intervals.iter().map(|i| (i.lo, i.hi)).collect()
}

/// Reference intervals clipped to `[lo, hi]`.
pub fn clipped(set: &RefSet<f64>, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    set.intervals
        .iter()
        .filter(|i| i.hi >= lo && i.lo <= hi)
        .map(|i| (i.lo.max(lo), i.hi.min(hi)))
        .collect()
}

/// Largest endpoint distance, or `None` when the interval counts differ.
pub fn endpoint_error(a: &[(f64, f64)], b: &[(f64, f64)]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    Some(
        a.iter()
            .zip(b)
            .map(|(x, y)| (x.0 - y.0).abs().max((x.1 - y.1).abs()))
            .fold(0.0, f64::max),
    )
}

/// Union of interval lists, merging overlaps and intervals closer than `join`.
pub fn union(lists: &[Vec<(f64, f64)>], join: f64) -> Vec<(f64, f64)> {
    let mut all: Vec<(f64, f64)> = lists.iter().flatten().copied().collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for iv in all {
        match out.last_mut() {
            Some(last) if iv.0 <= last.1 + join => last.1 = last.1.max(iv.1),
            _ => out.push(iv),
        }
    }
    out
}

/// Max relative error of `Φ(k,m)Φ(m,n)` against `Φ(k,n)`.
pub fn cocycle_error(sys: &LinearSystem<f64>, triples: &[(i64, i64, i64)]) -> f64 {
    let op = EvolutionOperator::new(sys);
    triples
        .iter()
        .map(|&(k, m, n)| {
            let lhs = op.transition(k, m).unwrap().mul(&op.transition(m, n).unwrap());
            lhs.relative_distance(&op.transition(k, n).unwrap())
        })
        .fold(0.0, f64::max)
}

/// Max of `|log‖Φ_γ(k,n)‖ − (log‖Φ(k,n)‖ − γ(L(k)−L(n)))| / (1 + |·|)`,
/// with `Φ_γ` the product of the weighted coefficients.
pub fn weighted_identity_error(
    sys: &LinearSystem<f64>,
    rate: &GrowthRate<f64>,
    gamma: f64,
    pairs: &[(i64, i64)],
) -> f64 {
    let op = EvolutionOperator::new(sys);
    let wop = EvolutionOperator::new(&weighted(sys, rate, gamma).as_system());
    pairs
        .iter()
        .map(|&(k, n)| {
            let expect = op.log_norm(k, n).unwrap() - gamma * (rate.log(k) - rate.log(n));
            (wop.log_norm(k, n).unwrap() - expect).abs() / (1.0 + expect.abs())
        })
        .fold(0.0, f64::max)
}

/// Max relative error of `S(k)·Φ_B(k,n)` against `Φ_A(k,n)·S(n)`.
pub fn conjugacy_error(
    a: &LinearSystem<f64>,
    s: &SimilarityMap<f64>,
    b: &LinearSystem<f64>,
    pairs: &[(i64, i64)],
) -> f64 {
    let (oa, ob) = (EvolutionOperator::new(a), EvolutionOperator::new(b));
    pairs
        .iter()
        .map(|&(k, n)| {
            let lhs = s.at(k).mul(&ob.transition(k, n).unwrap());
            let rhs = oa.transition(k, n).unwrap().mul(&s.at(n));
            lhs.relative_distance(&rhs)
        })
        .fold(0.0, f64::max)
}

/// Slope search range for [`brute_force_objective`].
const SEARCH: f64 = 1e5;

/// Optimal stable (`min α + mθ`) or unstable (`max β − mν`) objective by
/// direct search over the slope, with the weight solved in closed form.
/// Values come from explicit products of the γ-weighted system.
/// `None` when no slope in the search range is feasible.
pub fn brute_force_objective(
    sys: &LinearSystem<f64>,
    rate: &GrowthRate<f64>,
    stable_indices: &[usize],
    side: Side,
    class: FitClass,
    gamma: f64,
    window: Window,
    settings: &FitSettings<f64>,
) -> Option<f64> {
    let w = weighted(sys, rate, gamma);
    let p = coordinate_projector(sys.dim(), stable_indices).unwrap();
    // (x, y, v): v ≤ cap + s·x + w·y, with s = α (stable) or −β (unstable).
    let mut rows = Vec::new();
    for n in window.iter() {
        for k in window.iter() {
            let (keep, q) = match side {
                Side::Stable => (k >= n, p.at(n)),
                _ => (k <= n, p.complement_at(n)),
            };
            if !keep {
                continue;
            }
            let v = w.transition(k, n).unwrap().mul_dense(&q).log_norm();
            if v == f64::NEG_INFINITY {
                continue;
            }
            let x = (rate.log(k) - rate.log(n)).abs();
            let y = rate.weight(n);
            rows.push((x, y, v - settings.log_k_cap));
        }
    }
    if rows.is_empty() {
        return None;
    }
    let w_cap = if class == FitClass::Uniform { 0.0 } else { settings.theta_cap };
    let floor = match side {
        Side::Stable => settings.alpha_min,
        _ => settings.beta_min,
    };
    let m = settings.multiplier as f64;
    // Objective min s + m·w(s); infeasible slopes map to +inf.
    let eval = |s: f64| -> f64 {
        let mut need: f64 = 0.0;
        for &(x, y, r) in &rows {
            let e = r - s * x;
            if y > 0.0 {
                need = need.max(e / y);
            } else if e > 1e-12 {
                return f64::INFINITY;
            }
        }
        if need > w_cap + 1e-12 {
            f64::INFINITY
        } else {
            s + m * need
        }
    };
    let (mut lo, mut hi) = (-SEARCH, -floor);
    let mut best = (f64::INFINITY, hi);
    for _ in 0..9 {
        let steps = 400;
        for i in 0..=steps {
            let s = lo + (hi - lo) * i as f64 / steps as f64;
            let f = eval(s);
            if f < best.0 {
                best = (f, s);
            }
        }
        if !best.0.is_finite() {
            return None;
        }
        let h = (hi - lo) / steps as f64;
        lo = (best.1 - 2.0 * h).max(-SEARCH);
        hi = (best.1 + 2.0 * h).min(-floor);
    }
    Some(match side {
        Side::Stable => best.0,
        _ => -best.0,
    })
}

/// Dense 2×2 system `e^{0.3 sin n}·R(0.4 + 0.1n)·[[1, 0.5], [0, 1]]`.
pub fn rotation_system() -> LinearSystem<f64> {
    use dichotomy::linalg::Mat;
    LinearSystem::dense("rotation-shear", 2, |n| {
        let t = 0.4 + 0.1 * n as f64;
        let s = (0.3 * (n as f64).sin()).exp();
        let (c, si) = (t.cos(), t.sin());
        Mat::from_rows(&[
            vec![s * c, s * (0.5 * c - si)],
            vec![s * si, s * (0.5 * si + c)],
        ])
    })
}

/// Bounded dense map `[[1, 0.3 sin n], [0, 1]]`.
pub fn shear_map(rate: &GrowthRate<f64>) -> SimilarityMap<f64> {
    use dichotomy::linalg::{Mat, Scaled};
    SimilarityMap::dense_scaled("shear", 2, rate, |n| {
        Scaled::from_dense(Mat::from_rows(&[
            vec![1.0, 0.3 * (n as f64).sin()],
            vec![0.0, 1.0],
        ]))
    })
    .with_bounds(0.35, 0.0)
}

/// Max relative error of the closed form against products, per coordinate
/// in log scale.
pub fn closed_form_error(sys: &LinearSystem<f64>, pairs: &[(i64, i64)]) -> f64 {
    let cf = sys.closed_form().expect("closed form");
    let op = EvolutionOperator::new(sys);
    let mut worst: f64 = 0.0;
    for &(k, n) in pairs {
        let t = op.transition(k, n).unwrap();
        for (i, c) in cf(k, n).into_iter().enumerate() {
            let d = t.mat.diagonal()[i].abs();
            if d == 0.0 {
                continue;
            }
            let v = d.ln() + t.log_scale;
            worst = worst.max((v - c).abs() / (1.0 + c.abs()));
        }
    }
    worst
}
