//! Adaptive numerical integration.
//!
//! One-dimensional integrals use a 15-point Gauss-Legendre rule with a
//! 7-point embedded check; panels are split worst-first until the summed
//! error estimate drops below the caller's absolute tolerance.
//! Two-dimensional integrals over regions `{(x, t) : t in (t_lo, t_hi),
//! 0 < x < x_hi(t)}` tensorize the same rule: the outer integrand evaluates
//! an inner adaptive integral at a tighter tolerance.
//!
//! Nodes and weights are computed once by Newton iteration on the Legendre
//! polynomials, so there are no hand-copied coefficient tables to get wrong.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Panel budget for one adaptive integral.
const MAX_PANELS: usize = 4096;

struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Gauss-Legendre nodes/weights on [-1, 1] via Newton on P_n.
fn gauss_legendre(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_n(x) and P_{n-1}(x) by the three-term recurrence.
            let mut p_prev = 1.0;
            let mut p = x;
            for k in 2..=n {
                let kf = k as f64;
                let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
                p_prev = p;
                p = p_next;
            }
            dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    Rule { nodes, weights }
}

fn rules() -> &'static (Rule, Rule) {
    static RULES: OnceLock<(Rule, Rule)> = OnceLock::new();
    RULES.get_or_init(|| (gauss_legendre(15), gauss_legendre(7)))
}

/// One panel's high-order value and error estimate.
fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let (hi, lo) = rules();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut v_hi = 0.0;
    for (&x, &w) in hi.nodes.iter().zip(&hi.weights) {
        v_hi += w * f(mid + half * x);
    }
    v_hi *= half;
    let mut v_lo = 0.0;
    for (&x, &w) in lo.nodes.iter().zip(&lo.weights) {
        v_lo += w * f(mid + half * x);
    }
    v_lo *= half;
    let err = (v_hi - v_lo).abs();
    (v_hi, if err.is_finite() { err } else { f64::INFINITY })
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrates `f` over `(a, b)` to absolute tolerance `abs_tol`.
///
/// Returns the value; fails with [`Error::Integration`] if the panel budget
/// is exhausted before the error estimate reaches the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!(
            "integration bounds must be finite, got ({a}, {b})"
        )));
    }
    if b <= a {
        return Ok(0.0);
    }

    let (value, err) = panel(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, err });
    let mut total_err = err;
    let mut panels = 1;

    while total_err > abs_tol {
        if panels >= MAX_PANELS {
            return Err(Error::Integration {
                achieved: total_err,
                requested: abs_tol,
            });
        }
        // Worst panel first.
        let worst = heap.pop().expect("heap cannot be empty while error > 0");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval at floating-point resolution; accept its estimate.
            total_err = heap.iter().map(|s| s.err).sum::<f64>();
            if total_err > abs_tol {
                return Err(Error::Integration {
                    achieved: total_err + worst.err,
                    requested: abs_tol,
                });
            }
            heap.push(worst);
            break;
        }
        let (lv, le) = panel(&f, worst.a, mid);
        let (rv, re) = panel(&f, mid, worst.b);
        total_err += le + re - worst.err;
        heap.push(Segment { a: worst.a, b: mid, value: lv, err: le });
        heap.push(Segment { a: mid, b: worst.b, value: rv, err: re });
        panels += 1;
    }

    // Re-sum for a tight result; the incremental total drifts slightly.
    Ok(heap.iter().map(|s| s.value).sum())
}

/// Integrates `f(x, t)` over `{t in (t_lo, t_hi), 0 < x < x_hi(t)}`.
///
/// The inner integral runs at `abs_tol / 100` so inner noise does not
/// dominate the outer error estimate.
pub fn integrate_2d<F, G>(f: F, t_lo: f64, t_hi: f64, x_hi: G, abs_tol: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
    G: Fn(f64) -> f64,
{
    let inner_tol = abs_tol * 1e-2;
    let outer = |t: f64| -> f64 {
        let upper = x_hi(t);
        if upper <= 0.0 {
            return 0.0;
        }
        // Inner failures surface as NaN and force outer refinement; a panel
        // that never converges exhausts the outer budget instead of hanging.
        integrate(|x| f(x, t), 0.0, upper, inner_tol).unwrap_or(f64::NAN)
    };
    integrate(outer, t_lo, t_hi, abs_tol)
}
