//! Adaptive Gauss–Kronrod quadrature for real and complex integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Values that can be integrated: real or complex.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Absolute/relative tolerance and evaluation budget.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_evals: usize,
}

impl Tolerance {
    pub fn abs(abs: f64) -> Self {
        Self {
            abs,
            rel: 0.0,
            max_evals: 5_000_000,
        }
    }

    pub fn with_budget(mut self, max_evals: usize) -> Self {
        self.max_evals = max_evals;
        self
    }

    pub fn with_rel(mut self, rel: f64) -> Self {
        self.rel = rel;
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate<V> {
    pub value: V,
    pub error: f64,
    pub evals: usize,
}

/// One 15-point Kronrod panel with the embedded 7-point Gauss error estimate.
pub fn gk15<V: QuadValue, F: Fn(f64) -> V>(f: &F, a: f64, b: f64) -> (V, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k = k + s * WGK[j];
        if j % 2 == 1 {
            g = g + s * WG[j / 2];
        }
    }
    let k = k * h;
    let g = g * h;
    (k, (k - g).magnitude())
}

struct Panel<V> {
    a: f64,
    b: f64,
    value: V,
    error: f64,
}

impl<V> PartialEq for Panel<V> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error && self.a == other.a
    }
}
impl<V> Eq for Panel<V> {}
impl<V> PartialOrd for Panel<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<V> Ord for Panel<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Globally adaptive integration over consecutive intervals given by `breaks`.
///
/// The panel with the largest error estimate is bisected until the summed
/// estimate is within tolerance.
pub fn integrate<V: QuadValue, F: Fn(f64) -> V>(
    f: F,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Estimate<V>> {
    if breaks.len() < 2 {
        return Ok(Estimate {
            value: V::zero(),
            error: 0.0,
            evals: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let mut settled: Vec<Panel<V>> = Vec::new();
    let mut evals = 0usize;
    let mut total = V::zero();
    let mut err = 0.0;
    for w in breaks.windows(2) {
        let (v, e) = gk15(&f, w[0], w[1]);
        evals += 15;
        total = total + v;
        err += e;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
    }
    let mut iter = 0usize;
    loop {
        if !err.is_finite() {
            return Err(Error::QuadratureBudgetExceeded {
                evals,
                error: f64::INFINITY,
                tol: tol.abs,
            });
        }
        let target = tol.abs.max(tol.rel * total.magnitude());
        if err <= target {
            break;
        }
        let Some(p) = heap.pop() else { break };
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) || (p.b - p.a) < 1e-13 * (1.0 + p.a.abs()) {
            // Cannot refine further; keep it as is.
            settled.push(p);
            if heap.is_empty() {
                break;
            }
            continue;
        }
        if evals + 30 > tol.max_evals {
            heap.push(p);
            return Err(Error::QuadratureBudgetExceeded {
                evals,
                error: err,
                tol: target,
            });
        }
        let (v1, e1) = gk15(&f, p.a, mid);
        let (v2, e2) = gk15(&f, mid, p.b);
        evals += 30;
        total = total - p.value + v1 + v2;
        err += e1 + e2 - p.error;
        heap.push(Panel {
            a: p.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: p.b,
            value: v2,
            error: e2,
        });
        iter += 1;
        if iter % 256 == 0 {
            // Resynchronise the running sums to limit drift.
            let (t, e) = resum(heap.iter().chain(settled.iter()));
            total = t;
            err = e;
        }
    }
    let mut panels: Vec<Panel<V>> = heap.into_vec();
    panels.extend(settled);
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let (value, error) = resum(panels.iter());
    let target = tol.abs.max(tol.rel * value.magnitude());
    if error > target && error > 1e-300 {
        // Only reached when panels could not be refined any further.
        if error > 10.0 * target {
            return Err(Error::QuadratureBudgetExceeded {
                evals,
                error,
                tol: target,
            });
        }
    }
    Ok(Estimate {
        value,
        error,
        evals,
    })
}

fn resum<'a, V: QuadValue + 'a>(panels: impl Iterator<Item = &'a Panel<V>>) -> (V, f64) {
    let mut t = V::zero();
    let mut e = 0.0;
    for p in panels {
        t = t + p.value;
        e += p.error;
    }
    (t, e)
}

/// Uniform breakpoints on [a, b] with at most `width` spacing.
pub fn uniform_breaks(a: f64, b: f64, width: f64) -> Vec<f64> {
    let n = (((b - a) / width).ceil() as usize).max(1);
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

/// Breakpoints on [-t, t]: uniform with spacing `width` on [-t0, t0], then
/// geometrically widening panels out to ±t.
pub fn symmetric_breaks(t: f64, t0: f64, width: f64) -> Vec<f64> {
    let t0 = t0.min(t);
    let inner = uniform_breaks(0.0, t0, width);
    let mut pos = inner.clone();
    let mut x = t0;
    while x < t {
        let next = (2.0 * x).max(x + width).min(t);
        pos.push(next);
        x = next;
    }
    let mut all: Vec<f64> = pos.iter().skip(1).rev().map(|x| -x).collect();
    all.extend(pos);
    all
}

/// ∫_lo^∞ f(r) dr via r = lo + scale·u/(1 − u).
pub fn integrate_half_line<V: QuadValue, F: Fn(f64) -> V>(
    f: F,
    lo: f64,
    scale: f64,
    tol: Tolerance,
) -> Result<Estimate<V>> {
    let g = |u: f64| {
        let one_minus = 1.0 - u;
        let r = lo + scale * u / one_minus;
        let jac = scale / (one_minus * one_minus);
        if !r.is_finite() || !jac.is_finite() {
            return V::zero();
        }
        f(r) * jac
    };
    let breaks: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0).collect();
    integrate(g, &breaks, tol)
}

/// Fixed composite 15-point Kronrod rule with `panels` equal panels.
pub fn composite_kronrod<V: QuadValue, F: Fn(f64) -> V>(f: F, a: f64, b: f64, panels: usize) -> V {
    let h = (b - a) / panels as f64;
    let mut total = V::zero();
    for i in 0..panels {
        let lo = a + h * i as f64;
        let (v, _) = gk15(&f, lo, lo + h);
        total = total + v;
    }
    total
}

/// Nodes and weights of the composite Kronrod rule on [a, b].
pub fn composite_kronrod_nodes(a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(15 * panels);
    let mut ws = Vec::with_capacity(15 * panels);
    for i in 0..panels {
        let c = a + h * (i as f64 + 0.5);
        let half = 0.5 * h;
        for j in 0..7 {
            xs.push(c - half * XGK[j]);
            ws.push(half * WGK[j]);
            xs.push(c + half * XGK[j]);
            ws.push(half * WGK[j]);
        }
        xs.push(c);
        ws.push(half * WGK[7]);
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_exact_on_one_panel() {
        let (v, e) = gk15(&|x: f64| x.powi(6) - 2.0 * x.powi(3), -1.0, 2.0);
        let exact = (2f64.powi(7) + 1.0) / 7.0 - 2.0 * (16.0 - 1.0) / 4.0;
        assert!((v - exact).abs() < 1e-12);
        assert!(e < 1e-10);
    }

    #[test]
    fn gaussian_over_real_line() {
        let est = integrate(
            |x: f64| (-x * x).exp(),
            &symmetric_breaks(40.0, 8.0, 1.0),
            Tolerance::abs(1e-13),
        )
        .unwrap();
        assert!((est.value - PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn complex_oscillatory() {
        // ∫_0^{2π} e^{-3it} cos(3t) dt = π
        let est = integrate(
            |t: f64| Complex64::from_polar(1.0, -3.0 * t) * (3.0 * t).cos(),
            &uniform_breaks(0.0, 2.0 * PI, 1.0),
            Tolerance::abs(1e-13),
        )
        .unwrap();
        assert!((est.value - Complex64::new(PI, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn half_line_transform() {
        let est = integrate_half_line(|r: f64| (1.0 + r).powi(-3), 0.0, 1.0, Tolerance::abs(1e-12)).unwrap();
        assert!((est.value - 0.5).abs() < 1e-11);
    }

    #[test]
    fn budget_is_enforced() {
        let r = integrate(
            |x: f64| (1.0 / x.max(1e-300)).sin(),
            &[1e-9, 1.0],
            Tolerance::abs(1e-14).with_budget(2000),
        );
        assert!(matches!(r, Err(Error::QuadratureBudgetExceeded { .. })));
    }

    #[test]
    fn composite_nodes_integrate_exactly() {
        let (xs, ws) = composite_kronrod_nodes(0.0, 1.0, 4);
        let s: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powi(5)).sum();
        assert!((s - 1.0 / 6.0).abs() < 1e-14);
        let v = composite_kronrod(|x: f64| x.exp(), 0.0, 1.0, 3);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn symmetric_breaks_cover_range() {
        let b = symmetric_breaks(100.0, 10.0, 1.0);
        assert_eq!(*b.first().unwrap(), -100.0);
        assert_eq!(*b.last().unwrap(), 100.0);
        assert!(b.windows(2).all(|w| w[1] > w[0]));
    }
}
