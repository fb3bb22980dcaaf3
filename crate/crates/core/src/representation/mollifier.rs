//! The mollifier pair (φ, φ̂): φ̂ is a smooth even plateau supported in
//! [-1, 1] and φ(u) = ∫φ̂(ξ)e^{iξu}dξ is tabulated on a symmetric grid.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::composite_kronrod_nodes;

pub const DEFAULT_HALF_WIDTH: f64 = 512.0;
pub const DEFAULT_GRID_POINTS: usize = 65_537;
pub const MIN_GRID_POINTS: usize = 4096;

fn g(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Smooth step: 0 for x ≤ 0, 1 for x ≥ 1.
fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = g(x);
        a / (a + g(1.0 - x))
    }
}

/// φ̂(ξ) = S(2ξ + 2) − S(2ξ − 1).
pub fn phi_hat(xi: f64) -> f64 {
    let x = xi.abs();
    if x <= 0.5 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        1.0 - smooth_step(2.0 * x - 1.0)
    }
}

/// Tabulated φ with derivative, for cubic Hermite interpolation.
#[derive(Debug, Clone)]
pub struct MollifierPair {
    half_width: f64,
    step: f64,
    /// φ(k·step), k = 0..=half_points.
    values: Vec<f64>,
    slopes: Vec<f64>,
    /// Cumulative mass of |φ| over [0, k·step].
    cumulative: Vec<f64>,
    phi_l1: f64,
    phi_integral: f64,
    phi_hat_integral: f64,
}

impl MollifierPair {
    /// Shared instance built with the default grid.
    pub fn shared_default() -> Arc<MollifierPair> {
        static CELL: OnceLock<Arc<MollifierPair>> = OnceLock::new();
        CELL.get_or_init(|| {
            Arc::new(build_mollifier(DEFAULT_HALF_WIDTH, DEFAULT_GRID_POINTS).expect("default mollifier grid is valid"))
        })
        .clone()
    }

    pub fn phi_hat(&self, xi: f64) -> f64 {
        phi_hat(xi)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn grid_points(&self) -> usize {
        2 * (self.values.len() - 1) + 1
    }

    /// ∫|φ|.
    pub fn phi_l1(&self) -> f64 {
        self.phi_l1
    }

    /// ∫φ over the table (2π up to truncation).
    pub fn phi_integral(&self) -> f64 {
        self.phi_integral
    }

    /// c_φ = ∫φ̂ = 3/2.
    pub fn phi_hat_integral(&self) -> f64 {
        self.phi_hat_integral
    }

    /// ‖φ(ε·)‖₁ = ‖φ‖₁/ε.
    pub fn scaled_l1(&self, eps: f64) -> f64 {
        self.phi_l1 / eps
    }

    /// φ(u); zero outside the table.
    pub fn phi(&self, u: f64) -> f64 {
        self.phi_checked(u).unwrap_or(0.0)
    }

    /// φ(u), or `MollifierTableOverflow` beyond the tabulated range.
    pub fn phi_checked(&self, u: f64) -> Result<f64> {
        let x = u.abs();
        if !(x <= self.half_width) {
            return Err(Error::MollifierTableOverflow(u));
        }
        let s = x / self.step;
        let k = (s.floor() as usize).min(self.values.len() - 2);
        let t = s - k as f64;
        let h = self.step;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (d0, d1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * d1)
    }

    /// Draws u with density ∝ |φ(u)| on the table (piecewise-linear |φ|).
    pub fn sample_abs<R: Rng>(&self, rng: &mut R) -> f64 {
        let total = *self.cumulative.last().unwrap();
        let target = rng.random::<f64>() * total;
        let k = match self.cumulative.binary_search_by(|c| c.total_cmp(&target)) {
            Ok(i) => i.min(self.values.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.values.len() - 2),
        };
        let (y0, y1) = (self.values[k].abs(), self.values[k + 1].abs());
        let mass = self.cumulative[k + 1] - self.cumulative[k];
        let r = if mass > 0.0 {
            ((target - self.cumulative[k]) / mass).clamp(0.0, 1.0)
        } else {
            0.5
        };
        // Invert ∫_0^t (y0 + (y1 − y0)s) ds / ((y0 + y1)/2) = r.
        let t = if (y1 - y0).abs() < 1e-14 * (y0 + y1) {
            r
        } else {
            let a = y1 - y0;
            let disc = (y0 * y0 + a * r * (y0 + y1)).max(0.0);
            ((disc.sqrt() - y0) / a).clamp(0.0, 1.0)
        };
        let x = (k as f64 + t) * self.step;
        if rng.random::<bool>() {
            x
        } else {
            -x
        }
    }

    /// Writes the table as CSV with columns (t, phi).
    pub fn export_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "phi"])?;
        let n = self.values.len() - 1;
        for k in (1..=n).rev() {
            w.write_record([format!("{}", -(k as f64) * self.step), format!("{:.17e}", self.values[k])])?;
        }
        for k in 0..=n {
            w.write_record([format!("{}", k as f64 * self.step), format!("{:.17e}", self.values[k])])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Tabulates φ on `grid_points` equispaced points of [-W, W].
pub fn build_mollifier(grid_half_width: f64, grid_points: usize) -> Result<MollifierPair> {
    if grid_points < MIN_GRID_POINTS {
        return Err(Error::ResolutionTooLow(format!(
            "{grid_points} grid points, need at least {MIN_GRID_POINTS}"
        )));
    }
    if !(grid_half_width > 0.0) {
        return Err(Error::InvalidArgument(format!("half width must be positive, got {grid_half_width}")));
    }
    let half = (grid_points - 1) / 2;
    let step = grid_half_width / half as f64;
    let panels = 256;
    let (xs, ws) = composite_kronrod_nodes(0.0, 1.0, panels);
    let nodes: Vec<(f64, f64)> = xs
        .iter()
        .zip(&ws)
        .map(|(x, w)| (*x, w * phi_hat(*x)))
        .filter(|(_, w)| *w != 0.0)
        .collect();
    const BLOCK: usize = 512;
    let blocks: Vec<(Vec<f64>, Vec<f64>)> = (0..=half)
        .step_by(BLOCK)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&k0| {
            let k1 = (k0 + BLOCK).min(half + 1);
            let mut vals = vec![0.0; k1 - k0];
            let mut slopes = vec![0.0; k1 - k0];
            for &(xi, w) in &nodes {
                let (ds, dc) = (xi * step).sin_cos();
                let (mut s, mut c) = (xi * k0 as f64 * step).sin_cos();
                for j in 0..(k1 - k0) {
                    vals[j] += w * c;
                    slopes[j] -= w * xi * s;
                    let c2 = c * dc - s * ds;
                    s = s * dc + c * ds;
                    c = c2;
                }
            }
            (vals, slopes)
        })
        .collect();
    let mut values = Vec::with_capacity(half + 1);
    let mut slopes = Vec::with_capacity(half + 1);
    for (v, s) in blocks {
        values.extend(v.into_iter().map(|x| 2.0 * x));
        slopes.extend(s.into_iter().map(|x| 2.0 * x));
    }
    // Integrals: Hermite-corrected trapezoid, with root splitting for |φ|.
    let mut cumulative = Vec::with_capacity(half + 1);
    cumulative.push(0.0);
    let mut abs_acc = 0.0;
    let mut signed = 0.0;
    for k in 0..half {
        let (y0, y1) = (values[k], values[k + 1]);
        signed += step * 0.5 * (y0 + y1) + step * step / 12.0 * (slopes[k] - slopes[k + 1]);
        let cell = if y0 * y1 < 0.0 {
            let r = y0.abs() / (y0.abs() + y1.abs());
            0.5 * step * (r * y0.abs() + (1.0 - r) * y1.abs())
        } else {
            0.5 * step * (y0.abs() + y1.abs())
        };
        abs_acc += cell;
        cumulative.push(abs_acc);
    }
    let phi_integral = 2.0 * signed;
    let phi_l1 = 2.0 * abs_acc;
    let pair = MollifierPair {
        half_width: grid_half_width,
        step,
        values,
        slopes,
        cumulative,
        phi_l1,
        phi_integral,
        phi_hat_integral: 1.5,
    };
    check_constraints(&pair)?;
    Ok(pair)
}

fn check_constraints(pair: &MollifierPair) -> Result<()> {
    for i in 0..=4000 {
        let xi = -2.0 + 4.0 * i as f64 / 4000.0;
        let v = phi_hat(xi);
        let bad = !(-1e-10..=1.0 + 1e-10).contains(&v)
            || (xi.abs() <= 0.5 && (v - 1.0).abs() > 1e-10)
            || (xi.abs() >= 1.0 && v.abs() > 1e-10)
            || (v - phi_hat(-xi)).abs() > 1e-10;
        if bad {
            return Err(Error::ResolutionTooLow(format!("phi_hat constraint fails at {xi}")));
        }
    }
    let rel = (pair.phi_integral - 2.0 * PI).abs() / (2.0 * PI);
    if rel > 1e-8 {
        return Err(Error::ResolutionTooLow(format!(
            "tabulated integral of phi is {} (relative deviation {rel:e} from 2π); widen or refine the grid",
            pair.phi_integral
        )));
    }
    Ok(())
}
