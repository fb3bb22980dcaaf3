//! Closed-form activation profiles and their derivatives.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::numeric::hermite;

/// Highest derivative order supported by the smooth profiles.
pub const SMOOTH_ORDER: usize = 8;

/// An activation expressed as a small expression tree over elementary profiles.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Zero,
    Constant(f64),
    /// e^{-t²}
    Gaussian,
    /// (1 + e^{-t})^{-1}
    Logistic,
    Tanh,
    Arctan,
    /// ln(1 + e^t)
    Softplus,
    Relu,
    /// εt + (1 − ε)max(0, t)
    LeakyRelu(f64),
    /// max(0, t)^k
    ReluPow(u32),
    Cos,
    /// sign(sin t), right-continuous.
    Square,
    /// sin(t)/t
    Sinc,
    /// 1 for t ≥ 0, else 0.
    Heaviside,
    /// Σ_j w_j σ(t + o_j)
    Stencil {
        base: Box<Profile>,
        offsets: Vec<f64>,
        weights: Vec<f64>,
    },
    /// Σ_j c_j σ_j(t)
    Sum(Vec<(f64, Profile)>),
    /// σ(λt)
    Dilate { base: Box<Profile>, scale: f64 },
    /// σ(t + s)
    Shift { base: Box<Profile>, shift: f64 },
}

impl Profile {
    /// Highest k for which `derivative(k, ·)` is defined (a.e. for piecewise profiles).
    pub fn max_order(&self) -> usize {
        match self {
            Profile::Zero
            | Profile::Constant(_)
            | Profile::Gaussian
            | Profile::Logistic
            | Profile::Tanh
            | Profile::Arctan
            | Profile::Softplus
            | Profile::Cos => SMOOTH_ORDER,
            Profile::Relu | Profile::LeakyRelu(_) => 1,
            Profile::ReluPow(k) => *k as usize,
            Profile::Square | Profile::Heaviside => 0,
            Profile::Sinc => 3,
            Profile::Stencil { base, .. } | Profile::Dilate { base, .. } | Profile::Shift { base, .. } => {
                base.max_order()
            }
            Profile::Sum(parts) => parts.iter().map(|(_, p)| p.max_order()).min().unwrap_or(SMOOTH_ORDER),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.derivative(0, t)
    }

    /// σ^{(k)}(t). Callers must respect `max_order`.
    pub fn derivative(&self, k: usize, t: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Constant(c) => {
                if k == 0 {
                    *c
                } else {
                    0.0
                }
            }
            Profile::Gaussian => {
                let h = hermite(k, t);
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * h * (-t * t).exp()
            }
            Profile::Logistic => logistic_derivative(k, t),
            Profile::Tanh => {
                if k == 0 {
                    t.tanh()
                } else {
                    2.0 * 2f64.powi(k as i32) * logistic_derivative(k, 2.0 * t)
                }
            }
            Profile::Arctan => {
                if k == 0 {
                    t.atan()
                } else {
                    lorentzian_derivative(k - 1, t)
                }
            }
            Profile::Softplus => {
                if k == 0 {
                    t.max(0.0) + (-t.abs()).exp().ln_1p()
                } else {
                    logistic_derivative(k - 1, t)
                }
            }
            Profile::Relu => match k {
                0 => t.max(0.0),
                _ => step(t),
            },
            Profile::LeakyRelu(eps) => match k {
                0 => eps * t + (1.0 - eps) * t.max(0.0),
                _ => eps + (1.0 - eps) * step(t),
            },
            Profile::ReluPow(p) => {
                let p = *p as usize;
                if k > p || t < 0.0 {
                    return 0.0;
                }
                let falling: f64 = ((p - k + 1)..=p).map(|j| j as f64).product();
                falling * t.powi((p - k) as i32)
            }
            Profile::Cos => match k % 4 {
                0 => t.cos(),
                1 => -t.sin(),
                2 => -t.cos(),
                _ => t.sin(),
            },
            Profile::Square => {
                if k > 0 {
                    return 0.0;
                }
                let u = t.rem_euclid(2.0 * PI);
                if u < PI {
                    1.0
                } else {
                    -1.0
                }
            }
            Profile::Sinc => sinc_derivative(k, t),
            Profile::Heaviside => {
                if k > 0 {
                    0.0
                } else {
                    step(t)
                }
            }
            Profile::Stencil {
                base,
                offsets,
                weights,
            } => offsets
                .iter()
                .zip(weights)
                .map(|(o, w)| w * base.derivative(k, t + o))
                .sum(),
            Profile::Sum(parts) => parts.iter().map(|(c, p)| c * p.derivative(k, t)).sum(),
            Profile::Dilate { base, scale } => scale.powi(k as i32) * base.derivative(k, scale * t),
            Profile::Shift { base, shift } => base.derivative(k, t + shift),
        }
    }

    /// Points where the profile or one of its derivatives jumps; used to place
    /// quadrature breakpoints. Periodic profiles list the jumps in one period.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Profile::Relu | Profile::LeakyRelu(_) | Profile::ReluPow(_) | Profile::Heaviside => vec![0.0],
            Profile::Square => vec![0.0, std::f64::consts::PI],
            Profile::Stencil { base, offsets, .. } => {
                let inner = base.breakpoints();
                let mut out: Vec<f64> = offsets
                    .iter()
                    .flat_map(|o| inner.iter().map(move |b| b - o))
                    .collect();
                out.sort_by(f64::total_cmp);
                out.dedup();
                out
            }
            Profile::Sum(parts) => {
                let mut out: Vec<f64> = parts.iter().flat_map(|(_, p)| p.breakpoints()).collect();
                out.sort_by(f64::total_cmp);
                out.dedup();
                out
            }
            Profile::Dilate { base, scale } => base.breakpoints().iter().map(|b| b / scale).collect(),
            Profile::Shift { base, shift } => base.breakpoints().iter().map(|b| b - shift).collect(),
            _ => Vec::new(),
        }
    }
}

fn step(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Coefficients of P_k with s^{(k)} = P_k(s): P_0 = s, P_{k+1} = P_k'(s)(s − s²).
fn logistic_polys() -> &'static Vec<Vec<f64>> {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut out = vec![vec![0.0, 1.0]];
        for _ in 0..=SMOOTH_ORDER {
            let p = out.last().unwrap();
            let dp: Vec<f64> = p.iter().enumerate().skip(1).map(|(j, c)| j as f64 * c).collect();
            let mut next = vec![0.0; dp.len() + 2];
            for (j, c) in dp.iter().enumerate() {
                next[j + 1] += c;
                next[j + 2] -= c;
            }
            out.push(next);
        }
        out
    })
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn logistic_derivative(k: usize, t: f64) -> f64 {
    if k == 0 {
        return logistic(t);
    }
    // s^{(k)}(t) = (−1)^{k+1} s^{(k)}(−t); evaluate where s is small.
    let (u, sign) = if t > 0.0 {
        (-t, if k % 2 == 1 { 1.0 } else { -1.0 })
    } else {
        (t, 1.0)
    };
    let s = logistic(u);
    let poly = &logistic_polys()[k];
    let mut acc = 0.0;
    for c in poly.iter().rev() {
        acc = acc * s + c;
    }
    sign * acc
}

/// k-th derivative of 1/(1 + t²).
fn lorentzian_derivative(k: usize, t: f64) -> f64 {
    if k == 0 {
        return 1.0 / (1.0 + t * t);
    }
    // 1/(1+t²) = (1/2i)[(t − i)^{-1} − (t + i)^{-1}]
    let fact: f64 = (1..=k).map(|j| j as f64).product();
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let z1 = Complex64::new(t, -1.0).powi(-(k as i32) - 1);
    let z2 = Complex64::new(t, 1.0).powi(-(k as i32) - 1);
    let v = (z1 - z2) / Complex64::new(0.0, 2.0);
    sign * fact * v.re
}

fn sinc_derivative(k: usize, t: f64) -> f64 {
    let t2 = t * t;
    if t.abs() < 1e-2 {
        return match k {
            0 => 1.0 - t2 / 6.0 + t2 * t2 / 120.0 - t2 * t2 * t2 / 5040.0,
            1 => t * (-1.0 / 3.0 + t2 / 30.0 - t2 * t2 / 840.0),
            2 => -1.0 / 3.0 + t2 / 10.0 - t2 * t2 / 168.0,
            _ => t * (1.0 / 5.0 - t2 / 42.0 + t2 * t2 / 1080.0),
        };
    }
    let (s, c) = t.sin_cos();
    match k {
        0 => s / t,
        1 => (t * c - s) / t2,
        2 => ((2.0 - t2) * s - 2.0 * t * c) / (t2 * t),
        _ => ((3.0 * t2 - 6.0) * s + (6.0 * t - t2 * t) * c) / (t2 * t2),
    }
}
