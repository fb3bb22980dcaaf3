//! Integral representations of a target by shifted, dilated activations:
//! envelope h, normalizer I, coefficient J, phase χ, and the periodic and
//! mollified variants.

mod mollifier;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

pub use mollifier::{build_mollifier, phi_hat, MollifierPair, DEFAULT_GRID_POINTS, DEFAULT_HALF_WIDTH, MIN_GRID_POINTS};

use crate::activation::{default_frequency_grid, select_frequency, ActivationKind, ActivationModel};
use crate::error::{Error, Result};
use crate::numeric::norm;
use crate::quadrature::{self, Tolerance};
use crate::target::{RadialWeight, SpectralTarget};

/// Floor on |C(ε)|.
pub const C_EPS_FLOOR: f64 = 1e-6;

/// h(b, ω) = (1 + max(0, |b| − R|ω|/|a|))^{-p}.
pub fn envelope_h(b: f64, omega_norm: f64, radius: f64, a: f64, p: f64) -> f64 {
    let excess = (b.abs() - radius * omega_norm / a.abs()).max(0.0);
    (1.0 + excess).powf(-p)
}

/// ∫h db = 2R|ω|/|a| + 2/(p − 1).
pub fn envelope_b_integral(omega_norm: f64, radius: f64, a: f64, p: f64) -> f64 {
    2.0 * radius * omega_norm / a.abs() + 2.0 / (p - 1.0)
}

/// I = ∫∫(1 + |ω|)^m h(b, ω)|f̂(ω)| db dω, with the b-integral in closed form.
pub fn normalizer_i(target: &SpectralTarget, m: usize, radius: f64, a: f64, p: f64, tol: f64) -> Result<f64> {
    let w = RadialWeight::barron(m).times_linear(2.0 * radius / a.abs(), 2.0 / (p - 1.0))?;
    let dens = target.density_integral(&|r| w.eval(r), tol)?;
    let atoms: f64 = target
        .atoms()
        .iter()
        .map(|at| w.eval(norm(&at.omega)) * at.coeff.norm())
        .sum();
    Ok(dens + atoms)
}

/// C(ε) = ∫_{-1}^{1} σ̂(a + εs) φ̂(s) ds, i.e. (1/ε)∫σ̂(a + t)φ̂(t/ε) dt.
pub fn approx_constant_c_with(
    eps: f64,
    a: f64,
    interval: (f64, f64),
    phi_hat: &dyn Fn(f64) -> f64,
    sigma_hat: &dyn Fn(f64) -> Result<Complex64>,
    tol: f64,
) -> Result<Complex64> {
    let (lo, hi) = interval;
    if !(eps > 0.0) || a - eps < lo || a + eps > hi {
        return Err(Error::EpsilonTooLarge {
            lo: a - eps,
            hi: a + eps,
            ilo: lo,
            ihi: hi,
        });
    }
    let failure = std::cell::RefCell::new(None);
    let f = |s: f64| match sigma_hat(a + eps * s) {
        Ok(v) => v * phi_hat(s),
        Err(e) => {
            *failure.borrow_mut() = Some(e);
            Complex64::new(0.0, 0.0)
        }
    };
    let c = quadrature::integrate(f, &[-1.0, -0.5, 0.0, 0.5, 1.0], Tolerance::abs(tol))?.value;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    if c.norm() < C_EPS_FLOOR {
        return Err(Error::DegenerateNormalization {
            what: "|C(eps)|".into(),
            value: c.norm(),
            floor: C_EPS_FLOOR,
        });
    }
    Ok(c)
}

/// C(ε) for a model, using its Fourier interval (the whole line for decaying models).
pub fn approx_constant_c(eps: f64, a: f64, model: &ActivationModel, mollifier: &MollifierPair, tol: f64) -> Result<Complex64> {
    let interval = match model.kind() {
        ActivationKind::Bounded {
            fourier_interval: Some(i),
            ..
        } => *i,
        ActivationKind::Decaying { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        _ => return Err(Error::NotAbsolutelyIntegrable(model.label().to_string())),
    };
    let sh = |x: f64| model.sigma_hat(x, tol * 1e-2);
    approx_constant_c_with(eps, a, interval, &|s| mollifier.phi_hat(s), &sh, tol)
}

/// Construction-specific constants of a kernel.
#[derive(Debug, Clone)]
pub enum KernelMode {
    /// Decaying activation: dλ ∝ (1+|ω|)^m h(b,ω)|f̂(ω)|.
    Decaying,
    /// Periodic activation with Fourier index i and coefficient a_i; b ~ U[0, 2π].
    Periodic { index: i32, coefficient: Complex64 },
    /// Bounded activation with the mollified representation.
    Approx {
        epsilon: f64,
        c_eps: Complex64,
        mollifier: Arc<MollifierPair>,
    },
}

/// Frozen constants of one experiment.
#[derive(Debug, Clone)]
pub struct RepresentationKernel {
    /// Frequency a (decaying, approx) or the index i (periodic).
    pub a: f64,
    /// σ̂(a), or a_i in periodic mode.
    pub sigma_hat_a: Complex64,
    pub radius: f64,
    pub p: f64,
    pub c_p: f64,
    pub m: usize,
    /// I (decaying), ‖f‖_{B^m} (periodic) or ‖f̂‖₁ (approx).
    pub normalizer: f64,
    pub mode: KernelMode,
    activation: Arc<ActivationModel>,
    dim: usize,
}

/// Options for kernel construction.
#[derive(Debug, Clone)]
pub struct KernelOptions {
    pub tol: f64,
    pub frequency_grid: Vec<f64>,
    /// Fixed frequency instead of the grid scan / interval midpoint.
    pub frequency: Option<f64>,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            frequency_grid: default_frequency_grid(),
            frequency: None,
        }
    }
}

impl RepresentationKernel {
    /// Kernel for a decaying activation on a domain of radius R (after recentering).
    pub fn decaying(
        activation: Arc<ActivationModel>,
        target: &SpectralTarget,
        radius: f64,
        m: usize,
        opts: &KernelOptions,
    ) -> Result<Self> {
        let ActivationKind::Decaying { c_p, p } = *activation.kind() else {
            return Err(Error::InvalidArgument(format!(
                "{} is not a decaying activation",
                activation.label()
            )));
        };
        check_order(&activation, m)?;
        let (a, sigma_hat_a) = match opts.frequency {
            Some(a) => (a, activation.fourier_value(a, opts.tol)?),
            None => select_frequency(&activation, &opts.frequency_grid, opts.tol)?,
        };
        if sigma_hat_a.norm() < crate::activation::FREQUENCY_FLOOR {
            return Err(Error::NoUsableFrequency {
                max: sigma_hat_a.norm(),
                floor: crate::activation::FREQUENCY_FLOOR,
            });
        }
        let normalizer = normalizer_i(target, m, radius, a, p, opts.tol)?;
        Ok(Self {
            a,
            sigma_hat_a,
            radius,
            p,
            c_p,
            m,
            normalizer,
            mode: KernelMode::Decaying,
            activation,
            dim: target.dim(),
        })
    }

    /// Kernel for a periodic activation (period 2π).
    pub fn periodic(activation: Arc<ActivationModel>, target: &SpectralTarget, m: usize, opts: &KernelOptions) -> Result<Self> {
        if !matches!(activation.kind(), ActivationKind::Periodic { .. }) {
            return Err(Error::InvalidArgument(format!("{} is not periodic", activation.label())));
        }
        check_order(&activation, m)?;
        let (index, coefficient) = activation.select_periodic_index(opts.tol)?;
        let normalizer = target.barron_norm(m as f64, opts.tol)?;
        Ok(Self {
            a: index as f64,
            sigma_hat_a: coefficient,
            radius: 0.0,
            p: f64::NAN,
            c_p: f64::NAN,
            m,
            normalizer,
            mode: KernelMode::Periodic { index, coefficient },
            activation,
            dim: target.dim(),
        })
    }

    /// Kernel for a bounded activation with the mollified representation.
    pub fn approx(
        activation: Arc<ActivationModel>,
        target: &SpectralTarget,
        mollifier: Arc<MollifierPair>,
        epsilon: f64,
        opts: &KernelOptions,
    ) -> Result<Self> {
        let ActivationKind::Bounded {
            fourier_interval: Some((lo, hi)),
            ..
        } = *activation.kind()
        else {
            return Err(Error::InvalidArgument(format!(
                "{} is not a bounded activation with a Fourier interval",
                activation.label()
            )));
        };
        let a = opts.frequency.unwrap_or(0.5 * (lo + hi));
        if a == 0.0 {
            return Err(Error::InvalidArgument("the frequency a must be non-zero".into()));
        }
        let c_eps = approx_constant_c(epsilon, a, &activation, &mollifier, opts.tol)?;
        let sigma_hat_a = activation.sigma_hat(a, opts.tol)?;
        let normalizer = target.barron_norm(0.0, opts.tol)?;
        Ok(Self {
            a,
            sigma_hat_a,
            radius: 0.0,
            p: f64::NAN,
            c_p: f64::NAN,
            m: 0,
            normalizer,
            mode: KernelMode::Approx {
                epsilon,
                c_eps,
                mollifier,
            },
            activation,
            dim: target.dim(),
        })
    }

    pub fn activation(&self) -> &Arc<ActivationModel> {
        &self.activation
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Same kernel with σ̂(a) replaced; for fault-injection tests.
    pub fn with_sigma_hat(mut self, v: Complex64) -> Self {
        self.sigma_hat_a = v;
        if let KernelMode::Periodic { coefficient, .. } = &mut self.mode {
            *coefficient = v;
        }
        self
    }

    pub fn envelope(&self, omega: &[f64], b: f64) -> f64 {
        envelope_h(b, norm(omega), self.radius, self.a, self.p)
    }

    /// Inner weight w = ω/a (decaying, approx) or ω/i (periodic).
    pub fn inner_weight(&self, omega: &[f64]) -> Vec<f64> {
        omega.iter().map(|w| w / self.a).collect()
    }

    /// J(ω, b) = I(2π|σ̂(a)|)^{-1}(1 + |ω|)^{-m}h(b, ω)^{-1}.
    pub fn coefficient_j(&self, omega: &[f64], b: f64) -> f64 {
        let r = norm(omega);
        self.normalizer / (2.0 * PI * self.sigma_hat_a.norm())
            * (1.0 + r).powi(-(self.m as i32))
            / envelope_h(b, r, self.radius, self.a, self.p)
    }

    /// Magnitude factor of one feature, so that f = E[magnitude·χ·σ(w·x + b)].
    pub fn magnitude(&self, omega: &[f64], b: f64) -> f64 {
        match &self.mode {
            KernelMode::Decaying => self.coefficient_j(omega, b),
            KernelMode::Periodic { coefficient, .. } => {
                self.normalizer / coefficient.norm() * (1.0 + norm(omega)).powi(-(self.m as i32))
            }
            KernelMode::Approx {
                epsilon,
                c_eps,
                mollifier,
            } => self.normalizer * mollifier.scaled_l1(*epsilon) / (2.0 * PI * c_eps.norm()),
        }
    }

    /// χ(ω, b) = cos(θ_f(ω) − arg σ̂(a) − ab); the approx mode uses C(ε)
    /// in place of σ̂(a) and carries the sign of φ(εb).
    pub fn phase_chi(&self, omega: &[f64], b: f64, target: &SpectralTarget) -> Result<f64> {
        let uf = target.unit_phase(omega)?;
        let rot = Complex64::from_polar(1.0, -self.a * b);
        match &self.mode {
            KernelMode::Decaying | KernelMode::Periodic { .. } => {
                let us = self.sigma_hat_a / self.sigma_hat_a.norm();
                Ok((uf * us.conj() * rot).re.clamp(-1.0, 1.0))
            }
            KernelMode::Approx {
                epsilon,
                c_eps,
                mollifier,
            } => {
                let uc = c_eps.conj() / c_eps.norm();
                let phi = mollifier.phi_checked(epsilon * b)?;
                let sign = if phi > 0.0 {
                    1.0
                } else if phi < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                Ok(sign * (uc * uf * rot).re.clamp(-1.0, 1.0))
            }
        }
    }
}

fn check_order(activation: &ActivationModel, m: usize) -> Result<()> {
    if m > activation.m_max() {
        return Err(Error::UnsupportedDerivativeOrder {
            requested: m,
            max: activation.m_max(),
        });
    }
    Ok(())
}
