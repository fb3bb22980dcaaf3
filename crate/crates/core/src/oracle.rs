//! Brute-force quadrature checks of the integral representations and the
//! envelope bounds. Slow by design; d ≤ 2 only.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::activation::{ActivationKind, ActivationModel};
use crate::error::{Error, Result};
use crate::metrics::{smoothness_constant, DomainBox};
use crate::numeric::{dot, norm};
use crate::quadrature::{self, composite_kronrod, integrate_half_line, symmetric_breaks, uniform_breaks, Tolerance};
use crate::representation::{approx_constant_c, envelope_h, KernelMode, MollifierPair, RepresentationKernel};
use crate::rng::{domain, stream};
use crate::target::SpectralTarget;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Adaptive Gauss–Kronrod in one variable.
    Adaptive1d,
    /// Nested adaptive rules over (ω, b).
    Tensor2d,
    /// Fixed composite rule in the outer variable, adaptive inside.
    DenseGrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub scheme: Scheme,
    pub tol: f64,
    /// Evaluation budget per one-dimensional integral.
    pub budget: usize,
}

impl QuadratureSpec {
    pub fn new(scheme: Scheme, tol: f64, budget: usize) -> Result<Self> {
        if !(tol > 0.0) || budget < 1000 {
            return Err(Error::InvalidArgument(format!(
                "quadrature spec needs tol > 0 and budget >= 1000, got {tol} and {budget}"
            )));
        }
        Ok(Self { scheme, tol, budget })
    }

    fn tolerance(&self, scale: f64) -> Tolerance {
        Tolerance::abs(self.tol * scale).with_budget(self.budget)
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            scheme: Scheme::Tensor2d,
            tol: 1e-8,
            budget: 2_000_000,
        }
    }
}

/// Phase used inside the representation integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMode {
    Exact,
    /// χ ≡ 1; for fault-injection checks.
    One,
}

/// Runs `f` with a slot for the first error raised inside a quadrature closure.
fn guarded<T>(f: impl FnOnce(&RefCell<Option<Error>>) -> Result<T>) -> Result<T> {
    let slot = RefCell::new(None);
    let out = f(&slot);
    if let Some(e) = slot.into_inner() {
        return Err(e);
    }
    out
}

fn record<V: Default>(slot: &RefCell<Option<Error>>, r: Result<V>) -> V {
    match r {
        Ok(v) => v,
        Err(e) => {
            slot.borrow_mut().get_or_insert(e);
            V::default()
        }
    }
}

/// Outer ω-cutoff for the density part of a target.
fn omega_cutoff(target: &SpectralTarget) -> f64 {
    9.0 * target.spectral_scale()
}

fn outer_integral(spec: &QuadratureSpec, w: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    if w == 0.0 {
        return Ok(0.0);
    }
    match spec.scheme {
        Scheme::DenseGrid => Ok(composite_kronrod(f, -w, w, 400)),
        _ => Ok(quadrature::integrate(f, &symmetric_breaks(w, w, w / 32.0), spec.tolerance(1.0))?.value),
    }
}

/// max_x |E_{dλ}[J χ σ(ω/a·x + b)] − f(x)| by tensor quadrature (d = 1, decaying kernel).
pub fn representation_identity_check(
    target: &SpectralTarget,
    kernel: &RepresentationKernel,
    xs: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64> {
    representation_identity_check_with(target, kernel, xs, spec, PhaseMode::Exact)
}

pub fn representation_identity_check_with(
    target: &SpectralTarget,
    kernel: &RepresentationKernel,
    xs: &[f64],
    spec: &QuadratureSpec,
    phase: PhaseMode,
) -> Result<f64> {
    if target.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: target.dim(),
        });
    }
    if !matches!(kernel.mode, KernelMode::Decaying) {
        return Err(Error::InvalidArgument("representation check needs a decaying kernel".into()));
    }
    let act = kernel.activation();
    let t_sig = act.truncation_radius(spec.tol * 1e-3)?;
    let bps = act.profile().breakpoints();
    let (a, m) = (kernel.a, kernel.m as i32);

    let inner = |slot: &RefCell<Option<Error>>, omega: f64, weight: f64, x: f64| -> f64 {
        let shift = omega * x / a;
        let density = |b: f64| (1.0 + omega.abs()).powi(m) * envelope_h(b, omega.abs(), kernel.radius, a, kernel.p) * weight / kernel.normalizer;
        let g = |b: f64| {
            let chi = match phase {
                PhaseMode::Exact => record(slot, kernel.phase_chi(&[omega], b, target)),
                PhaseMode::One => 1.0,
            };
            density(b) * kernel.coefficient_j(&[omega], b) * chi * act.eval(shift + b)
        };
        let mut breaks: Vec<f64> = symmetric_breaks(t_sig, t_sig.min(16.0), 0.5).iter().map(|b| b - shift).collect();
        breaks.extend(bps.iter().map(|p| p - shift).filter(|b| (b + shift).abs() < t_sig));
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        record(slot, quadrature::integrate(g, &breaks, spec.tolerance(1e-2)).map(|e| e.value))
    };

    let w = omega_cutoff(target);
    let mut worst: f64 = 0.0;
    for &x in xs {
        let value = guarded(|slot| {
            let dens = outer_integral(spec, w, |om| inner(slot, om, target.magnitude(&[om]), x))?;
            let atoms: f64 = target
                .atoms()
                .iter()
                .map(|at| inner(slot, at.omega[0], at.coeff.norm(), x))
                .sum();
            Ok(dens + atoms)
        })?;
        worst = worst.max((value - target.eval_unchecked(&[0], &[x])).abs());
    }
    Ok(worst)
}

/// |∫∫(1/I)(1+|ω|)^m h(b,ω)M(ω) db dω − 1| with both integrals done numerically (d = 1).
pub fn normalization_check(target: &SpectralTarget, kernel: &RepresentationKernel, spec: &QuadratureSpec) -> Result<f64> {
    if target.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: target.dim(),
        });
    }
    let (a, p, r) = (kernel.a, kernel.p, kernel.radius);
    let b_integral = |slot: &RefCell<Option<Error>>, om: f64| -> f64 {
        let c = r * om.abs() / a.abs();
        let core = quadrature::integrate(|b| envelope_h(b, om.abs(), r, a, p), &[-c, 0.0, c], spec.tolerance(1e-3));
        let tail = integrate_half_line(|b| envelope_h(b, om.abs(), r, a, p), c, 1.0, spec.tolerance(1e-3));
        record(slot, core.map(|e| e.value)) + 2.0 * record(slot, tail.map(|e| e.value))
    };
    let m = kernel.m as i32;
    let total = guarded(|slot| {
        let dens = outer_integral(spec, omega_cutoff(target), |om| {
            (1.0 + om.abs()).powi(m) * target.magnitude(&[om]) * b_integral(slot, om)
        })?;
        let atoms: f64 = target
            .atoms()
            .iter()
            .map(|at| (1.0 + at.omega[0].abs()).powi(m) * at.coeff.norm() * b_integral(slot, at.omega[0]))
            .sum();
        Ok(dens + atoms)
    })?;
    Ok((total / kernel.normalizer - 1.0).abs())
}

/// max_x |E[β-weighted periodic features] − f(x)| for an atomic target; the
/// b-integral over [0, 2π] is done by quadrature split at the jumps.
pub fn periodic_identity_check(
    target: &SpectralTarget,
    kernel: &RepresentationKernel,
    xs: &[Vec<f64>],
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !target.bumps().is_empty() {
        return Err(Error::InvalidArgument("periodic identity check needs an atomic target".into()));
    }
    if !matches!(kernel.mode, KernelMode::Periodic { .. }) {
        return Err(Error::InvalidArgument("periodic identity check needs a periodic kernel".into()));
    }
    let act = kernel.activation();
    let m = kernel.m as i32;
    let mut worst: f64 = 0.0;
    for x in xs {
        let value = guarded(|slot| {
            let mut total = 0.0;
            for at in target.atoms() {
                let y = dot(&kernel.inner_weight(&at.omega), x);
                let dens = (1.0 + norm(&at.omega)).powi(m) * at.coeff.norm() / (2.0 * PI * kernel.normalizer);
                let mag = kernel.magnitude(&at.omega, 0.0);
                let g = |b: f64| dens * mag * record(slot, kernel.phase_chi(&at.omega, b, target)) * act.eval(y + b);
                // Split where y + b crosses a multiple of π/2.
                let mut breaks = vec![0.0, 2.0 * PI];
                let q = PI / 2.0;
                let mut k = ((y) / q).ceil();
                while k * q - y < 2.0 * PI {
                    breaks.push(k * q - y);
                    k += 1.0;
                }
                breaks.sort_by(f64::total_cmp);
                breaks.dedup();
                total += record(slot, quadrature::integrate(g, &breaks, spec.tolerance(1e-2)).map(|e| e.value));
            }
            Ok(total)
        })?;
        worst = worst.max((value - target.eval_unchecked(&vec![0; x.len()], x)).abs());
    }
    Ok(worst)
}

/// For each ε: max over y of |(2πC(ε))^{-1}∫σ(y + b)φ(εb)e^{-iab}db − e^{iay}|,
/// with y = ω·x.
pub fn approx_identity_check(
    activation: &ActivationModel,
    mollifier: &MollifierPair,
    epsilons: &[f64],
    a: f64,
    ys: &[f64],
    spec: &QuadratureSpec,
) -> Result<Vec<f64>> {
    if !matches!(activation.kind(), ActivationKind::Bounded { .. }) {
        return Err(Error::InvalidArgument(format!("{} is not a bounded activation", activation.label())));
    }
    let u = mollifier.half_width();
    let bps = activation.profile().breakpoints();
    let mut out = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let c = approx_constant_c(eps, a, activation, mollifier, spec.tol * 1e-2)?;
        let mut worst: f64 = 0.0;
        for &y in ys {
            let g = |b: f64| Complex64::from_polar(activation.eval(y + b) * mollifier.phi(eps * b), -a * b);
            let mut breaks = uniform_breaks(-u / eps, u / eps, 1.0);
            breaks.extend(bps.iter().map(|p| p - y).filter(|b| b.abs() < u / eps));
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            let v = quadrature::integrate(g, &breaks, spec.tolerance(1e-2))?.value;
            let lhs = v / (2.0 * PI * c);
            worst = worst.max((lhs - Complex64::from_polar(1.0, a * y)).norm());
        }
        out.push(worst);
    }
    Ok(out)
}

/// Counts from random checks of the envelope bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeReport {
    pub checked: usize,
    /// |σ^{(k)}(ω/a·x + b)| > C_p h(b, ω).
    pub domination_violations: usize,
    /// |ω/a·x + b| < max(0, |b| − R|ω|/|a|).
    pub triangle_violations: usize,
    /// max of |σ^{(k)}| / (C_p h).
    pub max_ratio: f64,
}

/// Draws `count` triples (x ∈ Ω recentered, ω, b) across scales and checks
/// domination for every k ≤ m and the triangle bound.
pub fn envelope_domination_check(kernel: &RepresentationKernel, dom: &DomainBox, count: usize, seed: u64) -> Result<EnvelopeReport> {
    if !matches!(kernel.mode, KernelMode::Decaying) {
        return Err(Error::InvalidArgument("envelope checks need a decaying kernel".into()));
    }
    let act = kernel.activation();
    let c0 = dom.centroid();
    let d = dom.dim();
    let mut rep = EnvelopeReport {
        checked: 0,
        domination_violations: 0,
        triangle_violations: 0,
        max_ratio: 0.0,
    };
    for i in 0..count {
        let mut rng = stream(seed, domain::TEST, i as u64);
        let u: Vec<f64> = (0..d).map(|_| rng.random()).collect();
        let x: Vec<f64> = dom.map_unit(&u).iter().zip(&c0).map(|(v, c)| v - c).collect();
        let ws = [0.1, 1.0, 10.0][rng.random_range(0..3)];
        let bs = [1.0, 10.0, 100.0][rng.random_range(0..3)];
        let omega: Vec<f64> = (0..d).map(|_| ws * rng.sample::<f64, _>(StandardNormal)).collect();
        let b = bs * rng.sample::<f64, _>(StandardNormal);
        let z = dot(&kernel.inner_weight(&omega), &x) + b;
        let h = kernel.envelope(&omega, b);
        let floor = (b.abs() - kernel.radius * norm(&omega) / kernel.a.abs()).max(0.0);
        if z.abs() < floor * (1.0 - 1e-12) - 1e-12 {
            rep.triangle_violations += 1;
        }
        for k in 0..=kernel.m {
            let ratio = act.derivative(k, z).abs() / (kernel.c_p * h);
            rep.max_ratio = rep.max_ratio.max(ratio);
            if ratio > 1.0 + 1e-12 {
                rep.domination_violations += 1;
            }
        }
        rep.checked += 1;
    }
    Ok(rep)
}

/// sup ‖J χ σ(ω/a·x + b)‖_{H^m(Ω)} ≤ C(m)|Ω|^{1/2} C_p I/(2π|σ̂(a)|)·max(1, 1/|a|)^m.
pub fn variance_bound_constant(kernel: &RepresentationKernel, dom: &DomainBox) -> f64 {
    smoothness_constant(dom.dim(), kernel.m)
        * dom.measure().sqrt()
        * kernel.c_p
        * kernel.normalizer
        / (2.0 * PI * kernel.sigma_hat_a.norm())
        * (1.0f64).max(1.0 / kernel.a.abs()).powi(kernel.m as i32)
}

/// Closed-form ∫h db against quadrature; returns the relative deviation.
pub fn envelope_integral_check(omega_norm: f64, radius: f64, a: f64, p: f64, spec: &QuadratureSpec) -> Result<f64> {
    let c = radius * omega_norm / a.abs();
    let h = |b: f64| envelope_h(b, omega_norm, radius, a, p);
    let core = quadrature::integrate(h, &[-c, 0.0, c], spec.tolerance(1e-2))?.value;
    let tail = integrate_half_line(h, c, 1.0, spec.tolerance(1e-2))?.value;
    let closed = crate::representation::envelope_b_integral(omega_norm, radius, a, p);
    Ok(((core + 2.0 * tail) - closed).abs() / closed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::registry;
    use crate::representation::KernelOptions;
    use std::sync::Arc;

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::new(Scheme::Adaptive1d, 0.0, 5000).is_err());
        assert!(QuadratureSpec::new(Scheme::Adaptive1d, 1e-6, 10).is_err());
    }

    #[test]
    fn cos_periodic_identity() {
        let cos = Arc::new(registry("cos").unwrap());
        let f = SpectralTarget::cosine(vec![1.3]).unwrap();
        let k = RepresentationKernel::periodic(cos, &f, 0, &KernelOptions::default()).unwrap();
        let xs: Vec<Vec<f64>> = (0..5).map(|i| vec![-1.0 + 0.5 * i as f64]).collect();
        let dev = periodic_identity_check(&f, &k, &xs, &QuadratureSpec::default()).unwrap();
        assert!(dev < 1e-10, "{dev}");
    }

    #[test]
    fn envelope_integrals() {
        let spec = QuadratureSpec::default();
        for (w, p) in [(0.0, 2.0), (1.0, 2.0), (0.0, 3.0), (2.5, 2.2)] {
            assert!(envelope_integral_check(w, 1.0, 1.0, p, &spec).unwrap() < 1e-8);
        }
    }

    #[test]
    fn gaussian_normalization() {
        let g = SpectralTarget::gaussian(1.0, vec![0.0]).unwrap();
        let act = Arc::new(registry("gaussian").unwrap());
        let k = RepresentationKernel::decaying(act, &g, 1.0, 0, &KernelOptions::default()).unwrap();
        assert!(normalization_check(&g, &k, &QuadratureSpec::default()).unwrap() < 1e-4);
    }
}
