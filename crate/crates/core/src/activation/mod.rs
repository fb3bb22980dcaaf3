//! Activation functions with derivative access, decay/periodicity
//! certificates and the finite-difference composites that turn
//! non-decaying activations into decaying ones.

mod profile;
mod registry;

use std::f64::consts::PI;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

pub use profile::{Profile, SMOOTH_ORDER};
pub use registry::{registry, registry_labels};

use crate::error::{Error, Result};
use crate::numeric::binomial;
use crate::quadrature::{self, Tolerance};

/// Smallest |σ̂(a)| accepted by `select_frequency`.
pub const FREQUENCY_FLOOR: f64 = 1e-6;
/// Smallest |a_i| accepted for a periodic Fourier index.
pub const COEFFICIENT_FLOOR: f64 = 1e-6;

/// Classification of an activation, with its certificate.
#[derive(Debug, Clone, PartialEq)]
pub enum ActivationKind {
    /// |σ^{(k)}(t)| ≤ C_p (1 + |t|)^{-p} for k ≤ m_max.
    Decaying { c_p: f64, p: f64 },
    Periodic { period: f64 },
    /// |σ| ≤ ess_sup; σ̂ continuous and non-zero on `fourier_interval`.
    Bounded {
        ess_sup: f64,
        fourier_interval: Option<(f64, f64)>,
    },
}

/// Closed-form transforms σ̂(a) = (1/2π)∫σ(t)e^{-iat}dt supplied with a model.
#[derive(Debug, Clone, PartialEq)]
pub enum Spectrum {
    /// sin(t)/t ↦ ½·1_{|a|<1} (¼ at |a| = 1).
    Sinc,
    /// 1_{[lo, hi)}.
    Box { lo: f64, hi: f64 },
    /// Heaviside step, principal value 1/(2πia) for a ≠ 0.
    Step,
    /// Σ_j w_j σ(t + o_j) ↦ Σ_j w_j e^{iao_j} σ̂(a).
    Stencil {
        base: Box<Spectrum>,
        offsets: Vec<f64>,
        weights: Vec<f64>,
    },
}

impl Spectrum {
    pub fn value(&self, a: f64) -> Option<Complex64> {
        match self {
            Spectrum::Sinc => {
                let v = if a.abs() < 1.0 {
                    0.5
                } else if a.abs() == 1.0 {
                    0.25
                } else {
                    0.0
                };
                Some(Complex64::new(v, 0.0))
            }
            Spectrum::Box { lo, hi } => {
                if a == 0.0 {
                    return Some(Complex64::new((hi - lo) / (2.0 * PI), 0.0));
                }
                let num = Complex64::from_polar(1.0, -a * lo) - Complex64::from_polar(1.0, -a * hi);
                Some(num / Complex64::new(0.0, 2.0 * PI * a))
            }
            Spectrum::Step => {
                if a == 0.0 {
                    None
                } else {
                    Some(Complex64::new(0.0, -1.0 / (2.0 * PI * a)))
                }
            }
            Spectrum::Stencil {
                base,
                offsets,
                weights,
            } => {
                let mult: Complex64 = offsets
                    .iter()
                    .zip(weights)
                    .map(|(o, w)| Complex64::from_polar(*w, a * o))
                    .sum();
                if mult.norm() == 0.0 {
                    return Some(Complex64::new(0.0, 0.0));
                }
                base.value(a).map(|v| v * mult)
            }
        }
    }
}

/// Finite-difference stencil ν(t) = Σ_j w_j σ(t + o_j).
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeStencil {
    pub offsets: Vec<f64>,
    pub weights: Vec<f64>,
    pub n0: usize,
}

impl CompositeStencil {
    pub fn new(offsets: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if offsets.len() != weights.len() || offsets.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "stencil needs equal non-empty offsets/weights, got {} and {}",
                offsets.len(),
                weights.len()
            )));
        }
        if weights.iter().all(|w| *w == 0.0) {
            return Err(Error::InvalidArgument("stencil weights are all zero".into()));
        }
        let n0 = offsets.len();
        Ok(Self { offsets, weights, n0 })
    }
}

/// Caller-supplied decay certificate for a composite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCertificate {
    pub c_p: f64,
    pub p: f64,
    pub m_max: usize,
}

/// Rows of the composite table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Logistic,
    Arctan,
    Tanh,
    Softplus,
    Relu,
    LeakyRelu,
    ReluPow(u32),
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "logistic" => Ok(Family::Logistic),
            "arctan" => Ok(Family::Arctan),
            "tanh" => Ok(Family::Tanh),
            "softplus" => Ok(Family::Softplus),
            "relu" => Ok(Family::Relu),
            "leaky-relu" => Ok(Family::LeakyRelu),
            _ => s
                .strip_prefix("relu^")
                .and_then(|k| k.parse::<u32>().ok())
                .filter(|k| *k >= 1)
                .map(Family::ReluPow)
                .ok_or_else(|| Error::UnknownFamily(s.to_string())),
        }
    }
}

impl Family {
    pub fn stencil(&self) -> CompositeStencil {
        let (offsets, weights) = match self {
            Family::Logistic | Family::Arctan | Family::Tanh => (vec![1.0, 0.0], vec![1.0, -1.0]),
            Family::Softplus | Family::Relu | Family::LeakyRelu => {
                (vec![1.0, -1.0, 0.0], vec![1.0, 1.0, -2.0])
            }
            Family::ReluPow(k) => {
                let k = *k as usize;
                let shift = ((k + 1) / 2) as f64;
                let offsets = (0..=k + 1).map(|i| i as f64 - shift).collect();
                let weights = (0..=k + 1)
                    .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * binomial(k + 1, i))
                    .collect();
                (offsets, weights)
            }
        };
        CompositeStencil::new(offsets, weights).expect("table stencils are well formed")
    }
}

/// An activation σ with closed-form derivatives and a certificate.
#[derive(Debug, Clone)]
pub struct ActivationModel {
    label: String,
    profile: Profile,
    kind: ActivationKind,
    m_max: usize,
    spectrum: Option<Spectrum>,
    support_radius: Option<f64>,
    expansion: Option<(Arc<ActivationModel>, CompositeStencil)>,
}

impl ActivationModel {
    /// Decaying model; the certificate is validated by dense sampling.
    pub fn decaying(label: &str, profile: Profile, cert: DecayCertificate) -> Result<Self> {
        if !(cert.p > 1.0) || !(cert.c_p > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "decay certificate needs p > 1 and C_p > 0, got p = {}, C_p = {}",
                cert.p, cert.c_p
            )));
        }
        let model = Self::raw(
            label,
            profile,
            ActivationKind::Decaying {
                c_p: cert.c_p,
                p: cert.p,
            },
            cert.m_max,
        )?;
        model.check_decay()?;
        Ok(model)
    }

    /// Periodic model, dilated so that its period becomes 2π.
    pub fn periodic(label: &str, profile: Profile, period: f64, m_max: usize) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
        }
        let profile = if (period - 2.0 * PI).abs() < 1e-15 {
            profile
        } else {
            Profile::Dilate {
                base: Box::new(profile),
                scale: period / (2.0 * PI),
            }
        };
        Self::raw(label, profile, ActivationKind::Periodic { period: 2.0 * PI }, m_max)
    }

    /// Bounded model without decay.
    pub fn bounded(
        label: &str,
        profile: Profile,
        ess_sup: f64,
        fourier_interval: Option<(f64, f64)>,
        m_max: usize,
    ) -> Result<Self> {
        if let Some((lo, hi)) = fourier_interval {
            if !(lo < hi) {
                return Err(Error::InvalidArgument(format!("empty Fourier interval ({lo}, {hi})")));
            }
        }
        Self::raw(
            label,
            profile,
            ActivationKind::Bounded {
                ess_sup,
                fourier_interval,
            },
            m_max,
        )
    }

    fn raw(label: &str, profile: Profile, kind: ActivationKind, m_max: usize) -> Result<Self> {
        let cap = profile.max_order();
        if m_max > cap {
            return Err(Error::UnsupportedDerivativeOrder {
                requested: m_max,
                max: cap,
            });
        }
        Ok(Self {
            label: label.to_string(),
            profile,
            kind,
            m_max,
            spectrum: None,
            support_radius: None,
            expansion: None,
        })
    }

    pub fn with_spectrum(mut self, spectrum: Spectrum) -> Self {
        self.spectrum = Some(spectrum);
        self
    }

    /// σ vanishes outside [-r, r].
    pub fn with_support_radius(mut self, r: f64) -> Self {
        self.support_radius = Some(r);
        self
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn with_fourier_interval(mut self, lo: f64, hi: f64) -> Result<Self> {
        match &mut self.kind {
            ActivationKind::Bounded { fourier_interval, .. } if lo < hi => {
                *fourier_interval = Some((lo, hi));
                Ok(self)
            }
            ActivationKind::Bounded { .. } => Err(Error::InvalidArgument(format!("empty Fourier interval ({lo}, {hi})"))),
            _ => Err(Error::InvalidArgument(format!(
                "{} is not a bounded activation",
                self.label
            ))),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn kind(&self) -> &ActivationKind {
        &self.kind
    }
    pub fn m_max(&self) -> usize {
        self.m_max
    }
    pub fn profile(&self) -> &Profile {
        &self.profile
    }
    pub fn spectrum(&self) -> Option<&Spectrum> {
        self.spectrum.as_ref()
    }
    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    /// Base model and stencil if this is a composite ν = Σ w_j σ(· + o_j).
    pub fn expansion(&self) -> Option<(&Arc<ActivationModel>, &CompositeStencil)> {
        self.expansion.as_ref().map(|(m, s)| (m, s))
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.profile.value(t)
    }

    /// σ^{(k)}(t) from the closed form.
    pub fn deriv_eval(&self, k: usize, t: f64) -> Result<f64> {
        if k > self.m_max {
            return Err(Error::UnsupportedDerivativeOrder {
                requested: k,
                max: self.m_max,
            });
        }
        Ok(self.profile.derivative(k, t))
    }

    /// Unchecked σ^{(k)}(t) for hot loops that validated `k` up front.
    #[inline]
    pub fn derivative(&self, k: usize, t: f64) -> f64 {
        self.profile.derivative(k, t)
    }

    /// Dense sample on [-50, 50]: 1000 quasi-random points plus a uniform grid.
    pub fn check_points() -> Vec<f64> {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut pts: Vec<f64> = (1..=1000).map(|i| -50.0 + 100.0 * (i as f64 * g).fract()).collect();
        pts.extend((0..=20_000).map(|i| -50.0 + 0.005 * i as f64));
        pts
    }

    /// Replaces the decay certificate (C_p, p) and re-checks it.
    pub fn with_decay_certificate(mut self, c_p: f64, p: f64) -> Result<Self> {
        if !matches!(self.kind, ActivationKind::Decaying { .. }) {
            return Err(Error::InvalidArgument(format!("{} is not a decaying activation", self.label)));
        }
        if !(p > 1.0) || !(c_p > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "decay certificate needs p > 1 and C_p > 0, got p = {p}, C_p = {c_p}"
            )));
        }
        self.kind = ActivationKind::Decaying { c_p, p };
        self.check_decay()?;
        Ok(self)
    }

    /// Verifies the kind's invariant on the dense sample.
    pub fn check_certificate(&self) -> Result<()> {
        match &self.kind {
            ActivationKind::Decaying { .. } => self.check_decay(),
            ActivationKind::Periodic { period } => {
                for t in Self::check_points() {
                    let d = (self.eval(t + period) - self.eval(t)).abs();
                    if d > 1e-12 {
                        return Err(Error::InvalidArgument(format!(
                            "{} is not {period}-periodic at t = {t} (difference {d:e})",
                            self.label
                        )));
                    }
                }
                Ok(())
            }
            ActivationKind::Bounded { ess_sup, .. } => {
                for t in Self::check_points() {
                    let v = self.eval(t).abs();
                    if v > *ess_sup {
                        return Err(Error::InvalidArgument(format!(
                            "|{}({t})| = {v} exceeds ess_sup {ess_sup}",
                            self.label
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    fn check_decay(&self) -> Result<()> {
        let ActivationKind::Decaying { c_p, p } = self.kind else {
            return Ok(());
        };
        for t in Self::check_points() {
            let bound = c_p * (1.0 + t.abs()).powf(-p);
            for k in 0..=self.m_max {
                let value = self.profile.derivative(k, t).abs();
                if value > bound {
                    return Err(Error::DecayCertificateViolation {
                        label: self.label.clone(),
                        k,
                        t,
                        value,
                        bound,
                    });
                }
            }
        }
        Ok(())
    }

    /// Truncation radius T with C_p·2(1+T)^{1−p}/((p−1)2π) < tol/2, capped by the support.
    pub fn truncation_radius(&self, tol: f64) -> Result<f64> {
        let ActivationKind::Decaying { c_p, p } = self.kind else {
            return Err(Error::NotAbsolutelyIntegrable(self.label.clone()));
        };
        let t = (tol * PI * (p - 1.0) / (2.0 * c_p)).powf(-1.0 / (p - 1.0)) - 1.0;
        let t = t.max(1.0);
        Ok(match self.support_radius {
            Some(r) => t.min(r),
            None => t,
        })
    }

    /// σ̂(a) = (1/2π)∫σ(t)e^{-iat}dt by adaptive quadrature, within `tol`.
    pub fn fourier_value(&self, a: f64, tol: f64) -> Result<Complex64> {
        let t = self.truncation_radius(tol)?;
        let width = if a == 0.0 { 1.0 } else { (PI / a.abs()).min(1.0) };
        let mut breaks = quadrature::symmetric_breaks(t, t.min(64.0), width);
        for bp in self.profile.breakpoints() {
            if bp.abs() < t {
                breaks.push(bp);
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let est = quadrature::integrate(
            |s: f64| Complex64::from_polar(self.eval(s), -a * s),
            &breaks,
            Tolerance::abs(tol * PI),
        )?;
        Ok(est.value / (2.0 * PI))
    }

    /// σ̂(a) from the closed form if one is attached, else by quadrature
    /// (decaying models only).
    pub fn sigma_hat(&self, a: f64, tol: f64) -> Result<Complex64> {
        if let Some(s) = &self.spectrum {
            if let Some(v) = s.value(a) {
                return Ok(v);
            }
        }
        self.fourier_value(a, tol)
    }

    /// Fourier coefficient a_i = (1/2π)∫_0^{2π} σ(b)e^{-iib}db of a periodic model.
    pub fn periodic_coefficient(&self, i: i32, tol: f64) -> Result<Complex64> {
        let ActivationKind::Periodic { period } = self.kind else {
            return Err(Error::InvalidArgument(format!("{} is not periodic", self.label)));
        };
        let f = |b: f64| Complex64::from_polar(self.eval(b), -(i as f64) * b);
        let mut breaks: Vec<f64> = self
            .profile
            .breakpoints()
            .into_iter()
            .map(|b| b.rem_euclid(period))
            .chain([0.0, period])
            .collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let est = quadrature::integrate(f, &breaks, quadrature::Tolerance::abs(tol * 2.0 * PI))?;
        Ok(est.value / (2.0 * PI))
    }

    /// Smallest |i| ≤ 8 (positive first) with |a_i| ≥ floor.
    pub fn select_periodic_index(&self, tol: f64) -> Result<(i32, Complex64)> {
        let mut best = 0.0f64;
        for k in 1..=8 {
            for i in [k, -k] {
                let c = self.periodic_coefficient(i, tol)?;
                if c.norm() >= COEFFICIENT_FLOOR {
                    return Ok((i, c));
                }
                best = best.max(c.norm());
            }
        }
        Err(Error::DegenerateNormalization {
            what: format!("max |a_i| of {}", self.label),
            value: best,
            floor: COEFFICIENT_FLOOR,
        })
    }
}

/// Default frequency grid {±0.25, ±0.5, …, ±4}.
pub fn default_frequency_grid() -> Vec<f64> {
    (1..=16).flat_map(|k| [0.25 * k as f64, -0.25 * k as f64]).collect()
}

/// Grid point maximizing |σ̂(a)|; ties (within quadrature tolerance) go to the
/// smaller |a|, then to the positive sign.
pub fn select_frequency(model: &ActivationModel, grid: &[f64], tol: f64) -> Result<(f64, Complex64)> {
    select_frequency_with_floor(model, grid, tol, FREQUENCY_FLOOR)
}

pub fn select_frequency_with_floor(
    model: &ActivationModel,
    grid: &[f64],
    tol: f64,
    floor: f64,
) -> Result<(f64, Complex64)> {
    if grid.is_empty() || grid.contains(&0.0) {
        return Err(Error::InvalidArgument("frequency grid must be non-empty and exclude 0".into()));
    }
    let values: Vec<(f64, Complex64)> = grid
        .iter()
        .map(|&a| model.sigma_hat(a, tol).map(|v| (a, v)))
        .collect::<Result<_>>()?;
    let max = values.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max);
    if max <= floor {
        return Err(Error::NoUsableFrequency { max, floor });
    }
    let slack = 2.0 * tol + 1e-12 * max;
    let best = values
        .iter()
        .filter(|(_, v)| v.norm() >= max - slack)
        .min_by(|(a, _), (b, _)| {
            a.abs()
                .total_cmp(&b.abs())
                .then_with(|| (*a < 0.0).cmp(&(*b < 0.0)))
        })
        .copied()
        .expect("at least the maximizer qualifies");
    Ok(best)
}

/// ν = Σ w_j σ(· + o_j) for a row of the composite table.
pub fn composite_from_table(
    base: &ActivationModel,
    family: Family,
    cert: DecayCertificate,
) -> Result<(ActivationModel, CompositeStencil)> {
    let stencil = family.stencil();
    let profile = Profile::Stencil {
        base: Box::new(base.profile.clone()),
        offsets: stencil.offsets.clone(),
        weights: stencil.weights.clone(),
    };
    let label = format!("{}-composite", base.label);
    let mut nu = ActivationModel::decaying(&label, profile, cert)?;
    nu.expansion = Some((Arc::new(base.clone()), stencil.clone()));
    Ok((nu, stencil))
}

/// τ(t) = σ(t + 1) − σ(t) for a bounded, non-constant σ.
pub fn bv_first_difference(base: &ActivationModel) -> Result<ActivationModel> {
    let ActivationKind::Bounded { ess_sup, .. } = base.kind else {
        return Err(Error::InvalidArgument(format!("{} is not a bounded activation", base.label)));
    };
    let stencil = CompositeStencil::new(vec![1.0, 0.0], vec![1.0, -1.0])?;
    let profile = Profile::Stencil {
        base: Box::new(base.profile.clone()),
        offsets: stencil.offsets.clone(),
        weights: stencil.weights.clone(),
    };
    if ActivationModel::check_points().iter().all(|&t| profile.value(t) == 0.0) {
        return Err(Error::DegenerateActivation(format!(
            "{}(t + 1) − {}(t) vanishes on the check grid",
            base.label, base.label
        )));
    }
    let mut tau = ActivationModel::bounded(
        &format!("{}-diff", base.label),
        profile,
        2.0 * ess_sup,
        None,
        base.m_max,
    )?;
    if let Some(s) = &base.spectrum {
        tau.spectrum = Some(Spectrum::Stencil {
            base: Box::new(s.clone()),
            offsets: stencil.offsets.clone(),
            weights: stencil.weights.clone(),
        });
    }
    tau.expansion = Some((Arc::new(base.clone()), stencil));
    Ok(tau)
}

/// ∫|σ| over [-r, r] by adaptive quadrature.
pub fn l1_norm(model: &ActivationModel, r: f64, tol: f64) -> Result<f64> {
    let mut breaks = quadrature::symmetric_breaks(r, r.min(64.0), 1.0);
    breaks.extend(model.profile.breakpoints().into_iter().filter(|b| b.abs() < r));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    Ok(quadrature::integrate(|t: f64| model.eval(t).abs(), &breaks, Tolerance::abs(tol))?.value)
}
