//! Feature samplers for the plain, periodic, mollified and stratified
//! constructions. Every sample owns a counter-based stream, so output is
//! independent of the thread count.

mod stratified;

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;

pub use stratified::{
    build_stratified_plan, build_stratified_plan_from_pilot, draw_pilot, draw_stratified, variance_comparison, CellSamples,
    PilotDraw, StratCell, StratifiedPlan, VarianceComparison, DEFAULT_CELL_BUDGET,
};

use crate::error::{Error, Result};
use crate::representation::{KernelMode, MollifierPair, RepresentationKernel};
use crate::rng::{domain, stream};
use crate::target::{RadialWeight, SpectralTarget, WeightedDensity};

/// One random feature (ω, b, η).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSample {
    pub omega: Vec<f64>,
    pub b: f64,
    /// +1 or −1; +1 outside the stratified path.
    pub eta: i8,
    /// Reserved; 0 for exact samplers.
    pub log_weight: f64,
}

impl FeatureSample {
    pub fn new(omega: Vec<f64>, b: f64) -> Self {
        Self {
            omega,
            b,
            eta: 1,
            log_weight: 0.0,
        }
    }
}

/// Conditional law of b given ω.
#[derive(Debug, Clone)]
pub enum BiasLaw {
    /// Density ∝ h(b, ω): uniform core |b| ≤ R|ω|/|a|, Pareto tails with exponent p.
    Envelope { radius: f64, a: f64, p: f64 },
    /// Uniform on [lo, hi].
    Uniform { lo: f64, hi: f64 },
    /// b = u/ε with u ∝ |φ(u)|.
    Mollified { mollifier: Arc<MollifierPair>, epsilon: f64 },
}

impl BiasLaw {
    fn core(&self, omega: &[f64]) -> f64 {
        match self {
            BiasLaw::Envelope { radius, a, .. } => radius * crate::numeric::norm(omega) / a.abs(),
            _ => 0.0,
        }
    }

    /// Unnormalized CDF G(b) with G(∞) = `mass(ω)`. Not available for the mollified law.
    pub fn unnormalized_cdf(&self, omega: &[f64], b: f64) -> f64 {
        match self {
            BiasLaw::Envelope { p, .. } => {
                let c = self.core(omega);
                let q = 1.0 / (p - 1.0);
                if b <= -c {
                    q * (1.0 - c - b).powf(1.0 - p)
                } else if b <= c {
                    q + b + c
                } else {
                    q + 2.0 * c + q * (1.0 - (1.0 + b - c).powf(1.0 - p))
                }
            }
            BiasLaw::Uniform { lo, hi } => b.clamp(*lo, *hi) - lo,
            BiasLaw::Mollified { .. } => f64::NAN,
        }
    }

    /// Total mass ∫ h(b, ω) db (or the interval length).
    pub fn mass(&self, omega: &[f64]) -> f64 {
        match self {
            BiasLaw::Envelope { p, .. } => 2.0 * self.core(omega) + 2.0 / (p - 1.0),
            BiasLaw::Uniform { lo, hi } => hi - lo,
            BiasLaw::Mollified { .. } => f64::NAN,
        }
    }

    /// Normalized CDF of b given ω.
    pub fn cdf(&self, omega: &[f64], b: f64) -> f64 {
        self.unnormalized_cdf(omega, b) / self.mass(omega)
    }

    fn inverse(&self, omega: &[f64], g: f64) -> f64 {
        match self {
            BiasLaw::Envelope { p, .. } => {
                let c = self.core(omega);
                let q = 1.0 / (p - 1.0);
                if g <= q {
                    let t = (g / q).powf(1.0 / (1.0 - p)) - 1.0;
                    -c - t
                } else if g <= q + 2.0 * c {
                    g - q - c
                } else {
                    let r = ((g - q - 2.0 * c) / q).min(1.0);
                    c + (1.0 - r).powf(1.0 / (1.0 - p)) - 1.0
                }
            }
            BiasLaw::Uniform { lo, .. } => lo + g,
            BiasLaw::Mollified { .. } => f64::NAN,
        }
    }

    /// Draw from the conditional law.
    pub fn sample<R: Rng>(&self, omega: &[f64], rng: &mut R) -> f64 {
        match self {
            BiasLaw::Mollified { mollifier, epsilon } => mollifier.sample_abs(rng) / epsilon,
            _ => {
                let u: f64 = rng.sample(Open01);
                self.inverse(omega, u * self.mass(omega))
            }
        }
    }

    /// Draw from the conditional law restricted to [lo, hi] (exact inverse CDF).
    pub fn sample_in<R: Rng>(&self, omega: &[f64], lo: f64, hi: f64, rng: &mut R) -> f64 {
        let g0 = self.unnormalized_cdf(omega, lo);
        let g1 = self.unnormalized_cdf(omega, hi);
        let u: f64 = rng.sample(Open01);
        self.inverse(omega, g0 + u * (g1 - g0)).clamp(lo, hi)
    }
}

/// Joint law of (ω, b): ω from a weighted spectral density, b from a conditional law.
#[derive(Debug, Clone)]
pub struct FeatureLaw {
    pub omega: WeightedDensity,
    pub bias: BiasLaw,
}

impl FeatureLaw {
    /// dλ ∝ (1+|ω|)^m h(b, ω)|f̂(ω)|; the ω-marginal carries ∫h db.
    pub fn plain(kernel: &RepresentationKernel, target: &SpectralTarget, tol: f64) -> Result<Self> {
        if !matches!(kernel.mode, KernelMode::Decaying) {
            return Err(Error::InvalidArgument("plain sampling needs a decaying kernel".into()));
        }
        let weight = RadialWeight::barron(kernel.m).times_linear(2.0 * kernel.radius / kernel.a.abs(), 2.0 / (kernel.p - 1.0))?;
        Ok(Self {
            omega: WeightedDensity::new(target, weight, tol)?,
            bias: BiasLaw::Envelope {
                radius: kernel.radius,
                a: kernel.a,
                p: kernel.p,
            },
        })
    }

    /// (1+|ω|)^m|f̂(ω)| ⊗ U[0, 2π].
    pub fn periodic(kernel: &RepresentationKernel, target: &SpectralTarget, tol: f64) -> Result<Self> {
        Ok(Self {
            omega: WeightedDensity::new(target, RadialWeight::barron(kernel.m), tol)?,
            bias: BiasLaw::Uniform { lo: 0.0, hi: 2.0 * PI },
        })
    }

    /// |f̂(ω)| ⊗ |φ(εb)|.
    pub fn approx(target: &SpectralTarget, mollifier: Arc<MollifierPair>, epsilon: f64, tol: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self {
            omega: WeightedDensity::new(target, RadialWeight::barron(0), tol)?,
            bias: BiasLaw::Mollified { mollifier, epsilon },
        })
    }

    /// Law matching the kernel's mode.
    pub fn for_kernel(kernel: &RepresentationKernel, target: &SpectralTarget, tol: f64) -> Result<Self> {
        match &kernel.mode {
            KernelMode::Decaying => Self::plain(kernel, target, tol),
            KernelMode::Periodic { .. } => Self::periodic(kernel, target, tol),
            KernelMode::Approx { epsilon, mollifier, .. } => Self::approx(target, mollifier.clone(), *epsilon, tol),
        }
    }

    pub fn sample<R: Rng>(&self, target: &SpectralTarget, rng: &mut R) -> Result<FeatureSample> {
        let omega = self.omega.sample(target, rng)?;
        let b = self.bias.sample(&omega, rng);
        Ok(FeatureSample::new(omega, b))
    }
}

/// n draws from `law`, sample i from stream (seed, `dom`, i).
pub fn draw_law(law: &FeatureLaw, target: &SpectralTarget, n: usize, seed: u64, dom: u64) -> Result<Vec<FeatureSample>> {
    (0..n)
        .into_par_iter()
        .map(|i| law.sample(target, &mut stream(seed, dom, i as u64)))
        .collect()
}

/// n i.i.d. draws from the plain law dλ.
pub fn draw_plain(target: &SpectralTarget, kernel: &RepresentationKernel, n: usize, seed: u64, tol: f64) -> Result<Vec<FeatureSample>> {
    let law = FeatureLaw::plain(kernel, target, tol)?;
    draw_law(&law, target, n, seed, domain::PLAIN)
}

/// n draws from the periodic law; b ~ U[0, 2π].
pub fn draw_periodic(target: &SpectralTarget, kernel: &RepresentationKernel, n: usize, seed: u64, tol: f64) -> Result<Vec<FeatureSample>> {
    let law = FeatureLaw::periodic(kernel, target, tol)?;
    draw_law(&law, target, n, seed, domain::PERIODIC)
}

/// n draws from |f̂(ω)||φ(εb)|.
pub fn draw_approx(
    target: &SpectralTarget,
    mollifier: Arc<MollifierPair>,
    epsilon: f64,
    n: usize,
    seed: u64,
    tol: f64,
) -> Result<Vec<FeatureSample>> {
    let law = FeatureLaw::approx(target, mollifier.clone(), epsilon, tol)?;
    let out = draw_law(&law, target, n, seed, domain::APPROX)?;
    for s in &out {
        mollifier.phi_checked(epsilon * s.b)?;
    }
    Ok(out)
}

/// Sets η = +1 with probability (χ + 1)/2, else −1.
pub fn augment_sign<R: Rng>(mut sample: FeatureSample, chi: f64, rng: &mut R) -> Result<FeatureSample> {
    if !(-1.0..=1.0).contains(&chi) {
        return Err(Error::InvalidArgument(format!("chi must lie in [-1, 1], got {chi}")));
    }
    let u: f64 = rng.random();
    sample.eta = if u < 0.5 * (chi + 1.0) { 1 } else { -1 };
    Ok(sample)
}

/// Writes samples as CSV with columns (index, cell_id, omega_1..omega_d, b, eta).
/// `cells` gives the cell id of each sample, if any.
pub fn write_samples_csv<W: Write>(out: W, samples: &[FeatureSample], cells: Option<&[usize]>, dim: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string(), "cell_id".to_string()];
    header.extend((1..=dim).map(|j| format!("omega_{j}")));
    header.push("b".into());
    header.push("eta".into());
    w.write_record(&header)?;
    for (i, s) in samples.iter().enumerate() {
        let mut row = vec![i.to_string(), cells.map(|c| c[i].to_string()).unwrap_or_default()];
        row.extend(s.omega.iter().map(|x| format!("{x:.17e}")));
        row.push(format!("{:.17e}", s.b));
        row.push(s.eta.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::registry;
    use crate::representation::KernelOptions;

    fn kernel() -> (SpectralTarget, RepresentationKernel) {
        let g = SpectralTarget::gaussian(1.0, vec![0.0]).unwrap();
        let k = RepresentationKernel::decaying(Arc::new(registry("gaussian").unwrap()), &g, 1.0, 0, &KernelOptions::default()).unwrap();
        (g, k)
    }

    #[test]
    fn envelope_cdf_inverts() {
        let law = BiasLaw::Envelope { radius: 1.0, a: 0.5, p: 2.5 };
        for om in [[0.0], [0.7]] {
            let total = law.mass(&om);
            assert!((law.unnormalized_cdf(&om, 1e12) - total).abs() < 1e-6);
            for g in [1e-6, 0.1, 0.5, 0.9, 0.999] {
                let b = law.inverse(&om, g * total);
                assert!((law.cdf(&om, b) - g).abs() < 1e-12, "{g} {b}");
            }
        }
        // Tail law at ω = 0: P(|b| > t) = (1 + t)^{1−p}.
        let law = BiasLaw::Envelope { radius: 1.0, a: 1.0, p: 2.0 };
        let t = 3.0;
        let tail = law.cdf(&[0.0], -t) + 1.0 - law.cdf(&[0.0], t);
        assert!((tail - 0.25).abs() < 1e-15);
    }

    #[test]
    fn plain_draws_are_deterministic() {
        let (g, k) = kernel();
        let a = draw_plain(&g, &k, 50, 3, 1e-10).unwrap();
        let b = draw_plain(&g, &k, 50, 3, 1e-10).unwrap();
        assert_eq!(a, b);
        assert!(draw_plain(&g, &k, 0, 3, 1e-10).unwrap().is_empty());
        let c = draw_plain(&g, &k, 50, 4, 1e-10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sign_extremes() {
        let mut rng = stream(1, domain::TEST, 0);
        for _ in 0..100 {
            assert_eq!(augment_sign(FeatureSample::new(vec![0.0], 0.0), 1.0, &mut rng).unwrap().eta, 1);
            assert_eq!(augment_sign(FeatureSample::new(vec![0.0], 0.0), -1.0, &mut rng).unwrap().eta, -1);
        }
        assert!(augment_sign(FeatureSample::new(vec![0.0], 0.0), 1.5, &mut rng).is_err());
    }

    #[test]
    fn restricted_draws_stay_inside() {
        let law = BiasLaw::Envelope { radius: 1.0, a: 1.0, p: 2.0 };
        let mut rng = stream(2, domain::TEST, 0);
        for (lo, hi) in [(-5.0, -4.0), (-0.2, 0.3), (2.0, 9.0)] {
            for _ in 0..200 {
                let b = law.sample_in(&[0.5], lo, hi, &mut rng);
                assert!(b >= lo && b <= hi);
            }
        }
    }

    #[test]
    fn csv_dump_has_schema() {
        let s = vec![FeatureSample::new(vec![1.0, 2.0], 0.5)];
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &s, Some(&[3]), 2).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("index,cell_id,omega_1,omega_2,b,eta\n0,3,"));
    }
}
