//! Sobolev-norm errors over boxes and log-log rate fits.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::network::TwoLayerNetwork;
use crate::numeric::{multi_indices, NeumaierSum};
use crate::qmc;
use crate::target::SpectralTarget;

/// Default number of domain quadrature points.
pub const DEFAULT_N_QUAD: usize = 4096;

/// Axis-aligned box Ω = Π [lower_j, upper_j].
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidArgument("domain needs finite lower < upper in every coordinate".into()));
        }
        Ok(Self { lower, upper })
    }

    /// [lo, hi]^d.
    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// |Ω|.
    pub fn measure(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn diameter(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| (u - l) * (u - l)).sum::<f64>().sqrt()
    }

    /// Recentering offset (the centroid).
    pub fn centroid(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    /// R = max |x| over Ω after recentering (half the diagonal).
    pub fn radius(&self) -> f64 {
        0.5 * self.diameter()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| v >= l && v <= u)
    }

    /// Maps u ∈ [0,1)^d into Ω.
    pub fn map_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(t, (l, h))| l + t * (h - l))
            .collect()
    }

    /// `n` shifted low-discrepancy points in Ω.
    pub fn quadrature_points(&self, n: usize, shift_index: u64) -> Vec<Vec<f64>> {
        qmc::unit_points(self.dim(), n, shift_index).iter().map(|u| self.map_unit(u)).collect()
    }
}

/// Estimate of a norm with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// H^m(Ω) norm of g, where `values(α, xs)` returns D^α g at the points.
pub fn sobolev_norm<F>(domain: &DomainBox, m: usize, n_quad: usize, shift_index: u64, values: F) -> Result<NormEstimate>
where
    F: Fn(&[usize], &[Vec<f64>]) -> Result<Vec<f64>>,
{
    if n_quad < 2 {
        return Err(Error::InvalidArgument(format!("n_quad must be at least 2, got {n_quad}")));
    }
    let xs = domain.quadrature_points(n_quad, shift_index);
    let mut per_point = vec![0.0; n_quad];
    for alpha in multi_indices(domain.dim(), m) {
        for (acc, v) in per_point.iter_mut().zip(values(&alpha, &xs)?) {
            *acc += v * v;
        }
    }
    let n = n_quad as f64;
    let mean = per_point.iter().copied().collect::<NeumaierSum>().value() / n;
    let var = per_point.iter().map(|v| (v - mean) * (v - mean)).collect::<NeumaierSum>().value() / (n - 1.0);
    let vol = domain.measure();
    let sq = vol * mean;
    let sq_se = vol * (var / n).sqrt();
    let estimate = sq.max(0.0).sqrt();
    // Delta method: se(√S) ≈ se(S)/(2√S).
    let std_error = if estimate > 0.0 { sq_se / (2.0 * estimate) } else { 0.0 };
    Ok(NormEstimate { estimate, std_error })
}

fn check_order(m: usize, max: usize) -> Result<()> {
    if m > max {
        return Err(Error::UnsupportedDerivativeOrder { requested: m, max });
    }
    Ok(())
}

/// ‖f − net‖_{H^m(Ω)} by QMC over `n_quad` points; `shift_index` selects the
/// point-set shift (0 is the fixed default).
pub fn sobolev_error(
    net: &TwoLayerNetwork,
    target: &SpectralTarget,
    m: usize,
    domain: &DomainBox,
    n_quad: usize,
    shift_index: u64,
) -> Result<NormEstimate> {
    check_order(m, net.activation().m_max())?;
    check_order(m, target.m_max())?;
    if net.dim() != domain.dim() || target.dim() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            got: if net.dim() != domain.dim() { net.dim() } else { target.dim() },
        });
    }
    sobolev_norm(domain, m, n_quad, shift_index, |alpha, xs| {
        let nv = net.evaluate_many(alpha, xs)?;
        Ok(xs.iter().zip(nv).map(|(x, v)| target.eval_unchecked(alpha, x) - v).collect())
    })
}

/// ‖f‖_{H^m(Ω)} by QMC.
pub fn target_sobolev_norm(target: &SpectralTarget, m: usize, domain: &DomainBox, n_quad: usize) -> Result<NormEstimate> {
    check_order(m, target.m_max())?;
    sobolev_norm(domain, m, n_quad, 0, |alpha, xs| Ok(xs.iter().map(|x| target.eval_unchecked(alpha, x)).collect()))
}

/// Both sides of ‖f‖_{H^m(Ω)} ≤ C(m)|Ω|^{1/2}‖f‖_{B^m}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// C(m) = (number of multi-indices with |α| ≤ m)^{1/2}.
pub fn smoothness_constant(d: usize, m: usize) -> f64 {
    (multi_indices(d, m).len() as f64).sqrt()
}

pub fn smoothness_bound(target: &SpectralTarget, m: usize, domain: &DomainBox, tol: f64) -> Result<SmoothnessCheck> {
    let lhs = target_sobolev_norm(target, m, domain, DEFAULT_N_QUAD)?.estimate;
    let rhs = smoothness_constant(domain.dim(), m) * domain.measure().sqrt() * target.barron_norm(m as f64, 1e-10)?;
    Ok(SmoothnessCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + tol,
    })
}

/// Whether the smoothness bound holds; a divergent Barron norm counts as holding
/// (the right side is infinite).
pub fn smoothness_bound_check(target: &SpectralTarget, m: usize, domain: &DomainBox, tol: f64) -> bool {
    match smoothness_bound(target, m, domain, tol) {
        Ok(c) => c.holds,
        Err(Error::BarronNormDivergent { .. }) => true,
        Err(_) => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregate {
    #[default]
    Median,
    Mean,
}

impl FromStr for Aggregate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median" => Ok(Aggregate::Median),
            "mean" => Ok(Aggregate::Mean),
            _ => Err(Error::InvalidArgument(format!("aggregate must be `median` or `mean`, got `{s}`"))),
        }
    }
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregate::Median => "median",
            Aggregate::Mean => "mean",
        })
    }
}

impl Aggregate {
    pub fn apply(&self, values: &[f64]) -> f64 {
        match self {
            Aggregate::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregate::Median => {
                let mut v = values.to_vec();
                v.sort_by(f64::total_cmp);
                let h = v.len() / 2;
                if v.len() % 2 == 1 {
                    v[h]
                } else {
                    0.5 * (v[h - 1] + v[h])
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub n: usize,
    pub error: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub n_min: usize,
    pub n_max: usize,
}

/// Aggregated (n, error) pairs in increasing n.
pub fn aggregate_points(points: &[RatePoint], aggregate: Aggregate) -> Result<Vec<(usize, f64)>> {
    let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for p in points {
        if !(p.error > 0.0 && p.error.is_finite()) {
            return Err(Error::InvalidErrorValue(p.error));
        }
        by_n.entry(p.n).or_default().push(p.error);
    }
    Ok(by_n.into_iter().map(|(n, e)| (n, aggregate.apply(&e))).collect())
}

/// Least-squares line through (log n, log aggregated error).
pub fn rate_fit(points: &[RatePoint], aggregate: Aggregate) -> Result<RateFit> {
    let agg = aggregate_points(points, aggregate)?;
    if agg.len() < 2 {
        return Err(Error::InsufficientData(agg.len()));
    }
    let xs: Vec<f64> = agg.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = agg.iter().map(|(_, e)| e.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(RateFit {
        slope,
        intercept,
        residual: (rss / k).sqrt(),
        n_min: agg.first().unwrap().0,
        n_max: agg.last().unwrap().0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::registry;
    use crate::network::Neuron;
    use std::sync::Arc;

    #[test]
    fn domain_geometry() {
        let b = DomainBox::new(vec![0.0, -1.0], vec![2.0, 3.0]).unwrap();
        assert_eq!(b.measure(), 8.0);
        assert_eq!(b.centroid(), vec![1.0, 1.0]);
        assert!((b.radius() - 20f64.sqrt() / 2.0).abs() < 1e-15);
        assert!(b.radius() <= b.diameter());
        assert!(DomainBox::new(vec![1.0], vec![1.0]).is_err());
        for x in b.quadrature_points(100, 0) {
            assert!(b.contains(&x));
        }
    }

    #[test]
    fn constant_difference() {
        let cos = Arc::new(registry("cos").unwrap());
        // net ≡ 0.5 on Ω (w = 0), target ≡ 0 via cancelling atoms is not needed:
        // use an atomic target at ω = 0.
        let f = SpectralTarget::new(
            1,
            vec![],
            vec![crate::target::Atom {
                omega: vec![0.0],
                coeff: num_complex::Complex64::new(2.0, 0.0),
            }],
        )
        .unwrap();
        let net = TwoLayerNetwork::new(
            cos,
            1,
            vec![Neuron {
                w: vec![0.0],
                b: 0.0,
                beta: 1.5,
            }],
        )
        .unwrap();
        let dom = DomainBox::cube(1, -1.0, 2.0).unwrap();
        let e = sobolev_error(&net, &f, 1, &dom, 512, 0).unwrap();
        assert!((e.estimate - 0.5 * 3f64.sqrt()).abs() < 1e-12);
        assert!(e.std_error < 1e-12);
    }

    #[test]
    fn fits() {
        let pts: Vec<RatePoint> = [16, 64, 256]
            .iter()
            .map(|&n| RatePoint {
                n,
                error: 3.0 / n as f64,
                seed: 0,
            })
            .collect();
        let f = rate_fit(&pts, Aggregate::Median).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        assert!(matches!(rate_fit(&pts[..1], Aggregate::Mean), Err(Error::InsufficientData(1))));
        let bad = [RatePoint { n: 2, error: 0.0, seed: 0 }];
        assert!(matches!(rate_fit(&bad, Aggregate::Mean), Err(Error::InvalidErrorValue(_))));
        assert_eq!(Aggregate::Median.apply(&[3.0, 1.0, 2.0, 10.0]), 2.5);
    }

    #[test]
    fn smoothness_examples() {
        let g = SpectralTarget::gaussian(1.0, vec![0.0]).unwrap();
        let dom = DomainBox::cube(1, -1.0, 1.0).unwrap();
        let c = smoothness_bound(&g, 0, &dom, 1e-8).unwrap();
        assert!(c.holds && (c.rhs - 2f64.sqrt()).abs() < 1e-9);
        let cos = SpectralTarget::cosine(vec![1.0]).unwrap();
        let dom = DomainBox::cube(1, 0.0, 2.0 * std::f64::consts::PI).unwrap();
        let c = smoothness_bound(&cos, 0, &dom, 1e-8).unwrap();
        assert!((c.lhs - std::f64::consts::PI.sqrt()).abs() < 1e-3, "{}", c.lhs);
        assert!(c.holds);
    }
}
