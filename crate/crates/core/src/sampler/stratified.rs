//! Sign-augmented, cell-stratified sampling on the truncated set S_A.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::{augment_sign, FeatureLaw, FeatureSample};
use crate::error::{Error, Result};
use crate::representation::{KernelMode, RepresentationKernel};
use crate::rng::{domain, stream};
use crate::target::SpectralTarget;

/// Rejection attempts allowed per cell.
pub const DEFAULT_CELL_BUDGET: usize = 4_000_000;

/// A pilot draw with its sign, phase and magnitude factor.
#[derive(Debug, Clone)]
pub struct PilotDraw {
    pub sample: FeatureSample,
    pub chi: f64,
    pub magnitude: f64,
}

/// One cell S_i of the partition: a (b, ω) box and a sign.
#[derive(Debug, Clone, PartialEq)]
pub struct StratCell {
    pub id: usize,
    pub b_lo: f64,
    pub b_hi: f64,
    pub omega_lo: Vec<f64>,
    pub omega_hi: Vec<f64>,
    pub eta: i8,
    /// Estimated λ̃(S_i).
    pub measure: f64,
    /// c_i = ⌈λ̃(S_i) n⌉.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedPlan {
    pub n: usize,
    /// Truncation level A.
    pub a_trunc: f64,
    /// t = min(p − 1, ε) (decaying) or ε (periodic).
    pub t: f64,
    pub bins_b: usize,
    pub bins_w_per_axis: usize,
    pub b_range: (f64, f64),
    /// Per-axis half-width of the ω box.
    pub omega_half_width: f64,
    pub dim: usize,
    pub cells: Vec<StratCell>,
    /// λ̃ of the complement of S_A (both signs).
    pub tail_measure: f64,
    pub tail_count: usize,
    pub pilot_size: usize,
}

/// Samples drawn for one cell; `cell_id == plan.tail_id()` marks the tail.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSamples {
    pub cell_id: usize,
    pub measure: f64,
    pub samples: Vec<FeatureSample>,
}

fn bins_per_axis(n: usize, d: usize) -> usize {
    let e = (d + 1) as u32;
    let mut k = ((n as f64).powf(1.0 / e as f64).floor() as usize).max(1);
    while (k + 1).checked_pow(e).is_some_and(|v| v <= n) {
        k += 1;
    }
    while k > 1 && k.checked_pow(e).is_none_or(|v| v > n) {
        k -= 1;
    }
    k
}

impl StratifiedPlan {
    pub fn tail_id(&self) -> usize {
        self.cells.len()
    }

    /// Σ c_i including the tail cell.
    pub fn total_count(&self) -> usize {
        self.cells.iter().map(|c| c.count).sum::<usize>() + self.tail_count
    }

    fn bin(v: f64, lo: f64, hi: f64, k: usize) -> Option<usize> {
        if !(v >= lo && v <= hi) {
            return None;
        }
        Some((((v - lo) / (hi - lo) * k as f64).floor() as usize).min(k - 1))
    }

    /// Index of the (b, ω) box, ignoring the sign; `None` outside S_A.
    fn box_of(&self, omega: &[f64], b: f64) -> Option<usize> {
        let k = self.bins_w_per_axis;
        let mut idx = Self::bin(b, self.b_range.0, self.b_range.1, self.bins_b)?;
        for &w in omega {
            idx = idx * k + Self::bin(w, -self.omega_half_width, self.omega_half_width, k)?;
        }
        Some(idx)
    }

    /// Cell id of a signed sample; the tail id outside S_A.
    pub fn cell_of(&self, s: &FeatureSample) -> usize {
        match self.box_of(&s.omega, s.b) {
            Some(i) => 2 * i + usize::from(s.eta < 0),
            None => self.tail_id(),
        }
    }

    fn geometry(kernel: &RepresentationKernel, n: usize, eps_smooth: f64) -> Result<(f64, f64, (f64, f64), f64)> {
        let d = kernel.dim() as f64;
        let trunc = |t: f64| (n as f64).powf(2.0 / ((d + 1.0) * (2.0 + t)));
        match kernel.mode {
            KernelMode::Decaying => {
                if !(kernel.radius > 0.0) {
                    return Err(Error::InvalidArgument("stratification needs a domain radius R > 0".into()));
                }
                let t = (kernel.p - 1.0).min(eps_smooth);
                let a = trunc(t);
                Ok((t, a, (-a, a), a * kernel.a.abs() / (2.0 * kernel.radius)))
            }
            KernelMode::Periodic { .. } => {
                let a = trunc(eps_smooth);
                Ok((eps_smooth, a, (0.0, 2.0 * PI), a))
            }
            KernelMode::Approx { .. } => Err(Error::InvalidArgument(
                "stratification is defined for the decaying and periodic constructions".into(),
            )),
        }
    }
}

/// `size` plain draws with signs, from streams (seed, PILOT, i).
pub fn draw_pilot(
    law: &FeatureLaw,
    target: &SpectralTarget,
    kernel: &RepresentationKernel,
    size: usize,
    seed: u64,
) -> Result<Vec<PilotDraw>> {
    (0..size)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, domain::PILOT, i as u64);
            let s = law.sample(target, &mut rng)?;
            let chi = kernel.phase_chi(&s.omega, s.b, target)?;
            let magnitude = kernel.magnitude(&s.omega, s.b);
            Ok(PilotDraw {
                sample: augment_sign(s, chi, &mut rng)?,
                chi,
                magnitude,
            })
        })
        .collect()
}

/// Builds the plan from an existing pilot.
pub fn build_stratified_plan_from_pilot(
    target: &SpectralTarget,
    kernel: &RepresentationKernel,
    n: usize,
    eps_smooth: f64,
    pilot: &[PilotDraw],
) -> Result<StratifiedPlan> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("stratification needs n >= 2, got {n}")));
    }
    if !(eps_smooth > 0.0) {
        return Err(Error::InvalidArgument(format!("smoothness must be positive, got {eps_smooth}")));
    }
    if pilot.is_empty() {
        return Err(Error::PilotUnderresolved { empty: 0, total: 0 });
    }
    let d = kernel.dim();
    let (t, a_trunc, b_range, omega_half_width) = StratifiedPlan::geometry(kernel, n, eps_smooth)?;
    let k = bins_per_axis(n, d);
    let boxes = k.pow(d as u32 + 1);
    let mut plan = StratifiedPlan {
        n,
        a_trunc,
        t,
        bins_b: k,
        bins_w_per_axis: k,
        b_range,
        omega_half_width,
        dim: d,
        cells: Vec::with_capacity(2 * boxes),
        tail_measure: 0.0,
        tail_count: 0,
        pilot_size: pilot.len(),
    };
    let mut hits = vec![0usize; 2 * boxes + 1];
    for p in pilot {
        // `cell_of` would report the tail as cells.len(), which is still 0 here.
        let id = match plan.box_of(&p.sample.omega, p.sample.b) {
            Some(i) => 2 * i + usize::from(p.sample.eta < 0),
            None => 2 * boxes,
        };
        hits[id] += 1;
    }

    let kd = k.pow(d as u32);
    let wb = (b_range.1 - b_range.0) / k as f64;
    let ww = 2.0 * omega_half_width / k as f64;
    let mut empty = 0;
    let mut positive = 0;
    for bx in 0..boxes {
        let bb = bx / kd;
        let mut rest = bx % kd;
        let mut lo = vec![0.0; d];
        for j in (0..d).rev() {
            lo[j] = -omega_half_width + (rest % k) as f64 * ww;
            rest /= k;
        }
        let hi: Vec<f64> = lo.iter().map(|l| l + ww).collect();
        let has_mass = !target.bumps().is_empty()
            || target
                .atoms()
                .iter()
                .any(|at| at.omega.iter().zip(lo.iter().zip(&hi)).all(|(w, (l, h))| w >= l && w <= h));
        if has_mass {
            positive += 1;
            if hits[2 * bx] + hits[2 * bx + 1] == 0 {
                empty += 1;
            }
        }
        for (s, eta) in [(0usize, 1i8), (1, -1)] {
            let id = 2 * bx + s;
            let measure = hits[id] as f64 / pilot.len() as f64;
            plan.cells.push(StratCell {
                id,
                b_lo: b_range.0 + bb as f64 * wb,
                b_hi: if bb + 1 == k { b_range.1 } else { b_range.0 + (bb + 1) as f64 * wb },
                omega_lo: lo.clone(),
                omega_hi: hi.clone(),
                eta,
                measure,
                count: (measure * n as f64).ceil() as usize,
            });
        }
    }
    if positive > 0 && 2 * empty >= positive {
        return Err(Error::PilotUnderresolved { empty, total: positive });
    }
    plan.tail_measure = hits[2 * boxes] as f64 / pilot.len() as f64;
    plan.tail_count = (plan.tail_measure * n as f64).ceil() as usize;
    if plan.total_count() > 3 * n + 1 {
        return Err(Error::InvalidArgument(format!(
            "plan uses {} samples, above 3n + 1 = {}",
            plan.total_count(),
            3 * n + 1
        )));
    }
    Ok(plan)
}

/// Pilot of `pilot_size` draws followed by the plan.
pub fn build_stratified_plan(
    law: &FeatureLaw,
    target: &SpectralTarget,
    kernel: &RepresentationKernel,
    n: usize,
    eps_smooth: f64,
    pilot_size: usize,
    seed: u64,
) -> Result<StratifiedPlan> {
    let pilot = draw_pilot(law, target, kernel, pilot_size, seed)?;
    build_stratified_plan_from_pilot(target, kernel, n, eps_smooth, &pilot)
}

fn draw_cell(
    plan: &StratifiedPlan,
    cell: &StratCell,
    law: &FeatureLaw,
    target: &SpectralTarget,
    kernel: &RepresentationKernel,
    seed: u64,
    budget: usize,
) -> Result<Vec<FeatureSample>> {
    let mut rng = stream(seed, domain::STRATIFIED, cell.id as u64);
    let mut out = Vec::with_capacity(cell.count);
    for _ in 0..budget {
        if out.len() == cell.count {
            break;
        }
        let omega = law.omega.sample(target, &mut rng)?;
        if !omega
            .iter()
            .zip(cell.omega_lo.iter().zip(&cell.omega_hi))
            .all(|(w, (l, h))| *w >= *l && *w <= *h)
        {
            continue;
        }
        let inside = (law.bias.unnormalized_cdf(&omega, cell.b_hi) - law.bias.unnormalized_cdf(&omega, cell.b_lo))
            / law.bias.mass(&omega);
        if rand::Rng::random::<f64>(&mut rng) >= inside {
            continue;
        }
        let b = law.bias.sample_in(&omega, cell.b_lo, cell.b_hi, &mut rng);
        let chi = kernel.phase_chi(&omega, b, target)?;
        if rand::Rng::random::<f64>(&mut rng) >= 0.5 * (1.0 + f64::from(cell.eta) * chi) {
            continue;
        }
        let mut s = FeatureSample::new(omega, b);
        s.eta = cell.eta;
        debug_assert_eq!(plan.cell_of(&s), cell.id);
        out.push(s);
    }
    if out.len() < cell.count {
        return Err(Error::CellSamplingStalled {
            cell: cell.id,
            accepted: out.len(),
            wanted: cell.count,
            budget,
        });
    }
    Ok(out)
}

fn draw_tail(
    plan: &StratifiedPlan,
    law: &FeatureLaw,
    target: &SpectralTarget,
    kernel: &RepresentationKernel,
    seed: u64,
    budget: usize,
) -> Result<Vec<FeatureSample>> {
    let id = plan.tail_id();
    let mut rng = stream(seed, domain::STRATIFIED, id as u64);
    let mut out = Vec::with_capacity(plan.tail_count);
    for _ in 0..budget {
        if out.len() == plan.tail_count {
            break;
        }
        let s = law.sample(target, &mut rng)?;
        if plan.box_of(&s.omega, s.b).is_some() {
            continue;
        }
        let chi = kernel.phase_chi(&s.omega, s.b, target)?;
        out.push(augment_sign(s, chi, &mut rng)?);
    }
    if out.len() < plan.tail_count {
        return Err(Error::CellSamplingStalled {
            cell: id,
            accepted: out.len(),
            wanted: plan.tail_count,
            budget,
        });
    }
    Ok(out)
}

/// c_i draws from each conditional λ̃_i, by rejection, from streams
/// (seed, STRATIFIED, cell id). Cells with c_i = 0 are skipped.
pub fn draw_stratified(
    plan: &StratifiedPlan,
    law: &FeatureLaw,
    target: &SpectralTarget,
    kernel: &RepresentationKernel,
    seed: u64,
    budget: usize,
) -> Result<Vec<CellSamples>> {
    let mut groups: Vec<CellSamples> = plan
        .cells
        .par_iter()
        .filter(|c| c.count > 0)
        .map(|c| {
            Ok(CellSamples {
                cell_id: c.id,
                measure: c.measure,
                samples: draw_cell(plan, c, law, target, kernel, seed, budget)?,
            })
        })
        .collect::<Result<_>>()?;
    if plan.tail_count > 0 {
        groups.push(CellSamples {
            cell_id: plan.tail_id(),
            measure: plan.tail_measure,
            samples: draw_tail(plan, law, target, kernel, seed, budget)?,
        });
    }
    Ok(groups)
}

/// Per-replicate estimator variances in L²(Ω), both from the same pilot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceComparison {
    /// Var(Jχσ)/N with N = Σ c_i.
    pub plain: f64,
    /// Σ λ̃(S_i)² V_i / c_i.
    pub stratified: f64,
    pub budget: usize,
}

/// Estimates both variances on quadrature points `xs` (recentered coordinates)
/// of a domain with measure `volume`.
pub fn variance_comparison(
    plan: &StratifiedPlan,
    pilot: &[PilotDraw],
    kernel: &RepresentationKernel,
    xs: &[Vec<f64>],
    volume: f64,
) -> Result<VarianceComparison> {
    let q = xs.len();
    if q == 0 || pilot.len() < 2 {
        return Err(Error::InvalidArgument("variance comparison needs quadrature points and 2 pilot draws".into()));
    }
    let act = kernel.activation();
    let profile = |p: &PilotDraw| -> Vec<f64> {
        let w = kernel.inner_weight(&p.sample.omega);
        xs.iter()
            .map(|x| {
                let z: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + p.sample.b;
                p.magnitude * act.eval(z)
            })
            .collect()
    };
    let ncell = plan.cells.len() + 1;
    let mut sum = vec![vec![0.0; q]; ncell];
    let mut sq = vec![0.0; ncell];
    let mut cnt = vec![0usize; ncell];
    let mut psum = vec![0.0; q];
    let mut psq = 0.0;
    for p in pilot {
        let g = profile(p);
        let c = plan.cell_of(&p.sample);
        let eta = f64::from(p.sample.eta);
        cnt[c] += 1;
        for (j, v) in g.iter().enumerate() {
            sum[c][j] += eta * v;
            sq[c] += v * v;
            psum[j] += p.chi * v;
            psq += p.chi * p.chi * v * v;
        }
    }
    // L²(Ω) norms by the equal-weight rule.
    let l2 = |s: f64| s * volume / q as f64;
    let var = |n: usize, s: &[f64], s2: f64| -> f64 {
        if n < 2 {
            return 0.0;
        }
        let nf = n as f64;
        let mean_sq: f64 = s.iter().map(|v| (v / nf) * (v / nf)).sum();
        (l2(s2 / nf) - l2(mean_sq)).max(0.0) * nf / (nf - 1.0)
    };
    let budget = plan.total_count();
    let plain = var(pilot.len(), &psum, psq) / budget as f64;
    let mut stratified = 0.0;
    for c in 0..ncell {
        let (measure, count) = if c == plan.tail_id() {
            (plan.tail_measure, plan.tail_count)
        } else {
            (plan.cells[c].measure, plan.cells[c].count)
        };
        if count > 0 {
            stratified += measure * measure * var(cnt[c], &sum[c], sq[c]) / count as f64;
        }
    }
    Ok(VarianceComparison {
        plain,
        stratified,
        budget,
    })
}
