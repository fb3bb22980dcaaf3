//! Goodness-of-fit checks for the feature samplers.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use shallow_rates::activation::registry;
use shallow_rates::representation::{KernelOptions, MollifierPair, RepresentationKernel};
use shallow_rates::rng::domain;
use shallow_rates::sampler::{
    augment_sign, build_stratified_plan, draw_approx, draw_law, draw_periodic, draw_plain, draw_stratified, FeatureLaw,
    FeatureSample, DEFAULT_CELL_BUDGET,
};
use shallow_rates::target::{parse_target, SpectralTarget};

/// Two-sided KS statistic of `xs` against `cdf`.
fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn gaussian_kernel(target: &SpectralTarget) -> RepresentationKernel {
    let act = Arc::new(registry("gaussian").unwrap());
    RepresentationKernel::decaying(act, target, 1.0, 0, &KernelOptions::default()).unwrap()
}

#[test]
fn plain_omega_marginal_chi_square() {
    let t = SpectralTarget::gaussian(1.0, vec![0.0]).unwrap();
    let k = gaussian_kernel(&t);
    let n = 100_000;
    let s = draw_plain(&t, &k, n, 17, 1e-10).unwrap();
    // Marginal ∝ (2R|ω|/|a| + 2/(p−1)) M(ω), M standard normal.
    let (alpha, beta) = (2.0 / k.a.abs(), 2.0 / (k.p - 1.0));
    let dens = |w: f64| (alpha * w.abs() + beta) * (-0.5 * w * w).exp() / (2.0 * PI).sqrt();
    let total = alpha * (2.0 / PI).sqrt() + beta;
    let edges: Vec<f64> = (0..=40).map(|i| -5.0 + 0.25 * i as f64).collect();
    let mut counts = vec![0usize; edges.len() + 1];
    for x in &s {
        let w = x.omega[0];
        let bin = edges.iter().position(|e| w < *e).unwrap_or(edges.len());
        counts[bin] += 1;
    }
    let mut probs = vec![0.0; edges.len() + 1];
    for i in 1..edges.len() {
        probs[i] = simpson(dens, edges[i - 1], edges[i], 200) / total;
    }
    let tail = (1.0 - probs.iter().sum::<f64>()) / 2.0;
    probs[0] = tail;
    probs[edges.len()] = tail;
    // Merge the sparse outer bins into their neighbours.
    let (mut stat, mut dof, mut acc_o, mut acc_e) = (0.0, 0usize, 0.0, 0.0);
    for (c, p) in counts.iter().zip(&probs) {
        acc_o += *c as f64;
        acc_e += p * n as f64;
        if acc_e >= 20.0 {
            stat += (acc_o - acc_e).powi(2) / acc_e;
            dof += 1;
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 {
        stat += (acc_o - acc_e).powi(2) / acc_e;
        dof += 1;
    }
    let p = 1.0 - ChiSquared::new((dof - 1) as f64).unwrap().cdf(stat);
    assert!(p > 1e-3, "chi2 {stat} on {} dof, p = {p}", dof - 1);
}

#[test]
fn conditional_b_matches_envelope_cdf() {
    let t = SpectralTarget::gaussian(1.0, vec![0.0]).unwrap();
    let k = gaussian_kernel(&t);
    let law = FeatureLaw::plain(&k, &t, 1e-10).unwrap();
    for w in [0.0, 0.3, 2.0] {
        let (c, p) = (k.radius * w / k.a.abs(), k.p);
        let q = 1.0 / (p - 1.0);
        let total = 2.0 * q + 2.0 * c;
        // Closed-form mass of h(·, ω) on (−∞, b].
        let g = |b: f64| {
            let v = if b <= -c {
                q * (1.0 - c - b).powf(1.0 - p)
            } else if b <= c {
                q + b + c
            } else {
                q + 2.0 * c + q * (1.0 - (1.0 + b - c).powf(1.0 - p))
            };
            v / total
        };
        for b in [-30.0, -8.5, -3.0, 0.0, 7.0, 9.0, 40.0] {
            assert!((law.bias.cdf(&[w], b) - g(b)).abs() < 1e-12, "cdf at {b}");
        }
        // 1.36/√n is the 95% critical value, so single runs fail 1 time in 20.
        // Over 20 replicates, more than 4 exceedances has probability < 0.3%.
        let n = 20_000;
        let mut exceed = 0;
        for r in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + r);
            let bs: Vec<f64> = (0..n).map(|_| law.bias.sample(&[w], &mut rng)).collect();
            if ks(bs, g) >= 1.36 / (n as f64).sqrt() {
                exceed += 1;
            }
        }
        assert!(exceed <= 4, "ω = {w}: {exceed}/20 replicates above the KS threshold");
    }
}

#[test]
fn pareto_tail_at_zero_frequency() {
    let t = SpectralTarget::gaussian(1.0, vec![0.0]).unwrap();
    let k = gaussian_kernel(&t);
    let law = FeatureLaw::plain(&k, &t, 1e-10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 20_000;
    let abs: Vec<f64> = (0..n).map(|_| law.bias.sample(&[0.0], &mut rng).abs()).collect();
    let p = k.p;
    let d = ks(abs, |t| 1.0 - (1.0 + t).powf(1.0 - p));
    assert!(d < 1.36 / (n as f64).sqrt(), "KS {d}");
}

#[test]
fn periodic_bias_is_uniform() {
    let t = SpectralTarget::cosine(vec![1.3]).unwrap();
    let act = Arc::new(registry("cos").unwrap());
    let k = RepresentationKernel::periodic(act, &t, 0, &KernelOptions::default()).unwrap();
    let n = 10_000;
    let s = draw_periodic(&t, &k, n, 5, 1e-10).unwrap();
    let d = ks(s.iter().map(|x| x.b).collect(), |b| (b / (2.0 * PI)).clamp(0.0, 1.0));
    // 99th percentile of the KS null.
    assert!(d < 1.63 / (n as f64).sqrt(), "KS {d}");
    assert!(s.iter().all(|x| x.omega[0].abs() == 1.3));
}

#[test]
fn approx_frequency_marginal_is_spectral_density() {
    let t = SpectralTarget::gaussian(1.0, vec![0.0]).unwrap();
    let n = 10_000;
    let s = draw_approx(&t, MollifierPair::shared_default(), 0.2, n, 8, 1e-10).unwrap();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let d = ks(s.iter().map(|x| x.omega[0]).collect(), |w| normal.cdf(w));
    assert!(d < 1.63 / (n as f64).sqrt(), "KS {d}");
}

#[test]
fn zero_phase_gives_balanced_signs() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 100_000;
    let sum: i64 = (0..n)
        .map(|_| i64::from(augment_sign(FeatureSample::new(vec![0.0], 0.0), 0.0, &mut rng).unwrap().eta))
        .sum();
    assert!((sum as f64 / n as f64).abs() < 0.01);
}

#[test]
fn core_restricted_bias_is_uniform() {
    let t = SpectralTarget::gaussian(1.0, vec![0.0]).unwrap();
    let k = gaussian_kernel(&t);
    let law = FeatureLaw::plain(&k, &t, 1e-10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let w = 1.0;
    let c = k.radius * w / k.a.abs();
    let (lo, hi) = (-0.5 * c, 0.25 * c);
    let n = 10_000;
    let bs: Vec<f64> = (0..n).map(|_| law.bias.sample_in(&[w], lo, hi, &mut rng)).collect();
    let d = ks(bs, |b| ((b - lo) / (hi - lo)).clamp(0.0, 1.0));
    assert!(d < 1.63 / (n as f64).sqrt(), "KS {d}");
}

#[test]
fn stratified_samples_land_in_their_cells() {
    let t = SpectralTarget::gaussian(2.0, vec![0.1]).unwrap();
    let act = Arc::new(registry("relu-dd").unwrap());
    let k = RepresentationKernel::decaying(act, &t, 1.0, 0, &KernelOptions::default()).unwrap();
    let law = FeatureLaw::plain(&k, &t, 1e-10).unwrap();
    let plan = build_stratified_plan(&law, &t, &k, 64, 1.0, 3200, 21).unwrap();
    let groups = draw_stratified(&plan, &law, &t, &k, 21, DEFAULT_CELL_BUDGET).unwrap();
    let mut total = 0;
    for g in &groups {
        let want = if g.cell_id == plan.tail_id() { plan.tail_count } else { plan.cells[g.cell_id].count };
        assert_eq!(g.samples.len(), want);
        for s in &g.samples {
            assert_eq!(plan.cell_of(s), g.cell_id);
        }
        total += g.samples.len();
    }
    assert_eq!(total, plan.total_count());
    assert!(plan.total_count() <= 3 * 64 + 1);
    // λ̃ sums to one over cells and tail.
    let mass: f64 = plan.cells.iter().map(|c| c.measure).sum::<f64>() + plan.tail_measure;
    assert!((mass - 1.0).abs() < 1e-12);
}

#[test]
fn pilot_tail_is_not_folded_into_first_cell() {
    // Wide spectrum: most pilot draws fall outside S_A.
    let t = SpectralTarget::gaussian(0.5, vec![0.0]).unwrap();
    let act = Arc::new(registry("relu-dd").unwrap());
    let k = RepresentationKernel::decaying(act, &t, 1.0, 0, &KernelOptions::default()).unwrap();
    let law = FeatureLaw::plain(&k, &t, 1e-10).unwrap();
    let plan = build_stratified_plan(&law, &t, &k, 64, 1.0, 3200, 2).unwrap();
    assert!(plan.tail_measure > 0.5, "tail {}", plan.tail_measure);
    assert!(plan.cells[0].measure < 0.05, "cell 0 {}", plan.cells[0].measure);
}

#[test]
fn atomic_plain_frequencies_follow_weights() {
    let t = parse_target("atoms([(1, 0.5, 0), (-1, 0.5, 0), (3, 0.25, 0), (-3, 0.25, 0)])", 1).unwrap();
    let k = gaussian_kernel(&t);
    let law = FeatureLaw::plain(&k, &t, 1e-10).unwrap();
    let n = 40_000;
    let s = draw_law(&law, &t, n, 1, domain::PLAIN).unwrap();
    // Weight ∝ |c_j|(2R|ω_j|/|a| + 2/(p−1)).
    let wgt = |w: f64, c: f64| c * (2.0 * w / k.a.abs() + 2.0 / (k.p - 1.0));
    let p3 = 2.0 * wgt(3.0, 0.25) / (2.0 * wgt(3.0, 0.25) + 2.0 * wgt(1.0, 0.5));
    let got = s.iter().filter(|x| x.omega[0].abs() == 3.0).count() as f64 / n as f64;
    assert!((got - p3).abs() < 5.0 * (p3 * (1.0 - p3) / n as f64).sqrt(), "{got} vs {p3}");
}
