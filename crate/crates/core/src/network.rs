//! Two-layer networks Σ β_i σ(w_i·x + b_i) assembled from feature samples.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationModel;
use crate::error::{Error, Result};
use crate::numeric::{dot, NeumaierSum};
use crate::representation::{KernelMode, RepresentationKernel, C_EPS_FLOOR};
use crate::sampler::{CellSamples, FeatureSample, StratifiedPlan};
use crate::target::SpectralTarget;

/// Version tag written on the first line of network CSV files.
pub const NETWORK_FORMAT: &str = "#shallow-rates-network v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Neuron {
    pub w: Vec<f64>,
    pub b: f64,
    pub beta: f64,
}

#[derive(Debug, Clone)]
pub struct TwoLayerNetwork {
    neurons: Vec<Neuron>,
    activation: Arc<ActivationModel>,
    /// Label of the activation the construction used (before composite expansion).
    logical_label: String,
    dim: usize,
}

/// Sidecar metadata for a serialized network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkMeta {
    pub format: u32,
    pub activation: String,
    pub d: usize,
    pub construction: String,
    pub seed: u64,
    pub neurons: usize,
}

impl TwoLayerNetwork {
    /// Network over `activation` with the given neurons; composite activations
    /// are expanded into their base neurons.
    pub fn new(activation: Arc<ActivationModel>, dim: usize, neurons: Vec<Neuron>) -> Result<Self> {
        for nr in &neurons {
            if nr.w.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: nr.w.len(),
                });
            }
            if !(nr.b.is_finite() && nr.beta.is_finite() && nr.w.iter().all(|v| v.is_finite())) {
                return Err(Error::InvalidArgument("network parameters must be finite".into()));
            }
        }
        let logical_label = activation.label().to_string();
        let (activation, neurons) = match activation.expansion() {
            Some((base, st)) => {
                let mut out = Vec::with_capacity(neurons.len() * st.n0);
                for nr in &neurons {
                    for (o, wt) in st.offsets.iter().zip(&st.weights) {
                        out.push(Neuron {
                            w: nr.w.clone(),
                            b: nr.b + o,
                            beta: nr.beta * wt,
                        });
                    }
                }
                (base.clone(), out)
            }
            None => (activation, neurons),
        };
        Ok(Self {
            neurons,
            activation,
            logical_label,
            dim,
        })
    }

    pub fn empty(activation: Arc<ActivationModel>, dim: usize) -> Self {
        Self {
            logical_label: activation.label().to_string(),
            neurons: Vec::new(),
            activation,
            dim,
        }
    }

    pub fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    /// Physical neuron count.
    pub fn len(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Activation of the physical neurons.
    pub fn activation(&self) -> &Arc<ActivationModel> {
        &self.activation
    }

    pub fn logical_label(&self) -> &str {
        &self.logical_label
    }

    /// The same function in shifted coordinates: x ↦ net(x − c).
    pub fn with_input_shift(mut self, c: &[f64]) -> Self {
        for nr in &mut self.neurons {
            nr.b -= dot(&nr.w, c);
        }
        self
    }

    /// D^α net(x) = Σ β_i w_i^α σ^{(|α|)}(w_i·x + b_i), compensated, in index order.
    pub fn evaluate(&self, alpha: &[usize], x: &[f64]) -> Result<f64> {
        let k = self.check(alpha, x)?;
        Ok(self.evaluate_unchecked(alpha, k, x))
    }

    fn check(&self, alpha: &[usize], x: &[f64]) -> Result<usize> {
        if alpha.len() != self.dim || x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: if alpha.len() != self.dim { alpha.len() } else { x.len() },
            });
        }
        let k: usize = alpha.iter().sum();
        if k > self.activation.m_max() {
            return Err(Error::UnsupportedDerivativeOrder {
                requested: k,
                max: self.activation.m_max(),
            });
        }
        Ok(k)
    }

    fn evaluate_unchecked(&self, alpha: &[usize], k: usize, x: &[f64]) -> f64 {
        let mut s = NeumaierSum::default();
        for nr in &self.neurons {
            let mut c = nr.beta;
            for (w, &e) in nr.w.iter().zip(alpha) {
                c *= w.powi(e as i32);
            }
            s.add(c * self.activation.derivative(k, dot(&nr.w, x) + nr.b));
        }
        s.value()
    }

    /// D^α net at many points, in parallel over points.
    pub fn evaluate_many(&self, alpha: &[usize], xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if let Some(x) = xs.first() {
            self.check(alpha, x)?;
        }
        let k: usize = alpha.iter().sum();
        xs.par_iter()
            .map(|x| {
                if x.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        got: x.len(),
                    });
                }
                Ok(self.evaluate_unchecked(alpha, k, x))
            })
            .collect()
    }

    /// Writes the versioned CSV (w_1..w_d, b, beta) of the physical neurons.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{NETWORK_FORMAT}")?;
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.dim).map(|j| format!("w_{j}")).collect();
        header.push("b".into());
        header.push("beta".into());
        w.write_record(&header)?;
        for nr in &self.neurons {
            let mut row: Vec<String> = nr.w.iter().map(|v| format!("{v:.17e}")).collect();
            row.push(format!("{:.17e}", nr.b));
            row.push(format!("{:.17e}", nr.beta));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`write_csv`](Self::write_csv); `activation` is the physical activation.
    pub fn read_csv<R: BufRead>(mut input: R, activation: Arc<ActivationModel>) -> Result<Self> {
        let mut first = String::new();
        input.read_line(&mut first)?;
        if first.trim_end() != NETWORK_FORMAT {
            return Err(Error::InvalidArgument(format!("unsupported network format `{}`", first.trim_end())));
        }
        let mut r = csv::Reader::from_reader(input);
        let dim = r.headers()?.len().saturating_sub(2);
        let mut neurons = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::InvalidArgument(format!("bad number `{s}`: {e}"))))
                .collect::<Result<_>>()?;
            neurons.push(Neuron {
                w: v[..dim].to_vec(),
                b: v[dim],
                beta: v[dim + 1],
            });
        }
        Ok(Self {
            logical_label: activation.label().to_string(),
            neurons,
            activation,
            dim,
        })
    }

    pub fn meta(&self, construction: &str, seed: u64) -> NetworkMeta {
        NetworkMeta {
            format: 1,
            activation: self.logical_label.clone(),
            d: self.dim,
            construction: construction.to_string(),
            seed,
            neurons: self.neurons.len(),
        }
    }
}

impl NetworkMeta {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

fn assemble(
    kernel: &RepresentationKernel,
    items: impl Iterator<Item = Result<(Vec<f64>, f64, f64)>>,
) -> Result<TwoLayerNetwork> {
    let neurons = items
        .map(|r| {
            r.map(|(omega, b, beta)| Neuron {
                w: kernel.inner_weight(&omega),
                b,
                beta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TwoLayerNetwork::new(kernel.activation().clone(), kernel.dim(), neurons)
}

fn weighted(kernel: &RepresentationKernel, target: &SpectralTarget, s: &FeatureSample, scale: f64) -> Result<(Vec<f64>, f64, f64)> {
    let chi = kernel.phase_chi(&s.omega, s.b, target)?;
    Ok((s.omega.clone(), s.b, kernel.magnitude(&s.omega, s.b) * chi * scale))
}

/// β_i = J(ω_i, b_i)χ(ω_i, b_i)/n, w_i = ω_i/a.
pub fn assemble_plain(samples: &[FeatureSample], kernel: &RepresentationKernel, target: &SpectralTarget) -> Result<TwoLayerNetwork> {
    if !matches!(kernel.mode, KernelMode::Decaying) {
        return Err(Error::InvalidArgument("assemble_plain needs a decaying kernel".into()));
    }
    let inv = 1.0 / samples.len().max(1) as f64;
    assemble(kernel, samples.iter().map(|s| weighted(kernel, target, s, inv)))
}

/// β_i = ‖f‖_{B^m}|a_i|^{-1}(1+|ω_i|)^{-m}χ(ω_i, b_i)/n, w_i = ω_i/i.
pub fn assemble_periodic(samples: &[FeatureSample], kernel: &RepresentationKernel, target: &SpectralTarget) -> Result<TwoLayerNetwork> {
    let KernelMode::Periodic { coefficient, .. } = kernel.mode else {
        return Err(Error::InvalidArgument("assemble_periodic needs a periodic kernel".into()));
    };
    if coefficient.norm() < crate::activation::COEFFICIENT_FLOOR {
        return Err(Error::DegenerateNormalization {
            what: "|a_i|".into(),
            value: coefficient.norm(),
            floor: crate::activation::COEFFICIENT_FLOOR,
        });
    }
    let inv = 1.0 / samples.len().max(1) as f64;
    assemble(kernel, samples.iter().map(|s| weighted(kernel, target, s, inv)))
}

/// β_i = Re[K·u_C·u_f(ω_i)·sign φ(εb_i)·e^{-iab_i}]/n, w_i = ω_i/a.
pub fn assemble_approx(samples: &[FeatureSample], kernel: &RepresentationKernel, target: &SpectralTarget) -> Result<TwoLayerNetwork> {
    let KernelMode::Approx { c_eps, .. } = kernel.mode else {
        return Err(Error::InvalidArgument("assemble_approx needs an approx kernel".into()));
    };
    if c_eps.norm() < C_EPS_FLOOR {
        return Err(Error::DegenerateNormalization {
            what: "|C(eps)|".into(),
            value: c_eps.norm(),
            floor: C_EPS_FLOOR,
        });
    }
    let inv = 1.0 / samples.len().max(1) as f64;
    assemble(kernel, samples.iter().map(|s| weighted(kernel, target, s, inv)))
}

/// β_ij = λ̃(S_i)η_ij J(ω_ij, b_ij)/c_i.
pub fn assemble_stratified(
    plan: &StratifiedPlan,
    groups: &[CellSamples],
    kernel: &RepresentationKernel,
) -> Result<TwoLayerNetwork> {
    let mut items = Vec::new();
    for g in groups {
        let (measure, count) = if g.cell_id == plan.tail_id() {
            (plan.tail_measure, plan.tail_count)
        } else {
            let c = plan.cells.get(g.cell_id).ok_or_else(|| Error::PlanSampleMismatch(format!("cell {} is not in the plan", g.cell_id)))?;
            (c.measure, c.count)
        };
        if g.samples.len() != count {
            return Err(Error::PlanSampleMismatch(format!(
                "cell {} has {} samples, plan wants {count}",
                g.cell_id,
                g.samples.len()
            )));
        }
        for s in &g.samples {
            let beta = measure * f64::from(s.eta) * kernel.magnitude(&s.omega, s.b) / count as f64;
            items.push(Ok((s.omega.clone(), s.b, beta)));
        }
    }
    assemble(kernel, items.into_iter())
}
