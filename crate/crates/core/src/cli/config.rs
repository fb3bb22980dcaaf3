//! TOML experiment configs.
//!
//! ```toml
//! [experiment]
//! method = "plain"          # plain | periodic | approx | stratified | stratified-periodic
//! m = 0
//! n_grid = [32, 64, 128]
//! seeds = [1, 2, 3]
//! n_quad = 4096             # optional
//! aggregate = "median"      # optional: median | mean
//! epsilon = 0.1             # optional, approx only; default n^(-1/4)
//! smoothness = 1.0          # optional, stratified only
//! pilot_factor = 50         # optional, stratified only
//! frequency = 0.5           # optional fixed a
//!
//! [activation]
//! label = "logistic-diff"
//! c_p = 4.7                 # optional certificate override
//! p = 3.0
//!
//! [target]
//! d = 2
//! spec = "gaussian(1.0, [0, 0])"
//!
//! [domain]                  # optional, default [-1, 1]^d
//! lower = [-1, -1]
//! upper = [1, 1]
//! ```

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use serde::Deserialize;
use toml::Spanned;

use crate::activation::{registry, ActivationKind, ActivationModel};
use crate::error::{Error, Result};
use crate::metrics::{Aggregate, DomainBox, DEFAULT_N_QUAD};
use crate::target::{parse_target, SpectralTarget};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Plain,
    Periodic,
    Approx,
    Stratified,
    StratifiedPeriodic,
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "plain" => Method::Plain,
            "periodic" => Method::Periodic,
            "approx" => Method::Approx,
            "stratified" => Method::Stratified,
            "stratified-periodic" => Method::StratifiedPeriodic,
            _ => {
                return Err(format!(
                    "unknown method `{s}` (expected plain, periodic, approx, stratified or stratified-periodic)"
                ))
            }
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Plain => "plain",
            Method::Periodic => "periodic",
            Method::Approx => "approx",
            Method::Stratified => "stratified",
            Method::StratifiedPeriodic => "stratified-periodic",
        })
    }
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub method: Method,
    pub m: usize,
    pub n_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub n_quad: usize,
    pub aggregate: Aggregate,
    pub epsilon: Option<f64>,
    pub smoothness: f64,
    pub pilot_factor: usize,
    pub frequency: Option<f64>,
    pub activation: Arc<ActivationModel>,
    pub target: SpectralTarget,
    pub domain: DomainBox,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Spanned<RawExperiment>,
    activation: Spanned<RawActivation>,
    target: Spanned<RawTarget>,
    domain: Option<Spanned<RawDomain>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    method: Spanned<String>,
    m: Option<Spanned<i64>>,
    n_grid: Spanned<Vec<i64>>,
    seeds: Spanned<Vec<u64>>,
    n_quad: Option<Spanned<i64>>,
    aggregate: Option<Spanned<String>>,
    epsilon: Option<Spanned<f64>>,
    smoothness: Option<Spanned<f64>>,
    pilot_factor: Option<Spanned<i64>>,
    frequency: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawActivation {
    label: Spanned<String>,
    c_p: Option<Spanned<f64>>,
    p: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    d: Spanned<i64>,
    spec: Spanned<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    lower: Spanned<Vec<f64>>,
    upper: Spanned<Vec<f64>>,
}

struct Ctx<'a> {
    src: &'a str,
}

impl Ctx<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        self.src[..span.start.min(self.src.len())].matches('\n').count() + 1
    }

    fn err<T>(&self, span: Range<usize>, msg: impl fmt::Display) -> Result<T> {
        Err(Error::Config(format!("config:{}: {msg}", self.line(span))))
    }

    fn positive(&self, v: &Spanned<i64>, what: &str) -> Result<usize> {
        if *v.get_ref() <= 0 {
            return self.err(v.span(), format!("{what} must be positive, got {}", v.get_ref()));
        }
        Ok(*v.get_ref() as usize)
    }
}

impl ExperimentConfig {
    /// Parses and validates a config; errors read `config:LINE: message`.
    pub fn from_toml(src: &str) -> Result<Self> {
        let cx = Ctx { src };
        let raw: RawConfig = match toml::from_str(src) {
            Ok(r) => r,
            Err(e) => {
                let line = e.span().map(|s| cx.line(s)).unwrap_or(1);
                return Err(Error::Config(format!("config:{line}: {}", e.message().trim())));
            }
        };
        let ex = raw.experiment.into_inner();
        let method: Method = match ex.method.get_ref().parse() {
            Ok(m) => m,
            Err(msg) => return cx.err(ex.method.span(), msg),
        };
        let m = match &ex.m {
            Some(v) if *v.get_ref() < 0 => return cx.err(v.span(), "m must be non-negative"),
            Some(v) => *v.get_ref() as usize,
            None => 0,
        };
        if ex.n_grid.get_ref().is_empty() {
            return cx.err(ex.n_grid.span(), "n_grid must not be empty");
        }
        let mut n_grid = Vec::new();
        for &n in ex.n_grid.get_ref() {
            if n <= 0 {
                return cx.err(ex.n_grid.span(), format!("n_grid entries must be positive, got {n}"));
            }
            n_grid.push(n as usize);
        }
        if ex.seeds.get_ref().is_empty() {
            return cx.err(ex.seeds.span(), "seeds must not be empty");
        }
        let n_quad = match &ex.n_quad {
            Some(v) => cx.positive(v, "n_quad")?,
            None => DEFAULT_N_QUAD,
        };
        if n_quad < 2 {
            return cx.err(ex.n_quad.as_ref().unwrap().span(), "n_quad must be at least 2");
        }
        let aggregate = match &ex.aggregate {
            Some(v) => match v.get_ref().parse::<Aggregate>() {
                Ok(a) => a,
                Err(e) => return cx.err(v.span(), e.to_string().trim_start_matches("InvalidArgument: ")),
            },
            None => Aggregate::Median,
        };
        let positive_real = |v: &Option<Spanned<f64>>, what: &str| -> Result<Option<f64>> {
            match v {
                Some(x) if !(*x.get_ref() > 0.0 && x.get_ref().is_finite()) => {
                    cx.err(x.span(), format!("{what} must be positive, got {}", x.get_ref()))
                }
                Some(x) => Ok(Some(*x.get_ref())),
                None => Ok(None),
            }
        };
        let epsilon = positive_real(&ex.epsilon, "epsilon")?;
        let smoothness = positive_real(&ex.smoothness, "smoothness")?.unwrap_or(1.0);
        let pilot_factor = match &ex.pilot_factor {
            Some(v) => cx.positive(v, "pilot_factor")?,
            None => 50,
        };
        let frequency = match &ex.frequency {
            Some(v) if *v.get_ref() == 0.0 || !v.get_ref().is_finite() => {
                return cx.err(v.span(), "frequency must be a non-zero finite number")
            }
            v => v.as_ref().map(|x| *x.get_ref()),
        };

        let act_raw = raw.activation.into_inner();
        let mut activation = match registry(act_raw.label.get_ref()) {
            Ok(a) => a,
            Err(e) => return cx.err(act_raw.label.span(), e),
        };
        if act_raw.c_p.is_some() || act_raw.p.is_some() {
            let span = act_raw.c_p.as_ref().or(act_raw.p.as_ref()).unwrap().span();
            let ActivationKind::Decaying { c_p, p } = *activation.kind() else {
                return cx.err(span, format!("{} has no decay certificate to override", activation.label()));
            };
            let c_p = act_raw.c_p.as_ref().map(|v| *v.get_ref()).unwrap_or(c_p);
            let p = act_raw.p.as_ref().map(|v| *v.get_ref()).unwrap_or(p);
            activation = match activation.with_decay_certificate(c_p, p) {
                Ok(a) => a,
                Err(e) => return cx.err(span, e),
            };
        }

        let tg = raw.target.into_inner();
        let d = cx.positive(&tg.d, "d")?;
        let target = match parse_target(tg.spec.get_ref(), d) {
            Ok(t) => t,
            Err(e) => return cx.err(tg.spec.span(), e),
        };
        let domain = match &raw.domain {
            Some(dm) => {
                let dm = dm.get_ref();
                if dm.lower.get_ref().len() != d || dm.upper.get_ref().len() != d {
                    return cx.err(dm.lower.span(), format!("domain bounds must have d = {d} coordinates"));
                }
                match DomainBox::new(dm.lower.get_ref().clone(), dm.upper.get_ref().clone()) {
                    Ok(b) => b,
                    Err(e) => return cx.err(dm.lower.span(), e),
                }
            }
            None => DomainBox::cube(d, -1.0, 1.0)?,
        };

        // Method/activation compatibility.
        let label_span = act_raw.label.span();
        let kind = activation.kind().clone();
        match method {
            Method::Plain | Method::Stratified if !matches!(kind, ActivationKind::Decaying { .. }) => {
                return cx.err(label_span, format!("method {method} needs a decaying activation, {} is not", activation.label()));
            }
            Method::Periodic | Method::StratifiedPeriodic if !matches!(kind, ActivationKind::Periodic { .. }) => {
                return cx.err(label_span, format!("method {method} needs a periodic activation, {} is not", activation.label()));
            }
            Method::Approx
                if !matches!(
                    kind,
                    ActivationKind::Bounded {
                        fourier_interval: Some(_),
                        ..
                    }
                ) =>
            {
                return cx.err(
                    label_span,
                    format!("method approx needs a bounded activation with a Fourier interval, {} has none", activation.label()),
                );
            }
            _ => {}
        }
        let m_span = ex.m.as_ref().map(|v| v.span()).unwrap_or(ex.method.span());
        let needed = if matches!(method, Method::Stratified | Method::StratifiedPeriodic) { m + 1 } else { m };
        if needed > activation.m_max() {
            return cx.err(
                m_span,
                format!("m = {m} needs {needed} derivatives but {} supports {}", activation.label(), activation.m_max()),
            );
        }
        if m > target.m_max() {
            return cx.err(m_span, format!("m = {m} exceeds the target's maximum order {}", target.m_max()));
        }
        if matches!(method, Method::Stratified | Method::StratifiedPeriodic) && n_grid.iter().any(|&n| n < 2) {
            return cx.err(ex.n_grid.span(), "stratified methods need n >= 2");
        }
        if epsilon.is_some() && method != Method::Approx {
            return cx.err(ex.epsilon.as_ref().unwrap().span(), "epsilon only applies to method approx");
        }

        Ok(Self {
            method,
            m,
            n_grid,
            seeds: ex.seeds.into_inner(),
            n_quad,
            aggregate,
            epsilon,
            smoothness,
            pilot_factor,
            frequency,
            activation: Arc::new(activation),
            target,
            domain,
        })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&src)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
[experiment]
method = "plain"
m = 0
n_grid = [16, 32]
seeds = [1, 2]

[activation]
label = "gaussian"

[target]
d = 1
spec = "gaussian(1.0, 0)"
"#;

    #[test]
    fn parses_defaults() {
        let c = ExperimentConfig::from_toml(GOOD).unwrap();
        assert_eq!(c.method, Method::Plain);
        assert_eq!(c.n_quad, DEFAULT_N_QUAD);
        assert_eq!(c.domain.lower(), &[-1.0]);
        assert_eq!(c.pilot_factor, 50);
    }

    #[test]
    fn errors_carry_lines() {
        let bad = GOOD.replace("label = \"gaussian\"", "label = \"cos\"");
        let e = ExperimentConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(e.contains("config:9:") && e.contains("decaying"), "{e}");
        let bad = GOOD.replace("m = 0", "m = 9");
        let e = ExperimentConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(e.contains("config:4:"), "{e}");
        let bad = GOOD.replace("seeds = [1, 2]", "seeds = [1, 2]\nbogus = 3");
        let e = ExperimentConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(e.contains("config:7:") && e.contains("bogus"), "{e}");
        let bad = GOOD.replace("n_grid = [16, 32]", "n_grid = [16, -2]");
        assert!(ExperimentConfig::from_toml(&bad).unwrap_err().to_string().contains("config:5:"));
    }
}
