//! Named activations used by experiment configs.

use std::f64::consts::PI;

use super::{
    bv_first_difference, composite_from_table, ActivationModel, DecayCertificate, Family, Profile, Spectrum,
    SMOOTH_ORDER,
};
use crate::error::{Error, Result};

/// Labels accepted by [`registry`].
pub fn registry_labels() -> &'static [&'static str] {
    &[
        "gaussian",
        "logistic-diff",
        "relu-dd",
        "relu2-ddd",
        "cos",
        "square",
        "sinc",
        "heaviside-diff",
    ]
}

/// Builds the activation registered under `label`.
///
/// Certificates were measured as sup_t |σ^{(k)}(t)|(1+|t|)^p over the check
/// grid and rounded up.
pub fn registry(label: &str) -> Result<ActivationModel> {
    match label {
        "gaussian" => ActivationModel::decaying(
            label,
            Profile::Gaussian,
            DecayCertificate {
                c_p: 22.0,
                p: 3.0,
                m_max: 3,
            },
        ),
        "logistic-diff" => {
            let base = ActivationModel::bounded("logistic", Profile::Logistic, 1.0, None, SMOOTH_ORDER)?;
            let (nu, _) = composite_from_table(
                &base,
                Family::Logistic,
                DecayCertificate {
                    c_p: 4.7,
                    p: 3.0,
                    m_max: 3,
                },
            )?;
            Ok(nu.with_label(label))
        }
        "relu-dd" => {
            let base = relu_base(Profile::Relu, 1)?;
            let (nu, _) = composite_from_table(
                &base,
                Family::Relu,
                DecayCertificate {
                    c_p: 4.0,
                    p: 2.0,
                    m_max: 1,
                },
            )?;
            Ok(nu.with_label(label).with_support_radius(1.0))
        }
        "relu2-ddd" => {
            let base = relu_base(Profile::ReluPow(2), 2)?;
            let (nu, _) = composite_from_table(
                &base,
                Family::ReluPow(2),
                DecayCertificate {
                    c_p: 18.0,
                    p: 2.0,
                    m_max: 2,
                },
            )?;
            Ok(nu.with_label(label).with_support_radius(2.0))
        }
        "cos" => ActivationModel::periodic(label, Profile::Cos, 2.0 * PI, SMOOTH_ORDER),
        "square" => ActivationModel::periodic(label, Profile::Square, 2.0 * PI, 0),
        "sinc" => Ok(ActivationModel::bounded(label, Profile::Sinc, 1.0, Some((0.0, 1.0)), 3)?.with_spectrum(Spectrum::Sinc)),
        "heaviside-diff" => {
            let base = ActivationModel::bounded("heaviside", Profile::Heaviside, 1.0, None, 0)?
                .with_spectrum(Spectrum::Step);
            bv_first_difference(&base)?
                .with_label(label)
                .with_fourier_interval(0.0, PI)
        }
        _ => Err(Error::UnknownActivation(label.to_string())),
    }
}

fn relu_base(profile: Profile, m_max: usize) -> Result<ActivationModel> {
    // Unbounded base; only used through its stencil, so the kind is nominal.
    ActivationModel::bounded("relu", profile, f64::INFINITY, None, m_max)
}
