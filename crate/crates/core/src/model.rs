//! Physical parameters and the characteristic scales derived from them.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The five physical parameters of the model.
///
/// `omega` is the boson frequency, `splitting` the qubit level splitting Ω,
/// `g` the linear coupling (all energies), `lambda` the counter-rotating to
/// rotating ratio and `chi` the Stark ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub omega: f64,
    #[serde(rename = "Omega")]
    pub splitting: f64,
    pub g: f64,
    pub lambda: f64,
    pub chi: f64,
}

/// Characteristic scales shared by the numerical and analytic modules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedScales {
    /// √(ωΩ)/2
    pub g_s: f64,
    /// √(Ω/2ω)
    pub x_s: f64,
    /// Ω/4ω
    pub n_s: f64,
    pub g_z: f64,
    pub g_y: f64,
    /// √2·g_z/ω, the bare displacement of the spin-dependent wells.
    pub gp_z: f64,
    pub gp_y: f64,
}

impl ModelParams {
    /// Builds and validates parameters given in energy units.
    pub fn new(omega: f64, splitting: f64, g: f64, lambda: f64, chi: f64) -> Result<Self> {
        validate(ModelParams {
            omega,
            splitting,
            g,
            lambda,
            chi,
        })
    }

    /// Parameters in the reduced units used on every figure axis: Ω = 1,
    /// `omega_ratio` = ω/Ω and `g_ratio` = g/g_s.
    pub fn scaled(omega_ratio: f64, g_ratio: f64, lambda: f64, chi: f64) -> Result<Self> {
        let g_s = (omega_ratio.max(0.0)).sqrt() / 2.0;
        Self::new(omega_ratio, 1.0, g_ratio * g_s, lambda, chi)
    }

    pub fn g_s(&self) -> f64 {
        (self.omega * self.splitting).sqrt() / 2.0
    }

    /// Coupling in units of g_s.
    pub fn g_ratio(&self) -> f64 {
        self.g / self.g_s()
    }

    pub fn omega_ratio(&self) -> f64 {
        self.omega / self.splitting
    }

    pub fn with_g_ratio(mut self, g_ratio: f64) -> Self {
        self.g = g_ratio.abs() * self.g_s();
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn scales(&self) -> DerivedScales {
        derived_scales(self)
    }
}

/// Checks every parameter invariant. A negative coupling is mapped to its
/// unitarily equivalent positive value.
pub fn validate(params: ModelParams) -> Result<ModelParams> {
    let ModelParams {
        omega,
        splitting,
        g,
        lambda,
        chi,
    } = params;
    for (name, v) in [
        ("omega", omega),
        ("Omega", splitting),
        ("g", g),
        ("lambda", lambda),
        ("chi", chi),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite { name });
        }
    }
    if omega <= 0.0 || splitting <= 0.0 {
        return Err(Error::NonPositiveFrequency { omega, splitting });
    }
    if chi.abs() > 1.0 {
        return Err(Error::ChiOutOfRange(chi));
    }
    Ok(ModelParams {
        g: g.abs(),
        ..params
    })
}

pub fn derived_scales(params: &ModelParams) -> DerivedScales {
    let ModelParams {
        omega,
        splitting,
        g,
        lambda,
        ..
    } = *params;
    let g_s = (omega * splitting).sqrt() / 2.0;
    let x_s = (splitting / (2.0 * omega)).sqrt();
    let g_z = 0.5 * (1.0 + lambda) * g;
    let g_y = 0.5 * (1.0 - lambda) * g;
    DerivedScales {
        g_s,
        x_s,
        n_s: splitting / (4.0 * omega),
        g_z,
        g_y,
        gp_z: std::f64::consts::SQRT_2 * g_z / omega,
        gp_y: std::f64::consts::SQRT_2 * g_y / omega,
    }
}
