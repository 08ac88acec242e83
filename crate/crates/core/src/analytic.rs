//! Closed-form results: the λ = 0 Jaynes–Cummings–Stark spectrum, the
//! semiclassical variational energy, the phase boundaries and their inverse
//! forms, scaling laws and topological quadruple points.
//!
//! Couplings are expressed in units of g_s = √(ωΩ)/2 unless a function
//! takes a [`ModelParams`]. Several formulas have a removable 0/0 at χ = 0;
//! they are evaluated in rationalized form so that no branch is needed.

use serde::{Deserialize, Serialize};

use crate::{Error, ModelParams, Result};

/// One branch of a JC–Stark doublet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JcBranch {
    pub energy: f64,
    /// Normalized coefficient on |n,⇑⟩.
    pub c_up: f64,
    /// Normalized coefficient on |n+1,⇓⟩.
    pub c_down: f64,
}

/// The exact 2×2 block spanned by |n,⇑⟩ and |n+1,⇓⟩ at λ = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JcStarkLevel {
    pub n: usize,
    pub e_plus: f64,
    pub e_minus: f64,
    pub lower: JcBranch,
    pub upper: JcBranch,
}

fn normalized(a: f64, b: f64, fallback: (f64, f64)) -> (f64, f64) {
    let norm = a.hypot(b);
    if norm == 0.0 {
        fallback
    } else {
        (a / norm, b / norm)
    }
}

/// The n-th JC–Stark doublet. `params.lambda` is ignored.
pub fn jc_level(params: &ModelParams, n: usize) -> JcStarkLevel {
    let ModelParams {
        omega,
        splitting,
        g,
        chi,
        ..
    } = *params;
    let nf = n as f64;
    let e_plus = (nf + 0.5 * (1.0 - chi)) * omega;
    let e_minus = 0.5 * (splitting - omega) + (nf + 0.5) * chi * omega;
    let coupling = g * (nf + 1.0).sqrt();
    let root = e_minus.hypot(coupling);
    // Each branch uses whichever of the two equivalent eigenvector forms
    // avoids cancellation.
    let lower = if e_minus > 0.0 {
        normalized(-coupling, e_minus + root, (0.0, 1.0))
    } else {
        normalized(e_minus - root, coupling, (0.0, 1.0))
    };
    let upper = if e_minus >= 0.0 {
        normalized(e_minus + root, coupling, (1.0, 0.0))
    } else {
        normalized(coupling, root - e_minus, (1.0, 0.0))
    };
    JcStarkLevel {
        n,
        e_plus,
        e_minus,
        lower: JcBranch {
            energy: e_plus - root,
            c_up: lower.0,
            c_down: lower.1,
        },
        upper: JcBranch {
            energy: e_plus + root,
            c_up: upper.0,
            c_down: upper.1,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JcGround {
    pub energy: f64,
    /// Doublet index of the ground state; `None` when it is |0,⇓⟩.
    pub n_star: Option<usize>,
}

/// Ground energy at λ = 0: the lower of −Ω/2 and every lower-branch level
/// up to `n_cap` (estimated from the photon number when `None`). The scan
/// continues past the cap while the levels are still decreasing.
pub fn jc_ground_energy(params: &ModelParams, n_cap: Option<usize>) -> JcGround {
    let cap = n_cap.unwrap_or_else(|| {
        let n_est = low_frequency_photons(params).unwrap_or(0.0);
        (n_est + 10.0 * n_est.sqrt()).ceil() as usize + 32
    });
    let mut best = JcGround {
        energy: -0.5 * params.splitting,
        n_star: None,
    };
    let mut prev = f64::INFINITY;
    let mut n = 0;
    loop {
        let e = jc_level(params, n).lower.energy;
        if e < best.energy {
            best = JcGround {
                energy: e,
                n_star: Some(n),
            };
        }
        if n >= cap && e >= prev {
            break;
        }
        prev = e;
        n += 1;
    }
    best
}

fn low_frequency_photons(params: &ModelParams) -> Option<f64> {
    let gbar = params.g_ratio();
    let b = displacement_bracket(0.5 * gbar, params.chi)?;
    Some((2.0 * b * params.scales().n_s).max(0.0))
}

/// Optimal photon numbers after the λ = 0 transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalPhotonNumber {
    /// Finite-frequency stationary point of the lower branch, in photons.
    pub n_min: f64,
    /// Its low-frequency limit in units of n_s.
    pub n_min_low: f64,
}

pub fn n_optimal(params: &ModelParams) -> Result<OptimalPhotonNumber> {
    let chi = params.chi;
    if chi == 0.0 {
        return Err(Error::Domain(
            "n_min requires a non-zero Stark ratio".into(),
        ));
    }
    if chi.abs() >= 1.0 {
        return Err(Error::Domain("n_min is singular at |chi| = 1".into()));
    }
    let gbar = params.g_ratio();
    let ratio = params.splitting / params.omega;
    let chi1 = chi * (1.0 - (1.0 + chi) / ratio);
    let radicand = (gbar * gbar + 8.0 * chi1) / (1.0 - chi * chi);
    let radicand_low = gbar * gbar + 8.0 * chi;
    if radicand < 0.0 || radicand_low < 0.0 {
        return Err(Error::Domain(format!(
            "no displaced solution at g/g_s = {gbar}, chi = {chi}"
        )));
    }
    let n_min = (1.0 - chi) / (2.0 * chi) - (gbar * gbar + 4.0 * chi) * ratio / (8.0 * chi * chi)
        + gbar * ratio / (8.0 * chi * chi) * radicand.sqrt();
    let n_min_low = 2.0 * displacement_bracket(0.5 * gbar, chi).unwrap_or(f64::NAN);
    if !(n_min_low > 0.0) {
        return Err(Error::Domain(format!(
            "pre-transition coupling g/g_s = {gbar} at chi = {chi}"
        )));
    }
    Ok(OptimalPhotonNumber { n_min, n_min_low })
}

fn effective_displacement(params: &ModelParams) -> f64 {
    let s = params.scales();
    if params.lambda >= 0.0 {
        s.gp_z
    } else {
        s.gp_y
    }
}

/// Lower semiclassical energy at position x (momentum for λ < 0).
pub fn variational_energy(x: f64, params: &ModelParams) -> f64 {
    let gp = effective_displacement(params);
    let ModelParams {
        omega,
        splitting,
        chi,
        ..
    } = *params;
    let r = splitting / omega;
    let root = (4.0 * gp * gp * x * x + (chi * x * x + r).powi(2)).sqrt();
    0.5 * omega * (x * x + gp * gp) - 0.5 * omega * root - 0.5 * gp * gp * omega
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationalMinima {
    pub x_b: f64,
    pub x_a: Option<f64>,
    pub e_a: Option<f64>,
    pub e_b: f64,
}

fn displaced_square(gp: f64, omega: f64, splitting: f64, chi: f64) -> Option<f64> {
    let r = splitting / omega;
    let one_minus = 1.0 - chi * chi;
    let a = gp * gp + chi * r;
    if one_minus <= 0.0 || a < 0.0 {
        return None;
    }
    let num = 4.0 * gp.powi(4) + 4.0 * gp * gp * chi * r - r * r * one_minus;
    let den = one_minus * (2.0 * gp * (a / one_minus).sqrt() + 2.0 * gp * gp + chi * r);
    if den <= 0.0 {
        return None;
    }
    Some(num / den)
}

/// Closed-form displaced-branch energy as a function of the bare
/// displacement g′, defined wherever its square root is real.
pub fn energy_a_of_displacement(gp: f64, omega: f64, splitting: f64, chi: f64) -> Option<f64> {
    let r = splitting / omega;
    let one_minus = 1.0 - chi * chi;
    let a = gp * gp + chi * r;
    if one_minus < 0.0 || a < 0.0 {
        return None;
    }
    let p = gp * (one_minus * a).sqrt();
    let q = 0.5 * (gp * gp * (2.0 - chi * chi) + chi * r);
    if p + q <= 0.0 {
        return None;
    }
    Some(-0.5 * gp * gp * omega - 0.25 * omega * (chi * gp * gp + r).powi(2) / (p + q))
}

pub fn variational_minima(params: &ModelParams) -> VariationalMinima {
    let gp = effective_displacement(params);
    let ModelParams {
        omega,
        splitting,
        chi,
        ..
    } = *params;
    let x_a = displaced_square(gp, omega, splitting, chi)
        .filter(|&u| u > 0.0)
        .map(f64::sqrt);
    let e_a = x_a.and_then(|_| energy_a_of_displacement(gp, omega, splitting, chi));
    VariationalMinima {
        x_b: 0.0,
        x_a,
        e_a,
        e_b: -0.5 * splitting,
    }
}

/// Every analytic boundary at fixed (λ, χ), as couplings in units of g_s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundarySet {
    pub g_c: Option<f64>,
    pub g_zeta1: Option<f64>,
    pub g_zeta2: Option<f64>,
    pub g_sx: Option<f64>,
    pub g_jc: Option<f64>,
    pub g_t1: Option<f64>,
    pub g_t1e: Option<f64>,
}

fn positive(v: f64) -> Option<f64> {
    (v.is_finite() && v > 0.0).then_some(v)
}

fn sqrt_positive(v: f64) -> Option<f64> {
    (v.is_finite() && v > 0.0).then(|| v.sqrt())
}

pub fn g_critical(lambda: f64, chi: f64) -> Option<f64> {
    positive(2.0 * (1.0 - chi).max(0.0).sqrt() / (1.0 + lambda.abs()))
}

pub fn g_zeta1(lambda: f64, chi: f64) -> Option<f64> {
    if chi <= 0.0 {
        return None;
    }
    let s = sqrt_positive(2.0 * (1.0 - chi * chi) / (chi * (3.0 + chi * chi)))?;
    positive(2.0 * s / (1.0 + lambda.abs()))
}

pub fn g_zeta2(lambda: f64, chi: f64) -> Option<f64> {
    if chi >= 0.0 {
        return None;
    }
    positive(2.0 * (2.0 / -chi).sqrt() / (1.0 + lambda.abs()))
}

pub fn g_sx(lambda: f64, chi: f64) -> Option<f64> {
    g_zeta2(lambda, chi)
}

pub fn g_jc(chi: f64) -> Option<f64> {
    positive(2.0 * (1.0 - chi).max(0.0).sqrt())
}

pub fn g_t1(lambda: f64, chi: f64) -> Option<f64> {
    let r = sqrt_positive((1.0 + lambda) * ((2.0 + chi) - lambda * (2.0 - chi)))?;
    positive(2.0 * std::f64::consts::SQRT_2 / r)
}

pub fn g_t1e(lambda: f64, chi: f64) -> Option<f64> {
    let r = sqrt_positive((1.0 + chi) - lambda * lambda * (1.0 - chi))?;
    positive(2.0 * (1.0 - chi * chi).max(0.0).sqrt() / r)
}

/// All boundaries for the (λ, χ) of `params`; its coupling is ignored.
pub fn boundaries(params: &ModelParams) -> BoundarySet {
    let (lambda, chi) = (params.lambda, params.chi);
    BoundarySet {
        g_c: g_critical(lambda, chi),
        g_zeta1: g_zeta1(lambda, chi),
        g_zeta2: g_zeta2(lambda, chi),
        g_sx: g_sx(lambda, chi),
        g_jc: g_jc(chi),
        g_t1: g_t1(lambda, chi),
        g_t1e: g_t1e(lambda, chi),
    }
}

/// |λ| on the critical line at coupling `g` (units of g_s).
pub fn lambda_critical(g: f64, chi: f64) -> Option<f64> {
    let v = 2.0 * (1.0 - chi).max(0.0).sqrt() / g - 1.0;
    (v >= 0.0 && v.is_finite()).then_some(v)
}

pub fn chi_critical(g: f64, lambda: f64) -> f64 {
    1.0 - (1.0 + lambda.abs()).powi(2) * g * g / 4.0
}

pub fn lambda_zeta1(g: f64, chi: f64) -> Option<f64> {
    if chi <= 0.0 {
        return None;
    }
    let s = sqrt_positive(2.0 * (1.0 - chi * chi) / (chi * (3.0 + chi * chi)))?;
    let v = 2.0 * s / g - 1.0;
    (v >= 0.0).then_some(v)
}

pub fn lambda_zeta2(g: f64, chi: f64) -> Option<f64> {
    if chi >= 0.0 {
        return None;
    }
    let v = 2.0 * (2.0 / -chi).sqrt() / g - 1.0;
    (v >= 0.0).then_some(v)
}

pub fn lambda_sx(g: f64, chi: f64) -> Option<f64> {
    lambda_zeta2(g, chi)
}

pub fn chi_sx(g: f64, lambda: f64) -> f64 {
    -8.0 / ((1.0 + lambda.abs()).powi(2) * g * g)
}

/// Upper root of the quadratic in λ, valid for λ ≥ χ/(2−χ).
pub fn lambda_t1(g: f64, chi: f64) -> Option<f64> {
    let s = 1.0 - 2.0 * (2.0 - chi) / (g * g);
    if s < 0.0 {
        return None;
    }
    Some((2.0 * s.sqrt() + chi) / (2.0 - chi))
}

pub fn chi_t1(g: f64, lambda: f64) -> f64 {
    2.0 * (4.0 - (1.0 - lambda * lambda) * g * g) / ((1.0 + lambda.abs()).powi(2) * g * g)
}

pub fn lambda_t1e(g: f64, chi: f64) -> Option<f64> {
    if chi >= 1.0 {
        return None;
    }
    let v = (1.0 + chi) * (1.0 / (1.0 - chi) - 4.0 / (g * g));
    (v >= 0.0).then(|| v.sqrt())
}

pub fn chi_t1e(g: f64, lambda: f64) -> f64 {
    let b = (1.0 + lambda * lambda) * g * g / 8.0;
    -b + ((1.0 + b).powi(2) - g * g / 2.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadruplePoint {
    /// Coupling in units of g_s.
    pub g: f64,
    pub lambda: f64,
    pub chi: f64,
}

/// Quadruple point on the λ > 0 side at fixed χ < 0.
pub fn quadruple_point_fixed_chi(chi: f64) -> Result<QuadruplePoint> {
    if !(chi < 0.0 && chi >= -1.0) {
        return Err(Error::Domain(format!(
            "quadruple point at fixed chi needs -1 <= chi < 0, got {chi}"
        )));
    }
    Ok(QuadruplePoint {
        g: std::f64::consts::SQRT_2 * (1.0 - chi) / (-chi).sqrt(),
        lambda: (1.0 + chi) / (1.0 - chi),
        chi,
    })
}

pub fn quadruple_point_fixed_lambda(lambda: f64) -> Result<QuadruplePoint> {
    if !(lambda.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "quadruple point at fixed lambda needs |lambda| < 1, got {lambda}"
        )));
    }
    Ok(QuadruplePoint {
        g: 2.0 * std::f64::consts::SQRT_2 / (1.0 - lambda * lambda).sqrt(),
        lambda,
        chi: -(1.0 - lambda.abs()) / (1.0 + lambda.abs()),
    })
}

/// ḡ_λ = g/g_c^λ with g in units of g_s.
pub fn gbar_lambda(g: f64, lambda: f64) -> f64 {
    0.5 * g * (1.0 + lambda.abs())
}

/// (−(ḡ²+χ) + ḡ√((ḡ²+2χ)/(1−χ²)))/χ², rationalized.
fn displacement_bracket(gbar: f64, chi: f64) -> Option<f64> {
    let one_minus = 1.0 - chi * chi;
    let g2 = gbar * gbar;
    if one_minus <= 0.0 || g2 + 2.0 * chi < 0.0 {
        return None;
    }
    let den = one_minus * (gbar * ((g2 + 2.0 * chi) / one_minus).sqrt() + g2 + chi);
    if den <= 0.0 {
        return None;
    }
    Some(((g2 + chi).powi(2) - 1.0) / den)
}

fn sx_law(gbar: f64, chi: f64) -> f64 {
    let g2 = gbar * gbar;
    let d = 2.0 * chi + g2;
    -(g2 * chi + 2.0) / (d * (1.0 + gbar * ((1.0 - chi * chi) / d).sqrt()))
}

/// Values of every scaling law at one (ḡ_λ, χ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingValues {
    /// ⟨x²⟩/(2x_s²) for λ > 0.
    pub x2_scaled: f64,
    pub sx: f64,
    /// ⟨x²⟩/(2x_s²) at λ = 0, half of `x2_scaled`.
    pub x2_jc: f64,
    /// (⟨x²⟩+⟨p²⟩)/x_s².
    pub x2p2_unified: f64,
    /// (χ⟨σx⟩+1)²/(1−χ²) evaluated with `sx`.
    pub global_lhs: f64,
    /// 1/(2χ/ḡ_λ²+1); meaningful after the transition.
    pub global_rhs: f64,
}

pub fn scaling_laws(gbar_lambda: f64, chi: f64) -> Result<ScalingValues> {
    if !(chi.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "scaling laws need |chi| < 1, got {chi}"
        )));
    }
    let g2 = gbar_lambda * gbar_lambda;
    let after = g2 >= 1.0 - chi;
    let (b, sx) = if after {
        (
            displacement_bracket(gbar_lambda, chi)
                .unwrap_or(0.0)
                .max(0.0),
            sx_law(gbar_lambda, chi),
        )
    } else {
        (0.0, -1.0)
    };
    Ok(ScalingValues {
        x2_scaled: b,
        sx,
        x2_jc: 0.5 * b,
        x2p2_unified: 2.0 * b,
        global_lhs: (chi * sx + 1.0).powi(2) / (1.0 - chi * chi),
        global_rhs: 1.0 / (2.0 * chi / g2 + 1.0),
    })
}

/// Distance from the transition used by the local laws.
pub fn local_distance(g: f64, lambda: f64, chi: f64) -> Option<f64> {
    let gc = g_critical(lambda, chi)?;
    Some((1.0 - chi) / (1.0 + chi) * (g / gc - 1.0))
}

/// Second-order expansions of (1−χ)⟨x²⟩/(2x_s²) and ⟨σx⟩ around the
/// transition.
pub fn local_expansion(dg: f64) -> (f64, f64) {
    (2.0 * dg - dg * dg, -1.0 + 2.0 * dg - 3.0 * dg * dg)
}
