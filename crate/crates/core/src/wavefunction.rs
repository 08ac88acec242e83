//! Spin-resolved wavefunctions in quadrature space.
//!
//! A Fock ⊗ σx state is rotated to the σz basis,
//! |⇑⟩ = (|+z⟩ + |−z⟩)/√2, |⇓⟩ = (|+z⟩ − |−z⟩)/√2, and each spin component
//! is synthesised from oscillator eigenfunctions φₙ. In the σz basis the
//! Hamiltonian reads
//!
//! ```text
//! H = (ω/2)(p̂² + x̂²) − ω/2 + √2 g_z x̂ σz + √2 g_y p̂ σy
//!     + [(Ω − χω)/2 + (χω/2)(x̂² + p̂²)] σx
//! ```
//!
//! which is what [`energy_decomposition`] integrates term by term.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::fock::{Spin, Truncation};
use crate::{Error, ModelParams, Result};

/// Relative amplitude below which a sample does not count for node detection.
pub const NODE_THRESHOLD: f64 = 1e-6;
/// Endpoint-to-peak ratio a grid must reach to be accepted.
pub const EDGE_RATIO: f64 = 1e-10;
const MIN_SAMPLES: usize = 4096;
const MAX_STEP: f64 = 0.02;

/// Which quadrature the samples are taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrature {
    Position,
    Momentum,
}

/// Uniform symmetric sampling grid on [−L, L].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub half_width: f64,
    pub samples: usize,
}

impl SpatialGrid {
    /// At least 4096 samples with a step no larger than 0.02. The sample
    /// count is odd so that x = 0 is on the grid.
    pub fn new(half_width: f64) -> Self {
        let needed = (2.0 * half_width / MAX_STEP).ceil() as usize + 1;
        let mut samples = needed.max(MIN_SAMPLES);
        if samples % 2 == 0 {
            samples += 1;
        }
        SpatialGrid {
            half_width,
            samples,
        }
    }

    /// L = max(8, g′ + 6√(2⟨n⟩+1)), with g′ the larger bare displacement.
    pub fn for_state(params: &ModelParams, mean_n: f64) -> Self {
        let s = params.scales();
        let gp = s.gp_z.abs().max(s.gp_y.abs());
        Self::new((gp + 6.0 * (2.0 * mean_n + 1.0).sqrt()).max(8.0))
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.samples - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let dx = self.step();
        (0..self.samples)
            .map(|i| -self.half_width + i as f64 * dx)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionWaveFunction {
    pub grid: Vec<f64>,
    /// σz = +1 component.
    pub psi_plus: Vec<f64>,
    /// σz = −1 component.
    pub psi_minus: Vec<f64>,
    pub dx: f64,
    pub phase_fixed: bool,
    pub quadrature: Quadrature,
}

impl PositionWaveFunction {
    pub fn component(&self, c: Component) -> &[f64] {
        match c {
            Component::Plus => &self.psi_plus,
            Component::Minus => &self.psi_minus,
        }
    }

    /// Σ(ψ₊² + ψ₋²)·dx
    pub fn norm(&self) -> f64 {
        self.psi_plus
            .iter()
            .zip(&self.psi_minus)
            .map(|(a, b)| a * a + b * b)
            .sum::<f64>()
            * self.dx
    }

    /// Writes `x psi_plus psi_minus` columns with '#' header lines.
    pub fn dump<W: Write>(&self, params: &ModelParams, out: &mut W) -> io::Result<()> {
        writeln!(
            out,
            "# omega={} Omega={} g={} lambda={} chi={}",
            params.omega, params.splitting, params.g, params.lambda, params.chi
        )?;
        let q = match self.quadrature {
            Quadrature::Position => "x",
            Quadrature::Momentum => "p",
        };
        writeln!(out, "# quadrature={q} dx={}", self.dx)?;
        writeln!(out, "# {q} psi_plus psi_minus")?;
        for i in 0..self.grid.len() {
            writeln!(
                out,
                "{:.12e} {:.12e} {:.12e}",
                self.grid[i], self.psi_plus[i], self.psi_minus[i]
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub n_z: usize,
    pub node_positions: Vec<f64>,
    pub threshold_used: f64,
}

/// Ground-state energy split into the terms of the σz-basis Hamiltonian.
/// The four interaction parts already include their Hermitian partners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParts {
    /// Tunnelling, Ω∫ψ₊ψ₋.
    pub e_omega: f64,
    /// Spin-orbit part, 2√2(−g_y)∫ψ₊∂ψ₋.
    pub e_gy: f64,
    /// χω∫ψ₊p̂²ψ₋.
    pub e_p2: f64,
    /// χω∫ψ₊x̂²ψ₋.
    pub e_x2: f64,
    /// −χω∫ψ₊ψ₋, the constant inside the Stark factor n̂ = (x̂²+p̂²−1)/2.
    pub e_stark_offset: f64,
    /// (ω/2)⟨p̂²⟩.
    pub e_kinetic: f64,
    /// (ω/2)⟨x̂²⟩ − ω/2 + √2 g_z⟨x̂σz⟩.
    pub e_potential: f64,
    pub total: f64,
}

const PI_QUARTER: f64 = 0.751_125_544_464_942_5;
const RESCALE: f64 = 1e150;
const LN_RESCALE: f64 = 345.387_763_949_107_0;

/// Normalised oscillator eigenfunction φₙ(x).
pub fn hermite_function(n: usize, x: f64) -> f64 {
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    synthesize_at(&[&coeffs], x)[0]
}

/// Σₙ cₙ φₙ(x) for several coefficient sets at once. The recurrence runs
/// on values scaled by e^{x²/2}; the scale is tracked as a logarithm and
/// reapplied at the end, so large |x| neither underflows nor overflows.
fn synthesize_at<const K: usize>(coeffs: &[&[f64]; K], x: f64) -> [f64; K] {
    let len = coeffs.iter().map(|c| c.len()).max().unwrap_or(0);
    let mut sums = [0.0; K];
    if len == 0 {
        return sums;
    }
    let mut log_scale = -0.5 * x * x;
    let mut prev = 0.0;
    let mut cur = PI_QUARTER;
    for n in 0..len {
        for (s, c) in sums.iter_mut().zip(coeffs) {
            if let Some(cn) = c.get(n) {
                *s += cn * cur;
            }
        }
        if n + 1 == len {
            break;
        }
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * cur - (nf / (nf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            for s in sums.iter_mut() {
                *s /= RESCALE;
            }
            log_scale += LN_RESCALE;
        }
    }
    let factor = log_scale.exp();
    sums.map(|s| s * factor)
}

/// Splits a full-basis state into σz components in the Fock index.
fn sigma_z_coefficients(trunc: Truncation, up: &[f64], down: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut plus: Vec<f64> = (0..trunc.levels()).map(|n| r * (up[n] + down[n])).collect();
    let mut minus: Vec<f64> = (0..trunc.levels()).map(|n| r * (up[n] - down[n])).collect();
    let peak = plus
        .iter()
        .chain(&minus)
        .fold(0.0f64, |m, c| m.max(c.abs()));
    let last = (0..trunc.levels())
        .rev()
        .find(|&n| plus[n].abs().max(minus[n].abs()) > 1e-15 * peak)
        .map_or(0, |n| n + 1);
    plus.truncate(last);
    minus.truncate(last);
    (plus, minus)
}

fn split_spins(trunc: Truncation, state: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if state.len() != trunc.dim() {
        return Err(Error::Dimension(format!(
            "state has {} entries, truncation needs {}",
            state.len(),
            trunc.dim()
        )));
    }
    let up = state[trunc.index(Spin::Up, 0)..=trunc.index(Spin::Up, trunc.n_max())].to_vec();
    let down = state[trunc.index(Spin::Down, 0)..=trunc.index(Spin::Down, trunc.n_max())].to_vec();
    Ok((up, down))
}

fn synthesize(
    plus: &[f64],
    minus: &[f64],
    grid: SpatialGrid,
    quadrature: Quadrature,
) -> Result<PositionWaveFunction> {
    let xs = grid.points();
    let mut psi_plus = Vec::with_capacity(xs.len());
    let mut psi_minus = Vec::with_capacity(xs.len());
    for &x in &xs {
        let [a, b] = synthesize_at(&[plus, minus], x);
        psi_plus.push(a);
        psi_minus.push(b);
    }
    let peak = psi_plus
        .iter()
        .chain(&psi_minus)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let last = xs.len() - 1;
    let edge = [psi_plus[0], psi_plus[last], psi_minus[0], psi_minus[last]]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 || edge > EDGE_RATIO * peak {
        return Err(Error::GridTooSmall {
            ratio: if peak > 0.0 {
                edge / peak
            } else {
                f64::INFINITY
            },
        });
    }
    let plus_max = psi_plus
        .iter()
        .fold(0.0f64, |m, v| if v.abs() > m.abs() { *v } else { m });
    if plus_max < 0.0 {
        psi_plus.iter_mut().for_each(|v| *v = -*v);
        psi_minus.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(PositionWaveFunction {
        dx: grid.step(),
        grid: xs,
        psi_plus,
        psi_minus,
        phase_fixed: true,
        quadrature,
    })
}

/// ψ±(x) of a normalised full-basis state.
pub fn position_representation(
    state: &[f64],
    trunc: Truncation,
    grid: SpatialGrid,
) -> Result<PositionWaveFunction> {
    let (up, down) = split_spins(trunc, state)?;
    let (plus, minus) = sigma_z_coefficients(trunc, &up, &down);
    synthesize(&plus, &minus, grid, Quadrature::Position)
}

/// ⟨P⟩ of a full-basis state, computed from its support.
fn parity_expectation(trunc: Truncation, state: &[f64]) -> f64 {
    state
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (s, n) = trunc.label(i);
            let boson = if n % 2 == 0 { 1.0 } else { -1.0 };
            s.sign() * boson * c * c
        })
        .sum::<f64>()
        / state.iter().map(|c| c * c).sum::<f64>()
}

/// ψ±(p) of a parity eigenstate. Each coefficient picks up iⁿ and the spin
/// phase 1 (⇑) or −i (⇓); for a parity eigenstate the result is real after
/// removing a global −i in the odd sector.
pub fn momentum_representation(
    state: &[f64],
    trunc: Truncation,
    grid: SpatialGrid,
) -> Result<PositionWaveFunction> {
    let p = parity_expectation(trunc, state);
    if p.abs() < 1.0 - 1e-8 {
        return Err(Error::ImpureParity(p));
    }
    let (mut up, mut down) = split_spins(trunc, state)?;
    // Real factor of iⁿ·(spin phase)·(global phase), global = 1 or i.
    let quarter = |k: usize| -> f64 {
        match k % 4 {
            0 => 1.0,
            2 => -1.0,
            _ => 0.0,
        }
    };
    let global = if p > 0.0 { 0 } else { 1 };
    for (n, c) in up.iter_mut().enumerate() {
        *c *= quarter(n + global);
    }
    for (n, c) in down.iter_mut().enumerate() {
        // −i = i³
        *c *= quarter(n + 3 + global);
    }
    let (plus, minus) = sigma_z_coefficients(trunc, &up, &down);
    synthesize(&plus, &minus, grid, Quadrature::Momentum)
}

/// Counts sign changes between consecutive significant samples.
pub fn count_nodes(wf: &PositionWaveFunction, component: Component) -> NodeReport {
    let psi = wf.component(component);
    let peak = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = NODE_THRESHOLD * peak;
    let mut last: Option<usize> = None;
    let mut nodes = Vec::new();
    for (i, &v) in psi.iter().enumerate() {
        if v.abs() <= threshold {
            continue;
        }
        if let Some(j) = last {
            if (psi[j] > 0.0) != (v > 0.0) {
                let (xa, xb) = (wf.grid[j], wf.grid[i]);
                let t = psi[j] / (psi[j] - v);
                nodes.push(xa + t * (xb - xa));
            }
        }
        last = Some(i);
    }
    NodeReport {
        n_z: nodes.len(),
        node_positions: nodes,
        threshold_used: threshold,
    }
}

/// ζ = |x_peak|/g′, with x_peak the refined maximum of |ψ₊| and g′ the
/// bare displacement of the wavefunction's quadrature (g′_z in x, g′_y in p).
/// When two maxima agree within 1% the outer one is taken.
pub fn zeta_ratio(wf: &PositionWaveFunction, params: &ModelParams) -> Result<f64> {
    let s = params.scales();
    let gp = match wf.quadrature {
        Quadrature::Position => s.gp_z.abs(),
        Quadrature::Momentum => s.gp_y.abs(),
    };
    if !(gp > 0.0) {
        return Err(Error::Domain("zeta needs a nonzero displacement".into()));
    }
    let f: Vec<f64> = wf.psi_plus.iter().map(|v| v.abs()).collect();
    let n = f.len();
    let (imax, fmax) = f.iter().enumerate().fold(
        (0, 0.0),
        |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
    );
    if imax == 0 || imax == n - 1 {
        return Err(Error::DegeneratePeak);
    }
    let mut best = imax;
    for i in 1..n - 1 {
        if f[i] >= 0.99 * fmax
            && f[i] >= f[i - 1]
            && f[i] >= f[i + 1]
            && wf.grid[i].abs() > wf.grid[best].abs()
        {
            best = i;
        }
    }
    let (a, b, c) = (f[best - 1], f[best], f[best + 1]);
    let curv = a - 2.0 * b + c;
    let shift = if curv < 0.0 {
        0.5 * (a - c) / curv
    } else {
        0.0
    };
    let x_peak = wf.grid[best] + shift * wf.dx;
    Ok(x_peak.abs() / gp)
}

/// Fourth-order centred first and second derivatives; the two samples at
/// each end are left at zero.
fn derivatives(f: &[f64], dx: f64) -> (Vec<f64>, Vec<f64>) {
    let n = f.len();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 2..n.saturating_sub(2) {
        d1[i] = (-f[i + 2] + 8.0 * f[i + 1] - 8.0 * f[i - 1] + f[i - 2]) / (12.0 * dx);
        d2[i] = (-f[i + 2] + 16.0 * f[i + 1] - 30.0 * f[i] + 16.0 * f[i - 1] - f[i - 2])
            / (12.0 * dx * dx);
    }
    (d1, d2)
}

/// Term-by-term energy without the consistency check.
pub(crate) fn energy_parts(wf: &PositionWaveFunction, params: &ModelParams) -> Result<EnergyParts> {
    if wf.quadrature != Quadrature::Position {
        return Err(Error::Domain(
            "energy decomposition needs the position representation".into(),
        ));
    }
    let ModelParams {
        omega,
        splitting,
        chi,
        ..
    } = *params;
    let s = params.scales();
    let (pp, pm, dx) = (&wf.psi_plus, &wf.psi_minus, wf.dx);
    let (_, d2p) = derivatives(pp, dx);
    let (d1m, d2m) = derivatives(pm, dx);
    let integrate = |f: &dyn Fn(usize) -> f64| (0..wf.grid.len()).map(f).sum::<f64>() * dx;

    let overlap = integrate(&|i| pp[i] * pm[i]);
    let dpsi = integrate(&|i| pp[i] * d1m[i]);
    let p2_cross = integrate(&|i| -pp[i] * d2m[i]);
    let x2_cross = integrate(&|i| pp[i] * wf.grid[i] * wf.grid[i] * pm[i]);
    let p2_diag = integrate(&|i| -pp[i] * d2p[i] - pm[i] * d2m[i]);
    let x2_diag = integrate(&|i| wf.grid[i] * wf.grid[i] * (pp[i] * pp[i] + pm[i] * pm[i]));
    let x_sz = integrate(&|i| wf.grid[i] * (pp[i] * pp[i] - pm[i] * pm[i]));
    let norm = wf.norm();

    let sqrt2 = std::f64::consts::SQRT_2;
    let e_omega = splitting * overlap;
    let e_gy = 2.0 * sqrt2 * (-s.g_y) * dpsi;
    let e_p2 = chi * omega * p2_cross;
    let e_x2 = chi * omega * x2_cross;
    let e_stark_offset = -chi * omega * overlap;
    let e_kinetic = 0.5 * omega * p2_diag;
    let e_potential = 0.5 * omega * (x2_diag - norm) + sqrt2 * s.g_z * x_sz;
    let total = e_omega + e_gy + e_p2 + e_x2 + e_stark_offset + e_kinetic + e_potential;
    Ok(EnergyParts {
        e_omega,
        e_gy,
        e_p2,
        e_x2,
        e_stark_offset,
        e_kinetic,
        e_potential,
        total,
    })
}

/// Energy decomposition checked against the eigenvalue `expected`: the
/// total must agree within 1e−5·Ω.
pub fn energy_decomposition(
    wf: &PositionWaveFunction,
    params: &ModelParams,
    expected: f64,
) -> Result<EnergyParts> {
    let parts = energy_parts(wf, params)?;
    if (parts.total - expected).abs() > 1e-5 * params.splitting {
        return Err(Error::ReconstructionMismatch {
            reconstructed: parts.total,
            expected,
        });
    }
    Ok(parts)
}
