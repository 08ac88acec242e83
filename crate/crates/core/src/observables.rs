//! Ground-state expectation values and the per-point analysis record.

use serde::{Deserialize, Serialize};

use crate::eigensolve::{ground_solve, SolveOptions};
use crate::fock::{BasisTag, OperatorMatrix, Parity, Spin, Truncation};
use crate::wavefunction::{self, Component, EnergyParts, SpatialGrid};
use crate::{Error, ModelParams, Result};

/// Sector ground energies closer than this (in units of Ω) count as a doublet.
pub const DEGENERACY_TOL: f64 = 1e-9;
const PURITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateAnalysis {
    #[serde(rename = "E0")]
    pub e0: f64,
    pub gap: f64,
    /// ±1
    pub parity: i32,
    pub n_z: usize,
    pub mean_n: f64,
    pub mean_x2: f64,
    pub mean_p2: f64,
    pub mean_sx: f64,
    pub mean_aa: f64,
    /// Peak displacement ratio; `None` when g′ = 0 or the peak is not resolved.
    pub zeta: Option<f64>,
    pub energy_parts: EnergyParts,
    pub params: ModelParams,
    pub n_max_used: usize,
    /// The two parity sectors share the ground energy; the even state is reported.
    pub degenerate: bool,
}

/// x̂², p̂² and a†a† on the full space.
pub fn quadrature_operators(trunc: Truncation) -> (OperatorMatrix, OperatorMatrix, OperatorMatrix) {
    let levels = trunc.levels();
    let basis = BasisTag::Boson {
        n_max: trunc.n_max(),
    };
    let mut x2 = OperatorMatrix::zeros(levels, basis);
    let mut p2 = OperatorMatrix::zeros(levels, basis);
    let mut aa = OperatorMatrix::zeros(levels, basis);
    for n in 0..levels {
        let diag = n as f64 + 0.5;
        x2.set(n, n, diag);
        p2.set(n, n, diag);
        if n + 2 < levels {
            let r = ((n + 1) as f64 * (n + 2) as f64).sqrt();
            // ⟨n+2| a†a† |n⟩ and its transpose from aa
            aa.set(n + 2, n, r);
            x2.set(n + 2, n, 0.5 * r);
            x2.set(n, n + 2, 0.5 * r);
            p2.set(n + 2, n, -0.5 * r);
            p2.set(n, n + 2, -0.5 * r);
        }
    }
    (
        x2.tensor_spin_identity(),
        p2.tensor_spin_identity(),
        aa.tensor_spin_identity(),
    )
}

/// Rounds ⟨P⟩ to ±1, refusing states that are not parity eigenstates.
pub fn parity_value(state: &[f64], p: &OperatorMatrix) -> Result<Parity> {
    if state.len() != p.dim() {
        return Err(Error::Dimension(format!(
            "state has {} entries, operator is {}x{}",
            state.len(),
            p.dim(),
            p.dim()
        )));
    }
    classify_parity(p.sandwich(state, state))
}

fn classify_parity(expectation: f64) -> Result<Parity> {
    if expectation.abs() < 1.0 - PURITY_TOL {
        return Err(Error::ImpureParity(expectation));
    }
    Ok(Parity::from_sign(expectation))
}

/// Expectations that only need the state vector. For a real state
/// ⟨aa⟩ = ⟨a†a†⟩, so x̂² and p̂² follow from ⟨a†a†⟩ and ⟨n̂⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean_n: f64,
    pub mean_sx: f64,
    pub mean_aa: f64,
    pub mean_x2: f64,
    pub mean_p2: f64,
    pub parity: f64,
}

pub fn moments(trunc: Truncation, state: &[f64]) -> Moments {
    let mut mean_n = 0.0;
    let mut mean_sx = 0.0;
    let mut mean_aa = 0.0;
    let mut parity = 0.0;
    for spin in [Spin::Up, Spin::Down] {
        let c = |n: usize| state[trunc.index(spin, n)];
        for n in 0..trunc.levels() {
            let w = c(n) * c(n);
            mean_n += n as f64 * w;
            mean_sx += spin.sign() * w;
            parity += spin.sign() * if n % 2 == 0 { w } else { -w };
            if n + 2 < trunc.levels() {
                mean_aa += ((n + 1) as f64 * (n + 2) as f64).sqrt() * c(n + 2) * c(n);
            }
        }
    }
    Moments {
        mean_n,
        mean_sx,
        mean_aa,
        mean_x2: mean_aa + mean_n + 0.5,
        mean_p2: -mean_aa + mean_n + 0.5,
        parity,
    }
}

/// Full analysis of the ground state at one parameter point. `tol` is the
/// truncation convergence tolerance in units of Ω.
pub fn analyze(params: &ModelParams, tol: f64) -> Result<GroundStateAnalysis> {
    let params = crate::model::validate(*params)?;
    let spectrum = ground_solve(
        &params,
        &SolveOptions::default().with_tol(tol).with_states(2),
    )?;
    let trunc = Truncation::new(spectrum.n_max_used)?;
    let parities = spectrum
        .parities
        .clone()
        .unwrap_or_else(|| vec![Parity::Even; spectrum.energies.len()]);
    let e = &spectrum.energies;
    let gap = e[1] - e[0];
    let degenerate = gap.abs() < DEGENERACY_TOL * params.splitting && parities[0] != parities[1];
    let pick = if degenerate && parities[0] != Parity::Even {
        1
    } else {
        0
    };
    let state = &spectrum.states[pick];

    let m = moments(trunc, state);
    let parity = classify_parity(m.parity)?;
    let grid = SpatialGrid::for_state(&params, m.mean_n);
    let wf_x = wavefunction::position_representation(state, trunc, grid)?;
    let wf_topo = if params.lambda < 0.0 {
        wavefunction::momentum_representation(state, trunc, grid)?
    } else {
        wf_x.clone()
    };
    let n_z = wavefunction::count_nodes(&wf_topo, Component::Plus).n_z;
    let zeta = wavefunction::zeta_ratio(&wf_topo, &params).ok();
    let energy_parts = wavefunction::energy_parts(&wf_x, &params)?;

    Ok(GroundStateAnalysis {
        e0: e[pick],
        gap: gap.max(0.0),
        parity: parity.value(),
        n_z,
        mean_n: m.mean_n,
        mean_x2: m.mean_x2,
        mean_p2: m.mean_p2,
        mean_sx: m.mean_sx,
        mean_aa: m.mean_aa,
        zeta,
        energy_parts,
        params,
        n_max_used: spectrum.n_max_used,
        degenerate,
    })
}
