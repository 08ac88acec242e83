//! Symmetric eigensolvers and the truncation-converging ground-state solve.
//!
//! Two independent routes are provided. [`eigendecompose`] handles any dense
//! symmetric [`OperatorMatrix`] (Householder/QL through `nalgebra`).
//! [`SymTridiagonal`] handles the parity-sector chains with Sturm-sequence
//! bisection for eigenvalues and pivoted inverse iteration for eigenvectors,
//! which costs O(n) per requested pair and is what [`ground_solve`] uses.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::fock::{self, OperatorMatrix, Parity, Truncation};
use crate::{Error, ModelParams, Result};

/// Truncations tried by [`ground_solve`], in order.
pub const TRUNCATION_SCHEDULE: [usize; 8] = [32, 64, 128, 256, 512, 1024, 2048, 4096];

/// Real symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(
            !diag.is_empty() && off.len() + 1 == diag.len(),
            "tridiagonal needs n diagonal and n-1 off-diagonal entries"
        );
        SymTridiagonal { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * v[i + 1];
                }
                s
            })
            .collect()
    }

    pub fn norm_bound(&self) -> f64 {
        let (lo, hi) = gershgorin(&self.diag, &self.off);
        lo.abs().max(hi.abs())
    }

    /// The `k` lowest eigenpairs, ascending. Vectors are orthonormal.
    pub fn lowest_eigenpairs(&self, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.len();
        let k = k.min(n);
        let blocks = self.unreduced_blocks();

        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (b, &(start, end)) in blocks.iter().enumerate() {
            let d = &self.diag[start..end];
            let e = &self.off[start..end - 1];
            for j in 0..k.min(end - start) {
                candidates.push((bisect_eigenvalue(d, e, j), b, j));
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        candidates.truncate(k);

        let mut values = Vec::with_capacity(k);
        let mut vectors = Vec::with_capacity(k);
        // Vectors already found per block, for reorthogonalization.
        let mut found: Vec<Vec<(f64, Vec<f64>)>> = vec![Vec::new(); blocks.len()];
        for &(value, b, _) in &candidates {
            let (start, end) = blocks[b];
            let d = &self.diag[start..end];
            let e = &self.off[start..end - 1];
            let local = inverse_iteration(d, e, value, &found[b]);
            let mut full = vec![0.0; n];
            full[start..end].copy_from_slice(&local);
            found[b].push((value, local));
            values.push(value);
            vectors.push(full);
        }
        (values, vectors)
    }

    fn unreduced_blocks(&self) -> Vec<(usize, usize)> {
        let mut blocks = Vec::new();
        let mut start = 0;
        for i in 0..self.off.len() {
            let scale = self.diag[i].abs() + self.diag[i + 1].abs();
            if self.off[i].abs() <= f64::EPSILON * scale || self.off[i] == 0.0 {
                blocks.push((start, i + 1));
                start = i + 1;
            }
        }
        blocks.push((start, self.len()));
        blocks
    }
}

fn gershgorin(d: &[f64], e: &[f64]) -> (f64, f64) {
    let n = d.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut r = 0.0;
        if i > 0 {
            r += e[i - 1].abs();
        }
        if i + 1 < n {
            r += e[i].abs();
        }
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    (lo, hi)
}

/// Number of eigenvalues strictly below `x` (Sturm sequence via LDLᵀ).
fn sturm_count(d: &[f64], e: &[f64], x: f64, pivmin: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    if q.abs() < pivmin {
        q = -pivmin;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        q = d[i] - x - e[i - 1] * e[i - 1] / q;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `j`-th smallest eigenvalue (0-based) by bisection to full precision.
fn bisect_eigenvalue(d: &[f64], e: &[f64], j: usize) -> f64 {
    if d.len() == 1 {
        return d[0];
    }
    let (mut lo, mut hi) = gershgorin(d, e);
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let max_e2 = e.iter().fold(0.0f64, |m, v| m.max(v * v));
    let pivmin = f64::MIN_POSITIVE * max_e2.max(1.0);
    lo -= 2.0 * f64::EPSILON * scale;
    hi += 2.0 * f64::EPSILON * scale;
    for _ in 0..256 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * scale * 1e-2 {
            break;
        }
        if sturm_count(d, e, mid, pivmin) > j {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves (T − σ) x = b with a pivoted tridiagonal LU.
fn shifted_solve(d: &[f64], e: &[f64], shift: f64, b: &mut [f64]) {
    let n = d.len();
    if n == 1 {
        let p = d[0] - shift;
        b[0] /= if p == 0.0 { f64::EPSILON } else { p };
        return;
    }
    // Rows of U carry up to two superdiagonals after pivoting.
    let mut u0: Vec<f64> = d.iter().map(|x| x - shift).collect();
    let mut u1: Vec<f64> = e.to_vec();
    u1.push(0.0);
    let mut u2 = vec![0.0; n];
    let mut sub: Vec<f64> = e.to_vec();
    let mut swapped = vec![false; n];
    let mut mult = vec![0.0; n];
    let tiny = f64::EPSILON
        * d.iter()
            .chain(e)
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-300);

    for i in 0..n - 1 {
        if u0[i].abs() >= sub[i].abs() {
            let piv = if u0[i] == 0.0 { tiny } else { u0[i] };
            u0[i] = piv;
            let m = sub[i] / piv;
            mult[i] = m;
            u0[i + 1] -= m * u1[i];
            // u2[i] stays 0
        } else {
            // swap rows i and i+1
            swapped[i] = true;
            let m = u0[i] / sub[i];
            mult[i] = m;
            let (a0, a1) = (u0[i], u1[i]);
            u0[i] = sub[i];
            u1[i] = u0[i + 1];
            u2[i] = if i + 1 < n - 1 { u1[i + 1] } else { 0.0 };
            u0[i + 1] = a1 - m * u1[i];
            if i + 1 < n - 1 {
                u1[i + 1] = -m * u2[i];
            }
            let _ = a0;
        }
        sub[i] = 0.0;
    }
    if u0[n - 1] == 0.0 {
        u0[n - 1] = tiny;
    }

    // forward: apply row swaps and multipliers
    for i in 0..n - 1 {
        if swapped[i] {
            b.swap(i, i + 1);
        }
        b[i + 1] -= mult[i] * b[i];
    }
    // back substitution
    b[n - 1] /= u0[n - 1];
    if n >= 2 {
        b[n - 2] = (b[n - 2] - u1[n - 2] * b[n - 1]) / u0[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - u1[i] * b[i + 1] - u2[i] * b[i + 2]) / u0[i];
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn inverse_iteration(d: &[f64], e: &[f64], value: f64, previous: &[(f64, Vec<f64>)]) -> Vec<f64> {
    let n = d.len();
    if n == 1 {
        return vec![1.0];
    }
    let tnorm = gershgorin(d, e)
        .0
        .abs()
        .max(gershgorin(d, e).1.abs())
        .max(f64::MIN_POSITIVE);
    let close: Vec<&Vec<f64>> = previous
        .iter()
        .filter(|(v, _)| (v - value).abs() <= 1e-3 * tnorm)
        .map(|(_, vec)| vec)
        .collect();
    let shift = value + 4.0 * f64::EPSILON * tnorm;
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.37 * ((i as f64) * 1.618_033_988_75).sin())
        .collect();
    normalize(&mut x);
    let mut best = x.clone();
    let mut best_res = f64::INFINITY;
    for _ in 0..6 {
        for q in &close {
            let dot: f64 = x.iter().zip(q.iter()).map(|(a, b)| a * b).sum();
            x.iter_mut().zip(q.iter()).for_each(|(a, b)| *a -= dot * b);
        }
        shifted_solve(d, e, shift, &mut x);
        for q in &close {
            let dot: f64 = x.iter().zip(q.iter()).map(|(a, b)| a * b).sum();
            x.iter_mut().zip(q.iter()).for_each(|(a, b)| *a -= dot * b);
        }
        normalize(&mut x);
        let res = tridiag_residual(d, e, value, &x);
        if res < best_res {
            best_res = res;
            best.copy_from_slice(&x);
        }
        if res <= 64.0 * f64::EPSILON * tnorm {
            break;
        }
    }
    // Deterministic sign: largest component positive.
    let (imax, _) = best.iter().enumerate().fold((0, 0.0f64), |acc, (i, v)| {
        if v.abs() > acc.1 {
            (i, v.abs())
        } else {
            acc
        }
    });
    if best[imax] < 0.0 {
        best.iter_mut().for_each(|v| *v = -*v);
    }
    best
}

fn tridiag_residual(d: &[f64], e: &[f64], value: f64, v: &[f64]) -> f64 {
    let n = d.len();
    let mut sq = 0.0;
    for i in 0..n {
        let mut s = (d[i] - value) * v[i];
        if i > 0 {
            s += e[i - 1] * v[i - 1];
        }
        if i + 1 < n {
            s += e[i] * v[i + 1];
        }
        sq += s * s;
    }
    sq.sqrt()
}

/// Eigenvalues and eigenvectors with convergence metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub energies: Vec<f64>,
    /// Columns of the eigenvector matrix, in the spin-major full basis.
    pub states: Vec<Vec<f64>>,
    /// Parity of each state when it came from a sector solve.
    pub parities: Option<Vec<Parity>>,
    pub n_max_used: usize,
    pub converged: bool,
    pub residual: f64,
}

fn residual_bound(e0: f64) -> f64 {
    1e-9 * e0.abs().max(1.0)
}

/// The `k` lowest eigenpairs of a dense symmetric matrix.
pub fn eigendecompose(m: &OperatorMatrix, k: usize) -> Result<SpectralResult> {
    let n = m.dim();
    let k = k.min(n);
    let dense = DMatrix::from_row_slice(n, n, m.entries());
    let eig = SymmetricEigen::new(dense);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order.truncate(k);

    let energies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let states: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    let residual = states
        .iter()
        .zip(&energies)
        .map(|(v, e)| {
            let mv = m.apply(v);
            mv.iter()
                .zip(v)
                .map(|(a, b)| (a - e * b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    let bound = residual_bound(energies.first().copied().unwrap_or(0.0)) * m.max_abs().max(1.0);
    if residual > bound {
        return Err(Error::ConvergenceFailure { residual, bound });
    }
    let n_max = match m.basis() {
        fock::BasisTag::SpinMajor { n_max }
        | fock::BasisTag::Boson { n_max }
        | fock::BasisTag::Sector { n_max, .. } => n_max,
    };
    Ok(SpectralResult {
        energies,
        states,
        parities: None,
        n_max_used: n_max,
        converged: true,
        residual,
    })
}

/// All eigenvalues of a dense symmetric matrix, ascending.
pub fn dense_eigenvalues(m: &OperatorMatrix) -> Vec<f64> {
    let n = m.dim();
    let mut v: Vec<f64> = SymmetricEigen::new(DMatrix::from_row_slice(n, n, m.entries()))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Lowest eigenpairs of one parity sector, vectors in chain coordinates.
#[derive(Debug, Clone)]
pub struct SectorSpectrum {
    pub parity: Parity,
    pub energies: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residual: f64,
}

pub fn solve_sector(
    params: &ModelParams,
    trunc: Truncation,
    parity: Parity,
    k: usize,
) -> SectorSpectrum {
    let chain = fock::sector_chain(params, trunc, parity);
    let (energies, vectors) = chain.lowest_eigenpairs(k);
    let residual = energies
        .iter()
        .zip(&vectors)
        .map(|(e, v)| tridiag_residual(chain.diag(), chain.off(), *e, v))
        .fold(0.0, f64::max);
    SectorSpectrum {
        parity,
        energies,
        vectors,
        residual,
    }
}

/// Embeds a chain-coordinate vector into the spin-major full basis.
pub fn embed_sector_vector(trunc: Truncation, parity: Parity, chain: &[f64]) -> Vec<f64> {
    let mut full = vec![0.0; trunc.dim()];
    for (n, c) in chain.iter().enumerate() {
        full[fock::sector_index(trunc, parity, n)] = *c;
    }
    full
}

/// Both sectors at a fixed truncation, merged into ascending order. On
/// exact ties the even state comes first.
pub fn solve_truncated(params: &ModelParams, trunc: Truncation, k: usize) -> SpectralResult {
    let even = solve_sector(params, trunc, Parity::Even, k);
    let odd = solve_sector(params, trunc, Parity::Odd, k);
    let mut all: Vec<(f64, Parity, &Vec<f64>)> = even
        .energies
        .iter()
        .zip(&even.vectors)
        .map(|(e, v)| (*e, Parity::Even, v))
        .chain(
            odd.energies
                .iter()
                .zip(&odd.vectors)
                .map(|(e, v)| (*e, Parity::Odd, v)),
        )
        .collect();
    all.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then((a.1 == Parity::Odd).cmp(&(b.1 == Parity::Odd)))
    });
    all.truncate(k);
    SpectralResult {
        energies: all.iter().map(|a| a.0).collect(),
        states: all
            .iter()
            .map(|a| embed_sector_vector(trunc, a.1, a.2))
            .collect(),
        parities: Some(all.iter().map(|a| a.1).collect()),
        n_max_used: trunc.n_max(),
        converged: false,
        residual: even.residual.max(odd.residual),
    }
}

/// Mean boson number of a full-basis state.
pub fn mean_boson_number(trunc: Truncation, state: &[f64]) -> f64 {
    state
        .iter()
        .enumerate()
        .map(|(i, c)| trunc.label(i).1 as f64 * c * c)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Energy tolerance between successive truncations, in units of Ω.
    pub tol: f64,
    /// Number of lowest states to return.
    pub states: usize,
    /// Largest admissible n_max.
    pub cap: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            states: 2,
            cap: 4096,
        }
    }
}

impl SolveOptions {
    pub fn with_states(mut self, k: usize) -> Self {
        self.states = k;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Doubles n_max along [`TRUNCATION_SCHEDULE`] until the ground energy moves
/// by less than `tol` and the ground state's photon number sits well inside
/// the truncation: ⟨n⟩ + 6√(⟨n⟩+1) < n_max.
pub fn ground_solve(params: &ModelParams, opts: &SolveOptions) -> Result<SpectralResult> {
    let params = crate::model::validate(*params)?;
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let tol = opts.tol * params.splitting;
    let k = opts.states.max(1);
    let mut previous: Option<f64> = None;
    for &n_max in TRUNCATION_SCHEDULE.iter().filter(|&&n| n <= opts.cap) {
        let trunc = Truncation::new(n_max)?;
        let mut result = solve_truncated(&params, trunc, k);
        let e0 = result.energies[0];
        let mean_n = mean_boson_number(trunc, &result.states[0]);
        let energy_ok = previous.is_some_and(|p| (e0 - p).abs() < tol);
        let room_ok = mean_n + 6.0 * (mean_n + 1.0).sqrt() < n_max as f64;
        if energy_ok && room_ok {
            let bound = residual_bound(e0);
            if result.residual > bound {
                return Err(Error::ConvergenceFailure {
                    residual: result.residual,
                    bound,
                });
            }
            result.converged = true;
            return Ok(result);
        }
        previous = Some(e0);
    }
    Err(Error::TruncationCeiling { cap: opts.cap })
}

/// Δ = E₁ − E₀.
pub fn excitation_gap(result: &SpectralResult) -> f64 {
    assert!(result.energies.len() >= 2, "gap needs at least two states");
    (result.energies[1] - result.energies[0]).max(0.0)
}
