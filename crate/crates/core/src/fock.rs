//! Operators on the truncated Fock ⊗ spin space.
//!
//! The spin factor is expressed in the σx eigenbasis {⇑, ⇓}, ordered
//! spin-major: full index = `spin * (n_max + 1) + n` with ⇑ first. In this
//! basis the Ω and Stark terms are diagonal and every coupling is real:
//!
//! * rotating:         ⟨n+1, ⇓| H |n, ⇑⟩ = g √(n+1)
//! * counter-rotating: ⟨n+1, ⇑| H |n, ⇓⟩ = λ g √(n+1)
//!
//! Each coupling flips both the spin and the boson-number parity, so the
//! parity P = σx (−1)^n is conserved exactly at every truncation. Within a
//! parity sector the states |0, s⟩, |1, −s⟩, |2, s⟩, … form a chain and the
//! sector Hamiltonian is tridiagonal; [`sector_chain`] builds it directly.

use serde::{Deserialize, Serialize};

use crate::eigensolve::SymTridiagonal;
use crate::{Error, ModelParams, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Truncation {
    n_max: usize,
}

impl Truncation {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidTruncation(n_max));
        }
        Ok(Truncation { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Number of retained boson levels, n_max + 1.
    pub fn levels(&self) -> usize {
        self.n_max + 1
    }

    /// Dimension of the full spin ⊗ boson space.
    pub fn dim(&self) -> usize {
        2 * self.levels()
    }

    pub fn index(&self, spin: Spin, n: usize) -> usize {
        debug_assert!(n <= self.n_max);
        match spin {
            Spin::Up => n,
            Spin::Down => self.levels() + n,
        }
    }

    /// Inverse of [`Truncation::index`].
    pub fn label(&self, index: usize) -> (Spin, usize) {
        if index < self.levels() {
            (Spin::Up, index)
        } else {
            (Spin::Down, index - self.levels())
        }
    }
}

/// σx eigenstates: `Up` is ⇑ (σx = +1), `Down` is ⇓ (σx = −1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn sign(self) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }

    pub fn flip(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn value(self) -> i32 {
        match self {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }

    pub fn from_sign(sign: f64) -> Parity {
        if sign >= 0.0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// The spin carried by boson level `n` inside this sector.
    pub fn spin_at(self, n: usize) -> Spin {
        let boson_even = n % 2 == 0;
        match (self, boson_even) {
            (Parity::Even, true) | (Parity::Odd, false) => Spin::Up,
            _ => Spin::Down,
        }
    }
}

/// How the rows of an [`OperatorMatrix`] are labelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisTag {
    /// σx eigenvalue major (⇑ then ⇓), Fock index minor.
    SpinMajor { n_max: usize },
    /// Boson space alone.
    Boson { n_max: usize },
    /// One parity sector, ordered by Fock index.
    Sector { parity: Parity, n_max: usize },
}

/// Dense real square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    entries: Vec<f64>,
    basis: BasisTag,
}

impl OperatorMatrix {
    pub fn zeros(dim: usize, basis: BasisTag) -> Self {
        OperatorMatrix {
            dim,
            entries: vec![0.0; dim * dim],
            basis,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> BasisTag {
        self.basis
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.entries[row * self.dim + col] = value;
    }

    fn add(&mut self, row: usize, col: usize, value: f64) {
        self.entries[row * self.dim + col] += value;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim, self.basis);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        if self.dim != other.dim {
            return Err(Error::Dimension(format!("{} vs {}", self.dim, other.dim)));
        }
        let n = self.dim;
        let mut out = Self::zeros(n, self.basis);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let row = &other.entries[k * n..(k + 1) * n];
                let dst = &mut out.entries[i * n..(i + 1) * n];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim);
        self.entries
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// ⟨u|M|v⟩.
    pub fn sandwich(&self, u: &[f64], v: &[f64]) -> f64 {
        self.apply(v).iter().zip(u).map(|(a, b)| a * b).sum()
    }

    /// M ⊗ 1 on the spin-major full space, for a boson-space operator.
    pub fn tensor_spin_identity(&self) -> OperatorMatrix {
        let levels = self.dim;
        let n_max = levels - 1;
        let mut out = Self::zeros(2 * levels, BasisTag::SpinMajor { n_max });
        for block in 0..2 {
            let off = block * levels;
            for i in 0..levels {
                for j in 0..levels {
                    out.set(off + i, off + j, self.get(i, j));
                }
            }
        }
        out
    }
}

/// Boson annihilation operator: a[n−1, n] = √n.
pub fn annihilation(trunc: Truncation) -> OperatorMatrix {
    let mut a = OperatorMatrix::zeros(
        trunc.levels(),
        BasisTag::Boson {
            n_max: trunc.n_max(),
        },
    );
    for n in 1..=trunc.n_max() {
        a.set(n - 1, n, (n as f64).sqrt());
    }
    a
}

/// Diagonal energy of |n, s⟩: nω + s(Ω/2 + χωn).
pub fn diagonal_energy(params: &ModelParams, spin: Spin, n: usize) -> f64 {
    let n = n as f64;
    n * params.omega + spin.sign() * (0.5 * params.splitting + params.chi * params.omega * n)
}

/// Coupling between |n, s⟩ and |n+1, −s⟩: g√(n+1) when s = ⇑ (rotating),
/// λg√(n+1) when s = ⇓ (counter-rotating).
pub fn ladder_coupling(params: &ModelParams, spin: Spin, n: usize) -> f64 {
    let amp = params.g * ((n + 1) as f64).sqrt();
    match spin {
        Spin::Up => amp,
        Spin::Down => params.lambda * amp,
    }
}

/// The full Hamiltonian, dimension 2(n_max + 1).
pub fn hamiltonian(params: &ModelParams, trunc: Truncation) -> OperatorMatrix {
    let mut h = OperatorMatrix::zeros(
        trunc.dim(),
        BasisTag::SpinMajor {
            n_max: trunc.n_max(),
        },
    );
    for spin in [Spin::Up, Spin::Down] {
        for n in 0..=trunc.n_max() {
            let i = trunc.index(spin, n);
            h.add(i, i, diagonal_energy(params, spin, n));
            if n < trunc.n_max() {
                let j = trunc.index(spin.flip(), n + 1);
                let c = ladder_coupling(params, spin, n);
                h.add(i, j, c);
                h.add(j, i, c);
            }
        }
    }
    h
}

/// P = σx (−1)^n, diagonal in the spin-major basis.
pub fn parity(trunc: Truncation) -> OperatorMatrix {
    let mut p = OperatorMatrix::zeros(
        trunc.dim(),
        BasisTag::SpinMajor {
            n_max: trunc.n_max(),
        },
    );
    for i in 0..trunc.dim() {
        let (spin, n) = trunc.label(i);
        let boson = if n % 2 == 0 { 1.0 } else { -1.0 };
        p.set(i, i, spin.sign() * boson);
    }
    p
}

/// Sector blocks and the embedding of each block row into the full basis.
#[derive(Debug, Clone)]
pub struct SectorSplit {
    pub even: OperatorMatrix,
    pub odd: OperatorMatrix,
    pub even_map: Vec<usize>,
    pub odd_map: Vec<usize>,
}

impl SectorSplit {
    pub fn block(&self, parity: Parity) -> (&OperatorMatrix, &[usize]) {
        match parity {
            Parity::Even => (&self.even, &self.even_map),
            Parity::Odd => (&self.odd, &self.odd_map),
        }
    }
}

/// Splits `h` into its parity blocks, checking that it commutes with `p`.
/// Block rows are ordered by Fock index.
pub fn sector_split(h: &OperatorMatrix, p: &OperatorMatrix) -> Result<SectorSplit> {
    if h.dim() != p.dim() {
        return Err(Error::Dimension(format!(
            "H is {} but P is {}",
            h.dim(),
            p.dim()
        )));
    }
    let n = h.dim();
    let scale = h.max_abs().max(f64::MIN_POSITIVE);
    let mut violation: f64 = 0.0;
    // P is diagonal in this basis, so [H, P]_ij = H_ij (P_jj − P_ii).
    for i in 0..n {
        for j in 0..n {
            let hp: f64 = (0..n).map(|k| h.get(i, k) * p.get(k, j)).sum();
            let ph: f64 = (0..n).map(|k| p.get(i, k) * h.get(k, j)).sum();
            violation = violation.max((hp - ph).abs());
        }
    }
    if violation > 1e-12 * scale {
        return Err(Error::CommutatorViolation { violation });
    }

    let levels = n / 2;
    let n_max = levels - 1;
    let label = |i: usize| if i < levels { i } else { i - levels };
    let mut even_map: Vec<usize> = (0..n).filter(|&i| p.get(i, i) > 0.0).collect();
    let mut odd_map: Vec<usize> = (0..n).filter(|&i| p.get(i, i) < 0.0).collect();
    even_map.sort_by_key(|&i| label(i));
    odd_map.sort_by_key(|&i| label(i));

    let extract = |map: &[usize], parity: Parity| {
        let mut b = OperatorMatrix::zeros(map.len(), BasisTag::Sector { parity, n_max });
        for (r, &i) in map.iter().enumerate() {
            for (c, &j) in map.iter().enumerate() {
                b.set(r, c, h.get(i, j));
            }
        }
        b
    };
    Ok(SectorSplit {
        even: extract(&even_map, Parity::Even),
        odd: extract(&odd_map, Parity::Odd),
        even_map,
        odd_map,
    })
}

/// Full-basis index of chain site `n` in the given sector.
pub fn sector_index(trunc: Truncation, parity: Parity, n: usize) -> usize {
    trunc.index(parity.spin_at(n), n)
}

/// The sector Hamiltonian as a symmetric tridiagonal matrix over chain
/// sites n = 0..=n_max.
pub fn sector_chain(params: &ModelParams, trunc: Truncation, parity: Parity) -> SymTridiagonal {
    let diag = (0..=trunc.n_max())
        .map(|n| diagonal_energy(params, parity.spin_at(n), n))
        .collect();
    let off = (0..trunc.n_max())
        .map(|n| ladder_coupling(params, parity.spin_at(n), n))
        .collect();
    SymTridiagonal::new(diag, off)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::{dense_eigenvalues, eigendecompose};

    fn params(w: f64, g: f64, lam: f64, chi: f64) -> ModelParams {
        ModelParams::new(w, 1.0, g, lam, chi).unwrap()
    }

    #[test]
    fn rejects_empty_truncation() {
        assert_eq!(Truncation::new(0), Err(Error::InvalidTruncation(0)));
    }

    #[test]
    fn annihilation_entries() {
        let a = annihilation(Truncation::new(2).unwrap());
        assert_eq!(a.get(0, 1), 1.0);
        assert!((a.get(1, 2) - 2f64.sqrt()).abs() < 1e-15);
        let nonzero = a.entries().iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 2);

        let a1 = annihilation(Truncation::new(1).unwrap());
        assert_eq!(a1.entries(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn number_operator_from_ladder() {
        let a = annihilation(Truncation::new(7).unwrap());
        let n = a.transpose().matmul(&a).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let expect = if i == j { i as f64 } else { 0.0 };
                assert!((n.get(i, j) - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn decoupled_spectrum() {
        let trunc = Truncation::new(6).unwrap();
        for chi in [0.0, 0.3, -0.7] {
            let p = params(0.5, 0.0, 0.4, chi);
            let mut expect: Vec<f64> = (0..=6)
                .flat_map(|n| {
                    let n = n as f64;
                    let s = 0.5 + chi * 0.5 * n;
                    [n * 0.5 + s, n * 0.5 - s]
                })
                .collect();
            expect.sort_by(f64::total_cmp);
            let got = dense_eigenvalues(&hamiltonian(&p, trunc));
            for (a, b) in got.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    /// Closed-form 2×2 diagonalization of each rotating-wave block, written
    /// out independently of the analytic module.
    #[test]
    fn jc_blocks_match_two_level_formula() {
        let (w, g, chi) = (0.37, 0.81, 0.23);
        let p = params(w, g, 0.0, chi);
        let trunc = Truncation::new(2).unwrap();
        let evals = dense_eigenvalues(&hamiltonian(&p, trunc));
        for n in 0..2usize {
            let nf = n as f64;
            let a = nf * w + 0.5 + chi * w * nf;
            let b = (nf + 1.0) * w - 0.5 - chi * w * (nf + 1.0);
            let c = g * (nf + 1.0).sqrt();
            let mean = 0.5 * (a + b);
            let r = (0.25 * (a - b).powi(2) + c * c).sqrt();
            for e in [mean - r, mean + r] {
                assert!(
                    evals.iter().any(|x| (x - e).abs() < 1e-12),
                    "block {n}: {e} missing from {evals:?}"
                );
            }
        }
    }

    #[test]
    fn hamiltonian_is_symmetric() {
        let h = hamiltonian(&params(0.3, 1.1, -1.7, 0.6), Truncation::new(20).unwrap());
        assert!(h.asymmetry() <= 1e-13 * h.max_abs());
    }

    #[test]
    fn parity_entries() {
        let trunc = Truncation::new(3).unwrap();
        let p = parity(trunc);
        assert_eq!(
            p.get(trunc.index(Spin::Down, 0), trunc.index(Spin::Down, 0)),
            -1.0
        );
        assert_eq!(
            p.get(trunc.index(Spin::Down, 1), trunc.index(Spin::Down, 1)),
            1.0
        );
        let p2 = p.matmul(&p).unwrap();
        for i in 0..trunc.dim() {
            for j in 0..trunc.dim() {
                assert_eq!(p2.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn parity_trace_vanishes() {
        for n_max in 1..12 {
            let trunc = Truncation::new(n_max).unwrap();
            let p = parity(trunc);
            let trace: f64 = (0..trunc.dim()).map(|i| p.get(i, i)).sum();
            let oracle: f64 = [1.0, -1.0]
                .iter()
                .flat_map(|s| (0..=n_max).map(move |n| s * if n % 2 == 0 { 1.0 } else { -1.0 }))
                .sum();
            assert_eq!(trace, oracle);
            assert_eq!(trace, 0.0);
        }
    }

    #[test]
    fn decoupled_sector_content() {
        let trunc = Truncation::new(5).unwrap();
        let split = sector_split(
            &hamiltonian(&params(0.5, 0.0, 0.5, 0.1), trunc),
            &parity(trunc),
        )
        .unwrap();
        for &i in &split.even_map {
            let (spin, n) = trunc.label(i);
            assert_eq!(spin == Spin::Up, n % 2 == 0);
        }
        assert_eq!(split.even.dim() + split.odd.dim(), trunc.dim());
    }

    #[test]
    fn sector_spectra_merge_to_full_spectrum() {
        let trunc = Truncation::new(24).unwrap();
        let p = params(0.5, 1.3, 0.6, -0.4);
        let h = hamiltonian(&p, trunc);
        let split = sector_split(&h, &parity(trunc)).unwrap();
        let mut merged = dense_eigenvalues(&split.even);
        merged.extend(dense_eigenvalues(&split.odd));
        merged.sort_by(f64::total_cmp);
        let full = eigendecompose(&h, trunc.dim()).unwrap().energies;
        let dev = merged
            .iter()
            .zip(&full)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(dev <= 1e-10, "{dev}");
    }

    #[test]
    fn sector_blocks_equal_chains() {
        let trunc = Truncation::new(9).unwrap();
        let p = params(0.4, 0.9, 1.7, 0.35);
        let split = sector_split(&hamiltonian(&p, trunc), &parity(trunc)).unwrap();
        for parity in [Parity::Even, Parity::Odd] {
            let (block, map) = split.block(parity);
            let chain = sector_chain(&p, trunc, parity);
            for (r, &i) in map.iter().enumerate() {
                assert_eq!(i, sector_index(trunc, parity, r));
                assert_eq!(block.get(r, r), chain.diag()[r]);
                if r + 1 < map.len() {
                    assert_eq!(block.get(r, r + 1), chain.off()[r]);
                }
                for c in (r + 2)..map.len() {
                    assert_eq!(block.get(r, c), 0.0);
                }
            }
        }
    }

    #[test]
    fn detects_broken_commutation() {
        let trunc = Truncation::new(3).unwrap();
        let mut h = hamiltonian(&params(0.5, 1.0, 0.5, 0.0), trunc);
        let (i, j) = (trunc.index(Spin::Up, 0), trunc.index(Spin::Down, 0));
        h.set(i, j, 0.3);
        h.set(j, i, 0.3);
        assert!(matches!(
            sector_split(&h, &parity(trunc)),
            Err(Error::CommutatorViolation { .. })
        ));
    }
}
