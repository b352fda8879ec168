//! Ground states: restarted Lanczos, a dense oracle, and the closed-form
//! Bogoliubov diagonalization on homogeneous tori.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::hamiltonian::{ExcitationHamiltonian, KernelSet};
use crate::hartree::sorted_eigen;
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// Largest dimension accepted by [`dense_ground_state`].
pub const DENSE_LIMIT: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    pub energy: f64,
    /// Unit vector, vacuum amplitude nonnegative.
    pub vector: Vec<f64>,
    /// `|| H x - E x ||`.
    pub residual: f64,
    pub iterations: usize,
    pub seed: Option<u64>,
    /// Distance to the next Ritz value, when one was resolved.
    pub ritz_gap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    pub tol: f64,
    pub seed: u64,
    /// Budget of matrix-vector products.
    pub max_iter: usize,
    /// Krylov dimension between restarts.
    pub krylov: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { tol: 1e-10, seed: 0, max_iter: 5000, krylov: 120 }
    }
}

fn check_hermitian(matrix: &CsrMatrix) -> Result<()> {
    let deviation = matrix.max_asymmetry();
    if deviation > 1e-12 * matrix.max_abs().max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn fix_sign(x: &mut [f64]) {
    let pivot = if x[0].abs() > 1e-300 {
        x[0]
    } else {
        x.iter().copied().fold(0.0, |best: f64, v| if v.abs() > best.abs() { v } else { best })
    };
    if pivot < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
}

fn residual_norm(matrix: &CsrMatrix, x: &[f64], energy: f64) -> f64 {
    let y = matrix.apply(x);
    sqrt(y.iter().zip(x).map(|(a, b)| (a - energy * b) * (a - energy * b)).sum())
}

pub fn lanczos_ground_state(h: &ExcitationHamiltonian, options: &LanczosOptions) -> Result<GroundState> {
    lanczos(&h.matrix, options)
}

/// Lowest eigenpair of a symmetric sparse matrix by Lanczos with full
/// reorthogonalization, restarted from the current Ritz vector.
pub fn lanczos(matrix: &CsrMatrix, options: &LanczosOptions) -> Result<GroundState> {
    if !(options.tol > 0.0) || options.krylov < 2 {
        return Err(Error::InvalidParameter("Lanczos needs tol > 0 and a Krylov dimension of at least 2".into()));
    }
    check_hermitian(matrix)?;
    let dim = matrix.nrows();
    if dim == 0 {
        return Err(Error::InvalidParameter("empty operator".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut start: Vec<f64> = (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            1e-3 * z
        })
        .collect();
    start[0] += 1.0;
    let norm = sqrt(dot(&start, &start));
    start.iter_mut().for_each(|v| *v /= norm);

    let scale = matrix.max_abs().max(1e-300);
    let mut history = Vec::new();
    let mut matvecs = 0;
    let mut w = vec![0.0; dim];
    loop {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let steps = options.krylov.min(dim);
        for j in 0..steps {
            matrix.matvec(&basis[j], &mut w);
            matvecs += 1;
            let a = dot(&basis[j], &w);
            alpha.push(a);
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = sqrt(dot(&w, &w));
            if j + 1 == steps || b < 1e-13 * scale {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let (theta, y) = sorted_eigen(t);
        let mut x = vec![0.0; dim];
        for (i, v) in basis.iter().enumerate().take(k) {
            let c = y[(i, 0)];
            x.iter_mut().zip(v).for_each(|(a, b)| *a += c * b);
        }
        let nx = sqrt(dot(&x, &x));
        x.iter_mut().for_each(|v| *v /= nx);
        let energy = theta[0];
        let residual = residual_norm(matrix, &x, energy);
        matvecs += 1;
        history.push(energy);
        if residual <= options.tol {
            fix_sign(&mut x);
            return Ok(GroundState {
                energy,
                vector: x,
                residual,
                iterations: matvecs,
                seed: Some(options.seed),
                ritz_gap: theta.get(1).map(|t1| t1 - energy),
            });
        }
        if matvecs >= options.max_iter {
            return Err(Error::LanczosNotConverged { iterations: matvecs, residual, ritz_history: history });
        }
        start = x;
    }
}

/// Full symmetric diagonalization; dimensions up to [`DENSE_LIMIT`].
pub fn dense_ground_state(h: &ExcitationHamiltonian) -> Result<GroundState> {
    dense(&h.matrix)
}

pub fn dense(matrix: &CsrMatrix) -> Result<GroundState> {
    let dim = matrix.nrows();
    if dim > DENSE_LIMIT {
        return Err(Error::DimensionGuard { dimension: dim, limit: DENSE_LIMIT });
    }
    check_hermitian(matrix)?;
    let (values, vectors) = sorted_eigen(matrix.to_dense());
    let mut x: Vec<f64> = vectors.column(0).iter().copied().collect();
    fix_sign(&mut x);
    let residual = residual_norm(matrix, &x, values[0]);
    Ok(GroundState {
        energy: values[0],
        vector: x,
        residual,
        iterations: 1,
        seed: None,
        ritz_gap: values.get(1).map(|v| v - values[0]),
    })
}

/// Closed-form ground state of the quadratic Hamiltonian on a homogeneous torus.
#[derive(Debug, Clone, PartialEq)]
pub struct BogoliubovOracle {
    pub pairs: Vec<PairMode>,
    pub energy: f64,
    /// `P(l)` for `l = 0..=truncation`.
    pub distribution: Vec<f64>,
    /// `1 - sum P(l)` lost to the truncation.
    pub mass_deficit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMode {
    /// Positive momentum of the pair `(p, -p)`; 0 marks an unpaired mode.
    pub momentum: i64,
    pub diagonal: f64,
    pub coupling: f64,
    pub energy: f64,
    /// Squeezing ratio; `P_pair(2n) = (1 - alpha^2) alpha^(2n)`.
    pub alpha: f64,
}

impl PairMode {
    /// Ground state of `A1 n1 + A2 n2 + g (a1^* a2^* + a1 a2)`:
    /// energy `omega - A` and ratio `g / (A + omega)`, `A` the mean diagonal.
    pub fn solve(momentum: i64, a1: f64, a2: f64, coupling: f64) -> Result<Self> {
        let diagonal = 0.5 * (a1 + a2);
        if coupling.abs() >= diagonal {
            return Err(Error::IllPosedPair { momentum, diagonal, coupling });
        }
        let omega = sqrt(diagonal * diagonal - coupling * coupling);
        Ok(Self { momentum, diagonal, coupling, energy: omega - diagonal, alpha: coupling.abs() / (diagonal + omega) })
    }

    pub fn probability(&self, n: usize) -> f64 {
        let a2 = self.alpha * self.alpha;
        (1.0 - a2) * libm::pow(a2, n as f64)
    }
}

pub fn bogoliubov_oracle(kernels: &KernelSet, truncation: usize) -> Result<BogoliubovOracle> {
    let momenta = kernels.momenta.as_ref().ok_or(Error::NotHomogeneous)?;
    let m = kernels.modes();
    for i in 0..m {
        for j in 0..m {
            if i != j && kernels.k1[(i, j)].abs() > 1e-12 {
                return Err(Error::NotPairDiagonal(format!("K1 couples modes {i} and {j}")));
            }
            if momenta[i] != -momenta[j] && kernels.k2[(i, j)].abs() > 1e-12 {
                return Err(Error::NotPairDiagonal(format!("K2 couples momenta {} and {}", momenta[i], momenta[j])));
            }
        }
    }
    let diag = |i: usize| kernels.energies[i] + kernels.k1[(i, i)];
    let mut pairs = Vec::new();
    let mut seen = vec![false; m];
    for i in 0..m {
        if seen[i] {
            continue;
        }
        seen[i] = true;
        match (0..m).find(|&j| !seen[j] && momenta[j] == -momenta[i]) {
            Some(j) => {
                seen[j] = true;
                let coupling = 0.5 * (kernels.k2[(i, j)] + kernels.k2[(j, i)]);
                pairs.push(PairMode::solve(momenta[i].abs(), diag(i), diag(j), coupling)?);
            }
            None => {
                if kernels.k2[(i, i)].abs() > 1e-12 {
                    return Err(Error::NotPairDiagonal(format!("mode {i} squeezes with itself")));
                }
                pairs.push(PairMode { momentum: 0, diagonal: diag(i), coupling: 0.0, energy: 0.0, alpha: 0.0 });
            }
        }
    }
    let mut distribution = vec![0.0; truncation + 1];
    distribution[0] = 1.0;
    for pair in &pairs {
        let law: Vec<f64> = (0..=truncation / 2).map(|n| pair.probability(n)).collect();
        let mut next = vec![0.0; truncation + 1];
        for (ell, &p) in distribution.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (n, &q) in law.iter().enumerate() {
                let target = ell + 2 * n;
                if target > truncation {
                    break;
                }
                next[target] += p * q;
            }
        }
        distribution = next;
    }
    let mass_deficit = 1.0 - distribution.iter().sum::<f64>();
    Ok(BogoliubovOracle { energy: pairs.iter().map(|p| p.energy).sum(), pairs, distribution, mass_deficit })
}

/// `(H + shift) x` as a dense vector, for diagnostics.
pub fn apply_shifted(matrix: &CsrMatrix, x: &[f64], shift: f64) -> DVector<f64> {
    let y = matrix.apply(x);
    DVector::from_iterator(x.len(), y.iter().zip(x).map(|(a, b)| a + shift * b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{FockBasis, FockVector};
    use crate::hamiltonian::{assemble_blocks, assemble_bogoliubov};

    fn pair_kernels(e: f64, k1: f64, g: f64) -> KernelSet {
        let energies = vec![e, e];
        let k1m = DMatrix::from_diagonal(&DVector::from_vec(vec![k1, k1]));
        let k2 = DMatrix::from_row_slice(2, 2, &[0.0, g, g, 0.0]);
        KernelSet::from_parts(energies, k1m, k2, vec![0.0; 8], &[0.0; 16]).unwrap().with_momenta(vec![1, -1])
    }

    #[test]
    fn two_mode_closed_form_matches_dense() {
        let kernels = pair_kernels(1.0, 0.4, 0.5);
        let basis = FockBasis::new(2, 40).unwrap();
        let blocks = assemble_blocks(&kernels, &basis).unwrap();
        let h0 = assemble_bogoliubov(&blocks);
        let gs = dense_ground_state(&h0).unwrap();
        let oracle = bogoliubov_oracle(&kernels, 40).unwrap();
        assert!((gs.energy - oracle.energy).abs() < 1e-8);
        let p = FockVector::new(&basis, gs.vector.clone()).unwrap().sector_norms(&basis);
        for (ell, (a, b)) in p.iter().zip(&oracle.distribution).take(21).enumerate() {
            assert!((a - b).abs() < 1e-8, "l = {ell}");
        }
    }

    #[test]
    fn zero_coupling_oracle_is_vacuum() {
        let oracle = bogoliubov_oracle(&pair_kernels(1.0, 0.3, 0.0), 10).unwrap();
        assert_eq!(oracle.energy, 0.0);
        assert_eq!(oracle.distribution[0], 1.0);
        assert!(oracle.pairs.iter().all(|p| p.alpha == 0.0));
    }

    #[test]
    fn oracle_ratios_are_geometric() {
        let oracle = bogoliubov_oracle(&pair_kernels(1.0, 0.2, 0.6), 10).unwrap();
        let a2 = oracle.pairs[0].alpha * oracle.pairs[0].alpha;
        for n in 1..=5 {
            let ratio = oracle.distribution[2 * n] / oracle.distribution[2 * n - 2];
            assert!((ratio - a2).abs() < 1e-10);
            assert_eq!(oracle.distribution[2 * n - 1], 0.0);
        }
        assert!(oracle.mass_deficit > 0.0);
    }

    #[test]
    fn ill_posed_pair_is_named() {
        let err = bogoliubov_oracle(&pair_kernels(0.1, 0.1, 0.5), 10).unwrap_err();
        assert!(matches!(err, Error::IllPosedPair { momentum: 1, .. }));
    }

    #[test]
    fn lanczos_agrees_with_dense_and_across_seeds() {
        let kernels = pair_kernels(1.0, 0.4, 0.5);
        let basis = FockBasis::new(2, 8).unwrap();
        let h0 = assemble_bogoliubov(&assemble_blocks(&kernels, &basis).unwrap());
        let dense = dense_ground_state(&h0).unwrap();
        let a = lanczos_ground_state(&h0, &LanczosOptions { seed: 1, krylov: 10, ..Default::default() }).unwrap();
        let b = lanczos_ground_state(&h0, &LanczosOptions { seed: 2, krylov: 10, ..Default::default() }).unwrap();
        assert!((a.energy - dense.energy).abs() < 1e-10);
        assert!((a.energy - b.energy).abs() < 1e-10);
        let diff = a.vector.iter().zip(&b.vector).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-9);
        assert!(a.energy < 0.0);
    }

    #[test]
    fn dense_handles_trivial_and_shifted_inputs() {
        let one = CsrMatrix::from_diagonal(&[0.7]);
        assert_eq!(dense(&one).unwrap().energy, 0.7);
        let m = CsrMatrix::from_rows(2, 2, vec![vec![(0, 1.0), (1, 0.5)], vec![(0, 0.5), (1, 2.0)]]);
        let shifted = CsrMatrix::linear_combination(&[(&m, 1.0), (&CsrMatrix::from_diagonal(&[3.0, 3.0]), 1.0)]);
        let e = dense(&m).unwrap().energy;
        assert!((dense(&shifted).unwrap().energy - (e + 3.0)).abs() < 1e-14);
        let big = CsrMatrix::from_diagonal(&vec![1.0; DENSE_LIMIT + 1]);
        assert!(matches!(dense(&big), Err(Error::DimensionGuard { .. })));
    }

    #[test]
    fn lanczos_rejects_asymmetric_input() {
        let m = CsrMatrix::from_rows(2, 2, vec![vec![(1, 1.0)], vec![]]);
        assert!(matches!(lanczos(&m, &LanczosOptions::default()), Err(Error::NotHermitian { .. })));
    }
}
