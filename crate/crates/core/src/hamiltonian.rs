//! Kernels in the excitation mode basis and the sparse excitation Hamiltonian.
//!
//! With modes `u_i` orthogonal to the condensate the kernels are
//!
//! ```text
//! K1_ij   = <u_i, phi v phi u_j>                   (phi(x) v(x-y) phi(y))
//! K2_ij   = int conj(u_i(x) u_j(y)) phi(x) v(x-y) phi(y)
//! K3_ijk  = int conj(u_i(x)) phi(x) W(x,y) conj(u_j(y)) u_k(y)
//! K4_ijkl = int conj(u_i(x)) u_k(x) W(x,y) conj(u_j(y)) u_l(y)
//! ```
//!
//! with `W(x,y) = v(x-y) - v*phi^2(x) - v*phi^2(y) + <phi, (v*phi^2) phi>`,
//! and the second-quantized blocks are
//! `K0 = sum e_j a_j^* a_j`, `K1 = sum K1_ij a_i^* a_j`, `K2 = 1/2 sum K2_ij a_i^* a_j^*`,
//! `K3 = sum K3_ijk a_i^* a_j^* a_k`, `K4 = 1/2 sum K4_ijkl a_i^* a_j^* a_k a_l`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;
use nalgebra::{Complex, DMatrix};

use crate::fock::FockBasis;
use crate::hartree::{HartreeSolution, ModeBasis};
use crate::potentials::{interaction_matrix, PairPotential, PotentialClass};
use crate::sparse::{CsrMatrix, RowBuilder};
use crate::{Error, Result};

/// Entries of the quartic kernel below this magnitude are not stored.
pub const K4_THRESHOLD: f64 = 1e-14;
/// Allowed deviation between the Fourier and quadrature kernels.
pub const FAST_PATH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelPath {
    Quadrature,
    /// Closed-form plane-wave kernels, cross-checked against quadrature.
    Fourier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    m: usize,
    pub path: KernelPath,
    pub energies: Vec<f64>,
    pub momenta: Option<Vec<i64>>,
    pub k1: DMatrix<f64>,
    pub k2: DMatrix<f64>,
    k3: Vec<f64>,
    k4: Vec<K4Entry>,
    /// `W(x_a, x_b)` on the grid.
    pub w: DMatrix<f64>,
    /// `max_x |int W(x,y) phi(y)^2 dy|`; zero up to rounding.
    pub w_mean_defect: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct K4Entry {
    pub i: u16,
    pub j: u16,
    pub k: u16,
    pub l: u16,
    pub value: f64,
}

impl KernelSet {
    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn k3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.k3[(i * self.m + j) * self.m + k]
    }

    /// Stored quartic entries, each above [`K4_THRESHOLD`].
    pub fn k4_entries(&self) -> &[K4Entry] {
        &self.k4
    }

    pub fn k4(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let key = [i as u16, j as u16, k as u16, l as u16];
        self.k4.binary_search_by(|e| [e.i, e.j, e.k, e.l].cmp(&key)).map(|pos| self.k4[pos].value).unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.k1.amax() == 0.0 && self.k2.amax() == 0.0 && self.k3.iter().all(|&x| x == 0.0) && self.k4.is_empty()
    }

    /// Kernels built directly from tables, for toy models. `k3` is indexed
    /// `[(i * m + j) * m + k]`; quartic entries are given as a dense `m^4` table.
    pub fn from_parts(
        energies: Vec<f64>,
        k1: DMatrix<f64>,
        k2: DMatrix<f64>,
        k3: Vec<f64>,
        k4_dense: &[f64],
    ) -> Result<Self> {
        let m = energies.len();
        if k1.shape() != (m, m) || k2.shape() != (m, m) || k3.len() != m * m * m || k4_dense.len() != m * m * m * m {
            return Err(Error::InvalidParameter("kernel tables have inconsistent sizes".into()));
        }
        Ok(Self {
            m,
            path: KernelPath::Quadrature,
            energies,
            momenta: None,
            k1,
            k2,
            k3,
            k4: sparsify_k4(m, k4_dense),
            w: DMatrix::zeros(0, 0),
            w_mean_defect: 0.0,
        })
    }

    pub fn with_momenta(mut self, momenta: Vec<i64>) -> Self {
        self.momenta = Some(momenta);
        self
    }
}

fn sparsify_k4(m: usize, dense: &[f64]) -> Vec<K4Entry> {
    let mut out = Vec::new();
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    let value = dense[((i * m + j) * m + k) * m + l];
                    if value.abs() >= K4_THRESHOLD {
                        out.push(K4Entry { i: i as u16, j: j as u16, k: k as u16, l: l as u16, value });
                    }
                }
            }
        }
    }
    out
}

/// Kernels of `v` in the given excitation modes.
pub fn compute_kernels(sol: &HartreeSolution, v: &PairPotential, modes: &ModeBasis) -> Result<KernelSet> {
    if v.class() != PotentialClass::BoundedPositiveType {
        return Err(Error::WrongPotentialClass { expected: "bounded-positive-type" });
    }
    modes.validate(&sol.grid, &sol.phi, &sol.h)?;
    let quadrature = quadrature_kernels(sol, v, modes)?;
    match modes.momenta() {
        Some(momenta) if sol.homogeneous => {
            let fast = fourier_kernels(v, sol.grid.length(), modes.energies(), momenta, &quadrature);
            compare_kernels(&fast, &quadrature)?;
            Ok(fast)
        }
        _ => Ok(quadrature),
    }
}

fn quadrature_kernels(sol: &HartreeSolution, v: &PairPotential, modes: &ModeBasis) -> Result<KernelSet> {
    let grid = &sol.grid;
    let n = grid.len();
    let m = modes.len();
    let w = grid.weight();
    let phi = &sol.phi;
    let interaction = interaction_matrix(v, grid);

    let mean = &sol.mean_field;
    let constant: f64 = w * phi.iter().zip(mean).map(|(p, c)| p * p * c).sum::<f64>();
    let big_w = DMatrix::from_fn(n, n, |a, b| interaction[(a, b)] - mean[a] - mean[b] + constant);
    let w_mean_defect =
        (0..n).map(|a| (w * (0..n).map(|b| big_w[(a, b)] * phi[b] * phi[b]).sum::<f64>()).abs()).fold(0.0, f64::max);

    let c = |x: f64| Complex::new(x, 0.0);
    let u = DMatrix::from_fn(n, m, |a, i| modes.function(i)[a]);
    let u_conj = u.map(|z| z.conj());
    let k_grid = DMatrix::from_fn(n, n, |a, b| c(phi[a] * interaction[(a, b)] * phi[b] * w * w));
    let w_grid = big_w.map(|x| c(x * w * w));
    let phi_u_conj = DMatrix::from_fn(n, m, |a, i| u_conj[(a, i)] * phi[a]);
    // pair products conj(u_i) u_k, column index i * m + k
    let pairs = DMatrix::from_fn(n, m * m, |a, col| u_conj[(a, col / m)] * u[(a, col % m)]);

    let k1c = u_conj.transpose() * &k_grid * &u;
    let k2c = u_conj.transpose() * &k_grid * &u_conj;
    let k3c = phi_u_conj.transpose() * &w_grid * &pairs;
    let k4c = pairs.transpose() * &w_grid * &pairs;

    let real = |name: &'static str, z: &DMatrix<Complex<f64>>| -> Result<DMatrix<f64>> {
        let scale = z.iter().fold(1e-300f64, |s, x| s.max(crate::modulus(*x)));
        let imag = z.iter().fold(0.0f64, |s, x| s.max(x.im.abs()));
        if imag > 1e-10 * scale.max(1.0) {
            return Err(Error::ComplexKernel { kernel: name, imag });
        }
        Ok(z.map(|x| x.re))
    };
    let k1 = real("K1", &k1c)?;
    let k2 = real("K2", &k2c)?;
    let k3m = real("K3", &k3c)?;
    let k4m = real("K4", &k4c)?;

    let k1 = (&k1 + k1.transpose()) * 0.5;
    let k2 = (&k2 + k2.transpose()) * 0.5;
    // k3m[(i, j * m + k)]
    let mut k3 = vec![0.0; m * m * m];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                k3[(i * m + j) * m + k] = k3m[(i, j * m + k)];
            }
        }
    }
    // k4m[(i * m + k, j * m + l)]
    let raw = |i: usize, j: usize, k: usize, l: usize| k4m[(i * m + k, j * m + l)];
    let mut k4 = vec![0.0; m * m * m * m];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    k4[((i * m + j) * m + k) * m + l] =
                        0.25 * (raw(i, j, k, l) + raw(j, i, l, k) + raw(k, l, i, j) + raw(l, k, j, i));
                }
            }
        }
    }

    Ok(KernelSet {
        m,
        path: KernelPath::Quadrature,
        energies: modes.energies().to_vec(),
        momenta: modes.momenta().map(|p| p.to_vec()),
        k1,
        k2,
        k3,
        k4: sparsify_k4(m, &k4),
        w: big_w,
        w_mean_defect,
    })
}

fn fourier_kernels(v: &PairPotential, length: f64, energies: &[f64], momenta: &[i64], quad: &KernelSet) -> KernelSet {
    let mut out = plane_wave_kernels(v, length, energies, momenta);
    out.w = quad.w.clone();
    out.w_mean_defect = quad.w_mean_defect;
    out
}

/// Closed-form kernels of any torus potential in plane waves of the given
/// momenta, with the constant condensate `1/sqrt(L)`. No quadrature involved,
/// so `w` is left empty.
pub fn plane_wave_kernels(v: &PairPotential, length: f64, energies: &[f64], momenta: &[i64]) -> KernelSet {
    let m = momenta.len();
    let vh = |k: i64| v.coefficient(k) / length;
    let k1 = DMatrix::from_fn(m, m, |i, j| if momenta[i] == momenta[j] { vh(momenta[i]) } else { 0.0 });
    let k2 = DMatrix::from_fn(m, m, |i, j| if momenta[i] == -momenta[j] { vh(momenta[i]) } else { 0.0 });
    let mut k3 = vec![0.0; m * m * m];
    let mut k4 = vec![0.0; m * m * m * m];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                if momenta[i] + momenta[j] == momenta[k] {
                    k3[(i * m + j) * m + k] = vh(momenta[i]);
                }
                for l in 0..m {
                    let mut value = 0.0;
                    if momenta[i] + momenta[j] == momenta[k] + momenta[l] {
                        value += vh(momenta[i] - momenta[k]);
                    }
                    if i == k && j == l {
                        value -= vh(0);
                    }
                    k4[((i * m + j) * m + k) * m + l] = value;
                }
            }
        }
    }
    KernelSet {
        m,
        path: KernelPath::Fourier,
        energies: energies.to_vec(),
        momenta: Some(momenta.to_vec()),
        k1,
        k2,
        k3,
        k4: sparsify_k4(m, &k4),
        w: DMatrix::zeros(0, 0),
        w_mean_defect: 0.0,
    }
}

fn compare_kernels(a: &KernelSet, b: &KernelSet) -> Result<()> {
    let m = a.m;
    let fail = |kernel: &'static str, deviation: f64, entry: Vec<usize>| {
        if deviation > FAST_PATH_TOLERANCE {
            Err(Error::KernelMismatch { kernel, deviation, entry })
        } else {
            Ok(())
        }
    };
    for (name, x, y) in [("K1", &a.k1, &b.k1), ("K2", &a.k2, &b.k2)] {
        let mut worst = (0.0, vec![0, 0]);
        for i in 0..m {
            for j in 0..m {
                let d = (x[(i, j)] - y[(i, j)]).abs();
                if d > worst.0 {
                    worst = (d, vec![i, j]);
                }
            }
        }
        fail(name, worst.0, worst.1)?;
    }
    let mut worst = (0.0, vec![0, 0, 0]);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let d = (a.k3(i, j, k) - b.k3(i, j, k)).abs();
                if d > worst.0 {
                    worst = (d, vec![i, j, k]);
                }
            }
        }
    }
    fail("K3", worst.0, worst.1)?;
    let mut worst = (0.0, vec![0, 0, 0, 0]);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    let d = (a.k4(i, j, k, l) - b.k4(i, j, k, l)).abs();
                    if d > worst.0 {
                        worst = (d, vec![i, j, k, l]);
                    }
                }
            }
        }
    }
    fail("K4", worst.0, worst.1)
}

/// Second-quantized blocks over a Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    pub k0: CsrMatrix,
    pub k1: CsrMatrix,
    pub k2: CsrMatrix,
    pub k3: CsrMatrix,
    pub k4: CsrMatrix,
    /// Sector of every basis state.
    pub sectors: Vec<usize>,
    pub cutoff: usize,
}

impl Blocks {
    pub fn dim(&self) -> usize {
        self.sectors.len()
    }

    /// `(name, block, sector shift)` for each block.
    pub fn signatures(&self) -> [(&'static str, &CsrMatrix, isize); 5] {
        [("K0", &self.k0, 0), ("K1", &self.k1, 0), ("K2", &self.k2, 2), ("K3", &self.k3, 1), ("K4", &self.k4, 0)]
    }

    /// Checks that every stored entry moves between sectors as its block demands.
    pub fn verify_signatures(&self) -> Result<()> {
        for (name, block, shift) in self.signatures() {
            for (r, c, _) in block.triplets() {
                let (to, from) = (self.sectors[r], self.sectors[c]);
                if to as isize - from as isize != shift {
                    return Err(Error::SectorSignature { block: name, from, to });
                }
            }
        }
        Ok(())
    }
}

/// Applies a product of ladder operators (rightmost first) to an occupation
/// vector in place, returning the accumulated bosonic factor, or `None` when
/// the result vanishes or leaves the truncated space.
fn apply_ladders(state: &mut [u8], annihilate: &[usize], create: &[usize], cutoff: usize) -> Option<f64> {
    let mut factor = 1.0;
    for &k in annihilate {
        if state[k] == 0 {
            return None;
        }
        factor *= state[k] as f64;
        state[k] -= 1;
    }
    let total: usize = state.iter().map(|&n| n as usize).sum();
    if total + create.len() > cutoff {
        return None;
    }
    for &k in create {
        state[k] += 1;
        factor *= state[k] as f64;
    }
    Some(sqrt(factor))
}

/// Builds a block column by column: `entries(state, push)` is called for each
/// ket and pushes `(bra occupation, value)` pairs.
fn build_block<F>(basis: &FockBasis, mut entries: F) -> CsrMatrix
where
    F: FnMut(&[u8], &mut dyn FnMut(&[u8], f64)),
{
    let dim = basis.dim();
    let mut transpose = RowBuilder::new(dim, dim);
    let mut column: Vec<(u32, f64)> = Vec::new();
    for c in 0..dim {
        column.clear();
        entries(basis.state(c), &mut |bra: &[u8], value: f64| {
            if value != 0.0 {
                if let Some(r) = basis.index_of(bra) {
                    column.push((r as u32, value));
                }
            }
        });
        transpose.push_row(&mut column);
    }
    transpose.finish().transpose()
}

pub fn assemble_blocks(kernels: &KernelSet, basis: &FockBasis) -> Result<Blocks> {
    let m = kernels.modes();
    if basis.modes() != m {
        return Err(Error::InvalidParameter(format!("basis has {} modes, kernels {m}", basis.modes())));
    }
    let cutoff = basis.cutoff();
    let diag: Vec<f64> =
        basis.states().map(|s| s.iter().zip(&kernels.energies).map(|(&n, e)| n as f64 * e).sum()).collect();
    let k0 = CsrMatrix::from_diagonal(&diag);

    let mut scratch = vec![0u8; m];
    let k1 = build_block(basis, |ket, push| {
        for i in 0..m {
            for j in 0..m {
                let coefficient = kernels.k1[(i, j)];
                if coefficient == 0.0 {
                    continue;
                }
                scratch.copy_from_slice(ket);
                if let Some(f) = apply_ladders(&mut scratch, &[j], &[i], cutoff) {
                    push(&scratch, coefficient * f);
                }
            }
        }
    });
    let k2 = build_block(basis, |ket, push| {
        for i in 0..m {
            for j in 0..m {
                let coefficient = 0.5 * kernels.k2[(i, j)];
                if coefficient == 0.0 {
                    continue;
                }
                scratch.copy_from_slice(ket);
                if let Some(f) = apply_ladders(&mut scratch, &[], &[j, i], cutoff) {
                    push(&scratch, coefficient * f);
                }
            }
        }
    });
    let k3 = build_block(basis, |ket, push| {
        for k in 0..m {
            if ket[k] == 0 {
                continue;
            }
            for i in 0..m {
                for j in 0..m {
                    let coefficient = kernels.k3(i, j, k);
                    if coefficient == 0.0 {
                        continue;
                    }
                    scratch.copy_from_slice(ket);
                    if let Some(f) = apply_ladders(&mut scratch, &[k], &[j, i], cutoff) {
                        push(&scratch, coefficient * f);
                    }
                }
            }
        }
    });
    let k4 = build_block(basis, |ket, push| {
        for e in kernels.k4_entries() {
            let (i, j, k, l) = (e.i as usize, e.j as usize, e.k as usize, e.l as usize);
            if ket[l] == 0 || ket[k] == 0 {
                continue;
            }
            scratch.copy_from_slice(ket);
            if let Some(f) = apply_ladders(&mut scratch, &[l, k], &[j, i], cutoff) {
                push(&scratch, 0.5 * e.value * f);
            }
        }
    });
    let sectors = (0..basis.dim()).map(|i| basis.sector_of(i)).collect();
    let blocks = Blocks { k0, k1, k2, k3, k4, sectors, cutoff };
    blocks.verify_signatures()?;
    Ok(blocks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Full,
    Bogoliubov,
}

/// `a(l) = N - l`.
pub fn coefficient_a(n: usize, ell: usize) -> f64 {
    n as f64 - ell as f64
}

/// `b(l) = sqrt((N - l)(N - l - 1))`, zero once the product turns negative.
pub fn coefficient_b(n: usize, ell: usize) -> f64 {
    let x = n as f64 - ell as f64;
    sqrt((x * (x - 1.0)).max(0.0))
}

/// `c(l) = sqrt(N - l)`, zero once the argument turns negative.
pub fn coefficient_c(n: usize, ell: usize) -> f64 {
    sqrt((n as f64 - ell as f64).max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationHamiltonian {
    pub variant: Variant,
    /// Particle number; `None` for the quadratic variant.
    pub n_particles: Option<usize>,
    pub matrix: CsrMatrix,
    pub sectors: Vec<usize>,
    pub cutoff: usize,
}

impl ExcitationHamiltonian {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.matrix.max_asymmetry()
    }

    /// `|| [H, P] ||_F` for the diagonal operator `P` with entries `p`.
    pub fn commutator_with_diagonal(&self, p: &[f64]) -> f64 {
        sqrt(self.matrix.triplets().map(|(r, c, v)| (v * (p[c] - p[r])) * (v * (p[c] - p[r]))).sum())
    }
}

/// `H = K0 + (N-1)^-1 [K1 a(N) + (K2 b(N) + h.c.) + (K3 c(N) + h.c.) + K4]`, the
/// number functions evaluated on the ket sector.
pub fn assemble_full(n_particles: usize, blocks: &Blocks) -> Result<ExcitationHamiltonian> {
    if n_particles < 2 || n_particles <= blocks.cutoff {
        return Err(Error::CutoffTooLarge { n_particles, cutoff: blocks.cutoff });
    }
    let per_state =
        |f: fn(usize, usize) -> f64| -> Vec<f64> { blocks.sectors.iter().map(|&ell| f(n_particles, ell)).collect() };
    let k1a = blocks.k1.scale_columns(&per_state(coefficient_a));
    let k2b = blocks.k2.scale_columns(&per_state(coefficient_b));
    let k3c = blocks.k3.scale_columns(&per_state(coefficient_c));
    let k2b_t = k2b.transpose();
    let k3c_t = k3c.transpose();
    let scale = 1.0 / (n_particles as f64 - 1.0);
    let matrix = CsrMatrix::linear_combination(&[
        (&blocks.k0, 1.0),
        (&k1a, scale),
        (&k2b, scale),
        (&k2b_t, scale),
        (&k3c, scale),
        (&k3c_t, scale),
        (&blocks.k4, scale),
    ]);
    Ok(ExcitationHamiltonian {
        variant: Variant::Full,
        n_particles: Some(n_particles),
        matrix,
        sectors: blocks.sectors.clone(),
        cutoff: blocks.cutoff,
    })
}

/// `H0 = K0 + K1 + K2 + K2^*`.
pub fn assemble_bogoliubov(blocks: &Blocks) -> ExcitationHamiltonian {
    let k2t = blocks.k2.transpose();
    let matrix = CsrMatrix::linear_combination(&[(&blocks.k0, 1.0), (&blocks.k1, 1.0), (&blocks.k2, 1.0), (&k2t, 1.0)]);
    ExcitationHamiltonian {
        variant: Variant::Bogoliubov,
        n_particles: None,
        matrix,
        sectors: blocks.sectors.clone(),
        cutoff: blocks.cutoff,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Ladder;
    use crate::grid::Grid1D;
    use crate::hartree::{solve_hartree, HartreeOptions, HartreeProblem};
    use crate::potentials::make_bounded_potential;
    use core::f64::consts::PI;

    fn torus_solution(coefficients: &[(i64, f64)]) -> (HartreeSolution, PairPotential) {
        let grid = Grid1D::periodic(32, 2.0 * PI).unwrap();
        let v = make_bounded_potential(coefficients.iter().copied(), &grid).unwrap();
        let problem = HartreeProblem::homogeneous(grid, v.clone()).unwrap();
        (solve_hartree(&problem, &HartreeOptions::default()).unwrap(), v)
    }

    fn band(height: f64, width: i64) -> Vec<(i64, f64)> {
        (-width..=width).map(|k| (k, height)).collect()
    }

    #[test]
    fn zero_potential_gives_zero_kernels() {
        let (sol, v) = torus_solution(&[]);
        let modes = sol.modes(4).unwrap();
        let kernels = compute_kernels(&sol, &v, &modes).unwrap();
        assert!(kernels.is_zero());
    }

    #[test]
    fn plane_wave_kernels_match_closed_form() {
        let (sol, v) = torus_solution(&[(0, 1.0), (1, 2.0), (-1, 2.0), (2, 0.5), (-2, 0.5), (3, 0.25), (-3, 0.25)]);
        let modes = sol.modes(6).unwrap();
        let kernels = compute_kernels(&sol, &v, &modes).unwrap();
        assert_eq!(kernels.path, KernelPath::Fourier);
        let l = 2.0 * PI;
        // p = 1, -1, 2, -2, 3, -3
        assert!((kernels.k1[(0, 0)] - 2.0 / l).abs() < 1e-15);
        assert_eq!(kernels.k1[(0, 2)], 0.0);
        assert!((kernels.k2[(0, 1)] - 2.0 / l).abs() < 1e-15);
        assert_eq!(kernels.k2[(0, 0)], 0.0);
        assert!(kernels.w_mean_defect < 1e-10);
        let quad = quadrature_kernels(&sol, &v, &modes).unwrap();
        compare_kernels(&kernels, &quad).unwrap();
    }

    #[test]
    fn trapped_kernels_have_their_symmetries() {
        let grid = Grid1D::hard_wall(48, 8.0).unwrap();
        let v = make_bounded_potential(band(2.0, 3), &grid).unwrap();
        let problem = HartreeProblem::quadratic_trap(grid, 0.8, v.clone()).unwrap();
        let sol = solve_hartree(&problem, &HartreeOptions::default()).unwrap();
        let modes = sol.modes(4).unwrap();
        let kernels = compute_kernels(&sol, &v, &modes).unwrap();
        assert_eq!(kernels.path, KernelPath::Quadrature);
        assert!(kernels.w_mean_defect < 1e-10);
        assert!((&kernels.k1 - kernels.k1.transpose()).amax() == 0.0);
        assert!(kernels.k1.clone().symmetric_eigenvalues().min() > -1e-12);
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    for l in 0..4 {
                        assert!((kernels.k4(i, j, k, l) - kernels.k4(j, i, l, k)).abs() < 1e-15);
                    }
                }
            }
        }
    }

    fn dense_k2_oracle(k2: &DMatrix<f64>, basis: &FockBasis) -> DMatrix<f64> {
        let m = basis.modes();
        let mut out = DMatrix::zeros(basis.dim(), basis.dim());
        for i in 0..m {
            for j in 0..m {
                let ai = basis.ladder(i, Ladder::Create).to_dense();
                let aj = basis.ladder(j, Ladder::Create).to_dense();
                out += (ai * aj) * (0.5 * k2[(i, j)]);
            }
        }
        out
    }

    fn toy_kernels(m: usize) -> KernelSet {
        let energies: Vec<f64> = (0..m).map(|i| 1.0 + 0.5 * i as f64).collect();
        let k1 = DMatrix::from_fn(m, m, |i, j| if i == j { 0.3 + 0.1 * i as f64 } else { 0.05 });
        let k2 = DMatrix::from_fn(m, m, |i, j| 0.2 / (1.0 + (i + j) as f64));
        let k3 = (0..m * m * m).map(|x| 0.01 * (x % 7) as f64).collect();
        let mut k4 = vec![0.0; m * m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let sym = ((i + l) * (j + k) + (i + k) * (j + l)) as f64;
                        k4[((i * m + j) * m + k) * m + l] = 0.02 * sym;
                    }
                }
            }
        }
        KernelSet::from_parts(energies, k1, k2, k3, &k4).unwrap()
    }

    #[test]
    fn k2_block_matches_dense_ladder_products() {
        for (m, cutoff) in [(2, 4), (3, 4)] {
            let kernels = toy_kernels(m);
            let basis = FockBasis::new(m, cutoff).unwrap();
            let blocks = assemble_blocks(&kernels, &basis).unwrap();
            let dense = dense_k2_oracle(&kernels.k2, &basis);
            assert!((blocks.k2.to_dense() - &dense).amax() < 1e-14);
            // <vac| K2^* K2 |vac> by a brute-force double sum
            let mut brute = 0.0;
            for i in 0..m {
                for j in 0..m {
                    brute += 0.5 * kernels.k2[(i, j)] * kernels.k2[(i, j)];
                }
            }
            let column = blocks.k2.to_dense().column(0).into_owned();
            assert!((column.norm_squared() - brute).abs() < 1e-14);
        }
    }

    #[test]
    fn k0_vanishes_on_vacuum_and_signatures_hold() {
        let kernels = toy_kernels(3);
        let basis = FockBasis::new(3, 5).unwrap();
        let blocks = assemble_blocks(&kernels, &basis).unwrap();
        assert_eq!(blocks.k0.get(0, 0), 0.0);
        blocks.verify_signatures().unwrap();
        let h = assemble_full(20, &blocks).unwrap();
        assert!(h.max_asymmetry() < 1e-12);
        let h0 = assemble_bogoliubov(&blocks);
        assert!(h0.max_asymmetry() < 1e-12);
        assert_eq!(h0.matrix.get(0, 0), 0.0);
        // parity: no entries between sectors of different parity
        assert!(h0.matrix.triplets().all(|(r, c, _)| (h0.sectors[r] + h0.sectors[c]).is_multiple_of(2)));
    }

    #[test]
    fn k4_block_matches_dense_ladder_products() {
        let m = 2;
        let kernels = toy_kernels(m);
        let basis = FockBasis::new(m, 5).unwrap();
        let blocks = assemble_blocks(&kernels, &basis).unwrap();
        let create: Vec<_> = (0..m).map(|i| basis.ladder(i, Ladder::Create).to_dense()).collect();
        let annihilate: Vec<_> = (0..m).map(|i| basis.ladder(i, Ladder::Annihilate).to_dense()).collect();
        let mut dense = DMatrix::zeros(basis.dim(), basis.dim());
        let mut dense3 = DMatrix::zeros(basis.dim(), basis.dim());
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    dense3 += &create[i] * &create[j] * &annihilate[k] * kernels.k3(i, j, k);
                    for l in 0..m {
                        dense +=
                            &create[i] * &create[j] * &annihilate[k] * &annihilate[l] * (0.5 * kernels.k4(i, j, k, l));
                    }
                }
            }
        }
        // dense products lose the top sector; compare below it
        for r in 0..basis.dim() {
            for c in 0..basis.dim() {
                if basis.sector_of(r) < 5 && basis.sector_of(c) < 5 {
                    assert!((blocks.k4.get(r, c) - dense[(r, c)]).abs() < 1e-13);
                    assert!((blocks.k3.get(r, c) - dense3[(r, c)]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn coefficient_functions() {
        assert_eq!(coefficient_a(30, 0), 30.0);
        assert_eq!(coefficient_b(30, 29), 0.0);
        assert_eq!(coefficient_c(30, 30), 0.0);
        assert!((coefficient_b(30, 2) - sqrt(28.0 * 27.0)).abs() < 1e-15);
    }

    #[test]
    fn cutoff_must_stay_below_particle_number() {
        let kernels = toy_kernels(2);
        let basis = FockBasis::new(2, 6).unwrap();
        let blocks = assemble_blocks(&kernels, &basis).unwrap();
        assert!(matches!(assemble_full(6, &blocks), Err(Error::CutoffTooLarge { .. })));
        assert!(assemble_full(7, &blocks).is_ok());
    }

    #[test]
    fn torus_hamiltonian_conserves_momentum() {
        let (sol, v) = torus_solution(&band(1.5, 3));
        let modes = sol.modes(4).unwrap();
        let kernels = compute_kernels(&sol, &v, &modes).unwrap();
        let basis = FockBasis::new(4, 6).unwrap();
        let blocks = assemble_blocks(&kernels, &basis).unwrap();
        let h = assemble_full(30, &blocks).unwrap();
        let p = basis.momentum_diagonal(modes.momenta().unwrap());
        assert!(h.commutator_with_diagonal(&p) < 1e-10);
        assert!(blocks.k3.nnz() > 0);
    }
}
