use std::f64::consts::PI;

use bosegas_core::decay::{tail_energy_check, DecayProfile, ProfileSource};
use bosegas_core::fock::{build_basis, FockBasis, DEFAULT_BUDGET};
use bosegas_core::grid::Grid1D;
use bosegas_core::hamiltonian::{assemble_blocks, assemble_bogoliubov, compute_kernels, Blocks, KernelSet};
use bosegas_core::hartree::{solve_hartree, HartreeOptions, HartreeProblem, HartreeSolution};
use bosegas_core::potentials::{make_bounded_potential, PairPotential};
use bosegas_core::solver::{bogoliubov_oracle, dense_ground_state, lanczos_ground_state, GroundState, LanczosOptions};

const L: f64 = 2.0 * PI;
const VHAT: f64 = 8.0;

fn torus(v: PairPotential, m: usize) -> (HartreeSolution, KernelSet) {
    let grid = Grid1D::periodic(64, L).unwrap();
    let problem = HartreeProblem::homogeneous(grid, v.clone()).unwrap();
    let sol = solve_hartree(&problem, &HartreeOptions::default()).unwrap();
    let modes = sol.modes(m).unwrap();
    let kernels = compute_kernels(&sol, &v, &modes).unwrap();
    (sol, kernels)
}

fn flat_potential(kmax: i64) -> PairPotential {
    let grid = Grid1D::periodic(64, L).unwrap();
    make_bounded_potential((-kmax..=kmax).map(|k| (k, VHAT)), &grid).unwrap()
}

fn quadratic(kernels: &KernelSet, m: usize, cutoff: usize) -> (FockBasis, Blocks, GroundState) {
    let basis = build_basis(m, cutoff, DEFAULT_BUDGET).unwrap();
    let blocks = assemble_blocks(kernels, &basis).unwrap();
    let h = assemble_bogoliubov(&blocks);
    let gs = if basis.dim() <= 1000 {
        dense_ground_state(&h).unwrap()
    } else {
        lanczos_ground_state(&h, &LanczosOptions::default()).unwrap()
    };
    (basis, blocks, gs)
}

/// Squeezing ratio of a pair `(p, -p)` with kinetic energy `p^2` and
/// interaction `vhat / L`, computed by hand.
fn pair_alpha(p: f64) -> f64 {
    let g = VHAT / L;
    let a = p * p + g;
    g / (a + (a * a - g * g).sqrt())
}

#[test]
fn single_pair_sector_ratio_is_alpha_squared() {
    let (_, kernels) = torus(flat_potential(2), 2);
    let (basis, _, gs) = quadratic(&kernels, 2, 40);
    let profile = DecayProfile::from_ground_state(&basis, &gs, ProfileSource::Bogoliubov).unwrap();
    let a2 = pair_alpha(1.0).powi(2);
    for n in 0..8 {
        let ratio = profile.p()[2 * n + 2] / profile.p()[2 * n];
        assert!((ratio - a2).abs() < 1e-8 * a2.max(1.0), "n = {n}: {ratio} vs {a2}");
    }
}

#[test]
fn dense_pair_distribution_matches_closed_form() {
    let (_, kernels) = torus(flat_potential(2), 2);
    let (basis, _, gs) = quadratic(&kernels, 2, 40);
    let oracle = bogoliubov_oracle(&kernels, 40).unwrap();
    let dense = DecayProfile::from_ground_state(&basis, &gs, ProfileSource::Bogoliubov).unwrap();
    for ell in 0..=30 {
        let (a, b) = (dense.p()[ell], oracle.distribution[ell]);
        assert!((a - b).abs() < 1e-8, "P({ell}): {a} vs {b}");
    }
    assert!((gs.energy - oracle.energy).abs() < 1e-8);
}

#[test]
fn quadratic_ground_state_has_no_odd_sectors() {
    let (_, kernels) = torus(flat_potential(2), 4);
    let (basis, _, gs) = quadratic(&kernels, 4, 12);
    let profile = DecayProfile::from_ground_state(&basis, &gs, ProfileSource::Bogoliubov).unwrap();
    assert!(profile.max_odd() < 1e-20, "odd weight {}", profile.max_odd());
    assert!(profile.p()[2] > 1e-3);
}

#[test]
fn quadratic_tail_couples_only_through_pair_creation() {
    let (sol, kernels) = torus(flat_potential(2), 4);
    let (basis, blocks, gs) = quadratic(&kernels, 4, 12);
    let h = assemble_bogoliubov(&blocks);
    let report = tail_energy_check(&h, &blocks, &gs, sol.tau, 6).unwrap();
    assert_eq!(basis.cutoff(), 12);
    assert!(!report.empty);
    assert_eq!(report.couplings[3], 0.0);
    assert!(report.couplings[2] > 0.0);
    assert!(report.k0_tail >= report.k0_bound * (1.0 - 1e-12));
    assert!(report.identity_defect < 1e-10);
}

#[test]
fn free_gas_has_empty_tail() {
    let v = PairPotential::zero(L).unwrap();
    let (sol, kernels) = torus(v, 4);
    let (_, blocks, gs) = quadratic(&kernels, 4, 8);
    let h = assemble_bogoliubov(&blocks);
    assert!((gs.vector[0] - 1.0).abs() < 1e-12);
    let report = tail_energy_check(&h, &blocks, &gs, sol.tau, 6).unwrap();
    assert!(report.empty);
    assert_eq!(report.tail_weight, 0.0);
}

#[test]
fn torus_condensate_is_flat_with_unit_gap() {
    let (sol, _) = torus(flat_potential(2), 2);
    let expected = 1.0 / L.sqrt();
    assert!(sol.phi.iter().all(|p| (p - expected).abs() < 1e-10));
    assert!((sol.tau - 1.0).abs() < 1e-10);
}
