use std::f64::consts::PI;

use bosegas_core::fock::{build_basis, FockBasis, DEFAULT_BUDGET};
use bosegas_core::grid::Grid1D;
use bosegas_core::hamiltonian::{assemble_blocks, compute_kernels, Blocks};
use bosegas_core::hartree::{solve_hartree, HartreeOptions, HartreeProblem};
use bosegas_core::lemmas::{check_k3_bound, check_k4_bound};
use bosegas_core::potentials::make_bounded_potential;

const N: usize = 40;

fn model() -> (FockBasis, Blocks) {
    let grid = Grid1D::periodic(64, 2.0 * PI).unwrap();
    let v = make_bounded_potential([(0, 6.0), (1, 4.0), (-1, 4.0), (2, 2.0), (-2, 2.0)], &grid).unwrap();
    let sol =
        solve_hartree(&HartreeProblem::homogeneous(grid, v.clone()).unwrap(), &HartreeOptions::default()).unwrap();
    let kernels = compute_kernels(&sol, &v, &sol.modes(4).unwrap()).unwrap();
    let basis = build_basis(4, 12, DEFAULT_BUDGET).unwrap();
    let blocks = assemble_blocks(&kernels, &basis).unwrap();
    (basis, blocks)
}

#[test]
fn doubling_delta_n_does_not_raise_constants() {
    let (basis, blocks) = model();
    let k3 = |d| check_k3_bound(&blocks, &basis, N, d, 400, 1).unwrap().empirical_constant.unwrap();
    let k4 = |d| check_k4_bound(&blocks, &basis, N, d, 400, 1).unwrap().empirical_constant.unwrap();
    for (name, narrow, wide) in [("K3", k3(0.15), k3(0.3)), ("K4", k4(0.15), k4(0.3))] {
        assert!(narrow.is_finite() && wide.is_finite());
        assert!(wide <= 1.1 * narrow, "{name}: {narrow} -> {wide}");
    }
}

#[test]
fn constants_are_stable_in_sample_size() {
    let (basis, blocks) = model();
    let k3 = [500, 2000].map(|s| check_k3_bound(&blocks, &basis, N, 0.25, s, 2).unwrap().empirical_constant.unwrap());
    let k4 = [500, 2000].map(|s| check_k4_bound(&blocks, &basis, N, 0.25, s, 2).unwrap().empirical_constant.unwrap());
    for (name, [a, b]) in [("K3", k3), ("K4", k4)] {
        assert!(b > 0.0 && (b - a).abs() / b <= 0.10, "{name}: {a} vs {b}");
    }
}
