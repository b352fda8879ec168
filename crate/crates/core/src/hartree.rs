//! Hartree minimization, the mean-field operator and the excitation modes.
//!
//! Grid functions are nodal values; inner products use the uniform grid
//! weight, so every symmetric matrix below is self-adjoint in the weighted
//! inner product.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{cos, exp, sqrt};
use nalgebra::{Complex, DMatrix, DVector};

use crate::grid::{Boundary, Grid1D};
use crate::potentials::{interaction_matrix, PairPotential, PotentialClass};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HartreeProblem {
    grid: Grid1D,
    v_ext: Vec<f64>,
    potential: PairPotential,
}

impl HartreeProblem {
    pub fn new(grid: Grid1D, v_ext: Vec<f64>, potential: PairPotential) -> Result<Self> {
        if v_ext.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "external potential has {} values for a grid of {}",
                v_ext.len(),
                grid.len()
            )));
        }
        if v_ext.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("external potential must be finite".into()));
        }
        if potential.class() != PotentialClass::BoundedPositiveType {
            return Err(Error::WrongPotentialClass { expected: "bounded-positive-type" });
        }
        Ok(Self { grid, v_ext, potential })
    }

    /// Torus without external potential.
    pub fn homogeneous(grid: Grid1D, potential: PairPotential) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![0.0; n], potential)
    }

    /// `V(x) = omega^2 (x - L/2)^2` on the grid.
    pub fn quadratic_trap(grid: Grid1D, omega: f64, potential: PairPotential) -> Result<Self> {
        let centre = 0.5 * grid.length();
        let v_ext = grid.points().iter().map(|&x| omega * omega * (x - centre) * (x - centre)).collect();
        Self::new(grid, v_ext, potential)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn v_ext(&self) -> &[f64] {
        &self.v_ext
    }

    pub fn potential(&self) -> &PairPotential {
        &self.potential
    }

    /// Periodic grid with constant external potential.
    pub fn is_homogeneous(&self) -> bool {
        self.grid.boundary() == Boundary::Periodic && self.v_ext.iter().all(|&v| v == self.v_ext[0])
    }

    /// `-Delta + V_ext` as a dense matrix.
    pub fn one_body(&self) -> DMatrix<f64> {
        let mut a = laplacian(&self.grid);
        for (i, &v) in self.v_ext.iter().enumerate() {
            a[(i, i)] += v;
        }
        a
    }

    /// `E[u] = <u, (-Delta + V) u> + 1/2 <u, (v * u^2) u>`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let interaction = interaction_matrix(&self.potential, &self.grid);
        let one_body = self.one_body();
        energy_with(&self.grid, &one_body, &interaction, u)
    }
}

/// Minus the Laplacian: spectral on periodic grids, central differences with
/// zero ghost values on hard-wall grids.
pub fn laplacian(grid: &Grid1D) -> DMatrix<f64> {
    let n = grid.len();
    let mut d = DMatrix::zeros(n, n);
    match grid.boundary() {
        Boundary::Periodic => {
            let lo = -(n as i64) / 2 + 1;
            let hi = n as i64 / 2;
            let kappa = 2.0 * PI / grid.length();
            let column: Vec<f64> = (0..n)
                .map(|shift| {
                    (lo..=hi)
                        .map(|k| {
                            let q = kappa * k as f64;
                            q * q * cos(2.0 * PI * (k * shift.min(n - shift) as i64) as f64 / n as f64)
                        })
                        .sum::<f64>()
                        / n as f64
                })
                .collect();
            for a in 0..n {
                for b in 0..n {
                    d[(a, b)] = column[(a + n - b) % n];
                }
            }
        }
        Boundary::HardWall => {
            let h2 = grid.spacing() * grid.spacing();
            for i in 0..n {
                d[(i, i)] = 2.0 / h2;
                if i > 0 {
                    d[(i, i - 1)] = -1.0 / h2;
                }
                if i + 1 < n {
                    d[(i, i + 1)] = -1.0 / h2;
                }
            }
        }
    }
    d
}

fn convolve(grid: &Grid1D, interaction: &DMatrix<f64>, u: &[f64]) -> Vec<f64> {
    let w = grid.weight();
    let rho = DVector::from_iterator(u.len(), u.iter().map(|x| x * x));
    (interaction * rho).iter().map(|x| w * x).collect()
}

fn energy_with(grid: &Grid1D, one_body: &DMatrix<f64>, interaction: &DMatrix<f64>, u: &[f64]) -> f64 {
    let uv = DVector::from_column_slice(u);
    let kinetic = grid.weight() * uv.dot(&(one_body * &uv));
    let mean = convolve(grid, interaction, u);
    let pair: f64 = grid.weight() * u.iter().zip(&mean).map(|(x, m)| x * x * m).sum::<f64>();
    kinetic + 0.5 * pair
}

#[derive(Debug, Clone, PartialEq)]
pub struct HartreeOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting point; the ground state of `-Delta + V_ext` when absent.
    pub initial: Option<Vec<f64>>,
}

impl Default for HartreeOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 500, initial: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HartreeSolution {
    pub grid: Grid1D,
    pub phi: Vec<f64>,
    pub e_h: f64,
    /// Lagrange multiplier of the stationarity equation.
    pub mu: f64,
    /// `v * phi^2` on the grid.
    pub mean_field: Vec<f64>,
    /// Mean-field operator `h`.
    pub h: DMatrix<f64>,
    pub tau: f64,
    pub iterations: usize,
    pub residual: f64,
    /// Hartree energy after every accepted step, starting with the initial guess.
    pub energy_trace: Vec<f64>,
    pub homogeneous: bool,
    gap: GapSpectrum,
}

impl HartreeSolution {
    /// Eigenvalues of `qhq` on the complement of `phi`, ascending.
    pub fn gap_spectrum(&self) -> &[f64] {
        &self.gap.values
    }

    /// The `m` lowest eigenmodes of `qhq`.
    pub fn eigenmodes(&self, m: usize) -> Result<ModeBasis> {
        self.gap.modes(&self.grid, m)
    }

    /// Plane waves `exp(2 pi i p x / L) / sqrt(L)` ordered `p = 1, -1, 2, -2, ...`;
    /// homogeneous tori only.
    pub fn plane_wave_modes(&self, m: usize) -> Result<ModeBasis> {
        if !self.homogeneous {
            return Err(Error::NotHomogeneous);
        }
        let modes = ModeBasis::plane_waves(&self.grid, m)?;
        modes.validate(&self.grid, &self.phi, &self.h)?;
        Ok(modes)
    }

    /// Plane waves on homogeneous tori, eigenmodes of `qhq` otherwise.
    pub fn modes(&self, m: usize) -> Result<ModeBasis> {
        if self.homogeneous {
            self.plane_wave_modes(m)
        } else {
            self.eigenmodes(m)
        }
    }

    /// `sup_x (v^2 * phi^2)(x)` by grid quadrature.
    pub fn squared_mean_field_sup(&self, v: &PairPotential) -> f64 {
        let rho: Vec<f64> = self.phi.iter().map(|p| p * p).collect();
        crate::potentials::squared_convolution_sup(v, &rho, &self.grid)
    }
}

pub fn solve_hartree(problem: &HartreeProblem, options: &HartreeOptions) -> Result<HartreeSolution> {
    if !(options.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", options.tol)));
    }
    let grid = &problem.grid;
    let n = grid.len();
    let one_body = problem.one_body();
    let interaction = interaction_matrix(&problem.potential, grid);

    let mut u = match &options.initial {
        Some(start) => {
            if start.len() != n {
                return Err(Error::InvalidParameter("initial guess has the wrong length".into()));
            }
            start.clone()
        }
        None => {
            let (_, vectors) = sorted_eigen(one_body.clone());
            vectors.column(0).iter().copied().collect()
        }
    };
    normalize(grid, &mut u)?;

    let mut energy = energy_with(grid, &one_body, &interaction, &u);
    let mut trace = vec![energy];
    let mut step = 1.0;
    let mut iterations = 0;
    let mut residual;
    loop {
        let mean = convolve(grid, &interaction, &u);
        let a = with_diagonal(&one_body, &mean);
        residual = stationarity_residual(grid, &a, &u);
        if residual <= options.tol {
            break;
        }
        if iterations >= options.max_iter {
            return Err(Error::HartreeNotConverged { iterations, residual });
        }
        iterations += 1;

        let (values, vectors) = sorted_eigen(a);
        let coefficients = vectors.transpose() * DVector::from_column_slice(&u);
        loop {
            let mut trial = DVector::zeros(n);
            for k in 0..n {
                let damping = exp(-step * (values[k] - values[0]));
                if damping > 0.0 {
                    trial.axpy(damping * coefficients[k], &vectors.column(k), 1.0);
                }
            }
            let mut candidate: Vec<f64> = trial.iter().copied().collect();
            normalize(grid, &mut candidate)?;
            let trial_energy = energy_with(grid, &one_body, &interaction, &candidate);
            if trial_energy <= energy + 1e-14 * energy.abs().max(1.0) {
                u = candidate;
                energy = trial_energy;
                trace.push(energy);
                step = (2.0 * step).min(1e8);
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                let mean = convolve(grid, &interaction, &u);
                let residual = stationarity_residual(grid, &with_diagonal(&one_body, &mean), &u);
                return Err(Error::HartreeNotConverged { iterations, residual });
            }
        }
    }

    let max = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let min = u.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    if min < -1e-10 * max {
        return Err(Error::DensityCollapse { min });
    }

    let mean_field = convolve(grid, &interaction, &u);
    let (h, mu) = mean_field_operator(grid, &one_body, &mean_field, &u);
    let gap = GapSpectrum::compute(grid, &h, &u)?;
    let tau = gap.values[0];
    if !(tau > 0.0) {
        return Err(Error::NoGap { tau });
    }
    Ok(HartreeSolution {
        grid: grid.clone(),
        e_h: energy,
        mu,
        mean_field,
        h,
        tau,
        iterations,
        residual,
        energy_trace: trace,
        homogeneous: problem.is_homogeneous(),
        gap,
        phi: u,
    })
}

fn with_diagonal(base: &DMatrix<f64>, diag: &[f64]) -> DMatrix<f64> {
    let mut a = base.clone();
    for (i, &d) in diag.iter().enumerate() {
        a[(i, i)] += d;
    }
    a
}

fn stationarity_residual(grid: &Grid1D, a: &DMatrix<f64>, u: &[f64]) -> f64 {
    let uv = DVector::from_column_slice(u);
    let au = a * &uv;
    let mu = grid.weight() * uv.dot(&au);
    let r: Vec<f64> = au.iter().zip(u).map(|(x, y)| x - mu * y).collect();
    grid.norm(&r)
}

fn normalize(grid: &Grid1D, u: &mut [f64]) -> Result<()> {
    let norm = grid.norm(u);
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidParameter("cannot normalize a zero or non-finite function".into()));
    }
    let sign = if u.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    for x in u.iter_mut() {
        *x *= sign / norm;
    }
    Ok(())
}

/// `h = -Delta + V_ext + v * phi^2 - c`, with `c = <phi, (-Delta + V_ext + v * phi^2) phi>`.
/// Returns `(h, c)`.
pub fn mean_field_operator(
    grid: &Grid1D,
    one_body: &DMatrix<f64>,
    mean_field: &[f64],
    phi: &[f64],
) -> (DMatrix<f64>, f64) {
    let mut h = with_diagonal(one_body, mean_field);
    let p = DVector::from_column_slice(phi);
    let c = grid.weight() * p.dot(&(&h * &p));
    for i in 0..h.nrows() {
        h[(i, i)] -= c;
    }
    (h, c)
}

/// Symmetric eigendecomposition with ascending eigenvalues.
pub(crate) fn sorted_eigen(a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = a.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

#[derive(Debug, Clone, PartialEq)]
struct GapSpectrum {
    values: Vec<f64>,
    /// Nodal eigenfunctions, weighted-normalized, one per column.
    vectors: DMatrix<f64>,
}

impl GapSpectrum {
    fn compute(grid: &Grid1D, h: &DMatrix<f64>, phi: &[f64]) -> Result<Self> {
        let n = grid.len();
        let sw = sqrt(grid.weight());
        // Householder reflector sending sqrt(w) phi to a multiple of e_0;
        // its remaining columns span the complement.
        let mut v: Vec<f64> = phi.iter().map(|p| sw * p).collect();
        let norm = sqrt(v.iter().map(|x| x * x).sum::<f64>());
        v[0] += norm.copysign(v[0]);
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let basis = DMatrix::from_fn(n, n - 1, |r, c| {
            let col = c + 1;
            let delta = if r == col { 1.0 } else { 0.0 };
            delta - 2.0 * v[r] * v[col] / vv
        });
        let reduced = basis.transpose() * h * &basis;
        let reduced = (&reduced + reduced.transpose()) * 0.5;
        let (values, y) = sorted_eigen(reduced);
        let vectors = (&basis * y) / sw;
        Ok(Self { values, vectors })
    }

    fn modes(&self, grid: &Grid1D, m: usize) -> Result<ModeBasis> {
        if m == 0 || m > self.values.len() {
            return Err(Error::InvalidParameter(format!(
                "mode count must be between 1 and {}, got {m}",
                self.values.len()
            )));
        }
        let functions =
            (0..m).map(|j| self.vectors.column(j).iter().map(|&x| Complex::new(x, 0.0)).collect()).collect();
        Ok(ModeBasis { energies: self.values[..m].to_vec(), momenta: None, functions, weight: grid.weight() })
    }
}

/// `(tau, modes)`: the smallest eigenvalue of `qhq` on the complement of `phi`
/// and its `m` lowest eigenmodes.
pub fn spectral_gap(grid: &Grid1D, h: &DMatrix<f64>, phi: &[f64], m: usize) -> Result<(f64, ModeBasis)> {
    if m + 1 > grid.len() {
        return Err(Error::InvalidParameter(format!("need m <= n - 1, got m = {m}")));
    }
    let gap = GapSpectrum::compute(grid, h, phi)?;
    let tau = gap.values[0];
    if !(tau > 0.0) {
        return Err(Error::NoGap { tau });
    }
    Ok((tau, gap.modes(grid, m)?))
}

/// Orthonormal excitation modes with their one-body energies.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBasis {
    energies: Vec<f64>,
    momenta: Option<Vec<i64>>,
    functions: Vec<Vec<Complex<f64>>>,
    weight: f64,
}

impl ModeBasis {
    pub fn plane_waves(grid: &Grid1D, m: usize) -> Result<Self> {
        if grid.boundary() != Boundary::Periodic {
            return Err(Error::NotHomogeneous);
        }
        let n = grid.len();
        if m == 0 || m / 2 + 1 > n / 2 {
            return Err(Error::InvalidParameter(format!("cannot resolve {m} plane waves on {n} points")));
        }
        let l = grid.length();
        let momenta: Vec<i64> =
            (0..m).map(|j| if j % 2 == 0 { j as i64 / 2 + 1 } else { -(j as i64 / 2 + 1) }).collect();
        let norm = 1.0 / sqrt(l);
        let functions = momenta
            .iter()
            .map(|&p| grid.points().iter().map(|&x| crate::polar(norm, 2.0 * PI * p as f64 * x / l)).collect())
            .collect();
        let energies = momenta
            .iter()
            .map(|&p| {
                let q = 2.0 * PI * p as f64 / l;
                q * q
            })
            .collect();
        Ok(Self { energies, momenta: Some(momenta), functions, weight: grid.weight() })
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn momenta(&self) -> Option<&[i64]> {
        self.momenta.as_deref()
    }

    pub fn function(&self, j: usize) -> &[Complex<f64>] {
        &self.functions[j]
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Largest deviation of the weighted Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            for j in 0..self.len() {
                let g: Complex<f64> =
                    self.functions[i].iter().zip(&self.functions[j]).map(|(a, b)| a.conj() * b).sum::<Complex<f64>>()
                        * self.weight;
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max(crate::modulus(g - Complex::new(target, 0.0)));
            }
        }
        worst
    }

    /// Largest `|<phi, u_j>|`.
    pub fn overlap_with(&self, phi: &[f64]) -> f64 {
        self.functions
            .iter()
            .map(|u| crate::modulus(u.iter().zip(phi).map(|(a, &p)| a * p).sum::<Complex<f64>>() * self.weight))
            .fold(0.0, f64::max)
    }

    /// Checks orthonormality, orthogonality to `phi` and the eigen-relation
    /// `h u_j = e_j u_j`.
    pub fn validate(&self, grid: &Grid1D, phi: &[f64], h: &DMatrix<f64>) -> Result<()> {
        let deviation = self.orthonormality_defect().max(self.overlap_with(phi));
        if deviation > 1e-12 {
            return Err(Error::ModesNotOrthonormal { deviation });
        }
        for (j, u) in self.functions.iter().enumerate() {
            let re = DVector::from_iterator(u.len(), u.iter().map(|z| z.re));
            let im = DVector::from_iterator(u.len(), u.iter().map(|z| z.im));
            let r_re = h * &re - &re * self.energies[j];
            let r_im = h * &im - &im * self.energies[j];
            let residual = sqrt(grid.weight() * (r_re.norm_squared() + r_im.norm_squared()));
            if residual > 1e-8 * self.energies[j].abs().max(1.0) {
                return Err(Error::NotAnEigenmode { index: j, residual });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::make_bounded_potential;

    fn band(grid: &Grid1D, height: f64, width: i64) -> PairPotential {
        make_bounded_potential((-width..=width).map(|k| (k, height)), grid).unwrap()
    }

    #[test]
    fn homogeneous_torus_constant_condensate() {
        let grid = Grid1D::periodic(64, 2.0 * PI).unwrap();
        let problem = HartreeProblem::homogeneous(grid.clone(), band(&grid, 1.0, 2)).unwrap();
        let sol = solve_hartree(&problem, &HartreeOptions::default()).unwrap();
        let expected = 1.0 / sqrt(2.0 * PI);
        for &p in &sol.phi {
            assert!((p - expected).abs() < 1e-10);
        }
        // vhat(0) / (2L) with vhat(0) = 1, L = 2 pi
        assert!((sol.e_h - 1.0 / (4.0 * PI)).abs() < 1e-12);
        let direct = problem.energy(&vec![expected; 64]);
        assert!((direct - 1.0 / (4.0 * PI)).abs() < 1e-12);
        assert!((sol.tau - 1.0).abs() < 1e-10);
    }

    #[test]
    fn homogeneous_mean_field_operator_is_laplacian() {
        let grid = Grid1D::periodic(32, 2.0 * PI).unwrap();
        let problem = HartreeProblem::homogeneous(grid.clone(), band(&grid, 2.0, 3)).unwrap();
        let sol = solve_hartree(&problem, &HartreeOptions::default()).unwrap();
        let d = laplacian(&grid);
        assert!((&sol.h - &d).amax() < 1e-12);
        assert!((&sol.h - sol.h.transpose()).amax() < 1e-14);
    }

    #[test]
    fn free_trap_gives_linear_ground_state() {
        let grid = Grid1D::hard_wall(96, 8.0).unwrap();
        let zero = PairPotential::zero(8.0).unwrap();
        let problem = HartreeProblem::quadratic_trap(grid.clone(), 1.0, zero).unwrap();
        let sol = solve_hartree(&problem, &HartreeOptions::default()).unwrap();
        let (values, vectors) = sorted_eigen(problem.one_body());
        let mut ground: Vec<f64> = vectors.column(0).iter().copied().collect();
        normalize(&grid, &mut ground).unwrap();
        for (a, b) in sol.phi.iter().zip(&ground) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!((sol.mu - values[0]).abs() < 1e-10);
        // h = -Delta + V - E0, so its spectrum starts at 0 and tau is the linear gap
        assert!((sol.tau - (values[1] - values[0])).abs() < 1e-9);
        let p = DVector::from_column_slice(&sol.phi);
        assert!((grid.weight() * p.dot(&(&sol.h * &p))).abs() < 1e-10);
    }

    #[test]
    fn interacting_trap_energy_decreases_and_modes_are_clean() {
        let grid = Grid1D::hard_wall(64, 8.0).unwrap();
        let v = band(&grid, 3.0, 3);
        let problem = HartreeProblem::quadratic_trap(grid.clone(), 0.8, v).unwrap();
        let sol = solve_hartree(&problem, &HartreeOptions::default()).unwrap();
        assert!(sol.energy_trace.windows(2).all(|w| w[1] <= w[0] + 1e-14 * w[0].abs().max(1.0)));
        assert!(sol.phi.iter().all(|&p| p > 0.0));
        assert!((grid.norm(&sol.phi) - 1.0).abs() < 1e-12);
        assert!(sol.tau > 0.0);
        let modes = sol.eigenmodes(6).unwrap();
        modes.validate(&grid, &sol.phi, &sol.h).unwrap();
        assert!((modes.energies()[0] - sol.tau).abs() < 1e-14);

        // a different starting point reaches the same condensate
        let start: Vec<f64> = grid.points().iter().map(|&x| 1.0 + 0.3 * libm::sin(x)).collect();
        let options = HartreeOptions { initial: Some(start), ..HartreeOptions::default() };
        let other = solve_hartree(&problem, &options).unwrap();
        for (a, b) in sol.phi.iter().zip(&other.phi) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn torus_gap_modes_span_first_shell() {
        let grid = Grid1D::periodic(64, 2.0 * PI).unwrap();
        let h = laplacian(&grid);
        let phi = vec![1.0 / sqrt(2.0 * PI); 64];
        let (tau, modes) = spectral_gap(&grid, &h, &phi, 4).unwrap();
        assert!((tau - 1.0).abs() < 1e-10);
        assert!(modes.orthonormality_defect() < 1e-12);
        assert!((modes.energies()[1] - 1.0).abs() < 1e-10);
        // the two lowest modes lie in span{cos x, sin x}
        for j in 0..2 {
            let u = modes.function(j);
            let c: f64 = grid.points().iter().zip(u).map(|(&x, z)| cos(x) * z.re).sum::<f64>() * grid.weight();
            let s: f64 = grid.points().iter().zip(u).map(|(&x, z)| libm::sin(x) * z.re).sum::<f64>() * grid.weight();
            assert!(((c * c + s * s) / PI - 1.0).abs() < 1e-10);
        }
        let waves = ModeBasis::plane_waves(&grid, 6).unwrap();
        assert_eq!(waves.momenta().unwrap(), &[1, -1, 2, -2, 3, -3]);
        waves.validate(&grid, &phi, &h).unwrap();
    }

    #[test]
    fn gap_requires_positive_tau() {
        let grid = Grid1D::periodic(16, 2.0 * PI).unwrap();
        let mut h = laplacian(&grid);
        for i in 0..16 {
            h[(i, i)] -= 2.0;
        }
        let phi = vec![1.0 / sqrt(2.0 * PI); 16];
        assert!(matches!(spectral_gap(&grid, &h, &phi, 2), Err(Error::NoGap { .. })));
    }
}
