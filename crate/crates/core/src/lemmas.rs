//! Randomized checks of the operator inequalities for the kernel blocks.
//!
//! Every sample draws standard normal amplitudes in one or two number sectors
//! and normalizes the combined vector. Sample `i` uses its own ChaCha8 stream,
//! so reports do not depend on evaluation order.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::fock::FockBasis;
use crate::grid::Grid1D;
use crate::hamiltonian::{assemble_blocks, plane_wave_kernels, Blocks};
use crate::hartree::HartreeSolution;
use crate::potentials::{residual_delta, yukawa_split, PairPotential};
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// Absolute slack on `RHS - LHS`.
pub const VIOLATION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemmaId {
    K1,
    K2,
    K3,
    K4,
    K2Coulomb,
    K0Gap,
}

impl LemmaId {
    pub fn name(self) -> &'static str {
        match self {
            LemmaId::K1 => "k1",
            LemmaId::K2 => "k2",
            LemmaId::K3 => "k3",
            LemmaId::K4 => "k4",
            LemmaId::K2Coulomb => "k2c",
            LemmaId::K0Gap => "gap",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [LemmaId::K1, LemmaId::K2, LemmaId::K3, LemmaId::K4, LemmaId::K2Coulomb, LemmaId::K0Gap]
            .into_iter()
            .find(|id| id.name() == name)
    }

    /// Lemmas stated with explicit constants must show zero violations.
    pub fn explicit(self) -> bool {
        !matches!(self, LemmaId::K3 | LemmaId::K4)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LemmaParameters {
    pub n_particles: Option<usize>,
    pub modes: usize,
    pub cutoff: usize,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub kappa: Option<f64>,
}

/// A sample that broke an inequality, kept for replay.
#[derive(Debug, Clone, PartialEq)]
pub struct FailingSample {
    pub index: usize,
    pub ell: usize,
    pub margin: f64,
    pub amplitudes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub lemma: LemmaId,
    pub samples: usize,
    pub seed: u64,
    pub violations: usize,
    /// `min (RHS - LHS)` over samples; zero for C-form lemmas, which report constants instead.
    pub worst_margin: f64,
    /// Smallest `C` making a C-form inequality hold on every sample.
    pub empirical_constant: Option<f64>,
    /// Smallest `C` when the same constant multiplies both sector terms.
    pub fit_constant: Option<f64>,
    pub parameters: LemmaParameters,
    /// Additional named quantities, e.g. `nu` and `delta(kappa)` values.
    pub extras: Vec<(String, f64)>,
    pub failure: Option<FailingSample>,
}

impl LemmaReport {
    fn new(lemma: LemmaId, samples: usize, seed: u64, parameters: LemmaParameters) -> Self {
        Self {
            lemma,
            samples,
            seed,
            violations: 0,
            worst_margin: f64::INFINITY,
            empirical_constant: None,
            fit_constant: None,
            parameters,
            extras: Vec::new(),
            failure: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.empirical_constant.is_none_or(f64::is_finite)
    }

    fn record(&mut self, index: usize, ell: usize, margin: f64, amplitudes: impl FnOnce() -> Vec<f64>) {
        self.worst_margin = self.worst_margin.min(margin);
        if margin < -VIOLATION_TOLERANCE {
            self.violations += 1;
            if self.failure.is_none() {
                self.failure = Some(FailingSample { index, ell, margin, amplitudes: amplitudes() });
            }
        }
    }

    fn absorb(&mut self, outcomes: Vec<Outcome>) {
        for o in outcomes {
            let amplitudes = o.amplitudes;
            self.record(o.index, o.ell, o.margin, || amplitudes);
            if let Some(c) = o.constant {
                self.empirical_constant = Some(self.empirical_constant.unwrap_or(0.0).max(c));
            }
            if let Some(c) = o.fit {
                self.fit_constant = Some(self.fit_constant.unwrap_or(0.0).max(c));
            }
        }
    }
}

struct Outcome {
    index: usize,
    ell: usize,
    margin: f64,
    constant: Option<f64>,
    fit: Option<f64>,
    amplitudes: Vec<f64>,
}

impl Outcome {
    fn new(index: usize, ell: usize, margin: f64, x: Vec<f64>) -> Self {
        // keep the vector only when it is needed for replay
        let amplitudes = if margin < -VIOLATION_TOLERANCE { x } else { Vec::new() };
        Self { index, ell, margin, constant: None, fit: None, amplitudes }
    }
}

fn map_samples<F>(count: usize, f: F) -> Vec<Outcome>
where
    F: Fn(usize) -> Outcome + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Full-length vector with Gaussian amplitudes on the listed sectors, normalized.
pub fn random_sector_vector(basis: &FockBasis, sectors: &[usize], seed: u64, index: usize) -> Vec<f64> {
    let mut rng = sample_rng(seed, index);
    let mut x = vec![0.0; basis.dim()];
    for &ell in sectors {
        for a in &mut x[basis.sector_range(ell)] {
            let z: f64 = StandardNormal.sample(&mut rng);
            *a = z;
        }
    }
    let norm = sqrt(x.iter().map(|a| a * a).sum::<f64>());
    if norm > 0.0 {
        x.iter_mut().for_each(|a| *a /= norm);
    }
    x
}

fn sector_norm2(basis: &FockBasis, x: &[f64], ell: usize) -> f64 {
    x[basis.sector_range(ell)].iter().map(|a| a * a).sum()
}

/// `<x^(to), B x^(from)>` restricted to the two sectors.
fn sector_form(basis: &FockBasis, b: &CsrMatrix, x: &[f64], to: usize, from: usize) -> f64 {
    let range = basis.sector_range(from);
    let mut y = vec![0.0; x.len()];
    y[range.clone()].copy_from_slice(&x[range]);
    b.bilinear_rows(basis.sector_range(to), x, &y)
}

fn check_blocks(blocks: &Blocks, basis: &FockBasis) -> Result<()> {
    if blocks.dim() != basis.dim() || blocks.cutoff != basis.cutoff() {
        return Err(Error::InvalidParameter("blocks were assembled on a different basis".into()));
    }
    Ok(())
}

fn parameters(basis: &FockBasis) -> LemmaParameters {
    LemmaParameters { modes: basis.modes(), cutoff: basis.cutoff(), ..Default::default() }
}

/// `|<x, K1 x>| <= ||v^2 * phi^2||_inf^(1/2) l ||x||^2` on single sectors.
pub fn check_k1_bound(
    blocks: &Blocks,
    basis: &FockBasis,
    sol: &HartreeSolution,
    v: &PairPotential,
    samples: usize,
    seed: u64,
) -> Result<LemmaReport> {
    check_blocks(blocks, basis)?;
    let constant = sqrt(sol.squared_mean_field_sup(v));
    let cutoff = basis.cutoff();
    let outcomes = map_samples(samples, |index| {
        let ell = index % (cutoff + 1);
        let x = random_sector_vector(basis, &[ell], seed, index);
        let lhs = sector_form(basis, &blocks.k1, &x, ell, ell).abs();
        let rhs = constant * ell as f64 * sector_norm2(basis, &x, ell);
        Outcome::new(index, ell, rhs - lhs, x)
    });
    let mut report = LemmaReport::new(LemmaId::K1, samples, seed, parameters(basis));
    report.extras.push(("sup_sqrt_v2_phi2".into(), constant));
    report.absorb(outcomes);
    Ok(report)
}

/// `4 |<x^(l), K2 x^(l-2)>| <= g(l) + g(l-2) + v(0) ||x^(l-2)||^2` with
/// `g(l) = <x^(l), K1 x^(l)>`, and the same bound through the adjoint block.
pub fn check_k2_bound(
    blocks: &Blocks,
    basis: &FockBasis,
    v: &PairPotential,
    samples: usize,
    seed: u64,
) -> Result<LemmaReport> {
    check_blocks(blocks, basis)?;
    let cutoff = basis.cutoff();
    if cutoff < 2 {
        return Err(Error::InvalidParameter("pair check needs a cutoff of at least 2".into()));
    }
    let v0 = v.at_origin();
    let adjoint = blocks.k2.transpose();
    let outcomes = map_samples(samples, |index| {
        let ell = 2 + index % (cutoff - 1);
        let x = random_sector_vector(basis, &[ell, ell - 2], seed, index);
        let g = |l| sector_form(basis, &blocks.k1, &x, l, l);
        let tail = g(ell) + g(ell - 2) + v0 * sector_norm2(basis, &x, ell - 2);
        let direct = 4.0 * sector_form(basis, &blocks.k2, &x, ell, ell - 2).abs();
        let through_adjoint = 4.0 * sector_form(basis, &adjoint, &x, ell - 2, ell).abs();
        let margin = (tail - direct).min(tail - through_adjoint);
        Outcome::new(index, ell, margin, x)
    });
    let mut report = LemmaReport::new(LemmaId::K2, samples, seed, parameters(basis));
    report.extras.push(("v0".into(), v0));
    report.absorb(outcomes);
    Ok(report)
}

fn sector_limit(basis: &FockBasis, n_particles: usize, delta: f64) -> Result<(f64, usize)> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1], got {delta}")));
    }
    let dn = delta * n_particles as f64;
    Ok((dn, (libm::floor(dn) as usize).min(basis.cutoff())))
}

/// Smallest `C` with `|<x^(l), K3 x^(l-1)>| <= (dN)^(1/2) (C l ||x^(l)||^2 + (l-1) ||x^(l-1)||^2)`
/// for `l <= dN`.
///
/// Only `x^(l-1) = w` is sampled. Both sides are homogeneous in each sector
/// separately, so the supremum over `x^(l)` and over the two amplitudes is
/// taken exactly: the worst `x^(l)` is parallel to `K3 w`, and
/// `ab s <= C l a^2 + (l-1) b^2` for all `a, b` iff `C >= s^2 / (4 l (l-1))`
/// with `s = ||K3 w|| / (dN)^(1/2)`. At `l = 1` the right side has no lower
/// term, so any nonzero `K3 w` (there should be none) makes `C` infinite.
///
/// `fit_constant` is the same supremum with one `C` on both terms,
/// `s / (2 (l (l-1))^(1/2))`.
pub fn check_k3_bound(
    blocks: &Blocks,
    basis: &FockBasis,
    n_particles: usize,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<LemmaReport> {
    check_blocks(blocks, basis)?;
    let (dn, top) = sector_limit(basis, n_particles, delta)?;
    if top < 1 {
        return Err(Error::InvalidParameter("delta N admits no sector with l >= 1".into()));
    }
    let outcomes = map_samples(samples, |index| {
        let ell = 1 + index % top;
        let w = random_sector_vector(basis, &[ell - 1], seed, index);
        let image = blocks.k3.apply(&w);
        let s2 = sector_norm2(basis, &image, ell) / dn;
        let mut o = Outcome::new(index, ell, 0.0, Vec::new());
        if ell == 1 {
            let c = if s2 > 0.0 { f64::INFINITY } else { 0.0 };
            o.constant = Some(c);
            o.fit = Some(c);
        } else {
            let pairs = (ell * (ell - 1)) as f64;
            o.constant = Some(s2 / (4.0 * pairs));
            o.fit = Some(sqrt(s2 / pairs) / 2.0);
        }
        o
    });
    let mut report = LemmaReport::new(LemmaId::K3, samples, seed, parameters(basis));
    report.parameters.n_particles = Some(n_particles);
    report.parameters.delta = Some(delta);
    report.absorb(outcomes);
    Ok(report)
}

/// Smallest `C` with `|<x^(l), K4 x^(l)>| <= C dN l ||x^(l)||^2` for `l <= dN`.
pub fn check_k4_bound(
    blocks: &Blocks,
    basis: &FockBasis,
    n_particles: usize,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<LemmaReport> {
    check_blocks(blocks, basis)?;
    let (dn, top) = sector_limit(basis, n_particles, delta)?;
    let outcomes = map_samples(samples, |index| {
        let ell = index % (top + 1);
        let x = random_sector_vector(basis, &[ell], seed, index);
        let lhs = sector_form(basis, &blocks.k4, &x, ell, ell).abs();
        let scale = dn * ell as f64 * sector_norm2(basis, &x, ell);
        let mut o = Outcome::new(index, ell, 0.0, Vec::new());
        // l <= 1 has a vanishing left side, so any C works there
        o.constant = Some(if scale > 0.0 { lhs / scale } else { 0.0 });
        o
    });
    let mut report = LemmaReport::new(LemmaId::K4, samples, seed, parameters(basis));
    report.parameters.n_particles = Some(n_particles);
    report.parameters.delta = Some(delta);
    report.absorb(outcomes);
    Ok(report)
}

/// `K0 >= tau N` sector by sector, from the diagonal of `K0`.
pub fn check_k0_gap(blocks: &Blocks, basis: &FockBasis, tau: f64) -> Result<LemmaReport> {
    check_blocks(blocks, basis)?;
    let mut report = LemmaReport::new(LemmaId::K0Gap, basis.cutoff() + 1, 0, parameters(basis));
    for ell in 0..=basis.cutoff() {
        let lowest = basis.sector_range(ell).map(|i| blocks.k0.get(i, i)).fold(f64::INFINITY, f64::min);
        let margin = lowest - tau * ell as f64;
        report.record(ell, ell, margin, || {
            let mut x = vec![0.0; basis.dim()];
            if let Some(i) = basis.sector_range(ell).find(|&i| blocks.k0.get(i, i) == lowest) {
                x[i] = 1.0;
            }
            x
        });
    }
    report.extras.push(("tau".into(), tau));
    Ok(report)
}

/// Inputs of the Coulomb pair check on the one-dimensional torus surrogate:
/// the condensate is the constant `1/sqrt(L)` and the modes are plane waves
/// with the given momenta.
#[derive(Debug, Clone, PartialEq)]
pub struct CoulombSurrogate {
    pub lambda: f64,
    pub grid: Grid1D,
    pub momenta: Vec<i64>,
}

/// Per-`kappa` data of the split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitLevel {
    pub kappa: f64,
    /// `||(v_kappa^perp)^2 * phi^2||_inf^(1/2)`.
    pub delta: f64,
    /// `sum_{p != 0} vhat_kappa(p) / L`, the pair constant of the Yukawa part.
    pub nu_kappa: f64,
}

impl CoulombSurrogate {
    fn blocks(&self, v: &PairPotential, basis: &FockBasis) -> Result<Blocks> {
        let length = self.grid.length();
        let energies: Vec<f64> = self
            .momenta
            .iter()
            .map(|&p| {
                let k = 2.0 * core::f64::consts::PI * p as f64 / length;
                k * k
            })
            .collect();
        assemble_blocks(&plane_wave_kernels(v, length, &energies, &self.momenta), basis)
    }

    /// `delta(kappa)` and `nu_kappa` along the sequence; `delta` must strictly decrease.
    pub fn levels(&self, kappas: &[f64]) -> Result<Vec<SplitLevel>> {
        let length = self.grid.length();
        let rho = vec![1.0 / length; self.grid.len()];
        let mut out: Vec<SplitLevel> = Vec::with_capacity(kappas.len());
        for &kappa in kappas {
            let split = yukawa_split(self.lambda, kappa)?.on_torus(length)?;
            let delta = residual_delta(&split, &rho, &self.grid);
            let nu_kappa = split.yukawa.at_origin() - split.yukawa.coefficient(0) / length;
            if let Some(previous) = out.last() {
                if !(delta < previous.delta) {
                    return Err(Error::NonMonotoneResidual {
                        kappa,
                        value: delta,
                        previous_kappa: previous.kappa,
                        previous: previous.delta,
                    });
                }
            }
            out.push(SplitLevel { kappa, delta, nu_kappa });
        }
        Ok(out)
    }
}

/// Split-based pair bound for the Coulomb kernel,
/// `4 |<x^(l), K2 x^(l-2)>| <= g(l) + g(l-2) + nu ||x^(l-2)||^2 + eps (f(l-2) + f(l))`,
/// with `kappa` the first level where `2 delta(kappa) <= eps` and
/// `nu = nu_kappa + 4 delta(kappa)`. Also checks the two ingredients: the pair
/// bound for the Yukawa part and `|<x^(l), K2^perp x^(l-2)>| <= delta l ||x^(l)|| ||x^(l-2)||`.
pub fn check_k2_coulomb(
    surrogate: &CoulombSurrogate,
    kappas: &[f64],
    basis: &FockBasis,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<LemmaReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    if basis.cutoff() < 2 || basis.modes() != surrogate.momenta.len() {
        return Err(Error::InvalidParameter("basis does not match the surrogate modes".into()));
    }
    let levels = surrogate.levels(kappas)?;
    let level = *levels.iter().find(|l| 2.0 * l.delta <= epsilon).ok_or_else(|| {
        Error::InvalidParameter(format!("no kappa in the sequence reaches 2 delta(kappa) <= {epsilon}"))
    })?;
    let nu = level.nu_kappa + 4.0 * level.delta;
    let length = surrogate.grid.length();
    let split = yukawa_split(surrogate.lambda, level.kappa)?.on_torus(length)?;
    let coulomb = PairPotential::coulomb(surrogate.lambda)?.on_torus(length)?;
    let full = surrogate.blocks(&coulomb, basis)?;
    let short = surrogate.blocks(&split.yukawa, basis)?;
    let long = surrogate.blocks(&split.complement, basis)?;

    let cutoff = basis.cutoff();
    let outcomes = map_samples(samples, |index| {
        let ell = 2 + index % (cutoff - 1);
        let x = random_sector_vector(basis, &[ell, ell - 2], seed, index);
        let (a, b) = (sector_norm2(basis, &x, ell), sector_norm2(basis, &x, ell - 2));
        let g = |blocks: &Blocks, l| sector_form(basis, &blocks.k1, &x, l, l);
        let f = |l: usize, n2: f64| l as f64 * n2;

        let combined_lhs = 4.0 * sector_form(basis, &full.k2, &x, ell, ell - 2).abs();
        let combined_rhs = g(&full, ell) + g(&full, ell - 2) + nu * b + epsilon * (f(ell - 2, b) + f(ell, a));
        let yukawa_lhs = 4.0 * sector_form(basis, &short.k2, &x, ell, ell - 2).abs();
        let yukawa_rhs = g(&short, ell) + g(&short, ell - 2) + level.nu_kappa * b;
        let remainder_lhs = sector_form(basis, &long.k2, &x, ell, ell - 2).abs();
        let remainder_rhs = level.delta * ell as f64 * sqrt(a * b);
        let margin = (combined_rhs - combined_lhs).min(yukawa_rhs - yukawa_lhs).min(remainder_rhs - remainder_lhs);
        Outcome::new(index, ell, margin, x)
    });
    let mut params = parameters(basis);
    params.epsilon = Some(epsilon);
    params.kappa = Some(level.kappa);
    let mut report = LemmaReport::new(LemmaId::K2Coulomb, samples, seed, params);
    report.extras.push(("nu".into(), nu));
    report.extras.push(("nu_kappa".into(), level.nu_kappa));
    for l in &levels {
        report.extras.push((format!("delta({})", l.kappa), l.delta));
    }
    report.absorb(outcomes);
    Ok(report)
}
