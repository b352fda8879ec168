//! Number distribution of the ground state and its decay analysis.
//!
//! `f(l) = l P(l)` and the window sums `F_L(l) = sum_{k=l-L}^{l+L} f(k)`.
//! Negative `k` contribute nothing (there is no such sector); windows that
//! reach past the valid range are refused rather than padded.

use alloc::format;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use libm::{exp, log};

use crate::fock::{FockBasis, FockVector};
use crate::hamiltonian::{Blocks, ExcitationHamiltonian, Variant};
use crate::solver::{BogoliubovOracle, GroundState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileSource {
    Full,
    Bogoliubov,
    Oracle,
}

impl ProfileSource {
    pub fn name(self) -> &'static str {
        match self {
            ProfileSource::Full => "full",
            ProfileSource::Bogoliubov => "bogoliubov",
            ProfileSource::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayProfile {
    p: Vec<f64>,
    valid_max: usize,
    pub source: ProfileSource,
    /// Probability mass outside the computed sectors.
    pub deficit: f64,
}

impl DecayProfile {
    pub fn new(p: Vec<f64>, valid_max: usize, source: ProfileSource, deficit: f64) -> Result<Self> {
        if p.is_empty() || valid_max >= p.len() {
            return Err(Error::InvalidParameter(format!("valid range up to {valid_max} for {} sectors", p.len())));
        }
        if let Some(ell) = p.iter().position(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidParameter(format!("P({ell}) is negative or not finite")));
        }
        let total: f64 = p.iter().sum();
        if (total + deficit - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("sector weights sum to {total} with deficit {deficit}")));
        }
        Ok(Self { p, valid_max, source, deficit })
    }

    /// `P(l) = || chi^(l) ||^2`, valid up to `M - 4`.
    pub fn from_ground_state(basis: &FockBasis, gs: &GroundState, source: ProfileSource) -> Result<Self> {
        let vector = FockVector::new(basis, gs.vector.clone())?;
        let p = vector.sector_norms(basis);
        let valid_max = basis.cutoff().saturating_sub(4);
        Self::new(p, valid_max, source, 0.0)
    }

    /// Oracle laws are exact up to their truncation.
    pub fn from_oracle(oracle: &BogoliubovOracle) -> Result<Self> {
        let valid_max = oracle.distribution.len() - 1;
        Self::new(oracle.distribution.clone(), valid_max, ProfileSource::Oracle, oracle.mass_deficit)
    }

    pub fn with_valid_max(mut self, valid_max: usize) -> Result<Self> {
        if valid_max >= self.p.len() {
            return Err(Error::InvalidParameter(format!("valid range up to {valid_max} exceeds the profile")));
        }
        self.valid_max = valid_max;
        Ok(self)
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn valid_max(&self) -> usize {
        self.valid_max
    }

    pub fn f(&self, ell: i64) -> f64 {
        if ell < 0 {
            0.0
        } else {
            ell as f64 * self.p[ell as usize]
        }
    }

    /// `F_L(l)`; the upper window edge must stay in the valid range.
    pub fn window(&self, ell: i64, half_width: usize) -> Result<f64> {
        let top = ell + half_width as i64;
        if top > self.valid_max as i64 {
            return Err(Error::WindowOutOfRange { ell, valid_max: self.valid_max });
        }
        Ok((ell - half_width as i64..=top).map(|k| self.f(k)).sum())
    }

    /// `F_L(l)` for every `l` whose window fits, starting at `l = 0`.
    pub fn compute_fl(&self, half_width: usize) -> Vec<f64> {
        let last = self.valid_max as i64 - half_width as i64;
        (0..=last).map(|ell| self.window(ell, half_width).unwrap_or(0.0)).collect()
    }

    /// `F_{L+j}(l) >= F_L(l)` wherever both windows fit.
    pub fn windows_monotone(&self, max_half_width: usize) -> bool {
        (0..=self.valid_max as i64).all(|ell| {
            let mut previous = 0.0;
            for width in 0..=max_half_width {
                match self.window(ell, width) {
                    Ok(value) if value >= previous => previous = value,
                    Ok(_) => return false,
                    Err(_) => break,
                }
            }
            true
        })
    }

    /// Largest odd-sector weight.
    pub fn max_odd(&self) -> f64 {
        self.p.iter().skip(1).step_by(2).copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceReport {
    pub half_width: usize,
    /// `min_l [F_L(l+L) + F_L(l-L)] / F_L(l)`.
    pub sigma: f64,
    /// `(l, ratio)` for each checked `l`.
    pub margins: Vec<(usize, f64)>,
}

impl DifferenceReport {
    pub fn certifies(&self) -> bool {
        self.sigma > 2.0
    }
}

pub fn verify_difference_inequality(
    profile: &DecayProfile,
    half_width: usize,
    range: RangeInclusive<usize>,
) -> Result<DifferenceReport> {
    if half_width == 0 {
        return Err(Error::InvalidParameter("window half-width must be at least 1".into()));
    }
    let l = half_width as i64;
    let mut margins = Vec::new();
    let mut sigma = f64::INFINITY;
    for ell in range {
        let centre = profile.window(ell as i64, half_width)?;
        if centre == 0.0 {
            return Err(Error::DegenerateWindow { ell: ell as i64 });
        }
        let ratio =
            (profile.window(ell as i64 + l, half_width)? + profile.window(ell as i64 - l, half_width)?) / centre;
        sigma = sigma.min(ratio);
        margins.push((ell, ratio));
    }
    if margins.is_empty() {
        return Err(Error::TooFewPoints { points: 0 });
    }
    Ok(DifferenceReport { half_width, sigma, margins })
}

/// `mu(L) = min_l [f(l+L+2) + f(l+L+1) + f(l-L-1) + f(l-L-2)] / F_L(l)`.
pub fn window_mu(profile: &DecayProfile, half_width: usize, range: RangeInclusive<usize>) -> Result<f64> {
    let l = half_width as i64;
    let mut mu = f64::INFINITY;
    for ell in range {
        let e = ell as i64;
        if e + l + 2 > profile.valid_max() as i64 {
            return Err(Error::WindowOutOfRange { ell: e + l + 2, valid_max: profile.valid_max() });
        }
        let centre = profile.window(e, half_width)?;
        if centre == 0.0 {
            return Err(Error::DegenerateWindow { ell: e });
        }
        let edges = profile.f(e + l + 2) + profile.f(e + l + 1) + profile.f(e - l - 1) + profile.f(e - l - 2);
        mu = mu.min(edges / centre);
    }
    Ok(mu)
}

/// Envelope data of a sequence `G(j)`, `j = first..first + len`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexEnvelope {
    pub first: usize,
    pub sigma: f64,
    /// Location of the minimum of `G`.
    pub ell0: usize,
    /// `false` when the minimum sits on the last point of the range.
    pub ell0_interior: bool,
    /// Points checked against `G(j) <= G(first) / (sigma-1)^(j-first)`.
    pub decreasing_checks: usize,
    /// Pairs checked against `G(k) >= (sigma-1)^(k-j) G(j)`.
    pub growth_checks: usize,
    /// Whether the decreasing bound also held at the minimum itself.
    pub decreasing_at_ell0: bool,
}

/// Checks `(sigma-2) G(j) <= G(j+1) + G(j-1) - 2 G(j)` at interior points, then
/// verifies the decreasing envelope for `j < ell0` and the growth bound for
/// `ell0 < j <= k`, point by point.
pub fn exponential_certificate(g: &[f64], first: usize, sigma: f64) -> Result<ConvexEnvelope> {
    if !(sigma > 2.0) {
        return Err(Error::SigmaTooSmall { sigma });
    }
    if g.len() < 3 {
        return Err(Error::TooFewPoints { points: g.len() });
    }
    if let Some(i) = g.iter().position(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidParameter(format!("G({}) is negative", first + i)));
    }
    let scale = g.iter().copied().fold(0.0, f64::max);
    let slack = 1e-12 * scale;
    for i in 1..g.len() - 1 {
        let lhs = (sigma - 2.0) * g[i];
        let rhs = g[i + 1] + g[i - 1] - 2.0 * g[i];
        if lhs > rhs + slack {
            return Err(Error::InequalityViolated { index: first + i, lhs, rhs });
        }
    }
    let ell0 = (0..g.len()).fold(0, |best, i| if g[i] < g[best] { i } else { best });
    let q = sigma - 1.0;

    let mut decreasing_checks = 0;
    let mut power = 1.0;
    for i in 1..ell0 {
        power *= q;
        let bound = g[0] / power;
        if g[i] > bound * (1.0 + 1e-12) + slack * 1e-3 {
            return Err(Error::InequalityViolated { index: first + i, lhs: g[i], rhs: bound });
        }
        decreasing_checks += 1;
    }
    let decreasing_at_ell0 = ell0 == 0 || g[ell0] <= g[0] / (power * q) * (1.0 + 1e-12);

    let mut growth_checks = 0;
    for j in ell0 + 1..g.len() {
        let mut power = 1.0;
        for k in j..g.len() {
            let bound = power * g[j];
            if g[k] < bound * (1.0 - 1e-12) {
                return Err(Error::InequalityViolated { index: first + k, lhs: bound, rhs: g[k] });
            }
            growth_checks += 1;
            power *= q;
        }
    }
    Ok(ConvexEnvelope {
        first,
        sigma,
        ell0: first + ell0,
        ell0_interior: ell0 + 1 < g.len(),
        decreasing_checks,
        growth_checks,
        decreasing_at_ell0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayCertificate {
    /// Window half-width `L`; `G(j) = F_L(j L)`.
    pub half_width: usize,
    pub sigma: f64,
    pub mu: Option<f64>,
    /// Range of `j` covered by `G`.
    pub j_range: (usize, usize),
    /// Range of `l` on which the `P` envelope is verified.
    pub ell_range: (usize, usize),
    pub envelope: ConvexEnvelope,
    /// `P(l) <= c exp(-epsilon l)` on `ell_range`.
    pub c: f64,
    pub epsilon: f64,
}

impl DecayCertificate {
    /// Independent pointwise re-check of the `P` envelope.
    pub fn holds_for(&self, profile: &DecayProfile) -> bool {
        (self.ell_range.0..=self.ell_range.1)
            .all(|ell| profile.p()[ell] <= self.c * exp(-self.epsilon * ell as f64) * (1.0 + 1e-12))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub target_sigma: f64,
    pub max_half_width: usize,
    /// Fewest `G` points a certificate may rest on.
    pub min_points: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { target_sigma: 2.05, max_half_width: 10, min_points: 4 }
    }
}

/// `G(j) = F_L(j L)` for `j = 0..` while the window fits.
pub fn g_sequence(profile: &DecayProfile, half_width: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut j = 0;
    while let Ok(value) = profile.window((j * half_width) as i64, half_width) {
        out.push(value);
        j += 1;
    }
    out
}

/// Envelope for one window half-width: the `G` range starts at the smallest
/// `j` from which every interior ratio reaches the target.
pub fn certify_with(profile: &DecayProfile, half_width: usize, target_sigma: f64) -> Result<DecayCertificate> {
    if half_width == 0 {
        return Err(Error::InvalidParameter("window half-width must be at least 1".into()));
    }
    let g = g_sequence(profile, half_width);
    if g.len() < 3 {
        return Err(Error::TooFewPoints { points: g.len() });
    }
    let last = g.len() - 1;
    let mut ratios = Vec::with_capacity(g.len());
    ratios.push(f64::INFINITY);
    for j in 1..last {
        ratios.push(if g[j] > 0.0 { (g[j + 1] + g[j - 1]) / g[j] } else { 0.0 });
    }
    // smallest start whose interior ratios all reach the target
    let mut start = None;
    let mut sigma = f64::INFINITY;
    for first in (0..=last - 2).rev() {
        let r = ratios[first + 1];
        if r < target_sigma {
            break;
        }
        sigma = sigma.min(r);
        start = Some(first);
    }
    let first = start.ok_or(Error::SigmaTooSmall { sigma: ratios[1..last].iter().copied().fold(0.0, f64::max) })?;
    let envelope = exponential_certificate(&g[first..], first, sigma)?;

    let epsilon = log(sigma - 1.0) / half_width as f64;
    let c = g[first] * libm::pow(sigma - 1.0, first as f64 + 1.0);
    let lo = ((first.saturating_sub(1)) * half_width).max(1);
    let hi = ((envelope.ell0 - first).max(1) + first) * half_width;
    let hi = hi.min(profile.valid_max());
    let mu_hi = profile.valid_max().saturating_sub(half_width + 2);
    let mu_range = (first * half_width).max(1)..=(last * half_width).min(mu_hi);
    let mu = if mu_range.is_empty() { None } else { window_mu(profile, half_width, mu_range).ok() };
    let certificate =
        DecayCertificate { half_width, sigma, mu, j_range: (first, last), ell_range: (lo, hi), envelope, c, epsilon };
    if !certificate.holds_for(profile) {
        let ell = (lo..=hi).find(|&l| profile.p()[l] > c * exp(-epsilon * l as f64)).unwrap_or(lo);
        return Err(Error::InequalityViolated {
            index: ell,
            lhs: profile.p()[ell],
            rhs: c * exp(-epsilon * ell as f64),
        });
    }
    Ok(certificate)
}

/// Tries every `L = 1..=max_half_width` and keeps the certificate resting on
/// the most `G` points (smaller `L` on ties). A parity-alternating profile,
/// for instance, only certifies a short tail at `L = 1`.
pub fn certify(profile: &DecayProfile, options: &CertifyOptions) -> Result<DecayCertificate> {
    let mut best: Option<DecayCertificate> = None;
    let mut best_sigma = 0.0f64;
    for half_width in 1..=options.max_half_width {
        match certify_with(profile, half_width, options.target_sigma) {
            Ok(certificate) => {
                let points = certificate.j_range.1 - certificate.j_range.0 + 1;
                let current = best.as_ref().map_or(0, |b| b.j_range.1 - b.j_range.0 + 1);
                if points >= options.min_points.max(3) && points > current {
                    best = Some(certificate);
                }
            }
            Err(Error::SigmaTooSmall { sigma }) => best_sigma = best_sigma.max(sigma),
            Err(Error::TooFewPoints { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    best.ok_or(Error::SigmaTooSmall { sigma: best_sigma })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    All,
}

impl Parity {
    pub fn admits(self, ell: usize) -> bool {
        match self {
            Parity::Even => ell.is_multiple_of(2),
            Parity::Odd => !ell.is_multiple_of(2),
            Parity::All => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub c: f64,
    pub epsilon: f64,
    pub r_squared: f64,
    pub points: usize,
}

impl DecayFit {
    pub fn decays(&self) -> bool {
        self.epsilon > 0.0
    }
}

/// Least-squares line through `(l, ln P(l))` over the selected sectors.
pub fn fit_decay_rate(profile: &DecayProfile, range: RangeInclusive<usize>, parity: Parity) -> Result<DecayFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for ell in range.filter(|&l| parity.admits(l)) {
        let p =
            *profile.p().get(ell).ok_or(Error::WindowOutOfRange { ell: ell as i64, valid_max: profile.valid_max() })?;
        if !(p > 0.0) {
            return Err(Error::InvalidParameter(format!("P({ell}) = {p} has no logarithm")));
        }
        xs.push(ell as f64);
        ys.push(log(p));
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::TooFewPoints { points: n });
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x) * (y - intercept - slope * x)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(DecayFit { c: exp(intercept), epsilon: -slope, r_squared, points: n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub cut: usize,
    pub empty: bool,
    pub tail_weight: f64,
    /// `<chi>, (H - E) chi>> / ||chi>||^2`.
    pub rayleigh_tail: f64,
    /// `<chi>, K0 chi>> / ||chi>||^2`, bounded below by `tau (cut + 1)`.
    pub k0_tail: f64,
    pub k0_bound: f64,
    /// `|<chi>, K_i chi<=>|` for `i = 0..=4`.
    pub couplings: [f64; 5],
    /// `|<chi, H chi> - E|` reassembled from the two parts.
    pub identity_defect: f64,
}

/// Splits the ground state at `N = cut` and inspects how the parts couple.
pub fn tail_energy_check(
    h: &ExcitationHamiltonian,
    blocks: &Blocks,
    gs: &GroundState,
    tau: f64,
    cut: usize,
) -> Result<TailReport> {
    let x = &gs.vector;
    let dim = x.len();
    let split = blocks.sectors.partition_point(|&s| s <= cut);
    let tail: f64 = x[split..].iter().map(|a| a * a).sum();
    let mut report = TailReport {
        cut,
        empty: true,
        tail_weight: tail,
        rayleigh_tail: 0.0,
        k0_tail: 0.0,
        k0_bound: tau * (cut + 1) as f64,
        couplings: [0.0; 5],
        identity_defect: 0.0,
    };
    if cut == 0 {
        return Err(Error::InvalidParameter("cut must be positive".into()));
    }
    if cut >= blocks.cutoff || tail == 0.0 {
        return Ok(report);
    }
    report.empty = false;
    let mut lower = x.clone();
    lower[split..].iter_mut().for_each(|a| *a = 0.0);
    let mut upper = x.clone();
    upper[..split].iter_mut().for_each(|a| *a = 0.0);

    let rows = split..dim;
    let h_upper = h.matrix.bilinear_rows(rows.clone(), &upper, &upper);
    let h_cross = h.matrix.bilinear_rows(rows.clone(), &upper, &lower);
    let h_lower = h.matrix.bilinear_rows(0..split, &lower, &lower);
    report.rayleigh_tail = h_upper / tail - gs.energy;
    report.k0_tail = blocks.k0.bilinear_rows(rows.clone(), &upper, &upper) / tail;
    let quadratic = h.variant == Variant::Bogoliubov;
    for (i, block) in [&blocks.k0, &blocks.k1, &blocks.k2, &blocks.k3, &blocks.k4].into_iter().enumerate() {
        report.couplings[i] =
            if quadratic && i >= 3 { 0.0 } else { block.bilinear_rows(rows.clone(), &upper, &lower).abs() };
    }
    report.identity_defect = (h_lower + h_upper + 2.0 * h_cross - gs.energy).abs();

    if report.k0_tail < report.k0_bound * (1.0 - 1e-12) {
        return Err(Error::InequalityViolated { index: cut + 1, lhs: report.k0_bound, rhs: report.k0_tail });
    }
    if report.rayleigh_tail < -1e-9 {
        return Err(Error::InequalityViolated { index: cut + 1, lhs: 0.0, rhs: report.rayleigh_tail });
    }
    for (i, &name) in [(0, "K0"), (1, "K1"), (4, "K4")].iter().map(|(i, n)| (i, n)) {
        if report.couplings[*i] != 0.0 {
            return Err(Error::SectorSignature { block: name, from: cut, to: cut + 1 });
        }
    }
    Ok(report)
}
