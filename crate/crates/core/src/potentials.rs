//! Pair potentials on the torus and the Yukawa splitting of the Coulomb
//! interaction.
//!
//! Fourier convention, used everywhere in the crate: a potential of period `P`
//! is
//!
//! ```text
//! v(x) = (1/P) * sum_k  vhat(k) * exp(2 pi i k x / P)
//! ```
//!
//! with integer modes `k`, so `vhat(k) = int_0^P v(x) exp(-2 pi i k x / P) dx`
//! and `v(0) = (1/P) * sum_k vhat(k)`.
//!
//! Coulomb-type potentials carry their three-dimensional radial form
//! (`lambda / r` and its Yukawa pieces) together with the analytic 3D Fourier
//! transform. Placed on a torus, they are the lattice sums of that transform,
//! which have closed forms. The zero mode is neutralized for the Coulomb
//! potential; it never reaches the excitation kernels because the projection
//! onto the orthogonal complement of a constant condensate removes it.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{cos, exp, expm1, floor, log, sqrt};
use nalgebra::{Complex, DMatrix};

use crate::grid::{Boundary, Grid1D};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PotentialClass {
    BoundedPositiveType,
    Coulomb,
    /// `lambda (1 - exp(-r/kappa)) / r`, the long-range part of Coulomb.
    Yukawa,
    /// `lambda exp(-r/kappa) / r`, the short-range remainder.
    YukawaComplement,
}

impl PotentialClass {
    pub fn name(self) -> &'static str {
        match self {
            PotentialClass::BoundedPositiveType => "bounded-positive-type",
            PotentialClass::Coulomb => "coulomb",
            PotentialClass::Yukawa => "yukawa",
            PotentialClass::YukawaComplement => "yukawa-complement",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Self::BoundedPositiveType, Self::Coulomb, Self::Yukawa, Self::YukawaComplement]
            .into_iter()
            .find(|c| c.name() == name)
    }
}

/// What to do with a coefficient table that is not even in `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectrumPolicy {
    #[default]
    Reject,
    Symmetrize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairPotential {
    class: PotentialClass,
    coefficients: BTreeMap<i64, f64>,
    lambda: Option<f64>,
    kappa: Option<f64>,
    period: f64,
}

impl PairPotential {
    /// A bounded potential of positive type from its Fourier coefficients.
    pub fn bounded<I>(coefficients: I, period: f64, policy: SpectrumPolicy) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, f64)>,
    {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidParameter(format!("potential period must be positive, got {period}")));
        }
        let mut table = BTreeMap::new();
        for (k, value) in coefficients {
            if !value.is_finite() {
                return Err(Error::InvalidParameter(format!("coefficient at mode {k} is not finite")));
            }
            if value < 0.0 {
                return Err(Error::NegativeCoefficient { mode: k, value });
            }
            *table.entry(k).or_insert(0.0) += value;
        }
        let keys: Vec<i64> = table.keys().copied().collect();
        for k in keys {
            let value = table[&k];
            let mirror = table.get(&-k).copied().unwrap_or(0.0);
            if value != mirror {
                match policy {
                    SpectrumPolicy::Reject => return Err(Error::OddSpectrum { mode: k, value, mirror }),
                    SpectrumPolicy::Symmetrize => {
                        let mean = 0.5 * (value + mirror);
                        table.insert(k, mean);
                        table.insert(-k, mean);
                    }
                }
            }
        }
        table.retain(|_, v| *v != 0.0);
        Ok(Self { class: PotentialClass::BoundedPositiveType, coefficients: table, lambda: None, kappa: None, period })
    }

    pub fn zero(period: f64) -> Result<Self> {
        Self::bounded(core::iter::empty(), period, SpectrumPolicy::Reject)
    }

    /// Repulsive Coulomb potential `lambda / r`, placed on a torus of period 2 pi.
    pub fn coulomb(lambda: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        Ok(Self {
            class: PotentialClass::Coulomb,
            coefficients: BTreeMap::new(),
            lambda: Some(lambda),
            kappa: None,
            period: 2.0 * PI,
        })
    }

    fn yukawa_family(class: PotentialClass, lambda: f64, kappa: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        check_positive("kappa", kappa)?;
        Ok(Self { class, coefficients: BTreeMap::new(), lambda: Some(lambda), kappa: Some(kappa), period: 2.0 * PI })
    }

    /// Moves a Coulomb-type potential onto a torus of the given period.
    /// Bounded potentials keep their period; their coefficients are tied to it.
    pub fn on_torus(mut self, period: f64) -> Result<Self> {
        check_positive("period", period)?;
        if self.class != PotentialClass::BoundedPositiveType {
            self.period = period;
        }
        Ok(self)
    }

    pub fn class(&self) -> PotentialClass {
        self.class
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    pub fn kappa(&self) -> Option<f64> {
        self.kappa
    }

    /// Nonzero coefficient table of a bounded potential (empty otherwise).
    pub fn coefficient_table(&self) -> &BTreeMap<i64, f64> {
        &self.coefficients
    }

    pub fn is_zero(&self) -> bool {
        self.class == PotentialClass::BoundedPositiveType && self.coefficients.is_empty()
    }

    /// Torus Fourier coefficient `vhat(k)` for integer mode `k`.
    pub fn coefficient(&self, mode: i64) -> f64 {
        match self.class {
            PotentialClass::BoundedPositiveType => self.coefficients.get(&mode).copied().unwrap_or(0.0),
            _ if mode == 0 => {
                let lambda = self.lambda.unwrap_or(0.0);
                let kappa = self.kappa.unwrap_or(0.0);
                match self.class {
                    PotentialClass::Coulomb => 0.0,
                    PotentialClass::YukawaComplement => 4.0 * PI * lambda * kappa * kappa,
                    _ => -4.0 * PI * lambda * kappa * kappa,
                }
            }
            _ => {
                let k = 2.0 * PI * mode as f64 / self.period;
                self.transform_3d(k.abs()).unwrap_or(0.0)
            }
        }
    }

    /// Real-space value on the torus, `x` taken modulo the period.
    pub fn eval(&self, x: f64) -> f64 {
        let p = self.period;
        match self.class {
            PotentialClass::BoundedPositiveType => {
                let mut acc = 0.0;
                for (&k, &c) in self.coefficients.range(0..) {
                    if k == 0 {
                        acc += c;
                    } else {
                        acc += 2.0 * c * cos(2.0 * PI * k as f64 * x / p);
                    }
                }
                acc / p
            }
            PotentialClass::Coulomb => self.torus_coulomb(x),
            PotentialClass::YukawaComplement => self.torus_complement(x),
            PotentialClass::Yukawa => self.torus_coulomb(x) - self.torus_complement(x),
        }
    }

    pub fn at_origin(&self) -> f64 {
        self.eval(0.0)
    }

    // (1/P) sum_{n != 0} 4 pi lambda / k_n^2 e^{i k_n x}, a Bernoulli polynomial.
    fn torus_coulomb(&self, x: f64) -> f64 {
        let p = self.period;
        let lambda = self.lambda.unwrap_or(0.0);
        let t = reduce(x, p) / p;
        2.0 * PI * lambda * p * (t * t - t + 1.0 / 6.0)
    }

    // (1/P) sum_n 4 pi lambda / (k_n^2 + a^2) e^{i k_n x} with a = 1/kappa.
    fn torus_complement(&self, x: f64) -> f64 {
        let p = self.period;
        let lambda = self.lambda.unwrap_or(0.0);
        let kappa = self.kappa.unwrap_or(0.0);
        let a = 1.0 / kappa;
        let t = reduce(x, p);
        2.0 * PI * lambda * kappa * (exp(-a * t) + exp(-a * (p - t))) / (-expm1(-a * p))
    }

    /// Three-dimensional radial form; `None` for bounded torus potentials.
    pub fn radial(&self, r: f64) -> Option<f64> {
        let lambda = self.lambda?;
        match self.class {
            PotentialClass::BoundedPositiveType => None,
            PotentialClass::Coulomb => Some(lambda / r),
            PotentialClass::Yukawa => {
                let kappa = self.kappa?;
                if r == 0.0 {
                    Some(lambda / kappa)
                } else {
                    Some(-lambda * expm1(-r / kappa) / r)
                }
            }
            PotentialClass::YukawaComplement => {
                let kappa = self.kappa?;
                Some(lambda * exp(-r / kappa) / r)
            }
        }
    }

    /// Three-dimensional Fourier transform at wavenumber `k > 0`.
    pub fn transform_3d(&self, k: f64) -> Option<f64> {
        let lambda = self.lambda?;
        let k2 = k * k;
        match self.class {
            PotentialClass::BoundedPositiveType => None,
            PotentialClass::Coulomb => Some(4.0 * PI * lambda / k2),
            PotentialClass::Yukawa => {
                let a2 = 1.0 / (self.kappa? * self.kappa?);
                Some(4.0 * PI * lambda * a2 / (k2 * (k2 + a2)))
            }
            PotentialClass::YukawaComplement => {
                let a2 = 1.0 / (self.kappa? * self.kappa?);
                Some(4.0 * PI * lambda / (k2 + a2))
            }
        }
    }
}

fn reduce(x: f64, p: f64) -> f64 {
    let t = x - p * floor(x / p);
    if t >= p {
        0.0
    } else {
        t
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")))
    }
}

/// Bounded positive-type potential whose period is the grid length.
pub fn make_bounded_potential<I>(coefficients: I, grid: &Grid1D) -> Result<PairPotential>
where
    I: IntoIterator<Item = (i64, f64)>,
{
    PairPotential::bounded(coefficients, grid.length(), SpectrumPolicy::Reject)
}

/// Matrix of pair interactions `v(x_a - x_b)` between grid nodes.
pub fn interaction_matrix(v: &PairPotential, grid: &Grid1D) -> DMatrix<f64> {
    let xs = grid.points();
    let n = xs.len();
    let mut m = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let value = v.eval(xs[a] - xs[b]);
            m[(a, b)] = value;
            m[(b, a)] = value;
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolutionPath {
    Quadrature,
    /// Multiplication of Fourier coefficients; periodic grids whose length
    /// equals the potential period only.
    Fourier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Convolution {
    pub values: Vec<f64>,
    /// `int rho`; should be 1.
    pub mass: f64,
    /// Set when the density was not normalized to 1e-8.
    pub mass_warning: bool,
}

/// `(v * rho)(x)` on the grid nodes.
pub fn convolve_with_density(
    v: &PairPotential,
    rho: &[f64],
    grid: &Grid1D,
    path: ConvolutionPath,
) -> Result<Convolution> {
    if rho.len() != grid.len() {
        return Err(Error::InvalidParameter(format!("density has {} values for a grid of {}", rho.len(), grid.len())));
    }
    if let Some(bad) = rho.iter().position(|&r| r < 0.0 || !r.is_finite()) {
        return Err(Error::InvalidParameter(format!("density negative or not finite at node {bad}")));
    }
    let mass = grid.integrate(rho);
    let mass_warning = (mass - 1.0).abs() > 1e-8;
    let w = grid.weight();
    let values = match path {
        ConvolutionPath::Quadrature => {
            let xs = grid.points();
            xs.iter().map(|&x| w * xs.iter().zip(rho).map(|(&y, &r)| v.eval(x - y) * r).sum::<f64>()).collect()
        }
        ConvolutionPath::Fourier => {
            if v.class() != PotentialClass::BoundedPositiveType {
                return Err(Error::WrongPotentialClass { expected: "bounded-positive-type" });
            }
            if grid.boundary() != Boundary::Periodic || (v.period() - grid.length()).abs() > 1e-12 * grid.length() {
                return Err(Error::InvalidParameter(
                    "Fourier convolution needs a periodic grid matching the potential period".into(),
                ));
            }
            let l = grid.length();
            let xs = grid.points();
            let spectrum: Vec<(f64, Complex<f64>)> = v
                .coefficient_table()
                .iter()
                .map(|(&k, &c)| {
                    let q = 2.0 * PI * k as f64 / l;
                    let rho_hat: Complex<f64> = xs.iter().zip(rho).map(|(&x, &r)| crate::polar(w * r, -q * x)).sum();
                    (q, rho_hat * c)
                })
                .collect();
            // the k, -k pairs cancel the imaginary parts
            xs.iter()
                .map(|&x| spectrum.iter().map(|&(q, c)| (c * crate::polar(1.0, q * x)).re).sum::<f64>() / l)
                .collect()
        }
    };
    Ok(Convolution { values, mass, mass_warning })
}

/// `max_x (v^2 * rho)(x)` over grid nodes, by the same quadrature as the kernels.
pub fn squared_convolution_sup(v: &PairPotential, rho: &[f64], grid: &Grid1D) -> f64 {
    let xs = grid.points();
    let w = grid.weight();
    xs.iter()
        .map(|&x| {
            w * xs
                .iter()
                .zip(rho)
                .map(|(&y, &r)| {
                    let value = v.eval(x - y);
                    value * value * r
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Coulomb potential split as `v = v_kappa + v_kappa^perp`.
#[derive(Debug, Clone, PartialEq)]
pub struct YukawaSplit {
    pub yukawa: PairPotential,
    pub complement: PairPotential,
}

pub fn yukawa_split(lambda: f64, kappa: f64) -> Result<YukawaSplit> {
    Ok(YukawaSplit {
        yukawa: PairPotential::yukawa_family(PotentialClass::Yukawa, lambda, kappa)?,
        complement: PairPotential::yukawa_family(PotentialClass::YukawaComplement, lambda, kappa)?,
    })
}

impl YukawaSplit {
    pub fn lambda(&self) -> f64 {
        self.yukawa.lambda.unwrap_or(0.0)
    }

    pub fn kappa(&self) -> f64 {
        self.yukawa.kappa.unwrap_or(0.0)
    }

    /// Largest relative deviation of `v_kappa(r) + v_kappa^perp(r)` from `lambda / r`.
    pub fn reconstruction_error(&self, radii: &[f64]) -> f64 {
        let lambda = self.lambda();
        radii
            .iter()
            .map(|&r| {
                let coulomb = lambda / r;
                let sum = self.yukawa.radial(r).unwrap_or(f64::NAN) + self.complement.radial(r).unwrap_or(f64::NAN);
                ((sum - coulomb) / coulomb).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn on_torus(self, period: f64) -> Result<Self> {
        Ok(Self { yukawa: self.yukawa.on_torus(period)?, complement: self.complement.on_torus(period)? })
    }
}

/// Increasing radii of a three-dimensional radial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    radii: Vec<f64>,
}

impl RadialGrid {
    pub fn logarithmic(r_min: f64, r_max: f64, n: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min && n >= 2) {
            return Err(Error::InvalidParameter(format!(
                "logarithmic grid needs 0 < r_min < r_max and n >= 2 (got {r_min}, {r_max}, {n})"
            )));
        }
        let step = log(r_max / r_min) / (n - 1) as f64;
        Ok(Self { radii: (0..n).map(|i| r_min * exp(step * i as f64)).collect() })
    }

    /// Logarithmic grid starting at `1e-6 * kappa`.
    pub fn for_kappa(kappa: f64, r_max: f64, n: usize) -> Result<Self> {
        Self::logarithmic(1e-6 * kappa, r_max, n)
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
}

/// A spherically symmetric function sampled on a radial grid, linearly
/// interpolated, constant inside the first radius and zero beyond the last.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFunction {
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl RadialFunction {
    pub fn new(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() != values.len() || radii.len() < 2 {
            return Err(Error::InvalidParameter("radial function needs matching radii and values".into()));
        }
        if radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("radii must be positive and increasing".into()));
        }
        Ok(Self { radii, values })
    }

    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let radii = grid.radii().to_vec();
        let values = radii.iter().map(|&r| f(r)).collect();
        Self::new(radii, values)
    }

    /// Normalized Gaussian orbital `(pi s^2)^{-3/4} exp(-r^2 / (2 s^2))`.
    pub fn gaussian(width: f64, grid: &RadialGrid) -> Result<Self> {
        check_positive("width", width)?;
        let norm = libm::pow(PI * width * width, -0.75);
        Self::from_fn(grid, |r| norm * exp(-r * r / (2.0 * width * width)))
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, r: f64) -> f64 {
        interpolate(&self.radii, &self.values, r, self.values[0], 0.0)
    }

    /// `4 pi int f(r)^2 r^2 dr` by trapezoid, including the inner ball.
    pub fn norm_squared(&self) -> f64 {
        let r0 = self.radii[0];
        let mut acc = self.values[0] * self.values[0] * r0 * r0 * r0 / 3.0;
        for i in 1..self.radii.len() {
            let (ra, rb) = (self.radii[i - 1], self.radii[i]);
            let fa = self.values[i - 1] * self.values[i - 1] * ra * ra;
            let fb = self.values[i] * self.values[i] * rb * rb;
            acc += 0.5 * (rb - ra) * (fa + fb);
        }
        4.0 * PI * acc
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64, below: f64, above: f64) -> f64 {
    if x <= xs[0] {
        return below;
    }
    let last = xs.len() - 1;
    if x > xs[last] {
        return above;
    }
    let i = xs.partition_point(|&r| r < x).max(1);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let t = (x - x0) / (x1 - x0);
    ys[i - 1] + t * (ys[i] - ys[i - 1])
}

const RESIDUAL_POINTS: usize = 2048;

/// `max_x ((v_kappa^perp)^2 * phi^2)(x)` for a radial orbital `phi` in three
/// dimensions.
///
/// The convolution of radial functions is reduced to
/// `(2 pi / R) int ds s f(s) [G(R+s) - G(|R-s|)]` with `G(t) = int_0^t u phi(u)^2 du`,
/// integrated on a logarithmic grid in `s` starting at `1e-6 kappa` (or
/// `1e-6` times the orbital extent, if that is smaller). The
/// result is checked against a half-resolution pass.
pub fn residual_supnorm(lambda: f64, kappa: f64, phi: &RadialFunction) -> Result<f64> {
    check_positive("lambda", lambda)?;
    check_positive("kappa", kappa)?;
    if phi.values.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidParameter("orbital must be positive".into()));
    }
    let norm = phi.norm_squared();
    if (norm - 1.0).abs() > 1e-3 {
        return Err(Error::InvalidParameter(format!("orbital is not normalized (norm^2 = {norm})")));
    }
    let fine = residual_sup_at(lambda, kappa, phi, RESIDUAL_POINTS);
    let coarse = residual_sup_at(lambda, kappa, phi, RESIDUAL_POINTS / 2);
    let change = ((fine - coarse) / fine).abs();
    if change > 1e-6 {
        return Err(Error::QuadratureUnresolved { change, suggested_points: 4 * RESIDUAL_POINTS });
    }
    Ok(fine)
}

fn residual_sup_at(lambda: f64, kappa: f64, phi: &RadialFunction, points: usize) -> f64 {
    let radii = &phi.radii;
    let density: Vec<f64> = phi.values.iter().map(|v| v * v).collect();
    // G(t) = int_0^t u rho(u) du, exact for the piecewise linear density
    let r0 = radii[0];
    let partial = |i: usize, t: f64| -> f64 {
        let (a, b) = (radii[i - 1], radii[i]);
        let slope = (density[i] - density[i - 1]) / (b - a);
        let intercept = density[i - 1] - slope * a;
        intercept * (t * t - a * a) / 2.0 + slope * (t * t * t - a * a * a) / 3.0
    };
    let mut cumulative = Vec::with_capacity(radii.len());
    cumulative.push(0.5 * density[0] * r0 * r0);
    for i in 1..radii.len() {
        let prev = cumulative[i - 1];
        cumulative.push(prev + partial(i, radii[i]));
    }
    let total = *cumulative.last().unwrap_or(&0.0);
    let r_last = radii[radii.len() - 1];
    let g_cum = |t: f64| -> f64 {
        if t <= r0 {
            0.5 * density[0] * t * t
        } else if t >= r_last {
            total
        } else {
            let i = radii.partition_point(|&r| r < t).max(1);
            cumulative[i - 1] + partial(i, t)
        }
    };
    let rho = |t: f64| interpolate(radii, &density, t, density[0], 0.0);

    let s_min = 1e-6 * kappa.min(r_last);
    let stride = (radii.len() / 256).max(1);
    let mut evaluation: Vec<f64> = radii.iter().step_by(stride).copied().collect();
    evaluation.insert(0, 0.0);

    let mut best = 0.0f64;
    for &big_r in &evaluation {
        let s_max = (40.0 * kappa).min(big_r + r_last).max(2.0 * s_min);
        let du = log(s_max / s_min) / (points - 1) as f64;
        let mut acc = 0.0;
        for i in 0..points {
            let s = s_min * exp(du * i as f64);
            let damping = exp(-2.0 * s / kappa);
            let integrand = if big_r == 0.0 {
                damping * rho(s) * s
            } else {
                damping * (g_cum(big_r + s) - g_cum((big_r - s).abs()))
            };
            let weight = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
            acc += weight * integrand * du;
        }
        let value = if big_r == 0.0 {
            4.0 * PI * lambda * lambda * (acc + rho(0.0) * s_min)
        } else {
            2.0 * PI * lambda * lambda / big_r * (acc + 2.0 * big_r * rho(big_r) * s_min)
        };
        best = best.max(value);
    }
    best
}

/// `||(v_kappa^perp)^2 * phi^2||_inf^{1/2}` on a one-dimensional grid, used as
/// the remainder bound in the Coulomb lemma.
pub fn residual_delta(split: &YukawaSplit, rho: &[f64], grid: &Grid1D) -> f64 {
    sqrt(squared_convolution_sup(&split.complement, rho, grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn torus() -> Grid1D {
        Grid1D::periodic(64, 2.0 * PI).unwrap()
    }

    fn band(height: f64, width: i64) -> Vec<(i64, f64)> {
        (-width..=width).map(|k| (k, height)).collect()
    }

    #[test]
    fn zero_potential_vanishes() {
        let v = make_bounded_potential([(0, 0.0), (3, 0.0), (-3, 0.0)], &torus()).unwrap();
        assert!(v.is_zero());
        assert_eq!(v.at_origin(), 0.0);
        assert_eq!(v.eval(1.3), 0.0);
    }

    #[test]
    fn band_potential_value_at_origin() {
        let v = make_bounded_potential(band(1.0, 2), &torus()).unwrap();
        // direct summation of the five unit coefficients over the period
        let direct: f64 = (-2..=2).map(|_| 1.0).sum::<f64>() / (2.0 * PI);
        assert!((v.at_origin() - direct).abs() < 1e-15);
        assert!((v.at_origin() - 5.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn odd_spectrum_rejected_or_symmetrized() {
        let err = make_bounded_potential([(1, 1.0)], &torus()).unwrap_err();
        assert!(matches!(err, Error::OddSpectrum { .. }));
        let sym = PairPotential::bounded([(1, 1.0)], 2.0 * PI, SpectrumPolicy::Symmetrize).unwrap();
        assert_eq!(sym.coefficient(1), 0.5);
        assert_eq!(sym.coefficient(-1), 0.5);
    }

    #[test]
    fn negative_coefficient_names_mode() {
        let err = make_bounded_potential([(2, -0.1), (-2, -0.1)], &torus()).unwrap_err();
        assert_eq!(err, Error::NegativeCoefficient { mode: 2, value: -0.1 });
    }

    #[test]
    fn positive_type_maximum_at_origin() {
        let v = make_bounded_potential([(0, 0.3), (1, 1.0), (-1, 1.0), (4, 0.2), (-4, 0.2)], &torus()).unwrap();
        for x in torus().points() {
            assert!(v.eval(x) <= v.at_origin() + 1e-15);
        }
    }

    #[test]
    fn realspace_round_trips_through_dft() {
        let grid = Grid1D::periodic(32, 3.0).unwrap();
        let v = make_bounded_potential([(0, 0.7), (2, 0.4), (-2, 0.4), (5, 1.1), (-5, 1.1)], &grid).unwrap();
        for k in -8i64..=8 {
            let coefficient: f64 =
                grid.points().iter().map(|&x| grid.weight() * v.eval(x) * cos(2.0 * PI * k as f64 * x / 3.0)).sum();
            assert!((coefficient - v.coefficient(k)).abs() < 1e-13, "mode {k}");
        }
    }

    #[test]
    fn convolution_zero_and_constant_density() {
        let grid = torus();
        let rho = vec![1.0 / grid.length(); grid.len()];
        let zero = PairPotential::zero(grid.length()).unwrap();
        let out = convolve_with_density(&zero, &rho, &grid, ConvolutionPath::Quadrature).unwrap();
        assert!(out.values.iter().all(|&x| x == 0.0));
        let v = make_bounded_potential(band(1.3, 3), &grid).unwrap();
        for path in [ConvolutionPath::Quadrature, ConvolutionPath::Fourier] {
            let out = convolve_with_density(&v, &rho, &grid, path).unwrap();
            assert!(!out.mass_warning);
            for value in out.values {
                assert!((value - 1.3 / grid.length()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn convolution_paths_agree_and_match_oracle() {
        let grid = Grid1D::periodic(512, 2.0 * PI).unwrap();
        let rho: Vec<f64> = grid.points().iter().map(|&x| (1.0 + cos(x)) / (2.0 * PI)).collect();
        let v = make_bounded_potential(band(1.0, 2), &grid).unwrap();
        let quad = convolve_with_density(&v, &rho, &grid, ConvolutionPath::Quadrature).unwrap();
        let fourier = convolve_with_density(&v, &rho, &grid, ConvolutionPath::Fourier).unwrap();
        for (a, b) in quad.values.iter().zip(&fourier.values) {
            assert!((a - b).abs() < 1e-10);
        }
        // oracle at x = 0: int v(-y) rho(y) dy by an independent midpoint rule
        let m = 20_000;
        let h = 2.0 * PI / m as f64;
        let oracle: f64 = (0..m)
            .map(|i| {
                let y = (i as f64 + 0.5) * h;
                let v_y = (1.0 + 2.0 * cos(y) + 2.0 * cos(2.0 * y)) / (2.0 * PI);
                h * v_y * (1.0 + cos(y)) / (2.0 * PI)
            })
            .sum();
        assert!((quad.values[0] - oracle).abs() < 1e-10);
        // closed form: (1 + cos x) / (2 pi) for this band
        assert!((oracle - 2.0 / (2.0 * PI)).abs() < 1e-10);
    }

    #[test]
    fn unnormalized_density_warns() {
        let grid = torus();
        let rho = vec![2.0 / grid.length(); grid.len()];
        let v = make_bounded_potential(band(1.0, 1), &grid).unwrap();
        let out = convolve_with_density(&v, &rho, &grid, ConvolutionPath::Quadrature).unwrap();
        assert!(out.mass_warning);
        assert!((out.mass - 2.0).abs() < 1e-12);
    }

    #[test]
    fn yukawa_split_values() {
        let split = yukawa_split(1.0, 1.0).unwrap();
        assert!((split.yukawa.radial(0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((split.yukawa.radial(1e-9).unwrap() - 1.0).abs() < 1e-8);
        let lambda_over_kappa = yukawa_split(2.0, 0.25).unwrap().yukawa.radial(0.0).unwrap();
        assert_eq!(lambda_over_kappa, 8.0);
        // 4 pi (1 - 1/2) = 2 pi at k = 1
        assert!((split.yukawa.transform_3d(1.0).unwrap() - 2.0 * PI).abs() < 1e-14);
        assert!(yukawa_split(1.0, 0.0).is_err());
        assert!(yukawa_split(1.0, -1.0).is_err());
    }

    #[test]
    fn yukawa_split_reconstructs_coulomb() {
        let grid = RadialGrid::for_kappa(0.125, 50.0, 400).unwrap();
        for kappa in [1.0, 0.5, 0.25, 0.125] {
            let split = yukawa_split(1.7, kappa).unwrap();
            assert!(split.reconstruction_error(grid.radii()) < 1e-12);
            for i in 1..2000 {
                let k = 0.01 * i as f64;
                assert!(split.yukawa.transform_3d(k).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn torus_closed_forms_match_lattice_sums() {
        let period = 2.0 * PI;
        let split = yukawa_split(1.0, 0.5).unwrap().on_torus(period).unwrap();
        let coulomb = PairPotential::coulomb(1.0).unwrap().on_torus(period).unwrap();
        for &x in &[0.0, 0.4, 1.7, 3.1, 5.9] {
            for v in [&split.complement, &split.yukawa, &coulomb] {
                let mut sum = v.coefficient(0) / period;
                for n in 1..200_000i64 {
                    sum += 2.0 * v.coefficient(n) * cos(n as f64 * x) / period;
                }
                // the 1/k^2 tails converge like 1/n: about 2e-5 left at x = 0
                assert!((sum - v.eval(x)).abs() < 5e-5, "{:?} at {x}: {sum} vs {}", v.class(), v.eval(x));
            }
        }
        for x in [0.1, 1.0, 3.0] {
            let total = split.yukawa.eval(x) + split.complement.eval(x);
            assert!((total - coulomb.eval(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_orbital_is_normalized() {
        let grid = RadialGrid::logarithmic(1e-7, 12.0, 4000).unwrap();
        let phi = RadialFunction::gaussian(1.0, &grid).unwrap();
        assert!((phi.norm_squared() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn residual_supnorm_large_kappa_approaches_coulomb() {
        let grid = RadialGrid::logarithmic(1e-7, 12.0, 4000).unwrap();
        let phi = RadialFunction::gaussian(1.0, &grid).unwrap();
        // ||r^{-2} * phi^2||_inf = 2 lambda^2 / width^2 for the Gaussian
        let value = residual_supnorm(1.0, 1e6, &phi).unwrap();
        assert!((value - 2.0).abs() < 2e-3, "{value}");
    }

    #[test]
    fn residual_supnorm_monotone_in_kappa() {
        let grid = RadialGrid::logarithmic(1e-7, 12.0, 4000).unwrap();
        let phi = RadialFunction::gaussian(1.0, &grid).unwrap();
        let mut previous = f64::INFINITY;
        for kappa in [2.0, 1.0, 0.5, 0.25, 0.125, 0.0625] {
            let value = residual_supnorm(1.0, kappa, &phi).unwrap();
            assert!(value < previous);
            previous = value;
        }
    }
}
