//! Uniform one-dimensional grids.

use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Torus of circumference `length`; nodes at `i * h`.
    Periodic,
    /// Interval `[0, length]` with Dirichlet walls; cell-centred nodes at `(i + 1/2) * h`.
    HardWall,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    n: usize,
    length: f64,
    boundary: Boundary,
}

impl Grid1D {
    pub fn new(n: usize, length: f64, boundary: Boundary) -> Result<Self> {
        if n < 8 {
            return Err(Error::InvalidParameter(alloc::format!("grid needs n >= 8, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("grid length must be positive, got {length}")));
        }
        Ok(Self { n, length, boundary })
    }

    pub fn periodic(n: usize, length: f64) -> Result<Self> {
        Self::new(n, length, Boundary::Periodic)
    }

    pub fn hard_wall(n: usize, length: f64) -> Result<Self> {
        Self::new(n, length, Boundary::HardWall)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Quadrature weight of every node; the weights sum to `length`.
    pub fn weight(&self) -> f64 {
        self.spacing()
    }

    pub fn weights(&self) -> Vec<f64> {
        alloc::vec![self.weight(); self.n]
    }

    pub fn x(&self, i: usize) -> f64 {
        let h = self.spacing();
        match self.boundary {
            Boundary::Periodic => i as f64 * h,
            Boundary::HardWall => (i as f64 + 0.5) * h,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weight() * values.iter().sum::<f64>()
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weight() * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        libm::sqrt(self.inner(a, a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_length() {
        for boundary in [Boundary::Periodic, Boundary::HardWall] {
            let g = Grid1D::new(37, 3.5, boundary).unwrap();
            let total: f64 = g.weights().iter().sum();
            assert!((total - 3.5).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_small_or_degenerate_grids() {
        assert!(Grid1D::periodic(7, 1.0).is_err());
        assert!(Grid1D::periodic(8, 0.0).is_err());
        assert!(Grid1D::periodic(8, f64::NAN).is_err());
    }

    #[test]
    fn hard_wall_nodes_are_cell_centred() {
        let g = Grid1D::hard_wall(10, 1.0).unwrap();
        assert!((g.x(0) - 0.05).abs() < 1e-15);
        assert!((g.x(9) - 0.95).abs() < 1e-15);
    }
}
