//! Truncated bosonic Fock space over `m` excitation modes.
//!
//! States are occupation vectors with total occupation at most `M`, sorted
//! by sector `l = sum n_j` and then lexicographically ascending, so sector
//! `l` is a contiguous index range.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use libm::sqrt;

use crate::sparse::{CsrMatrix, RowBuilder};
use crate::{Error, Result};

/// Default cap on the basis dimension.
pub const DEFAULT_BUDGET: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockBasis {
    m: usize,
    cutoff: usize,
    occupations: Vec<u8>,
    sector_offsets: Vec<usize>,
    /// `binom[a][b] = C(a, b)` for `a <= cutoff + m`.
    binom: Vec<Vec<usize>>,
}

impl FockBasis {
    pub fn new(m: usize, cutoff: usize) -> Result<Self> {
        build_basis(m, cutoff, DEFAULT_BUDGET)
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.sector_offsets[self.cutoff + 1]
    }

    pub fn state(&self, i: usize) -> &[u8] {
        &self.occupations[i * self.m..(i + 1) * self.m]
    }

    pub fn states(&self) -> impl Iterator<Item = &[u8]> + '_ {
        self.occupations.chunks_exact(self.m)
    }

    pub fn sector_range(&self, ell: usize) -> Range<usize> {
        if ell > self.cutoff {
            return self.dim()..self.dim();
        }
        self.sector_offsets[ell]..self.sector_offsets[ell + 1]
    }

    pub fn sector_dim(&self, ell: usize) -> usize {
        self.sector_range(ell).len()
    }

    pub fn sector_of(&self, i: usize) -> usize {
        self.sector_offsets.partition_point(|&o| o <= i) - 1
    }

    /// Position of an occupation vector, `None` beyond the cutoff.
    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        debug_assert_eq!(occupation.len(), self.m);
        let ell: usize = occupation.iter().map(|&n| n as usize).sum();
        if ell > self.cutoff {
            return None;
        }
        let mut rank = self.sector_offsets[ell];
        let mut remaining = ell;
        for (i, &n) in occupation.iter().enumerate() {
            let rest = self.m - i - 1;
            for v in 0..n as usize {
                rank += self.compositions(remaining - v, rest);
            }
            remaining -= n as usize;
        }
        Some(rank)
    }

    /// Number of ways to write `s` as an ordered sum of `k` nonnegative parts.
    fn compositions(&self, s: usize, k: usize) -> usize {
        if k == 0 {
            usize::from(s == 0)
        } else {
            self.binom[s + k - 1][k - 1]
        }
    }

    /// Diagonal of the number operator.
    pub fn number_diagonal(&self) -> Vec<f64> {
        (0..=self.cutoff).flat_map(|ell| core::iter::repeat_n(ell as f64, self.sector_dim(ell))).collect()
    }

    /// Diagonal of `sum_j p_j a_j^* a_j`.
    pub fn momentum_diagonal(&self, momenta: &[i64]) -> Vec<f64> {
        assert_eq!(momenta.len(), self.m);
        self.states().map(|s| s.iter().zip(momenta).map(|(&n, &p)| n as f64 * p as f64).sum()).collect()
    }

    /// Ladder operator `a_j^*` or `a_j`; creation beyond the cutoff is dropped.
    pub fn ladder(&self, j: usize, kind: Ladder) -> CsrMatrix {
        assert!(j < self.m, "mode {j} out of range");
        let dim = self.dim();
        let mut builder = RowBuilder::new(dim, dim);
        let mut scratch = vec![0u8; self.m];
        for r in 0..dim {
            scratch.copy_from_slice(self.state(r));
            let mut entry = [(0u32, 0.0); 1];
            let mut len = 0;
            match kind {
                Ladder::Create => {
                    let n = scratch[j];
                    if n > 0 {
                        scratch[j] -= 1;
                        if let Some(c) = self.index_of(&scratch) {
                            entry[0] = (c as u32, sqrt(n as f64));
                            len = 1;
                        }
                    }
                }
                Ladder::Annihilate => {
                    scratch[j] += 1;
                    if let Some(c) = self.index_of(&scratch) {
                        entry[0] = (c as u32, sqrt(scratch[j] as f64));
                        len = 1;
                    }
                }
            }
            builder.push_row(&mut entry[..len]);
        }
        builder.finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Create,
    Annihilate,
}

/// Enumerates all occupation vectors over `m` modes with total at most `cutoff`.
pub fn build_basis(m: usize, cutoff: usize, budget: usize) -> Result<FockBasis> {
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one mode".into()));
    }
    if cutoff > u8::MAX as usize {
        return Err(Error::InvalidParameter(format!("cutoff {cutoff} exceeds 255")));
    }
    let top = cutoff + m;
    let mut binom = vec![vec![0usize; m + 1]; top + 1];
    for a in 0..=top {
        binom[a][0] = 1;
        for b in 1..=m.min(a) {
            binom[a][b] = binom[a - 1][b - 1].saturating_add(if b < a { binom[a - 1][b] } else { 0 });
        }
    }
    let dimension = binom[top][m];
    if dimension > budget || dimension == usize::MAX {
        return Err(Error::BudgetExceeded { dimension, budget });
    }

    let mut occupations = Vec::with_capacity(dimension * m);
    let mut sector_offsets = Vec::with_capacity(cutoff + 2);
    let mut state = vec![0u8; m];
    for ell in 0..=cutoff {
        sector_offsets.push(occupations.len() / m);
        state.iter_mut().for_each(|n| *n = 0);
        state[m - 1] = ell as u8;
        loop {
            occupations.extend_from_slice(&state);
            // lexicographic successor with the same total
            let Some(last) = state.iter().rposition(|&n| n > 0) else { break };
            if last == 0 {
                break;
            }
            let i = last - 1;
            let suffix: u8 = state[i + 1..].iter().sum();
            state[i] += 1;
            state[i + 1..].iter_mut().for_each(|n| *n = 0);
            state[m - 1] = suffix - 1;
        }
    }
    sector_offsets.push(occupations.len() / m);
    debug_assert_eq!(occupations.len(), dimension * m);
    Ok(FockBasis { m, cutoff, occupations, sector_offsets, binom })
}

/// Real amplitudes over a Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    m: usize,
    cutoff: usize,
    amplitudes: Vec<f64>,
}

impl FockVector {
    pub fn new(basis: &FockBasis, amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::InvalidParameter(format!(
                "vector of length {} for a basis of dimension {}",
                amplitudes.len(),
                basis.dim()
            )));
        }
        Ok(Self { m: basis.modes(), cutoff: basis.cutoff(), amplitudes })
    }

    pub fn zeros(basis: &FockBasis) -> Self {
        Self { m: basis.modes(), cutoff: basis.cutoff(), amplitudes: vec![0.0; basis.dim()] }
    }

    pub fn vacuum(basis: &FockBasis) -> Self {
        let mut v = Self::zeros(basis);
        v.amplitudes[0] = 1.0;
        v
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [f64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<f64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.amplitudes.iter().map(|a| a * a).sum())
    }

    fn check(&self, basis: &FockBasis) {
        assert!(self.m == basis.modes() && self.cutoff == basis.cutoff(), "vector and basis disagree");
    }

    /// Zeroes every amplitude outside sector `ell`.
    pub fn sector_project(&self, basis: &FockBasis, ell: usize) -> Self {
        self.check(basis);
        let range = basis.sector_range(ell);
        let mut out = Self::zeros(basis);
        out.amplitudes[range.clone()].copy_from_slice(&self.amplitudes[range]);
        out
    }

    /// `|| chi^(l) ||^2` for `l = 0..=M`.
    pub fn sector_norms(&self, basis: &FockBasis) -> Vec<f64> {
        self.check(basis);
        (0..=basis.cutoff()).map(|ell| self.amplitudes[basis.sector_range(ell)].iter().map(|a| a * a).sum()).collect()
    }
}
