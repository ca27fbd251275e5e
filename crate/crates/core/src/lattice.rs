//! Torus geometry and shift operators.
//!
//! Sites live on the cube `V_n = {-n, ..., n}^d` with `|V_n| = (2n+1)^d`
//! elements. Index arithmetic is componentwise modulo `2n+1`, with the
//! canonical representative taken in `[-n, n]`, so the sites form a
//! d-dimensional torus. The shift operator acts by `(S^k X)^m = X^{m+k}`
//! with periodic wraparound.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("dimension mismatch: index has {found} coordinates, torus has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// A d-dimensional lattice index (offset or site).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LatticeVec(pub Vec<i64>);

impl LatticeVec {
    pub fn zero(d: usize) -> Self {
        LatticeVec(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn add(&self, other: &LatticeVec) -> LatticeVec {
        LatticeVec(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &LatticeVec) -> LatticeVec {
        LatticeVec(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn neg(&self) -> LatticeVec {
        LatticeVec(self.0.iter().map(|a| -a).collect())
    }

    /// Sup norm `max_p |j(p)|`.
    pub fn norm_inf(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }
}

impl std::fmt::Debug for LatticeVec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl std::fmt::Display for LatticeVec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ":")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl From<Vec<i64>> for LatticeVec {
    fn from(v: Vec<i64>) -> Self {
        LatticeVec(v)
    }
}

/// The cube `V_n` in dimension `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusSpec {
    pub d: usize,
    pub n: i64,
}

impl TorusSpec {
    pub fn new(d: usize, n: i64) -> Self {
        assert!(d >= 1, "dimension must be at least 1");
        assert!(n >= 0, "cube radius must be non-negative");
        TorusSpec { d, n }
    }

    /// Side length `2n+1`.
    pub fn side(&self) -> i64 {
        2 * self.n + 1
    }

    /// `|V_n| = (2n+1)^d`.
    pub fn volume(&self) -> usize {
        (self.side() as usize).pow(self.d as u32)
    }

    pub fn contains(&self, j: &LatticeVec) -> bool {
        j.dim() == self.d && j.norm_inf() <= self.n
    }

    /// Componentwise reduction modulo `2n+1` into the representative
    /// range `[-n, n]`, so `(j+k) mod V_n` is `mod_torus(j.add(k))`.
    pub fn mod_torus(&self, j: &LatticeVec) -> Result<LatticeVec, LatticeError> {
        if j.dim() != self.d {
            return Err(LatticeError::DimensionMismatch {
                expected: self.d,
                found: j.dim(),
            });
        }
        let side = self.side();
        Ok(LatticeVec(
            j.0.iter()
                .map(|&c| (c + self.n).rem_euclid(side) - self.n)
                .collect(),
        ))
    }

    /// Lexicographic position of `j mod V_n` in `sites()` order.
    pub fn rank(&self, j: &LatticeVec) -> usize {
        let side = self.side();
        let mut r = 0usize;
        for &c in &j.0 {
            let folded = (c + self.n).rem_euclid(side);
            r = r * side as usize + folded as usize;
        }
        r
    }

    /// All sites of `V_n` in lexicographic order.
    pub fn sites(&self) -> CubeIter {
        cube(self.d, self.n)
    }
}

/// Iterator over the cube `{-r, ..., r}^d` in lexicographic order.
pub fn cube(d: usize, r: i64) -> CubeIter {
    CubeIter {
        d,
        r,
        next: Some(vec![-r; d]),
    }
}

pub struct CubeIter {
    d: usize,
    r: i64,
    next: Option<Vec<i64>>,
}

impl Iterator for CubeIter {
    type Item = LatticeVec;

    fn next(&mut self) -> Option<LatticeVec> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        // Odometer increment, most significant coordinate first.
        let mut p = self.d;
        loop {
            if p == 0 {
                break; // wrapped past the last index
            }
            p -= 1;
            if succ[p] < self.r {
                succ[p] += 1;
                self.next = Some(succ);
                break;
            }
            succ[p] = -self.r;
        }
        Some(LatticeVec(current))
    }
}

/// A configuration indexed by the sites of `V_n`, stored densely in
/// lexicographic order and read with periodic wraparound. This is the
/// `V_n`-periodic interpolant of the stored window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteArray<T> {
    pub spec: TorusSpec,
    pub data: Vec<T>,
}

impl<T: Clone> SiteArray<T> {
    pub fn from_fn(spec: TorusSpec, mut f: impl FnMut(&LatticeVec) -> T) -> Self {
        let data = spec.sites().map(|j| f(&j)).collect();
        SiteArray { spec, data }
    }

    pub fn get(&self, j: &LatticeVec) -> &T {
        &self.data[self.spec.rank(j)]
    }

    /// The shift operator: `(S^k X)^m = X^{m+k}`, with periodic wraparound.
    pub fn shift(&self, k: &LatticeVec) -> SiteArray<T> {
        SiteArray::from_fn(self.spec, |m| self.get(&m.add(k)).clone())
    }
}
