use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::operator::{pauli_sum, ManyBodyOperator, SiteOp, Support, DEFAULT_MAX_SITES};
use crate::error::{ensure_finite, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    TransverseIsing,
    Heisenberg,
    Xx,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Open,
    Periodic,
}

/// A spin-1/2 chain Hamiltonian `H = Σ_x h(x)`.
///
/// * transverse Ising: `h(x) = -(J/2)(σ¹_x σ¹_{x+1} + h σ³_x)`
/// * XX: `h(x) = -(J/2)(σ¹_x σ¹_{x+1} + σ²_x σ²_{x+1}) - (J h/2) σ³_x`
/// * Heisenberg: `h(x) = J σ⃗_x·σ⃗_{x+1} + Σ_{k≥2} V_k σ⃗_x·σ⃗_{x+k} + μ σ³_x`, with `field = μ`
///
/// On a periodic ring a bond `(x, x+k mod L)` is kept even when it repeats
/// another one (L = 2 counts its single link twice) and dropped when it
/// closes on itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainModel {
    pub family: Family,
    pub j: f64,
    pub field: f64,
    /// Further-neighbour couplings V_2, V_3, ... (Heisenberg family only).
    #[serde(default)]
    pub further: Vec<f64>,
    pub length: usize,
    pub boundary: Boundary,
}

impl ChainModel {
    pub fn transverse_ising(length: usize, j: f64, h: f64, boundary: Boundary) -> Self {
        Self { family: Family::TransverseIsing, j, field: h, further: Vec::new(), length, boundary }
    }

    pub fn xx(length: usize, j: f64, h: f64, boundary: Boundary) -> Self {
        Self { family: Family::Xx, j, field: h, further: Vec::new(), length, boundary }
    }

    pub fn heisenberg(length: usize, j: f64, mu: f64, further: Vec<f64>, boundary: Boundary) -> Self {
        Self { family: Family::Heisenberg, j, field: mu, further, length, boundary }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::Validation("chain length must be at least 1".into()));
        }
        ensure_finite("J", self.j)?;
        ensure_finite("field", self.field)?;
        for v in &self.further {
            ensure_finite("further-neighbour coupling", *v)?;
        }
        if !self.further.is_empty() && self.family != Family::Heisenberg {
            return Err(Error::Validation("further-neighbour couplings are defined for the Heisenberg family only".into()));
        }
        Ok(())
    }

    /// Bonds `(x, y)` at range `k`, following the boundary rule above.
    pub fn bonds(&self, k: usize) -> Vec<(usize, usize)> {
        let l = self.length;
        let mut out = Vec::new();
        for x in 0..l {
            match self.boundary {
                Boundary::Open if x + k < l => out.push((x, x + k)),
                Boundary::Periodic if (x + k) % l != x => out.push((x, (x + k) % l)),
                _ => {}
            }
        }
        out
    }

    /// Pauli-string decomposition of `h(x)`; `None` restricts nothing.
    fn terms(&self, only_site: Option<usize>) -> Vec<(C64, Vec<(usize, SiteOp)>)> {
        let c = |v: f64| C64::new(v, 0.0);
        let (j, f) = (self.j, self.field);
        let mut t: Vec<(C64, Vec<(usize, SiteOp)>)> = Vec::new();
        let keep = |x: usize| only_site.is_none_or(|s| s == x);
        let xyz = [SiteOp::Sigma1, SiteOp::Sigma2, SiteOp::Sigma3];
        match self.family {
            Family::TransverseIsing => {
                for (x, y) in self.bonds(1).into_iter().filter(|b| keep(b.0)) {
                    t.push((c(-j / 2.0), vec![(x, SiteOp::Sigma1), (y, SiteOp::Sigma1)]));
                }
                for x in (0..self.length).filter(|&x| keep(x)) {
                    t.push((c(-j * f / 2.0), vec![(x, SiteOp::Sigma3)]));
                }
            }
            Family::Xx => {
                for (x, y) in self.bonds(1).into_iter().filter(|b| keep(b.0)) {
                    t.push((c(-j / 2.0), vec![(x, SiteOp::Sigma1), (y, SiteOp::Sigma1)]));
                    t.push((c(-j / 2.0), vec![(x, SiteOp::Sigma2), (y, SiteOp::Sigma2)]));
                }
                for x in (0..self.length).filter(|&x| keep(x)) {
                    t.push((c(-j * f / 2.0), vec![(x, SiteOp::Sigma3)]));
                }
            }
            Family::Heisenberg => {
                let couplings = std::iter::once(j).chain(self.further.iter().copied());
                for (k, v) in couplings.enumerate() {
                    for (x, y) in self.bonds(k + 1).into_iter().filter(|b| keep(b.0)) {
                        for op in xyz {
                            t.push((c(v), vec![(x, op), (y, op)]));
                        }
                    }
                }
                for x in (0..self.length).filter(|&x| keep(x)) {
                    t.push((c(f), vec![(x, SiteOp::Sigma3)]));
                }
            }
        }
        t
    }

    /// Range of the longest coupling.
    pub fn range(&self) -> usize {
        match self.family {
            Family::Heisenberg => 1 + self.further.len(),
            _ => 1,
        }
    }
}

/// Matrix of the chain Hamiltonian on the full 2^L space.
pub fn build_spin_hamiltonian(model: &ChainModel) -> Result<ManyBodyOperator> {
    build_spin_hamiltonian_capped(model, DEFAULT_MAX_SITES)
}

pub fn build_spin_hamiltonian_capped(model: &ChainModel, max_sites: usize) -> Result<ManyBodyOperator> {
    model.validate()?;
    pauli_sum(model.length, &model.terms(None), max_sites)
}

/// Hamiltonian density `h(x)`, annotated with its support.
pub fn local_density(model: &ChainModel, x: usize) -> Result<ManyBodyOperator> {
    model.validate()?;
    if x >= model.length {
        return Err(Error::Index(format!("site {x} out of range for L = {}", model.length)));
    }
    let terms = model.terms(Some(x));
    let op = pauli_sum(model.length, &terms, DEFAULT_MAX_SITES)?;
    let sites: Vec<usize> = terms.iter().flat_map(|t| t.1.iter().map(|s| s.0)).collect();
    let lo = sites.iter().copied().min().unwrap_or(x);
    let hi = sites.iter().copied().max().unwrap_or(x);
    Ok(op.with_support(Some(Support::new(lo, hi))))
}
