//! Wilson lattice for the fiber operator on `[0, x_max]`.
//!
//! Sites `x_j = j·h`, `j = 0..N`, with a hard wall `ψ_N = 0`. In the real
//! basis `(v, w/i)` the operator is the real symmetric matrix
//!
//! ```text
//! [ mc²+m₁+V        ħc∂ + ħck₂ ]
//! [ -ħc∂ + ħck₂    -mc²-m₁+V   ]
//! ```
//!
//! discretized with central differences plus the Wilson term
//! `-sgn(m)·r·(ħc h/2)·σ₃·Δ`, whose sign keeps the doubler mass on the same
//! side as `m`. With `r = 1` the stencil is a staggered pair of one-sided
//! differences, and the boundary condition becomes a relation between a
//! single ghost component at `j = -1` and site 0, which is eliminated
//! exactly and symmetrically.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenpairs_in, separate_by_weight, BlockTridiag, CMat, SliceOptions};
use crate::model::{BoundaryParam, EnergyWindow, PhysParams, Spinor2, Zeta};
use crate::perturbation::PerturbationSpec;

/// Localization filter: largest admitted weight on the last 10% of sites.
pub const TAIL_MASS_LIMIT: f64 = 1e-3;

/// Uniform grid `x_j = j·h`, `j = 0..n`, wall at `x_max = n·h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub h: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(h: f64, n: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Grid(format!("spacing must be positive, got {h}")));
        }
        if n < 16 {
            return Err(Error::Grid(format!("need at least 16 sites, got {n}")));
        }
        Ok(Self { h, n })
    }

    /// Spacing and extent given in Compton lengths.
    pub fn for_params(p: &PhysParams, spacing: f64, extent: f64) -> Result<Self> {
        p.require_gap()?;
        let lc = p.compton_length();
        let n = (extent / spacing).ceil() as usize;
        Self::new(spacing * lc, n)
    }

    pub fn x_max(&self) -> f64 {
        self.h * self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.h * j as f64
    }

    /// The Compton scale must be resolved: `h|m|c²/ħc < 0.2`.
    pub fn check(&self, p: &PhysParams) -> Result<()> {
        let r = self.h * p.gap_edge() / p.hbar_c();
        if r >= 0.2 {
            return Err(Error::Grid(format!(
                "spacing {} does not resolve the Compton length (h|m|c²/ħc = {r})",
                self.h
            )));
        }
        Ok(())
    }
}

/// How the site-0 block encodes the boundary condition.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Closure {
    /// Ghost `a₋₁ = t·b₀` (mass > 0) or `b₋₁ = t·a₀` (mass < 0).
    Ghost { positive_mass: bool, t: f64 },
    /// Site 0 reduced to one component along `keep` in the real basis.
    Eliminated { keep: [f64; 2] },
}

/// Lattice fiber operator in the `(v, w)` basis, block tridiagonal by site.
#[derive(Debug, Clone)]
pub struct FiberMatrix {
    pub matrix: BlockTridiag,
    pub k2: f64,
    pub bc: BoundaryParam,
    pub wilson_r: f64,
    pub grid: Grid1D,
    closure: Closure,
}

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;
const A_HAT: [f64; 2] = [SQRT_HALF, SQRT_HALF];
const B_HAT: [f64; 2] = [-SQRT_HALF, SQRT_HALF];

/// Real-basis blocks of one fiber (or one Fourier mode of a Bloch fiber).
#[derive(Debug, Clone)]
pub(crate) struct RealBlocks {
    /// `n` on-site 2×2 blocks; the first may be replaced by a 1×1.
    pub diag: Vec<[[f64; 2]; 2]>,
    pub coupling: [[f64; 2]; 2],
    closure: Closure,
}

/// `(p, q) = (ζ+1, ζ-1)`, scaled so that `ζ = ∞` gives `(1, 1)`.
fn pq(bc: &BoundaryParam) -> (f64, f64) {
    match bc.zeta() {
        Zeta::Finite(z) => (z + 1.0, z - 1.0),
        Zeta::Infinite => (1.0, 1.0),
    }
}

/// Real lattice blocks at momentum `k₂`; `potential(j)` gives `(m₁, V)`
/// at site `j`.
pub(crate) fn real_blocks(
    k2: f64,
    p: &PhysParams,
    bc: &BoundaryParam,
    grid: &Grid1D,
    wilson_r: f64,
    potential: impl Fn(usize) -> (f64, f64),
) -> RealBlocks {
    let hc = p.hbar_c();
    let h = grid.h;
    let positive = p.m > 0.0;
    let s = if positive { 1.0 } else { -1.0 };
    let wil = s * wilson_r * hc / (2.0 * h);
    let hop = hc / (2.0 * h);
    let kk = hc * k2;
    let mut diag: Vec<[[f64; 2]; 2]> = (0..grid.n)
        .map(|j| {
            let (m1, v) = potential(j);
            let mass = p.rest_energy() + m1;
            [[mass + v + 2.0 * wil, kk], [kk, -mass + v - 2.0 * wil]]
        })
        .collect();
    let coupling = [[-wil, hop], [-hop, wil]];

    let (pp, qq) = pq(bc);
    let closure = if positive {
        if qq == 0.0 {
            Closure::Eliminated { keep: A_HAT }
        } else {
            let coef = hc * pp / (qq * h);
            add_outer(&mut diag[0], coef, B_HAT);
            Closure::Ghost {
                positive_mass: true,
                t: pp / qq,
            }
        }
    } else if pp == 0.0 {
        Closure::Eliminated { keep: B_HAT }
    } else {
        let coef = -hc * qq / (pp * h);
        add_outer(&mut diag[0], coef, A_HAT);
        Closure::Ghost {
            positive_mass: false,
            t: qq / pp,
        }
    };
    RealBlocks {
        diag,
        coupling,
        closure,
    }
}

fn add_outer(m: &mut [[f64; 2]; 2], coef: f64, d: [f64; 2]) {
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] += coef * d[i] * d[j];
        }
    }
}

/// Phase of each real-basis component in the `(v, w)` basis.
const PHASE: [Complex64; 2] = [Complex64 { re: 1.0, im: 0.0 }, Complex64 { re: 0.0, im: 1.0 }];

impl RealBlocks {
    pub fn eliminated(&self) -> Option<[f64; 2]> {
        match self.closure {
            Closure::Eliminated { keep } => Some(keep),
            Closure::Ghost { .. } => None,
        }
    }

    /// Complex `(v, w)` diagonal block of site `j`.
    pub fn diag_c(&self, j: usize) -> CMat {
        let d = &self.diag[j];
        match (j, self.eliminated()) {
            (0, Some(k)) => {
                let val = k[0] * (d[0][0] * k[0] + d[0][1] * k[1])
                    + k[1] * (d[1][0] * k[0] + d[1][1] * k[1]);
                CMat::from_fn(1, 1, |_, _| Complex64::new(val, 0.0))
            }
            _ => CMat::from_fn(2, 2, |a, b| PHASE[a] * d[a][b] * PHASE[b].conj()),
        }
    }

    /// Complex coupling block from site `j` to `j+1`.
    pub fn coupling_c(&self, j: usize) -> CMat {
        let c = &self.coupling;
        match (j, self.eliminated()) {
            (0, Some(k)) => CMat::from_fn(1, 2, |_, b| {
                (k[0] * c[0][b] + k[1] * c[1][b]) * PHASE[b].conj()
            }),
            _ => CMat::from_fn(2, 2, |a, b| PHASE[a] * c[a][b] * PHASE[b].conj()),
        }
    }

    pub fn site0_dim(&self) -> usize {
        if self.eliminated().is_some() {
            1
        } else {
            2
        }
    }

    /// `(v, w)` spinors at every site from a complex eigenvector laid out
    /// site by site.
    pub fn site_spinors(&self, x: &[Complex64]) -> Vec<Spinor2> {
        let off = self.site0_dim();
        let mut out = Vec::with_capacity(self.diag.len());
        match self.eliminated() {
            Some(k) => out.push(Spinor2::new(x[0] * k[0], PHASE[1] * x[0] * k[1])),
            None => out.push(Spinor2::new(x[0], x[1])),
        }
        for j in 1..self.diag.len() {
            let o = off + 2 * (j - 1);
            out.push(Spinor2::new(x[o], x[o + 1]));
        }
        out
    }

    /// Boundary value implied by the closure: it combines site 0 with the
    /// eliminated ghost component, so it satisfies the boundary condition
    /// by construction.
    pub fn boundary_spinor(&self, site0: &Spinor2) -> Spinor2 {
        // back to the real basis (v, w/i), then to (a, b)
        let v = site0.v;
        let wt = site0.w * Complex64::new(0.0, -1.0);
        let a = (v + wt) * SQRT_HALF;
        let b = (wt - v) * SQRT_HALF;
        let (a, b) = match self.closure {
            Closure::Eliminated { .. } => (a, b),
            Closure::Ghost {
                positive_mass: true,
                t,
            } => (b * t, b),
            Closure::Ghost {
                positive_mass: false,
                t,
            } => (a, a * t),
        };
        let v = (a - b) * SQRT_HALF;
        let wt = (a + b) * SQRT_HALF;
        Spinor2::new(v, wt * PHASE[1])
    }
}

fn validate_common(p: &PhysParams, grid: &Grid1D, wilson_r: f64) -> Result<()> {
    p.require_gap()?;
    grid.check(p)?;
    if !(wilson_r > 0.0 && wilson_r.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Wilson parameter must be positive, got {wilson_r}"
        )));
    }
    Ok(())
}

pub fn assemble_fiber(
    k2: f64,
    p: &PhysParams,
    bc: &BoundaryParam,
    w: Option<&PerturbationSpec>,
    grid: &Grid1D,
    wilson_r: f64,
) -> Result<FiberMatrix> {
    validate_common(p, grid, wilson_r)?;
    let blocks = real_blocks(k2, p, bc, grid, wilson_r, |j| {
        w.map(|w| w.at(grid.x(j))).unwrap_or((0.0, 0.0))
    });
    let n = grid.n;
    let diag = (0..n).map(|j| blocks.diag_c(j)).collect();
    let upper = (0..n - 1).map(|j| blocks.coupling_c(j)).collect();
    Ok(FiberMatrix {
        matrix: BlockTridiag::new(diag, upper)?,
        k2,
        bc: *bc,
        wilson_r,
        grid: *grid,
        closure: blocks.closure,
    })
}

impl FiberMatrix {
    fn blocks_view(&self) -> RealBlocks {
        RealBlocks {
            diag: Vec::new(),
            coupling: [[0.0; 2]; 2],
            closure: self.closure,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `max |A - Aᴴ|` relative to the largest entry.
    pub fn hermiticity_defect(&self) -> f64 {
        self.matrix.hermiticity_defect() / self.matrix.scale().max(f64::MIN_POSITIVE)
    }

    fn site_spinors(&self, x: &[Complex64]) -> Vec<Spinor2> {
        let mut view = self.blocks_view();
        view.diag = vec![[[0.0; 2]; 2]; self.grid.n];
        view.site_spinors(x)
    }
}

/// Localized in-gap eigenpair of a lattice fiber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEigenpair {
    pub energy: f64,
    /// Site spinors normalized with `Σ h|ψ_j|² = 1`.
    pub psi: Vec<Spinor2>,
    /// Boundary value reconstructed from the closure.
    pub boundary: Spinor2,
    /// Weight on the last 10% of sites.
    pub tail_mass: f64,
    /// `Σ h·ψ_j†σ₂ψ_j`.
    pub sigma2: f64,
}

/// Tail weight, normalized spinors and current of one eigenvector.
pub(crate) fn summarize(psi_raw: Vec<Spinor2>, h: f64) -> (Vec<Spinor2>, f64, f64) {
    let n = psi_raw.len();
    let total: f64 = psi_raw.iter().map(|s| s.norm_sqr()).sum();
    let tail_start = n - n / 10;
    let tail: f64 = psi_raw[tail_start..].iter().map(|s| s.norm_sqr()).sum();
    let scale = Complex64::new(1.0 / (total * h).sqrt(), 0.0);
    let psi: Vec<Spinor2> = psi_raw.iter().map(|s| s.scale(scale)).collect();
    let sigma2 = psi.iter().map(|s| s.tangential_current()).sum::<f64>() * h;
    (psi, tail / total, sigma2)
}

/// Localized eigenpairs of `a` with energy in `window`, ascending.
pub fn eig_in_gap(a: &FiberMatrix, window: &EnergyWindow) -> Result<Vec<EdgeEigenpair>> {
    let mut pairs = eigenpairs_in(&a.matrix, window.lo, window.hi, &SliceOptions::default())?;
    let n = a.grid.n;
    let dim = a.matrix.dim();
    let tail_dofs = dim - 2 * (n / 10)..dim;
    separate_by_weight(&a.matrix, &mut pairs, 1e-8 * window.width(), tail_dofs);
    let view = {
        let mut v = a.blocks_view();
        v.diag = vec![[[0.0; 2]; 2]; n];
        v
    };
    let mut out = Vec::new();
    for pair in pairs {
        let raw = a.site_spinors(&pair.vector);
        let (psi, tail_mass, sigma2) = summarize(raw, a.grid.h);
        if tail_mass >= TAIL_MASS_LIMIT {
            continue;
        }
        let boundary = view.boundary_spinor(&psi[0]);
        out.push(EdgeEigenpair {
            energy: pair.value,
            psi,
            boundary,
            tail_mass,
            sigma2,
        });
    }
    Ok(out)
}

/// Resolution and search settings for lattice fibers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteOptions {
    /// Spacing in Compton lengths.
    pub spacing: f64,
    /// Minimal extent in Compton lengths (beyond the perturbation support).
    pub extent: f64,
    pub wilson_r: f64,
    /// Search window pulled in from the gap edges by this fraction.
    pub margin: f64,
}

impl Default for DiscreteOptions {
    fn default() -> Self {
        Self {
            spacing: 0.005,
            extent: 40.0,
            wilson_r: 1.0,
            margin: 0.02,
        }
    }
}

impl DiscreteOptions {
    pub fn grid(&self, p: &PhysParams, w: Option<&PerturbationSpec>) -> Result<Grid1D> {
        p.require_gap()?;
        let support = w.map(|w| w.cutoff()).unwrap_or(0.0) / p.compton_length();
        Grid1D::for_params(p, self.spacing, self.extent.max(support + 30.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::gap_eigenvalue;
    use crate::model::boundary_residual;

    fn bc(z: f64) -> BoundaryParam {
        BoundaryParam::finite(z)
    }

    fn levels(k2: f64, m: f64, zeta: BoundaryParam, h: f64, n: usize) -> Vec<EdgeEigenpair> {
        let p = PhysParams::natural(m);
        let g = Grid1D::new(h, n).unwrap();
        let a = assemble_fiber(k2, &p, &zeta, None, &g, 1.0).unwrap();
        let e = 0.98 * m.abs();
        eig_in_gap(&a, &EnergyWindow::new(-e, e).unwrap()).unwrap()
    }

    #[test]
    fn matrix_is_hermitian() {
        let p = PhysParams::natural(-1.3);
        let g = Grid1D::new(0.02, 64).unwrap();
        for z in [BoundaryParam::finite(0.4), BoundaryParam::finite(-1.0), BoundaryParam::infinite()]
        {
            let a = assemble_fiber(0.7, &p, &z, None, &g, 1.0).unwrap();
            assert!(a.hermiticity_defect() < 1e-13);
            let d = a.matrix.to_dense();
            assert!(d.hermiticity_defect() < 1e-13 * a.matrix.scale());
        }
    }

    #[test]
    fn zero_energy_state_at_zeta_one() {
        let l = levels(0.0, 1.0, bc(1.0), 0.01, 4000);
        assert_eq!(l.len(), 1);
        assert!(l[0].energy.abs() < 5e-3);
    }

    #[test]
    fn flat_band_at_zeta_zero() {
        let l = levels(-1.0, 1.0, bc(0.0), 0.01, 4000);
        // the flat band sits at the gap edge, outside the search window
        assert!(l.is_empty());
        let p = PhysParams::natural(1.0);
        let g = Grid1D::new(0.01, 4000).unwrap();
        let a = assemble_fiber(-1.0, &p, &bc(0.0), None, &g, 1.0).unwrap();
        let found = eig_in_gap(&a, &EnergyWindow::new(0.9, 1.2).unwrap()).unwrap();
        assert_eq!(found.len(), 1);
        assert!((found[0].energy - 1.0).abs() < 5e-3);
    }

    #[test]
    fn line_branch_at_zeta_one() {
        let l = levels(0.5, 1.0, bc(1.0), 0.01, 4000);
        assert_eq!(l.len(), 1);
        assert!((l[0].energy - 0.5).abs() < 5e-3);
    }

    #[test]
    fn no_state_when_condition_fails() {
        for (m, z, k) in [(1.0, -1.0, 0.0), (-1.0, 1.0, 0.3), (1.0, -2.0, 0.5)] {
            assert!(!gap_eigenvalue(k, &PhysParams::natural(m), &bc(z)).has_gap_state);
            assert!(levels(k, m, bc(z), 0.01, 3000).is_empty(), "m={m} ζ={z} k={k}");
        }
        assert!(levels(0.2, 1.0, BoundaryParam::infinite(), 0.01, 3000).is_empty());
    }

    #[test]
    fn eigenvectors_satisfy_boundary_condition() {
        for (m, z, k) in [(1.0, 2.0, 0.1), (-1.0, -0.5, 0.2), (1.0, 1.0, 0.3)] {
            let l = levels(k, m, bc(z), 0.01, 3000);
            assert_eq!(l.len(), 1);
            let r = boundary_residual(&l[0].boundary, &bc(z)).unwrap();
            assert!(r < 1e-6, "residual {r}");
            let norm: f64 = l[0].psi.iter().map(|s| s.norm_sqr()).sum::<f64>() * 0.01;
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }
}
