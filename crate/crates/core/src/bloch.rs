//! Floquet–Bloch solver for perturbations periodic along the edge.
//!
//! A Bloch state at quasi-momentum `θ` is expanded in the `M` plane waves
//! `e^{ik_n x₂}`, `k_n = (θ + 2πn)/L`, with `k_n ∈ [-πM/L, πM/L)`. The `x₁`
//! direction uses the lattice of [`crate::discrete`] for every mode, and the
//! harmonics of `W` couple modes `n, n'` through `Ŵ_{n-n'}(x₁)`. Plane waves
//! carry no doubler, so no Wilson term is needed along `x₂`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete::{
    assemble_fiber, eig_in_gap, real_blocks, summarize, Grid1D, RealBlocks, TAIL_MASS_LIMIT,
};
use crate::error::{Error, Result};
use crate::flow::{spectral_flow, track, DispersionBranch, FlowResult, SourceKind};
use crate::linalg::{eigenpairs_in, separate_by_weight, BlockTridiag, CMat, SliceOptions};
use crate::model::{BoundaryParam, EnergyWindow, PhysParams, Spinor2, SwitchFunction};
use crate::perturbation::Profile;
use crate::quad::simpson_uniform;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochGrid {
    pub grid: Grid1D,
    /// Period along the edge.
    pub period: f64,
    /// Number of plane-wave modes.
    pub modes: usize,
    pub theta_samples: usize,
}

impl BlochGrid {
    pub fn new(grid: Grid1D, period: f64, modes: usize, theta_samples: usize) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Grid(format!("period must be positive, got {period}")));
        }
        if modes < 8 {
            return Err(Error::Grid(format!("need at least 8 modes, got {modes}")));
        }
        if theta_samples < 4 {
            return Err(Error::Grid(format!(
                "need at least 4 quasi-momentum samples, got {theta_samples}"
            )));
        }
        Ok(Self {
            grid,
            period,
            modes,
            theta_samples,
        })
    }

    /// Checks `h₁|m|c²/ħc < 0.2` and `(L/M)|m|c²/ħc < 0.5`.
    pub fn check(&self, p: &PhysParams) -> Result<()> {
        self.grid.check(p)?;
        let r = self.period / self.modes as f64 * p.gap_edge() / p.hbar_c();
        if r >= 0.5 {
            return Err(Error::Grid(format!(
                "{} modes do not resolve period {} (L|m|c²/(Mħc) = {r})",
                self.modes, self.period
            )));
        }
        Ok(())
    }

    /// Midpoint samples `θ_i = -π + (i + ½)·2π/T`.
    pub fn thetas(&self) -> Vec<f64> {
        let d = 2.0 * PI / self.theta_samples as f64;
        (0..self.theta_samples)
            .map(|i| -PI + (i as f64 + 0.5) * d)
            .collect()
    }

    /// Mode numbers `n` with `k_n ∈ [-πM/L, πM/L)` and their momenta.
    pub fn mode_momenta(&self, theta: f64) -> Vec<(i64, f64)> {
        let m = self.modes as f64;
        let n0 = ((-PI * m - theta) / (2.0 * PI)).ceil() as i64;
        (0..self.modes as i64)
            .map(|i| {
                let n = n0 + i;
                (n, (theta + 2.0 * PI * n as f64) / self.period)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    /// Electrostatic potential `V` (identity).
    Potential,
    /// Mass perturbation `m₁` (`σ₃`).
    Mass,
}

/// `profile(x₁)·cos(2π·harmonic·x₂/L + phase)` in one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicTerm {
    pub field: Field,
    pub harmonic: u32,
    #[serde(default)]
    pub phase: f64,
    pub profile: Profile,
}

/// `W(x₁, x₂) = m₁σ₃ + V`, periodic in `x₂` with period `L` by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPerturbation {
    pub period: f64,
    pub terms: Vec<PeriodicTerm>,
}

const PROBE_X1: usize = 400;
const PROBE_X2: usize = 128;

impl PeriodicPerturbation {
    pub fn new(period: f64, terms: Vec<PeriodicTerm>) -> Result<Self> {
        let w = Self { period, terms };
        w.validate()?;
        Ok(w)
    }

    pub fn zero(period: f64) -> Self {
        Self {
            period,
            terms: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "period must be positive, got {}",
                self.period
            )));
        }
        for t in &self.terms {
            t.profile.validate()?;
            if !t.phase.is_finite() {
                return Err(Error::InvalidParameter("phase must be finite".into()));
            }
            if t.harmonic > 0 && t.profile.tail() != 0.0 {
                return Err(Error::InvalidParameter(
                    "oscillating terms must decay away from the edge".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.profile.is_zero())
    }

    /// `(m₁, V)` at a point.
    pub fn at(&self, x1: f64, x2: f64) -> (f64, f64) {
        let mut out = (0.0, 0.0);
        for t in &self.terms {
            let arg = 2.0 * PI * t.harmonic as f64 * x2 / self.period + t.phase;
            let v = t.profile.value(x1) * arg.cos();
            match t.field {
                Field::Mass => out.0 += v,
                Field::Potential => out.1 += v,
            }
        }
        out
    }

    /// Support cutoff in `x₁`.
    pub fn cutoff(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.profile.cutoff())
            .fold(0.0, f64::max)
    }

    /// Largest `max(|V+m₁|, |V-m₁|)` on a probe grid over one period.
    pub fn sup_norm_bound(&self) -> f64 {
        let x_end = self.cutoff().max(1.0);
        let xs1 = (0..PROBE_X1)
            .map(|i| x_end * i as f64 / (PROBE_X1 - 1) as f64)
            .chain(self.terms.iter().flat_map(|t| t.profile.critical_points()))
            .chain(std::iter::once(x_end * 1e3))
            .filter(|x| *x >= 0.0)
            .collect::<Vec<_>>();
        let mut best: f64 = 0.0;
        for &x1 in &xs1 {
            for j in 0..PROBE_X2 {
                let x2 = self.period * j as f64 / PROBE_X2 as f64;
                let (m1, v) = self.at(x1, x2);
                best = best.max((v + m1).abs()).max((v - m1).abs());
            }
        }
        best
    }

    /// Fourier coefficient `(m̂₁_q, V̂_q)(x₁)` of harmonic `q`.
    fn coefficient(&self, q: i64, x1: f64) -> (Complex64, Complex64) {
        let mut out = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for t in &self.terms {
            let h = t.harmonic as i64;
            let c = if h == 0 && q == 0 {
                Complex64::new(t.phase.cos(), 0.0)
            } else if h != 0 && q == h {
                Complex64::from_polar(0.5, t.phase)
            } else if h != 0 && q == -h {
                Complex64::from_polar(0.5, -t.phase)
            } else {
                continue;
            };
            let c = c * t.profile.value(x1);
            match t.field {
                Field::Mass => out.0 += c,
                Field::Potential => out.1 += c,
            }
        }
        out
    }
}

/// Bloch operator at one quasi-momentum, block tridiagonal over `x₁`
/// sites; inside a block the layout is mode-major, `(v, w)` per mode.
#[derive(Debug, Clone)]
pub struct BlochMatrix {
    pub matrix: BlockTridiag,
    pub theta: f64,
    pub momenta: Vec<f64>,
    modes: Vec<RealBlocks>,
    h: f64,
}

impl BlochMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Per-site, per-mode spinors of a vector.
    fn spinors(&self, x: &[Complex64]) -> Vec<Vec<Spinor2>> {
        let m = self.modes.len();
        let n = self.matrix.n_blocks();
        let mut out = vec![Vec::with_capacity(n); m];
        for j in 0..n {
            let r = self.matrix.block_range(j);
            let d = r.len() / m;
            for (a, rb) in self.modes.iter().enumerate() {
                let s = &x[r.start + a * d..r.start + (a + 1) * d];
                let sp = if d == 1 {
                    let k = rb.eliminated().expect("one component only at an eliminated site");
                    Spinor2::new(s[0] * k[0], Complex64::new(0.0, 1.0) * s[0] * k[1])
                } else {
                    Spinor2::new(s[0], s[1])
                };
                out[a].push(sp);
            }
        }
        out
    }
}

pub fn assemble_bloch(
    theta: f64,
    p: &PhysParams,
    bc: &BoundaryParam,
    w: Option<&PeriodicPerturbation>,
    bg: &BlochGrid,
    wilson_r: f64,
) -> Result<BlochMatrix> {
    p.require_gap()?;
    bg.check(p)?;
    if !(wilson_r > 0.0 && wilson_r.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Wilson parameter must be positive, got {wilson_r}"
        )));
    }
    if !theta.is_finite() {
        return Err(Error::InvalidParameter("quasi-momentum must be finite".into()));
    }
    if let Some(w) = w {
        w.validate()?;
        if (w.period - bg.period).abs() > 1e-12 * bg.period {
            return Err(Error::InvalidParameter(format!(
                "perturbation period {} differs from the grid period {}",
                w.period, bg.period
            )));
        }
    }
    let grid = &bg.grid;
    let n_sites = grid.n;
    let modes = bg.mode_momenta(theta);
    let m = modes.len();

    // per-site Fourier coefficients for every mode difference
    let max_q = w
        .map(|w| w.terms.iter().map(|t| t.harmonic).max().unwrap_or(0))
        .unwrap_or(0) as i64;
    let coeff: Vec<Vec<(Complex64, Complex64)>> = (0..n_sites)
        .map(|j| {
            (-max_q..=max_q)
                .map(|q| {
                    w.map(|w| w.coefficient(q, grid.x(j)))
                        .unwrap_or((Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)))
                })
                .collect()
        })
        .collect();
    let at_q = |j: usize, q: i64| coeff[j][(q + max_q) as usize];

    let blocks: Vec<RealBlocks> = modes
        .iter()
        .map(|&(_, k)| {
            real_blocks(k, p, bc, grid, wilson_r, |j| {
                let (m1, v) = at_q(j, 0);
                (m1.re, v.re)
            })
        })
        .collect();
    let keep = blocks[0].eliminated();

    let mut diag = Vec::with_capacity(n_sites);
    let mut upper = Vec::with_capacity(n_sites - 1);
    for j in 0..n_sites {
        let d = if j == 0 { blocks[0].site0_dim() } else { 2 };
        let mut dj = CMat::zeros(m * d, m * d);
        for (a, rb) in blocks.iter().enumerate() {
            dj.set_block(a * d, a * d, &rb.diag_c(j));
        }
        for a in 0..m {
            for b in 0..m {
                let q = modes[a].0 - modes[b].0;
                if a == b || q.abs() > max_q {
                    continue;
                }
                let (m1, v) = at_q(j, q);
                let (up, down) = (v + m1, v - m1);
                match (j, keep) {
                    (0, Some(k)) => dj.set(a, b, up * k[0] * k[0] + down * k[1] * k[1]),
                    _ => {
                        dj.set(2 * a, 2 * b, up);
                        dj.set(2 * a + 1, 2 * b + 1, down);
                    }
                }
            }
        }
        diag.push(dj);
        if j + 1 < n_sites {
            let mut cj = CMat::zeros(m * d, m * 2);
            for (a, rb) in blocks.iter().enumerate() {
                cj.set_block(a * d, a * 2, &rb.coupling_c(j));
            }
            upper.push(cj);
        }
    }
    Ok(BlochMatrix {
        matrix: BlockTridiag::new(diag, upper)?.with_tiles(m),
        theta,
        momenta: modes.iter().map(|&(_, k)| k).collect(),
        modes: blocks,
        h: grid.h,
    })
}

/// Localized Bloch eigenstate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochLevel {
    pub energy: f64,
    /// `⟨σ₂⟩` averaged over one period.
    pub sigma2: f64,
    pub tail_mass: f64,
}

/// Localized eigenpairs of a Bloch matrix in `window`, ascending.
pub fn bloch_levels(a: &BlochMatrix, window: &EnergyWindow) -> Result<Vec<BlochLevel>> {
    let mut pairs = eigenpairs_in(&a.matrix, window.lo, window.hi, &SliceOptions::default())?;
    let n = a.matrix.n_blocks();
    let tail_start = a.matrix.block_range(n - n / 10).start;
    separate_by_weight(
        &a.matrix,
        &mut pairs,
        1e-8 * window.width(),
        tail_start..a.dim(),
    );
    let h = a.h;
    let mut out = Vec::new();
    for pair in pairs {
        let per_mode = a.spinors(&pair.vector);
        let total: f64 = per_mode
            .iter()
            .flat_map(|s| s.iter())
            .map(|s| s.norm_sqr())
            .sum();
        let mut sigma2 = 0.0;
        let mut tail = 0.0;
        for sites in per_mode {
            let weight: f64 = sites.iter().map(|s| s.norm_sqr()).sum::<f64>() / total;
            if weight == 0.0 {
                continue;
            }
            let (_, t, s2) = summarize(sites, h);
            sigma2 += weight * s2;
            tail += weight * t;
        }
        if tail >= TAIL_MASS_LIMIT {
            continue;
        }
        out.push(BlochLevel {
            energy: pair.value,
            sigma2,
            tail_mass: tail,
        });
    }
    Ok(out)
}

/// Localized levels over the quasi-momentum circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochBands {
    pub theta: Vec<f64>,
    pub levels: Vec<Vec<BlochLevel>>,
    /// Branches tracked over `θ_0, …, θ_{T-1}, θ_0 + 2π`; the `k2` field of
    /// each branch holds `θ`.
    pub branches: Vec<DispersionBranch>,
    pub window: EnergyWindow,
}

/// Default in-gap search window for Bloch bands, `±0.9(|m|c² - ‖W‖)`.
pub fn default_bloch_window(p: &PhysParams, w: Option<&PeriodicPerturbation>) -> Result<EnergyWindow> {
    p.require_gap()?;
    let norm = w.map(|w| w.sup_norm_bound()).unwrap_or(0.0);
    let e = 0.9 * (p.gap_edge() - norm);
    if e <= 0.0 {
        return Err(Error::WindowOutsideGap {
            lo: -e,
            hi: e,
            edge: p.gap_edge(),
        });
    }
    EnergyWindow::new(-e, e)
}

pub fn bloch_bands(
    p: &PhysParams,
    bc: &BoundaryParam,
    w: Option<&PeriodicPerturbation>,
    bg: &BlochGrid,
    window: &EnergyWindow,
    wilson_r: f64,
) -> Result<BlochBands> {
    window.require_inside(p.gap_edge())?;
    let thetas = bg.thetas();
    let levels = thetas
        .par_iter()
        .map(|&t| {
            let a = assemble_bloch(t, p, bc, w, bg, wilson_r)?;
            bloch_levels(&a, window)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut xs = thetas.clone();
    xs.push(thetas[0] + 2.0 * PI);
    let mut energies: Vec<Vec<f64>> = levels
        .iter()
        .map(|l| l.iter().map(|s| s.energy).collect())
        .collect();
    energies.push(energies[0].clone());
    let w_norm = w.map(|w| w.sup_norm_bound()).unwrap_or(0.0);
    let branches = track(
        p,
        &xs,
        &energies,
        SourceKind::Discrete,
        w_norm,
        p.hbar_c() / bg.period,
    );
    Ok(BlochBands {
        theta: thetas,
        levels,
        branches,
        window: *window,
    })
}

/// Net upward crossings of `reference` around the quasi-momentum circle;
/// the closing interval back to `θ_0 + 2π` is one of the tracked intervals,
/// so the zone boundary is counted once.
pub fn bloch_spectral_flow(bands: &BlochBands, reference: f64) -> Result<FlowResult> {
    spectral_flow(&bands.branches, reference)
}

/// Reduced-zone trace `(1/2πL) ∫dθ Σ g'(E)·c⟨σ₂⟩` by the midpoint rule.
pub fn reduced_zone_trace(p: &PhysParams, bands: &BlochBands, g: &SwitchFunction, period: f64) -> f64 {
    let d = 2.0 * PI / bands.theta.len() as f64;
    let sum: f64 = bands
        .levels
        .iter()
        .flat_map(|l| l.iter())
        .map(|s| g.derivative(s.energy) * p.c * s.sigma2)
        .sum();
    sum * d / (2.0 * PI * period)
}

/// Line trace `(1/2π) ∫dk₂ Σ g'(E)·c⟨σ₂⟩` from lattice fibers on the same
/// `x₁` grid, over the momenta `[-πM/L, πM/L)` represented by the modes.
pub fn line_trace(
    p: &PhysParams,
    bc: &BoundaryParam,
    bg: &BlochGrid,
    window: &EnergyWindow,
    g: &SwitchFunction,
    wilson_r: f64,
    intervals: usize,
) -> Result<f64> {
    let k_max = PI * bg.modes as f64 / bg.period;
    let n = intervals.max(2) & !1;
    let dk = 2.0 * k_max / n as f64;
    let vals = (0..=n)
        .into_par_iter()
        .map(|i| {
            let k = -k_max + dk * i as f64;
            let a = assemble_fiber(k, p, bc, None, &bg.grid, wilson_r)?;
            Ok(eig_in_gap(&a, window)?
                .iter()
                .map(|s| g.derivative(s.energy) * p.c * s.sigma2)
                .sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(simpson_uniform(&vals, dk) / (2.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::gap_eigenvalue;
    use crate::model::SwitchProfile;

    fn grid(theta_samples: usize) -> BlochGrid {
        BlochGrid::new(Grid1D::new(0.05, 256).unwrap(), 2.0 * PI, 16, theta_samples).unwrap()
    }

    fn ramp(amplitude: f64) -> PeriodicPerturbation {
        PeriodicPerturbation::new(
            2.0 * PI,
            vec![PeriodicTerm {
                field: Field::Potential,
                harmonic: 1,
                phase: 0.0,
                profile: Profile::PiecewisePolynomial {
                    knots: vec![0.0, 2.0],
                    coeffs: vec![vec![amplitude, -amplitude, 0.25 * amplitude]],
                },
            }],
        )
        .unwrap()
    }

    fn energies(theta: f64, w: Option<&PeriodicPerturbation>, win: &EnergyWindow) -> Vec<f64> {
        let p = PhysParams::natural(1.0);
        let a = assemble_bloch(theta, &p, &BoundaryParam::finite(1.0), w, &grid(8), 1.0).unwrap();
        bloch_levels(&a, win).unwrap().iter().map(|l| l.energy).collect()
    }

    #[test]
    fn hermitian_at_zone_boundary() {
        let p = PhysParams::natural(1.0);
        let w = ramp(0.3);
        for z in [BoundaryParam::finite(1.0), BoundaryParam::finite(0.4)] {
            let a = assemble_bloch(PI, &p, &z, Some(&w), &grid(8), 1.0).unwrap();
            assert!(a.matrix.hermiticity_defect() < 1e-13 * a.matrix.scale());
        }
    }

    #[test]
    fn unperturbed_spectrum_folds_fiber_branches() {
        let p = PhysParams::natural(1.0);
        let bc = BoundaryParam::finite(2.0);
        let win = EnergyWindow::new(-0.9, 0.9).unwrap();
        let theta = 0.7;
        let fine = BlochGrid::new(Grid1D::new(0.01, 1280).unwrap(), 2.0 * PI, 16, 8).unwrap();
        let a = assemble_bloch(theta, &p, &bc, None, &fine, 1.0).unwrap();
        let got: Vec<f64> = bloch_levels(&a, &win).unwrap().iter().map(|l| l.energy).collect();
        let mut want: Vec<f64> = a
            .momenta
            .iter()
            .filter_map(|&k| gap_eigenvalue(k, &p, &bc).e_g)
            .filter(|e| e.abs() < 0.88)
            .collect();
        want.sort_by(f64::total_cmp);
        assert_eq!(got.len(), want.len(), "{got:?} vs {want:?}");
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 2e-2, "{g} vs {w}");
        }
        // and exactly the lattice fibers at the folded momenta
        let mut lattice: Vec<f64> = a
            .momenta
            .iter()
            .flat_map(|&k| {
                let f = assemble_fiber(k, &p, &bc, None, &fine.grid, 1.0).unwrap();
                eig_in_gap(&f, &win).unwrap().into_iter().map(|s| s.energy)
            })
            .collect();
        lattice.sort_by(f64::total_cmp);
        assert_eq!(lattice.len(), got.len());
        for (g, l) in got.iter().zip(&lattice) {
            assert!((g - l).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_potential_shifts_spectrum() {
        let v = PeriodicPerturbation::new(
            2.0 * PI,
            vec![PeriodicTerm {
                field: Field::Potential,
                harmonic: 0,
                phase: 0.0,
                profile: Profile::Constant { value: 0.2 },
            }],
        )
        .unwrap();
        let base = energies(0.0, None, &EnergyWindow::new(-0.7, 0.5).unwrap());
        let shifted = energies(0.0, Some(&v), &EnergyWindow::new(-0.5, 0.7).unwrap());
        assert_eq!(base.len(), shifted.len());
        assert!(!base.is_empty());
        for (a, b) in base.iter().zip(&shifted) {
            assert!((b - a - 0.2).abs() < 1e-10, "{a} -> {b}");
        }
    }

    #[test]
    fn spectrum_is_periodic_in_theta() {
        let w = ramp(0.3);
        let win = EnergyWindow::new(-0.6, 0.6).unwrap();
        let a = energies(0.4, Some(&w), &win);
        let b = energies(0.4 + 2.0 * PI, Some(&w), &win);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn flow_through_reduced_zone() {
        let p = PhysParams::natural(1.0);
        let bg = grid(32);
        let win = default_bloch_window(&p, None).unwrap();
        let one = BoundaryParam::finite(1.0);
        let bands = bloch_bands(&p, &one, None, &bg, &win, 1.0).unwrap();
        assert_eq!(bloch_spectral_flow(&bands, 0.0).unwrap().flow, 1);
        let bands = bloch_bands(&p, &BoundaryParam::finite(-1.0), None, &bg, &win, 1.0).unwrap();
        assert!(bands.branches.is_empty());
        let bands = bloch_bands(&p, &BoundaryParam::finite(0.0), None, &bg, &win, 1.0).unwrap();
        assert_eq!(bloch_spectral_flow(&bands, 0.0).unwrap().flow, 0);
    }

    #[test]
    fn reduced_zone_trace_matches_line_trace() {
        let p = PhysParams::natural(1.0);
        let bg = grid(64);
        let one = BoundaryParam::finite(1.0);
        let win = default_bloch_window(&p, None).unwrap();
        let g = SwitchFunction::new(
            SwitchProfile::SmoothstepCubic,
            EnergyWindow::new(-0.5, 0.5).unwrap(),
        );
        let bands = bloch_bands(&p, &one, None, &bg, &win, 1.0).unwrap();
        let reduced = reduced_zone_trace(&p, &bands, &g, bg.period);
        let line = line_trace(&p, &one, &bg, &win, &g, 1.0, 2048).unwrap();
        assert!((reduced - line).abs() < 1e-3, "{reduced} vs {line}");
        assert!((line - 1.0 / (2.0 * PI)).abs() < 1e-3);
    }
}
