//! Edge current and edge conductivity of a window of edge-state energies.
//!
//! Units: the current `J = (ec/2π) Σ ∫ ⟨σ₂⟩ dk₂` is integrated over the
//! momenta whose edge-state energy lies in the window `Δ`, and the
//! conductivity `σ_e = J / (|Δ|/e)` is reported in units of `e²/h`.

use serde::{Deserialize, Serialize};

use crate::analytic::{current_expectation, gap_state};
use crate::discrete::{assemble_fiber, eig_in_gap};
use crate::error::{Error, Result};
use crate::flow::{default_k_range, sweep_dispersion, Dispersion, DispersionBranch, Source};
use crate::model::{BoundaryParam, EnergyWindow, PhysParams, SwitchFunction};
use crate::perturbation::PerturbationSpec;
use crate::quad::{adaptive_simpson, bisect, simpson_uniform};
use crate::shooting::{numeric_gap_state, MatchResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DirectIntegral,
    SwitchFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeCurrentResult {
    /// Edge current `J`.
    #[serde(rename = "J")]
    pub j: f64,
    pub window: EnergyWindow,
    pub sigma_e: f64,
    pub method: Method,
    /// Quadrature of `g'(E)·dE/dk₂` for the switch method.
    pub cross_check: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentOptions {
    pub samples: usize,
    /// Absolute tolerance of the adaptive quadrature (analytic states).
    pub quad_tol: f64,
    /// Fixed Simpson nodes per preimage segment (numerical states).
    pub segment_nodes: usize,
    /// Times the momentum range is doubled before giving up.
    pub max_widenings: usize,
}

impl Default for CurrentOptions {
    fn default() -> Self {
        Self {
            samples: crate::flow::DEFAULT_SAMPLES,
            quad_tol: 1e-9,
            segment_nodes: 17,
            max_widenings: 3,
        }
    }
}

struct Problem<'a> {
    p: &'a PhysParams,
    bc: &'a BoundaryParam,
    w: Option<&'a PerturbationSpec>,
    source: &'a Source,
}

impl Problem<'_> {
    /// Energy on the branch near `guess`.
    fn energy_near(&self, k2: f64, guess: f64) -> Result<f64> {
        let levels = self.source.levels(k2, self.p, self.bc, self.w)?;
        levels
            .into_iter()
            .min_by(|a, b| (a - guess).abs().total_cmp(&(b - guess).abs()))
            .ok_or_else(|| Error::NoGapState {
                k2,
                reason: format!("branch lost near energy {guess}"),
            })
    }

    /// `⟨σ₂⟩` of the normalized edge state at `(k₂, E)`.
    fn current(&self, k2: f64, energy: f64) -> Result<f64> {
        match self.source {
            Source::Analytic => Ok(current_expectation(&gap_state(k2, self.p, self.bc)?)),
            Source::Shooting(opts) => {
                let mr = MatchResult {
                    energy,
                    residual: 0.0,
                    bracket: (energy, energy),
                    evaluations: 0,
                };
                Ok(numeric_gap_state(&mr, k2, self.p, self.bc, self.w, opts)?.sigma2)
            }
            Source::Discrete(opts) => {
                let grid = opts.grid(self.p, self.w)?;
                let a = assemble_fiber(k2, self.p, self.bc, self.w, &grid, opts.wilson_r)?;
                let d = 1e-3 * self.p.gap_edge();
                let win = EnergyWindow::new(energy - d, energy + d)?;
                eig_in_gap(&a, &win)?
                    .into_iter()
                    .min_by(|a, b| (a.energy - energy).abs().total_cmp(&(b.energy - energy).abs()))
                    .map(|e| e.sigma2)
                    .ok_or_else(|| Error::NoGapState {
                        k2,
                        reason: format!("no lattice state near {energy}"),
                    })
            }
        }
    }

    /// Energy on a branch between two samples, continued from the samples.
    fn branch_energy(&self, b: &DispersionBranch, i: usize, k2: f64) -> Result<f64> {
        let (k0, k1) = (b.k2[i], b.k2[i + 1]);
        let t = (k2 - k0) / (k1 - k0);
        let guess = b.energy[i] + t * (b.energy[i + 1] - b.energy[i]);
        self.energy_near(k2, guess)
    }

    /// Momentum between samples `i` and `i+1` where the branch hits `level`.
    fn crossing(&self, b: &DispersionBranch, i: usize, level: f64) -> Result<f64> {
        let mut failure = None;
        let f = |k: f64| match self.branch_energy(b, i, k) {
            Ok(e) => e - level,
            Err(err) => {
                failure.get_or_insert(err);
                0.0
            }
        };
        let fa = b.energy[i] - level;
        let fb = b.energy[i + 1] - level;
        let tol = 1e-13 * (1.0 + b.k2[i].abs().max(b.k2[i + 1].abs()));
        let r = bisect(f, b.k2[i], b.k2[i + 1], fa, fb, tol);
        match failure {
            Some(err) => Err(err),
            None => Ok(r.root),
        }
    }

    fn sweep(&self, range: (f64, f64), opts: &CurrentOptions) -> Result<Dispersion> {
        sweep_dispersion(self.p, self.bc, self.w, range, opts.samples, self.source)
    }
}

fn widen(range: (f64, f64)) -> (f64, f64) {
    let c = 0.5 * (range.0 + range.1);
    let h = range.1 - range.0;
    (c - h, c + h)
}

/// Runs `f` on sweeps over successively doubled ranges until it reports
/// coverage.
fn with_coverage<T>(
    pr: &Problem,
    window: &EnergyWindow,
    opts: &CurrentOptions,
    mut f: impl FnMut(&Dispersion) -> Result<Option<T>>,
) -> Result<T> {
    let mut range = default_k_range(pr.p, pr.bc, pr.w)?;
    for _ in 0..=opts.max_widenings {
        let d = pr.sweep(range, opts)?;
        if let Some(v) = f(&d)? {
            return Ok(v);
        }
        range = widen(range);
    }
    Err(Error::SwitchCoverage(format!(
        "branches do not leave the window ({}, {}) inside k-range {}:{}",
        window.lo, window.hi, range.0, range.1
    )))
}

/// An endpoint sample lies strictly inside the window.
fn uncovered(b: &DispersionBranch, window: &EnergyWindow) -> bool {
    window.contains(b.energy[0]) || window.contains(b.energy[b.len() - 1])
}

fn check_window(p: &PhysParams, window: &EnergyWindow) -> Result<()> {
    p.require_gap()?;
    window.require_inside(p.gap_edge())
}

fn sigma_from_current(p: &PhysParams, j: f64, window: &EnergyWindow) -> f64 {
    j * p.planck() / (p.e * window.width())
}

/// `J = (ec/2π) Σ ∫ ⟨σ₂⟩ dk₂` over the preimage of `window`.
pub fn edge_current_direct(
    p: &PhysParams,
    bc: &BoundaryParam,
    w: Option<&PerturbationSpec>,
    window: &EnergyWindow,
    source: &Source,
    opts: &CurrentOptions,
) -> Result<EdgeCurrentResult> {
    check_window(p, window)?;
    let pr = Problem { p, bc, w, source };
    let integral = with_coverage(&pr, window, opts, |d| {
        if d.branches.iter().any(|b| uncovered(b, window)) {
            return Ok(None);
        }
        let mut total = 0.0;
        for b in &d.branches {
            for seg in preimage(&pr, b, window)? {
                total += integrate_current(&pr, seg, opts)?;
            }
        }
        Ok(Some(total))
    })?;
    let j = p.e * p.c * integral / (2.0 * std::f64::consts::PI);
    Ok(EdgeCurrentResult {
        j,
        window: *window,
        sigma_e: sigma_from_current(p, j, window),
        method: Method::DirectIntegral,
        cross_check: None,
    })
}

/// Momentum interval of a branch inside the window, with the window edges
/// it enters and leaves through.
#[derive(Debug, Clone, Copy)]
struct Segment {
    ka: f64,
    ea: f64,
    kb: f64,
    eb: f64,
}

/// Momentum intervals of a branch on which its energy lies in `window`.
fn preimage(pr: &Problem, b: &DispersionBranch, window: &EnergyWindow) -> Result<Vec<Segment>> {
    let edge_level = |e: f64| if e <= window.lo { window.lo } else { window.hi };
    let mut out = Vec::new();
    let n = b.len();
    let mut i = 0;
    while i < n {
        if !window.contains(b.energy[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < n && window.contains(b.energy[i + 1]) {
            i += 1;
        }
        let end = i;
        // endpoints are outside the window by the coverage check
        let ea = edge_level(b.energy[start - 1]);
        let eb = edge_level(b.energy[end + 1]);
        let ka = pr.crossing(b, start - 1, ea)?;
        let kb = pr.crossing(b, end, eb)?;
        out.push(Segment { ka, ea, kb, eb });
        i += 1;
    }
    Ok(out)
}

fn integrate_current(pr: &Problem, seg: Segment, opts: &CurrentOptions) -> Result<f64> {
    let Segment { ka, ea, kb, eb } = seg;
    match pr.source {
        Source::Analytic => {
            let mut failure = None;
            let v = adaptive_simpson(
                |k| match pr.current(k, 0.0) {
                    Ok(s) => s,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                },
                ka,
                kb,
                opts.quad_tol,
            );
            match failure {
                Some(e) => Err(e),
                None => Ok(v),
            }
        }
        _ => {
            let n = opts.segment_nodes.max(3) | 1;
            let h = (kb - ka) / (n - 1) as f64;
            let mut vals = Vec::with_capacity(n);
            for i in 0..n {
                let t = i as f64 / (n - 1) as f64;
                let k = ka + h * i as f64;
                let e = pr.energy_near(k, ea + t * (eb - ea))?;
                vals.push(pr.current(k, e)?);
            }
            Ok(simpson_uniform(&vals, h))
        }
    }
}

/// `σ_e = Σ [g(E_end) - g(E_start)]` over tracked branches, with a
/// quadrature of `g'(E)·dE/dk₂` as cross-check.
pub fn edge_current_switch(
    p: &PhysParams,
    bc: &BoundaryParam,
    w: Option<&PerturbationSpec>,
    g: &SwitchFunction,
    source: &Source,
    opts: &CurrentOptions,
) -> Result<EdgeCurrentResult> {
    check_window(p, &g.window)?;
    let pr = Problem { p, bc, w, source };
    let (sigma, cross) = with_coverage(&pr, &g.window, opts, |d| {
        if d.branches.iter().any(|b| uncovered(b, &g.window)) {
            return Ok(None);
        }
        let mut sigma = 0.0;
        let mut cross = 0.0;
        for b in &d.branches {
            sigma += g.value(b.energy[b.len() - 1]) - g.value(b.energy[0]);
            cross += switch_quadrature(&pr, b, g, opts)?;
        }
        Ok(Some((sigma, cross)))
    })?;
    let j = sigma * p.e * g.window.width() / p.planck();
    Ok(EdgeCurrentResult {
        j,
        window: g.window,
        sigma_e: sigma,
        method: Method::SwitchFunction,
        cross_check: Some(cross),
    })
}

fn switch_quadrature(
    pr: &Problem,
    b: &DispersionBranch,
    g: &SwitchFunction,
    opts: &CurrentOptions,
) -> Result<f64> {
    let hc = pr.p.hbar_c();
    let n = b.len();
    if n < 2 {
        return Ok(0.0);
    }
    match pr.source {
        Source::Analytic => {
            let mut failure = None;
            let mut total = 0.0;
            for i in 0..n - 1 {
                let (ea, eb) = (b.energy[i], b.energy[i + 1]);
                // g' vanishes on panels entirely outside the window
                if ea.max(eb) <= g.window.lo || ea.min(eb) >= g.window.hi {
                    continue;
                }
                total += adaptive_simpson(
                    |k| {
                        let r = gap_state(k, pr.p, pr.bc)
                            .map(|s| g.derivative(s.energy) * hc * current_expectation(&s));
                        match r {
                            Ok(v) => v,
                            Err(e) => {
                                failure.get_or_insert(e);
                                0.0
                            }
                        }
                    },
                    b.k2[i],
                    b.k2[i + 1],
                    opts.quad_tol,
                );
            }
            match failure {
                Some(e) => Err(e),
                None => Ok(total),
            }
        }
        _ => {
            let h = b.k2[1] - b.k2[0];
            let vals: Vec<f64> = (0..n)
                .map(|i| {
                    let slope = if i == 0 {
                        (b.energy[1] - b.energy[0]) / h
                    } else if i == n - 1 {
                        (b.energy[n - 1] - b.energy[n - 2]) / h
                    } else {
                        (b.energy[i + 1] - b.energy[i - 1]) / (2.0 * h)
                    };
                    g.derivative(b.energy[i]) * slope
                })
                .collect();
            Ok(simpson_uniform(&vals, h))
        }
    }
}
