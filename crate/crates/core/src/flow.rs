//! Dispersion sweeps, branch tracking and the spectral flow.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::gap_eigenvalue;
use crate::discrete::{assemble_fiber, eig_in_gap, DiscreteOptions};
use crate::error::{Error, Result};
use crate::model::{BoundaryParam, PhysParams, Zeta};
use crate::perturbation::PerturbationSpec;
use crate::shooting::{default_window, match_boundary, ShootingOptions};

/// Default number of `k₂` samples in a sweep.
pub const DEFAULT_SAMPLES: usize = 257;

/// Nudge applied to a reference energy that coincides with a sample.
pub const REFERENCE_NUDGE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    Analytic,
    Shooting,
    Discrete,
}

/// Where fiber eigenvalues come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    Analytic,
    Shooting(ShootingOptions),
    Discrete(DiscreteOptions),
}

impl Source {
    pub fn kind(&self) -> SourceKind {
        match self {
            Source::Analytic => SourceKind::Analytic,
            Source::Shooting(_) => SourceKind::Shooting,
            Source::Discrete(_) => SourceKind::Discrete,
        }
    }

    pub fn default_for(kind: SourceKind) -> Self {
        match kind {
            SourceKind::Analytic => Source::Analytic,
            SourceKind::Shooting => Source::Shooting(ShootingOptions::default()),
            SourceKind::Discrete => Source::Discrete(DiscreteOptions::default()),
        }
    }

    /// Edge-state energies of the fiber at `k₂`, ascending.
    ///
    /// The analytic source reports `E_g` wherever it exists, also outside
    /// the bulk gap; the numerical sources search the bulk gap only.
    pub fn levels(
        &self,
        k2: f64,
        p: &PhysParams,
        bc: &BoundaryParam,
        w: Option<&PerturbationSpec>,
    ) -> Result<Vec<f64>> {
        let w = w.filter(|w| !w.is_zero());
        match self {
            Source::Analytic => {
                if w.is_some() {
                    return Err(Error::InvalidParameter(
                        "the analytic source has no perturbation".into(),
                    ));
                }
                Ok(gap_eigenvalue(k2, p, bc).e_g.into_iter().collect())
            }
            Source::Shooting(opts) => {
                let window = default_window(k2, p, w, 0.02)?;
                Ok(match_boundary(k2, p, bc, w, &window, opts)?
                    .into_iter()
                    .map(|r| r.energy)
                    .collect())
            }
            Source::Discrete(opts) => {
                let window = default_window(k2, p, w, opts.margin)?;
                let grid = opts.grid(p, w)?;
                let a = assemble_fiber(k2, p, bc, w, &grid, opts.wilson_r)?;
                Ok(eig_in_gap(&a, &window)?.into_iter().map(|e| e.energy).collect())
            }
        }
    }
}

/// How a tracked branch starts or stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchEnd {
    /// At the first or last sample of the sweep.
    RangeBoundary,
    /// Within the band-edge margin: the state merged with the continuum.
    BandEdge,
    /// Strictly inside the gap; signals a tracking failure.
    Interior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionBranch {
    pub id: usize,
    pub k2: Vec<f64>,
    pub energy: Vec<f64>,
    pub source: SourceKind,
    pub in_gap: Vec<bool>,
    pub start: BranchEnd,
    pub end: BranchEnd,
}

impl DispersionBranch {
    pub fn len(&self) -> usize {
        self.k2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k2.is_empty()
    }
}

/// Result of [`sweep_dispersion`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub branches: Vec<DispersionBranch>,
    pub k_range: (f64, f64),
    /// Branches that stop inside the gap at the edge of the range.
    pub warnings: Vec<String>,
}

/// Default sweep range: the analytic gap exits padded by 25% (75% with a
/// perturbation), or `±2|m|c/ħ` when `ζ ∈ {0, ∞}`.
pub fn default_k_range(
    p: &PhysParams,
    bc: &BoundaryParam,
    w: Option<&PerturbationSpec>,
) -> Result<(f64, f64)> {
    p.require_gap()?;
    let k0 = p.m.abs() * p.c / p.hbar;
    let perturbed = w.is_some_and(|w| !w.is_zero());
    let (a, b) = match bc.zeta() {
        Zeta::Finite(z) if z != 0.0 => {
            let (a, b) = (p.m * p.c / p.hbar * z, -p.m * p.c / p.hbar / z);
            (a.min(b), a.max(b))
        }
        _ => (-k0, k0),
    };
    let pad = (b - a) * if perturbed { 0.75 } else { 0.25 };
    Ok((a - pad, b + pad))
}

/// Samples the dispersion on `n` equally spaced momenta and tracks branches.
pub fn sweep_dispersion(
    p: &PhysParams,
    bc: &BoundaryParam,
    w: Option<&PerturbationSpec>,
    k_range: (f64, f64),
    n: usize,
    source: &Source,
) -> Result<Dispersion> {
    p.validate()?;
    p.require_gap()?;
    let (lo, hi) = k_range;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "k-range needs lo < hi, got {lo}:{hi}"
        )));
    }
    if n < 3 {
        return Err(Error::InvalidParameter("a sweep needs at least 3 samples".into()));
    }
    let ks: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    let levels = ks
        .par_iter()
        .map(|&k| source.levels(k, p, bc, w))
        .collect::<Result<Vec<_>>>()?;
    let w_norm = w.map(|w| w.sup_norm_bound()).unwrap_or(0.0);
    let branches = track(p, &ks, &levels, source.kind(), w_norm, p.hbar_c());
    let warnings = branches
        .iter()
        .filter(|b| {
            let first_in = b.start == BranchEnd::RangeBoundary && b.in_gap[0];
            let last_in = b.end == BranchEnd::RangeBoundary && b.in_gap[b.len() - 1];
            first_in || last_in
        })
        .map(|b| {
            format!(
                "branch {} stops inside the gap at the edge of k-range {lo}:{hi}; widen the range",
                b.id
            )
        })
        .collect();
    Ok(Dispersion {
        branches,
        k_range,
        warnings,
    })
}

struct Open {
    k2: Vec<f64>,
    energy: Vec<f64>,
    start_index: usize,
}

/// Greedy nearest-energy continuation with linear extrapolation.
///
/// `slope_scale` is the natural slope `dE/dx` of the sampling variable
/// (`ħc` for momenta); it sets the jump tolerance and the band-edge margin.
pub(crate) fn track(
    p: &PhysParams,
    ks: &[f64],
    levels: &[Vec<f64>],
    source: SourceKind,
    w_norm: f64,
    slope_scale: f64,
) -> Vec<DispersionBranch> {
    let hc = slope_scale;
    let dk = ks[1] - ks[0];
    let edge = p.gap_edge();
    let band_margin = 0.05 * edge + 2.0 * 2.0 * hc * dk;
    let n = ks.len();
    let mut open: Vec<Open> = Vec::new();
    let mut closed: Vec<(Open, usize)> = Vec::new();

    for (i, lv) in levels.iter().enumerate() {
        // candidate pairs (distance, branch, level)
        let mut pairs = Vec::new();
        for (bi, b) in open.iter().enumerate() {
            let m = b.energy.len();
            let slope = if m >= 2 {
                (b.energy[m - 1] - b.energy[m - 2]) / (b.k2[m - 1] - b.k2[m - 2])
            } else {
                0.0
            };
            let predicted = b.energy[m - 1] + slope * (ks[i] - b.k2[m - 1]);
            let tol = 3.0 * slope.abs().max(0.5 * hc) * dk;
            for (li, &e) in lv.iter().enumerate() {
                let d = (e - predicted).abs();
                if d <= tol {
                    pairs.push((d, bi, li));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut branch_taken = vec![false; open.len()];
        let mut level_taken = vec![false; lv.len()];
        for (_, bi, li) in pairs {
            if branch_taken[bi] || level_taken[li] {
                continue;
            }
            branch_taken[bi] = true;
            level_taken[li] = true;
            open[bi].k2.push(ks[i]);
            open[bi].energy.push(lv[li]);
        }
        let mut still = Vec::new();
        for (b, taken) in open.into_iter().zip(branch_taken) {
            if taken {
                still.push(b);
            } else {
                closed.push((b, i - 1));
            }
        }
        open = still;
        for (li, &e) in lv.iter().enumerate() {
            if !level_taken[li] {
                open.push(Open {
                    k2: vec![ks[i]],
                    energy: vec![e],
                    start_index: i,
                });
            }
        }
    }
    closed.extend(open.into_iter().map(|b| (b, n - 1)));
    closed.sort_by(|a, b| {
        a.0.start_index
            .cmp(&b.0.start_index)
            .then(a.0.energy[0].total_cmp(&b.0.energy[0]))
    });

    let classify = |index: usize, e: f64| {
        if index == 0 || index == n - 1 {
            BranchEnd::RangeBoundary
        } else if e.abs() >= edge - w_norm - band_margin {
            BranchEnd::BandEdge
        } else {
            BranchEnd::Interior
        }
    };
    closed
        .into_iter()
        .enumerate()
        .map(|(id, (b, last))| {
            let start = classify(b.start_index, b.energy[0]);
            let end = classify(last, *b.energy.last().unwrap());
            let in_gap = b.energy.iter().map(|e| e.abs() < edge).collect();
            DispersionBranch {
                id,
                k2: b.k2,
                energy: b.energy,
                source,
                in_gap,
                start,
                end,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub branch: usize,
    /// Linear interpolation of the crossing momentum (or angle).
    pub k2: f64,
    pub direction: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    pub flow: i32,
    pub crossings: Vec<Crossing>,
    pub reference: f64,
}

/// Reference energy moved off every sample by [`REFERENCE_NUDGE`] steps.
pub(crate) fn nudged_reference<'a>(
    reference: f64,
    energies: impl Fn() -> Box<dyn Iterator<Item = f64> + 'a>,
) -> f64 {
    let mut r = reference;
    while energies().any(|e| e == r) {
        r += REFERENCE_NUDGE;
    }
    r
}

/// Signed crossings between consecutive samples of one branch.
pub(crate) fn branch_crossings(
    id: usize,
    x: &[f64],
    e: &[f64],
    reference: f64,
    out: &mut Vec<Crossing>,
) {
    for i in 0..e.len().saturating_sub(1) {
        let (a, b) = (e[i] - reference, e[i + 1] - reference);
        if (a < 0.0) != (b < 0.0) {
            let t = a / (a - b);
            out.push(Crossing {
                branch: id,
                k2: x[i] + t * (x[i + 1] - x[i]),
                direction: if b > a { 1 } else { -1 },
            });
        }
    }
}

/// Net number of branches crossing `reference` upwards as `k₂` increases.
pub fn spectral_flow(branches: &[DispersionBranch], reference: f64) -> Result<FlowResult> {
    for b in branches {
        for (end, idx) in [(b.start, 0), (b.end, b.len() - 1)] {
            if end == BranchEnd::Interior {
                return Err(Error::Tracking(format!(
                    "branch {} ({} samples, k2 {}..{}) ends inside the gap at k2 = {}, E = {}",
                    b.id,
                    b.len(),
                    b.k2[0],
                    b.k2[b.len() - 1],
                    b.k2[idx],
                    b.energy[idx]
                )));
            }
        }
    }
    let reference = nudged_reference(reference, || {
        Box::new(branches.iter().flat_map(|b| b.energy.iter().copied()))
    });
    let mut crossings = Vec::new();
    for b in branches {
        branch_crossings(b.id, &b.k2, &b.energy, reference, &mut crossings);
    }
    Ok(FlowResult {
        flow: crossings.iter().map(|c| c.direction).sum(),
        crossings,
        reference,
    })
}

/// One row of a [`stability_scan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityEntry {
    pub norm: f64,
    pub flow: i32,
    pub unchanged: bool,
    /// `‖W‖ < |m|c²(1 - margin)`: the flow must be unchanged.
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub unperturbed_flow: i32,
    pub entries: Vec<StabilityEntry>,
}

impl StabilityReport {
    /// Every covered perturbation left the flow unchanged.
    pub fn holds(&self) -> bool {
        self.entries.iter().all(|e| !e.covered || e.unchanged)
    }
}

/// Margin on `‖W‖ < |m|c²` inside which the flow is required to persist.
pub const STABILITY_MARGIN: f64 = 0.05;

/// Spectral flow through 0 under each perturbation, from shooting sweeps.
pub fn stability_scan(
    p: &PhysParams,
    bc: &BoundaryParam,
    family: &[PerturbationSpec],
    n: usize,
) -> Result<StabilityReport> {
    p.require_gap()?;
    let unperturbed_flow = crate::analytic::sigma_edge_analytic(p, bc);
    let source = Source::Shooting(ShootingOptions::fast());
    let entries = family
        .iter()
        .map(|w| {
            w.validate()?;
            let norm = w.sup_norm_bound();
            let range = default_k_range(p, bc, Some(w))?;
            let d = sweep_dispersion(p, bc, Some(w), range, n, &source)?;
            let flow = spectral_flow(&d.branches, 0.0)?.flow;
            Ok(StabilityEntry {
                norm,
                flow,
                unchanged: flow == unperturbed_flow,
                covered: norm < p.gap_edge() * (1.0 - STABILITY_MARGIN),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StabilityReport {
        unperturbed_flow,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbation::Profile;
    use approx::assert_abs_diff_eq;

    fn bc(z: f64) -> BoundaryParam {
        BoundaryParam::finite(z)
    }

    fn analytic_flow(m: f64, z: BoundaryParam) -> i32 {
        let p = PhysParams::natural(m);
        let r = default_k_range(&p, &z, None).unwrap();
        let d = sweep_dispersion(&p, &z, None, r, DEFAULT_SAMPLES, &Source::Analytic).unwrap();
        spectral_flow(&d.branches, 0.0).unwrap().flow
    }

    #[test]
    fn line_branch_is_one_branch() {
        let p = PhysParams::natural(1.0);
        let d = sweep_dispersion(&p, &bc(1.0), None, (-3.0, 3.0), 61, &Source::Analytic).unwrap();
        assert_eq!(d.branches.len(), 1);
        let b = &d.branches[0];
        for (k, e) in b.k2.iter().zip(&b.energy) {
            assert_abs_diff_eq!(*k, *e, epsilon = 1e-12);
        }
        for (k, g) in b.k2.iter().zip(&b.in_gap) {
            assert_eq!(*g, k.abs() < 1.0);
        }
    }

    #[test]
    fn flat_branch_at_zeta_zero() {
        let p = PhysParams::natural(1.0);
        let d = sweep_dispersion(&p, &bc(0.0), None, (-2.0, 2.0), 41, &Source::Analytic).unwrap();
        assert_eq!(d.branches.len(), 1);
        let b = &d.branches[0];
        assert!(b.k2.iter().all(|k| *k < 0.0));
        assert!(b.energy.iter().all(|e| (*e - 1.0).abs() < 1e-15));
        assert_eq!(b.end, BranchEnd::BandEdge);
        assert_eq!(spectral_flow(&d.branches, 0.0).unwrap().flow, 0);
    }

    #[test]
    fn flow_examples() {
        assert_eq!(analytic_flow(1.0, bc(1.0)), 1);
        assert_eq!(analytic_flow(1.0, bc(-1.0)), 0);
        assert_eq!(analytic_flow(-1.0, bc(-1.0)), -1);
        assert_eq!(analytic_flow(2.0, BoundaryParam::infinite()), 0);
    }

    #[test]
    fn reference_on_a_sample_is_nudged() {
        let p = PhysParams::natural(1.0);
        let d = sweep_dispersion(&p, &bc(1.0), None, (-2.0, 2.0), 41, &Source::Analytic).unwrap();
        let f = spectral_flow(&d.branches, 0.0).unwrap();
        assert_eq!(f.flow, 1);
        assert_abs_diff_eq!(f.reference, REFERENCE_NUDGE, epsilon = 1e-18);
    }

    #[test]
    fn tangency_counts_zero() {
        let b = DispersionBranch {
            id: 0,
            k2: vec![0.0, 1.0, 2.0],
            energy: vec![-1.0, 0.5, -1.0],
            source: SourceKind::Analytic,
            in_gap: vec![true; 3],
            start: BranchEnd::RangeBoundary,
            end: BranchEnd::RangeBoundary,
        };
        let f = spectral_flow(&[b], 0.0).unwrap();
        assert_eq!(f.flow, 0);
        assert_eq!(f.crossings.len(), 2);
    }

    #[test]
    fn interior_end_is_a_tracking_error() {
        let b = DispersionBranch {
            id: 3,
            k2: vec![0.0, 1.0, 2.0],
            energy: vec![-0.5, 0.0, 0.5],
            source: SourceKind::Shooting,
            in_gap: vec![true; 3],
            start: BranchEnd::RangeBoundary,
            end: BranchEnd::Interior,
        };
        assert!(matches!(spectral_flow(&[b], 0.0), Err(Error::Tracking(_))));
    }

    #[test]
    fn shooting_matches_analytic_branch() {
        let p = PhysParams::natural(1.0);
        let z = bc(2.0);
        let src = Source::Shooting(ShootingOptions::default());
        let d = sweep_dispersion(&p, &z, None, (-1.0, 2.5), 15, &src).unwrap();
        assert_eq!(d.branches.len(), 1);
        let b = &d.branches[0];
        for (k, e) in b.k2.iter().zip(&b.energy) {
            let exact = gap_eigenvalue(*k, &p, &z).e_g.unwrap();
            assert!((e - exact).abs() < 1e-7, "k={k}: {e} vs {exact}");
        }
        assert_eq!(spectral_flow(&d.branches, 0.0).unwrap().flow, 1);
    }

    #[test]
    fn weak_potential_keeps_flow() {
        let p = PhysParams::natural(1.0);
        let w = PerturbationSpec::potential(Profile::Exponential {
            amplitude: 0.5,
            rate: 1.0,
        })
        .unwrap();
        let r = stability_scan(&p, &bc(1.0), &[w, PerturbationSpec::default()], 97).unwrap();
        assert_eq!(r.unperturbed_flow, 1);
        assert!(r.entries.iter().all(|e| e.flow == 1 && e.covered));
        assert!(r.holds());
    }
}
