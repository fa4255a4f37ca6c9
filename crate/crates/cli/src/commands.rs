use std::f64::consts::PI;

use dirac_edge::acceptance;
use dirac_edge::analytic::{gap_eigenvalue, gap_state, sigma_bulk, sigma_edge_analytic, slope_law};
use dirac_edge::bloch::{bloch_bands, bloch_spectral_flow, default_bloch_window, BlochGrid};
use dirac_edge::discrete::{assemble_fiber, eig_in_gap, DiscreteOptions, Grid1D};
use dirac_edge::edge_current::{
    edge_current_direct, edge_current_switch, CurrentOptions, EdgeCurrentResult,
};
use dirac_edge::flow::{
    default_k_range, spectral_flow, stability_scan, sweep_dispersion, Source, SourceKind,
};
use dirac_edge::shooting::{default_window, match_boundary, numeric_gap_state, ShootingOptions};
use dirac_edge::{
    boundary_residual, BoundaryParam, EnergyWindow, PerturbationSpec, PhysParams, Spinor2,
    SwitchFunction, SwitchProfile,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Interval, RunConfig};
use crate::output::{emit, json, num, Csv};
use crate::CliError;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn source_for(kind: SourceKind) -> Source {
    Source::default_for(kind)
}

fn k_range(cfg: &RunConfig, default: (f64, f64)) -> (f64, f64) {
    cfg.k_range.map(|Interval(a, b)| (a, b)).unwrap_or(default)
}

fn write_summary(cfg: &RunConfig, summary: &Value) -> Result<(), CliError> {
    if let Some(path) = &cfg.summary {
        emit(Some(path), &json(summary)?)?;
    }
    Ok(())
}

fn analytic_reference(p: &PhysParams, bc: &BoundaryParam, w: Option<&PerturbationSpec>) -> Option<i32> {
    w.is_none().then(|| sigma_edge_analytic(p, bc))
}

pub fn dispersion(cfg: &RunConfig) -> Result<(), CliError> {
    let p = cfg.params()?;
    let bc = cfg.boundary()?;
    let w = cfg.perturbation()?;
    let n = cfg.samples(257)?;
    let k0 = 3.0 * p.m.abs() * p.c / p.hbar;
    let (lo, hi) = k_range(cfg, (-k0, k0));
    let ks = linspace(lo, hi, n);
    let kind = cfg.source();

    // rows[i] holds (E_g, branch id) at ks[i]
    let mut rows: Vec<Vec<(f64, usize)>> = vec![Vec::new(); n];
    let mut warnings = Vec::new();
    let mut branches = 0;
    if kind == SourceKind::Analytic {
        if w.is_some() {
            return Err(CliError::Usage(
                "the analytic source has no perturbation; use --source shooting or discrete".into(),
            ));
        }
        for (i, &k) in ks.iter().enumerate() {
            if let Some(e) = gap_eigenvalue(k, &p, &bc).e_g {
                rows[i].push((e, 0));
                branches = 1;
            }
        }
    } else {
        let d = sweep_dispersion(&p, &bc, w, (lo, hi), n, &source_for(kind))?;
        let step = (hi - lo) / (n - 1) as f64;
        for b in &d.branches {
            for (k, e) in b.k2.iter().zip(&b.energy) {
                let i = ((k - lo) / step).round() as usize;
                rows[i.min(n - 1)].push((*e, b.id));
            }
        }
        branches = d.branches.len();
        warnings = d.warnings;
    }
    for msg in &warnings {
        eprintln!("warning: {msg}");
    }

    let mut csv = Csv::new(&["k2", "E_b_plus", "E_b_minus", "E_g", "branch_id"]);
    for (k, states) in ks.iter().zip(&rows) {
        let eb = gap_eigenvalue(*k, &p, &bc).e_b;
        if states.is_empty() {
            csv.row(&[num(*k), num(eb), num(-eb), String::new(), String::new()]);
        }
        for (e, id) in states {
            csv.row(&[num(*k), num(eb), num(-eb), num(*e), id.to_string()]);
        }
    }
    emit(cfg.output.as_deref(), &csv.into_string())?;
    write_summary(
        cfg,
        &json!({
            "command": "dispersion",
            "m": p.m,
            "zeta": bc.zeta().to_string(),
            "source": kind,
            "k_range": [lo, hi],
            "samples": n,
            "branches": branches,
            "warnings": warnings,
        }),
    )
}

struct ProfileState {
    energy: f64,
    sigma2: f64,
    boundary: Spinor2,
    x: Vec<f64>,
    psi: Vec<Spinor2>,
}

fn states_at(
    k2: f64,
    p: &PhysParams,
    bc: &BoundaryParam,
    w: Option<&PerturbationSpec>,
    kind: SourceKind,
    points: usize,
) -> Result<Vec<ProfileState>, CliError> {
    match kind {
        SourceKind::Analytic => {
            if w.is_some() {
                return Err(CliError::Usage(
                    "the analytic source has no perturbation; use --source shooting or discrete".into(),
                ));
            }
            let s = gap_state(k2, p, bc)?;
            let x = linspace(0.0, 10.0 / s.kappa, points);
            let psi = x.iter().map(|&x| s.at(x)).collect();
            Ok(vec![ProfileState {
                energy: s.energy,
                sigma2: slope_law(bc),
                boundary: s.spinor,
                x,
                psi,
            }])
        }
        SourceKind::Shooting => {
            let opts = ShootingOptions::default();
            let window = default_window(k2, p, w, 0.02)?;
            match_boundary(k2, p, bc, w, &window, &opts)?
                .iter()
                .map(|r| {
                    let s = numeric_gap_state(r, k2, p, bc, w, &opts)?;
                    Ok(ProfileState {
                        energy: s.state.energy,
                        sigma2: s.sigma2,
                        boundary: s.psi[0],
                        x: s.x,
                        psi: s.psi,
                    })
                })
                .collect()
        }
        SourceKind::Discrete => {
            let opts = DiscreteOptions::default();
            let grid = opts.grid(p, w)?;
            let a = assemble_fiber(k2, p, bc, w, &grid, opts.wilson_r)?;
            let edge = (1.0 - opts.margin) * p.gap_edge();
            let states = eig_in_gap(&a, &EnergyWindow::new(-edge, edge)?)?;
            Ok(states
                .into_iter()
                .map(|s| ProfileState {
                    energy: s.energy,
                    sigma2: s.sigma2,
                    boundary: s.boundary,
                    x: (0..grid.n).map(|j| grid.x(j)).collect(),
                    psi: s.psi,
                })
                .collect())
        }
    }
}

pub fn gapstate(cfg: &RunConfig) -> Result<(), CliError> {
    let p = cfg.params()?;
    let bc = cfg.boundary()?;
    let w = cfg.perturbation()?;
    let k2 = cfg.k2.unwrap_or(0.0);
    let kind = cfg.source();
    let states = states_at(k2, &p, &bc, w, kind, cfg.samples(401)?)?;
    if states.is_empty() {
        return Err(CliError::Usage(format!("no gap state at k2 = {k2}")));
    }

    let mut csv = Csv::new(&["state", "x1", "v_re", "v_im", "w_re", "w_im", "density"]);
    let mut summary = Vec::new();
    for (i, s) in states.iter().enumerate() {
        for (x, psi) in s.x.iter().zip(&s.psi) {
            csv.row(&[
                i.to_string(),
                num(*x),
                num(psi.v.re),
                num(psi.v.im),
                num(psi.w.re),
                num(psi.w.im),
                num(psi.norm_sqr()),
            ]);
        }
        let u = s.boundary.normalized();
        summary.push(json!({
            "index": i,
            "energy": s.energy,
            "sigma2": s.sigma2,
            "boundary_residual": boundary_residual(&u, &bc)?,
            "normal_current": u.normal_current(),
        }));
    }
    emit(cfg.output.as_deref(), &csv.into_string())?;
    write_summary(
        cfg,
        &json!({
            "command": "gapstate",
            "k2": k2,
            "m": p.m,
            "zeta": bc.zeta().to_string(),
            "source": kind,
            "states": summary,
        }),
    )
}

fn flow_samples(cfg: &RunConfig, kind: SourceKind) -> Result<usize, CliError> {
    cfg.samples(if kind == SourceKind::Discrete { 65 } else { 257 })
}

fn flow_source(kind: SourceKind) -> Source {
    match kind {
        SourceKind::Shooting => Source::Shooting(ShootingOptions::fast()),
        other => source_for(other),
    }
}

pub fn flow(cfg: &RunConfig) -> Result<(), CliError> {
    let p = cfg.params()?;
    let bc = cfg.boundary()?;
    let w = cfg.perturbation()?;
    let kind = cfg.source();
    let n = flow_samples(cfg, kind)?;
    let range = k_range(cfg, default_k_range(&p, &bc, w)?);
    let d = sweep_dispersion(&p, &bc, w, range, n, &flow_source(kind))?;
    let f = spectral_flow(&d.branches, cfg.reference.unwrap_or(0.0))?;
    let expected = analytic_reference(&p, &bc, w);
    emit(
        cfg.output.as_deref(),
        &json(&json!({
            "flow": f.flow,
            "reference": f.reference,
            "crossings": f.crossings,
            "sigma_e_analytic": expected,
            "source": kind,
            "k_range": [range.0, range.1],
            "samples": n,
            "branches": d.branches.len(),
            "warnings": d.warnings,
        }))?,
    )?;
    match expected {
        Some(s) if s != f.flow => Err(CliError::Check(format!(
            "flow {} differs from the closed form {s}",
            f.flow
        ))),
        _ => Ok(()),
    }
}

fn method_entry(r: &EdgeCurrentResult, profile: Option<SwitchProfile>) -> Value {
    json!({
        "method": r.method,
        "profile": profile,
        "sigma_e": r.sigma_e,
        "J": r.j,
        "cross_check": r.cross_check,
    })
}

pub fn conductivity(cfg: &RunConfig) -> Result<(), CliError> {
    let p = cfg.params()?;
    let bc = cfg.boundary()?;
    let w = cfg.perturbation()?;
    let kind = cfg.source();
    let window = cfg.window(&p, 0.5)?;
    let source = flow_source(kind);
    let opts = CurrentOptions::default();
    let tol = if kind == SourceKind::Analytic { 1e-6 } else { 1e-3 };

    let direct = edge_current_direct(&p, &bc, w, &window, &source, &opts)?;
    let profiles = match cfg.profile {
        Some(pr) => vec![pr],
        None => SwitchProfile::ALL.to_vec(),
    };
    let switched = profiles
        .iter()
        .map(|&pr| edge_current_switch(&p, &bc, w, &SwitchFunction::new(pr, window), &source, &opts))
        .collect::<Result<Vec<_>, _>>()?;
    let range = default_k_range(&p, &bc, w)?;
    let d = sweep_dispersion(&p, &bc, w, range, flow_samples(cfg, kind)?, &source)?;
    let flow = spectral_flow(&d.branches, window.center())?.flow;
    let expected = analytic_reference(&p, &bc, w);

    let sigma = direct.sigma_e.round() as i32;
    let mut methods = vec![method_entry(&direct, None)];
    eprintln!("{:<28} {:>22} {:>22}", "method", "sigma_e", "J");
    eprintln!("{:<28} {:>22} {:>22}", "direct-integral", num(direct.sigma_e), num(direct.j));
    let mut agree = (direct.sigma_e - sigma as f64).abs() < tol;
    for (pr, r) in profiles.iter().zip(&switched) {
        let label = format!("switch ({})", serde_json::to_value(pr).unwrap_or_default().as_str().unwrap_or(""));
        eprintln!("{:<28} {:>22} {:>22}", label, num(r.sigma_e), num(r.j));
        agree &= (r.sigma_e - sigma as f64).abs() < tol;
        methods.push(method_entry(r, Some(*pr)));
    }
    eprintln!("{:<28} {:>22}", "spectral flow", flow);
    if let Some(s) = expected {
        eprintln!("{:<28} {:>22}", "closed form", s);
    }
    agree &= flow == sigma && expected.is_none_or(|s| s == sigma);

    emit(
        cfg.output.as_deref(),
        &json(&json!({
            "sigma_e": sigma,
            "flow": flow,
            "sigma_bulk": sigma_bulk(&p),
            "sigma_e_analytic": expected,
            "methods": methods,
            "window": [window.lo, window.hi],
            "source": kind,
            "tolerance": tol,
            "agree": agree,
        }))?,
    )?;
    if agree {
        Ok(())
    } else {
        Err(CliError::Check("edge-current methods and spectral flow disagree".into()))
    }
}

pub fn perturb_scan(cfg: &RunConfig) -> Result<(), CliError> {
    let p = cfg.params()?;
    let bc = cfg.boundary()?;
    let seed = cfg.seed.unwrap_or(1);
    let count = cfg.count.unwrap_or(10);
    let max_norm = cfg.max_norm.unwrap_or(0.8) * p.gap_edge();
    let length = cfg.length.unwrap_or(1.0) * p.compton_length();
    let n = cfg.samples(129)?;
    let family = PerturbationSpec::random_family(seed, count, max_norm, length);
    let report = stability_scan(&p, &bc, &family, n)?;
    let holds = report.holds();
    emit(
        cfg.output.as_deref(),
        &json(&json!({
            "seed": seed,
            "count": count,
            "max_norm": max_norm,
            "unperturbed_flow": report.unperturbed_flow,
            "sigma_e_analytic": sigma_edge_analytic(&p, &bc),
            "entries": report.entries,
            "holds": holds,
        }))?,
    )?;
    if holds {
        Ok(())
    } else {
        Err(CliError::Check("a perturbation below the gap changed the flow".into()))
    }
}

/// Largest distance between Bloch levels and the lattice fibers at the
/// folded momenta, or `None` when the level counts differ.
fn folding_deviation(
    p: &PhysParams,
    bc: &BoundaryParam,
    bg: &BlochGrid,
    thetas: &[f64],
    levels: &[Vec<f64>],
    window: &EnergyWindow,
) -> Result<Option<f64>, CliError> {
    let per_theta = thetas
        .par_iter()
        .zip(levels)
        .map(|(&theta, got)| {
            let mut want = Vec::new();
            for (_, k) in bg.mode_momenta(theta) {
                let f = assemble_fiber(k, p, bc, None, &bg.grid, 1.0)?;
                want.extend(eig_in_gap(&f, window)?.into_iter().map(|s| s.energy));
            }
            want.sort_by(f64::total_cmp);
            Ok((want.len() == got.len()).then(|| {
                want.iter()
                    .zip(got)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            }))
        })
        .collect::<Result<Vec<_>, dirac_edge::Error>>()?;
    Ok(per_theta
        .into_iter()
        .try_fold(0.0f64, |acc, d| d.map(|d| acc.max(d))))
}

pub fn bloch(cfg: &RunConfig) -> Result<(), CliError> {
    let p = cfg.params()?;
    let bc = cfg.boundary()?;
    let lc = p.compton_length();
    let period = cfg.period.unwrap_or(2.0 * PI * lc);
    let w = match &cfg.periodic {
        Some(w) => {
            w.validate()?;
            if (w.period - period).abs() > 1e-12 * period {
                return Err(CliError::Usage(format!(
                    "perturbation period {} differs from --period {period}",
                    w.period
                )));
            }
            (!w.is_zero()).then_some(w)
        }
        None => None,
    };
    let grid = Grid1D::new(cfg.spacing.unwrap_or(0.05) * lc, cfg.sites.unwrap_or(256))?;
    let bg = BlochGrid::new(
        grid,
        period,
        cfg.modes.unwrap_or(16),
        cfg.theta_samples.unwrap_or(64),
    )?;
    bg.check(&p)?;
    let window = match cfg.window {
        Some(_) => cfg.window(&p, 0.0)?,
        None => default_bloch_window(&p, w)?,
    };
    let bands = bloch_bands(&p, &bc, w, &bg, &window, 1.0)?;
    let f = bloch_spectral_flow(&bands, cfg.reference.unwrap_or(0.0))?;

    let mut csv = Csv::new(&["theta", "level", "energy", "sigma2", "tail_mass", "branch_id"]);
    for (theta, levels) in bands.theta.iter().zip(&bands.levels) {
        for (i, l) in levels.iter().enumerate() {
            let branch = bands.branches.iter().find(|b| {
                b.k2.iter()
                    .zip(&b.energy)
                    .any(|(t, e)| t == theta && *e == l.energy)
            });
            csv.row(&[
                num(*theta),
                i.to_string(),
                num(l.energy),
                num(l.sigma2),
                num(l.tail_mass),
                branch.map(|b| b.id.to_string()).unwrap_or_default(),
            ]);
        }
    }
    emit(cfg.output.as_deref(), &csv.into_string())?;

    let folding = if w.is_none() {
        let energies: Vec<Vec<f64>> = bands
            .levels
            .iter()
            .map(|l| l.iter().map(|s| s.energy).collect())
            .collect();
        Some(folding_deviation(&p, &bc, &bg, &bands.theta, &energies, &window)?)
    } else {
        None
    };
    let folding_ok = folding.is_none_or(|d| d.is_some_and(|d| d < 1e-8));
    let expected = w.is_none().then(|| sigma_edge_analytic(&p, &bc));
    let flow_ok = expected.is_none_or(|s| s == f.flow);
    write_summary(
        cfg,
        &json!({
            "command": "bloch",
            "flow": f.flow,
            "reference": f.reference,
            "crossings": f.crossings,
            "sigma_e_analytic": expected,
            "window": [window.lo, window.hi],
            "sup_norm": w.map(|w| w.sup_norm_bound()).unwrap_or(0.0),
            "grid": bg,
            "folding_max_deviation": folding.flatten(),
            "folding_passed": folding.map(|_| folding_ok),
        }),
    )?;
    if !folding_ok {
        return Err(CliError::Check(match folding {
            Some(Some(d)) => format!("Bloch levels deviate from folded fibers by {d:e}"),
            _ => "Bloch level count differs from folded fibers".into(),
        }));
    }
    if !flow_ok {
        return Err(CliError::Check(format!(
            "Bloch flow {} differs from the closed form {}",
            f.flow,
            expected.unwrap_or_default()
        )));
    }
    Ok(())
}

pub fn selftest(cfg: &RunConfig) -> Result<(), CliError> {
    let ids: Vec<u32> = match &cfg.criteria {
        Some(ids) => ids.clone(),
        None => acceptance::CRITERIA.iter().map(|c| c.0).collect(),
    };
    let mut text = String::new();
    let mut failed = 0;
    for id in ids {
        if !acceptance::CRITERIA.iter().any(|c| c.0 == id) {
            return Err(CliError::Usage(format!("unknown criterion {id}")));
        }
        let r = acceptance::run(id);
        eprintln!("{r}");
        text.push_str(&format!("{r}\n"));
        failed += usize::from(!r.passed);
    }
    emit(cfg.output.as_deref(), &text)?;
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Check(format!("{failed} criteria failed")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_hits_both_ends() {
        let x = linspace(-3.0, 3.0, 257);
        assert_eq!(x[0], -3.0);
        assert_eq!(x[256], 3.0);
        assert_eq!(x[128], 0.0);
    }
}
