//! Bound states of the fiber operator by inward Runge–Kutta integration of
//! the decaying solution and bisection on the boundary condition.
//!
//! For real `m₁` and `V` the first-order system maps `(real v, imaginary w)`
//! to itself, so the decaying solution can be carried with `v` real and `w`
//! imaginary and the matching condition becomes a real scalar equation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::GapState;
use crate::error::{Error, Result};
use crate::model::{boundary_residual, BoundaryParam, EnergyWindow, PhysParams, Spinor2, Zeta};
use crate::perturbation::PerturbationSpec;
use crate::quad::{bisect, simpson_uniform};

/// Relative size of the non-real part tolerated in the matching function.
pub const REALNESS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingOptions {
    /// Step as a fraction of the Compton length (also capped by `0.05/κ`).
    pub step_fraction: f64,
    /// Tail length `x_max - X_W` in decay lengths when matching.
    pub match_decay_lengths: f64,
    /// Tail length in decay lengths when normalizing a state.
    pub norm_decay_lengths: f64,
    pub scan_points: usize,
    pub energy_tol: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            step_fraction: 0.01,
            match_decay_lengths: 10.0,
            norm_decay_lengths: 25.0,
            scan_points: 64,
            energy_tol: 1e-12,
        }
    }
}

impl ShootingOptions {
    /// Coarser settings for dense sweeps where only branch topology matters.
    pub fn fast() -> Self {
        Self {
            step_fraction: 0.04,
            scan_points: 48,
            energy_tol: 1e-10,
            ..Self::default()
        }
    }

    fn step_for(&self, p: &PhysParams, kappa: f64) -> f64 {
        (self.step_fraction * p.compton_length()).min(0.05 / kappa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub energy: f64,
    /// `f(E) - ζ` with `f = w/(iv)`, or `v/(w/i)` for `ζ = ∞`.
    pub residual: f64,
    pub bracket: (f64, f64),
    pub evaluations: usize,
}

/// Numerically integrated edge state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericGapState {
    pub state: GapState,
    /// `⟨ψ|σ₂|ψ⟩` by quadrature.
    pub sigma2: f64,
    pub x: Vec<f64>,
    /// Normalized wavefunction on `x`.
    pub psi: Vec<Spinor2>,
}

/// Constant-coefficient data of the region `x₁ ≥ X_W`.
struct Tail {
    /// Decaying direction `(v, w/i)`.
    dir: (f64, f64),
    kappa: f64,
}

fn tail(e: f64, k2: f64, p: &PhysParams, w: Option<&PerturbationSpec>) -> Result<Tail> {
    let (m1, v) = w.map(|w| w.tail()).unwrap_or((0.0, 0.0));
    let hc = p.hbar_c();
    let ep = e - v;
    let mass = p.rest_energy() + m1;
    let k = hc * k2;
    let kappa2 = k * k + mass * mass - ep * ep;
    if !(kappa2 > 0.0) {
        return Err(Error::NoDecayingDirection { energy: e, k2 });
    }
    let kappa = kappa2.sqrt() / hc;
    // real system (v, w/i)' = A (v, w/i), A = [[k, -(E'+M)], [E'-M, -k]]/ħc
    let a11 = k / hc;
    let a12 = -(ep + mass) / hc;
    let a21 = (ep - mass) / hc;
    let a22 = -k / hc;
    let u1 = (a12, -kappa - a11);
    let u2 = (-kappa - a22, a21);
    let n1 = u1.0.hypot(u1.1);
    let n2 = u2.0.hypot(u2.1);
    let dir = if n1 >= n2 {
        (u1.0 / n1, u1.1 / n1)
    } else {
        (u2.0 / n2, u2.1 / n2)
    };
    Ok(Tail { dir, kappa })
}

/// Right-hand side `ψ' = A(x)ψ`.
struct Rhs<'a> {
    e: f64,
    k: f64,
    mc2: f64,
    inv_hc: f64,
    w: Option<&'a PerturbationSpec>,
}

impl Rhs<'_> {
    #[inline]
    fn eval(&self, x: f64, psi: [Complex64; 2]) -> [Complex64; 2] {
        let (m1, v) = self.w.map(|w| w.at(x)).unwrap_or((0.0, 0.0));
        let ep = self.e - v;
        let mass = self.mc2 + m1;
        let i = Complex64::new(0.0, 1.0);
        [
            (psi[0] * self.k + i * (ep + mass) * psi[1]) * self.inv_hc,
            (i * (ep - mass) * psi[0] - psi[1] * self.k) * self.inv_hc,
        ]
    }

    fn rk4(&self, x: f64, h: f64, y: [Complex64; 2]) -> [Complex64; 2] {
        let add = |a: [Complex64; 2], b: [Complex64; 2], s: f64| [a[0] + b[0] * s, a[1] + b[1] * s];
        let k1 = self.eval(x, y);
        let k2 = self.eval(x + 0.5 * h, add(y, k1, 0.5 * h));
        let k3 = self.eval(x + 0.5 * h, add(y, k2, 0.5 * h));
        let k4 = self.eval(x + h, add(y, k3, h));
        [
            y[0] + (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) * (h / 6.0),
            y[1] + (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) * (h / 6.0),
        ]
    }
}

fn rhs<'a>(e: f64, k2: f64, p: &PhysParams, w: Option<&'a PerturbationSpec>) -> Rhs<'a> {
    Rhs {
        e,
        k: p.hbar_c() * k2,
        mc2: p.rest_energy(),
        inv_hc: 1.0 / p.hbar_c(),
        w: w.filter(|w| !w.is_zero()),
    }
}

fn cutoff(w: Option<&PerturbationSpec>) -> f64 {
    w.map(|w| w.cutoff()).unwrap_or(0.0)
}

/// Integrates the decaying solution from `x_max` to `0`; returns the unit
/// boundary value `(v, w)` without gauge fixing (`v` real, `w` imaginary).
fn integrate_raw(
    e: f64,
    k2: f64,
    p: &PhysParams,
    w: Option<&PerturbationSpec>,
    x_max: f64,
    step: f64,
) -> Result<[Complex64; 2]> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    let t = tail(e, k2, p, w)?;
    if t.kappa * step > 0.1 {
        return Err(Error::StepTooLarge {
            step,
            kappa: t.kappa,
        });
    }
    let x_w = cutoff(w);
    if !(x_max >= x_w) {
        return Err(Error::InvalidParameter(format!(
            "x_max = {x_max} lies inside the perturbation support (X_W = {x_w})"
        )));
    }
    // On [X_W, x_max] the coefficients are constant and the decaying
    // eigenvector is carried unchanged (up to scale), so integration starts
    // at X_W.
    let mut y = [
        Complex64::new(t.dir.0, 0.0),
        Complex64::new(0.0, t.dir.1),
    ];
    if x_w > 0.0 {
        let f = rhs(e, k2, p, w);
        let n = (x_w / step).ceil().max(1.0) as usize;
        let h = x_w / n as f64;
        for i in 0..n {
            let x = x_w - i as f64 * h;
            y = f.rk4(x, -h, y);
            let nrm = (y[0].norm_sqr() + y[1].norm_sqr()).sqrt();
            y = [y[0] / nrm, y[1] / nrm];
        }
    }
    Ok(y)
}

/// Boundary spinor of the solution decaying at infinity, gauge fixed with
/// `v ≥ 0` and unit norm.
pub fn integrate_decaying(
    e: f64,
    k2: f64,
    p: &PhysParams,
    w: Option<&PerturbationSpec>,
    x_max: f64,
    step: f64,
) -> Result<Spinor2> {
    p.validate()?;
    let y = integrate_raw(e, k2, p, w, x_max, step)?;
    Ok(Spinor2::new(y[0], y[1]).gauge_fixed())
}

struct Matcher<'a> {
    k2: f64,
    p: &'a PhysParams,
    w: Option<&'a PerturbationSpec>,
    opts: &'a ShootingOptions,
    sin_b: f64,
    cos_b: f64,
}

impl Matcher<'_> {
    /// Real boundary coordinates `(v, w/i)`.
    fn boundary(&self, e: f64) -> Result<(f64, f64)> {
        let t = tail(e, self.k2, self.p, self.w)?;
        let step = self.opts.step_for(self.p, t.kappa);
        let x_max = cutoff(self.w) + self.opts.match_decay_lengths / t.kappa;
        let y = integrate_raw(e, self.k2, self.p, self.w, x_max, step)?;
        let imag = (y[0].im.abs() + y[1].re.abs()) / (y[0].norm_sqr() + y[1].norm_sqr()).sqrt();
        if imag > REALNESS_TOL {
            return Err(Error::ComplexMatching(imag));
        }
        Ok((y[0].re, y[1].im))
    }

    /// `sin(φ-β)cos(φ-β)` for the boundary direction angle `φ`; invariant
    /// under `ψ → -ψ`. Zero on the boundary condition (`φ = β`) and on the
    /// orthogonal direction (`φ = β + π/2`).
    fn g(&self, e: f64) -> Result<f64> {
        let (v, w) = self.boundary(e)?;
        let (a, b) = self.factors(v, w);
        Ok(a * b / (v * v + w * w))
    }

    fn factors(&self, v: f64, w: f64) -> (f64, f64) {
        (
            w * self.cos_b - v * self.sin_b,
            v * self.cos_b + w * self.sin_b,
        )
    }
}

/// All energies in `window` where the decaying solution satisfies the
/// boundary condition, ascending.
pub fn match_boundary(
    k2: f64,
    p: &PhysParams,
    bc: &BoundaryParam,
    w: Option<&PerturbationSpec>,
    window: &EnergyWindow,
    opts: &ShootingOptions,
) -> Result<Vec<MatchResult>> {
    p.require_gap()?;
    if opts.scan_points < 2 {
        return Err(Error::InvalidParameter("scan needs at least 2 points".into()));
    }
    let beta = match bc.zeta() {
        Zeta::Finite(z) => z.atan(),
        Zeta::Infinite => std::f64::consts::FRAC_PI_2,
    };
    let m = Matcher {
        k2,
        p,
        w,
        opts,
        sin_b: beta.sin(),
        cos_b: beta.cos(),
    };
    let n = opts.scan_points;
    let es: Vec<f64> = (0..n)
        .map(|i| window.lo + window.width() * i as f64 / (n - 1) as f64)
        .collect();
    let gs = es.iter().map(|&e| m.g(e)).collect::<Result<Vec<f64>>>()?;
    let mut roots = Vec::new();
    let mut evaluations = n;
    for i in 0..n - 1 {
        let (ga, gb) = (gs[i], gs[i + 1]);
        let sign_change = (ga < 0.0 && gb > 0.0) || (ga > 0.0 && gb < 0.0) || ga == 0.0;
        if !sign_change {
            continue;
        }
        let mut failure = None;
        let br = bisect(
            |e| match m.g(e) {
                Ok(v) => v,
                Err(err) => {
                    failure.get_or_insert(err);
                    0.0
                }
            },
            es[i],
            es[i + 1],
            ga,
            gb,
            opts.energy_tol,
        );
        if let Some(err) = failure {
            return Err(err);
        }
        evaluations += br.evaluations + 1;
        let (v, wr) = m.boundary(br.root)?;
        let (on_bc, orthogonal) = m.factors(v, wr);
        if on_bc.abs() > orthogonal.abs() {
            continue;
        }
        let residual = match bc.zeta() {
            Zeta::Finite(z) => wr / v - z,
            Zeta::Infinite => v / wr,
        };
        roots.push(MatchResult {
            energy: br.root,
            residual,
            bracket: (br.lo, br.hi),
            evaluations,
        });
    }
    roots.dedup_by(|a, b| (a.energy - b.energy).abs() <= 2.0 * opts.energy_tol);
    Ok(roots)
}

/// Re-integrates a matched state on a grid, normalizes it by quadrature and
/// measures its decay rate and current.
pub fn numeric_gap_state(
    mr: &MatchResult,
    k2: f64,
    p: &PhysParams,
    bc: &BoundaryParam,
    w: Option<&PerturbationSpec>,
    opts: &ShootingOptions,
) -> Result<NumericGapState> {
    p.require_gap()?;
    let e = mr.energy;
    let t = tail(e, k2, p, w)?;
    let step0 = opts.step_for(p, t.kappa);
    let x_max = cutoff(w) + opts.norm_decay_lengths / t.kappa;
    let mut n = (x_max / step0).ceil() as usize;
    n += n % 2;
    let h = x_max / n as f64;
    let f = rhs(e, k2, p, w);

    // inward from x_max, tracking log growth relative to the boundary
    let mut y = [
        Complex64::new(t.dir.0, 0.0),
        Complex64::new(0.0, t.dir.1),
    ];
    let mut unit = vec![[Complex64::new(0.0, 0.0); 2]; n + 1];
    let mut log_amp = vec![0.0; n + 1];
    unit[n] = y;
    for i in (0..n).rev() {
        let x = (i + 1) as f64 * h;
        y = f.rk4(x, -h, y);
        let nrm = (y[0].norm_sqr() + y[1].norm_sqr()).sqrt();
        if !(nrm.is_finite() && nrm > 0.0) {
            return Err(Error::Normalization("integration overflow".into()));
        }
        y = [y[0] / nrm, y[1] / nrm];
        unit[i] = y;
        log_amp[i] = log_amp[i + 1] + nrm.ln();
    }
    // log_amp[i] - log_amp[0] is ln|ψ(x_i)| for |ψ(0)| = 1
    let density: Vec<f64> = (0..=n)
        .map(|i| (2.0 * (log_amp[i] - log_amp[0])).exp())
        .collect();
    let tail_mass = density[n] / (2.0 * t.kappa);
    let total = simpson_uniform(&density, h) + tail_mass;
    if !(total.is_finite() && total > 0.0) || tail_mass > 1e-8 * total {
        return Err(Error::Normalization(format!(
            "tail not decayed at x_max = {x_max} (tail fraction {:e})",
            tail_mass / total
        )));
    }
    let amp: Vec<f64> = density.iter().map(|d| (d / total).sqrt()).collect();
    let psi: Vec<Spinor2> = unit
        .iter()
        .zip(&amp)
        .map(|(u, a)| Spinor2::new(u[0] * *a, u[1] * *a))
        .collect();
    let current: Vec<f64> = psi.iter().map(|s| s.tangential_current()).collect();
    let sigma2 = simpson_uniform(&current, h) + current[n] / (2.0 * t.kappa);

    // decay rate from the log slope over the last fifth of the grid
    let ia = n - n / 5;
    let kappa_est = (log_amp[ia] - log_amp[n]) / ((n - ia) as f64 * h);

    let spinor = Spinor2::new(unit[0][0], unit[0][1]).gauge_fixed();
    let bres = boundary_residual(&spinor, bc)?;
    if bres > 1e-6 {
        return Err(Error::NoGapState {
            k2,
            reason: format!("energy {e} violates the boundary condition (residual {bres:e})"),
        });
    }
    Ok(NumericGapState {
        state: GapState {
            k2,
            energy: e,
            kappa: kappa_est,
            spinor,
            norm: amp[0],
        },
        sigma2,
        x: (0..=n).map(|i| i as f64 * h).collect(),
        psi,
    })
}

/// Default search window for a fiber: the part of the bulk gap inside the
/// tail gap, pulled in by `margin·|m|c²` on both sides.
pub fn default_window(
    k2: f64,
    p: &PhysParams,
    w: Option<&PerturbationSpec>,
    margin: f64,
) -> Result<EnergyWindow> {
    p.require_gap()?;
    let (m1, v) = w.map(|w| w.tail()).unwrap_or((0.0, 0.0));
    let tail_edge = (p.hbar_c() * k2).hypot(p.rest_energy() + m1);
    let edge = p.gap_edge();
    let pad = margin * edge;
    let lo = (-edge).max(v - tail_edge) + pad;
    let hi = edge.min(v + tail_edge) - pad;
    EnergyWindow::new(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{gap_eigenvalue, gap_state};
    use crate::perturbation::Profile;
    use approx::assert_abs_diff_eq;

    fn bc(z: f64) -> BoundaryParam {
        BoundaryParam::finite(z)
    }

    #[test]
    fn decaying_spinor_examples() {
        let one = PhysParams::natural(1.0);
        let s = integrate_decaying(0.0, 0.0, &one, None, 10.0, 0.01).unwrap();
        let r = 0.5f64.sqrt();
        assert_abs_diff_eq!(s.v.re, r, epsilon = 1e-8);
        assert_abs_diff_eq!(s.w.im, r, epsilon = 1e-8);
        let s = integrate_decaying(1.0, -1.0, &one, None, 10.0, 0.01).unwrap();
        assert_abs_diff_eq!(s.v.re, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(s.w.norm(), 0.0, epsilon = 1e-8);
        for (e, k) in [(0.3, 0.2), (-0.7, 1.5), (0.95, -0.1)] {
            let s = integrate_decaying(e, k, &one, None, 20.0, 0.01).unwrap();
            let ratio = s.w / (Complex64::new(0.0, 1.0) * s.v);
            assert!(ratio.im.abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let one = PhysParams::natural(1.0);
        assert!(matches!(
            integrate_decaying(1.5, 0.0, &one, None, 10.0, 0.01),
            Err(Error::NoDecayingDirection { .. })
        ));
        assert!(matches!(
            integrate_decaying(0.0, 0.0, &one, None, 10.0, 0.5),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn match_boundary_examples() {
        let one = PhysParams::natural(1.0);
        let win = EnergyWindow::new(-0.9, 0.9).unwrap();
        let opts = ShootingOptions::default();
        let r = match_boundary(0.3, &one, &bc(1.0), None, &win, &opts).unwrap();
        assert_eq!(r.len(), 1);
        assert_abs_diff_eq!(r[0].energy, 0.3, epsilon = 1e-8);
        assert!(r[0].residual.abs() < 1e-9);
        let none = match_boundary(0.0, &PhysParams::natural(-1.0), &bc(1.0), None, &win, &opts)
            .unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn ramp_potential_shift_is_bounded() {
        let one = PhysParams::natural(1.0);
        let w = PerturbationSpec::potential(Profile::PiecewisePolynomial {
            knots: vec![0.0, 1.0],
            coeffs: vec![vec![0.3, -0.3]],
        })
        .unwrap();
        let win = EnergyWindow::new(-0.9, 0.9).unwrap();
        let opts = ShootingOptions::default();
        let r = match_boundary(0.0, &one, &bc(1.0), Some(&w), &win, &opts).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0].energy.abs() <= 0.3 + 1e-12);
        let fine = ShootingOptions {
            step_fraction: 0.005,
            ..opts
        };
        let r2 = match_boundary(0.0, &one, &bc(1.0), Some(&w), &win, &fine).unwrap();
        assert_abs_diff_eq!(r[0].energy, r2[0].energy, epsilon = 1e-6);
    }

    #[test]
    fn numeric_state_examples() {
        let one = PhysParams::natural(1.0);
        let win = EnergyWindow::new(-0.9, 0.9).unwrap();
        let opts = ShootingOptions::default();
        let r = match_boundary(0.0, &one, &bc(1.0), None, &win, &opts).unwrap();
        let s = numeric_gap_state(&r[0], 0.0, &one, &bc(1.0), None, &opts).unwrap();
        assert_abs_diff_eq!(s.state.kappa, 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(s.sigma2, 1.0, epsilon = 1e-6);

        let r = match_boundary(1.0, &one, &bc(2.0), None, &win, &opts).unwrap();
        assert_abs_diff_eq!(r[0].energy, 0.2, epsilon = 1e-8);
        let exact = gap_eigenvalue(1.0, &one, &bc(2.0)).e_g.unwrap();
        assert_abs_diff_eq!(exact, 0.2, epsilon = 1e-15);
        let s = numeric_gap_state(&r[0], 1.0, &one, &bc(2.0), None, &opts).unwrap();
        let a = gap_state(1.0, &one, &bc(2.0)).unwrap();
        assert!(s.state.spinor.inner(&a.spinor).norm() > 1.0 - 1e-10);
        assert_abs_diff_eq!(s.sigma2, 0.8, epsilon = 1e-6);
        assert_abs_diff_eq!(s.state.norm, a.norm, epsilon = 1e-6);
    }

    #[test]
    fn infinite_zeta_has_no_in_gap_root() {
        let one = PhysParams::natural(1.0);
        let win = EnergyWindow::new(-0.95, 0.95).unwrap();
        for k in [-1.0, 0.0, 0.5] {
            let r = match_boundary(
                k,
                &one,
                &BoundaryParam::infinite(),
                None,
                &win,
                &ShootingOptions::default(),
            )
            .unwrap();
            assert!(r.is_empty(), "k = {k}: {r:?}");
        }
    }

    #[test]
    fn default_window_respects_tail_gap() {
        let one = PhysParams::natural(1.0);
        let w = default_window(0.0, &one, None, 0.02).unwrap();
        assert_abs_diff_eq!(w.hi, 0.98, epsilon = 1e-15);
        let shifted = PerturbationSpec::potential(Profile::Constant { value: 0.5 }).unwrap();
        let w = default_window(0.0, &one, Some(&shifted), 0.0).unwrap();
        assert_abs_diff_eq!(w.lo, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w.hi, 1.0, epsilon = 1e-15);
    }
}
