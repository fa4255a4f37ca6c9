//! Closed-form spectrum, edge states and conductivities.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{boundary_residual, BoundaryParam, PhysParams, Spinor2, Zeta};

/// Fiber spectrum summary at one `k₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralVerdict {
    pub has_gap_state: bool,
    pub e_g: Option<f64>,
    pub e_b: f64,
}

/// Normalized edge state `ψ(x₁) = norm · spinor · e^{-κx₁}`.
///
/// `spinor` is the unit boundary value, gauge fixed with `v ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapState {
    pub k2: f64,
    pub energy: f64,
    pub kappa: f64,
    pub spinor: Spinor2,
    pub norm: f64,
}

impl GapState {
    pub fn at(&self, x: f64) -> Spinor2 {
        self.spinor
            .scale(Complex64::new(self.norm * (-self.kappa * x).exp(), 0.0))
    }
}

/// Lower edge of the upper bulk band, `√((ħck₂)² + (mc²)²)`.
pub fn bulk_edge(k2: f64, p: &PhysParams) -> f64 {
    (p.hbar_c() * k2).hypot(p.rest_energy())
}

/// Strict form of the existence condition `ħk₂(ζ²-1) > -2mcζ`.
fn gap_condition(k2: f64, p: &PhysParams, zeta: f64) -> bool {
    p.hbar * k2 * (zeta * zeta - 1.0) > -2.0 * p.m * p.c * zeta
}

fn gap_energy(k2: f64, p: &PhysParams, zeta: f64) -> f64 {
    (2.0 * zeta * p.hbar_c() * k2 + (1.0 - zeta * zeta) * p.rest_energy()) / (1.0 + zeta * zeta)
}

/// Bulk edge and, when it exists, the gap eigenvalue of the fiber at `k₂`.
///
/// `ζ = ∞` never has a gap state: its formal eigenvalue is the band edge.
pub fn gap_eigenvalue(k2: f64, p: &PhysParams, bc: &BoundaryParam) -> SpectralVerdict {
    let e_b = bulk_edge(k2, p);
    let e_g = match bc.zeta() {
        Zeta::Finite(z) if p.m != 0.0 && gap_condition(k2, p, z) => Some(gap_energy(k2, p, z)),
        _ => None,
    };
    SpectralVerdict {
        has_gap_state: e_g.is_some(),
        e_g,
        e_b,
    }
}

/// Momentum at which the gap branch merges with the bulk, `None` for `ζ² = 1`.
pub fn k_crit(p: &PhysParams, bc: &BoundaryParam) -> Result<Option<f64>> {
    match bc.zeta() {
        Zeta::Infinite => Err(Error::InvalidParameter(
            "k_crit is undefined for zeta = inf".into(),
        )),
        Zeta::Finite(z) => {
            let d = z * z - 1.0;
            if d == 0.0 {
                Ok(None)
            } else {
                Ok(Some(-2.0 * p.m * p.c * z / (p.hbar * d)))
            }
        }
    }
}

/// Whether the gap branch runs through the whole gap, i.e. `mζ > 0`.
pub fn crosses_gap(p: &PhysParams, bc: &BoundaryParam) -> bool {
    match bc.zeta() {
        Zeta::Finite(z) => p.m * z > 0.0,
        Zeta::Infinite => false,
    }
}

/// Edge conductivity in units of `e²/h`.
pub fn sigma_edge_analytic(p: &PhysParams, bc: &BoundaryParam) -> i32 {
    if crosses_gap(p, bc) {
        p.mass_sign() as i32
    } else {
        0
    }
}

/// Bulk Hall conductivity `½ sgn(m)` in units of `e²/h`.
pub fn sigma_bulk(p: &PhysParams) -> f64 {
    0.5 * p.mass_sign()
}

/// Mean of the edge conductivities for `ζ` and `-ζ`.
pub fn edge_mean(p: &PhysParams, bc: &BoundaryParam) -> f64 {
    0.5 * (sigma_edge_analytic(p, bc) + sigma_edge_analytic(p, &bc.negated())) as f64
}

/// `Q_E = iħcκσ₁ + ħck₂σ₂ + mc²σ₃`, the symbol of the fiber operator on
/// `e^{-κx₁}`. Row-major 2×2.
pub fn q_matrix(k2: f64, kappa: f64, p: &PhysParams) -> [[Complex64; 2]; 2] {
    let hc = p.hbar_c();
    let m = p.rest_energy();
    let i = Complex64::new(0.0, 1.0);
    [
        [Complex64::new(m, 0.0), i * hc * (kappa - k2)],
        [i * hc * (kappa + k2), Complex64::new(-m, 0.0)],
    ]
}

/// Null vector of `Q_E - E`, taken from whichever row gives the larger
/// vector so that `E = 0` and `E = ±mc²` need no special casing.
fn q_null_vector(q: &[[Complex64; 2]; 2], e: f64) -> Spinor2 {
    let a = q[0][0] - e;
    let d = q[1][1] - e;
    let from_row0 = Spinor2::new(q[0][1], -a);
    let from_row1 = Spinor2::new(-d, q[1][0]);
    if from_row0.norm_sqr() >= from_row1.norm_sqr() {
        from_row0
    } else {
        from_row1
    }
}

/// Residual `‖(Q_E - E)s‖ / (‖s‖ · scale)`.
pub fn q_residual(q: &[[Complex64; 2]; 2], e: f64, s: &Spinor2) -> f64 {
    let r0 = (q[0][0] - e) * s.v + q[0][1] * s.w;
    let r1 = q[1][0] * s.v + (q[1][1] - e) * s.w;
    let scale = q
        .iter()
        .flatten()
        .map(|x| x.norm())
        .fold(e.abs(), f64::max)
        .max(f64::MIN_POSITIVE);
    (r0.norm_sqr() + r1.norm_sqr()).sqrt() / (s.norm() * scale)
}

/// The normalized edge state at `k₂`.
pub fn gap_state(k2: f64, p: &PhysParams, bc: &BoundaryParam) -> Result<GapState> {
    p.require_gap()?;
    let verdict = gap_eigenvalue(k2, p, bc);
    let e = verdict.e_g.ok_or_else(|| Error::NoGapState {
        k2,
        reason: "existence condition fails".into(),
    })?;
    let hc = p.hbar_c();
    let kappa2 = (hc * k2).powi(2) + p.rest_energy().powi(2) - e * e;
    if kappa2 <= 0.0 {
        return Err(Error::NoGapState {
            k2,
            reason: "energy is not below the bulk edge".into(),
        });
    }
    let kappa = kappa2.sqrt() / hc;
    let q = q_matrix(k2, kappa, p);
    let spinor = q_null_vector(&q, e).normalized().gauge_fixed();
    let res = q_residual(&q, e, &spinor);
    if res > 1e-10 {
        return Err(Error::NoGapState {
            k2,
            reason: format!("eigenvector residual {res:e}"),
        });
    }
    let bres = boundary_residual(&spinor, bc)?;
    if bres > 1e-10 {
        return Err(Error::NoGapState {
            k2,
            reason: format!("boundary residual {bres:e}"),
        });
    }
    Ok(GapState {
        k2,
        energy: e,
        kappa,
        spinor,
        norm: (2.0 * kappa).sqrt(),
    })
}

/// `⟨ψ|σ₂|ψ⟩` of a normalized edge state; equals `(1/ħc) dE_g/dk₂`.
pub fn current_expectation(state: &GapState) -> f64 {
    state.spinor.tangential_current() / state.spinor.norm_sqr()
}

/// Closed form of [`current_expectation`], `2ζ/(1+ζ²)`.
pub fn slope_law(bc: &BoundaryParam) -> f64 {
    match bc.zeta() {
        Zeta::Finite(z) => 2.0 * z / (1.0 + z * z),
        Zeta::Infinite => 0.0,
    }
}

/// Momenta where the unperturbed branch leaves the gap at `±|m|c²`,
/// `(mc/ħ)ζ` and `-(mc/ħ)/ζ`, in increasing order. `None` unless `mζ > 0`.
pub fn gap_exits(p: &PhysParams, bc: &BoundaryParam) -> Option<(f64, f64)> {
    if !crosses_gap(p, bc) {
        return None;
    }
    let z = bc.zeta().finite()?;
    let k0 = p.m * p.c / p.hbar;
    let (a, b) = (k0 * z, -k0 / z);
    Some((a.min(b), a.max(b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bc(z: f64) -> BoundaryParam {
        BoundaryParam::finite(z)
    }

    #[test]
    fn bulk_edge_examples() {
        assert_eq!(bulk_edge(0.0, &PhysParams::natural(1.0)), 1.0);
        assert_abs_diff_eq!(bulk_edge(3.0, &PhysParams::natural(4.0)), 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bulk_edge(-3.0, &PhysParams::natural(4.0)), 5.0, epsilon = 1e-15);
    }

    #[test]
    fn gap_eigenvalue_examples() {
        let v = gap_eigenvalue(0.3, &PhysParams::natural(1.0), &bc(1.0));
        assert!(v.has_gap_state);
        assert_abs_diff_eq!(v.e_g.unwrap(), 0.3, epsilon = 1e-15);
        let v = gap_eigenvalue(-0.5, &PhysParams::natural(1.0), &bc(0.0));
        assert_abs_diff_eq!(v.e_g.unwrap(), 1.0, epsilon = 1e-15);
        for k in [-2.0, 0.0, 0.7] {
            assert!(!gap_eigenvalue(k, &PhysParams::natural(-1.0), &bc(1.0)).has_gap_state);
        }
        let v = gap_eigenvalue(0.3, &PhysParams::natural(1.0), &BoundaryParam::infinite());
        assert!(!v.has_gap_state && v.e_g.is_none());
    }

    #[test]
    fn k_crit_examples() {
        let p = PhysParams::natural(1.0);
        assert_abs_diff_eq!(k_crit(&p, &bc(2.0)).unwrap().unwrap(), -4.0 / 3.0, epsilon = 1e-15);
        assert_eq!(k_crit(&p, &bc(1.0)).unwrap(), None);
        assert_abs_diff_eq!(k_crit(&p, &bc(0.5)).unwrap().unwrap(), 4.0 / 3.0, epsilon = 1e-15);
        assert!(k_crit(&p, &BoundaryParam::infinite()).is_err());
    }

    #[test]
    fn conductivity_examples() {
        let one = PhysParams::natural(1.0);
        assert!(crosses_gap(&one, &bc(1.0)));
        assert!(!crosses_gap(&one, &bc(-2.0)));
        assert!(crosses_gap(&PhysParams::natural(-1.0), &bc(-2.0)));
        assert_eq!(sigma_edge_analytic(&one, &bc(1.0)), 1);
        assert_eq!(sigma_edge_analytic(&PhysParams::natural(-2.0), &bc(-3.0)), -1);
        assert_eq!(sigma_edge_analytic(&one, &bc(0.0)), 0);
        assert_eq!(sigma_bulk(&one), 0.5);
        assert_eq!(sigma_bulk(&PhysParams::natural(-1.0)), -0.5);
        assert_eq!(edge_mean(&one, &bc(1.0)), 0.5);
    }

    #[test]
    fn gap_state_examples() {
        let one = PhysParams::natural(1.0);
        let s = gap_state(0.0, &one, &bc(1.0)).unwrap();
        assert_abs_diff_eq!(s.energy, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.kappa, 1.0, epsilon = 1e-15);
        let r = 0.5f64.sqrt();
        assert_abs_diff_eq!(s.spinor.v.re, r, epsilon = 1e-14);
        assert_abs_diff_eq!(s.spinor.w.im, r, epsilon = 1e-14);

        let s = gap_state(0.5, &one, &bc(1.0)).unwrap();
        assert_abs_diff_eq!(s.kappa, 1.0, epsilon = 1e-14);

        let s = gap_state(-1.0, &one, &bc(0.0)).unwrap();
        assert_abs_diff_eq!(s.energy, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.kappa, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.spinor.w.norm(), 0.0, epsilon = 1e-15);

        assert!(matches!(
            gap_state(0.0, &PhysParams::natural(-1.0), &bc(1.0)),
            Err(Error::NoGapState { .. })
        ));
    }

    #[test]
    fn gap_state_is_normalized_on_half_line() {
        let p = PhysParams::new(1.5, 0.7, 2.0, 1.0).unwrap();
        let s = gap_state(0.4, &p, &bc(2.0)).unwrap();
        // ∫₀^∞ |ψ|² = norm²·|s|²/(2κ)
        assert_abs_diff_eq!(s.norm * s.norm / (2.0 * s.kappa), 1.0, epsilon = 1e-14);
        let h = 1e-3 / s.kappa;
        let total: f64 = (0..40_000)
            .map(|i| s.at((i as f64 + 0.5) * h).norm_sqr() * h)
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn current_expectation_examples() {
        let one = PhysParams::natural(1.0);
        assert_abs_diff_eq!(
            current_expectation(&gap_state(0.2, &one, &bc(1.0)).unwrap()),
            1.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            current_expectation(&gap_state(-0.2, &one, &bc(0.0)).unwrap()),
            0.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            current_expectation(&gap_state(0.2, &one, &bc(3.0)).unwrap()),
            0.6,
            epsilon = 1e-14
        );
    }

    #[test]
    fn exits_bound_the_in_gap_segment() {
        let p = PhysParams::natural(1.0);
        let (a, b) = gap_exits(&p, &bc(0.5)).unwrap();
        assert_abs_diff_eq!(gap_eigenvalue(a, &p, &bc(0.5)).e_g.unwrap(), -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(gap_eigenvalue(b, &p, &bc(0.5)).e_g.unwrap(), 1.0, epsilon = 1e-14);
        assert!(gap_exits(&p, &bc(-0.5)).is_none());
    }
}
