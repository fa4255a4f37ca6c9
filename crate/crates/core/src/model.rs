//! Shared physical parameters, the boundary-condition parameter, energy
//! windows and switch functions.
//!
//! The half-plane Dirac operator `ħc(-iσ·∇) + σ₃mc²` is restricted to
//! `x₁ ≥ 0` and closed by the local boundary condition `w(0) = iζ v(0)`,
//! with `ζ = ∞` meaning `v(0) = 0`. The same extension is labelled by a
//! point `z` on the unit circle through `(1 + z)/(1 - z) = iζ`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance on `|z| = 1` accepted by [`zeta_from_z`].
pub const UNIT_CIRCLE_TOL: f64 = 1e-9;

/// Mass, Planck constant, speed of light and charge.
///
/// All formulas carry the constants explicitly; the default is natural
/// units `ħ = c = e = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub m: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one")]
    pub e: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for PhysParams {
    fn default() -> Self {
        Self::natural(1.0)
    }
}

impl PhysParams {
    /// Natural units with the given (signed) mass.
    pub fn natural(m: f64) -> Self {
        Self {
            m,
            hbar: 1.0,
            c: 1.0,
            e: 1.0,
        }
    }

    pub fn new(m: f64, hbar: f64, c: f64, e: f64) -> Result<Self> {
        let p = Self { m, hbar, c, e };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("hbar", self.hbar), ("c", self.c), ("e", self.e)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !self.m.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mass must be finite, got {}",
                self.m
            )));
        }
        Ok(())
    }

    /// Validation plus `m ≠ 0`, required by everything that needs a gap.
    pub fn require_gap(&self) -> Result<()> {
        self.validate()?;
        if self.m == 0.0 {
            return Err(Error::InvalidParameter(
                "mass must be nonzero for a spectral gap".into(),
            ));
        }
        Ok(())
    }

    /// Signed rest energy `mc²`.
    pub fn rest_energy(&self) -> f64 {
        self.m * self.c * self.c
    }

    /// `|m|c²`, the half width of the bulk gap.
    pub fn gap_edge(&self) -> f64 {
        self.rest_energy().abs()
    }

    pub fn hbar_c(&self) -> f64 {
        self.hbar * self.c
    }

    /// Planck's constant `h = 2πħ`.
    pub fn planck(&self) -> f64 {
        2.0 * PI * self.hbar
    }

    /// `ħ/(|m|c)`, the natural length scale of the edge states.
    pub fn compton_length(&self) -> f64 {
        self.hbar / (self.m.abs() * self.c)
    }

    /// The bulk gap `(-|m|c², |m|c²)`, `None` for `m = 0`.
    pub fn gap(&self) -> Option<EnergyWindow> {
        let edge = self.gap_edge();
        (edge > 0.0).then(|| EnergyWindow { lo: -edge, hi: edge })
    }

    pub fn mass_sign(&self) -> f64 {
        if self.m > 0.0 {
            1.0
        } else if self.m < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}

/// Point of the extended real line `ℝ ∪ {∞}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Zeta {
    Finite(f64),
    Infinite,
}

impl Zeta {
    pub fn finite(self) -> Option<f64> {
        match self {
            Zeta::Finite(z) => Some(z),
            Zeta::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Zeta::Infinite)
    }

    /// `-ζ`, with `-∞ = ∞`.
    pub fn negated(self) -> Self {
        match self {
            Zeta::Finite(z) => Zeta::Finite(-z),
            Zeta::Infinite => Zeta::Infinite,
        }
    }
}

impl fmt::Display for Zeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Zeta::Finite(z) => write!(f, "{z}"),
            Zeta::Infinite => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Zeta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" | "-inf" | "∞" => Ok(Zeta::Infinite),
            _ => {
                let v: f64 = t
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("cannot parse zeta `{s}`")))?;
                if v.is_finite() {
                    Ok(Zeta::Finite(v))
                } else if v.is_infinite() {
                    Ok(Zeta::Infinite)
                } else {
                    Err(Error::InvalidParameter("zeta must not be NaN".into()))
                }
            }
        }
    }
}

impl Serialize for Zeta {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Zeta::Finite(z) => s.serialize_f64(*z),
            Zeta::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Zeta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Zeta::Finite(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Self-adjoint extension parameter, held both as `ζ` and as the unit
/// circle point `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryParam {
    zeta: Zeta,
    z: Complex64,
}

impl BoundaryParam {
    pub fn from_zeta(zeta: Zeta) -> Result<Self> {
        if let Zeta::Finite(v) = zeta {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("zeta must be finite, got {v}")));
            }
        }
        Ok(Self {
            zeta,
            z: z_from_zeta(zeta),
        })
    }

    /// Finite `ζ`; panics on NaN or infinite input.
    pub fn finite(zeta: f64) -> Self {
        Self::from_zeta(Zeta::Finite(zeta)).expect("finite zeta")
    }

    pub fn infinite() -> Self {
        Self {
            zeta: Zeta::Infinite,
            z: Complex64::new(1.0, 0.0),
        }
    }

    pub fn from_z(z: Complex64) -> Result<Self> {
        let zeta = zeta_from_z(z)?;
        Ok(Self {
            zeta,
            z: z / z.norm(),
        })
    }

    pub fn zeta(&self) -> Zeta {
        self.zeta
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    /// Boundary direction `(1, iζ)/√(1+ζ²)` (or `(0, 1)` for `ζ = ∞`).
    pub fn boundary_direction(&self) -> Spinor2 {
        match self.zeta {
            Zeta::Finite(z) => {
                let n = z.hypot(1.0);
                Spinor2::new(Complex64::new(1.0 / n, 0.0), Complex64::new(0.0, z / n))
            }
            Zeta::Infinite => Spinor2::new(Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)),
        }
    }

    pub fn negated(&self) -> Self {
        Self::from_zeta(self.zeta.negated()).expect("negation keeps zeta valid")
    }
}

impl Serialize for BoundaryParam {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.zeta.serialize(s)
    }
}

impl<'de> Deserialize<'de> for BoundaryParam {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let zeta = Zeta::deserialize(d)?;
        BoundaryParam::from_zeta(zeta).map_err(serde::de::Error::custom)
    }
}

/// `ζ` with `iζ = (1 + z)/(1 - z)`; `z = 1` maps to `∞`.
pub fn zeta_from_z(z: Complex64) -> Result<Zeta> {
    let r = z.norm();
    if !r.is_finite() || (r - 1.0).abs() > UNIT_CIRCLE_TOL {
        return Err(Error::OffUnitCircle(r));
    }
    let u = z / r;
    let (x, y) = (u.re, u.im);
    // On the circle (1+z)/(1-z) = i y/(1-x) = i (1+x)/y; pick the form
    // without cancellation.
    if x <= 0.0 {
        Ok(Zeta::Finite(y / (1.0 - x)))
    } else if y == 0.0 {
        Ok(Zeta::Infinite)
    } else {
        Ok(Zeta::Finite((1.0 + x) / y))
    }
}

/// Inverse of [`zeta_from_z`]: `z = (iζ - 1)/(iζ + 1)`.
pub fn z_from_zeta(zeta: Zeta) -> Complex64 {
    match zeta {
        Zeta::Infinite => Complex64::new(1.0, 0.0),
        Zeta::Finite(v) => {
            let d = 1.0 + v * v;
            Complex64::new((v * v - 1.0) / d, 2.0 * v / d)
        }
    }
}

/// Two-component spinor value `(v, w)` at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spinor2 {
    pub v: Complex64,
    pub w: Complex64,
}

impl Spinor2 {
    pub fn new(v: Complex64, w: Complex64) -> Self {
        Self { v, w }
    }

    pub fn from_real(v: f64, w: f64) -> Self {
        Self::new(Complex64::new(v, 0.0), Complex64::new(w, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.v.norm_sqr() + self.w.norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.v * s, self.w * s)
    }

    pub fn normalized(&self) -> Self {
        self.scale(Complex64::new(1.0 / self.norm(), 0.0))
    }

    /// `⟨a|b⟩`.
    pub fn inner(&self, other: &Spinor2) -> Complex64 {
        self.v.conj() * other.v + self.w.conj() * other.w
    }

    /// `ψ†σ₁ψ = 2 Re(v̄w)`, the current density normal to the edge.
    pub fn normal_current(&self) -> f64 {
        2.0 * (self.v.conj() * self.w).re
    }

    /// `ψ†σ₂ψ = 2 Im(v̄w)`, the current density along the edge.
    pub fn tangential_current(&self) -> f64 {
        2.0 * (self.v.conj() * self.w).im
    }

    /// Phase convention: `v` real and nonnegative, or `w/i` real and
    /// nonnegative when `v` vanishes.
    pub fn gauge_fixed(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return *self;
        }
        let phase = if self.v.norm() > 1e-14 * n {
            self.v.conj() / self.v.norm()
        } else if self.w.norm() > 0.0 {
            // make w = i|w|
            Complex64::new(0.0, 1.0) * self.w.conj() / self.w.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        self.scale(phase)
    }
}

/// Distance of a boundary value from the self-adjoint boundary condition:
/// `|w - iζv| / ‖ψ‖`, or `|v| / ‖ψ‖` for `ζ = ∞`.
pub fn boundary_residual(psi0: &Spinor2, bc: &BoundaryParam) -> Result<f64> {
    let n = psi0.norm();
    if n == 0.0 {
        return Err(Error::ZeroSpinor);
    }
    let r = match bc.zeta() {
        Zeta::Finite(z) => (psi0.w - Complex64::new(0.0, z) * psi0.v).norm() / z.hypot(1.0),
        Zeta::Infinite => psi0.v.norm(),
    };
    Ok(r / n)
}

/// Open energy interval `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyWindow {
    pub lo: f64,
    pub hi: f64,
}

impl EnergyWindow {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "energy window needs lo < hi, got ({lo}, {hi})"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, e: f64) -> bool {
        e > self.lo && e < self.hi
    }

    /// Errors unless the window sits strictly inside `(-edge, edge)`.
    pub fn require_inside(&self, edge: f64) -> Result<()> {
        if self.lo > -edge && self.hi < edge {
            Ok(())
        } else {
            Err(Error::WindowOutsideGap {
                lo: self.lo,
                hi: self.hi,
                edge,
            })
        }
    }

    /// Windows nested inside `self`, each shrunk symmetrically towards the
    /// center; the first is `self`.
    pub fn nested(&self, count: usize) -> Vec<EnergyWindow> {
        let c = self.center();
        let half = 0.5 * self.width();
        (0..count)
            .map(|i| {
                let f = 1.0 - i as f64 / (count as f64 + 1.0);
                EnergyWindow {
                    lo: c - f * half,
                    hi: c + f * half,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwitchProfile {
    SmoothstepCubic,
    SmoothstepQuintic,
    ScaledTanhClamped,
}

impl SwitchProfile {
    pub const ALL: [SwitchProfile; 3] = [
        SwitchProfile::SmoothstepCubic,
        SwitchProfile::SmoothstepQuintic,
        SwitchProfile::ScaledTanhClamped,
    ];
}

const TANH_STEEPNESS: f64 = 3.0;

/// Monotone switch `g` rising from 0 below the window to 1 above it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchFunction {
    pub profile: SwitchProfile,
    pub window: EnergyWindow,
}

impl SwitchFunction {
    pub fn new(profile: SwitchProfile, window: EnergyWindow) -> Self {
        Self { profile, window }
    }

    fn unit(&self, e: f64) -> f64 {
        ((e - self.window.lo) / self.window.width()).clamp(0.0, 1.0)
    }

    pub fn value(&self, e: f64) -> f64 {
        if e <= self.window.lo {
            return 0.0;
        }
        if e >= self.window.hi {
            return 1.0;
        }
        let t = self.unit(e);
        match self.profile {
            SwitchProfile::SmoothstepCubic => t * t * (3.0 - 2.0 * t),
            SwitchProfile::SmoothstepQuintic => t * t * t * (t * (6.0 * t - 15.0) + 10.0),
            SwitchProfile::ScaledTanhClamped => {
                let a = TANH_STEEPNESS;
                (0.5 * (1.0 + (a * (2.0 * t - 1.0)).tanh() / a.tanh())).clamp(0.0, 1.0)
            }
        }
    }

    /// `g'(E)`, zero outside the window.
    pub fn derivative(&self, e: f64) -> f64 {
        if e <= self.window.lo || e >= self.window.hi {
            return 0.0;
        }
        let t = self.unit(e);
        let dt = 1.0 / self.window.width();
        let dg = match self.profile {
            SwitchProfile::SmoothstepCubic => 6.0 * t * (1.0 - t),
            SwitchProfile::SmoothstepQuintic => 30.0 * t * t * (1.0 - t) * (1.0 - t),
            SwitchProfile::ScaledTanhClamped => {
                let a = TANH_STEEPNESS;
                let s = (a * (2.0 * t - 1.0)).tanh();
                a * (1.0 - s * s) / a.tanh()
            }
        };
        dg * dt
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zeta_from_z_examples() {
        assert_eq!(zeta_from_z(Complex64::new(-1.0, 0.0)).unwrap(), Zeta::Finite(0.0));
        let z = zeta_from_z(Complex64::new(0.0, 1.0)).unwrap().finite().unwrap();
        assert_abs_diff_eq!(z, 1.0, epsilon = 1e-15);
        assert_eq!(zeta_from_z(Complex64::new(1.0, 0.0)).unwrap(), Zeta::Infinite);
    }

    #[test]
    fn zeta_from_z_rejects_off_circle() {
        assert!(matches!(
            zeta_from_z(Complex64::new(0.5, 0.0)),
            Err(Error::OffUnitCircle(_))
        ));
        assert!(zeta_from_z(Complex64::new(1.0 + 5e-10, 0.0)).is_ok());
    }

    #[test]
    fn z_from_zeta_examples() {
        let z0 = z_from_zeta(Zeta::Finite(0.0));
        assert_abs_diff_eq!(z0.re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z0.im, 0.0, epsilon = 1e-15);
        let z1 = z_from_zeta(Zeta::Finite(1.0));
        assert_abs_diff_eq!(z1.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z1.im, 1.0, epsilon = 1e-15);
        assert_eq!(z_from_zeta(Zeta::Infinite), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn fractional_linear_relation_holds() {
        for zeta in [-7.5, -1.0, -0.2, 0.0, 0.3, 2.0, 40.0] {
            let z = z_from_zeta(Zeta::Finite(zeta));
            assert_abs_diff_eq!(z.norm(), 1.0, epsilon = 1e-12);
            let lhs = (Complex64::new(1.0, 0.0) + z) / (Complex64::new(1.0, 0.0) - z);
            assert_abs_diff_eq!(lhs.re, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(lhs.im, zeta, epsilon = 1e-12 * (1.0 + zeta.abs()));
        }
    }

    #[test]
    fn boundary_residual_examples() {
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let bc1 = BoundaryParam::finite(1.0);
        assert_abs_diff_eq!(
            boundary_residual(&Spinor2::new(one, i), &bc1).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            boundary_residual(&Spinor2::new(zero, one), &BoundaryParam::infinite()).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            boundary_residual(&Spinor2::new(one, zero), &bc1).unwrap(),
            1.0 / 2f64.sqrt(),
            epsilon = 1e-15
        );
        assert_eq!(
            boundary_residual(&Spinor2::new(zero, zero), &bc1),
            Err(Error::ZeroSpinor)
        );
    }

    #[test]
    fn zeta_parses_inf_literal() {
        assert_eq!("inf".parse::<Zeta>().unwrap(), Zeta::Infinite);
        assert_eq!("-0.5".parse::<Zeta>().unwrap(), Zeta::Finite(-0.5));
        assert!("nan".parse::<Zeta>().is_err());
        let bc: BoundaryParam = serde_json::from_str("\"inf\"").unwrap();
        assert!(bc.zeta().is_infinite());
        let bc: BoundaryParam = serde_json::from_str("2.5").unwrap();
        assert_eq!(bc.zeta(), Zeta::Finite(2.5));
        assert_eq!(serde_json::to_string(&BoundaryParam::infinite()).unwrap(), "\"inf\"");
    }

    #[test]
    fn gap_is_symmetric_and_empty_for_massless() {
        let p = PhysParams::natural(-2.0);
        let g = p.gap().unwrap();
        assert_eq!((g.lo, g.hi), (-2.0, 2.0));
        assert!(PhysParams::natural(0.0).gap().is_none());
        assert!(PhysParams::natural(0.0).require_gap().is_err());
        assert!(PhysParams::new(1.0, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn switch_functions_are_monotone_switches() {
        let w = EnergyWindow::new(-0.5, 0.5).unwrap();
        for profile in SwitchProfile::ALL {
            let g = SwitchFunction::new(profile, w);
            assert_eq!(g.value(-0.5), 0.0);
            assert_eq!(g.value(-3.0), 0.0);
            assert_eq!(g.value(0.5), 1.0);
            assert_eq!(g.value(9.0), 1.0);
            assert_eq!(g.derivative(0.7), 0.0);
            let mut prev = 0.0;
            for i in 0..=200 {
                let e = -0.5 + i as f64 / 200.0;
                let v = g.value(e);
                assert!(v >= prev - 1e-15, "{profile:?} not monotone at {e}");
                assert!(g.derivative(e) >= 0.0);
                prev = v;
            }
            // derivative integrates to one
            let n = 4000;
            let h = 1.0 / n as f64;
            let integral: f64 = (0..n)
                .map(|i| g.derivative(-0.5 + (i as f64 + 0.5) * h) * h)
                .sum();
            assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn gauge_fixing_makes_v_real_nonnegative() {
        let s = Spinor2::new(Complex64::new(-1.0, 1.0), Complex64::new(0.3, 2.0));
        let g = s.gauge_fixed();
        assert!(g.v.im.abs() < 1e-15 && g.v.re > 0.0);
        assert_abs_diff_eq!(g.norm(), s.norm(), epsilon = 1e-14);
        let d = Spinor2::new(Complex64::new(0.0, 0.0), Complex64::new(-2.0, 0.0)).gauge_fixed();
        assert_abs_diff_eq!(d.w.im, 2.0, epsilon = 1e-15);
    }
}
