//! Perturbations `W(x₁) = m₁(x₁)σ₃ + V(x₁)` depending on the distance to the
//! edge only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values below this are treated as zero when locating the support cutoff.
pub const NEGLIGIBLE: f64 = 1e-12;

const PROBE_POINTS: usize = 10_000;

/// A real function of `x₁ ≥ 0`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude · e^{-rate·x}`.
    Exponential {
        amplitude: f64,
        rate: f64,
    },
    /// `amplitude · exp(-(x-center)²/(2 width²))`.
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// On `[knots[i], knots[i+1])` the polynomial `Σ_j coeffs[i][j] (x-knots[i])^j`;
    /// zero beyond the last knot.
    PiecewisePolynomial {
        knots: Vec<f64>,
        coeffs: Vec<Vec<f64>>,
    },
    /// Linear interpolation of `values` on `x0 + i·dx`; zero outside.
    Sampled {
        x0: f64,
        dx: f64,
        values: Vec<f64>,
    },
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(format!("profile: {msg}")));
        match self {
            Profile::Zero => Ok(()),
            Profile::Constant { value } if value.is_finite() => Ok(()),
            Profile::Constant { .. } => bad("constant must be finite"),
            Profile::Exponential { amplitude, rate } => {
                if amplitude.is_finite() && rate.is_finite() && *rate > 0.0 {
                    Ok(())
                } else {
                    bad("exponential needs finite amplitude and rate > 0")
                }
            }
            Profile::Gaussian {
                amplitude,
                center,
                width,
            } => {
                if amplitude.is_finite() && center.is_finite() && width.is_finite() && *width > 0.0
                {
                    Ok(())
                } else {
                    bad("gaussian needs finite amplitude, center and width > 0")
                }
            }
            Profile::PiecewisePolynomial { knots, coeffs } => {
                if knots.len() < 2 || coeffs.len() != knots.len() - 1 {
                    return bad("piecewise polynomial needs n+1 knots for n pieces");
                }
                if knots.windows(2).any(|w| !(w[0] < w[1])) || knots[0] < 0.0 {
                    return bad("knots must be nonnegative and strictly increasing");
                }
                if knots.iter().chain(coeffs.iter().flatten()).any(|v| !v.is_finite()) {
                    return bad("knots and coefficients must be finite");
                }
                Ok(())
            }
            Profile::Sampled { x0, dx, values } => {
                if values.len() < 2 || !(*dx > 0.0) || !x0.is_finite() || *x0 < 0.0 {
                    return bad("sampled profile needs >= 2 values, dx > 0 and x0 >= 0");
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return bad("samples must be finite");
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => *value,
            Profile::Exponential { amplitude, rate } => amplitude * (-rate * x).exp(),
            Profile::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let t = (x - center) / width;
                amplitude * (-0.5 * t * t).exp()
            }
            Profile::PiecewisePolynomial { knots, coeffs } => {
                if x < knots[0] || x >= knots[knots.len() - 1] {
                    return 0.0;
                }
                let i = knots.partition_point(|&k| k <= x) - 1;
                let t = x - knots[i];
                coeffs[i].iter().rev().fold(0.0, |acc, c| acc * t + c)
            }
            Profile::Sampled { x0, dx, values } => {
                let s = (x - x0) / dx;
                let last = (values.len() - 1) as f64;
                if s < 0.0 || s > last {
                    return 0.0;
                }
                let i = (s.floor() as usize).min(values.len() - 2);
                let f = s - i as f64;
                values[i] * (1.0 - f) + values[i + 1] * f
            }
        }
    }

    /// Value approached as `x₁ → ∞`.
    pub fn tail(&self) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            _ => 0.0,
        }
    }

    /// Smallest `X` with `|f(x) - tail| < NEGLIGIBLE` for all `x ≥ X`.
    pub fn cutoff(&self) -> f64 {
        match self {
            Profile::Zero | Profile::Constant { .. } => 0.0,
            Profile::Exponential { amplitude, rate } => {
                let a = amplitude.abs();
                if a <= NEGLIGIBLE {
                    0.0
                } else {
                    (a / NEGLIGIBLE).ln() / rate
                }
            }
            Profile::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let a = amplitude.abs();
                if a <= NEGLIGIBLE {
                    0.0
                } else {
                    (center + width * (2.0 * (a / NEGLIGIBLE).ln()).sqrt()).max(0.0)
                }
            }
            Profile::PiecewisePolynomial { knots, .. } => knots[knots.len() - 1],
            Profile::Sampled { x0, dx, values } => x0 + dx * (values.len() - 1) as f64,
        }
    }

    /// Points where the profile may peak, added to uniform probe grids.
    pub(crate) fn critical_points(&self) -> Vec<f64> {
        match self {
            Profile::Gaussian { center, .. } => vec![center.max(0.0)],
            Profile::PiecewisePolynomial { knots, .. } => knots.clone(),
            Profile::Sampled { x0, dx, values } => {
                (0..values.len()).map(|i| x0 + dx * i as f64).collect()
            }
            _ => vec![0.0],
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Profile::Zero)
    }
}

/// `W(x₁) = m₁(x₁)σ₃ + V(x₁)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PerturbationSpec {
    #[serde(default)]
    pub m1: Profile,
    #[serde(default, rename = "V")]
    pub v: Profile,
}

impl PerturbationSpec {
    pub fn new(m1: Profile, v: Profile) -> Result<Self> {
        m1.validate()?;
        v.validate()?;
        Ok(Self { m1, v })
    }

    pub fn potential(v: Profile) -> Result<Self> {
        Self::new(Profile::Zero, v)
    }

    pub fn mass(m1: Profile) -> Result<Self> {
        Self::new(m1, Profile::Zero)
    }

    pub fn validate(&self) -> Result<()> {
        self.m1.validate()?;
        self.v.validate()
    }

    pub fn is_zero(&self) -> bool {
        self.m1.is_zero() && self.v.is_zero()
    }

    /// `(m₁(x), V(x))`.
    pub fn at(&self, x: f64) -> (f64, f64) {
        (self.m1.value(x), self.v.value(x))
    }

    /// `(m₁(∞), V(∞))`.
    pub fn tail(&self) -> (f64, f64) {
        (self.m1.tail(), self.v.tail())
    }

    /// Support cutoff `X_W`: beyond it `W` equals its tail value.
    pub fn cutoff(&self) -> f64 {
        self.m1.cutoff().max(self.v.cutoff())
    }

    /// Pointwise operator norm `max(|V+m₁|, |V-m₁|)`.
    pub fn pointwise_norm(&self, x: f64) -> f64 {
        let (m1, v) = self.at(x);
        (v + m1).abs().max((v - m1).abs())
    }

    /// Maximum of the pointwise norm over a 10⁴-point probe grid on
    /// `[0, X_W]` plus the profiles' peak locations and the tail.
    pub fn sup_norm_bound(&self) -> f64 {
        let x_end = self.cutoff().max(1.0);
        let uniform = (0..PROBE_POINTS).map(|i| x_end * i as f64 / (PROBE_POINTS - 1) as f64);
        let extra = self
            .m1
            .critical_points()
            .into_iter()
            .chain(self.v.critical_points());
        let (m1t, vt) = self.tail();
        let tail = (vt + m1t).abs().max((vt - m1t).abs());
        uniform
            .chain(extra)
            .filter(|x| *x >= 0.0)
            .map(|x| self.pointwise_norm(x))
            .fold(tail, f64::max)
    }

    /// Seeded family of smooth perturbations with sup norm at most
    /// `max_norm`, drawn from exponential, Gaussian and polynomial shapes.
    pub fn random_family(seed: u64, count: usize, max_norm: f64, length: f64) -> Vec<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let kind = rng.gen_range(0..3);
                let pick = |rng: &mut ChaCha8Rng| -> Profile {
                    let amp = rng.gen_range(-1.0..1.0);
                    match kind {
                        0 => Profile::Exponential {
                            amplitude: amp,
                            rate: rng.gen_range(1.0..3.0) / length,
                        },
                        1 => Profile::Gaussian {
                            amplitude: amp,
                            center: rng.gen_range(0.0..2.0) * length,
                            width: rng.gen_range(0.3..1.0) * length,
                        },
                        _ => {
                            let r = rng.gen_range(1.0..3.0) * length;
                            // amp·(1 - x/r)² on [0, r)
                            Profile::PiecewisePolynomial {
                                knots: vec![0.0, r],
                                coeffs: vec![vec![amp, -2.0 * amp / r, amp / (r * r)]],
                            }
                        }
                    }
                };
                let m1 = pick(&mut rng);
                let v = pick(&mut rng);
                let mut w = PerturbationSpec { m1, v };
                let target = max_norm * rng.gen_range(0.3..1.0);
                let s = w.sup_norm_bound();
                if s > 0.0 {
                    w = w.scaled(target / s);
                }
                w
            })
            .collect()
    }

    /// `λ·W`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            m1: self.m1.scaled(lambda),
            v: self.v.scaled(lambda),
        }
    }
}

impl Profile {
    pub fn scaled(&self, lambda: f64) -> Profile {
        match self.clone() {
            Profile::Zero => Profile::Zero,
            Profile::Constant { value } => Profile::Constant {
                value: value * lambda,
            },
            Profile::Exponential { amplitude, rate } => Profile::Exponential {
                amplitude: amplitude * lambda,
                rate,
            },
            Profile::Gaussian {
                amplitude,
                center,
                width,
            } => Profile::Gaussian {
                amplitude: amplitude * lambda,
                center,
                width,
            },
            Profile::PiecewisePolynomial { knots, coeffs } => Profile::PiecewisePolynomial {
                knots,
                coeffs: coeffs
                    .into_iter()
                    .map(|c| c.into_iter().map(|v| v * lambda).collect())
                    .collect(),
            },
            Profile::Sampled { x0, dx, values } => Profile::Sampled {
                x0,
                dx,
                values: values.into_iter().map(|v| v * lambda).collect(),
            },
        }
    }
}
