//! Quadrature and scalar root bracketing.

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`, with Richardson correction on accepted panels.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&mut f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Composite Simpson rule on uniformly spaced samples; an even number of
/// samples gets a trapezoid on the last interval.
pub fn simpson_uniform(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (values[0] + values[1]),
        _ => {
            let odd_end = if n % 2 == 1 { n } else { n - 1 };
            let mut s = values[0] + values[odd_end - 1];
            for (i, v) in values[1..odd_end - 1].iter().enumerate() {
                s += if i % 2 == 0 { 4.0 * v } else { 2.0 * v };
            }
            let mut total = s * h / 3.0;
            if odd_end < n {
                total += 0.5 * h * (values[n - 2] + values[n - 1]);
            }
            total
        }
    }
}

/// Trapezoid rule on arbitrary abscissae.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Outcome of [`bisect`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub root: f64,
    pub lo: f64,
    pub hi: f64,
    pub evaluations: usize,
}

/// Bisection on `[a, b]` where `fa = f(a)` and `fb = f(b)` have opposite
/// signs (or one is zero), until the bracket is narrower than `tol`.
pub fn bisect<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    fb: f64,
    tol: f64,
) -> Bracket {
    let mut evaluations = 0;
    if fa == 0.0 {
        return Bracket {
            root: a,
            lo: a,
            hi: a,
            evaluations,
        };
    }
    if fb == 0.0 {
        return Bracket {
            root: b,
            lo: b,
            hi: b,
            evaluations,
        };
    }
    while (b - a).abs() > tol {
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) {
            break;
        }
        let fm = f(m);
        evaluations += 1;
        if fm == 0.0 {
            return Bracket {
                root: m,
                lo: m,
                hi: m,
                evaluations,
            };
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Bracket {
        root: 0.5 * (a + b),
        lo: a.min(b),
        hi: a.max(b),
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn adaptive_simpson_integrates_smooth_functions() {
        let v = adaptive_simpson(f64::sin, 0.0, std::f64::consts::PI, 1e-12);
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-11);
        let v = adaptive_simpson(|x| (-x * x).exp(), -6.0, 6.0, 1e-12);
        assert_abs_diff_eq!(v, std::f64::consts::PI.sqrt(), epsilon = 1e-10);
        assert_eq!(adaptive_simpson(|x| x, 1.0, 1.0, 1e-9), 0.0);
    }

    #[test]
    fn simpson_uniform_is_exact_for_cubics() {
        let h = 0.1;
        let ys: Vec<f64> = (0..11).map(|i| (i as f64 * h).powi(3)).collect();
        assert_abs_diff_eq!(simpson_uniform(&ys, h), 0.25, epsilon = 1e-14);
        let ys: Vec<f64> = (0..12).map(|i| i as f64 * h).collect();
        assert_abs_diff_eq!(simpson_uniform(&ys, h), 0.5 * 1.1 * 1.1, epsilon = 1e-14);
    }

    #[test]
    fn bisect_finds_sqrt_two() {
        let f = |x: f64| x * x - 2.0;
        let r = bisect(f, 0.0, 2.0, f(0.0), f(2.0), 1e-13);
        assert_abs_diff_eq!(r.root, 2f64.sqrt(), epsilon = 1e-12);
        assert!(r.evaluations > 30);
    }
}
