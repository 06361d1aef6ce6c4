//! χ² distribution via the regularized incomplete gamma function.

use crate::error::{Error, Result};

const MAX_ITER: usize = 500;
const EPS: f64 = 1e-16;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Returns `(P(a, x), Q(a, x))`.
fn incomplete_gamma(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        // series: P = e^{-x} x^a / Γ(a+1) · Σ x^n / ((a+1)…(a+n))
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        let p = (sum.ln() + log_prefactor).exp().min(1.0);
        (p, 1.0 - p)
    } else {
        // modified Lentz continued fraction for Q
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        let q = (h.ln() + log_prefactor).exp().min(1.0);
        (1.0 - q, q)
    }
}

fn check_dof(d: u32) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument("χ² degrees of freedom must be ≥ 1".into()));
    }
    Ok(d as f64)
}

/// `P(χ²(d) ≤ x)`.
pub fn chi2_cdf(x: f64, d: u32) -> Result<f64> {
    let k = check_dof(d)?;
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("χ² argument must be ≥ 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(incomplete_gamma(0.5 * k, 0.5 * x).0)
}

/// `P(χ²(d) > x)`, accurate in the far upper tail.
pub fn chi2_sf(x: f64, d: u32) -> Result<f64> {
    let k = check_dof(d)?;
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("χ² argument must be ≥ 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(incomplete_gamma(0.5 * k, 0.5 * x).1)
}

/// χ²(d) density.
pub fn chi2_pdf(x: f64, d: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let h = 0.5 * d as f64;
    ((h - 1.0) * x.ln() - 0.5 * x - h * std::f64::consts::LN_2 - ln_gamma(h)).exp()
}

/// Safeguarded Newton iteration for an increasing `f` with root in `(0, ∞)`.
fn solve_increasing<F: Fn(f64) -> f64>(f: F, dfdx: impl Fn(f64) -> f64, start: f64) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = start.max(1.0);
    let mut guard = 0;
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return Err(Error::Numerical("χ² quantile bracket failed".into()));
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = dfdx(x);
        let mut next = if slope > 0.0 { x - fx / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs() || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// `x` with `chi2_cdf(x, d) = p`.
pub fn chi2_quantile(p: f64, d: u32) -> Result<f64> {
    check_dof(d)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("probability must lie in (0, 1), got {p}")));
    }
    // the upper tail is better conditioned above the median
    if p > 0.5 {
        return chi2_upper_quantile(1.0 - p, d);
    }
    solve_increasing(
        |x| chi2_cdf(x, d).unwrap_or(1.0) - p,
        |x| chi2_pdf(x, d),
        d as f64,
    )
}

/// `x` with `chi2_sf(x, d) = alpha`, i.e. the `(1 − α)` critical point.
pub fn chi2_upper_quantile(alpha: f64, d: u32) -> Result<f64> {
    check_dof(d)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("α must lie in (0, 1), got {alpha}")));
    }
    solve_increasing(
        |x| alpha - chi2_sf(x, d).unwrap_or(0.0),
        |x| chi2_pdf(x, d),
        d as f64,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adaptive Simpson quadrature of the χ² density; the reference oracle.
    fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
            let m = 0.5 * (a + b);
            let fm = f(m);
            (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
        }
        #[allow(clippy::too_many_arguments)]
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, whole: f64, m: f64, fm: f64, tol: f64, depth: u32) -> f64 {
            let (lm, flm, left) = simpson(f, a, fa, m, fm);
            let (rm, frm, right) = simpson(f, m, fm, b, fb);
            let delta = left + right - whole;
            if depth == 0 || delta.abs() <= 15.0 * tol {
                return left + right + delta / 15.0;
            }
            rec(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
                + rec(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
        }
        let (fa, fb) = (f(a), f(b));
        let (m, fm, whole) = simpson(f, a, fa, b, fb);
        rec(f, a, fa, b, fb, whole, m, fm, tol, 50)
    }

    fn density(x: f64, d: u32) -> f64 {
        // written independently of chi2_pdf: Γ(d/2) by the product formula
        let h = d as f64 / 2.0;
        let gamma_h = if d % 2 == 0 {
            (1..(d / 2) as u64).map(|i| i as f64).product::<f64>()
        } else {
            let mut g = std::f64::consts::PI.sqrt();
            let mut z = 0.5;
            while z < h - 0.25 {
                g *= z;
                z += 1.0;
            }
            g
        };
        if x <= 0.0 {
            return 0.0;
        }
        x.powf(h - 1.0) * (-x / 2.0).exp() / (2f64.powf(h) * gamma_h)
    }

    fn oracle_cdf(x: f64, d: u32) -> f64 {
        integrate(&|t| density(t, d), 0.0, x, 1e-13)
    }

    #[test]
    fn cdf_at_zero() {
        for d in 1..8 {
            assert_eq!(chi2_cdf(0.0, d).unwrap(), 0.0);
        }
    }

    #[test]
    fn two_dof_closed_form() {
        for x in [0.5, 1.0, 5.0] {
            let want = 1.0 - (-x / 2.0_f64).exp();
            assert!((chi2_cdf(x, 2).unwrap() - want).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_quadrature_oracle() {
        assert!((oracle_cdf(9.4877, 4) - 0.95).abs() < 1e-4);
        assert!((chi2_cdf(9.4877, 4).unwrap() - 0.95).abs() < 1e-4);
        for d in [2, 3, 4, 6, 9] {
            for x in [0.3, 2.0, 7.5, 15.0] {
                let o = oracle_cdf(x, d);
                assert!((chi2_cdf(x, d).unwrap() - o).abs() < 1e-9, "d={d} x={x}");
            }
        }
    }

    #[test]
    fn quantile_against_oracle() {
        // root of the quadrature CDF by bisection
        let (mut lo, mut hi) = (5.0, 15.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if oracle_cdf(mid, 4) < 0.95 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = chi2_quantile(0.95, 4).unwrap();
        assert!((q - lo).abs() < 1e-6);
        assert!((q - 9.4877).abs() < 1e-3);
    }

    #[test]
    fn median_of_two_dof() {
        let q = chi2_quantile(0.5, 2).unwrap();
        assert!((q - 2.0 * std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn round_trip() {
        for d in [1, 2, 4, 6] {
            for x in [0.1, 1.0, 10.0] {
                let p = chi2_cdf(x, d).unwrap();
                let back = chi2_quantile(p, d).unwrap();
                assert!((back - x).abs() <= 1e-8 * x, "d={d} x={x} back={back}");
            }
        }
    }

    #[test]
    fn far_upper_tail() {
        // χ²(2) survival is exp(−x/2) exactly
        let x = chi2_upper_quantile(1e-11, 2).unwrap();
        assert!((x - (-2.0 * 1e-11_f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn domain_errors() {
        assert!(chi2_cdf(-1.0, 2).is_err());
        assert!(chi2_cdf(1.0, 0).is_err());
        assert!(chi2_quantile(0.0, 2).is_err());
        assert!(chi2_quantile(1.0, 2).is_err());
        assert!(chi2_upper_quantile(1.5, 2).is_err());
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880_f64.ln()).abs() < 1e-12);
    }
}
