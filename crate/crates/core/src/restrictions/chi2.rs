//! Chi-square quantiles and the large-deviation radius.

use crate::error::{Error, Result};

/// `ln Gamma(x)` for `x > 0` (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_cf(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_cf(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..1000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
fn gamma_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Chi-square CDF with `dof` degrees of freedom.
pub fn chi2_cdf(x: f64, dof: f64) -> f64 {
    gamma_p(0.5 * dof, 0.5 * x)
}

/// Chi-square quantile: the `x` with `chi2_cdf(x, dof) = prob`.
pub fn chi2_inv_cdf(prob: f64, dof: f64) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::Domain(format!("chi-square quantile needs 0 < p < 1, got {prob}")));
    }
    if !(dof > 0.0 && dof.is_finite()) {
        return Err(Error::Domain(format!("chi-square dof must be positive, got {dof}")));
    }
    // Bracket the root, then refine with safeguarded Newton steps.
    let (mut lo, mut hi) = (0.0_f64, dof.max(1.0));
    while chi2_cdf(hi, dof) < prob {
        lo = hi;
        hi *= 2.0;
    }
    let a = 0.5 * dof;
    // Wilson-Hilferty starting point.
    let z = normal_quantile(prob);
    let k = 2.0 / (9.0 * dof);
    let mut x = (dof * (1.0 - k + z * k.sqrt()).powi(3)).clamp(lo, hi);
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let f = chi2_cdf(x, dof) - prob;
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let log_pdf = (a - 1.0) * (0.5 * x).ln() - 0.5 * x - ln_gamma(a) - std::f64::consts::LN_2;
        let pdf = log_pdf.exp();
        let mut next = if pdf > 0.0 { x - f / pdf } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-14 * x.max(1e-300) || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Standard normal quantile (Acklam's rational approximation), used only
/// as a starting point.
fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < 0.02425 {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - 0.02425 {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Radius of the uncertainty ball for the S-procedure:
/// `sqrt(F^{-1}(1 - outage, dof) / 2)`.
pub fn sproc_radius(outage: f64, dof: usize) -> Result<f64> {
    Ok((chi2_inv_cdf(1.0 - outage, dof as f64)? / 2.0).sqrt())
}

/// Large-deviation constant `v` solving `v^2 - c v = 1/2`, `c = sqrt(-ln p)`.
pub fn solve_v(outage: f64) -> Result<f64> {
    if !(outage > 0.0 && outage < 1.0) {
        return Err(Error::Domain(format!("outage probability must be in (0, 1), got {outage}")));
    }
    let c = (-outage.ln()).sqrt();
    Ok(0.5 * (c + (c * c + 2.0).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn ln_gamma_integers() {
        let mut fact = 1.0_f64;
        for n in 1..20 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-12, "n={n}");
            fact *= n as f64;
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn even_dof_cdf_closed_form() {
        // For dof = 2k, Q(k, x/2) = e^{-x/2} sum_{j<k} (x/2)^j / j!
        for k in 1..12 {
            for &x in &[0.3, 2.0, 9.0, 31.0] {
                let h = x / 2.0;
                let mut term = 1.0;
                let mut sum = 0.0;
                for j in 0..k {
                    if j > 0 {
                        term *= h / j as f64;
                    }
                    sum += term;
                }
                let q = (-h).exp() * sum;
                let got = 1.0 - chi2_cdf(x, 2.0 * k as f64);
                assert!((got - q).abs() < 1e-13, "k={k} x={x}: {got} vs {q}");
            }
        }
    }

    #[test]
    fn quantile_matches_reference_values() {
        // scipy.stats.chi2.ppf
        assert!((chi2_inv_cdf(0.9, 36.0).unwrap() - 47.212_173_894_937_38).abs() < 1e-9);
        assert!((chi2_inv_cdf(0.95, 2.0).unwrap() - 5.991_464_547_107_98).abs() < 1e-10);
        assert!((chi2_inv_cdf(0.99, 16.0).unwrap() - 31.999_926_908_815_2).abs() < 1e-9);
    }

    #[test]
    fn two_dof_quantile_is_exponential() {
        // chi2 with 2 dof is Exp(1/2): F^{-1}(p) = -2 ln(1 - p)
        assert!((chi2_inv_cdf(0.5, 2.0).unwrap() - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((chi2_inv_cdf(0.9, 2.0).unwrap() + 2.0 * 0.1f64.ln()).abs() < 1e-12);
        assert!(chi2_inv_cdf(1.0, 2.0).is_err());
        assert!(chi2_inv_cdf(0.5, 0.0).is_err());
    }

    #[test]
    fn quantile_agrees_with_statrs() {
        for &dof in &[2.0, 6.0, 12.0, 24.0, 36.0, 64.0] {
            let d = ChiSquared::new(dof).unwrap();
            for &p in &[0.5, 0.8, 0.9, 0.95, 0.99] {
                let ours = chi2_inv_cdf(p, dof).unwrap();
                assert!((d.cdf(ours) - p).abs() < 1e-10, "dof={dof} p={p}");
            }
        }
    }

    #[test]
    fn solve_v_root() {
        for &p in &[0.01, 0.05, 0.1, 0.5] {
            let v = solve_v(p).unwrap();
            let c = (-f64::ln(p)).sqrt();
            assert!((v * v - c * v - 0.5).abs() < 1e-12);
            assert!(v > 0.0);
        }
        let e = solve_v((-1.0f64).exp()).unwrap();
        assert!((e - 0.5 * (1.0 + 3f64.sqrt())).abs() < 1e-14);
        assert!((solve_v(0.1).unwrap() - 1.795_847).abs() < 1e-5);
        assert!(solve_v(0.0).is_err());
        assert!(solve_v(1.0).is_err());
    }
}
