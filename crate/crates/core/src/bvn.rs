//! Bivariate normal and Student-t distribution functions.
//!
//! The normal case uses Genz's refinement of the Drezner–Wesolowsky
//! Gauss–Legendre scheme (absolute error around 1e-15). The Student-t case
//! integrates the normal CDF against the chi-square mixing density in log
//! scale with adaptive Gauss–Kronrod quadrature.

use std::f64::consts::PI;
use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

use crate::stats::norm_cdf;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl20() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(20))
}

/// Upper orthant probability `P(X > h, Y > k)` for a standard bivariate
/// normal with correlation `r`.
pub fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return if k == f64::NEG_INFINITY { 1.0 } else { norm_cdf(-k) };
    }
    if k == f64::NEG_INFINITY {
        return norm_cdf(-h);
    }
    if r == 0.0 {
        return norm_cdf(-h) * norm_cdf(-k);
    }
    let (nodes, weights) = gl20();
    let tp = 2.0 * PI;
    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin() / 2.0;
        for (x, w) in nodes.iter().zip(weights) {
            let sn = (asr * (1.0 + x)).sin();
            bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
        }
        bvn = bvn * asr / tp + norm_cdf(-h) * norm_cdf(-k);
    } else {
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let as_ = 1.0 - r * r;
            let mut a = as_.sqrt();
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 80.0;
            let asr = -(bs / as_ + hk) / 2.0;
            if asr > -100.0 {
                bvn = a * asr.exp() * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_ * as_);
            }
            if hk > -100.0 {
                let b = bs.sqrt();
                let sp = tp.sqrt() * norm_cdf(-b / a);
                bvn -= (-hk / 2.0).exp() * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
            }
            a /= 2.0;
            let mut sum = 0.0;
            for (x, w) in nodes.iter().zip(weights) {
                let xs = (a * (1.0 + x)).powi(2);
                let asr = -(bs / xs + hk) / 2.0;
                if asr > -100.0 {
                    let sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                    let rs = (1.0 - xs).sqrt();
                    let ep = (-(hk / 2.0) * xs / (1.0 + rs).powi(2)).exp() / rs;
                    sum += w * asr.exp() * (sp - ep);
                }
            }
            bvn = (a * sum - bvn) / tp;
        }
        if r > 0.0 {
            bvn += norm_cdf(-h.max(k));
        } else if h >= k {
            bvn = -bvn;
        } else {
            let l = if h < 0.0 {
                norm_cdf(k) - norm_cdf(h)
            } else {
                norm_cdf(-h) - norm_cdf(-k)
            };
            bvn = l - bvn;
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// `P(X ≤ x, Y ≤ y)` for a standard bivariate normal with correlation `r`.
pub fn bvn_cdf(x: f64, y: f64, r: f64) -> f64 {
    bvn_upper(-x, -y, r)
}

// Gauss–Kronrod 7/15 abscissae and weights (QUADPACK).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]` to absolute
/// tolerance `tol`. Always splits the interval with the largest error
/// estimate, so the result is a deterministic function of the inputs.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    let (v, e) = gk15(&mut f, a, b);
    let mut panels = vec![(a, b, v, e)];
    let mut total_err = e;
    let mut iterations = 0;
    while total_err > tol && iterations < 500 {
        iterations += 1;
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
        total_err = panels.iter().map(|p| p.3).sum();
    }
    panels.sort_by(|x, y| x.0.total_cmp(&y.0));
    panels.iter().map(|p| p.2).sum()
}

/// Quadrature tolerance for the Student-t mixing integral.
const BVT_TOL: f64 = 1e-14;

/// `P(X ≤ x, Y ≤ y)` for a standard bivariate Student-t with correlation `r`
/// and `nu` degrees of freedom.
pub fn bvt_cdf(x: f64, y: f64, r: f64, nu: f64) -> f64 {
    if x == f64::NEG_INFINITY || y == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return crate::stats::t_cdf(y, nu);
    }
    if y == f64::INFINITY {
        return crate::stats::t_cdf(x, nu);
    }
    // X = Z / sqrt(S) with S ~ Gamma(nu/2, rate nu/2); integrate over ln S.
    let k = nu / 2.0;
    let log_norm = k * k.ln() - ln_gamma(k);
    let lo = -1.0 - 45.0 / k;
    let hi = {
        // solve k (e^s - 1 - s) = 45 for s > 0
        let (mut a, mut b) = (0.0f64, 10.0f64);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if k * (m.exp() - 1.0 - m) > 45.0 {
                b = m;
            } else {
                a = m;
            }
        }
        b
    };
    let integrand = |s: f64| {
        let scale = (0.5 * s).exp();
        let w = (log_norm + k * s - k * s.exp()).exp();
        w * bvn_cdf(x * scale, y * scale, r)
    };
    integrate(integrand, lo, hi, BVT_TOL).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(20);
        for deg in 0..40usize {
            let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg + 1) as f64 };
            assert!((approx - exact).abs() < 1e-14, "deg {deg}");
        }
    }

    #[test]
    fn kronrod_rule_is_exact_for_polynomials() {
        for deg in 0..=22i32 {
            let (v, _) = gk15(&mut |x: f64| x.powi(deg), 0.0, 1.0);
            assert!((v - 1.0 / (deg + 1) as f64).abs() < 1e-15, "deg {deg}");
        }
    }

    #[test]
    fn orthant_identity() {
        for r in [-0.99, -0.95, -0.5, 0.0, 0.3, 0.5, 0.9, 0.95, 0.999] {
            let exact = 0.25 + f64::asin(r) / (2.0 * PI);
            assert!((bvn_cdf(0.0, 0.0, r) - exact).abs() < 1e-15, "r={r}");
        }
    }

    // Values from high-precision quadrature (mpmath, 30 digits) of the
    // bivariate normal density.
    #[test]
    fn bvn_reference_values() {
        let cases = [
            (-1.0, 0.5, 0.3, 0.133_256_135_449_951_107),
            (1.2, -0.7, -0.6, 0.167_908_403_750_057_920),
            (-2.5, -2.0, 0.95, 0.005_974_929_797_870_771),
            (0.3, 1.7, -0.97, 0.573_345_959_430_409_591),
            (-1.2815515655446004, -1.2815515655446004, 0.5, 0.032_401_523_218_343_515),
        ];
        for (x, y, r, want) in cases {
            let got = bvn_cdf(x, y, r);
            assert!((got - want).abs() < 1e-13, "({x},{y},{r}): {got} vs {want}");
        }
    }

    #[test]
    fn bvt_limits() {
        // large nu approaches the normal
        let n = bvn_cdf(-0.4, 0.8, 0.4);
        let t = bvt_cdf(-0.4, 0.8, 0.4, 1e6);
        assert!((n - t).abs() < 1e-6);
        // orthant probability for the t is the same as for the normal
        for nu in [2.5, 4.0, 10.0] {
            let want = 0.25 + f64::asin(0.6) / (2.0 * PI);
            assert!((bvt_cdf(0.0, 0.0, 0.6, nu) - want).abs() < 1e-12);
        }
        // marginal
        let m = bvt_cdf(0.7, f64::INFINITY, 0.3, 5.0);
        assert!((m - crate::stats::t_cdf(0.7, 5.0)).abs() < 1e-14);
    }
}
