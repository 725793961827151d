//! Closed-form pieces of the unrotated base families: distribution function,
//! log-density and the conditional distribution `h(v | u) = ∂C(u, v)/∂u`.
//!
//! Inputs are assumed strictly inside the unit square and parameters inside
//! their bounds; callers in `super` enforce both.

use statrs::function::gamma::ln_gamma;

use crate::bvn::{bvn_cdf, bvt_cdf};
use crate::stats::{norm_cdf, norm_ppf, t_cdf, t_ppf};

use super::Base;

/// Below this |θ| the Frank copula is evaluated by its first-order expansion
/// around independence.
const FRANK_SERIES: f64 = 1e-10;

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub(super) fn cdf(base: Base, p: &[f64], u: f64, v: f64) -> f64 {
    match base {
        Base::Independence => u * v,
        Base::Comonotonic => u.min(v),
        Base::Gaussian => bvn_cdf(norm_ppf(u), norm_ppf(v), p[0]),
        Base::StudentT => bvt_cdf(t_ppf(u, p[1]), t_ppf(v, p[1]), p[0], p[1]),
        Base::Clayton => {
            let th = p[0];
            let s = (-th * u.ln()).exp_m1() + (-th * v.ln()).exp_m1();
            (-s.ln_1p() / th).exp()
        }
        Base::Gumbel => {
            let th = p[0];
            let (x, y) = (-u.ln(), -v.ln());
            let a = log_sum_exp(th * x.ln(), th * y.ln()) / th;
            (-a.exp()).exp()
        }
        Base::Frank => {
            let th = p[0];
            if th.abs() < FRANK_SERIES {
                return u * v * (1.0 + 0.5 * th * (1.0 - u) * (1.0 - v));
            }
            let a = (-th * u).exp_m1();
            let b = (-th * v).exp_m1();
            let c0 = (-th).exp_m1();
            -(a * b / c0).ln_1p() / th
        }
        Base::Joe => {
            let th = p[0];
            let a = (1.0 - u).powf(th);
            let b = (1.0 - v).powf(th);
            1.0 - (a + b - a * b).powf(1.0 / th)
        }
        Base::Galambos => {
            let th = p[0];
            let (x, y) = (-u.ln(), -v.ln());
            let a = galambos_a(th, x, y);
            (-x - y + a).exp()
        }
        Base::Bb1 => {
            let (th, de) = (p[0], p[1]);
            let ls = bb1_log_s(th, de, u, v);
            let w = (ls / de).exp();
            (-w.ln_1p() / th).exp()
        }
    }
}

/// `A = (x^-θ + y^-θ)^(-1/θ)` computed in log scale.
fn galambos_a(th: f64, x: f64, y: f64) -> f64 {
    (-log_sum_exp(-th * x.ln(), -th * y.ln()) / th).exp()
}

/// `ln s` with `s = x^δ + y^δ`, `x = u^-θ - 1`.
fn bb1_log_s(th: f64, de: f64, u: f64, v: f64) -> f64 {
    let lx = (-th * u.ln()).exp_m1().ln();
    let ly = (-th * v.ln()).exp_m1().ln();
    log_sum_exp(de * lx, de * ly)
}

pub(super) fn log_density(base: Base, p: &[f64], u: f64, v: f64) -> f64 {
    match base {
        Base::Independence => 0.0,
        Base::Comonotonic => f64::NAN,
        Base::Gaussian => {
            let r = p[0];
            let (x, y) = (norm_ppf(u), norm_ppf(v));
            let one_m = 1.0 - r * r;
            -0.5 * one_m.ln() - (r * r * (x * x + y * y) - 2.0 * r * x * y) / (2.0 * one_m)
        }
        Base::StudentT => {
            let (r, nu) = (p[0], p[1]);
            let (x, y) = (t_ppf(u, nu), t_ppf(v, nu));
            student_t_log_density(r, nu, x, y, student_t_constant(r, nu))
        }
        Base::Clayton => {
            let th = p[0];
            let (lu, lv) = (u.ln(), v.ln());
            let s = (-th * lu).exp_m1() + (-th * lv).exp_m1();
            th.ln_1p() - (1.0 + th) * (lu + lv) - (2.0 + 1.0 / th) * s.ln_1p()
        }
        Base::Gumbel => {
            let th = p[0];
            let (x, y) = (-u.ln(), -v.ln());
            let (lx, ly) = (x.ln(), y.ln());
            let la = log_sum_exp(th * lx, th * ly) / th;
            let a = la.exp();
            -a + x + y + (th - 1.0) * (lx + ly) + (1.0 - 2.0 * th) * la + (a + th - 1.0).ln()
        }
        Base::Frank => {
            let th = p[0];
            if th.abs() < FRANK_SERIES {
                return th * (1.0 - 2.0 * u) * (1.0 - 2.0 * v);
            }
            let a = (-th * u).exp_m1();
            let b = (-th * v).exp_m1();
            let c0 = (-th).exp_m1();
            (-th * c0).ln() - th * (u + v) - 2.0 * (c0 + a * b).abs().ln()
        }
        Base::Joe => {
            let th = p[0];
            let (lub, lvb) = ((-u).ln_1p(), (-v).ln_1p());
            let a = (th * lub).exp();
            let b = (th * lvb).exp();
            let s = a + b - a * b;
            (1.0 / th - 2.0) * s.ln() + (th - 1.0) * (lub + lvb) + (th - 1.0 + s).ln()
        }
        Base::Galambos => {
            let th = p[0];
            let (x, y) = (-u.ln(), -v.ln());
            let a = galambos_a(th, x, y);
            let pa = (a / x).powf(1.0 + th);
            let pb = (a / y).powf(1.0 + th);
            a + ((1.0 - pa) * (1.0 - pb) + (1.0 + th) * pa * pb / a).ln()
        }
        Base::Bb1 => {
            let (th, de) = (p[0], p[1]);
            let (lu, lv) = (u.ln(), v.ln());
            let lx = (-th * lu).exp_m1().ln();
            let ly = (-th * lv).exp_m1().ln();
            let ls = log_sum_exp(de * lx, de * ly);
            let w = (ls / de).exp();
            th.ln() - (th + 1.0) * (lu + lv) + (de - 1.0) * (lx + ly) - (1.0 / th + 2.0) * w.ln_1p()
                + (1.0 / de - 2.0) * ls
                + ((1.0 / th + 1.0) * w + (de - 1.0) * (1.0 + w)).ln()
        }
    }
}

/// Parameter-only part of the Student-t copula log-density.
pub(super) fn student_t_constant(r: f64, nu: f64) -> f64 {
    ln_gamma((nu + 2.0) / 2.0) + ln_gamma(nu / 2.0) - 2.0 * ln_gamma((nu + 1.0) / 2.0)
        - 0.5 * (1.0 - r * r).ln()
}

/// Student-t copula log-density at t-quantiles `(x, y)`.
#[inline]
pub(super) fn student_t_log_density(r: f64, nu: f64, x: f64, y: f64, constant: f64) -> f64 {
    let q = (x * x + y * y - 2.0 * r * x * y) / (nu * (1.0 - r * r));
    constant - (nu + 2.0) / 2.0 * q.ln_1p() + (nu + 1.0) / 2.0 * ((x * x / nu).ln_1p() + (y * y / nu).ln_1p())
}

/// `h(v | u) = ∂C(u, v)/∂u`, the conditional distribution of `V` given `U = u`.
pub(super) fn h_func(base: Base, p: &[f64], u: f64, v: f64) -> f64 {
    let h = match base {
        Base::Independence => v,
        Base::Comonotonic => {
            if v >= u {
                1.0
            } else {
                0.0
            }
        }
        Base::Gaussian => {
            let r = p[0];
            norm_cdf((norm_ppf(v) - r * norm_ppf(u)) / (1.0 - r * r).sqrt())
        }
        Base::StudentT => {
            let (r, nu) = (p[0], p[1]);
            let (x, y) = (t_ppf(u, nu), t_ppf(v, nu));
            let scale = ((nu + x * x) * (1.0 - r * r) / (nu + 1.0)).sqrt();
            t_cdf((y - r * x) / scale, nu + 1.0)
        }
        Base::Clayton => {
            let th = p[0];
            let s = (-th * u.ln()).exp_m1() + (-th * v.ln()).exp_m1();
            ((-th - 1.0) * u.ln() + (-1.0 / th - 1.0) * s.ln_1p()).exp()
        }
        Base::Gumbel => {
            let th = p[0];
            let (x, y) = (-u.ln(), -v.ln());
            let la = log_sum_exp(th * x.ln(), th * y.ln()) / th;
            (-la.exp() + (th - 1.0) * x.ln() + (1.0 - th) * la + x).exp()
        }
        Base::Frank => {
            let th = p[0];
            if th.abs() < FRANK_SERIES {
                return v + 0.5 * th * v * (1.0 - v) * (1.0 - 2.0 * u);
            }
            let a = (-th * u).exp_m1();
            let b = (-th * v).exp_m1();
            let c0 = (-th).exp_m1();
            (-th * u).exp() * b / (c0 + a * b)
        }
        Base::Joe => {
            let th = p[0];
            let a = (1.0 - u).powf(th);
            let b = (1.0 - v).powf(th);
            let s = a + b - a * b;
            s.powf(1.0 / th - 1.0) * (1.0 - u).powf(th - 1.0) * (1.0 - b)
        }
        Base::Galambos => {
            let th = p[0];
            let (x, y) = (-u.ln(), -v.ln());
            let a = galambos_a(th, x, y);
            let c = (-x - y + a).exp();
            c / u * (1.0 - (a / x).powf(1.0 + th))
        }
        Base::Bb1 => {
            let (th, de) = (p[0], p[1]);
            let lu = u.ln();
            let lx = (-th * lu).exp_m1().ln();
            let ls = bb1_log_s(th, de, u, v);
            let w = (ls / de).exp();
            ((-1.0 / th - 1.0) * w.ln_1p() + (1.0 / de - 1.0) * ls + (de - 1.0) * lx + (-th - 1.0) * lu)
                .exp()
        }
    };
    h.clamp(0.0, 1.0)
}
