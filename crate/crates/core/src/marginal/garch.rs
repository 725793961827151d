//! GJR-GARCH(1,1) with standardized Student-t innovations.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::optim::{from_interval, nelder_mead, to_interval, NelderMeadOptions};
use crate::stats::{mean, sample_variance};

pub const MIN_GARCH_LEN: usize = 250;
/// Upper bound on `α + γ/2 + β`.
pub const MAX_PERSISTENCE: f64 = 0.9999;
pub const NU_RANGE: (f64, f64) = (2.05, 200.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GjrGarchFit {
    pub mean: f64,
    pub omega: f64,
    /// ARCH coefficient α.
    pub arch: f64,
    /// Leverage coefficient γ.
    pub leverage: f64,
    pub beta: f64,
    pub dof: f64,
    pub loglik: f64,
    pub conditional_sigmas: Vec<f64>,
    pub std_residuals: Vec<f64>,
}

impl GjrGarchFit {
    pub fn persistence(&self) -> f64 {
        self.arch + self.leverage / 2.0 + self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchParams {
    pub mu: f64,
    pub omega: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
    pub nu: f64,
}

/// Unconstrained coordinates:
/// `[μ offset, ln ω, logit persistence, ln(w_α/w_β), ln(w_α+/w_β), ν]`
/// where the persistence `π = α/2 + (α+γ)/2 + β` is split by softmax shares.
struct Transform {
    center: f64,
    scale: f64,
    var: f64,
}

impl Transform {
    fn params(&self, x: &[f64]) -> GarchParams {
        let pi = to_interval(x[2], 0.0, MAX_PERSISTENCE);
        let m = x[3].max(x[4]).max(0.0);
        let (e1, e2, e3) = ((x[3] - m).exp(), (x[4] - m).exp(), (-m).exp());
        let tot = e1 + e2 + e3;
        let alpha = 2.0 * pi * e1 / tot;
        let alpha_plus = 2.0 * pi * e2 / tot;
        let beta = pi * e3 / tot;
        GarchParams {
            mu: self.center + self.scale * x[0],
            omega: self.var * x[1].exp(),
            alpha,
            gamma: alpha_plus - alpha,
            beta,
            nu: to_interval(x[5], NU_RANGE.0, NU_RANGE.1),
        }
    }

    fn unconstrained(&self, p: &GarchParams) -> Vec<f64> {
        let pi = p.alpha / 2.0 + (p.alpha + p.gamma) / 2.0 + p.beta;
        let w1 = p.alpha / (2.0 * pi);
        let w2 = (p.alpha + p.gamma) / (2.0 * pi);
        let w3 = p.beta / pi;
        vec![
            (p.mu - self.center) / self.scale,
            (p.omega / self.var).ln(),
            from_interval(pi, 0.0, MAX_PERSISTENCE),
            (w1 / w3).ln(),
            (w2 / w3).ln(),
            from_interval(p.nu, NU_RANGE.0, NU_RANGE.1),
        ]
    }
}

/// Conditional variance recursion. `sigma2_1` seeds the first period.
pub fn conditional_variances(eps: &[f64], p: &GarchParams, sigma2_1: f64) -> Vec<f64> {
    let mut s2 = Vec::with_capacity(eps.len());
    let mut cur = sigma2_1;
    for &x in eps {
        s2.push(cur);
        let e = x - p.mu;
        let a = if e < 0.0 { p.alpha + p.gamma } else { p.alpha };
        cur = p.omega + a * e * e + p.beta * cur;
    }
    s2
}

/// Log-likelihood of the series under standardized-t innovations.
pub fn loglik(eps: &[f64], p: &GarchParams, sigma2_1: f64) -> f64 {
    let nu = p.nu;
    let c = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (std::f64::consts::PI * (nu - 2.0)).ln();
    let k = (nu + 1.0) / 2.0;
    let inv = 1.0 / (nu - 2.0);
    let mut ll = 0.0;
    let mut s2 = sigma2_1;
    for &x in eps {
        if !(s2 > 0.0) || !s2.is_finite() {
            return f64::NEG_INFINITY;
        }
        let e = x - p.mu;
        ll += c - 0.5 * s2.ln() - k * (e * e / s2 * inv).ln_1p();
        let a = if e < 0.0 { p.alpha + p.gamma } else { p.alpha };
        s2 = p.omega + a * e * e + p.beta * s2;
    }
    ll
}

/// Numerical MLE of `(μ, ω, α, γ, β, ν)` by Nelder–Mead on a
/// bound-enforcing reparameterization, starting from variance targeting.
pub fn fit_gjr_garch_t(residuals: &[f64]) -> Result<GjrGarchFit> {
    let n = residuals.len();
    if n < MIN_GARCH_LEN {
        return Err(Error::domain(format!(
            "series of length {n}; GARCH fitting needs at least {MIN_GARCH_LEN}"
        )));
    }
    if residuals.iter().any(|x| !x.is_finite()) {
        return Err(Error::fit("residuals contain non-finite values"));
    }
    let var = sample_variance(residuals);
    if !(var > 0.0) {
        return Err(Error::fit("residuals have zero variance"));
    }
    let tr = Transform {
        center: mean(residuals),
        scale: var.sqrt(),
        var,
    };
    let (a0, g0, b0, nu0) = (0.05, 0.05, 0.85, 8.0);
    let start = GarchParams {
        mu: tr.center,
        omega: var * (1.0 - a0 - g0 / 2.0 - b0),
        alpha: a0,
        gamma: g0,
        beta: b0,
        nu: nu0,
    };
    let objective = |x: &[f64]| -loglik(residuals, &tr.params(x), var);
    let opts = NelderMeadOptions {
        x_tol: 1e-7,
        max_evals: 20_000,
        initial_step: 0.5,
    };
    let x0 = tr.unconstrained(&start);
    if !objective(&x0).is_finite() {
        return Err(Error::fit("GARCH log-likelihood is not finite at the start"));
    }
    let mut best = nelder_mead(&objective, &x0, &opts);
    // restart from the optimum until no further progress
    for _ in 0..6 {
        let again = nelder_mead(&objective, &best.x, &opts);
        let gain = best.value - again.value;
        let done = gain <= 1e-9 * best.value.abs().max(1.0);
        if again.value < best.value {
            best = again;
        }
        if done {
            break;
        }
    }
    if !best.value.is_finite() {
        return Err(Error::fit("GARCH log-likelihood is not finite at any evaluated point"));
    }
    let p = tr.params(&best.x);
    if !(p.alpha >= 0.0 && p.beta >= 0.0 && p.omega > 0.0 && p.nu > 2.0)
        || !(p.alpha + p.gamma / 2.0 + p.beta < 1.0)
    {
        return Err(Error::fit("GARCH optimum violates the parameter constraints"));
    }
    let s2 = conditional_variances(residuals, &p, var);
    let sigmas: Vec<f64> = s2.iter().map(|s| s.sqrt()).collect();
    if sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::fit("non-positive conditional variance"));
    }
    let std_residuals = residuals.iter().zip(&sigmas).map(|(e, s)| (e - p.mu) / s).collect();
    Ok(GjrGarchFit {
        mean: p.mu,
        omega: p.omega,
        arch: p.alpha,
        leverage: p.gamma,
        beta: p.beta,
        dof: p.nu,
        loglik: -best.value,
        conditional_sigmas: sigmas,
        std_residuals,
    })
}
