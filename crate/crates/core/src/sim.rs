//! Simulators used by the test-suite and the synthetic examples.

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal, StudentT};

use crate::copula::{Base, Copula};
use crate::data::PricePanel;
use crate::marginal::GarchParams;
use crate::stats::{norm_cdf, norm_ppf, t_cdf, t_ppf};

fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Gaussian ARMA path after `burn` discarded steps.
pub fn arma<R: Rng + ?Sized>(c: f64, phi: &[f64], theta: &[f64], sigma: f64, n: usize, burn: usize, rng: &mut R) -> Vec<f64> {
    let total = n + burn;
    let mut x = vec![0.0; total];
    let mut e = vec![0.0; total];
    for t in 0..total {
        let z: f64 = rng.sample(StandardNormal);
        e[t] = sigma * z;
        let mut v = c + e[t];
        for (i, p) in phi.iter().enumerate() {
            if t > i {
                v += p * x[t - i - 1];
            }
        }
        for (j, th) in theta.iter().enumerate() {
            if t > j {
                v += th * e[t - j - 1];
            }
        }
        x[t] = v;
    }
    x.split_off(burn)
}

/// GJR-GARCH path driven by given standardized innovations.
pub fn garch_from_innovations(p: &GarchParams, z: &[f64]) -> Vec<f64> {
    let uncond = p.omega / (1.0 - p.alpha - p.gamma / 2.0 - p.beta);
    let mut s2 = uncond;
    z.iter()
        .map(|&zt| {
            let e = s2.sqrt() * zt;
            let a = if e < 0.0 { p.alpha + p.gamma } else { p.alpha };
            s2 = p.omega + a * e * e + p.beta * s2;
            p.mu + e
        })
        .collect()
}

/// Unit-variance Student-t innovation quantile.
pub fn std_t_ppf(u: f64, nu: f64) -> f64 {
    t_ppf(u, nu) * ((nu - 2.0) / nu).sqrt()
}

/// GJR-GARCH-t path after `burn` discarded steps.
pub fn gjr_garch_t<R: Rng + ?Sized>(p: &GarchParams, n: usize, burn: usize, rng: &mut R) -> Vec<f64> {
    let dist = StudentT::new(p.nu).expect("valid degrees of freedom");
    let scale = ((p.nu - 2.0) / p.nu).sqrt();
    let z: Vec<f64> = (0..n + burn).map(|_| dist.sample(rng) * scale).collect();
    let mut x = garch_from_innovations(p, &z);
    x.split_off(burn)
}

/// `n` draws from a bivariate copula by conditional inversion.
pub fn copula_sample<R: Rng + ?Sized>(c: &Copula, n: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let mut us = Vec::with_capacity(n);
    let mut vs = Vec::with_capacity(n);
    for _ in 0..n {
        let u = open_uniform(rng);
        let w = open_uniform(rng);
        us.push(u);
        vs.push(conditional_inverse(c, u, w));
    }
    (us, vs)
}

/// Solve `P(V ≤ v | U = u) = w` for `v`.
pub fn conditional_inverse(c: &Copula, u: f64, w: f64) -> f64 {
    let p = c.params();
    match c.base() {
        Base::Independence => return w,
        Base::Gaussian => {
            let r = p[0];
            return norm_cdf(r * norm_ppf(u) + (1.0 - r * r).sqrt() * norm_ppf(w));
        }
        Base::StudentT if !c.is_survival() => {
            let (r, nu) = (p[0], p[1]);
            let x = t_ppf(u, nu);
            let scale = ((nu + x * x) * (1.0 - r * r) / (nu + 1.0)).sqrt();
            return t_cdf(r * x + scale * t_ppf(w, nu + 1.0), nu);
        }
        _ => {}
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if c.conditional_cdf(u, mid) < w {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Exchangeable `dim`-variate Clayton sample by gamma frailty; returns
/// `dim` rows of length `n`.
pub fn clayton_block<R: Rng + ?Sized>(theta: f64, dim: usize, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let frailty = Gamma::new(1.0 / theta, 1.0).expect("positive shape");
    let mut rows = vec![Vec::with_capacity(n); dim];
    for _ in 0..n {
        let v: f64 = frailty.sample(rng);
        for row in rows.iter_mut() {
            let e: f64 = rng.sample(Exp1);
            let u = (e / v).ln_1p() * (-1.0 / theta);
            row.push(u.exp().clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0));
        }
    }
    rows
}

/// Price panel on consecutive calendar days from log returns (rows are
/// series), starting at 100.
pub fn prices_from_returns(tickers: &[String], returns: &[Vec<f64>], start: NaiveDate) -> PricePanel {
    let n = returns.first().map_or(0, Vec::len);
    let dates = (0..=n).map(|t| start + Duration::days(t as i64)).collect();
    let prices = returns
        .iter()
        .map(|row| {
            let mut p = 100.0f64;
            std::iter::once(p)
                .chain(row.iter().map(|r| {
                    p *= r.exp();
                    p
                }))
                .collect()
        })
        .collect();
    PricePanel {
        tickers: tickers.to_vec(),
        dates,
        prices,
    }
}

/// Independent blocks of GJR-GARCH-t series, Clayton(`theta`) dependent
/// within each block. Returns `(tickers, log returns, block labels)`.
pub fn clayton_blocks<R: Rng + ?Sized>(
    sizes: &[usize],
    theta: f64,
    p: &GarchParams,
    n: usize,
    rng: &mut R,
) -> (Vec<String>, Vec<Vec<f64>>, Vec<usize>) {
    let mut tickers = Vec::new();
    let mut returns = Vec::new();
    let mut labels = Vec::new();
    for (b, &size) in sizes.iter().enumerate() {
        for u in clayton_block(theta, size, n, rng) {
            let z: Vec<f64> = u.iter().map(|&x| std_t_ppf(x, p.nu)).collect();
            tickers.push(format!("S{:02}", tickers.len()));
            returns.push(garch_from_innovations(p, &z));
            labels.push(b);
        }
    }
    (tickers, returns, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::Family;
    use crate::stats::kendall_tau;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn conditional_inverse_inverts() {
        for f in Family::ALL {
            let params: Vec<f64> = match f {
                Family::Gaussian => vec![0.6],
                Family::StudentT => vec![-0.3, 4.0],
                Family::Frank => vec![-3.0],
                Family::Bb1 => vec![0.8, 1.5],
                _ => vec![2.0],
            };
            let c = Copula::new(f, &params).unwrap();
            for (u, w) in [(0.1, 0.3), (0.7, 0.9), (0.5, 0.02)] {
                let v = conditional_inverse(&c, u, w);
                assert!((c.conditional_cdf(u, v) - w).abs() < 1e-8, "{f}");
            }
        }
    }

    #[test]
    fn clayton_block_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows = clayton_block(2.0, 3, 4000, &mut rng);
        // tau = θ / (θ + 2)
        let tau = kendall_tau(&rows[0], &rows[2]);
        assert!((tau - 0.5).abs() < 0.03, "{tau}");
    }
}
