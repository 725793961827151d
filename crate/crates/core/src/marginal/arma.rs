//! ARMA(p, q) conditional-sum-of-squares estimation with AIC order selection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::mean;

pub const MAX_ORDER: usize = 5;
pub const MIN_ARMA_LEN: usize = 50;
/// Orders whose fitted AR or MA polynomial has a root of modulus below this
/// are left out of the AIC comparison.
pub const ROOT_MARGIN: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmaSpec {
    pub p: usize,
    pub q: usize,
    pub intercept_included: bool,
}

impl ArmaSpec {
    pub fn new(p: usize, q: usize) -> Result<Self> {
        if p > MAX_ORDER || q > MAX_ORDER {
            return Err(Error::domain(format!("ARMA orders ({p}, {q}) exceed {MAX_ORDER}")));
        }
        Ok(ArmaSpec {
            p,
            q,
            intercept_included: true,
        })
    }

    fn n_coeffs(&self) -> usize {
        self.p + self.q + usize::from(self.intercept_included)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaFit {
    pub spec: ArmaSpec,
    pub intercept: f64,
    pub ar_coeffs: Vec<f64>,
    pub ma_coeffs: Vec<f64>,
    pub residual_variance: f64,
    pub loglik: f64,
    pub aic: f64,
    pub residuals: Vec<f64>,
}

impl ArmaFit {
    /// First `n` coefficients of the MA(∞) representation, `ψ_0 = 1`.
    pub fn psi_weights(&self, n: usize) -> Vec<f64> {
        let mut psi = Vec::with_capacity(n);
        for j in 0..n {
            let mut v = if j == 0 { 1.0 } else { self.ma_coeffs.get(j - 1).copied().unwrap_or(0.0) };
            for (i, phi) in self.ar_coeffs.iter().enumerate().take(j) {
                v += phi * psi[j - i - 1];
            }
            psi.push(v);
        }
        psi
    }
}

/// True when `1 - a_1 z - ... - a_p z^p` has all roots outside the unit
/// circle (Schur–Cohn step-down through the partial autocorrelations).
pub fn is_stationary(coeffs: &[f64]) -> bool {
    let mut a = coeffs.to_vec();
    while let Some(&kk) = a.last() {
        if !(kk.abs() < 1.0) {
            return false;
        }
        let k = a.len();
        let denom = 1.0 - kk * kk;
        let b: Vec<f64> = (0..k - 1).map(|j| (a[j] + kk * a[k - 2 - j]) / denom).collect();
        a = b;
    }
    true
}

/// True when `1 + b_1 z + ... + b_q z^q` has all roots outside the unit circle.
pub fn is_invertible(ma: &[f64]) -> bool {
    let neg: Vec<f64> = ma.iter().map(|b| -b).collect();
    is_stationary(&neg)
}

/// True when every root of both polynomials has modulus at least `radius`.
pub fn roots_outside(ar: &[f64], ma: &[f64], radius: f64) -> bool {
    let scale = |c: &[f64]| -> Vec<f64> { c.iter().zip(1..).map(|(a, i)| a * radius.powi(i)).collect() };
    is_stationary(&scale(ar)) && is_invertible(&scale(ma))
}

/// Coefficient vector layout: `[c?, φ_1..φ_p, θ_1..θ_q]`.
struct Model<'a> {
    x: &'a [f64],
    spec: ArmaSpec,
    presample: f64,
}

impl Model<'_> {
    fn split<'b>(&self, beta: &'b [f64]) -> (f64, &'b [f64], &'b [f64]) {
        let off = usize::from(self.spec.intercept_included);
        let c = if off == 1 { beta[0] } else { 0.0 };
        (c, &beta[off..off + self.spec.p], &beta[off + self.spec.p..])
    }

    fn lag_x(&self, t: usize, i: usize) -> f64 {
        if t >= i {
            self.x[t - i]
        } else {
            self.presample
        }
    }

    fn residuals(&self, beta: &[f64]) -> Vec<f64> {
        let (c, phi, theta) = self.split(beta);
        let n = self.x.len();
        let mut e = vec![0.0; n];
        for t in 0..n {
            let mut fitted = c;
            for (i, ph) in phi.iter().enumerate() {
                fitted += ph * self.lag_x(t, i + 1);
            }
            for (j, th) in theta.iter().enumerate() {
                if t > j {
                    fitted += th * e[t - j - 1];
                }
            }
            e[t] = self.x[t] - fitted;
        }
        e
    }

    fn sse(&self, beta: &[f64]) -> f64 {
        self.residuals(beta)[MAX_ORDER..].iter().map(|e| e * e).sum()
    }

    /// Residuals and their Jacobian with respect to `beta`, restricted to the
    /// conditioning window `t >= MAX_ORDER`.
    fn jacobian(&self, beta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let (_, _, theta) = self.split(beta);
        let n = self.x.len();
        let k = beta.len();
        let e = self.residuals(beta);
        let off = usize::from(self.spec.intercept_included);
        let mut d = vec![vec![0.0; k]; n];
        for t in 0..n {
            let mut row = vec![0.0; k];
            if off == 1 {
                row[0] = -1.0;
            }
            for i in 0..self.spec.p {
                row[off + i] = -self.lag_x(t, i + 1);
            }
            for j in 0..self.spec.q {
                if t > j {
                    row[off + self.spec.p + j] = -e[t - j - 1];
                }
            }
            for (j, th) in theta.iter().enumerate() {
                if t > j {
                    for (r, prev) in row.iter_mut().zip(&d[t - j - 1]) {
                        *r -= th * prev;
                    }
                }
            }
            d[t] = row;
        }
        let m = n - MAX_ORDER;
        let r = DVector::from_iterator(m, e[MAX_ORDER..].iter().copied());
        let j = DMatrix::from_fn(m, k, |i, c| d[i + MAX_ORDER][c]);
        (r, j)
    }

    fn admissible(&self, beta: &[f64]) -> bool {
        let (_, phi, theta) = self.split(beta);
        beta.iter().all(|b| b.is_finite()) && is_stationary(phi) && is_invertible(theta)
    }
}

/// Ordinary least squares; `None` when the normal equations are singular.
fn ols(design: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let xtx = design.transpose() * design;
    let xty = design.transpose() * y;
    xtx.cholesky().map(|c| c.solve(&xty))
}

/// Hannan–Rissanen start: long autoregression for innovations, then a
/// regression on lagged values and lagged innovations.
fn hannan_rissanen(model: &Model, spec: ArmaSpec) -> Option<Vec<f64>> {
    let x = model.x;
    let n = x.len();
    let off = usize::from(spec.intercept_included);
    let innovations = if spec.q > 0 {
        let m = (2 * MAX_ORDER).min(n / 4);
        let rows = n - m;
        let design = DMatrix::from_fn(rows, m + 1, |r, c| if c == 0 { 1.0 } else { x[r + m - c] });
        let y = DVector::from_iterator(rows, x[m..].iter().copied());
        let coef = ols(&design, &y)?;
        let mut e = vec![0.0; n];
        for t in m..n {
            let mut f = coef[0];
            for i in 1..=m {
                f += coef[i] * x[t - i];
            }
            e[t] = x[t] - f;
        }
        e
    } else {
        vec![0.0; n]
    };
    let start = (2 * MAX_ORDER).max(MAX_ORDER + spec.q);
    let rows = n - start;
    let k = spec.n_coeffs();
    let design = DMatrix::from_fn(rows, k, |r, c| {
        let t = r + start;
        if off == 1 && c == 0 {
            1.0
        } else if c < off + spec.p {
            x[t - (c - off + 1)]
        } else {
            innovations[t - (c - off - spec.p + 1)]
        }
    });
    let y = DVector::from_iterator(rows, x[start..].iter().copied());
    ols(&design, &y).map(|b| b.iter().copied().collect())
}

fn levenberg_marquardt(model: &Model, mut beta: Vec<f64>) -> (Vec<f64>, f64) {
    let mut sse = model.sse(&beta);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let (r, j) = model.jacobian(&beta);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let candidate: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + s).collect();
            if model.admissible(&candidate) {
                let new_sse = model.sse(&candidate);
                if new_sse < sse {
                    let rel = (sse - new_sse) / sse.max(f64::MIN_POSITIVE);
                    beta = candidate;
                    sse = new_sse;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = rel > 1e-12;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (beta, sse)
}

/// CSS fit of one `(p, q)` order.
///
/// All orders share the conditioning window `t >= MAX_ORDER`, so their
/// likelihoods and AICs are directly comparable. Pre-sample values are set
/// to the sample mean and pre-sample innovations to zero.
pub fn fit_arma(series: &[f64], spec: ArmaSpec) -> Result<ArmaFit> {
    if series.len() < MIN_ARMA_LEN {
        return Err(Error::domain(format!(
            "series of length {}; ARMA fitting needs at least {MIN_ARMA_LEN}",
            series.len()
        )));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::fit("series contains non-finite values"));
    }
    if series.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::fit("degenerate (constant) series"));
    }
    let model = Model {
        x: series,
        spec,
        presample: mean(series),
    };

    let off = usize::from(spec.intercept_included);
    let mut zero = vec![0.0; spec.n_coeffs()];
    if off == 1 {
        zero[0] = mean(&series[MAX_ORDER..]);
    }
    let mut starts = vec![zero];
    if let Some(mut hr) = hannan_rissanen(&model, spec) {
        for _ in 0..20 {
            if model.admissible(&hr) {
                break;
            }
            for b in hr.iter_mut().skip(off) {
                *b *= 0.5;
            }
        }
        if model.admissible(&hr) {
            starts.push(hr);
        }
    }

    let (beta, sse) = starts
        .into_iter()
        .map(|s| levenberg_marquardt(&model, s))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least the zero start");
    if !sse.is_finite() || sse <= 0.0 {
        return Err(Error::fit(format!("ARMA({}, {}) did not converge", spec.p, spec.q)));
    }

    let n_eff = (series.len() - MAX_ORDER) as f64;
    let sigma2 = sse / n_eff;
    let loglik = -0.5 * n_eff * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    let k = spec.n_coeffs() + 1;
    let aic = 2.0 * k as f64 - 2.0 * loglik;
    let (c, phi, theta) = model.split(&beta);
    Ok(ArmaFit {
        spec,
        intercept: c,
        ar_coeffs: phi.to_vec(),
        ma_coeffs: theta.to_vec(),
        residual_variance: sigma2,
        loglik,
        aic,
        residuals: model.residuals(&beta),
    })
}

/// Fit every `(p, q)` with `0 <= p, q <= 5` and keep the smallest AIC.
/// Ties go to the smaller `p + q`, then the smaller `p`. Fits with a root
/// inside `ROOT_MARGIN` are skipped as near-redundant.
pub fn fit_arma_aic(series: &[f64]) -> Result<ArmaFit> {
    let mut best: Option<ArmaFit> = None;
    let mut last_err = None;
    for p in 0..=MAX_ORDER {
        for q in 0..=MAX_ORDER {
            let spec = ArmaSpec::new(p, q)?;
            match fit_arma(series, spec) {
                Ok(fit) if !roots_outside(&fit.ar_coeffs, &fit.ma_coeffs, ROOT_MARGIN) => {
                    last_err = Some(Error::fit(format!("ARMA({p}, {q}) has a near-unit root")));
                }
                Ok(fit) => {
                    let better = match &best {
                        None => true,
                        Some(b) => {
                            let key = |f: &ArmaFit| (f.spec.p + f.spec.q, f.spec.p);
                            fit.aic < b.aic || (fit.aic == b.aic && key(&fit) < key(b))
                        }
                    };
                    if better {
                        best = Some(fit);
                    }
                }
                Err(e @ Error::Domain(_)) => return Err(e),
                Err(e) => last_err = Some(e),
            }
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::fit("no ARMA order could be fitted")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationarity_checks() {
        assert!(is_stationary(&[]));
        assert!(is_stationary(&[0.5]));
        assert!(!is_stationary(&[1.0]));
        assert!(!is_stationary(&[-1.2]));
        // 1 - 1.5z + 0.56z^2 = (1 - 0.7z)(1 - 0.8z)
        assert!(is_stationary(&[1.5, -0.56]));
        // (1 - 0.5z)(1 - 1.25z)
        assert!(!is_stationary(&[1.75, -0.625]));
        assert!(is_invertible(&[0.5]));
        assert!(!is_invertible(&[1.1]));
        // root at 1/0.995 ≈ 1.005
        assert!(is_stationary(&[0.995]));
        assert!(!roots_outside(&[0.995], &[], ROOT_MARGIN));
        assert!(roots_outside(&[0.98], &[-0.5], ROOT_MARGIN));
    }

    #[test]
    fn constant_series_is_fit_error() {
        let x = vec![0.3; 100];
        assert!(matches!(fit_arma_aic(&x), Err(Error::Fit(_))));
        assert!(matches!(fit_arma_aic(&x[..20]), Err(Error::Domain(_))));
    }

    #[test]
    fn white_noise_mean_only() {
        let spec = ArmaSpec::new(0, 0).unwrap();
        let x: Vec<f64> = (0..200).map(|t| ((t * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let fit = fit_arma(&x, spec).unwrap();
        let m = mean(&x[MAX_ORDER..]);
        assert!((fit.intercept - m).abs() < 1e-10);
        assert!((fit.residuals[10] - (x[10] - m)).abs() < 1e-10);
        assert_eq!(fit.residuals.len(), x.len());
    }
}
