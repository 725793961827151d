//! Per-series marginal filtering: ARMA mean, GJR-GARCH-t volatility,
//! standardized residuals and rank pseudo-observations.

mod arma;
mod garch;

pub use arma::{
    fit_arma, fit_arma_aic, is_invertible, is_stationary, roots_outside, ArmaFit, ArmaSpec, MAX_ORDER, MIN_ARMA_LEN,
    ROOT_MARGIN,
};
pub use garch::{
    conditional_variances, fit_gjr_garch_t, loglik as garch_loglik, GarchParams, GjrGarchFit, MAX_PERSISTENCE,
    MIN_GARCH_LEN,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::average_ranks;

/// Rank pseudo-observations, one row per series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoObs {
    pub u: Vec<Vec<f64>>,
}

impl PseudoObs {
    pub fn n_series(&self) -> usize {
        self.u.len()
    }

    pub fn len(&self) -> usize {
        self.u.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `u[i][t] = rank / (T + 1)` with average ranks for ties.
pub fn pseudo_observations(std_residuals: &[Vec<f64>]) -> Result<PseudoObs> {
    let t = std_residuals.first().map_or(0, Vec::len);
    let mut u = Vec::with_capacity(std_residuals.len());
    for (i, row) in std_residuals.iter().enumerate() {
        if row.len() != t {
            return Err(Error::domain(format!("row {i} has length {}, expected {t}", row.len())));
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain(format!("row {i} contains non-finite values")));
        }
        if row.windows(2).all(|w| w[0] == w[1]) {
            return Err(Error::domain(format!("row {i} is constant")));
        }
        let denom = (t + 1) as f64;
        u.push(average_ranks(row).into_iter().map(|r| r / denom).collect());
    }
    Ok(PseudoObs { u })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalFit {
    pub ticker: String,
    pub arma: ArmaFit,
    pub garch: GjrGarchFit,
}

impl MarginalFit {
    pub fn std_residuals(&self) -> &[f64] {
        &self.garch.std_residuals
    }

    pub fn record(&self) -> MarginalRecord {
        let coef = |v: &[f64], i: usize| v.get(i).copied();
        let a = &self.arma;
        let g = &self.garch;
        MarginalRecord {
            ticker: self.ticker.clone(),
            p: a.spec.p,
            q: a.spec.q,
            c: a.intercept,
            phi_1: coef(&a.ar_coeffs, 0),
            phi_2: coef(&a.ar_coeffs, 1),
            phi_3: coef(&a.ar_coeffs, 2),
            phi_4: coef(&a.ar_coeffs, 3),
            phi_5: coef(&a.ar_coeffs, 4),
            theta_1: coef(&a.ma_coeffs, 0),
            theta_2: coef(&a.ma_coeffs, 1),
            theta_3: coef(&a.ma_coeffs, 2),
            theta_4: coef(&a.ma_coeffs, 3),
            theta_5: coef(&a.ma_coeffs, 4),
            sigma2: a.residual_variance,
            aic: a.aic,
            mu: g.mean,
            omega: g.omega,
            alpha: g.arch,
            gamma: g.leverage,
            beta: g.beta,
            nu: g.dof,
        }
    }
}

/// Flat per-series parameter row. Absent ARMA lags are `null`.
/// `alpha` is the ARCH coefficient, `gamma` the leverage term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalRecord {
    pub ticker: String,
    pub p: usize,
    pub q: usize,
    pub c: f64,
    pub phi_1: Option<f64>,
    pub phi_2: Option<f64>,
    pub phi_3: Option<f64>,
    pub phi_4: Option<f64>,
    pub phi_5: Option<f64>,
    pub theta_1: Option<f64>,
    pub theta_2: Option<f64>,
    pub theta_3: Option<f64>,
    pub theta_4: Option<f64>,
    pub theta_5: Option<f64>,
    pub sigma2: f64,
    pub aic: f64,
    pub mu: f64,
    pub omega: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
    pub nu: f64,
}

/// ARMA by AIC, then GJR-GARCH-t on the ARMA residuals.
pub fn fit_marginal(ticker: &str, series: &[f64]) -> Result<MarginalFit> {
    let arma = fit_arma_aic(series)?;
    let garch = fit_gjr_garch_t(&arma.residuals)?;
    Ok(MarginalFit {
        ticker: ticker.to_string(),
        arma,
        garch,
    })
}

/// Fit every series in parallel. Results keep input order.
pub fn fit_marginals(tickers: &[String], series: &[Vec<f64>]) -> Result<Vec<MarginalFit>> {
    if tickers.len() != series.len() {
        return Err(Error::domain("ticker and series counts differ"));
    }
    tickers
        .par_iter()
        .zip(series.par_iter())
        .map(|(t, s)| {
            fit_marginal(t, s).map_err(|e| match e {
                Error::Fit(m) => Error::Fit(format!("{t}: {m}")),
                Error::Domain(m) => Error::Domain(format!("{t}: {m}")),
                other => other,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_examples() {
        let p = pseudo_observations(&[vec![3.0, 1.0, 2.0], vec![1.0, 2.0, 2.0]]).unwrap();
        assert_eq!(p.u[0], vec![0.75, 0.25, 0.5]);
        assert_eq!(p.u[1], vec![0.25, 0.625, 0.625]);
        let inc: Vec<f64> = (0..9).map(f64::from).collect();
        let p = pseudo_observations(&[inc]).unwrap();
        for (t, u) in p.u[0].iter().enumerate() {
            assert_eq!(*u, (t + 1) as f64 / 10.0);
        }
    }

    #[test]
    fn constant_row_rejected() {
        assert!(pseudo_observations(&[vec![1.0, 2.0], vec![5.0, 5.0]]).is_err());
        assert!(pseudo_observations(&[vec![1.0, 2.0], vec![5.0]]).is_err());
    }
}
