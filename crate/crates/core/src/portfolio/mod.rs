//! Portfolio construction (equal weight, minimum variance, minimum CVaR and
//! the one-asset-per-cluster minimum CVaR) and fixed-weight backtests.

mod lp;

pub use lp::{minimize as simplex_minimize, LpSolution};

use std::fmt::Write as _;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ReturnPanel;
use crate::error::{Error, Result};
use crate::hierclust::Partition;

pub const TRADING_DAYS: f64 = 252.0;
/// Upper bound on the number of one-per-cluster candidates enumerated.
pub const MAX_CANDIDATES: u64 = 20_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioWeights {
    pub strategy: String,
    pub tickers: Vec<String>,
    pub weights: Vec<f64>,
}

impl PortfolioWeights {
    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.tickers.len() || self.weights.is_empty() {
            return Err(Error::domain("weights and tickers differ in length"));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::domain("weights must be finite"));
        }
        let s: f64 = self.weights.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("weights sum to {s}, not 1")));
        }
        Ok(())
    }

    pub fn selected(&self) -> Vec<&str> {
        self.tickers
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w != 0.0)
            .map(|(t, _)| t.as_str())
            .collect()
    }
}

/// Number of worst observations averaged at level `alpha`.
pub fn tail_count(n: usize, alpha: f64) -> usize {
    // guard against αN landing a hair above an integer through rounding
    (((alpha * n as f64) - 1e-9).ceil() as usize).clamp(1, n)
}

/// Historical CVaR: the negated mean of the worst `⌈αN⌉` returns.
pub fn cvar(returns: &[f64], alpha: f64) -> Result<f64> {
    if returns.is_empty() {
        return Err(Error::domain("CVaR of an empty return series"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!("CVaR level {alpha} outside (0, 1]")));
    }
    let mut buf = returns.to_vec();
    Ok(cvar_in_place(&mut buf, alpha))
}

fn cvar_in_place(buf: &mut [f64], alpha: f64) -> f64 {
    let k = tail_count(buf.len(), alpha);
    if k < buf.len() {
        buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    }
    let worst = &mut buf[..k];
    // fixed summation order makes the value independent of the selection
    worst.sort_unstable_by(f64::total_cmp);
    -(worst.iter().sum::<f64>() / k as f64) + 0.0
}

/// CVaR of `ln g` from gross returns `g`. The logarithm is monotone, so only
/// the selected tail is transformed.
fn cvar_of_gross(buf: &mut [f64], alpha: f64) -> f64 {
    let k = tail_count(buf.len(), alpha);
    if k < buf.len() {
        buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    }
    let worst = &mut buf[..k];
    worst.sort_unstable_by(f64::total_cmp);
    -(worst.iter().map(|g| g.ln()).sum::<f64>() / k as f64) + 0.0
}

pub fn equal_weight(tickers: &[String]) -> Result<PortfolioWeights> {
    if tickers.is_empty() {
        return Err(Error::domain("equal weights over no assets"));
    }
    let w = 1.0 / tickers.len() as f64;
    Ok(PortfolioWeights {
        strategy: "ew".into(),
        tickers: tickers.to_vec(),
        weights: vec![w; tickers.len()],
    })
}

/// Sample covariance (denominator `T - 1`) of the panel's assets.
pub fn covariance(panel: &ReturnPanel) -> Vec<Vec<f64>> {
    let d = panel.n_assets();
    let t = panel.len();
    let means: Vec<f64> = panel.returns.iter().map(|r| crate::stats::mean(r)).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..t)
                .map(|k| (panel.returns[i][k] - means[i]) * (panel.returns[j][k] - means[j]))
                .sum();
            let v = s / (t as f64 - 1.0);
            cov[i][j] = v;
            cov[j][i] = v;
        }
    }
    cov
}

/// `w = Σ⁻¹1 / 1ᵀΣ⁻¹1`. A ridge proportional to the mean variance is added
/// when the matrix is not numerically positive definite.
pub fn global_min_variance(tickers: &[String], cov: &[Vec<f64>]) -> Result<PortfolioWeights> {
    let d = tickers.len();
    if d == 0 || cov.len() != d || cov.iter().any(|r| r.len() != d) {
        return Err(Error::domain("covariance shape does not match the tickers"));
    }
    let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("covariance is not finite".into()));
    }
    let scale = (0..d).map(|i| m[(i, i)]).sum::<f64>() / d as f64;
    let ones = DVector::from_element(d, 1.0);
    for ridge in [0.0, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4] {
        let mut a = m.clone();
        for i in 0..d {
            a[(i, i)] += ridge * scale.max(f64::MIN_POSITIVE);
        }
        if let Some(ch) = a.cholesky() {
            let x = ch.solve(&ones);
            let s = x.sum();
            if s.is_finite() && s != 0.0 {
                let weights: Vec<f64> = x.iter().map(|v| v / s).collect();
                if weights.iter().all(|w| w.is_finite()) {
                    return Ok(PortfolioWeights {
                        strategy: "gmv".into(),
                        tickers: tickers.to_vec(),
                        weights,
                    });
                }
            }
        }
    }
    Err(Error::Numeric("covariance is singular even after regularization".into()))
}

/// Long-only weights minimizing the training CVaR at level `alpha`, by the
/// Rockafellar–Uryasev linear program on simple returns. Assets with
/// identical return columns receive equal weights.
pub fn min_cvar_unconstrained(train: &ReturnPanel, alpha: f64) -> Result<PortfolioWeights> {
    let d = train.n_assets();
    let t = train.len();
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("CVaR level {alpha} outside (0, 1)")));
    }
    if d == 0 || (t as f64) * alpha <= 1.0 {
        return Err(Error::domain(format!("{t} training periods are too few for level {alpha}")));
    }
    let simple: Vec<Vec<f64>> = train.returns.iter().map(|r| r.iter().map(|x| x.exp_m1()).collect()).collect();
    let k = tail_count(t, alpha) as f64;

    // columns: w (d), zeta+, zeta-, s (t), e (t)
    let n = d + 2 + 2 * t;
    let (zp, zm, s0, e0) = (d, d + 1, d + 2, d + 2 + t);
    let mut c = vec![0.0; n];
    c[zp] = 1.0;
    c[zm] = -1.0;
    for v in &mut c[s0..s0 + t] {
        *v = 1.0 / k;
    }
    let mut a = Vec::with_capacity(t + 1);
    for tt in 0..t {
        let mut row = vec![0.0; n];
        for i in 0..d {
            row[i] = simple[i][tt];
        }
        row[zp] = 1.0;
        row[zm] = -1.0;
        row[s0 + tt] = 1.0;
        row[e0 + tt] = -1.0;
        a.push(row);
    }
    let mut budget = vec![0.0; n];
    for v in &mut budget[..d] {
        *v = 1.0;
    }
    a.push(budget);
    let mut b = vec![0.0; t + 1];
    b[t] = 1.0;

    // crash basis: all weight on the asset with the best standalone CVaR
    let start = (0..d)
        .map(|i| {
            let mut buf = simple[i].clone();
            (cvar_in_place(&mut buf, alpha), i)
        })
        .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
        .map(|(_, i)| i)
        .expect("d >= 1");
    let (worst_t, worst) = simple[start]
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1).then(x.0.cmp(&y.0)))
        .map(|(i, v)| (i, *v))
        .expect("t >= 1");
    let zeta_col = if worst <= 0.0 { zp } else { zm };
    let basis: Vec<usize> = (0..t)
        .map(|tt| if tt == worst_t { zeta_col } else { e0 + tt })
        .chain(std::iter::once(start))
        .collect();

    let sol = lp::minimize(&c, &a, &b, Some(&basis))?;
    let mut w: Vec<f64> = sol.x[..d].iter().map(|v| v.max(0.0)).collect();
    equalize_duplicates(&train.returns, &mut w);
    let s: f64 = w.iter().sum();
    if !(s > 0.0) {
        return Err(Error::Numeric("minimum-CVaR program returned no weight".into()));
    }
    for v in &mut w {
        *v /= s;
    }
    Ok(PortfolioWeights {
        strategy: "min_cvar".into(),
        tickers: train.tickers.clone(),
        weights: w,
    })
}

fn equalize_duplicates(columns: &[Vec<f64>], w: &mut [f64]) {
    let d = columns.len();
    let mut done = vec![false; d];
    for i in 0..d {
        if done[i] {
            continue;
        }
        let group: Vec<usize> = (i..d).filter(|&j| !done[j] && columns[j] == columns[i]).collect();
        let total: f64 = group.iter().map(|&j| w[j]).sum();
        for &j in &group {
            w[j] = total / group.len() as f64;
            done[j] = true;
        }
    }
}

/// Per-period log return of a fixed-weight portfolio:
/// `ln Σ w_i exp(r_it)`.
pub fn portfolio_log_returns(weights: &[f64], returns: &[Vec<f64>]) -> Vec<f64> {
    let t = returns.first().map_or(0, Vec::len);
    (0..t)
        .map(|k| {
            let gross: f64 = weights
                .iter()
                .zip(returns)
                .filter(|(w, _)| **w != 0.0)
                .map(|(w, r)| w * r[k].exp())
                .sum();
            gross.ln()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSelection {
    pub weights: PortfolioWeights,
    pub train_cvar: f64,
    pub candidates: u64,
}

/// Candidate `index` decoded in mixed radix: digit `c` is 0 for "no asset
/// from cluster c" or `1 + j` for its `j`-th member.
fn decode(mut index: u64, clusters: &[Vec<usize>]) -> Vec<usize> {
    let mut out = Vec::new();
    for members in clusters {
        let radix = members.len() as u64 + 1;
        let digit = (index % radix) as usize;
        index /= radix;
        if digit > 0 {
            out.push(members[digit - 1]);
        }
    }
    out.sort_unstable();
    out
}

pub fn candidate_count(partition: &Partition) -> Option<u64> {
    partition
        .clusters()
        .iter()
        .try_fold(1u64, |acc, c| acc.checked_mul(c.len() as u64 + 1))
        .map(|p| p - 1)
}

/// Exhaustive one-asset-per-cluster search. Every candidate equally weights
/// its assets and is scored by the training CVaR of its log returns. Ties go
/// to fewer assets, then to the lexicographically smaller ticker list.
pub fn cluster_min_cvar(train: &ReturnPanel, partition: &Partition, alpha: f64) -> Result<ClusterSelection> {
    let d = train.n_assets();
    if partition.is_empty() {
        return Err(Error::domain("empty partition"));
    }
    if partition.len() != d {
        return Err(Error::domain(format!("partition over {} items for {d} assets", partition.len())));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("CVaR level {alpha} outside (0, 1)")));
    }
    let total = candidate_count(partition).filter(|n| *n <= MAX_CANDIDATES).ok_or_else(|| {
        Error::Numeric(format!("more than {MAX_CANDIDATES} cluster portfolios to enumerate"))
    })?;
    let clusters = partition.clusters();
    let gross: Vec<Vec<f64>> = train.returns.iter().map(|r| r.iter().map(|x| x.exp()).collect()).collect();
    let t = train.len();

    let score = |index: u64, buf: &mut Vec<f64>| -> (f64, usize, u64) {
        let chosen = decode(index + 1, &clusters);
        let w = 1.0 / chosen.len() as f64;
        buf.clear();
        buf.extend((0..t).map(|k| chosen.iter().map(|&i| w * gross[i][k]).sum::<f64>()));
        (cvar_of_gross(buf, alpha), chosen.len(), index)
    };
    let names = |index: u64| -> Vec<&str> {
        let mut v: Vec<&str> = decode(index + 1, &clusters).iter().map(|&i| train.tickers[i].as_str()).collect();
        v.sort_unstable();
        v
    };
    let better = |a: &(f64, usize, u64), b: &(f64, usize, u64)| -> bool {
        match a.0.total_cmp(&b.0) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => match a.1.cmp(&b.1) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Greater => false,
                std::cmp::Ordering::Equal => (names(a.2), a.2) < (names(b.2), b.2),
            },
        }
    };
    let best = (0..total)
        .into_par_iter()
        .map_init(|| Vec::with_capacity(t), |buf, i| score(i, buf))
        .reduce_with(|a, b| if better(&b, &a) { b } else { a })
        .expect("at least one candidate");

    let chosen = decode(best.2 + 1, &clusters);
    let mut weights = vec![0.0; d];
    for &i in &chosen {
        weights[i] = 1.0 / chosen.len() as f64;
    }
    Ok(ClusterSelection {
        weights: PortfolioWeights {
            strategy: "cluster_min_cvar".into(),
            tickers: train.tickers.clone(),
            weights,
        },
        train_cvar: best.0,
        candidates: total,
    })
}

/// Every candidate with its training CVaR, in enumeration order.
pub fn enumerate_cluster_candidates(train: &ReturnPanel, partition: &Partition, alpha: f64) -> Result<Vec<(Vec<usize>, f64)>> {
    let total = candidate_count(partition).ok_or_else(|| Error::Numeric("candidate count overflow".into()))?;
    let clusters = partition.clusters();
    (1..=total)
        .map(|i| {
            let chosen = decode(i, &clusters);
            let mut w = vec![0.0; train.n_assets()];
            for &a in &chosen {
                w[a] = 1.0 / chosen.len() as f64;
            }
            let r = portfolio_log_returns(&w, &train.returns);
            Ok((chosen, cvar(&r, alpha)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub strategy: String,
    pub mu_annual: f64,
    pub sigma_annual: f64,
    pub cvar_annual: f64,
    pub mdd: f64,
    pub ce: f64,
    pub alpha: f64,
    pub tickers: Vec<String>,
    pub weights: Vec<f64>,
    pub dates: Vec<NaiveDate>,
    /// Cumulative value, rebased at 100 on the day before the first return.
    pub curve: Vec<f64>,
}

/// Largest peak-to-trough decline as a fraction of the peak.
pub fn max_drawdown(curve: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut mdd: f64 = 0.0;
    for &v in curve {
        peak = peak.max(v);
        mdd = mdd.max(1.0 - v / peak);
    }
    mdd
}

/// Fixed-weight backtest over the test panel.
pub fn backtest(weights: &PortfolioWeights, test: &ReturnPanel, alpha: f64) -> Result<BacktestReport> {
    weights.validate()?;
    if weights.tickers != test.tickers {
        return Err(Error::domain("weights and test panel list different assets"));
    }
    if test.is_empty() {
        return Err(Error::domain("empty test period"));
    }
    let daily = portfolio_log_returns(&weights.weights, &test.returns);
    if daily.iter().any(|r| !r.is_finite()) {
        return Err(Error::Numeric(format!("{} portfolio value reaches zero", weights.strategy)));
    }
    let n = daily.len();
    let mean = crate::stats::mean(&daily);
    let sd = if n > 1 { crate::stats::sample_variance(&daily).sqrt() } else { 0.0 };
    let mu = mean * TRADING_DAYS;
    let sigma = sd * TRADING_DAYS.sqrt();
    let mut curve = Vec::with_capacity(n + 1);
    let mut cum = 0.0;
    curve.push(100.0);
    for r in &daily {
        cum += r;
        curve.push(100.0 * cum.exp());
    }
    let mut dates = Vec::with_capacity(n + 1);
    dates.push(test.base_date);
    dates.extend_from_slice(&test.dates);
    Ok(BacktestReport {
        strategy: weights.strategy.clone(),
        mu_annual: mu + 0.0,
        sigma_annual: sigma,
        cvar_annual: cvar(&daily, alpha)? * TRADING_DAYS.sqrt() + 0.0,
        mdd: max_drawdown(&curve),
        ce: mu - sigma * sigma / 2.0 + 0.0,
        alpha,
        tickers: weights.tickers.clone(),
        weights: weights.weights.clone(),
        dates,
        curve,
    })
}

impl BacktestReport {
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("date,value\n");
        for (d, v) in self.dates.iter().zip(&self.curve) {
            writeln!(out, "{d},{v}").expect("writing to a String");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cvar_examples() {
        assert_eq!(cvar(&[-0.03, -0.01, 0.0, 0.01, 0.02], 0.2).unwrap(), 0.03);
        assert_eq!(cvar(&[0.01; 7], 0.3).unwrap(), -0.01);
        let r = [0.05, -0.02, 0.01, 0.04];
        assert!((cvar(&r, 1.0).unwrap() + 0.02).abs() < 1e-15);
        assert!(cvar(&[], 0.2).is_err());
        assert_eq!(tail_count(5, 0.2), 1);
        assert_eq!(tail_count(10, 0.3), 3);
        assert_eq!(tail_count(11, 0.2), 3);
    }

    #[test]
    fn gmv_diagonal() {
        let names = vec!["a".to_string(), "b".to_string()];
        let w = global_min_variance(&names, &[vec![1.0, 0.0], vec![0.0, 4.0]]).unwrap();
        assert!((w.weights[0] - 0.8).abs() < 1e-12 && (w.weights[1] - 0.2).abs() < 1e-12);
        let w = global_min_variance(&names, &[vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(w.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn drawdown() {
        assert_eq!(max_drawdown(&[100.0, 100.0]), 0.0);
        assert!((max_drawdown(&[100.0, 120.0, 90.0, 130.0]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn decode_enumerates_all() {
        let p = Partition::from_labels(&[0, 0, 1, 2, 2, 2]);
        let total = candidate_count(&p).unwrap();
        assert_eq!(total, 3 * 2 * 4 - 1);
        let clusters = p.clusters();
        let mut seen: Vec<Vec<usize>> = (1..=total).map(|i| decode(i, &clusters)).collect();
        assert!(seen.iter().all(|s| !s.is_empty()));
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len() as u64, total);
    }
}
