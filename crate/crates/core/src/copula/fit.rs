//! Maximum-likelihood estimation of the copula families on pseudo-observations.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::optim::{from_interval, golden_section, nelder_mead, to_interval, NelderMeadOptions};
use crate::stats::{kendall_tau, norm_ppf, t_ppf};

use super::families::student_t_constant;
use super::{Base, Copula, CopulaFit, Family, NU_BOUNDS};

pub const MIN_FIT_SAMPLE: usize = 50;

/// Degrees of freedom profiled before local refinement of the Student-t fit.
pub const STUDENT_T_NU_GRID: [f64; 9] = [2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 15.0, 25.0];

/// Transformed starts are kept inside this box so the simplex does not begin
/// on a flat logistic plateau.
const START_BOX: f64 = 8.0;
/// A transformed coordinate beyond this magnitude means the optimum is
/// pressed against a bound.
const BOUND_FLAG: f64 = 12.0;

fn nm_options() -> NelderMeadOptions {
    NelderMeadOptions {
        x_tol: 1e-8,
        max_evals: 4_000,
        initial_step: 0.5,
    }
}

fn check_sample(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::domain(format!(
            "pseudo-observation columns differ in length ({} vs {})",
            u.len(),
            v.len()
        )));
    }
    if u.len() < MIN_FIT_SAMPLE {
        return Err(Error::domain(format!(
            "{} observations; copula fitting needs at least {MIN_FIT_SAMPLE}",
            u.len()
        )));
    }
    if u.iter().chain(v).any(|x| !(*x > 0.0 && *x < 1.0)) {
        return Err(Error::domain("pseudo-observations must lie strictly inside (0, 1)"));
    }
    Ok(())
}

pub fn fit_mle(family: Family, u: &[f64], v: &[f64]) -> Result<CopulaFit> {
    fit_pair(family, (0, 1), u, v)
}

pub fn fit_pair(family: Family, pair: (usize, usize), u: &[f64], v: &[f64]) -> Result<CopulaFit> {
    check_sample(u, v)?;
    let tau = kendall_tau(u, v);
    let (params, loglik, at_bound) = match family {
        Family::StudentT => fit_student_t(u, v, tau)?,
        Family::Gaussian => fit_gaussian(u, v, tau)?,
        _ => fit_generic(family, u, v, tau)?,
    };
    if !loglik.is_finite() {
        return Err(Error::fit(format!("{family}: non-finite log-likelihood at optimum")));
    }
    Ok(CopulaFit {
        pair,
        family,
        params,
        loglik,
        at_bound,
    })
}

/// Starting points in parameter space, best guess first.
fn starts(family: Family, tau: f64) -> Vec<Vec<f64>> {
    let rho = (PI * tau / 2.0).sin();
    match family {
        Family::Gaussian => vec![vec![rho], vec![0.0]],
        Family::StudentT => unreachable!("profiled separately"),
        Family::Clayton => vec![vec![2.0 * tau / (1.0 - tau)], vec![1.0]],
        Family::SurvivalGumbel => vec![vec![1.0 / (1.0 - tau)], vec![1.5]],
        Family::Frank => vec![vec![if tau < 0.0 { -2.0 } else { 2.0 }]],
        Family::SurvivalJoe => vec![vec![1.5]],
        Family::SurvivalGalambos => vec![vec![1.0]],
        Family::Bb1 => {
            let mut s = vec![vec![0.5, 1.5]];
            // τ = 1 - 2 / (δ (θ + 2)) at δ = 1.5
            let theta = 2.0 / (1.5 * (1.0 - tau)) - 2.0;
            if theta.is_finite() && theta > 0.0 {
                s.push(vec![theta, 1.5]);
            }
            s
        }
    }
}

fn to_params(bounds: &[(f64, f64)], x: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(bounds)
        .map(|(&xi, &(lo, hi))| {
            // keep strictly inside the open interval even when the logistic saturates
            let eps = 1e-9 * (hi - lo);
            to_interval(xi, lo, hi).clamp(lo + eps, hi - eps)
        })
        .collect()
}

fn to_unconstrained(bounds: &[(f64, f64)], p: &[f64]) -> Vec<f64> {
    p.iter()
        .zip(bounds)
        .map(|(&pi, &(lo, hi))| {
            let x = if pi.is_finite() { from_interval(pi, lo, hi) } else { 0.0 };
            x.clamp(-START_BOX, START_BOX)
        })
        .collect()
}

fn negative_loglik(copula: &Copula, u: &[f64], v: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&a, &b) in u.iter().zip(v) {
        let ld = copula.log_density_unchecked(a, b);
        if !ld.is_finite() {
            return f64::INFINITY;
        }
        total += ld;
    }
    -total
}

fn fit_generic(family: Family, u: &[f64], v: &[f64], tau: f64) -> Result<(Vec<f64>, f64, bool)> {
    let base: Base = family.base();
    let survival = family.is_survival();
    let bounds = family.bounds();
    let objective = |x: &[f64]| {
        let p = to_params(bounds, x);
        negative_loglik(&Copula::from_parts(base, survival, &p), u, v)
    };

    let mut best_start = None;
    for s in starts(family, tau) {
        let x = to_unconstrained(bounds, &s);
        let f = objective(&x);
        if f.is_finite() && best_start.as_ref().is_none_or(|(_, bf)| f < *bf) {
            best_start = Some((x, f));
        }
    }
    let Some((x0, _)) = best_start else {
        return Err(Error::fit(format!("{family}: log-likelihood non-finite at every start")));
    };

    let opts = nm_options();
    let mut m = nelder_mead(objective, &x0, &opts);
    // one restart from the optimum guards against a prematurely collapsed simplex
    let m2 = nelder_mead(objective, &m.x, &opts);
    if m2.value <= m.value {
        m = m2;
    }
    if !m.value.is_finite() {
        return Err(Error::fit(format!("{family}: optimizer found no finite likelihood")));
    }
    let at_bound = m.x.iter().any(|x| x.abs() > BOUND_FLAG);
    Ok((to_params(bounds, &m.x), -m.value, at_bound))
}

/// The Gaussian likelihood depends on the normal scores only through three
/// sums, so it is maximized without re-evaluating quantiles.
fn fit_gaussian(u: &[f64], v: &[f64], tau: f64) -> Result<(Vec<f64>, f64, bool)> {
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in u.iter().zip(v) {
        let (x, y) = (norm_ppf(a), norm_ppf(b));
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    let n = u.len() as f64;
    let loglik = |r: f64| {
        let one_m = 1.0 - r * r;
        -0.5 * n * one_m.ln() - (r * r * (sxx + syy) - 2.0 * r * sxy) / (2.0 * one_m)
    };
    let bounds = Family::Gaussian.bounds();
    let objective = |x: &[f64]| -loglik(to_params(bounds, x)[0]);
    let x0 = to_unconstrained(bounds, &[(PI * tau / 2.0).sin()]);
    let opts = nm_options();
    let mut m = nelder_mead(objective, &x0, &opts);
    let m2 = nelder_mead(objective, &m.x, &opts);
    if m2.value <= m.value {
        m = m2;
    }
    if !m.value.is_finite() {
        return Err(Error::fit("gaussian: optimizer found no finite likelihood"));
    }
    Ok((to_params(bounds, &m.x), -m.value, m.x[0].abs() > BOUND_FLAG))
}

/// Student-t quantiles of the pseudo-observations for one `nu`, computed
/// once per distinct value.
struct QuantileTable {
    values: Vec<f64>,
    u_idx: Vec<usize>,
    v_idx: Vec<usize>,
}

impl QuantileTable {
    fn new(u: &[f64], v: &[f64]) -> Self {
        let mut values: Vec<f64> = u.iter().chain(v).copied().collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let index = |x: &f64| values.binary_search_by(|p| p.total_cmp(x)).expect("value present");
        let u_idx = u.iter().map(index).collect();
        let v_idx = v.iter().map(index).collect();
        QuantileTable { values, u_idx, v_idx }
    }
}

/// Sufficient statistics of the Student-t copula likelihood at fixed `nu`.
struct TProfileData {
    nu: f64,
    sq: Vec<f64>,
    cross: Vec<f64>,
    marginal_sum: f64,
}

impl TProfileData {
    fn new(table: &QuantileTable, nu: f64) -> Self {
        let q: Vec<f64> = table.values.iter().map(|&p| t_ppf(p, nu)).collect();
        let n = table.u_idx.len();
        let mut sq = Vec::with_capacity(n);
        let mut cross = Vec::with_capacity(n);
        let mut marginal_sum = 0.0;
        for (&i, &j) in table.u_idx.iter().zip(&table.v_idx) {
            let (x, y) = (q[i], q[j]);
            sq.push(x * x + y * y);
            cross.push(x * y);
            marginal_sum += (nu + 1.0) / 2.0 * ((x * x / nu).ln_1p() + (y * y / nu).ln_1p());
        }
        TProfileData {
            nu,
            sq,
            cross,
            marginal_sum,
        }
    }

    fn loglik(&self, r: f64) -> f64 {
        let nu = self.nu;
        let denom = nu * (1.0 - r * r);
        let mut s = 0.0;
        for (a, b) in self.sq.iter().zip(&self.cross) {
            s += ((a - 2.0 * r * b) / denom).ln_1p();
        }
        self.sq.len() as f64 * student_t_constant(r, nu) - (nu + 2.0) / 2.0 * s + self.marginal_sum
    }

    /// Maximize over `r`; returns `(r, loglik, transformed r)`.
    fn maximize(&self, rho_start: f64) -> (f64, f64, f64) {
        let (lo, hi) = super::RHO;
        let x0 = to_unconstrained(&[(lo, hi)], &[rho_start]);
        let m = nelder_mead(
            |x: &[f64]| -self.loglik(to_params(&[(lo, hi)], x)[0]),
            &x0,
            &nm_options(),
        );
        (to_params(&[(lo, hi)], &m.x)[0], -m.value, m.x[0])
    }
}

fn fit_student_t(u: &[f64], v: &[f64], tau: f64) -> Result<(Vec<f64>, f64, bool)> {
    let rho0 = (PI * tau / 2.0).sin().clamp(-0.95, 0.95);
    let table = QuantileTable::new(u, v);
    let profile = |nu: f64| {
        let data = TProfileData::new(&table, nu);
        let (r, ll, xr) = data.maximize(rho0);
        (r, ll, xr)
    };

    let grid: Vec<(f64, f64, f64, f64)> = STUDENT_T_NU_GRID
        .iter()
        .map(|&nu| {
            let (r, ll, xr) = profile(nu);
            (nu, r, if ll.is_finite() { ll } else { f64::NEG_INFINITY }, xr)
        })
        .collect();
    let (best_idx, _) = grid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .2.total_cmp(&b.1 .2))
        .expect("non-empty grid");
    if !grid[best_idx].2.is_finite() {
        return Err(Error::fit("student_t: log-likelihood non-finite on the whole nu grid"));
    }

    let (nu_lo, nu_hi) = NU_BOUNDS;
    let lo = if best_idx == 0 {
        nu_lo + 0.05
    } else {
        STUDENT_T_NU_GRID[best_idx - 1]
    };
    let hi = if best_idx + 1 == STUDENT_T_NU_GRID.len() {
        nu_hi - 0.5
    } else {
        STUDENT_T_NU_GRID[best_idx + 1]
    };
    let (nu_ref, neg_ll) = golden_section(
        |nu| {
            let ll = profile(nu).1;
            if ll.is_finite() {
                -ll
            } else {
                f64::INFINITY
            }
        },
        lo,
        hi,
        1e-3,
    );

    let (mut nu, mut r, mut ll, mut xr) = (grid[best_idx].0, grid[best_idx].1, grid[best_idx].2, grid[best_idx].3);
    if -neg_ll > ll {
        let (r2, ll2, xr2) = profile(nu_ref);
        nu = nu_ref;
        r = r2;
        ll = ll2;
        xr = xr2;
    }
    let at_bound = xr.abs() > BOUND_FLAG || nu <= nu_lo + 0.06 || nu >= nu_hi - 0.6;
    Ok((vec![r, nu], ll, at_bound))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_fast_path_matches_generic() {
        let n = 300;
        let u: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
        let v: Vec<f64> = (0..n).map(|i| ((i * 37 + 11) % n + 1) as f64 / (n + 1) as f64).collect();
        let v: Vec<f64> = u.iter().zip(&v).map(|(a, b)| if a < &0.5 { (a + b) / 2.0 } else { *b }).collect();
        let tau = kendall_tau(&u, &v);
        let fast = fit_gaussian(&u, &v, tau).unwrap();
        let slow = fit_generic(Family::Gaussian, &u, &v, tau).unwrap();
        assert!((fast.0[0] - slow.0[0]).abs() < 1e-6, "{fast:?} {slow:?}");
        assert!((fast.1 - slow.1).abs() < 1e-8 * slow.1.abs().max(1.0));
    }

    #[test]
    fn rejects_bad_input() {
        let u = vec![0.5; 10];
        assert!(matches!(fit_mle(Family::Gaussian, &u, &u), Err(Error::Domain(_))));
        let mut u: Vec<f64> = (1..=60).map(|i| i as f64 / 61.0).collect();
        let v = u.clone();
        u[3] = 1.0;
        assert!(matches!(fit_mle(Family::Clayton, &u, &v), Err(Error::Domain(_))));
    }

    #[test]
    fn comonotone_ranks_are_flagged_not_nan() {
        let u: Vec<f64> = (1..=200).map(|i| i as f64 / 201.0).collect();
        for family in Family::ALL {
            match fit_mle(family, &u, &u) {
                Ok(fit) => {
                    assert!(fit.params.iter().all(|p| p.is_finite()), "{family}");
                    assert!(fit.loglik.is_finite(), "{family}");
                    assert!(fit.at_bound, "{family}: {:?}", fit.params);
                    fit.copula().expect("params inside bounds");
                }
                Err(e) => assert!(matches!(e, Error::Fit(_)), "{family}: {e}"),
            }
        }
    }
}
