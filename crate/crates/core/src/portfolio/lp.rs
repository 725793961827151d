//! Dense tableau simplex for `min cᵀx  s.t.  A x = b, x ≥ 0`.

use crate::error::{Error, Result};

const EPS: f64 = 1e-10;
/// Iterations without objective progress before switching to Bland's rule.
const STALL_LIMIT: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

struct Tableau {
    /// `m` constraint rows followed by the objective row; last column is the
    /// right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n: usize,
}

impl Tableau {
    fn m(&self) -> usize {
        self.basis.len()
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = line[col];
            if f != 0.0 {
                for (v, pv) in line.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Load objective `c` (length `n`) into the last row in reduced form.
    fn set_objective(&mut self, c: &[f64]) {
        let m = self.m();
        let width = self.t[0].len();
        let mut obj = vec![0.0; width];
        obj[..c.len()].copy_from_slice(c);
        for r in 0..m {
            let cb = obj[self.basis[r]];
            if cb != 0.0 {
                for (o, v) in obj.iter_mut().zip(&self.t[r]) {
                    *o -= cb * v;
                }
            }
        }
        self.t[m] = obj;
    }

    /// Primal simplex on columns `< limit`; returns the pivot count.
    fn optimize(&mut self, limit: usize, max_pivots: usize) -> Result<usize> {
        let m = self.m();
        let rhs = self.t[0].len() - 1;
        let mut pivots = 0;
        let mut stall = 0;
        let mut last_obj = f64::INFINITY;
        loop {
            let obj = &self.t[m];
            let bland = stall >= STALL_LIMIT;
            let entering = if bland {
                (0..limit).find(|&j| obj[j] < -EPS)
            } else {
                (0..limit)
                    .filter(|&j| obj[j] < -EPS)
                    .min_by(|&a, &b| obj[a].total_cmp(&obj[b]).then(a.cmp(&b)))
            };
            let Some(col) = entering else {
                return Ok(pivots);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                let a = self.t[r][col];
                if a > EPS {
                    let ratio = self.t[r][rhs] / a;
                    let better = match leave {
                        None => true,
                        Some((lr, best)) => {
                            ratio < best - EPS
                                || (ratio <= best + EPS && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((row, _)) = leave else {
                return Err(Error::Numeric("linear program is unbounded".into()));
            };
            self.pivot(row, col);
            pivots += 1;
            if pivots > max_pivots {
                return Err(Error::Numeric("simplex iteration limit reached".into()));
            }
            let value = -self.t[m][rhs];
            if value < last_obj - 1e-13 {
                last_obj = value;
                stall = 0;
            } else {
                stall += 1;
            }
        }
    }
}

/// Solve the LP. `crash` optionally names one basic column per row; if the
/// resulting basic solution is feasible, phase one is skipped.
pub fn minimize(c: &[f64], a: &[Vec<f64>], b: &[f64], crash: Option<&[usize]>) -> Result<LpSolution> {
    let m = a.len();
    let n = c.len();
    if b.len() != m || a.iter().any(|row| row.len() != n) {
        return Err(Error::domain("inconsistent linear program dimensions"));
    }
    let max_pivots = 50 * (m + n) + 1000;

    if let Some(basis) = crash {
        if let Some(sol) = try_crash(c, a, b, basis, max_pivots)? {
            return Ok(sol);
        }
    }

    // phase one with one artificial per row
    let width = n + m + 1;
    let mut t = Vec::with_capacity(m + 1);
    for (r, row) in a.iter().enumerate() {
        let mut line = vec![0.0; width];
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        for (j, v) in row.iter().enumerate() {
            line[j] = sign * v;
        }
        line[n + r] = 1.0;
        line[width - 1] = sign * b[r];
        t.push(line);
    }
    t.push(vec![0.0; width]);
    let mut tab = Tableau {
        t,
        basis: (n..n + m).collect(),
        n,
    };
    let mut phase1 = vec![0.0; n + m];
    for v in &mut phase1[n..] {
        *v = 1.0;
    }
    tab.set_objective(&phase1);
    let mut pivots = tab.optimize(n + m, max_pivots)?;
    let infeasibility = -tab.t[m][width - 1];
    if infeasibility > 1e-9 * (1.0 + b.iter().map(|v| v.abs()).sum::<f64>()) {
        return Err(Error::Numeric("linear program is infeasible".into()));
    }
    // drive remaining artificials out of the basis
    for r in 0..m {
        if tab.basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| tab.t[r][j].abs() > EPS) {
                tab.pivot(r, col);
                pivots += 1;
            }
        }
    }
    tab.set_objective(c);
    pivots += tab.optimize(n, max_pivots)?;
    Ok(extract(&tab, c, pivots))
}

fn try_crash(c: &[f64], a: &[Vec<f64>], b: &[f64], basis: &[usize], max_pivots: usize) -> Result<Option<LpSolution>> {
    let m = a.len();
    let n = c.len();
    if basis.len() != m || basis.iter().any(|&j| j >= n) {
        return Ok(None);
    }
    let mut t: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut line = row.clone();
            line.push(rhs);
            line
        })
        .collect();
    t.push(vec![0.0; n + 1]);
    let mut tab = Tableau {
        t,
        basis: vec![usize::MAX; m],
        n,
    };
    for (r, &col) in basis.iter().enumerate() {
        if tab.t[r][col].abs() <= EPS {
            return Ok(None);
        }
        tab.pivot(r, col);
    }
    if (0..m).any(|r| tab.t[r][n] < -1e-12) {
        return Ok(None);
    }
    for r in 0..m {
        if tab.t[r][n] < 0.0 {
            tab.t[r][n] = 0.0;
        }
    }
    tab.set_objective(c);
    let pivots = tab.optimize(n, max_pivots)?;
    Ok(Some(extract(&tab, c, pivots)))
}

fn extract(tab: &Tableau, c: &[f64], pivots: usize) -> LpSolution {
    let rhs = tab.t[0].len() - 1;
    let mut x = vec![0.0; tab.n];
    for (r, &j) in tab.basis.iter().enumerate() {
        if j < tab.n {
            x[j] = tab.t[r][rhs].max(0.0);
        }
    }
    let objective = x.iter().zip(c).map(|(a, b)| a * b).sum();
    LpSolution { x, objective, pivots }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36
        let c = [-3.0, -5.0, 0.0, 0.0, 0.0];
        let a = vec![
            vec![1.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0, 1.0, 0.0],
            vec![3.0, 2.0, 0.0, 0.0, 1.0],
        ];
        let b = [4.0, 12.0, 18.0];
        let s = minimize(&c, &a, &b, None).unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
        assert!((s.objective + 36.0).abs() < 1e-12);
        let crashed = minimize(&c, &a, &b, Some(&[2, 3, 4])).unwrap();
        assert_eq!(crashed.x, s.x);
    }

    #[test]
    fn infeasible_and_unbounded() {
        // x + y = -1 with x, y >= 0
        assert!(minimize(&[1.0, 1.0], &[vec![1.0, 1.0]], &[-1.0], None).is_err());
        // min -x with x - y = 0
        assert!(minimize(&[-1.0, 0.0], &[vec![1.0, -1.0]], &[0.0], None).is_err());
    }
}
