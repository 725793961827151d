//! Tail-dependence dissimilarities `δ = sqrt(2 (1 - λ))`.

use serde::{Deserialize, Serialize};

use crate::copula::{CopulaFit, Family};
use crate::error::{Error, Result};
use crate::io;

pub const MAX_DISSIMILARITY: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    CopulaTdc,
    Consensus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    #[default]
    Lower,
    Upper,
}

/// Sidecar metadata written next to each matrix CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixMeta {
    pub family: Option<Family>,
    /// `None` for asymptotic coefficients and consensus matrices.
    pub q: Option<f64>,
    pub provenance: Provenance,
    #[serde(default)]
    pub tail: Tail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    pub tickers: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub meta: MatrixMeta,
}

pub fn tdc_to_dissimilarity(lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::domain(format!("tail dependence {lambda} outside [0, 1]")));
    }
    Ok((2.0 * (1.0 - lambda)).sqrt())
}

impl DissimilarityMatrix {
    /// Validates shape, exact symmetry, zero diagonal and the value range
    /// (`[0, √2]` for copula matrices, `[0, 1]` for consensus ones).
    pub fn new(tickers: Vec<String>, values: Vec<Vec<f64>>, meta: MatrixMeta) -> Result<Self> {
        let d = tickers.len();
        if values.len() != d || values.iter().any(|r| r.len() != d) {
            return Err(Error::domain(format!("matrix is not {d}×{d}")));
        }
        let hi = match meta.provenance {
            Provenance::CopulaTdc => MAX_DISSIMILARITY,
            Provenance::Consensus => 1.0,
        };
        for i in 0..d {
            if values[i][i] != 0.0 {
                return Err(Error::domain(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let v = values[i][j];
                if v != values[j][i] {
                    return Err(Error::domain(format!("asymmetric entry ({i}, {j})")));
                }
                if !(0.0..=hi).contains(&v) {
                    return Err(Error::domain(format!("entry ({i}, {j}) = {v} outside [0, {hi}]")));
                }
            }
        }
        Ok(DissimilarityMatrix { tickers, values, meta })
    }

    pub fn dim(&self) -> usize {
        self.tickers.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn to_csv(&self) -> String {
        io::matrix_to_csv(&self.tickers, &self.values)
    }

    pub fn from_csv(bytes: &[u8], meta: MatrixMeta) -> Result<Self> {
        let (tickers, values) = io::parse_matrix_csv(bytes)?;
        DissimilarityMatrix::new(tickers, values, meta)
    }

    /// Writes `<stem>.csv` and `<stem>.json`.
    pub fn write(&self, dir: &std::path::Path, stem: &str) -> Result<()> {
        io::write_file(&dir.join(format!("{stem}.csv")), self.to_csv())?;
        io::write_json(&dir.join(format!("{stem}.json")), &self.meta)
    }

    pub fn read(dir: &std::path::Path, stem: &str) -> Result<Self> {
        let meta: MatrixMeta = io::read_json(&dir.join(format!("{stem}.json")))?;
        let bytes = io::read_file(&dir.join(format!("{stem}.csv")))?;
        DissimilarityMatrix::from_csv(&bytes, meta)
    }
}

/// Fill a symmetric matrix from one value per unordered pair.
fn assemble<F>(d: usize, fits: &[CopulaFit], family: Family, mut lambda: F) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&CopulaFit) -> Result<f64>,
{
    let mut values = vec![vec![f64::NAN; d]; d];
    for (i, row) in values.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for fit in fits {
        let (i, j) = fit.pair;
        if fit.family != family {
            return Err(Error::domain(format!("fit for {} in a {family} matrix", fit.family)));
        }
        if i >= d || j >= d || i == j {
            return Err(Error::domain(format!("invalid pair ({i}, {j}) for d = {d}")));
        }
        let delta = tdc_to_dissimilarity(lambda(fit)?)?;
        values[i][j] = delta;
        values[j][i] = delta;
    }
    for i in 0..d {
        for j in 0..i {
            if values[i][j].is_nan() {
                return Err(Error::Incomplete(format!("no {family} fit for pair ({j}, {i})")));
            }
        }
    }
    Ok(values)
}

/// `Δ(C, q)` from finite tail-dependence coefficients. In upper-tail mode the
/// coefficient is `λ_U(1 - q)`.
pub fn build_matrix(tickers: &[String], fits: &[CopulaFit], family: Family, q: f64, tail: Tail) -> Result<DissimilarityMatrix> {
    let values = assemble(tickers.len(), fits, family, |fit| {
        let c = fit.copula()?;
        match tail {
            Tail::Lower => c.finite_lower_tdc(q),
            Tail::Upper => c.finite_upper_tdc(1.0 - q),
        }
    })?;
    DissimilarityMatrix::new(
        tickers.to_vec(),
        values,
        MatrixMeta {
            family: Some(family),
            q: Some(q),
            provenance: Provenance::CopulaTdc,
            tail,
        },
    )
}

/// Dissimilarities from the asymptotic lower tail-dependence coefficients.
pub fn build_asymptotic_matrix(tickers: &[String], fits: &[CopulaFit], family: Family) -> Result<DissimilarityMatrix> {
    let values = assemble(tickers.len(), fits, family, |fit| Ok(fit.copula()?.asymptotic_lower_tdc()))?;
    DissimilarityMatrix::new(
        tickers.to_vec(),
        values,
        MatrixMeta {
            family: Some(family),
            q: None,
            provenance: Provenance::CopulaTdc,
            tail: Tail::Lower,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("T{i}")).collect()
    }

    fn clayton_fit(pair: (usize, usize), theta: f64) -> CopulaFit {
        CopulaFit {
            pair,
            family: Family::Clayton,
            params: vec![theta],
            loglik: 0.0,
            at_bound: false,
        }
    }

    #[test]
    fn formula_examples() {
        assert_eq!(tdc_to_dissimilarity(1.0).unwrap(), 0.0);
        assert_eq!(tdc_to_dissimilarity(0.0).unwrap(), MAX_DISSIMILARITY);
        assert_eq!(tdc_to_dissimilarity(0.5).unwrap(), 1.0);
        assert!(tdc_to_dissimilarity(1.1).is_err());
        assert!(tdc_to_dissimilarity(-0.1).is_err());
        assert!(tdc_to_dissimilarity(f64::NAN).is_err());
    }

    #[test]
    fn missing_pair_is_incomplete() {
        let fits = vec![clayton_fit((0, 1), 2.0), clayton_fit((0, 2), 2.0)];
        let err = build_matrix(&names(3), &fits, Family::Clayton, 0.1, Tail::Lower).unwrap_err();
        assert!(matches!(err, Error::Incomplete(_)));
    }

    #[test]
    fn clayton_theta_monotone() {
        let mut last = f64::INFINITY;
        for theta in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let m = build_matrix(&names(2), &[clayton_fit((0, 1), theta)], Family::Clayton, 0.05, Tail::Lower).unwrap();
            let v = m.get(0, 1);
            assert!(v < last);
            assert_eq!(m.get(1, 0), v);
            last = v;
        }
    }

    #[test]
    fn validation() {
        let meta = MatrixMeta {
            family: None,
            q: None,
            provenance: Provenance::Consensus,
            tail: Tail::Lower,
        };
        assert!(DissimilarityMatrix::new(names(2), vec![vec![0.0, 1.2], vec![1.2, 0.0]], meta.clone()).is_err());
        assert!(DissimilarityMatrix::new(names(2), vec![vec![0.0, 0.2], vec![0.3, 0.0]], meta.clone()).is_err());
        assert!(DissimilarityMatrix::new(names(2), vec![vec![0.1, 0.2], vec![0.2, 0.0]], meta.clone()).is_err());
        let ok = DissimilarityMatrix::new(names(2), vec![vec![0.0, 0.2], vec![0.2, 0.0]], meta.clone()).unwrap();
        let back = DissimilarityMatrix::from_csv(ok.to_csv().as_bytes(), meta).unwrap();
        assert_eq!(ok, back);
    }
}
