//! Bivariate copulas: evaluation, tail-dependence coefficients and MLE.
//!
//! The eight families used by the ensemble are exposed through [`Family`].
//! Internally each is a base family ([`Base`]) optionally rotated by 180°
//! (the survival copula `Ĉ(u, v) = u + v - 1 + C(1 - u, 1 - v)`), which
//! swaps lower- and upper-tail behaviour.

mod families;
mod fit;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::t_cdf;

pub use fit::{fit_mle, fit_pair, MIN_FIT_SAMPLE, STUDENT_T_NU_GRID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    StudentT,
    Clayton,
    SurvivalGumbel,
    Frank,
    SurvivalJoe,
    SurvivalGalambos,
    Bb1,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Gaussian,
        Family::StudentT,
        Family::Clayton,
        Family::SurvivalGumbel,
        Family::Frank,
        Family::SurvivalJoe,
        Family::SurvivalGalambos,
        Family::Bb1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::StudentT => "student_t",
            Family::Clayton => "clayton",
            Family::SurvivalGumbel => "survival_gumbel",
            Family::Frank => "frank",
            Family::SurvivalJoe => "survival_joe",
            Family::SurvivalGalambos => "survival_galambos",
            Family::Bb1 => "bb1",
        }
    }

    pub fn parameter_count(self) -> usize {
        self.bounds().len()
    }

    /// Open interval for each parameter.
    pub fn bounds(self) -> &'static [(f64, f64)] {
        self.base().bounds()
    }

    pub(crate) fn base(self) -> Base {
        match self {
            Family::Gaussian => Base::Gaussian,
            Family::StudentT => Base::StudentT,
            Family::Clayton => Base::Clayton,
            Family::SurvivalGumbel => Base::Gumbel,
            Family::Frank => Base::Frank,
            Family::SurvivalJoe => Base::Joe,
            Family::SurvivalGalambos => Base::Galambos,
            Family::Bb1 => Base::Bb1,
        }
    }

    pub(crate) fn is_survival(self) -> bool {
        matches!(
            self,
            Family::SurvivalGumbel | Family::SurvivalJoe | Family::SurvivalGalambos
        )
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown copula family `{s}`")))
    }
}

/// Unrotated parametric families, plus the independence and comonotonicity
/// copulas used as reference points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Base {
    Independence,
    Comonotonic,
    Gaussian,
    StudentT,
    Clayton,
    Gumbel,
    Frank,
    Joe,
    Galambos,
    Bb1,
}

const RHO: (f64, f64) = (-0.999, 0.999);
pub const NU_BOUNDS: (f64, f64) = (2.0, 60.0);

impl Base {
    pub fn bounds(self) -> &'static [(f64, f64)] {
        match self {
            Base::Independence | Base::Comonotonic => &[],
            Base::Gaussian => &[RHO],
            Base::StudentT => &[RHO, NU_BOUNDS],
            Base::Clayton => &[(1e-4, 30.0)],
            Base::Gumbel | Base::Joe => &[(1.0 + 1e-6, 30.0)],
            Base::Frank => &[(-35.0, 35.0)],
            Base::Galambos => &[(1e-4, 30.0)],
            Base::Bb1 => &[(1e-4, 7.0), (1.0 + 1e-6, 7.0)],
        }
    }
}

/// A fully specified bivariate copula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Copula {
    base: Base,
    survival: bool,
    params: [f64; 2],
}

impl Copula {
    pub fn new(family: Family, params: &[f64]) -> Result<Self> {
        Copula::from_base(family.base(), family.is_survival(), params)
    }

    pub fn from_base(base: Base, survival: bool, params: &[f64]) -> Result<Self> {
        let bounds = base.bounds();
        if params.len() != bounds.len() {
            return Err(Error::domain(format!(
                "{base:?} takes {} parameter(s), got {}",
                bounds.len(),
                params.len()
            )));
        }
        for (p, (lo, hi)) in params.iter().zip(bounds) {
            if !(p > lo && p < hi) {
                return Err(Error::domain(format!(
                    "{base:?} parameter {p} outside ({lo}, {hi})"
                )));
            }
        }
        if base == Base::Frank && params[0] == 0.0 {
            return Err(Error::domain("Frank parameter must be nonzero"));
        }
        Ok(Copula::from_parts(base, survival, params))
    }

    /// No bounds check; the optimizer evaluates through here.
    pub(crate) fn from_parts(base: Base, survival: bool, params: &[f64]) -> Self {
        let mut p = [0.0; 2];
        p[..params.len()].copy_from_slice(params);
        Copula {
            base,
            survival,
            params: p,
        }
    }

    pub fn independence() -> Self {
        Copula::from_parts(Base::Independence, false, &[])
    }

    pub fn comonotonic() -> Self {
        Copula::from_parts(Base::Comonotonic, false, &[])
    }

    /// The 180°-rotated (survival) copula.
    pub fn survival(self) -> Self {
        Copula {
            survival: !self.survival,
            ..self
        }
    }

    pub fn base(&self) -> Base {
        self.base
    }

    pub fn is_survival(&self) -> bool {
        self.survival
    }

    pub fn params(&self) -> &[f64] {
        &self.params[..self.base.bounds().len()]
    }

    /// `C(u, v)`; arguments are clamped to the unit square.
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (u.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
        if u == 0.0 || v == 0.0 {
            return 0.0;
        }
        if u == 1.0 {
            return v;
        }
        if v == 1.0 {
            return u;
        }
        let p = self.params();
        let c = if self.survival {
            u + v - 1.0 + families::cdf(self.base, p, 1.0 - u, 1.0 - v)
        } else {
            families::cdf(self.base, p, u, v)
        };
        // the exact value always lies within the Fréchet–Hoeffding bounds
        c.clamp((u + v - 1.0).max(0.0), u.min(v))
    }

    /// `ln c(u, v)` for `(u, v)` strictly inside the unit square.
    pub fn log_density(&self, u: f64, v: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
            return Err(Error::domain(format!("({u}, {v}) not inside the unit square")));
        }
        let value = self.log_density_unchecked(u, v);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Evaluation(format!(
                "non-finite log-density at ({u}, {v}) for {self:?}"
            )))
        }
    }

    #[inline]
    pub(crate) fn log_density_unchecked(&self, u: f64, v: f64) -> f64 {
        let p = self.params();
        if self.survival {
            families::log_density(self.base, p, 1.0 - u, 1.0 - v)
        } else {
            families::log_density(self.base, p, u, v)
        }
    }

    /// Conditional distribution `P(V ≤ v | U = u) = ∂C(u, v)/∂u`.
    pub fn conditional_cdf(&self, u: f64, v: f64) -> f64 {
        let p = self.params();
        if self.survival {
            1.0 - families::h_func(self.base, p, 1.0 - u, 1.0 - v)
        } else {
            families::h_func(self.base, p, u, v)
        }
    }

    /// `C(q, q) / q` for `q ∈ (0, 1/2]`.
    pub fn finite_lower_tdc(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q <= 0.5) {
            return Err(Error::domain(format!("lower-tail level {q} outside (0, 0.5]")));
        }
        Ok((self.cdf(q, q) / q).clamp(0.0, 1.0))
    }

    /// `(1 - 2q + C(q, q)) / (1 - q)` for `q ∈ (1/2, 1)`.
    pub fn finite_upper_tdc(&self, q: f64) -> Result<f64> {
        if !(q > 0.5 && q < 1.0) {
            return Err(Error::domain(format!("upper-tail level {q} outside (0.5, 1)")));
        }
        let joint_survival = if self.survival {
            // 1 - 2q + Ĉ(q, q) is exactly the base copula at (1 - q, 1 - q)
            Copula {
                survival: false,
                ..*self
            }
            .cdf(1.0 - q, 1.0 - q)
        } else {
            1.0 - 2.0 * q + self.cdf(q, q)
        };
        Ok((joint_survival / (1.0 - q)).clamp(0.0, 1.0))
    }

    /// Limit of the finite lower TDC as `q → 0⁺`.
    pub fn asymptotic_lower_tdc(&self) -> f64 {
        let p = self.params();
        let two = 2f64;
        let unrotated_lower = |base: Base| match base {
            Base::Independence | Base::Gaussian | Base::Frank | Base::Gumbel | Base::Joe | Base::Galambos => 0.0,
            Base::Comonotonic => 1.0,
            Base::StudentT => student_t_tdc(p[0], p[1]),
            Base::Clayton => two.powf(-1.0 / p[0]),
            Base::Bb1 => two.powf(-1.0 / (p[0] * p[1])),
        };
        let unrotated_upper = |base: Base| match base {
            Base::Independence | Base::Gaussian | Base::Frank | Base::Clayton => 0.0,
            Base::Comonotonic => 1.0,
            Base::StudentT => student_t_tdc(p[0], p[1]),
            Base::Gumbel | Base::Joe => 2.0 - two.powf(1.0 / p[0]),
            Base::Galambos => two.powf(-1.0 / p[0]),
            Base::Bb1 => 2.0 - two.powf(1.0 / p[1]),
        };
        if self.survival {
            unrotated_upper(self.base)
        } else {
            unrotated_lower(self.base)
        }
    }
}

fn student_t_tdc(rho: f64, nu: f64) -> f64 {
    2.0 * t_cdf(-((nu + 1.0) * (1.0 - rho) / (1.0 + rho)).sqrt(), nu + 1.0)
}

pub fn cdf(family: Family, params: &[f64], u: f64, v: f64) -> Result<f64> {
    Ok(Copula::new(family, params)?.cdf(u, v))
}

pub fn log_density(family: Family, params: &[f64], u: f64, v: f64) -> Result<f64> {
    Copula::new(family, params)?.log_density(u, v)
}

pub fn finite_lower_tdc(family: Family, params: &[f64], q: f64) -> Result<f64> {
    Copula::new(family, params)?.finite_lower_tdc(q)
}

pub fn finite_upper_tdc(family: Family, params: &[f64], q: f64) -> Result<f64> {
    Copula::new(family, params)?.finite_upper_tdc(q)
}

pub fn asymptotic_lower_tdc(family: Family, params: &[f64]) -> Result<f64> {
    Ok(Copula::new(family, params)?.asymptotic_lower_tdc())
}

/// Maximum-likelihood fit of one family to one asset pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaFit {
    pub pair: (usize, usize),
    pub family: Family,
    pub params: Vec<f64>,
    pub loglik: f64,
    /// Set when the optimum sits against a parameter bound (for example
    /// perfectly comonotone ranks), in which case `params` are the clamped
    /// boundary values.
    #[serde(default)]
    pub at_bound: bool,
}

impl CopulaFit {
    pub fn copula(&self) -> Result<Copula> {
        Copula::new(self.family, &self.params)
    }
}
