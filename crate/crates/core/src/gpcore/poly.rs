//! Monomials, posynomials and signomials over a fixed set of positive variables.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `c * prod_j x_j^{b_j}`. A proper monomial has `c > 0`; signomial terms may carry any sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub exponents: Vec<f64>,
}

fn check_point(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::Dimension(format!("point has {} coordinates, expected {n}", x.len())));
    }
    if let Some(bad) = x.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Domain(format!("variables must be positive, got {bad}")));
    }
    Ok(())
}

impl Monomial {
    pub fn new(coeff: f64, exponents: Vec<f64>) -> Self {
        Self { coeff, exponents }
    }

    pub fn constant(coeff: f64, num_vars: usize) -> Self {
        Self::new(coeff, vec![0.0; num_vars])
    }

    /// `x_j`.
    pub fn variable(j: usize, num_vars: usize) -> Self {
        let mut e = vec![0.0; num_vars];
        e[j] = 1.0;
        Self::new(1.0, e)
    }

    pub fn num_vars(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_proper(&self) -> bool {
        self.coeff > 0.0 && self.coeff.is_finite() && self.exponents.iter().all(|b| b.is_finite())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_point(x, self.num_vars())?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let log: f64 = self
            .exponents
            .iter()
            .zip(x)
            .filter(|(b, _)| **b != 0.0)
            .map(|(b, v)| b * v.ln())
            .sum();
        self.coeff * log.exp()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.num_vars(), other.num_vars());
        Monomial::new(
            self.coeff * other.coeff,
            self.exponents.iter().zip(&other.exponents).map(|(a, b)| a + b).collect(),
        )
    }

    pub fn div(&self, other: &Monomial) -> Monomial {
        self.mul(&other.recip())
    }

    pub fn recip(&self) -> Monomial {
        Monomial::new(1.0 / self.coeff, self.exponents.iter().map(|b| -b).collect())
    }

    pub fn scale(&self, c: f64) -> Monomial {
        Monomial::new(self.coeff * c, self.exponents.clone())
    }
}

/// A sum of proper monomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posynomial {
    terms: Vec<Monomial>,
}

impl Posynomial {
    pub fn new(terms: Vec<Monomial>) -> Result<Self> {
        let Some(first) = terms.first() else {
            return Err(Error::Domain("posynomial needs at least one term".into()));
        };
        let n = first.num_vars();
        for t in &terms {
            if t.num_vars() != n {
                return Err(Error::Dimension("posynomial terms disagree on variable count".into()));
            }
            if !t.is_proper() {
                return Err(Error::Domain(format!(
                    "posynomial term has non-positive or non-finite coefficient {}",
                    t.coeff
                )));
            }
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn num_vars(&self) -> usize {
        self.terms[0].num_vars()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_point(x, self.num_vars())?;
        Ok(self.terms.iter().map(|t| t.eval_unchecked(x)).sum())
    }

    pub fn is_monomial(&self) -> bool {
        self.terms.len() == 1
    }

    pub fn div_monomial(&self, m: &Monomial) -> Posynomial {
        let inv = m.recip();
        Posynomial {
            terms: self.terms.iter().map(|t| t.mul(&inv)).collect(),
        }
    }
}

impl From<Monomial> for Posynomial {
    fn from(m: Monomial) -> Self {
        assert!(m.is_proper(), "monomial coefficient must be positive");
        Posynomial { terms: vec![m] }
    }
}

/// A sum of monomial terms with arbitrary coefficient signs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signomial {
    pub terms: Vec<Monomial>,
}

impl Signomial {
    pub fn new(terms: Vec<Monomial>) -> Self {
        Self { terms }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if let Some(t) = self.terms.first() {
            check_point(x, t.num_vars())?;
        }
        Ok(self.terms.iter().map(|t| t.eval_unchecked(x)).sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Monomial,
    Posynomial,
    Signomial,
}

/// Zero-coefficient terms are ignored. One positive term is a monomial; any
/// negative term makes the expression a signomial.
pub fn classify(expr: &Signomial) -> Classification {
    let live: Vec<&Monomial> = expr.terms.iter().filter(|t| t.coeff != 0.0).collect();
    if live.iter().any(|t| t.coeff < 0.0) {
        Classification::Signomial
    } else if live.len() == 1 {
        Classification::Monomial
    } else {
        Classification::Posynomial
    }
}

/// Weighted AM-GM lower bound of `f` tangent at `x0`:
/// `f~(x) = prod_i (u_i(x) / w_i)^{w_i}` with `w_i = u_i(x0) / f(x0)`.
///
/// Terms that evaluate to exactly zero at `x0` get weight zero and drop out.
pub fn amgm_condense(f: &Posynomial, x0: &[f64]) -> Result<Monomial> {
    check_point(x0, f.num_vars())?;
    let values: Vec<f64> = f.terms.iter().map(|t| t.eval_unchecked(x0)).collect();
    let total: f64 = values.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Domain(format!("posynomial evaluates to {total} at expansion point")));
    }
    let n = f.num_vars();
    let mut log_coeff = 0.0;
    let mut exponents = vec![0.0; n];
    for (t, &v) in f.terms.iter().zip(&values) {
        if v == 0.0 {
            continue;
        }
        let w = v / total;
        log_coeff += w * (t.coeff.ln() - w.ln());
        for (e, b) in exponents.iter_mut().zip(&t.exponents) {
            *e += w * b;
        }
    }
    Ok(Monomial::new(log_coeff.exp(), exponents))
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.coeff)?;
        for (j, b) in self.exponents.iter().enumerate() {
            if *b != 0.0 {
                write!(f, " x{j}^{b}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for Posynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}
