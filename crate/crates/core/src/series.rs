//! Truncated formal power series with integer coefficients.

use std::fmt;

use crate::error::{Error, Result};

/// Σ cₖ tᵏ for k ≤ truncation; every operation truncates and checks overflow.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FormalSeries {
    coefficients: Vec<i64>,
}

impl FormalSeries {
    /// Coefficients are padded or cut to `truncation + 1` entries.
    pub fn new(mut coefficients: Vec<i64>, truncation: usize) -> Self {
        coefficients.resize(truncation + 1, 0);
        FormalSeries { coefficients }
    }

    pub fn zero(truncation: usize) -> Self {
        FormalSeries::new(Vec::new(), truncation)
    }

    pub fn one(truncation: usize) -> Self {
        FormalSeries::monomial(1, 0, truncation)
    }

    /// c·tᵏ (zero if k exceeds the truncation).
    pub fn monomial(c: i64, k: usize, truncation: usize) -> Self {
        let mut s = FormalSeries::zero(truncation);
        if k <= truncation {
            s.coefficients[k] = c;
        }
        s
    }

    /// 1/(1 − tᵏ) = Σ t^{kj}, k ≥ 1.
    pub fn geometric(k: usize, truncation: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("1/(1 - t^0) is not a power series".into()));
        }
        let mut s = FormalSeries::zero(truncation);
        for i in (0..=truncation).step_by(k) {
            s.coefficients[i] = 1;
        }
        Ok(s)
    }

    pub fn truncation(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[i64] {
        &self.coefficients
    }

    pub fn coefficient(&self, k: usize) -> i64 {
        self.coefficients.get(k).copied().unwrap_or(0)
    }

    fn check(&self, other: &FormalSeries) -> Result<()> {
        if self.truncation() != other.truncation() {
            return Err(Error::TruncationMismatch(self.truncation(), other.truncation()));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &FormalSeries) -> Result<FormalSeries> {
        self.check(other)?;
        let mut out = self.clone();
        for (k, (c, d)) in out.coefficients.iter_mut().zip(&other.coefficients).enumerate() {
            *c = c.checked_add(*d).ok_or(Error::TruncationOverflow(k))?;
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &FormalSeries) -> Result<FormalSeries> {
        self.try_add(&other.try_scale(-1)?)
    }

    pub fn try_scale(&self, c: i64) -> Result<FormalSeries> {
        let mut out = self.clone();
        for (k, x) in out.coefficients.iter_mut().enumerate() {
            *x = x.checked_mul(c).ok_or(Error::TruncationOverflow(k))?;
        }
        Ok(out)
    }

    /// Cauchy product, truncated.
    pub fn try_mul(&self, other: &FormalSeries) -> Result<FormalSeries> {
        self.check(other)?;
        let n = self.truncation();
        let mut out = FormalSeries::zero(n);
        for i in 0..=n {
            if self.coefficients[i] == 0 {
                continue;
            }
            for j in 0..=(n - i) {
                let p = self.coefficients[i].checked_mul(other.coefficients[j]).ok_or(Error::TruncationOverflow(i + j))?;
                out.coefficients[i + j] = out.coefficients[i + j].checked_add(p).ok_or(Error::TruncationOverflow(i + j))?;
            }
        }
        Ok(out)
    }

    /// Multiply by tᵏ, dropping what falls past the truncation.
    pub fn shift(&self, k: usize) -> FormalSeries {
        let n = self.truncation();
        let mut out = FormalSeries::zero(n);
        for i in 0..=n {
            if i + k <= n {
                out.coefficients[i + k] = self.coefficients[i];
            }
        }
        out
    }

    /// True iff every coefficient is ≥ the corresponding one of `other`.
    pub fn dominates(&self, other: &FormalSeries) -> Result<bool> {
        self.check(other)?;
        Ok(self.coefficients.iter().zip(&other.coefficients).all(|(a, b)| a >= b))
    }
}

impl fmt::Display for FormalSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0)
            .map(|(k, c)| match k {
                0 => c.to_string(),
                1 => format!("{c}t"),
                _ => format!("{c}t^{k}"),
            })
            .collect();
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{} + O(t^{})", terms.join(" + "), self.truncation() + 1)
        }
    }
}
