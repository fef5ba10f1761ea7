use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Per-component affine map of `[lower, upper]` onto `[0, 1]`.
///
/// Inputs outside the fitted limits extrapolate linearly. A degenerate
/// component (`upper == lower`) maps everything to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl MinMaxScaler {
    /// Componentwise min/max of `data`; components with `Some(pin)` in
    /// `pinned_lower` take the pin as their lower limit.
    pub fn fit<'a, I>(data: I, pinned_lower: Option<&[Option<f64>]>) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut it = data.into_iter();
        let first = it.next().ok_or(Error::Empty("scaler fit data"))?;
        let dim = first.len();
        let mut lower = first.to_vec();
        let mut upper = first.to_vec();
        for row in it {
            check_len(dim, row.len())?;
            for j in 0..dim {
                lower[j] = lower[j].min(row[j]);
                upper[j] = upper[j].max(row[j]);
            }
        }
        if let Some(pins) = pinned_lower {
            check_len(dim, pins.len())?;
            for (j, pin) in pins.iter().enumerate() {
                if let Some(p) = pin {
                    lower[j] = *p;
                    upper[j] = upper[j].max(*p);
                }
            }
        }
        Ok(MinMaxScaler { lower, upper })
    }

    pub fn from_limits(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_len(lower.len(), upper.len())?;
        if lower.iter().zip(&upper).any(|(l, u)| !(u >= l)) {
            return Err(Error::InvalidArgument("scaler upper limit below lower".into()));
        }
        Ok(MinMaxScaler { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    #[inline]
    pub fn apply_component(&self, j: usize, x: f64) -> f64 {
        let span = self.upper[j] - self.lower[j];
        if span > 0.0 {
            (x - self.lower[j]) / span
        } else {
            0.0
        }
    }

    #[inline]
    pub fn invert_component(&self, j: usize, y: f64) -> f64 {
        self.lower[j] + y * (self.upper[j] - self.lower[j])
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        Ok(x.iter().enumerate().map(|(j, &v)| self.apply_component(j, v)).collect())
    }

    pub fn invert(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), y.len())?;
        Ok(y.iter().enumerate().map(|(j, &v)| self.invert_component(j, v)).collect())
    }
}
