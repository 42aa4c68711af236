//! Box-shaped search spaces, unit-cube normalization and Latin hypercube
//! designs.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::OptError;

/// Role of a configurable parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamCategory {
    Control,
    Safety,
    Deployment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub log_scaled: bool,
    pub category: ParamCategory,
}

impl Dimension {
    pub fn new(name: &str, lower: f64, upper: f64, log_scaled: bool, category: ParamCategory) -> Self {
        Self { name: name.to_string(), lower, upper, log_scaled, category }
    }

    fn to_unit(&self, raw: f64) -> f64 {
        if self.log_scaled {
            (raw.ln() - self.lower.ln()) / (self.upper.ln() - self.lower.ln())
        } else {
            (raw - self.lower) / (self.upper - self.lower)
        }
    }

    fn from_unit(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.lower;
        }
        if t >= 1.0 {
            return self.upper;
        }
        let raw = if self.log_scaled {
            (self.lower.ln() + t * (self.upper.ln() - self.lower.ln())).exp()
        } else {
            self.lower + t * (self.upper - self.lower)
        };
        raw.clamp(self.lower, self.upper)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    dims: Vec<Dimension>,
}

impl SearchSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self, OptError> {
        if dims.is_empty() {
            return Err(OptError::InvalidArgument("search space has no dimensions".into()));
        }
        for d in &dims {
            if !(d.lower < d.upper) || !d.lower.is_finite() || !d.upper.is_finite() {
                return Err(OptError::InvalidArgument(format!("dimension {} has an empty range", d.name)));
            }
            if d.log_scaled && d.lower <= 0.0 {
                return Err(OptError::InvalidArgument(format!("log-scaled dimension {} needs lower > 0", d.name)));
            }
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    fn check_len(&self, z: &[f64]) -> Result<(), OptError> {
        if z.len() != self.dim() {
            return Err(OptError::InvalidArgument(format!("point has {} entries, expected {}", z.len(), self.dim())));
        }
        Ok(())
    }

    pub fn normalize(&self, raw: &[f64]) -> Result<Vec<f64>, OptError> {
        self.check_len(raw)?;
        Ok(self.dims.iter().zip(raw).map(|(d, &x)| d.to_unit(x)).collect())
    }

    /// Maps unit-cube coordinates to raw values, clamping into the box.
    pub fn denormalize(&self, unit: &[f64]) -> Result<Vec<f64>, OptError> {
        self.check_len(unit)?;
        Ok(self.dims.iter().zip(unit).map(|(d, &t)| d.from_unit(t)).collect())
    }

    pub fn project(&self, raw: &[f64]) -> Result<Vec<f64>, OptError> {
        self.check_len(raw)?;
        Ok(self.dims.iter().zip(raw).map(|(d, &x)| x.clamp(d.lower, d.upper)).collect())
    }

    /// Membership with a relative tolerance on each bound.
    pub fn contains(&self, raw: &[f64], rel_tol: f64) -> bool {
        raw.len() == self.dim()
            && self.dims.iter().zip(raw).all(|(d, &x)| {
                let slack = rel_tol * (d.upper - d.lower).abs().max(d.upper.abs());
                x.is_finite() && x >= d.lower - slack && x <= d.upper + slack
            })
    }
}

/// Latin hypercube design in the unit cube: each coordinate has exactly one
/// sample per stratum `[k/n, (k+1)/n)`.
pub fn lhs_unit<R: Rng + ?Sized>(dim: usize, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; dim]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..dim {
        strata.shuffle(rng);
        for (i, &s) in strata.iter().enumerate() {
            points[i][j] = (s as f64 + rng.gen::<f64>()) / n as f64;
        }
    }
    points
}

/// Latin hypercube design mapped to raw coordinates. Log-scaled dimensions
/// are stratified in log space.
pub fn lhs_init<R: Rng + ?Sized>(space: &SearchSpace, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>, OptError> {
    if n == 0 {
        return Err(OptError::InvalidArgument("LHS needs n >= 1".into()));
    }
    lhs_unit(space.dim(), n, rng).iter().map(|u| space.denormalize(u)).collect()
}
