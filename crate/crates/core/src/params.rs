use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model parameters: spatial dimension `n`, screening length `a` and the
/// gravitational constant `g` multiplying the transport velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: usize,
    pub a: f64,
    pub g: f64,
}

impl Params {
    pub fn new(n: usize, a: f64, g: f64) -> Result<Self> {
        let p = Params { n, a, g };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!(
                "dimension n must be >= 2, got {}",
                self.n
            )));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "screening length a must be positive and finite, got {}",
                self.a
            )));
        }
        if !(self.g > 0.0 && self.g.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gravity g must be positive and finite, got {}",
                self.g
            )));
        }
        Ok(())
    }

    pub fn with_a(self, a: f64) -> Self {
        Params { a, ..self }
    }

    pub fn with_g(self, g: f64) -> Self {
        Params { g, ..self }
    }
}
