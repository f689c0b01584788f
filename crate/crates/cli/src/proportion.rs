//! Mainlobe proportion given as an exact rational `n/d` or a decimal.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Proportion {
    Ratio { num: u64, den: u64 },
    Decimal(f64),
}

impl Proportion {
    pub fn value(&self) -> f64 {
        match *self {
            Proportion::Ratio { num, den } => num as f64 / den as f64,
            Proportion::Decimal(x) => x,
        }
    }

    /// Design problems need `p` strictly inside `(0, 1)`.
    pub fn check_design(&self) -> Result<f64, String> {
        let p = self.value();
        if p > 0.0 && p < 1.0 {
            Ok(p)
        } else {
            Err(format!("p = {self} must lie in (0, 1) for design"))
        }
    }
}

impl FromStr for Proportion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let num: u64 = n.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
            let den: u64 = d.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
            if den == 0 {
                return Err(format!("zero denominator in {s:?}"));
            }
            return Ok(Proportion::Ratio { num, den });
        }
        let x: f64 = s.parse().map_err(|_| format!("{s:?} is neither n/d nor a decimal"))?;
        if !x.is_finite() {
            return Err(format!("{s:?} is not finite"));
        }
        Ok(Proportion::Decimal(x))
    }
}

impl fmt::Display for Proportion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Proportion::Ratio { num, den } => write!(f, "{num}/{den}"),
            Proportion::Decimal(x) => write!(f, "{x}"),
        }
    }
}
