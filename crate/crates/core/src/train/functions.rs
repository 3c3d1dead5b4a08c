use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Built-in target functions over `[0,1]²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    F1,
    F2,
    F3,
    F4,
    F5,
    G1,
    G2,
}

impl Target {
    pub const ALL: [Target; 7] = [
        Target::F1,
        Target::F2,
        Target::F3,
        Target::F4,
        Target::F5,
        Target::G1,
        Target::G2,
    ];

    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            Target::F1 => (PI * (1.0 - x) * (1.0 - y)).sin(),
            Target::F2 => (PI / 2.0 * (2.0 - x - y)).sin(),
            Target::F3 => 0.5 * (-5.0 * (x - 0.5).powi(2) - 5.0 * (y - 0.5).powi(2)).exp(),
            Target::F4 => 1.0 / (1.0 + (-32.0 * (y - 0.5)).exp()),
            Target::F5 => 0.5 * x * y * (x + y),
            Target::G1 => 0.5 + 0.5 * (2.0 * PI * x).sin(),
            Target::G2 => ((PI * (x + y)).sin() - 1.0).exp(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Target::F1 => "f1",
            Target::F2 => "f2",
            Target::F3 => "f3",
            Target::F4 => "f4",
            Target::F5 => "f5",
            Target::G1 => "g1",
            Target::G2 => "g2",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Target::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::invalid("function", format!("unknown target `{s}` (expected f1..f5, g1, g2)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointwise_values() {
        assert_eq!(Target::F5.eval(0.5, 0.5), 0.125);
        assert!((Target::F1.eval(0.0, 0.0)).abs() < 1e-15);
        assert!((Target::F1.eval(0.5, 0.0) - 1.0).abs() < 1e-15);
        assert!((Target::F2.eval(0.0, 0.0)).abs() < 1e-15);
        assert!((Target::F2.eval(0.5, 0.5) - 1.0).abs() < 1e-15);
        assert_eq!(Target::F3.eval(0.5, 0.5), 0.5);
        assert_eq!(Target::F4.eval(0.3, 0.5), 0.5);
        assert!((Target::G1.eval(0.25, 0.9) - 1.0).abs() < 1e-15);
        assert!((Target::G2.eval(0.25, 0.25) - 1.0).abs() < 1e-15);
        assert!((Target::G2.eval(0.0, 0.0) - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn parse_names() {
        for t in Target::ALL {
            assert_eq!(t.name().parse::<Target>().unwrap(), t);
        }
        assert!("f9".parse::<Target>().is_err());
    }
}
