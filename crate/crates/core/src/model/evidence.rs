use super::{TbnModel, NORMALIZATION_TOLERANCE};
use crate::error::{Error, Result};

/// Soft evidence: a likelihood vector per evidence variable, in insertion order.
///
/// Each vector has one entry per state, entries lie in `[0,1]` and sum to one.
/// A vector with a single `1` is hard evidence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Evidence {
    entries: Vec<(String, Vec<f64>)>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets (or replaces) the likelihood vector of `var`.
    pub fn set(&mut self, var: &str, lambda: Vec<f64>) -> Result<()> {
        check_vector(var, &lambda)?;
        match self.entries.iter_mut().find(|(n, _)| n == var) {
            Some(slot) => slot.1 = lambda,
            None => self.entries.push((var.to_string(), lambda)),
        }
        Ok(())
    }

    pub fn with(mut self, var: &str, lambda: &[f64]) -> Result<Self> {
        self.set(var, lambda.to_vec())?;
        Ok(self)
    }

    /// Binary shorthand: `(x, 1 - x)`.
    pub fn binary(mut self, var: &str, x: f64) -> Result<Self> {
        self.set(var, vec![x, 1.0 - x])?;
        Ok(self)
    }

    pub fn get(&self, var: &str) -> Option<&[f64]> {
        self.entries
            .iter()
            .find(|(n, _)| n == var)
            .map(|(_, v)| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(n, v)| (n.as_str(), v.as_slice()))
    }

    pub fn variables(&self) -> Vec<&str> {
        self.entries.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks every vector against the variable it names in `model`.
    pub fn validate(&self, model: &TbnModel) -> Result<()> {
        for (name, lambda) in &self.entries {
            let id = model.var(name)?;
            if lambda.len() != model.card(id) {
                return Err(Error::invalid(
                    "evidence",
                    format!(
                        "`{name}` has {} states but {} likelihoods were given",
                        model.card(id),
                        lambda.len()
                    ),
                ));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_vector(var: &str, lambda: &[f64]) -> Result<()> {
    if lambda.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::invalid(
            "evidence",
            format!("likelihoods of `{var}` must lie in [0,1], got {lambda:?}"),
        ));
    }
    let sum: f64 = lambda.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::invalid(
            "evidence",
            format!("likelihoods of `{var}` sum to {sum}, not 1"),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_shorthand() {
        let e = Evidence::new().binary("A", 0.25).unwrap();
        assert_eq!(e.get("A"), Some(&[0.25, 0.75][..]));
    }

    #[test]
    fn rejects_bad_vectors() {
        assert!(Evidence::new().with("A", &[0.5, 0.6]).is_err());
        assert!(Evidence::new().with("A", &[-0.1, 1.1]).is_err());
    }

    #[test]
    fn set_replaces_in_place() {
        let mut e = Evidence::new().binary("A", 0.1).unwrap().binary("B", 0.2).unwrap();
        e.set("A", vec![1.0, 0.0]).unwrap();
        assert_eq!(e.variables(), vec!["A", "B"]);
        assert_eq!(e.get("A"), Some(&[1.0, 0.0][..]));
    }
}
