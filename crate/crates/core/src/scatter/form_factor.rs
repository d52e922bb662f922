//! Atomic form factors as sums of Gaussians.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::{Error, Result};

const BUNDLED: &str = include_str!("../../data/form_factors.dat");

/// Name that always resolves to f ≡ 1.
pub const UNIT: &str = "unit";

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FormFactor {
    Unit,
    Gaussian { a: [f64; 4], b: [f64; 4], c: f64 },
}

impl FormFactor {
    pub fn eval(&self, q: f64) -> f64 {
        match self {
            FormFactor::Unit => 1.0,
            FormFactor::Gaussian { a, b, c } => {
                let s2 = (q / (4.0 * PI)).powi(2);
                a.iter().zip(b).map(|(a, b)| a * (-b * s2).exp()).sum::<f64>() + c
            }
        }
    }
}

/// Species → coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct FormFactorTable {
    entries: BTreeMap<String, FormFactor>,
}

impl FormFactorTable {
    /// The table shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled form-factor table is well formed")
    }

    /// Whitespace columns `species a1 b1 a2 b2 a3 b3 a4 b4 c`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace();
            let name = cols.next().expect("non-empty line");
            let nums = cols
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::parse(lineno + 1, format!("bad coefficient {t:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if nums.len() != 9 {
                return Err(Error::parse(
                    lineno + 1,
                    format!("expected 9 coefficients for {name}, found {}", nums.len()),
                ));
            }
            let a = [nums[0], nums[2], nums[4], nums[6]];
            let b = [nums[1], nums[3], nums[5], nums[7]];
            entries.insert(name.to_string(), FormFactor::Gaussian { a, b, c: nums[8] });
        }
        Ok(FormFactorTable { entries })
    }

    pub fn get(&self, species: &str) -> Result<FormFactor> {
        if species == UNIT {
            return Ok(FormFactor::Unit);
        }
        self.entries.get(species).copied().ok_or_else(|| Error::UnknownSpecies {
            name: species.to_string(),
            registered: self.registered().join(", "),
        })
    }

    pub fn registered(&self) -> Vec<String> {
        std::iter::once(UNIT.to_string())
            .chain(self.entries.keys().cloned())
            .collect()
    }
}

/// How atoms scatter: all with f ≡ 1, or per species from a table.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Scattering {
    #[default]
    Unit,
    Tabulated(FormFactorTable),
}

impl Scattering {
    pub fn tabulated() -> Self {
        Scattering::Tabulated(FormFactorTable::bundled())
    }

    pub fn for_species(&self, species: &str) -> Result<FormFactor> {
        match self {
            Scattering::Unit => Ok(FormFactor::Unit),
            Scattering::Tabulated(t) => t.get(species),
        }
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, Scattering::Unit)
    }
}

/// Looks up `species` in the bundled table and evaluates it at `q`.
pub fn form_factor(species: &str, q: f64) -> Result<f64> {
    Ok(FormFactorTable::bundled().get(species)?.eval(q))
}

/// Atoms grouped by species, in order of first appearance.
pub(crate) fn species_groups(species: &[String]) -> Vec<(String, Vec<usize>)> {
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, s) in species.iter().enumerate() {
        match groups.iter_mut().find(|(name, _)| name == s) {
            Some((_, idx)) => idx.push(i),
            None => groups.push((s.clone(), vec![i])),
        }
    }
    groups
}

/// Per-species form factors and atom counts for one frame's labels.
pub(crate) fn resolve(scattering: &Scattering, species: &[String]) -> Result<Vec<(FormFactor, Vec<usize>)>> {
    if scattering.is_unit() {
        return Ok(vec![(FormFactor::Unit, (0..species.len()).collect())]);
    }
    species_groups(species)
        .into_iter()
        .map(|(name, idx)| Ok((scattering.for_species(&name)?, idx)))
        .collect()
}

/// Σᵢ fᵢ(q)² over the atoms of a frame.
pub fn sum_f_squared(groups: &[(FormFactor, Vec<usize>)], q: f64) -> f64 {
    groups.iter().map(|(f, idx)| idx.len() as f64 * f.eval(q).powi(2)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_is_one() {
        assert_eq!(form_factor(UNIT, 3.7).unwrap(), 1.0);
    }

    #[test]
    fn forward_value_is_coefficient_sum() {
        let t = FormFactorTable::bundled();
        for s in ["H", "C", "N", "O", "Ne", "Ar"] {
            let FormFactor::Gaussian { a, c, .. } = t.get(s).unwrap() else {
                panic!()
            };
            let f0 = t.get(s).unwrap().eval(0.0);
            assert!((f0 - (a.iter().sum::<f64>() + c)).abs() < 1e-12);
        }
        // roughly the atomic numbers
        assert!((t.get("Ar").unwrap().eval(0.0) - 18.0).abs() < 0.05);
        assert!((t.get("O").unwrap().eval(0.0) - 8.0).abs() < 0.05);
    }

    #[test]
    fn monotone_decreasing() {
        let f = FormFactorTable::bundled().get("Ar").unwrap();
        let mut prev = f.eval(0.0);
        for i in 1..100 {
            let v = f.eval(i as f64 * 0.06);
            assert!(v <= prev && v > 0.0);
            prev = v;
        }
    }

    #[test]
    fn unknown_species_lists_table() {
        let err = form_factor("Xx", 1.0).unwrap_err().to_string();
        assert!(err.contains("Ar") && err.contains("unit"), "{err}");
    }

    #[test]
    fn groups_keep_first_appearance_order() {
        let s: Vec<String> = ["O", "H", "H", "O"].iter().map(|s| s.to_string()).collect();
        let g = species_groups(&s);
        assert_eq!(g[0], ("O".to_string(), vec![0, 3]));
        assert_eq!(g[1], ("H".to_string(), vec![1, 2]));
    }
}
