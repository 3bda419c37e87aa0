//! Normalization of scientific entities: chemical formulas, quantities with
//! units, and bare numbers.
//!
//! The default pattern set is fixed so that masked corpora are reproducible.
//! A pattern file can replace any part of it:
//!
//! ```text
//! # comment
//! chem_regex   ^(?:[a-z][0-9]*)+$
//! number_regex ^[0-9]+$
//! unit mg
//! unit kg
//! ```
//!
//! Any `unit` line replaces the whole default unit list. A token is only
//! treated as a formula when it also contains a digit.

use std::collections::HashSet;
use std::path::Path;

use regex::Regex;

use super::CorpusError;

pub const CHEM_TOKEN: &str = "<chem>";
pub const NUM_UNIT_TOKEN: &str = "<num_unit>";
pub const NUM_TOKEN: &str = "<num>";

const ELEMENTS: &[&str] = &[
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

pub(crate) const DEFAULT_UNITS: &[&str] = &[
    "mg", "g", "kg", "ug", "µg", "ng", "ml", "l", "ul", "µl", "mm", "cm", "m", "km", "nm", "um",
    "µm", "s", "ms", "min", "h", "hz", "khz", "mhz", "mol", "mmol", "umol", "µmol", "k", "°c",
    "kda", "v", "mv", "w", "kcal", "kpa", "mpa", "ppm",
];

const NUMBER: &str = r"[+-]?[0-9]+(?:[.,][0-9]+)*(?:[eE][+-]?[0-9]+)?";

/// Compiled masking rules.
#[derive(Debug, Clone)]
pub struct MaskPatterns {
    chem: Regex,
    number: Regex,
    number_prefix: Regex,
    units: HashSet<String>,
}

impl Default for MaskPatterns {
    fn default() -> Self {
        let mut symbols: Vec<&str> = ELEMENTS.to_vec();
        // longest alternatives first keeps the pattern readable; the automaton
        // does not depend on it
        symbols.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        let element = symbols.join("|");
        let chem = format!(r"(?i)^(?:(?:{element})[0-9]*)+$");
        Self::build(&chem, &format!("^{NUMBER}$"), DEFAULT_UNITS.iter().map(|u| u.to_string()))
            .expect("default masking patterns compile")
    }
}

impl MaskPatterns {
    fn build(
        chem: &str,
        number: &str,
        units: impl IntoIterator<Item = String>,
    ) -> Result<Self, CorpusError> {
        let re = |p: &str| {
            Regex::new(p).map_err(|e| CorpusError::Patterns(format!("bad regex {p:?}: {e}")))
        };
        let number_body = number.trim_start_matches('^').trim_end_matches('$');
        Ok(Self {
            chem: re(chem)?,
            number: re(number)?,
            number_prefix: re(&format!("^({number_body})(.+)$"))?,
            units: units.into_iter().collect(),
        })
    }

    /// Reads an override file. Missing keys fall back to the defaults.
    pub fn from_file(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let defaults = Self::default();
        let mut chem = defaults.chem.as_str().to_string();
        let mut number = defaults.number.as_str().to_string();
        let mut units: Option<Vec<String>> = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once(char::is_whitespace).ok_or_else(|| {
                CorpusError::Patterns(format!("line {}: expected `key value`", lineno + 1))
            })?;
            let value = value.trim().to_string();
            match key {
                "chem_regex" => chem = value,
                "number_regex" => number = value,
                "unit" => units.get_or_insert_with(Vec::new).push(value.to_lowercase()),
                other => {
                    return Err(CorpusError::Patterns(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        let units = units.unwrap_or_else(|| defaults.units.into_iter().collect());
        Self::build(&chem, &number, units)
    }

    pub fn is_unit(&self, token: &str) -> bool {
        self.units.contains(&token.to_lowercase())
    }

    pub fn is_number(&self, token: &str) -> bool {
        self.number.is_match(token)
    }

    /// Single-token quantity such as `5mg` or `3.5kda`.
    pub fn is_number_with_unit(&self, token: &str) -> bool {
        self.number_prefix
            .captures(token)
            .is_some_and(|c| self.is_unit(&c[2]))
    }

    /// Element-symbol sequence carrying at least one count digit.
    pub fn is_chemical(&self, token: &str) -> bool {
        token.bytes().any(|b| b.is_ascii_digit())
            && self.chem.is_match(token)
            && !self.is_number(token)
    }

    /// Masks one sentence. A number immediately followed by a unit token
    /// collapses into a single placeholder.
    pub fn mask_sentence(&self, tokens: &[String]) -> Vec<String> {
        let mut out = Vec::with_capacity(tokens.len());
        let mut i = 0;
        while i < tokens.len() {
            let tok = &tokens[i];
            if self.is_number(tok) {
                if tokens.get(i + 1).is_some_and(|next| self.is_unit(next)) {
                    out.push(NUM_UNIT_TOKEN.to_string());
                    i += 2;
                } else {
                    out.push(NUM_TOKEN.to_string());
                    i += 1;
                }
                continue;
            }
            if self.is_number_with_unit(tok) {
                out.push(NUM_UNIT_TOKEN.to_string());
            } else if self.is_chemical(tok) {
                out.push(CHEM_TOKEN.to_string());
            } else {
                out.push(tok.clone());
            }
            i += 1;
        }
        out
    }
}
