// SPDX-License-Identifier: Apache-2.0

//! Decimal literals as they appear on the wire.
//!
//! Grammar: `[+-]? ( digits [. digits?] | . digits ) ( [eE] [+-]? digits )?`.
//! The original lexeme is kept so a parsed request formats back to the exact
//! bytes it came from.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub struct Decimal {
    text: String,
    value: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid decimal {0:?}")]
pub struct DecimalError(pub String);

impl Decimal {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    /// Canonical lexeme for a finite value (shortest round-trip form).
    pub fn from_f64(v: f64) -> Option<Self> {
        if !v.is_finite() {
            return None;
        }
        Some(Self { text: format_value(v), value: v })
    }
}

/// Shortest representation that parses back to the same `f64`, so no
/// precision is lost on the wire.
pub fn format_value(v: f64) -> String {
    format!("{v}")
}

fn is_lexeme(s: &str) -> bool {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let int_digits = i - int_start;
    let mut frac_digits = 0;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let f = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        frac_digits = i - f;
    }
    if int_digits == 0 && frac_digits == 0 {
        return false;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let e = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == e {
            return false;
        }
    }
    i == b.len()
}

impl FromStr for Decimal {
    type Err = DecimalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if !is_lexeme(s) {
            return Err(DecimalError(s.to_string()));
        }
        let value: f64 = s.parse().map_err(|_| DecimalError(s.to_string()))?;
        if !value.is_finite() {
            return Err(DecimalError(s.to_string()));
        }
        Ok(Self { text: s.to_string(), value })
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_grammar() {
        for s in ["0", "-1", "+2.5", ".5", "5.", "1e3", "1.5E-7", "-.25e+2", "007"] {
            let d: Decimal = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        assert_eq!("-.25e+2".parse::<Decimal>().unwrap().value(), -25.0);
    }

    #[test]
    fn rejects_non_grammar() {
        for s in ["", "+", ".", "e5", "1e", "1e+", "nan", "inf", "0x10", "1,5", "1 ", "--1", "1e400"] {
            assert!(s.parse::<Decimal>().is_err(), "{s:?}");
        }
    }

    #[test]
    fn formatted_values_round_trip() {
        for v in [0.0, 1.0, -3.25, 287.26526739190287, 1e-300, 6.900001725000431] {
            let text = format_value(v);
            assert_eq!(text.parse::<f64>().unwrap(), v);
            assert!(is_lexeme(&text), "{text}");
        }
    }
}
