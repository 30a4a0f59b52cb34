//! Deterministic CSV output: fixed 6-significant-digit formatting so
//! identical runs produce identical bytes.

use crate::error::Result;
use std::fs;
use std::path::Path;

/// Formats a float with 6 significant digits and deterministic rounding.
/// Plain decimal notation inside `[1e-4, 1e7)`, scientific outside.
pub fn fmt6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let ax = x.abs();
    if (1e-4..1e7).contains(&ax) {
        // Exact decimal exponent via the scientific rendering.
        let sci = format!("{ax:e}");
        let exp: i32 = sci[sci.find('e').expect("e marker") + 1..].parse().expect("exponent");
        let decimals = (5 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

/// An optional value: empty cell when undefined.
pub fn fmt6_opt(x: Option<f64>) -> String {
    x.map(fmt6).unwrap_or_default()
}

/// Writes a CSV file in one pass: header plus rows, `\n` line endings.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt6(0.0), "0");
        assert_eq!(fmt6(0.475), "0.475000");
        assert_eq!(fmt6(0.7833333333), "0.783333");
        assert_eq!(fmt6(1.0), "1.00000");
        assert_eq!(fmt6(123456.7), "123457");
        assert_eq!(fmt6(0.1), "0.100000");
        assert_eq!(fmt6(-0.02008), "-0.0200800");
        assert_eq!(fmt6(1.5e-7), "1.50000e-7");
        assert_eq!(fmt6(3.0e9), "3.00000e9");
    }

    #[test]
    fn formatting_is_stable() {
        for x in [0.123456789, 1.0 / 3.0, 2.5e-5, 9.999999e6] {
            assert_eq!(fmt6(x), fmt6(x));
        }
    }
}
