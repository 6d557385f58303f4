//! Locale-independent number formatting for CSV and JSON outputs.

use std::fmt::Write;

/// `x` with 12 significant digits in scientific notation, e.g.
/// `6.94694968300e-1`.
pub fn fmt_sig(x: f64) -> String {
    format!("{x:.11e}")
}

/// Builds CSV text from a header and rows of preformatted fields.
pub fn csv<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let fields: Vec<String> = row.into_iter().collect();
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}
