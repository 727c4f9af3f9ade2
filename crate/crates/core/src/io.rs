//! CSV output with `#` comment headers and fixed number formatting.

use std::fmt::Write as _;
use std::path::Path;

/// Probability in scientific notation, six significant digits.
pub fn fmt_prob(p: f64) -> String {
    format!("{p:.5e}")
}

/// Decibel value with two decimals.
pub fn fmt_db(x: f64) -> String {
    format!("{x:.2}")
}

/// General real value, shortest round-trip form.
pub fn fmt_real(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    comments: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) -> &mut Self {
        self.comments.push(line.into());
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "{}", self.header.join(","));
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.join(","));
        }
        out
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_comments_header_rows() {
        let mut t = CsvTable::new(["a", "b"]);
        t.comment("note");
        t.push(vec![fmt_prob(0.028), fmt_db(3.14159)]);
        assert_eq!(t.render(), "# note\na,b\n2.80000e-2,3.14\n");
    }
}
