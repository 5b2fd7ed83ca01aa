//! Number formatting and report writers.

use std::io::Write;

use anyhow::Result;

/// Full precision: 17 significant digits in scientific notation.
pub fn sci17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Three significant digits in the `3.84e-06` style of printed tables.
pub fn sci3(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.00e+00".into();
    }
    let s = format!("{x:.2e}");
    let (mant, exp) = s.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

/// Orders are shown with two decimals, like the printed tables.
pub fn order2(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.2}"),
        None => "*".into(),
    }
}

/// Minimal Markdown table builder.
#[derive(Debug, Clone, Default)]
pub struct Markdown {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Markdown {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row<S: Into<String>>(&mut self, cells: impl IntoIterator<Item = S>) {
        self.rows.push(cells.into_iter().map(Into::into).collect());
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("| {} |\n", self.header.join(" | ")));
        out.push_str(&format!("|{}\n", " --- |".repeat(self.header.len())));
        for r in &self.rows {
            out.push_str(&format!("| {} |\n", r.join(" | ")));
        }
        out
    }
}

/// Writes rows of already formatted cells as CSV.
pub fn write_csv<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scientific_formats() {
        assert_eq!(sci3(3.8412e-6), "3.84e-06");
        assert_eq!(sci3(1.71e-4), "1.71e-04");
        assert_eq!(sci3(12345.0), "1.23e+04");
        assert_eq!(sci3(0.0), "0.00e+00");
        let s = sci17(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
        assert_eq!(order2(Some(1.4349)), "1.43");
        assert_eq!(order2(None), "*");
    }

    #[test]
    fn markdown_and_csv() {
        let mut md = Markdown::new(["N", "e"]);
        md.row(["100", "1.00e-03"]);
        assert_eq!(md.render(), "| N | e |\n| --- | --- |\n| 100 | 1.00e-03 |\n");
        let mut buf = Vec::new();
        write_csv(&mut buf, &["a", "b"], &[vec!["1".into(), "2".into()]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n1,2\n");
    }
}
