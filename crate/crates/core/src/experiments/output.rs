use std::io::Write;

use crate::error::{Error, Result};

const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_significant(*v, SIGNIFICANT_DIGITS),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            Cell::Text(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// `# manifest: <file>` line, header row, then data rows.
    pub fn to_csv(&self, manifest_name: &str) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        writeln!(buf, "# manifest: {manifest_name}").map_err(|e| Error::io("<csv buffer>", e))?;
        {
            let mut writer = csv::Writer::from_writer(&mut buf);
            writer.write_record(&self.header)?;
            for row in &self.rows {
                writer.write_record(row.iter().map(Cell::render))?;
            }
            writer.flush().map_err(|e| Error::io("<csv buffer>", e))?;
        }
        Ok(buf)
    }
}

/// `printf("%.{digits}g")`-style formatting: shortest of fixed or scientific
/// notation, trailing zeros removed, `.` as decimal separator.
pub fn format_significant(value: f64, digits: usize) -> String {
    if value.is_nan() {
        return "nan".into();
    }
    if value.is_infinite() {
        return if value > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if value == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, value);
    let (mantissa, exponent) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exponent: i32 = exponent.parse().expect("exponent is an integer");
    if exponent < -4 || exponent >= digits as i32 {
        let mantissa = trim_fraction(mantissa);
        let sign = if exponent < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exponent.abs())
    } else {
        let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
        trim_fraction(&format!("{value:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333333"),
            (123456.789, "123456.789"),
            (1e-5, "1e-05"),
            (1.25e-7, "1.25e-07"),
            (0.0001, "0.0001"),
            (1e12, "1e+12"),
            (999999999999.0, "999999999999"),
            (9.9999999999999e11, "1e+12"),
            (0.029714978775015163, "0.029714978775"),
            (-40.0, "-40"),
        ];
        for (v, expected) in cases {
            assert_eq!(format_significant(v, 12), expected, "value {v}");
        }
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![Cell::Num(0.5), Cell::Int(3)]);
        t.push(vec![Cell::Text("x".into()), Cell::Num(-1e-9)]);
        let text = String::from_utf8(t.to_csv("m.json").unwrap()).unwrap();
        assert_eq!(text, "# manifest: m.json\na,b\n0.5,3\nx,-1e-09\n");
    }
}
