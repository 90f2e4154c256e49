//! Column-named result tables with a lossless CSV form.
//!
//! Floats are written in Rust's shortest round-trip representation, so
//! `Table::from_csv(&t.to_csv())` reproduces `t` bit for bit.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(v) => Some(v as f64),
            Cell::Num(v) => Some(v),
            Cell::Text(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Inverse of `Display`: integers first, then floats, else text.
    /// A float always carries a `.`, exponent or special name, so it never
    /// parses back as an integer.
    pub fn parse(s: &str) -> Cell {
        if let Ok(v) = s.parse::<i64>() {
            Cell::Int(v)
        } else if let Ok(v) = s.parse::<f64>() {
            Cell::Num(v)
        } else {
            Cell::Text(s.to_string())
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Num(v) => write!(f, "{v:?}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Table(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// All values of a numeric column; `None` if the column is missing or
    /// holds text.
    pub fn numbers(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column_index(name)?;
        self.rows.iter().map(|r| r[k].as_f64()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_string))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| Error::Table(e.to_string()))?;
        let mut t = Table::new(header.iter());
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Table(e.to_string()))?;
            t.push(rec.iter().map(Cell::parse).collect())?;
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bitwise() {
        let mut t = Table::new(["i", "value", "method"]);
        for (i, v) in [0.1 + 0.2, 1e-300, -3.0, f64::MAX, 5e-324, f64::INFINITY]
            .iter()
            .enumerate()
        {
            t.push(vec![i.into(), (*v).into(), "pnp, oracle".into()])
                .unwrap();
        }
        let back = Table::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back, t);
        let vals = back.numbers("value").unwrap();
        assert_eq!(vals[0].to_bits(), (0.1f64 + 0.2).to_bits());
        assert!(back.numbers("method").is_none());
    }

    #[test]
    fn nan_survives() {
        let mut t = Table::new(["x"]);
        t.push(vec![f64::NAN.into()]).unwrap();
        let back = Table::from_csv(&t.to_csv()).unwrap();
        assert!(back.numbers("x").unwrap()[0].is_nan());
    }

    #[test]
    fn ragged_rows_rejected() {
        let mut t = Table::new(["a", "b"]);
        assert!(t.push(vec![1.0.into()]).is_err());
        assert!(Table::from_csv("a,b\n1\n").is_err());
    }
}
