//! Time-series tables and their CSV form.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use collective_core::integrator::TrajectoryRecord;

/// Columns sharing one time axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub times: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl Table {
    pub fn new(times: Vec<f64>) -> Self {
        Self { times, columns: Vec::new() }
    }

    pub fn from_record(record: &TrajectoryRecord) -> Self {
        Self { times: record.times.clone(), columns: record.columns.clone() }
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        assert_eq!(values.len(), self.times.len(), "column length must match the time axis");
        self.columns.push((name.into(), values));
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = String::from("t");
        for (name, _) in &self.columns {
            header.push(',');
            header.push_str(name);
        }
        writeln!(w, "{header}")?;
        for (i, t) in self.times.iter().enumerate() {
            let mut line = format_value(*t);
            for (_, v) in &self.columns {
                line.push(',');
                line.push_str(&format_value(v[i]));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        fs::write(path, buf)
    }
}

/// 17 significant digits in scientific notation.
pub fn format_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new(vec![0.0, 0.5]);
        t.push("a", vec![1.0, 1.0 / 3.0]);
        t.push("b", vec![f64::INFINITY, -2.5e-300]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "t,a,b\n\
             0.0000000000000000e0,1.0000000000000000e0,inf\n\
             5.0000000000000000e-1,3.3333333333333331e-1,-2.5000000000000000e-300\n"
        );
    }

    #[test]
    fn values_round_trip() {
        for v in [1.0 / 3.0, std::f64::consts::PI, 1e-17, 123456.789, -0.1] {
            assert_eq!(format_value(v).parse::<f64>().unwrap(), v);
        }
    }
}
