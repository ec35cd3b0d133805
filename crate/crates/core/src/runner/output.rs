//! CSV tables: header row, `.` decimal separator, 17 significant digits, LF endings.

use std::path::Path;

use crate::error::{Error, Result};

/// Real number with 17 significant digits.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// In-memory table written by [`emit_csv`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.header.len() {
                return Err(Error::Parameter(format!(
                    "row {i} has {} fields, schema has {}",
                    row.len(),
                    self.header.len()
                )));
            }
            w.write_record(row).map_err(io)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.to_string()))
    }
}

pub fn emit_csv(path: &Path, table: &Table) -> Result<()> {
    let bytes = table.to_bytes()?;
    std::fs::write(path, bytes).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting() {
        assert_eq!(real(0.1), "1.0000000000000001e-1");
        assert_eq!(real(-2.5), "-2.5000000000000000e0");
        assert_eq!(real(0.0), "0.0000000000000000e0");
        let x = 0.1 + 0.2;
        assert_eq!(real(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn header_only_and_rows() {
        let t = Table::new(&["a", "b"]);
        assert_eq!(t.to_bytes().unwrap(), b"a,b\n");
        let mut t = Table::new(&["name", "x"]);
        t.push(vec!["with,comma".into(), real(1.0)]);
        assert_eq!(String::from_utf8(t.to_bytes().unwrap()).unwrap(), "name,x\n\"with,comma\",1.0000000000000000e0\n");
        t.rows.push(vec!["short".into()]);
        assert!(t.to_bytes().is_err());
    }

    #[test]
    fn writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        emit_csv(&p, &Table::new(&["t"])).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"t\n");
    }
}
