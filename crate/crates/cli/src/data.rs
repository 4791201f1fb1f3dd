//! CSV datasets: a header naming `x`, `y` and (for observations) `value`,
//! then one site per row. Other columns are ignored.

use std::path::Path;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub coords: Vec<[f64; 2]>,
    /// Empty when the file has no `value` column and none was required.
    pub values: Vec<f64>,
}

fn read_table(path: &Path, bytes: &[u8], need_value: bool) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(CliError::data(path, format!("unreadable header: {e}"))),
    };
    if headers.is_empty() && !need_value {
        return Ok(Table { coords: Vec::new(), values: Vec::new() });
    }
    for (i, h) in headers.iter().enumerate() {
        if headers.iter().skip(i + 1).any(|o| o == h) {
            return Err(CliError::data(path, format!("duplicate column '{h}' in header")));
        }
    }
    let column = |name: &str| headers.iter().position(|h| h == name);
    let missing = |name: &str| CliError::data(path, format!("missing column '{name}'"));
    let ix = column("x").ok_or_else(|| missing("x"))?;
    let iy = column("y").ok_or_else(|| missing("y"))?;
    let iv = match column("value") {
        Some(i) => Some(i),
        None if need_value => return Err(missing("value")),
        None => None,
    };

    let mut table = Table { coords: Vec::new(), values: Vec::new() };
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(row as u64 + 1);
            CliError::data(path, format!("row {row} (line {line}): {e}"))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(row as u64 + 1);
        let field = |i: usize, name: &str| -> Result<f64> {
            let text = record.get(i).unwrap_or("");
            let v: f64 = text
                .parse()
                .map_err(|_| CliError::data(path, format!("row {row} (line {line}): column '{name}' is not a number: '{text}'")))?;
            if !v.is_finite() {
                return Err(CliError::data(path, format!("row {row} (line {line}): column '{name}' is not finite")));
            }
            Ok(v)
        };
        table.coords.push([field(ix, "x")?, field(iy, "y")?]);
        if let Some(i) = iv {
            table.values.push(field(i, "value")?);
        }
    }
    if need_value && table.coords.is_empty() {
        return Err(CliError::data(path, "dataset has no rows"));
    }
    Ok(table)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Observations: columns `x`, `y`, `value`, at least one row.
pub fn read_dataset(path: &Path) -> Result<Table> {
    read_table(path, &read_bytes(path)?, true)
}

/// Prediction sites: columns `x`, `y`. An empty file or a bare header
/// gives no sites.
pub fn read_sites(path: &Path) -> Result<Vec<[f64; 2]>> {
    Ok(read_table(path, &read_bytes(path)?, false)?.coords)
}

/// Shortest round-trip formatting, so rereading gives identical values.
pub fn dataset_csv(coords: &[[f64; 2]], values: &[f64]) -> Vec<u8> {
    let mut out = String::from("x,y,value\n");
    for (p, v) in coords.iter().zip(values) {
        out.push_str(&format!("{},{},{}\n", p[0], p[1], v));
    }
    out.into_bytes()
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, need_value: bool) -> Result<Table> {
        read_table(Path::new("t.csv"), text.as_bytes(), need_value)
    }

    #[test]
    fn reads_columns_in_any_order() {
        let t = parse("value,y,x,id\n1.5,0.2,0.1,a\n-2,0.4,0.3,b\n", true).unwrap();
        assert_eq!(t.coords, vec![[0.1, 0.2], [0.3, 0.4]]);
        assert_eq!(t.values, vec![1.5, -2.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse("x,y,x,value\n1,2,3,4\n", true).unwrap_err().to_string().contains("duplicate"));
        assert!(parse("x,y\n1,2\n", true).unwrap_err().to_string().contains("'value'"));
        assert!(parse("x,y,value\n", true).unwrap_err().to_string().contains("no rows"));
        let err = parse("x,y,value\n1,2,3\n1,2,inf\n", true).unwrap_err().to_string();
        assert!(err.contains("row 2") && err.contains("line 3"), "{err}");
        let err = parse("x,y,value\n1,2,3\n1,2,NaN\n", true).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
    }

    #[test]
    fn malformed_row_is_named() {
        let mut text = String::from("x,y,value\n");
        for i in 0..16 {
            text.push_str(&format!("{i},0,1\n"));
        }
        text.push_str("17,0\n");
        let err = parse(&text, true).unwrap_err().to_string();
        assert!(err.contains("row 17"), "{err}");
        let mut text = String::from("x,y,value\n");
        for i in 0..16 {
            text.push_str(&format!("{i},0,1\n"));
        }
        text.push_str("17,0,abc\n");
        assert!(parse(&text, true).unwrap_err().to_string().contains("row 17"));
    }

    #[test]
    fn empty_sites() {
        assert!(parse("", false).unwrap().coords.is_empty());
        assert!(parse("x,y\n", false).unwrap().coords.is_empty());
    }

    #[test]
    fn writes_round_trip() {
        let coords = vec![[0.1, 1.0 / 3.0], [2e-17, 0.5]];
        let values = vec![std::f64::consts::PI, -1e300];
        let t = parse(std::str::from_utf8(&dataset_csv(&coords, &values)).unwrap(), true).unwrap();
        assert_eq!(t.coords, coords);
        assert_eq!(t.values, values);
    }
}
