//! CSV data ingestion: one observation per row, response in column `y`,
//! design columns `x1..xN`, partition design points `t1..td`.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Parsed input columns.
#[derive(Debug, Clone, Default)]
pub struct InputData {
    pub y: Option<Vec<f64>>,
    /// Design columns in `x1..xN` order.
    pub x: Vec<Vec<f64>>,
    /// Design-point coordinates in `t1..td` order.
    pub t: Vec<Vec<f64>>,
}

impl InputData {
    pub fn n_rows(&self) -> usize {
        self.y
            .as_ref()
            .map(Vec::len)
            .or_else(|| self.x.first().map(Vec::len))
            .or_else(|| self.t.first().map(Vec::len))
            .unwrap_or(0)
    }
}

fn indexed_columns(prefix: char, headers: &[String]) -> Result<BTreeMap<usize, usize>> {
    let mut found = BTreeMap::new();
    for (pos, h) in headers.iter().enumerate() {
        if let Some(rest) = h.strip_prefix(prefix) {
            if let Ok(k) = rest.parse::<usize>() {
                if k == 0 {
                    bail!("column '{h}' is invalid: {prefix}-columns are numbered from 1");
                }
                if found.insert(k, pos).is_some() {
                    bail!("duplicate column '{h}'");
                }
            }
        }
    }
    // numbering must be contiguous from 1
    for (expect, (&k, _)) in found.iter().enumerate() {
        if k != expect + 1 {
            bail!(
                "{prefix}-columns must be numbered contiguously from {prefix}1; missing {prefix}{}",
                expect + 1
            );
        }
    }
    Ok(found)
}

/// Read a CSV data file. Unrecognized columns are ignored; parse failures
/// report the file line.
pub fn read_csv_file(path: &Path) -> Result<InputData> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let headers: Vec<String> = reader
        .headers()
        .context("cannot read CSV header")?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let y_pos = headers.iter().position(|h| h == "y");
    let x_pos = indexed_columns('x', &headers)?;
    let t_pos = indexed_columns('t', &headers)?;

    let mut data = InputData {
        y: y_pos.map(|_| Vec::new()),
        x: vec![Vec::new(); x_pos.len()],
        t: vec![Vec::new(); t_pos.len()],
    };
    for record in reader.records() {
        let record = record.context("malformed CSV record")?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or_default();
        let parse = |pos: usize| -> Result<f64> {
            let raw = record.get(pos).ok_or_else(|| {
                anyhow::anyhow!("line {line}: missing column '{}'", headers[pos])
            })?;
            raw.parse::<f64>().with_context(|| {
                format!(
                    "line {line}: column '{}': invalid number '{raw}'",
                    headers[pos]
                )
            })
        };
        if let (Some(pos), Some(y)) = (y_pos, data.y.as_mut()) {
            y.push(parse(pos)?);
        }
        for (k, &pos) in &x_pos {
            data.x[k - 1].push(parse(pos)?);
        }
        for (k, &pos) in &t_pos {
            data.t[k - 1].push(parse(pos)?);
        }
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_response_and_design() {
        let f = write_temp("y,x1,x2\n1.0,0.5,2\n2.0,1.5,3\n");
        let data = read_csv_file(f.path()).unwrap();
        assert_eq!(data.y.as_deref(), Some(&[1.0, 2.0][..]));
        assert_eq!(data.x.len(), 2);
        assert_eq!(data.x[1], vec![2.0, 3.0]);
        assert_eq!(data.n_rows(), 2);
    }

    #[test]
    fn reports_line_of_bad_number() {
        let f = write_temp("y,x1\n1.0,2.0\n1.0,oops\n");
        let err = read_csv_file(f.path()).unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("line 3"), "message was: {msg}");
        assert!(msg.contains("x1"));
    }

    #[test]
    fn rejects_gappy_numbering() {
        let f = write_temp("y,x1,x3\n1,2,3\n");
        let err = read_csv_file(f.path()).unwrap_err();
        assert!(format!("{err:#}").contains("missing x2"));
    }

    #[test]
    fn partition_points_parse() {
        let f = write_temp("y,t1,t2\n1.0,0.1,0.9\n2.0,0.4,0.2\n");
        let data = read_csv_file(f.path()).unwrap();
        assert_eq!(data.t.len(), 2);
        assert_eq!(data.t[0], vec![0.1, 0.4]);
    }
}
