//! Reading and writing datasets, labels and reports.
//!
//! Datasets are delimited text with one point per row. The delimiter (comma
//! or runs of whitespace) is taken from the first non-blank line, which is
//! treated as a header when any of its fields is not a number. Blank lines
//! are ignored.

mod report;

pub use report::{format_scores, write_scores, DirectionDocument, ReportDocument, REPORT_FORMAT};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Dataset, Role};
use crate::synthetic::GroundTruth;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Delimiter {
    Comma,
    Whitespace,
}

impl Delimiter {
    fn split(self, line: &str) -> Vec<&str> {
        match self {
            Delimiter::Comma => line.split(',').map(str::trim).collect(),
            Delimiter::Whitespace => line.split_whitespace().collect(),
        }
    }
}

pub fn read_dataset(path: &Path, role: Role) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, role, path)
}

/// Parses dataset text; `origin` only labels error messages.
pub fn parse_dataset(text: &str, role: Role, origin: &Path) -> Result<Dataset> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();
    let Some(&(_, first)) = lines.peek() else {
        return Err(Error::EmptyDataset { role });
    };
    let delim = if first.contains(',') {
        Delimiter::Comma
    } else {
        Delimiter::Whitespace
    };
    if delim.split(first).iter().any(|f| f.parse::<f64>().is_err()) {
        lines.next();
    }

    let mut dim = None;
    let mut coords = Vec::new();
    for (lineno, line) in lines {
        let fields = delim.split(line);
        let expected = *dim.get_or_insert(fields.len());
        if fields.len() != expected {
            return Err(parse_err(
                lineno,
                format!("expected {expected} columns, found {}", fields.len()),
            ));
        }
        for (col, field) in fields.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(lineno, format!("column {}: {field:?} is not a number", col + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(
                    lineno,
                    format!("column {}: non-finite value {field:?}", col + 1),
                ));
            }
            coords.push(v);
        }
    }
    let Some(dim) = dim else {
        return Err(Error::EmptyDataset { role });
    };
    Dataset::new(role, dim, coords)
}

/// Comma-separated text with an `x0,x1,...` header. Values use the shortest
/// representation that reads back to the same `f64`.
pub fn format_dataset(ds: &Dataset) -> String {
    let mut out = String::with_capacity(ds.coords().len() * 20);
    let header: Vec<String> = (0..ds.dim()).map(|j| format!("x{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for p in ds.points() {
        for (j, v) in p.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    fs::write(path, format_dataset(ds)).map_err(|e| Error::io(path, e))
}

/// `id,label` rows where the label is `background` or the anomaly index.
pub fn format_truth(truth: &GroundTruth) -> String {
    let mut out = String::from("id,label\n");
    for (id, label) in truth.labels.iter().enumerate() {
        let _ = match label {
            Some(a) => writeln!(out, "{id},{a}"),
            None => writeln!(out, "{id},background"),
        };
    }
    out
}

pub fn write_truth(path: &Path, truth: &GroundTruth) -> Result<()> {
    fs::write(path, format_truth(truth)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset> {
        parse_dataset(text, Role::Test, Path::new("mem.csv"))
    }

    #[test]
    fn plain_rows() {
        let text: String = (0..10).map(|i| format!("{i},{}.5,-{i}e-3\n", i * 2)).collect();
        let ds = parse(&text).unwrap();
        assert_eq!((ds.len(), ds.dim()), (10, 3));
        assert_eq!(ds.point(3), [3.0, 6.5, -3e-3]);
    }

    #[test]
    fn header_and_whitespace() {
        let ds = parse("x,y,z\n1,2,3\n4,5,6\n").unwrap();
        assert_eq!(ds.len(), 2);
        let ds = parse("a b\n\n 1.0   2.0\n3\t4\n").unwrap();
        assert_eq!(ds.coords(), [1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn nan_reports_its_line() {
        match parse("x,y\n1,2\n3,NaN\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("1,2\ninf,2\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn ragged_and_empty() {
        assert!(matches!(parse("1,2\n1,2,3\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("x,y\n"), Err(Error::EmptyDataset { .. })));
        assert!(matches!(parse(""), Err(Error::EmptyDataset { .. })));
        assert!(matches!(parse("1,2\n1,zz\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn write_then_read_is_exact() {
        let coords = vec![0.1, 1.0 / 3.0, -2.5e-300, 1e300, 7.0, f64::MIN_POSITIVE];
        let ds = Dataset::new(Role::Reference, 3, coords).unwrap();
        let back = parse_dataset(&format_dataset(&ds), Role::Reference, Path::new("x")).unwrap();
        assert_eq!(back, ds);
    }
}
