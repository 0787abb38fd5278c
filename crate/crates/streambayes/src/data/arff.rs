//! Streaming reader for the ARFF tabular text format.
//!
//! Supported dialect: a `@relation` line, `@attribute` declarations that are
//! either `real`/`numeric` or an explicit `{a, b, c}` label set, then `@data`
//! followed by comma-separated rows. Keywords are case-insensitive, `%`
//! starts a full-line comment, and `?` marks a missing cell. Rows are parsed
//! on demand so memory use is independent of file length.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{StateSpace, Value};

use super::{Attribute, Attributes, DataInstance};

/// A lazily parsed ARFF data source.
pub struct DataStream<R> {
    reader: R,
    attrs: Attributes,
    line: usize,
    buf: String,
}

/// Opens an ARFF file and parses its header.
pub fn open_arff(path: impl AsRef<Path>) -> Result<DataStream<BufReader<File>>> {
    read_arff(BufReader::new(File::open(path)?))
}

/// Parses an ARFF header from any buffered reader.
pub fn read_arff<R: BufRead>(mut reader: R) -> Result<DataStream<R>> {
    let mut line_no = 0usize;
    let mut relation: Option<String> = None;
    let mut attrs: Vec<Attribute> = Vec::new();
    let mut buf = String::new();
    loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            return Err(Error::Parse {
                line: line_no,
                message: "file ended before a @data section".into(),
            });
        }
        line_no += 1;
        let line = buf.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower == "@data" {
            break;
        } else if let Some(rest) = strip_keyword(line, "@relation") {
            relation = Some(unquote(rest.trim()).to_string());
        } else if let Some(rest) = strip_keyword(line, "@attribute") {
            attrs.push(parse_attribute(rest.trim(), line_no)?);
        } else {
            return Err(Error::Parse {
                line: line_no,
                message: format!("unrecognized header line `{line}`"),
            });
        }
    }
    let relation = relation.ok_or(Error::Parse {
        line: line_no,
        message: "missing @relation declaration".into(),
    })?;
    if attrs.is_empty() {
        return Err(Error::Parse { line: line_no, message: "no attributes declared".into() });
    }
    let attrs = Attributes::new(relation, attrs)?;
    Ok(DataStream { reader, attrs, line: line_no, buf: String::new() })
}

impl<R: BufRead> DataStream<R> {
    pub fn attributes(&self) -> &Attributes {
        &self.attrs
    }

    /// Line number of the most recently read row (1-based).
    pub fn last_line(&self) -> usize {
        self.line
    }

    fn parse_row(&self, row: &str) -> Result<DataInstance> {
        let cells: Vec<&str> = row.split(',').map(str::trim).collect();
        if cells.len() != self.attrs.len() {
            return Err(Error::Parse {
                line: self.line,
                message: format!(
                    "row has {} cells but the header declares {} attributes",
                    cells.len(),
                    self.attrs.len()
                ),
            });
        }
        let mut values = Vec::with_capacity(cells.len());
        for (cell, attr) in cells.iter().zip(self.attrs.iter()) {
            values.push(self.parse_cell(cell, attr)?);
        }
        Ok(DataInstance::new(values))
    }

    fn parse_cell(&self, cell: &str, attr: &Attribute) -> Result<Option<Value>> {
        let cell = unquote(cell);
        if cell == "?" {
            return Ok(None);
        }
        match &attr.space {
            StateSpace::Real => {
                let x: f64 = cell.parse().map_err(|_| Error::Parse {
                    line: self.line,
                    message: format!("`{cell}` is not a number for column `{}`", attr.name),
                })?;
                if !x.is_finite() {
                    return Err(Error::Parse {
                        line: self.line,
                        message: format!("non-finite value for column `{}`", attr.name),
                    });
                }
                Ok(Some(Value::Real(x)))
            }
            StateSpace::Finite { labels } => {
                if let Some(i) = labels.iter().position(|l| l == cell) {
                    return Ok(Some(Value::Index(i)));
                }
                // Tools that round-trip through floats write `1.0` for the
                // label `1`; accept any integral number inside the range.
                if let Ok(x) = cell.parse::<f64>() {
                    let rounded = x.round();
                    if (x - rounded).abs() <= 1e-9
                        && rounded >= 0.0
                        && (rounded as usize) < labels.len()
                    {
                        return Ok(Some(Value::Index(rounded as usize)));
                    }
                }
                Err(Error::Parse {
                    line: self.line,
                    message: format!("`{cell}` is not a state of column `{}`", attr.name),
                })
            }
        }
    }
}

impl<R: BufRead> Iterator for DataStream<R> {
    type Item = Result<DataInstance>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line += 1;
            let row = self.buf.trim();
            if row.is_empty() || row.starts_with('%') {
                continue;
            }
            return Some(self.parse_row(row));
        }
    }
}

fn strip_keyword<'a>(line: &'a str, keyword: &str) -> Option<&'a str> {
    if line.len() >= keyword.len() && line[..keyword.len()].eq_ignore_ascii_case(keyword) {
        Some(&line[keyword.len()..])
    } else {
        None
    }
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    for q in ['\'', '"'] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

fn parse_attribute(rest: &str, line: usize) -> Result<Attribute> {
    let rest = rest.trim();
    let (name, spec) = if rest.starts_with('\'') || rest.starts_with('"') {
        let quote = rest.chars().next().unwrap();
        let close = rest[1..].find(quote).ok_or(Error::Parse {
            line,
            message: "unterminated quoted attribute name".into(),
        })? + 1;
        (&rest[1..close], rest[close + 1..].trim())
    } else {
        let split = rest.find(char::is_whitespace).ok_or(Error::Parse {
            line,
            message: format!("attribute `{rest}` has no type"),
        })?;
        (&rest[..split], rest[split..].trim())
    };
    if name.is_empty() {
        return Err(Error::Parse { line, message: "empty attribute name".into() });
    }
    let space = if spec.eq_ignore_ascii_case("real") || spec.eq_ignore_ascii_case("numeric") {
        StateSpace::real()
    } else if spec.starts_with('{') && spec.ends_with('}') {
        let labels: Vec<String> = spec[1..spec.len() - 1]
            .split(',')
            .map(|l| unquote(l.trim()).to_string())
            .collect();
        if labels.iter().any(|l| l.is_empty()) {
            return Err(Error::Parse {
                line,
                message: format!("attribute `{name}` has an empty state label"),
            });
        }
        StateSpace::finite(labels)
            .map_err(|e| Error::Parse { line, message: format!("attribute `{name}`: {e}") })?
    } else {
        return Err(Error::Parse {
            line,
            message: format!("unsupported attribute type `{spec}` for `{name}`"),
        });
    };
    Ok(Attribute { name: name.to_string(), space })
}
