//! ARFF writers for static and temporal data.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{StateSpace, Value};

use super::{Attributes, DataInstance, DynamicDataInstance, SEQUENCE_COLUMN, TIME_COLUMN};

/// Writes a header and rows in the same dialect the reader accepts.
pub fn write_arff<W: Write>(
    out: &mut W,
    attrs: &Attributes,
    rows: impl IntoIterator<Item = DataInstance>,
) -> Result<()> {
    write_header(out, attrs, &[])?;
    for row in rows {
        write_row(out, attrs, &row, None)?;
    }
    Ok(())
}

/// Writes temporal rows, adding `SEQUENCE_ID` and `TIME_ID` columns ahead of
/// the attributes.
pub fn write_dynamic_arff<W: Write>(
    out: &mut W,
    attrs: &Attributes,
    rows: impl IntoIterator<Item = DynamicDataInstance>,
) -> Result<()> {
    write_header(out, attrs, &[SEQUENCE_COLUMN, TIME_COLUMN])?;
    for row in rows {
        write_row(out, attrs, &row.values, Some((row.sequence, row.time)))?;
    }
    Ok(())
}

/// File-path convenience wrapper over [`write_arff`].
pub fn write_arff_file(
    path: impl AsRef<Path>,
    attrs: &Attributes,
    rows: impl IntoIterator<Item = DataInstance>,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_arff(&mut out, attrs, rows)?;
    out.flush()?;
    Ok(())
}

/// File-path convenience wrapper over [`write_dynamic_arff`].
pub fn write_dynamic_arff_file(
    path: impl AsRef<Path>,
    attrs: &Attributes,
    rows: impl IntoIterator<Item = DynamicDataInstance>,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_dynamic_arff(&mut out, attrs, rows)?;
    out.flush()?;
    Ok(())
}

fn write_header<W: Write>(out: &mut W, attrs: &Attributes, extra: &[&str]) -> Result<()> {
    writeln!(out, "@relation {}", quote_if_needed(attrs.relation()))?;
    writeln!(out)?;
    for name in extra {
        writeln!(out, "@attribute {name} real")?;
    }
    for a in attrs.iter() {
        match &a.space {
            StateSpace::Real => writeln!(out, "@attribute {} real", quote_if_needed(&a.name))?,
            StateSpace::Finite { labels } => {
                let states: Vec<String> =
                    labels.iter().map(|l| quote_if_needed(l).into_owned()).collect();
                writeln!(
                    out,
                    "@attribute {} {{{}}}",
                    quote_if_needed(&a.name),
                    states.join(", ")
                )?;
            }
        }
    }
    writeln!(out)?;
    writeln!(out, "@data")?;
    Ok(())
}

fn write_row<W: Write>(
    out: &mut W,
    attrs: &Attributes,
    row: &DataInstance,
    prefix: Option<(u64, u64)>,
) -> Result<()> {
    if row.len() != attrs.len() {
        return Err(Error::Schema(format!(
            "row has {} cells for {} columns",
            row.len(),
            attrs.len()
        )));
    }
    let mut cells: Vec<String> = Vec::with_capacity(row.len() + 2);
    if let Some((seq, time)) = prefix {
        cells.push(seq.to_string());
        cells.push(time.to_string());
    }
    for (value, attr) in row.values().iter().zip(attrs.iter()) {
        cells.push(match value {
            None => "?".to_string(),
            Some(Value::Real(x)) => x.to_string(),
            Some(Value::Index(i)) => match &attr.space {
                StateSpace::Finite { labels } => quote_if_needed(&labels[*i]).into_owned(),
                StateSpace::Real => {
                    return Err(Error::TypeMismatch(format!(
                        "discrete value in numeric column `{}`",
                        attr.name
                    )))
                }
            },
        });
    }
    writeln!(out, "{}", cells.join(", "))?;
    Ok(())
}

fn quote_if_needed(s: &str) -> std::borrow::Cow<'_, str> {
    if s.contains([' ', ',', '{', '}']) || s.is_empty() {
        std::borrow::Cow::Owned(format!("'{s}'"))
    } else {
        std::borrow::Cow::Borrowed(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{read_arff, Attribute, DynamicDataStream};
    use std::io::Cursor;

    #[test]
    fn written_files_read_back_identically() {
        let attrs = Attributes::new(
            "round trip",
            vec![
                Attribute::finite("d", vec!["a".into(), "b".into()]).unwrap(),
                Attribute::real("x"),
            ],
        )
        .unwrap();
        let rows = vec![
            DataInstance::new(vec![Some(Value::Index(1)), Some(Value::Real(0.125))]),
            DataInstance::new(vec![None, Some(Value::Real(-3.0))]),
            DataInstance::new(vec![Some(Value::Index(0)), None]),
        ];
        let mut text = Vec::new();
        write_arff(&mut text, &attrs, rows.clone()).unwrap();
        let stream = read_arff(Cursor::new(text)).unwrap();
        assert_eq!(stream.attributes(), &attrs);
        let back: Vec<_> = stream.map(|r| r.unwrap()).collect();
        assert_eq!(back, rows);
    }

    #[test]
    fn dynamic_round_trip_keeps_ids() {
        let attrs = Attributes::new("t", vec![Attribute::real("x")]).unwrap();
        let rows = vec![
            DynamicDataInstance {
                sequence: 0,
                time: 0,
                values: DataInstance::new(vec![Some(Value::Real(1.0))]),
            },
            DynamicDataInstance {
                sequence: 0,
                time: 1,
                values: DataInstance::new(vec![Some(Value::Real(2.0))]),
            },
        ];
        let mut text = Vec::new();
        write_dynamic_arff(&mut text, &attrs, rows.clone()).unwrap();
        let stream = DynamicDataStream::new(read_arff(Cursor::new(text)).unwrap()).unwrap();
        let back: Vec<_> = stream.map(|r| r.unwrap()).collect();
        assert_eq!(back, rows);
    }
}
