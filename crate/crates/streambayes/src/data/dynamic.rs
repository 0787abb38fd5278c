//! Temporal data streams: sequences of timestamped rows.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{StateSpace, Value};

use super::{Attributes, DataInstance, DataStream};

/// Reserved column naming the sequence a row belongs to.
pub const SEQUENCE_COLUMN: &str = "SEQUENCE_ID";
/// Reserved column giving a row's time index within its sequence.
pub const TIME_COLUMN: &str = "TIME_ID";

/// One timestamped row of a temporal data set, with the bookkeeping columns
/// already stripped from `values`.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicDataInstance {
    pub sequence: u64,
    pub time: u64,
    pub values: DataInstance,
}

/// Wraps a [`DataStream`] whose schema carries `SEQUENCE_ID` and `TIME_ID`
/// columns, validating temporal structure as rows arrive: time indices must
/// strictly increase within a sequence, and all rows of a sequence must be
/// contiguous.
pub struct DynamicDataStream<R> {
    inner: DataStream<R>,
    seq_col: usize,
    time_col: usize,
    attrs: Attributes,
    current: Option<(u64, u64)>,
    finished: HashSet<u64>,
}

/// Opens a temporal ARFF file.
pub fn open_dynamic_arff(
    path: impl AsRef<Path>,
) -> Result<DynamicDataStream<BufReader<File>>> {
    DynamicDataStream::new(super::open_arff(path)?)
}

impl<R: BufRead> DynamicDataStream<R> {
    pub fn new(inner: DataStream<R>) -> Result<Self> {
        let seq_col = inner.attributes().position(SEQUENCE_COLUMN).ok_or_else(|| {
            Error::Schema(format!("temporal data needs a `{SEQUENCE_COLUMN}` column"))
        })?;
        let time_col = inner.attributes().position(TIME_COLUMN).ok_or_else(|| {
            Error::Schema(format!("temporal data needs a `{TIME_COLUMN}` column"))
        })?;
        for col in [seq_col, time_col] {
            if inner.attributes().get(col).unwrap().space != StateSpace::Real {
                return Err(Error::Schema(format!(
                    "`{}` must be a numeric column",
                    inner.attributes().get(col).unwrap().name
                )));
            }
        }
        let attrs = inner.attributes().without(&[seq_col, time_col]);
        Ok(DynamicDataStream { inner, seq_col, time_col, attrs, current: None, finished: HashSet::new() })
    }

    /// The schema with the two bookkeeping columns removed.
    pub fn attributes(&self) -> &Attributes {
        &self.attrs
    }

    fn index_cell(&self, row: &DataInstance, col: usize, what: &str) -> Result<u64> {
        let value = row.get(col).ok_or(Error::Parse {
            line: self.inner.last_line(),
            message: format!("missing {what} value"),
        })?;
        let x = match value {
            Value::Real(x) => *x,
            Value::Index(i) => *i as f64,
        };
        let rounded = x.round();
        if (x - rounded).abs() > 1e-9 || rounded < 0.0 {
            return Err(Error::Parse {
                line: self.inner.last_line(),
                message: format!("{what} value {x} is not a non-negative integer"),
            });
        }
        Ok(rounded as u64)
    }

    fn check_order(&mut self, sequence: u64, time: u64) -> Result<()> {
        match self.current {
            Some((seq, last_time)) if seq == sequence => {
                if time <= last_time {
                    return Err(Error::Order(format!(
                        "time {time} does not advance past {last_time} in sequence {sequence}"
                    )));
                }
            }
            Some((seq, _)) => {
                self.finished.insert(seq);
                if self.finished.contains(&sequence) {
                    return Err(Error::Order(format!(
                        "rows of sequence {sequence} are not contiguous"
                    )));
                }
            }
            None => {}
        }
        self.current = Some((sequence, time));
        Ok(())
    }
}

impl<R: BufRead> Iterator for DynamicDataStream<R> {
    type Item = Result<DynamicDataInstance>;

    fn next(&mut self) -> Option<Self::Item> {
        let row = match self.inner.next()? {
            Ok(row) => row,
            Err(e) => return Some(Err(e)),
        };
        let parsed = (|| {
            let sequence = self.index_cell(&row, self.seq_col, "sequence id")?;
            let time = self.index_cell(&row, self.time_col, "time id")?;
            self.check_order(sequence, time)?;
            Ok(DynamicDataInstance {
                sequence,
                time,
                values: row.without(&[self.seq_col, self.time_col]),
            })
        })();
        Some(parsed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::read_arff;
    use std::io::Cursor;

    fn stream(text: &str) -> DynamicDataStream<Cursor<&str>> {
        DynamicDataStream::new(read_arff(Cursor::new(text)).unwrap()).unwrap()
    }

    const HEADER: &str = "@relation t\n@attribute SEQUENCE_ID real\n@attribute TIME_ID real\n@attribute x real\n@data\n";

    #[test]
    fn strips_bookkeeping_columns() {
        let text = format!("{HEADER}0.0, 0.0, 1.5\n0, 1, 2.5\n1, 0, -1.0\n");
        let rows: Vec<_> = stream(&text).map(|r| r.unwrap()).collect();
        assert_eq!(rows[0].sequence, 0);
        assert_eq!(rows[0].time, 0);
        assert_eq!(rows[0].values.len(), 1);
        assert_eq!(rows[0].values.get(0), Some(&Value::Real(1.5)));
        assert_eq!(rows[2].sequence, 1);
        let attrs = {
            let s = stream(&text);
            s.attributes().clone()
        };
        assert_eq!(attrs.len(), 1);
        assert_eq!(attrs.get(0).unwrap().name, "x");
    }

    #[test]
    fn time_gaps_are_allowed_but_backwards_is_not() {
        let ok = format!("{HEADER}0, 0, 1.0\n0, 5, 2.0\n");
        assert!(stream(&ok).all(|r| r.is_ok()));
        let bad = format!("{HEADER}0, 3, 1.0\n0, 3, 2.0\n");
        let results: Vec<_> = stream(&bad).collect();
        assert!(matches!(results[1], Err(Error::Order(_))));
    }

    #[test]
    fn revisiting_a_sequence_is_an_error() {
        let text = format!("{HEADER}0, 0, 1.0\n1, 0, 2.0\n0, 1, 3.0\n");
        let results: Vec<_> = stream(&text).collect();
        assert!(results[0].is_ok());
        assert!(results[1].is_ok());
        assert!(matches!(results[2], Err(Error::Order(_))));
    }

    #[test]
    fn fractional_ids_are_rejected() {
        let text = format!("{HEADER}0.5, 0, 1.0\n");
        let results: Vec<_> = stream(&text).collect();
        assert!(matches!(results[0], Err(Error::Parse { .. })));
    }

    #[test]
    fn missing_columns_are_a_schema_error() {
        let text = "@relation t\n@attribute TIME_ID real\n@attribute x real\n@data\n";
        let err = DynamicDataStream::new(read_arff(Cursor::new(text)).unwrap());
        assert!(matches!(err, Err(Error::Schema(_))));
    }
}
