//! Groups a row stream into fixed-size batches.

use crate::error::Result;

/// A contiguous block of rows with its position in the stream.
#[derive(Clone, Debug)]
pub struct Batch<T> {
    pub index: usize,
    pub instances: Vec<T>,
}

impl<T> Batch<T> {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Iterator adaptor produced by [`batches`].
pub struct Batches<I> {
    inner: I,
    size: usize,
    index: usize,
    done: bool,
}

/// Splits a fallible row stream into batches of at most `size` rows; the
/// final batch may be shorter. A row error ends the stream after being
/// yielded.
///
/// # Panics
///
/// Panics if `size` is zero.
pub fn batches<I, T>(stream: I, size: usize) -> Batches<I>
where
    I: Iterator<Item = Result<T>>,
{
    assert!(size > 0, "batch size must be at least 1");
    Batches { inner: stream, size, index: 0, done: false }
}

impl<I, T> Iterator for Batches<I>
where
    I: Iterator<Item = Result<T>>,
{
    type Item = Result<Batch<T>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut instances = Vec::with_capacity(self.size);
        while instances.len() < self.size {
            match self.inner.next() {
                Some(Ok(row)) => instances.push(row),
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(e));
                }
                None => {
                    self.done = true;
                    break;
                }
            }
        }
        if instances.is_empty() {
            return None;
        }
        let index = self.index;
        self.index += 1;
        Some(Ok(Batch { index, instances }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn splits_with_short_tail() {
        let rows = (0..7).map(Ok);
        let got: Vec<_> = batches(rows, 3).map(|b| b.unwrap()).collect();
        assert_eq!(got.len(), 3);
        assert_eq!(got[0].instances, vec![0, 1, 2]);
        assert_eq!(got[2].instances, vec![6]);
        assert_eq!(got[2].index, 2);
    }

    #[test]
    fn exact_multiple_has_no_empty_tail() {
        let rows = (0..6).map(Ok);
        let got: Vec<_> = batches(rows, 3).map(|b| b.unwrap()).collect();
        assert_eq!(got.len(), 2);
    }

    #[test]
    fn row_error_ends_the_stream() {
        let rows = vec![Ok(1), Err(Error::Schema("bad".into())), Ok(2)].into_iter();
        let mut it = batches(rows, 10);
        assert!(it.next().unwrap().is_err());
        assert!(it.next().is_none());
    }

    #[test]
    #[should_panic(expected = "batch size")]
    fn zero_size_panics() {
        let rows = std::iter::empty::<Result<i32>>();
        let _ = batches(rows, 0);
    }
}
