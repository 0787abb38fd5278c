//! Row-major indexing of joint discrete-parent configurations.
//!
//! A variable with discrete parents `(P1, P2, ...)` in parent-list order has
//! one parameter row per joint configuration. Configuration index is
//! row-major: the first parent varies slowest. All tables, serialized
//! parameter arrays, and learned blocks share this convention.

/// Product of cardinalities; 1 for an empty list (single configuration).
pub(crate) fn config_count(cards: &[usize]) -> usize {
    cards.iter().product()
}

/// Row-major rank of `values` under `cards`.
pub(crate) fn config_index(cards: &[usize], values: &[usize]) -> usize {
    debug_assert_eq!(cards.len(), values.len());
    let mut idx = 0;
    for (v, c) in values.iter().zip(cards) {
        debug_assert!(v < c);
        idx = idx * c + v;
    }
    idx
}

/// Inverse of [`config_index`].
pub(crate) fn config_unrank(cards: &[usize], mut idx: usize) -> Vec<usize> {
    let mut values = vec![0usize; cards.len()];
    for i in (0..cards.len()).rev() {
        values[i] = idx % cards[i];
        idx /= cards[i];
    }
    values
}

/// Iterates all configurations in row-major order.
pub(crate) fn configs(cards: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    (0..config_count(cards)).map(move |i| config_unrank(cards, i))
}
