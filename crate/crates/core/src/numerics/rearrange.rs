/// Monotone rearrangement of a curve sampled on an increasing probability grid.
///
/// The rearranged curve is the sorted sample: it is non-decreasing, keeps the
/// multiset of values and leaves an already monotone curve unchanged.
pub fn monotone_rearrange(q: &[f64]) -> Vec<f64> {
    let mut out = q.to_vec();
    out.sort_by(f64::total_cmp);
    out
}

/// Number of adjacent decreases in a curve.
pub fn crossing_count(q: &[f64]) -> usize {
    q.windows(2).filter(|w| w[1] < w[0]).count()
}
