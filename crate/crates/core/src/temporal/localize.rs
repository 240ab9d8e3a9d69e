use super::jaccard::Segment;

/// Frames where the motion detector changes state: the first active frame
/// of every activity period and the last active frame before every rest.
/// Sorted and without duplicates.
pub fn switch_points(active: &[bool]) -> Vec<usize> {
    let mut out = Vec::new();
    for t in 1..active.len() {
        match (active[t - 1], active[t]) {
            (false, true) => out.push(t),
            (true, false) => out.push(t - 1),
            _ => {}
        }
    }
    out.dedup();
    out
}

/// Switch point closest to `frame` within `vicinity` frames; the earlier
/// one wins a tie.
fn nearest(switches: &[usize], frame: usize, vicinity: usize) -> Option<usize> {
    let i = switches.partition_point(|&s| s < frame);
    let below = i.checked_sub(1).map(|j| switches[j]);
    let above = switches.get(i).copied();
    let best = match (below, above) {
        (Some(b), Some(a)) => Some(if frame - b <= a - frame { b } else { a }),
        (b, a) => b.or(a),
    }?;
    (best.abs_diff(frame) <= vicinity).then_some(best)
}

/// Moves each segment boundary to the nearest switch point within
/// `vicinity` frames. Boundaries are snapped independently; segments whose
/// start ends up after their end are dropped.
pub fn refine_boundaries(segments: &[Segment], switches: &[usize], vicinity: usize) -> Vec<Segment> {
    debug_assert!(switches.windows(2).all(|w| w[0] < w[1]));
    segments
        .iter()
        .filter_map(|s| {
            let start = nearest(switches, s.start, vicinity).unwrap_or(s.start);
            let end = nearest(switches, s.end, vicinity).unwrap_or(s.end);
            (start <= end).then_some(Segment { start, end, ..*s })
        })
        .collect()
}
