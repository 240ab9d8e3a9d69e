use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};

/// Gesture instance covering frames `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Segment {
    pub class: usize,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn new(class: usize, start: usize, end: usize) -> Result<Self> {
        if start > end {
            return Err(invalid(format!("segment starts at {start} after its end {end}")));
        }
        Ok(Self { class, start, end })
    }

    pub fn frames(&self) -> usize {
        self.end - self.start + 1
    }
}

/// Gesture segments of one sequence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SegmentLabeling {
    pub sequence: String,
    pub segments: Vec<Segment>,
}

impl SegmentLabeling {
    pub fn new(sequence: impl Into<String>, segments: Vec<Segment>) -> Self {
        Self {
            sequence: sequence.into(),
            segments,
        }
    }

    pub fn classes(&self) -> BTreeSet<usize> {
        self.segments.iter().map(|s| s.class).collect()
    }

    /// One past the last labelled frame.
    pub fn extent(&self) -> usize {
        self.segments.iter().map(|s| s.end + 1).max().unwrap_or(0)
    }

    /// Frames `0..len` marked 1 where `class` is performed.
    pub fn binary(&self, class: usize, len: usize) -> Vec<bool> {
        let mut v = vec![false; len];
        for s in self.segments.iter().filter(|s| s.class == class) {
            for f in s.start..=s.end.min(len.saturating_sub(1)) {
                v[f] = true;
            }
        }
        v
    }
}

/// |a ∧ b| / |a ∨ b|, 0 when both are empty.
pub fn jaccard_index(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid(format!("binary vectors differ in length: {} vs {}", a.len(), b.len())));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

/// Jaccard index of every (sequence, class) pair that appears in the truth
/// or in the prediction of that sequence. A sequence without prediction
/// counts as predicted empty.
pub fn jaccard_pairs(truth: &[SegmentLabeling], predicted: &[SegmentLabeling]) -> Result<Vec<(String, usize, f64)>> {
    let mut truth_by_id: BTreeMap<&str, &SegmentLabeling> = BTreeMap::new();
    for t in truth {
        if truth_by_id.insert(&t.sequence, t).is_some() {
            return Err(invalid(format!("sequence `{}` labelled twice", t.sequence)));
        }
    }
    let mut pred_by_id: BTreeMap<&str, &SegmentLabeling> = BTreeMap::new();
    for p in predicted {
        if !truth_by_id.contains_key(p.sequence.as_str()) {
            return Err(invalid(format!("prediction for unknown sequence `{}`", p.sequence)));
        }
        if pred_by_id.insert(&p.sequence, p).is_some() {
            return Err(invalid(format!("sequence `{}` predicted twice", p.sequence)));
        }
    }
    let empty = SegmentLabeling::default();
    let mut out = Vec::new();
    for (id, t) in truth_by_id {
        let p = pred_by_id.get(id).copied().unwrap_or(&empty);
        let len = t.extent().max(p.extent());
        for class in t.classes().union(&p.classes()) {
            let j = jaccard_index(&t.binary(*class, len), &p.binary(*class, len))?;
            out.push((id.to_string(), *class, j));
        }
    }
    Ok(out)
}

/// Mean Jaccard index over all (sequence, class) pairs, equally weighted;
/// 0 when there is nothing to compare.
pub fn mean_jaccard(truth: &[SegmentLabeling], predicted: &[SegmentLabeling]) -> Result<f64> {
    let pairs = jaccard_pairs(truth, predicted)?;
    if pairs.is_empty() {
        return Ok(0.0);
    }
    Ok(pairs.iter().map(|p| p.2).sum::<f64>() / pairs.len() as f64)
}

/// Mean Jaccard index of each class over the sequences where it appears.
pub fn per_class_jaccard(truth: &[SegmentLabeling], predicted: &[SegmentLabeling]) -> Result<BTreeMap<usize, f64>> {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (_, class, j) in jaccard_pairs(truth, predicted)? {
        let e = acc.entry(class).or_default();
        e.0 += j;
        e.1 += 1;
    }
    Ok(acc.into_iter().map(|(c, (s, n))| (c, s / n as f64)).collect())
}

/// Maximal runs of equal labels other than `background`.
pub fn segments_from_labels(labels: &[usize], background: usize) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut start = 0;
    for t in 1..=labels.len() {
        if t == labels.len() || labels[t] != labels[start] {
            if labels[start] != background {
                out.push(Segment {
                    class: labels[start],
                    start,
                    end: t - 1,
                });
            }
            start = t;
        }
    }
    out
}

/// One segment per line: `sequence_id class start_frame end_frame`.
/// Blank lines and lines starting with `#` are skipped. Sequences are
/// returned sorted by id.
pub fn parse_labelings(text: &str) -> Result<Vec<SegmentLabeling>> {
    let mut by_id: BTreeMap<String, Vec<Segment>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |detail: String| Error::Parse { line: n + 1, detail };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", fields.len())));
        }
        let num = |i: usize, what: &str| -> Result<usize> {
            fields[i]
                .parse()
                .map_err(|_| bad(format!("{what} `{}` is not a non-negative integer", fields[i])))
        };
        let seg = Segment::new(num(1, "class")?, num(2, "start frame")?, num(3, "end frame")?)
            .map_err(|e| bad(e.to_string()))?;
        by_id.entry(fields[0].to_string()).or_default().push(seg);
    }
    Ok(by_id
        .into_iter()
        .map(|(sequence, segments)| SegmentLabeling { sequence, segments })
        .collect())
}

pub fn format_labelings(labelings: &[SegmentLabeling]) -> String {
    let mut out = String::new();
    for l in labelings {
        for s in &l.segments {
            let _ = writeln!(out, "{} {} {} {}", l.sequence, s.class, s.start, s.end);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;
    use std::collections::{BTreeSet, HashSet};

    fn frames(range: std::ops::RangeInclusive<usize>, len: usize) -> Vec<bool> {
        (0..len).map(|f| range.contains(&f)).collect()
    }

    #[test]
    fn worked_examples() {
        let a = frames(1..=10, 20);
        assert_eq!(jaccard_index(&a, &a).unwrap(), 1.0);
        assert_eq!(jaccard_index(&a, &frames(12..=15, 20)).unwrap(), 0.0);
        assert_eq!(jaccard_index(&a, &frames(6..=15, 20)).unwrap(), 5.0 / 15.0);
        assert_eq!(jaccard_index(&[false; 4], &[false; 4]).unwrap(), 0.0);
        assert!(jaccard_index(&a, &a[..5]).is_err());
    }

    #[test]
    fn jaccard_properties() {
        let mut rng = SeededRng::new(1);
        for _ in 0..200 {
            let n = 1 + rng.below(30);
            let a: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.4)).collect();
            let b: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.4)).collect();
            let j = jaccard_index(&a, &b).unwrap();
            assert_eq!(j, jaccard_index(&b, &a).unwrap());
            assert!((0.0..=1.0).contains(&j));
            assert_eq!(j == 1.0, a == b && a.iter().any(|&x| x));
            // Moving a frame of the union into the intersection cannot lower J.
            if let Some(f) = (0..n).find(|&f| a[f] && !b[f]) {
                let mut grown = b.clone();
                grown[f] = true;
                assert!(jaccard_index(&a, &grown).unwrap() >= j);
            }
        }
    }

    #[test]
    fn mean_over_sequences() {
        let truth = vec![
            SegmentLabeling::new("a", vec![Segment::new(1, 0, 9).unwrap()]),
            SegmentLabeling::new("b", vec![Segment::new(2, 0, 9).unwrap()]),
        ];
        assert_eq!(mean_jaccard(&truth, &truth).unwrap(), 1.0);
        assert_eq!(mean_jaccard(&truth, &[]).unwrap(), 0.0);
        let pred = vec![
            SegmentLabeling::new("a", vec![Segment::new(1, 0, 9).unwrap()]),
            SegmentLabeling::new("b", vec![Segment::new(2, 0, 4).unwrap()]),
        ];
        assert_eq!(mean_jaccard(&truth, &pred).unwrap(), 0.75);
        let unknown = vec![SegmentLabeling::new("c", vec![])];
        assert!(mean_jaccard(&truth, &unknown).is_err());
        let per_class = per_class_jaccard(&truth, &pred).unwrap();
        assert_eq!(per_class[&1], 1.0);
        assert_eq!(per_class[&2], 0.5);
    }

    fn random_labeling(rng: &mut SeededRng, id: &str, classes: usize) -> SegmentLabeling {
        let count = rng.below(4);
        let segments = (0..count)
            .map(|_| {
                let start = rng.below(50);
                let end = (start + rng.below(15)).min(49);
                Segment::new(1 + rng.below(classes), start, end).unwrap()
            })
            .collect();
        SegmentLabeling::new(id, segments)
    }

    /// Counts frames as (sequence, class, frame) triples in hash sets.
    fn oracle(truth: &[SegmentLabeling], pred: &[SegmentLabeling]) -> f64 {
        let cells = |ls: &[SegmentLabeling]| -> HashSet<(String, usize, usize)> {
            ls.iter()
                .flat_map(|l| l.segments.iter().flat_map(move |s| (s.start..=s.end).map(move |f| (l.sequence.clone(), s.class, f))))
                .collect()
        };
        let (a, b) = (cells(truth), cells(pred));
        let pairs: BTreeSet<(String, usize)> = a.iter().chain(&b).map(|(s, c, _)| (s.clone(), *c)).collect();
        if pairs.is_empty() {
            return 0.0;
        }
        let mut total = 0.0;
        for (seq, class) in &pairs {
            let pick = |set: &HashSet<(String, usize, usize)>| -> HashSet<usize> {
                set.iter().filter(|(s, c, _)| s == seq && c == class).map(|x| x.2).collect()
            };
            let (x, y) = (pick(&a), pick(&b));
            total += x.intersection(&y).count() as f64 / x.union(&y).count() as f64;
        }
        total / pairs.len() as f64
    }

    #[test]
    fn mean_matches_set_counting_oracle() {
        let mut rng = SeededRng::new(2);
        for _ in 0..1000 {
            let ids = ["s0", "s1", "s2"];
            let n = 1 + rng.below(3);
            let truth: Vec<_> = ids[..n].iter().map(|id| random_labeling(&mut rng, id, 4)).collect();
            let mut pred = Vec::new();
            for id in &ids[..n] {
                if rng.bernoulli(0.8) {
                    pred.push(random_labeling(&mut rng, id, 4));
                }
            }
            let got = mean_jaccard(&truth, &pred).unwrap();
            let want = oracle(&truth, &pred);
            assert_eq!(got, want);
        }
    }

    #[test]
    fn runs_become_segments() {
        let labels = [0, 2, 2, 0, 0, 3, 3, 3, 1, 1];
        let segs = segments_from_labels(&labels, 0);
        assert_eq!(
            segs,
            vec![
                Segment { class: 2, start: 1, end: 2 },
                Segment { class: 3, start: 5, end: 7 },
                Segment { class: 1, start: 8, end: 9 },
            ]
        );
        assert!(segments_from_labels(&[], 0).is_empty());
    }

    #[test]
    fn labeling_text_round_trip() {
        let text = "# truth\nseq2 1 10 20\nseq1 3 0 4\n\nseq2 2 30 31\n";
        let ls = parse_labelings(text).unwrap();
        assert_eq!(ls.len(), 2);
        assert_eq!(ls[0].sequence, "seq1");
        assert_eq!(parse_labelings(&format_labelings(&ls)).unwrap(), ls);
        let err = parse_labelings("a 1 5 2\n").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
        assert!(parse_labelings("a 1 x 2\n").is_err());
    }
}
