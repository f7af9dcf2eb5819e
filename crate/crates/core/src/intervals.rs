//! Sorted, disjoint sets of inclusive sample-index intervals.

use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{Error, Result};

/// Inclusive sample range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end, "interval start {start} > end {end}");
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, sample: usize) -> bool {
        self.start <= sample && sample <= self.end
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// Canonical interval set over the domain `[0, domain_len)`.
///
/// Intervals are sorted by start; overlapping or adjacent intervals are
/// always merged, so two sets covering the same samples compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
    domain_len: usize,
}

impl IntervalSet {
    pub fn empty(domain_len: usize) -> Self {
        Self {
            intervals: Vec::new(),
            domain_len,
        }
    }

    /// The whole domain as one interval (empty if `domain_len == 0`).
    pub fn full(domain_len: usize) -> Self {
        let intervals = if domain_len == 0 {
            Vec::new()
        } else {
            vec![Interval::new(0, domain_len - 1)]
        };
        Self {
            intervals,
            domain_len,
        }
    }

    /// Builds a canonical set from arbitrary intervals. Intervals reaching
    /// past the domain are an error.
    pub fn from_intervals<I>(domain_len: usize, intervals: I) -> Result<Self>
    where
        I: IntoIterator<Item = Interval>,
    {
        let mut v: Vec<Interval> = intervals.into_iter().collect();
        if let Some(bad) = v.iter().find(|iv| iv.start > iv.end || iv.end >= domain_len) {
            return Err(Error::Contract(format!(
                "interval [{}, {}] outside domain of {domain_len} samples",
                bad.start, bad.end
            )));
        }
        v.sort_unstable();
        Ok(Self {
            intervals: merge_sorted(v),
            domain_len,
        })
    }

    /// Like [`IntervalSet::from_intervals`] but clips intervals to the domain
    /// instead of failing.
    pub fn from_clipped<I>(domain_len: usize, intervals: I) -> Self
    where
        I: IntoIterator<Item = Interval>,
    {
        let clipped = intervals
            .into_iter()
            .filter(|iv| iv.start < domain_len)
            .map(|iv| Interval::new(iv.start, iv.end.min(domain_len - 1)));
        Self::from_intervals(domain_len, clipped).expect("clipped intervals are in-domain")
    }

    /// Runs of `true` in a per-sample mask.
    pub fn from_mask(mask: &[bool]) -> Self {
        let mut intervals = Vec::new();
        let mut start = None;
        for (i, &m) in mask.iter().enumerate() {
            match (m, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    intervals.push(Interval::new(s, i - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            intervals.push(Interval::new(s, mask.len() - 1));
        }
        Self {
            intervals,
            domain_len: mask.len(),
        }
    }

    pub fn to_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.domain_len];
        for iv in &self.intervals {
            mask[iv.start..=iv.end].fill(true);
        }
        mask
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn domain_len(&self) -> usize {
        self.domain_len
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Number of samples covered.
    pub fn covered(&self) -> usize {
        self.intervals.iter().map(Interval::len).sum()
    }

    pub fn contains(&self, sample: usize) -> bool {
        let idx = self.intervals.partition_point(|iv| iv.end < sample);
        self.intervals.get(idx).is_some_and(|iv| iv.start <= sample)
    }

    /// True when every sample of `iv` is covered by this set.
    pub fn covers(&self, iv: Interval) -> bool {
        let idx = self.intervals.partition_point(|x| x.end < iv.start);
        self.intervals
            .get(idx)
            .is_some_and(|x| x.start <= iv.start && iv.end <= x.end)
    }

    /// True when any sample of `iv` is covered by this set.
    pub fn intersects(&self, iv: Interval) -> bool {
        let idx = self.intervals.partition_point(|x| x.end < iv.start);
        self.intervals.get(idx).is_some_and(|x| x.overlaps(&iv))
    }

    /// Minimal sorted disjoint cover of all inputs.
    pub fn union(sets: &[IntervalSet]) -> Result<Self> {
        let Some(first) = sets.first() else {
            return Err(Error::degenerate("union of zero interval sets"));
        };
        let domain_len = first.domain_len;
        if let Some(s) = sets.iter().find(|s| s.domain_len != domain_len) {
            return Err(Error::incompatible(format!(
                "interval domains differ: {domain_len} vs {}",
                s.domain_len
            )));
        }
        let mut all: Vec<Interval> = sets.iter().flat_map(|s| s.intervals.iter().copied()).collect();
        all.sort_unstable();
        Ok(Self {
            intervals: merge_sorted(all),
            domain_len,
        })
    }

    /// The gaps between intervals over `[0, domain_len)`.
    pub fn complement(&self) -> Self {
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        let mut cursor = 0;
        for iv in &self.intervals {
            if iv.start > cursor {
                out.push(Interval::new(cursor, iv.start - 1));
            }
            cursor = iv.end + 1;
        }
        if cursor < self.domain_len {
            out.push(Interval::new(cursor, self.domain_len - 1));
        }
        Self {
            intervals: out,
            domain_len: self.domain_len,
        }
    }

    /// Text form: `#` header lines followed by one `start end` pair per line.
    pub fn to_text(&self, subject_id: &str, fs: u32) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# subject_id={subject_id}");
        let _ = writeln!(out, "# fs={fs}");
        let _ = writeln!(out, "# domain_len={}", self.domain_len);
        for iv in &self.intervals {
            let _ = writeln!(out, "{} {}", iv.start, iv.end);
        }
        out
    }

    /// Parses [`IntervalSet::to_text`] output, returning `(subject_id, fs, set)`.
    pub fn from_text(reader: impl BufRead) -> Result<(String, u32, Self)> {
        let mut subject = None;
        let mut fs = None;
        let mut domain = None;
        let mut intervals = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                let Some((key, value)) = header.trim().split_once('=') else {
                    continue;
                };
                let bad = || Error::format(format!("bad interval header `{line}`"));
                match key.trim() {
                    "subject_id" => subject = Some(value.trim().to_string()),
                    "fs" => fs = Some(value.trim().parse().map_err(|_| bad())?),
                    "domain_len" => domain = Some(value.trim().parse().map_err(|_| bad())?),
                    _ => {}
                }
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::format(format!("bad interval line `{line}`")));
            };
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::format(format!("bad interval line `{line}`")))
            };
            let (start, end) = (parse(a)?, parse(b)?);
            if start > end {
                return Err(Error::format(format!("interval start after end: `{line}`")));
            }
            intervals.push(Interval::new(start, end));
        }
        let subject = subject.ok_or_else(|| Error::format("interval file lacks subject_id"))?;
        let fs = fs.ok_or_else(|| Error::format("interval file lacks fs"))?;
        let domain = domain.ok_or_else(|| Error::format("interval file lacks domain_len"))?;
        let set = Self::from_intervals(domain, intervals)
            .map_err(|e| Error::format(e.to_string()))?;
        Ok((subject, fs, set))
    }
}

fn merge_sorted(sorted: Vec<Interval>) -> Vec<Interval> {
    let mut out: Vec<Interval> = Vec::with_capacity(sorted.len());
    for iv in sorted {
        match out.last_mut() {
            Some(last) if iv.start <= last.end.saturating_add(1) => {
                last.end = last.end.max(iv.end);
            }
            _ => out.push(iv),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(domain: usize, ivs: &[(usize, usize)]) -> IntervalSet {
        IntervalSet::from_intervals(domain, ivs.iter().map(|&(s, e)| Interval::new(s, e))).unwrap()
    }

    #[test]
    fn union_of_empties_is_empty() {
        let u = IntervalSet::union(&[IntervalSet::empty(10), IntervalSet::empty(10)]).unwrap();
        assert!(u.is_empty());
    }

    #[test]
    fn overlapping_union_merges() {
        let u = IntervalSet::union(&[set(20, &[(0, 9)]), set(20, &[(5, 14)])]).unwrap();
        assert_eq!(u.intervals(), &[Interval::new(0, 14)]);
    }

    #[test]
    fn adjacent_intervals_merge() {
        assert_eq!(set(20, &[(0, 4), (5, 9)]).intervals(), &[Interval::new(0, 9)]);
        assert_eq!(set(20, &[(0, 4), (6, 9)]).intervals().len(), 2);
    }

    #[test]
    fn union_rejects_mismatched_domains() {
        assert!(matches!(
            IntervalSet::union(&[IntervalSet::empty(10), IntervalSet::empty(11)]),
            Err(Error::Incompatible(_))
        ));
    }

    #[test]
    fn complement_edge_cases() {
        assert_eq!(IntervalSet::empty(100).complement(), IntervalSet::full(100));
        assert!(IntervalSet::full(100).complement().is_empty());
        assert_eq!(
            set(10, &[(2, 3), (7, 9)]).complement().intervals(),
            &[Interval::new(0, 1), Interval::new(4, 6)]
        );
    }

    #[test]
    fn out_of_domain_rejected() {
        assert!(IntervalSet::from_intervals(10, [Interval::new(5, 10)]).is_err());
        let c = IntervalSet::from_clipped(10, [Interval::new(5, 30), Interval::new(40, 50)]);
        assert_eq!(c.intervals(), &[Interval::new(5, 9)]);
    }

    #[test]
    fn text_roundtrip() {
        let s = set(1000, &[(0, 99), (500, 750)]);
        let text = s.to_text("S007", 4000);
        let (id, fs, back) = IntervalSet::from_text(text.as_bytes()).unwrap();
        assert_eq!((id.as_str(), fs), ("S007", 4000));
        assert_eq!(back, s);
    }

    fn arb_set(domain: usize) -> impl Strategy<Value = IntervalSet> {
        prop::collection::vec((0..domain, 0usize..40), 0..12).prop_map(move |raw| {
            IntervalSet::from_clipped(
                domain,
                raw.into_iter().map(|(s, l)| Interval::new(s, s + l)),
            )
        })
    }

    proptest! {
        #[test]
        fn union_matches_bitmap_or(sets in prop::collection::vec(arb_set(300), 1..5)) {
            let u = IntervalSet::union(&sets).unwrap();
            let mut mask = vec![false; 300];
            for s in &sets {
                for (m, v) in mask.iter_mut().zip(s.to_mask()) {
                    *m |= v;
                }
            }
            prop_assert_eq!(u, IntervalSet::from_mask(&mask));
        }

        #[test]
        fn complement_is_an_involution(s in arb_set(257)) {
            prop_assert_eq!(s.complement().complement(), s.clone());
            let c = s.complement();
            prop_assert_eq!(c.covered() + s.covered(), 257);
        }

        #[test]
        fn canonical_form(s in arb_set(500)) {
            for w in s.intervals().windows(2) {
                prop_assert!(w[0].end + 1 < w[1].start);
            }
            prop_assert!(s.intervals().iter().all(|iv| iv.end < 500));
        }

        #[test]
        fn contains_matches_mask(s in arb_set(200), probe in 0usize..200) {
            prop_assert_eq!(s.contains(probe), s.to_mask()[probe]);
        }
    }
}
