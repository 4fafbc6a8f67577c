//! Per-feature value bins shared by both split-finding modes.
//!
//! Exact mode gives every distinct training value its own bin. Histogram
//! mode merges distinct values into at most `n_bins` quantile buckets. A
//! split between two bins uses the midpoint of the left bin's largest value
//! and the right bin's smallest value, so the two modes agree whenever each
//! bin holds a single distinct value.

#[derive(Debug, Clone)]
pub(crate) struct FeatureBins {
    /// Smallest and largest training value in each bin, ascending.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl FeatureBins {
    /// `values` must be finite. `max_bins = None` means one bin per value.
    pub fn fit(values: &[f64], max_bins: Option<usize>) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut distinct: Vec<(f64, usize)> = Vec::new();
        for v in sorted {
            match distinct.last_mut() {
                Some((last, count)) if *last == v => *count += 1,
                _ => distinct.push((v, 1)),
            }
        }
        let mut bins = FeatureBins {
            lo: Vec::new(),
            hi: Vec::new(),
        };
        match max_bins {
            Some(max) if distinct.len() > max => {
                let n = values.len() as f64;
                let mut cumulative = 0usize;
                let mut open: Option<f64> = None;
                for (i, &(v, c)) in distinct.iter().enumerate() {
                    let lo = *open.get_or_insert(v);
                    cumulative += c;
                    let closed = bins.lo.len();
                    let remaining_values = distinct.len() - i - 1;
                    let remaining_bins = max - closed - 1;
                    let target = (closed + 1) as f64 * n / max as f64;
                    let must_close = remaining_values == 0 || remaining_values <= remaining_bins;
                    if (cumulative as f64 >= target && remaining_bins > 0) || must_close {
                        bins.lo.push(lo);
                        bins.hi.push(v);
                        open = None;
                    }
                }
            }
            _ => {
                for (v, _) in distinct {
                    bins.lo.push(v);
                    bins.hi.push(v);
                }
            }
        }
        bins
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    /// Bin holding `v`; `v` must be a training value.
    pub fn bin_of(&self, v: f64) -> usize {
        self.hi.partition_point(|&h| h < v)
    }

    /// Split threshold between bins `left` and `right` (`left < right`).
    /// Values `<= threshold` go left.
    pub fn threshold(&self, left: usize, right: usize) -> f64 {
        let a = self.hi[left];
        let b = self.lo[right];
        let mid = a / 2.0 + b / 2.0;
        if mid >= a && mid < b {
            mid
        } else {
            a
        }
    }
}
