//! Fast evaluation and exact line maximization of the step objectives.
//!
//! Counting concordant pairs for a fixed θ takes O(n log n) with a Fenwick
//! tree over response ranks. Along a line `θ₀ + t·u` every pair switches
//! its indicator at most once, so the exact maximizing intervals come from
//! one sort of the O(n²) breakpoints.

use crate::model::{build_full_coefficients, Criterion, Dataset, ParamVector};

/// `X_i'β` for every observation.
pub(crate) fn index_values(data: &Dataset, beta: &[f64]) -> Vec<f64> {
    (0..data.n())
        .map(|i| data.covariates(i).iter().zip(beta).map(|(x, b)| x * b).sum())
        .collect()
}

struct Fenwick {
    tree: Vec<u64>,
}

impl Fenwick {
    fn new(len: usize) -> Self {
        Self {
            tree: vec![0; len + 1],
        }
    }

    fn add(&mut self, pos: usize) {
        let mut i = pos + 1;
        while i < self.tree.len() {
            self.tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted positions `< pos`.
    fn count_below(&self, pos: usize) -> u64 {
        let mut i = pos;
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Where the chosen point sits when several intervals attain the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum IntervalChoice {
    /// Prefer the interval containing `t = 0`, else the middle one.
    KeepOrigin,
    /// The middle maximizing interval.
    Median,
}

pub(crate) struct StepProblem<'a> {
    data: &'a Dataset,
    /// Dense response ranks (ties share a rank).
    rank: Vec<usize>,
    /// Whether observation `j` can be the smaller member of a counted pair.
    counts_below: Vec<bool>,
    n_ranks: usize,
}

impl<'a> StepProblem<'a> {
    pub fn new(data: &'a Dataset, criterion: Criterion) -> Self {
        let y = data.response();
        let mut order: Vec<usize> = (0..data.n()).collect();
        order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
        let mut rank = vec![0; data.n()];
        let mut r = 0;
        for w in 0..order.len() {
            if w > 0 && y[order[w]] > y[order[w - 1]] {
                r += 1;
            }
            rank[order[w]] = r;
        }
        let counts_below = match criterion {
            Criterion::Rank => vec![true; data.n()],
            Criterion::PartialRank => data.events().to_vec(),
        };
        Self {
            data,
            rank,
            counts_below,
            n_ranks: r + 1,
        }
    }

    #[cfg(test)]
    pub fn normalizer(&self) -> f64 {
        let n = self.data.n() as f64;
        n * (n - 1.0)
    }

    /// Number of ordered pairs with `Y_i > Y_j`, `X_i'β > X_j'β` and (for
    /// the partial criterion) `Δ_j = 1`.
    pub fn count(&self, theta: &[f64]) -> u64 {
        let beta = build_full_coefficients(&ParamVector::new(theta.to_vec()).expect("finite θ"));
        let index = index_values(self.data, &beta);
        let mut order: Vec<usize> = (0..self.data.n()).collect();
        order.sort_by(|&a, &b| index[a].total_cmp(&index[b]));
        let mut tree = Fenwick::new(self.n_ranks);
        let mut total = 0;
        let mut start = 0;
        while start < order.len() {
            let mut end = start + 1;
            while end < order.len() && index[order[end]] == index[order[start]] {
                end += 1;
            }
            for &i in &order[start..end] {
                total += tree.count_below(self.rank[i]);
            }
            for &j in &order[start..end] {
                if self.counts_below[j] {
                    tree.add(self.rank[j]);
                }
            }
            start = end;
        }
        total
    }

    #[cfg(test)]
    pub fn value(&self, theta: &[f64]) -> f64 {
        self.count(theta) as f64 / self.normalizer()
    }

    /// Exact maximization of the count along `θ₀ + t·u`.
    ///
    /// Returns the chosen `t` and the count on its interval. Unbounded
    /// maximizing intervals are entered by one unit past their finite end.
    pub fn line_sweep(&self, theta0: &[f64], dir: &[f64], choice: IntervalChoice) -> (f64, u64) {
        let d = self.data.dim();
        let beta = build_full_coefficients(&ParamVector::new(theta0.to_vec()).expect("finite θ"));
        let index = index_values(self.data, &beta);
        let slope: Vec<f64> = (0..self.data.n())
            .map(|i| self.data.covariates(i)[..d].iter().zip(dir).map(|(x, u)| x * u).sum())
            .collect();
        let y = self.data.response();

        // Each counted pair is 1 on `a t + b > 0`.
        let mut base: u64 = 0;
        let mut events: Vec<(f64, i8)> = Vec::new();
        for i in 0..self.data.n() {
            for j in 0..self.data.n() {
                if !(y[i] > y[j] && self.counts_below[j]) {
                    continue;
                }
                let a = slope[i] - slope[j];
                let b = index[i] - index[j];
                if a == 0.0 {
                    base += (b > 0.0) as u64;
                } else if a > 0.0 {
                    events.push((-b / a, 1));
                } else {
                    base += 1;
                    events.push((-b / a, -1));
                }
            }
        }
        events.sort_by(|p, q| p.0.total_cmp(&q.0));

        // Intervals: (-inf, t_0), (t_0, t_1), ..., (t_last, inf).
        let mut bounds: Vec<f64> = Vec::new();
        let mut values: Vec<i64> = vec![base as i64];
        let mut current = base as i64;
        let mut k = 0;
        while k < events.len() {
            let t = events[k].0;
            while k < events.len() && events[k].0 == t {
                current += events[k].1 as i64;
                k += 1;
            }
            bounds.push(t);
            values.push(current);
        }
        let best = *values.iter().max().expect("at least one interval");
        let winners: Vec<usize> = (0..values.len()).filter(|&w| values[w] == best).collect();
        let lower = |w: usize| if w == 0 { f64::NEG_INFINITY } else { bounds[w - 1] };
        let upper = |w: usize| bounds.get(w).copied().unwrap_or(f64::INFINITY);

        let pick = match choice {
            IntervalChoice::KeepOrigin => winners
                .iter()
                .copied()
                .find(|&w| lower(w) < 0.0 && 0.0 < upper(w))
                .unwrap_or(winners[winners.len() / 2]),
            IntervalChoice::Median => winners[winners.len() / 2],
        };
        let (lo, hi) = (lower(pick), upper(pick));
        let t = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => {
                if choice == IntervalChoice::KeepOrigin && lo < 0.0 {
                    0.0
                } else {
                    lo + 1.0
                }
            }
            (false, true) => {
                if choice == IntervalChoice::KeepOrigin && hi > 0.0 {
                    0.0
                } else {
                    hi - 1.0
                }
            }
            (false, false) => 0.0,
        };
        (t, best as u64)
    }
}
