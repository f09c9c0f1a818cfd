//! Compensated (Neumaier) summation for the O(n²) pair sums.

#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    carry: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

/// A fixed-length vector of compensated sums.
#[derive(Debug, Clone)]
pub struct NeumaierVec {
    parts: Vec<Neumaier>,
}

impl NeumaierVec {
    pub fn zeros(len: usize) -> Self {
        Self {
            parts: vec![Neumaier::new(); len],
        }
    }

    #[inline]
    pub fn add_at(&mut self, k: usize, x: f64) {
        self.parts[k].add(x);
    }

    pub fn add_slice(&mut self, xs: &[f64]) {
        for (p, &x) in self.parts.iter_mut().zip(xs) {
            p.add(x);
        }
    }

    pub fn totals(&self) -> Vec<f64> {
        self.parts.iter().map(Neumaier::total).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_terms() {
        let mut acc = Neumaier::new();
        for &x in &[1.0, 1e100, 1.0, -1e100] {
            acc.add(x);
        }
        assert_eq!(acc.total(), 2.0);
    }

    #[test]
    fn many_small_terms() {
        let mut acc = Neumaier::new();
        let mut naive = 0.0_f64;
        for _ in 0..1_000_000 {
            acc.add(0.1);
            naive += 0.1;
        }
        assert!((acc.total() - 100_000.0).abs() < 1e-9);
        assert!((naive - 100_000.0).abs() > (acc.total() - 100_000.0).abs());
    }
}
