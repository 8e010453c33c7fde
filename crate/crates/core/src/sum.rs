//! Neumaier-compensated accumulation.

/// Running compensated sum. Error stays O(eps) independent of the number of
/// terms, which matters once groups reach thousands of responses.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub const fn new() -> Self {
        Self { sum: 0.0, comp: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Extend<f64> for NeumaierSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Compensated sum of an iterator.
pub fn sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut acc = NeumaierSum::new();
    acc.extend(iter);
    acc.value()
}

/// Compensated dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    sum(a.iter().zip(b).map(|(x, y)| x * y))
}

/// Prefix sums `C(0) = 0, C(i) = x_1 + ... + x_i`, length `xs.len() + 1`.
pub fn prefix_sums(xs: &[f64]) -> alloc::vec::Vec<f64> {
    let mut out = alloc::vec::Vec::with_capacity(xs.len() + 1);
    let mut acc = NeumaierSum::new();
    out.push(0.0);
    for &x in xs {
        acc.add(x);
        out.push(acc.value());
    }
    out
}
