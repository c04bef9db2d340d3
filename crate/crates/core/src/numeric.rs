//! Small numerical helpers shared by the statistics and calibration code.

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
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

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Aitken delta-squared extrapolation of the last three terms of a sequence
/// whose error decays geometrically. Returns `None` when the successive
/// differences are not shrinking with a common sign (no geometric tail to
/// extrapolate) or are below `noise_floor`.
pub fn aitken(x0: f64, x1: f64, x2: f64, noise_floor: f64) -> Option<f64> {
    let d1 = x1 - x0;
    let d2 = x2 - x1;
    if d1.abs() <= noise_floor || d2.abs() <= noise_floor {
        return None;
    }
    let ratio = d2 / d1;
    if !(0.0..1.0).contains(&ratio) {
        return None;
    }
    Some(x2 - d2 * d2 / (d2 - d1))
}

/// Binomial coefficient C(k, i) as a float.
pub fn binomial(k: u32, i: u32) -> f64 {
    if i > k {
        return 0.0;
    }
    let i = i.min(k - i);
    (1..=i).fold(1.0, |acc, j| acc * f64::from(k - i + j) / f64::from(j))
}

/// Generalized binomial coefficient (x choose j) = prod_{i=1}^{j} (x - j + i) / i.
pub fn generalized_binomial(x: f64, j: u32) -> f64 {
    (1..=j).fold(1.0, |acc, i| {
        acc * (x - f64::from(j) + f64::from(i)) / f64::from(i)
    })
}
