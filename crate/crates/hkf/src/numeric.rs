//! Small numerical kernels shared across modules.

use std::f64::consts::{PI, TAU};

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for x in it {
        acc.add(x);
    }
    acc.value()
}

/// `cos(2πf)` with the argument reduced to an octant before scaling by 2π.
#[inline]
pub fn cos_2pi(f: f64) -> f64 {
    let a = (f - f.round()).abs();
    if a <= 0.125 {
        (TAU * a).cos()
    } else if a <= 0.375 {
        (TAU * (0.25 - a)).sin()
    } else {
        -(TAU * (0.5 - a)).cos()
    }
}

/// `sin(2πf)`, same reduction as [`cos_2pi`].
#[inline]
pub fn sin_2pi(f: f64) -> f64 {
    let g = f - f.round();
    let a = g.abs();
    let v = if a <= 0.125 {
        (TAU * a).sin()
    } else if a <= 0.375 {
        (TAU * (0.25 - a)).cos()
    } else {
        (TAU * (0.5 - a)).sin()
    };
    v.copysign(g)
}

/// Fractional part of `m·r`, exact up to one rounding via a fused product.
#[inline]
pub fn frac_mul(m: u64, r: f64) -> f64 {
    let mf = m as f64;
    let p = mf * r;
    let e = mf.mul_add(r, -p);
    let f = (p - p.floor()) + e;
    f - f.floor()
}

/// Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = mid - half * z;
        x[n - 1 - i] = mid + half * z;
        let wi = 2.0 * half / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `B_{2j}/(2j)!` for `j = 1..=8`.
pub const BERNOULLI_OVER_FACTORIAL: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
];

/// Row `n` of the table holds `j!·S(n, j)` (Stirling numbers of the second
/// kind scaled by `j!`), `n ≤ n_max`.
pub fn ordered_set_partitions(n_max: usize) -> Vec<Vec<f64>> {
    let mut s = vec![vec![0.0f64; n_max + 1]; n_max + 1];
    s[0][0] = 1.0;
    for n in 1..=n_max {
        for k in 1..=n {
            s[n][k] = k as f64 * s[n - 1][k] + s[n - 1][k - 1];
        }
    }
    let mut fact = 1.0;
    for k in 0..=n_max {
        if k > 0 {
            fact *= k as f64;
        }
        for row in s.iter_mut() {
            row[k] *= fact;
        }
    }
    s
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance (zero for fewer than two values).
pub fn variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}


/// Cholesky factor of a symmetric positive definite band matrix.
#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    /// `l[i·(bw+1) + k] = L[i, i-k]`.
    l: Vec<f64>,
}

impl BandCholesky {
    /// Factor the matrix whose lower band entries are `entry(i, j)`,
    /// `j ≤ i ≤ j + bw`.
    pub fn new(n: usize, bw: usize, entry: impl Fn(usize, usize) -> f64) -> crate::Result<Self> {
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = entry(i, j);
                for k in lo.max(j.saturating_sub(bw))..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(crate::Error::NotPositiveDefinite { pivot: i });
                    }
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + (i - j)] = s / l[j * w];
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.l[i * (self.bw + 1)].ln()).sum::<f64>()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let w = self.bw + 1;
        let mut y = b.to_vec();
        for i in 0..self.n {
            let mut s = y[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.l[i * w + (i - k)] * y[k];
            }
            y[i] = s / self.l[i * w];
        }
        for i in (0..self.n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + w).min(self.n) {
                s -= self.l[k * w + (k - i)] * y[k];
            }
            y[i] = s / self.l[i * w];
        }
        y
    }
}
