use serde::{Deserialize, Serialize};

/// Reduce an integer into the alias cell `[-n/2, n/2 - 1]` of `nZ`.
#[inline]
pub fn canonical_component(m: i64, n: i64) -> i64 {
    let r = m.rem_euclid(n);
    if n > 1 && r >= n / 2 {
        r - n
    } else {
        r
    }
}

/// The alias cell `B_q^d`: integer vectors with every component in
/// `[-2^{q-1}, 2^{q-1} - 1]`.
///
/// Coefficient arrays indexed by a box use the FFT layout: component `m_k`
/// is stored at `m_k mod 2^q`, with the first axis varying slowest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrequencyBox {
    pub q: u32,
    pub d: usize,
}

pub fn frequency_box(q: u32, d: usize) -> FrequencyBox {
    FrequencyBox::new(q, d)
}

impl FrequencyBox {
    pub fn new(q: u32, d: usize) -> Self {
        assert!(d >= 1, "dimension must be positive");
        assert!(q as usize * d <= 40, "box too large");
        Self { q, d }
    }

    pub fn side(&self) -> usize {
        1usize << self.q
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn canonical(&self, m: &[i64]) -> Vec<i64> {
        let n = self.side() as i64;
        m.iter().map(|&c| canonical_component(c, n)).collect()
    }

    pub fn contains(&self, m: &[i64]) -> bool {
        m.len() == self.d && self.canonical(m) == m
    }

    /// Storage slot of the class of `m` (any representative).
    pub fn index_of(&self, m: &[i64]) -> usize {
        let n = self.side() as i64;
        m.iter()
            .fold(0usize, |acc, &c| acc * self.side() + c.rem_euclid(n) as usize)
    }

    /// Canonical representative stored at `index`.
    pub fn frequency_at(&self, index: usize) -> Vec<i64> {
        let n = self.side();
        let mut out = vec![0i64; self.d];
        let mut rest = index;
        for k in (0..self.d).rev() {
            out[k] = canonical_component((rest % n) as i64, n as i64);
            rest /= n;
        }
        out
    }

    /// All members in lexicographic order.
    pub fn members(&self) -> Vec<Vec<i64>> {
        let n = self.side() as i64;
        let lo = if n > 1 { -n / 2 } else { 0 };
        let mut out = Vec::with_capacity(self.len());
        let mut cur = vec![lo; self.d];
        loop {
            out.push(cur.clone());
            let mut k = self.d;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                if cur[k] < lo + n - 1 {
                    cur[k] += 1;
                    break;
                }
                cur[k] = lo;
            }
        }
    }
}

/// Equispaced lattice `X_q = {j 2^{-q}}` on the torus, row-major in `j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusLattice {
    pub q: u32,
    pub d: usize,
}

impl TorusLattice {
    pub fn new(q: u32, d: usize) -> Self {
        assert!(d >= 1, "dimension must be positive");
        assert!(q as usize * d <= 40, "lattice too large");
        Self { q, d }
    }

    pub fn side(&self) -> usize {
        1usize << self.q
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn frequency_box(&self) -> FrequencyBox {
        FrequencyBox::new(self.q, self.d)
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let n = self.side();
        let mut out = vec![0usize; self.d];
        let mut rest = flat;
        for k in (0..self.d).rev() {
            out[k] = rest % n;
            rest /= n;
        }
        out
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let h = 1.0 / self.side() as f64;
        self.multi_index(flat).into_iter().map(|j| j as f64 * h).collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Flat indices of the points of `X_{q-1}`, listed in that lattice's order.
    pub fn coarse_indices(&self) -> Vec<usize> {
        assert!(self.q >= 1, "level 0 has no coarser lattice");
        (0..self.len())
            .filter(|&i| self.multi_index(i).iter().all(|j| j % 2 == 0))
            .collect()
    }

    /// Indices of `X_r` inside this lattice, for `r <= q`.
    pub fn sublattice_indices(&self, r: u32) -> Vec<usize> {
        assert!(r <= self.q);
        let stride = 1usize << (self.q - r);
        (0..self.len())
            .filter(|&i| self.multi_index(i).iter().all(|j| j % stride == 0))
            .collect()
    }
}
