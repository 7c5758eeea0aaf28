use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::torus::fourier::{GridField, SpectralField};
use crate::torus::lattice::{FrequencyBox, TorusLattice};
use crate::torus::symbol::MaternLike;

/// Counter-based stream for one instance: ChaCha8 keyed by the master seed,
/// with the instance index selecting the stream.
pub fn instance_rng(seed: u64, instance: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(instance);
    rng
}

/// Representatives `m` of `{m, -m}` pairs with `0 < |m|_∞ ≤ k`, ordered by
/// shell `|m|_∞` and lexicographically within a shell. Shell ordering makes
/// the draw for a smaller box a prefix of the draw for a larger one.
pub fn half_space_modes(d: usize, k: u64) -> Vec<Vec<i64>> {
    let k = k as i64;
    if d == 1 {
        return (1..=k).map(|m| vec![m]).collect();
    }
    let mut out = Vec::new();
    let mut cur = vec![-k; d];
    loop {
        if let Some(first) = cur.iter().find(|&&c| c != 0) {
            if *first > 0 {
                out.push(cur.clone());
            }
        }
        let mut i = d;
        loop {
            if i == 0 {
                out.sort_by_key(|m| m.iter().map(|c| c.abs()).max().unwrap_or(0));
                return out;
            }
            i -= 1;
            if cur[i] < k {
                cur[i] += 1;
                break;
            }
            cur[i] = -k;
        }
    }
}

/// One Karhunen–Loève draw `Σ_{0<|m|_∞≤K} √λ_m ξ_m e^{2πi⟨m,x⟩}`, stored on the
/// half space; the conjugate partners are implied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlDraw {
    pub d: usize,
    pub half_width: u64,
    pub modes: Vec<Vec<i64>>,
    pub coeffs: Vec<Complex64>,
}

pub fn kl_draw(sym: &MaternLike, d: usize, half_width: u64, seed: u64, instance: u64) -> KlDraw {
    let modes = half_space_modes(d, half_width);
    let mut rng = instance_rng(seed, instance);
    let coeffs = modes
        .iter()
        .map(|m| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            Complex64::new(a, b) * (sym.at(m) / 2.0).sqrt()
        })
        .collect();
    KlDraw { d, half_width, modes, coeffs }
}

impl KlDraw {
    /// `T_q` of the full (Hermitian) coefficient set.
    pub fn fold(&self, q: u32) -> SpectralField {
        let bx = FrequencyBox::new(q, self.d);
        let mut out = SpectralField::zeros(q, self.d);
        let mut neg = vec![0i64; self.d];
        for (m, c) in self.modes.iter().zip(&self.coeffs) {
            out.coeffs[bx.index_of(m)] += c;
            for (n, v) in neg.iter_mut().zip(m) {
                *n = -v;
            }
            out.coeffs[bx.index_of(&neg)] += c.conj();
        }
        out
    }

    pub fn evaluate(&self, lattice: TorusLattice) -> Result<GridField> {
        GridField::torus(lattice, self.fold(lattice.q).lattice_values())
    }

    /// Coefficient at an arbitrary frequency (zero outside the box).
    pub fn coefficient(&self, m: &[i64]) -> Complex64 {
        let sign = m.iter().find(|&&c| c != 0).copied().unwrap_or(0);
        if sign == 0 || m.iter().any(|c| c.unsigned_abs() > self.half_width) {
            return Complex64::new(0.0, 0.0);
        }
        let key: Vec<i64> = if sign > 0 { m.to_vec() } else { m.iter().map(|c| -c).collect() };
        let pos = if self.d == 1 {
            Some(key[0] as usize - 1)
        } else {
            self.modes.iter().position(|v| *v == key)
        };
        match pos {
            Some(i) if sign > 0 => self.coeffs[i],
            Some(i) => self.coeffs[i].conj(),
            None => Complex64::new(0.0, 0.0),
        }
    }
}

/// Karhunen–Loève sample on `X_q`, truncated to `|m|_∞ ≤ half_width`.
pub fn kl_sample(
    sym: &MaternLike,
    lattice: TorusLattice,
    half_width: u64,
    seed: u64,
    instance: u64,
) -> Result<GridField> {
    kl_draw(sym, lattice.d, half_width, seed, instance).evaluate(lattice)
}
