//! Deterministic random streams.
//!
//! Each path `k` of a Monte Carlo run gets its own ChaCha8 generator seeded
//! by a SplitMix64 mix of `(seed, k)`. Results are then reduced in index
//! order, so the output depends only on `(seed, paths)` and never on how
//! many threads did the work.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for substream `k` of a run seeded with `seed`.
pub fn stream_seed(seed: u64, k: u64) -> u64 {
    mix64(mix64(seed) ^ k.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, k))
}

/// Pair of independent standard normals by the Marsaglia polar method.
pub fn normal_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    loop {
        let u = 2.0 * rng.random::<f64>() - 1.0;
        let v = 2.0 * rng.random::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            let f = (-2.0 * s.ln() / s).sqrt();
            return (u * f, v * f);
        }
    }
}

/// Fills `out` with independent standard normals.
pub fn fill_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    let mut k = 0;
    while k < out.len() {
        let (a, b) = normal_pair(rng);
        out[k] = a;
        if k + 1 < out.len() {
            out[k + 1] = b;
        }
        k += 2;
    }
}

/// Uniform point on the unit sphere S^{n-1}.
pub fn sphere_direction<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    match out.len() {
        1 => out[0] = if rng.random::<bool>() { 1.0 } else { -1.0 },
        2 => {
            let a = std::f64::consts::TAU * rng.random::<f64>();
            out[0] = a.cos();
            out[1] = a.sin();
        }
        _ => loop {
            fill_normal(rng, out);
            let r = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r > 1e-12 {
                out.iter_mut().for_each(|v| *v /= r);
                return;
            }
        },
    }
}

/// Uniform sample in the open interval (0, 1).
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Running mean and variance over an ordered sequence (Welford).
#[derive(Clone, Copy, Debug, Default)]
pub struct MeanVar {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanVar {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Self::default();
        xs.iter().for_each(|&x| m.push(x));
        m
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n > 1 {
            self.m2 / (self.n - 1) as f64
        } else {
            0.0
        }
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.n > 0 {
            (self.variance() / self.n as f64).sqrt()
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = stream(7, 0).random();
        let b: u64 = stream(7, 1).random();
        let c: u64 = stream(7, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
        assert_ne!(stream_seed(1, 0), stream_seed(0, 1));
    }

    #[test]
    fn polar_normals_have_unit_variance() {
        let mut rng = stream(1, 0);
        let mut xs = vec![0.0; 200_000];
        fill_normal(&mut rng, &mut xs);
        let m = MeanVar::from_slice(&xs);
        assert!(m.mean().abs() < 0.01);
        assert!((m.variance() - 1.0).abs() < 0.01);
    }

    #[test]
    fn sphere_directions_are_unit_and_centered() {
        let mut rng = stream(3, 0);
        for n in 1..=4 {
            let mut acc = vec![0.0; n];
            let mut d = vec![0.0; n];
            for _ in 0..20_000 {
                sphere_direction(&mut rng, &mut d);
                let r: f64 = d.iter().map(|v| v * v).sum();
                assert!((r - 1.0).abs() < 1e-12);
                acc.iter_mut().zip(&d).for_each(|(a, v)| *a += v);
            }
            assert!(acc.iter().all(|a| (a / 20_000.0).abs() < 0.03), "n={n}");
        }
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
        let m = MeanVar::from_slice(&xs);
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((m.mean() - mean).abs() < 1e-14);
        assert!((m.variance() - var).abs() < 1e-12);
    }
}
