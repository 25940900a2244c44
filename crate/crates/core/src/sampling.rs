//! Seeded, stream-split random sampling.
//!
//! Every Monte-Carlo loop is cut into blocks of [`MC_BLOCK`] draws and block
//! `b` reads ChaCha stream `b` of the generator keyed by the [`Seed`]. Block
//! results are combined in block order, so estimates are bit-identical for
//! any number of workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cloud::{Direction, PointCloud};
use crate::parallel::{block_count, map_indexed, MC_BLOCK};

/// Reproducibility key: a 64-bit value plus an independent stream index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed {
    pub value: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seed {
    pub fn new(value: u64) -> Self {
        Self {
            value,
            stream_id: 0,
        }
    }

    pub fn with_stream(self, stream_id: u64) -> Self {
        Self { stream_id, ..self }
    }

    /// Derive an unrelated seed for a sub-task (e.g. "directions" vs "samples").
    pub fn derive(self, tag: u64) -> Self {
        Self {
            value: splitmix64(self.value ^ splitmix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D))),
            stream_id: self.stream_id,
        }
    }

    fn key(&self) -> u64 {
        splitmix64(self.value ^ splitmix64(self.stream_id))
    }

    /// Generator for the whole (value, stream_id) pair.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key())
    }

    /// Generator for Monte-Carlo block `block`.
    pub fn block_rng(&self, block: usize) -> ChaCha8Rng {
        let mut rng = self.rng();
        rng.set_stream(block as u64 + 1);
        rng
    }
}

impl Default for Seed {
    fn default() -> Self {
        Self::new(0)
    }
}

/// Monte-Carlo result paired with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEstimate {
    pub value: f64,
    /// Sample standard deviation divided by √n_samples.
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: Seed,
}

impl OracleEstimate {
    /// Whether `x` lies within `k` standard errors (plus an absolute slack).
    pub fn contains(&self, x: f64, k: f64, slack: f64) -> bool {
        (self.value - x).abs() <= k * self.std_error + slack
    }

    /// Number of standard errors separating the estimate from `x`.
    pub fn z_score(&self, x: f64) -> f64 {
        let d = (self.value - x).abs();
        if self.std_error > 0.0 {
            d / self.std_error
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Mean and standard error of `f(rng)` over `n` draws, blocked by [`MC_BLOCK`].
///
/// Per-block means and squared deviations are merged in block order
/// (Chan's pairwise update), so the result does not depend on worker count.
pub fn mc_mean<F>(n: usize, seed: Seed, f: F) -> OracleEstimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync + Send,
{
    let blocks = block_count(n, MC_BLOCK);
    let stats = map_indexed(blocks, |b| {
        let mut rng = seed.block_rng(b);
        let len = MC_BLOCK.min(n - b * MC_BLOCK);
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for i in 0..len {
            let x = f(&mut rng);
            let d = x - mean;
            mean += d / (i + 1) as f64;
            m2 += d * (x - mean);
        }
        (len as f64, mean, m2)
    });
    let (count, mean, m2) =
        stats
            .into_iter()
            .fold((0.0, 0.0, 0.0), |(na, ma, sa), (nb, mb, sb)| {
                if nb == 0.0 {
                    return (na, ma, sa);
                }
                let n = na + nb;
                let d = mb - ma;
                (n, ma + d * nb / n, sa + sb + d * d * na * nb / n)
            });
    let std_error = if count > 1.0 {
        (m2 / (count - 1.0) / count).sqrt()
    } else {
        0.0
    };
    OracleEstimate {
        value: mean,
        std_error,
        n_samples: n,
        seed,
    }
}

/// Fill `out` with i.i.d. standard normals.
pub(crate) fn fill_normal<R: Rng>(rng: &mut R, out: &mut [f64]) {
    for v in out {
        *v = rng.sample(StandardNormal);
    }
}

/// One uniform direction on S^{N-1}, by normalizing a standard normal vector.
/// A zero draw is redrawn.
pub fn draw_direction<R: Rng>(rng: &mut R, out: &mut [f64]) {
    loop {
        fill_normal(rng, out);
        let n = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            out.iter_mut().for_each(|x| *x /= n);
            return;
        }
    }
}

/// `count` uniform directions in R^N.
pub fn sample_sphere(n_dim: usize, count: usize, seed: Seed) -> Vec<Direction> {
    assert!(n_dim >= 1, "sphere dimension must be at least 1");
    let blocks = map_indexed(block_count(count, MC_BLOCK), |b| {
        let mut rng = seed.block_rng(b);
        let len = MC_BLOCK.min(count - b * MC_BLOCK);
        let mut buf = vec![0.0; n_dim];
        (0..len)
            .map(|_| {
                draw_direction(&mut rng, &mut buf);
                Direction::from_unit(buf.clone())
            })
            .collect::<Vec<_>>()
    });
    blocks.into_iter().flatten().collect()
}

/// `count` i.i.d. N(0, I_N) points.
pub fn sample_normal_cloud(n_dim: usize, count: usize, seed: Seed) -> PointCloud {
    assert!(n_dim >= 1, "dimension must be at least 1");
    let mut data = vec![0.0; n_dim * count];
    crate::parallel::for_each_chunk_mut(&mut data, n_dim * MC_BLOCK, |b, chunk| {
        let mut rng = seed.block_rng(b);
        fill_normal(&mut rng, chunk);
    });
    if count == 0 {
        return PointCloud::empty(n_dim);
    }
    PointCloud::new(data, n_dim).expect("normal samples are finite")
}
