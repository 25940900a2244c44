//! Training data: synthetic generators and the IDX (MNIST) file format.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::sampling::{draw_direction, Seed};

/// Mixture of 8 isotropic Gaussians with means on a circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EightGaussians {
    pub radius: f64,
    pub sigma: f64,
}

impl Default for EightGaussians {
    fn default() -> Self {
        Self {
            radius: 2.0,
            sigma: 0.1,
        }
    }
}

impl EightGaussians {
    pub fn modes(&self) -> Vec<[f64; 2]> {
        (0..8)
            .map(|i| {
                let a = i as f64 * PI / 4.0;
                [self.radius * a.cos(), self.radius * a.sin()]
            })
            .collect()
    }

    pub fn sample(&self, count: usize, seed: Seed) -> PointCloud {
        let modes = self.modes();
        let mut rng = seed.rng();
        let mut data = Vec::with_capacity(2 * count);
        for _ in 0..count {
            let m = modes[rng.random_range(0..8)];
            for c in m {
                let z: f64 = rng.sample(StandardNormal);
                data.push(c + self.sigma * z);
            }
        }
        finish(data, 2)
    }

    /// Fraction of points within `k` standard deviations of some mode.
    pub fn mode_coverage(&self, cloud: &PointCloud, k: f64) -> f64 {
        if cloud.is_empty() {
            return 0.0;
        }
        let modes = self.modes();
        let hits = cloud
            .points()
            .filter(|p| {
                modes.iter().any(|m| {
                    ((p[0] - m[0]).powi(2) + (p[1] - m[1]).powi(2)).sqrt() <= k * self.sigma
                })
            })
            .count();
        hits as f64 / cloud.len() as f64
    }
}

/// Two interleaved half circles with Gaussian noise.
pub fn two_moons(count: usize, noise: f64, seed: Seed) -> PointCloud {
    let mut rng = seed.rng();
    let mut data = Vec::with_capacity(2 * count);
    for i in 0..count {
        let t = PI * rng.random::<f64>();
        let (x, y) = if i % 2 == 0 {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        data.push(x + noise * nx);
        data.push(y + noise * ny);
    }
    finish(data, 2)
}

/// Points on the sphere of the given radius in R^N, with radial Gaussian noise.
pub fn spherical_shell(
    n_dim: usize,
    count: usize,
    radius: f64,
    noise: f64,
    seed: Seed,
) -> PointCloud {
    let mut rng = seed.rng();
    let mut data = Vec::with_capacity(n_dim * count);
    let mut dir = vec![0.0; n_dim];
    for _ in 0..count {
        draw_direction(&mut rng, &mut dir);
        let z: f64 = rng.sample(StandardNormal);
        let r = radius + noise * z;
        data.extend(dir.iter().map(|d| r * d));
    }
    finish(data, n_dim)
}

fn finish(data: Vec<f64>, dim: usize) -> PointCloud {
    if data.is_empty() {
        PointCloud::empty(dim)
    } else {
        PointCloud::new(data, dim).expect("finite samples")
    }
}

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_be_bytes(b))
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse {
        line: 0,
        msg: msg.into(),
    }
}

/// Read an IDX image file; each image becomes one point with pixels scaled to [0, 1].
/// At most `limit` images are read when given.
pub fn read_idx_images(path: impl AsRef<Path>, limit: Option<usize>) -> Result<PointCloud> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let magic = read_u32(&mut f)?;
    if magic != IDX_IMAGES {
        return Err(parse_err(format!(
            "IDX image magic {magic:#010x}, expected {IDX_IMAGES:#010x}"
        )));
    }
    let count = read_u32(&mut f)? as usize;
    let rows = read_u32(&mut f)? as usize;
    let cols = read_u32(&mut f)? as usize;
    let n = limit.map_or(count, |l| l.min(count));
    let mut bytes = vec![0u8; n * rows * cols];
    f.read_exact(&mut bytes)
        .map_err(|_| parse_err("IDX image file is truncated"))?;
    let data: Vec<f64> = bytes.iter().map(|b| *b as f64 / 255.0).collect();
    Ok(finish(data, rows * cols))
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let magic = read_u32(&mut f)?;
    if magic != IDX_LABELS {
        return Err(parse_err(format!(
            "IDX label magic {magic:#010x}, expected {IDX_LABELS:#010x}"
        )));
    }
    let count = read_u32(&mut f)? as usize;
    let mut labels = vec![0u8; count];
    f.read_exact(&mut labels)
        .map_err(|_| parse_err("IDX label file is truncated"))?;
    Ok(labels)
}

/// Write `pixels` (count·rows·cols bytes) as an IDX image file.
pub fn write_idx_images(
    path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
    pixels: &[u8],
) -> Result<()> {
    if rows * cols == 0 || !pixels.len().is_multiple_of(rows * cols) {
        return Err(Error::Shape(
            "pixel buffer does not hold whole images".into(),
        ));
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for v in [
        IDX_IMAGES,
        (pixels.len() / (rows * cols)) as u32,
        rows as u32,
        cols as u32,
    ] {
        f.write_all(&v.to_be_bytes())?;
    }
    f.write_all(pixels)?;
    f.flush()?;
    Ok(())
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&IDX_LABELS.to_be_bytes())?;
    f.write_all(&(labels.len() as u32).to_be_bytes())?;
    f.write_all(labels)?;
    f.flush()?;
    Ok(())
}
