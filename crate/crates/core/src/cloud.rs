//! Point clouds (uniform empirical measures), weighted clouds and unit directions.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// K points in R^N stored row-major; stands for the measure (1/K) Σ δ_{x_k}.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    data: Vec<f64>,
    dim: usize,
}

impl PointCloud {
    /// Build from a row-major buffer. The buffer length must be a multiple of `dim`.
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("point dimension must be at least 1".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!(
                "buffer of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "coordinate {} of point {}",
                i % dim,
                i / dim
            )));
        }
        Ok(Self { data, dim })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != dim) {
            return Err(Error::Shape("rows have different lengths".into()));
        }
        Self::new(
            rows.iter()
                .flat_map(|r| r.as_ref().iter().copied())
                .collect(),
            dim,
        )
    }

    /// A cloud with no points (only produced by `generate(.., 0, ..)` and friends).
    pub fn empty(dim: usize) -> Self {
        Self {
            data: Vec::new(),
            dim: dim.max(1),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Euclidean norm of every point.
    pub fn radii(&self) -> Vec<f64> {
        self.points().map(norm).collect()
    }

    pub fn mean_radius(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.radii().iter().sum::<f64>() / self.len() as f64
    }

    /// Projection onto a direction: the 1-D cloud {⟨x_k, θ⟩}.
    pub fn project(&self, theta: &Direction) -> Vec<f64> {
        self.points().map(|p| dot(p, theta.as_slice())).collect()
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::parse_csv(std::io::BufReader::new(file))
    }

    /// Parse the CSV point format: one point per line, comma-separated
    /// decimal coordinates, optional `# dim=N` header, other `#` lines ignored.
    pub fn parse_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut declared: Option<usize> = None;
        let mut dim: Option<usize> = None;
        let mut data = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("dim=") {
                    let n = v.trim().parse::<usize>().map_err(|e| Error::Parse {
                        line: lineno,
                        msg: format!("bad dim header: {e}"),
                    })?;
                    declared = Some(n);
                }
                continue;
            }
            let mut count = 0;
            for field in trimmed.split(',') {
                let v = field.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno,
                    msg: format!("bad coordinate {field:?}: {e}"),
                })?;
                data.push(v);
                count += 1;
            }
            match dim {
                None => dim = Some(count),
                Some(d) if d != count => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("ragged row: {count} coordinates, expected {d}"),
                    })
                }
                _ => {}
            }
        }
        let dim = match (dim, declared) {
            (Some(d), Some(h)) if d != h => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("header declares dim={h} but rows have {d} coordinates"),
                })
            }
            (Some(d), _) => d,
            (None, Some(h)) => h,
            (None, None) => {
                return Err(Error::Parse {
                    line: 0,
                    msg: "no points and no dim header".into(),
                })
            }
        };
        if data.is_empty() {
            return Ok(Self::empty(dim));
        }
        Self::new(data, dim)
    }

    /// CSV text with a `# dim=N` header and 17-significant-digit coordinates.
    pub fn to_csv_string(&self) -> String {
        let mut out = format!("# dim={}\n", self.dim);
        for p in self.points() {
            for (i, v) in p.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.to_csv_string().as_bytes())?;
        f.flush()?;
        Ok(())
    }

    /// Attach uniform weights 1/K.
    pub fn uniform(&self) -> WeightedCloud {
        let w = 1.0 / self.len() as f64;
        WeightedCloud {
            cloud: self.clone(),
            weights: vec![w; self.len()],
        }
    }
}

/// Fixed 17-significant-digit formatting used by every CSV writer.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A point cloud with nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCloud {
    pub cloud: PointCloud,
    pub weights: Vec<f64>,
}

impl WeightedCloud {
    pub fn new(cloud: PointCloud, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != cloud.len() {
            return Err(Error::Shape(format!(
                "{} weights for {} points",
                weights.len(),
                cloud.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::domain("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { cloud, weights })
    }

    /// The mixture (1-t) μ0 + t μ1 of two uniform clouds, as one weighted cloud.
    ///
    /// Points carrying zero weight are left out, so the endpoints t = 0 and
    /// t = 1 reproduce μ0 and μ1 exactly.
    pub fn mixture(mu0: &PointCloud, mu1: &PointCloud, t: f64) -> Result<Self> {
        if mu0.dim() != mu1.dim() {
            return Err(Error::DimensionMismatch {
                left: mu0.dim(),
                right: mu1.dim(),
            });
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::domain(format!(
                "mixture parameter {t} outside [0, 1]"
            )));
        }
        let w0 = (1.0 - t) / mu0.len() as f64;
        let w1 = t / mu1.len() as f64;
        let mut data = Vec::with_capacity(mu0.as_slice().len() + mu1.as_slice().len());
        let mut weights = Vec::with_capacity(mu0.len() + mu1.len());
        if w0 > 0.0 {
            data.extend_from_slice(mu0.as_slice());
            weights.extend(std::iter::repeat_n(w0, mu0.len()));
        }
        if w1 > 0.0 {
            data.extend_from_slice(mu1.as_slice());
            weights.extend(std::iter::repeat_n(w1, mu1.len()));
        }
        Ok(Self {
            cloud: PointCloud::new(data, mu0.dim())?,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.cloud.dim()
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }
}

/// A unit vector θ ∈ S^{N-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Normalize a nonzero vector.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        let n = norm(&v);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::domain("direction vector must be finite and nonzero"));
        }
        Ok(Self(v.into_iter().map(|x| x / n).collect()))
    }

    /// Wrap a vector already known to have unit norm.
    pub(crate) fn from_unit(v: Vec<f64>) -> Self {
        Self(v)
    }

    /// The i-th coordinate axis e_i in R^N.
    pub fn axis(n_dim: usize, i: usize) -> Self {
        let mut v = vec![0.0; n_dim];
        v[i] = 1.0;
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_non_finite_and_bad_shapes() {
        assert!(matches!(
            PointCloud::new(vec![1.0, f64::NAN], 2),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            PointCloud::new(vec![1.0, 2.0, 3.0], 2),
            Err(Error::Shape(_))
        ));
        assert!(matches!(PointCloud::new(vec![], 0), Err(Error::Shape(_))));
        assert!(PointCloud::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn csv_header_and_ragged_rows() {
        let ok = PointCloud::parse_csv("# dim=2\n1,2\n3.5,-4e-3\n".as_bytes()).unwrap();
        assert_eq!(ok.dim(), 2);
        assert_eq!(ok.len(), 2);
        assert_eq!(ok.point(1), &[3.5, -4e-3]);

        let ragged = PointCloud::parse_csv("1,2\n3\n".as_bytes());
        assert!(matches!(ragged, Err(Error::Parse { line: 2, .. })));

        let conflict = PointCloud::parse_csv("# dim=3\n1,2\n".as_bytes());
        assert!(matches!(conflict, Err(Error::Parse { .. })));

        let garbage = PointCloud::parse_csv("1,abc\n".as_bytes());
        assert!(matches!(garbage, Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn direction_is_unit() {
        let d = Direction::new(vec![3.0, 4.0]).unwrap();
        assert!((norm(d.as_slice()) - 1.0).abs() < 1e-12);
        assert!(Direction::new(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn mixture_endpoints_drop_zero_weights() {
        let a = PointCloud::from_rows(&[[0.0], [1.0]]).unwrap();
        let b = PointCloud::from_rows(&[[5.0]]).unwrap();
        let m0 = WeightedCloud::mixture(&a, &b, 0.0).unwrap();
        assert_eq!(m0, a.uniform());
        let m = WeightedCloud::mixture(&a, &b, 0.25).unwrap();
        assert_eq!(m.weights, vec![0.375, 0.375, 0.25]);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bitwise(vals in proptest::collection::vec(-1e300f64..1e300, 1..40), dim in 1usize..4) {
            let n = vals.len() / dim * dim;
            prop_assume!(n > 0);
            let cloud = PointCloud::new(vals[..n].to_vec(), dim).unwrap();
            let back = PointCloud::parse_csv(cloud.to_csv_string().as_bytes()).unwrap();
            prop_assert_eq!(back.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            cloud.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }
}
