//! Synthetic test tensors: smooth functions sampled on Chebyshev grids, the
//! Hilbert tensor, and seeded low-rank tensors with additive noise.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::sketching::{gaussian, thin_qr, RandomStream};
use crate::tensor::{DenseTensor, TuckerDecomposition};

/// Chebyshev points of the second kind `cos(jπ/(n−1))`, `j = 0..n`, running
/// from 1 down to −1. A single point is placed at 0.
pub fn chebyshev_points(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|j| {
                if 2 * j + 1 == n {
                    0.0
                } else {
                    (j as f64 * std::f64::consts::PI / (n - 1) as f64).cos()
                }
            })
            .collect(),
    }
}

/// Samples `f(x_i, y_j, z_k)` on the Chebyshev grid of size `nx × ny × nz`.
pub fn function_tensor(
    f: impl Fn(f64, f64, f64) -> f64,
    nx: usize,
    ny: usize,
    nz: usize,
) -> Result<DenseTensor> {
    let (x, y, z) = (
        chebyshev_points(nx),
        chebyshev_points(ny),
        chebyshev_points(nz),
    );
    DenseTensor::from_fn(vec![nx, ny, nz], |i| f(x[i[0]], y[i[1]], z[i[2]]))
}

pub fn runge(x: f64, y: f64, z: f64) -> f64 {
    1.0 / (5.0 + x * x + y * y + z * z)
}

pub fn octant(x: f64, y: f64, z: f64) -> f64 {
    (x * x + y * y + z * z).sqrt()
}

pub fn wagon(x: f64, y: f64, z: f64) -> f64 {
    (50.0 * x).sin().exp()
        + (60.0 * y.exp()).sin() * (60.0 * z).sin()
        + (70.0 * x.sin()).sin() * (10.0 * z).cos()
        + (80.0 * y).sin().sin()
        - (10.0 * (x + z)).sin()
        + (x * x + y * y + z * z) / 4.0
}

/// Order-`d` Hilbert tensor with entries `1/(i_1 + … + i_d − d + 1)` (1-based).
pub fn hilbert_tensor(d: usize, n: usize) -> Result<DenseTensor> {
    DenseTensor::from_fn(vec![n; d], |i| 1.0 / (i.iter().sum::<usize>() as f64 + 1.0))
}

/// Random Tucker tensor of multilinear rank `r` in every mode (Gaussian core,
/// orthonormalized Gaussian factors, unit Frobenius norm) plus Gaussian noise
/// with `‖noise‖_F = noise_level · ‖signal‖_F`.
pub fn noisy_lowrank(
    dims: &[usize],
    r: usize,
    noise_level: f64,
    rs: &mut RandomStream,
) -> Result<DenseTensor> {
    if !(noise_level >= 0.0) {
        return Err(invalid!("noise level must be nonnegative"));
    }
    if r == 0 || dims.iter().any(|&n| r > n) {
        return Err(invalid!("rank {r} does not fit dims {:?}", dims));
    }
    let core = DenseTensor::from_fn(vec![r; dims.len()], |_| rs.standard_normal())?;
    let factors = dims
        .iter()
        .map(|&n| Ok(thin_qr(&gaussian(rs, n, r))?.0))
        .collect::<Result<Vec<_>>>()?;
    let mut signal = TuckerDecomposition::new(core, factors, false)?.reconstruct();
    let norm = signal.frobenius_norm();
    signal.data_mut().iter_mut().for_each(|v| *v /= norm);
    if noise_level > 0.0 {
        let noise: Vec<f64> = (0..signal.len()).map(|_| rs.standard_normal()).collect();
        let nn = noise.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = noise_level / nn;
        for (s, e) in signal.data_mut().iter_mut().zip(&noise) {
            *s += scale * e;
        }
    }
    Ok(signal)
}

/// Names accepted by [`GallerySpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GalleryName {
    Runge,
    Wagon,
    Octant,
    Hilbert,
    NoisyLowrank,
}

impl GalleryName {
    pub const ALL: [GalleryName; 5] = [
        GalleryName::Runge,
        GalleryName::Wagon,
        GalleryName::Octant,
        GalleryName::Hilbert,
        GalleryName::NoisyLowrank,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            GalleryName::Runge => "runge",
            GalleryName::Wagon => "wagon",
            GalleryName::Octant => "octant",
            GalleryName::Hilbert => "hilbert",
            GalleryName::NoisyLowrank => "noisy_lowrank",
        }
    }
}

impl fmt::Display for GalleryName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GalleryName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "runge" => Ok(GalleryName::Runge),
            "wagon" => Ok(GalleryName::Wagon),
            "octant" => Ok(GalleryName::Octant),
            "hilbert" => Ok(GalleryName::Hilbert),
            "noisy_lowrank" | "noisy" => Ok(GalleryName::NoisyLowrank),
            other => Err(invalid!("unknown gallery tensor '{other}'")),
        }
    }
}

/// A reproducible description of a gallery tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GallerySpec {
    pub name: GalleryName,
    pub dims: Vec<usize>,
    pub seed: u64,
    pub noise_level: f64,
    pub true_rank: usize,
}

impl GallerySpec {
    pub fn new(name: GalleryName, dims: Vec<usize>) -> Self {
        Self {
            name,
            dims,
            seed: 0,
            noise_level: 0.0,
            true_rank: 10,
        }
    }

    pub fn build(&self) -> Result<DenseTensor> {
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(invalid!(
                "dims must be nonempty and positive, got {:?}",
                self.dims
            ));
        }
        let three = || -> Result<(usize, usize, usize)> {
            match self.dims[..] {
                [a, b, c] => Ok((a, b, c)),
                _ => Err(invalid!(
                    "{} needs three dims, got {:?}",
                    self.name,
                    self.dims
                )),
            }
        };
        match self.name {
            GalleryName::Runge => {
                let (a, b, c) = three()?;
                function_tensor(runge, a, b, c)
            }
            GalleryName::Wagon => {
                let (a, b, c) = three()?;
                function_tensor(wagon, a, b, c)
            }
            GalleryName::Octant => {
                let (a, b, c) = three()?;
                function_tensor(octant, a, b, c)
            }
            GalleryName::Hilbert => {
                let n = self.dims[0];
                if self.dims.iter().any(|&m| m != n) {
                    return Err(invalid!(
                        "hilbert tensor must be cubical, got {:?}",
                        self.dims
                    ));
                }
                hilbert_tensor(self.dims.len(), n)
            }
            GalleryName::NoisyLowrank => noisy_lowrank(
                &self.dims,
                self.true_rank,
                self.noise_level,
                &mut RandomStream::new(self.seed),
            ),
        }
    }
}
