//! Synthetic problem generation: uniform-model low-rank matrices,
//! observation masks, additive Gaussian noise and power-law matrices.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::ObservedMatrix;

/// Cap on full redraws of an observation mask before giving up.
pub const REDRAW_CAP: usize = 1000;

/// Which generative model produced a ground truth.
#[derive(Debug, Clone, PartialEq)]
pub enum GenModel {
    Uniform { spectrum: Vec<f64> },
    PowerLaw { alpha: f64 },
}

/// A rank-r ground truth `X0 = U diag(s) V^T` held in factored form.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
    pub model: GenModel,
    pub seed: u64,
}

impl GroundTruth {
    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn value_at(&self, i: usize, j: usize) -> f64 {
        (0..self.rank())
            .map(|k| self.u[(i, k)] * self.s[k] * self.v[(j, k)])
            .sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.s) * self.v.transpose()
    }

    /// Frobenius norm from the factored form.
    pub fn frobenius_norm(&self) -> f64 {
        let us = &self.u * DMatrix::from_diagonal(&self.s);
        ((us.transpose() * &us) * (self.v.transpose() * &self.v))
            .trace()
            .max(0.0)
            .sqrt()
    }

    /// Restricts the ground truth to an index set.
    pub fn observe(&self, indices: &[(usize, usize)]) -> Result<ObservedMatrix> {
        let entries = indices
            .iter()
            .map(|&(i, j)| (i, j, self.value_at(i, j)))
            .collect();
        ObservedMatrix::new(self.nrows(), self.ncols(), entries)
    }
}

/// An accepted observation mask together with how many full redraws the
/// row/column coverage condition cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OmegaSample {
    m: usize,
    n: usize,
    indices: Vec<(usize, usize)>,
    redraws: usize,
}

impl OmegaSample {
    pub fn nrows(&self) -> usize {
        self.m
    }

    pub fn ncols(&self) -> usize {
        self.n
    }

    pub fn indices(&self) -> &[(usize, usize)] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn redraws(&self) -> usize {
        self.redraws
    }
}

fn check_rank(m: usize, n: usize, r: usize) -> Result<()> {
    if r == 0 || r > m.min(n) {
        return Err(Error::InvalidArgument(format!(
            "rank {r} invalid for a {m}x{n} matrix"
        )));
    }
    Ok(())
}

/// Orthonormal sign-fixed basis from sphere-drawn columns: QR followed by
/// flipping each column so its first nonzero component is positive.
fn orthonormal_factor(rng: &mut ChaCha8Rng, dim: usize, r: usize) -> DMatrix<f64> {
    let raw = DMatrix::from_fn(dim, r, |_, _| StandardNormal.sample(rng));
    let mut q = raw.qr().q().columns(0, r).into_owned();
    for k in 0..r {
        let lead = q.column(k).iter().copied().find(|&x| x != 0.0).unwrap_or(1.0);
        if lead < 0.0 {
            let negated = -q.column(k);
            q.set_column(k, &negated);
        }
    }
    q
}

/// Uniform model: orthonormalized sphere-drawn singular vectors with the
/// given spectrum.
pub fn generate_uniform(
    m: usize,
    n: usize,
    r: usize,
    spectrum: &[f64],
    seed: u64,
) -> Result<GroundTruth> {
    check_rank(m, n, r)?;
    if spectrum.len() != r {
        return Err(Error::InvalidArgument(format!(
            "expected {r} singular values, got {}",
            spectrum.len()
        )));
    }
    if spectrum.iter().any(|&s| s <= 0.0) || spectrum.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument(
            "spectrum must be positive and sorted descending".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = orthonormal_factor(&mut rng, m, r);
    let v = orthonormal_factor(&mut rng, n, r);
    Ok(GroundTruth {
        u,
        s: DVector::from_column_slice(spectrum),
        v,
        model: GenModel::Uniform {
            spectrum: spectrum.to_vec(),
        },
        seed,
    })
}

/// Power-law model `X = D U V^T D` with `D_ii = i^{-alpha}` (1-based `i`),
/// returned with the diagonal scalings folded into the factors.
pub fn generate_power_law(
    m: usize,
    n: usize,
    r: usize,
    alpha: f64,
    seed: u64,
) -> Result<GroundTruth> {
    check_rank(m, n, r)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "power-law exponent {alpha} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = DMatrix::from_fn(m, r, |_, _| StandardNormal.sample(&mut rng));
    let mut v = DMatrix::from_fn(n, r, |_, _| StandardNormal.sample(&mut rng));
    for i in 0..m {
        let d = ((i + 1) as f64).powf(-alpha);
        for k in 0..r {
            u[(i, k)] *= d;
        }
    }
    for j in 0..n {
        let d = ((j + 1) as f64).powf(-alpha);
        for k in 0..r {
            v[(j, k)] *= d;
        }
    }
    Ok(GroundTruth {
        u,
        s: DVector::from_element(r, 1.0),
        v,
        model: GenModel::PowerLaw { alpha },
        seed,
    })
}

fn coverage_ok(m: usize, n: usize, r: usize, indices: &[(usize, usize)]) -> bool {
    let mut rows = vec![0usize; m];
    let mut cols = vec![0usize; n];
    for &(i, j) in indices {
        rows[i] += 1;
        cols[j] += 1;
    }
    rows.iter().all(|&c| c >= r) && cols.iter().all(|&c| c >= r)
}

/// Bernoulli mask with inclusion probability `p = rho r (m + n - r) / (m n)`,
/// redrawn whole until every row and column holds at least `r` entries.
pub fn sample_omega(m: usize, n: usize, r: usize, rho: f64, seed: u64) -> Result<OmegaSample> {
    check_rank(m, n, r)?;
    let p = rho * (r * (m + n - r)) as f64 / (m * n) as f64;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "inclusion probability {p} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for redraws in 0..REDRAW_CAP {
        let mut indices = Vec::new();
        for i in 0..m {
            for j in 0..n {
                if rng.random_bool(p) {
                    indices.push((i, j));
                }
            }
        }
        if coverage_ok(m, n, r, &indices) {
            return Ok(OmegaSample {
                m,
                n,
                indices,
                redraws,
            });
        }
    }
    Err(Error::RedrawCapExceeded(REDRAW_CAP))
}

/// Exactly `count` entries uniform without replacement, redrawn whole until
/// every row and column holds at least `r` entries.
pub fn sample_fixed_count(
    m: usize,
    n: usize,
    r: usize,
    count: usize,
    seed: u64,
) -> Result<OmegaSample> {
    check_rank(m, n, r)?;
    if count > m * n {
        return Err(Error::InvalidArgument(format!(
            "cannot sample {count} distinct entries from a {m}x{n} grid"
        )));
    }
    if count < r * m.max(n) {
        return Err(Error::InvalidArgument(format!(
            "{count} entries cannot cover every row and column {r} times"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for redraws in 0..REDRAW_CAP {
        let mut indices: Vec<(usize, usize)> = index_sample(&mut rng, m * n, count)
            .into_iter()
            .map(|flat| (flat / n, flat % n))
            .collect();
        if coverage_ok(m, n, r, &indices) {
            indices.sort_unstable();
            return Ok(OmegaSample {
                m,
                n,
                indices,
                redraws,
            });
        }
    }
    Err(Error::RedrawCapExceeded(REDRAW_CAP))
}

/// Adds independent `N(0, eta0^2)` noise to every observed value.
pub fn add_noise(obs: &ObservedMatrix, eta0: f64, seed: u64) -> Result<ObservedMatrix> {
    if eta0 < 0.0 {
        return Err(Error::InvalidArgument(
            "noise standard deviation must be nonnegative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = obs
        .entries()
        .iter()
        .map(|&(i, j, x)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (i, j, x + eta0 * z)
        })
        .collect();
    ObservedMatrix::new(obs.nrows(), obs.ncols(), entries)
}
