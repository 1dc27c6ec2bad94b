//! Adaptive rank detection for a short-fat unfolding `M` (n × z).
//!
//! A Gaussian `Ω` (r̃ × n) is applied from the left, the product `Ω·M` is
//! compressed from the right by an SRFT and the triangle of the QR of the
//! transposed sketch reveals where the singular values drop below `tol`.
//! The trial rank grows geometrically until such a drop is observed.

use crate::error::{invalid, Result};
use crate::sketching::{gaussian, numerical_rank, singular_values, thin_qr, RandomStream, Srft};
use crate::tensor::{mode_product, unfold, DenseTensor, Matrix};

/// A matrix that can be sketched from the left and whose columns can be
/// fetched individually. Implemented by dense matrices and by modal
/// unfoldings of a tensor (which are never materialized).
pub trait Unfolding {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `omega · self`.
    fn left_multiply(&self, omega: &Matrix) -> Result<Matrix>;
    /// The selected columns, in the given order, as an `nrows × idx.len()` matrix.
    fn columns(&self, idx: &[usize]) -> Result<Matrix>;
}

impl Unfolding for Matrix {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn left_multiply(&self, omega: &Matrix) -> Result<Matrix> {
        if omega.ncols() != self.nrows() {
            return Err(invalid!(
                "sketch has {} columns, matrix has {} rows",
                omega.ncols(),
                self.nrows()
            ));
        }
        Ok(omega * self)
    }

    fn columns(&self, idx: &[usize]) -> Result<Matrix> {
        if let Some(&j) = idx.iter().find(|&&j| j >= self.ncols()) {
            return Err(invalid!("column {j} out of range (< {})", self.ncols()));
        }
        Ok(self.select_columns(idx))
    }
}

/// Mode-`mode` unfolding of a tensor, accessed through mode products and
/// fiber gathers.
#[derive(Debug, Clone, Copy)]
pub struct TensorUnfolding<'a> {
    tensor: &'a DenseTensor,
    mode: usize,
}

impl<'a> TensorUnfolding<'a> {
    pub fn new(tensor: &'a DenseTensor, mode: usize) -> Result<Self> {
        if mode >= tensor.order() {
            return Err(invalid!(
                "mode {} out of range for order-{} tensor",
                mode,
                tensor.order()
            ));
        }
        Ok(Self { tensor, mode })
    }

    pub fn tensor(&self) -> &DenseTensor {
        self.tensor
    }

    pub fn mode(&self) -> usize {
        self.mode
    }
}

impl Unfolding for TensorUnfolding<'_> {
    fn nrows(&self) -> usize {
        self.tensor.dims()[self.mode]
    }

    fn ncols(&self) -> usize {
        self.tensor.complement_len(self.mode)
    }

    fn left_multiply(&self, omega: &Matrix) -> Result<Matrix> {
        let sketched = mode_product(self.tensor, omega, self.mode)?;
        unfold(&sketched, self.mode)
    }

    fn columns(&self, idx: &[usize]) -> Result<Matrix> {
        self.tensor.gather_fibers(self.mode, idx)
    }
}

/// Outcome of [`estimate_rank`], including the sketches of the last
/// (accepted) trial so later stages can reuse them.
#[derive(Debug, Clone)]
pub struct RankProbeResult {
    pub detected_rank: usize,
    pub trial_rank: usize,
    /// The `r̃ × n` Gaussian of the accepted trial.
    pub omega: Matrix,
    /// `Ω · M`, `r̃ × z`.
    pub omega_m: Matrix,
    /// `Ω·M·Y`, `r̃ × s`.
    pub sketch: Matrix,
    /// `R` from the thin QR `(Ω·M·Y)ᵀ = Q·R`, `r̃ × r̃`.
    pub qr_r: Matrix,
    /// The SRFT `Y` used for `qr_r`, applicable to further rows of `Ω·M`.
    pub srft: Srft,
    /// Singular values of `qr_r`, descending.
    pub singular_values: Vec<f64>,
}

/// Parameters of the rank growth loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSearch {
    pub init_rank: usize,
    /// `r̃ = round(trial_inflation · r)`.
    pub trial_inflation: f64,
    /// `r ← round(growth · r)` after an unsuccessful trial.
    pub growth: f64,
    /// SRFT output size is `k · r̃`.
    pub k: usize,
}

impl Default for RankSearch {
    fn default() -> Self {
        Self {
            init_rank: 10,
            trial_inflation: 1.1,
            growth: 1.7,
            k: 4,
        }
    }
}

/// `round(factor · r)` (half away from zero), at least `r + 1`.
pub(crate) fn grow(r: usize, factor: f64) -> usize {
    ((factor * r as f64).round() as usize).max(r + 1)
}

/// Estimates the numerical rank of `m` at relative tolerance `tol` with the
/// default growth constants.
pub fn estimate_rank<U: Unfolding + ?Sized>(
    m: &U,
    tol: f64,
    init_rank: usize,
    k: usize,
    rs: &mut RandomStream,
) -> Result<RankProbeResult> {
    let search = RankSearch {
        init_rank,
        k,
        ..RankSearch::default()
    };
    estimate_rank_with(m, tol, &search, rs)
}

pub fn estimate_rank_with<U: Unfolding + ?Sized>(
    m: &U,
    tol: f64,
    search: &RankSearch,
    rs: &mut RandomStream,
) -> Result<RankProbeResult> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(invalid!("tolerance must lie in (0, 1), got {tol}"));
    }
    if search.init_rank == 0 || search.k == 0 {
        return Err(invalid!(
            "initial rank and oversampling factor must be positive"
        ));
    }
    if !(search.growth > 1.0) || search.trial_inflation < 1.0 {
        return Err(invalid!(
            "growth must exceed 1 and trial inflation be at least 1"
        ));
    }
    let (n, z) = (m.nrows(), m.ncols());
    let cap = n.min(z);
    let mut r = search.init_rank;
    loop {
        let trial = grow(r, search.trial_inflation).min(cap);
        let omega = gaussian(rs, trial, n);
        let omega_m = m.left_multiply(&omega)?;
        let s = (search.k * trial).min(z);
        let srft = Srft::draw(z, s, rs)?;
        let sketch = srft.apply_right(&omega_m)?;
        let (_, qr_r) = thin_qr(&sketch.transpose())?;
        let sv = singular_values(&qr_r);
        let mut result = RankProbeResult {
            detected_rank: 0,
            trial_rank: trial,
            omega,
            omega_m,
            sketch,
            qr_r,
            srft,
            singular_values: sv,
        };
        if result.singular_values[0] == 0.0 {
            return Ok(result);
        }
        let l = numerical_rank(&result.singular_values, tol);
        if l < r || trial == cap {
            result.detected_rank = l;
            return Ok(result);
        }
        r = grow(r, search.growth);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn low_rank(rows: usize, cols: usize, rank: usize, seed: u64) -> Matrix {
        let mut rs = RandomStream::new(seed);
        gaussian(&mut rs, rows, rank) * gaussian(&mut rs, rank, cols)
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let m = Matrix::zeros(30, 80);
        let p = estimate_rank(&m, 1e-8, 10, 4, &mut RandomStream::new(1)).unwrap();
        assert_eq!(p.detected_rank, 0);
    }

    #[test]
    fn exact_rank_three() {
        let mut hits = 0;
        for seed in 0..100 {
            let m = low_rank(100, 400, 3, 1000 + seed);
            let p = estimate_rank(&m, 1e-8, 10, 4, &mut RandomStream::new(seed)).unwrap();
            if p.detected_rank == 3 {
                hits += 1;
            }
        }
        assert!(hits >= 99, "rank 3 found in {hits}/100 seeds");
    }

    #[test]
    fn geometric_spectrum_boundary() {
        let mut m = Matrix::zeros(60, 200);
        for i in 0..10 {
            m[(i, i)] = 10f64.powi(-(i as i32));
        }
        for seed in 0..20 {
            let p = estimate_rank(&m, 1e-4, 10, 4, &mut RandomStream::new(seed)).unwrap();
            assert!(
                (4..=5).contains(&p.detected_rank),
                "seed {seed}: rank {}",
                p.detected_rank
            );
        }
    }

    #[test]
    fn full_rank_returns_cap() {
        let m = low_rank(15, 40, 15, 3);
        let p = estimate_rank(&m, 1e-12, 2, 4, &mut RandomStream::new(4)).unwrap();
        assert_eq!(p.detected_rank, 15);
        assert_eq!(p.trial_rank, 15);
    }

    #[test]
    fn grows_past_initial_rank() {
        let m = low_rank(200, 300, 40, 5);
        let p = estimate_rank(&m, 1e-10, 10, 4, &mut RandomStream::new(6)).unwrap();
        assert_eq!(p.detected_rank, 40);
        assert!(p.trial_rank > 40);
    }

    #[test]
    fn omega_m_is_reproducible_from_omega() {
        let m = low_rank(50, 120, 6, 7);
        let p = estimate_rank(&m, 1e-8, 10, 4, &mut RandomStream::new(8)).unwrap();
        let again = &p.omega * &m;
        assert!((again - &p.omega_m).norm() <= 1e-12 * p.omega_m.norm());
        assert_eq!(p.omega_m.nrows(), p.trial_rank);
    }

    #[test]
    fn tensor_unfolding_matches_matrix() {
        let t = DenseTensor::from_fn(vec![4, 5, 6], |i| {
            (i[0] as f64 + 1.0) * (i[1] as f64 - 2.0) + (i[2] * i[0]) as f64
        })
        .unwrap();
        for mode in 0..3 {
            let op = TensorUnfolding::new(&t, mode).unwrap();
            let dense = unfold(&t, mode).unwrap();
            let omega = gaussian(&mut RandomStream::new(9), 3, dense.nrows());
            let d = op.left_multiply(&omega).unwrap() - &omega * &dense;
            assert!(d.norm() <= 1e-12 * dense.norm());
            let idx = [3, 0, dense.ncols() - 1];
            assert_eq!(op.columns(&idx).unwrap(), dense.select_columns(&idx));
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        let m = Matrix::identity(4, 4);
        for tol in [0.0, 1.0, -1.0, f64::NAN] {
            assert!(estimate_rank(&m, tol, 10, 4, &mut RandomStream::new(0)).is_err());
        }
    }

    #[test]
    fn growth_rounding() {
        assert_eq!(grow(10, 1.1), 11);
        assert_eq!(grow(1, 1.1), 2);
        assert_eq!(grow(10, 1.7), 17);
        assert_eq!(grow(5, 1.1), 6);
        assert_eq!(grow(15, 1.1), 17);
    }
}
