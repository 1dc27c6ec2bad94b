//! Least squares `min_F ‖(Ω·M)ᵀ·Fᵀ − Mᵀ‖_F` by leverage-score row
//! subsampling, ridge regularization and one resampled refinement step.
//!
//! Throughout, `sketched` is the short-fat `r̂ × z` matrix `Ω·M` and the
//! right-hand sides are the `z` columns of `M` (the rows of `Mᵀ`), fetched
//! only for the sampled indices.

use crate::error::{invalid, mismatch, Error, Result};
use crate::rank_estimation::Unfolding;
use crate::sketching::{gaussian, tri_solve, RandomStream};
use crate::tensor::Matrix;

/// Squared approximate leverage scores, one per column of the sketched matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LeverageWeights {
    pub weights: Vec<f64>,
}

impl LeverageWeights {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn nonzero(&self) -> usize {
        self.weights.iter().filter(|w| **w > 0.0).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsqConfig {
    /// Oversampling factor `k`.
    pub k: usize,
    /// Rows sampled are `first_mode_multiplier · k · r̂` on the first mode...
    pub first_mode_multiplier: usize,
    /// ...and `later_mode_multiplier · k · r̂` afterwards.
    pub later_mode_multiplier: usize,
    /// Columns of the Gaussian probe used for the leverage estimate.
    pub probe_columns: usize,
    /// `λ = lambda_multiplier · ‖sampled coefficient block‖₂`.
    pub lambda_multiplier: f64,
    /// Power-iteration steps for the norm estimate inside `λ`.
    pub power_steps: usize,
    pub refinement: bool,
}

impl Default for LsqConfig {
    fn default() -> Self {
        Self {
            k: 4,
            first_mode_multiplier: 4,
            later_mode_multiplier: 3,
            probe_columns: 5,
            lambda_multiplier: f64::EPSILON,
            power_steps: 5,
            refinement: true,
        }
    }
}

impl LsqConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.probe_columns == 0 {
            return Err(invalid!(
                "oversampling k and probe columns must be positive"
            ));
        }
        if self.first_mode_multiplier == 0 || self.later_mode_multiplier == 0 {
            return Err(invalid!("sample multipliers must be positive"));
        }
        if !(self.lambda_multiplier >= 0.0) {
            return Err(invalid!("lambda multiplier must be nonnegative"));
        }
        Ok(())
    }

    /// Number of rows sampled for an `r̂`-column problem with `z` rows.
    pub fn sample_size(&self, rank: usize, z: usize, is_first_mode: bool) -> usize {
        let mult = if is_first_mode {
            self.first_mode_multiplier
        } else {
            self.later_mode_multiplier
        };
        (mult * self.k * rank).min(z)
    }
}

/// Approximate leverage scores of the rows of `sketchedᵀ`: squared row norms
/// of `sketchedᵀ · (R⁻¹·G)` for a Gaussian `G` with `probe_cols` columns.
///
/// `qr_r` is the triangle from a QR of a row sketch of `sketchedᵀ`. Diagonal
/// entries below `u·max|diag|` are raised to that level before the solve.
pub fn approx_leverage_scores(
    sketched: &Matrix,
    qr_r: &Matrix,
    probe_cols: usize,
    rs: &mut RandomStream,
) -> Result<LeverageWeights> {
    let r = sketched.nrows();
    if qr_r.nrows() != r || qr_r.ncols() != r {
        return Err(mismatch!(
            "triangle is {}x{}, sketch has {} rows",
            qr_r.nrows(),
            qr_r.ncols(),
            r
        ));
    }
    if probe_cols == 0 {
        return Err(invalid!("probe needs at least one column"));
    }
    let z = sketched.ncols();
    let max_diag = (0..r).map(|i| qr_r[(i, i)].abs()).fold(0.0, f64::max);
    if max_diag == 0.0 || !max_diag.is_finite() {
        return Ok(LeverageWeights {
            weights: vec![0.0; z],
        });
    }
    let floor = f64::EPSILON * max_diag;
    let mut tri = qr_r.upper_triangle();
    for i in 0..r {
        let d = tri[(i, i)];
        if d.abs() < floor {
            tri[(i, i)] = if d < 0.0 { -floor } else { floor };
        }
    }
    let g = gaussian(rs, r, probe_cols);
    let whitened = tri_solve(&tri, &g)?;
    let w = whitened.transpose() * sketched;
    let weights = w
        .column_iter()
        .map(|c| {
            let v = c.norm_squared();
            if v.is_finite() {
                v
            } else {
                0.0
            }
        })
        .collect();
    Ok(LeverageWeights { weights })
}

/// Draws `min(s, #nonzero)` distinct indices, the next index at each step
/// chosen with probability proportional to its weight among those left.
/// Zero weights are never selected.
pub fn sample_without_replacement(
    w: &LeverageWeights,
    s: usize,
    rs: &mut RandomStream,
) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = w
        .weights
        .iter()
        .enumerate()
        .filter(|(_, wt)| **wt > 0.0 && wt.is_finite())
        .map(|(j, wt)| (-rs.uniform().ln() / wt, j))
        .collect();
    let s = s.min(keyed.len());
    if s == 0 {
        return Vec::new();
    }
    if s < keyed.len() {
        keyed.select_nth_unstable_by(s - 1, |a, b| a.0.total_cmp(&b.0));
        keyed.truncate(s);
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    keyed.into_iter().map(|(_, j)| j).collect()
}

/// Minimizes `‖a·X − b‖_F² + λ‖X‖_F²` through one thin QR of `[a; √λ·I]`.
pub fn ridge_solve(a: &Matrix, b: &Matrix, lambda: f64) -> Result<Matrix> {
    let (s, r) = a.shape();
    if b.nrows() != s {
        return Err(mismatch!(
            "coefficient has {} rows, right-hand side has {}",
            s,
            b.nrows()
        ));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid!("ridge parameter must be finite and nonnegative"));
    }
    if r == 0 {
        return Ok(Matrix::zeros(0, b.ncols()));
    }
    let mut stacked = Matrix::zeros(s + r, r);
    stacked.view_mut((0, 0), (s, r)).copy_from(a);
    let root = lambda.sqrt();
    for i in 0..r {
        stacked[(s + i, i)] = root;
    }
    let qr = stacked.qr();
    let tri = qr.r();
    if lambda == 0.0 {
        let max_diag = (0..r).map(|i| tri[(i, i)].abs()).fold(0.0, f64::max);
        let limit = f64::EPSILON * max_diag * (s.max(r) as f64);
        if max_diag == 0.0 || (0..r).any(|i| tri[(i, i)].abs() <= limit) {
            return Err(Error::Singular(
                "coefficient matrix is rank deficient and λ = 0".into(),
            ));
        }
    }
    let q = qr.q();
    let qtb = q.rows(0, s).transpose() * b;
    tri_solve(&tri, &qtb)
}

/// Estimate of `‖a‖₂` from a few power-iteration steps on `aᵀa`.
pub fn spectral_norm_estimate(a: &Matrix, steps: usize, rs: &mut RandomStream) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let mut v = gaussian(rs, a.ncols(), 1);
    let mut est = 0.0;
    for _ in 0..steps.max(1) {
        let nv = v.norm();
        if nv == 0.0 {
            return 0.0;
        }
        v /= nv;
        let av = a * &v;
        est = av.norm();
        v = a.transpose() * av;
    }
    est
}

/// Computes `F` (`n × r̂`) with `F·sketched ≈ rhs`.
///
/// `rhs` is the `n × z` unfolding whose columns are gathered on demand and
/// `qr_r` the `r̂ × r̂` triangle of a right sketch of `sketched`. When
/// `z < r̂` (or no triangle is given) the full, unsampled problem is solved.
pub fn solve_factor<U: Unfolding + ?Sized>(
    sketched: &Matrix,
    rhs: &U,
    qr_r: Option<&Matrix>,
    cfg: &LsqConfig,
    is_first_mode: bool,
    rs: &mut RandomStream,
) -> Result<Matrix> {
    cfg.validate()?;
    let (rank, z) = sketched.shape();
    if rhs.ncols() != z {
        return Err(mismatch!(
            "sketch has {} columns, right-hand side unfolding has {}",
            z,
            rhs.ncols()
        ));
    }
    let n = rhs.nrows();
    let qr_r = match qr_r {
        Some(t) if z >= rank => t,
        _ => return solve_unsampled(sketched, rhs, cfg, rs),
    };

    let weights = approx_leverage_scores(sketched, qr_r, cfg.probe_columns, &mut rs.fork())?;
    if weights.nonzero() == 0 {
        return Ok(Matrix::zeros(n, rank));
    }
    let s = cfg.sample_size(rank, z, is_first_mode);
    let first = sample_without_replacement(&weights, s, &mut rs.fork());
    let second = sample_without_replacement(&weights, s, &mut rs.fork());

    let a1 = sketched.select_columns(&first).transpose();
    let b1 = rhs.columns(&first)?.transpose();
    let lambda = cfg.lambda_multiplier * spectral_norm_estimate(&a1, cfg.power_steps, rs);
    let mut x = ridge_solve(&a1, &b1, lambda)?;
    if cfg.refinement {
        let a2 = sketched.select_columns(&second).transpose();
        let b2 = rhs.columns(&second)?.transpose() - &a2 * &x;
        x += ridge_solve(&a2, &b2, lambda)?;
    }
    Ok(x.transpose())
}

fn solve_unsampled<U: Unfolding + ?Sized>(
    sketched: &Matrix,
    rhs: &U,
    cfg: &LsqConfig,
    rs: &mut RandomStream,
) -> Result<Matrix> {
    let (rank, z) = sketched.shape();
    let all: Vec<usize> = (0..z).collect();
    let a = sketched.transpose();
    let b = rhs.columns(&all)?.transpose();
    let norm = spectral_norm_estimate(&a, cfg.power_steps, rs);
    if norm == 0.0 {
        return Ok(Matrix::zeros(rhs.nrows(), rank));
    }
    let lambda = cfg.lambda_multiplier.max(f64::MIN_POSITIVE) * norm;
    Ok(ridge_solve(&a, &b, lambda)?.transpose())
}
