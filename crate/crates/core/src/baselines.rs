//! Comparison algorithms: deterministic HOSVD/STHOSVD, randomized SVD and
//! randomized STHOSVD, the adaptive variant built on a blocked QB range
//! finder, and generalized Nyström with its sequentially truncated Tucker
//! form.

use crate::error::{invalid, mismatch, Error, Result};
use crate::sketching::{gaussian, svd, thin_qr, RandomStream, SvdResult};
use crate::tensor::{mode_product, unfold, DenseTensor, Matrix, TuckerDecomposition};

/// How many singular vectors to keep for a mode, given its singular values.
#[derive(Debug, Clone, PartialEq)]
pub enum Truncation {
    /// Keep everything.
    Full,
    /// Fixed rank per mode (indexed by mode, not by processing position).
    Ranks(Vec<usize>),
    /// Keep the singular values with `σ_j ≥ tol · σ_1`, i.e. the smallest `ℓ`
    /// with `σ_{ℓ+1} < tol · σ_1`.
    Tolerance(f64),
}

impl Truncation {
    fn pick(&self, mode: usize, sv: &[f64]) -> usize {
        let keep = match self {
            Truncation::Full => sv.len(),
            Truncation::Ranks(r) => r[mode].min(sv.len()),
            Truncation::Tolerance(tol) => eps_rank(sv, *tol),
        };
        keep.max(1).min(sv.len().max(1))
    }

    fn check(&self, dims: &[usize]) -> Result<()> {
        match self {
            Truncation::Full => Ok(()),
            Truncation::Ranks(r) => check_ranks(r, dims),
            Truncation::Tolerance(tol) => {
                if *tol >= 0.0 && *tol < 1.0 {
                    Ok(())
                } else {
                    Err(invalid!("tolerance must lie in [0, 1), got {tol}"))
                }
            }
        }
    }
}

/// Number of singular values with `σ_j ≥ tol·σ_1` (at least 1 for a nonzero
/// spectrum).
pub fn eps_rank(sv: &[f64], tol: f64) -> usize {
    let Some(&top) = sv.first() else { return 0 };
    if top == 0.0 {
        return 1;
    }
    sv.iter().take_while(|&&s| s >= tol * top).count().max(1)
}

pub(crate) fn check_ranks(ranks: &[usize], dims: &[usize]) -> Result<()> {
    if ranks.len() != dims.len() {
        return Err(mismatch!(
            "{} ranks given for an order-{} tensor",
            ranks.len(),
            dims.len()
        ));
    }
    for (i, (r, n)) in ranks.iter().zip(dims).enumerate() {
        if *r == 0 || r > n {
            return Err(invalid!("rank {} for mode {} must lie in 1..={}", r, i, n));
        }
    }
    Ok(())
}

pub(crate) fn check_order(order: &[usize], d: usize) -> Result<()> {
    let mut seen = vec![false; d];
    if order.len() != d {
        return Err(invalid!(
            "processing order {:?} must list {} modes",
            order,
            d
        ));
    }
    for &m in order {
        if m >= d || seen[m] {
            return Err(invalid!(
                "processing order {:?} is not a permutation",
                order
            ));
        }
        seen[m] = true;
    }
    Ok(())
}

pub fn ascending(d: usize) -> Vec<usize> {
    (0..d).collect()
}

fn leading_cols(m: &Matrix, r: usize) -> Matrix {
    m.columns(0, r).into_owned()
}

/// Result of an STHOSVD sweep, with the singular values seen at every mode.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub decomposition: TuckerDecomposition,
    /// Singular values of the working unfolding when each mode was processed.
    pub mode_singular_values: Vec<Vec<f64>>,
}

/// Deterministic STHOSVD with an arbitrary truncation rule.
pub fn sthosvd_with(a: &DenseTensor, order: &[usize], rule: &Truncation) -> Result<SweepResult> {
    let d = a.order();
    check_order(order, d)?;
    rule.check(a.dims())?;
    let mut core = a.clone();
    let mut factors = vec![Matrix::zeros(0, 0); d];
    let mut spectra = vec![Vec::new(); d];
    for &mode in order {
        let s = svd(&unfold(&core, mode)?);
        let keep = rule.pick(mode, &s.singular_values);
        let u = leading_cols(&s.u, keep);
        core = mode_product(&core, &u.transpose(), mode)?;
        factors[mode] = u;
        spectra[mode] = s.singular_values;
    }
    Ok(SweepResult {
        decomposition: TuckerDecomposition::new(core, factors, true)?,
        mode_singular_values: spectra,
    })
}

/// Deterministic HOSVD with an arbitrary truncation rule.
pub fn hosvd_with(a: &DenseTensor, rule: &Truncation) -> Result<SweepResult> {
    rule.check(a.dims())?;
    let d = a.order();
    let mut factors = Vec::with_capacity(d);
    let mut spectra = Vec::with_capacity(d);
    for mode in 0..d {
        let s = svd(&unfold(a, mode)?);
        let keep = rule.pick(mode, &s.singular_values);
        factors.push(leading_cols(&s.u, keep));
        spectra.push(s.singular_values);
    }
    let mut core = a.clone();
    for (mode, u) in factors.iter().enumerate() {
        core = mode_product(&core, &u.transpose(), mode)?;
    }
    Ok(SweepResult {
        decomposition: TuckerDecomposition::new(core, factors, true)?,
        mode_singular_values: spectra,
    })
}

pub fn hosvd(a: &DenseTensor, ranks: &[usize]) -> Result<TuckerDecomposition> {
    check_ranks(ranks, a.dims())?;
    Ok(hosvd_with(a, &Truncation::Ranks(ranks.to_vec()))?.decomposition)
}

pub fn sthosvd(a: &DenseTensor, ranks: &[usize], order: &[usize]) -> Result<TuckerDecomposition> {
    check_ranks(ranks, a.dims())?;
    Ok(sthosvd_with(a, order, &Truncation::Ranks(ranks.to_vec()))?.decomposition)
}

/// STHOSVD truncated at the ε-rank of each working unfolding.
pub fn sthosvd_eps(a: &DenseTensor, tol: f64, order: &[usize]) -> Result<TuckerDecomposition> {
    Ok(sthosvd_with(a, order, &Truncation::Tolerance(tol))?.decomposition)
}

/// Randomized SVD of `x` truncated to rank `r`, with `q` power iterations.
pub fn rand_svd(
    x: &Matrix,
    r: usize,
    oversample: usize,
    power_q: usize,
    rs: &mut RandomStream,
) -> Result<SvdResult> {
    let (m, n) = x.shape();
    let budget = r + oversample;
    if r == 0 || budget > m.min(n) {
        return Err(invalid!(
            "rank {} plus oversampling {} exceeds min dimension {}",
            r,
            oversample,
            m.min(n)
        ));
    }
    let omega = gaussian(rs, n, budget);
    let mut q = thin_qr(&(x * omega))?.0;
    for _ in 0..power_q {
        let w = thin_qr(&(x.transpose() * &q))?.0;
        q = thin_qr(&(x * w))?.0;
    }
    let b = q.transpose() * x;
    let small = svd(&b);
    Ok(SvdResult {
        u: &q * small.u,
        singular_values: small.singular_values,
        v: small.v,
    }
    .truncate(r))
}

/// Randomized STHOSVD with Gaussian sketches of `r_i + oversample` columns.
/// The oversampling is reduced where a mode is too small to afford it.
pub fn r_sthosvd(
    a: &DenseTensor,
    ranks: &[usize],
    oversample: usize,
    order: &[usize],
    rs: &mut RandomStream,
) -> Result<TuckerDecomposition> {
    check_ranks(ranks, a.dims())?;
    check_order(order, a.order())?;
    let mut core = a.clone();
    let mut factors = vec![Matrix::zeros(0, 0); a.order()];
    for &mode in order {
        let c = unfold(&core, mode)?;
        let r = ranks[mode].min(c.nrows().min(c.ncols()));
        let p = oversample.min(c.nrows().min(c.ncols()) - r);
        let u = rand_svd(&c, r, p, 0, rs)?.u;
        core = mode_product(&core, &u.transpose(), mode)?;
        factors[mode] = u;
    }
    TuckerDecomposition::new(core, factors, true)
}

/// Orthonormal basis with an a-posteriori error estimate.
#[derive(Debug, Clone)]
pub struct RangeFinderResult {
    pub q: Matrix,
    /// Estimate of `‖A − QQᵀA‖_F / ‖A‖_F`.
    pub estimated_relative_error: f64,
    /// `B = QᵀA`.
    pub b: Matrix,
}

/// Smallest tolerance the `‖A‖² − ‖B‖²` indicator can resolve.
pub fn range_finder_floor() -> f64 {
    f64::EPSILON.sqrt()
}

fn orth(m: &Matrix) -> Result<Matrix> {
    if m.nrows() >= m.ncols() {
        Ok(thin_qr(m)?.0)
    } else {
        Ok(leading_cols(&svd(m).u, m.nrows()))
    }
}

/// Blocked randomized QB range finder with the Frobenius error indicator
/// `‖A‖_F² − ‖B‖_F²` and `power_iters` power iterations per block. Stops once
/// the indicator drops below `(tol·‖A‖_F)²`, after `max_iters` blocks, or when
/// the basis spans the whole range.
pub fn adaptive_range_finder(
    m: &Matrix,
    tol: f64,
    blocksize: usize,
    max_iters: usize,
    power_iters: usize,
    rs: &mut RandomStream,
) -> Result<RangeFinderResult> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(invalid!("tolerance must lie in (0, 1), got {tol}"));
    }
    if blocksize == 0 {
        return Err(invalid!("blocksize must be positive"));
    }
    let floor = range_finder_floor();
    let tol = if tol < floor {
        log::warn!("range finder tolerance {tol:e} is below sqrt(eps); using {floor:e}");
        floor
    } else {
        tol
    };
    let (rows, cols) = m.shape();
    let total = m.norm_squared();
    let limit = rows.min(cols);
    let mut q = Matrix::zeros(rows, 0);
    let mut b = Matrix::zeros(0, cols);
    let mut err = total;
    let threshold = (tol * tol) * total;
    if total == 0.0 {
        return Ok(RangeFinderResult {
            q,
            estimated_relative_error: 0.0,
            b,
        });
    }
    for _ in 0..max_iters {
        if q.ncols() >= limit || err <= threshold {
            break;
        }
        let step = blocksize.min(limit - q.ncols());
        let omega = gaussian(rs, cols, step);
        let mut y = m * &omega - &q * (&b * &omega);
        for _ in 0..power_iters {
            let qi = orth(&y)?;
            let zt = m.transpose() * &qi - b.transpose() * (q.transpose() * &qi);
            let zi = orth(&zt)?;
            y = m * &zi - &q * (&b * &zi);
        }
        let mut qi = orth(&y)?;
        qi = orth(&(&qi - &q * (q.transpose() * &qi)))?;
        let bi = qi.transpose() * m;
        err -= bi.norm_squared();
        let k = q.ncols();
        q = q.resize_horizontally(k + step, 0.0);
        q.columns_mut(k, step).copy_from(&qi);
        b = b.resize_vertically(k + step, 0.0);
        b.rows_mut(k, step).copy_from(&bi);
    }
    Ok(RangeFinderResult {
        q,
        estimated_relative_error: (err.max(0.0) / total).sqrt(),
        b,
    })
}

/// Adaptive range finder followed by an SVD of `B`, keeping the fewest
/// singular vectors whose discarded energy stays below `(tol·‖A‖_F)²`.
pub fn adaptive_basis(
    m: &Matrix,
    tol: f64,
    blocksize: usize,
    max_iters: usize,
    rs: &mut RandomStream,
) -> Result<Matrix> {
    let found = adaptive_range_finder(m, tol, blocksize, max_iters, 1, rs)?;
    let tol = tol.max(range_finder_floor());
    if found.q.ncols() == 0 {
        let mut e = Matrix::zeros(m.nrows(), 1);
        e[(0, 0)] = 1.0;
        return Ok(e);
    }
    let s = svd(&found.b);
    let total = m.norm_squared();
    let budget = (tol * tol) * total;
    let mut tail: f64 = total - s.singular_values.iter().map(|x| x * x).sum::<f64>();
    tail = tail.max(0.0);
    let mut keep = s.singular_values.len();
    while keep > 1 {
        let sj = s.singular_values[keep - 1];
        if tail + sj * sj > budget {
            break;
        }
        tail += sj * sj;
        keep -= 1;
    }
    Ok(&found.q * leading_cols(&s.u, keep))
}

/// Default blocksize `⌊0.1·n⌋`, at least 1.
pub fn default_blocksize(n: usize) -> usize {
    (n / 10).max(1)
}

/// Adaptive randomized STHOSVD with per-mode tolerance `tol/√d`. A
/// `blocksize` of `None` uses `⌊0.1·n_i⌋` for each mode.
pub fn adaptive_r_sthosvd(
    a: &DenseTensor,
    tol: f64,
    blocksize: Option<usize>,
    order: &[usize],
    rs: &mut RandomStream,
) -> Result<TuckerDecomposition> {
    check_order(order, a.order())?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(invalid!("tolerance must lie in (0, 1), got {tol}"));
    }
    let d = a.order();
    if a.frobenius_norm() == 0.0 {
        return Ok(crate::rtsms::zero_decomposition(a.dims()));
    }
    let mode_tol = tol / (d as f64).sqrt();
    let mut core = a.clone();
    let mut factors = vec![Matrix::zeros(0, 0); d];
    for &mode in order {
        let c = unfold(&core, mode)?;
        let b = blocksize.unwrap_or_else(|| default_blocksize(c.nrows()));
        let u = adaptive_basis(&c, mode_tol, b, 10, rs)?;
        core = mode_product(&core, &u.transpose(), mode)?;
        factors[mode] = u;
    }
    TuckerDecomposition::new(core, factors, true)
}

/// Generalized Nyström `A ≈ U·Vᵀ` with a right sketch of `r` columns and a
/// left sketch of `r_hat` rows. `U` is `m × r`, `V` is `n × r`.
pub fn gn(a: &Matrix, r: usize, r_hat: usize, rs: &mut RandomStream) -> Result<(Matrix, Matrix)> {
    let (m, n) = a.shape();
    if r == 0 || r > r_hat || r > n || r_hat > m {
        return Err(invalid!(
            "generalized Nyström needs 1 <= r <= r_hat, r <= {n}, r_hat <= {m}; got r={r}, r_hat={r_hat}"
        ));
    }
    let x = gaussian(rs, n, r);
    let y = gaussian(rs, r_hat, m);
    let ax = a * &x;
    let ya = &y * a;
    let yax = &ya * &x;
    let (q, tri) = thin_qr(&yax)?;
    let u = right_tri_solve(&ax, &tri)?;
    let v = (q.transpose() * ya).transpose();
    Ok((u, v))
}

/// Solves `U·R = B` for `U` with upper-triangular `R`.
fn right_tri_solve(b: &Matrix, tri: &Matrix) -> Result<Matrix> {
    if let Some(i) = (0..tri.nrows()).find(|&i| tri[(i, i)] == 0.0) {
        return Err(Error::Singular(format!("zero diagonal entry at {i}")));
    }
    let ut = tri
        .transpose()
        .solve_lower_triangular(&b.transpose())
        .ok_or_else(|| Error::Singular("triangular factor is singular".into()))?;
    Ok(ut.transpose())
}

/// Sequentially truncated Tucker via generalized Nyström, oversampling the
/// left sketch by `⌊r_i/2⌋`.
pub fn r_gn_st_tucker(
    a: &DenseTensor,
    ranks: &[usize],
    order: &[usize],
    rs: &mut RandomStream,
) -> Result<TuckerDecomposition> {
    check_ranks(ranks, a.dims())?;
    check_order(order, a.order())?;
    let mut core = a.clone();
    let mut factors = vec![Matrix::zeros(0, 0); a.order()];
    for &mode in order {
        let c = unfold(&core, mode)?;
        let r = ranks[mode].min(c.ncols());
        let r_hat = (r + r / 2).min(c.nrows());
        let (u, v) = gn(&c, r, r_hat, rs)?;
        let mut dims = core.dims().to_vec();
        dims[mode] = r;
        core = crate::tensor::fold(&v.transpose(), mode, &dims)?;
        factors[mode] = u;
    }
    TuckerDecomposition::new(core, factors, false)
}
