//! Randomized Tucker decomposition with single-mode sketching.
//!
//! Each mode is processed once, in the configured order: the current core is
//! sketched from the left along that mode only (`ℬ ×_i Ω_i`), and the factor
//! is recovered from a subsampled least-squares problem. The adaptive driver
//! picks the sketch size from a rank probe; the fixed-rank driver takes it
//! from the caller.

use std::borrow::Cow;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{ascending, check_order, check_ranks, eps_rank, sthosvd_with, Truncation};
use crate::error::{invalid, Result};
use crate::rank_estimation::{estimate_rank_with, RankSearch, TensorUnfolding, Unfolding};
use crate::sketched_lsq::{solve_factor, LsqConfig};
use crate::sketching::{
    gaussian, numerical_rank, singular_values, svd, thin_qr, RandomStream, Srft,
};
use crate::tensor::{fold, mode_product, DenseTensor, Matrix, TuckerDecomposition};

#[derive(Debug, Clone, PartialEq)]
pub struct RtsmsConfig {
    /// Target relative tolerance.
    pub tol: f64,
    /// Permutation of `0..d`; `None` processes modes in ascending order.
    pub processing_order: Option<Vec<usize>>,
    pub init_rank: usize,
    pub trial_inflation: f64,
    pub growth: f64,
    /// `r̂ = round(oversample_ratio · r)`.
    pub oversample_ratio: f64,
    /// SRFT oversampling in the rank probe.
    pub k: usize,
    pub lsq: LsqConfig,
    pub convert_to_hosvd: bool,
    /// Apply multilinear singular value thresholding at `tol` during the
    /// HOSVD conversion (adaptive driver only).
    pub threshold_after: bool,
    pub in_loop_truncation: bool,
    /// Record the residual of every per-mode fit and the spectral norm of
    /// every factor in the report. Costs one extra pass per mode.
    pub track_residuals: bool,
}

impl Default for RtsmsConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            processing_order: None,
            init_rank: 10,
            trial_inflation: 1.1,
            growth: 1.7,
            oversample_ratio: 1.5,
            k: 4,
            lsq: LsqConfig::default(),
            convert_to_hosvd: false,
            threshold_after: true,
            in_loop_truncation: false,
            track_residuals: false,
        }
    }
}

impl RtsmsConfig {
    /// Plain Tucker output at tolerance `tol`.
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    /// HOSVD output with thresholding at `tol`.
    pub fn hosvd(tol: f64) -> Self {
        Self {
            tol,
            convert_to_hosvd: true,
            ..Self::default()
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(invalid!("tolerance must lie in (0, 1), got {}", self.tol));
        }
        if !(self.growth > 1.0) {
            return Err(invalid!("growth factor must exceed 1"));
        }
        if !(self.oversample_ratio >= 1.0) || !(self.trial_inflation >= 1.0) {
            return Err(invalid!("inflation ratios must be at least 1"));
        }
        if self.init_rank == 0 || self.k == 0 {
            return Err(invalid!("initial rank and k must be positive"));
        }
        if let Some(order) = &self.processing_order {
            check_order(order, d)?;
        }
        self.lsq.validate()
    }

    fn order(&self, d: usize) -> Vec<usize> {
        self.processing_order
            .clone()
            .unwrap_or_else(|| ascending(d))
    }

    fn search(&self) -> RankSearch {
        RankSearch {
            init_rank: self.init_rank,
            trial_inflation: self.trial_inflation,
            growth: self.growth,
            k: self.k,
        }
    }
}

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub sketch: f64,
    pub rank_est: f64,
    pub lsq: f64,
    pub convert: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: String,
    pub tol: Option<f64>,
    /// Requested multilinear rank for fixed-rank runs.
    pub ranks: Option<Vec<usize>>,
    /// Core dims before any thresholding.
    pub ranks_raw: Vec<usize>,
    /// Core dims of the returned decomposition.
    pub ranks_thresholded: Vec<usize>,
    pub relative_residual: Option<f64>,
    /// Residual obtained by sampling rather than full reconstruction.
    #[serde(default)]
    pub estimated: bool,
    pub seconds: PhaseTimes,
    pub seed: u64,
    pub compression_ratio: Option<f64>,
    /// `‖ℬ_old − ℬ_new ×_i F_i‖_F` per processed mode, in processing order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_residuals: Option<Vec<f64>>,
    /// `‖F_i‖_2` per processed mode, in processing order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor_norms: Option<Vec<f64>>,
}

impl RunReport {
    pub fn new(algorithm: &str, seed: u64) -> Self {
        Self {
            algorithm: algorithm.to_string(),
            tol: None,
            ranks: None,
            ranks_raw: Vec::new(),
            ranks_thresholded: Vec::new(),
            relative_residual: None,
            estimated: false,
            seconds: PhaseTimes::default(),
            seed,
            compression_ratio: None,
            mode_residuals: None,
            factor_norms: None,
        }
    }
}

/// Decomposition of the zero tensor: zero core of ranks `(1,…,1)`.
pub fn zero_decomposition(dims: &[usize]) -> TuckerDecomposition {
    let core = DenseTensor::zeros(vec![1; dims.len()]).expect("order >= 1");
    let factors = dims
        .iter()
        .map(|&n| {
            let mut e = Matrix::zeros(n, 1);
            e[(0, 0)] = 1.0;
            e
        })
        .collect();
    TuckerDecomposition::new(core, factors, true).expect("shapes agree")
}

/// Exact rank-1 decomposition when every entry equals the same value.
fn constant_decomposition(a: &DenseTensor) -> Option<TuckerDecomposition> {
    let first = a.data()[0];
    if a.data().iter().any(|&x| x != first) {
        return None;
    }
    if first == 0.0 {
        return Some(zero_decomposition(a.dims()));
    }
    let scale: f64 = a.dims().iter().map(|&n| (n as f64).sqrt()).product();
    let core = DenseTensor::new(vec![1; a.order()], vec![first * scale]).ok()?;
    let factors = a
        .dims()
        .iter()
        .map(|&n| Matrix::from_element(n, 1, 1.0 / (n as f64).sqrt()))
        .collect();
    TuckerDecomposition::new(core, factors, true).ok()
}

fn add_elapsed(slot: &mut f64, since: Instant) {
    *slot += since.elapsed().as_secs_f64();
}

/// Ω, Ω·M and the right-sketch triangle for one mode.
struct ModeSketch {
    omega_m: Matrix,
    triangle: Option<Matrix>,
}

/// `round(ratio · r)`, half away from zero, within `1..=cap`.
fn inflate(r: usize, ratio: f64, cap: usize) -> usize {
    ((ratio * r as f64).round() as usize).clamp(1, cap)
}

/// Triangle of a thin QR of `(om·Y)ᵀ` for a fresh SRFT `Y` with `k·r̂`
/// columns, or `None` when fewer than `r̂` columns are available.
fn right_triangle(om: &Matrix, k: usize, rs: &mut RandomStream) -> Result<Option<Matrix>> {
    let (r, z) = om.shape();
    let s = (k * r).min(z);
    if s < r {
        return Ok(None);
    }
    let y = Srft::draw(z, s, rs)?.apply_right(om)?;
    Ok(Some(thin_qr(&y.transpose())?.1))
}

fn stack_rows(top: &Matrix, bottom: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

fn fixed_sketch(
    op: &TensorUnfolding<'_>,
    r_hat: usize,
    k: usize,
    rs: &mut RandomStream,
) -> Result<ModeSketch> {
    let omega = gaussian(rs, r_hat, op.nrows());
    let omega_m = op.left_multiply(&omega)?;
    let triangle = right_triangle(&omega_m, k, rs)?;
    Ok(ModeSketch { omega_m, triangle })
}

fn adaptive_sketch(
    op: &TensorUnfolding<'_>,
    cfg: &RtsmsConfig,
    rs: &mut RandomStream,
    times: &mut PhaseTimes,
) -> Result<(usize, ModeSketch)> {
    let t = Instant::now();
    let probe = estimate_rank_with(op, cfg.tol, &cfg.search(), rs)?;
    add_elapsed(&mut times.rank_est, t);

    let t = Instant::now();
    let n = op.nrows();
    let detected = probe.detected_rank.max(1);
    let r_hat = inflate(detected, cfg.oversample_ratio, n);
    let trial = probe.trial_rank;
    let sketch = if r_hat <= trial {
        ModeSketch {
            omega_m: probe.omega_m.rows(0, r_hat).into_owned(),
            triangle: Some(probe.qr_r.view((0, 0), (r_hat, r_hat)).upper_triangle()),
        }
    } else {
        let extra = gaussian(rs, r_hat - trial, n);
        let extra_m = op.left_multiply(&extra)?;
        let omega_m = stack_rows(&probe.omega_m, &extra_m);
        let triangle = if probe.srft.output_len() >= r_hat {
            let y = stack_rows(&probe.sketch, &probe.srft.apply_right(&extra_m)?);
            Some(thin_qr(&y.transpose())?.1)
        } else {
            right_triangle(&omega_m, cfg.k, rs)?
        };
        ModeSketch { omega_m, triangle }
    };
    add_elapsed(&mut times.sketch, t);
    Ok((detected, sketch))
}

/// Adaptive RTSMS at tolerance `cfg.tol`.
pub fn rtsms(
    a: &DenseTensor,
    cfg: &RtsmsConfig,
    rs: &mut RandomStream,
) -> Result<(TuckerDecomposition, RunReport)> {
    let name = if cfg.convert_to_hosvd {
        "rhosvdsms"
    } else {
        "rtsms"
    };
    run(a, None, cfg, rs, name)
}

/// RTSMS with a prescribed multilinear rank; the core has dims
/// `round(oversample_ratio · r_i)` (capped at `n_i`) unless converted to
/// HOSVD, in which case it is truncated back to `ranks`.
pub fn rtsms_fixed_rank(
    a: &DenseTensor,
    ranks: &[usize],
    cfg: &RtsmsConfig,
    rs: &mut RandomStream,
) -> Result<(TuckerDecomposition, RunReport)> {
    check_ranks(ranks, a.dims())?;
    let name = if cfg.convert_to_hosvd {
        "rhosvdsms-fixed"
    } else {
        "rtsms-fixed"
    };
    run(a, Some(ranks), cfg, rs, name)
}

fn run(
    a: &DenseTensor,
    ranks: Option<&[usize]>,
    cfg: &RtsmsConfig,
    rs: &mut RandomStream,
    name: &str,
) -> Result<(TuckerDecomposition, RunReport)> {
    let start = Instant::now();
    let d = a.order();
    cfg.validate(d)?;
    let mut report = RunReport::new(name, rs.seed());
    report.ranks = ranks.map(<[usize]>::to_vec);
    report.tol = if ranks.is_none() || cfg.in_loop_truncation {
        Some(cfg.tol)
    } else {
        None
    };

    if let Some(dec) = constant_decomposition(a) {
        report.ranks_raw = dec.ranks();
        report.ranks_thresholded = dec.ranks();
        report.seconds.total = start.elapsed().as_secs_f64();
        return Ok((dec, report));
    }

    let mut times = PhaseTimes::default();
    let mut current: Cow<'_, DenseTensor> = Cow::Borrowed(a);
    let mut factors = vec![Matrix::zeros(0, 0); d];
    let mut first = true;
    for mode in cfg.order(d) {
        let n = a.dims()[mode];
        if n == 1 {
            factors[mode] = Matrix::identity(1, 1);
            continue;
        }
        let op = TensorUnfolding::new(&current, mode)?;
        let sketch = match ranks {
            Some(r) => {
                let t = Instant::now();
                let s = fixed_sketch(&op, inflate(r[mode], cfg.oversample_ratio, n), cfg.k, rs)?;
                add_elapsed(&mut times.sketch, t);
                s
            }
            None => adaptive_sketch(&op, cfg, rs, &mut times)?.1,
        };

        let t = Instant::now();
        let mut factor = solve_factor(
            &sketch.omega_m,
            &op,
            sketch.triangle.as_ref(),
            &cfg.lsq,
            first,
            rs,
        )?;
        add_elapsed(&mut times.lsq, t);

        let t = Instant::now();
        let mut dims = current.dims().to_vec();
        dims[mode] = sketch.omega_m.nrows();
        let mut next = fold(&sketch.omega_m, mode, &dims)?;
        if cfg.in_loop_truncation {
            (factor, next) = in_loop_truncate(&factor, &next, mode, cfg.tol)?;
        }
        add_elapsed(&mut times.sketch, t);

        if cfg.track_residuals {
            let fit = mode_product(&next, &factor, mode)?;
            let e = current.sub(&fit)?.frobenius_norm();
            let norm = singular_values(&factor).first().copied().unwrap_or(0.0);
            report.mode_residuals.get_or_insert_with(Vec::new).push(e);
            report.factor_norms.get_or_insert_with(Vec::new).push(norm);
        }
        factors[mode] = factor;
        current = Cow::Owned(next);
        first = false;
    }

    let mut dec = TuckerDecomposition::new(current.into_owned(), factors, false)?;
    report.ranks_raw = dec.ranks();
    if cfg.convert_to_hosvd {
        let t = Instant::now();
        let rule = match ranks {
            Some(r) => Truncation::Ranks(r.to_vec()),
            None if cfg.threshold_after => Truncation::Tolerance(cfg.tol),
            None => Truncation::Full,
        };
        dec = tucker_to_hosvd_with(&dec, &rule)?;
        add_elapsed(&mut times.convert, t);
    }
    report.ranks_thresholded = dec.ranks();
    times.total = start.elapsed().as_secs_f64();
    report.seconds = times;
    Ok((dec, report))
}

/// Converts a Tucker decomposition to HOSVD form, optionally thresholding
/// the multilinear singular values at `tol` (keep `σ_j ≥ tol·σ_1`).
pub fn tucker_to_hosvd(dec: &TuckerDecomposition, tol: Option<f64>) -> Result<TuckerDecomposition> {
    match tol {
        Some(t) => tucker_to_hosvd_with(dec, &Truncation::Tolerance(t)),
        None => tucker_to_hosvd_with(dec, &Truncation::Full),
    }
}

/// As [`tucker_to_hosvd`] with an arbitrary truncation rule applied to the
/// modal singular values of the core. Ranks larger than available are
/// clipped.
pub fn tucker_to_hosvd_with(
    dec: &TuckerDecomposition,
    rule: &Truncation,
) -> Result<TuckerDecomposition> {
    let d = dec.core.order();
    let mut core = dec.core.clone();
    let mut qs = Vec::with_capacity(d);
    for (mode, f) in dec.factors.iter().enumerate() {
        let (q, r) = if f.nrows() >= f.ncols() {
            thin_qr(f)?
        } else {
            (Matrix::identity(f.nrows(), f.nrows()), f.clone())
        };
        core = mode_product(&core, &r, mode)?;
        qs.push(q);
    }
    let sweep = sthosvd_with(&core, &ascending(d), &Truncation::Full)?;
    let full = sweep.decomposition;
    let keep: Vec<usize> = (0..d)
        .map(|m| {
            let avail = full.factors[m].ncols();
            let sv = &sweep.mode_singular_values[m];
            let k = match rule {
                Truncation::Full => avail,
                Truncation::Ranks(r) => r[m],
                Truncation::Tolerance(tol) => eps_rank(sv, *tol),
            };
            k.clamp(1, avail)
        })
        .collect();
    let core = full.core.leading_block(&keep)?;
    let factors = qs
        .iter()
        .zip(&full.factors)
        .zip(&keep)
        .map(|((q, u), &k)| q * u.columns(0, k))
        .collect();
    TuckerDecomposition::new(core, factors, true)
}

/// Reduces a factor whose singular values drop below `tol·σ_1`: with
/// `F ≈ U_ℓΣ_ℓ·V_ℓᵀ` the factor becomes `U_ℓΣ_ℓ` and `V_ℓᵀ` is folded into
/// mode `mode` of the core. Returns the inputs unchanged otherwise.
pub fn in_loop_truncate(
    factor: &Matrix,
    core: &DenseTensor,
    mode: usize,
    tol: f64,
) -> Result<(Matrix, DenseTensor)> {
    let s = svd(factor);
    let cols = factor.ncols();
    let l = numerical_rank(&s.singular_values, tol).max(1);
    if l >= cols {
        return Ok((factor.clone(), core.clone()));
    }
    let s = s.truncate(l);
    let mut f = s.u.clone();
    for (j, sv) in s.singular_values.iter().enumerate() {
        f.column_mut(j).scale_mut(*sv);
    }
    let g = s.v.transpose();
    Ok((f, mode_product(core, &g, mode)?))
}
