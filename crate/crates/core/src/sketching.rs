//! Seeded randomness, random sketches and the small dense kernels
//! (thin QR, SVD, triangular solves) used by every algorithm in the crate.

use std::fmt;
use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustdct::{Dct2, DctPlanner};

use crate::error::{invalid, Error, Result};
use crate::tensor::Matrix;

/// Deterministic stream of random draws.
///
/// Every randomized routine takes a `&mut RandomStream`; two streams built
/// from the same seed produce identical draws. [`RandomStream::fork`] derives
/// an independent child stream, which is how per-mode and per-phase
/// randomness is kept separate.
#[derive(Clone)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl fmt::Debug for RandomStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RandomStream")
            .field("seed", &self.seed)
            .field("word_pos", &self.rng.get_word_pos())
            .finish()
    }
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Seed this stream was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives a child stream; advances `self` by one draw.
    pub fn fork(&mut self) -> RandomStream {
        RandomStream::new(self.rng.next_u64())
    }

    /// Uniform draw in the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn sign(&mut self) -> f64 {
        if self.rng.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    }

    /// `amount` distinct indices drawn uniformly from `0..len`.
    pub fn choose_indices(&mut self, len: usize, amount: usize) -> Vec<usize> {
        index::sample(&mut self.rng, len, amount).into_vec()
    }
}

/// `rows × cols` matrix of i.i.d. standard normal entries, filled column by column.
pub fn gaussian(rs: &mut RandomStream, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rs.standard_normal())
}

/// Subsampled randomized trigonometric transform `Y = sqrt(z/s) · D · C · P`.
///
/// `D` is a random ±1 diagonal, `C` the orthonormal DCT-II of length `z`
/// and `P` selects `s` of the `z` transformed coordinates uniformly without
/// replacement. The same `Srft` can be applied to any number of matrices,
/// which is what allows a sketch to be extended by extra rows later.
#[derive(Clone)]
pub struct Srft {
    signs: Vec<f64>,
    selected: Vec<usize>,
    dct: Arc<dyn Dct2<f64>>,
}

impl fmt::Debug for Srft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Srft")
            .field("input_len", &self.signs.len())
            .field("output_len", &self.selected.len())
            .finish()
    }
}

impl Srft {
    pub fn draw(z: usize, s: usize, rs: &mut RandomStream) -> Result<Self> {
        if s == 0 || s > z {
            return Err(invalid!("SRFT output size {s} must lie in 1..={z}"));
        }
        let signs = (0..z).map(|_| rs.sign()).collect();
        let selected = rs.choose_indices(z, s);
        let dct = DctPlanner::new().plan_dct2(z);
        Ok(Self {
            signs,
            selected,
            dct,
        })
    }

    /// Builds the transform with an explicit column selection (test hook for
    /// the full, unpermuted transform).
    pub fn with_selection(z: usize, selected: Vec<usize>, rs: &mut RandomStream) -> Result<Self> {
        if selected.is_empty() || selected.iter().any(|&j| j >= z) {
            return Err(invalid!("SRFT selection out of range for length {z}"));
        }
        let signs = (0..z).map(|_| rs.sign()).collect();
        let dct = DctPlanner::new().plan_dct2(z);
        Ok(Self {
            signs,
            selected,
            dct,
        })
    }

    pub fn input_len(&self) -> usize {
        self.signs.len()
    }

    pub fn output_len(&self) -> usize {
        self.selected.len()
    }

    /// Computes `m · Y` for an `r × z` matrix `m`; cost O(r·z·log z).
    pub fn apply_right(&self, m: &Matrix) -> Result<Matrix> {
        let z = self.input_len();
        if m.ncols() != z {
            return Err(invalid!(
                "SRFT expects {} columns, matrix has {}",
                z,
                m.ncols()
            ));
        }
        let s = self.output_len();
        let scale = (z as f64 / s as f64).sqrt();
        let dc = (1.0 / z as f64).sqrt();
        let ac = (2.0 / z as f64).sqrt();
        let mut out = Matrix::zeros(m.nrows(), s);
        let mut buf = vec![0.0; z];
        let mut scratch = vec![0.0; self.dct.get_scratch_len()];
        for i in 0..m.nrows() {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = m[(i, j)] * self.signs[j];
            }
            self.dct.process_dct2_with_scratch(&mut buf, &mut scratch);
            for (c, &j) in self.selected.iter().enumerate() {
                let norm = if j == 0 { dc } else { ac };
                out[(i, c)] = scale * norm * buf[j];
            }
        }
        Ok(out)
    }
}

/// Draws an SRFT with `s` output columns and applies it to `m` from the right.
pub fn srft_right_apply(m: &Matrix, s: usize, rs: &mut RandomStream) -> Result<Matrix> {
    Srft::draw(m.ncols(), s, rs)?.apply_right(m)
}

/// Thin Householder QR of a tall matrix: `m = Q·R` with `Q` having
/// orthonormal columns and `R` square upper-triangular.
pub fn thin_qr(m: &Matrix) -> Result<(Matrix, Matrix)> {
    if m.nrows() < m.ncols() {
        return Err(invalid!(
            "thin QR needs rows >= cols, got {}x{}",
            m.nrows(),
            m.ncols()
        ));
    }
    let qr = m.clone().qr();
    Ok((qr.q(), qr.r()))
}

/// Thin SVD `m ≈ U · diag(σ) · Vᵀ` with singular values in descending order.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

impl SvdResult {
    /// Keeps the leading `r` triplets.
    pub fn truncate(mut self, r: usize) -> Self {
        let r = r.min(self.singular_values.len());
        self.u = self.u.columns(0, r).into_owned();
        self.v = self.v.columns(0, r).into_owned();
        self.singular_values.truncate(r);
        self
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

fn as_faer(m: &Matrix) -> faer::MatRef<'_, f64> {
    faer::MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
}

fn from_faer(m: faer::MatRef<'_, f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD, `min(rows, cols)` triplets.
pub fn svd(m: &Matrix) -> SvdResult {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return SvdResult {
            u: Matrix::zeros(rows, 0),
            singular_values: Vec::new(),
            v: Matrix::zeros(cols, 0),
        };
    }
    if m.iter().any(|x| !x.is_finite()) {
        let k = rows.min(cols);
        return SvdResult {
            u: Matrix::from_element(rows, k, f64::NAN),
            singular_values: vec![f64::NAN; k],
            v: Matrix::from_element(cols, k, f64::NAN),
        };
    }
    let dec = as_faer(m)
        .thin_svd()
        .expect("SVD of a finite matrix converges");
    SvdResult {
        u: from_faer(dec.U()),
        singular_values: dec.S().column_vector().iter().copied().collect(),
        v: from_faer(dec.V()),
    }
}

/// Singular values only, descending.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    if m.iter().any(|x| !x.is_finite()) {
        return vec![f64::NAN; rows.min(cols)];
    }
    as_faer(m)
        .singular_values()
        .expect("SVD of a finite matrix converges")
}

/// Solves `R · X = B` for upper-triangular `R`.
pub fn tri_solve(r: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !r.is_square() || r.nrows() != b.nrows() {
        return Err(invalid!(
            "triangular solve with {}x{} factor and {} right-hand rows",
            r.nrows(),
            r.ncols(),
            b.nrows()
        ));
    }
    if let Some(i) = (0..r.nrows()).find(|&i| r[(i, i)] == 0.0) {
        return Err(Error::Singular(format!("zero diagonal entry at {i}")));
    }
    r.solve_upper_triangular(b)
        .ok_or_else(|| Error::Singular("triangular factor is singular".into()))
}

/// Smallest `l` such that `σ_{l+1} ≤ tol · σ_1` (1-based σ), i.e. the number
/// of leading singular values strictly above the threshold. Returns
/// `sv.len()` when no singular value falls below it, and 0 for a zero spectrum.
pub fn numerical_rank(sv: &[f64], tol: f64) -> usize {
    let Some(&top) = sv.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    sv.iter().position(|&s| s <= tol * top).unwrap_or(sv.len())
}
