//! Dense tensors, modal unfoldings and mode-k products.
//!
//! Storage is column-major (first index varies fastest) and unfoldings follow
//! the Kolda–Bader column order, so the mode-0 unfolding of a tensor is its
//! data buffer reinterpreted as an `n_0 × (n_1⋯n_{d-1})` matrix.
//!
//! Modes are 0-based throughout the library API.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};

use crate::error::{invalid, mismatch, Result};
use crate::sketching::RandomStream;

/// Dense column-major matrix used for unfoldings, factors and sketches.
pub type Matrix = DMatrix<f64>;

/// An order-d dense array of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_dims(&dims)?;
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(mismatch!(
                "data length {} does not match dims {:?} (expected {})",
                data.len(),
                dims,
                len
            ));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        check_dims(&dims)?;
        let len = dims.iter().product();
        Ok(Self {
            dims,
            data: vec![0.0; len],
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index (0-based).
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        check_dims(&dims)?;
        let len: usize = dims.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..len {
            data.push(f(&idx));
            for (i, n) in idx.iter_mut().zip(&dims) {
                *i += 1;
                if *i < *n {
                    break;
                }
                *i = 0;
            }
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Linear offset of a 0-based multi-index.
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        let mut stride = 1;
        for (i, n) in idx.iter().zip(&self.dims) {
            off += i * stride;
            stride *= n;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Elementwise difference `self - other`.
    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.dims != other.dims {
            return Err(mismatch!("dims {:?} vs {:?}", self.dims, other.dims));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(DenseTensor {
            dims: self.dims.clone(),
            data,
        })
    }

    /// Product of all dims except `mode`.
    pub fn complement_len(&self, mode: usize) -> usize {
        self.len() / self.dims[mode]
    }

    /// Extracts the mode-`mode` fibers with the given unfolding column indices
    /// as the columns of an `n_mode × cols.len()` matrix.
    pub fn gather_fibers(&self, mode: usize, cols: &[usize]) -> Result<Matrix> {
        check_mode(self, mode)?;
        let (left, n, _) = split_dims(&self.dims, mode);
        let z = self.complement_len(mode);
        let mut out = Matrix::zeros(n, cols.len());
        for (c, &col) in cols.iter().enumerate() {
            if col >= z {
                return Err(invalid!("fiber index {col} out of range (< {z})"));
            }
            let (il, ir) = (col % left, col / left);
            let base = il + left * n * ir;
            for t in 0..n {
                out[(t, c)] = self.data[base + left * t];
            }
        }
        Ok(out)
    }

    /// Copies the leading `sub_dims` block (`0..sub_dims[i]` along each mode).
    pub fn leading_block(&self, sub_dims: &[usize]) -> Result<DenseTensor> {
        if sub_dims.len() != self.order() || sub_dims.iter().zip(&self.dims).any(|(s, n)| *s > *n) {
            return Err(mismatch!(
                "block {:?} does not fit in {:?}",
                sub_dims,
                self.dims
            ));
        }
        DenseTensor::from_fn(sub_dims.to_vec(), |idx| self.get(idx))
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(invalid!("tensor order must be at least 1"));
    }
    if dims.contains(&0) {
        return Err(invalid!("every dimension must be positive, got {:?}", dims));
    }
    Ok(())
}

fn check_mode(t: &DenseTensor, mode: usize) -> Result<()> {
    if mode >= t.order() {
        return Err(invalid!(
            "mode {} out of range for order-{} tensor",
            mode,
            t.order()
        ));
    }
    Ok(())
}

/// (product of dims before `mode`, dims[mode], product of dims after `mode`)
fn split_dims(dims: &[usize], mode: usize) -> (usize, usize, usize) {
    let left = dims[..mode].iter().product();
    let right = dims[mode + 1..].iter().product();
    (left, dims[mode], right)
}

/// Mode-`mode` unfolding: an `n_mode × n_(-mode)` matrix whose columns are the
/// mode fibers in Kolda–Bader order.
pub fn unfold(t: &DenseTensor, mode: usize) -> Result<Matrix> {
    check_mode(t, mode)?;
    let (left, n, right) = split_dims(&t.dims, mode);
    if left == 1 {
        return Ok(Matrix::from_column_slice(n, right, &t.data));
    }
    let mut out = vec![0.0; t.len()];
    for ir in 0..right {
        for ik in 0..n {
            let src = &t.data[left * (ik + n * ir)..left * (ik + n * ir + 1)];
            let col0 = left * ir;
            for (il, v) in src.iter().enumerate() {
                out[ik + n * (col0 + il)] = *v;
            }
        }
    }
    Ok(Matrix::from_vec(n, left * right, out))
}

/// Inverse of [`unfold`].
pub fn fold(m: &Matrix, mode: usize, dims: &[usize]) -> Result<DenseTensor> {
    check_dims(dims)?;
    if mode >= dims.len() {
        return Err(invalid!(
            "mode {} out of range for order {}",
            mode,
            dims.len()
        ));
    }
    let (left, n, right) = split_dims(dims, mode);
    if m.nrows() != n || m.ncols() != left * right {
        return Err(mismatch!(
            "cannot fold {}x{} matrix into dims {:?} along mode {}",
            m.nrows(),
            m.ncols(),
            dims,
            mode
        ));
    }
    let src = m.as_slice();
    if left == 1 {
        return DenseTensor::new(dims.to_vec(), src.to_vec());
    }
    let mut data = vec![0.0; src.len()];
    for ir in 0..right {
        for ik in 0..n {
            let dst = &mut data[left * (ik + n * ir)..left * (ik + n * ir + 1)];
            let col0 = left * ir;
            for (il, v) in dst.iter_mut().enumerate() {
                *v = src[ik + n * (col0 + il)];
            }
        }
    }
    DenseTensor::new(dims.to_vec(), data)
}

/// Mode-`mode` product `t ×_mode m`, i.e. the tensor whose mode unfolding is
/// `m · unfold(t, mode)`.
///
/// Works slab by slab on the column-major buffer, so no permuted copy of the
/// input is ever formed.
pub fn mode_product(t: &DenseTensor, m: &Matrix, mode: usize) -> Result<DenseTensor> {
    check_mode(t, mode)?;
    let (left, n, right) = split_dims(&t.dims, mode);
    if m.ncols() != n {
        return Err(mismatch!(
            "matrix has {} columns but mode {} has dimension {}",
            m.ncols(),
            mode,
            n
        ));
    }
    let rows = m.nrows();
    let mut dims = t.dims.clone();
    dims[mode] = rows;
    if rows == 0 {
        return Err(invalid!("mode product with an empty matrix"));
    }

    if left == 1 {
        let a = DMatrixView::from_slice(&t.data, n, right);
        let out = m * a;
        return DenseTensor::new(dims, out.data.into());
    }

    let mt = m.transpose();
    let mut out = vec![0.0; left * rows * right];
    let in_slab = left * n;
    let out_slab = left * rows;
    for (src, dst) in t
        .data
        .chunks_exact(in_slab)
        .zip(out.chunks_exact_mut(out_slab))
    {
        let x = DMatrixView::from_slice(src, left, n);
        let mut y = DMatrixViewMut::from_slice(dst, left, rows);
        y.gemm(1.0, &x, &mt, 0.0);
    }
    DenseTensor::new(dims, out)
}

/// Tucker decomposition `core ×_0 F_0 ×_1 F_1 ⋯`.
#[derive(Debug, Clone, PartialEq)]
pub struct TuckerDecomposition {
    pub core: DenseTensor,
    pub factors: Vec<Matrix>,
    /// Factors have orthonormal columns and the core is all-orthogonal.
    pub is_hosvd: bool,
}

impl TuckerDecomposition {
    pub fn new(core: DenseTensor, factors: Vec<Matrix>, is_hosvd: bool) -> Result<Self> {
        if factors.len() != core.order() {
            return Err(mismatch!(
                "{} factors for an order-{} core",
                factors.len(),
                core.order()
            ));
        }
        for (i, (f, r)) in factors.iter().zip(core.dims()).enumerate() {
            if f.ncols() != *r {
                return Err(mismatch!(
                    "factor {} has {} columns but core dim is {}",
                    i,
                    f.ncols(),
                    r
                ));
            }
            if f.nrows() == 0 {
                return Err(invalid!("factor {i} has no rows"));
            }
        }
        Ok(Self {
            core,
            factors,
            is_hosvd,
        })
    }

    /// Core dimensions (the multilinear rank of the representation).
    pub fn ranks(&self) -> Vec<usize> {
        self.core.dims().to_vec()
    }

    /// Dimensions of the tensor the decomposition represents.
    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    /// Number of stored floats: core plus all factors.
    pub fn storage(&self) -> usize {
        self.core.len() + self.factors.iter().map(|f| f.len()).sum::<usize>()
    }

    /// Materializes the full tensor, applying the factors in ascending mode order.
    pub fn reconstruct(&self) -> DenseTensor {
        let mut t = self.core.clone();
        for (mode, f) in self.factors.iter().enumerate() {
            t = mode_product(&t, f, mode).expect("decomposition shapes are validated");
        }
        t
    }
}

/// `‖a − reconstruct(dec)‖_F / ‖a‖_F`.
pub fn relative_residual(a: &DenseTensor, dec: &TuckerDecomposition) -> Result<f64> {
    let norm = a.frobenius_norm();
    if norm == 0.0 {
        return Err(invalid!("relative residual of a zero tensor is undefined"));
    }
    let diff = a.sub(&dec.reconstruct())?;
    Ok(diff.frobenius_norm() / norm)
}

/// Element count above which [`residual_with_cap`] stops materializing the
/// reconstruction.
pub const DEFAULT_RESIDUAL_CAP: usize = 1 << 27;

/// Mode-0 fiber `col` of the tensor represented by `dec`.
fn tucker_fiber(dec: &TuckerDecomposition, col: usize) -> Vec<f64> {
    let dims = dec.dims();
    let ranks = dec.ranks();
    let mut w = vec![1.0];
    let mut rem = col;
    for m in 1..dims.len() {
        let i = rem % dims[m];
        rem /= dims[m];
        let row = dec.factors[m].row(i);
        let mut next = Vec::with_capacity(w.len() * ranks[m]);
        for j in 0..ranks[m] {
            next.extend(w.iter().map(|v| v * row[j]));
        }
        w = next;
    }
    let g0 = DMatrixView::from_slice(dec.core.data(), ranks[0], w.len());
    let coeff = g0 * nalgebra::DVector::from_vec(w);
    (&dec.factors[0] * coeff).data.into()
}

/// Estimates `‖a − reconstruct(dec)‖_F / ‖a‖_F` from `samples` mode-0 fibers
/// drawn uniformly with replacement. `‖a‖_F` is computed exactly.
pub fn sampled_relative_residual(
    a: &DenseTensor,
    dec: &TuckerDecomposition,
    samples: usize,
    rs: &mut RandomStream,
) -> Result<f64> {
    if dec.dims() != a.dims() {
        return Err(mismatch!(
            "decomposition dims {:?} vs tensor {:?}",
            dec.dims(),
            a.dims()
        ));
    }
    let norm = a.frobenius_norm();
    if norm == 0.0 {
        return Err(invalid!("relative residual of a zero tensor is undefined"));
    }
    if samples == 0 {
        return Err(invalid!("at least one fiber must be sampled"));
    }
    let n0 = a.dims()[0];
    let z = a.complement_len(0);
    let mut acc = 0.0;
    for _ in 0..samples {
        let col = ((rs.uniform() * z as f64) as usize).min(z - 1);
        let fiber = tucker_fiber(dec, col);
        let start = col * n0;
        acc += a.data[start..start + n0]
            .iter()
            .zip(&fiber)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>();
    }
    Ok((acc * z as f64 / samples as f64).sqrt() / norm)
}

/// Exact residual when `a` has at most `cap` elements, otherwise a sampled
/// estimate. The flag reports whether the value is an estimate.
pub fn residual_with_cap(
    a: &DenseTensor,
    dec: &TuckerDecomposition,
    cap: usize,
    rs: &mut RandomStream,
) -> Result<(f64, bool)> {
    if a.len() <= cap {
        return Ok((relative_residual(a, dec)?, false));
    }
    let samples = a.complement_len(0).min(4096);
    Ok((sampled_relative_residual(a, dec, samples, rs)?, true))
}

/// Size of the original tensor divided by the storage of the decomposition.
pub fn compression_ratio(original_dims: &[usize], dec: &TuckerDecomposition) -> f64 {
    let original: usize = original_dims.iter().product();
    original as f64 / dec.storage() as f64
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;

    fn seq_tensor(dims: &[usize]) -> DenseTensor {
        let n: usize = dims.iter().product();
        DenseTensor::new(dims.to_vec(), (1..=n).map(|x| x as f64).collect()).unwrap()
    }

    /// Brute-force index map, written directly from the Kolda–Bader formula.
    fn unfold_oracle(t: &DenseTensor, mode: usize) -> Matrix {
        let dims = t.dims();
        let z = t.len() / dims[mode];
        let mut m = Matrix::zeros(dims[mode], z);
        let mut idx = vec![0usize; dims.len()];
        for lin in 0..t.len() {
            let mut rem = lin;
            for (i, n) in idx.iter_mut().zip(dims) {
                *i = rem % n;
                rem /= n;
            }
            let mut col = 0;
            for m_ in 0..dims.len() {
                if m_ == mode {
                    continue;
                }
                let stride: usize = (0..m_).filter(|&l| l != mode).map(|l| dims[l]).product();
                col += idx[m_] * stride;
            }
            m[(idx[mode], col)] = t.data()[lin];
        }
        m
    }

    #[test]
    fn unfold_matrix_mode0_is_identity() {
        let t = DenseTensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = unfold(&t, 0).unwrap();
        assert_eq!(m, Matrix::from_column_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn unfold_2x2x2_examples() {
        let t = seq_tensor(&[2, 2, 2]);
        let m0 = unfold(&t, 0).unwrap();
        assert_eq!(
            m0,
            Matrix::from_row_slice(2, 4, &[1., 3., 5., 7., 2., 4., 6., 8.])
        );
        let m2 = unfold(&t, 2).unwrap();
        assert_eq!(
            m2,
            Matrix::from_row_slice(2, 4, &[1., 2., 3., 4., 5., 6., 7., 8.])
        );
        for mode in 0..3 {
            assert_eq!(unfold(&t, mode).unwrap(), unfold_oracle(&t, mode));
        }
    }

    #[test]
    fn unfold_matches_oracle_on_irregular_shape() {
        let t = seq_tensor(&[3, 4, 2, 5]);
        for mode in 0..4 {
            assert_eq!(unfold(&t, mode).unwrap(), unfold_oracle(&t, mode));
        }
    }

    #[test]
    fn unfold_rejects_bad_mode() {
        let t = seq_tensor(&[2, 2]);
        assert!(matches!(
            unfold(&t, 2),
            Err(crate::Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn fold_examples() {
        let m = Matrix::from_row_slice(2, 4, &[1., 3., 5., 7., 2., 4., 6., 8.]);
        let t = fold(&m, 0, &[2, 2, 2]).unwrap();
        assert_eq!(t.data(), &[1., 2., 3., 4., 5., 6., 7., 8.]);

        let row = Matrix::from_row_slice(1, 5, &[1., 2., 3., 4., 5.]);
        let t = fold(&row, 0, &[1, 5]).unwrap();
        assert_eq!(t.data(), &[1., 2., 3., 4., 5.]);

        assert!(matches!(
            fold(&m, 0, &[3, 2, 2]),
            Err(crate::Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn mode_product_examples() {
        let t = seq_tensor(&[2, 2, 2]);
        for mode in 0..3 {
            let id = Matrix::identity(2, 2);
            assert_eq!(mode_product(&t, &id, mode).unwrap(), t);
        }
        let ones = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let r = mode_product(&t, &ones, 0).unwrap();
        assert_eq!(r.dims(), &[1, 2, 2]);
        assert_eq!(r.data(), &[3.0, 7.0, 11.0, 15.0]);

        let bad = Matrix::zeros(2, 3);
        assert!(matches!(
            mode_product(&t, &bad, 1),
            Err(crate::Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn mode_product_agrees_with_unfolded_multiply() {
        let t = seq_tensor(&[3, 4, 5]);
        let m = Matrix::from_fn(2, 4, |i, j| (i as f64 + 1.0) * 0.5 - j as f64);
        let r = mode_product(&t, &m, 1).unwrap();
        assert_eq!(r.dims(), &[3, 2, 5]);
        let expect = &m * unfold(&t, 1).unwrap();
        let got = unfold(&r, 1).unwrap();
        assert!((got - expect).norm() < 1e-12);
    }

    #[test]
    fn norms() {
        let z = DenseTensor::zeros(vec![3, 3]).unwrap();
        assert_eq!(z.frobenius_norm(), 0.0);
        let t = seq_tensor(&[2, 2, 2]);
        assert!((t.frobenius_norm() - 204f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn reconstruct_identity_factors() {
        let t = seq_tensor(&[2, 3, 2]);
        let dec = TuckerDecomposition::new(
            t.clone(),
            t.dims().iter().map(|&n| Matrix::identity(n, n)).collect(),
            true,
        )
        .unwrap();
        assert_eq!(dec.reconstruct(), t);
        assert!(relative_residual(&t, &dec).unwrap() <= 1e-12);
    }

    #[test]
    fn reconstruct_rank_one_outer_product() {
        let u = [1.0, -2.0];
        let v = [0.5, 3.0, 1.0];
        let w = [2.0, -1.0];
        let core = DenseTensor::new(vec![1, 1, 1], vec![2.0]).unwrap();
        let factors = vec![
            Matrix::from_column_slice(2, 1, &u),
            Matrix::from_column_slice(3, 1, &v),
            Matrix::from_column_slice(2, 1, &w),
        ];
        let dec = TuckerDecomposition::new(core, factors, false).unwrap();
        let rec = dec.reconstruct();
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..2 {
                    let expect = 2.0 * u[i] * v[j] * w[k];
                    assert!((rec.get(&[i, j, k]) - expect).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn relative_residual_rejects_zero() {
        let z = DenseTensor::zeros(vec![2, 2]).unwrap();
        let dec = TuckerDecomposition::new(
            z.clone(),
            vec![Matrix::identity(2, 2), Matrix::identity(2, 2)],
            true,
        )
        .unwrap();
        assert!(relative_residual(&z, &dec).is_err());
    }

    #[test]
    fn compression_ratio_examples() {
        let mk = |dims: &[usize], ranks: &[usize]| {
            let core = DenseTensor::zeros(ranks.to_vec()).unwrap();
            let factors = dims
                .iter()
                .zip(ranks)
                .map(|(&n, &r)| Matrix::zeros(n, r))
                .collect();
            TuckerDecomposition::new(core, factors, false).unwrap()
        };
        let d = mk(&[7, 7], &[7, 7]);
        assert!((compression_ratio(&[7, 7], &d) - 1.0 / 3.0).abs() < 1e-15);

        // 2048·256·256 / (12·9·9 + 2048·12 + 256·9 + 256·9) = 134217728 / 30156
        let d = mk(&[2048, 256, 256], &[12, 9, 9]);
        let cr = compression_ratio(&[2048, 256, 256], &d);
        assert!((cr - 134217728.0 / 30156.0).abs() < 1e-9);
        assert!((cr - 4450.7).abs() < 0.1);

        let d = mk(&[150; 4], &[5; 4]);
        let expect = 150f64.powi(4) / (625.0 + 4.0 * 750.0);
        assert!((compression_ratio(&[150; 4], &d) - expect).abs() < 1e-9);
    }

    #[test]
    fn gather_fibers_matches_unfold_columns() {
        let t = seq_tensor(&[3, 4, 5]);
        for mode in 0..3 {
            let u = unfold(&t, mode).unwrap();
            let cols = [0, 2, u.ncols() - 1];
            let g = t.gather_fibers(mode, &cols).unwrap();
            for (c, &col) in cols.iter().enumerate() {
                assert_eq!(g.column(c), u.column(col));
            }
        }
    }

    #[test]
    fn tucker_shape_validation() {
        let core = DenseTensor::zeros(vec![2, 2]).unwrap();
        let err =
            TuckerDecomposition::new(core, vec![Matrix::zeros(4, 2), Matrix::zeros(4, 3)], false);
        assert!(err.is_err());
    }

    #[test]
    fn sampled_residual_tracks_exact() {
        let mut rs = RandomStream::new(3);
        let core = DenseTensor::from_fn(vec![2, 3, 2], |_| rs.standard_normal()).unwrap();
        let factors = [7, 8, 9]
            .iter()
            .zip([2, 3, 2])
            .map(|(&n, r)| Matrix::from_fn(n, r, |_, _| rs.standard_normal()))
            .collect();
        let dec = TuckerDecomposition::new(core, factors, false).unwrap();
        let exact = dec.reconstruct();
        let mut a = exact.clone();
        for v in a.data_mut() {
            *v += 1e-3 * rs.standard_normal();
        }
        for col in [0, 5, 71] {
            let f = tucker_fiber(&dec, col);
            assert!((0..7).all(|t| (f[t] - exact.data()[col * 7 + t]).abs() <= 1e-12));
        }
        let truth = relative_residual(&a, &dec).unwrap();
        let est = sampled_relative_residual(&a, &dec, 5000, &mut rs).unwrap();
        assert!((est / truth - 1.0).abs() < 0.1, "{est} vs {truth}");
        assert_eq!(
            residual_with_cap(&a, &dec, 1 << 20, &mut rs).unwrap(),
            (truth, false)
        );
        assert!(residual_with_cap(&a, &dec, 10, &mut rs).unwrap().1);
    }
}
