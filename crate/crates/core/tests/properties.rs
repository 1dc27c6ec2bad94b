use nalgebra::DVector;
use proptest::prelude::*;

use rtsms::baselines::{ascending, hosvd, r_gn_st_tucker, r_sthosvd, sthosvd};
use rtsms::cli::format::{read_tensor, write_tensor};
use rtsms::gallery::{function_tensor, runge};
use rtsms::rank_estimation::estimate_rank;
use rtsms::rtsms::{rtsms, rtsms_fixed_rank, tucker_to_hosvd, RtsmsConfig};
use rtsms::sketched_lsq::{solve_factor, LsqConfig};
use rtsms::sketching::{gaussian, svd, thin_qr, RandomStream, Srft};
use rtsms::tensor::{fold, mode_product, unfold, DenseTensor, Matrix, TuckerDecomposition};

fn random_tensor(dims: &[usize], seed: u64) -> DenseTensor {
    let mut rs = RandomStream::new(seed);
    DenseTensor::from_fn(dims.to_vec(), |_| rs.standard_normal()).unwrap()
}

fn dims_strategy(max_order: usize, max_dim: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1..=max_dim, 1..=max_order)
}

fn low_rank_tensor(dims: &[usize], r: usize, seed: u64) -> DenseTensor {
    let mut rs = RandomStream::new(seed);
    let core = DenseTensor::from_fn(vec![r; dims.len()], |_| rs.standard_normal()).unwrap();
    let factors = dims.iter().map(|&n| gaussian(&mut rs, n, r)).collect();
    TuckerDecomposition::new(core, factors, false)
        .unwrap()
        .reconstruct()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fold_inverts_unfold(dims in dims_strategy(5, 5), seed in any::<u64>()) {
        let t = random_tensor(&dims, seed);
        for mode in 0..dims.len() {
            let m = unfold(&t, mode).unwrap();
            prop_assert_eq!(m.shape(), (dims[mode], t.len() / dims[mode]));
            let back = fold(&m, mode, &dims).unwrap();
            prop_assert!(back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn same_mode_products_compose(dims in dims_strategy(4, 5), p in 1usize..5, q in 1usize..5, seed in any::<u64>()) {
        let t = random_tensor(&dims, seed);
        let mut rs = RandomStream::new(seed ^ 1);
        for (mode, &n) in dims.iter().enumerate() {
            let f = gaussian(&mut rs, p, n);
            let g = gaussian(&mut rs, q, p);
            let lhs = mode_product(&mode_product(&t, &f, mode).unwrap(), &g, mode).unwrap();
            let rhs = mode_product(&t, &(&g * &f), mode).unwrap();
            let scale = t.frobenius_norm() * f.norm() * g.norm();
            prop_assert!(lhs.sub(&rhs).unwrap().frobenius_norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn vec_kronecker_identity(r in prop::collection::vec(1usize..=3, 3), n in prop::collection::vec(1usize..=4, 3), seed in any::<u64>()) {
        let dims = [n[0].max(1), n[1].min(3), n[2].min(2)];
        let mut rs = RandomStream::new(seed);
        let core = DenseTensor::from_fn(r.clone(), |_| rs.standard_normal()).unwrap();
        let factors: Vec<Matrix> = dims.iter().zip(&r).map(|(&n, &k)| gaussian(&mut rs, n, k)).collect();
        let kron = factors[2].kronecker(&factors[1]).kronecker(&factors[0]);
        let expected = kron * DVector::from_column_slice(core.data());
        let dec = TuckerDecomposition::new(core, factors, false).unwrap();
        let got = DVector::from_column_slice(dec.reconstruct().data());
        prop_assert!((&got - &expected).norm() <= 1e-12 * expected.norm().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn orthonormal_projection_does_not_grow_norm(dims in dims_strategy(4, 6), k in 1usize..6, seed in any::<u64>()) {
        let t = random_tensor(&dims, seed);
        let mut rs = RandomStream::new(seed ^ 2);
        for (mode, &n) in dims.iter().enumerate() {
            let cols = k.min(n);
            let (q, _) = thin_qr(&gaussian(&mut rs, n, cols)).unwrap();
            let p = mode_product(&t, &q.transpose(), mode).unwrap();
            prop_assert!(p.frobenius_norm() <= t.frobenius_norm() * (1.0 + 1e-14));
        }
    }

    #[test]
    fn full_srft_is_isometry(z in 1usize..40, rows in 1usize..5, seed in any::<u64>()) {
        let mut rs = RandomStream::new(seed);
        let m = gaussian(&mut rs, rows, z);
        let y = Srft::draw(z, z, &mut rs).unwrap().apply_right(&m).unwrap();
        let gram = &y * y.transpose() - &m * m.transpose();
        prop_assert!(gram.norm() <= 1e-12 * m.norm_squared().max(1.0));
    }

    #[test]
    fn qr_and_svd_contracts(rows in 1usize..30, cols in 1usize..30, seed in any::<u64>()) {
        let mut rs = RandomStream::new(seed);
        let m = gaussian(&mut rs, rows, cols);
        if rows >= cols {
            let (q, r) = thin_qr(&m).unwrap();
            prop_assert!((&q * &r - &m).norm() <= 1e-12 * m.norm());
            prop_assert!((q.transpose() * &q - Matrix::identity(cols, cols)).norm() <= 1e-12 * cols as f64);
            prop_assert!((0..cols).all(|j| (j + 1..cols).all(|i| r[(i, j)] == 0.0)));
        }
        let s = svd(&m);
        prop_assert!((s.reconstruct() - &m).norm() <= 1e-12 * m.norm());
        let k = rows.min(cols);
        prop_assert!((s.u.transpose() * &s.u - Matrix::identity(k, k)).norm() <= 1e-12 * k as f64);
        prop_assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn detected_rank_is_monotone_in_tol(rows in 5usize..40, cols in 5usize..80, decay in 0.2f64..0.9, seed in any::<u64>()) {
        let mut rs = RandomStream::new(seed);
        let (u, _) = thin_qr(&gaussian(&mut rs, rows, rows.min(cols))).unwrap();
        let (v, _) = thin_qr(&gaussian(&mut rs, cols, rows.min(cols))).unwrap();
        let sigma = Matrix::from_diagonal(&DVector::from_fn(rows.min(cols), |i, _| decay.powi(i as i32)));
        let m = u * sigma * v.transpose();
        let mut last = 0;
        for tol in [1e-1, 1e-2, 1e-4, 1e-6, 1e-8] {
            let p = estimate_rank(&m, tol, 3, 4, &mut RandomStream::new(seed ^ 3)).unwrap();
            prop_assert!(p.detected_rank <= rows.min(cols));
            prop_assert!(p.detected_rank >= last, "tol {}: {} < {}", tol, p.detected_rank, last);
            let again = &p.omega * &m;
            prop_assert!((again - &p.omega_m).norm() <= 1e-12 * p.omega_m.norm().max(1.0));
            last = p.detected_rank;
        }
    }

    #[test]
    fn hosvd_conversion_keeps_reconstruction(dims in prop::collection::vec(2usize..7, 3), r in prop::collection::vec(1usize..5, 3), seed in any::<u64>()) {
        let mut rs = RandomStream::new(seed);
        let core = DenseTensor::from_fn(r.clone(), |_| rs.standard_normal()).unwrap();
        let factors = dims.iter().zip(&r).map(|(&n, &k)| gaussian(&mut rs, n, k)).collect();
        let dec = TuckerDecomposition::new(core, factors, false).unwrap();
        let h = tucker_to_hosvd(&dec, None).unwrap();
        prop_assert!(h.is_hosvd);
        let a = dec.reconstruct();
        let diff = a.sub(&h.reconstruct()).unwrap().frobenius_norm();
        prop_assert!(diff <= 1e-12 * a.frobenius_norm().max(f64::MIN_POSITIVE));
        for f in &h.factors {
            let k = f.ncols();
            prop_assert!((f.transpose() * f - Matrix::identity(k, k)).norm() <= 1e-12 * k as f64);
        }
    }

    #[test]
    fn tensor_files_round_trip(dims in dims_strategy(4, 6), seed in any::<u64>()) {
        let t = random_tensor(&dims, seed);
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        let back = read_tensor(&mut buf.as_slice()).unwrap();
        prop_assert!(back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert_eq!(back.dims(), t.dims());
    }

    #[test]
    fn rtsms_error_splits_over_modes(dims in prop::collection::vec(4usize..14, 3), tol_exp in 2i32..9, seed in any::<u64>()) {
        let a = random_tensor(&dims, seed);
        let smooth = DenseTensor::from_fn(dims.clone(), |i| {
            1.0 / (1.0 + i[0] as f64 + 2.0 * i[1] as f64 + 0.5 * i[2] as f64) + 1e-3 * a.get(i)
        }).unwrap();
        let cfg = RtsmsConfig { track_residuals: true, ..RtsmsConfig::with_tol(10f64.powi(-tol_exp)) };
        let (dec, rep) = rtsms(&smooth, &cfg, &mut RandomStream::new(seed)).unwrap();
        let res = smooth.sub(&dec.reconstruct()).unwrap().frobenius_norm();
        let e = rep.mode_residuals.unwrap();
        let norms = rep.factor_norms.unwrap();
        let mut bound = 0.0;
        let mut amplification = 1.0;
        for (ei, ni) in e.iter().zip(&norms) {
            bound += amplification * ei;
            amplification *= ni;
        }
        prop_assert!(res <= bound * (1.0 + 1e-10) + 1e-14 * smooth.frobenius_norm(), "{} > {}", res, bound);
    }
}

#[test]
fn achieved_ranks_do_not_grow_with_tolerance() {
    let t = function_tensor(runge, 40, 40, 40).unwrap();
    let mut previous: Option<Vec<usize>> = None;
    for tol in [1e-10, 1e-8, 1e-6, 1e-4, 1e-2] {
        let (dec, _) = rtsms(&t, &RtsmsConfig::hosvd(tol), &mut RandomStream::new(5)).unwrap();
        let ranks = dec.ranks();
        if let Some(p) = &previous {
            assert!(
                ranks.iter().zip(p).all(|(a, b)| a <= b),
                "{ranks:?} after {p:?}"
            );
        }
        previous = Some(ranks);
    }
}

#[test]
fn randomized_methods_are_seed_deterministic() {
    let a = low_rank_tensor(&[12, 10, 9], 3, 1);
    let order = ascending(3);
    let run = |seed: u64| {
        let mut rs = RandomStream::new(seed);
        (
            r_sthosvd(&a, &[3, 3, 3], 2, &order, &mut rs).unwrap(),
            r_gn_st_tucker(&a, &[3, 3, 3], &order, &mut rs).unwrap(),
            rtsms(&a, &RtsmsConfig::default(), &mut rs).unwrap().0,
            rtsms_fixed_rank(&a, &[2, 2, 2], &RtsmsConfig::default(), &mut rs)
                .unwrap()
                .0,
        )
    };
    assert_eq!(run(9), run(9));
}

#[test]
fn full_rank_baselines_reconstruct() {
    let a = random_tensor(&[5, 4, 6], 11);
    let full = [5, 4, 6];
    let order = ascending(3);
    let mut rs = RandomStream::new(12);
    for dec in [
        hosvd(&a, &full).unwrap(),
        sthosvd(&a, &full, &order).unwrap(),
        r_sthosvd(&a, &full, 0, &order, &mut rs).unwrap(),
        r_gn_st_tucker(&a, &full, &order, &mut rs).unwrap(),
    ] {
        let res = a.sub(&dec.reconstruct()).unwrap().frobenius_norm() / a.frobenius_norm();
        assert!(res <= 1e-10, "{res}");
    }
}

/// Sampled factor solve against the dense least-squares optimum on
/// numerically low-rank instances.
#[test]
fn sampled_factor_is_near_optimal() {
    let (n, z, r_hat) = (60, 400, 8);
    let mut ratios = Vec::new();
    for seed in 0..50 {
        let mut rs = RandomStream::new(seed);
        let mut m = gaussian(&mut rs, n, 5) * gaussian(&mut rs, 5, z);
        m += gaussian(&mut rs, n, z) * 1e-6;
        let omega = gaussian(&mut rs, r_hat, n);
        let om = &omega * &m;
        let (_, r) = thin_qr(
            &(Srft::draw(z, 4 * r_hat, &mut rs)
                .unwrap()
                .apply_right(&om)
                .unwrap())
            .transpose(),
        )
        .unwrap();
        let f = solve_factor(&om, &m, Some(&r), &LsqConfig::default(), true, &mut rs).unwrap();
        let got = (&f * &om - &m).norm();
        let (q, _) = thin_qr(&om.transpose()).unwrap();
        let best = (&m - &m * &q * q.transpose()).norm();
        ratios.push(got / best);
    }
    ratios.sort_by(f64::total_cmp);
    let median = ratios[ratios.len() / 2];
    assert!(median <= 10.0, "median ratio {median}, all {ratios:?}");
}
