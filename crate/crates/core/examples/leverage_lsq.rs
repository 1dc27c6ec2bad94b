//! Factor recovery from a left sketch by leverage-score sampled least squares.

use rtsms::sketched_lsq::{approx_leverage_scores, solve_factor, LsqConfig};
use rtsms::sketching::{gaussian, thin_qr, RandomStream, Srft};

fn main() -> rtsms::Result<()> {
    let mut rs = RandomStream::new(4);
    let (n, z, rank, r_hat) = (80, 5000, 6, 9);
    let mut m = gaussian(&mut rs, n, rank) * gaussian(&mut rs, rank, z);
    m += gaussian(&mut rs, n, z) * 1e-8;

    let omega = gaussian(&mut rs, r_hat, n);
    let om = &omega * &m;
    let (_, tri) = thin_qr(
        &Srft::draw(z, 4 * r_hat, &mut rs)?
            .apply_right(&om)?
            .transpose(),
    )?;

    let w = approx_leverage_scores(&om, &tri, 5, &mut rs)?;
    let total: f64 = w.weights.iter().sum();
    let mut top = w.weights.clone();
    top.sort_by(|a, b| b.total_cmp(a));
    println!(
        "leverage mass in top 1% of columns: {:.3}",
        top[..z / 100].iter().sum::<f64>() / total
    );

    for refinement in [false, true] {
        let cfg = LsqConfig {
            refinement,
            ..LsqConfig::default()
        };
        let f = solve_factor(&om, &m, Some(&tri), &cfg, true, &mut RandomStream::new(9))?;
        let res = (&f * &om - &m).norm() / m.norm();
        println!(
            "refinement {refinement:>5}: relative residual {res:.3e} using {} sampled columns",
            cfg.sample_size(r_hat, z, true)
        );
    }
    Ok(())
}
