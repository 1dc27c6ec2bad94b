//! Every compression algorithm on the same tensor.

use std::time::Instant;

use rtsms::cli::{run_algorithm, Algorithm, RunOptions, Target};
use rtsms::gallery::{function_tensor, wagon};
use rtsms::sketching::RandomStream;
use rtsms::tensor::relative_residual;

fn main() -> rtsms::Result<()> {
    let a = function_tensor(wagon, 100, 100, 100)?;
    let tol = 1e-4;
    let rank = 40;
    for alg in [
        Algorithm::Rtsms,
        Algorithm::Rhosvdsms,
        Algorithm::Sthosvd,
        Algorithm::Hosvd,
        Algorithm::AdaptiveRsthosvd,
        Algorithm::Rsthosvd,
        Algorithm::GnSt,
    ] {
        let target = if alg.accepts_tol() {
            Target::Tol(tol)
        } else {
            Target::Ranks(vec![rank; 3])
        };
        let start = Instant::now();
        let (dec, _) = run_algorithm(
            alg,
            &a,
            &target,
            &RunOptions::default(),
            &mut RandomStream::new(0),
        )?;
        println!(
            "{:>18}: ranks {:>14} residual {:.2e} in {:.3}s",
            alg.name(),
            format!("{:?}", dec.ranks()),
            relative_residual(&a, &dec)?,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
