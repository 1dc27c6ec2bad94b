//! Detecting the numerical rank of tensor unfoldings from left sketches only.

use rtsms::gallery::{function_tensor, runge, wagon};
use rtsms::rank_estimation::{estimate_rank, TensorUnfolding};
use rtsms::sketching::{singular_values, RandomStream};
use rtsms::tensor::unfold;

fn main() -> rtsms::Result<()> {
    for (name, a) in [
        ("runge", function_tensor(runge, 60, 60, 60)?),
        ("wagon", function_tensor(wagon, 60, 60, 60)?),
    ] {
        for tol in [1e-3, 1e-6, 1e-9] {
            let op = TensorUnfolding::new(&a, 0)?;
            let probe = estimate_rank(&op, tol, 10, 4, &mut RandomStream::new(2))?;
            let sv = singular_values(&unfold(&a, 0)?);
            let exact = sv.iter().filter(|&&s| s > tol * sv[0]).count();
            println!(
                "{name} tol {tol:.0e}: detected {:>3} (trial {:>3}), dense SVD gives {exact:>3}",
                probe.detected_rank, probe.trial_rank
            );
        }
    }
    Ok(())
}
