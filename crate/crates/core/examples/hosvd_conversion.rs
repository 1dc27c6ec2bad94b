//! Converting a Tucker decomposition with non-orthogonal factors to HOSVD
//! form, with and without thresholding.

use rtsms::gallery::{function_tensor, octant};
use rtsms::rtsms::{rtsms, tucker_to_hosvd, RtsmsConfig};
use rtsms::sketching::RandomStream;
use rtsms::tensor::relative_residual;

fn main() -> rtsms::Result<()> {
    let a = function_tensor(octant, 80, 80, 80)?;
    let (dec, _) = rtsms(&a, &RtsmsConfig::with_tol(1e-6), &mut RandomStream::new(3))?;
    println!(
        "sketched Tucker: ranks {:?}, residual {:.3e}",
        dec.ranks(),
        relative_residual(&a, &dec)?
    );

    let full = tucker_to_hosvd(&dec, None)?;
    println!(
        "HOSVD form:      ranks {:?}, residual {:.3e}",
        full.ranks(),
        relative_residual(&a, &full)?
    );

    for tol in [1e-6, 1e-4, 1e-2] {
        let cut = tucker_to_hosvd(&dec, Some(tol))?;
        println!(
            "thresholded at {tol:.0e}: ranks {:?}, residual {:.3e}",
            cut.ranks(),
            relative_residual(&a, &cut)?
        );
    }
    Ok(())
}
