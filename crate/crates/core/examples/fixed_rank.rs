//! Fixed-rank sketching on a 4-D Hilbert tensor against deterministic STHOSVD.

use rtsms::baselines::{ascending, sthosvd};
use rtsms::gallery::hilbert_tensor;
use rtsms::rtsms::{rtsms_fixed_rank, RtsmsConfig};
use rtsms::sketching::RandomStream;
use rtsms::tensor::relative_residual;

fn main() -> rtsms::Result<()> {
    let a = hilbert_tensor(4, 30)?;
    for r in [3, 5, 7, 9] {
        let ranks = [r; 4];
        let plain = rtsms_fixed_rank(
            &a,
            &ranks,
            &RtsmsConfig::default(),
            &mut RandomStream::new(1),
        )?
        .0;
        let hosvd = rtsms_fixed_rank(
            &a,
            &ranks,
            &RtsmsConfig::hosvd(1e-6),
            &mut RandomStream::new(1),
        )?
        .0;
        let st = sthosvd(&a, &ranks, &ascending(4))?;
        println!(
            "r = {r}: tucker core {:?} residual {:.2e} | truncated {:?} residual {:.2e} | sthosvd {:.2e}",
            plain.ranks(),
            relative_residual(&a, &plain)?,
            hosvd.ranks(),
            relative_residual(&a, &hosvd)?,
            relative_residual(&a, &st)?
        );
    }
    Ok(())
}
