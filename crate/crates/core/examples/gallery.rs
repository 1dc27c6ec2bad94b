//! The synthetic tensors and the decay of their mode-1 singular values.

use rtsms::gallery::{GalleryName, GallerySpec};
use rtsms::sketching::singular_values;
use rtsms::tensor::unfold;

fn main() -> rtsms::Result<()> {
    for name in GalleryName::ALL {
        let dims = if name == GalleryName::Hilbert {
            vec![20; 4]
        } else {
            vec![40; 3]
        };
        let spec = GallerySpec {
            noise_level: 1e-6,
            ..GallerySpec::new(name, dims)
        };
        let t = spec.build()?;
        let sv = singular_values(&unfold(&t, 0)?);
        let decay: Vec<String> = [1, 5, 10, 20]
            .iter()
            .map(|&j| format!("{:.1e}", sv[j - 1] / sv[0]))
            .collect();
        println!(
            "{:>14} {:?}: norm {:.3e}, sigma_j/sigma_1 at j=1,5,10,20: {}",
            name,
            t.dims(),
            t.frobenius_norm(),
            decay.join(" ")
        );
    }
    Ok(())
}
