//! Fit the three linear alignment maps between a representation and an
//! orthogonally rotated copy of itself, and recover the rotation.
//!
//! ```sh
//! cargo run --example alignment_maps
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use repalign::activations::{ActivationMeta, ActivationSet};
use repalign::metrics::{self, MapKind};
use repalign::numerics;

fn main() -> repalign::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let features = numerics::gaussian_matrix(200, 6, &mut rng);
    let labels: Vec<u32> = (0..200).map(|i| (i % 3) as u32).collect();
    let meta = ActivationMeta {
        model_id: "demo:0".into(),
        layer_id: "h1".into(),
        seed: 42,
        dataset_id: "demo".into(),
        epoch: 0,
    };
    let source = ActivationSet::new(features, labels, 3, meta)?;

    // the target is the same representation in rotated coordinates
    let q = numerics::random_orthogonal(6, 7);
    let target = ActivationSet::new(
        source.features().dot(&q),
        source.labels().to_vec(),
        source.num_classes(),
        source.meta().clone(),
    )?;

    for kind in [MapKind::Procrustes, MapKind::LeastSquares, MapKind::Cca] {
        let map = metrics::fit_alignment_map(&source, &target, kind)?;
        let recovery = numerics::frobenius_norm(&(&map.transform - &q));
        println!(
            "{kind:<13} fit residual {:.2e}   ‖T − Q‖_F {:.2e}",
            map.fit_residual, recovery
        );
        if let Some(cca) = &map.cca {
            let worst = cca
                .correlations
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            println!(
                "              cca correlations: {} components, smallest {:.6}, ridge {:?}",
                cca.correlations.len(),
                worst,
                cca.ridge
            );
        }
    }

    // mapping the source into target coordinates makes them interchangeable
    let map = metrics::fit_alignment_map(&source, &target, MapKind::Procrustes)?;
    let mapped = metrics::apply_map(&map, &source)?;
    println!(
        "cka(mapped source, target) = {}",
        metrics::cka(&mapped, &target)?
    );
    Ok(())
}
