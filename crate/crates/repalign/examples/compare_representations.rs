//! Train the same architecture from two seeds and measure how similar the
//! learned representations are, layer by layer.
//!
//! ```sh
//! cargo run --example compare_representations
//! ```

use repalign::activations;
use repalign::metrics;
use repalign::models::{self, ArchId, ModelDims};
use repalign::trainer::{self, SyntheticSpec, TrainConfig};

fn main() -> repalign::Result<()> {
    let spec = SyntheticSpec {
        latent_dim: 4,
        input_dim: 16,
        samples: 1200,
        classes: 3,
        noise: 0.05,
        seed: 1,
    };
    let data = trainer::make_synthetic(&spec)?;
    let dims = ModelDims {
        input: 16,
        hidden: vec![32, 32],
        classes: 3,
        proj_rank: 8,
    };
    let cfg = TrainConfig {
        max_epochs: 20,
        ..TrainConfig::default()
    };
    let runs = trainer::multi_seed_run(ArchId::Mlp, &dims, &data, &cfg, &[1, 2])?;
    let (model_a, _) = runs[0].outcome.as_ref().expect("seed 1 trains");
    let (model_b, _) = runs[1].outcome.as_ref().expect("seed 2 trains");

    println!("layer   cka      overlap  (same arch, seeds 1 vs 2)");
    for layer in model_a.layer_ids() {
        let extract = |m: &models::NetworkModel| {
            models::extract_activations(
                m,
                &data.val.features,
                &data.val.labels,
                data.num_classes,
                &layer,
                &data.id,
            )
        };
        // same preprocessing the protocol applies before any metric
        let (a, _) = activations::normalize(&extract(model_a)?);
        let (b, _) = activations::normalize(&extract(model_b)?);
        let cka = metrics::cka(&a, &b)?;
        let k = metrics::default_overlap_k(a.dim(), a.n());
        let overlap = metrics::subspace_overlap(&a, &b, k)?;
        println!("{layer:<7} {cka:.4}   {:.4}  (k={k})", overlap.overlap);
    }

    // baseline: a model against itself is perfectly aligned
    let set = models::extract_activations(
        model_a,
        &data.val.features,
        &data.val.labels,
        data.num_classes,
        "h2",
        &data.id,
    )?;
    println!("h2 self-comparison cka = {}", metrics::cka(&set, &set)?);
    Ok(())
}
