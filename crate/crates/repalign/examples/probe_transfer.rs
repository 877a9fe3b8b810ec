//! Frozen-probe transfer: train a linear probe on one model's
//! representation and evaluate it, unchanged, on another model's.
//!
//! ```sh
//! cargo run --example probe_transfer
//! ```

use repalign::activations::{self, ActivationSet};
use repalign::models::{self, ArchId, ModelDims};
use repalign::probe;
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

    let mut sets: Vec<(ArchId, ActivationSet)> = Vec::new();
    for arch in [ArchId::Mlp, ArchId::Pgnn] {
        let mut model = models::build(arch, &dims, 1)?;
        trainer::train(&mut model, &data, &cfg)?;
        let set = models::extract_activations(
            &model,
            &data.val.features,
            &data.val.labels,
            data.num_classes,
            "h2",
            &data.id,
        )?;
        let (normalized, _) = activations::normalize(&set);
        sets.push((arch, normalized));
    }

    println!("direction            transfer      same-model baseline");
    for (src, tgt) in [(0, 1), (1, 0)] {
        let (sa, sset) = &sets[src];
        let (ta, tset) = &sets[tgt];
        let outcome = probe::transfer_eval(sset, tset, 1e-3, 5)?;
        println!(
            "{sa:>5} → {ta:<12} {:.4} ± {:.4}  {:.4}",
            outcome.mean, outcome.std, outcome.same_model_mean
        );
    }
    Ok(())
}
