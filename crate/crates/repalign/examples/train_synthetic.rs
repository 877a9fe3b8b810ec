//! Train a small MLP on the synthetic latent-factor task, save a
//! checkpoint, and reload it.
//!
//! ```sh
//! cargo run --example train_synthetic
//! ```

use repalign::models::{self, ArchId, ModelDims};
use repalign::trainer::{self, SyntheticSpec, TrainConfig};

fn main() -> repalign::Result<()> {
    let out = std::env::temp_dir().join("repalign_examples/train_synthetic");
    std::fs::create_dir_all(&out)?;

    let spec = SyntheticSpec {
        latent_dim: 4,
        input_dim: 16,
        samples: 1200,
        classes: 3,
        noise: 0.05,
        seed: 1,
    };
    let data = trainer::make_synthetic(&spec)?;
    println!(
        "dataset {}: {} train / {} val / {} test samples, {} classes",
        data.id,
        data.train.n(),
        data.val.n(),
        data.test.n(),
        data.num_classes
    );

    let dims = ModelDims {
        input: spec.input_dim,
        hidden: vec![32, 32],
        classes: spec.classes,
        proj_rank: 8,
    };
    let mut model = models::build(ArchId::Mlp, &dims, 0)?;
    println!(
        "model {} with {} parameters",
        model.model_id(),
        model.param_count()
    );

    let cfg = TrainConfig {
        max_epochs: 25,
        ..TrainConfig::default()
    };
    let history = trainer::train(&mut model, &data, &cfg)?;
    for e in history.epochs.iter().rev().take(3).rev() {
        println!(
            "epoch {:>2}: train loss {:.4}, val loss {:.4}, val acc {:.4}",
            e.epoch, e.train_loss, e.val_loss, e.val_accuracy
        );
    }
    println!(
        "stopped after epoch {}, kept parameters from epoch {}",
        history.stopped_epoch, history.best_epoch
    );

    let ckpt = out.join("checkpoint.rmc");
    models::save_checkpoint(&model, &ckpt)?;
    trainer::write_history_csv(&history, &out.join("history.csv"))?;
    println!("saved {}", ckpt.display());

    let reloaded = models::load_checkpoint(&ckpt)?;
    let (test_loss, test_acc) = trainer::evaluate(&reloaded, &data.test)?;
    println!("reloaded model: test loss {test_loss:.4}, test acc {test_acc:.4}");
    Ok(())
}
