//! Trains a softmax classifier on one synthetic client, with and without the
//! FedProx proximal term.

use hwfl::data::{synthesize_noniid, DataSpec};
use hwfl::training::{evaluate, init_model_seeded, local_train, ModelShape, TrainSpec};

fn main() -> hwfl::Result<()> {
    let spec = DataSpec {
        n_clients: Some(2),
        ..DataSpec::default()
    };
    let data = synthesize_noniid(&spec, 3)?;
    let client = &data.clients[0];

    for hidden_dim in [0, 16] {
        let shape = ModelShape {
            input_dim: spec.input_dim,
            hidden_dim,
            n_classes: spec.n_classes,
        };
        let start = init_model_seeded(shape, 1)?;
        for prox_mu in [0.0, 1.0] {
            let train = TrainSpec {
                epochs: 5,
                learning_rate: 0.1,
                batch_size: 32,
                prox_mu,
                seed: 7,
            };
            let (model, stats) = local_train(&start, client, &train)?;
            let drift: f64 = model.values.iter().zip(&start.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let m = evaluate(&model, &data.validation)?;
            println!(
                "hidden {hidden_dim:>2}  mu {prox_mu:<3}  loss {:.4}  drift {drift:.3}  val acc {:.3}  macro-F1 {:.3}",
                stats.final_loss, m.accuracy, m.macro_f1
            );
        }
    }
    Ok(())
}
