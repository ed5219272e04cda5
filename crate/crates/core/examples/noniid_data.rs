//! Prints per-client label histograms for both synthetic partitioners and
//! writes one of them as a feature CSV.

use hwfl::data::{synthesize_noniid, write_feature_csv, DataMode, DataSpec};

fn main() -> hwfl::Result<()> {
    for mode in [DataMode::SessionSplit, DataMode::Dirichlet] {
        let spec = DataSpec {
            mode,
            n_clients: Some(5),
            ..DataSpec::default()
        };
        let data = synthesize_noniid(&spec, 0)?;
        println!("{mode:?}");
        for c in &data.clients {
            let mut hist = vec![0; spec.n_classes];
            for &l in &c.labels {
                hist[l] += 1;
            }
            println!("  client {}  {:?}", c.client_id, hist);
        }
        println!("  validation pool: {} samples", data.validation.len());
        for w in &data.warnings {
            println!("  warning: {w}");
        }
    }

    let out = std::env::temp_dir().join("hwfl_features.csv");
    let data = synthesize_noniid(&DataSpec { n_clients: Some(5), ..DataSpec::default() }, 0)?;
    write_feature_csv(std::fs::File::create(&out).map_err(|e| hwfl::Error::io(&out, e))?, &data.clients, &data.label_names)?;
    println!("wrote {}", out.display());
    Ok(())
}
