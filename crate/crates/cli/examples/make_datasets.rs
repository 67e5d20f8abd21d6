//! Regenerates the synthetic decay datasets in `data/`.
//!
//! cargo run -p fluctlab-cli --example make_datasets

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use fluctlab::estimate::{synthesize_dataset, SyntheticModel};

const US: f64 = 1e-6;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let t1 = SyntheticModel::Exp {
        a: 1.0,
        t1: 85.8 * US,
        c: 0.0,
    };
    let ramsey = SyntheticModel::Ramsey {
        a: 0.5,
        t2: 147.3 * US,
        f: 20e3,
        phi: 0.0,
        c: 0.5,
    };
    let sets = [
        ("t1_synthetic.csv", t1, 400.0 * US, 0.02, 6),
        ("t1_exact.csv", t1, 400.0 * US, 0.0, 0),
        ("ramsey_synthetic.csv", ramsey, 300.0 * US, 0.02, 106),
        ("ramsey_exact.csv", ramsey, 300.0 * US, 0.0, 0),
    ];
    for (name, model, t_end, noise, seed) in sets {
        let data = synthesize_dataset(model, t_end, 61, noise, seed)?;
        data.write_csv(BufWriter::new(File::create(dir.join(name))?))?;
        println!("wrote data/{name}");
    }
    Ok(())
}
