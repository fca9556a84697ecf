//! Writes a set of synthetic faces with landmarks and parsing maps.
//!
//! `cargo run --example synthetic_faces -- OUT_DIR [COUNT] [SEED]`

use maskforge::parsing::ParsingLabels;
use maskforge::synthetic::{write_face_set, SyntheticFaceParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args
        .next()
        .ok_or("usage: synthetic_faces OUT_DIR [COUNT] [SEED]")?;
    let count = args.next().map(|s| s.parse()).transpose()?.unwrap_or(8);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let manifest = write_face_set(
        &out,
        count,
        seed,
        &SyntheticFaceParams::default(),
        &ParsingLabels::default(),
    )?;
    println!("{}", manifest.display());
    Ok(())
}
