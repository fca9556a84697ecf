//! Writes the built-in style library as editable PNGs plus `library.json`.
//!
//! `cargo run --example export_library -- OUT_DIR`

use maskforge::geometry::CanonicalLayout;
use maskforge::synth::StyleLibrary;

fn main() -> maskforge::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "assets/styles".into());
    let lib = StyleLibrary::builtin(&CanonicalLayout::builtin());
    lib.save(&out)?;
    println!("{} templates -> {out}", lib.templates.len());
    Ok(())
}
