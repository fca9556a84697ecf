//! Times `run_video` on synthetic 256x256 frames with a single worker.
//!
//! `cargo run --release --example video_bench -- [FRAMES]`

use maskforge::geometry::CanonicalLayout;
use maskforge::parsing::ParsingLabels;
use maskforge::synth::{render_style_mask, sample_style, StyleLibrary};
use maskforge::synthetic::{synthetic_face, SyntheticFaceParams};
use maskforge::video::{run_video, FrameInput, VideoConfig};

fn main() -> maskforge::Result<()> {
    let n: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(200);
    let canon = CanonicalLayout::builtin();
    let lib = StyleLibrary::builtin(&canon);
    let mask = render_style_mask(&sample_style(&lib, 1)?, &lib, &canon)?;
    let labels = ParsingLabels::default();
    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let f = synthetic_face(&SyntheticFaceParams::default(), i as u64, &labels)?;
        frames.push(FrameInput {
            image: f.image,
            landmarks: f.landmarks,
            parsing: Some(f.parsing),
            timestamp_ms: i as f64 * 33.3,
        });
    }
    let (_, report) = run_video(&mask, &frames, &canon, &VideoConfig::default())?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report"));
    Ok(())
}
