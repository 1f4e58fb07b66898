//! Writes a synthetic input directory (toy body model + scripted sequence)
//! so the pipeline can be exercised without real capture data:
//!
//! ```sh
//! cargo run --release --example toy_input -- demo_input 30 1
//! cargo run --release -- generate --input demo_input --output demo_out --seed 7
//! ```

use std::path::PathBuf;

use drapegen::body::save_model_archive;
use drapegen::pipeline::{write_sequence, Split};
use drapegen::synthetic::{capsule_body_template, toy_sequence};

fn main() {
    let mut args = std::env::args().skip(1);
    let root = PathBuf::from(args.next().unwrap_or_else(|| "demo_input".into()));
    let frames: usize = args.next().map(|s| s.parse().expect("frame count")).unwrap_or(30);
    let subjects: usize = args.next().map(|s| s.parse().expect("subject count")).unwrap_or(1);

    let template = capsule_body_template();
    save_model_archive(&root.join("model"), &template).expect("write model archive");
    let (seq, images) = toy_sequence("demo", frames, subjects, Split::Train, 192, 144);
    write_sequence(&root.join("sequences").join("demo"), &seq, &images)
        .expect("write sequence");
    println!(
        "wrote {} ({frames} frames, {subjects} subject(s), 192x144)",
        root.display()
    );
}
