//! Regenerates the shipped reference-network fixtures.
//!
//! ```bash
//! cargo run --example build_reference_fixtures -- crates/core/fixtures
//! ```

use std::path::PathBuf;

fn main() -> quantscope::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    let manifest = quantscope::reference::write_fixtures(&dir)?;
    println!("wrote {}", dir.display());
    print!("{manifest}");
    Ok(())
}
