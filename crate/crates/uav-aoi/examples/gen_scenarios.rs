//! Writes the built-in scenarios to JSON files.
//!
//! Usage: `cargo run --example gen_scenarios -- [dir]` (default `scenarios/`).

use std::path::PathBuf;

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("scenarios"));
    std::fs::create_dir_all(&dir).expect("create scenario dir");
    let desk = uav_aoi::experiments::desk_scenario();
    desk.save(&dir.join("desk.json")).expect("write desk.json");
    let tiny = uav_aoi::experiments::tiny_scenario();
    tiny.save(&dir.join("tiny.json")).expect("write tiny.json");
    println!("wrote {} and {}", dir.join("desk.json").display(), dir.join("tiny.json").display());
}
