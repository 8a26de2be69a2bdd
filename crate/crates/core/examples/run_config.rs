//! Layered configuration (defaults < seed variable < file < flags) and a run
//! manifest for a small `gen-data` run, driven through the same code as the binary.
//!
//! `cargo run --example run_config -- [OUT_DIR]`

use std::path::PathBuf;

use serde_json::{json, Map};

use qaoa_warmstart::commands;
use qaoa_warmstart::config::{resolve_config, write_json, write_manifest, Command, RunManifest};

fn main() -> qaoa_warmstart::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("qaoa-ws-examples/run_config"));

    let file = dir.join("config.json");
    write_json(&file, &json!({ "n": 6, "p": 1, "count": 5, "seed": 3 }))?;
    let mut flags = Map::new();
    flags.insert("count".into(), json!(8));
    flags.insert("out".into(), json!(dir.join("run")));

    let cfg = resolve_config(Command::GenData, &flags, Some(&file), Some("99"))?;
    println!(
        "n={:?} p={} count={} seed={} (file seed beats the variable, flag count beats the file)",
        cfg.n, cfg.p, cfg.count, cfg.seed
    );

    let bad = resolve_config(Command::GenData, &Map::new(), None, None);
    println!("without n: {}", bad.unwrap_err());

    let mut manifest = RunManifest::start(Command::GenData, vec!["run_config".into()], cfg.clone());
    let mut result = manifest.add_input(&file);
    if result.is_ok() {
        result = commands::run(Command::GenData, &cfg, &mut manifest);
    }
    manifest.finish(&result);
    let path = write_manifest(&cfg.out, &manifest)?;
    println!("status {} -> {}", manifest.status, path.display());
    for f in &manifest.inputs {
        println!("  input  {} {}", &f.sha256[..16], f.path);
    }
    for f in &manifest.outputs {
        println!("  output {f}");
    }
    result
}
