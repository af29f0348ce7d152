//! Loads the sample configuration and runs two subcommands into a temporary
//! directory, as the `mixlab` binary does.

use mixlab::config::ExperimentConfig;
use mixlab::runner::run_subcommand;
use std::path::Path;

fn main() -> mixlab::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/default.ini");
    let cfg = ExperimentConfig::load(&path, &["domain.modes=16".into()])?;
    println!("config checksum {}", cfg.checksum());
    let out = std::env::temp_dir().join("mixlab-example");
    for cmd in ["observe", "toy"] {
        let r = run_subcommand(cmd, &cfg, &out)?;
        println!("{cmd}: exit {}  {:?}", r.status.exit_code(), r.notes);
        for f in &r.files {
            println!("  wrote {}", f.display());
        }
    }
    Ok(())
}
