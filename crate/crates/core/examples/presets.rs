//! Writes every named preset as a JSON run config.
//!
//! `cargo run --release --example presets -- cfgs` produces
//! `cfgs/<env>_<variant>.json` (desk scale) and
//! `cfgs/full/<env>_<variant>.json`.

use std::path::PathBuf;

use his_lab::experiment::{preset, Scale, VARIANTS};
use his_lab::EnvId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "cfgs".into()));
    for (scale, dir) in [(Scale::Desk, root.clone()), (Scale::Full, root.join("full"))] {
        std::fs::create_dir_all(&dir)?;
        for env in [EnvId::Volley2d, EnvId::Pushbox2d, EnvId::Slidedisk2d] {
            for v in VARIANTS {
                let Ok(cfg) = preset(env, v, scale) else { continue };
                let path = dir.join(format!("{env}_{v}.json"));
                std::fs::write(&path, cfg.to_json() + "\n")?;
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}
