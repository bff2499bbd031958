//! Print the reference and desk configurations as TOML, or validate a file.
//!
//! cargo run --example config -- [file.toml]

use deepstreet::PipelineConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    if let Some(path) = std::env::args().nth(1) {
        let cfg = PipelineConfig::load(path.as_ref())?;
        println!("{path} is valid; mask geometry {:?}", cfg.mask_geometry());
        return Ok(());
    }
    println!("# reference settings\n{}", PipelineConfig::default().to_toml());
    println!("# desk settings\n{}", PipelineConfig::desk().to_toml());
    Ok(())
}
