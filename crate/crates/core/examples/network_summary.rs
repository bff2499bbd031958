//! Layer table and parameter counts for the generator and both discriminator branches.
//!
//! cargo run --example network_summary -- [scale]

use deepstreet::network::{GeneratorSpec, Model, NetworkConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scale: f64 = std::env::args().nth(1).map_or(Ok(1.0), |s| s.parse())?;
    let spec = GeneratorSpec::new(scale)?;
    let shapes = spec.shapes(256)?;
    println!("{:>3}  {:<12} {:>2} {:>2} {:>2} {:>5}  output", "#", "kind", "k", "s", "d", "ch");
    for (i, (l, (ch, side))) in spec.layers.iter().zip(&shapes[1..]).enumerate() {
        println!("{:>3}  {:<12} {:>2} {:>2} {:>2} {:>5}  {side}x{side}", i + 1, format!("{:?}", l.kind), l.kernel, l.stride, l.dilation, ch);
    }
    let model = Model::build(NetworkConfig {
        scale,
        tile_px: 256,
        crop_px: 64,
        generator_batch_norm: true,
        discriminator_batch_norm: false,
        seed: 0,
    })?;
    let d = &model.discriminator;
    println!("global branch widths {:?}, local branch widths {:?}, fc {}", d.global_widths, d.local_widths, d.fc_width);
    println!("generator parameters:     {}", model.params.numel("gen."));
    println!("discriminator parameters: {}", model.params.numel("disc."));
    println!("spec hash {:016x}", model.spec_hash());
    Ok(())
}
