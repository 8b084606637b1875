//! Prints the mode-wise singular values of a block tensor for cameras in
//! general position and for cameras whose centers are collinear.

use blocktrifocal::block::build_block_tensor;
use blocktrifocal::scene::{generate_scene, Layout, SceneConfig};
use blocktrifocal::tensor::{mode_singular_values, multilinear_rank};

fn main() -> blocktrifocal::Result<()> {
    for layout in [Layout::Generic, Layout::Collinear] {
        let scene = generate_scene(&SceneConfig { n_cameras: 8, layout, seed: 4, ..Default::default() })?;
        let t = build_block_tensor(&scene.cameras)?;
        println!("{layout}: multilinear rank {:?}", multilinear_rank(t.tensor(), 1e-10));
        for (m, s) in mode_singular_values(t.tensor()).iter().enumerate() {
            let head: Vec<String> = s.iter().take(8).map(|x| format!("{x:.2e}")).collect();
            println!("  mode {}: {}", m + 1, head.join(" "));
        }
    }
    Ok(())
}
