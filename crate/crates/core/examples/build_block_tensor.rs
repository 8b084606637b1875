//! Builds the block trifocal tensor of ten calibrated cameras and confirms
//! that it factors as a Tucker product of the stacked camera matrices.

use blocktrifocal::block::{build_block_tensor, check_block_properties, tucker_factors, tucker_reconstruct};
use blocktrifocal::scene::{generate_scene, SceneConfig};

fn main() -> blocktrifocal::Result<()> {
    let scene = generate_scene(&SceneConfig { n_cameras: 10, seed: 1, ..Default::default() })?;
    let t = build_block_tensor(&scene.cameras)?;
    println!("tensor dims {:?}, norm {:.4}", t.tensor().dims(), t.tensor().norm());

    let (core, stacks) = tucker_factors(&scene.cameras)?;
    let rebuilt = tucker_reconstruct(&core, &stacks)?;
    let err = rebuilt.sub(t.tensor()).norm() / t.tensor().norm();
    println!("Tucker reconstruction relative error {err:.2e}");

    let report = check_block_properties(&t, Some(&scene.cameras), true, 1e-9)?;
    println!("structural checks passed: {}", report.passed());
    Ok(())
}
