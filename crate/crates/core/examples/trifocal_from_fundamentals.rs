//! Rebuilds a trifocal tensor from its three pairwise fundamental matrices
//! (`F21` maps points of image 1 to lines of image 2) and compares it with
//! the tensor computed directly from the cameras.

use blocktrifocal::camera::fundamental_from_projections;
use blocktrifocal::scene::{generate_scene, SceneConfig};
use blocktrifocal::trifocal::{error_up_to_scale, trifocal_from_cameras, trifocal_from_fundamentals};

fn main() -> blocktrifocal::Result<()> {
    let scene = generate_scene(&SceneConfig { n_cameras: 3, calibrated: false, seed: 2, ..Default::default() })?;
    let [p1, p2, p3] = [&scene.cameras[0], &scene.cameras[1], &scene.cameras[2]];
    let f21 = fundamental_from_projections(p2, p1)?;
    let f31 = fundamental_from_projections(p3, p1)?;
    let f32 = fundamental_from_projections(p3, p2)?;
    let (p3_canonical, t) = trifocal_from_fundamentals(&f21, &f31, &f32)?;
    println!("third camera in the canonical frame:\n{p3_canonical:.4}");
    let truth = trifocal_from_cameras(p1, p2, p3);
    println!("error up to scale {:.2e}", error_up_to_scale(&t, &truth));
    Ok(())
}
