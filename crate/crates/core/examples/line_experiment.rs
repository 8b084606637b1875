//! Estimates every trifocal block of 20 cameras linearly from 25 noisy line
//! correspondences, then synchronizes the estimates into a camera set.

use blocktrifocal::eval::evaluate_cameras;
use blocktrifocal::scene::{generate_line_experiment, LineExperimentConfig};
use blocktrifocal::sync::{synchronize, SyncConfig};

fn main() -> blocktrifocal::Result<()> {
    for noise_rel in [0.0, 2e-4, 2e-2] {
        let exp = generate_line_experiment(&LineExperimentConfig { noise_rel, seed: 3, ..Default::default() })?;
        let r = synchronize(&exp.estimated, &SyncConfig { seed: 5, ..Default::default() })?;
        let e = evaluate_cameras(&r.cameras, &exp.scene.cameras)?;
        println!(
            "noise {noise_rel:.0e}: meanR {:.3} deg, medianR {:.3} deg, meanT {:.4}, medianT {:.4} ({})",
            e.summary.mean_rotation_deg,
            e.summary.median_rotation_deg,
            e.summary.mean_location,
            e.summary.median_location,
            r.stop
        );
    }
    Ok(())
}
