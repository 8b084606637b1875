//! Recovers a 2-dimensional subspace from data where 40% of the columns are
//! outliers, comparing the plain SVD with the robust STE estimator.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use blocktrifocal::robust::{largest_principal_angle, regularized_ste, SubspaceConfig};

fn main() -> blocktrifocal::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut gauss = |r, c| DMatrix::<f64>::from_fn(r, c, |_, _| rng.sample(StandardNormal));
    let (dim, d, inliers, outliers) = (10, 2, 60, 40);
    let basis = gauss(dim, d).qr().q();
    let mut x = DMatrix::zeros(dim, inliers + outliers);
    x.columns_mut(0, inliers).copy_from(&(&basis * gauss(d, inliers)));
    x.columns_mut(inliers, outliers).copy_from(&gauss(dim, outliers));

    let svd = x.clone().svd(true, false);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = svd.u.unwrap();
    let plain = DMatrix::from_columns(&[u.column(order[0]), u.column(order[1])]);

    let robust = regularized_ste(&x, &SubspaceConfig { d, ..Default::default() })?;
    let deg = |a: f64| a.to_degrees();
    println!("SVD subspace angle {:.3} deg", deg(largest_principal_angle(&plain, &basis)));
    println!(
        "STE subspace angle {:.3e} deg after {} iterations",
        deg(largest_principal_angle(&robust.basis, &basis)),
        robust.iterations
    );
    Ok(())
}
