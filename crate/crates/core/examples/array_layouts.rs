//! Subarray layouts and their steering matrices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tbdoa::array::{
    subarray_steering_matrix, ArrayGeometry, Axis, Level, SubarrayLayout, Target, TargetSet,
};

fn main() -> tbdoa::error::Result<()> {
    let targets = TargetSet::new(vec![Target::linear(-15.0, 0.1), Target::linear(20.0, 0.3)])?;

    let ula = SubarrayLayout::uniform_linear(10, 8, 10)?;
    println!(
        "uniform: {} subarrays, {} transmit elements",
        ula.num_subarrays(),
        ula.transmit_positions().len()
    );
    let g = subarray_steering_matrix(&ula, &targets);
    let row: Vec<String> = g.row(1).iter().map(|z| format!("{z:.3}")).collect();
    println!(
        "G is {}x{}; second row [{}]",
        g.nrows(),
        g.ncols(),
        row.join(", ")
    );

    let sparse = SubarrayLayout::linear(10, &[1, 2, 3, 5, 6, 7, 9])?;
    let centers: Vec<f64> = sparse.phase_centers().iter().map(|p| p[0]).collect();
    println!("sparse starts: phase centers {centers:?}");

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let circle = ArrayGeometry::random_in_circle(4, 0.5, &mut rng);
    let multiscale = SubarrayLayout::new(
        circle,
        vec![
            Level::uniform(2, 1, Axis::X),
            Level::uniform(2, 2, Axis::X),
            Level::uniform(4, 1, Axis::Y),
        ],
    )?;
    println!(
        "multiscale: level sizes {:?}, {} subarrays",
        multiscale.level_sizes(),
        multiscale.num_subarrays()
    );
    Ok(())
}
