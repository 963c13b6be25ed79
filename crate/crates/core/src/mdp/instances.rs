//! Small fixed MDPs with known structure.

use nalgebra::DMatrix;

use super::{Occupancy, TabularMdp};

/// Three states where actions 0 and 1 are exact copies and action 2 pays
/// nothing, so the unregularized LP has a continuum of optimal occupancies.
/// Returns the MDP with a data distribution covering every cell.
pub fn tied_actions() -> (TabularMdp, Occupancy) {
    let transition = vec![
        vec![vec![0.1, 0.6, 0.3], vec![0.1, 0.6, 0.3], vec![0.6, 0.2, 0.2]],
        vec![vec![0.2, 0.2, 0.6], vec![0.2, 0.2, 0.6], vec![0.3, 0.4, 0.3]],
        vec![vec![0.5, 0.3, 0.2], vec![0.5, 0.3, 0.2], vec![0.2, 0.2, 0.6]],
    ];
    let reward = vec![vec![1.0, 1.0, 0.0], vec![0.8, 0.8, 0.0], vec![0.9, 0.9, 0.0]];
    let mdp = TabularMdp::new(0.7, transition, reward, vec![0.4, 0.3, 0.3]).expect("valid MDP");
    let mass = DMatrix::from_row_slice(3, 3, &[0.15, 0.05, 0.1, 0.05, 0.1, 0.1, 0.1, 0.2, 0.15]);
    (mdp, Occupancy::new(mass).expect("valid occupancy"))
}
