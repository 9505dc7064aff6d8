//! Fixtures shared by the criterion benches.

use std::sync::Arc;

use bcos::problem::{example2, Example2};
use bcos::solver::terminal_fields;
use bcos::{DecouplingField, SpatialGrid};

/// Example 2 with Z-coupling and its terminal decoupling field on `[-3, 5]`.
pub fn example2_terminal(k: usize) -> (Example2, DecouplingField) {
    let problem = example2(1e-2);
    let grid: Arc<SpatialGrid> = SpatialGrid::shared(-3.0, 5.0, k).expect("valid grid");
    let (field, _) = terminal_fields(&problem, &grid).expect("terminal level");
    (problem, field)
}
