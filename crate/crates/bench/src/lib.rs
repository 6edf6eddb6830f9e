//! Shared fixtures for the criterion benchmarks.

use std::sync::Arc;

use mixbgk_core::homogeneous::default_grid;
use mixbgk_core::model::hamel_preset;
use mixbgk_core::transport::dt_for_cfl;
use mixbgk_core::{
    HomogeneousState, InitialCondition, InitialShape, MixtureModel, Moments, SpatialField, SpatialMesh,
    SpeciesParams, VelocityGrid,
};

pub fn hamel_model(nu: f64, m2: f64) -> MixtureModel {
    let sp1 = SpeciesParams::new(1.0, nu).expect("valid species");
    let sp2 = SpeciesParams::new(m2, nu).expect("valid species");
    MixtureModel::new(sp1, sp2, hamel_preset(&sp1, &sp2, nu))
}

/// Homogeneous state on a `nodes^3` grid: a bimodal species 1 streaming
/// against a Maxwellian species 2.
pub fn homogeneous_state(model: &MixtureModel, nodes: usize) -> HomogeneousState {
    let initial = [
        InitialCondition {
            moments: Moments::new(1.0, [1.0, 0.0, 0.0], 1.0),
            shape: InitialShape::Bimodal { offset: 0.5 },
        },
        InitialCondition::maxwellian(Moments::new(0.8, [0.0; 3], 1.2)),
    ];
    let grid = Arc::new(default_grid(model, &initial, nodes).expect("grid"));
    let [m1, m2] = model.masses();
    HomogeneousState::new(
        initial[0].build(&grid, m1).expect("species 1"),
        initial[1].build(&grid, m2).expect("species 2"),
        0.0,
    )
    .expect("state")
}

/// Periodic sine perturbation on `cells` cells with `nodes` velocity
/// nodes, plus the time step at CFL 0.9.
pub fn sine_field(model: &MixtureModel, cells: usize, nodes: usize) -> (SpatialField, f64) {
    let mesh = SpatialMesh::new(cells, 10.0).expect("mesh");
    let k = 2.0 * std::f64::consts::PI / 10.0;
    let init: Vec<[Moments; 2]> = (0..cells)
        .map(|c| {
            let n = 1.0 + 0.2 * (k * mesh.center(c)).sin();
            [Moments::new(n, [0.1, 0.0, 0.0], 1.0), Moments::new(1.0, [0.0; 3], 1.0)]
        })
        .collect();
    let states: Vec<(Moments, f64)> = init.iter().flat_map(|c| [(c[0], model.masses()[0]), (c[1], model.masses()[1])]).collect();
    let grid = Arc::new(VelocityGrid::sized_for(&states, nodes, 1).expect("grid"));
    let dt = dt_for_cfl(&mesh, &grid, 0.9);
    let field = SpatialField::from_cell_moments(mesh, grid, model.masses(), &init).expect("field");
    (field, dt)
}
