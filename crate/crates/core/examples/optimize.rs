use std::sync::Arc;

use evi_plast::adjoint::{ControlMetric, ControlSpace};
use evi_plast::evolution::{Regularization, TimeGrid};
use evi_plast::flow_rule::FlowRuleParams;
use evi_plast::mesh::{build_mesh, DiscreteOperators, FeSpace, Side};
use evi_plast::optimize::{minimize, OptimizerConfig, ReducedProblem};
use evi_plast::presets;
use evi_plast::resolvent::{NewtonSettings, TripleField};
use evi_plast::tensor::MaterialModel;

fn main() -> evi_plast::Result<()> {
    let mesh = build_mesh(2, &[1.0, 1.0], &[4, 4], &[Side::Left])?;
    let material = MaterialModel::isotropic(2, 1.0, 1.0, 0.5, 1.0, 0.05)?;
    let ops = Arc::new(DiscreteOperators::assemble(FeSpace::new(mesh)?, material, false)?);
    let grid = TimeGrid::new(1.0, 16)?;
    let params = FlowRuleParams::new(0.05, 0.1, 0.05)?;
    let metric = Arc::new(ControlMetric::new(ControlSpace::ZeroEnds, grid, &ops)?);
    let target = presets::static_shape_target(&grid, &ops, 0.2);
    let problem = ReducedProblem::new(
        ops.clone(),
        grid,
        TripleField::zeros(&ops),
        params,
        Regularization::Smooth,
        target,
        1e-3,
        metric,
        NewtonSettings::default(),
    )?;
    let f0 = presets::sine_pulse_load(grid, &ops, 0.5, &[0.0, -1.0])?;
    let result = minimize(&f0, &problem, &OptimizerConfig::default())?;
    println!("value {:e} after {} iterations", result.value, result.history.len() - 1);
    Ok(())
}
