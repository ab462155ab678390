//! Assembly of library objects from a validated configuration.

use std::sync::Arc;

use evi_plast::adjoint::{ControlMetric, ControlSpace, TrackingTarget};
use evi_plast::evolution::{q_from_z, solve_state, ControlTrajectory, Regularization, Scheme, TimeGrid};
use evi_plast::flow_rule::FlowRuleParams;
use evi_plast::mesh::{build_mesh, DiscreteOperators, FeSpace, Side};
use evi_plast::optimize::{ContinuationSchedule, OptimizerConfig, ReducedProblem};
use evi_plast::presets;
use evi_plast::resolvent::{NewtonSettings, TripleField};
use evi_plast::tensor::{MaterialModel, Rank4Tensor, SymTensor2};

use crate::config::{
    ControlSpaceName, InitialGuess, InitialPreset, MaterialKind, RegularizationKind, ScenarioConfig, SchemeName, TargetPreset,
};

/// Everything a command needs, built once from the configuration.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub ops: Arc<DiscreteOperators<f64>>,
    pub grid: TimeGrid<f64>,
    pub params: FlowRuleParams<f64>,
    pub regularization: Regularization,
    pub scheme: Scheme,
    pub settings: NewtonSettings<f64>,
    pub initial: TripleField<f64>,
    /// Plastic strain of the initial state.
    pub initial_z: Vec<f64>,
    pub metric: Arc<ControlMetric<f64>>,
    pub target: TrackingTarget<f64>,
    /// Initial load: the load of `forward`/`lambda_study`, the starting point of the optimizers.
    pub load: ControlTrajectory<f64>,
    pub problem: ReducedProblem<f64>,
}

fn check_len(name: &str, got: usize, expected: usize) -> evi_plast::Result<()> {
    if got != expected {
        return Err(evi_plast::Error::InvalidParameter(format!("{name} has {got} entries, expected {expected}")));
    }
    Ok(())
}

fn material(cfg: &ScenarioConfig) -> evi_plast::Result<MaterialModel<f64>> {
    let m = &cfg.material;
    let dim = cfg.mesh.dim;
    match m.kind {
        MaterialKind::Isotropic => MaterialModel::isotropic(dim, m.lame, m.shear, m.hardening, m.density, m.yield_stress),
        MaterialKind::Matrix => {
            let c = Rank4Tensor::from_rows(dim, m.elasticity_matrix.as_deref().unwrap_or_default())?;
            let b = Rank4Tensor::from_rows(dim, m.hardening_matrix.as_deref().unwrap_or_default())?;
            MaterialModel::new(c, b, m.density, m.yield_stress)
        }
    }
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> evi_plast::Result<Self> {
        let cfg = &config;
        let sides: Vec<Side> = cfg.mesh.dirichlet.iter().filter_map(|s| Side::parse(s)).collect();
        let mesh = build_mesh(cfg.mesh.dim, &cfg.mesh.extents, &cfg.mesh.resolution, &sides)?;
        let ops = Arc::new(DiscreteOperators::assemble(FeSpace::new(mesh)?, material(cfg)?, cfg.mesh.lumped_mass)?);
        let grid = TimeGrid::new(cfg.time.final_time, cfg.time.steps)?;
        let r = &cfg.regularization;
        let params = FlowRuleParams::new(cfg.material.yield_stress, r.lambda, r.smoothing)?;
        let regularization = match r.kind {
            RegularizationKind::Smooth => Regularization::Smooth,
            RegularizationKind::Yosida => Regularization::Yosida,
        };
        let scheme = match cfg.time.scheme {
            SchemeName::ImplicitEuler => Scheme::ImplicitEuler,
            SchemeName::CrankNicolson => Scheme::CrankNicolson,
        };
        let n = &cfg.newton;
        let settings = NewtonSettings { abs_tol: n.abs_tol, rel_tol: n.rel_tol, max_iter: n.max_iter, max_backtracks: n.max_backtracks };

        let (initial, initial_z) = initial_state(cfg, &ops)?;
        let bound = params.yield_stress;
        let qmax = presets::max_deviatoric_stress(&initial, &ops);
        if qmax > bound {
            return Err(evi_plast::Error::InvalidParameter(format!(
                "initial stress deviator {qmax} lies outside the admissible set (yield stress {bound})"
            )));
        }

        let space = match cfg.control.space {
            ControlSpaceName::ZeroEnds => ControlSpace::ZeroEnds,
            ControlSpaceName::H1L2 => ControlSpace::H1L2,
        };
        let metric = Arc::new(ControlMetric::new(space, grid, &ops)?);
        let load = match cfg.control.initial {
            InitialGuess::Zero => ControlTrajectory::zeros(grid, ops.n_u()),
            InitialGuess::SinePulse => presets::sine_pulse_load(grid, &ops, cfg.control.amplitude, &cfg.control.direction)?,
        };
        metric.check_admissible(&load)?;

        let target = match cfg.objective.target {
            TargetPreset::StaticShape => presets::static_shape_target(&grid, &ops, cfg.objective.amplitude),
            TargetPreset::Rest => TrackingTarget::zeros(&grid, &ops),
            TargetPreset::Uncontrolled => {
                let free = ControlTrajectory::zeros(grid, ops.n_u());
                let traj = solve_state(&free, &initial, params, regularization, Scheme::ImplicitEuler, &ops, &settings)?;
                TrackingTarget::from_trajectory(&traj, &ops)
            }
        };
        let problem = ReducedProblem::new(
            ops.clone(),
            grid,
            initial.clone(),
            params,
            regularization,
            target.clone(),
            cfg.objective.alpha,
            metric.clone(),
            settings,
        )?;
        Ok(Self { config, ops, grid, params, regularization, scheme, settings, initial, initial_z, metric, target, load, problem })
    }

    pub fn optimizer_config(&self) -> OptimizerConfig<f64> {
        let o = &self.config.optimizer;
        OptimizerConfig {
            max_iter: o.max_iter,
            grad_tol: o.grad_tol,
            armijo_c1: o.armijo_c1,
            backtrack_factor: o.backtrack_factor,
            max_backtracks: o.max_backtracks,
            memory: o.memory,
        }
    }

    pub fn schedule(&self) -> evi_plast::Result<ContinuationSchedule<f64>> {
        let r = &self.config.regularization;
        let schedule = match &r.schedule_smoothing {
            Some(s) => ContinuationSchedule { stages: r.schedule_lambdas.iter().copied().zip(s.iter().copied()).collect(), warm_start: r.warm_start },
            None => ContinuationSchedule { warm_start: r.warm_start, ..ContinuationSchedule::halved_smoothing(&r.schedule_lambdas)? },
        };
        schedule.validate()?;
        Ok(schedule)
    }
}

/// Initial `(u, v, q)` and the plastic strain it was derived from.
fn initial_state(cfg: &ScenarioConfig, ops: &DiscreteOperators<f64>) -> evi_plast::Result<(TripleField<f64>, Vec<f64>)> {
    let init = &cfg.initial;
    let dim = ops.dim();
    let base = match init.preset {
        InitialPreset::Rest => presets::rest_state(ops),
        InitialPreset::Prestressed => {
            let force = if init.body_force.is_empty() { vec![0.0; dim] } else { init.body_force.clone() };
            presets::prestressed_state(ops, &force)?
        }
        InitialPreset::PlasticSeed => {
            if init.seed_strain.is_empty() {
                presets::rest_state(ops)
            } else {
                presets::plastic_seed_state(ops, &SymTensor2::from_mandel(dim, &init.seed_strain)?)?
            }
        }
    };
    let mut z = evi_plast::evolution::z_from_q(&base.u, &base.q, ops);
    let mut u = base.u;
    let mut v = base.v;
    if let Some(x) = &init.u {
        check_len("initial.u", x.len(), ops.n_u())?;
        u = x.clone();
    }
    if let Some(x) = &init.v {
        check_len("initial.v", x.len(), ops.n_u())?;
        v = x.clone();
    }
    if let Some(x) = &init.z {
        check_len("initial.z", x.len(), ops.n_q())?;
        z = x.clone();
    }
    let q = q_from_z(&u, &z, ops);
    Ok((TripleField::new(u, v, q), z))
}
