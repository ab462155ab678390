//! Reduced optimal control problem
//! `min_f Ψ(x(f)) + (α/2)‖f‖²_X`, an L-BFGS minimizer in the control metric,
//! and continuation over decreasing regularization parameters.

use std::sync::Arc;

use crate::adjoint::{reduced_gradient, solve_adjoint, tracking_objective, AdjointTrajectory, ControlMetric, TrackingTarget};
use crate::error::{Error, Result};
use crate::evolution::{solve_state, ControlTrajectory, Regularization, Scheme, StateTrajectory, TimeGrid};
use crate::flow_rule::FlowRuleParams;
use crate::mesh::DiscreteOperators;
use crate::resolvent::{NewtonSettings, TripleField};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct ReducedProblem<S> {
    pub ops: Arc<DiscreteOperators<S>>,
    pub grid: TimeGrid<S>,
    pub initial: TripleField<S>,
    pub params: FlowRuleParams<S>,
    pub regularization: Regularization,
    pub target: TrackingTarget<S>,
    /// Control cost weight `α > 0`.
    pub alpha: S,
    pub metric: Arc<ControlMetric<S>>,
    pub settings: NewtonSettings<S>,
}

#[derive(Debug, Clone)]
pub struct Evaluation<S> {
    pub value: S,
    pub tracking: S,
    pub control_cost: S,
    pub state: StateTrajectory<S>,
}

#[derive(Debug, Clone)]
pub struct GradientEvaluation<S> {
    pub value: S,
    /// Reduced gradient; `F′(f)g = α⟨gradient, g⟩_X`.
    pub gradient: ControlTrajectory<S>,
    pub state: StateTrajectory<S>,
    pub adjoint: AdjointTrajectory<S>,
}

impl<S: Real> ReducedProblem<S> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ops: Arc<DiscreteOperators<S>>,
        grid: TimeGrid<S>,
        initial: TripleField<S>,
        params: FlowRuleParams<S>,
        regularization: Regularization,
        target: TrackingTarget<S>,
        alpha: S,
        metric: Arc<ControlMetric<S>>,
        settings: NewtonSettings<S>,
    ) -> Result<Self> {
        if !(alpha > S::zero()) {
            return Err(Error::InvalidParameter(format!("control cost alpha must be positive, got {alpha}")));
        }
        initial.check_shape(&ops)?;
        target.check_shape(&grid, &ops)?;
        if metric.grid != grid {
            return Err(Error::InvalidParameter("control metric built on a different time grid".into()));
        }
        Ok(Self { ops, grid, initial, params, regularization, target, alpha, metric, settings })
    }

    /// Same problem with a different regularization `(λ, s)`.
    pub fn with_regularization(&self, lambda: S, smoothing: S) -> Result<Self> {
        Ok(Self { params: self.params.with_regularization(lambda, smoothing)?, ..self.clone() })
    }

    pub fn zero_control(&self) -> ControlTrajectory<S> {
        ControlTrajectory::zeros(self.grid, self.ops.n_u())
    }

    pub fn state(&self, f: &ControlTrajectory<S>) -> Result<StateTrajectory<S>> {
        solve_state(f, &self.initial, self.params, self.regularization, Scheme::ImplicitEuler, &self.ops, &self.settings)
    }

    pub fn objective(&self, f: &ControlTrajectory<S>) -> Result<Evaluation<S>> {
        self.metric.check_admissible(f)?;
        let state = self.state(f)?;
        let tracking = tracking_objective(&state, &self.target, &self.ops);
        let control_cost = S::lit(0.5) * self.alpha * self.metric.inner(f, f);
        Ok(Evaluation { value: tracking + control_cost, tracking, control_cost, state })
    }

    pub fn gradient(&self, f: &ControlTrajectory<S>) -> Result<GradientEvaluation<S>> {
        let eval = self.objective(f)?;
        let adjoint = solve_adjoint(&eval.state, &self.target, &self.ops)?;
        let gradient = reduced_gradient(f, &adjoint, self.alpha, &self.metric, &self.ops);
        Ok(GradientEvaluation { value: eval.value, gradient, state: eval.state, adjoint })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig<S> {
    pub max_iter: usize,
    /// Stop when `‖grad‖_X ≤ grad_tol · max(1, ‖grad₀‖_X)`.
    pub grad_tol: S,
    pub armijo_c1: S,
    pub backtrack_factor: S,
    pub max_backtracks: usize,
    /// Number of stored L-BFGS pairs.
    pub memory: usize,
}

impl<S: Real> Default for OptimizerConfig<S> {
    fn default() -> Self {
        Self {
            max_iter: 50,
            grad_tol: S::lit(1e-6),
            armijo_c1: S::lit(1e-4),
            backtrack_factor: S::lit(0.5),
            max_backtracks: 30,
            memory: 5,
        }
    }
}

impl<S: Real> OptimizerConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.armijo_c1 > S::zero() && self.armijo_c1 < S::lit(0.5)) {
            return Err(Error::InvalidParameter(format!("Armijo constant must lie in (0, 1/2), got {}", self.armijo_c1)));
        }
        if !(self.backtrack_factor > S::zero() && self.backtrack_factor < S::one()) {
            return Err(Error::InvalidParameter(format!("backtracking factor must lie in (0, 1), got {}", self.backtrack_factor)));
        }
        if !(self.grad_tol > S::zero()) {
            return Err(Error::InvalidParameter(format!("gradient tolerance must be positive, got {}", self.grad_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord<S> {
    pub value: S,
    pub grad_norm: S,
    pub step: S,
    pub backtracks: usize,
    pub steepest_descent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct MinimizeResult<S> {
    pub control: ControlTrajectory<S>,
    pub value: S,
    pub grad_norm: S,
    /// Entry 0 describes the starting point.
    pub history: Vec<IterationRecord<S>>,
    pub termination: Termination,
}

struct Pair<S> {
    s: ControlTrajectory<S>,
    y: ControlTrajectory<S>,
    rho: S,
}

/// L-BFGS with Armijo backtracking in the control-space metric. Falls back to
/// steepest descent when the quasi-Newton direction is not a descent direction.
pub fn minimize<S: Real>(
    f0: &ControlTrajectory<S>,
    problem: &ReducedProblem<S>,
    config: &OptimizerConfig<S>,
) -> Result<MinimizeResult<S>> {
    config.validate()?;
    let metric = &problem.metric;
    let alpha = problem.alpha;
    let mut f = metric.project(f0);
    let mut eval = problem.gradient(&f)?;
    let mut value = eval.value;
    // metric gradient of F
    let mut grad = eval.gradient.scaled(alpha);
    let mut gnorm = metric.norm(&eval.gradient);
    let stop = config.grad_tol * gnorm.max(S::one());
    let mut history = vec![IterationRecord { value, grad_norm: gnorm, step: S::zero(), backtracks: 0, steepest_descent: false }];
    let mut pairs: Vec<Pair<S>> = Vec::new();
    let mut termination = Termination::MaxIterations;

    for _ in 0..config.max_iter {
        if gnorm <= stop {
            termination = Termination::Converged;
            break;
        }
        let mut dir = two_loop(&grad, &pairs, metric, alpha);
        let mut slope = metric.inner(&grad, &dir);
        let mut steepest = false;
        if !(slope < S::zero()) {
            pairs.clear();
            dir = grad.scaled(-S::one() / alpha);
            slope = metric.inner(&grad, &dir);
            steepest = true;
        }
        let mut t = S::one();
        let mut accepted = None;
        for b in 0..=config.max_backtracks {
            let mut trial = f.clone();
            trial.axpy(t, &dir);
            if let Ok(e) = problem.objective(&trial) {
                if e.value <= value + config.armijo_c1 * t * slope {
                    accepted = Some((trial, b));
                    break;
                }
            }
            t *= config.backtrack_factor;
        }
        let Some((f_new, backtracks)) = accepted else {
            termination = Termination::LineSearchFailed;
            break;
        };
        let eval_new = problem.gradient(&f_new)?;
        let grad_new = eval_new.gradient.scaled(alpha);
        let s = f_new.sub(&f);
        let y = grad_new.sub(&grad);
        let sy = metric.inner(&s, &y);
        if sy > S::lit(1e-12) * metric.norm(&s) * metric.norm(&y) {
            pairs.push(Pair { s, y, rho: S::one() / sy });
            if pairs.len() > config.memory {
                pairs.remove(0);
            }
        }
        f = f_new;
        eval = eval_new;
        value = eval.value;
        grad = grad_new;
        gnorm = metric.norm(&eval.gradient);
        history.push(IterationRecord { value, grad_norm: gnorm, step: t, backtracks, steepest_descent: steepest });
    }
    if termination == Termination::MaxIterations && gnorm <= stop {
        termination = Termination::Converged;
    }
    Ok(MinimizeResult { control: f, value, grad_norm: gnorm, history, termination })
}

fn two_loop<S: Real>(grad: &ControlTrajectory<S>, pairs: &[Pair<S>], metric: &ControlMetric<S>, alpha: S) -> ControlTrajectory<S> {
    let mut q = grad.clone();
    let mut coef = Vec::with_capacity(pairs.len());
    for p in pairs.iter().rev() {
        let a = p.rho * metric.inner(&p.s, &q);
        q.axpy(-a, &p.y);
        coef.push(a);
    }
    let h0 = match pairs.last() {
        Some(p) => metric.inner(&p.s, &p.y) / metric.inner(&p.y, &p.y),
        None => S::one() / alpha,
    };
    let mut r = q.scaled(h0);
    for (p, a) in pairs.iter().zip(coef.into_iter().rev()) {
        let b = p.rho * metric.inner(&p.y, &r);
        r.axpy(a - b, &p.s);
    }
    r.scaled(-S::one())
}

/// Decreasing sequence of `(λ, s)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationSchedule<S> {
    pub stages: Vec<(S, S)>,
    pub warm_start: bool,
}

impl<S: Real> ContinuationSchedule<S> {
    /// Schedule with `s = λ/2` at every stage.
    pub fn halved_smoothing(lambdas: &[S]) -> Result<Self> {
        let s = Self { stages: lambdas.iter().map(|&l| (l, l / S::lit(2.0))).collect(), warm_start: true };
        s.validate()?;
        Ok(s)
    }

    /// Both parameters strictly decrease and `s/λ` does not increase.
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::InvalidParameter("continuation schedule is empty".into()));
        }
        for &(l, s) in &self.stages {
            if !(l > S::zero()) || !(s > S::zero() && s < S::one()) {
                return Err(Error::InvalidParameter(format!("invalid stage (lambda = {l}, s = {s}): need lambda > 0 and s in (0, 1)")));
            }
        }
        for w in self.stages.windows(2) {
            let ((l0, s0), (l1, s1)) = (w[0], w[1]);
            if !(l1 < l0 && s1 < s0) {
                return Err(Error::InvalidParameter("continuation stages must strictly decrease in lambda and s".into()));
            }
            if s1 / l1 > s0 / l0 * (S::one() + S::lit(1e-12)) {
                return Err(Error::InvalidParameter("smoothing must decrease at least as fast as lambda".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StageResult<S> {
    pub lambda: S,
    pub smoothing: S,
    pub result: MinimizeResult<S>,
    /// `‖f_stage − f_previous‖_X` (zero for the first stage).
    pub control_change: S,
}

pub fn continuation_run<S: Real>(
    f0: &ControlTrajectory<S>,
    problem: &ReducedProblem<S>,
    schedule: &ContinuationSchedule<S>,
    config: &OptimizerConfig<S>,
) -> Result<Vec<StageResult<S>>> {
    schedule.validate()?;
    let mut stages = Vec::with_capacity(schedule.stages.len());
    let mut start = f0.clone();
    let mut previous: Option<ControlTrajectory<S>> = None;
    for &(lambda, smoothing) in &schedule.stages {
        let stage_problem = problem.with_regularization(lambda, smoothing)?;
        let init = if schedule.warm_start { &start } else { f0 };
        let result = minimize(init, &stage_problem, config)?;
        let control_change = previous.as_ref().map_or(S::zero(), |p| problem.metric.norm(&result.control.sub(p)));
        previous = Some(result.control.clone());
        start = result.control.clone();
        stages.push(StageResult { lambda, smoothing, result, control_change });
    }
    Ok(stages)
}
