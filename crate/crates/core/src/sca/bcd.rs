//! Block coordinate descent with a monotone guard.
//!
//! Each outer iteration visits the problem's blocks in order. A block update
//! that lowers the true objective is rejected, so the recorded trace never
//! decreases.

use std::time::Instant;

use serde::Serialize;

use super::subproblem::{SubproblemStatus, Tolerances};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockKind {
    Schedule,
    Power,
    Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BcdConfig {
    pub max_outer_iters: usize,
    pub tol_monotone: f64,
    pub subproblem: Tolerances,
}

impl Default for BcdConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 100,
            tol_monotone: 1e-6,
            subproblem: Tolerances::default(),
        }
    }
}

/// A candidate produced by one block update.
#[derive(Debug, Clone)]
pub struct BlockUpdate<S> {
    pub state: S,
    /// Status of the convex subproblem, `None` for exact blocks (the LP).
    pub status: Option<SubproblemStatus>,
}

pub trait BcdProblem {
    type State: Clone;

    fn blocks(&self) -> Vec<BlockKind>;

    /// True (non-surrogate) objective.
    fn objective(&self, state: &Self::State) -> Result<f64>;

    fn update(&self, block: BlockKind, state: &Self::State, config: &BcdConfig) -> Result<BlockUpdate<Self::State>>;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockStep {
    pub iteration: usize,
    pub block: BlockKind,
    pub before: f64,
    pub after: f64,
    pub accepted: bool,
    pub status: Option<SubproblemStatus>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BcdTrace {
    /// Objective at the initial plan, then after every outer iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub steps: Vec<BlockStep>,
    /// Wall time per outer iteration, seconds. Not deterministic.
    #[serde(skip)]
    pub iteration_seconds: Vec<f64>,
}

pub fn bcd_solve<P: BcdProblem>(problem: &P, initial: P::State, config: &BcdConfig) -> Result<(P::State, BcdTrace)> {
    let mut state = initial;
    let mut current = problem.objective(&state)?;
    let mut trace = BcdTrace {
        objective_trace: vec![current],
        iterations: 0,
        termination: Termination::MaxIterations,
        steps: Vec::new(),
        iteration_seconds: Vec::new(),
    };
    let blocks = problem.blocks();
    for iteration in 1..=config.max_outer_iters {
        let start = Instant::now();
        let at_start = current;
        for &block in &blocks {
            let update = problem.update(block, &state, config)?;
            if update.status == Some(SubproblemStatus::Infeasible) {
                return Err(Error::SubproblemInfeasible {
                    iteration,
                    detail: format!("{block:?} block"),
                });
            }
            let after = problem.objective(&update.state)?;
            let accepted = after >= current;
            trace.steps.push(BlockStep {
                iteration,
                block,
                before: current,
                after,
                accepted,
                status: update.status,
            });
            if accepted {
                state = update.state;
                current = after;
            }
        }
        trace.objective_trace.push(current);
        trace.iterations = iteration;
        trace.iteration_seconds.push(start.elapsed().as_secs_f64());
        if current - at_start < config.tol_monotone {
            trace.termination = Termination::Converged;
            break;
        }
    }
    Ok((state, trace))
}
