//! Sequential plan execution with retries, refinement rounds, suspension
//! and a checkpoint after every state change.

use std::collections::BTreeMap;

use svw_agents::{ResolvedInput, StepCall, StepOutcome, StepRunner};
use svw_core::{CoreError, ExecutionState, InputValue, PlanStatus, Requirement, SessionStore, StepState};

use crate::error::EngineError;
use crate::events::StepProgress;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Extra attempts after a transient failure.
    pub retries: u32,
    /// Feedback rounds a step may request before it is failed.
    pub feedback_rounds: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self { retries: 2, feedback_rounds: 3 }
    }
}

/// What to do with a step outcome that is not plain success.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Retry,
    Refine(String),
    Suspend(Vec<Requirement>),
    Fail(String),
}

/// Decides the next move after a step returns `outcome`, given how many
/// transient failures and feedback rounds the step has already used.
pub fn handle_failure(
    outcome: &StepOutcome,
    transient_failures: u32,
    feedback_rounds: usize,
    limits: Limits,
) -> Action {
    match outcome {
        StepOutcome::Retryable(e) if transient_failures < limits.retries => {
            tracing::debug!(error = %e, "retrying step");
            Action::Retry
        }
        StepOutcome::Retryable(e) => Action::Fail(format!("{e} (gave up after {} retries)", limits.retries)),
        StepOutcome::Fatal(e) => Action::Fail(e.clone()),
        StepOutcome::Feedback(f) if feedback_rounds < limits.feedback_rounds => Action::Refine(f.clone()),
        StepOutcome::Feedback(f) => {
            Action::Fail(format!("no convergence after {feedback_rounds} feedback rounds: {f}"))
        }
        StepOutcome::NeedsInput(r) => Action::Suspend(r.clone()),
        StepOutcome::Ok(_) => Action::Fail("success is not a failure".into()),
    }
}

/// Where a run stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed,
    Suspended(Vec<Requirement>),
    Failed { step: String, error: String },
}

type Checkpoint<'a> = Box<dyn FnMut(&ExecutionState) -> Result<(), CoreError> + 'a>;
type Progress<'a> = Box<dyn FnMut(StepProgress) + 'a>;

pub struct Orchestrator<'a> {
    runner: &'a dyn StepRunner,
    limits: Limits,
    checkpoint: Checkpoint<'a>,
    progress: Progress<'a>,
}

impl<'a> Orchestrator<'a> {
    pub fn new(runner: &'a dyn StepRunner) -> Self {
        Self { runner, limits: Limits::default(), checkpoint: Box::new(|_| Ok(())), progress: Box::new(|_| {}) }
    }

    pub fn limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    pub fn on_checkpoint(mut self, f: impl FnMut(&ExecutionState) -> Result<(), CoreError> + 'a) -> Self {
        self.checkpoint = Box::new(f);
        self
    }

    /// Checkpoints into the session's plan directory.
    pub fn checkpoint_to(self, store: &'a SessionStore, session_id: &'a str) -> Self {
        self.on_checkpoint(move |s| store.save_execution(session_id, s))
    }

    pub fn on_progress(mut self, f: impl FnMut(StepProgress) + 'a) -> Self {
        self.progress = Box::new(f);
        self
    }

    fn set(&mut self, state: &mut ExecutionState, i: usize, s: StepState) {
        (self.progress)(StepProgress::new(&state.plan.plan_id, &state.plan.steps[i].name, &s));
        state.step_states[i] = s;
    }

    fn fail(
        &mut self,
        state: &mut ExecutionState,
        i: usize,
        attempts: u32,
        error: String,
    ) -> Result<RunOutcome, EngineError> {
        let step = state.plan.steps[i].name.clone();
        self.set(state, i, StepState::Failed { error: error.clone(), attempts });
        state.failed_step = Some(step.clone());
        state.status = PlanStatus::Failed;
        (self.checkpoint)(state)?;
        Ok(RunOutcome::Failed { step, error })
    }

    /// Runs every step that has not yet succeeded, in plan order. A step
    /// that fails leaves the steps after it pending.
    pub fn execute(
        &mut self,
        state: &mut ExecutionState,
        inputs: &BTreeMap<String, ResolvedInput>,
    ) -> Result<RunOutcome, EngineError> {
        match state.status {
            PlanStatus::Completed => return Err(EngineError::AlreadyComplete(state.plan.plan_id.clone())),
            PlanStatus::Suspended => {
                return Ok(RunOutcome::Suspended(state.pending_requirements().unwrap_or_default().to_vec()));
            }
            PlanStatus::Failed => {
                return Err(EngineError::NotSuspended {
                    plan_id: state.plan.plan_id.clone(),
                    status: state.status.to_string(),
                })
            }
            PlanStatus::Pending | PlanStatus::Running => {}
        }
        state.status = PlanStatus::Running;
        for i in 0..state.plan.steps.len() {
            if matches!(state.step_states[i], StepState::Succeeded { .. }) {
                continue;
            }
            let mut attempts = state.step_states[i].attempts();
            let mut transient = 0;
            loop {
                attempts += 1;
                self.set(state, i, StepState::Running { attempts });
                let outcome = {
                    let step = &state.plan.steps[i];
                    let empty = Vec::new();
                    let call = StepCall {
                        plan_id: &state.plan.plan_id,
                        agent: state.plan.agent,
                        step,
                        inputs,
                        outputs: &state.outputs,
                        answers: &state.answers,
                        asked: &state.asked,
                        feedback: state.feedback.get(&step.name).unwrap_or(&empty),
                        attempt: attempts,
                    };
                    self.runner.run(&call)
                };
                if let StepOutcome::Ok(value) = outcome {
                    let produces = state.plan.steps[i].produces.clone();
                    state.outputs.insert(produces.clone(), value);
                    self.set(state, i, StepState::Succeeded { output: produces, attempts });
                    (self.checkpoint)(state)?;
                    break;
                }
                let name = state.plan.steps[i].name.clone();
                let rounds = state.feedback.get(&name).map_or(0, Vec::len);
                match handle_failure(&outcome, transient, rounds, self.limits) {
                    Action::Retry => transient += 1,
                    Action::Refine(f) => {
                        state.feedback.entry(name).or_default().push(f);
                        (self.checkpoint)(state)?;
                    }
                    Action::Suspend(requirements) => {
                        for r in &requirements {
                            state.asked.insert(r.name.clone(), r.description.clone());
                        }
                        self.set(state, i, StepState::Suspended { requirements: requirements.clone(), attempts });
                        state.status = PlanStatus::Suspended;
                        (self.checkpoint)(state)?;
                        return Ok(RunOutcome::Suspended(requirements));
                    }
                    Action::Fail(error) => return self.fail(state, i, attempts, error),
                }
            }
        }
        state.status = PlanStatus::Completed;
        (self.checkpoint)(state)?;
        Ok(RunOutcome::Completed)
    }

    /// Continues a suspended plan with the user's answers. Unless every
    /// pending requirement gets a non-blank answer the state is left as it
    /// was and the missing requirements are returned.
    pub fn resume(
        &mut self,
        state: &mut ExecutionState,
        supplied: &BTreeMap<String, String>,
        inputs: &BTreeMap<String, ResolvedInput>,
    ) -> Result<RunOutcome, EngineError> {
        match state.status {
            PlanStatus::Suspended => {}
            PlanStatus::Completed => return Err(EngineError::AlreadyComplete(state.plan.plan_id.clone())),
            other => {
                return Err(EngineError::NotSuspended {
                    plan_id: state.plan.plan_id.clone(),
                    status: other.to_string(),
                })
            }
        }
        let pending = state.pending_requirements().unwrap_or_default().to_vec();
        let missing: Vec<Requirement> =
            pending.iter().filter(|r| supplied.get(&r.name).is_none_or(|v| v.trim().is_empty())).cloned().collect();
        if !missing.is_empty() {
            return Ok(RunOutcome::Suspended(missing));
        }
        for r in &pending {
            state.answers.insert(r.name.clone(), supplied[&r.name].trim().to_string());
        }
        if let Some(i) = state.step_states.iter().position(|s| matches!(s, StepState::Suspended { .. })) {
            state.step_states[i] = StepState::Pending;
        }
        state.status = PlanStatus::Running;
        self.execute(state, inputs)
    }
}

/// Loads artifact inputs from the store.
pub fn resolve_inputs(
    store: &SessionStore,
    inputs: &BTreeMap<String, InputValue>,
) -> Result<BTreeMap<String, ResolvedInput>, EngineError> {
    inputs
        .iter()
        .map(|(name, v)| {
            let r = match v {
                InputValue::Text(t) => ResolvedInput::text(t.clone()),
                InputValue::Artifact(a) => ResolvedInput {
                    filename: Some(a.filename.clone()),
                    text: store.read_artifact_text(&a.artifact_id).map_err(|source| EngineError::Input {
                        name: name.clone(),
                        id: a.artifact_id.clone(),
                        source,
                    })?,
                },
            };
            Ok((name.clone(), r))
        })
        .collect()
}
