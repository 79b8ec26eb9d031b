use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use super::config::LoopConfig;
use super::rollout::{run_trajectory, RolloutSample, Toolbox};
use crate::chat::{PolicyClient, SamplingParams};
use crate::protocol::{Termination, ToolCallStats, Trajectory};

/// Trajectories of a batch, in input order, with aggregate statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub trajectories: Vec<Trajectory>,
    pub tool_call_stats: ToolCallStats,
    pub terminations: BTreeMap<Termination, usize>,
}

impl BatchReport {
    pub fn from_trajectories(trajectories: Vec<Trajectory>) -> Self {
        let mut tool_call_stats = ToolCallStats::default();
        let mut terminations: BTreeMap<Termination, usize> = Termination::ALL.iter().map(|t| (*t, 0)).collect();
        for t in &trajectories {
            tool_call_stats.merge(&t.tool_call_stats);
            *terminations.entry(t.termination).or_default() += 1;
        }
        Self { trajectories, tool_call_stats, terminations }
    }

    /// Failed tool calls over all tool calls in the batch; zero without calls.
    pub fn failure_rate(&self) -> f64 {
        self.tool_call_stats.failure_rate()
    }

    pub fn protocol_errors(&self) -> usize {
        self.terminations.get(&Termination::ProtocolError).copied().unwrap_or(0)
    }
}

/// Runs every sample on a pool of `workers` threads (at least one).
///
/// Output `i` always belongs to input `i`. A sample that fails, even by
/// panicking, only affects its own trajectory. When the sampling parameters
/// carry a seed, sample `i` uses `seed + i`.
pub fn run_batch(
    samples: &[RolloutSample],
    config: &LoopConfig,
    policy: &dyn PolicyClient,
    toolbox: &Toolbox,
    sampling: &SamplingParams,
    workers: usize,
) -> BatchReport {
    let slots: Vec<Mutex<Option<Trajectory>>> = samples.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = workers.clamp(1, samples.len().max(1));

    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(sample) = samples.get(i) else { break };
                let mut params = sampling.clone();
                params.seed = sampling.seed.map(|s| s.wrapping_add(i as u64));
                let outcome = catch_unwind(AssertUnwindSafe(|| run_trajectory(sample, config, policy, toolbox, &params)));
                let traj = outcome.unwrap_or_else(|panic| {
                    let mut t = Trajectory::new(sample.sample_id.clone());
                    t.error = Some(format!("rollout panicked: {}", panic_message(panic.as_ref())));
                    t
                });
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(traj);
            });
        }
    });

    let trajectories = slots
        .into_iter()
        .map(|s| s.into_inner().unwrap_or_else(|e| e.into_inner()).expect("every slot is filled"))
        .collect();
    BatchReport::from_trajectories(trajectories)
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".into()
    }
}
