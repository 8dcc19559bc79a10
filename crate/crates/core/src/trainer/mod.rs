//! Meta-training, baselines and test-time adaptation.

pub mod adapt;
pub mod aggregate;
pub mod harness;
pub mod schedule;

pub use adapt::{adapt_curve, adapt_curves, adaptation_tasks, curve_summary, flat_shape, mean_stderr, AdaptCurve, Learner};
pub use aggregate::aggregate;
pub use harness::{lockstep_update, meta_loop, Executor, GroupState, Harness, MetaState, Mode, RunSummary};
pub use schedule::{phase_at, schedule_offsets, starvation_possible, Phase};

use crate::config::MlshConfig;
use crate::error::Result;
use crate::metrics::MetricsRecord;
use crate::nn::NetParams;
use crate::scalar::Scalar;

/// Train the shared flat baseline: one policy updated by every group, with
/// tasks cycling on the same cadence as meta-training.
pub fn train_shared<S: Scalar>(cfg: &MlshConfig) -> Result<(NetParams<S>, Vec<MetricsRecord>)> {
    let mut harness = Harness::<S>::new(cfg, Mode::SharedBaseline, Executor::Threaded)?;
    let mut records = Vec::new();
    harness.run(|_, r| {
        records.extend_from_slice(r);
        Ok(())
    })?;
    let net = harness.meta.subs.into_nets().swap_remove(0);
    Ok((net, records))
}
