//! Experiment plumbing: variants, run directories, evaluation, dumps and
//! result aggregation.

pub mod dump;
pub mod eval;
pub mod report;
pub mod run;
pub mod stats;
pub mod variants;

pub use dump::{dump_trajectory, parse_trace, replay_deviation, DumpSummary};
pub use eval::{load_policy, run_episode, run_eval, EpisodeOutcome, EvalCell, EvalReport, EvalSettings, LoadedPolicy};
pub use report::{Aggregate, SummaryTable};
pub use run::{run_pretrain, run_training, EncoderSource, PretrainSetup, RunConfig};
pub use stats::{wilcoxon_signed_rank, SignedRank};
pub use variants::{Variant, VariantSpec};
