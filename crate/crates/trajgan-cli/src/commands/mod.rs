mod evaluate;
mod generate;
mod gradcheck;
mod mem_report;
mod synth_data;
mod train;

pub use evaluate::{evaluate, EvaluateArgs};
pub use generate::{generate, GenerateArgs};
pub use gradcheck::{gradcheck, GradcheckArgs};
pub use mem_report::{mem_report, MemReportArgs};
pub use synth_data::{synth_data, SynthDataArgs};
pub use train::{train_backbone, train_plugin, TrainBackboneArgs, TrainPluginArgs};
