pub mod assess;
pub mod config;
pub mod error;
pub mod io;
pub mod mask;
pub mod model;
pub mod parser;
pub mod program;
pub mod registry;
pub mod runtime;
pub mod sampler;

pub use assess::{
    auroc, auroc_matrix, edit_distance, to_tree, AssessmentModel, EditCostConfig, ProgramTree, ScoreMode,
};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use model::{
    build_model, compose_disjunction, merge_sequential, select_diverse, Disjunction, ExecutableActionModel,
};
pub use parser::{parse, parse_in, print, Language, ParseError};
pub use program::{validate, Horizon, MotionProgram, MotionSpec, SensorTarget, Target, ValidationReport};
pub use registry::{channel_index, resolve_joint, Axis, Joint, JointAxisChannel, JointSet, Side};
pub use runtime::{
    compile_motion, compile_program, q_value, BufferEntry, LatentTimeline, LatentVector, MockProvider,
    RepresentationProvider, SensorSemantics, StateSample,
};
pub use sampler::{sample_program, SamplerConfig};
