//! Multi-stage trajectories, the declarative Q-function spec, parameter layout and
//! the stacked regression system.

mod dataset;
mod expr;
mod params;
mod spec;
mod stacked;

pub use dataset::{composite_outcome, primary_outcome, SmartDataset, Trajectory, TreatmentCoding};
pub use expr::{Factor, Feature};
pub use params::{ParamLayout, ParameterVector};
pub use spec::{InteractionSlot, ModelSpec, SlotTarget, StageSpec};
pub use stacked::{assemble_stacked, pseudo_outcome, stage_features, RowOrigin, StackedDesign, StackedSystem};
