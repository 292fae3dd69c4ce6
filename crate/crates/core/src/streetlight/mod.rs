//! Deterministic smart street light world.
//!
//! Lamps stand evenly spaced along a one-dimensional street. Each tick every
//! lamp senses ambient light, nearby motion and its neighbours' radio, then a
//! shared policy picks its light level, radio output and whether to listen
//! next tick. Pedestrians walk at full speed on lit cells and at half speed
//! in the dark. An episode is scored on completed trips, trip time and
//! energy.

mod episode;
mod fitness;
mod policy;
mod world;

pub use episode::{
    run_episode, run_traced, write_trace_csv, EpisodeOutcome, LampState, LampUsage, PersonState,
    TraceRow, WorldState,
};
pub use fitness::{
    combine, fitness_report, FitnessInputError, FitnessReport, SimStats, WEIGHT_ENERGY,
    WEIGHT_PEOPLE, WEIGHT_TRIP,
};
pub use policy::{
    decode_outputs, BaselinePolicy, InputSignal, IoLayout, LampAction, LampCommand, LampPolicy,
    LayoutError, NetworkPolicy, OutputSignal, SensorFrame,
};
pub use world::{
    AmbientSchedule, AmbientSegment, EnergyCosts, PeopleGenerator, PersonSpec, WorldConfig,
    WorldError, REFERENCE_CELLS, REFERENCE_LIGHTS, REFERENCE_PEOPLE, REFERENCE_TICKS,
};
