//! Self-configuring IoT agents.
//!
//! A FODA [`feature_model`] bounds what an agent may have (sensors,
//! actuators, network shape). The selected configuration is turned into a
//! three-layer network search space ([`neurogenome`]), which a pruning
//! genetic algorithm ([`evolution`]) trains inside a deterministic smart
//! street light simulation ([`streetlight`]). The [`controller`] ties these
//! together into experiments that can be evaluated and reconfigured, by a
//! person or by a budgeted search over the neural alternatives.

pub mod controller;
pub mod evolution;
pub mod feature_model;
pub mod neurogenome;
pub mod persist;
pub mod streetlight;
