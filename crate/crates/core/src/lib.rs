//! Situated interactive instruction agent for a simulated tabletop.
//!
//! The crate is layered bottom-up: [`world`] simulates the table, [`perception`]
//! and [`spatial`] turn it into symbols and relations, [`language`] parses the
//! instructor, [`memory`] and [`dialog`] hold the agent's knowledge and
//! discourse state, and [`agent`] runs the interaction cycle over all of them.

pub mod agent;
pub mod dialog;
pub mod language;
pub mod memory;
pub mod perception;
pub mod spatial;
pub mod world;
