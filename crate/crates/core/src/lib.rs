//! Simulation of a duty-cycled environmental sensor deployment.
//!
//! Field nodes (soil stations and livestock collars) sample on a duty
//! cycle and hand packets to a relay, which forwards them over a long-range
//! hop to a gateway and on to a cloud store. Every hop above the node is
//! acknowledged and durably queued. The whole run is driven by a
//! discrete-event scheduler and a seeded RNG, so a given scenario and seed
//! always produce the same store.

pub mod analysis;
pub mod cloudcore;
pub mod deployment;
pub mod environment;
pub mod error;
pub mod faults;
pub mod fieldnode;
pub mod packet;
pub mod radiolink;
pub mod report;
pub mod scenario;
pub mod simkernel;
pub mod storeforward;
pub mod wire;
