//! Durable acknowledged store-and-forward at the relay and the gateway.

pub mod gateway;
pub mod log;
pub mod relay;

pub use gateway::{Gateway, GatewayConfig, GatewayRecord};
pub use log::DurableLog;
pub use relay::{CommandEntry, DurableEntry, EntryState, Relay, RelayConfig, RelayRecord};
