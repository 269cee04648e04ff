//! Limit order book market-making laboratory.
//!
//! Order book reconstruction, synthetic markets, quoting strategies, an
//! episodic market-making simulator with latency injection, reward and metric
//! computation, and a framed protocol server that exposes the simulator to
//! external learning agents.

pub mod actions;
pub mod book;
pub mod bridge;
pub mod features;
pub mod ingest;
pub mod money;
pub mod metrics;
pub mod rewards;
pub mod sim;
pub mod strategies;
