//! Queues with impatient customers: Lindley-type stochastic recursions, exact
//! stationary sampling by renovating events and Loynes schemes, a multi-server
//! discrete-event simulator, weak-stationarity diagnostics and loss estimates.

pub mod des;
pub mod error;
pub mod estimation;
pub mod fifo_begin;
pub mod fifo_end;
pub mod marks;
pub mod props;
pub mod scenario;
pub mod recursion;
pub mod stationary;
pub mod weak;

pub use error::{Error, Result};
pub use recursion::{Mode, RecursionSpec, RecursionValue, ZeroCertificate};
pub use stationary::{Method, Model, SampleOptions, StationarySample};
pub use marks::{AlphaKind, DeclaredBounds, Dist, MarkCursor, MarkLaw, MarkSource, MarkTriple, MarkovModulated, Regime};
