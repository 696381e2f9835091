//! Discrete-event message transport: simulated time, messages, the four
//! communication models and the global event queue.

mod message;
mod model;
mod queue;

pub use message::{Message, MessageKind, Recipient, SimTime, VotePhase};
pub use model::{assign_delay, AsyncWindows, GstTrigger, NetworkModel, NetworkRuntime, Slowdown};
pub use queue::EventQueue;
