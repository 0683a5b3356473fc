//! Teleoperation service: live WebSocket sessions, headless scripted runs
//! and the wire protocol they share.

pub mod headless;
pub mod script;
pub mod server;
pub mod session;
pub mod wav;
pub mod wire;
