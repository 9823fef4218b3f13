//! Earth-fixed beam layouts, beam-hopping plans, SINR evaluation and NR
//! common-signaling schedules for an EIRP-limited LEO satellite.

pub mod array;
pub mod geometry;
pub mod hopping;
pub mod layout;
pub mod link;
pub mod scheduler;
