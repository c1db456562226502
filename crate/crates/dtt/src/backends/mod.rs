//! Denotational backends.

pub mod cdc;
pub mod change;
pub mod dlr;
pub mod metric;
