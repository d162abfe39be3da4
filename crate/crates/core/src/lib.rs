pub mod expr;
pub mod data;
pub mod features;
pub mod fmn;
pub mod gp;
pub mod metrics;
