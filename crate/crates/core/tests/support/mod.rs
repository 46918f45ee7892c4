#![allow(dead_code)]

pub mod metrics;
pub mod oracle;
