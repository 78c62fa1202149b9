//! Checks shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

pub mod oracle;
pub mod props;
