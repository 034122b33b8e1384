#![allow(dead_code)]

pub mod dense;
pub mod oracle;
pub mod props;
