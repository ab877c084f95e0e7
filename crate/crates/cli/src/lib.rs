//! Pipeline orchestration for the `cxr-severity` command.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod tables;
