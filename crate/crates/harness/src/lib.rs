//! Ingestion, model gateway, task pipelines, reports and the `usersim` CLI.

pub mod absa;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod embeddings;
pub mod gateway;
pub mod io;
pub mod manifest;
pub mod report;
pub mod runner;
pub mod surnames;
pub mod tasks;
