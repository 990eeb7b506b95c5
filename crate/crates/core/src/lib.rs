//! Prompt-ensembling toolkit: discovers diverse reasoning strategies,
//! composes single-call and multi-call ensemble prompts, executes them
//! against chat-completion backends, aggregates the answers, and reports
//! accuracy against inference cost.
//!
//! The crate also ships sound, deterministic verifiers for the two
//! structured tasks: a block-stacking plan simulator/validator and a
//! graph-coloring checker, each paired with an exhaustive oracle used by the
//! test suites.
//!
//! # Module map
//! - [`strategy`]: approaches, personas, scored pairs, bundle persistence
//! - [`discovery`]: approach/persona solicitation, pair selection, few-shot
//!   augmentation
//! - [`compose`]: prompt rendering for every mode
//! - [`gateway`]: chat-completion backends (live/record/replay/scripted),
//!   token estimation, exact dollar-cost accounting
//! - [`extract`]: answer parsing and in-call segment splitting
//! - [`aggregate`]: majority vote, plan vote, verifier-gated selection,
//!   meta-reasoning
//! - [`blocksworld`] / [`coloring`]: task verifiers and oracles
//! - [`task`]: benchmark definitions and dataset loading
//! - [`runner`]: experiment execution, size sweeps, error-propagation study
//! - [`pareto`] / [`report`]: cost-accuracy frontiers and CSV reports

pub mod aggregate;
pub mod blocksworld;
pub mod coloring;
pub mod compose;
pub mod discovery;
pub mod extract;
pub mod gateway;
pub mod pareto;
pub mod report;
pub mod runner;
pub mod strategy;
pub mod task;
