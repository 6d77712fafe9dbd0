//! Pluggable exact or time-limited solvers.
//!
//! An adapter must honor the time limit, return a feasible incumbent or
//! [`Error::Infeasible`], and treat a provided warm start as an initial
//! incumbent (ignoring it when it is infeasible).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use super::bnb::{branch_and_bound_with, BnbConfig};
use super::mip_start::{format_mip_start, parse_mip_start, MipStart};
use super::{exact_value, result, OracleResult};
use crate::error::{Error, Result};
use crate::problems::{BinaryAssignment, QpInstance};

pub const DEFAULT_ADAPTER: &str = "bnb";

pub trait SolverAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, qp: &QpInstance, time_limit: f64, warm_start: Option<&BinaryAssignment>) -> Result<OracleResult>;
}

/// The built-in branch-and-bound.
#[derive(Debug, Clone, Default)]
pub struct BranchAndBoundAdapter {
    pub node_limit: Option<u64>,
}

impl SolverAdapter for BranchAndBoundAdapter {
    fn name(&self) -> &str {
        DEFAULT_ADAPTER
    }

    fn solve(&self, qp: &QpInstance, time_limit: f64, warm_start: Option<&BinaryAssignment>) -> Result<OracleResult> {
        branch_and_bound_with(qp, &BnbConfig { time_limit, node_limit: self.node_limit }, warm_start)
    }
}

/// Runs an external program as
/// `program [args..] <instance> <time_limit> <solution_out> [<warm_start>]`.
///
/// The instance uses the QP text format and the warm start the MIP start
/// format. The program writes its incumbent to `solution_out` in the MIP
/// start format, or leaves it absent to signal infeasibility.
#[derive(Debug, Clone)]
pub struct CommandAdapter {
    pub name: String,
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl SolverAdapter for CommandAdapter {
    fn name(&self) -> &str {
        &self.name
    }

    fn solve(&self, qp: &QpInstance, time_limit: f64, warm_start: Option<&BinaryAssignment>) -> Result<OracleResult> {
        let start = Instant::now();
        let dir = std::env::temp_dir().join(format!("hetqp-{}-{}", std::process::id(), self.name));
        std::fs::create_dir_all(&dir)?;
        let instance = dir.join("instance.qp");
        let solution = dir.join("solution.mst");
        std::fs::write(&instance, qp.to_text())?;
        let _ = std::fs::remove_file(&solution);
        let mut cmd = Command::new(&self.program);
        cmd.args(&self.args).arg(&instance).arg(time_limit.to_string()).arg(&solution);
        if let Some(w) = warm_start {
            let path = dir.join("warm.mst");
            std::fs::write(&path, format_mip_start(qp.var_names(), MipStart::Decoded(w))?)?;
            cmd.arg(path);
        }
        let status = cmd.status().map_err(|e| Error::Solver(format!("{}: {e}", self.program.display())))?;
        if !status.success() {
            return Err(Error::Solver(format!("{} exited with {status}", self.name)));
        }
        if !solution.exists() {
            return Err(Error::Infeasible);
        }
        let pairs = parse_mip_start(&std::fs::read_to_string(&solution)?)?;
        let index: BTreeMap<&str, usize> = qp.var_names().iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut values = vec![0.0; qp.num_vars()];
        for (name, v) in &pairs {
            let i = *index.get(name.as_str()).ok_or_else(|| Error::Solver(format!("unknown variable {name}")))?;
            values[i] = *v;
        }
        let x = BinaryAssignment::from_values(&values)?;
        if exact_value(qp, &x)?.is_none() {
            return Err(Error::Solver(format!("{} returned an infeasible point", self.name)));
        }
        result(qp, x, false, 0, start)
    }
}

/// Named adapters. Unknown names fall back to the built-in solver.
pub struct SolverRegistry {
    adapters: BTreeMap<String, Box<dyn SolverAdapter>>,
}

impl Default for SolverRegistry {
    fn default() -> Self {
        let mut r = Self { adapters: BTreeMap::new() };
        r.register(Box::new(BranchAndBoundAdapter::default()));
        r
    }
}

impl SolverRegistry {
    pub fn register(&mut self, adapter: Box<dyn SolverAdapter>) {
        self.adapters.insert(adapter.name().to_string(), adapter);
    }

    pub fn names(&self) -> Vec<&str> {
        self.adapters.keys().map(String::as_str).collect()
    }

    pub fn get(&self, name: &str) -> &dyn SolverAdapter {
        match self.adapters.get(name) {
            Some(a) => a.as_ref(),
            None => {
                log::warn!("solver adapter {name:?} is not registered; using {DEFAULT_ADAPTER}");
                self.adapters.get(DEFAULT_ADAPTER).expect("default adapter").as_ref()
            }
        }
    }
}
