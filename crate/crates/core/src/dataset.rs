//! Encoded problem instances grouped by class and split.

use crate::encoding::{encode, HeteroGraph};
use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::oracle::{CachedOptimum, OracleCache};
use crate::problems::{build_qp, ProblemClass, QpInstance};

#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub graph: Graph,
    pub class: ProblemClass,
    pub qp: QpInstance,
    pub hetero: HeteroGraph,
    pub optimum: Option<CachedOptimum>,
}

impl Instance {
    pub fn new(name: impl Into<String>, graph: Graph, class: ProblemClass) -> Result<Self> {
        let qp = build_qp(&graph, class);
        let hetero = encode(&graph, &qp)?;
        Ok(Self { name: name.into(), graph, class, qp, hetero, optimum: None })
    }

    /// Attaches the exact optimum, solving on a cache miss.
    pub fn solve_optimum(&mut self, cache: &mut OracleCache) -> Result<()> {
        self.optimum = Some(cache.optimum(&self.graph, self.class)?);
        Ok(())
    }

    pub fn optimal_value(&self) -> Result<f64> {
        self.optimum
            .as_ref()
            .map(|o| o.value_reported)
            .ok_or_else(|| Error::Config(format!("no oracle optimum for instance {}", self.name)))
    }
}

#[derive(Debug, Clone)]
pub struct ClassData {
    pub class: ProblemClass,
    pub train: Vec<Instance>,
    pub val: Vec<Instance>,
    pub test: Vec<Instance>,
}

impl ClassData {
    /// Encodes the same graph splits for `class`.
    pub fn from_graphs(
        class: ProblemClass,
        train: &[(String, Graph)],
        val: &[(String, Graph)],
        test: &[(String, Graph)],
    ) -> Result<Self> {
        let enc = |xs: &[(String, Graph)]| -> Result<Vec<Instance>> {
            xs.iter().map(|(n, g)| Instance::new(n.clone(), g.clone(), class)).collect()
        };
        Ok(Self { class, train: enc(train)?, val: enc(val)?, test: enc(test)? })
    }

    /// Attaches optima to the validation and test splits.
    pub fn solve_optima(&mut self, cache: &mut OracleCache) -> Result<()> {
        for inst in self.val.iter_mut().chain(self.test.iter_mut()) {
            inst.solve_optimum(cache)?;
        }
        Ok(())
    }
}
