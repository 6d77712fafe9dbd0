//! Approximation ratio and gap reports.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::Instance;
use crate::decoding::{decode, DecodedSolution};
use crate::error::{Error, Result};
use crate::model::{forward, ModelParams};
use crate::oracle::{approx_gap, approx_ratio};
use crate::problems::ProblemClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMetrics {
    pub name: String,
    pub class: ProblemClass,
    pub n: usize,
    pub value: f64,
    pub optimum: f64,
    pub ar: f64,
    pub gap: f64,
    /// Forward pass plus decoding.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: ProblemClass,
    pub count: usize,
    pub mean_ar: f64,
    pub mean_gap: f64,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub instances: Vec<InstanceMetrics>,
    /// In order of first appearance.
    pub classes: Vec<ClassSummary>,
    /// Mean over classes of the per-class mean gap.
    pub ag: f64,
    pub mean_seconds: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

impl InstanceMetrics {
    pub fn new(inst: &Instance, value: f64, seconds: f64) -> Result<Self> {
        let optimum = inst.optimal_value()?;
        Ok(Self {
            name: inst.name.clone(),
            class: inst.class,
            n: inst.graph.num_nodes(),
            value,
            optimum,
            ar: approx_ratio(value, optimum)?,
            gap: approx_gap(&[(value, optimum)])?,
            seconds,
        })
    }
}

impl MetricsReport {
    pub fn from_instances(instances: Vec<InstanceMetrics>) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::Config("cannot report on zero instances".into()));
        }
        let mut order: Vec<ProblemClass> = Vec::new();
        for m in &instances {
            if !order.contains(&m.class) {
                order.push(m.class);
            }
        }
        let classes: Vec<ClassSummary> = order
            .into_iter()
            .map(|cls| {
                let of = || instances.iter().filter(move |m| m.class == cls);
                ClassSummary {
                    class: cls,
                    count: of().count(),
                    mean_ar: mean(of().map(|m| m.ar)),
                    mean_gap: mean(of().map(|m| m.gap)),
                    mean_seconds: mean(of().map(|m| m.seconds)),
                }
            })
            .collect();
        let ag = mean(classes.iter().map(|c| c.mean_gap));
        let mean_seconds = mean(instances.iter().map(|m| m.seconds));
        Ok(Self { instances, classes, ag, mean_seconds })
    }

    pub fn class(&self, cls: ProblemClass) -> Option<&ClassSummary> {
        self.classes.iter().find(|c| c.class == cls)
    }

    /// Largest per-class mean gap, i.e. the class whose mean AR is farthest
    /// from 1.
    pub fn worst_class_gap(&self) -> f64 {
        self.classes.iter().map(|c| c.mean_gap).fold(0.0, f64::max)
    }

    /// One header row of class names and one row of `AR (sec)` cells.
    pub fn table_csv(&self, method: &str) -> String {
        let mut out = String::from("method");
        for c in &self.classes {
            write!(out, ",{}", c.class).unwrap();
        }
        write!(out, "\n{method}").unwrap();
        for c in &self.classes {
            write!(out, ",{:.4} ({:.4})", c.mean_ar, c.mean_seconds).unwrap();
        }
        out.push('\n');
        out
    }

    pub fn instances_csv(&self) -> String {
        let mut out = String::from("name,class,n,value,optimum,ar,gap,seconds\n");
        for m in &self.instances {
            writeln!(out, "{},{},{},{},{},{},{},{}", m.name, m.class, m.n, m.value, m.optimum, m.ar, m.gap, m.seconds)
                .unwrap();
        }
        out
    }
}

/// Forward pass and decoding for one instance, timed together.
pub fn solve_with_model(params: &ModelParams, inst: &Instance) -> Result<(DecodedSolution, Vec<f64>)> {
    let start = Instant::now();
    let x_r = forward(params, &inst.hetero)?;
    let mut sol = decode(inst.class, &inst.graph, x_r.values())?;
    sol.seconds = start.elapsed().as_secs_f64();
    Ok((sol, x_r.0))
}

/// Decodes every instance with `params` and compares against its optimum.
pub fn evaluate(params: &ModelParams, instances: &[Instance]) -> Result<MetricsReport> {
    let rows = instances
        .iter()
        .map(|inst| {
            let (sol, _) = solve_with_model(params, inst)?;
            InstanceMetrics::new(inst, sol.objective, sol.seconds)
        })
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::from_instances(rows)
}
