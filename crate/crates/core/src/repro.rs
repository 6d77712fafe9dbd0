//! Reproduction manifests: each criterion names a config, the metrics it
//! must produce and a wall-clock budget.
//!
//! ```toml
//! [[criterion]]
//! id = "7"
//! name = "single-problem training"
//! config = "configs/acceptance/c07_single.toml"
//! budget_seconds = 1800
//!
//! [[criterion.check]]
//! metric = "mis_ar"
//! comparison = "at_least"
//! expected = 0.90
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `value ≥ expected − tolerance`
    AtLeast,
    /// `value ≤ expected + tolerance`
    AtMost,
    /// `|value − expected| ≤ tolerance`
    Within,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub metric: String,
    pub comparison: Comparison,
    pub expected: f64,
    #[serde(default)]
    pub tolerance: f64,
}

impl Check {
    pub fn passes(&self, value: f64) -> bool {
        match self.comparison {
            Comparison::AtLeast => value >= self.expected - self.tolerance,
            Comparison::AtMost => value <= self.expected + self.tolerance,
            Comparison::Within => (value - self.expected).abs() <= self.tolerance,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.comparison {
            Comparison::AtLeast => ">=",
            Comparison::AtMost => "<=",
            Comparison::Within => "==",
        };
        write!(f, "{} {op} {}", self.metric, self.expected)?;
        if self.tolerance != 0.0 {
            write!(f, " ± {}", self.tolerance)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionSpec {
    pub id: String,
    #[serde(default)]
    pub name: String,
    /// Relative to the manifest's directory.
    pub config: PathBuf,
    pub budget_seconds: f64,
    #[serde(rename = "check")]
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproManifest {
    #[serde(default, rename = "criterion")]
    pub criteria: Vec<CriterionSpec>,
    /// Directory that criterion config paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ReproManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut m = Self::parse(&std::fs::read_to_string(path)?)?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.criteria.iter().enumerate() {
            if self.criteria[..i].iter().any(|o| o.id == c.id) {
                return Err(Error::Config(format!("criterion {} appears more than once", c.id)));
            }
            if c.checks.is_empty() {
                return Err(Error::Config(format!("criterion {} has no checks", c.id)));
            }
            if !(c.budget_seconds > 0.0) {
                return Err(Error::Config(format!("criterion {} needs a positive budget", c.id)));
            }
        }
        Ok(())
    }

    /// Errors unless the manifest lists exactly `ids`.
    pub fn require_ids(&self, ids: &[&str]) -> Result<()> {
        let have: Vec<&str> = self.criteria.iter().map(|c| c.id.as_str()).collect();
        let missing: Vec<&&str> = ids.iter().filter(|i| !have.contains(i)).collect();
        let extra: Vec<&&str> = have.iter().filter(|h| !ids.contains(h)).collect();
        if missing.is_empty() && extra.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("manifest mismatch: missing {missing:?}, unexpected {extra:?}")))
        }
    }

    pub fn config_path(&self, c: &CriterionSpec) -> PathBuf {
        self.base_dir.join(&c.config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Timeout,
    Error,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Timeout => "TIMEOUT",
            Status::Error => "ERROR",
        })
    }
}

pub type Metrics = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: String,
    pub name: String,
    pub status: Status,
    pub metrics: Metrics,
    /// Checks that did not hold, or the runner's error.
    pub failures: Vec<String>,
    pub seconds: f64,
    pub budget_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReproReport {
    pub outcomes: Vec<CriterionOutcome>,
}

/// Scores one criterion from its runner result and elapsed time. A missing
/// or non-finite metric fails its check.
pub fn judge(spec: &CriterionSpec, result: Result<Metrics>, seconds: f64) -> CriterionOutcome {
    let mut out = CriterionOutcome {
        id: spec.id.clone(),
        name: spec.name.clone(),
        status: Status::Pass,
        metrics: Metrics::new(),
        failures: vec![],
        seconds,
        budget_seconds: spec.budget_seconds,
    };
    match result {
        Err(e) => {
            out.status = Status::Error;
            out.failures.push(e.to_string());
        }
        Ok(metrics) => {
            for c in &spec.checks {
                match metrics.get(&c.metric) {
                    Some(&v) if v.is_finite() && c.passes(v) => {}
                    Some(&v) => out.failures.push(format!("{c} (got {v})")),
                    None => out.failures.push(format!("{c} (metric not reported)")),
                }
            }
            out.metrics = metrics;
            if !out.failures.is_empty() {
                out.status = Status::Fail;
            } else if seconds > spec.budget_seconds {
                out.status = Status::Timeout;
                out.failures.push(format!("took {seconds:.1}s, budget {}s", spec.budget_seconds));
            }
        }
    }
    out
}

/// Runs every criterion in manifest order.
pub fn run_manifest<F>(manifest: &ReproManifest, mut runner: F) -> ReproReport
where
    F: FnMut(&CriterionSpec, &Path) -> Result<Metrics>,
{
    let outcomes = manifest
        .criteria
        .iter()
        .map(|c| {
            let start = Instant::now();
            let result = runner(c, &manifest.config_path(c));
            let outcome = judge(c, result, start.elapsed().as_secs_f64());
            log::info!("criterion {} {}", outcome.id, outcome.status);
            outcome
        })
        .collect();
    ReproReport { outcomes }
}

impl ReproReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.status == Status::Pass)
    }

    pub fn failed_ids(&self) -> Vec<&str> {
        self.outcomes.iter().filter(|o| o.status != Status::Pass).map(|o| o.id.as_str()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One line per criterion.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for o in &self.outcomes {
            let metrics: Vec<String> = o.metrics.iter().map(|(k, v)| format!("{k}={v}")).collect();
            write!(s, "criterion {:>2} {:<7} {:>8.1}s  {}  [{}]", o.id, o.status, o.seconds, o.name, metrics.join(", "))
                .unwrap();
            if !o.failures.is_empty() {
                write!(s, "  failed: {}", o.failures.join("; ")).unwrap();
            }
            s.push('\n');
        }
        s
    }
}
