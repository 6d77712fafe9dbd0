//! Constrained binary quadratic programs and the four built-in graph problem
//! classes.
//!
//! Every instance is stored in a canonical minimization form
//! `min xᵀQx + cᵀx  s.t. Ax ≤ b`, `x ∈ {0,1}^N`. Maximization classes are
//! negated when built and un-negated when reporting.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "MIN")]
    Min,
    #[serde(rename = "MAX")]
    Max,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Min => "MIN",
            Sense::Max => "MAX",
        })
    }
}

impl FromStr for Sense {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MIN" => Ok(Sense::Min),
            "MAX" => Ok(Sense::Max),
            _ => Err(Error::Parameter(format!("unknown sense {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProblemClass {
    #[serde(rename = "MIS")]
    Mis,
    #[serde(rename = "MC")]
    Mc,
    #[serde(rename = "MVC")]
    Mvc,
    #[serde(rename = "MDS")]
    Mds,
}

impl ProblemClass {
    pub const ALL: [ProblemClass; 4] = [ProblemClass::Mis, ProblemClass::Mc, ProblemClass::Mvc, ProblemClass::Mds];

    pub fn sense(self) -> Sense {
        match self {
            ProblemClass::Mis | ProblemClass::Mc => Sense::Max,
            ProblemClass::Mvc | ProblemClass::Mds => Sense::Min,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemClass::Mis => "MIS",
            ProblemClass::Mc => "MC",
            ProblemClass::Mvc => "MVC",
            ProblemClass::Mds => "MDS",
        }
    }
}

impl fmt::Display for ProblemClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MIS" => Ok(ProblemClass::Mis),
            "MC" => Ok(ProblemClass::Mc),
            "MVC" => Ok(ProblemClass::Mvc),
            "MDS" => Ok(ProblemClass::Mds),
            _ => Err(Error::Parameter(format!("unknown problem class {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// Brings a linear constraint into `≤` form; `≥` rows are negated.
pub fn normalize_constraint(
    row: &[(usize, f64)],
    rhs: f64,
    relation: Relation,
) -> Result<(Vec<(usize, f64)>, f64)> {
    match relation {
        Relation::Le => Ok((row.to_vec(), rhs)),
        Relation::Ge => Ok((row.iter().map(|&(j, a)| (j, -a)).collect(), -rhs)),
        Relation::Eq => Err(Error::UnsupportedRelation("equality constraints are not supported".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryAssignment(Vec<bool>);

impl BinaryAssignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![true; n])
    }

    pub fn from_selected(n: usize, selected: &[usize]) -> Self {
        let mut bits = vec![false; n];
        for &i in selected {
            bits[i] = true;
        }
        Self(bits)
    }

    /// Parses a 0/1 slice; any other value is rejected.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        values
            .iter()
            .map(|&v| match v {
                v if v == 0.0 => Ok(false),
                v if v == 1.0 => Ok(true),
                v => Err(Error::Parameter(format!("non-binary value {v}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.0[i] = v;
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    pub fn selected(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    /// Value of the canonical minimization objective.
    pub internal: f64,
    /// Value in the instance's original sense.
    pub reported: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    pub total_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpInstance {
    n: usize,
    q: CsrMatrix,
    c: Vec<f64>,
    a: CsrMatrix,
    b: Vec<f64>,
    original_sense: Sense,
    var_names: Vec<String>,
}

impl QpInstance {
    pub fn new(q: CsrMatrix, c: Vec<f64>, a: CsrMatrix, b: Vec<f64>, original_sense: Sense) -> Result<Self> {
        let n = c.len();
        let names = (0..n).map(|i| format!("x{i}")).collect();
        Self::with_names(q, c, a, b, original_sense, names)
    }

    pub fn with_names(
        q: CsrMatrix,
        c: Vec<f64>,
        a: CsrMatrix,
        b: Vec<f64>,
        original_sense: Sense,
        var_names: Vec<String>,
    ) -> Result<Self> {
        let n = c.len();
        if q.rows() != n || q.cols() != n {
            return Err(Error::Dimension { expected: n, got: q.rows() });
        }
        if !q.is_symmetric() {
            return Err(Error::Parameter("quadratic matrix must be symmetric".into()));
        }
        if a.cols() != n {
            return Err(Error::Dimension { expected: n, got: a.cols() });
        }
        if a.rows() != b.len() {
            return Err(Error::Dimension { expected: a.rows(), got: b.len() });
        }
        if let Some(e) = (0..a.rows()).find(|&e| a.row_len(e) == 0) {
            return Err(Error::Parameter(format!("constraint row {e} is empty")));
        }
        if var_names.len() != n {
            return Err(Error::Dimension { expected: n, got: var_names.len() });
        }
        if c.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite coefficient".into()));
        }
        Ok(Self { n, q, c, a, b, original_sense, var_names })
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_constraints(&self) -> usize {
        self.a.rows()
    }

    pub fn q(&self) -> &CsrMatrix {
        &self.q
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn a(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn original_sense(&self) -> Sense {
        self.original_sense
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    /// `Q + diag(c)`: the linear term folded into the diagonal.
    pub fn q_tilde(&self) -> CsrMatrix {
        let mut t: Vec<(usize, usize, f64)> = self.q.triplets().into_iter().filter(|t| t.0 != t.1).collect();
        for i in 0..self.n {
            t.push((i, i, self.q.get(i, i) + self.c[i]));
        }
        CsrMatrix::from_triplets(self.n, self.n, &t).expect("valid matrix")
    }

    fn check_len(&self, x: &BinaryAssignment) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Dimension { expected: self.n, got: x.len() });
        }
        Ok(())
    }

    pub fn to_reported(&self, internal: f64) -> f64 {
        match self.original_sense {
            Sense::Min => internal,
            Sense::Max => -internal,
        }
    }

    pub fn discrete_objective(&self, x: &BinaryAssignment) -> Result<ObjectiveValue> {
        self.check_len(x)?;
        let xf = x.to_f64();
        let qx = self.q.mul_vec(&xf);
        let internal: f64 = xf.iter().zip(&qx).map(|(a, b)| a * b).sum::<f64>()
            + xf.iter().zip(&self.c).map(|(a, b)| a * b).sum::<f64>();
        Ok(ObjectiveValue { internal, reported: self.to_reported(internal) })
    }

    pub fn is_feasible(&self, x: &BinaryAssignment) -> Result<Feasibility> {
        self.check_len(x)?;
        let ax = self.a.mul_vec(&x.to_f64());
        let total_violation: f64 = ax.iter().zip(&self.b).map(|(l, r)| (l - r).max(0.0)).sum();
        Ok(Feasibility { feasible: total_violation == 0.0, total_violation })
    }

    /// Text form: a `N M SENSE` header, then `Q <nnz>` triplets, a `c` line,
    /// `A <nnz>` triplets, a `b` line and a `names` line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{} {} {}", self.n, self.num_constraints(), self.original_sense).unwrap();
        writeln!(out, "Q {}", self.q.nnz()).unwrap();
        for (i, j, v) in self.q.triplets() {
            writeln!(out, "{i} {j} {v:?}").unwrap();
        }
        writeln!(out, "c {}", join(self.c.iter().map(|v| format!("{v:?}")))).unwrap();
        writeln!(out, "A {}", self.a.nnz()).unwrap();
        for (e, j, v) in self.a.triplets() {
            writeln!(out, "{e} {j} {v:?}").unwrap();
        }
        writeln!(out, "b {}", join(self.b.iter().map(|v| format!("{v:?}")))).unwrap();
        writeln!(out, "names {}", self.var_names.join(" ")).unwrap();
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut r = LineReader::new(text);
        let (line, header) = r.next("header")?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 3 {
            return Err(Error::Parse { line, message: "header must be \"N M SENSE\"".into() });
        }
        let n: usize = parse_num(h[0], line)?;
        let m: usize = parse_num(h[1], line)?;
        let sense: Sense = h[2].parse().map_err(|_| Error::Parse { line, message: format!("bad sense {:?}", h[2]) })?;
        let q = r.triplets("Q", n, n)?;
        let c = r.dense("c", n)?;
        let a = r.triplets("A", m, n)?;
        let b = r.dense("b", m)?;
        let (line, l) = r.next("names")?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some("names") {
            return Err(Error::Parse { line, message: "expected \"names\" line".into() });
        }
        let names: Vec<String> = parts.map(str::to_owned).collect();
        Self::with_names(q, c, a, b, sense, names).map_err(|e| Error::Parse { line, message: e.to_string() })
    }
}

struct LineReader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> LineReader<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty()).collect();
        Self { lines, pos: 0 }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let last = self.lines.last().map_or(1, |l| l.0);
        let item = self.lines.get(self.pos).copied().ok_or_else(|| Error::Parse {
            line: last,
            message: format!("unexpected end of input, expected {what}"),
        })?;
        self.pos += 1;
        Ok(item)
    }

    fn triplets(&mut self, tag: &str, rows: usize, cols: usize) -> Result<CsrMatrix> {
        let (line, l) = self.next(tag)?;
        let count: usize = match l.split_whitespace().collect::<Vec<_>>()[..] {
            [t, c] if t == tag => parse_num(c, line)?,
            _ => return Err(Error::Parse { line, message: format!("expected \"{tag} <nnz>\"") }),
        };
        let mut triplets = Vec::with_capacity(count);
        for _ in 0..count {
            let (line, l) = self.next("triplet")?;
            match l.split_whitespace().collect::<Vec<_>>()[..] {
                [i, j, v] => triplets.push((parse_num(i, line)?, parse_num(j, line)?, parse_num(v, line)?)),
                _ => return Err(Error::Parse { line, message: "expected \"i j value\"".into() }),
            }
        }
        CsrMatrix::from_triplets(rows, cols, &triplets).map_err(|e| Error::Parse { line, message: e.to_string() })
    }

    fn dense(&mut self, tag: &str, len: usize) -> Result<Vec<f64>> {
        let (line, l) = self.next(tag)?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(tag) {
            return Err(Error::Parse { line, message: format!("expected \"{tag}\" line") });
        }
        let vals = parts.map(|p| parse_num(p, line)).collect::<Result<Vec<f64>>>()?;
        if vals.len() != len {
            return Err(Error::Parse { line, message: format!("expected {len} values, got {}", vals.len()) });
        }
        Ok(vals)
    }
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(" ")
}

fn parse_num<T: FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse { line, message: format!("invalid number {s:?}") })
}

/// Builds the canonical QP of `cls` on `g`.
///
/// Constraint rows per class: one per edge (MIS, MVC), one per non-edge in
/// lexicographic order (MC), one per node over its closed neighborhood (MDS).
pub fn build_qp(g: &Graph, cls: ProblemClass) -> QpInstance {
    let n = g.num_nodes();
    let (c_val, pairs, relation) = match cls {
        ProblemClass::Mis => (-1.0, Some(g.edges().to_vec()), Relation::Le),
        ProblemClass::Mc => (-1.0, Some(g.non_edges()), Relation::Le),
        ProblemClass::Mvc => (1.0, Some(g.edges().to_vec()), Relation::Ge),
        ProblemClass::Mds => (1.0, None, Relation::Ge),
    };
    let raw: Vec<(Vec<(usize, f64)>, f64)> = match pairs {
        Some(pairs) => pairs.into_iter().map(|(u, v)| (vec![(u, 1.0), (v, 1.0)], 1.0)).collect(),
        None => (0..n)
            .map(|i| {
                let mut row: Vec<(usize, f64)> = std::iter::once(i).chain(g.neighbors(i).iter().copied()).map(|j| (j, 1.0)).collect();
                row.sort_unstable_by_key(|&(j, _)| j);
                (row, 1.0)
            })
            .collect(),
    };
    let mut rows = Vec::with_capacity(raw.len());
    let mut b = Vec::with_capacity(raw.len());
    for (row, rhs) in raw {
        let (row, rhs) = normalize_constraint(&row, rhs, relation).expect("inequality relation");
        rows.push(row);
        b.push(rhs);
    }
    let a = CsrMatrix::from_rows(n, &rows).expect("valid constraint rows");
    QpInstance::new(CsrMatrix::zeros(n, n), vec![c_val; n], a, b, cls.sense()).expect("well-formed instance")
}
