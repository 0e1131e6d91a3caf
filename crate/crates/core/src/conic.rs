//! Canonical real conic programs.
//!
//! A program is `min c^T x` subject to `b_j - A_j x in K_j` for every block
//! `j`, where each `K_j` is a zero, nonnegative, second-order or PSD cone.
//! PSD blocks are stored in [`svec`](crate::hermitian::svec) coordinates.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{hermitian_from_coords, svec_len, HermitianMatrix};

/// Cone attached to one constraint block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeTag {
    /// `{0}^dim`, i.e. equality rows.
    Zero(usize),
    /// Nonnegative orthant of dimension `dim`.
    Nonneg(usize),
    /// `{(t, u) : ||u|| <= t}` of total dimension `dim`.
    SecondOrder(usize),
    /// Real PSD matrices of the given side, in svec coordinates.
    Psd(usize),
}

impl ConeTag {
    /// Number of rows the block occupies.
    pub fn rows(&self) -> usize {
        match *self {
            ConeTag::Zero(d) | ConeTag::Nonneg(d) | ConeTag::SecondOrder(d) => d,
            ConeTag::Psd(side) => svec_len(side),
        }
    }

    /// Barrier degree contributed to the complementarity measure.
    pub fn degree(&self) -> usize {
        match *self {
            ConeTag::Zero(_) => 0,
            ConeTag::Nonneg(d) => d,
            ConeTag::SecondOrder(_) => 1,
            ConeTag::Psd(side) => side,
        }
    }

    fn dim(&self) -> usize {
        match *self {
            ConeTag::Zero(d) | ConeTag::Nonneg(d) | ConeTag::SecondOrder(d) | ConeTag::Psd(d) => d,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            ConeTag::Zero(_) => "zero",
            ConeTag::Nonneg(_) => "nonneg",
            ConeTag::SecondOrder(_) => "soc",
            ConeTag::Psd(_) => "psd",
        }
    }

    fn from_kind(kind: &str, dim: usize) -> Option<Self> {
        Some(match kind {
            "zero" => ConeTag::Zero(dim),
            "nonneg" => ConeTag::Nonneg(dim),
            "soc" => ConeTag::SecondOrder(dim),
            "psd" => ConeTag::Psd(dim),
            _ => return None,
        })
    }
}

/// One affine constraint block `b - A x in cone`.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub label: String,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub cone: ConeTag,
}

/// Index handle returned by [`ConicProgram::add_block`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct BlockId(pub usize);

/// How the transmit covariance is encoded in the decision vector:
/// `Q = scale * H(x[range])` with `H` the Hermitian coordinate map of
/// [`hermitian_from_coords`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEncoding {
    pub var: String,
    pub side: usize,
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConicProgram {
    num_vars: usize,
    objective: DVector<f64>,
    /// Multiplies `c^T x` to obtain the objective in physical units.
    pub objective_scale: f64,
    blocks: Vec<Block>,
    vars: BTreeMap<String, Range<usize>>,
    var_order: Vec<String>,
    pub covariance: Option<CovarianceEncoding>,
}

impl ConicProgram {
    /// Declares the named variable groups, laid out consecutively.
    pub fn with_variables(groups: &[(&str, usize)]) -> Result<Self> {
        let mut vars = BTreeMap::new();
        let mut var_order = Vec::new();
        let mut start = 0;
        for &(name, len) in groups {
            if len == 0 {
                continue;
            }
            if vars.insert(name.to_string(), start..start + len).is_some() {
                return Err(Error::Dimension(format!("variable group `{name}` declared twice")));
            }
            var_order.push(name.to_string());
            start += len;
        }
        Ok(Self {
            num_vars: start,
            objective: DVector::zeros(start),
            objective_scale: 1.0,
            blocks: Vec::new(),
            vars,
            var_order,
            covariance: None,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn objective(&self) -> &DVector<f64> {
        &self.objective
    }

    pub fn set_objective(&mut self, c: DVector<f64>) -> Result<()> {
        if c.len() != self.num_vars {
            return Err(Error::Dimension(format!(
                "objective has {} entries, program has {} variables",
                c.len(),
                self.num_vars
            )));
        }
        self.objective = c;
        Ok(())
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn num_rows(&self) -> usize {
        self.blocks.iter().map(|b| b.b.len()).sum()
    }

    /// Index range of a declared variable group.
    pub fn var(&self, name: &str) -> Option<Range<usize>> {
        self.vars.get(name).cloned()
    }

    /// Variable groups in declaration order.
    pub fn var_groups(&self) -> impl Iterator<Item = (&str, Range<usize>)> {
        self.var_order
            .iter()
            .map(|n| (n.as_str(), self.vars[n].clone()))
    }

    /// Appends `b - A x in cone`.
    pub fn add_block(
        &mut self,
        label: impl Into<String>,
        a: DMatrix<f64>,
        b: DVector<f64>,
        cone: ConeTag,
    ) -> Result<BlockId> {
        let label = label.into();
        if cone.dim() == 0 {
            return Err(Error::Dimension(format!("block `{label}`: cone dimension must be >= 1")));
        }
        let rows = cone.rows();
        if a.nrows() != rows || b.len() != rows {
            return Err(Error::Dimension(format!(
                "block `{label}`: cone {:?} needs {rows} rows, got A with {} and b with {}",
                cone,
                a.nrows(),
                b.len()
            )));
        }
        if a.ncols() != self.num_vars {
            return Err(Error::Dimension(format!(
                "block `{label}`: A has {} columns, program has {} variables",
                a.ncols(),
                self.num_vars
            )));
        }
        self.blocks.push(Block { label, a, b, cone });
        Ok(BlockId(self.blocks.len() - 1))
    }

    /// Count of blocks per cone kind: (zero, nonneg, soc, psd).
    pub fn cone_counts(&self) -> (usize, usize, usize, usize) {
        let mut counts = (0, 0, 0, 0);
        for b in &self.blocks {
            match b.cone {
                ConeTag::Zero(_) => counts.0 += 1,
                ConeTag::Nonneg(_) => counts.1 += 1,
                ConeTag::SecondOrder(_) => counts.2 += 1,
                ConeTag::Psd(_) => counts.3 += 1,
            }
        }
        counts
    }

    /// Text dump listing variables, objective and every block; only nonzero
    /// coefficients are written, as `column:value` pairs.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "conic-program 1");
        let _ = writeln!(out, "vars {}", self.num_vars);
        for (name, r) in self.var_groups() {
            let _ = writeln!(out, "group {name} {} {}", r.start, r.len());
        }
        let _ = writeln!(out, "objective_scale {:e}", self.objective_scale);
        if let Some(enc) = &self.covariance {
            let _ = writeln!(out, "covariance {} {} {:e}", enc.var, enc.side, enc.scale);
        }
        let _ = write!(out, "objective");
        write_sparse_row(&mut out, self.objective.iter().copied());
        for block in &self.blocks {
            let _ = writeln!(
                out,
                "block {} {} {}",
                block.cone.kind(),
                block.cone.dim(),
                block.label
            );
            for r in 0..block.b.len() {
                let _ = write!(out, "row {:e}", block.b[r]);
                write_sparse_row(&mut out, block.a.row(r).iter().copied());
            }
        }
        out
    }

    /// Parses the output of [`ConicProgram::dump`].
    pub fn parse_dump(text: &str) -> Result<Self> {
        let err = |line: usize, msg: &str| Error::Parse(format!("line {}: {msg}", line + 1));
        let mut lines = text.lines().enumerate().peekable();
        let mut prog: Option<ConicProgram> = None;
        let mut groups: Vec<(String, usize, usize)> = Vec::new();
        let mut num_vars = 0usize;
        let mut scale = 1.0;
        let mut cov = None;
        let mut pending: Option<(String, ConeTag, Vec<f64>, Vec<Vec<(usize, f64)>>)> = None;

        fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize) -> Result<T> {
            tok.and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Parse(format!("line {}: bad number", line + 1)))
        }
        fn sparse(tokens: std::str::SplitWhitespace<'_>, line: usize) -> Result<Vec<(usize, f64)>> {
            tokens
                .map(|t| {
                    let (c, v) = t
                        .split_once(':')
                        .ok_or_else(|| Error::Parse(format!("line {}: expected col:value", line + 1)))?;
                    Ok((num(Some(c), line)?, num(Some(v), line)?))
                })
                .collect()
        }
        let flush = |prog: &mut ConicProgram,
                     pending: &mut Option<(String, ConeTag, Vec<f64>, Vec<Vec<(usize, f64)>>)>|
         -> Result<()> {
            if let Some((label, cone, b, rows)) = pending.take() {
                let n = prog.num_vars;
                let mut a = DMatrix::zeros(rows.len(), n);
                for (r, entries) in rows.iter().enumerate() {
                    for &(c, v) in entries {
                        if c >= n {
                            return Err(Error::Parse(format!("column {c} out of range")));
                        }
                        a[(r, c)] = v;
                    }
                }
                prog.add_block(label, a, DVector::from_vec(b), cone)?;
            }
            Ok(())
        };

        while let Some((ln, line)) = lines.next() {
            let mut tok = line.split_whitespace();
            match tok.next() {
                None => continue,
                Some("conic-program") => {}
                Some("vars") => num_vars = num(tok.next(), ln)?,
                Some("group") => {
                    let name = tok.next().ok_or_else(|| err(ln, "missing group name"))?;
                    groups.push((name.to_string(), num(tok.next(), ln)?, num(tok.next(), ln)?));
                }
                Some("objective_scale") => scale = num(tok.next(), ln)?,
                Some("covariance") => {
                    let var = tok.next().ok_or_else(|| err(ln, "missing covariance var"))?;
                    cov = Some(CovarianceEncoding {
                        var: var.to_string(),
                        side: num(tok.next(), ln)?,
                        scale: num(tok.next(), ln)?,
                    });
                }
                Some("objective") => {
                    groups.sort_by_key(|g| g.1);
                    let decl: Vec<(&str, usize)> =
                        groups.iter().map(|(n, _, l)| (n.as_str(), *l)).collect();
                    let mut p = ConicProgram::with_variables(&decl)?;
                    if p.num_vars != num_vars {
                        return Err(err(ln, "variable groups do not cover `vars`"));
                    }
                    let mut c = DVector::zeros(num_vars);
                    for (i, v) in sparse(tok, ln)? {
                        if i >= num_vars {
                            return Err(err(ln, "objective index out of range"));
                        }
                        c[i] = v;
                    }
                    p.objective = c;
                    p.objective_scale = scale;
                    p.covariance = cov.take();
                    prog = Some(p);
                }
                Some("block") => {
                    let p = prog.as_mut().ok_or_else(|| err(ln, "block before objective"))?;
                    flush(p, &mut pending)?;
                    let kind = tok.next().ok_or_else(|| err(ln, "missing cone kind"))?;
                    let dim: usize = num(tok.next(), ln)?;
                    let label = tok.collect::<Vec<_>>().join(" ");
                    let cone = ConeTag::from_kind(kind, dim).ok_or_else(|| err(ln, "unknown cone"))?;
                    pending = Some((label, cone, Vec::new(), Vec::new()));
                }
                Some("row") => {
                    let (_, _, b, rows) = pending.as_mut().ok_or_else(|| err(ln, "row outside block"))?;
                    b.push(num(tok.next(), ln)?);
                    rows.push(sparse(tok, ln)?);
                }
                Some(other) => return Err(err(ln, &format!("unknown record `{other}`"))),
            }
        }
        let mut p = prog.ok_or_else(|| Error::Parse("missing objective".into()))?;
        flush(&mut p, &mut pending)?;
        Ok(p)
    }
}

fn write_sparse_row(out: &mut String, row: impl Iterator<Item = f64>) {
    for (i, v) in row.enumerate() {
        if v != 0.0 {
            let _ = write!(out, " {i}:{v:e}");
        }
    }
    out.push('\n');
}

/// Termination status of the interior-point solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIter,
    Numerical,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::PrimalInfeasible => "primal_infeasible",
            SolveStatus::DualInfeasible => "dual_infeasible",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::Numerical => "numerical",
        }
    }
}

/// Per-iteration solver trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub mu: f64,
    pub tau: f64,
    pub kappa: f64,
    pub step: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeSolution {
    pub status: SolveStatus,
    /// Primal point (or the primal ray when dual infeasible).
    pub x: DVector<f64>,
    /// Primal slack `b - A x`.
    pub s: DVector<f64>,
    /// Dual multipliers, one vector per block (a Farkas ray when primal
    /// infeasible, normalized so that `b^T y = -1`).
    pub duals: Vec<DVector<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// Complementarity `s^T y`.
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Residual of the infeasibility certificate, when one is reported.
    pub certificate_residual: Option<f64>,
    pub iterations: usize,
    pub log: Vec<IterationRecord>,
}

impl ConeSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Reconstructs the transmit covariance `Q` from a solution, using the
/// program's covariance encoding.
pub fn extract_q(prog: &ConicProgram, sol: &ConeSolution) -> Result<HermitianMatrix> {
    let enc = prog
        .covariance
        .as_ref()
        .ok_or_else(|| Error::MissingVariable("covariance".into()))?;
    let range = prog
        .var(&enc.var)
        .ok_or_else(|| Error::MissingVariable(enc.var.clone()))?;
    if range.len() != enc.side * enc.side || sol.x.len() != prog.num_vars() {
        return Err(Error::Dimension("covariance encoding does not match solution".into()));
    }
    let coords: Vec<f64> = sol.x.as_slice()[range].iter().map(|v| v * enc.scale).collect();
    Ok(HermitianMatrix::symmetrize(hermitian_from_coords(&coords, enc.side)))
}
