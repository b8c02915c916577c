//! Block-structured linear matrix inequality systems over a registry of
//! named decision variables, with SDPA export for cross-validation.

mod assemble;
mod sdpa;

pub use assemble::{known_fault_system, uncertain_fault_system, SynthesisScalars};
pub use sdpa::{export_sdpa, import_assignment, SdpaObjective};

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{BlockLayout, DaeDecomposition, SymBlockBuilder};
use crate::{Mat, Scalar};

/// Handle into the decision-variable registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(usize);

/// Shape and parameterization of one decision variable.
#[derive(Debug, Clone)]
pub enum VarShape {
    /// Symmetric `n x n`, parameterized by its upper triangle.
    Sym { n: usize },
    /// Unstructured `rows x cols`.
    Free { rows: usize, cols: usize },
    /// Positive scalar with an explicit lower bound.
    Scalar { lower: Scalar },
    /// Structured secondary-loop variable: in the orthogonal coordinates of
    /// the descriptor matrix `E = U diag(S_r, 0) V^T`, the variable is
    /// `X = V [[S_r^-1 S, 0], [L, H]] U^T` with `S` symmetric PSD and
    /// `L`, `H` free, so `E X = X^T E^T >= 0` holds for every parameter
    /// value and every solution of that structure constraint is reachable.
    Descriptor { split: DaeDecomposition<Scalar> },
}

impl VarShape {
    pub fn param_count(&self) -> usize {
        match self {
            VarShape::Sym { n } => n * (n + 1) / 2,
            VarShape::Free { rows, cols } => rows * cols,
            VarShape::Scalar { .. } => 1,
            VarShape::Descriptor { split } => {
                let n = split.u.rows();
                let r = split.rank;
                r * (r + 1) / 2 + (n - r) * r + (n - r) * (n - r)
            }
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            VarShape::Sym { n } => (*n, *n),
            VarShape::Free { rows, cols } => (*rows, *cols),
            VarShape::Scalar { .. } => (1, 1),
            VarShape::Descriptor { split } => (split.u.rows(), split.u.rows()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VarDecl {
    pub name: String,
    pub shape: VarShape,
    /// Whether a PSD cone constraint is attached to this variable
    /// (the full matrix for `Sym`, the structured `S` block for
    /// `Descriptor`, `v >= lower` for `Scalar`).
    pub cone: bool,
}

/// Named decision variables with shapes and cone tags.
#[derive(Debug, Default, Clone)]
pub struct VarRegistry {
    vars: Vec<VarDecl>,
    by_name: HashMap<String, VarId>,
    offsets: Vec<usize>,
    total: usize,
}

impl VarRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, shape: VarShape, cone: bool) -> Result<VarId> {
        if self.by_name.contains_key(name) {
            return Err(Error::Assembly {
                constraint: "registry".into(),
                row: 0,
                col: 0,
                msg: format!("duplicate variable `{name}`"),
            });
        }
        let id = VarId(self.vars.len());
        self.offsets.push(self.total);
        self.total += shape.param_count();
        self.vars.push(VarDecl {
            name: name.to_string(),
            shape,
            cone,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn sym_pd(&mut self, name: &str, n: usize) -> Result<VarId> {
        self.add(name, VarShape::Sym { n }, true)
    }

    pub fn free(&mut self, name: &str, rows: usize, cols: usize) -> Result<VarId> {
        self.add(name, VarShape::Free { rows, cols }, false)
    }

    pub fn positive_scalar(&mut self, name: &str, lower: Scalar) -> Result<VarId> {
        self.add(name, VarShape::Scalar { lower }, true)
    }

    pub fn descriptor(&mut self, name: &str, split: DaeDecomposition<Scalar>) -> Result<VarId> {
        self.add(name, VarShape::Descriptor { split }, true)
    }

    pub fn id(&self, name: &str) -> Result<VarId> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingVariable(name.to_string()))
    }

    pub fn decl(&self, id: VarId) -> &VarDecl {
        &self.vars[id.0]
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn param_count(&self) -> usize {
        self.total
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, &VarDecl)> {
        self.vars.iter().enumerate().map(|(i, d)| (VarId(i), d))
    }

    pub fn param_offset(&self, id: VarId) -> usize {
        self.offsets[id.0]
    }

    /// Materialize one variable from the flat parameter vector.
    pub fn value(&self, id: VarId, params: &[Scalar]) -> Mat {
        let decl = &self.vars[id.0];
        let off = self.offsets[id.0];
        match &decl.shape {
            VarShape::Sym { n } => {
                let mut m = Mat::zeros(*n, *n);
                let mut k = off;
                for i in 0..*n {
                    for j in i..*n {
                        m[(i, j)] = params[k];
                        m[(j, i)] = params[k];
                        k += 1;
                    }
                }
                m
            }
            VarShape::Free { rows, cols } => {
                let mut m = Mat::zeros(*rows, *cols);
                let mut k = off;
                for i in 0..*rows {
                    for j in 0..*cols {
                        m[(i, j)] = params[k];
                        k += 1;
                    }
                }
                m
            }
            VarShape::Scalar { .. } => {
                let mut m = Mat::zeros(1, 1);
                m[(0, 0)] = params[off];
                m
            }
            VarShape::Descriptor { split } => {
                let n = split.u.rows();
                let r = split.rank;
                let mut core = Mat::zeros(n, n);
                let mut k = off;
                // Upper-left r x r: S_r^-1 * S with S symmetric.
                let mut s = Mat::zeros(r, r);
                for i in 0..r {
                    for j in i..r {
                        s[(i, j)] = params[k];
                        s[(j, i)] = params[k];
                        k += 1;
                    }
                }
                for i in 0..r {
                    for j in 0..r {
                        core[(i, j)] = s[(i, j)] / split.sigma[i];
                    }
                }
                for i in r..n {
                    for j in 0..r {
                        core[(i, j)] = params[k];
                        k += 1;
                    }
                }
                for i in r..n {
                    for j in r..n {
                        core[(i, j)] = params[k];
                        k += 1;
                    }
                }
                split
                    .v
                    .matmul(&core)
                    .and_then(|m| m.matmul(&split.u.transpose()))
                    .expect("consistent dims")
            }
        }
    }

    /// The symmetric PSD-constrained part of a `Descriptor` variable.
    pub fn descriptor_psd_part(&self, id: VarId, params: &[Scalar]) -> Option<Mat> {
        let decl = &self.vars[id.0];
        let off = self.offsets[id.0];
        match &decl.shape {
            VarShape::Descriptor { split } => {
                let r = split.rank;
                let mut s = Mat::zeros(r, r);
                let mut k = off;
                for i in 0..r {
                    for j in i..r {
                        s[(i, j)] = params[k];
                        s[(j, i)] = params[k];
                        k += 1;
                    }
                }
                Some(s)
            }
            _ => None,
        }
    }

    /// Write a concrete matrix value into the flat parameter vector
    /// (inverse of [`VarRegistry::value`]); used to transfer assignments
    /// between structurally related systems.
    pub fn store(&self, id: VarId, value: &Mat, params: &mut [Scalar]) -> Result<()> {
        let decl = &self.vars[id.0];
        let off = self.offsets[id.0];
        let (r, c) = decl.shape.dims();
        if value.rows() != r || value.cols() != c {
            return Err(Error::Dimension(format!(
                "variable `{}` expects {}x{}, got {}x{}",
                decl.name,
                r,
                c,
                value.rows(),
                value.cols()
            )));
        }
        match &decl.shape {
            VarShape::Sym { n } => {
                let mut k = off;
                for i in 0..*n {
                    for j in i..*n {
                        params[k] = 0.5 * (value[(i, j)] + value[(j, i)]);
                        k += 1;
                    }
                }
            }
            VarShape::Free { rows, cols } => {
                let mut k = off;
                for i in 0..*rows {
                    for j in 0..*cols {
                        params[k] = value[(i, j)];
                        k += 1;
                    }
                }
            }
            VarShape::Scalar { .. } => params[off] = value[(0, 0)],
            VarShape::Descriptor { split } => {
                // core = V^T X U, then read S = S_r * core_11, L, H.
                let core = split
                    .v
                    .transpose()
                    .matmul(value)
                    .and_then(|m| m.matmul(&split.u))?;
                let n = split.u.rows();
                let rk = split.rank;
                let mut k = off;
                for i in 0..rk {
                    for j in i..rk {
                        params[k] = 0.5 * (core[(i, j)] * split.sigma[i] + core[(j, i)] * split.sigma[j]);
                        k += 1;
                    }
                }
                for i in rk..n {
                    for j in 0..rk {
                        params[k] = core[(i, j)];
                        k += 1;
                    }
                }
                for i in rk..n {
                    for j in rk..n {
                        params[k] = core[(i, j)];
                        k += 1;
                    }
                }
            }
        }
        Ok(())
    }

    /// Debug dump: names, shapes, cone tags.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Entry<'a> {
            name: &'a str,
            rows: usize,
            cols: usize,
            params: usize,
            cone: bool,
            kind: &'static str,
        }
        let entries: Vec<Entry> = self
            .vars
            .iter()
            .map(|d| {
                let (rows, cols) = d.shape.dims();
                Entry {
                    name: &d.name,
                    rows,
                    cols,
                    params: d.shape.param_count(),
                    cone: d.cone,
                    kind: match d.shape {
                        VarShape::Sym { .. } => "sym",
                        VarShape::Free { .. } => "free",
                        VarShape::Scalar { .. } => "scalar",
                        VarShape::Descriptor { .. } => "descriptor",
                    },
                }
            })
            .collect();
        serde_json::to_string_pretty(&entries).expect("serializable")
    }
}

/// One additive term of an affine block entry:
/// `coeff * left * op(var) * right`, or a constant when `var` is `None`.
/// A `Scalar`-shaped variable multiplies `left * right` as a scalar factor;
/// `psd_part` selects the symmetric PSD-constrained block of a
/// `Descriptor` variable instead of the full matrix.
#[derive(Debug, Clone)]
pub struct Term {
    pub coeff: Scalar,
    pub left: Mat,
    pub var: Option<VarId>,
    pub transposed: bool,
    pub psd_part: bool,
    pub right: Mat,
}

/// Affine block entry: a sum of [`Term`]s.
#[derive(Debug, Clone, Default)]
pub struct Expr {
    pub terms: Vec<Term>,
}

impl Expr {
    pub fn eval(&self, reg: &VarRegistry, params: &[Scalar]) -> Result<Mat> {
        let mut acc: Option<Mat> = None;
        for t in &self.terms {
            let part = match t.var {
                Some(id) => {
                    if matches!(reg.decl(id).shape, VarShape::Scalar { .. }) {
                        let s = params[reg.param_offset(id)];
                        t.left.matmul(&t.right)?.scale(t.coeff * s)
                    } else {
                        let v = if t.psd_part {
                            reg.descriptor_psd_part(id, params).ok_or_else(|| {
                                Error::Dimension(format!(
                                    "psd_part on non-descriptor variable `{}`",
                                    reg.decl(id).name
                                ))
                            })?
                        } else {
                            reg.value(id, params)
                        };
                        let v = if t.transposed { v.transpose() } else { v };
                        t.left.matmul(&v)?.matmul(&t.right)?.scale(t.coeff)
                    }
                }
                None => t.left.matmul(&t.right)?.scale(t.coeff),
            };
            acc = Some(match acc {
                Some(a) => a.add(&part)?,
                None => part,
            });
        }
        acc.ok_or_else(|| Error::Dimension("empty block expression".into()))
    }
}

/// Constraint sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    /// Strictly negative definite, realized as `<= -delta I`.
    NegDef,
    /// Positive semidefinite.
    Psd,
}

/// One block constraint: an affine map from the registry into a symmetric
/// matrix, with a sense.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub layout: BlockLayout,
    pub sense: Sense,
    blocks: Vec<(usize, usize, Expr)>,
    /// Strictness margin for `NegDef`: `1e-7 * (1 + ||constant part||_F)`.
    pub strict_margin: Scalar,
}

impl Constraint {
    pub fn new(name: &str, layout: BlockLayout, sense: Sense) -> Self {
        Self {
            name: name.to_string(),
            layout,
            sense,
            blocks: Vec::new(),
            strict_margin: 0.0,
        }
    }

    /// Add an affine entry at block `(i, j)`, `i <= j`; mirrored on
    /// evaluation. Dimensions are validated against the layout at insert.
    pub fn set_block(&mut self, i: usize, j: usize, expr: Expr, reg: &VarRegistry) -> Result<()> {
        if i > j {
            return Err(self.assembly_err(i, j, "blocks must be placed at i <= j".into()));
        }
        // Probe dimensions with a zero parameter vector.
        let zeros = vec![0.0; reg.param_count()];
        let probe = expr
            .eval(reg, &zeros)
            .map_err(|e| self.assembly_err(i, j, e.to_string()))?;
        let (want_r, want_c) = (self.layout.size(i), self.layout.size(j));
        if probe.rows() != want_r || probe.cols() != want_c {
            return Err(self.assembly_err(
                i,
                j,
                format!(
                    "entry is {}x{}, layout wants {}x{}",
                    probe.rows(),
                    probe.cols(),
                    want_r,
                    want_c
                ),
            ));
        }
        self.blocks.push((i, j, expr));
        Ok(())
    }

    fn assembly_err(&self, i: usize, j: usize, msg: String) -> Error {
        Error::Assembly {
            constraint: self.name.clone(),
            row: i,
            col: j,
            msg,
        }
    }

    /// Evaluate the affine map at a parameter vector. The result is
    /// symmetric exactly: off-diagonal blocks are mirrored, diagonal blocks
    /// symmetrized.
    pub fn eval(&self, reg: &VarRegistry, params: &[Scalar]) -> Result<Mat> {
        let mut b = SymBlockBuilder::new(&self.layout);
        for (i, j, expr) in &self.blocks {
            let blk = expr.eval(reg, params)?;
            b.add(*i, *j, &blk)
                .map_err(|e| self.assembly_err(*i, *j, e.to_string()))?;
        }
        Ok(b.finish())
    }

    pub fn dim(&self) -> usize {
        self.layout.total()
    }
}

/// Fixed scalar data threaded through an assembled system, for reporting.
#[derive(Debug, Clone, Serialize)]
pub struct FixedScalars {
    pub alpha_bar: Scalar,
    pub beta_bar: Scalar,
    pub sigma: Scalar,
    pub delta: Scalar,
    pub epsilon: Scalar,
    pub eps: [Scalar; 4],
    pub eps_f: Scalar,
    pub mu: Scalar,
    pub gamma: Scalar,
    pub zeta2: Scalar,
    pub d2: Scalar,
    pub tau2: Scalar,
    pub theta_bar: Scalar,
    pub lambda: Scalar,
}

/// A complete feasibility system: registry + constraints + fixed scalars.
pub struct LmiSystem {
    pub registry: VarRegistry,
    pub constraints: Vec<Constraint>,
    pub scalars: FixedScalars,
}

impl LmiSystem {
    /// Finalize strictness margins from the constant parts.
    pub fn finalize(&mut self) -> Result<()> {
        let zeros = vec![0.0; self.registry.param_count()];
        for c in &mut self.constraints {
            if c.sense == Sense::NegDef {
                let k = c.eval(&self.registry, &zeros)?;
                c.strict_margin = 1e-7 * (1.0 + k.fro_norm() as Scalar);
            }
        }
        Ok(())
    }

    /// Largest strictness margin over the strict constraints.
    pub fn strict_margin(&self) -> Scalar {
        self.constraints
            .iter()
            .filter(|c| c.sense == Sense::NegDef)
            .map(|c| c.strict_margin)
            .fold(0.0, Scalar::max)
    }

    /// Evaluate every constraint's affine map into a constant part plus one
    /// sparse coefficient matrix per scalar parameter.
    pub fn materialize(&self) -> Result<Vec<MaterializedConstraint>> {
        let p = self.registry.param_count();
        let zeros = vec![0.0; p];
        let mut out = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            let base = c.eval(&self.registry, &zeros)?;
            let mut coeffs = Vec::new();
            let mut unit = zeros.clone();
            for k in 0..p {
                unit[k] = 1.0;
                let shifted = c.eval(&self.registry, &unit)?;
                unit[k] = 0.0;
                let mut entries = Vec::new();
                for i in 0..base.rows() {
                    for j in 0..base.cols() {
                        let v = shifted[(i, j)] - base[(i, j)];
                        if v != 0.0 {
                            entries.push((i, j, v));
                        }
                    }
                }
                if !entries.is_empty() {
                    coeffs.push(SparseCoeff { param: k, entries });
                }
            }
            out.push(MaterializedConstraint {
                name: c.name.clone(),
                sense: c.sense,
                dim: c.dim(),
                constant: base,
                coeffs,
                strict_margin: c.strict_margin,
            });
        }
        Ok(out)
    }
}

/// Sparse coefficient matrix of one scalar parameter in one constraint.
#[derive(Debug, Clone)]
pub struct SparseCoeff {
    pub param: usize,
    /// Full (not just upper-triangular) nonzero entries.
    pub entries: Vec<(usize, usize, Scalar)>,
}

/// A constraint reduced to `constant + sum_k x_k A_k` form.
#[derive(Debug, Clone)]
pub struct MaterializedConstraint {
    pub name: String,
    pub sense: Sense,
    pub dim: usize,
    pub constant: Mat,
    pub coeffs: Vec<SparseCoeff>,
    pub strict_margin: Scalar,
}
