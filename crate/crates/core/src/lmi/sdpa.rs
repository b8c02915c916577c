//! SDPA sparse (`.dat-s`) export for cross-validation in external solvers.
//!
//! Encoding: one SDPA block per constraint, in system order. A `>= 0`
//! constraint `C + sum x_k A_k >= 0` becomes `F_k = A_k`, `F_0 = -C`;
//! a strict `< 0` constraint becomes `F_k = -A_k`, `F_0 = C + delta I`
//! with its strictness margin baked into the constant part.

use crate::error::{Error, Result};
use crate::lmi::{LmiSystem, MaterializedConstraint, Sense};
use crate::Scalar;

/// Objective used in the exported file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpaObjective {
    /// Pure feasibility: zero objective vector.
    Feasibility,
    /// Append one variable `t` minimized subject to every block shifted by
    /// `+ t I` (the phase-1 epigraph form).
    MaxEigEpigraph,
}

/// Serialize the system in SDPA sparse format with deterministic ordering
/// (variable index, then block, then row, then column) and 17 significant
/// digits.
pub fn export_sdpa(sys: &LmiSystem, objective: SdpaObjective) -> Result<String> {
    let cons = sys.materialize()?;
    let nvars = sys.registry.param_count()
        + match objective {
            SdpaObjective::Feasibility => 0,
            SdpaObjective::MaxEigEpigraph => 1,
        };
    let nblocks = cons.len();
    let mut out = String::new();
    out.push_str(&format!("{nvars}\n"));
    out.push_str(&format!("{nblocks}\n"));

    let sizes: Vec<String> = cons
        .iter()
        .map(|c| {
            if is_diagonal(c) {
                format!("-{}", c.dim)
            } else {
                format!("{}", c.dim)
            }
        })
        .collect();
    out.push_str(&sizes.join(" "));
    out.push('\n');

    let mut obj = vec!["0".to_string(); nvars];
    if objective == SdpaObjective::MaxEigEpigraph {
        if let Some(last) = obj.last_mut() {
            *last = "1".to_string();
        }
    }
    out.push_str(&obj.join(" "));
    out.push('\n');

    // matno 0: constant matrices F_0.
    for (bi, c) in cons.iter().enumerate() {
        let sign = match c.sense {
            Sense::Psd => -1.0,
            Sense::NegDef => 1.0,
        };
        for i in 0..c.dim {
            for j in i..c.dim {
                let mut v = sign * c.constant[(i, j)];
                if i == j && c.sense == Sense::NegDef {
                    v += c.strict_margin;
                }
                push_entry(&mut out, 0, bi + 1, i + 1, j + 1, v);
            }
        }
    }

    // matno k: coefficient matrices.
    for k in 0..sys.registry.param_count() {
        for (bi, c) in cons.iter().enumerate() {
            let sign = match c.sense {
                Sense::Psd => 1.0,
                Sense::NegDef => -1.0,
            };
            let Some(sc) = c.coeffs.iter().find(|sc| sc.param == k) else {
                continue;
            };
            let mut entries: Vec<(usize, usize, Scalar)> = sc
                .entries
                .iter()
                .filter(|(i, j, _)| i <= j)
                .map(|&(i, j, v)| (i, j, sign * v))
                .collect();
            entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
            for (i, j, v) in entries {
                push_entry(&mut out, k + 1, bi + 1, i + 1, j + 1, v);
            }
        }
    }

    // Epigraph variable: identity on every block.
    if objective == SdpaObjective::MaxEigEpigraph {
        let k = nvars;
        for (bi, c) in cons.iter().enumerate() {
            for i in 0..c.dim {
                push_entry(&mut out, k, bi + 1, i + 1, i + 1, 1.0);
            }
        }
    }

    Ok(out)
}

fn is_diagonal(c: &MaterializedConstraint) -> bool {
    for i in 0..c.dim {
        for j in 0..c.dim {
            if i != j && c.constant[(i, j)] != 0.0 {
                return false;
            }
        }
    }
    c.coeffs
        .iter()
        .all(|sc| sc.entries.iter().all(|&(i, j, _)| i == j))
}

fn push_entry(out: &mut String, mat: usize, blk: usize, i: usize, j: usize, v: Scalar) {
    if v == 0.0 {
        return;
    }
    out.push_str(&format!("{mat} {blk} {i} {j} {v:.16e}\n"));
}

/// Parse a solution vector in SDPA output convention back into a parameter
/// vector (the exported variable order is the registry parameter order).
pub fn import_assignment(sys: &LmiSystem, xs: &[Scalar]) -> Result<Vec<Scalar>> {
    let p = sys.registry.param_count();
    if xs.len() < p {
        return Err(Error::Export(format!(
            "external assignment has {} entries, system needs {}",
            xs.len(),
            p
        )));
    }
    Ok(xs[..p].to_vec())
}
