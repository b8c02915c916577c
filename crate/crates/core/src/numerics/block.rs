//! Named block layouts and a block-matrix composer.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numerics::mat::DenseMat;
use crate::real::Real;

/// Ordered list of block sizes with a name -> index map.
#[derive(Debug, Clone)]
pub struct BlockLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl BlockLayout {
    pub fn new(blocks: &[(&str, usize)]) -> Result<Self> {
        let mut sizes = Vec::with_capacity(blocks.len());
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut names = Vec::with_capacity(blocks.len());
        let mut index = HashMap::new();
        let mut off = 0usize;
        for (name, size) in blocks {
            if *size == 0 {
                return Err(Error::Dimension(format!("block `{name}` has size 0")));
            }
            if index.insert((*name).to_string(), sizes.len()).is_some() {
                return Err(Error::Dimension(format!("duplicate block name `{name}`")));
            }
            names.push((*name).to_string());
            offsets.push(off);
            off += size;
            sizes.push(*size);
        }
        Ok(Self {
            sizes,
            offsets,
            names,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn size(&self, i: usize) -> usize {
        self.sizes[i]
    }

    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

/// Assembles a symmetric matrix from blocks: entries are placed at `(i, j)`
/// and mirrored (transposed) to `(j, i)`; diagonal blocks are symmetrized.
pub struct SymBlockBuilder<'a, R> {
    layout: &'a BlockLayout,
    out: DenseMat<R>,
}

impl<'a, R: Real> SymBlockBuilder<'a, R> {
    pub fn new(layout: &'a BlockLayout) -> Self {
        Self {
            layout,
            out: DenseMat::zeros(layout.total(), layout.total()),
        }
    }

    /// Add `b` into block `(i, j)` (upper-or-diagonal position expected).
    /// Off-diagonal blocks are mirrored exactly; diagonal contributions are
    /// symmetrized as `(B + B^T)/2` so "2 M" table entries read `M + M^T`.
    pub fn add(&mut self, i: usize, j: usize, b: &DenseMat<R>) -> Result<()> {
        let (ri, cj) = (self.layout.size(i), self.layout.size(j));
        if b.rows() != ri || b.cols() != cj {
            return Err(Error::Dimension(format!(
                "block ({i},{j}) expects {}x{}, got {}x{}",
                ri,
                cj,
                b.rows(),
                b.cols()
            )));
        }
        let (r0, c0) = (self.layout.offset(i), self.layout.offset(j));
        if i == j {
            let half = R::of(0.5);
            for p in 0..ri {
                for q in 0..cj {
                    let v = (b[(p, q)] + b[(q, p)]) * half;
                    self.out[(r0 + p, c0 + q)] = self.out[(r0 + p, c0 + q)] + v;
                }
            }
        } else {
            for p in 0..ri {
                for q in 0..cj {
                    let v = b[(p, q)];
                    self.out[(r0 + p, c0 + q)] = self.out[(r0 + p, c0 + q)] + v;
                    self.out[(c0 + q, r0 + p)] = self.out[(c0 + q, r0 + p)] + v;
                }
            }
        }
        Ok(())
    }

    pub fn finish(self) -> DenseMat<R> {
        self.out
    }
}

/// Read back a block from an assembled matrix.
pub fn read_block<R: Real>(
    m: &DenseMat<R>,
    layout: &BlockLayout,
    i: usize,
    j: usize,
) -> Result<DenseMat<R>> {
    m.block(
        layout.offset(i),
        layout.offset(j),
        layout.size(i),
        layout.size(j),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assemble_then_read_back_is_exact() {
        let layout = BlockLayout::new(&[("a", 2), ("b", 3), ("c", 1)]).unwrap();
        assert_eq!(layout.total(), 6);
        let mut b = SymBlockBuilder::<f64>::new(&layout);
        let blk = DenseMat::from_rows(&[&[1.5, -2.25, 0.125], &[3.75, 4.5, -9.0]]).unwrap();
        b.add(0, 1, &blk).unwrap();
        let m = b.finish();
        assert_eq!(read_block(&m, &layout, 0, 1).unwrap(), blk);
        assert_eq!(read_block(&m, &layout, 1, 0).unwrap(), blk.transpose());
        assert_eq!(m, m.transpose());
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(BlockLayout::new(&[("a", 1), ("a", 2)]).is_err());
    }
}
