use crate::dense::TernaryDense;
use crate::error::{Error, Result};
use crate::tcsc::{Tcsc, Violation};

/// Largest block the default block size will pick.
pub const DEFAULT_MAX_BLOCK: usize = 4096;

/// `min(k, 4096)`.
pub fn default_block_size(k: usize) -> usize {
    k.min(DEFAULT_MAX_BLOCK)
}

/// TCSC split into row blocks of `block_size`; block `b` only holds rows in
/// `[b * B, min((b + 1) * B, K))`, with global row indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockedTcsc {
    k: usize,
    n: usize,
    block_size: usize,
    blocks: Vec<Tcsc>,
}

impl BlockedTcsc {
    pub fn from_dense(w: &TernaryDense, block_size: usize) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::param("block size must be at least 1"));
        }
        let k = w.rows();
        let blocks = (0..k.div_ceil(block_size))
            .map(|b| Tcsc::from_dense_rows(w, b * block_size..((b + 1) * block_size).min(k)))
            .collect();
        Ok(BlockedTcsc {
            k,
            n: w.cols(),
            block_size,
            blocks,
        })
    }

    pub fn from_parts(k: usize, n: usize, block_size: usize, blocks: Vec<Tcsc>) -> Result<Self> {
        if block_size == 0 || blocks.len() != k.div_ceil(block_size) {
            return Err(Error::corrupt(format!(
                "{} blocks of size {block_size} cannot cover {k} rows",
                blocks.len()
            )));
        }
        if blocks.iter().any(|b| b.k() != k || b.n() != n) {
            return Err(Error::corrupt("block dimensions disagree with the matrix"));
        }
        let t = BlockedTcsc {
            k,
            n,
            block_size,
            blocks,
        };
        if let Some(v) = t.validate().first() {
            return Err(Error::corrupt(v.to_string()));
        }
        Ok(t)
    }

    pub fn validate(&self) -> Vec<Violation> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(b, blk)| blk.validate_rows(self.block_rows(b)))
            .collect()
    }

    pub fn block_rows(&self, b: usize) -> std::ops::Range<usize> {
        b * self.block_size..((b + 1) * self.block_size).min(self.k)
    }

    pub fn to_dense(&self) -> Result<TernaryDense> {
        let mut values = vec![0i8; self.k * self.n];
        for blk in &self.blocks {
            blk.scatter_into(&mut values)?;
        }
        TernaryDense::new(self.k, self.n, values)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn blocks(&self) -> &[Tcsc] {
        &self.blocks
    }

    pub fn nnz(&self) -> usize {
        self.blocks.iter().map(Tcsc::nnz).sum()
    }

    pub fn format_bytes(&self) -> usize {
        self.blocks.iter().map(Tcsc::format_bytes).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{gen_ternary, SparsityLevel};

    fn worked_w() -> TernaryDense {
        TernaryDense::from_columns(&[vec![1, 0, -1, 1], vec![0, -1, 0, 0]]).unwrap()
    }

    #[test]
    fn worked_example_two_blocks() {
        let t = BlockedTcsc::from_dense(&worked_w(), 2).unwrap();
        let [b0, b1] = t.blocks() else {
            panic!("expected two blocks")
        };
        assert_eq!((b0.pos_rows(0), b0.neg_rows(0)), (&[0u32][..], &[][..]));
        assert_eq!((b0.pos_rows(1), b0.neg_rows(1)), (&[][..], &[1u32][..]));
        assert_eq!((b1.pos_rows(0), b1.neg_rows(0)), (&[3u32][..], &[2u32][..]));
        assert!(b1.pos_rows(1).is_empty() && b1.neg_rows(1).is_empty());
        assert_eq!(t.to_dense().unwrap(), worked_w());
    }

    #[test]
    fn oversized_block_matches_plain_tcsc() {
        let w = gen_ternary(50, 7, SparsityLevel::QUARTER, 3).unwrap();
        let t = BlockedTcsc::from_dense(&w, 64).unwrap();
        assert_eq!(t.blocks(), &[Tcsc::from_dense(&w)]);
    }

    #[test]
    fn ragged_last_block_round_trips() {
        let w = gen_ternary(37, 5, SparsityLevel::HALF, 11).unwrap();
        let t = BlockedTcsc::from_dense(&w, 8).unwrap();
        assert_eq!(t.blocks().len(), 5);
        assert_eq!(t.block_rows(4), 32..37);
        assert!(t.validate().is_empty());
        assert_eq!(t.to_dense().unwrap(), w);
        assert_eq!(t.nnz(), w.nnz());
    }

    #[test]
    fn zero_block_size_rejected() {
        assert!(matches!(
            BlockedTcsc::from_dense(&worked_w(), 0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn default_block_size_caps_at_4096() {
        assert_eq!(default_block_size(1024), 1024);
        assert_eq!(default_block_size(16384), 4096);
    }
}
