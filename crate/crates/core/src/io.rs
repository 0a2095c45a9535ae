//! Binary files for ternary matrices.
//!
//! Dense file: `b"TGWD"`, version, K, N (each `u32` little-endian), then
//! `K * N` signed bytes in row-major order.
//!
//! Sparse file: `b"TGWS"`, version, format tag, K, N, block size, group size,
//! section count, then sections. Each section is a 4-byte ASCII tag, an
//! element count and the elements: little-endian `u32`/`i32`, except the
//! `CODE` section of the compressed format which holds one byte per code.
//! Block size and group size are 0 for formats without them.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::dense::TernaryDense;
use crate::error::{Error, Result};
use crate::formats::{
    default_block_size, BlockedTcsc, CompressedTcsc, InterleavedBlockedTcsc, InterleavedTcsc,
    InvertedTcsc, SymmetricInterleavedTcsc, DEFAULT_SCALAR_GROUP, DEFAULT_SIMD_GROUP,
};
use crate::tcsc::Tcsc;

pub const DENSE_MAGIC: [u8; 4] = *b"TGWD";
pub const SPARSE_MAGIC: [u8; 4] = *b"TGWS";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FileFormat {
    Dense,
    Tcsc,
    Blocked,
    Interleaved,
    InterleavedBlocked,
    Inverted,
    Compressed,
    Symmetric,
}

impl FileFormat {
    pub const ALL: [FileFormat; 8] = [
        FileFormat::Dense,
        FileFormat::Tcsc,
        FileFormat::Blocked,
        FileFormat::Interleaved,
        FileFormat::InterleavedBlocked,
        FileFormat::Inverted,
        FileFormat::Compressed,
        FileFormat::Symmetric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FileFormat::Dense => "dense",
            FileFormat::Tcsc => "tcsc",
            FileFormat::Blocked => "blocked",
            FileFormat::Interleaved => "interleaved",
            FileFormat::InterleavedBlocked => "interleaved-blocked",
            FileFormat::Inverted => "inverted",
            FileFormat::Compressed => "compressed",
            FileFormat::Symmetric => "symmetric",
        }
    }

    fn tag(self) -> u32 {
        self as u32
    }

    fn from_tag(tag: u32) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|f| *f != FileFormat::Dense && f.tag() == tag)
    }
}

impl fmt::Display for FileFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FileFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::param(format!("unknown file format '{s}'")))
    }
}

/// Any matrix that can be stored in a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatrixFile {
    Dense(TernaryDense),
    Tcsc(Tcsc),
    Blocked(BlockedTcsc),
    Interleaved(InterleavedTcsc),
    InterleavedBlocked(InterleavedBlockedTcsc),
    Inverted(InvertedTcsc),
    Compressed(CompressedTcsc),
    Symmetric(SymmetricInterleavedTcsc),
}

impl MatrixFile {
    /// Encodes `w` as `format`. `block_size` defaults to `min(K, 4096)`;
    /// `group` defaults to 4 for the interleaved formats and 2 for the
    /// symmetric one.
    pub fn convert(
        w: &TernaryDense,
        format: FileFormat,
        block_size: Option<usize>,
        group: Option<usize>,
    ) -> Result<Self> {
        let block = || block_size.unwrap_or_else(|| default_block_size(w.rows()));
        Ok(match format {
            FileFormat::Dense => MatrixFile::Dense(w.clone()),
            FileFormat::Tcsc => MatrixFile::Tcsc(Tcsc::from_dense(w)),
            FileFormat::Blocked => MatrixFile::Blocked(BlockedTcsc::from_dense(w, block())?),
            FileFormat::Interleaved => MatrixFile::Interleaved(InterleavedTcsc::from_dense(
                w,
                group.unwrap_or(DEFAULT_SCALAR_GROUP),
            )?),
            FileFormat::InterleavedBlocked => {
                MatrixFile::InterleavedBlocked(InterleavedBlockedTcsc::from_dense(
                    w,
                    block(),
                    group.unwrap_or(DEFAULT_SCALAR_GROUP),
                )?)
            }
            FileFormat::Inverted => MatrixFile::Inverted(InvertedTcsc::from_dense(w)?),
            FileFormat::Compressed => MatrixFile::Compressed(CompressedTcsc::from_dense(w)),
            FileFormat::Symmetric => MatrixFile::Symmetric(SymmetricInterleavedTcsc::from_dense(
                w,
                group.unwrap_or(DEFAULT_SIMD_GROUP),
            )?),
        })
    }

    pub fn format(&self) -> FileFormat {
        match self {
            MatrixFile::Dense(_) => FileFormat::Dense,
            MatrixFile::Tcsc(_) => FileFormat::Tcsc,
            MatrixFile::Blocked(_) => FileFormat::Blocked,
            MatrixFile::Interleaved(_) => FileFormat::Interleaved,
            MatrixFile::InterleavedBlocked(_) => FileFormat::InterleavedBlocked,
            MatrixFile::Inverted(_) => FileFormat::Inverted,
            MatrixFile::Compressed(_) => FileFormat::Compressed,
            MatrixFile::Symmetric(_) => FileFormat::Symmetric,
        }
    }

    pub fn to_dense(&self) -> Result<TernaryDense> {
        match self {
            MatrixFile::Dense(w) => Ok(w.clone()),
            MatrixFile::Tcsc(t) => t.to_dense(),
            MatrixFile::Blocked(t) => t.to_dense(),
            MatrixFile::Interleaved(t) => t.to_dense(),
            MatrixFile::InterleavedBlocked(t) => t.to_dense(),
            MatrixFile::Inverted(t) => t.to_dense(),
            MatrixFile::Compressed(t) => t.to_dense(),
            MatrixFile::Symmetric(t) => t.to_dense(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        if let MatrixFile::Dense(w) = self {
            out.extend_from_slice(&DENSE_MAGIC);
            for v in [VERSION, w.rows() as u32, w.cols() as u32] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend(w.values().iter().map(|&v| v as u8));
            return out;
        }

        let (k, n, block, group, sections) = self.sections();
        out.extend_from_slice(&SPARSE_MAGIC);
        let header = [
            VERSION,
            self.format().tag(),
            k as u32,
            n as u32,
            block as u32,
            group as u32,
            sections.len() as u32,
        ];
        for v in header {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for (tag, data) in sections {
            out.extend_from_slice(tag);
            match data {
                Section::U32(xs) => {
                    out.extend_from_slice(&(xs.len() as u32).to_le_bytes());
                    xs.iter()
                        .for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
                }
                Section::I32(xs) => {
                    out.extend_from_slice(&(xs.len() as u32).to_le_bytes());
                    xs.iter()
                        .for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
                }
                Section::Bytes(xs) => {
                    out.extend_from_slice(&(xs.len() as u32).to_le_bytes());
                    out.extend_from_slice(xs);
                }
            }
        }
        out
    }

    /// `(K, N, block size, group size, sections)` of a sparse matrix.
    fn sections(&self) -> (usize, usize, usize, usize, Vec<TaggedSection<'_>>) {
        match self {
            MatrixFile::Dense(_) => unreachable!("dense matrices have no sections"),
            MatrixFile::Tcsc(t) => (t.k(), t.n(), 0, 0, Vec::from(tcsc_sections(t))),
            MatrixFile::Blocked(t) => (
                t.k(),
                t.n(),
                t.block_size(),
                0,
                t.blocks().iter().flat_map(tcsc_sections).collect(),
            ),
            MatrixFile::Interleaved(t) => (
                t.k(),
                t.n(),
                0,
                t.group(),
                vec![
                    (b"IDX ", Section::U32(t.indices())),
                    (b"SEG ", Section::U32(t.segment_ptr())),
                ],
            ),
            MatrixFile::InterleavedBlocked(t) => (
                t.k(),
                t.n(),
                t.block_size(),
                t.group(),
                vec![
                    (b"IDX ", Section::U32(t.all_indices())),
                    (b"SEG ", Section::U32(t.col_segment_ptr())),
                ],
            ),
            MatrixFile::Inverted(t) => (
                t.k(),
                t.n(),
                0,
                0,
                vec![
                    (b"COL ", Section::U32(t.col_start())),
                    (b"MRG ", Section::I32(t.merged_indices())),
                ],
            ),
            MatrixFile::Compressed(t) => (
                t.k(),
                t.n(),
                0,
                0,
                vec![(b"CODE", Section::Bytes(t.codes()))],
            ),
            MatrixFile::Symmetric(t) => (
                t.k(),
                t.n(),
                0,
                t.group(),
                vec![
                    (b"GRP ", Section::U32(t.group_ptr())),
                    (b"IDX ", Section::U32(t.indices())),
                ],
            ),
        }
    }

    /// Parses a dense or sparse file, detected by its magic.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic == DENSE_MAGIC {
            decode_dense(&mut r)
        } else if magic == SPARSE_MAGIC {
            decode_sparse(&mut r)
        } else {
            Err(Error::Parse {
                offset: 0,
                msg: format!("unrecognised magic {magic:02x?}"),
            })
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.encode())?;
        Ok(())
    }
}

type TaggedSection<'a> = (&'static [u8; 4], Section<'a>);

fn tcsc_sections(t: &Tcsc) -> [TaggedSection<'_>; 4] {
    [
        (b"CSP ", Section::U32(t.col_start_pos())),
        (b"RIP ", Section::U32(t.row_index_pos())),
        (b"CSN ", Section::U32(t.col_start_neg())),
        (b"RIN ", Section::U32(t.row_index_neg())),
    ]
}

enum Section<'a> {
    U32(&'a [u32]),
    I32(&'a [i32]),
    Bytes(&'a [u8]),
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos as u64,
            msg: msg.into(),
        }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(self.err(format!(
                "unexpected end of file: need {len} bytes, {} left",
                self.bytes.len() - self.pos
            ))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let v = self.u32()?;
        if v == 0 {
            return Err(Error::Parse {
                offset: self.pos as u64 - 4,
                msg: format!("{what} must be positive"),
            });
        }
        Ok(v as usize)
    }

    fn expect_version(&mut self) -> Result<()> {
        let at = self.pos;
        match self.u32()? {
            VERSION => Ok(()),
            v => Err(Error::Parse {
                offset: at as u64,
                msg: format!("unsupported version {v}"),
            }),
        }
    }

    fn section_header(&mut self, tag: &[u8; 4], width: usize) -> Result<usize> {
        let at = self.pos;
        let found = self.take(4)?;
        if found != tag {
            return Err(Error::Parse {
                offset: at as u64,
                msg: format!(
                    "expected section '{}', found '{}'",
                    String::from_utf8_lossy(tag),
                    String::from_utf8_lossy(found)
                ),
            });
        }
        let len = self.u32()? as usize;
        let left = self.bytes.len() - self.pos;
        if len.saturating_mul(width) > left {
            return Err(self.err(format!(
                "unexpected end of file: section '{}' needs {} bytes, {left} left",
                String::from_utf8_lossy(tag),
                len * width
            )));
        }
        Ok(len)
    }

    fn u32_section(&mut self, tag: &[u8; 4]) -> Result<Vec<u32>> {
        let len = self.section_header(tag, 4)?;
        let raw = self.take(len * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }

    fn i32_section(&mut self, tag: &[u8; 4]) -> Result<Vec<i32>> {
        let len = self.section_header(tag, 4)?;
        let raw = self.take(len * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }

    fn byte_section(&mut self, tag: &[u8; 4]) -> Result<Vec<u8>> {
        let len = self.section_header(tag, 1)?;
        Ok(self.take(len)?.to_vec())
    }

    fn tcsc(&mut self, k: usize, n: usize) -> Result<Tcsc> {
        Ok(Tcsc::from_parts_unchecked(
            k,
            n,
            self.u32_section(b"CSP ")?,
            self.u32_section(b"RIP ")?,
            self.u32_section(b"CSN ")?,
            self.u32_section(b"RIN ")?,
        ))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.err(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

fn decode_dense(r: &mut Reader<'_>) -> Result<MatrixFile> {
    r.expect_version()?;
    let k = r.count("K")?;
    let n = r.count("N")?;
    let start = r.pos;
    let len = k.checked_mul(n).ok_or_else(|| r.err("K * N overflows"))?;
    let raw = r.take(len)?;
    if let Some(i) = raw.iter().position(|&b| !matches!(b as i8, -1..=1)) {
        return Err(Error::Parse {
            offset: (start + i) as u64,
            msg: format!("byte {:#04x} is not ternary", raw[i]),
        });
    }
    r.finish()?;
    let values = raw.iter().map(|&b| b as i8).collect();
    Ok(MatrixFile::Dense(TernaryDense::new(k, n, values)?))
}

fn decode_sparse(r: &mut Reader<'_>) -> Result<MatrixFile> {
    r.expect_version()?;
    let tag_at = r.pos;
    let tag = r.u32()?;
    let format = FileFormat::from_tag(tag).ok_or_else(|| Error::Parse {
        offset: tag_at as u64,
        msg: format!("unknown sparse format tag {tag}"),
    })?;
    let k = r.count("K")?;
    let n = r.count("N")?;
    let block = r.u32()? as usize;
    let group = r.u32()? as usize;
    let count_at = r.pos;
    let sections = r.u32()? as usize;
    let body = r.pos;

    let expected_sections = match format {
        FileFormat::Blocked if block > 0 => 4 * k.div_ceil(block),
        FileFormat::Tcsc => 4,
        FileFormat::Compressed => 1,
        _ => 2,
    };
    if sections != expected_sections {
        return Err(Error::Parse {
            offset: count_at as u64,
            msg: format!(
                "{format} file should have {expected_sections} sections, header says {sections}"
            ),
        });
    }

    let decoded = match format {
        FileFormat::Dense => unreachable!("dense tag is never parsed as sparse"),
        FileFormat::Tcsc => {
            let t = r.tcsc(k, n)?;
            match t.validate().first() {
                Some(v) => Err(Error::corrupt(v.to_string())),
                None => Ok(MatrixFile::Tcsc(t)),
            }
        }
        FileFormat::Blocked => {
            let blocks = (0..sections / 4)
                .map(|_| r.tcsc(k, n))
                .collect::<Result<Vec<_>>>()?;
            BlockedTcsc::from_parts(k, n, block, blocks).map(MatrixFile::Blocked)
        }
        FileFormat::Interleaved => {
            let idx = r.u32_section(b"IDX ")?;
            let seg = r.u32_section(b"SEG ")?;
            InterleavedTcsc::from_parts(k, n, group, idx, seg).map(MatrixFile::Interleaved)
        }
        FileFormat::InterleavedBlocked => {
            let idx = r.u32_section(b"IDX ")?;
            let seg = r.u32_section(b"SEG ")?;
            InterleavedBlockedTcsc::from_parts(k, n, block, group, idx, seg)
                .map(MatrixFile::InterleavedBlocked)
        }
        FileFormat::Inverted => {
            let col = r.u32_section(b"COL ")?;
            let merged = r.i32_section(b"MRG ")?;
            InvertedTcsc::from_parts(k, n, col, merged).map(MatrixFile::Inverted)
        }
        FileFormat::Compressed => {
            let codes = r.byte_section(b"CODE")?;
            CompressedTcsc::from_parts(k, n, codes).map(MatrixFile::Compressed)
        }
        FileFormat::Symmetric => {
            let grp = r.u32_section(b"GRP ")?;
            let idx = r.u32_section(b"IDX ")?;
            SymmetricInterleavedTcsc::from_parts(k, n, group, grp, idx).map(MatrixFile::Symmetric)
        }
    };
    r.finish()?;
    decoded.map_err(|e| Error::Parse {
        offset: body as u64,
        msg: format!("invalid {format} data: {e}"),
    })
}
