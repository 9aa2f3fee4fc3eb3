//! Genomes: fixed-length codon strings with a data-section offset.

mod asm;
mod disasm;
pub(crate) mod splice;

pub use asm::{assemble, AsmError, AsmErrorKind, Assembler};
pub use disasm::{disassemble, to_source};
pub use splice::{instruction_histogram, splice_states, splice_translate, Histogram, SpliceState};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::Codon;

pub const GENOME_MAGIC: [u8; 8] = *b"CODONGEN";
pub const GENOME_FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenomeError {
    #[error("genome lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("data offset {offset} past genome end {len}")]
    BadDataOffset { offset: usize, len: usize },
    #[error("not a genome file")]
    BadMagic,
    #[error("unsupported genome format version {0}")]
    UnsupportedVersion(u32),
    #[error("genome file truncated")]
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Genome {
    codons: Vec<Codon>,
    data_offset: usize,
}

impl Genome {
    pub fn new(codons: Vec<Codon>, data_offset: usize) -> Result<Self, GenomeError> {
        if data_offset > codons.len() {
            return Err(GenomeError::BadDataOffset {
                offset: data_offset,
                len: codons.len(),
            });
        }
        Ok(Genome {
            codons,
            data_offset,
        })
    }

    /// A genome with no data section.
    pub fn from_codons(codons: Vec<Codon>) -> Self {
        let n = codons.len();
        Genome {
            codons,
            data_offset: n,
        }
    }

    pub fn codons(&self) -> &[Codon] {
        &self.codons
    }

    /// Mutable access to the codons. The slice cannot change length.
    pub fn codons_mut(&mut self) -> &mut [Codon] {
        &mut self.codons
    }

    pub fn len(&self) -> usize {
        self.codons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codons.is_empty()
    }

    pub fn data_offset(&self) -> usize {
        self.data_offset
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.codons.len());
        out.extend_from_slice(&GENOME_MAGIC);
        out.extend_from_slice(&GENOME_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.codons.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.data_offset as u32).to_le_bytes());
        out.extend_from_slice(&self.codons);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GenomeError> {
        if bytes.len() < 8 || bytes[..8] != GENOME_MAGIC {
            return Err(GenomeError::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(GenomeError::Truncated);
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let version = word(8);
        if version != GENOME_FORMAT_VERSION {
            return Err(GenomeError::UnsupportedVersion(version));
        }
        let len = word(12) as usize;
        let data_offset = word(16) as usize;
        let body = &bytes[HEADER_LEN..];
        if body.len() != len {
            return Err(GenomeError::Truncated);
        }
        Genome::new(body.to_vec(), data_offset)
    }
}

/// Number of differing bits.
pub fn hamming(a: &Genome, b: &Genome) -> Result<u64, GenomeError> {
    hamming_codons(a.codons(), b.codons())
}

pub fn hamming_codons(a: &[Codon], b: &[Codon]) -> Result<u64, GenomeError> {
    if a.len() != b.len() {
        return Err(GenomeError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x ^ y).count_ones() as u64)
        .sum())
}
