use serde::{Deserialize, Serialize};

use super::Genome;
use crate::alphabet::{Alphabet, Codon, Role, NOP_MASK};
use crate::isa::{DangerCategory, Instruction};

/// Translation mask: `0x00` inside exons, `0x91` inside introns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SpliceState {
    mask: u8,
}

impl SpliceState {
    pub const EXON: SpliceState = SpliceState { mask: 0 };
    pub const INTRON: SpliceState = SpliceState { mask: NOP_MASK };

    pub fn mask(self) -> u8 {
        self.mask
    }

    pub fn is_intron(self) -> bool {
        self.mask == NOP_MASK
    }

    /// Consumes one raw codon and returns the instruction it translates to.
    /// START and STOP are recognised on the raw value and emit `nopREAL`.
    #[inline]
    pub fn feed(&mut self, c: Codon, alpha: &Alphabet) -> Instruction {
        match alpha.role(c) {
            Role::Stop => {
                *self = Self::INTRON;
                Instruction::NopReal
            }
            Role::Start => {
                *self = Self::EXON;
                Instruction::NopReal
            }
            _ => match alpha.role(c | self.mask) {
                Role::Exec(i) => i,
                // Markers cannot be reached through the mask: it only sets
                // bits, and any masked codon matches the NOP pattern.
                _ => Instruction::NopReal,
            },
        }
    }
}

pub fn splice_translate(g: &Genome, alpha: &Alphabet) -> Vec<Instruction> {
    translate_codons(g.codons(), alpha)
}

pub(crate) fn translate_codons(codons: &[Codon], alpha: &Alphabet) -> Vec<Instruction> {
    let mut state = SpliceState::EXON;
    codons.iter().map(|&c| state.feed(c, alpha)).collect()
}

/// Splice state after each codon has been consumed.
pub fn splice_states(g: &Genome, alpha: &Alphabet) -> Vec<SpliceState> {
    let mut state = SpliceState::EXON;
    g.codons()
        .iter()
        .map(|&c| {
            state.feed(c, alpha);
            state
        })
        .collect()
}

/// Post-splice instruction counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub counts: [u64; 41],
    pub total: u64,
}

impl Histogram {
    pub fn from_instructions(seq: &[Instruction]) -> Self {
        let mut counts = [0u64; 41];
        for i in seq {
            counts[i.index()] += 1;
        }
        Histogram {
            counts,
            total: seq.len() as u64,
        }
    }

    pub fn count(&self, i: Instruction) -> u64 {
        self.counts[i.index()]
    }

    pub fn frequency(&self, i: Instruction) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(i) as f64 / self.total as f64
        }
    }

    /// Instructions with non-zero frequency, in table order.
    pub fn frequencies(&self) -> Vec<(Instruction, f64)> {
        Instruction::ALL
            .into_iter()
            .filter(|i| self.count(*i) > 0)
            .map(|i| (i, self.frequency(i)))
            .collect()
    }

    /// Fraction of instructions in the dangerous category.
    pub fn danger_density(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let d: u64 = Instruction::ALL
            .into_iter()
            .filter(|i| i.category() == DangerCategory::Dangerous)
            .map(|i| self.count(i))
            .sum();
        d as f64 / self.total as f64
    }
}

pub fn instruction_histogram(g: &Genome, alpha: &Alphabet) -> Histogram {
    Histogram::from_instructions(&splice_translate(g, alpha))
}
