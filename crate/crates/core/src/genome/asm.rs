//! Source text to codons.
//!
//! One statement per line, `;` starts a comment. Statements:
//!
//! ```text
//! <mnemonic>            one of the 41 instructions
//! START / STOP          marker codons
//! PAD-INTRON n          STOP, n random non-START codons, START
//! DATA                  the data section starts here
//! db v, ...             raw bytes
//! dd v, ...             little-endian 32-bit words
//! addnumber k           BC1 += k via the addNNNN ladder (0 <= k <= 0xFFFF)
//! rol_regA c            RegA = RegA rotated left by c (0..=31), BC1/BC2 clobbered
//! apihash "name"        12-bit API hash as a data word
//! times n <statement>   repeat a statement
//! ```
//!
//! Each instruction is encoded by a codon drawn uniformly from those the
//! alphabet assigns to it, so two assemblies with different seeds differ
//! in codons but translate identically.

use rand::Rng;
use thiserror::Error;

use super::Genome;
use crate::alphabet::{nop_codons, Alphabet, Codon, Role};
use crate::isa::{Instruction, IsaError, LoweringTable, ADD_LADDER};
use crate::rng::SoupRng;
use crate::vm::hash12;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {kind}")]
pub struct AsmError {
    pub line: usize,
    pub kind: AsmErrorKind,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AsmErrorKind {
    #[error("unknown mnemonic `{0}`")]
    UnknownMnemonic(String),
    #[error("addnumber argument {0:#x} exceeds 0xFFFF")]
    AddNumberRange(u64),
    #[error("rotate count {0} outside 0..=31")]
    RotateRange(u64),
    #[error("alphabet has no codon for `{0}`")]
    NoCodonForInstruction(Instruction),
    #[error("DATA given twice")]
    DuplicateData,
    #[error("{0}")]
    Syntax(String),
    #[error(transparent)]
    Lowering(#[from] IsaError),
}

/// Greedy base-4 decomposition of `k` over the add ladder.
pub fn addnumber_expansion(k: u32) -> Vec<Instruction> {
    let mut rest = k;
    let mut out = Vec::new();
    for (instr, step) in ADD_LADDER {
        while rest >= step {
            out.push(instr);
            rest -= step;
        }
    }
    out
}

/// `rol RegA, c`: shift copies left and right, combine with `addsaved`
/// (the two halves have disjoint bits). The left half waits on the stack.
pub fn rol_expansion(c: u32) -> Vec<Instruction> {
    use Instruction::*;
    if c == 0 {
        return Vec::new();
    }
    let mut out = vec![Zer0];
    out.extend(addnumber_expansion(c));
    out.extend([Save, NopsA, Shl, Push, Zer0]);
    out.extend(addnumber_expansion(32 - c));
    out.extend([Save, NopsA, Shr, Save, Pop, AddSaved, NopdA]);
    out
}

pub struct Assembler<'a> {
    alphabet: &'a Alphabet,
    lowering: Option<&'a LoweringTable>,
    /// Codon pools per instruction, indexed by `Instruction::index`.
    pools: Vec<Vec<Codon>>,
    intron_pool: Vec<Codon>,
}

impl<'a> Assembler<'a> {
    pub fn new(alphabet: &'a Alphabet) -> Self {
        let mut pools: Vec<Vec<Codon>> = Instruction::ALL
            .iter()
            .map(|i| alphabet.codons_for(Role::Exec(*i)))
            .collect();
        let nop = Instruction::NopReal.index();
        if pools[nop].is_empty() {
            pools[nop] = nop_codons().collect();
        }
        let intron_pool = (0..=255u8)
            .filter(|c| *c != alphabet.start_codon())
            .collect();
        Assembler {
            alphabet,
            lowering: None,
            pools,
            intron_pool,
        }
    }

    /// Instructions outside the table's active set are lowered.
    pub fn with_lowering(mut self, table: &'a LoweringTable) -> Self {
        self.lowering = Some(table);
        self
    }

    pub fn assemble(&self, source: &str, rng: &mut SoupRng) -> Result<Genome, AsmError> {
        let mut out = Emitter {
            codons: Vec::new(),
            data_offset: None,
        };
        for (n, raw) in source.lines().enumerate() {
            let line = raw.split(';').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.statement(line, &mut out, rng)
                .map_err(|kind| AsmError { line: n + 1, kind })?;
        }
        let offset = out.data_offset.unwrap_or(out.codons.len());
        Ok(Genome::new(out.codons, offset).expect("data offset within genome"))
    }

    fn statement(
        &self,
        line: &str,
        out: &mut Emitter,
        rng: &mut SoupRng,
    ) -> Result<(), AsmErrorKind> {
        let (head, rest) = split_word(line);
        match head {
            "times" => {
                let (count, stmt) = split_word(rest);
                let count = parse_number(count)?;
                if stmt.is_empty() {
                    return Err(AsmErrorKind::Syntax("times needs a statement".into()));
                }
                for _ in 0..count {
                    self.statement(stmt, out, rng)?;
                }
            }
            "START" => out.codons.push(self.alphabet.start_codon()),
            "STOP" => out.codons.push(self.alphabet.stop_codon()),
            "PAD-INTRON" => {
                let n = parse_number(rest)?;
                out.codons.push(self.alphabet.stop_codon());
                for _ in 0..n {
                    let c = self.intron_pool[rng.random_range(0..self.intron_pool.len())];
                    out.codons.push(c);
                }
                out.codons.push(self.alphabet.start_codon());
            }
            "DATA" => {
                if out.data_offset.replace(out.codons.len()).is_some() {
                    return Err(AsmErrorKind::DuplicateData);
                }
            }
            "db" => {
                for v in parse_list(rest)? {
                    let b = u8::try_from(v).map_err(|_| {
                        AsmErrorKind::Syntax(format!("byte value {v:#x} too large"))
                    })?;
                    out.codons.push(b);
                }
            }
            "dd" => {
                for v in parse_list(rest)? {
                    let w = u32::try_from(v).map_err(|_| {
                        AsmErrorKind::Syntax(format!("word value {v:#x} too large"))
                    })?;
                    out.codons.extend_from_slice(&w.to_le_bytes());
                }
            }
            "apihash" => {
                let name = rest
                    .strip_prefix('"')
                    .and_then(|r| r.strip_suffix('"'))
                    .filter(|n| !n.is_empty())
                    .ok_or_else(|| AsmErrorKind::Syntax("apihash expects a quoted name".into()))?;
                out.codons
                    .extend_from_slice(&(hash12(name) as u32).to_le_bytes());
            }
            "addnumber" => {
                let k = parse_number(rest)?;
                if k > 0xFFFF {
                    return Err(AsmErrorKind::AddNumberRange(k));
                }
                self.emit_all(&addnumber_expansion(k as u32), out, rng)?;
            }
            "rol_regA" => {
                let c = parse_number(rest)?;
                if c > 31 {
                    return Err(AsmErrorKind::RotateRange(c));
                }
                self.emit_all(&rol_expansion(c as u32), out, rng)?;
            }
            m => {
                if !rest.is_empty() {
                    return Err(AsmErrorKind::Syntax(format!("unexpected operand `{rest}`")));
                }
                let i = Instruction::from_mnemonic(m)
                    .ok_or_else(|| AsmErrorKind::UnknownMnemonic(m.to_string()))?;
                self.emit_all(&[i], out, rng)?;
            }
        }
        Ok(())
    }

    fn emit_all(
        &self,
        seq: &[Instruction],
        out: &mut Emitter,
        rng: &mut SoupRng,
    ) -> Result<(), AsmErrorKind> {
        let lowered;
        let seq = match self.lowering {
            Some(t) => {
                lowered = t.lower_all(seq)?;
                &lowered[..]
            }
            None => seq,
        };
        for &i in seq {
            let pool = &self.pools[i.index()];
            if pool.is_empty() {
                return Err(AsmErrorKind::NoCodonForInstruction(i));
            }
            out.codons.push(pool[rng.random_range(0..pool.len())]);
        }
        Ok(())
    }
}

struct Emitter {
    codons: Vec<Codon>,
    data_offset: Option<usize>,
}

/// Assembles `source` with no lowering.
pub fn assemble(source: &str, alpha: &Alphabet, rng: &mut SoupRng) -> Result<Genome, AsmError> {
    Assembler::new(alpha).assemble(source, rng)
}

fn split_word(s: &str) -> (&str, &str) {
    let s = s.trim();
    match s.find(char::is_whitespace) {
        Some(at) => (&s[..at], s[at..].trim()),
        None => (s, ""),
    }
}

fn parse_number(s: &str) -> Result<u64, AsmErrorKind> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|_| AsmErrorKind::Syntax(format!("bad number `{s}`")))
}

fn parse_list(s: &str) -> Result<Vec<u64>, AsmErrorKind> {
    if s.trim().is_empty() {
        return Err(AsmErrorKind::Syntax("missing value".into()));
    }
    s.split(',').map(parse_number).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::splice_translate;
    use crate::isa::InstructionSet;
    use crate::rng::seeded;
    use Instruction::*;

    #[test]
    fn addnumber_examples() {
        assert_eq!(addnumber_expansion(0x15), vec![Add0010, Add0004, Add0001]);
        assert!(addnumber_expansion(0).is_empty());
        let big = addnumber_expansion(0xFFFF);
        assert_eq!(big.len(), 8 * 3);
        for k in [1u32, 3, 12, 0x1234, 0xABCD] {
            let sum: u32 = addnumber_expansion(k)
                .iter()
                .map(|i| i.add_immediate().unwrap())
                .sum();
            assert_eq!(sum, k);
        }
    }

    #[test]
    fn assemble_errors() {
        let a = Alphabet::shipped();
        let mut rng = seeded(1);
        let err = assemble("nopsA\nfrobnicate\n", &a, &mut rng).unwrap_err();
        assert_eq!(
            err,
            AsmError {
                line: 2,
                kind: AsmErrorKind::UnknownMnemonic("frobnicate".into())
            }
        );
        let err = assemble("addnumber 0x10000", &a, &mut rng).unwrap_err();
        assert_eq!(err.kind, AsmErrorKind::AddNumberRange(0x10000));
        let err = assemble("rol_regA 32", &a, &mut rng).unwrap_err();
        assert_eq!(err.kind, AsmErrorKind::RotateRange(32));
        let err = assemble("DATA\nDATA", &a, &mut rng).unwrap_err();
        assert_eq!(err.kind, AsmErrorKind::DuplicateData);
        let sparse =
            crate::alphabet::random_alphabet(InstructionSet::EMPTY.with(Xor), 0x2A, 0x54, &mut rng)
                .unwrap();
        let err = assemble("push", &sparse, &mut rng).unwrap_err();
        assert_eq!(err.kind, AsmErrorKind::NoCodonForInstruction(Push));
    }

    #[test]
    fn polymorphic_but_deterministic() {
        let a = Alphabet::shipped();
        let src = "times 50 xor\naddnumber 0x15\nSTOP\ndb 1,2,3\nSTART\nDATA\napihash \"vexit\"\ndd 0x01020304";
        let g1 = assemble(src, &a, &mut seeded(1)).unwrap();
        let g1b = assemble(src, &a, &mut seeded(1)).unwrap();
        let g2 = assemble(src, &a, &mut seeded(2)).unwrap();
        assert_eq!(g1, g1b);
        assert_eq!(splice_translate(&g1, &a), splice_translate(&g2, &a));
        assert_eq!(g1.len(), 50 + 3 + 1 + 3 + 1 + 4 + 4);
        assert_eq!(g1.data_offset(), 58);
        assert_eq!(&g1.codons()[62..], &[4, 3, 2, 1]);
        let h = hash12("vexit");
        assert_eq!(&g1.codons()[58..62], &(h as u32).to_le_bytes());
        if a.codons_for(Role::Exec(Xor)).len() > 1 {
            assert_ne!(g1, g2);
        }
    }

    #[test]
    fn pad_intron_layout() {
        let a = Alphabet::shipped();
        let g = assemble("PAD-INTRON 100", &a, &mut seeded(3)).unwrap();
        assert_eq!(g.len(), 102);
        assert_eq!(g.codons()[0], a.stop_codon());
        assert_eq!(g.codons()[101], a.start_codon());
        assert!(g.codons()[1..101].iter().all(|c| *c != a.start_codon()));
        assert!(splice_translate(&g, &a).iter().all(|i| *i == NopReal));
    }

    #[test]
    fn lowering_applies_to_macros_and_mnemonics() {
        let a = Alphabet::shipped();
        let t = LoweringTable::shipped().with_active_set(InstructionSet::FULL.without(Zer0));
        let g = Assembler::new(&a)
            .with_lowering(&t)
            .assemble("zer0\nrol_regA 1", &mut seeded(9))
            .unwrap();
        let tr = splice_translate(&g, &a);
        assert!(!tr.contains(&Zer0));
        assert_eq!(&tr[..2], &[Save, Xor]);
    }
}
