//! The hand-written self-replicating ancestor.
//!
//! The organism copies its whole image (code and data) into a fresh heap
//! block one d-word at a time, hands the copy to `vspawn`, repeats that three
//! times and calls `vexit`. Its size is adjustable: `exon_len` pads the code
//! with executed `nopREAL` filler, `intron_len` inserts a STOP..START intron
//! right after the prologue.

use thiserror::Error;

/// Codons of the replication loop, prologue and epilogue, without filler.
pub const CORE_CODE_LEN: usize = 85;
/// Three API-name hashes.
pub const DATA_LEN: usize = 12;
/// Exon length of the shipped ancestor.
pub const SHIPPED_EXON_LEN: usize = 512;
/// Offspring per life.
pub const OFFSPRING: u32 = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AncestorError {
    #[error("exon length {0} is below the minimum {min}", min = CORE_CODE_LEN + DATA_LEN)]
    ExonTooShort(usize),
    #[error("total length {0} is not a multiple of 4")]
    Unaligned(usize),
}

/// Size of an ancestor build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AncestorSpec {
    /// Code plus data codons (the intron and its markers excluded).
    pub exon_len: usize,
    /// Random codons between the STOP and START markers; 0 means no intron.
    pub intron_len: usize,
}

impl AncestorSpec {
    pub const SHIPPED: AncestorSpec = AncestorSpec {
        exon_len: SHIPPED_EXON_LEN,
        intron_len: 0,
    };

    /// An ancestor of `total` codons, `intron_fraction` of them intron.
    pub fn with_intron_fraction(total: usize, intron_fraction: f64) -> AncestorSpec {
        let intron_total = (total as f64 * intron_fraction).round() as usize;
        if intron_total < 3 {
            return AncestorSpec {
                exon_len: total,
                intron_len: 0,
            };
        }
        AncestorSpec {
            exon_len: total - intron_total,
            intron_len: intron_total - 2,
        }
    }

    pub fn total_len(&self) -> usize {
        self.exon_len
            + if self.intron_len > 0 {
                self.intron_len + 2
            } else {
                0
            }
    }
}

impl Default for AncestorSpec {
    fn default() -> Self {
        Self::SHIPPED
    }
}

const PROLOGUE: &str = "\
; RegB = image base, replication counter on the stack
getEIP
nopdB
zer0
addnumber 3
push
";

const BODY: &str = "\
; ---- one offspring per pass ----
getEIP
push                ; outer-loop address
nopsB
save
getDO
addnumber 12
subsaved            ; image length = data end - base
push
getDO
getdata
CallAPILoadLibrary
call                ; valloc(length) -> RegA
nopsA
push                ; keep the block address
nopsB
nopdD               ; RegD = source cursor
; ---- copy loop: RegD source, RegA destination ----
getEIP
saveJmpOff
nopsA
saveWrtOff
nopsD
getdata
writeDWord
zer0
add0004
save
nopsA
addsaved
nopdA
nopsD
addsaved
nopdD
getDO
addnumber 12
save
nopsD
subsaved
JnzUp
; ---- vspawn(block, length) ----
pop
nopdA
nopsB
save
getDO
addnumber 12
subsaved
push
nopsA
push
zer0
add0004
save
getDO
addsaved
getdata
CallAPILoadLibrary
call
; ---- count down ----
pop
saveJmpOff
pop
sub0001
push
JnzUp
; ---- vexit() ----
pop
zer0
addnumber 8
save
getDO
addsaved
getdata
CallAPILoadLibrary
call
DATA
apihash \"valloc\"
apihash \"vspawn\"
apihash \"vexit\"
";

/// Assembler source for an ancestor of the given size.
pub fn ancestor_source(spec: AncestorSpec) -> Result<String, AncestorError> {
    let min = CORE_CODE_LEN + DATA_LEN;
    if spec.exon_len < min {
        return Err(AncestorError::ExonTooShort(spec.exon_len));
    }
    if !spec.total_len().is_multiple_of(4) {
        return Err(AncestorError::Unaligned(spec.total_len()));
    }
    let mut src = String::from("; self-replicating ancestor\n");
    src.push_str(PROLOGUE);
    if spec.intron_len > 0 {
        src.push_str(&format!("PAD-INTRON {}\n", spec.intron_len));
    }
    let filler = spec.exon_len - min;
    if filler > 0 {
        src.push_str(&format!("times {filler} nopREAL\n"));
    }
    src.push_str(BODY);
    Ok(src)
}

/// The shipped 512-codon ancestor.
pub fn shipped_source() -> String {
    ancestor_source(AncestorSpec::SHIPPED).expect("shipped ancestor spec is valid")
}

/// Source of the ancestor core without filler or intron, as used for
/// instruction-density comparisons.
pub fn core_source() -> String {
    let mut s = String::from(PROLOGUE);
    s.push_str(BODY);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;
    use crate::genome::{assemble, splice_states};
    use crate::rng::seeded;
    use crate::vm::{
        run_to_completion, Env, Program, SoloHost, StepOutcome, VirtualOs, VmConfig, VmState,
    };

    #[test]
    fn core_length_constant() {
        let a = Alphabet::shipped();
        let g = assemble(&core_source(), &a, &mut seeded(0)).unwrap();
        assert_eq!(g.data_offset(), CORE_CODE_LEN);
        assert_eq!(g.len(), CORE_CODE_LEN + DATA_LEN);
    }

    #[test]
    fn sizes() {
        let a = Alphabet::shipped();
        for spec in [
            AncestorSpec::SHIPPED,
            AncestorSpec {
                exon_len: 512,
                intron_len: 4606,
            },
            AncestorSpec::with_intron_fraction(5120, 0.9),
            AncestorSpec::with_intron_fraction(20480, 0.0),
        ] {
            let g = assemble(&ancestor_source(spec).unwrap(), &a, &mut seeded(1)).unwrap();
            assert_eq!(g.len(), spec.total_len());
            let introns = splice_states(&g, &a)
                .iter()
                .filter(|s| s.is_intron())
                .count();
            // intron codons plus the STOP marker itself
            let expect = if spec.intron_len > 0 {
                spec.intron_len + 1
            } else {
                0
            };
            assert_eq!(introns, expect);
        }
        assert_eq!(
            AncestorSpec::with_intron_fraction(5120, 0.9).total_len(),
            5120
        );
        assert!(ancestor_source(AncestorSpec {
            exon_len: 96,
            intron_len: 0
        })
        .is_err());
        assert!(ancestor_source(AncestorSpec {
            exon_len: 513,
            intron_len: 0
        })
        .is_err());
    }

    #[test]
    fn shipped_file_matches_generator() {
        assert_eq!(include_str!("../data/ancestor.asm"), shipped_source());
    }

    #[test]
    fn replicates_three_times_then_exits() {
        let a = Alphabet::shipped();
        let os = VirtualOs::standard();
        let env = Env {
            os: &os,
            alphabet: &a,
        };
        for spec in [
            AncestorSpec::SHIPPED,
            AncestorSpec::with_intron_fraction(2048, 0.5),
        ] {
            let g = assemble(&ancestor_source(spec).unwrap(), &a, &mut seeded(2)).unwrap();
            let mut prog = Program::new(g.clone());
            let mut s = VmState::new(VmConfig::default());
            let r = run_to_completion(&mut s, &mut prog, &env, &mut SoloHost::new(0), 10_000_000);
            assert_eq!(r.outcome, StepOutcome::Exit);
            assert_eq!(r.spawns.len(), OFFSPRING as usize);
            for child in &r.spawns {
                assert_eq!(child.as_slice(), g.codons());
            }
            assert!(s.stack.is_empty());
        }
    }
}
