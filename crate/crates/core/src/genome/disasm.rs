use std::fmt::Write;

use super::splice::SpliceState;
use super::Genome;
use crate::alphabet::{Alphabet, Role};

/// One line per codon: index, raw codon, raw role, post-splice
/// instruction, and whether the codon sits in an exon or intron.
pub fn disassemble(g: &Genome, alpha: &Alphabet) -> String {
    let mut out = String::new();
    let mut state = SpliceState::EXON;
    for (i, &c) in g.codons().iter().enumerate() {
        let instr = state.feed(c, alpha);
        let flag = if state.is_intron() { "intron" } else { "exon" };
        let data = if i >= g.data_offset() { " data" } else { "" };
        let _ = writeln!(
            out,
            "{i:06} {c:02x} {:<18} {:<18} {flag}{data}",
            alpha.role(c).to_string(),
            instr.mnemonic()
        );
    }
    out
}

/// Assembler source that reproduces the genome's translation: exon
/// instructions as mnemonics (re-encoded polymorphically), markers as
/// `START`/`STOP`, everything else as raw `db` bytes.
pub fn to_source(g: &Genome, alpha: &Alphabet) -> String {
    let mut out = String::new();
    let mut state = SpliceState::EXON;
    for (i, &c) in g.codons().iter().enumerate() {
        if i == g.data_offset() {
            out.push_str("DATA\n");
        }
        let in_intron = state.is_intron();
        state.feed(c, alpha);
        match alpha.role(c) {
            Role::Start => out.push_str("START\n"),
            Role::Stop => out.push_str("STOP\n"),
            Role::Exec(instr) if !in_intron && i < g.data_offset() => {
                out.push_str(instr.mnemonic());
                out.push('\n');
            }
            _ => {
                let _ = writeln!(out, "db {c:#04x}");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{assemble, splice_states, splice_translate};
    use crate::rng::seeded;

    fn sample(alpha: &Alphabet) -> Genome {
        let src = "getEIP\nnopdB\nSTOP\nxor\npush\nSTART\naddnumber 0x33\nPAD-INTRON 20\nrol_regA 5\nDATA\napihash \"vspawn\"\ndb 0x2a, 0x54";
        assemble(src, alpha, &mut seeded(4)).unwrap()
    }

    #[test]
    fn empty_genome_empty_listing() {
        let a = Alphabet::shipped();
        assert_eq!(disassemble(&Genome::from_codons(vec![]), &a), "");
    }

    #[test]
    fn listing_flags_follow_splice_state() {
        let a = Alphabet::shipped();
        let g = sample(&a);
        let listing = disassemble(&g, &a);
        let states = splice_states(&g, &a);
        let lines: Vec<&str> = listing.lines().collect();
        assert_eq!(lines.len(), g.len());
        for (line, st) in lines.iter().zip(&states) {
            let intron = line.split_whitespace().nth(4) == Some("intron");
            assert_eq!(intron, st.is_intron(), "{line}");
        }
    }

    #[test]
    fn source_round_trip_translates_identically() {
        let a = Alphabet::shipped();
        let g = sample(&a);
        let src = to_source(&g, &a);
        let back = assemble(&src, &a, &mut seeded(77)).unwrap();
        assert_eq!(back.len(), g.len());
        assert_eq!(back.data_offset(), g.data_offset());
        assert_eq!(splice_translate(&back, &a), splice_translate(&g, &a));
    }
}
