//! The meta-language instruction set.
//!
//! Forty-one executable instructions that separate operands from operations:
//! every arithmetic or logic instruction works on `BC1` with `BC2` as the
//! implicit second argument, and the remaining registers are only reachable
//! through dedicated move instructions. The module also carries the danger
//! classification used by the alphabet energy and the lowering tables that
//! rewrite removed instructions into sequences of the remaining ones.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IsaError {
    #[error("unknown mnemonic `{0}`")]
    UnknownMnemonic(String),
    #[error("no lowering for removed instruction `{0}`")]
    MissingLowering(Instruction),
    #[error("lowering of `{0}` does not terminate")]
    CyclicLowering(Instruction),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

macro_rules! instructions {
    ($($variant:ident => $mnemonic:literal),* $(,)?) => {
        /// One executable instruction of the meta-language.
        ///
        /// Variant order follows the reference table; [`Instruction::index`]
        /// exposes that order and histograms are laid out by it.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[repr(u8)]
        pub enum Instruction {
            $($variant),*
        }

        impl Instruction {
            pub const ALL: [Instruction; 41] = [$(Instruction::$variant),*];

            pub const fn mnemonic(self) -> &'static str {
                match self {
                    $(Instruction::$variant => $mnemonic),*
                }
            }

            pub fn from_mnemonic(s: &str) -> Option<Instruction> {
                match s {
                    $($mnemonic => Some(Instruction::$variant),)*
                    _ => None,
                }
            }
        }
    };
}

instructions! {
    NopReal => "nopREAL",
    NopsA => "nopsA",
    NopsB => "nopsB",
    NopsD => "nopsD",
    NopdA => "nopdA",
    NopdB => "nopdB",
    NopdD => "nopdD",
    Save => "save",
    AddSaved => "addsaved",
    SubSaved => "subsaved",
    SaveWrtOff => "saveWrtOff",
    SaveJmpOff => "saveJmpOff",
    WriteByte => "writeByte",
    WriteDWord => "writeDWord",
    GetDo => "getDO",
    GetData => "getdata",
    GetEip => "getEIP",
    Push => "push",
    Pop => "pop",
    PushAll => "pushall",
    PopAll => "popall",
    Zer0 => "zer0",
    Add0001 => "add0001",
    Add0004 => "add0004",
    Add0010 => "add0010",
    Add0040 => "add0040",
    Add0100 => "add0100",
    Add0400 => "add0400",
    Add1000 => "add1000",
    Add4000 => "add4000",
    Sub0001 => "sub0001",
    Shl => "shl",
    Shr => "shr",
    Xor => "xor",
    And => "and",
    Mul => "mul",
    Div => "div",
    JnzUp => "JnzUp",
    JnzDown => "JnzDown",
    Call => "call",
    CallApiLoadLibrary => "CallAPILoadLibrary",
}

/// Number of alphabet roles in the original set: the executable
/// instructions plus the START and STOP markers.
pub const ORIGINAL_ENTRY_COUNT: usize = Instruction::ALL.len() + 2;

/// The `addNNNN` immediates, largest first.
pub const ADD_LADDER: [(Instruction, u32); 8] = [
    (Instruction::Add4000, 0x4000),
    (Instruction::Add1000, 0x1000),
    (Instruction::Add0400, 0x0400),
    (Instruction::Add0100, 0x0100),
    (Instruction::Add0040, 0x0040),
    (Instruction::Add0010, 0x0010),
    (Instruction::Add0004, 0x0004),
    (Instruction::Add0001, 0x0001),
];

impl Instruction {
    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Instruction> {
        Self::ALL.get(i).copied()
    }

    /// Immediate added to `BC1` by the `addNNNN` instructions.
    pub fn add_immediate(self) -> Option<u32> {
        ADD_LADDER.iter().find(|(i, _)| *i == self).map(|&(_, v)| v)
    }

    pub fn category(self) -> DangerCategory {
        category(self)
    }

    pub fn effects(self) -> Effects {
        effect_descriptor(self)
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

impl FromStr for Instruction {
    type Err = IsaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Instruction::from_mnemonic(s).ok_or_else(|| IsaError::UnknownMnemonic(s.to_string()))
    }
}

/// Architectural state an instruction may observe or modify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Reg {
    RegA,
    RegB,
    RegD,
    Bc1,
    Bc2,
    Ba1,
    Ba2,
    Ip,
    Zf,
    Stack,
    Mem,
}

impl Reg {
    pub const ALL: [Reg; 11] = [
        Reg::RegA,
        Reg::RegB,
        Reg::RegD,
        Reg::Bc1,
        Reg::Bc2,
        Reg::Ba1,
        Reg::Ba2,
        Reg::Ip,
        Reg::Zf,
        Reg::Stack,
        Reg::Mem,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Reg::RegA => "RegA",
            Reg::RegB => "RegB",
            Reg::RegD => "RegD",
            Reg::Bc1 => "BC1",
            Reg::Bc2 => "BC2",
            Reg::Ba1 => "BA1",
            Reg::Ba2 => "BA2",
            Reg::Ip => "IP",
            Reg::Zf => "ZF",
            Reg::Stack => "STACK",
            Reg::Mem => "MEM",
        }
    }
}

/// Small bit set over [`Reg`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct RegSet(u16);

impl RegSet {
    pub const EMPTY: RegSet = RegSet(0);

    pub const fn of(regs: &[Reg]) -> RegSet {
        let mut bits = 0u16;
        let mut i = 0;
        while i < regs.len() {
            bits |= 1 << regs[i] as u16;
            i += 1;
        }
        RegSet(bits)
    }

    pub const fn contains(self, r: Reg) -> bool {
        self.0 & (1 << r as u16) != 0
    }

    pub const fn intersects(self, other: RegSet) -> bool {
        self.0 & other.0 != 0
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Reg> {
        Reg::ALL.into_iter().filter(move |r| self.contains(*r))
    }
}

/// Static read/write summary of one instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Effects {
    pub reads: RegSet,
    pub writes: RegSet,
    pub touches_stack: bool,
    pub touches_memory: bool,
    pub affects_flow: bool,
}

pub fn effect_descriptor(instr: Instruction) -> Effects {
    use Instruction::*;
    use Reg::*;
    let (reads, writes): (&[Reg], &[Reg]) = match instr {
        NopReal => (&[], &[]),
        NopsA => (&[RegA], &[Bc1]),
        NopsB => (&[RegB], &[Bc1]),
        NopsD => (&[RegD], &[Bc1]),
        NopdA => (&[Bc1], &[RegA]),
        NopdB => (&[Bc1], &[RegB]),
        NopdD => (&[Bc1], &[RegD]),
        Save => (&[Bc1], &[Bc2]),
        AddSaved | SubSaved | Xor | And | Shl | Shr => (&[Bc1, Bc2], &[Bc1, Zf]),
        SaveWrtOff => (&[Bc1], &[Ba1]),
        SaveJmpOff => (&[Bc1], &[Ba2]),
        WriteByte | WriteDWord => (&[Bc1, Ba1], &[Mem]),
        GetDo => (&[], &[Bc1]),
        GetData => (&[Bc1, Mem], &[Bc1]),
        GetEip => (&[Ip], &[Bc1]),
        Push => (&[Bc1, Stack], &[Stack]),
        Pop => (&[Stack], &[Bc1, Stack]),
        PushAll => (&[RegA, RegB, RegD, Bc1, Bc2, Ba1, Ba2, Stack], &[Stack]),
        PopAll => (&[Stack], &[RegA, RegB, RegD, Bc1, Bc2, Ba1, Ba2, Stack]),
        Zer0 => (&[], &[Bc1]),
        Add0001 | Add0004 | Add0010 | Add0040 | Add0100 | Add0400 | Add1000 | Add4000 | Sub0001 => {
            (&[Bc1], &[Bc1, Zf])
        }
        Mul => (&[RegA, Bc1], &[RegA, RegD]),
        Div => (&[RegA, RegD, Bc1], &[RegA, RegD]),
        JnzUp => (&[Zf, Ba2], &[Ip]),
        JnzDown => (&[Zf], &[Ip]),
        Call => (&[Bc1, Stack], &[Ip, Stack, RegA]),
        CallApiLoadLibrary => (&[Bc1, Stack], &[Bc1]),
    };
    let reads = RegSet::of(reads);
    let writes = RegSet::of(writes);
    Effects {
        reads,
        writes,
        touches_stack: reads.contains(Stack) || writes.contains(Stack),
        touches_memory: reads.contains(Mem) || writes.contains(Mem),
        affects_flow: writes.contains(Ip),
    }
}

/// Crash risk of an instruction when it appears where another was intended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DangerCategory {
    Dangerous,
    SemiHarmless,
    Harmless,
    /// `addNNNN` and `sub0001`. Behaves as [`DangerCategory::Harmless`]
    /// everywhere except the lowest non-zero interaction tier.
    AddFamily,
}

impl DangerCategory {
    pub fn is_harmless(self) -> bool {
        matches!(self, DangerCategory::Harmless | DangerCategory::AddFamily)
    }

    pub fn name(self) -> &'static str {
        match self {
            DangerCategory::Dangerous => "dangerous",
            DangerCategory::SemiHarmless => "semi-harmless",
            DangerCategory::Harmless => "harmless",
            DangerCategory::AddFamily => "add-family",
        }
    }
}

pub const DANGEROUS: [Instruction; 13] = [
    Instruction::Push,
    Instruction::Pop,
    Instruction::PushAll,
    Instruction::PopAll,
    Instruction::CallApiLoadLibrary,
    Instruction::JnzDown,
    Instruction::JnzUp,
    Instruction::Call,
    Instruction::SaveJmpOff,
    Instruction::SaveWrtOff,
    Instruction::WriteByte,
    Instruction::WriteDWord,
    Instruction::GetData,
];

pub fn category(instr: Instruction) -> DangerCategory {
    const SEMI: RegSet = RegSet::of(&[Reg::RegA, Reg::RegB, Reg::RegD, Reg::Bc2]);
    if DANGEROUS.contains(&instr) {
        DangerCategory::Dangerous
    } else if effect_descriptor(instr).writes.intersects(SEMI) {
        DangerCategory::SemiHarmless
    } else if instr.add_immediate().is_some() || instr == Instruction::Sub0001 {
        DangerCategory::AddFamily
    } else {
        DangerCategory::Harmless
    }
}

/// A subset of the 41 instructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InstructionSet(u64);

impl InstructionSet {
    pub const EMPTY: InstructionSet = InstructionSet(0);
    pub const FULL: InstructionSet = InstructionSet((1u64 << 41) - 1);

    pub fn from_instructions<I: IntoIterator<Item = Instruction>>(it: I) -> Self {
        it.into_iter().fold(Self::EMPTY, |s, i| s.with(i))
    }

    pub fn contains(self, i: Instruction) -> bool {
        self.0 & (1 << i.index()) != 0
    }

    pub fn with(self, i: Instruction) -> Self {
        InstructionSet(self.0 | (1 << i.index()))
    }

    pub fn without(self, i: Instruction) -> Self {
        InstructionSet(self.0 & !(1 << i.index()))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Instruction> {
        Instruction::ALL
            .into_iter()
            .filter(move |i| self.contains(*i))
    }
}

impl Default for InstructionSet {
    fn default() -> Self {
        Self::FULL
    }
}

/// Rewrite rules for instructions removed from the active set.
///
/// Lowering is recursive: a replacement may itself mention removed
/// instructions as long as expansion terminates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoweringTable {
    entries: BTreeMap<Instruction, Vec<Instruction>>,
    active: InstructionSet,
}

const DEFAULT_LOWERINGS: &str = include_str!("../data/default.lower");

impl LoweringTable {
    pub fn new(active: InstructionSet) -> Self {
        LoweringTable {
            entries: BTreeMap::new(),
            active,
        }
    }

    /// The shipped rewrite rules, with every instruction active.
    pub fn shipped() -> Self {
        Self::parse(DEFAULT_LOWERINGS).expect("shipped lowering table parses")
    }

    pub fn active_set(&self) -> InstructionSet {
        self.active
    }

    pub fn with_active_set(mut self, active: InstructionSet) -> Self {
        self.active = active;
        self
    }

    pub fn insert(&mut self, removed: Instruction, replacement: Vec<Instruction>) {
        self.entries.insert(removed, replacement);
    }

    pub fn entry(&self, removed: Instruction) -> Option<&[Instruction]> {
        self.entries.get(&removed).map(Vec::as_slice)
    }

    pub fn entries(&self) -> impl Iterator<Item = (Instruction, &[Instruction])> {
        self.entries.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn lower(&self, instr: Instruction) -> Result<Vec<Instruction>, IsaError> {
        let mut out = Vec::new();
        self.lower_into(instr, &mut out, 0, instr)?;
        Ok(out)
    }

    /// Lowers a whole sequence.
    pub fn lower_all(&self, seq: &[Instruction]) -> Result<Vec<Instruction>, IsaError> {
        let mut out = Vec::with_capacity(seq.len());
        for &i in seq {
            self.lower_into(i, &mut out, 0, i)?;
        }
        Ok(out)
    }

    fn lower_into(
        &self,
        instr: Instruction,
        out: &mut Vec<Instruction>,
        depth: usize,
        root: Instruction,
    ) -> Result<(), IsaError> {
        if self.active.contains(instr) {
            out.push(instr);
            return Ok(());
        }
        if depth > Instruction::ALL.len() {
            return Err(IsaError::CyclicLowering(root));
        }
        let repl = self
            .entries
            .get(&instr)
            .ok_or(IsaError::MissingLowering(instr))?;
        for &r in repl {
            self.lower_into(r, out, depth + 1, root)?;
        }
        Ok(())
    }

    /// Parses `LOWER <m> = <m1> <m2> ...` and `REMOVE <m> ...` lines.
    /// `#` and `;` start comments.
    pub fn parse(text: &str) -> Result<Self, IsaError> {
        let mut table = LoweringTable::new(InstructionSet::FULL);
        for (n, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let perr = |msg: String| IsaError::Parse { line: n + 1, msg };
            let mut words = line.split_whitespace();
            match words.next() {
                Some("LOWER") => {
                    let target = words
                        .next()
                        .ok_or_else(|| perr("missing mnemonic".into()))?;
                    let target: Instruction =
                        target.parse().map_err(|e: IsaError| perr(e.to_string()))?;
                    if words.next() != Some("=") {
                        return Err(perr("expected `=`".into()));
                    }
                    let repl = words
                        .map(|w| w.parse::<Instruction>().map_err(|e| perr(e.to_string())))
                        .collect::<Result<Vec<_>, _>>()?;
                    if repl.contains(&target) {
                        return Err(IsaError::CyclicLowering(target));
                    }
                    table.entries.insert(target, repl);
                }
                Some("REMOVE") => {
                    for w in words {
                        let i: Instruction =
                            w.parse().map_err(|e: IsaError| perr(e.to_string()))?;
                        table.active = table.active.without(i);
                    }
                }
                Some(other) => return Err(perr(format!("unknown directive `{other}`"))),
                None => {}
            }
        }
        Ok(table)
    }

    /// Parses an instruction-set file on top of the shipped rules: its
    /// `REMOVE` lines define the active set, its `LOWER` lines override.
    pub fn parse_over_shipped(text: &str) -> Result<Self, IsaError> {
        let user = Self::parse(text)?;
        let mut table = Self::shipped().with_active_set(user.active);
        table.entries.extend(user.entries);
        table.validate()?;
        Ok(table)
    }

    /// Checks that every removed instruction lowers to a terminating sequence.
    pub fn validate(&self) -> Result<(), IsaError> {
        for i in Instruction::ALL {
            if !self.active.contains(i) {
                self.lower(i)?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let removed: Vec<_> = Instruction::ALL
            .into_iter()
            .filter(|i| !self.active.contains(*i))
            .map(|i| i.mnemonic())
            .collect();
        if !removed.is_empty() {
            out.push_str("REMOVE ");
            out.push_str(&removed.join(" "));
            out.push('\n');
        }
        for (k, v) in &self.entries {
            out.push_str("LOWER ");
            out.push_str(k.mnemonic());
            out.push_str(" =");
            for i in v {
                out.push(' ');
                out.push_str(i.mnemonic());
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn strip_comment(line: &str) -> &str {
    let cut = line.find(['#', ';']).unwrap_or(line.len());
    &line[..cut]
}

#[cfg(test)]
mod tests {
    use super::*;
    use Instruction::*;

    #[test]
    fn forty_one_instructions_in_table_order() {
        assert_eq!(Instruction::ALL.len(), 41);
        assert_eq!(Instruction::ALL[0], NopReal);
        assert_eq!(Instruction::ALL[40], CallApiLoadLibrary);
        for (n, i) in Instruction::ALL.iter().enumerate() {
            assert_eq!(i.index(), n);
            assert_eq!(Instruction::from_mnemonic(i.mnemonic()), Some(*i));
        }
        assert_eq!(ORIGINAL_ENTRY_COUNT, 43);
    }

    #[test]
    fn category_examples() {
        assert_eq!(category(Push), DangerCategory::Dangerous);
        assert_eq!(category(Save), DangerCategory::SemiHarmless);
        assert_eq!(category(Add0040), DangerCategory::AddFamily);
        assert_eq!(category(Sub0001), DangerCategory::AddFamily);
        assert_eq!(category(Zer0), DangerCategory::Harmless);
    }

    #[test]
    fn category_partition_sizes() {
        let count = |c| {
            Instruction::ALL
                .iter()
                .filter(|i| category(**i) == c)
                .count()
        };
        assert_eq!(count(DangerCategory::Dangerous), 13);
        assert_eq!(count(DangerCategory::SemiHarmless), 6);
        assert_eq!(count(DangerCategory::AddFamily), 9);
        assert_eq!(count(DangerCategory::Harmless), 13);
    }

    #[test]
    fn effect_examples() {
        let e = effect_descriptor(GetEip);
        assert_eq!(e.writes, RegSet::of(&[Reg::Bc1]));
        assert_eq!(e.reads, RegSet::of(&[Reg::Ip]));
        let e = effect_descriptor(NopReal);
        assert!(e.reads.is_empty() && e.writes.is_empty());
        let e = effect_descriptor(Div);
        assert_eq!(e.writes, RegSet::of(&[Reg::RegA, Reg::RegD]));
        assert_eq!(e.reads, RegSet::of(&[Reg::RegA, Reg::RegD, Reg::Bc1]));
    }

    #[test]
    fn lowering_examples() {
        let t = LoweringTable::shipped();
        assert_eq!(t.lower(NopsA).unwrap(), vec![NopsA]);
        let t = t.with_active_set(InstructionSet::FULL.without(Zer0));
        assert_eq!(t.lower(Zer0).unwrap(), vec![Save, Xor]);
        let t = LoweringTable::shipped().with_active_set(InstructionSet::FULL.without(AddSaved));
        assert_eq!(
            t.lower(AddSaved).unwrap(),
            vec![Push, Zer0, SubSaved, Save, Pop, SubSaved]
        );
    }

    #[test]
    fn missing_and_cyclic_lowering() {
        let t = LoweringTable::new(InstructionSet::FULL.without(Mul));
        assert_eq!(t.lower(Mul), Err(IsaError::MissingLowering(Mul)));
        let mut t = LoweringTable::new(InstructionSet::FULL.without(Xor).without(And));
        t.insert(Xor, vec![And]);
        t.insert(And, vec![Xor]);
        assert_eq!(t.lower(Xor), Err(IsaError::CyclicLowering(Xor)));
    }

    #[test]
    fn shipped_entries_cover_the_ablations() {
        let t = LoweringTable::shipped();
        for i in [Zer0, SubSaved, AddSaved, Add0001] {
            assert!(t.entry(i).is_some(), "{i}");
        }
        for (i, _) in ADD_LADDER {
            assert!(t.entry(i).is_some(), "{i}");
        }
        // every single removal and the whole add ladder removed together
        for (removed, _) in t.entries() {
            let s = t
                .clone()
                .with_active_set(InstructionSet::FULL.without(removed));
            let out = s.lower(removed).unwrap();
            assert!(out.iter().all(|i| s.active_set().contains(*i)));
        }
        let no_adds = ADD_LADDER[..7]
            .iter()
            .fold(InstructionSet::FULL, |s, (i, _)| s.without(*i));
        let s = t.clone().with_active_set(no_adds);
        s.validate().unwrap();
        let all_gone = no_adds.without(Add0001);
        t.with_active_set(all_gone).validate().unwrap();
    }

    #[test]
    fn text_format_round_trip() {
        let t = LoweringTable::shipped().with_active_set(InstructionSet::FULL.without(Zer0));
        let back = LoweringTable::parse(&t.to_text()).unwrap();
        assert_eq!(back, t);
        assert!(matches!(
            LoweringTable::parse("LOWER zer0 save xor"),
            Err(IsaError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            LoweringTable::parse("LOWER frob = save"),
            Err(IsaError::Parse { .. })
        ));
    }
}
