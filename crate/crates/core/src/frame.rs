//! Time-frequency resource model: numerologies, TTIs, per-slot resource grids,
//! codeblock mapping and URLLC puncturing.
//!
//! A grid cell is one resource block (12 subcarriers) for one OFDM symbol.
//! Symbol durations use the uniform model in which a 15 kHz slot of 14
//! symbols lasts exactly 1 ms with the cyclic prefix folded into each symbol.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Subcarrier spacings of the doubling family, in kHz.
pub const SUPPORTED_SPACINGS_KHZ: [u32; 4] = [15, 30, 60, 120];
pub const SUBCARRIERS_PER_RB: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerology {
    pub subcarrier_spacing_khz: u32,
    #[serde(default = "default_symbols_per_slot")]
    pub symbols_per_slot: u32,
}

fn default_symbols_per_slot() -> u32 {
    14
}

impl Default for Numerology {
    fn default() -> Self {
        Self {
            subcarrier_spacing_khz: 15,
            symbols_per_slot: 14,
        }
    }
}

impl Numerology {
    pub fn new(subcarrier_spacing_khz: u32, symbols_per_slot: u32) -> Result<Self> {
        let n = Self {
            subcarrier_spacing_khz,
            symbols_per_slot,
        };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if !SUPPORTED_SPACINGS_KHZ.contains(&self.subcarrier_spacing_khz) {
            return Err(Error::Config(format!(
                "unsupported subcarrier spacing {} kHz (expected one of {:?})",
                self.subcarrier_spacing_khz, SUPPORTED_SPACINGS_KHZ
            )));
        }
        if self.symbols_per_slot == 0 {
            return Err(Error::Config("symbols_per_slot must be positive".into()));
        }
        Ok(())
    }

    /// Slot length: 1 ms at 15 kHz, halving with each doubling of the spacing.
    pub fn slot_duration_us(&self) -> f64 {
        1000.0 * 15.0 / self.subcarrier_spacing_khz as f64
    }

    pub fn symbol_duration_us(&self) -> f64 {
        self.slot_duration_us() / self.symbols_per_slot as f64
    }

    /// Fraction of the symbol duration not covered by the useful part `1/Δf`.
    pub fn cp_overhead(&self) -> f64 {
        1.0 - (1000.0 / self.subcarrier_spacing_khz as f64) / self.symbol_duration_us()
    }
}

/// Symbol duration in µs; fails on an unsupported spacing.
pub fn symbol_duration(numerology: &Numerology) -> Result<f64> {
    numerology.validate()?;
    Ok(numerology.symbol_duration_us())
}

/// A transmission interval of `n_symbols` OFDM symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TtiSpec {
    pub numerology: Numerology,
    pub n_symbols: u32,
}

impl TtiSpec {
    pub fn new(numerology: Numerology, n_symbols: u32) -> Result<Self> {
        let t = Self { numerology, n_symbols };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        self.numerology.validate()?;
        if self.n_symbols == 0 {
            return Err(Error::Config("a TTI needs at least one symbol".into()));
        }
        Ok(())
    }
}

/// Time-to-transmit of one TTI in µs.
pub fn t_ttt(spec: &TtiSpec) -> Result<f64> {
    spec.validate()?;
    Ok(spec.n_symbols as f64 * spec.numerology.symbol_duration_us())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum CellTag {
    #[default]
    Empty,
    Embb {
        user: u16,
        codeblock: u16,
    },
    Urllc {
        packet: u32,
    },
    Reserved,
    Dmrs,
    Control,
}

/// Cell counts per tag family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TagCounts {
    pub empty: usize,
    pub embb: usize,
    pub urllc: usize,
    pub reserved: usize,
    pub dmrs: usize,
    pub control: usize,
}

impl TagCounts {
    pub fn total(&self) -> usize {
        self.empty + self.embb + self.urllc + self.reserved + self.dmrs + self.control
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub symbol: u16,
    pub rb: u16,
}

impl Cell {
    pub fn new(symbol: usize, rb: usize) -> Self {
        Self {
            symbol: symbol as u16,
            rb: rb as u16,
        }
    }
}

/// Symbol-by-RB occupancy of one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceGrid {
    n_symbols: usize,
    n_rbs: usize,
    cells: Vec<CellTag>,
}

impl ResourceGrid {
    pub fn new(n_symbols: usize, n_rbs: usize) -> Self {
        Self {
            n_symbols,
            n_rbs,
            cells: vec![CellTag::Empty; n_symbols * n_rbs],
        }
    }

    /// Slot with `control_symbols` leading control symbols followed by
    /// `dmrs_symbols` DMRS symbols, all full bandwidth.
    pub fn with_front_loaded_overhead(
        n_symbols: usize,
        n_rbs: usize,
        control_symbols: usize,
        dmrs_symbols: usize,
    ) -> Result<Self> {
        if control_symbols + dmrs_symbols >= n_symbols {
            return Err(Error::Config(format!(
                "{control_symbols} control + {dmrs_symbols} DMRS symbols leave no data in a {n_symbols}-symbol slot"
            )));
        }
        let mut g = Self::new(n_symbols, n_rbs);
        for s in 0..control_symbols {
            g.fill_symbol(s, CellTag::Control);
        }
        for s in control_symbols..control_symbols + dmrs_symbols {
            g.fill_symbol(s, CellTag::Dmrs);
        }
        Ok(g)
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn n_rbs(&self) -> usize {
        self.n_rbs
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    fn idx(&self, c: Cell) -> usize {
        debug_assert!((c.symbol as usize) < self.n_symbols && (c.rb as usize) < self.n_rbs);
        c.symbol as usize * self.n_rbs + c.rb as usize
    }

    pub fn get(&self, c: Cell) -> CellTag {
        self.cells[self.idx(c)]
    }

    pub fn contains(&self, c: Cell) -> bool {
        (c.symbol as usize) < self.n_symbols && (c.rb as usize) < self.n_rbs
    }

    /// Overwrites one cell. Callers are responsible for ownership rules; the
    /// checked entry points are [`ResourceGrid::claim`], [`map_codeblocks`]
    /// and [`puncture`].
    pub fn set(&mut self, c: Cell, tag: CellTag) {
        let i = self.idx(c);
        self.cells[i] = tag;
    }

    /// Tags an empty cell; fails if it is already owned.
    pub fn claim(&mut self, c: Cell, tag: CellTag) -> Result<()> {
        if !self.contains(c) {
            return Err(Error::Scheduling(format!("cell {c:?} outside grid")));
        }
        match self.get(c) {
            CellTag::Empty => {
                self.set(c, tag);
                Ok(())
            }
            other => Err(Error::Scheduling(format!("cell {c:?} already tagged {other:?}"))),
        }
    }

    pub fn fill_symbol(&mut self, symbol: usize, tag: CellTag) {
        for rb in 0..self.n_rbs {
            self.set(Cell::new(symbol, rb), tag);
        }
    }

    pub fn symbol_tags(&self, symbol: usize) -> &[CellTag] {
        &self.cells[symbol * self.n_rbs..(symbol + 1) * self.n_rbs]
    }

    pub fn counts(&self) -> TagCounts {
        let mut t = TagCounts::default();
        for c in &self.cells {
            match c {
                CellTag::Empty => t.empty += 1,
                CellTag::Embb { .. } => t.embb += 1,
                CellTag::Urllc { .. } => t.urllc += 1,
                CellTag::Reserved => t.reserved += 1,
                CellTag::Dmrs => t.dmrs += 1,
                CellTag::Control => t.control += 1,
            }
        }
        t
    }

    /// Empty cells of the given symbols and RBs, frequency-first within a symbol.
    pub fn free_cells(&self, symbols: impl IntoIterator<Item = usize>, rbs: &[usize]) -> Vec<Cell> {
        let mut out = Vec::new();
        for s in symbols {
            for &rb in rbs {
                let c = Cell::new(s, rb);
                if self.get(c) == CellTag::Empty {
                    out.push(c);
                }
            }
        }
        out
    }
}

/// Cells assigned to one codeblock of a transport block, in mapping order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeBlockMap {
    pub transport_block_id: u32,
    pub codeblock_index: u16,
    pub info_bits: usize,
    pub cells: Vec<Cell>,
}

/// How a transport block is segmented and how many information bits one cell carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TbFormat {
    pub user: u16,
    pub transport_block_id: u32,
    /// Information bits carried per cell at the chosen MCS.
    pub bits_per_cell: f64,
    pub max_codeblock_bits: usize,
}

/// Splits `tb_size_bits` into `ceil(tb / max_cb)` near-equal codeblocks.
pub fn segment(tb_size_bits: usize, max_codeblock_bits: usize) -> Vec<usize> {
    if tb_size_bits == 0 {
        return Vec::new();
    }
    let c = tb_size_bits.div_ceil(max_codeblock_bits.max(1));
    (0..c)
        .map(|i| tb_size_bits / c + usize::from(i < tb_size_bits % c))
        .collect()
}

/// Maps a transport block onto `allocation` (already in mapping order) and
/// tags the grid. Codeblocks receive consecutive runs of cells whose lengths
/// are proportional to their sizes, and together they fill the allocation.
pub fn map_codeblocks(
    tb_size_bits: usize,
    grid: &mut ResourceGrid,
    allocation: &[Cell],
    format: &TbFormat,
) -> Result<Vec<CodeBlockMap>> {
    if tb_size_bits == 0 {
        return Ok(Vec::new());
    }
    if format.bits_per_cell <= 0.0 {
        return Err(Error::Config("bits_per_cell must be positive".into()));
    }
    let needed = (tb_size_bits as f64 / format.bits_per_cell).ceil() as usize;
    if allocation.len() < needed {
        return Err(Error::Scheduling(format!(
            "transport block of {tb_size_bits} bits needs {needed} cells, allocation has {}",
            allocation.len()
        )));
    }
    if let Some(c) = allocation.iter().find(|&&c| !grid.contains(c) || grid.get(c) != CellTag::Empty) {
        return Err(Error::Scheduling(format!("allocation cell {c:?} is not free")));
    }
    let sizes = segment(tb_size_bits, format.max_codeblock_bits);
    let total = allocation.len();
    let mut maps = Vec::with_capacity(sizes.len());
    let mut cum = 0usize;
    let mut start = 0usize;
    for (i, &bits) in sizes.iter().enumerate() {
        cum += bits;
        // Rounded cumulative boundary keeps shares proportional and exhaustive.
        let end = (total * cum + tb_size_bits / 2) / tb_size_bits;
        let cells = allocation[start..end].to_vec();
        for &c in &cells {
            grid.set(
                c,
                CellTag::Embb {
                    user: format.user,
                    codeblock: i as u16,
                },
            );
        }
        maps.push(CodeBlockMap {
            transport_block_id: format.transport_block_id,
            codeblock_index: i as u16,
            info_bits: bits,
            cells,
        });
        start = end;
    }
    Ok(maps)
}

/// Prior owners of punctured cells, enough to undo a puncture.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PunctureMask {
    pub entries: Vec<(Cell, CellTag)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PunctureOutcome {
    pub mask: PunctureMask,
    /// `(user, codeblock)` pairs that lost at least one cell.
    pub affected: BTreeSet<(u16, u16)>,
}

/// Overwrites every cell of `urllc_symbols` with the URLLC packet. Reserved
/// and empty cells are taken silently; control and DMRS cells are rejected
/// and leave the grid untouched.
pub fn puncture(grid: &mut ResourceGrid, urllc_symbols: &[usize], packet: u32) -> Result<PunctureOutcome> {
    for &s in urllc_symbols {
        if s >= grid.n_symbols() {
            return Err(Error::Scheduling(format!(
                "symbol {s} outside {}-symbol slot",
                grid.n_symbols()
            )));
        }
        if grid
            .symbol_tags(s)
            .iter()
            .any(|t| matches!(t, CellTag::Control | CellTag::Dmrs))
        {
            return Err(Error::Scheduling(format!("symbol {s} carries control or DMRS")));
        }
    }
    let before = grid.counts().total();
    let mut out = PunctureOutcome::default();
    for &s in urllc_symbols {
        for rb in 0..grid.n_rbs() {
            let c = Cell::new(s, rb);
            let prior = grid.get(c);
            if let CellTag::Urllc { .. } = prior {
                continue;
            }
            if let CellTag::Embb { user, codeblock } = prior {
                out.affected.insert((user, codeblock));
            }
            out.mask.entries.push((c, prior));
            grid.set(c, CellTag::Urllc { packet });
        }
    }
    debug_assert_eq!(before, grid.counts().total());
    Ok(out)
}

/// Restores the cells recorded in `mask`.
pub fn unpuncture(grid: &mut ResourceGrid, mask: &PunctureMask) {
    for &(c, tag) in mask.entries.iter().rev() {
        grid.set(c, tag);
    }
}
