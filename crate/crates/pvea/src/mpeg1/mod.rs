//! MPEG-1 video elementary stream syntax: the simplified codec that walks
//! the bitstream down to the block layer, decoding VLCs only far enough to
//! locate and classify every fixed-length codeword (FLC) site.

pub mod parser;
pub mod tables;

pub use parser::{parse_stream, parse_stream_full};

use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Luma,
    Chroma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Horizontal,
    Vertical,
}

/// One located fixed-length codeword kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlcKind {
    /// Differential DC field of an intra block; length = dc_size (1..=8).
    IntraDcDiff { dc_size: u8, component: Component },
    /// Sign bit of a run/level-coded DCT coefficient.
    CoeffSign { intra: bool, is_dc_nonintra: bool },
    /// ESCAPE-coded level field, 8 or 16 bits.
    EscapeLevel { width: u8 },
    /// Trailing sign bit of a nonzero motion_code VLC.
    MvSign { axis: Axis },
    /// motion_residual field, f_code - 1 bits.
    MvResidual { r_size: u8, axis: Axis },
}

impl FlcKind {
    pub fn bit_length(&self) -> u32 {
        match *self {
            FlcKind::IntraDcDiff { dc_size, .. } => dc_size as u32,
            FlcKind::CoeffSign { .. } | FlcKind::MvSign { .. } => 1,
            FlcKind::EscapeLevel { width } => width as u32,
            FlcKind::MvResidual { r_size, .. } => r_size as u32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PictureType {
    I,
    P,
    B,
}

/// One FLC site located in the stream, with its structural coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlcSite {
    pub kind: FlcKind,
    pub bit_offset: u64,
    pub bit_length: u32,
    pub gop_index: usize,
    pub picture_index: usize,
    pub picture_type: PictureType,
    pub slice_index: usize,
    pub macroblock_address: usize,
    pub block_index: Option<u8>,
    /// Whether the containing macroblock is intra-coded (used by the
    /// intra-blocks-only partial-encryption option).
    pub intra_mb: bool,
}

/// Skeleton identity: offset, length and kind, ignoring coordinates.
pub fn site_skeleton(sites: &[FlcSite]) -> Vec<(u64, u32, FlcKind)> {
    sites.iter().map(|s| (s.bit_offset, s.bit_length, s.kind)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceInfo {
    pub width: u16,
    pub height: u16,
    pub mb_width: usize,
    pub mb_height: usize,
    /// Row-major (de-zig-zagged) quantizer matrices.
    pub intra_quant: [u8; 64],
    pub non_intra_quant: [u8; 64],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GopInfo {
    pub start_byte: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PictureInfo {
    pub gop_index: usize,
    pub picture_type: PictureType,
    pub temporal_reference: u16,
    pub start_byte: usize,
    /// Exclusive end: byte offset of the next structural start code.
    pub end_byte: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserDataSegment {
    pub byte_offset: usize,
    pub payload: Vec<u8>,
}

/// Parsed catalog of a stream: every FLC site plus structure and metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamMap {
    pub sequence: SequenceInfo,
    pub sites: Vec<FlcSite>,
    pub gops: Vec<GopInfo>,
    pub pictures: Vec<PictureInfo>,
    pub user_data: Vec<UserDataSegment>,
    pub total_bits: u64,
}

/// Per-block coefficient data kept only when a full parse is requested
/// (needed by the I-picture decoder).
#[derive(Debug, Clone, Default)]
pub struct BlockData {
    pub intra: bool,
    pub dc_size: u8,
    pub dc_diff_bits: u32,
    /// (zig-zag position, signed level) in stream order; DC excluded for
    /// intra blocks.
    pub coeffs: Vec<(u8, i32)>,
}

#[derive(Debug, Clone)]
pub struct MacroblockData {
    pub address: usize,
    pub intra: bool,
    /// Effective quantizer scale at this macroblock.
    pub quantizer_scale: u8,
    pub blocks: [Option<BlockData>; 6],
}

#[derive(Debug, Clone)]
pub struct SliceData {
    pub quantizer_scale: u8,
    pub macroblocks: Vec<MacroblockData>,
}

#[derive(Debug, Clone)]
pub struct PictureData {
    pub picture_type: PictureType,
    pub slices: Vec<SliceData>,
}

/// The factor category a site belongs to (see module `selection` for the
/// kind -> category mapping).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    /// Rough spatial view: intra DC differentials.
    Sr,
    /// Spatial detail: coefficient signs and ESCAPE levels.
    Sd,
    /// Motion: MV signs and residuals.
    Mv,
}

/// Exact FLC counts over a stream map.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Census {
    pub per_kind: BTreeMap<String, usize>,
    pub sr: usize,
    pub sd: usize,
    pub mv: usize,
    /// Total FLC count per picture, indexed by picture_index.
    pub per_picture: Vec<usize>,
}

impl Census {
    pub fn total(&self) -> usize {
        self.sr + self.sd + self.mv
    }
}

pub fn census(map: &StreamMap) -> Census {
    let mut c = Census {
        per_picture: vec![0; map.pictures.len()],
        ..Default::default()
    };
    for site in &map.sites {
        let (name, cat) = kind_name_and_category(&site.kind);
        *c.per_kind.entry(name.to_string()).or_insert(0) += 1;
        match cat {
            Category::Sr => c.sr += 1,
            Category::Sd => c.sd += 1,
            Category::Mv => c.mv += 1,
        }
        if site.picture_index < c.per_picture.len() {
            c.per_picture[site.picture_index] += 1;
        }
    }
    c
}

fn kind_name_and_category(kind: &FlcKind) -> (&'static str, Category) {
    match kind {
        FlcKind::IntraDcDiff { .. } => ("intra_dc_diff", Category::Sr),
        FlcKind::CoeffSign { .. } => ("coeff_sign", Category::Sd),
        FlcKind::EscapeLevel { .. } => ("escape_level", Category::Sd),
        FlcKind::MvSign { .. } => ("mv_sign", Category::Mv),
        FlcKind::MvResidual { .. } => ("mv_residual", Category::Mv),
    }
}
