//! ISO 11172-2 Huffman tables.
//!
//! The two large tables (DCT coefficients, macroblock address increment) are
//! stored as binary-tree pair arrays: node `k` occupies entries `2k` and
//! `2k+1`; an entry `(next, _)` with `next > 0` points at child node
//! `next/2`, `(0, v)` is a leaf with value `v`, and `(-1, _)` marks an
//! invalid prefix. The small tables are flat `(len, code, value)` lists used
//! for both decoding and encoding; the forge derives encode maps for the
//! tree tables by walking them.

use crate::bitio::BitCursor;
use crate::error::{Error, Result};
use std::collections::HashMap;
use std::sync::OnceLock;

pub const ESCAPE: u16 = 0xffff;
pub const MB_STUFFING: u16 = 34;
pub const MB_ESCAPE: u16 = 35;

/// Decode one codeword from a tree table.
pub fn decode_tree(c: &mut BitCursor, table: &[(i16, u16)], expected: &'static str) -> Result<u16> {
    let start = c.pos();
    let mut state: (i16, u16) = (0, 0);
    loop {
        let bit = c.read_bits(1).map_err(|_| Error::SyntaxError {
            bit_offset: start,
            expected,
        })?;
        state = table[(state.0 + bit as i16) as usize];
        if state.0 == -1 {
            return Err(Error::SyntaxError {
                bit_offset: start,
                expected,
            });
        }
        if state.0 == 0 {
            return Ok(state.1);
        }
    }
}

/// Decode one codeword from a flat `(len, code, value)` list.
pub fn decode_flat(c: &mut BitCursor, table: &[(u8, u16, u16)], expected: &'static str) -> Result<u16> {
    let start = c.pos();
    let max_len = table.iter().map(|e| e.0).max().unwrap();
    let mut acc: u16 = 0;
    for len in 1..=max_len {
        let bit = c.read_bits(1).map_err(|_| Error::SyntaxError {
            bit_offset: start,
            expected,
        })?;
        acc = (acc << 1) | bit as u16;
        for &(l, code, v) in table {
            if l == len && code == acc {
                return Ok(v);
            }
        }
    }
    Err(Error::SyntaxError {
        bit_offset: start,
        expected,
    })
}

/// Look up the `(code, len)` for a value in a flat table.
pub fn encode_flat(table: &[(u8, u16, u16)], value: u16) -> Option<(u16, u8)> {
    table
        .iter()
        .find(|&&(_, _, v)| v == value)
        .map(|&(l, code, _)| (code, l))
}

/// Derive a value -> (code, len) map from a tree table.
fn tree_encode_map(table: &[(i16, u16)]) -> HashMap<u16, (u32, u8)> {
    let mut map = HashMap::new();
    let mut stack: Vec<(usize, u32, u8)> = vec![(0, 0, 0)];
    while let Some((node, code, len)) = stack.pop() {
        for bit in 0..2u32 {
            let (next, v) = table[node * 2 + bit as usize];
            let code = (code << 1) | bit;
            match next {
                -1 => {}
                0 => {
                    if v != ESCAPE {
                        map.insert(v, (code, len + 1));
                    }
                }
                n => stack.push(((n >> 1) as usize, code, len + 1)),
            }
        }
    }
    map
}

pub fn dct_coeff_encode_map() -> &'static HashMap<u16, (u32, u8)> {
    static MAP: OnceLock<HashMap<u16, (u32, u8)>> = OnceLock::new();
    MAP.get_or_init(|| tree_encode_map(&DCT_COEFF))
}

pub fn mb_addr_inc_encode_map() -> &'static HashMap<u16, (u32, u8)> {
    static MAP: OnceLock<HashMap<u16, (u32, u8)>> = OnceLock::new();
    MAP.get_or_init(|| tree_encode_map(&MB_ADDR_INC))
}

/// dct_dc_size_luminance, Table B.5a.
pub const DCT_DC_SIZE_LUMA: [(u8, u16, u16); 9] = [
    (3, 0b100, 0),
    (2, 0b00, 1),
    (2, 0b01, 2),
    (3, 0b101, 3),
    (3, 0b110, 4),
    (4, 0b1110, 5),
    (5, 0b11110, 6),
    (6, 0b111110, 7),
    (7, 0b1111110, 8),
];

/// dct_dc_size_chrominance, Table B.5b.
pub const DCT_DC_SIZE_CHROMA: [(u8, u16, u16); 9] = [
    (2, 0b00, 0),
    (2, 0b01, 1),
    (2, 0b10, 2),
    (3, 0b110, 3),
    (4, 0b1110, 4),
    (5, 0b11110, 5),
    (6, 0b111110, 6),
    (7, 0b1111110, 7),
    (8, 0b11111110, 8),
];

/// macroblock_type for I-pictures, Table B.2a.
/// Flag bits: 0x10 quant, 0x08 motion_forward, 0x04 motion_backward,
/// 0x02 pattern, 0x01 intra.
pub const MB_TYPE_I: [(u8, u16, u16); 2] = [(1, 0b1, 0x01), (2, 0b01, 0x11)];

/// macroblock_type for P-pictures, Table B.2b.
pub const MB_TYPE_P: [(u8, u16, u16); 7] = [
    (1, 0b1, 0x0A),
    (2, 0b01, 0x02),
    (3, 0b001, 0x08),
    (5, 0b00011, 0x01),
    (5, 0b00010, 0x1A),
    (5, 0b00001, 0x12),
    (6, 0b000001, 0x11),
];

/// macroblock_type for B-pictures, Table B.2c.
pub const MB_TYPE_B: [(u8, u16, u16); 11] = [
    (2, 0b10, 0x0C),
    (2, 0b11, 0x0E),
    (3, 0b010, 0x04),
    (3, 0b011, 0x06),
    (4, 0b0010, 0x08),
    (4, 0b0011, 0x0A),
    (5, 0b00011, 0x01),
    (5, 0b00010, 0x1E),
    (6, 0b000011, 0x1A),
    (6, 0b000010, 0x16),
    (6, 0b000001, 0x11),
];

/// motion_code magnitudes, Table B.4. The sign bit trails the magnitude code
/// for every nonzero magnitude and is handled by the caller (it is an FLC
/// site).
pub const MOTION_MAGNITUDE: [(u8, u16, u16); 17] = [
    (1, 0b1, 0),
    (2, 0b01, 1),
    (3, 0b001, 2),
    (4, 0b0001, 3),
    (6, 0b000011, 4),
    (7, 0b0000101, 5),
    (7, 0b0000100, 6),
    (7, 0b0000011, 7),
    (9, 0b000001011, 8),
    (9, 0b000001010, 9),
    (9, 0b000001001, 10),
    (10, 0b0000010001, 11),
    (10, 0b0000010000, 12),
    (10, 0b0000001111, 13),
    (10, 0b0000001110, 14),
    (10, 0b0000001101, 15),
    (10, 0b0000001100, 16),
];

/// coded_block_pattern, Table B.3.
pub const CODED_BLOCK_PATTERN: [(u8, u16, u16); 63] = [
    (3, 0b111, 60),
    (4, 0b1101, 4),
    (4, 0b1100, 8),
    (4, 0b1011, 16),
    (4, 0b1010, 32),
    (5, 0b10011, 12),
    (5, 0b10010, 48),
    (5, 0b10001, 20),
    (5, 0b10000, 40),
    (5, 0b01111, 28),
    (5, 0b01110, 44),
    (5, 0b01101, 52),
    (5, 0b01100, 56),
    (5, 0b01011, 1),
    (5, 0b01010, 61),
    (5, 0b01001, 2),
    (5, 0b01000, 62),
    (6, 0b001111, 24),
    (6, 0b001110, 36),
    (6, 0b001101, 3),
    (6, 0b001100, 63),
    (7, 0b0010111, 5),
    (7, 0b0010110, 9),
    (7, 0b0010101, 17),
    (7, 0b0010100, 33),
    (7, 0b0010011, 6),
    (7, 0b0010010, 10),
    (7, 0b0010001, 18),
    (7, 0b0010000, 34),
    (8, 0b00011111, 7),
    (8, 0b00011110, 11),
    (8, 0b00011101, 19),
    (8, 0b00011100, 35),
    (8, 0b00011011, 13),
    (8, 0b00011010, 49),
    (8, 0b00011001, 21),
    (8, 0b00011000, 41),
    (8, 0b00010111, 14),
    (8, 0b00010110, 50),
    (8, 0b00010101, 22),
    (8, 0b00010100, 42),
    (8, 0b00010011, 15),
    (8, 0b00010010, 51),
    (8, 0b00010001, 23),
    (8, 0b00010000, 43),
    (8, 0b00001111, 25),
    (8, 0b00001110, 37),
    (8, 0b00001101, 26),
    (8, 0b00001100, 38),
    (8, 0b00001011, 29),
    (8, 0b00001010, 45),
    (8, 0b00001001, 53),
    (8, 0b00001000, 57),
    (8, 0b00000111, 30),
    (8, 0b00000110, 46),
    (8, 0b00000101, 54),
    (8, 0b00000100, 58),
    (9, 0b000000111, 31),
    (9, 0b000000110, 47),
    (9, 0b000000101, 55),
    (9, 0b000000100, 59),
    (9, 0b000000011, 27),
    (9, 0b000000010, 39),
];

/// macroblock_address_increment, Table B.1. Values 1..=33 plus
/// 34 = stuffing code, 35 = escape code.
pub const MB_ADDR_INC: [(i16, u16); 80] = [
    (1 << 1, 0), (0, 1),        //  0: x
    (2 << 1, 0), (3 << 1, 0),   //  1: 0x
    (4 << 1, 0), (5 << 1, 0),   //  2: 00x
    (0, 3), (0, 2),             //  3: 01x
    (6 << 1, 0), (7 << 1, 0),   //  4: 000x
    (0, 5), (0, 4),             //  5: 001x
    (8 << 1, 0), (9 << 1, 0),   //  6: 0000x
    (0, 7), (0, 6),             //  7: 0001x
    (10 << 1, 0), (11 << 1, 0), //  8: 0000 0x
    (12 << 1, 0), (13 << 1, 0), //  9: 0000 1x
    (14 << 1, 0), (15 << 1, 0), // 10: 0000 00x
    (16 << 1, 0), (17 << 1, 0), // 11: 0000 01x
    (18 << 1, 0), (19 << 1, 0), // 12: 0000 10x
    (0, 9), (0, 8),             // 13: 0000 11x
    (-1, 0), (20 << 1, 0),      // 14: 0000 000x
    (-1, 0), (21 << 1, 0),      // 15: 0000 001x
    (22 << 1, 0), (23 << 1, 0), // 16: 0000 010x
    (0, 15), (0, 14),           // 17: 0000 011x
    (0, 13), (0, 12),           // 18: 0000 100x
    (0, 11), (0, 10),           // 19: 0000 101x
    (24 << 1, 0), (25 << 1, 0), // 20: 0000 0001x
    (26 << 1, 0), (27 << 1, 0), // 21: 0000 0011x
    (28 << 1, 0), (29 << 1, 0), // 22: 0000 0100x
    (30 << 1, 0), (31 << 1, 0), // 23: 0000 0101x
    (32 << 1, 0), (-1, 0),      // 24: 0000 0001 0x
    (-1, 0), (33 << 1, 0),      // 25: 0000 0001 1x
    (34 << 1, 0), (35 << 1, 0), // 26: 0000 0011 0x
    (36 << 1, 0), (37 << 1, 0), // 27: 0000 0011 1x
    (38 << 1, 0), (39 << 1, 0), // 28: 0000 0100 0x
    (0, 21), (0, 20),           // 29: 0000 0100 1x
    (0, 19), (0, 18),           // 30: 0000 0101 0x
    (0, 17), (0, 16),           // 31: 0000 0101 1x
    (0, MB_ESCAPE), (-1, 0),    // 32: 0000 0001 00x
    (-1, 0), (0, MB_STUFFING),  // 33: 0000 0001 11x
    (0, 33), (0, 32),           // 34: 0000 0011 00x
    (0, 31), (0, 30),           // 35: 0000 0011 01x
    (0, 29), (0, 28),           // 36: 0000 0011 10x
    (0, 27), (0, 26),           // 37: 0000 0011 11x
    (0, 25), (0, 24),           // 38: 0000 0100 00x
    (0, 23), (0, 22),           // 39: 0000 0100 01x
];

/// dct_coeff run/level codes, Tables B.5c--B.5f. Leaf values pack
/// `(run << 8) | level_magnitude`; `0xffff` is the 6-bit ESCAPE prefix.
/// The sign bit trailing each non-escape code is read by the caller.
/// Code "1" decodes to run 0 / level 1; at non-first positions the caller
/// reads one extra bit to distinguish EOB ("10") from run 0 / level 1
/// ("11" + sign).
pub const DCT_COEFF: [(i16, u16); 224] = [
    (1 << 1, 0), (0, 0x0001),       //   0: x
    (2 << 1, 0), (3 << 1, 0),       //   1: 0x
    (4 << 1, 0), (5 << 1, 0),       //   2: 00x
    (6 << 1, 0), (0, 0x0101),       //   3: 01x
    (7 << 1, 0), (8 << 1, 0),       //   4: 000x
    (9 << 1, 0), (10 << 1, 0),      //   5: 001x
    (0, 0x0002), (0, 0x0201),       //   6: 010x
    (11 << 1, 0), (12 << 1, 0),     //   7: 0000x
    (13 << 1, 0), (14 << 1, 0),     //   8: 0001x
    (15 << 1, 0), (0, 0x0003),      //   9: 0010x
    (0, 0x0401), (0, 0x0301),       //  10: 0011x
    (16 << 1, 0), (0, ESCAPE),      //  11: 0000 0x
    (17 << 1, 0), (18 << 1, 0),     //  12: 0000 1x
    (0, 0x0701), (0, 0x0601),       //  13: 0001 0x
    (0, 0x0102), (0, 0x0501),       //  14: 0001 1x
    (19 << 1, 0), (20 << 1, 0),     //  15: 0010 0x
    (21 << 1, 0), (22 << 1, 0),     //  16: 0000 00x
    (0, 0x0202), (0, 0x0901),       //  17: 0000 10x
    (0, 0x0004), (0, 0x0801),       //  18: 0000 11x
    (23 << 1, 0), (24 << 1, 0),     //  19: 0010 00x
    (25 << 1, 0), (26 << 1, 0),     //  20: 0010 01x
    (27 << 1, 0), (28 << 1, 0),     //  21: 0000 000x
    (29 << 1, 0), (30 << 1, 0),     //  22: 0000 001x
    (0, 0x0d01), (0, 0x0006),       //  23: 0010 000x
    (0, 0x0c01), (0, 0x0b01),       //  24: 0010 001x
    (0, 0x0302), (0, 0x0103),       //  25: 0010 010x
    (0, 0x0005), (0, 0x0a01),       //  26: 0010 011x
    (31 << 1, 0), (32 << 1, 0),     //  27: 0000 0000x
    (33 << 1, 0), (34 << 1, 0),     //  28: 0000 0001x
    (35 << 1, 0), (36 << 1, 0),     //  29: 0000 0010x
    (37 << 1, 0), (38 << 1, 0),     //  30: 0000 0011x
    (39 << 1, 0), (40 << 1, 0),     //  31: 0000 0000 0x
    (41 << 1, 0), (42 << 1, 0),     //  32: 0000 0000 1x
    (43 << 1, 0), (44 << 1, 0),     //  33: 0000 0001 0x
    (45 << 1, 0), (46 << 1, 0),     //  34: 0000 0001 1x
    (0, 0x1001), (0, 0x0502),       //  35: 0000 0010 0x
    (0, 0x0007), (0, 0x0203),       //  36: 0000 0010 1x
    (0, 0x0104), (0, 0x0f01),       //  37: 0000 0011 0x
    (0, 0x0e01), (0, 0x0402),       //  38: 0000 0011 1x
    (47 << 1, 0), (48 << 1, 0),     //  39: 0000 0000 00x
    (49 << 1, 0), (50 << 1, 0),     //  40: 0000 0000 01x
    (51 << 1, 0), (52 << 1, 0),     //  41: 0000 0000 10x
    (53 << 1, 0), (54 << 1, 0),     //  42: 0000 0000 11x
    (55 << 1, 0), (56 << 1, 0),     //  43: 0000 0001 00x
    (57 << 1, 0), (58 << 1, 0),     //  44: 0000 0001 01x
    (59 << 1, 0), (60 << 1, 0),     //  45: 0000 0001 10x
    (61 << 1, 0), (62 << 1, 0),     //  46: 0000 0001 11x
    (-1, 0), (63 << 1, 0),          //  47: 0000 0000 000x
    (64 << 1, 0), (65 << 1, 0),     //  48: 0000 0000 001x
    (66 << 1, 0), (67 << 1, 0),     //  49: 0000 0000 010x
    (68 << 1, 0), (69 << 1, 0),     //  50: 0000 0000 011x
    (70 << 1, 0), (71 << 1, 0),     //  51: 0000 0000 100x
    (72 << 1, 0), (73 << 1, 0),     //  52: 0000 0000 101x
    (74 << 1, 0), (75 << 1, 0),     //  53: 0000 0000 110x
    (76 << 1, 0), (77 << 1, 0),     //  54: 0000 0000 111x
    (0, 0x000b), (0, 0x0802),       //  55: 0000 0001 000x
    (0, 0x0403), (0, 0x000a),       //  56: 0000 0001 001x
    (0, 0x0204), (0, 0x0702),       //  57: 0000 0001 010x
    (0, 0x1501), (0, 0x1401),       //  58: 0000 0001 011x
    (0, 0x0009), (0, 0x1301),       //  59: 0000 0001 100x
    (0, 0x1201), (0, 0x0105),       //  60: 0000 0001 101x
    (0, 0x0303), (0, 0x0008),       //  61: 0000 0001 110x
    (0, 0x0602), (0, 0x1101),       //  62: 0000 0001 111x
    (78 << 1, 0), (79 << 1, 0),     //  63: 0000 0000 0001x
    (80 << 1, 0), (81 << 1, 0),     //  64: 0000 0000 0010x
    (82 << 1, 0), (83 << 1, 0),     //  65: 0000 0000 0011x
    (84 << 1, 0), (85 << 1, 0),     //  66: 0000 0000 0100x
    (86 << 1, 0), (87 << 1, 0),     //  67: 0000 0000 0101x
    (88 << 1, 0), (89 << 1, 0),     //  68: 0000 0000 0110x
    (90 << 1, 0), (91 << 1, 0),     //  69: 0000 0000 0111x
    (0, 0x0a02), (0, 0x0902),       //  70: 0000 0000 1000x
    (0, 0x0503), (0, 0x0304),       //  71: 0000 0000 1001x
    (0, 0x0205), (0, 0x0107),       //  72: 0000 0000 1010x
    (0, 0x0106), (0, 0x000f),       //  73: 0000 0000 1011x
    (0, 0x000e), (0, 0x000d),       //  74: 0000 0000 1100x
    (0, 0x000c), (0, 0x1a01),       //  75: 0000 0000 1101x
    (0, 0x1901), (0, 0x1801),       //  76: 0000 0000 1110x
    (0, 0x1701), (0, 0x1601),       //  77: 0000 0000 1111x
    (92 << 1, 0), (93 << 1, 0),     //  78: 0000 0000 0001 0x
    (94 << 1, 0), (95 << 1, 0),     //  79: 0000 0000 0001 1x
    (96 << 1, 0), (97 << 1, 0),     //  80: 0000 0000 0010 0x
    (98 << 1, 0), (99 << 1, 0),     //  81: 0000 0000 0010 1x
    (100 << 1, 0), (101 << 1, 0),   //  82: 0000 0000 0011 0x
    (102 << 1, 0), (103 << 1, 0),   //  83: 0000 0000 0011 1x
    (0, 0x001f), (0, 0x001e),       //  84: 0000 0000 0100 0x
    (0, 0x001d), (0, 0x001c),       //  85: 0000 0000 0100 1x
    (0, 0x001b), (0, 0x001a),       //  86: 0000 0000 0101 0x
    (0, 0x0019), (0, 0x0018),       //  87: 0000 0000 0101 1x
    (0, 0x0017), (0, 0x0016),       //  88: 0000 0000 0110 0x
    (0, 0x0015), (0, 0x0014),       //  89: 0000 0000 0110 1x
    (0, 0x0013), (0, 0x0012),       //  90: 0000 0000 0111 0x
    (0, 0x0011), (0, 0x0010),       //  91: 0000 0000 0111 1x
    (104 << 1, 0), (105 << 1, 0),   //  92: 0000 0000 0001 00x
    (106 << 1, 0), (107 << 1, 0),   //  93: 0000 0000 0001 01x
    (108 << 1, 0), (109 << 1, 0),   //  94: 0000 0000 0001 10x
    (110 << 1, 0), (111 << 1, 0),   //  95: 0000 0000 0001 11x
    (0, 0x0028), (0, 0x0027),       //  96: 0000 0000 0010 00x
    (0, 0x0026), (0, 0x0025),       //  97: 0000 0000 0010 01x
    (0, 0x0024), (0, 0x0023),       //  98: 0000 0000 0010 10x
    (0, 0x0022), (0, 0x0021),       //  99: 0000 0000 0010 11x
    (0, 0x0020), (0, 0x010e),       // 100: 0000 0000 0011 00x
    (0, 0x010d), (0, 0x010c),       // 101: 0000 0000 0011 01x
    (0, 0x010b), (0, 0x010a),       // 102: 0000 0000 0011 10x
    (0, 0x0109), (0, 0x0108),       // 103: 0000 0000 0011 11x
    (0, 0x0112), (0, 0x0111),       // 104: 0000 0000 0001 000x
    (0, 0x0110), (0, 0x010f),       // 105: 0000 0000 0001 001x
    (0, 0x0603), (0, 0x1002),       // 106: 0000 0000 0001 010x
    (0, 0x0f02), (0, 0x0e02),       // 107: 0000 0000 0001 011x
    (0, 0x0d02), (0, 0x0c02),       // 108: 0000 0000 0001 100x
    (0, 0x0b02), (0, 0x1f01),       // 109: 0000 0000 0001 101x
    (0, 0x1e01), (0, 0x1d01),       // 110: 0000 0000 0001 110x
    (0, 0x1c01), (0, 0x1b01),       // 111: 0000 0000 0001 111x
];

/// Default intra quantizer matrix (zig-zag independent, row-major).
pub const DEFAULT_INTRA_QUANT: [u8; 64] = [
    8, 16, 19, 22, 26, 27, 29, 34,
    16, 16, 22, 24, 27, 29, 34, 37,
    19, 22, 26, 27, 29, 34, 34, 38,
    22, 22, 26, 27, 29, 34, 37, 40,
    22, 26, 27, 29, 32, 35, 40, 48,
    26, 27, 29, 32, 35, 40, 48, 58,
    26, 27, 29, 34, 38, 46, 56, 69,
    27, 29, 35, 38, 46, 56, 69, 83,
];

/// Zig-zag scan order: zigzag index -> row-major position.
pub const ZIG_ZAG: [u8; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10,
    17, 24, 32, 25, 18, 11, 4, 5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13, 6, 7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63,
];
