//! MPEG-1 elementary stream parser. Walks the full syntax down to the block
//! layer and records every FLC site. Never reconstructs pixels.

use super::tables::*;
use super::*;
use crate::bitio::BitCursor;
use crate::error::{Error, Result};

pub const START_SEQUENCE: u8 = 0xB3;
pub const START_GOP: u8 = 0xB8;
pub const START_PICTURE: u8 = 0x00;
pub const START_USER_DATA: u8 = 0xB2;
pub const START_EXTENSION: u8 = 0xB5;
pub const START_SEQUENCE_END: u8 = 0xB7;

pub fn is_slice_code(code: u8) -> bool {
    (0x01..=0xAF).contains(&code)
}

/// Parse a stream and return its site catalog.
pub fn parse_stream(bytes: &[u8]) -> Result<StreamMap> {
    Ok(parse_inner(bytes, false)?.0)
}

/// Parse a stream keeping per-block coefficient data (for the I-picture
/// decoder).
pub fn parse_stream_full(bytes: &[u8]) -> Result<(StreamMap, Vec<PictureData>)> {
    parse_inner(bytes, true)
}

struct PictureCtx {
    picture_type: PictureType,
    forward_f: u8,
    backward_f: u8,
}

struct Parser<'a> {
    bytes: &'a [u8],
    map: StreamMap,
    collect: bool,
    data: Vec<PictureData>,
    gop_count: usize,
    picture: Option<PictureCtx>,
    slice_count_in_picture: usize,
}

fn parse_inner(bytes: &[u8], collect: bool) -> Result<(StreamMap, Vec<PictureData>)> {
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 || bytes[2] != 1 || bytes[3] != START_SEQUENCE {
        return Err(Error::SyntaxError {
            bit_offset: 0,
            expected: "sequence_header start code",
        });
    }
    let mut p = Parser {
        bytes,
        map: StreamMap {
            sequence: SequenceInfo {
                width: 0,
                height: 0,
                mb_width: 0,
                mb_height: 0,
                intra_quant: [0; 64],
                non_intra_quant: [0; 64],
            },
            sites: Vec::new(),
            gops: Vec::new(),
            pictures: Vec::new(),
            user_data: Vec::new(),
            total_bits: bytes.len() as u64 * 8,
        },
        collect,
        data: Vec::new(),
        gop_count: 0,
        picture: None,
        slice_count_in_picture: 0,
    };
    p.run()?;
    Ok((p.map, p.data))
}

impl<'a> Parser<'a> {
    fn run(&mut self) -> Result<()> {
        let mut c = BitCursor::new(self.bytes);
        c.seek(32); // past the sequence header start code
        self.parse_sequence_header(&mut c)?;
        loop {
            let Some((code, byte_offset)) = c.next_start_code() else {
                break;
            };
            match code {
                START_SEQUENCE => {
                    self.close_picture(byte_offset);
                    self.parse_sequence_header(&mut c)?;
                }
                START_GOP => {
                    self.close_picture(byte_offset);
                    self.parse_gop(&mut c, byte_offset)?;
                }
                START_PICTURE => {
                    self.close_picture(byte_offset);
                    self.parse_picture_header(&mut c, byte_offset)?;
                }
                START_USER_DATA => {
                    self.parse_user_data(&mut c, byte_offset);
                }
                START_SEQUENCE_END => {
                    self.close_picture(byte_offset);
                    break;
                }
                START_EXTENSION => {
                    return Err(Error::UnsupportedStream("extension start code (MPEG-2 construct)"));
                }
                s if is_slice_code(s) => {
                    self.parse_slice(&mut c, s)?;
                }
                _ => {
                    return Err(Error::SyntaxError {
                        bit_offset: byte_offset as u64 * 8,
                        expected: "structural start code",
                    });
                }
            }
        }
        self.close_picture(self.bytes.len());
        Ok(())
    }

    fn close_picture(&mut self, end_byte: usize) {
        if let Some(pic) = self.map.pictures.last_mut() {
            if pic.end_byte == 0 {
                pic.end_byte = end_byte;
            }
        }
        self.picture = None;
    }

    fn parse_sequence_header(&mut self, c: &mut BitCursor) -> Result<()> {
        let at = c.pos();
        let width = c.read_bits(12)? as u16;
        let height = c.read_bits(12)? as u16;
        if width == 0 || height == 0 {
            return Err(Error::SyntaxError {
                bit_offset: at,
                expected: "nonzero horizontal_size and vertical_size",
            });
        }
        let _aspect = c.read_bits(4)?;
        let _rate = c.read_bits(4)?;
        let _bit_rate = c.read_bits(18)?;
        if c.read_bits(1)? != 1 {
            return Err(Error::SyntaxError {
                bit_offset: c.pos() - 1,
                expected: "marker bit after bit_rate",
            });
        }
        let _vbv = c.read_bits(10)?;
        let _constrained = c.read_bits(1)?;
        let mut intra = DEFAULT_INTRA_QUANT;
        if c.read_bits(1)? == 1 {
            for i in 0..64 {
                let v = c.read_bits(8)? as u8;
                if v == 0 {
                    return Err(Error::SyntaxError {
                        bit_offset: c.pos() - 8,
                        expected: "nonzero quantizer matrix entry",
                    });
                }
                intra[ZIG_ZAG[i] as usize] = v;
            }
        }
        let mut non_intra = [16u8; 64];
        if c.read_bits(1)? == 1 {
            for i in 0..64 {
                let v = c.read_bits(8)? as u8;
                if v == 0 {
                    return Err(Error::SyntaxError {
                        bit_offset: c.pos() - 8,
                        expected: "nonzero quantizer matrix entry",
                    });
                }
                non_intra[ZIG_ZAG[i] as usize] = v;
            }
        }
        self.map.sequence = SequenceInfo {
            width,
            height,
            mb_width: (width as usize + 15) / 16,
            mb_height: (height as usize + 15) / 16,
            intra_quant: intra,
            non_intra_quant: non_intra,
        };
        Ok(())
    }

    fn parse_gop(&mut self, c: &mut BitCursor, byte_offset: usize) -> Result<()> {
        let _time_code = c.read_bits(25)?;
        let _closed = c.read_bits(1)?;
        let _broken = c.read_bits(1)?;
        self.map.gops.push(GopInfo { start_byte: byte_offset });
        self.gop_count += 1;
        Ok(())
    }

    fn parse_picture_header(&mut self, c: &mut BitCursor, byte_offset: usize) -> Result<()> {
        let temporal_reference = c.read_bits(10)? as u16;
        let type_code = c.read_bits(3)?;
        let picture_type = match type_code {
            1 => PictureType::I,
            2 => PictureType::P,
            3 => PictureType::B,
            4 => return Err(Error::UnsupportedStream("D-picture")),
            _ => {
                return Err(Error::SyntaxError {
                    bit_offset: c.pos() - 3,
                    expected: "picture_coding_type in 1..=3",
                })
            }
        };
        let _vbv_delay = c.read_bits(16)?;
        let mut forward_f = 1u8;
        let mut backward_f = 1u8;
        if picture_type != PictureType::I {
            let _full_pel_fwd = c.read_bits(1)?;
            forward_f = c.read_bits(3)? as u8;
            if forward_f == 0 {
                return Err(Error::SyntaxError {
                    bit_offset: c.pos() - 3,
                    expected: "forward_f_code in 1..=7",
                });
            }
        }
        if picture_type == PictureType::B {
            let _full_pel_bwd = c.read_bits(1)?;
            backward_f = c.read_bits(3)? as u8;
            if backward_f == 0 {
                return Err(Error::SyntaxError {
                    bit_offset: c.pos() - 3,
                    expected: "backward_f_code in 1..=7",
                });
            }
        }
        while c.read_bits(1)? == 1 {
            let _extra = c.read_bits(8)?;
        }
        let gop_index = self.gop_count.saturating_sub(1);
        self.map.pictures.push(PictureInfo {
            gop_index,
            picture_type,
            temporal_reference,
            start_byte: byte_offset,
            end_byte: 0,
        });
        if self.collect {
            self.data.push(PictureData {
                picture_type,
                slices: Vec::new(),
            });
        }
        self.picture = Some(PictureCtx {
            picture_type,
            forward_f,
            backward_f,
        });
        self.slice_count_in_picture = 0;
        Ok(())
    }

    fn parse_user_data(&mut self, c: &mut BitCursor, byte_offset: usize) {
        // payload runs to the next start code (or end of stream)
        let start = byte_offset + 4;
        let mut end = self.bytes.len();
        let mut i = start;
        while i + 2 < self.bytes.len() {
            if self.bytes[i] == 0 && self.bytes[i + 1] == 0 && self.bytes[i + 2] == 1 {
                end = i;
                break;
            }
            i += 1;
        }
        self.map.user_data.push(UserDataSegment {
            byte_offset,
            payload: self.bytes[start..end].to_vec(),
        });
        c.seek(end as u64 * 8);
    }

    fn parse_slice(&mut self, c: &mut BitCursor, code: u8) -> Result<()> {
        let Some(pic) = self.picture.as_ref() else {
            return Err(Error::SyntaxError {
                bit_offset: c.pos(),
                expected: "slice inside a picture",
            });
        };
        let picture_type = pic.picture_type;
        let forward_f = pic.forward_f;
        let backward_f = pic.backward_f;
        let slice_row = (code - 1) as usize;
        let slice_index = self.slice_count_in_picture;
        self.slice_count_in_picture += 1;

        let qscale = c.read_bits(5)? as u8;
        if qscale == 0 {
            return Err(Error::SyntaxError {
                bit_offset: c.pos() - 5,
                expected: "quantizer_scale in 1..=31",
            });
        }
        while c.read_bits(1)? == 1 {
            let _extra = c.read_bits(8)?;
        }

        let mut slice_data = SliceData {
            quantizer_scale: qscale,
            macroblocks: Vec::new(),
        };
        let mut mb_address = (slice_row * self.map.sequence.mb_width) as isize - 1;
        let mut cur_qscale = qscale;
        while !self.slice_done(c) {
            let mb = self.parse_macroblock(
                c,
                picture_type,
                forward_f,
                backward_f,
                &mut mb_address,
                &mut cur_qscale,
                slice_index,
            )?;
            if self.collect {
                slice_data.macroblocks.push(mb);
            }
        }
        if self.collect {
            if let Some(pd) = self.data.last_mut() {
                pd.slices.push(slice_data);
            }
        }
        Ok(())
    }

    fn slice_done(&self, c: &BitCursor) -> bool {
        let rem = c.remaining();
        if rem == 0 {
            return true;
        }
        c.peek_bits(rem.min(23) as u32) == Some(0)
    }

    #[allow(clippy::too_many_arguments)]
    fn parse_macroblock(
        &mut self,
        c: &mut BitCursor,
        picture_type: PictureType,
        forward_f: u8,
        backward_f: u8,
        mb_address: &mut isize,
        cur_qscale: &mut u8,
        slice_index: usize,
    ) -> Result<MacroblockData> {
        // address increment with stuffing and escape codes
        let mut inc: usize = 0;
        loop {
            match decode_tree(c, &MB_ADDR_INC, "macroblock_address_increment")? {
                MB_STUFFING => continue,
                MB_ESCAPE => inc += 33,
                v => {
                    inc += v as usize;
                    break;
                }
            }
        }
        *mb_address += inc as isize;
        let address = *mb_address as usize;

        let type_table: &[(u8, u16, u16)] = match picture_type {
            PictureType::I => &MB_TYPE_I,
            PictureType::P => &MB_TYPE_P,
            PictureType::B => &MB_TYPE_B,
        };
        let flags = decode_flat(c, type_table, "macroblock_type")?;
        let quant = flags & 0x10 != 0;
        let motion_forward = flags & 0x08 != 0;
        let motion_backward = flags & 0x04 != 0;
        let pattern = flags & 0x02 != 0;
        let intra = flags & 0x01 != 0;

        if quant {
            let q = c.read_bits(5)? as u8;
            if q == 0 {
                return Err(Error::SyntaxError {
                    bit_offset: c.pos() - 5,
                    expected: "quantizer_scale in 1..=31",
                });
            }
            *cur_qscale = q;
        }

        let picture_index = self.map.pictures.len() - 1;
        let gop_index = self.map.pictures[picture_index].gop_index;
        let mut site = |kind: FlcKind, offset: u64, block: Option<u8>| FlcSite {
            bit_length: kind.bit_length(),
            kind,
            bit_offset: offset,
            gop_index,
            picture_index,
            picture_type,
            slice_index,
            macroblock_address: address,
            block_index: block,
            intra_mb: intra,
        };

        if motion_forward {
            for axis in [Axis::Horizontal, Axis::Vertical] {
                let sites = self.parse_motion(c, forward_f, axis, &mut site)?;
                self.map.sites.extend(sites);
            }
        }
        if motion_backward {
            for axis in [Axis::Horizontal, Axis::Vertical] {
                let sites = self.parse_motion(c, backward_f, axis, &mut site)?;
                self.map.sites.extend(sites);
            }
        }

        let cbp = if pattern {
            decode_flat(c, &CODED_BLOCK_PATTERN, "coded_block_pattern")? as u32
        } else if intra {
            0x3F
        } else {
            0
        };

        let mut mb = MacroblockData {
            address,
            intra,
            quantizer_scale: *cur_qscale,
            blocks: Default::default(),
        };
        for block in 0..6u8 {
            if cbp & (0x20 >> block) == 0 {
                continue;
            }
            let bd = self.parse_block(c, intra, block, &mut site)?;
            if self.collect {
                mb.blocks[block as usize] = Some(bd);
            }
        }
        Ok(mb)
    }

    fn parse_motion(
        &mut self,
        c: &mut BitCursor,
        f_code: u8,
        axis: Axis,
        site: &mut impl FnMut(FlcKind, u64, Option<u8>) -> FlcSite,
    ) -> Result<Vec<FlcSite>> {
        let mut out = Vec::new();
        let mag = decode_flat(c, &MOTION_MAGNITUDE, "motion_code")?;
        if mag != 0 {
            let sign_off = c.pos();
            let _sign = c.read_bits(1)?;
            out.push(site(FlcKind::MvSign { axis }, sign_off, None));
            if f_code > 1 {
                let r_size = f_code - 1;
                let res_off = c.pos();
                let _res = c.read_bits(r_size as u32)?;
                out.push(site(FlcKind::MvResidual { r_size, axis }, res_off, None));
            }
        }
        Ok(out)
    }

    fn parse_block(
        &mut self,
        c: &mut BitCursor,
        intra: bool,
        block: u8,
        site: &mut impl FnMut(FlcKind, u64, Option<u8>) -> FlcSite,
    ) -> Result<BlockData> {
        let mut bd = BlockData {
            intra,
            ..Default::default()
        };
        // next admissible zig-zag position
        let mut next_pos: u32;
        let mut first = !intra;
        if intra {
            let component = if block < 4 { Component::Luma } else { Component::Chroma };
            let table = if block < 4 { &DCT_DC_SIZE_LUMA } else { &DCT_DC_SIZE_CHROMA };
            let dc_size = decode_flat(c, table, "dct_dc_size")? as u8;
            bd.dc_size = dc_size;
            if dc_size > 0 {
                let off = c.pos();
                bd.dc_diff_bits = c.read_bits(dc_size as u32)?;
                self.map
                    .sites
                    .push(site(FlcKind::IntraDcDiff { dc_size, component }, off, Some(block)));
            }
            next_pos = 1;
        } else {
            next_pos = 0;
        }

        loop {
            let v = decode_tree(c, &DCT_COEFF, "dct_coeff")?;
            let (run, mag, sign_bit, escape_width, escape_level);
            if v == ESCAPE {
                run = c.read_bits(6)?;
                let off = c.pos();
                let b = c.read_bits(8)?;
                match b {
                    0x00 => {
                        let ext = c.read_bits(8)?;
                        if ext < 128 {
                            return Err(Error::SyntaxError {
                                bit_offset: off,
                                expected: "escape level extension >= 128",
                            });
                        }
                        escape_level = ext as i32;
                        escape_width = 16u8;
                    }
                    0x80 => {
                        let ext = c.read_bits(8)?;
                        if ext == 0 || ext > 128 {
                            return Err(Error::SyntaxError {
                                bit_offset: off,
                                expected: "escape level extension in 1..=128",
                            });
                        }
                        escape_level = ext as i32 - 256;
                        escape_width = 16;
                    }
                    1..=0x7F => {
                        escape_level = b as i32;
                        escape_width = 8;
                    }
                    _ => {
                        escape_level = b as i32 - 256;
                        escape_width = 8;
                    }
                }
                self.map
                    .sites
                    .push(site(FlcKind::EscapeLevel { width: escape_width }, off, Some(block)));
                mag = escape_level.unsigned_abs();
                sign_bit = escape_level < 0;
            } else if v == 0x0001 {
                if !first {
                    // disambiguate EOB ("10") from run 0 / level 1 ("11s")
                    if c.read_bits(1)? == 0 {
                        break;
                    }
                }
                run = 0;
                mag = 1;
                let off = c.pos();
                sign_bit = c.read_bits(1)? == 1;
                let is_dc = first && run == 0 && next_pos == 0;
                self.map.sites.push(site(
                    FlcKind::CoeffSign { intra, is_dc_nonintra: is_dc },
                    off,
                    Some(block),
                ));
            } else {
                run = (v >> 8) as u32;
                mag = (v & 0xFF) as u32;
                let off = c.pos();
                sign_bit = c.read_bits(1)? == 1;
                let is_dc = first && run == 0;
                self.map.sites.push(site(
                    FlcKind::CoeffSign { intra, is_dc_nonintra: is_dc },
                    off,
                    Some(block),
                ));
            }
            first = false;
            let pos = next_pos + run;
            if pos > 63 {
                return Err(Error::SyntaxError {
                    bit_offset: c.pos(),
                    expected: "coefficient position within 8x8 block",
                });
            }
            if self.collect {
                let level = if sign_bit { -(mag as i32) } else { mag as i32 };
                bd.coeffs.push((pos as u8, level));
            }
            next_pos = pos + 1;
        }
        Ok(bd)
    }
}
