//! Stream forge: assembles minimal, syntactically valid MPEG-1 elementary
//! streams from declarative descriptions and reports the exact FLC site list
//! it emitted. Entropy coding only -- no DCT, no quantization decisions.
//!
//! The forge is the parser's independent construction oracle: for any valid
//! spec, `parse_stream(forge_stream(spec).bytes).sites` must equal the
//! declared site list.

use crate::bitio::BitWriter;
use crate::cipher::TestPrf;
use crate::error::{Error, Result};
use crate::mpeg1::tables::*;
use crate::mpeg1::{Axis, Component, FlcKind, FlcSite, PictureType};

#[derive(Debug, Clone)]
pub struct ForgeSpec {
    pub width: u16,
    pub height: u16,
    pub gops: Vec<GopSpec>,
}

#[derive(Debug, Clone, Default)]
pub struct GopSpec {
    pub pictures: Vec<PictureSpec>,
}

#[derive(Debug, Clone)]
pub struct PictureSpec {
    pub picture_type: PictureType,
    /// forward_f_code for P/B pictures (1..=7); residual size is f_code-1.
    pub forward_f: u8,
    pub backward_f: u8,
    pub slices: Vec<SliceSpec>,
}

#[derive(Debug, Clone)]
pub struct SliceSpec {
    /// Zero-based macroblock row (slice_vertical_position - 1).
    pub row: u8,
    pub quantizer_scale: u8,
    pub macroblocks: Vec<MacroblockSpec>,
}

#[derive(Debug, Clone)]
pub struct MacroblockSpec {
    pub address_increment: u32,
    pub kind: MbSpecKind,
}

#[derive(Debug, Clone)]
pub enum MbSpecKind {
    Intra {
        quantizer_scale: Option<u8>,
        blocks: [IntraBlockSpec; 6],
    },
    Inter {
        quantizer_scale: Option<u8>,
        forward_mv: Option<[MotionSpec; 2]>,
        backward_mv: Option<[MotionSpec; 2]>,
        blocks: [Option<InterBlockSpec>; 6],
    },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MotionSpec {
    /// motion_code, -16..=16.
    pub code: i16,
    /// motion_residual, < 2^(f_code-1); ignored when f_code == 1 or code == 0.
    pub residual: u32,
}

#[derive(Debug, Clone, Default)]
pub struct IntraBlockSpec {
    /// 0..=8; 0 means no differential field is present.
    pub dc_size: u8,
    /// Raw field value, < 2^dc_size.
    pub dc_diff_bits: u32,
    pub events: Vec<RunLevel>,
}

#[derive(Debug, Clone, Default)]
pub struct InterBlockSpec {
    pub events: Vec<RunLevel>,
}

#[derive(Debug, Clone, Copy)]
pub struct RunLevel {
    pub run: u8,
    pub level: i32,
}

pub struct ForgedStream {
    pub bytes: Vec<u8>,
    pub sites: Vec<FlcSite>,
}

struct Forge {
    w: BitWriter,
    sites: Vec<FlcSite>,
    mb_width: usize,
    mb_height: usize,
}

/// Emit a stream from a spec, returning the bytes and the declared site list.
pub fn forge_stream(spec: &ForgeSpec) -> Result<ForgedStream> {
    if spec.width == 0 || spec.height == 0 || spec.width % 16 != 0 || spec.height % 16 != 0 {
        return Err(Error::UnencodableValue {
            element: "frame size",
            reason: format!("{}x{} is not a positive multiple of 16", spec.width, spec.height),
        });
    }
    let mut f = Forge {
        w: BitWriter::new(),
        sites: Vec::new(),
        mb_width: spec.width as usize / 16,
        mb_height: spec.height as usize / 16,
    };
    f.sequence_header(spec.width, spec.height);
    let mut picture_index = 0usize;
    for (gop_index, gop) in spec.gops.iter().enumerate() {
        f.gop_header();
        for (in_gop, pic) in gop.pictures.iter().enumerate() {
            f.picture(pic, gop_index, picture_index, in_gop)?;
            picture_index += 1;
        }
    }
    f.start_code(0xB7); // sequence_end_code
    Ok(ForgedStream {
        bytes: f.w.into_bytes(),
        sites: f.sites,
    })
}

impl Forge {
    fn start_code(&mut self, code: u8) {
        self.w.align();
        self.w.write_bytes(&[0x00, 0x00, 0x01, code]);
    }

    fn sequence_header(&mut self, width: u16, height: u16) {
        self.start_code(0xB3);
        self.w.write_bits(width as u32, 12);
        self.w.write_bits(height as u32, 12);
        self.w.write_bits(1, 4); // pel_aspect_ratio 1:1
        self.w.write_bits(1, 4); // picture_rate 23.976
        self.w.write_bits(1, 18); // bit_rate (smallest legal)
        self.w.write_bit(1); // marker
        self.w.write_bits(1, 10); // vbv_buffer_size
        self.w.write_bit(0); // constrained_parameters_flag
        self.w.write_bit(0); // load_intra_quantizer_matrix
        self.w.write_bit(0); // load_non_intra_quantizer_matrix
    }

    fn gop_header(&mut self) {
        self.start_code(0xB8);
        // time_code: drop(1) hours(5) minutes(6) marker(1) seconds(6) pictures(6)
        self.w.write_bit(0);
        self.w.write_bits(0, 5);
        self.w.write_bits(0, 6);
        self.w.write_bit(1);
        self.w.write_bits(0, 6);
        self.w.write_bits(0, 6);
        self.w.write_bit(1); // closed_gop
        self.w.write_bit(0); // broken_link
    }

    fn picture(
        &mut self,
        pic: &PictureSpec,
        gop_index: usize,
        picture_index: usize,
        temporal_reference: usize,
    ) -> Result<()> {
        if pic.picture_type != PictureType::I && !(1..=7).contains(&pic.forward_f) {
            return Err(Error::UnencodableValue {
                element: "forward_f_code",
                reason: format!("{} not in 1..=7", pic.forward_f),
            });
        }
        if pic.picture_type == PictureType::B && !(1..=7).contains(&pic.backward_f) {
            return Err(Error::UnencodableValue {
                element: "backward_f_code",
                reason: format!("{} not in 1..=7", pic.backward_f),
            });
        }
        if pic.slices.is_empty() {
            return Err(Error::UnencodableValue {
                element: "picture",
                reason: "must contain at least one slice".into(),
            });
        }
        self.start_code(0x00);
        self.w.write_bits(temporal_reference as u32 & 0x3FF, 10);
        let type_code = match pic.picture_type {
            PictureType::I => 1,
            PictureType::P => 2,
            PictureType::B => 3,
        };
        self.w.write_bits(type_code, 3);
        self.w.write_bits(0xFFFF, 16); // vbv_delay
        if pic.picture_type != PictureType::I {
            self.w.write_bit(0); // full_pel_forward_vector
            self.w.write_bits(pic.forward_f as u32, 3);
        }
        if pic.picture_type == PictureType::B {
            self.w.write_bit(0);
            self.w.write_bits(pic.backward_f as u32, 3);
        }
        self.w.write_bit(0); // extra_bit_picture
        for (slice_index, slice) in pic.slices.iter().enumerate() {
            self.slice(slice, pic, gop_index, picture_index, slice_index)?;
        }
        Ok(())
    }

    fn slice(
        &mut self,
        slice: &SliceSpec,
        pic: &PictureSpec,
        gop_index: usize,
        picture_index: usize,
        slice_index: usize,
    ) -> Result<()> {
        if slice.row as usize >= self.mb_height {
            return Err(Error::UnencodableValue {
                element: "slice row",
                reason: format!("row {} outside {} macroblock rows", slice.row, self.mb_height),
            });
        }
        if !(1..=31).contains(&slice.quantizer_scale) {
            return Err(Error::UnencodableValue {
                element: "quantizer_scale",
                reason: format!("{} not in 1..=31", slice.quantizer_scale),
            });
        }
        if slice.macroblocks.is_empty() {
            return Err(Error::UnencodableValue {
                element: "slice",
                reason: "must contain at least one macroblock".into(),
            });
        }
        self.start_code(slice.row + 1);
        self.w.write_bits(slice.quantizer_scale as u32, 5);
        self.w.write_bit(0); // extra_bit_slice
        let mut address = (slice.row as usize * self.mb_width) as isize - 1;
        for mb in &slice.macroblocks {
            address += mb.address_increment as isize;
            let ctx = SiteCtx {
                gop_index,
                picture_index,
                picture_type: pic.picture_type,
                slice_index,
                macroblock_address: address as usize,
                intra_mb: matches!(mb.kind, MbSpecKind::Intra { .. }),
            };
            self.macroblock(mb, pic, &ctx)?;
        }
        Ok(())
    }

    fn macroblock(&mut self, mb: &MacroblockSpec, pic: &PictureSpec, ctx: &SiteCtx) -> Result<()> {
        if mb.address_increment == 0 {
            return Err(Error::UnencodableValue {
                element: "address_increment",
                reason: "must be >= 1".into(),
            });
        }
        let mut inc = mb.address_increment;
        let esc = mb_addr_inc_encode_map();
        while inc > 33 {
            let (code, len) = esc[&MB_ESCAPE];
            self.w.write_bits(code, len as u32);
            inc -= 33;
        }
        let (code, len) = esc[&(inc as u16)];
        self.w.write_bits(code, len as u32);

        match &mb.kind {
            MbSpecKind::Intra { quantizer_scale, blocks } => {
                let flags: u16 = if quantizer_scale.is_some() { 0x11 } else { 0x01 };
                self.mb_type(pic.picture_type, flags)?;
                if let Some(q) = quantizer_scale {
                    self.write_qscale(*q)?;
                }
                for (i, b) in blocks.iter().enumerate() {
                    self.intra_block(b, i as u8, ctx)?;
                }
            }
            MbSpecKind::Inter { quantizer_scale, forward_mv, backward_mv, blocks } => {
                if pic.picture_type == PictureType::I {
                    return Err(Error::UnencodableValue {
                        element: "macroblock_type",
                        reason: "I-pictures contain only intra macroblocks".into(),
                    });
                }
                let pattern = blocks.iter().any(|b| b.is_some());
                let mut flags: u16 = 0;
                if quantizer_scale.is_some() {
                    flags |= 0x10;
                }
                if forward_mv.is_some() {
                    flags |= 0x08;
                }
                if backward_mv.is_some() {
                    flags |= 0x04;
                }
                if pattern {
                    flags |= 0x02;
                }
                self.mb_type(pic.picture_type, flags)?;
                if let Some(q) = quantizer_scale {
                    self.write_qscale(*q)?;
                }
                if let Some(mvs) = forward_mv {
                    self.motion_pair(mvs, pic.forward_f, ctx)?;
                }
                if let Some(mvs) = backward_mv {
                    self.motion_pair(mvs, pic.backward_f, ctx)?;
                }
                if pattern {
                    let mut cbp: u16 = 0;
                    for (i, b) in blocks.iter().enumerate() {
                        if b.is_some() {
                            cbp |= 0x20 >> i;
                        }
                    }
                    let (code, len) = encode_flat(&CODED_BLOCK_PATTERN, cbp).unwrap();
                    self.w.write_bits(code as u32, len as u32);
                }
                for (i, b) in blocks.iter().enumerate() {
                    if let Some(b) = b {
                        self.inter_block(b, i as u8, ctx)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn mb_type(&mut self, ptype: PictureType, flags: u16) -> Result<()> {
        let table: &[(u8, u16, u16)] = match ptype {
            PictureType::I => &MB_TYPE_I,
            PictureType::P => &MB_TYPE_P,
            PictureType::B => &MB_TYPE_B,
        };
        let Some((code, len)) = encode_flat(table, flags) else {
            return Err(Error::UnencodableValue {
                element: "macroblock_type",
                reason: format!("flag combination {flags:#04x} has no code for {ptype:?} pictures"),
            });
        };
        self.w.write_bits(code as u32, len as u32);
        Ok(())
    }

    fn write_qscale(&mut self, q: u8) -> Result<()> {
        if !(1..=31).contains(&q) {
            return Err(Error::UnencodableValue {
                element: "quantizer_scale",
                reason: format!("{q} not in 1..=31"),
            });
        }
        self.w.write_bits(q as u32, 5);
        Ok(())
    }

    fn motion_pair(&mut self, mvs: &[MotionSpec; 2], f_code: u8, ctx: &SiteCtx) -> Result<()> {
        for (mv, axis) in mvs.iter().zip([Axis::Horizontal, Axis::Vertical]) {
            let mag = mv.code.unsigned_abs();
            if mag > 16 {
                return Err(Error::UnencodableValue {
                    element: "motion_code",
                    reason: format!("|{}| > 16", mv.code),
                });
            }
            let (code, len) = encode_flat(&MOTION_MAGNITUDE, mag).unwrap();
            self.w.write_bits(code as u32, len as u32);
            if mag != 0 {
                let off = self.w.pos();
                self.w.write_bit((mv.code < 0) as u32);
                self.push_site(FlcKind::MvSign { axis }, off, None, ctx);
                if f_code > 1 {
                    let r_size = f_code - 1;
                    if mv.residual >= 1 << r_size {
                        return Err(Error::UnencodableValue {
                            element: "motion_residual",
                            reason: format!("{} does not fit in {} bits", mv.residual, r_size),
                        });
                    }
                    let off = self.w.pos();
                    self.w.write_bits(mv.residual, r_size as u32);
                    self.push_site(FlcKind::MvResidual { r_size, axis }, off, None, ctx);
                }
            } else if mv.residual != 0 {
                return Err(Error::UnencodableValue {
                    element: "motion_residual",
                    reason: "motion_code 0 carries no residual".into(),
                });
            }
        }
        Ok(())
    }

    fn intra_block(&mut self, b: &IntraBlockSpec, block: u8, ctx: &SiteCtx) -> Result<()> {
        if b.dc_size > 8 {
            return Err(Error::UnencodableValue {
                element: "dct_dc_size",
                reason: format!("{} > 8", b.dc_size),
            });
        }
        let (component, table) = if block < 4 {
            (Component::Luma, &DCT_DC_SIZE_LUMA)
        } else {
            (Component::Chroma, &DCT_DC_SIZE_CHROMA)
        };
        let (code, len) = encode_flat(table, b.dc_size as u16).unwrap();
        self.w.write_bits(code as u32, len as u32);
        if b.dc_size > 0 {
            if b.dc_diff_bits >= 1 << b.dc_size {
                return Err(Error::UnencodableValue {
                    element: "dc differential",
                    reason: format!("{} does not fit in {} bits", b.dc_diff_bits, b.dc_size),
                });
            }
            let off = self.w.pos();
            self.w.write_bits(b.dc_diff_bits, b.dc_size as u32);
            self.push_site(
                FlcKind::IntraDcDiff { dc_size: b.dc_size, component },
                off,
                Some(block),
                ctx,
            );
        }
        self.coefficients(&b.events, true, 1, block, ctx)?;
        self.w.write_bits(0b10, 2); // EOB
        Ok(())
    }

    fn inter_block(&mut self, b: &InterBlockSpec, block: u8, ctx: &SiteCtx) -> Result<()> {
        if b.events.is_empty() {
            return Err(Error::UnencodableValue {
                element: "coded block",
                reason: "a coded non-intra block needs at least one coefficient".into(),
            });
        }
        self.coefficients(&b.events, false, 0, block, ctx)?;
        self.w.write_bits(0b10, 2); // EOB
        Ok(())
    }

    fn coefficients(
        &mut self,
        events: &[RunLevel],
        intra: bool,
        start_pos: u32,
        block: u8,
        ctx: &SiteCtx,
    ) -> Result<()> {
        let mut next_pos = start_pos;
        let mut first = !intra;
        for ev in events {
            let mag = ev.level.unsigned_abs();
            if mag == 0 || mag > 255 {
                return Err(Error::UnencodableValue {
                    element: "level",
                    reason: format!("{} outside nonzero +-255 range", ev.level),
                });
            }
            if ev.run > 63 {
                return Err(Error::UnencodableValue {
                    element: "run",
                    reason: format!("{} > 63", ev.run),
                });
            }
            let pos = next_pos + ev.run as u32;
            if pos > 63 {
                return Err(Error::UnencodableValue {
                    element: "run",
                    reason: "coefficient position exceeds 63".into(),
                });
            }
            next_pos = pos + 1;
            let is_dc = first && ev.run == 0;
            let key = ((ev.run as u16) << 8) | mag as u16;
            let table_code = dct_coeff_encode_map().get(&key).copied();
            match table_code {
                Some((code, len)) if !(first && !(ev.run == 0 && mag == 1)) => {
                    // run 0 / level 1 in non-first context needs the "11"
                    // prefix instead of the bare "1"
                    if !first && ev.run == 0 && mag == 1 {
                        self.w.write_bits(0b11, 2);
                    } else {
                        self.w.write_bits(code, len as u32);
                    }
                    let off = self.w.pos();
                    self.w.write_bit((ev.level < 0) as u32);
                    self.push_site(
                        FlcKind::CoeffSign { intra, is_dc_nonintra: is_dc },
                        off,
                        Some(block),
                        ctx,
                    );
                }
                _ => {
                    // ESCAPE coding
                    self.w.write_bits(0b000001, 6);
                    self.w.write_bits(ev.run as u32, 6);
                    let off = self.w.pos();
                    let width = if mag >= 128 { 16u8 } else { 8 };
                    match ev.level {
                        1..=127 => self.w.write_bits(ev.level as u32, 8),
                        -127..=-1 => self.w.write_bits((ev.level + 256) as u32, 8),
                        128..=255 => {
                            self.w.write_bits(0x00, 8);
                            self.w.write_bits(ev.level as u32, 8);
                        }
                        -255..=-128 => {
                            self.w.write_bits(0x80, 8);
                            self.w.write_bits((ev.level + 256) as u32, 8);
                        }
                        _ => unreachable!(),
                    }
                    self.push_site(FlcKind::EscapeLevel { width }, off, Some(block), ctx);
                }
            }
            first = false;
        }
        Ok(())
    }

    fn push_site(&mut self, kind: FlcKind, offset: u64, block: Option<u8>, ctx: &SiteCtx) {
        self.sites.push(FlcSite {
            bit_length: kind.bit_length(),
            kind,
            bit_offset: offset,
            gop_index: ctx.gop_index,
            picture_index: ctx.picture_index,
            picture_type: ctx.picture_type,
            slice_index: ctx.slice_index,
            macroblock_address: ctx.macroblock_address,
            block_index: block,
            intra_mb: ctx.intra_mb,
        });
    }
}

struct SiteCtx {
    gop_index: usize,
    picture_index: usize,
    picture_type: PictureType,
    slice_index: usize,
    macroblock_address: usize,
    intra_mb: bool,
}

/// An intra picture whose blocks all have dct_dc_size = 0: the bitstream
/// carries no intra DC differential fields at all, so the rough-view factor
/// has nothing to encrypt.
pub fn forge_dark_fixture() -> Vec<u8> {
    let mut slices = Vec::new();
    for row in 0..2u8 {
        let mbs = (0..2)
            .map(|_| MacroblockSpec {
                address_increment: 1,
                kind: MbSpecKind::Intra {
                    quantizer_scale: None,
                    blocks: std::array::from_fn(|i| IntraBlockSpec {
                        dc_size: 0,
                        dc_diff_bits: 0,
                        events: if i < 4 {
                            vec![RunLevel { run: 1, level: 2 }, RunLevel { run: 0, level: -1 }]
                        } else {
                            vec![]
                        },
                    }),
                },
            })
            .collect();
        slices.push(SliceSpec {
            row,
            quantizer_scale: 8,
            macroblocks: mbs,
        });
    }
    let spec = ForgeSpec {
        width: 32,
        height: 32,
        gops: vec![GopSpec {
            pictures: vec![PictureSpec {
                picture_type: PictureType::I,
                forward_f: 1,
                backward_f: 1,
                slices,
            }],
        }],
    };
    forge_stream(&spec).expect("dark fixture spec is valid").bytes
}

/// Deterministic randomized spec generator for property testing and fuzzing.
/// Bounds: <= 4 pictures, <= 10 macroblocks per slice, <= 8 coefficients per
/// block.
pub fn random_spec(seed: u64) -> ForgeSpec {
    let mut rng = TestPrf::seeded(seed);
    fn pick(rng: &mut TestPrf, n: u64) -> u64 {
        rng.next_u64() % n
    }

    // small frames keep fixtures fast: 32..=64 pixels per side
    let mb_w = 2 + pick(&mut rng, 3) as u16;
    let mb_h = 2 + pick(&mut rng, 2) as u16;
    let n_pictures = 1 + pick(&mut rng, 4) as usize;
    let mut gops: Vec<GopSpec> = vec![GopSpec::default()];
    let mut first = true;
    for _ in 0..n_pictures {
        let picture_type = if first {
            PictureType::I
        } else {
            match pick(&mut rng, 3) {
                0 => PictureType::I,
                1 => PictureType::P,
                _ => PictureType::B,
            }
        };
        first = false;
        let forward_f = 1 + pick(&mut rng, 3) as u8;
        let backward_f = 1 + pick(&mut rng, 3) as u8;
        let n_slices = 1 + pick(&mut rng, 2) as usize;
        let mut slices = Vec::new();
        for s in 0..n_slices {
            let row = (s as u64 % mb_h as u64) as u8;
            let n_mbs = 1 + pick(&mut rng, 10.min(mb_w as u64)) as usize;
            let mut mbs = Vec::new();
            for m in 0..n_mbs {
                let inc = if m == 0 { 1 } else { 1 + pick(&mut rng, 2) as u32 };
                let intra = picture_type == PictureType::I || pick(&mut rng, 3) == 0;
                let kind = if intra {
                    MbSpecKind::Intra {
                        quantizer_scale: if pick(&mut rng, 4) == 0 { Some(1 + pick(&mut rng, 31) as u8) } else { None },
                        blocks: std::array::from_fn(|_| random_intra_block(&mut rng)),
                    }
                } else {
                    let has_fwd = picture_type == PictureType::P || pick(&mut rng, 2) == 0;
                    let has_bwd = picture_type == PictureType::B && (pick(&mut rng, 2) == 0 || !has_fwd);
                    let blocks: [Option<InterBlockSpec>; 6] = std::array::from_fn(|_| {
                        if rng.next_u64() % 3 == 0 {
                            Some(random_inter_block(&mut rng))
                        } else {
                            None
                        }
                    });
                    let pattern = blocks.iter().any(|b| b.is_some());
                    // quant needs pattern (or intra) in both P and B tables
                    let quant = pattern && rng.next_u64() % 4 == 0;
                    let mut blocks = blocks;
                    if !pattern && !has_fwd && !has_bwd {
                        // force a legal macroblock: give it one coded block
                        blocks[0] = Some(random_inter_block(&mut rng));
                    }
                    MbSpecKind::Inter {
                        quantizer_scale: if quant { Some(1 + rng.next_u64() as u8 % 31) } else { None },
                        forward_mv: has_fwd.then(|| random_mv_pair(&mut rng, forward_f)),
                        backward_mv: has_bwd.then(|| random_mv_pair(&mut rng, backward_f)),
                        blocks,
                    }
                };
                mbs.push(MacroblockSpec {
                    address_increment: inc,
                    kind,
                });
            }
            slices.push(SliceSpec {
                row,
                quantizer_scale: 1 + (rng.next_u64() % 31) as u8,
                macroblocks: mbs,
            });
        }
        let pic = PictureSpec {
            picture_type,
            forward_f,
            backward_f,
            slices,
        };
        if rng.next_u64() % 4 == 0 && !gops.last().unwrap().pictures.is_empty() {
            gops.push(GopSpec::default());
        }
        gops.last_mut().unwrap().pictures.push(pic);
    }
    // drop a trailing empty gop, keep at least one picture overall
    gops.retain(|g| !g.pictures.is_empty());
    if gops.is_empty() {
        return random_spec(seed.wrapping_add(0x9E3779B97F4A7C15));
    }
    ForgeSpec {
        width: mb_w * 16,
        height: mb_h * 16,
        gops,
    }
}

fn random_events(rng: &mut TestPrf, start_pos: u32, min_events: usize) -> Vec<RunLevel> {
    let n = (min_events as u64 + rng.next_u64() % 8).min(8) as usize;
    let mut events = Vec::new();
    let mut pos = start_pos;
    for _ in 0..n {
        let run = (rng.next_u64() % 4) as u32;
        if pos + run > 63 {
            break;
        }
        let level = match rng.next_u64() % 5 {
            // mostly small table-coded levels, sometimes escapes
            0..=2 => 1 + (rng.next_u64() % 5) as i32,
            3 => 30 + (rng.next_u64() % 90) as i32,
            _ => 128 + (rng.next_u64() % 128) as i32,
        };
        let level = if rng.next_u64() % 2 == 0 { level } else { -level };
        events.push(RunLevel {
            run: run as u8,
            level,
        });
        pos += run + 1;
    }
    events
}

fn random_intra_block(rng: &mut TestPrf) -> IntraBlockSpec {
    let dc_size = (rng.next_u64() % 9) as u8;
    let dc_diff_bits = if dc_size > 0 {
        (rng.next_u64() % (1 << dc_size)) as u32
    } else {
        0
    };
    IntraBlockSpec {
        dc_size,
        dc_diff_bits,
        events: random_events(rng, 1, 0),
    }
}

fn random_inter_block(rng: &mut TestPrf) -> InterBlockSpec {
    InterBlockSpec {
        events: random_events(rng, 0, 1),
    }
}

fn random_mv_pair(rng: &mut TestPrf, f_code: u8) -> [MotionSpec; 2] {
    std::array::from_fn(|_| {
        let code = (rng.next_u64() % 33) as i16 - 16;
        let residual = if f_code > 1 && code != 0 {
            (rng.next_u64() % (1 << (f_code - 1))) as u32
        } else {
            0
        };
        MotionSpec { code, residual }
    })
}

/// Parse the line-based text spec format used by the CLI `forge`
/// subcommand. One element per line, `#` comments:
///
/// ```text
/// size 48 32
/// gop
/// pic I              # or: pic P 2   /  pic B 2 3   (f_codes)
/// slice 0 8          # row, quantizer_scale
/// mb 1 intra         # address_increment, intra|inter, optional: quant 5
/// block 0
/// dc 4 10            # dct_dc_size, raw differential bits
/// coef 0 5           # run, level (table or ESCAPE as needed)
/// mb 1 inter quant 3
/// mv f 2 1 0 0       # f|b, h code, h residual, v code, v residual
/// block 4
/// coef 1 -3
/// ```
///
/// Intra blocks not listed default to dc_size 0 with no coefficients; inter
/// blocks are coded only when listed.
pub fn parse_forge_text(text: &str) -> Result<ForgeSpec> {
    let err = |line_no: usize, reason: String| Error::UnencodableValue {
        element: "forge spec",
        reason: format!("line {}: {}", line_no + 1, reason),
    };
    let mut size: Option<(u16, u16)> = None;
    let mut gops: Vec<GopSpec> = Vec::new();
    // cursor into the structure under construction
    let mut cur_block: Option<usize> = None;

    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let int = |t: &str| -> std::result::Result<i64, String> {
            t.parse().map_err(|_| format!("bad number {t:?}"))
        };
        macro_rules! ctx {
            (pic) => {
                gops.last_mut()
                    .and_then(|g| g.pictures.last_mut())
                    .ok_or_else(|| err(ln, "no picture open".into()))?
            };
            (slice) => {
                ctx!(pic).slices.last_mut().ok_or_else(|| err(ln, "no slice open".into()))?
            };
            (mb) => {
                ctx!(slice)
                    .macroblocks
                    .last_mut()
                    .ok_or_else(|| err(ln, "no macroblock open".into()))?
            };
        }
        match toks[0] {
            "size" => {
                if toks.len() != 3 {
                    return Err(err(ln, "usage: size W H".into()));
                }
                let w = int(toks[1]).map_err(|e| err(ln, e))? as u16;
                let h = int(toks[2]).map_err(|e| err(ln, e))? as u16;
                size = Some((w, h));
            }
            "gop" => gops.push(GopSpec::default()),
            "pic" => {
                if gops.is_empty() {
                    gops.push(GopSpec::default());
                }
                let ptype = match toks.get(1).copied() {
                    Some("I") => PictureType::I,
                    Some("P") => PictureType::P,
                    Some("B") => PictureType::B,
                    other => return Err(err(ln, format!("bad picture type {other:?}"))),
                };
                let f = |i: usize, default| -> Result<u8> {
                    match toks.get(i) {
                        Some(t) => Ok(int(t).map_err(|e| err(ln, e))? as u8),
                        None => Ok(default),
                    }
                };
                gops.last_mut().unwrap().pictures.push(PictureSpec {
                    picture_type: ptype,
                    forward_f: f(2, 1)?,
                    backward_f: f(3, 1)?,
                    slices: Vec::new(),
                });
                cur_block = None;
            }
            "slice" => {
                if toks.len() != 3 {
                    return Err(err(ln, "usage: slice ROW QSCALE".into()));
                }
                let row = int(toks[1]).map_err(|e| err(ln, e))? as u8;
                let q = int(toks[2]).map_err(|e| err(ln, e))? as u8;
                ctx!(pic).slices.push(SliceSpec {
                    row,
                    quantizer_scale: q,
                    macroblocks: Vec::new(),
                });
                cur_block = None;
            }
            "mb" => {
                if toks.len() < 3 {
                    return Err(err(ln, "usage: mb INC intra|inter [quant Q]".into()));
                }
                let inc = int(toks[1]).map_err(|e| err(ln, e))? as u32;
                let quant = match toks.get(3) {
                    Some(&"quant") => Some(
                        int(toks.get(4).ok_or_else(|| err(ln, "quant needs a value".into()))?)
                            .map_err(|e| err(ln, e))? as u8,
                    ),
                    Some(other) => return Err(err(ln, format!("unexpected token {other:?}"))),
                    None => None,
                };
                let kind = match toks[2] {
                    "intra" => MbSpecKind::Intra {
                        quantizer_scale: quant,
                        blocks: std::array::from_fn(|_| IntraBlockSpec::default()),
                    },
                    "inter" => MbSpecKind::Inter {
                        quantizer_scale: quant,
                        forward_mv: None,
                        backward_mv: None,
                        blocks: std::array::from_fn(|_| None),
                    },
                    other => return Err(err(ln, format!("bad macroblock kind {other:?}"))),
                };
                ctx!(slice).macroblocks.push(MacroblockSpec { address_increment: inc, kind });
                cur_block = None;
            }
            "mv" => {
                if toks.len() != 6 {
                    return Err(err(ln, "usage: mv f|b HCODE HRES VCODE VRES".into()));
                }
                let vals: Vec<i64> = toks[2..]
                    .iter()
                    .map(|t| int(t))
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| err(ln, e))?;
                let pair = [
                    MotionSpec { code: vals[0] as i16, residual: vals[1] as u32 },
                    MotionSpec { code: vals[2] as i16, residual: vals[3] as u32 },
                ];
                let MbSpecKind::Inter { forward_mv, backward_mv, .. } = &mut ctx!(mb).kind else {
                    return Err(err(ln, "mv only applies to inter macroblocks".into()));
                };
                match toks[1] {
                    "f" => *forward_mv = Some(pair),
                    "b" => *backward_mv = Some(pair),
                    other => return Err(err(ln, format!("bad mv direction {other:?}"))),
                }
            }
            "block" => {
                let idx = int(toks.get(1).ok_or_else(|| err(ln, "block needs an index".into()))?)
                    .map_err(|e| err(ln, e))? as usize;
                if idx > 5 {
                    return Err(err(ln, format!("block index {idx} > 5")));
                }
                if let MbSpecKind::Inter { blocks, .. } = &mut ctx!(mb).kind {
                    blocks[idx].get_or_insert_with(InterBlockSpec::default);
                }
                cur_block = Some(idx);
            }
            "dc" => {
                if toks.len() != 3 {
                    return Err(err(ln, "usage: dc SIZE BITS".into()));
                }
                let b = cur_block.ok_or_else(|| err(ln, "dc outside a block".into()))?;
                let sz = int(toks[1]).map_err(|e| err(ln, e))? as u8;
                let bits = int(toks[2]).map_err(|e| err(ln, e))? as u32;
                let MbSpecKind::Intra { blocks, .. } = &mut ctx!(mb).kind else {
                    return Err(err(ln, "dc only applies to intra blocks".into()));
                };
                blocks[b].dc_size = sz;
                blocks[b].dc_diff_bits = bits;
            }
            "coef" => {
                if toks.len() != 3 {
                    return Err(err(ln, "usage: coef RUN LEVEL".into()));
                }
                let b = cur_block.ok_or_else(|| err(ln, "coef outside a block".into()))?;
                let run = int(toks[1]).map_err(|e| err(ln, e))? as u8;
                let level = int(toks[2]).map_err(|e| err(ln, e))? as i32;
                let ev = RunLevel { run, level };
                match &mut ctx!(mb).kind {
                    MbSpecKind::Intra { blocks, .. } => blocks[b].events.push(ev),
                    MbSpecKind::Inter { blocks, .. } => blocks[b]
                        .get_or_insert_with(InterBlockSpec::default)
                        .events
                        .push(ev),
                }
            }
            other => return Err(err(ln, format!("unknown directive {other:?}"))),
        }
    }
    let (width, height) = size.ok_or_else(|| Error::UnencodableValue {
        element: "forge spec",
        reason: "missing `size W H` line".into(),
    })?;
    Ok(ForgeSpec { width, height, gops })
}
