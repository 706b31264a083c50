//! Minimal I-picture reconstruction (dequantize + IDCT, no motion
//! compensation) so the visual effect of the factors can be rendered and
//! measured. Emits PGM/PPM and PSNR.

use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mpeg1::tables::ZIG_ZAG;
use crate::mpeg1::{parse_stream_full, PictureData, PictureType, SequenceInfo, StreamMap};

/// One 8-bit sample plane, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub samples: Vec<u8>,
}

impl Plane {
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Plane { width, height, samples: vec![value; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.samples[y * self.width + x]
    }

    fn put_block(&mut self, x0: usize, y0: usize, block: &[[f64; 8]; 8]) {
        for (dy, row) in block.iter().enumerate() {
            for (dx, &v) in row.iter().enumerate() {
                let (x, y) = (x0 + dx, y0 + dy);
                if x < self.width && y < self.height {
                    self.samples[y * self.width + x] = v.round().clamp(0.0, 255.0) as u8;
                }
            }
        }
    }
}

/// Orthonormal 2-D type-III DCT (separable row/column passes):
/// f(x,y) = 1/4 sum_u sum_v C(u)C(v) F(u,v) cos((2x+1)u pi/16) cos((2y+1)v pi/16).
pub fn idct_8x8(coeffs: &[[f64; 8]; 8]) -> [[f64; 8]; 8] {
    let mut basis = [[0.0f64; 8]; 8]; // basis[u][x] = C(u)/2 * cos((2x+1)u pi/16)
    for (u, row) in basis.iter_mut().enumerate() {
        let cu = if u == 0 { 1.0 / 2f64.sqrt() } else { 1.0 };
        for (x, b) in row.iter_mut().enumerate() {
            *b = cu / 2.0 * ((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0).cos();
        }
    }
    // rows: g(u, y) = sum_v basis[v][y] F(u,v)
    let mut g = [[0.0f64; 8]; 8];
    for u in 0..8 {
        for y in 0..8 {
            g[u][y] = (0..8).map(|v| basis[v][y] * coeffs[u][v]).sum();
        }
    }
    // columns: f(x, y) = sum_u basis[u][x] g(u, y)
    let mut f = [[0.0f64; 8]; 8];
    for (x, row) in f.iter_mut().enumerate() {
        for (y, out) in row.iter_mut().enumerate() {
            *out = (0..8).map(|u| basis[u][x] * g[u][y]).sum();
        }
    }
    f
}

/// Decode one I-picture to (Y, Cb, Cr) planes at 4:2:0.
pub fn decode_i_picture(
    map: &StreamMap,
    data: &[PictureData],
    picture_index: usize,
) -> Result<[Plane; 3]> {
    let pic = data.get(picture_index).ok_or(Error::NotIntraPicture(picture_index))?;
    if pic.picture_type != PictureType::I {
        return Err(Error::NotIntraPicture(picture_index));
    }
    let seq = &map.sequence;
    let (w, h) = (seq.mb_width * 16, seq.mb_height * 16);
    let mut y = Plane::filled(w, h, 128);
    let mut cb = Plane::filled(w / 2, h / 2, 128);
    let mut cr = Plane::filled(w / 2, h / 2, 128);

    for slice in &pic.slices {
        // DC predictors (Y, Cb, Cr), reset at slice start and across gaps
        let mut pred = [1024i32; 3];
        let mut prev_addr: Option<usize> = None;
        for mb in &slice.macroblocks {
            if prev_addr.is_some_and(|p| mb.address != p + 1) {
                pred = [1024; 3];
            }
            prev_addr = Some(mb.address);
            let qscale = mb.quantizer_scale;
            if !mb.intra {
                pred = [1024; 3];
                continue; // no reference frames: leave inter macroblocks flat
            }
            let (mb_x, mb_y) = (mb.address % seq.mb_width, mb.address / seq.mb_width);
            for (bi, block) in mb.blocks.iter().enumerate() {
                let Some(block) = block else { continue };
                let chan = [0usize, 0, 0, 0, 1, 2][bi];
                let diff = dc_differential(block.dc_size, block.dc_diff_bits);
                let dc = pred[chan] + diff * 8;
                pred[chan] = dc;
                let mut coeffs = [[0.0f64; 8]; 8];
                coeffs[0][0] = dc as f64;
                for &(pos, level) in &block.coeffs {
                    let raster = ZIG_ZAG[pos as usize] as usize;
                    let f = dequant_intra(level, qscale, seq, raster);
                    coeffs[raster / 8][raster % 8] = f as f64;
                }
                let px = idct_8x8(&coeffs);
                match bi {
                    0 => y.put_block(mb_x * 16, mb_y * 16, &px),
                    1 => y.put_block(mb_x * 16 + 8, mb_y * 16, &px),
                    2 => y.put_block(mb_x * 16, mb_y * 16 + 8, &px),
                    3 => y.put_block(mb_x * 16 + 8, mb_y * 16 + 8, &px),
                    4 => cb.put_block(mb_x * 8, mb_y * 8, &px),
                    _ => cr.put_block(mb_x * 8, mb_y * 8, &px),
                }
            }
        }
    }
    Ok([y, cb, cr])
}

/// Decode straight from stream bytes.
pub fn decode_i_picture_bytes(bytes: &[u8], picture_index: usize) -> Result<[Plane; 3]> {
    let (map, data) = parse_stream_full(bytes)?;
    decode_i_picture(&map, &data, picture_index)
}

/// Sign-extend a DC size/bits field to the signed differential.
fn dc_differential(dc_size: u8, bits: u32) -> i32 {
    if dc_size == 0 {
        0
    } else if bits & (1 << (dc_size - 1)) != 0 {
        bits as i32
    } else {
        bits as i32 - ((1 << dc_size) - 1)
    }
}

/// Intra AC dequantization with mismatch control (oddification) and the
/// standard [-2048, 2047] clamp.
fn dequant_intra(level: i32, qscale: u8, seq: &SequenceInfo, raster: usize) -> i32 {
    let w = seq.intra_quant[raster] as i32;
    let mut f = 2 * level * qscale as i32 * w / 16;
    if f % 2 == 0 {
        f -= f.signum();
    }
    f.clamp(-2048, 2047)
}

/// 10*log10(255^2 / MSE); +infinity when the planes are identical.
pub fn psnr(a: &Plane, b: &Plane) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    let se: f64 = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    let mse = se / a.samples.len() as f64;
    if mse == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
    }
}

pub fn write_pgm(plane: &Plane, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::Io(e.to_string()))?;
    let header = format!("P5\n{} {}\n255\n", plane.width, plane.height);
    f.write_all(header.as_bytes())
        .and_then(|_| f.write_all(&plane.samples))
        .map_err(|e| Error::Io(e.to_string()))
}

/// BT.601 YCbCr -> RGB with nearest-neighbor chroma upsampling.
pub fn write_ppm(planes: &[Plane; 3], path: &Path) -> Result<()> {
    let [y, cb, cr] = planes;
    let mut rgb = Vec::with_capacity(y.samples.len() * 3);
    for row in 0..y.height {
        for col in 0..y.width {
            let yy = y.get(col, row) as f64;
            let cx = (col / 2).min(cb.width - 1);
            let cy = (row / 2).min(cb.height - 1);
            let u = cb.get(cx, cy) as f64 - 128.0;
            let v = cr.get(cx, cy) as f64 - 128.0;
            for c in [
                yy + 1.402 * v,
                yy - 0.344136 * u - 0.714136 * v,
                yy + 1.772 * u,
            ] {
                rgb.push(c.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::Io(e.to_string()))?;
    let header = format!("P6\n{} {}\n255\n", y.width, y.height);
    f.write_all(header.as_bytes())
        .and_then(|_| f.write_all(&rgb))
        .map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn idct_trivial_cases() {
        let zero = [[0.0; 8]; 8];
        assert_eq!(idct_8x8(&zero), zero);
        let mut dc = [[0.0; 8]; 8];
        dc[0][0] = 8.0;
        let out = idct_8x8(&dc);
        for row in out {
            for v in row {
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }

    fn idct_direct(coeffs: &[[f64; 8]; 8]) -> [[f64; 8]; 8] {
        // brute-force double sum, the oracle for the separable version
        let c = |k: usize| if k == 0 { 1.0 / 2f64.sqrt() } else { 1.0 };
        let mut out = [[0.0f64; 8]; 8];
        for (x, row) in out.iter_mut().enumerate() {
            for (y, o) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (u, crow) in coeffs.iter().enumerate() {
                    for (v, &f) in crow.iter().enumerate() {
                        acc += c(u) * c(v) * f
                            * ((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0).cos()
                            * ((2 * y + 1) as f64 * v as f64 * std::f64::consts::PI / 16.0).cos();
                    }
                }
                *o = acc / 4.0;
            }
        }
        out
    }

    #[test]
    fn dc_differential_sign_extension() {
        assert_eq!(dc_differential(0, 0), 0);
        assert_eq!(dc_differential(4, 0b1010), 10);
        assert_eq!(dc_differential(4, 0b0101), 5 - 15); // -10
        assert_eq!(dc_differential(1, 1), 1);
        assert_eq!(dc_differential(1, 0), -1);
        assert_eq!(dc_differential(8, 0), -255);
    }

    #[test]
    fn psnr_cases() {
        let a = Plane::filled(16, 16, 100);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = Plane::filled(16, 16, 101);
        assert!((psnr(&a, &b).unwrap() - 48.1308).abs() < 1e-3);
        let z = Plane::filled(16, 16, 0);
        let f = Plane::filled(16, 16, 255);
        assert!((psnr(&z, &f).unwrap() - 0.0).abs() < 1e-12);
        let c = Plane::filled(8, 8, 0);
        assert!(matches!(psnr(&a, &c), Err(Error::DimensionMismatch(..))));
    }

    proptest! {
        #[test]
        fn separable_matches_direct(vals in proptest::collection::vec(-1000.0f64..1000.0, 64)) {
            let mut coeffs = [[0.0; 8]; 8];
            for (i, v) in vals.iter().enumerate() {
                coeffs[i / 8][i % 8] = *v;
            }
            let a = idct_8x8(&coeffs);
            let b = idct_direct(&coeffs);
            for x in 0..8 {
                for y in 0..8 {
                    prop_assert!((a[x][y] - b[x][y]).abs() < 1e-9);
                }
            }
        }
    }
}
