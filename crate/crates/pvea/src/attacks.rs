//! Attack implementations and complexity computations: the
//! error-concealment attack on this scheme, the exact deblocking-attack
//! complexity bound, and known-plaintext/brute-force cryptanalysis of two
//! earlier perceptual-encryption schemes (an affine pixel scrambler, here
//! "PD", and a DCT sub-band shifter, here "WYZ") on synthetic data.

use num_bigint::BigUint;

use crate::bitio::{apply_patch, read_at, BitPatch};
use crate::cipher::{decode_escape_level, encode_escape_level};
use crate::error::{Error, Result};
use crate::mpeg1::{parse_stream, FlcKind};
use crate::selection::round_count;

// ---------------------------------------------------------------- ECA

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcaScope {
    /// Force every coefficient sign positive.
    AcSigns,
    /// Additionally force DC differentials minimal and motion fields zero.
    Full,
}

/// Error-concealment attack: overwrite every candidate encrypted field with
/// a fixed value, independent of what it currently holds. Keyless, and by
/// construction identical on a plaintext and on any encryption of it.
///
/// DC differentials cannot encode zero (an s-bit field covers magnitudes
/// 2^(s-1)..2^s-1), so "zeroing" forces the minimal representable value,
/// +2^(s-1).
pub fn eca(bytes: &[u8], scope: EcaScope) -> Result<Vec<u8>> {
    let map = parse_stream(bytes)?;
    let mut out = bytes.to_vec();
    for site in &map.sites {
        match site.kind {
            FlcKind::CoeffSign { .. } => {
                apply_patch(&mut out, BitPatch::new(site.bit_offset, 1, 0))?;
            }
            FlcKind::EscapeLevel { width } => {
                let field = read_at(&out, site.bit_offset, site.bit_length)?;
                let level = decode_escape_level(width, field)?;
                let forced = encode_escape_level(width, level.abs());
                apply_patch(&mut out, BitPatch::new(site.bit_offset, site.bit_length, forced))?;
            }
            FlcKind::IntraDcDiff { dc_size, .. } if scope == EcaScope::Full => {
                let forced = 1u32 << (dc_size - 1);
                apply_patch(&mut out, BitPatch::new(site.bit_offset, site.bit_length, forced))?;
            }
            FlcKind::MvSign { .. } | FlcKind::MvResidual { .. } if scope == EcaScope::Full => {
                apply_patch(&mut out, BitPatch::new(site.bit_offset, site.bit_length, 0))?;
            }
            _ => {}
        }
    }
    Ok(out)
}

// ------------------------------------------------- deblocking complexity

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    pub n: usize,
    pub p: f64,
    pub selected: usize,
    /// log2(binom(n, selected)) + selected, from exact integers.
    pub log2_complexity: f64,
    /// Meets the 2^100 work-factor bar.
    pub meets_threshold: bool,
}

fn binomial(n: usize, k: usize) -> BigUint {
    let k = k.min(n - k.min(n));
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// log2 of a positive big integer, accurate to ~1e-12.
fn log2_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 64 {
        return (u64::try_from(x).unwrap() as f64).log2();
    }
    let shift = bits - 64;
    let top: u64 = u64::try_from(&(x >> shift)).unwrap();
    (top as f64).log2() + shift as f64
}

/// Work factor of guessing which round(N*p) of N elements are encrypted and
/// their values: binom(N, pN) * 2^(pN).
pub fn deblock_complexity(n: usize, p: f64) -> ComplexityReport {
    assert!(n >= 1 && (0.0..=1.0).contains(&p));
    let p_fixed = (p * 10_000.0).round() as u16;
    let selected = round_count(n, p_fixed);
    let log2_complexity = log2_biguint(&binomial(n, selected)) + selected as f64;
    ComplexityReport {
        n,
        p,
        selected,
        log2_complexity,
        meets_threshold: log2_complexity >= 100.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinPBound {
    /// The conservative 100/N rule, capped at 1, as (numerator, denominator).
    pub conservative: (usize, usize),
    /// Minimal k/N with log2 complexity >= 100, found by exact search.
    pub refined: (usize, usize),
}

/// Smallest factor keeping the deblocking work factor at or above 2^100.
pub fn min_p_bound(n: usize) -> MinPBound {
    assert!(n >= 1);
    let conservative = (100.min(n), n);
    let mut refined = (n, n);
    for k in 0..=n {
        if log2_biguint(&binomial(n, k)) + k as f64 >= 100.0 {
            refined = (k, n);
            break;
        }
    }
    MinPBound { conservative, refined }
}

// ------------------------------------------------------ PD affine scheme

/// Parameters of one scrambling block: x_o is one of four affine images of
/// x_i selected by the bits (d, n), with alpha = alpha_star / 100.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PdParams {
    pub alpha_star: u32,
    pub d: bool,
    pub n: bool,
    pub fs: u32,
}

impl PdParams {
    pub fn alpha(&self) -> f64 {
        self.alpha_star as f64 / 100.0
    }
}

/// The four-case affine map, rounded and clamped to [0, FS].
pub fn pd_encrypt_pixel(x: u8, p: &PdParams) -> u8 {
    let (a, fs, x) = (p.alpha(), p.fs as f64, x as f64);
    let v = match (p.d, p.n) {
        (false, false) => a * x,
        (false, true) => fs - a * x,
        (true, false) => fs * (1.0 - a) + a * x,
        (true, true) => fs - (fs * (1.0 - a) + a * x),
    };
    v.round().clamp(0.0, p.fs as f64) as u8
}

fn pd_decrypt_pixel(x_o: u8, p: &PdParams) -> u8 {
    let (a, fs, x) = (p.alpha(), p.fs as f64, x_o as f64);
    let v = match (p.d, p.n) {
        (false, false) => x / a,
        (false, true) => (fs - x) / a,
        (true, false) => (x - fs * (1.0 - a)) / a,
        (true, true) => (fs - x - fs * (1.0 - a)) / a,
    };
    v.round().clamp(0.0, p.fs as f64) as u8
}

pub fn pd_encrypt(block: &[u8], p: &PdParams) -> Vec<u8> {
    block.iter().map(|&x| pd_encrypt_pixel(x, p)).collect()
}

/// Known-plaintext recovery of (alpha, D, N) from (x_i, x_o) pairs by least
/// squares: N from the slope sign, alpha from its magnitude, D from which
/// case's intercept fits better.
pub fn pd_kpa(pairs: &[(u8, u8)], fs: u32) -> Result<PdParams> {
    if pairs.len() < 2 || pairs.iter().all(|&(x, _)| x == pairs[0].0) {
        return Err(Error::DegenerateInput("need two pairs with distinct plain pixels"));
    }
    let n = pairs.len() as f64;
    let sx: f64 = pairs.iter().map(|&(x, _)| x as f64).sum();
    let sy: f64 = pairs.iter().map(|&(_, y)| y as f64).sum();
    let sxx: f64 = pairs.iter().map(|&(x, _)| (x as f64).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|&(x, y)| x as f64 * y as f64).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let neg = slope < 0.0;
    let alpha = slope.abs();
    let alpha_star = (alpha * 100.0).round() as u32;
    let fs_f = fs as f64;
    let d = if neg {
        // intercept FS (case D=0) vs FS*alpha (case D=1)
        (intercept - fs_f).abs() > (intercept - fs_f * alpha).abs()
    } else {
        // intercept 0 (case D=0) vs FS*(1-alpha) (case D=1)
        intercept.abs() > (intercept - fs_f * (1.0 - alpha)).abs()
    };
    Ok(PdParams { alpha_star, d, n: neg, fs })
}

/// A square image of four M x M scrambling blocks (2M x 2M pixels,
/// row-major), quadrant order TL, TR, BL, BR.
#[derive(Debug, Clone)]
pub struct SbImage {
    /// Scrambling-block edge length M.
    pub size: usize,
    pub pixels: Vec<u8>,
}

impl SbImage {
    pub fn new(size: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), 4 * size * size);
        SbImage { size, pixels }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * 2 * self.size + x]
    }

    fn quadrant_origin(&self, q: usize) -> (usize, usize) {
        let m = self.size;
        [(0, 0), (m, 0), (0, m), (m, m)][q]
    }
}

/// Encrypt the four quadrants with independent parameters (fixture builder
/// for the brute-force attack).
pub fn pd_encrypt_sb_image(plain: &SbImage, params: &[PdParams; 4]) -> SbImage {
    let m = plain.size;
    let mut out = plain.clone();
    for (q, p) in params.iter().enumerate() {
        let (ox, oy) = plain.quadrant_origin(q);
        for y in 0..m {
            for x in 0..m {
                let i = (oy + y) * 2 * m + ox + x;
                out.pixels[i] = pd_encrypt_pixel(plain.pixels[i], p);
            }
        }
    }
    out
}

/// Candidate grid for one SB: alpha_star in 50..=90, (D,N) in {(0,0),(1,1)}.
const PD_ALPHA_RANGE: std::ops::RangeInclusive<u32> = 50..=90;
const PD_CANDIDATES: usize = 82;

fn pd_candidate(i: usize, fs: u32) -> PdParams {
    let span = (PD_ALPHA_RANGE.end() - PD_ALPHA_RANGE.start() + 1) as usize;
    let alpha_star = PD_ALPHA_RANGE.start() + (i % span) as u32;
    let dn = i >= span;
    PdParams { alpha_star, d: dn, n: dn, fs }
}

/// Brute-force attack on a 2x2-SB image: exhaust the 82 candidates per SB
/// and pick the joint assignment minimizing the sum of absolute pixel
/// differences across all four internal SB boundaries, plus two unary
/// content priors (full pixel range and dark-skewed luma, see below) that
/// supply the absolute information boundary smoothness cannot. The 82^4
/// joint search collapses to pairwise boundary cost matrices plus two
/// min-marginalizations.
pub fn pd_bruteforce(img: &SbImage, fs: u32) -> [PdParams; 4] {
    let m = img.size;
    // boundary pixel lines for each quadrant, toward each neighbor
    let line = |q: usize, horiz: bool, outer: bool| -> Vec<u8> {
        let (ox, oy) = img.quadrant_origin(q);
        (0..m)
            .map(|t| {
                if horiz {
                    // vertical boundary: rightmost / leftmost column
                    let x = if outer { ox + m - 1 } else { ox };
                    img.get(x, oy + t)
                } else {
                    let y = if outer { oy + m - 1 } else { oy };
                    img.get(ox + t, y)
                }
            })
            .collect()
    };
    // cost[a][b] of explaining one boundary with candidates a (left/top SB)
    // and b (right/bottom SB)
    let boundary_cost = |la: &[u8], lb: &[u8]| -> Vec<Vec<u64>> {
        let dec: Vec<Vec<u8>> = (0..PD_CANDIDATES)
            .map(|i| {
                let p = pd_candidate(i, fs);
                la.iter().map(|&v| pd_decrypt_pixel(v, &p)).collect()
            })
            .collect();
        let dec_b: Vec<Vec<u8>> = (0..PD_CANDIDATES)
            .map(|i| {
                let p = pd_candidate(i, fs);
                lb.iter().map(|&v| pd_decrypt_pixel(v, &p)).collect()
            })
            .collect();
        (0..PD_CANDIDATES)
            .map(|a| {
                (0..PD_CANDIDATES)
                    .map(|b| {
                        dec[a]
                            .iter()
                            .zip(&dec_b[b])
                            .map(|(&x, &y)| (x as i64 - y as i64).unsigned_abs())
                            .sum()
                    })
                    .collect()
            })
            .collect()
    };
    // quadrants: 0 TL, 1 TR, 2 BL, 3 BR
    let c01 = boundary_cost(&line(0, true, true), &line(1, true, false));
    let c02 = boundary_cost(&line(0, false, true), &line(2, false, false));
    let c13 = boundary_cost(&line(1, false, true), &line(3, false, false));
    let c23 = boundary_cost(&line(2, true, true), &line(3, true, false));

    // Boundary smoothness alone is scale-degenerate: enlarging every alpha
    // by a common ratio rescales the decrypted image, which stays smooth and
    // shrinks the SAD. Anchor the absolute scale with a full-range content
    // prior: a region of a natural frame spans nearly the whole pixel range,
    // so its largest cipher value is about alpha*FS under both candidate
    // cases and pins alpha per SB.
    let anchor: [u32; 4] = std::array::from_fn(|q| {
        let (ox, oy) = img.quadrant_origin(q);
        let mut y_max = 0u32;
        for y in 0..m {
            for x in 0..m {
                y_max = y_max.max(img.get(ox + x, oy + y) as u32);
            }
        }
        ((y_max * 100 + fs / 2) / fs).clamp(*PD_ALPHA_RANGE.start(), *PD_ALPHA_RANGE.end())
    });
    // Dark-skew prior, per SB: natural luma sits below mid-gray, while a
    // complemented case bit decodes an SB negated (bright). A flipped SB
    // whose boundary happens to sit near mid-gray is invisible to the
    // boundary cost, so penalize bright decodes directly.
    let bright_excess: Vec<[u64; 4]> = (0..PD_CANDIDATES)
        .map(|i| {
            let p = pd_candidate(i, fs);
            std::array::from_fn(|q| {
                let (ox, oy) = img.quadrant_origin(q);
                let mut hist = [0u32; 256];
                for y in 0..m {
                    for x in 0..m {
                        hist[pd_decrypt_pixel(img.get(ox + x, oy + y), &p) as usize] += 1;
                    }
                }
                let mut seen = 0;
                let median = hist
                    .iter()
                    .position(|&c| {
                        seen += c;
                        seen * 2 >= (m * m) as u32
                    })
                    .unwrap() as u64;
                median.saturating_sub(fs as u64 / 2)
            })
        })
        .collect();
    let unary = |q: usize, i: usize| -> u64 {
        32 * m as u64 * pd_candidate(i, fs).alpha_star.abs_diff(anchor[q]) as u64
            + 8 * m as u64 * bright_excess[i][q]
    };

    // total(a,b,c,d) = pairwise boundary costs + per-SB anchor costs;
    // marginalize a out for each (b,c), then d, then scan (b,c)
    let mut best = (u64::MAX, 0usize, 0usize, 0usize, 0usize);
    let mut best_a = vec![vec![(u64::MAX, 0usize); PD_CANDIDATES]; PD_CANDIDATES];
    let mut best_d = vec![vec![(u64::MAX, 0usize); PD_CANDIDATES]; PD_CANDIDATES];
    for b in 0..PD_CANDIDATES {
        for c in 0..PD_CANDIDATES {
            for a in 0..PD_CANDIDATES {
                let v = c01[a][b] + c02[a][c] + unary(0, a);
                if v < best_a[b][c].0 {
                    best_a[b][c] = (v, a);
                }
            }
            for d in 0..PD_CANDIDATES {
                let v = c13[b][d] + c23[c][d] + unary(3, d);
                if v < best_d[b][c].0 {
                    best_d[b][c] = (v, d);
                }
            }
            let total = best_a[b][c].0 + best_d[b][c].0 + unary(1, b) + unary(2, c);
            if total < best.0 {
                best = (total, best_a[b][c].1, b, c, best_d[b][c].1);
            }
        }
    }
    let chosen = [best.1, best.2, best.3, best.4];
    // Complementing every case bit (same alphas) negates the decrypted
    // image, an exact isometry of any boundary-smoothness cost, so the
    // boundary search determines the assignment only up to a global
    // complement. Natural video luma skews below mid-gray; keep whichever
    // orientation decodes darker.
    let span = (PD_ALPHA_RANGE.end() - PD_ALPHA_RANGE.start() + 1) as usize;
    let complement: [usize; 4] = chosen.map(|i| (i + span) % (2 * span));
    let mean = |cand: &[usize; 4]| -> u64 {
        let m = img.size;
        let mut sum = 0u64;
        for (q, &i) in cand.iter().enumerate() {
            let p = pd_candidate(i, fs);
            let (ox, oy) = img.quadrant_origin(q);
            for y in 0..m {
                for x in 0..m {
                    sum += pd_decrypt_pixel(img.get(ox + x, oy + y), &p) as u64;
                }
            }
        }
        sum
    };
    let pick = if mean(&complement) < mean(&chosen) { complement } else { chosen };
    pick.map(|i| pd_candidate(i, fs))
}

/// Naive search-space size the attack replaces, for reporting.
pub fn pd_bruteforce_space(extended: bool) -> (u64, f64) {
    let per_sb: u64 = if extended { 202 } else { 82 };
    let count = per_sb.pow(4);
    (count, (count as f64).log2())
}

/// Key space of the alpha-rule variant: (3 * (2M/P)^2)^2.
pub fn pd_keyspace(m: u64, p: u64) -> (u64, f64) {
    assert!(p >= 1 && m % p == 0, "P must divide M");
    let base = 3 * (2 * m / p).pow(2);
    let count = base * base;
    (count, (count as f64).log2())
}

// ---------------------------------------------------- WYZ sub-band scheme

/// Sub-band index of each raster position: the Euclidean distance to the DC
/// corner, rounded to nearest. 16 slots are declared; distances in an 8x8
/// block only populate bands 0..=10.
pub const WYZ_SUB_BAND: [u8; 64] = wyz_band_table();

const fn wyz_band_table() -> [u8; 64] {
    let mut t = [0u8; 64];
    let mut r = 0;
    while r < 8 {
        let mut c = 0;
        while c < 8 {
            let d2 = (r * r + c * c) as u64;
            // integer round(sqrt(d2)): smallest k with k^2 + k >= d2
            let mut k = 0u64;
            while k * k + k < d2 {
                k += 1;
            }
            t[r * 8 + c] = k as u8;
            c += 1;
        }
        r += 1;
    }
    t
}

pub const WYZ_BANDS: usize = 16;

#[derive(Debug, Clone, Copy)]
pub struct WyzParams {
    pub beta: f64,
    pub c: f64,
    /// Per-band rounded AC averages (a[0] is unused by the AC rule; the DC
    /// rule uses the DC value itself).
    pub a: [i32; WYZ_BANDS],
}

/// Shift each AC coefficient toward zero by trunc(beta * a_band); shift the
/// DC by dc_sign * trunc(C * beta * b0) when enabled. trunc() rounds toward
/// zero.
pub fn wyz_encrypt(
    block: &[i32; 64],
    params: &WyzParams,
    encrypt_dc: bool,
    dc_sign: i32,
) -> [i32; 64] {
    let mut out = *block;
    for (i, v) in out.iter_mut().enumerate() {
        if i == 0 {
            if encrypt_dc {
                let s = (params.c * params.beta * *v as f64).trunc() as i32;
                *v += dc_sign.signum() * s;
            }
            continue;
        }
        let band = WYZ_SUB_BAND[i] as usize;
        let s = (params.beta * params.a[band] as f64).trunc() as i32;
        if *v >= 0 {
            *v -= s;
        } else {
            *v += s;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct WyzRecovery {
    /// Recovered shift trunc(beta*a_i) per band (None: band not attested).
    pub shifts: [Option<i32>; WYZ_BANDS],
    /// Bracketing interval for beta, when any band has a known nonzero a_i.
    pub beta_interval: Option<(f64, f64)>,
}

/// Known-plaintext attack: each (b, b') pair in a band reveals the band's
/// shift exactly; with known averages the shifts bracket beta.
pub fn wyz_kpa(
    pairs_by_band: &[Vec<(i32, i32)>],
    known_a: Option<&[i32; WYZ_BANDS]>,
) -> Result<WyzRecovery> {
    assert!(pairs_by_band.len() <= WYZ_BANDS);
    let mut shifts = [None; WYZ_BANDS];
    for (band, pairs) in pairs_by_band.iter().enumerate() {
        for &(b, bp) in pairs {
            let s = if b >= 0 { b - bp } else { bp - b };
            match shifts[band] {
                None => shifts[band] = Some(s),
                Some(prev) if prev != s => {
                    return Err(Error::InconsistentPairs { band, a: prev, b: s })
                }
                _ => {}
            }
        }
    }
    let mut interval: Option<(f64, f64)> = None;
    if let Some(a) = known_a {
        for (band, shift) in shifts.iter().enumerate() {
            let (Some(s), m) = (shift, a[band].unsigned_abs() as f64) else { continue };
            if m == 0.0 {
                continue;
            }
            let t = s.unsigned_abs() as f64;
            let (lo, hi) = (t / m, (t + 1.0) / m);
            interval = Some(match interval {
                None => (lo, hi),
                Some((l, h)) => (l.max(lo), h.min(hi)),
            });
        }
    }
    Ok(WyzRecovery { shifts, beta_interval: interval.map(|(l, h)| (l, h.min(1.0))) })
}
