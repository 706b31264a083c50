//! Whole-stream orchestration: parse, select, and patch selected FLC sites
//! in place. Strict size preservation: apart from the one-time `provision`
//! header insertion, no operation ever changes the stream length.

use crate::bitio::{apply_patch, read_at, BitPatch};
use crate::cipher::{
    cascade_flush, derive_seed, embed_payload, site_payload, CipherMode, CipherState, Uid,
    TAG_KEYSTREAM, TAG_MASK_MV, TAG_MASK_SD, TAG_MASK_SR,
};
use crate::error::{Error, Result};
use crate::mpeg1::{parse_stream, Category, FlcKind, FlcSite, StreamMap};
use crate::selection::{category_of, Factors, SelectionWalker, Strategy, DEFAULT_PERIOD};

#[derive(Debug, Clone)]
pub struct PveaConfig {
    pub factors: Factors,
    pub mode: CipherMode,
    pub gop_keying: bool,
    /// Selection-mask period.
    pub n: u16,
    pub strategy: Strategy,
    /// Inclusive picture-index range; sites outside are left untouched and
    /// advance no state (ROI-style partial encryption).
    pub picture_range: Option<(usize, usize)>,
    /// Restrict detail/motion processing to intra macroblocks.
    pub intra_blocks_only: bool,
    /// Encrypt only the leading bit of DC differentials and the most
    /// significant bit of motion residuals.
    pub signs_only: bool,
}

impl Default for PveaConfig {
    fn default() -> Self {
        PveaConfig {
            factors: Factors::default(),
            mode: CipherMode::Keystream,
            gop_keying: false,
            n: DEFAULT_PERIOD,
            strategy: Strategy::SeArray,
            picture_range: None,
            intra_blocks_only: false,
            signs_only: false,
        }
    }
}

pub const META_MAGIC: [u8; 4] = *b"PVEA";
pub const META_VERSION: u8 = 0x01;
/// 27 raw record bytes -> 31 packed bytes + 4 magic bytes.
const META_RAW_LEN: usize = 27;
pub const META_PAYLOAD_LEN: usize = 4 + (META_RAW_LEN * 8).div_ceil(7);

/// Public per-stream metadata embedded in a user_data segment right after
/// the sequence header. The key is never embedded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaHeader {
    pub version: u8,
    pub mode: CipherMode,
    pub gop_keying: bool,
    pub strategy: Strategy,
    pub intra_blocks_only: bool,
    pub signs_only: bool,
    pub factors: Factors,
    pub n: u16,
    pub uid: Uid,
}

impl MetaHeader {
    pub fn from_config(config: &PveaConfig, uid: Uid) -> Self {
        MetaHeader {
            version: META_VERSION,
            mode: config.mode,
            gop_keying: config.gop_keying,
            strategy: config.strategy,
            intra_blocks_only: config.intra_blocks_only,
            signs_only: config.signs_only,
            factors: config.factors,
            n: config.n,
            uid,
        }
    }

    /// Apply the header's published parameters on top of pass-local options
    /// (picture range) taken from `local`.
    pub fn to_config(&self, local: &PveaConfig) -> PveaConfig {
        PveaConfig {
            factors: self.factors,
            mode: self.mode,
            gop_keying: self.gop_keying,
            n: self.n,
            strategy: self.strategy,
            picture_range: local.picture_range,
            intra_blocks_only: self.intra_blocks_only,
            signs_only: self.signs_only,
        }
    }

    /// Serialize to a user_data payload. The record bytes after the magic
    /// are packed 7 bits per byte with the MSB set, so the payload can never
    /// emulate a start code.
    pub fn to_payload(&self) -> Vec<u8> {
        let mut raw = Vec::with_capacity(META_RAW_LEN);
        raw.push(self.version);
        raw.push(match self.mode {
            CipherMode::Keystream => 0,
            CipherMode::KeystreamFeedback => 1,
            CipherMode::Cfb => 2,
            CipherMode::Cascade => 3,
        });
        let mut flags = 0u8;
        if self.gop_keying {
            flags |= 0x01;
        }
        if self.strategy == Strategy::Typical {
            flags |= 0x02;
        }
        if self.intra_blocks_only {
            flags |= 0x04;
        }
        if self.signs_only {
            flags |= 0x08;
        }
        raw.push(flags);
        let (sr, sd, mv) = self.factors.as_fixed_triple();
        for v in [sr, sd, mv, self.n] {
            raw.extend_from_slice(&v.to_be_bytes());
        }
        raw.extend_from_slice(&self.uid.0);
        debug_assert_eq!(raw.len(), META_RAW_LEN);
        let mut payload = META_MAGIC.to_vec();
        payload.extend(pack7(&raw));
        payload
    }

    pub fn from_payload(payload: &[u8]) -> Result<MetaHeader> {
        let bad = |reason: &str| Error::BadSidecar(format!("metadata header: {reason}"));
        if payload.len() < 4 || payload[..4] != META_MAGIC {
            return Err(bad("missing magic"));
        }
        let raw = unpack7(&payload[4..], META_RAW_LEN).ok_or_else(|| bad("truncated record"))?;
        if raw[0] != META_VERSION {
            return Err(bad("unsupported version"));
        }
        let mode = match raw[1] {
            0 => CipherMode::Keystream,
            1 => CipherMode::KeystreamFeedback,
            2 => CipherMode::Cfb,
            3 => CipherMode::Cascade,
            _ => return Err(bad("unknown mode")),
        };
        let flags = raw[2];
        let rd16 = |i: usize| u16::from_be_bytes([raw[i], raw[i + 1]]);
        let (sr, sd, mv, n) = (rd16(3), rd16(5), rd16(7), rd16(9));
        if sr > 10_000 || sd > 10_000 || mv > 10_000 {
            return Err(bad("factor out of range"));
        }
        if n == 0 {
            return Err(bad("zero mask period"));
        }
        let mut uid = [0u8; 16];
        uid.copy_from_slice(&raw[11..27]);
        Ok(MetaHeader {
            version: raw[0],
            mode,
            gop_keying: flags & 0x01 != 0,
            strategy: if flags & 0x02 != 0 { Strategy::Typical } else { Strategy::SeArray },
            intra_blocks_only: flags & 0x04 != 0,
            signs_only: flags & 0x08 != 0,
            factors: Factors::from_fixed(sr, sd, mv),
            n,
            uid: Uid(uid),
        })
    }
}

fn pack7(raw: &[u8]) -> Vec<u8> {
    let total_bits = raw.len() * 8;
    let mut out = Vec::with_capacity(total_bits.div_ceil(7));
    let mut i = 0;
    while i < total_bits {
        let mut b = 0u8;
        for k in 0..7 {
            let p = i + k;
            let bit = if p < total_bits {
                (raw[p / 8] >> (7 - p % 8)) & 1
            } else {
                0
            };
            b = (b << 1) | bit;
        }
        out.push(0x80 | b);
        i += 7;
    }
    out
}

fn unpack7(packed: &[u8], raw_len: usize) -> Option<Vec<u8>> {
    let need = (raw_len * 8).div_ceil(7);
    if packed.len() < need {
        return None;
    }
    let mut bits = Vec::with_capacity(need * 7);
    for &b in &packed[..need] {
        if b & 0x80 == 0 {
            return None;
        }
        for k in 0..7 {
            bits.push((b >> (6 - k)) & 1);
        }
    }
    let mut raw = vec![0u8; raw_len];
    for (p, bit) in bits.iter().take(raw_len * 8).enumerate() {
        raw[p / 8] |= bit << (7 - p % 8);
    }
    Some(raw)
}

/// Locate and decode an embedded metadata header, if any.
pub fn find_meta(map: &StreamMap) -> Option<MetaHeader> {
    map.user_data
        .iter()
        .find(|u| u.payload.starts_with(&META_MAGIC))
        .and_then(|u| MetaHeader::from_payload(&u.payload).ok())
}

/// Insert the metadata user_data segment immediately after the sequence
/// header. The only size-changing operation; guarded against repetition.
pub fn provision(bytes: &[u8], uid: Uid, config: &PveaConfig) -> Result<Vec<u8>> {
    let map = parse_stream(bytes)?;
    if find_meta(&map).is_some() {
        return Err(Error::AlreadyProvisioned);
    }
    // the first structural element after the sequence header
    let mut insert_at = bytes.len();
    for b in map
        .gops
        .iter()
        .map(|g| g.start_byte)
        .chain(map.pictures.iter().map(|p| p.start_byte))
        .chain(map.user_data.iter().map(|u| u.byte_offset))
    {
        insert_at = insert_at.min(b);
    }
    let header = MetaHeader::from_config(config, uid);
    let payload = header.to_payload();
    let mut out = Vec::with_capacity(bytes.len() + 4 + payload.len());
    out.extend_from_slice(&bytes[..insert_at]);
    out.extend_from_slice(&[0x00, 0x00, 0x01, 0xB2]);
    out.extend_from_slice(&payload);
    out.extend_from_slice(&bytes[insert_at..]);
    Ok(out)
}

/// Sidecar carrying out-of-band parameters for un-provisioned streams and
/// toggle schedules.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sidecar {
    pub uid: Option<Uid>,
    pub schedule: Vec<(usize, bool)>,
}

pub fn parse_sidecar(text: &str) -> Result<Sidecar> {
    let mut s = Sidecar::default();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::BadSidecar(format!("expected key=value, got {line:?}")));
        };
        match k.trim() {
            "uid" => {
                let v = v.trim();
                let mut uid = [0u8; 16];
                if v.len() != 32 {
                    return Err(Error::BadSidecar("uid must be 32 hex digits".into()));
                }
                for (i, chunk) in v.as_bytes().chunks(2).enumerate() {
                    let s = std::str::from_utf8(chunk).unwrap();
                    uid[i] = u8::from_str_radix(s, 16)
                        .map_err(|_| Error::BadSidecar("uid must be hex".into()))?;
                }
                s.uid = Some(Uid(uid));
            }
            "schedule" => {
                for item in v.trim().split(',').filter(|i| !i.is_empty()) {
                    let Some((idx, st)) = item.split_once(':') else {
                        return Err(Error::BadSidecar(format!("bad schedule item {item:?}")));
                    };
                    let idx: usize = idx
                        .trim()
                        .parse()
                        .map_err(|_| Error::BadSidecar(format!("bad schedule index {idx:?}")))?;
                    let on = match st.trim() {
                        "on" => true,
                        "off" => false,
                        other => {
                            return Err(Error::BadSidecar(format!("bad schedule state {other:?}")))
                        }
                    };
                    s.schedule.push((idx, on));
                }
            }
            other => return Err(Error::BadSidecar(format!("unknown key {other:?}"))),
        }
    }
    Ok(s)
}

pub fn emit_sidecar(s: &Sidecar) -> String {
    let mut out = String::new();
    if let Some(uid) = &s.uid {
        out.push_str("uid=");
        for b in uid.0 {
            out.push_str(&format!("{b:02x}"));
        }
        out.push('\n');
    }
    if !s.schedule.is_empty() {
        let items: Vec<String> = s
            .schedule
            .iter()
            .map(|(i, on)| format!("{i}:{}", if *on { "on" } else { "off" }))
            .collect();
        out.push_str(&format!("schedule={}\n", items.join(",")));
    }
    out
}

/// Outcome of an encrypt/decrypt pass.
#[derive(Debug)]
pub struct PassReport {
    pub bytes: Vec<u8>,
    /// Sites actually transformed.
    pub selected: usize,
    /// Sites eligible after filters (schedule, range, partial options).
    pub eligible: usize,
    pub warnings: Vec<String>,
}

pub fn encrypt(
    bytes: &[u8],
    key: &[u8; 16],
    config: &PveaConfig,
    uid: Option<Uid>,
) -> Result<PassReport> {
    run_pass(bytes, key, config, uid, None, false)
}

pub fn decrypt(
    bytes: &[u8],
    key: &[u8; 16],
    config: &PveaConfig,
    uid: Option<Uid>,
) -> Result<PassReport> {
    run_pass(bytes, key, config, uid, None, true)
}

/// Encrypt with an on/off switch schedule: pictures in "off" spans are
/// copied bit-exact and advance no selection or cipher state. The same
/// schedule must be presented at decryption (sidecar).
pub fn toggle_encrypt(
    bytes: &[u8],
    key: &[u8; 16],
    config: &PveaConfig,
    uid: Option<Uid>,
    schedule: &[(usize, bool)],
) -> Result<PassReport> {
    run_pass(bytes, key, config, uid, Some(schedule), false)
}

pub fn toggle_decrypt(
    bytes: &[u8],
    key: &[u8; 16],
    config: &PveaConfig,
    uid: Option<Uid>,
    schedule: &[(usize, bool)],
) -> Result<PassReport> {
    run_pass(bytes, key, config, uid, Some(schedule), true)
}

struct PendingSite {
    kind: FlcKind,
    offset: u64,
    length: u32,
    field: u32,
    width: u32,
    payload: u32,
    msb_only: bool,
}

fn run_pass(
    bytes: &[u8],
    key: &[u8; 16],
    local: &PveaConfig,
    uid: Option<Uid>,
    schedule: Option<&[(usize, bool)]>,
    decrypt: bool,
) -> Result<PassReport> {
    let map = parse_stream(bytes)?;
    let meta = find_meta(&map);
    let config = match &meta {
        Some(m) => m.to_config(local),
        None => local.clone(),
    };
    let uid = uid
        .or_else(|| meta.as_ref().map(|m| m.uid))
        .filter(|u| !u.is_absent())
        .ok_or(Error::MissingUid)?;

    let mut schedule = schedule.map(|s| s.to_vec()).unwrap_or_default();
    schedule.sort_by_key(|&(i, _)| i);
    for &(i, _) in &schedule {
        if i >= map.pictures.len() {
            return Err(Error::ScheduleOutOfRange { index: i, pictures: map.pictures.len() });
        }
    }
    let active_at = |picture: usize| -> bool {
        let mut on = schedule.is_empty(); // no schedule: always on
        for &(i, state) in &schedule {
            if i <= picture {
                on = state;
            }
        }
        on
    };

    let warnings = if decrypt { Vec::new() } else { factor_warnings(&map, &config) };

    let seeds = [
        derive_seed(key, &uid, 0, TAG_MASK_SR),
        derive_seed(key, &uid, 0, TAG_MASK_SD),
        derive_seed(key, &uid, 0, TAG_MASK_MV),
    ];
    let mut walker = SelectionWalker::new(config.strategy, config.factors, config.n as usize, seeds);
    let mut state: Option<(u64, CipherState)> = None;
    let mut pending: Vec<PendingSite> = Vec::new();
    let mut out = bytes.to_vec();
    let mut selected = 0usize;
    let mut eligible = 0usize;

    for site in &map.sites {
        if let Some((lo, hi)) = config.picture_range {
            if site.picture_index < lo || site.picture_index > hi {
                continue;
            }
        }
        if !active_at(site.picture_index) {
            continue;
        }
        if config.intra_blocks_only
            && category_of(site.kind) != Category::Sr
            && !site.intra_mb
        {
            continue;
        }
        eligible += 1;

        // per-GOP rekeying: a state per GOP index; without it, one state
        let state_gop = if config.gop_keying { site.gop_index as u64 } else { 0 };
        let needs_new = state.as_ref().map(|(g, _)| *g != state_gop).unwrap_or(true);
        if needs_new {
            if config.mode == CipherMode::Cascade {
                flush_cascade(&mut out, &mut state, &mut pending, decrypt)?;
            }
            state = Some((
                state_gop,
                CipherState::derive(key, &uid, state_gop, TAG_KEYSTREAM, config.mode),
            ));
        }

        if !walker.decide(site.kind) {
            continue;
        }
        selected += 1;
        let st = &mut state.as_mut().unwrap().1;
        let field = read_at(&out, site.bit_offset, site.bit_length)?;
        let msb_only = config.signs_only
            && matches!(site.kind, FlcKind::IntraDcDiff { .. } | FlcKind::MvResidual { .. })
            && site.bit_length > 1;
        let (width, payload) = if msb_only {
            (1, field >> (site.bit_length - 1))
        } else {
            site_payload(site.kind, field)?
        };
        if config.mode == CipherMode::Cascade {
            pending.push(PendingSite {
                kind: site.kind,
                offset: site.bit_offset,
                length: site.bit_length,
                field,
                width,
                payload,
                msb_only,
            });
            continue;
        }
        let out_payload = st.process_payload(width, payload, decrypt);
        patch_site(&mut out, site, field, out_payload, msb_only)?;
    }
    if config.mode == CipherMode::Cascade {
        flush_cascade(&mut out, &mut state, &mut pending, decrypt)?;
    }
    debug_assert_eq!(out.len(), bytes.len());
    Ok(PassReport { bytes: out, selected, eligible, warnings })
}

fn patch_site(
    out: &mut [u8],
    site: &FlcSite,
    field: u32,
    payload: u32,
    msb_only: bool,
) -> Result<()> {
    if msb_only {
        apply_patch(out, BitPatch::new(site.bit_offset, 1, payload))
    } else {
        let new_field = embed_payload(site.kind, field, payload)?;
        apply_patch(out, BitPatch::new(site.bit_offset, site.bit_length, new_field))
    }
}

fn flush_cascade(
    out: &mut [u8],
    state: &mut Option<(u64, CipherState)>,
    pending: &mut Vec<PendingSite>,
    decrypt: bool,
) -> Result<()> {
    if pending.is_empty() {
        return Ok(());
    }
    let st = &mut state.as_mut().expect("pending sites imply a state").1;
    let payloads: Vec<(u32, u32)> = pending.iter().map(|p| (p.width, p.payload)).collect();
    let results = cascade_flush(st, &payloads, decrypt);
    for (p, r) in pending.iter().zip(results) {
        if p.msb_only {
            apply_patch(out, BitPatch::new(p.offset, 1, r))?;
        } else {
            let new_field = embed_payload(p.kind, p.field, r)?;
            apply_patch(out, BitPatch::new(p.offset, p.length, new_field))?;
        }
    }
    pending.clear();
    Ok(())
}

/// Advisory bound: with fewer than 100 eligible elements in a picture, a
/// nonzero factor may leave the picture only lightly scrambled.
fn factor_warnings(map: &StreamMap, config: &PveaConfig) -> Vec<String> {
    let cats = [Category::Sr, Category::Sd, Category::Mv];
    let names = ["p_sr", "p_sd", "p_mv"];
    let mut counts = vec![[0usize; 3]; map.pictures.len()];
    for s in &map.sites {
        counts[s.picture_index][category_of(s.kind) as usize] += 1;
    }
    let mut warnings = Vec::new();
    for (pic, row) in counts.iter().enumerate() {
        for (ci, &n) in row.iter().enumerate() {
            let p = config.factors.real(cats[ci]);
            let expected = p * n as f64;
            // a nonzero factor over few (or no) elements barely scrambles
            if p > 0.0 && n == 0 {
                warnings.push(format!(
                    "picture {pic}: no {} elements; the factor has no effect here",
                    names[ci]
                ));
            } else if p > 0.0 && expected < 100.0 {
                warnings.push(format!(
                    "picture {pic}: {} x {n} elements = {expected:.1} expected encryptions (< 100); \
                     consider a larger factor",
                    names[ci]
                ));
            }
        }
    }
    warnings
}
