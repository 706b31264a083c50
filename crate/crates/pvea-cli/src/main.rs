//! `pvea`: perceptual encryption of MPEG-1 elementary streams plus the
//! analysis tooling (inspection, concealment, decode-to-image, attacks).

use std::fs;
use std::io::{Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pvea::attacks::{
    deblock_complexity, eca, min_p_bound, pd_bruteforce, pd_bruteforce_space, pd_kpa, wyz_kpa,
    EcaScope, SbImage, WYZ_BANDS,
};
use pvea::cipher::{CipherMode, Uid};
use pvea::decoder::{decode_i_picture_bytes, write_pgm, write_ppm};
use pvea::engine::{
    self, emit_sidecar, find_meta, parse_sidecar, provision, PassReport, PveaConfig, Sidecar,
};
use pvea::forge::{forge_stream, parse_forge_text, random_spec};
use pvea::mpeg1::{census, parse_stream, PictureType};
use pvea::selection::{Factors, Strategy};

#[derive(Parser)]
#[command(name = "pvea", version, about = "Perceptual MPEG-1 video encryption")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print stream structure, the encryptable-element census and factor advisories
    Inspect {
        input: PathBuf,
        /// Machine-readable census
        #[arg(long)]
        json: bool,
    },
    /// Encrypt selected fixed-length codewords in place of their plaintext
    Encrypt {
        #[command(flatten)]
        crypto: CryptoArgs,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Invert a previous encrypt run with the same key and parameters
    Decrypt {
        #[command(flatten)]
        crypto: CryptoArgs,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Embed the public parameter header (UID, factors, mode) into the stream
    Provision {
        #[command(flatten)]
        params: ParamArgs,
        /// Per-video unique id, 32 hex digits (required here)
        #[arg(long, value_parser = parse_hex16)]
        uid: [u8; 16],
        input: PathBuf,
        output: PathBuf,
    },
    /// Error-concealment attack: force candidate encrypted fields to fixed values
    Eca {
        /// Also force DC differentials and motion fields (not just AC signs)
        #[arg(long)]
        full: bool,
        input: PathBuf,
        output: PathBuf,
    },
    /// Decode intra pictures to <stem>_picN.pgm (or .ppm) image files
    Dump {
        input: PathBuf,
        /// Output directory (defaults to the input's directory)
        #[arg(long)]
        outdir: Option<PathBuf>,
        /// Write color PPM instead of luma PGM
        #[arg(long)]
        ppm: bool,
    },
    /// Build a synthetic elementary stream from a text spec or a seed
    Forge {
        output: PathBuf,
        /// Text spec file (omit when using --random)
        #[arg(long, required_unless_present = "random")]
        spec: Option<PathBuf>,
        /// Generate a randomized spec from this seed instead of reading one
        #[arg(long, conflicts_with = "spec")]
        random: Option<u64>,
        /// Also write the declared site list to this file
        #[arg(long)]
        sites: Option<PathBuf>,
    },
    /// Attacks on the legacy affine scrambling scheme
    AttackPd {
        /// Full scale value of the pixel range
        #[arg(long, default_value_t = 255)]
        fs: u32,
        /// Known-plaintext pair file, one "plain cipher" pair per line
        #[arg(long, conflicts_with = "image")]
        pairs: Option<PathBuf>,
        /// Brute-force a 2x2-scrambling-block PGM image
        #[arg(long)]
        image: Option<PathBuf>,
    },
    /// Known-plaintext attack on the legacy sub-band shift scheme
    AttackWyz {
        /// Pair file, one "band plain cipher" triple per line
        pairs: PathBuf,
        /// Known per-band averages, 16 comma-separated integers
        #[arg(long, value_parser = parse_averages)]
        averages: Option<Averages>,
    },
    /// Deblocking-attack complexity of a picture with n elements at factor p
    Complexity {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
    },
}

#[derive(Args)]
struct ParamArgs {
    /// Rough-view factor (intra DC differentials), 0..=1
    #[arg(long, default_value_t = 1.0)]
    psr: f64,
    /// Detail factor (coefficient signs and ESCAPE levels), 0..=1
    #[arg(long, default_value_t = 1.0)]
    psd: f64,
    /// Motion factor (MV signs and residuals), 0..=1
    #[arg(long, default_value_t = 1.0)]
    pmv: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Keystream)]
    mode: ModeArg,
    /// Re-derive the cipher state for every group of pictures
    #[arg(long)]
    gop_keying: bool,
    /// Selection-array period
    #[arg(long, default_value_t = 1024)]
    n: u16,
    /// Per-element random draw instead of the exact-count selection array
    #[arg(long)]
    typical: bool,
    /// Restrict to intra-coded blocks
    #[arg(long)]
    intra_only: bool,
    /// Restrict to sign bits (most significant bit of multi-bit fields)
    #[arg(long)]
    signs_only: bool,
    /// Only touch pictures lo..=hi, e.g. "0..3"
    #[arg(long, value_parser = parse_range)]
    pictures: Option<(usize, usize)>,
}

#[derive(Args)]
struct CryptoArgs {
    /// 128-bit key, 32 hex digits
    #[arg(long, value_parser = parse_hex16)]
    key: [u8; 16],
    /// Per-video unique id, 32 hex digits (else taken from header/sidecar)
    #[arg(long, value_parser = parse_hex16)]
    uid: Option<[u8; 16]>,
    #[command(flatten)]
    params: ParamArgs,
    /// On/off switch points per picture index, e.g. "0:on,5:off"
    #[arg(long, value_parser = parse_schedule)]
    toggle: Option<Schedule>,
    /// Sidecar file: written on encrypt, read on decrypt
    #[arg(long)]
    sidecar: Option<PathBuf>,
}

#[derive(Args)]
struct IoArgs {
    input: PathBuf,
    /// Output file (omit with --in-place)
    #[arg(required_unless_present = "in_place", conflicts_with = "in_place")]
    output: Option<PathBuf>,
    /// Rewrite the input file itself with positioned writes, no temporary copy
    #[arg(long)]
    in_place: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Keystream,
    Feedback,
    Cfb,
    Cascade,
}

impl From<ModeArg> for CipherMode {
    fn from(m: ModeArg) -> CipherMode {
        match m {
            ModeArg::Keystream => CipherMode::Keystream,
            ModeArg::Feedback => CipherMode::KeystreamFeedback,
            ModeArg::Cfb => CipherMode::Cfb,
            ModeArg::Cascade => CipherMode::Cascade,
        }
    }
}

#[derive(Clone)]
struct Schedule(Vec<(usize, bool)>);

#[derive(Clone)]
struct Averages([i32; WYZ_BANDS]);

fn parse_hex16(s: &str) -> Result<[u8; 16], String> {
    let v = hex::decode(s).map_err(|e| e.to_string())?;
    v.try_into().map_err(|_| "expected 32 hex digits".into())
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s.split_once("..").ok_or("expected lo..hi")?;
    let lo = lo.parse().map_err(|_| "bad lower bound")?;
    let hi = hi.parse().map_err(|_| "bad upper bound")?;
    if lo > hi {
        return Err("empty range".into());
    }
    Ok((lo, hi))
}

fn parse_schedule(s: &str) -> Result<Schedule, String> {
    let mut v = Vec::new();
    for part in s.split(',') {
        let (idx, state) = part.split_once(':').ok_or("expected idx:on|off")?;
        let idx = idx.trim().parse().map_err(|_| "bad picture index")?;
        let on = match state.trim() {
            "on" => true,
            "off" => false,
            _ => return Err("expected on or off".into()),
        };
        v.push((idx, on));
    }
    Ok(Schedule(v))
}

fn parse_averages(s: &str) -> Result<Averages, String> {
    let v: Vec<i32> = s
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| "bad integer".to_string()))
        .collect::<Result<_, _>>()?;
    v.try_into()
        .map(Averages)
        .map_err(|_| format!("expected {WYZ_BANDS} integers"))
}

fn factor(p: f64, name: &str) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        bail!("{name} must lie in [0, 1], got {p}");
    }
    Ok(p)
}

impl ParamArgs {
    fn to_config(&self) -> Result<PveaConfig> {
        Ok(PveaConfig {
            factors: Factors::new(
                factor(self.psr, "--psr")?,
                factor(self.psd, "--psd")?,
                factor(self.pmv, "--pmv")?,
            ),
            mode: self.mode.into(),
            gop_keying: self.gop_keying,
            n: self.n,
            strategy: if self.typical { Strategy::Typical } else { Strategy::SeArray },
            picture_range: self.pictures,
            intra_blocks_only: self.intra_only,
            signs_only: self.signs_only,
        })
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Inspect { input, json } => inspect(&input, json),
        Cmd::Encrypt { crypto, io } => crypt(&crypto, &io, false),
        Cmd::Decrypt { crypto, io } => crypt(&crypto, &io, true),
        Cmd::Provision { params, uid, input, output } => {
            let bytes = fs::read(&input).with_context(|| input.display().to_string())?;
            let out = provision(&bytes, Uid(uid), &params.to_config()?)?;
            fs::write(&output, &out)?;
            println!("provisioned: {} (+{} bytes)", output.display(), out.len() - bytes.len());
            Ok(())
        }
        Cmd::Eca { full, input, output } => {
            let bytes = fs::read(&input).with_context(|| input.display().to_string())?;
            let scope = if full { EcaScope::Full } else { EcaScope::AcSigns };
            fs::write(&output, eca(&bytes, scope)?)?;
            println!("concealed: {}", output.display());
            Ok(())
        }
        Cmd::Dump { input, outdir, ppm } => dump(&input, outdir.as_deref(), ppm),
        Cmd::Forge { output, spec, random, sites } => forge(spec, &output, random, sites),
        Cmd::AttackPd { fs, pairs, image } => attack_pd(fs, pairs, image),
        Cmd::AttackWyz { pairs, averages } => attack_wyz(&pairs, averages),
        Cmd::Complexity { n, p } => {
            let r = deblock_complexity(n, p);
            println!(
                "n = {}, p = {}: {} elements selected, log2 complexity = {:.4}",
                r.n, r.p, r.selected, r.log2_complexity
            );
            println!(
                "{} the 2^100 work-factor threshold",
                if r.meets_threshold { "meets" } else { "below" }
            );
            let b = min_p_bound(n);
            println!(
                "minimum factor for this n: {}/{} (conservative), {}/{} (exact)",
                b.conservative.0, b.conservative.1, b.refined.0, b.refined.1
            );
            Ok(())
        }
    }
}

fn inspect(input: &Path, json: bool) -> Result<()> {
    let bytes = fs::read(input).with_context(|| input.display().to_string())?;
    let map = parse_stream(&bytes)?;
    let c = census(&map);
    if json {
        let kinds: Vec<String> = c
            .per_kind
            .iter()
            .map(|(k, v)| format!("\"{k}\":{v}"))
            .collect();
        let pics: Vec<String> = c.per_picture.iter().map(|n| n.to_string()).collect();
        println!(
            "{{\"width\":{},\"height\":{},\"gops\":{},\"pictures\":{},\"sr\":{},\"sd\":{},\"mv\":{},\"per_kind\":{{{}}},\"per_picture\":[{}]}}",
            map.sequence.width,
            map.sequence.height,
            map.gops.len(),
            map.pictures.len(),
            c.sr,
            c.sd,
            c.mv,
            kinds.join(","),
            pics.join(",")
        );
        return Ok(());
    }
    println!(
        "{}x{}, {} gop(s), {} picture(s), {} bits",
        map.sequence.width,
        map.sequence.height,
        map.gops.len(),
        map.pictures.len(),
        map.total_bits
    );
    if let Some(meta) = find_meta(&map) {
        let (sr, sd, mv) = meta.factors.as_fixed_triple();
        println!(
            "provisioned header: mode {:?}, factors {}/{}/{} (x1e-4), uid {}",
            meta.mode,
            sr,
            sd,
            mv,
            hex::encode(meta.uid.0)
        );
    }
    println!("encryptable elements: sr {}  sd {}  mv {}", c.sr, c.sd, c.mv);
    for (kind, count) in &c.per_kind {
        println!("  {kind:<14} {count}");
    }
    for (i, (pic, n)) in map.pictures.iter().zip(&c.per_picture).enumerate() {
        print!("picture {i} ({:?}, gop {}): {n} elements", pic.picture_type, pic.gop_index);
        if *n > 0 {
            let b = min_p_bound(*n);
            if deblock_complexity(*n, b.refined.0 as f64 / b.refined.1 as f64).meets_threshold {
                println!("; deblocking-resistant from p >= {}/{}", b.refined.0, b.refined.1);
            } else {
                println!("; too few elements to resist a deblocking attack at any factor");
            }
        } else {
            println!();
        }
    }
    if c.sr == 0 {
        println!("advisory: no intra DC differential sites; p_sr has no effect on this stream");
    }
    Ok(())
}

fn crypt(crypto: &CryptoArgs, io: &IoArgs, decrypting: bool) -> Result<()> {
    let bytes = fs::read(&io.input).with_context(|| io.input.display().to_string())?;
    let config = crypto.params.to_config()?;
    let mut uid = crypto.uid.map(Uid);
    let mut schedule = crypto.toggle.clone().map(|s| s.0);

    if decrypting {
        if let Some(path) = &crypto.sidecar {
            let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
            let side = parse_sidecar(&text)?;
            uid = uid.or(side.uid);
            if schedule.is_none() && !side.schedule.is_empty() {
                schedule = Some(side.schedule);
            }
        }
    }

    let report: PassReport = match (&schedule, decrypting) {
        (None, false) => engine::encrypt(&bytes, &crypto.key, &config, uid)?,
        (None, true) => engine::decrypt(&bytes, &crypto.key, &config, uid)?,
        (Some(s), false) => engine::toggle_encrypt(&bytes, &crypto.key, &config, uid, s)?,
        (Some(s), true) => engine::toggle_decrypt(&bytes, &crypto.key, &config, uid, s)?,
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }

    if io.in_place {
        patch_in_place(&io.input, &bytes, &report.bytes)?;
    } else {
        fs::write(io.output.as_ref().unwrap(), &report.bytes)?;
    }

    if !decrypting {
        if let Some(path) = &crypto.sidecar {
            let side = Sidecar { uid, schedule: schedule.unwrap_or_default() };
            fs::write(path, emit_sidecar(&side))?;
        }
    }
    println!(
        "{}: {} of {} eligible elements transformed",
        if decrypting { "decrypted" } else { "encrypted" },
        report.selected,
        report.eligible
    );
    Ok(())
}

/// Positioned writes of only the changed byte runs; the file never moves
/// through a temporary copy (sizes are identical by construction).
fn patch_in_place(path: &Path, old: &[u8], new: &[u8]) -> Result<()> {
    assert_eq!(old.len(), new.len());
    let mut f = fs::OpenOptions::new().write(true).open(path)?;
    let mut i = 0;
    while i < new.len() {
        if old[i] == new[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < new.len() && old[i] != new[i] {
            i += 1;
        }
        f.seek(SeekFrom::Start(start as u64))?;
        f.write_all(&new[start..i])?;
    }
    Ok(())
}

fn dump(input: &Path, outdir: Option<&Path>, ppm: bool) -> Result<()> {
    let bytes = fs::read(input).with_context(|| input.display().to_string())?;
    let map = parse_stream(&bytes)?;
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "stream".into());
    let dir = outdir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| input.parent().unwrap_or(Path::new(".")).to_path_buf());
    let mut wrote = 0;
    for (i, pic) in map.pictures.iter().enumerate() {
        if pic.picture_type != PictureType::I {
            continue;
        }
        let planes = decode_i_picture_bytes(&bytes, i)?;
        let ext = if ppm { "ppm" } else { "pgm" };
        let path = dir.join(format!("{stem}_pic{i}.{ext}"));
        if ppm {
            write_ppm(&planes, &path)?;
        } else {
            write_pgm(&planes[0], &path)?;
        }
        println!("wrote {}", path.display());
        wrote += 1;
    }
    if wrote == 0 {
        bail!("no intra pictures in {}", input.display());
    }
    Ok(())
}

fn forge(
    spec: Option<PathBuf>,
    output: &Path,
    random: Option<u64>,
    sites: Option<PathBuf>,
) -> Result<()> {
    let spec = match (spec, random) {
        (Some(path), None) => {
            let text = fs::read_to_string(&path).with_context(|| path.display().to_string())?;
            parse_forge_text(&text)?
        }
        (None, Some(seed)) => random_spec(seed),
        _ => bail!("give either a spec file or --random <seed>"),
    };
    let forged = forge_stream(&spec)?;
    fs::write(output, &forged.bytes)?;
    println!(
        "forged {} ({} bytes, {} encryptable elements)",
        output.display(),
        forged.bytes.len(),
        forged.sites.len()
    );
    if let Some(path) = sites {
        let mut text = String::new();
        for s in &forged.sites {
            text.push_str(&format!(
                "{}\t{}\t{:?}\tpic {}\n",
                s.bit_offset, s.bit_length, s.kind, s.picture_index
            ));
        }
        fs::write(&path, text)?;
        println!("site list: {}", path.display());
    }
    Ok(())
}

fn attack_pd(fs_val: u32, pairs: Option<PathBuf>, image: Option<PathBuf>) -> Result<()> {
    match (pairs, image) {
        (Some(path), None) => {
            let text = fs::read_to_string(&path).with_context(|| path.display().to_string())?;
            let mut v = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let mut it = line.split_whitespace();
                let (Some(a), Some(b)) = (it.next(), it.next()) else {
                    bail!("line {}: expected \"plain cipher\"", i + 1);
                };
                v.push((a.parse::<u8>()?, b.parse::<u8>()?));
            }
            let p = pd_kpa(&v, fs_val)?;
            println!(
                "recovered: alpha* = {} (alpha = {:.2}), D = {}, N = {}",
                p.alpha_star,
                p.alpha(),
                p.d as u8,
                p.n as u8
            );
        }
        (None, Some(path)) => {
            let img = read_pgm_sb(&path)?;
            let params = pd_bruteforce(&img, fs_val);
            let (count, bits) = pd_bruteforce_space(false);
            println!("searched {count} joint assignments (2^{bits:.1}) via boundary costs");
            for (q, p) in params.iter().enumerate() {
                println!(
                    "SB {q}: alpha* = {}, D = {}, N = {}",
                    p.alpha_star, p.d as u8, p.n as u8
                );
            }
        }
        _ => bail!("give exactly one of --pairs or --image"),
    }
    Ok(())
}

/// Minimal binary PGM (P5, maxval <= 255) reader for a square 2Mx2M image.
fn read_pgm_sb(path: &Path) -> Result<SbImage> {
    let data = fs::read(path).with_context(|| path.display().to_string())?;
    let mut pos = 0;
    let mut token = || -> Result<String> {
        while pos < data.len() && (data[pos].is_ascii_whitespace() || data[pos] == b'#') {
            if data[pos] == b'#' {
                while pos < data.len() && data[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&data[start..pos]).into_owned())
    };
    if token()? != "P5" {
        bail!("not a binary PGM file");
    }
    let w: usize = token()?.parse()?;
    let h: usize = token()?.parse()?;
    let maxval: usize = token()?.parse()?;
    if maxval > 255 {
        bail!("16-bit PGM not supported");
    }
    pos += 1; // single whitespace after maxval
    if w != h || w % 2 != 0 {
        bail!("need a square image with even side, got {w}x{h}");
    }
    let pixels = data[pos..].to_vec();
    if pixels.len() != w * h {
        bail!("truncated PGM payload");
    }
    Ok(SbImage::new(w / 2, pixels))
}

fn attack_wyz(pairs: &Path, averages: Option<Averages>) -> Result<()> {
    let text = fs::read_to_string(pairs).with_context(|| pairs.display().to_string())?;
    let mut by_band = vec![Vec::new(); WYZ_BANDS];
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(band), Some(a), Some(b)) = (it.next(), it.next(), it.next()) else {
            bail!("line {}: expected \"band plain cipher\"", i + 1);
        };
        let band: usize = band.parse()?;
        if band >= WYZ_BANDS {
            bail!("line {}: band {band} out of range", i + 1);
        }
        by_band[band].push((a.parse::<i32>()?, b.parse::<i32>()?));
    }
    let rec = wyz_kpa(&by_band, averages.as_ref().map(|a| &a.0))?;
    for (band, s) in rec.shifts.iter().enumerate() {
        if let Some(s) = s {
            println!("band {band}: shift {s}");
        }
    }
    match rec.beta_interval {
        Some((lo, hi)) => println!("beta in [{lo:.6}, {hi:.6})"),
        None => println!("beta not bracketed (no usable band averages)"),
    }
    Ok(())
}
