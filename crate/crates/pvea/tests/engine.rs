//! End-to-end engine properties: losslessness, strict size preservation,
//! patch locality, format compliance, metadata handling and toggling.

use pvea::cipher::{CipherMode, Uid};
use pvea::engine::*;
use pvea::error::Error;
use pvea::forge::{forge_dark_fixture, forge_stream, random_spec};
use pvea::mpeg1::{parse_stream, site_skeleton};
use pvea::selection::{Factors, Strategy};

const KEY: [u8; 16] = *b"0123456789abcdef";
const UID: Uid = Uid(*b"fixture-uid-0001");

fn fixture(seed: u64) -> Vec<u8> {
    forge_stream(&random_spec(seed)).unwrap().bytes
}

fn config(f: (f64, f64, f64), mode: CipherMode) -> PveaConfig {
    PveaConfig {
        factors: Factors::new(f.0, f.1, f.2),
        mode,
        ..PveaConfig::default()
    }
}

const ALL_MODES: [CipherMode; 4] = [
    CipherMode::Keystream,
    CipherMode::KeystreamFeedback,
    CipherMode::Cfb,
    CipherMode::Cascade,
];

#[test]
fn round_trip_all_modes() {
    for seed in 0..25u64 {
        let plain = fixture(seed);
        for mode in ALL_MODES {
            let cfg = config((0.7, 0.5, 1.0), mode);
            let enc = encrypt(&plain, &KEY, &cfg, Some(UID)).unwrap();
            assert_eq!(enc.bytes.len(), plain.len(), "seed {seed} {mode:?}");
            let dec = decrypt(&enc.bytes, &KEY, &cfg, Some(UID)).unwrap();
            assert_eq!(dec.bytes, plain, "seed {seed} {mode:?}");
        }
    }
}

#[test]
fn zero_factors_is_identity() {
    let plain = fixture(1);
    let cfg = config((0.0, 0.0, 0.0), CipherMode::Keystream);
    let enc = encrypt(&plain, &KEY, &cfg, Some(UID)).unwrap();
    assert_eq!(enc.bytes, plain);
    assert_eq!(enc.selected, 0);
}

#[test]
fn diff_confined_to_selected_sites() {
    // p_sr = 1, others 0: XOR diff must land only in IntraDcDiff bit ranges
    let plain = fixture(3);
    let sites = parse_stream(&plain).unwrap().sites;
    let cfg = config((1.0, 0.0, 0.0), CipherMode::Keystream);
    let enc = encrypt(&plain, &KEY, &cfg, Some(UID)).unwrap();
    let allowed: Vec<(u64, u64)> = sites
        .iter()
        .filter(|s| matches!(s.kind, pvea::mpeg1::FlcKind::IntraDcDiff { .. }))
        .map(|s| (s.bit_offset, s.bit_offset + s.bit_length as u64))
        .collect();
    let mut diff_bits = 0;
    for (i, (a, b)) in plain.iter().zip(&enc.bytes).enumerate() {
        let x = a ^ b;
        for bit in 0..8u64 {
            if x & (0x80 >> bit) != 0 {
                let p = i as u64 * 8 + bit;
                assert!(
                    allowed.iter().any(|&(lo, hi)| p >= lo && p < hi),
                    "stray diff at bit {p}"
                );
                diff_bits += 1;
            }
        }
    }
    assert!(diff_bits > 0, "fixture had no DC sites selected");
}

#[test]
fn format_compliance_site_skeleton_preserved() {
    for seed in [2u64, 5, 9] {
        let plain = fixture(seed);
        let before = site_skeleton(&parse_stream(&plain).unwrap().sites);
        for mode in ALL_MODES {
            let cfg = config((1.0, 1.0, 1.0), mode);
            let enc = encrypt(&plain, &KEY, &cfg, Some(UID)).unwrap();
            let after = site_skeleton(&parse_stream(&enc.bytes).unwrap().sites);
            assert_eq!(before, after, "seed {seed} {mode:?}");
        }
    }
}

#[test]
fn wrong_key_fails_to_decrypt() {
    let plain = fixture(7);
    let cfg = config((1.0, 1.0, 1.0), CipherMode::Keystream);
    let enc = encrypt(&plain, &KEY, &cfg, Some(UID)).unwrap();
    if enc.selected == 0 {
        panic!("fixture has no sites");
    }
    let mut bad = KEY;
    bad[3] ^= 0x40;
    let dec = decrypt(&enc.bytes, &bad, &cfg, Some(UID)).unwrap();
    assert_ne!(dec.bytes, plain);
    // still parses: encryption never breaks format
    parse_stream(&dec.bytes).unwrap();
}

#[test]
fn missing_uid_rejected() {
    let plain = fixture(1);
    let cfg = config((1.0, 1.0, 1.0), CipherMode::Keystream);
    assert_eq!(
        encrypt(&plain, &KEY, &cfg, None).unwrap_err(),
        Error::MissingUid
    );
}

#[test]
fn provision_embeds_and_guards() {
    let plain = fixture(4);
    let cfg = config((0.5, 1.0, 0.25), CipherMode::Cfb);
    let prov = provision(&plain, UID, &cfg).unwrap();
    assert_eq!(prov.len(), plain.len() + 4 + META_PAYLOAD_LEN);
    let map = parse_stream(&prov).unwrap();
    assert_eq!(map.user_data.len(), 1);
    let meta = find_meta(&map).unwrap();
    assert_eq!(meta.uid, UID);
    assert_eq!(meta.factors, Factors::new(0.5, 1.0, 0.25));
    assert_eq!(meta.mode, CipherMode::Cfb);
    assert_eq!(provision(&prov, UID, &cfg).unwrap_err(), Error::AlreadyProvisioned);

    // encrypt/decrypt pick everything up from the header: no uid, local
    // config left at defaults
    let enc = encrypt(&prov, &KEY, &PveaConfig::default(), None).unwrap();
    assert_eq!(enc.bytes.len(), prov.len());
    let dec = decrypt(&enc.bytes, &KEY, &PveaConfig::default(), None).unwrap();
    assert_eq!(dec.bytes, prov);
    // the embedded header itself is never encrypted
    assert_eq!(find_meta(&parse_stream(&enc.bytes).unwrap()).unwrap(), meta);
}

#[test]
fn sites_unchanged_by_provision_offsets() {
    // provisioning shifts every site by the inserted segment length
    let plain = fixture(6);
    let before = parse_stream(&plain).unwrap().sites;
    let prov = provision(&plain, UID, &PveaConfig::default()).unwrap();
    let after = parse_stream(&prov).unwrap().sites;
    let shift = ((4 + META_PAYLOAD_LEN) * 8) as u64;
    assert_eq!(before.len(), after.len());
    for (a, b) in before.iter().zip(&after) {
        assert_eq!(a.bit_offset + shift, b.bit_offset);
        assert_eq!(a.kind, b.kind);
    }
}

#[test]
fn toggle_schedules() {
    let plain = fixture(11);
    let n_pics = parse_stream(&plain).unwrap().pictures.len();
    let cfg = config((1.0, 1.0, 1.0), CipherMode::Keystream);

    let all_off = toggle_encrypt(&plain, &KEY, &cfg, Some(UID), &[(0, false)]).unwrap();
    assert_eq!(all_off.bytes, plain);

    let all_on = toggle_encrypt(&plain, &KEY, &cfg, Some(UID), &[(0, true)]).unwrap();
    assert_eq!(all_on.bytes, encrypt(&plain, &KEY, &cfg, Some(UID)).unwrap().bytes);

    assert!(matches!(
        toggle_encrypt(&plain, &KEY, &cfg, Some(UID), &[(n_pics, true)]),
        Err(Error::ScheduleOutOfRange { .. })
    ));
}

#[test]
fn toggle_diff_confined_and_reversible() {
    // find a fixture with >= 2 pictures and sites beyond picture 0
    let (plain, n_pics) = (0..60u64)
        .map(|s| fixture(s))
        .find_map(|b| {
            let m = parse_stream(&b).unwrap();
            let pics = m.pictures.len();
            (pics >= 2 && m.sites.iter().any(|s| s.picture_index >= 1)).then(|| (b, pics))
        })
        .expect("no multi-picture fixture found");
    let m = parse_stream(&plain).unwrap();
    let cfg = config((1.0, 1.0, 1.0), CipherMode::Cfb);
    let schedule = [(0usize, true), (1usize, false)];
    let enc = toggle_encrypt(&plain, &KEY, &cfg, Some(UID), &schedule).unwrap();
    // diff confined to picture 0's byte span
    let span = &m.pictures[0];
    for (i, (a, b)) in plain.iter().zip(&enc.bytes).enumerate() {
        if a != b {
            assert!(
                i >= span.start_byte && i < span.end_byte,
                "diff at byte {i} outside picture 0 [{}, {}) of {n_pics} pictures",
                span.start_byte,
                span.end_byte
            );
        }
    }
    let dec = toggle_decrypt(&enc.bytes, &KEY, &cfg, Some(UID), &schedule).unwrap();
    assert_eq!(dec.bytes, plain);
}

#[test]
fn picture_range_filter() {
    let plain = fixture(11);
    let m = parse_stream(&plain).unwrap();
    let mut cfg = config((1.0, 1.0, 1.0), CipherMode::Keystream);
    cfg.picture_range = Some((0, 0));
    let enc = encrypt(&plain, &KEY, &cfg, Some(UID)).unwrap();
    let span = &m.pictures[0];
    for (i, (a, b)) in plain.iter().zip(&enc.bytes).enumerate() {
        if a != b {
            assert!(i >= span.start_byte && i < span.end_byte);
        }
    }
    let dec = decrypt(&enc.bytes, &KEY, &cfg, Some(UID)).unwrap();
    assert_eq!(dec.bytes, plain);
}

#[test]
fn partial_options_round_trip() {
    for seed in 0..10u64 {
        let plain = fixture(seed);
        for (intra_only, signs_only) in [(true, false), (false, true), (true, true)] {
            for mode in ALL_MODES {
                let mut cfg = config((1.0, 1.0, 1.0), mode);
                cfg.intra_blocks_only = intra_only;
                cfg.signs_only = signs_only;
                let enc = encrypt(&plain, &KEY, &cfg, Some(UID)).unwrap();
                let dec = decrypt(&enc.bytes, &KEY, &cfg, Some(UID)).unwrap();
                assert_eq!(dec.bytes, plain, "seed {seed} {mode:?} {intra_only}/{signs_only}");
            }
        }
    }
}

#[test]
fn gop_keying_round_trip_and_divergence() {
    // find a fixture with >= 2 gops carrying sites in both
    let plain = (0..200u64)
        .map(fixture)
        .find(|b| {
            let m = parse_stream(b).unwrap();
            m.gops.len() >= 2
                && m.sites.iter().any(|s| s.gop_index == 0)
                && m.sites.iter().any(|s| s.gop_index == 1)
        })
        .expect("no multi-gop fixture");
    for mode in ALL_MODES {
        let mut cfg = config((1.0, 1.0, 1.0), mode);
        cfg.gop_keying = true;
        let enc = encrypt(&plain, &KEY, &cfg, Some(UID)).unwrap();
        let dec = decrypt(&enc.bytes, &KEY, &cfg, Some(UID)).unwrap();
        assert_eq!(dec.bytes, plain, "{mode:?}");
        cfg.gop_keying = false;
        let enc2 = encrypt(&plain, &KEY, &cfg, Some(UID)).unwrap();
        assert_ne!(enc.bytes, enc2.bytes, "{mode:?}: rekeying changed nothing");
    }
}

#[test]
fn uid_separation_in_ciphertext() {
    let plain = (0..60u64)
        .map(fixture)
        .find(|b| {
            let m = parse_stream(b).unwrap();
            m.sites.iter().map(|s| s.bit_length).sum::<u32>() >= 32
        })
        .unwrap();
    let cfg = config((1.0, 1.0, 1.0), CipherMode::Keystream);
    let mut other = UID;
    other.0[0] ^= 1;
    let a = encrypt(&plain, &KEY, &cfg, Some(UID)).unwrap();
    let b = encrypt(&plain, &KEY, &cfg, Some(other)).unwrap();
    assert_ne!(a.bytes, b.bytes);
}

#[test]
fn typical_strategy_round_trip() {
    let plain = fixture(13);
    for mode in ALL_MODES {
        let mut cfg = config((0.5, 0.5, 0.5), mode);
        cfg.strategy = Strategy::Typical;
        let enc = encrypt(&plain, &KEY, &cfg, Some(UID)).unwrap();
        let dec = decrypt(&enc.bytes, &KEY, &cfg, Some(UID)).unwrap();
        assert_eq!(dec.bytes, plain, "{mode:?}");
    }
}

#[test]
fn dark_fixture_sr_only_is_identity() {
    let plain = forge_dark_fixture();
    let cfg = config((1.0, 0.0, 0.0), CipherMode::Keystream);
    let enc = encrypt(&plain, &KEY, &cfg, Some(UID)).unwrap();
    assert_eq!(enc.bytes, plain);
    assert!(!enc.warnings.is_empty(), "small picture should warn about the bound");
}
