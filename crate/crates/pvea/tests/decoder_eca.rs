//! Reference decode of forged I-pictures plus the error-concealment attack.

use pvea::attacks::{eca, EcaScope};
use pvea::cipher::{CipherMode, Uid};
use pvea::decoder::{decode_i_picture_bytes, psnr};
use pvea::engine::{decrypt, encrypt, PveaConfig};
use pvea::forge::{forge_dark_fixture, forge_stream, parse_forge_text, random_spec};
use pvea::mpeg1::{parse_stream, site_skeleton};
use pvea::selection::Factors;

const KEY: [u8; 16] = *b"0123456789abcdef";
const UID: Uid = Uid(*b"fixture-uid-0001");

fn flat_stream() -> Vec<u8> {
    // one 16x16 I picture, every DC differential zero: uniform mid-gray
    let text = "
size 16 16
gop
pic I
slice 0 8
mb 1 intra
";
    forge_stream(&parse_forge_text(text).unwrap()).unwrap().bytes
}

#[test]
fn flat_picture_decodes_uniform() {
    let planes = decode_i_picture_bytes(&flat_stream(), 0).unwrap();
    assert_eq!((planes[0].width, planes[0].height), (16, 16));
    assert_eq!((planes[1].width, planes[1].height), (8, 8));
    for p in &planes {
        assert!(p.samples.iter().all(|&s| s == 128), "non-uniform plane");
    }
}

#[test]
fn dc_chain_propagates_within_macroblock() {
    // block 0 carries diff = -15 (size 4, bits 0): dc = 1024 - 120 = 904,
    // i.e. sample 113; the predictor chains through the other luma blocks
    let text = "
size 16 16
gop
pic I
slice 0 8
mb 1 intra
block 0
dc 4 0
";
    let bytes = forge_stream(&parse_forge_text(text).unwrap()).unwrap().bytes;
    let planes = decode_i_picture_bytes(&bytes, 0).unwrap();
    assert!(planes[0].samples.iter().all(|&s| s == 113));
    assert!(planes[1].samples.iter().all(|&s| s == 128));
    assert!(planes[2].samples.iter().all(|&s| s == 128));
}

#[test]
fn decrypt_restores_decoded_planes() {
    let spec = random_spec(17);
    let plain = forge_stream(&spec).unwrap().bytes;
    let map = parse_stream(&plain).unwrap();
    let Some(pic) = map
        .pictures
        .iter()
        .position(|p| p.picture_type == pvea::mpeg1::PictureType::I)
    else {
        panic!("fixture has no I picture");
    };
    let before = decode_i_picture_bytes(&plain, pic).unwrap();
    let cfg = PveaConfig {
        factors: Factors::new(1.0, 1.0, 1.0),
        mode: CipherMode::Cascade,
        ..PveaConfig::default()
    };
    let enc = encrypt(&plain, &KEY, &cfg, Some(UID)).unwrap();
    // the scrambled stream still decodes (format intact), just differently
    decode_i_picture_bytes(&enc.bytes, pic).unwrap();
    let dec = decrypt(&enc.bytes, &KEY, &cfg, Some(UID)).unwrap();
    let after = decode_i_picture_bytes(&dec.bytes, pic).unwrap();
    for (a, b) in before.iter().zip(&after) {
        assert_eq!(a.samples, b.samples);
        assert!(psnr(a, b).unwrap().is_infinite());
    }
}

#[test]
fn eca_is_idempotent_and_format_preserving() {
    for seed in [3u64, 8, 21] {
        let plain = forge_stream(&random_spec(seed)).unwrap().bytes;
        for scope in [EcaScope::AcSigns, EcaScope::Full] {
            let once = eca(&plain, scope).unwrap();
            assert_eq!(once.len(), plain.len());
            let map = parse_stream(&once).unwrap();
            assert_eq!(
                site_skeleton(&map.sites),
                site_skeleton(&parse_stream(&plain).unwrap().sites)
            );
            let twice = eca(&once, scope).unwrap();
            assert_eq!(once, twice, "seed {seed} {scope:?} not idempotent");
        }
    }
}

#[test]
fn eca_is_key_independent() {
    // concealment of two differently-keyed ciphertexts of the same stream
    // agrees wherever only concealed fields differ; for a signs-only
    // encryption under Full scope the results coincide exactly
    let plain = forge_stream(&random_spec(5)).unwrap().bytes;
    let mut cfg = PveaConfig {
        factors: Factors::new(1.0, 1.0, 1.0),
        mode: CipherMode::Keystream,
        ..PveaConfig::default()
    };
    cfg.signs_only = true;
    let k2 = *b"fedcba9876543210";
    let a = encrypt(&plain, &KEY, &cfg, Some(UID)).unwrap().bytes;
    let b = encrypt(&plain, &k2, &cfg, Some(UID)).unwrap().bytes;
    assert_ne!(a, b);
    let ca = eca(&a, EcaScope::Full).unwrap();
    let cb = eca(&b, EcaScope::Full).unwrap();
    assert_eq!(ca, cb);
    assert_eq!(ca, eca(&plain, EcaScope::Full).unwrap());
}

#[test]
fn dark_fixture_conceals_nothing_in_dc() {
    // no DC sites to force; AC scope still normalizes the signs
    let bytes = forge_dark_fixture();
    let full = eca(&bytes, EcaScope::Full).unwrap();
    let ac = eca(&bytes, EcaScope::AcSigns).unwrap();
    assert_eq!(full, ac);
}
