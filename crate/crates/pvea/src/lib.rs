//! PVEA: perceptual encryption for MPEG-1 video elementary streams.
//!
//! The stream is parsed just far enough to locate every fixed-length
//! codeword (FLC); a keyed subset — governed by three control factors for
//! rough view, spatial detail and motion — is transformed in place. Stream
//! size and format compliance are preserved exactly, and decryption with the
//! key restores the original bit-for-bit.

pub mod attacks;
pub mod bitio;
pub mod cipher;
pub mod decoder;
pub mod engine;
pub mod error;
pub mod forge;
pub mod mpeg1;
pub mod selection;

pub use error::{Error, Result};
