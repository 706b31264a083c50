//! Bit-granular access to byte buffers: MSB-first reads, in-place patches and
//! byte-aligned start-code scanning. Everything above the byte level in this
//! crate is built on these three primitives.

use crate::error::{Error, Result};

/// Read-only bit cursor over a byte slice. Bit 0 of a byte is its MSB,
/// matching MPEG bit order.
#[derive(Clone)]
pub struct BitCursor<'a> {
    buf: &'a [u8],
    pos: u64,
}

impl<'a> BitCursor<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        BitCursor { buf, pos: 0 }
    }

    pub fn at(buf: &'a [u8], bit_pos: u64) -> Self {
        BitCursor { buf, pos: bit_pos }
    }

    pub fn pos(&self) -> u64 {
        self.pos
    }

    pub fn total_bits(&self) -> u64 {
        self.buf.len() as u64 * 8
    }

    pub fn remaining(&self) -> u64 {
        self.total_bits() - self.pos
    }

    pub fn seek(&mut self, bit_pos: u64) {
        debug_assert!(bit_pos <= self.total_bits());
        self.pos = bit_pos;
    }

    /// Read `n` bits (1..=32) MSB-first and advance.
    pub fn read_bits(&mut self, n: u32) -> Result<u32> {
        assert!((1..=32).contains(&n), "read_bits width must be 1..=32");
        if self.pos + n as u64 > self.total_bits() {
            return Err(Error::OutOfBounds {
                offset: self.pos,
                total: self.total_bits(),
            });
        }
        let mut v: u32 = 0;
        let mut pos = self.pos;
        let mut left = n;
        while left > 0 {
            let byte = self.buf[(pos / 8) as usize];
            let bit_in_byte = (pos % 8) as u32;
            let avail = 8 - bit_in_byte;
            let take = avail.min(left);
            let chunk = (byte as u32 >> (avail - take)) & ((1u32 << take) - 1);
            v = if take == 32 { chunk } else { (v << take) | chunk };
            pos += take as u64;
            left -= take;
        }
        self.pos = pos;
        Ok(v)
    }

    pub fn read_bit(&mut self) -> Result<u32> {
        self.read_bits(1)
    }

    /// Peek up to `n` bits without advancing; returns fewer bits' worth of
    /// data zero-padded is NOT done -- if fewer than `n` bits remain the
    /// result is `None`.
    pub fn peek_bits(&self, n: u32) -> Option<u32> {
        let mut c = self.clone();
        c.read_bits(n).ok()
    }

    pub fn byte_aligned(&self) -> bool {
        self.pos % 8 == 0
    }

    /// Scan forward for the next byte-aligned `00 00 01 xx` pattern at or
    /// after the cursor's current byte. Returns `(xx, byte_offset_of_pattern)`
    /// and leaves the cursor just after the 4th byte. `None` means the
    /// pattern does not occur before the end of the buffer.
    pub fn next_start_code(&mut self) -> Option<(u8, usize)> {
        let mut i = ((self.pos + 7) / 8) as usize;
        while i + 3 < self.buf.len() {
            if self.buf[i] == 0 && self.buf[i + 1] == 0 && self.buf[i + 2] == 1 {
                self.pos = (i as u64 + 4) * 8;
                return Some((self.buf[i + 3], i));
            }
            i += 1;
        }
        self.pos = self.total_bits();
        None
    }
}

/// A pending in-place bit edit: `length` bits at absolute `offset` become
/// `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitPatch {
    pub offset: u64,
    pub length: u32,
    pub value: u32,
}

impl BitPatch {
    pub fn new(offset: u64, length: u32, value: u32) -> Self {
        BitPatch { offset, length, value }
    }
}

/// Apply a patch to a mutable buffer. Exactly `patch.length` bits change;
/// the buffer length never does.
pub fn apply_patch(buf: &mut [u8], patch: BitPatch) -> Result<()> {
    let BitPatch { offset, length, value } = patch;
    assert!((1..=32).contains(&length), "patch length must be 1..=32");
    if length < 32 && value >= (1u32 << length) {
        return Err(Error::ValueTooWide { value, length });
    }
    let total = buf.len() as u64 * 8;
    if offset + length as u64 > total {
        return Err(Error::OutOfBounds { offset, total });
    }
    for k in 0..length {
        let bit = (value >> (length - 1 - k)) & 1;
        let p = offset + k as u64;
        let byte = &mut buf[(p / 8) as usize];
        let mask = 0x80u8 >> (p % 8);
        if bit == 1 {
            *byte |= mask;
        } else {
            *byte &= !mask;
        }
    }
    Ok(())
}

/// Read `n` bits at an absolute offset without a cursor.
pub fn read_at(buf: &[u8], offset: u64, n: u32) -> Result<u32> {
    let mut c = BitCursor::at(buf, offset);
    c.read_bits(n)
}

/// MSB-first bit writer used by the stream forge.
#[derive(Default)]
pub struct BitWriter {
    buf: Vec<u8>,
    bit_len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Current length in bits (= the offset the next write lands at).
    pub fn pos(&self) -> u64 {
        self.bit_len
    }

    pub fn write_bits(&mut self, value: u32, n: u32) {
        assert!((1..=32).contains(&n));
        assert!(n == 32 || value < (1u32 << n), "value too wide");
        for k in 0..n {
            let bit = (value >> (n - 1 - k)) & 1;
            if self.bit_len % 8 == 0 {
                self.buf.push(0);
            }
            if bit == 1 {
                let idx = (self.bit_len / 8) as usize;
                self.buf[idx] |= 0x80 >> (self.bit_len % 8);
            }
            self.bit_len += 1;
        }
    }

    pub fn write_bit(&mut self, bit: u32) {
        self.write_bits(bit, 1);
    }

    /// Zero-stuff to the next byte boundary.
    pub fn align(&mut self) {
        while self.bit_len % 8 != 0 {
            self.write_bit(0);
        }
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) {
        assert!(self.bit_len % 8 == 0, "byte writes require alignment");
        self.buf.extend_from_slice(bytes);
        self.bit_len += bytes.len() as u64 * 8;
    }

    pub fn into_bytes(mut self) -> Vec<u8> {
        self.align();
        self.buf
    }
}
