//! MSB-first bit packing.

use crate::error::{Error, Result};

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bit_len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.write_bits(*b as u64, 8);
        }
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64);
        for i in (0..width).rev() {
            let bit = (value >> i) & 1;
            let pos = (self.bit_len % 8) as u32;
            if pos == 0 {
                self.bytes.push(0);
            }
            if bit == 1 {
                *self.bytes.last_mut().expect("pushed above") |= 0x80 >> pos;
            }
            self.bit_len += 1;
        }
    }

    /// Two's complement in `width` bits.
    pub fn write_signed(&mut self, value: i64, width: u32) {
        let mask = if width == 64 {
            u64::MAX
        } else {
            (1u64 << width) - 1
        };
        self.write_bits(value as u64 & mask, width);
    }

    pub fn bit_len(&self) -> u64 {
        self.bit_len
    }

    pub fn finish(self) -> (Vec<u8>, u64) {
        (self.bytes, self.bit_len)
    }
}

#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn remaining(&self) -> u64 {
        self.bytes.len() as u64 * 8 - self.pos
    }

    pub fn read_bits(&mut self, width: u32) -> Result<u64> {
        if (width as u64) > self.remaining() {
            return Err(Error::Decode(format!(
                "need {width} bits at offset {}, only {} left",
                self.pos,
                self.remaining()
            )));
        }
        let mut v = 0u64;
        for _ in 0..width {
            let byte = self.bytes[(self.pos / 8) as usize];
            let bit = (byte >> (7 - (self.pos % 8))) & 1;
            v = (v << 1) | bit as u64;
            self.pos += 1;
        }
        Ok(v)
    }

    pub fn read_signed(&mut self, width: u32) -> Result<i64> {
        let raw = self.read_bits(width)?;
        if width == 64 {
            return Ok(raw as i64);
        }
        let sign = 1u64 << (width - 1);
        Ok(if raw & sign != 0 {
            (raw | !((1u64 << width) - 1)) as i64
        } else {
            raw as i64
        })
    }

    pub fn read_u8(&mut self) -> Result<u8> {
        Ok(self.read_bits(8)? as u8)
    }

    pub fn read_u64_le(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        for v in &mut b {
            *v = self.read_u8()?;
        }
        Ok(u64::from_le_bytes(b))
    }

    pub fn read_f64_le(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.read_u64_le()?))
    }
}

/// Number of bits needed to write `n` distinct values, `ceil(log2 n)`.
pub fn bits_for_count(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}
