//! Append-only hash chain of blocks.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Hash = [u8; 32];

pub const GENESIS_HASH: Hash = [0u8; 32];

/// Bits of header metadata per block: prev hash plus three 8-byte fields.
pub const HEADER_BITS: u64 = 32 * 8 + 3 * 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockHeader {
    pub prev_hash: Hash,
    pub height: u64,
    pub frame_index: u64,
    pub payload_length: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub header: BlockHeader,
    pub payload: Vec<u8>,
}

impl Block {
    /// Canonical encoding: prev hash, height, frame index, payload length (little-endian), payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(56 + self.payload.len());
        out.extend_from_slice(&self.header.prev_hash);
        out.extend_from_slice(&self.header.height.to_le_bytes());
        out.extend_from_slice(&self.header.frame_index.to_le_bytes());
        out.extend_from_slice(&self.header.payload_length.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn hash(&self) -> Hash {
        Sha256::digest(self.to_bytes()).into()
    }

    pub fn payload_bits(&self) -> u64 {
        self.payload.len() as u64 * 8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrityReport {
    Ok,
    /// Lowest height whose contents no longer match the chain.
    FirstBad(u64),
}

impl IntegrityReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, IntegrityReport::Ok)
    }
}

/// Single-writer ledger of committed blocks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditChain {
    blocks: Vec<Block>,
}

impl AuditChain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Hash of the last block, or the genesis hash for an empty chain.
    pub fn tip(&self) -> Hash {
        self.blocks.last().map_or(GENESIS_HASH, Block::hash)
    }

    /// Appends the block for `frame_index`, which must be the next height.
    pub fn append(&mut self, frame_index: u64, payload: Vec<u8>) -> Result<&Block> {
        let height = self.blocks.len() as u64;
        if frame_index != height {
            return Err(Error::OutOfOrder {
                expected: height,
                actual: frame_index,
            });
        }
        let prev_hash = self.tip();
        let block = Block {
            header: BlockHeader {
                prev_hash,
                height,
                frame_index,
                payload_length: payload.len() as u64,
            },
            payload,
        };
        let round_trip = parse_block(&block.to_bytes()).map(|(b, _)| b);
        if round_trip.as_ref() != Some(&block) {
            return Err(Error::Integrity { height });
        }
        self.blocks.push(block);
        Ok(self.blocks.last().expect("just pushed"))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.blocks.iter().flat_map(Block::to_bytes).collect()
    }

    /// Parses a chain file. A malformed block reports its height.
    pub fn from_bytes(bytes: &[u8]) -> Result<AuditChain> {
        let mut blocks = Vec::new();
        let mut rest = bytes;
        while !rest.is_empty() {
            let (b, used) = parse_block(rest).ok_or(Error::Integrity {
                height: blocks.len() as u64,
            })?;
            blocks.push(b);
            rest = &rest[used..];
        }
        Ok(AuditChain { blocks })
    }

    /// Recomputes every link. With `tip`, also checks the last block against a hash recorded
    /// elsewhere, which is the only way to notice a change to the newest block.
    pub fn verify_integrity(&self, tip: Option<&Hash>) -> IntegrityReport {
        let mut prev = GENESIS_HASH;
        for (i, b) in self.blocks.iter().enumerate() {
            let h = i as u64;
            if b.header.height != h
                || b.header.frame_index != h
                || b.header.payload_length != b.payload.len() as u64
            {
                return IntegrityReport::FirstBad(h);
            }
            if b.header.prev_hash != prev {
                // the predecessor no longer hashes to what this block recorded
                return IntegrityReport::FirstBad(h.saturating_sub(1));
            }
            prev = b.hash();
        }
        match tip {
            Some(t) if !self.blocks.is_empty() && *t != prev => {
                IntegrityReport::FirstBad(self.blocks.len() as u64 - 1)
            }
            _ => IntegrityReport::Ok,
        }
    }
}

/// Integrity of raw chain-file bytes, including malformed encodings.
pub fn verify_chain_bytes(bytes: &[u8], tip: Option<&Hash>) -> IntegrityReport {
    match AuditChain::from_bytes(bytes) {
        Ok(chain) => chain.verify_integrity(tip),
        Err(Error::Integrity { height }) => {
            // a mangled length field also invalidates the hash recorded by the next block
            let ok = AuditChain::from_bytes(&bytes[..prefix_len(bytes, height)])
                .map(|c| c.verify_integrity(None))
                .unwrap_or(IntegrityReport::FirstBad(0));
            match ok {
                IntegrityReport::FirstBad(h) => IntegrityReport::FirstBad(h.min(height)),
                IntegrityReport::Ok => IntegrityReport::FirstBad(height),
            }
        }
        Err(_) => IntegrityReport::FirstBad(0),
    }
}

fn prefix_len(bytes: &[u8], blocks: u64) -> usize {
    let mut rest = bytes;
    let mut used = 0;
    for _ in 0..blocks {
        match parse_block(rest) {
            Some((_, n)) => {
                used += n;
                rest = &rest[n..];
            }
            None => break,
        }
    }
    used
}

fn parse_block(bytes: &[u8]) -> Option<(Block, usize)> {
    if bytes.len() < 56 {
        return None;
    }
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let mut prev_hash = [0u8; 32];
    prev_hash.copy_from_slice(&bytes[..32]);
    let payload_length = u64_at(48);
    let end = 56usize.checked_add(usize::try_from(payload_length).ok()?)?;
    if bytes.len() < end {
        return None;
    }
    Some((
        Block {
            header: BlockHeader {
                prev_hash,
                height: u64_at(32),
                frame_index: u64_at(40),
                payload_length,
            },
            payload: bytes[56..end].to_vec(),
        },
        end,
    ))
}

pub fn hash_hex(h: &Hash) -> String {
    h.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_hash_hex(s: &str) -> Result<Hash> {
    let s = s.trim();
    if s.len() != 64 {
        return Err(Error::Config(format!("hash `{s}` is not 64 hex digits")));
    }
    let mut h = [0u8; 32];
    for (i, b) in h.iter_mut().enumerate() {
        *b = u8::from_str_radix(&s[2 * i..2 * i + 2], 16)
            .map_err(|_| Error::Config(format!("hash `{s}` is not hex")))?;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: u64) -> AuditChain {
        let mut c = AuditChain::new();
        for i in 0..n {
            c.append(i, vec![i as u8; 5 + i as usize % 3]).unwrap();
        }
        c
    }

    #[test]
    fn genesis_block() {
        let c = chain(1);
        assert_eq!(c.blocks()[0].header.prev_hash, GENESIS_HASH);
        assert_eq!(c.blocks()[0].header.height, 0);
    }

    #[test]
    fn out_of_order_append_rejected() {
        let mut c = chain(1);
        assert_eq!(
            c.append(2, vec![]).unwrap_err(),
            Error::OutOfOrder {
                expected: 1,
                actual: 2
            }
        );
    }

    #[test]
    fn payload_flip_reports_its_height() {
        let c = chain(10);
        let mut bytes = c.to_bytes();
        let offset: usize = c.blocks()[..3].iter().map(|b| b.to_bytes().len()).sum();
        bytes[offset + 56 + 2] ^= 0x10;
        assert_eq!(
            verify_chain_bytes(&bytes, None),
            IntegrityReport::FirstBad(3)
        );
    }

    #[test]
    fn untouched_and_truncated_chains_pass() {
        assert!(AuditChain::new().verify_integrity(None).is_ok());
        let c = chain(100);
        assert!(c.verify_integrity(Some(&c.tip())).is_ok());
        let bytes = c.to_bytes();
        let last = c.blocks()[99].to_bytes().len();
        assert!(verify_chain_bytes(&bytes[..bytes.len() - last], None).is_ok());
    }

    #[test]
    fn every_single_bit_flip_is_detected_with_tip() {
        let c = chain(4);
        let tip = c.tip();
        let bytes = c.to_bytes();
        for bit in 0..bytes.len() * 8 {
            let mut b = bytes.clone();
            b[bit / 8] ^= 0x80 >> (bit % 8);
            assert!(!verify_chain_bytes(&b, Some(&tip)).is_ok(), "bit {bit}");
        }
    }

    #[test]
    fn file_round_trip_and_hex() {
        let c = chain(5);
        assert_eq!(AuditChain::from_bytes(&c.to_bytes()).unwrap(), c);
        let h = c.tip();
        assert_eq!(parse_hash_hex(&hash_hex(&h)).unwrap(), h);
    }
}
