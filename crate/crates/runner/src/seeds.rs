//! Sub-seed derivation.
//!
//! Every random stream in a run is keyed by a purpose string. The sub-seed is
//! the first eight bytes (little-endian) of `SHA-256("{master_seed}:{purpose}")`.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn derive(master_seed: u64, purpose: &str) -> u64 {
    let digest = Sha256::digest(format!("{master_seed}:{purpose}").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Seeds {
    pub data: u64,
    pub init: u64,
    pub shuffle: u64,
    pub noise: u64,
    pub power: u64,
}

impl Seeds {
    pub fn from_master(master_seed: u64) -> Self {
        Seeds {
            data: derive(master_seed, "data"),
            init: derive(master_seed, "init"),
            shuffle: derive(master_seed, "shuffle"),
            noise: derive(master_seed, "noise"),
            power: derive(master_seed, "power"),
        }
    }
}
