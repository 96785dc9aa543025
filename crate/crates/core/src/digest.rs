//! Stable content hashing used for cache keys, mock determinism and
//! canonical output ordering.

use sha2::{Digest, Sha256};

const SEP: u8 = 0x1f;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 over the unit-separator-joined parts, as lowercase hex.
pub fn sha256_parts_hex(parts: &[&str]) -> String {
    hex::encode(hash_parts(parts))
}

/// First eight bytes (little endian) of the SHA-256 over the joined parts.
///
/// Platform independent, so seeded mocks agree everywhere.
pub fn hash64(parts: &[&str]) -> u64 {
    let d = hash_parts(parts);
    let mut b = [0u8; 8];
    b.copy_from_slice(&d[..8]);
    u64::from_le_bytes(b)
}

fn hash_parts(parts: &[&str]) -> [u8; 32] {
    let mut h = Sha256::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            h.update([SEP]);
        }
        h.update(p.as_bytes());
    }
    h.finalize().into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separator_distinguishes_splits() {
        assert_ne!(hash64(&["ab", "c"]), hash64(&["a", "bc"]));
        assert_eq!(hash64(&["x", "y"]), hash64(&["x", "y"]));
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
