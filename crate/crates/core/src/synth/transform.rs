//! Hash digests and the opaque stand-in cipher used by the synthesizer.

use md5::Md5;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha1::Sha1;
use sha2::{Digest, Sha256};

use crate::trace::ModifyApi;

/// Output of `api` applied to `input`. `key` only matters for
/// [`ModifyApi::EncryptOpaque`].
pub fn apply(api: ModifyApi, input: &[u8], key: u64) -> Vec<u8> {
    match api {
        ModifyApi::HashMd5 => Md5::digest(input).to_vec(),
        ModifyApi::HashSha1 => Sha1::digest(input).to_vec(),
        ModifyApi::HashSha256 => Sha256::digest(input).to_vec(),
        ModifyApi::EncryptOpaque => opaque(input, key),
    }
}

/// Keyed byte permutation followed by an XOR keystream. Not a cipher; only
/// the recorded input/output pair matters to the analyzer.
pub fn opaque(input: &[u8], key: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    let mut table: Vec<u8> = (0..=255).collect();
    table.shuffle(&mut rng);
    let mut out: Vec<u8> = input.iter().map(|b| table[*b as usize] ^ rng.gen::<u8>()).collect();
    if out.is_empty() {
        out.push(rng.gen());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    // digests of "352066060926230" computed with Python hashlib
    const IMEI: &[u8] = b"352066060926230";

    #[test]
    fn digests_match_reference_values() {
        assert_eq!(
            hex::encode(apply(ModifyApi::HashMd5, IMEI, 0)),
            "7af1f92396144cffca86f04b6ea27201"
        );
        assert_eq!(
            hex::encode(apply(ModifyApi::HashSha1, IMEI, 0)),
            "1af8a158d17faa95abe6dc8a08f244fae729dbfa"
        );
        assert_eq!(
            hex::encode(apply(ModifyApi::HashSha256, IMEI, 0)),
            "e4d95dd743e7a14b97cd314d235c60deb1c5837772d4192f7d094cd8502c6f18"
        );
    }

    #[test]
    fn opaque_is_keyed_and_length_preserving() {
        let a = opaque(IMEI, 1);
        assert_eq!(a.len(), IMEI.len());
        assert_eq!(a, opaque(IMEI, 1));
        assert_ne!(a, opaque(IMEI, 2));
        assert_ne!(a, IMEI);
        assert_eq!(opaque(b"", 3).len(), 1);
    }
}
