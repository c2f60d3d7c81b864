//! Hashing, authenticated symmetric encryption, hash commitments and the
//! attestation seal used by the offchain translation protocol.
//!
//! Signature backends live in [`scheme`].

pub mod scheme;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub use scheme::{
    AggregateSignature, DlogScheme, MockScheme, PublicKey, SecretKey, SigBytes, SignatureScheme,
};

/// 32-byte SHA-256 digest. Hex-encoded in logs and traces.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct HashDigest(pub [u8; 32]);

impl HashDigest {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let v = hex::decode(s).ok()?;
        let arr: [u8; 32] = v.try_into().ok()?;
        Some(HashDigest(arr))
    }
}

impl std::fmt::Debug for HashDigest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", &self.to_hex()[..12])
    }
}

impl std::fmt::Display for HashDigest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for HashDigest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for HashDigest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        HashDigest::from_hex(&s).ok_or_else(|| serde::de::Error::custom("bad digest hex"))
    }
}

pub fn sha256(bytes: &[u8]) -> HashDigest {
    HashDigest(Sha256::digest(bytes).into())
}

/// SHA-256 over the concatenation of `parts`, without materializing it.
pub fn sha256_parts(parts: &[&[u8]]) -> HashDigest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    HashDigest(h.finalize().into())
}

// ---------------------------------------------------------------------------
// HMAC-SHA256 (RFC 2104); the hmac crate is not vendored, so it lives here.
// ---------------------------------------------------------------------------

const HMAC_BLOCK: usize = 64;

pub fn hmac_sha256(key: &[u8], msg: &[u8]) -> HashDigest {
    let mut k = [0u8; HMAC_BLOCK];
    if key.len() > HMAC_BLOCK {
        k[..32].copy_from_slice(&sha256(key).0);
    } else {
        k[..key.len()].copy_from_slice(key);
    }
    let mut ipad = [0x36u8; HMAC_BLOCK];
    let mut opad = [0x5cu8; HMAC_BLOCK];
    for i in 0..HMAC_BLOCK {
        ipad[i] ^= k[i];
        opad[i] ^= k[i];
    }
    let inner = sha256_parts(&[&ipad, msg]);
    sha256_parts(&[&opad, &inner.0])
}

// ---------------------------------------------------------------------------
// Authenticated symmetric encryption: ChaCha20 keystream + HMAC-SHA256,
// encrypt-then-MAC. Layout: nonce(12) || body || tag(32).
// ---------------------------------------------------------------------------

pub const SYM_KEY_LEN: usize = 32;
const NONCE_LEN: usize = 12;
const TAG_LEN: usize = 32;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SymmetricKey(pub [u8; SYM_KEY_LEN]);

impl SymmetricKey {
    pub fn from_rng(rng: &mut impl RngCore) -> Self {
        let mut k = [0u8; SYM_KEY_LEN];
        rng.fill_bytes(&mut k);
        SymmetricKey(k)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("authentication failure")]
    AuthFailure,
    #[error("signatures cover mixed messages")]
    MixedMessages,
    #[error("unknown signer {0}")]
    UnknownSigner(u32),
}

fn keystream_xor(key: &SymmetricKey, nonce: &[u8; NONCE_LEN], data: &mut [u8]) {
    // Per-nonce stream key; the ChaCha core is reached through its RNG form.
    let seed = sha256_parts(&[b"stream", &key.0, nonce]);
    let mut rng = ChaCha20Rng::from_seed(seed.0);
    let mut ks = vec![0u8; data.len()];
    rng.fill_bytes(&mut ks);
    for (d, k) in data.iter_mut().zip(ks) {
        *d ^= k;
    }
}

fn mac_key(key: &SymmetricKey) -> HashDigest {
    sha256_parts(&[b"mac", &key.0])
}

/// Encrypt `plaintext`; the nonce is drawn from `rng` (the scenario's seeded
/// RNG, so runs stay reproducible).
pub fn enc(key: &SymmetricKey, plaintext: &[u8], rng: &mut impl RngCore) -> Vec<u8> {
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let mut body = plaintext.to_vec();
    keystream_xor(key, &nonce, &mut body);
    let tag = hmac_sha256(&mac_key(key).0, &[&nonce[..], &body[..]].concat());
    let mut out = Vec::with_capacity(NONCE_LEN + body.len() + TAG_LEN);
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&body);
    out.extend_from_slice(&tag.0);
    out
}

pub fn dec(key: &SymmetricKey, ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if ciphertext.len() < NONCE_LEN + TAG_LEN {
        return Err(CryptoError::AuthFailure);
    }
    let (nonce, rest) = ciphertext.split_at(NONCE_LEN);
    let (body, tag) = rest.split_at(rest.len() - TAG_LEN);
    let expect = hmac_sha256(&mac_key(key).0, &[nonce, body].concat());
    if expect.0 != tag {
        return Err(CryptoError::AuthFailure);
    }
    let mut plain = body.to_vec();
    let nonce: [u8; NONCE_LEN] = nonce.try_into().unwrap();
    keystream_xor(key, &nonce, &mut plain);
    Ok(plain)
}

/// Hash commitment `y = SHA256(k)` used by the contingent-payment protocol.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Commitment {
    pub y: HashDigest,
}

impl Commitment {
    pub fn to_key(key: &SymmetricKey) -> Self {
        Commitment { y: sha256(&key.0) }
    }

    pub fn opens_with(&self, preimage: &[u8]) -> bool {
        sha256(preimage) == self.y
    }
}

// ---------------------------------------------------------------------------
// Attestation seal. Stands in for the zero-knowledge proof of the offchain
// translation protocol: the attestor checks the statement against the witness
// directly and seals it with a private MAC.
// ---------------------------------------------------------------------------

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ZkAttestation {
    pub w_digest: HashDigest,
    pub y: HashDigest,
    pub claimed_root: HashDigest,
    pub seal: HashDigest,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AttestError {
    #[error("witness does not satisfy the attested relation")]
    RelationUnsatisfied,
}

#[derive(Clone)]
pub struct Attestor {
    key: [u8; 32],
}

impl Attestor {
    pub fn new(seed: [u8; 32]) -> Self {
        Attestor {
            key: sha256_parts(&[b"attestor", &seed]).0,
        }
    }

    fn seal_for(&self, w_digest: &HashDigest, y: &HashDigest, root: &HashDigest) -> HashDigest {
        hmac_sha256(&self.key, &[&w_digest.0[..], &y.0, &root.0].concat())
    }

    /// Seal the statement "w decrypts under k to a batch image hashing to
    /// `claimed_root`, and SHA256(k) = y". The witness (k and the plaintext)
    /// is checked by direct recomputation.
    pub fn attest(
        &self,
        w: &[u8],
        k: &SymmetricKey,
        claimed_root: HashDigest,
        recompute_root: impl Fn(&[u8]) -> Option<HashDigest>,
    ) -> Result<ZkAttestation, AttestError> {
        let y = sha256(&k.0);
        let plain = dec(k, w).map_err(|_| AttestError::RelationUnsatisfied)?;
        match recompute_root(&plain) {
            Some(r) if r == claimed_root => {}
            _ => return Err(AttestError::RelationUnsatisfied),
        }
        let w_digest = sha256(w);
        Ok(ZkAttestation {
            w_digest,
            y,
            claimed_root,
            seal: self.seal_for(&w_digest, &y, &claimed_root),
        })
    }

    pub fn verify(&self, att: &ZkAttestation, w: &[u8]) -> bool {
        sha256(w) == att.w_digest
            && self.seal_for(&att.w_digest, &att.y, &att.claimed_root) == att.seal
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_fips_vectors() {
        assert_eq!(
            sha256(b"").to_hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256(b"abc").to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn sha256_composition_matches_oracle() {
        // Double hash equals re-invoking the primitive on the first digest.
        let inner = sha256(b"compose me");
        assert_eq!(sha256(&inner.0), sha256(sha256(b"compose me").as_bytes()));
    }

    #[test]
    fn hmac_rfc4231_vectors() {
        // RFC 4231 test case 1
        let tag = hmac_sha256(&[0x0b; 20], b"Hi There");
        assert_eq!(
            tag.to_hex(),
            "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7"
        );
        // RFC 4231 test case 2
        let tag = hmac_sha256(b"Jefe", b"what do ya want for nothing?");
        assert_eq!(
            tag.to_hex(),
            "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843"
        );
        // RFC 4231 test case 6: key longer than one block
        let tag = hmac_sha256(
            &[0xaa; 131],
            b"Test Using Larger Than Block-Size Key - Hash Key First",
        );
        assert_eq!(
            tag.to_hex(),
            "60e431591ee0b67f0d8a26aacbf5b77f8e0bc6213728c5140546040f0ee37f54"
        );
    }

    #[test]
    fn enc_dec_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let key = SymmetricKey::from_rng(&mut rng);
        let plain = b"a compressed batch would go here".to_vec();
        let ct = enc(&key, &plain, &mut rng);
        assert_eq!(dec(&key, &ct).unwrap(), plain);
    }

    #[test]
    fn dec_wrong_key_fails() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let key = SymmetricKey::from_rng(&mut rng);
        let other = SymmetricKey::from_rng(&mut rng);
        let ct = enc(&key, b"payload", &mut rng);
        assert_eq!(dec(&other, &ct), Err(CryptoError::AuthFailure));
    }

    #[test]
    fn dec_rejects_every_single_bit_flip() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let key = SymmetricKey::from_rng(&mut rng);
        let ct = enc(&key, b"short", &mut rng);
        for byte in 0..ct.len() {
            for bit in 0..8 {
                let mut tampered = ct.clone();
                tampered[byte] ^= 1 << bit;
                assert_eq!(dec(&key, &tampered), Err(CryptoError::AuthFailure));
            }
        }
    }

    #[test]
    fn commitment_opens_only_with_preimage() {
        let key = SymmetricKey([9u8; 32]);
        let c = Commitment::to_key(&key);
        assert!(c.opens_with(&key.0));
        assert!(!c.opens_with(&[8u8; 32]));
    }

    #[test]
    fn attestation_round_trip_and_forgery() {
        let attestor = Attestor::new([5u8; 32]);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let key = SymmetricKey::from_rng(&mut rng);
        let batch_image = b"pretend compressed batch".to_vec();
        let root = sha256(b"the root");
        let w = enc(&key, &batch_image, &mut rng);
        let att = attestor
            .attest(&w, &key, root, |plain| {
                (plain == batch_image.as_slice()).then_some(root)
            })
            .unwrap();
        assert!(attestor.verify(&att, &w));

        // Tampered ciphertext no longer matches the sealed digest.
        let mut w2 = w.clone();
        w2[0] ^= 1;
        assert!(!attestor.verify(&att, &w2));

        // A seal fabricated without the attestor key does not verify.
        let mut forged = att.clone();
        forged.seal = sha256(b"forged");
        assert!(!attestor.verify(&forged, &w));

        // Witness that does not satisfy the relation is refused.
        let err = attestor
            .attest(&w, &key, root, |_| Some(sha256(b"different root")))
            .unwrap_err();
        assert_eq!(err, AttestError::RelationUnsatisfied);
    }
}
