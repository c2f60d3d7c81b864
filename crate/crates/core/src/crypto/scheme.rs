//! Aggregatable multi-signature backends.
//!
//! Two interchangeable backends sit behind [`SignatureScheme`]:
//!
//! * [`MockScheme`] — deterministic keyed-hash signatures with a derivable
//!   key registry; "aggregation" is the verified multiset of per-signer tags.
//!   Protocol simulations use it so whole runs replay bit-identically.
//! * [`DlogScheme`] — Schnorr signatures over the 2048-bit MODP group of
//!   RFC 3526, with same-message half-aggregation (per-signer commitments,
//!   summed responses). The benchmark suite uses it for realistic signing,
//!   aggregation and verification costs.
//!
//! Both backends pass the same algebraic test suite. The signer set always
//! travels with the aggregate so contracts can enumerate claimed signers.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::{sha256_parts, CryptoError, HashDigest};

/// Arranger server identifier; doubles as the signer index in bitmaps.
pub type SignerId = u32;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct PublicKey(#[serde(with = "hex_bytes")] pub Vec<u8>);

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SecretKey(pub(crate) Vec<u8>);

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct SigBytes(#[serde(with = "hex_bytes")] pub Vec<u8>);

/// Combined signature plus the claimed signer set.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct AggregateSignature {
    #[serde(with = "hex_bytes")]
    pub data: Vec<u8>,
    pub signers: BTreeSet<SignerId>,
}

impl AggregateSignature {
    /// Wire size: bitmap over `n` signers plus the combined signature bytes.
    pub fn wire_len(&self, n: u32) -> usize {
        (n as usize).div_ceil(8) + self.data.len()
    }
}

pub(crate) mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(&s).map_err(serde::de::Error::custom)
    }
}

pub trait SignatureScheme: Send + Sync {
    /// Deterministic keypair for signer `id`.
    fn keygen(&self, id: u64) -> (SecretKey, PublicKey);

    fn sign(&self, sk: &SecretKey, msg: &[u8]) -> SigBytes;

    fn verify(&self, pk: &PublicKey, msg: &[u8], sig: &SigBytes) -> bool;

    /// Combine per-signer signatures over one message. Every part is checked
    /// against `msg` first; a part signed over anything else surfaces as
    /// [`CryptoError::MixedMessages`].
    fn aggregate(
        &self,
        parts: &BTreeMap<SignerId, (PublicKey, SigBytes)>,
        msg: &[u8],
    ) -> Result<AggregateSignature, CryptoError>;

    /// True iff `agg` is a valid combined signature over `msg` for exactly
    /// the claimed signer set.
    fn aggregate_verify(
        &self,
        pks: &BTreeMap<SignerId, PublicKey>,
        agg: &AggregateSignature,
        msg: &[u8],
    ) -> Result<bool, CryptoError>;
}

// ---------------------------------------------------------------------------
// Mock backend
// ---------------------------------------------------------------------------

/// Keyed-hash signature scheme for deterministic simulation runs. Secret keys
/// derive from a scheme seed and the signer id; verification re-derives them,
/// so honest verification works anywhere the scheme handle exists while byte
/// tampering and fabricated signatures still fail.
#[derive(Clone)]
pub struct MockScheme {
    seed: [u8; 32],
}

impl MockScheme {
    pub fn new(seed: [u8; 32]) -> Self {
        MockScheme { seed }
    }

    fn derive_sk(&self, id: u64) -> [u8; 32] {
        sha256_parts(&[b"mock-sk", &self.seed, &id.to_be_bytes()]).0
    }

    fn pk_for_sk(id: u64, sk: &[u8; 32]) -> Vec<u8> {
        let mut pk = id.to_be_bytes().to_vec();
        pk.extend_from_slice(&sha256_parts(&[b"mock-pk", sk]).0);
        pk
    }

    fn sk_for_pk(&self, pk: &PublicKey) -> Option<[u8; 32]> {
        if pk.0.len() != 40 {
            return None;
        }
        let id = u64::from_be_bytes(pk.0[..8].try_into().unwrap());
        let sk = self.derive_sk(id);
        (Self::pk_for_sk(id, &sk) == pk.0).then_some(sk)
    }
}

impl SignatureScheme for MockScheme {
    fn keygen(&self, id: u64) -> (SecretKey, PublicKey) {
        let sk = self.derive_sk(id);
        (
            SecretKey(sk.to_vec()),
            PublicKey(Self::pk_for_sk(id, &sk)),
        )
    }

    fn sign(&self, sk: &SecretKey, msg: &[u8]) -> SigBytes {
        SigBytes(sha256_parts(&[b"mock-sig", &sk.0, msg]).0.to_vec())
    }

    fn verify(&self, pk: &PublicKey, msg: &[u8], sig: &SigBytes) -> bool {
        match self.sk_for_pk(pk) {
            Some(sk) => sig.0 == sha256_parts(&[b"mock-sig", &sk, msg]).0,
            None => false,
        }
    }

    fn aggregate(
        &self,
        parts: &BTreeMap<SignerId, (PublicKey, SigBytes)>,
        msg: &[u8],
    ) -> Result<AggregateSignature, CryptoError> {
        let mut data = Vec::with_capacity(parts.len() * 36);
        for (id, (pk, sig)) in parts {
            if !self.verify(pk, msg, sig) {
                return Err(CryptoError::MixedMessages);
            }
            data.extend_from_slice(&id.to_be_bytes());
            data.extend_from_slice(&sig.0);
        }
        Ok(AggregateSignature {
            data,
            signers: parts.keys().copied().collect(),
        })
    }

    fn aggregate_verify(
        &self,
        pks: &BTreeMap<SignerId, PublicKey>,
        agg: &AggregateSignature,
        msg: &[u8],
    ) -> Result<bool, CryptoError> {
        if agg.data.len() != agg.signers.len() * 36 {
            return Ok(false);
        }
        for (i, id) in agg.signers.iter().enumerate() {
            let chunk = &agg.data[i * 36..(i + 1) * 36];
            if u32::from_be_bytes(chunk[..4].try_into().unwrap()) != *id {
                return Ok(false);
            }
            let pk = pks.get(id).ok_or(CryptoError::UnknownSigner(*id))?;
            if !self.verify(pk, msg, &SigBytes(chunk[4..].to_vec())) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

// ---------------------------------------------------------------------------
// Discrete-log backend
// ---------------------------------------------------------------------------

/// RFC 3526 group 14: 2048-bit MODP prime. g = 4 generates the prime-order
/// subgroup of quadratic residues.
const MODP_2048_HEX: &str = concat!(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74",
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437",
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED",
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05",
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB",
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B",
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718",
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF",
);

const ELEM_LEN: usize = 256; // group elements, big-endian, fixed width
const RESP_LEN: usize = 88; // response scalar k + c*sk, k is 640-bit

/// Schnorr multi-signature over a 2048-bit MODP group with same-message
/// half-aggregation: the aggregate keeps each signer's commitment R_i and
/// sums the responses, verified as g^S == prod(R_i) * prod(pk_i^c_i).
/// Nonces are hash-derived, so signatures are deterministic.
#[derive(Clone)]
pub struct DlogScheme {
    seed: [u8; 32],
    p: BigUint,
    g: BigUint,
}

impl DlogScheme {
    pub fn new(seed: [u8; 32]) -> Self {
        let p = BigUint::parse_bytes(MODP_2048_HEX.as_bytes(), 16).expect("modp constant");
        DlogScheme {
            seed,
            p,
            g: BigUint::from(4u32),
        }
    }

    fn pad(x: &BigUint, width: usize) -> Vec<u8> {
        let raw = x.to_bytes_be();
        assert!(raw.len() <= width, "group element exceeds fixed width");
        let mut out = vec![0u8; width - raw.len()];
        out.extend_from_slice(&raw);
        out
    }

    fn sk_scalar(&self, id: u64) -> BigUint {
        BigUint::from_bytes_be(&sha256_parts(&[b"dlog-sk", &self.seed, &id.to_be_bytes()]).0)
    }

    /// 640-bit deterministic nonce; wide enough to statistically hide
    /// c*sk (512 bits) in the unreduced response.
    fn nonce(&self, sk: &[u8], msg: &[u8]) -> BigUint {
        let mut bytes = Vec::with_capacity(96);
        for ctr in 0u8..3 {
            bytes.extend_from_slice(&sha256_parts(&[b"dlog-nonce", sk, msg, &[ctr]]).0);
        }
        BigUint::from_bytes_be(&bytes[..80])
    }

    fn challenge(r: &[u8], pk: &[u8], msg: &[u8]) -> BigUint {
        BigUint::from_bytes_be(&sha256_parts(&[b"dlog-chal", r, pk, msg]).0)
    }
}

impl SignatureScheme for DlogScheme {
    fn keygen(&self, id: u64) -> (SecretKey, PublicKey) {
        let sk = self.sk_scalar(id);
        let pk = self.g.modpow(&sk, &self.p);
        (
            SecretKey(Self::pad(&sk, 32)),
            PublicKey(Self::pad(&pk, ELEM_LEN)),
        )
    }

    fn sign(&self, sk: &SecretKey, msg: &[u8]) -> SigBytes {
        let x = BigUint::from_bytes_be(&sk.0);
        let k = self.nonce(&sk.0, msg);
        let r = self.g.modpow(&k, &self.p);
        let r_bytes = Self::pad(&r, ELEM_LEN);
        let pk = Self::pad(&self.g.modpow(&x, &self.p), ELEM_LEN);
        let c = Self::challenge(&r_bytes, &pk, msg);
        let s = k + c * x; // over the integers; k's width hides c*sk
        let mut out = r_bytes;
        out.extend_from_slice(&Self::pad(&s, RESP_LEN));
        SigBytes(out)
    }

    fn verify(&self, pk: &PublicKey, msg: &[u8], sig: &SigBytes) -> bool {
        if sig.0.len() != ELEM_LEN + RESP_LEN || pk.0.len() != ELEM_LEN {
            return false;
        }
        let r_bytes = &sig.0[..ELEM_LEN];
        let r = BigUint::from_bytes_be(r_bytes);
        let s = BigUint::from_bytes_be(&sig.0[ELEM_LEN..]);
        let pk_int = BigUint::from_bytes_be(&pk.0);
        if r.is_zero_or_ge(&self.p) || pk_int.is_zero_or_ge(&self.p) {
            return false;
        }
        let c = Self::challenge(r_bytes, &pk.0, msg);
        self.g.modpow(&s, &self.p) == (r * pk_int.modpow(&c, &self.p)) % &self.p
    }

    fn aggregate(
        &self,
        parts: &BTreeMap<SignerId, (PublicKey, SigBytes)>,
        msg: &[u8],
    ) -> Result<AggregateSignature, CryptoError> {
        let mut commitments = Vec::with_capacity(parts.len() * ELEM_LEN);
        let mut total = BigUint::ZERO;
        for (pk, sig) in parts.values() {
            if !self.verify(pk, msg, sig) {
                return Err(CryptoError::MixedMessages);
            }
            commitments.extend_from_slice(&sig.0[..ELEM_LEN]);
            total += BigUint::from_bytes_be(&sig.0[ELEM_LEN..]);
        }
        let mut data = commitments;
        data.extend_from_slice(&Self::pad(&total, RESP_LEN + 8));
        Ok(AggregateSignature {
            data,
            signers: parts.keys().copied().collect(),
        })
    }

    fn aggregate_verify(
        &self,
        pks: &BTreeMap<SignerId, PublicKey>,
        agg: &AggregateSignature,
        msg: &[u8],
    ) -> Result<bool, CryptoError> {
        let n = agg.signers.len();
        if agg.data.len() != n * ELEM_LEN + RESP_LEN + 8 || n == 0 {
            return Ok(false);
        }
        let s = BigUint::from_bytes_be(&agg.data[n * ELEM_LEN..]);
        let mut rhs = BigUint::from(1u32);
        for (i, id) in agg.signers.iter().enumerate() {
            let pk = pks.get(id).ok_or(CryptoError::UnknownSigner(*id))?;
            let r_bytes = &agg.data[i * ELEM_LEN..(i + 1) * ELEM_LEN];
            let r = BigUint::from_bytes_be(r_bytes);
            let pk_int = BigUint::from_bytes_be(&pk.0);
            if r.is_zero_or_ge(&self.p) || pk_int.is_zero_or_ge(&self.p) {
                return Ok(false);
            }
            let c = Self::challenge(r_bytes, &pk.0, msg);
            rhs = rhs * r % &self.p;
            rhs = rhs * pk_int.modpow(&c, &self.p) % &self.p;
        }
        Ok(self.g.modpow(&s, &self.p) == rhs)
    }
}

trait ZeroOrGe {
    fn is_zero_or_ge(&self, bound: &BigUint) -> bool;
}

impl ZeroOrGe for BigUint {
    fn is_zero_or_ge(&self, bound: &BigUint) -> bool {
        use num_bigint::BigUint as B;
        *self == B::ZERO || self >= bound
    }
}
