//! Domain types shared by every module: the payload pipeline from client
//! request to L1 posting, plus deterministic batch construction.
//!
//! Canonical serialization is length-prefixed field concatenation with
//! fixed-width big-endian integers. It is injective, so two distinct values
//! never serialize identically, and it is the exact byte form fed to hashing,
//! corpus files and the translation wire protocol.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{sha256, HashDigest, PublicKey, SigBytes, SignatureScheme, SignerId};

pub type ServerId = SignerId;

/// Epoch number / batch identifier. Consecutive batches get consecutive
/// identifiers starting at 1.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize, Default,
)]
pub struct BatchId(pub u64);

impl std::fmt::Display for BatchId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Transaction {
    #[serde(with = "crate::crypto::scheme::hex_bytes")]
    pub payload: Vec<u8>,
    pub author: PublicKey,
    pub signature: SigBytes,
}

fn put_field(out: &mut Vec<u8>, field: &[u8]) {
    out.extend_from_slice(&(field.len() as u32).to_be_bytes());
    out.extend_from_slice(field);
}

fn take_field(bytes: &[u8], at: &mut usize) -> Option<Vec<u8>> {
    let len = u32::from_be_bytes(bytes.get(*at..*at + 4)?.try_into().ok()?) as usize;
    *at += 4;
    let field = bytes.get(*at..*at + len)?.to_vec();
    *at += len;
    Some(field)
}

impl Transaction {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.payload.len() + self.author.0.len() + 40);
        put_field(&mut out, &self.payload);
        put_field(&mut out, &self.author.0);
        put_field(&mut out, &self.signature.0);
        out
    }

    pub fn from_canonical(bytes: &[u8]) -> Option<Transaction> {
        let mut at = 0;
        let payload = take_field(bytes, &mut at)?;
        let author = take_field(bytes, &mut at)?;
        let signature = take_field(bytes, &mut at)?;
        (at == bytes.len()).then_some(Transaction {
            payload,
            author: PublicKey(author),
            signature: SigBytes(signature),
        })
    }

    /// SHA-256 of the canonical serialization; the canonical ordering key.
    pub fn digest(&self) -> HashDigest {
        sha256(&self.canonical_bytes())
    }
}

/// True iff the signature verifies against the author over the payload and
/// the payload is non-empty.
pub fn validate_transaction(scheme: &dyn SignatureScheme, tx: &Transaction) -> bool {
    !tx.payload.is_empty() && scheme.verify(&tx.author, &tx.payload, &tx.signature)
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Batch {
    pub id: BatchId,
    pub txs: Vec<Transaction>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.id.0.to_be_bytes());
        out.extend_from_slice(&(self.txs.len() as u32).to_be_bytes());
        for tx in &self.txs {
            put_field(&mut out, &tx.canonical_bytes());
        }
        out
    }

    pub fn from_canonical(bytes: &[u8]) -> Option<Batch> {
        if bytes.len() < 12 {
            return None;
        }
        let id = BatchId(u64::from_be_bytes(bytes[..8].try_into().ok()?));
        let count = u32::from_be_bytes(bytes[8..12].try_into().ok()?) as usize;
        let mut at = 12;
        let mut txs = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let field = take_field(bytes, &mut at)?;
            txs.push(Transaction::from_canonical(&field)?);
        }
        (at == bytes.len()).then_some(Batch { id, txs })
    }
}

/// Batch tag `(id, h)`: the Merkle root posted to L1 in place of the batch.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct BatchTag {
    pub id: BatchId,
    pub root: HashDigest,
}

impl BatchTag {
    /// The message arranger servers sign for this tag.
    pub fn signing_message(&self) -> Vec<u8> {
        let mut msg = b"batch-tag".to_vec();
        msg.extend_from_slice(&self.id.0.to_be_bytes());
        msg.extend_from_slice(&self.root.0);
        msg
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SignedBatchTag {
    pub tag: BatchTag,
    pub agg: crate::crypto::AggregateSignature,
}

impl SignedBatchTag {
    pub fn signers(&self) -> &BTreeSet<ServerId> {
        &self.agg.signers
    }

    /// Serialized size as posted to L1: id, root, bitmap over `n`, signature.
    pub fn wire_len(&self, n: u32) -> usize {
        8 + 32 + self.agg.wire_len(n)
    }
}

/// Setchain element: either a client transaction or server metadata (an
/// epoch-hash signature disseminated through the set itself).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub enum SetElement {
    Tx(Transaction),
    MetaSignature(EpochSignature),
}

/// A server's signature over an epoch's batch root.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct EpochSignature {
    pub epoch: u64,
    pub root: HashDigest,
    pub signer: ServerId,
    pub sig: SigBytes,
}

impl EpochSignature {
    /// The message covered by `sig`.
    pub fn signing_message(epoch: u64, root: &HashDigest) -> Vec<u8> {
        let mut msg = b"epoch-sig".to_vec();
        msg.extend_from_slice(&epoch.to_be_bytes());
        msg.extend_from_slice(&root.0);
        msg
    }
}

impl SetElement {
    /// Kind discriminator is byte 0 of the serialization.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        match self {
            SetElement::Tx(tx) => {
                let mut out = vec![0x00];
                out.extend_from_slice(&tx.canonical_bytes());
                out
            }
            SetElement::MetaSignature(m) => {
                let mut out = vec![0x01];
                out.extend_from_slice(&m.epoch.to_be_bytes());
                out.extend_from_slice(&m.root.0);
                out.extend_from_slice(&m.signer.to_be_bytes());
                put_field(&mut out, &m.sig.0);
                out
            }
        }
    }

    pub fn is_tx(&self) -> bool {
        matches!(self, SetElement::Tx(_))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("duplicate transaction in canonical ordering input")]
    DuplicateTransaction,
}

/// Build a transaction signed by the deterministic keypair for `author_id`.
pub fn signed_tx(scheme: &dyn SignatureScheme, author_id: u64, payload: &[u8]) -> Transaction {
    let (sk, pk) = scheme.keygen(author_id);
    Transaction {
        payload: payload.to_vec(),
        signature: scheme.sign(&sk, payload),
        author: pk,
    }
}

/// Ascending order of SHA-256 digests of canonical serializations. Every
/// correct server computes the same sequence from the same set with no
/// coordination.
pub fn canonical_order(txs: Vec<Transaction>) -> Result<Vec<Transaction>, TypeError> {
    let mut keyed: Vec<(HashDigest, Transaction)> =
        txs.into_iter().map(|tx| (tx.digest(), tx)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    for pair in keyed.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(TypeError::DuplicateTransaction);
        }
    }
    Ok(keyed.into_iter().map(|(_, tx)| tx).collect())
}

/// Order an epoch's transactions into a batch; metadata elements are
/// excluded. Empty epochs still produce (empty) batches so identifiers stay
/// dense.
pub fn to_batch(epoch_number: u64, epoch_elements: &BTreeSet<SetElement>) -> Batch {
    let txs: Vec<Transaction> = epoch_elements
        .iter()
        .filter_map(|e| match e {
            SetElement::Tx(tx) => Some(tx.clone()),
            SetElement::MetaSignature(_) => None,
        })
        .collect();
    // Set elements are distinct, so distinct transactions cannot collide.
    let txs = canonical_order(txs).expect("set elements are deduplicated");
    Batch {
        id: BatchId(epoch_number),
        txs,
    }
}
