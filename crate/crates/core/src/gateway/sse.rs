//! Server-side encryption with customer-provided keys.
//!
//! The customer key is never stored. An AES-256-GCM key is derived from it
//! by a domain-separated SHA-256, and a second domain-separated digest
//! serves as the fingerprint used to reject wrong keys before any
//! decryption is attempted.

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Key, Nonce};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::serde_util::hex_bytes;

pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;

const KEY_DOMAIN: &[u8] = b"wg/sse-c/key/v1";
const FINGERPRINT_DOMAIN: &[u8] = b"wg/sse-c/fingerprint/v1";

fn derive(domain: &[u8], customer_key: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((domain.len() as u32).to_be_bytes());
    h.update(domain);
    h.update(customer_key);
    h.finalize().into()
}

/// Hex fingerprint of a customer key.
pub fn fingerprint(customer_key: &[u8]) -> String {
    hex::encode(derive(FINGERPRINT_DOMAIN, customer_key))
}

/// Encryption parameters recorded in object metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SseInfo {
    pub fingerprint: String,
    #[serde(with = "hex_bytes")]
    pub nonce: Vec<u8>,
}

fn cipher(customer_key: &[u8]) -> Aes256Gcm {
    let key = derive(KEY_DOMAIN, customer_key);
    Aes256Gcm::new(Key::<Aes256Gcm>::from_slice(&key))
}

/// Encrypts `plaintext`, binding it to `aad` (the object's identity).
pub fn seal(customer_key: &[u8], nonce: &[u8; NONCE_LEN], aad: &[u8], plaintext: &[u8]) -> Vec<u8> {
    cipher(customer_key)
        .encrypt(Nonce::from_slice(nonce), Payload { msg: plaintext, aad })
        .expect("AES-GCM encryption of in-memory buffers")
}

/// Decrypts and authenticates; `None` if the tag does not verify.
pub fn open(customer_key: &[u8], nonce: &[u8], aad: &[u8], ciphertext: &[u8]) -> Option<Vec<u8>> {
    if nonce.len() != NONCE_LEN {
        return None;
    }
    cipher(customer_key)
        .decrypt(Nonce::from_slice(nonce), Payload { msg: ciphertext, aad })
        .ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seal_open_round_trip() {
        let nonce = [7u8; NONCE_LEN];
        let ct = seal(b"secret", &nonce, b"b/k", b"hello");
        assert_eq!(ct.len(), 5 + TAG_LEN);
        assert_eq!(open(b"secret", &nonce, b"b/k", &ct).unwrap(), b"hello");
        assert!(open(b"other", &nonce, b"b/k", &ct).is_none());
        assert!(open(b"secret", &nonce, b"b/other", &ct).is_none());
    }

    #[test]
    fn fingerprint_is_not_the_key() {
        assert_ne!(fingerprint(b"k"), hex::encode(derive(KEY_DOMAIN, b"k")));
        assert_eq!(fingerprint(b"k"), fingerprint(b"k"));
        assert_ne!(fingerprint(b"k"), fingerprint(b"k2"));
    }
}
