use pbkdf2::pbkdf2_hmac;
use sha2::Sha256;

/// Floor on PBKDF2 rounds for stored PIN digests.
pub const MIN_PIN_ITERATIONS: u32 = 10_000;

/// Salted PBKDF2-HMAC-SHA256 digest of a PIN. The PIN itself is never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PinDigest {
    pub salt: [u8; 16],
    pub iterations: u32,
    pub digest: [u8; 32],
}

impl PinDigest {
    pub fn derive(pin: &str, salt: [u8; 16], iterations: u32) -> PinDigest {
        let mut digest = [0u8; 32];
        pbkdf2_hmac::<Sha256>(pin.as_bytes(), &salt, iterations, &mut digest);
        PinDigest {
            salt,
            iterations,
            digest,
        }
    }

    pub fn verify(&self, candidate: &str) -> bool {
        let other = PinDigest::derive(candidate, self.salt, self.iterations);
        // Constant-time comparison.
        self.digest
            .iter()
            .zip(other.digest.iter())
            .fold(0u8, |acc, (a, b)| acc | (a ^ b))
            == 0
    }
}

pub(crate) fn is_valid_pin(pin: &str) -> bool {
    (4..=6).contains(&pin.len()) && pin.bytes().all(|b| b.is_ascii_digit())
}
