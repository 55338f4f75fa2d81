//! Argon2id password hashing with per-user salts.
//!
//! Hashes are PHC strings (`$argon2id$v=19$m=..,t=..,p=..$salt$digest`), so
//! the cost can be raised later and old hashes still verify with the
//! parameters they were made with.

use argon2::password_hash::{rand_core::OsRng, PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::{Algorithm, Argon2, Params, Version};

use super::StoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashCost {
    /// Memory in KiB.
    pub memory_kib: u32,
    pub iterations: u32,
    pub parallelism: u32,
}

impl HashCost {
    /// 19 MiB, 2 passes, 1 lane.
    pub const DEFAULT: HashCost = HashCost {
        memory_kib: 19 * 1024,
        iterations: 2,
        parallelism: 1,
    };

    /// Cheap parameters for test suites. Never use in production.
    pub const TESTING: HashCost = HashCost {
        memory_kib: 1024,
        iterations: 1,
        parallelism: 1,
    };
}

impl Default for HashCost {
    fn default() -> Self {
        HashCost::DEFAULT
    }
}

pub struct CredentialHasher {
    argon: Argon2<'static>,
    dummy_hash: String,
}

impl std::fmt::Debug for CredentialHasher {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CredentialHasher").finish_non_exhaustive()
    }
}

impl CredentialHasher {
    pub fn new(cost: HashCost) -> Result<Self, StoreError> {
        let params = Params::new(cost.memory_kib, cost.iterations, cost.parallelism, None)
            .map_err(|e| StoreError::Backend(format!("argon2 params: {e}")))?;
        let argon = Argon2::new(Algorithm::Argon2id, Version::V0x13, params);
        let mut hasher = CredentialHasher {
            argon,
            dummy_hash: String::new(),
        };
        hasher.dummy_hash = hasher.hash("dummy password for timing balance")?;
        Ok(hasher)
    }

    pub fn hash(&self, password: &str) -> Result<String, StoreError> {
        let salt = SaltString::generate(&mut OsRng);
        self.argon
            .hash_password(password.as_bytes(), &salt)
            .map(|h| h.to_string())
            .map_err(|e| StoreError::Backend(format!("hashing failed: {e}")))
    }

    /// Verifies using the parameters embedded in `phc`; the digest
    /// comparison is constant-time.
    pub fn verify(&self, password: &str, phc: &str) -> bool {
        match PasswordHash::new(phc) {
            Ok(parsed) => self.argon.verify_password(password.as_bytes(), &parsed).is_ok(),
            Err(_) => false,
        }
    }

    /// Burn one verification's worth of work.
    pub fn verify_dummy(&self, password: &str) {
        let _ = self.verify(password, &self.dummy_hash);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_salted_and_self_describing() {
        let h = CredentialHasher::new(HashCost::TESTING).unwrap();
        let a = h.hash("correct-horse-9").unwrap();
        let b = h.hash("correct-horse-9").unwrap();
        assert_ne!(a, b, "fresh salt per hash");
        assert!(a.starts_with("$argon2id$v=19$m=1024,t=1,p=1$"));
        assert!(!a.contains("correct-horse-9"));
        assert!(h.verify("correct-horse-9", &a));
        assert!(!h.verify("correct-horse-8", &a));
        assert!(!h.verify("anything", "not a phc string"));
    }

    #[test]
    fn old_cost_still_verifies_after_upgrade() {
        let cheap = CredentialHasher::new(HashCost::TESTING).unwrap();
        let stronger = CredentialHasher::new(HashCost {
            memory_kib: 2048,
            iterations: 2,
            parallelism: 1,
        })
        .unwrap();
        let old = cheap.hash("long enough").unwrap();
        assert!(stronger.verify("long enough", &old));
    }
}
