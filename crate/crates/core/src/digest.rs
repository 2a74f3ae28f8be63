use serde::Serialize;
use sha2::{Digest, Sha256};

/// Short hex digest of a value's canonical JSON form.
pub fn config_digest<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    let hash = Sha256::digest(&json);
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
