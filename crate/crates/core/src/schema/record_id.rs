use sha2::{Digest, Sha256};

/// Stable record id for `(doc_id, canonical equation, material name)`.
pub fn record_key_id(doc_id: &str, canonical_equation: &str, material_name: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(doc_id.as_bytes());
    hasher.update([0x1f]);
    hasher.update(canonical_equation.as_bytes());
    hasher.update([0x1f]);
    hasher.update(material_name.trim().to_lowercase().as_bytes());
    let digest = hasher.finalize();
    format!("rec-{}", &hex::encode(digest)[..16])
}
