//! Provenance helpers: tool version and a stable config hash carried by
//! every artifact.

/// Crate version baked in at build time.
pub fn tool_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// FNV-1a 64-bit hash as lowercase hex; stable across runs and platforms.
pub fn fnv1a64_hex(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{:016x}", hash)
}
