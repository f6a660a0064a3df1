//! Bloom filter over SSTable keys.
//!
//! Double hashing (h1 + i*h2) over a stable 64-bit FNV-1a base hash, so the
//! encoded filter is byte-identical across builds and platforms.

/// FNV-1a, 64 bit. Stable and dependency-free; bloom filters are persisted
/// so the hash must never change.
pub fn fnv1a64(data: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in data {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BloomFilter {
    n_bits: u64,
    n_hashes: u32,
    bits: Vec<u8>,
}

impl BloomFilter {
    /// Sized for `n_keys` at `bits_per_key` (default policy: 10 bits/key for
    /// a ~1% false-positive target). Hash count is the optimal
    /// `bits_per_key * ln 2`, clamped to [1, 30].
    ///
    /// `n_bits` is kept byte-aligned so a filter rebuilt from its encoded
    /// bit array indexes identically to the one that produced it.
    pub fn with_capacity(n_keys: usize, bits_per_key: usize) -> Self {
        let n_bits = ((n_keys.max(1) * bits_per_key).max(64) as u64 + 7) / 8 * 8;
        let n_hashes = ((bits_per_key as f64 * 0.69) as u32).clamp(1, 30);
        BloomFilter { n_bits, n_hashes, bits: vec![0u8; (n_bits / 8) as usize] }
    }

    pub fn from_parts(n_hashes: u32, bits: Vec<u8>) -> Self {
        BloomFilter { n_bits: bits.len() as u64 * 8, n_hashes, bits }
    }

    /// Build a filter from pre-computed [`fnv1a64`] key hashes. SSTable
    /// construction streams entries, so hashes are collected first and the
    /// filter is sized once the key count is known.
    pub fn build_from_hashes(hashes: &[u64], bits_per_key: usize) -> Self {
        let mut f = Self::with_capacity(hashes.len(), bits_per_key);
        for &h in hashes {
            f.add_hash(h);
        }
        f
    }

    fn positions(h: u64, n_bits: u64, n_hashes: u32) -> impl Iterator<Item = u64> {
        // Kirsch-Mitzenmacher double hashing from one 64-bit base hash.
        let h2 = h.rotate_left(31) | 1;
        (0..n_hashes as u64).map(move |i| h.wrapping_add(i.wrapping_mul(h2)) % n_bits)
    }

    pub fn add_hash(&mut self, h: u64) {
        for bit in Self::positions(h, self.n_bits, self.n_hashes) {
            self.bits[(bit / 8) as usize] |= 1 << (bit % 8);
        }
    }

    pub fn add(&mut self, key: &[u8]) {
        self.add_hash(fnv1a64(key));
    }

    /// False means the key is definitely absent.
    pub fn may_contain(&self, key: &[u8]) -> bool {
        let h = fnv1a64(key);
        Self::positions(h, self.n_bits, self.n_hashes)
            .all(|bit| self.bits[(bit / 8) as usize] & (1 << (bit % 8)) != 0)
    }

    /// Size in bytes of the bit array a filter over `n_keys` would use.
    pub fn projected_bytes(n_keys: usize, bits_per_key: usize) -> usize {
        let n_bits = ((n_keys.max(1) * bits_per_key).max(64) as u64 + 7) / 8 * 8;
        (n_bits / 8) as usize
    }

    pub fn n_hashes(&self) -> u32 {
        self.n_hashes
    }

    pub fn bit_bytes(&self) -> &[u8] {
        &self.bits
    }
}
