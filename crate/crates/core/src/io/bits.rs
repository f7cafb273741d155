//! LSB-first bit packing of fixed-width fields.

#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bits: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the low `width` bits of `value`.
    pub fn write(&mut self, value: u64, width: u32) {
        for i in 0..width {
            if self.bits.is_multiple_of(8) {
                self.bytes.push(0);
            }
            if (value >> i) & 1 == 1 {
                let last = self.bytes.len() - 1;
                self.bytes[last] |= 1 << (self.bits % 8);
            }
            self.bits += 1;
        }
    }

    pub fn write_signed(&mut self, value: i64, width: u32) {
        self.write(value as u64, width);
    }

    pub fn bit_len(&self) -> u64 {
        self.bits
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

#[derive(Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn read(&mut self, width: u32) -> Option<u64> {
        if self.pos + width as u64 > self.bytes.len() as u64 * 8 {
            return None;
        }
        let mut v = 0u64;
        for i in 0..width {
            let p = self.pos + i as u64;
            if (self.bytes[(p / 8) as usize] >> (p % 8)) & 1 == 1 {
                v |= 1 << i;
            }
        }
        self.pos += width as u64;
        Some(v)
    }

    /// Reads a two's-complement field, sign-extending it.
    pub fn read_signed(&mut self, width: u32) -> Option<i64> {
        let v = self.read(width)?;
        if width == 0 || width == 64 {
            return Some(v as i64);
        }
        let shift = 64 - width;
        Some(((v << shift) as i64) >> shift)
    }

    /// True once only zero padding bits of the final byte remain.
    pub fn at_padding(&self) -> bool {
        let total = self.bytes.len() as u64 * 8;
        total - self.pos < 8 && (self.pos..total).all(|p| (self.bytes[(p / 8) as usize] >> (p % 8)) & 1 == 0)
    }
}

/// Bytes needed for `n` fields of `width` bits.
pub fn packed_len(n: u64, width: u32) -> u64 {
    (n * width as u64).div_ceil(8)
}
