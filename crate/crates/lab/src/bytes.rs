//! Little-endian encoding helpers shared by the binary file formats.

/// Append-only little-endian encoder.
#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        vs.iter().for_each(|&v| self.f64(v));
    }

    /// Panics if `v` does not fit in 32 bits; callers validate sizes first.
    pub fn len32(&mut self, v: usize) {
        self.u32(u32::try_from(v).expect("length exceeds u32"));
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Decoding failure at a byte offset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeError {
    pub offset: u64,
    pub message: String,
}

pub type DecodeResult<T> = Result<T, DecodeError>;

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub fn fail<T>(&self, message: impl Into<String>) -> DecodeResult<T> {
        Err(DecodeError { offset: self.offset(), message: message.into() })
    }

    pub fn take(&mut self, n: usize, what: &str) -> DecodeResult<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return self.fail(format!(
                "truncated while reading {what}: need {n} bytes, {} left",
                self.buf.len() - self.pos
            ));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn magic(&mut self, expected: &[u8; 8]) -> DecodeResult<()> {
        let found = self.take(8, "magic")?;
        if found != expected {
            self.pos = 0;
            return self.fail(format!(
                "bad magic: expected `{}`, found {:?}",
                String::from_utf8_lossy(expected),
                String::from_utf8_lossy(found)
            ));
        }
        Ok(())
    }

    pub fn u8(&mut self, what: &str) -> DecodeResult<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u32(&mut self, what: &str) -> DecodeResult<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub fn u64(&mut self, what: &str) -> DecodeResult<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub fn f64(&mut self, what: &str) -> DecodeResult<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub fn f64s(&mut self, n: usize, what: &str) -> DecodeResult<Vec<f64>> {
        // bound the allocation by what the buffer can still hold
        if (self.buf.len() - self.pos) / 8 < n {
            return self.fail(format!("truncated while reading {what}: need {n} floats"));
        }
        (0..n).map(|_| self.f64(what)).collect()
    }

    pub fn usize32(&mut self, what: &str) -> DecodeResult<usize> {
        Ok(self.u32(what)? as usize)
    }

    pub fn finish(self) -> DecodeResult<()> {
        if self.pos != self.buf.len() {
            return self.fail(format!("{} trailing bytes", self.buf.len() - self.pos));
        }
        Ok(())
    }
}
