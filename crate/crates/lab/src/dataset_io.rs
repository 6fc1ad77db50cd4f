//! Binary dataset files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic "DSNDATA1" | version u32
//! num_classes u32 | sections u32 | clips_per_section u32 | feature_dim u32
//! signal_strength f64 | noise_sigma f64 | background_section_prob f64 | confuser_prob f64
//! train_count u64 | test_count u64 | seed u64
//! signatures: num_classes x feature_dim f64
//! videos (train then test, id order):
//!   video_id u64 | label u32 | planted u32 per section (0xFFFFFFFF = none)
//!   features: sections x clips x feature_dim f64
//! ```

use std::path::Path;

use dsn_core::synth::{Dataset, DatasetSpec, SyntheticVideo};
use sha2::{Digest, Sha256};

use crate::bytes::{DecodeError, DecodeResult, Reader, Writer};
use crate::error::{LabError, Result};
use crate::report::write_atomic;

pub const MAGIC: &[u8; 8] = b"DSNDATA1";
pub const VERSION: u32 = 1;
const NO_PLANT: u32 = u32::MAX;

pub fn encode_dataset(data: &Dataset) -> Vec<u8> {
    let s = &data.spec;
    let mut w = Writer::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    for v in [s.num_classes, s.sections, s.clips_per_section, s.feature_dim] {
        w.len32(v);
    }
    for v in [s.signal_strength, s.noise_sigma, s.background_section_prob, s.confuser_prob] {
        w.f64(v);
    }
    w.u64(s.train_count as u64);
    w.u64(s.test_count as u64);
    w.u64(s.seed);
    data.signatures.iter().for_each(|sig| w.f64s(sig));
    for v in data.train.iter().chain(&data.test) {
        w.u64(v.video_id);
        w.len32(v.label);
        for p in &v.planted {
            w.u32(p.map_or(NO_PLANT, |i| i as u32));
        }
        v.sections.iter().flatten().for_each(|clip| w.f64s(clip));
    }
    w.finish()
}

fn decode_video(r: &mut Reader<'_>, s: &DatasetSpec) -> DecodeResult<SyntheticVideo> {
    let video_id = r.u64("video id")?;
    let label = r.usize32("label")?;
    let mut planted = Vec::with_capacity(s.sections);
    for _ in 0..s.sections {
        let p = r.u32("planted index")?;
        planted.push((p != NO_PLANT).then_some(p as usize));
    }
    let mut sections = Vec::with_capacity(s.sections);
    for _ in 0..s.sections {
        let clips = (0..s.clips_per_section)
            .map(|_| r.f64s(s.feature_dim, "clip features"))
            .collect::<DecodeResult<Vec<_>>>()?;
        sections.push(clips);
    }
    Ok(SyntheticVideo { video_id, label, sections, planted })
}

pub fn decode_dataset(bytes: &[u8]) -> DecodeResult<Dataset> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let version = r.u32("version")?;
    if version != VERSION {
        return r.fail(format!("unsupported version {version}, expected {VERSION}"));
    }
    let spec = DatasetSpec {
        num_classes: r.usize32("num_classes")?,
        sections: r.usize32("sections")?,
        clips_per_section: r.usize32("clips_per_section")?,
        feature_dim: r.usize32("feature_dim")?,
        signal_strength: r.f64("signal_strength")?,
        noise_sigma: r.f64("noise_sigma")?,
        background_section_prob: r.f64("background_section_prob")?,
        confuser_prob: r.f64("confuser_prob")?,
        train_count: r.u64("train_count")? as usize,
        test_count: r.u64("test_count")? as usize,
        seed: r.u64("seed")?,
    };
    if let Err(e) = spec.validate() {
        return r.fail(format!("invalid header: {e}"));
    }
    let signatures = (0..spec.num_classes)
        .map(|_| r.f64s(spec.feature_dim, "signature"))
        .collect::<DecodeResult<Vec<_>>>()?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for i in 0..spec.train_count + spec.test_count {
        let v = decode_video(&mut r, &spec)?;
        if i < spec.train_count { train.push(v) } else { test.push(v) }
    }
    let data = Dataset { spec, signatures, train, test };
    if let Err(e) = data.validate() {
        return r.fail(format!("inconsistent dataset: {e}"));
    }
    r.finish()?;
    Ok(data)
}

/// Hex SHA-256 of the encoded bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_dataset(data: &Dataset, path: &Path) -> Result<String> {
    let bytes = encode_dataset(data);
    write_atomic(path, &bytes)?;
    Ok(content_hash(&bytes))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| LabError::io(path, e))?;
    decode_dataset(&bytes).map_err(|DecodeError { offset, message }| LabError::Format {
        path: path.to_path_buf(),
        offset,
        message,
    })
}
