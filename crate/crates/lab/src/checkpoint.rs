//! Binary model checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic "DSNCKPT1" | version u32 | net count u32
//! per net: name length u32 | name utf-8 | layer count u32
//!   per layer: activation u8 (0 relu, 1 identity) | rows u32 | cols u32
//!              weights rows x cols f64 (row major) | bias rows f64
//! ```

use std::path::Path;

use dsn_core::classifier::ClipClassifier;
use dsn_core::nn::{Activation, Layer, Mat, Mlp};
use dsn_core::sampler::ObservationNet;
use dsn_core::trainer::DsnModel;

use crate::bytes::{DecodeError, DecodeResult, Reader, Writer};
use crate::error::{LabError, Result};
use crate::report::write_atomic;

pub const MAGIC: &[u8; 8] = b"DSNCKPT1";
pub const VERSION: u32 = 1;

const ENCODER: &str = "observation.encoder";
const HEAD: &str = "observation.head";
const CLASSIFIER: &str = "classifier";
const BASELINE: &str = "baseline_classifier";
const RESPONSE: &str = "response";

/// Everything `train` produces and `eval` consumes.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub model: DsnModel,
    /// The pretrained classifier shared by the non-DSN policies.
    pub baseline: ClipClassifier,
    /// Lightweight scorer for the max-response policy.
    pub response: ClipClassifier,
}

impl ModelBundle {
    fn nets(&self) -> [(&'static str, &Mlp); 5] {
        [
            (ENCODER, &self.model.obs.encoder),
            (HEAD, &self.model.obs.head),
            (CLASSIFIER, &self.model.clf.net),
            (BASELINE, &self.baseline.net),
            (RESPONSE, &self.response.net),
        ]
    }

    /// Config error naming both sides when the nets do not fit a dataset
    /// with the given geometry.
    pub fn check_dims(&self, feature_dim: usize, clips_per_section: usize, num_classes: usize) -> Result<()> {
        let obs = &self.model.obs;
        let pairs = [
            ("observation feature_dim", obs.feature_dim(), feature_dim),
            ("observation clips_per_section", obs.clips_per_section(), clips_per_section),
            ("classifier feature_dim", self.model.clf.feature_dim(), feature_dim),
            ("classifier num_classes", self.model.clf.num_classes(), num_classes),
            ("baseline feature_dim", self.baseline.feature_dim(), feature_dim),
            ("baseline num_classes", self.baseline.num_classes(), num_classes),
            ("response feature_dim", self.response.feature_dim(), feature_dim),
            ("response num_classes", self.response.num_classes(), num_classes),
        ];
        for (what, ckpt, cfg) in pairs {
            if ckpt != cfg {
                return Err(LabError::Config(format!("checkpoint {what} is {ckpt}, config expects {cfg}")));
            }
        }
        Ok(())
    }
}

fn encode_mlp(w: &mut Writer, name: &str, net: &Mlp) {
    w.len32(name.len());
    w.bytes(name.as_bytes());
    w.len32(net.layers().len());
    for layer in net.layers() {
        w.u8(match layer.activation {
            Activation::Relu => 0,
            Activation::Identity => 1,
        });
        w.len32(layer.weight.rows());
        w.len32(layer.weight.cols());
        w.f64s(layer.weight.values());
        w.f64s(&layer.bias);
    }
}

pub fn encode_bundle(bundle: &ModelBundle) -> Vec<u8> {
    let nets = bundle.nets();
    let mut w = Writer::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.len32(nets.len());
    for (name, net) in nets {
        encode_mlp(&mut w, name, net);
    }
    w.finish()
}

fn decode_mlp(r: &mut Reader<'_>) -> DecodeResult<(String, Mlp)> {
    let len = r.usize32("name length")?;
    let name = String::from_utf8(r.take(len, "net name")?.to_vec());
    let Ok(name) = name else { return r.fail("net name is not utf-8") };
    let count = r.usize32("layer count")?;
    let mut layers = Vec::new();
    for _ in 0..count {
        let activation = match r.u8("activation")? {
            0 => Activation::Relu,
            1 => Activation::Identity,
            other => return r.fail(format!("unknown activation tag {other}")),
        };
        let rows = r.usize32("rows")?;
        let cols = r.usize32("cols")?;
        let Some(n) = rows.checked_mul(cols) else { return r.fail("layer too large") };
        let values = r.f64s(n, "weights")?;
        let bias = r.f64s(rows, "bias")?;
        let weight = match Mat::from_vec(rows, cols, values) {
            Ok(m) => m,
            Err(e) => return r.fail(format!("net `{name}`: {e}")),
        };
        layers.push(Layer { weight, bias, activation });
    }
    match Mlp::from_layers(layers) {
        Ok(net) => Ok((name, net)),
        Err(e) => r.fail(format!("net `{name}`: {e}")),
    }
}

pub fn decode_bundle(bytes: &[u8]) -> DecodeResult<ModelBundle> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let version = r.u32("version")?;
    if version != VERSION {
        return r.fail(format!("unsupported version {version}, expected {VERSION}"));
    }
    let count = r.usize32("net count")?;
    let mut nets = Vec::new();
    for _ in 0..count {
        nets.push(decode_mlp(&mut r)?);
    }
    let mut take = |name: &str| -> DecodeResult<Mlp> {
        match nets.iter().position(|(n, _)| n == name) {
            Some(i) => Ok(nets.swap_remove(i).1),
            None => r.fail(format!("missing net `{name}`")),
        }
    };
    let encoder = take(ENCODER)?;
    let head = take(HEAD)?;
    let clf = ClipClassifier { net: take(CLASSIFIER)? };
    let baseline = ClipClassifier { net: take(BASELINE)? };
    let response = ClipClassifier { net: take(RESPONSE)? };
    let obs = match ObservationNet::from_parts(encoder, head) {
        Ok(o) => o,
        Err(e) => return r.fail(format!("observation network: {e}")),
    };
    if let Some((name, _)) = nets.first() {
        return r.fail(format!("unexpected net `{name}`"));
    }
    r.finish()?;
    Ok(ModelBundle { model: DsnModel { obs, clf }, baseline, response })
}

pub fn write_bundle(bundle: &ModelBundle, path: &Path) -> Result<()> {
    write_atomic(path, &encode_bundle(bundle))
}

pub fn read_bundle(path: &Path) -> Result<ModelBundle> {
    let bytes = std::fs::read(path).map_err(|e| LabError::io(path, e))?;
    decode_bundle(&bytes).map_err(|DecodeError { offset, message }| LabError::Format {
        path: path.to_path_buf(),
        offset,
        message,
    })
}
