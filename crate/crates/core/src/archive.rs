//! Binary model archives.
//!
//! Every trained model is stored in one container format: the magic
//! bytes `MTOPIC`, a format version byte, a model-type tag byte, then
//! a little-endian payload. All floats are raw f64 bits, so a save →
//! load round trip is bit-exact and reruns byte-identical.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::baseline::{ClassAxis, ClassGmmBank};
use crate::error::{Error, Result};
use crate::fusion::FusionModel;
use crate::lda::LdaModel;
use crate::svm::SvmModel;
use crate::vq::GmmModel;
use crate::weighting::IdfTable;

pub const ARCHIVE_MAGIC: &[u8; 6] = b"MTOPIC";
pub const ARCHIVE_VERSION: u8 = 1;

const TAG_GMM: u8 = 1;
const TAG_LDA: u8 = 2;
const TAG_IDF: u8 = 3;
const TAG_SVM: u8 = 4;
const TAG_FUSION: u8 = 5;
const TAG_BANK: u8 = 6;

/// Any model the archive can hold.
#[derive(Debug, Clone)]
pub enum Model {
    Gmm(GmmModel),
    Lda(LdaModel),
    Idf(IdfTable),
    Svm(SvmModel),
    Fusion(FusionModel),
    Bank(ClassGmmBank),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Gmm(_) => "gmm",
            Model::Lda(_) => "lda",
            Model::Idf(_) => "idf",
            Model::Svm(_) => "svm",
            Model::Fusion(_) => "fusion",
            Model::Bank(_) => "gmm-bank",
        }
    }
}

// ── encoding ────────────────────────────────────────────────────────

struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    fn new(tag: u8) -> Self {
        let mut buf = Vec::with_capacity(64);
        buf.extend_from_slice(ARCHIVE_MAGIC);
        buf.push(ARCHIVE_VERSION);
        buf.push(tag);
        Encoder { buf }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64_slice(&mut self, vs: impl IntoIterator<Item = f64>) {
        for v in vs {
            self.f64(v);
        }
    }

    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct Decoder<'a> {
    data: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        match end {
            Some(end) => {
                let slice = &self.data[self.pos..end];
                self.pos = end;
                Ok(slice)
            }
            None => Err(Error::format(
                self.path,
                format!("archive truncated before {what}"),
            )),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let v = self.u64(what)?;
        usize::try_from(v)
            .map_err(|_| Error::format(self.path, format!("{what} {v} does not fit in usize")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64_vec(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| {
            Error::format(self.path, format!("{what} length overflows"))
        })?, what)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn str(&mut self, what: &str) -> Result<String> {
        let len = self.usize(what)?;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::format(self.path, format!("{what} is not UTF-8")))
    }

    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<Array2<f64>> {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::format(self.path, format!("{what} dimensions overflow")))?;
        let values = self.f64_vec(n, what)?;
        Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| Error::format(self.path, e.to_string()))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::format(
                self.path,
                format!("{} trailing bytes after payload", self.data.len() - self.pos),
            ));
        }
        Ok(())
    }
}

fn encode_gmm_payload(enc: &mut Encoder, model: &GmmModel) {
    enc.u64(model.n_components() as u64);
    enc.u64(model.feature_dim() as u64);
    enc.f64_slice(model.weights.iter().copied());
    enc.f64_slice(model.means.iter().copied());
    enc.f64_slice(model.variances.iter().copied());
}

fn decode_gmm_payload(dec: &mut Decoder) -> Result<GmmModel> {
    let n = dec.usize("component count")?;
    let f = dec.usize("feature dimension")?;
    let weights = dec.f64_vec(n, "weights")?;
    let means = dec.matrix(n, f, "means")?;
    let variances = dec.matrix(n, f, "variances")?;
    Ok(GmmModel {
        weights,
        means,
        variances,
    })
}

/// Serialize any model to `path`.
pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    let mut enc = match model {
        Model::Gmm(m) => {
            let mut enc = Encoder::new(TAG_GMM);
            encode_gmm_payload(&mut enc, m);
            enc
        }
        Model::Lda(m) => {
            let mut enc = Encoder::new(TAG_LDA);
            enc.f64(m.alpha);
            enc.u64(m.topic_count() as u64);
            enc.u64(m.vocab_size() as u64);
            enc.f64_slice(m.log_beta.iter().copied());
            enc
        }
        Model::Idf(m) => {
            let mut enc = Encoder::new(TAG_IDF);
            enc.u64(m.vocab_size as u64);
            enc.u64(m.doc_count as u64);
            for &d in &m.df {
                enc.u64(d);
            }
            match &m.terms {
                None => enc.u8(0),
                Some(terms) => {
                    enc.u8(1);
                    for t in terms {
                        enc.str(t);
                    }
                }
            }
            enc
        }
        Model::Svm(m) => {
            let mut enc = Encoder::new(TAG_SVM);
            enc.u64(m.class_count() as u64);
            enc.u64(m.weights.ncols() as u64);
            enc.f64(m.c_param);
            enc.f64_slice(m.weights.iter().copied());
            enc
        }
        Model::Fusion(m) => {
            let mut enc = Encoder::new(TAG_FUSION);
            enc.u64(m.system_count() as u64);
            enc.u64(m.class_count() as u64);
            enc.f64_slice(m.scales.iter().copied());
            enc.f64_slice(m.offsets.iter().copied());
            enc
        }
        Model::Bank(b) => {
            let mut enc = Encoder::new(TAG_BANK);
            enc.u8(match b.axis {
                ClassAxis::Genre => 0,
                ClassAxis::Show => 1,
            });
            enc.u64(b.models.len() as u64);
            for m in &b.models {
                encode_gmm_payload(&mut enc, m);
            }
            enc
        }
    };
    fs::write(path, std::mem::take(&mut enc.buf)).map_err(|e| Error::io(path, e))
}

/// Load any model from `path`, validating it structurally.
pub fn load_model(path: &Path) -> Result<Model> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    if !data.starts_with(ARCHIVE_MAGIC) {
        return Err(Error::format(path, "bad magic: not a model archive"));
    }
    let mut dec = Decoder {
        data: &data,
        pos: ARCHIVE_MAGIC.len(),
        path,
    };
    let version = dec.u8("version")?;
    if version != ARCHIVE_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported archive version {version}, expected {ARCHIVE_VERSION}"),
        ));
    }
    let tag = dec.u8("model tag")?;
    let model = match tag {
        TAG_GMM => {
            let m = decode_gmm_payload(&mut dec)?;
            m.validate().map_err(|e| Error::format(path, e.to_string()))?;
            Model::Gmm(m)
        }
        TAG_LDA => {
            let alpha = dec.f64("alpha")?;
            let k = dec.usize("topic count")?;
            let v = dec.usize("vocabulary size")?;
            let log_beta = dec.matrix(k, v, "topic matrix")?;
            let m = LdaModel { alpha, log_beta };
            m.validate().map_err(|e| Error::format(path, e.to_string()))?;
            Model::Lda(m)
        }
        TAG_IDF => {
            let vocab_size = dec.usize("vocabulary size")?;
            let doc_count = dec.usize("document count")?;
            let mut df = Vec::with_capacity(vocab_size);
            for _ in 0..vocab_size {
                df.push(dec.u64("df entry")?);
            }
            let terms = match dec.u8("terms flag")? {
                0 => None,
                1 => {
                    let mut terms = Vec::with_capacity(vocab_size);
                    for _ in 0..vocab_size {
                        terms.push(dec.str("term")?);
                    }
                    Some(terms)
                }
                other => {
                    return Err(Error::format(path, format!("bad terms flag {other}")));
                }
            };
            let m = IdfTable {
                vocab_size,
                doc_count,
                df,
                terms,
            };
            m.validate().map_err(|e| Error::format(path, e.to_string()))?;
            Model::Idf(m)
        }
        TAG_SVM => {
            let c = dec.usize("class count")?;
            let cols = dec.usize("weight columns")?;
            let c_param = dec.f64("c parameter")?;
            let weights = dec.matrix(c, cols, "weights")?;
            let m = SvmModel { weights, c_param };
            m.validate().map_err(|e| Error::format(path, e.to_string()))?;
            Model::Svm(m)
        }
        TAG_FUSION => {
            let k = dec.usize("system count")?;
            let c = dec.usize("class count")?;
            let scales = dec.f64_vec(k, "scales")?;
            let offsets = dec.f64_vec(c, "offsets")?;
            let m = FusionModel { scales, offsets };
            m.validate().map_err(|e| Error::format(path, e.to_string()))?;
            Model::Fusion(m)
        }
        TAG_BANK => {
            let axis = match dec.u8("axis")? {
                0 => ClassAxis::Genre,
                1 => ClassAxis::Show,
                other => return Err(Error::format(path, format!("bad axis {other}"))),
            };
            let count = dec.usize("class count")?;
            let mut models = Vec::with_capacity(count);
            for _ in 0..count {
                models.push(decode_gmm_payload(&mut dec)?);
            }
            let b = ClassGmmBank { axis, models };
            b.validate().map_err(|e| Error::format(path, e.to_string()))?;
            Model::Bank(b)
        }
        other => {
            return Err(Error::format(path, format!("unknown model tag {other}")));
        }
    };
    dec.finish()?;
    Ok(model)
}

fn wrong_kind(path: &Path, expected: &str, found: &str) -> Error {
    Error::format(path, format!("expected {expected} model, found {found}"))
}

pub fn load_gmm(path: &Path) -> Result<GmmModel> {
    match load_model(path)? {
        Model::Gmm(m) => Ok(m),
        other => Err(wrong_kind(path, "gmm", other.kind())),
    }
}

pub fn load_lda(path: &Path) -> Result<LdaModel> {
    match load_model(path)? {
        Model::Lda(m) => Ok(m),
        other => Err(wrong_kind(path, "lda", other.kind())),
    }
}

pub fn load_idf(path: &Path) -> Result<IdfTable> {
    match load_model(path)? {
        Model::Idf(m) => Ok(m),
        other => Err(wrong_kind(path, "idf", other.kind())),
    }
}

pub fn load_svm(path: &Path) -> Result<SvmModel> {
    match load_model(path)? {
        Model::Svm(m) => Ok(m),
        other => Err(wrong_kind(path, "svm", other.kind())),
    }
}

pub fn load_fusion(path: &Path) -> Result<FusionModel> {
    match load_model(path)? {
        Model::Fusion(m) => Ok(m),
        other => Err(wrong_kind(path, "fusion", other.kind())),
    }
}

pub fn load_bank(path: &Path) -> Result<ClassGmmBank> {
    match load_model(path)? {
        Model::Bank(m) => Ok(m),
        other => Err(wrong_kind(path, "gmm-bank", other.kind())),
    }
}
