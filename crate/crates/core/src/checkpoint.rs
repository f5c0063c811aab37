//! Binary checkpoint format.
//!
//! Layout, all little-endian: magic "MRGT", version u16, u32 header length,
//! a JSON header (precision tag, epoch, best validation loss, RNG state,
//! model and train configs, vocabulary), u32 manifest count, manifest
//! entries (name, lr group, shape, byte offsets of the value and the two
//! optimizer moment blobs), then the raw blob section. Saving and loading
//! are bitwise lossless.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{DataError, Vocabulary};
use crate::model::{ModelConfig, ModelParams};
use crate::numcore::{LrGroup, Matrix, NumError, ParamTensor, Scalar};
use crate::trainer::{OptimState, TrainConfig};

const MAGIC: &[u8; 4] = b"MRGT";
const VERSION: u16 = 1;

#[derive(Error, Debug)]
pub enum CkptError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint: {0}")]
    Format(String),
    #[error("checkpoint precision is {got}, expected {expected}")]
    Precision { expected: &'static str, got: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// ChaCha8 generator state, enough to restore the stream exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub word_pos_hi: u64,
    pub word_pos_lo: u64,
    pub stream: u64,
}

impl RngState {
    pub fn capture(rng: &rand_chacha::ChaCha8Rng) -> Self {
        let word_pos = rng.get_word_pos();
        RngState {
            seed: rng.get_seed(),
            word_pos_hi: (word_pos >> 64) as u64,
            word_pos_lo: word_pos as u64,
            stream: rng.get_stream(),
        }
    }

    pub fn restore(&self) -> rand_chacha::ChaCha8Rng {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(((self.word_pos_hi as u128) << 64) | self.word_pos_lo as u128);
        rng
    }
}

/// A full training state snapshot.
#[derive(Clone, Debug)]
pub struct Checkpoint<T> {
    pub config: ModelConfig,
    pub train_config: TrainConfig,
    pub vocab: Vocabulary,
    pub epoch: usize,
    pub best_val_loss: f64,
    pub rng: RngState,
    pub params: ModelParams<T>,
    pub opt: OptimState<T>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    precision: String,
    epoch: usize,
    best_val_loss: f64,
    opt_step: u64,
    rng: RngState,
    config: ModelConfig,
    train_config: TrainConfig,
    vocab: Vec<String>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            precision: T::PRECISION.to_string(),
            epoch: self.epoch,
            best_val_loss: self.best_val_loss,
            opt_step: self.opt.step(),
            rng: self.rng,
            config: self.config,
            train_config: self.train_config,
            vocab: self.vocab.ordered_tokens().to_vec(),
        };
        let header_bytes = serde_json::to_vec(&header).expect("header serialization");

        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
        out.extend_from_slice(&header_bytes);

        let tensors = self.params.tensors();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());

        let mut offset = 0u64;
        let mut manifest = Vec::new();
        for (i, t) in tensors.iter().enumerate() {
            let (rows, cols) = t.value.shape();
            let blob = (rows * cols * T::WIDTH) as u64;
            manifest.push((i, offset, offset + blob, offset + 2 * blob));
            offset += 3 * blob;
            let name = t.name.as_bytes();
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name);
            out.push(match t.lr_group {
                LrGroup::Backbone => 0,
                LrGroup::Gcn => 1,
            });
            out.extend_from_slice(&(rows as u32).to_le_bytes());
            out.extend_from_slice(&(cols as u32).to_le_bytes());
            out.extend_from_slice(&manifest[i].1.to_le_bytes());
            out.extend_from_slice(&manifest[i].2.to_le_bytes());
            out.extend_from_slice(&manifest[i].3.to_le_bytes());
        }
        for (i, t) in tensors.iter().enumerate() {
            for &v in t.value.data() {
                v.write_le(&mut out);
            }
            for &v in self.opt.first_moment(i).data() {
                v.write_le(&mut out);
            }
            for &v in self.opt.second_moment(i).data() {
                v.write_le(&mut out);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CkptError> {
        let mut cursor = Cursor { bytes, pos: 0 };
        if cursor.take(4)? != MAGIC {
            return Err(CkptError::Format("bad magic".into()));
        }
        let version = u16::from_le_bytes(cursor.take(2)?.try_into().unwrap());
        if version != VERSION {
            return Err(CkptError::Format(format!("unsupported version {version}")));
        }
        let header_len = u32::from_le_bytes(cursor.take(4)?.try_into().unwrap()) as usize;
        let header: Header = serde_json::from_slice(cursor.take(header_len)?)
            .map_err(|e| CkptError::Format(format!("bad header: {e}")))?;
        if header.precision != T::PRECISION {
            return Err(CkptError::Precision {
                expected: T::PRECISION,
                got: header.precision,
            });
        }
        let vocab = Vocabulary::from_ordered_tokens(&header.vocab)?;

        let count = u32::from_le_bytes(cursor.take(4)?.try_into().unwrap()) as usize;
        struct Entry {
            name: String,
            group: LrGroup,
            rows: usize,
            cols: usize,
            value_off: u64,
            m_off: u64,
            v_off: u64,
        }
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = u16::from_le_bytes(cursor.take(2)?.try_into().unwrap()) as usize;
            let name = String::from_utf8(cursor.take(name_len)?.to_vec())
                .map_err(|e| CkptError::Format(format!("bad name: {e}")))?;
            let group = match cursor.take(1)?[0] {
                0 => LrGroup::Backbone,
                1 => LrGroup::Gcn,
                other => return Err(CkptError::Format(format!("bad lr group {other}"))),
            };
            let rows = u32::from_le_bytes(cursor.take(4)?.try_into().unwrap()) as usize;
            let cols = u32::from_le_bytes(cursor.take(4)?.try_into().unwrap()) as usize;
            let value_off = u64::from_le_bytes(cursor.take(8)?.try_into().unwrap());
            let m_off = u64::from_le_bytes(cursor.take(8)?.try_into().unwrap());
            let v_off = u64::from_le_bytes(cursor.take(8)?.try_into().unwrap());
            entries.push(Entry {
                name,
                group,
                rows,
                cols,
                value_off,
                m_off,
                v_off,
            });
        }
        let blob = &bytes[cursor.pos..];
        let read_matrix = |rows: usize, cols: usize, off: u64| -> Result<Matrix<T>, CkptError> {
            let start = off as usize;
            let len = rows * cols * T::WIDTH;
            let slice = blob.get(start..start + len).ok_or_else(|| {
                CkptError::Format("blob section truncated".into())
            })?;
            let data: Vec<T> = slice.chunks_exact(T::WIDTH).map(T::read_le).collect();
            Matrix::from_vec(rows, cols, data).map_err(CkptError::Num)
        };

        let mut tensors = Vec::with_capacity(count);
        let mut first = Vec::with_capacity(count);
        let mut second = Vec::with_capacity(count);
        for e in &entries {
            let value = read_matrix(e.rows, e.cols, e.value_off)?;
            tensors.push(ParamTensor::new(e.name.clone(), value, e.group));
            first.push(read_matrix(e.rows, e.cols, e.m_off)?);
            second.push(read_matrix(e.rows, e.cols, e.v_off)?);
        }
        let params = ModelParams::from_tensors(header.config, tensors)?;
        let opt = OptimState::from_parts(first, second, header.opt_step);

        Ok(Checkpoint {
            config: header.config,
            train_config: header.train_config,
            vocab,
            epoch: header.epoch,
            best_val_loss: header.best_val_loss,
            rng: header.rng,
            params,
            opt,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CkptError> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|source| CkptError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CkptError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|source| CkptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CkptError> {
        let slice = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| CkptError::Format("file truncated".into()))?;
        self.pos += n;
        Ok(slice)
    }
}
