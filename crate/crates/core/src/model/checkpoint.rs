//! Checkpoint layout, all integers little-endian:
//!
//! ```text
//! magic "DIARKIT\0" | version u32 | config_len u32 | config JSON | steps u64
//! | n_records u32 | records… | crc32 u32
//! record = name_len u16 | name | dtype u8 (0 f32, 1 u64) | rank u8 | dims u32… | values
//! ```
//!
//! The CRC covers every byte before it.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{ModelError, RcnnConfig, RcnnModel};
use crate::nn::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DIARKIT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

enum Record {
    F32(Vec<usize>, Vec<f32>),
    U64(u64),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ModelError + '_ {
    move |source| ModelError::Io { path: path.to_path_buf(), source }
}

impl RcnnModel {
    fn records(&self) -> Vec<(String, Record)> {
        let f = |t: &Tensor<f32>| Record::F32(t.shape().to_vec(), t.data().to_vec());
        let mut out = Vec::new();
        for (i, b) in self.net.blocks.iter().enumerate() {
            let c = b.bn.channels();
            out.push((format!("block{i}.conv.weight"), f(&b.conv.weight.value)));
            out.push((format!("block{i}.conv.bias"), f(&b.conv.bias.value)));
            out.push((format!("block{i}.bn.gamma"), f(&b.bn.gamma.value)));
            out.push((format!("block{i}.bn.beta"), f(&b.bn.beta.value)));
            out.push((format!("block{i}.bn.running_mean"), Record::F32(vec![c], b.bn.running_mean().to_vec())));
            out.push((format!("block{i}.bn.running_var"), Record::F32(vec![c], b.bn.running_var().to_vec())));
            out.push((format!("block{i}.bn.stat_steps"), Record::U64(b.bn.stat_steps())));
        }
        for (i, g) in self.net.grus.iter().enumerate() {
            out.push((format!("gru{i}.w"), f(&g.w.value)));
            out.push((format!("gru{i}.u"), f(&g.u.value)));
            out.push((format!("gru{i}.b"), f(&g.b.value)));
        }
        out.push(("dense.weight".into(), f(&self.net.dense.weight.value)));
        out.push(("dense.bias".into(), f(&self.net.dense.bias.value)));
        out
    }

    /// Serializes the model; identical models give identical bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let config = serde_json::to_vec(&self.config).expect("config is serializable");
        buf.extend_from_slice(&(config.len() as u32).to_le_bytes());
        buf.extend_from_slice(&config);
        buf.extend_from_slice(&self.steps.to_le_bytes());
        let records = self.records();
        buf.extend_from_slice(&(records.len() as u32).to_le_bytes());
        for (name, rec) in records {
            buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            match rec {
                Record::F32(shape, values) => {
                    buf.push(0);
                    buf.push(shape.len() as u8);
                    for d in shape {
                        buf.extend_from_slice(&(d as u32).to_le_bytes());
                    }
                    for v in values {
                        buf.extend_from_slice(&v.to_le_bytes());
                    }
                }
                Record::U64(v) => {
                    buf.push(1);
                    buf.push(0);
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        if bytes.len() < CHECKPOINT_MAGIC.len() || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(ModelError::Checkpoint("not a diarkit checkpoint (bad magic)".into()));
        }
        if bytes.len() < 16 {
            return Err(ModelError::Checksum);
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(ModelError::Version { found: version, expected: CHECKPOINT_VERSION });
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
            return Err(ModelError::Checksum);
        }
        let mut r = Reader { buf: body, pos: 12 };
        let config_len = r.u32()? as usize;
        let config: RcnnConfig = serde_json::from_slice(r.take(config_len)?)
            .map_err(|e| ModelError::Checkpoint(format!("config block: {e}")))?;
        let steps = r.u64()?;
        let n = r.u32()? as usize;
        let mut records = HashMap::new();
        for _ in 0..n {
            let name_len = r.u16()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| ModelError::Checkpoint("record name is not UTF-8".into()))?;
            let dtype = r.u8()?;
            let rank = r.u8()? as usize;
            let rec = match dtype {
                0 => {
                    let shape: Vec<usize> = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<_, _>>()?;
                    let len: usize = shape.iter().product();
                    let values = r
                        .take(len * 4)?
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                        .collect();
                    Record::F32(shape, values)
                }
                1 => Record::U64(r.u64()?),
                other => return Err(ModelError::Checkpoint(format!("record {name}: unknown dtype {other}"))),
            };
            records.insert(name, rec);
        }
        if r.pos != body.len() {
            return Err(ModelError::Checkpoint("trailing bytes after records".into()));
        }

        let mut model = RcnnModel::build(config, 0)?;
        model.steps = steps;
        fn tensor(records: &mut HashMap<String, Record>, name: String, target: &mut Tensor<f32>) -> Result<(), ModelError> {
            match records.remove(&name) {
                Some(Record::F32(shape, values)) if shape == target.shape() => {
                    target.data_mut().copy_from_slice(&values);
                    Ok(())
                }
                Some(Record::F32(shape, _)) => Err(ModelError::Checkpoint(format!(
                    "{name}: shape {shape:?}, model expects {:?}",
                    target.shape()
                ))),
                _ => Err(ModelError::Checkpoint(format!("missing tensor {name}"))),
            }
        }
        for (i, b) in model.net.blocks.iter_mut().enumerate() {
            tensor(&mut records, format!("block{i}.conv.weight"), &mut b.conv.weight.value)?;
            tensor(&mut records, format!("block{i}.conv.bias"), &mut b.conv.bias.value)?;
            tensor(&mut records, format!("block{i}.bn.gamma"), &mut b.bn.gamma.value)?;
            tensor(&mut records, format!("block{i}.bn.beta"), &mut b.bn.beta.value)?;
            let c = b.bn.channels();
            let mut mean = Tensor::zeros(&[c]);
            let mut var = Tensor::zeros(&[c]);
            tensor(&mut records, format!("block{i}.bn.running_mean"), &mut mean)?;
            tensor(&mut records, format!("block{i}.bn.running_var"), &mut var)?;
            let steps = match records.remove(&format!("block{i}.bn.stat_steps")) {
                Some(Record::U64(s)) => s,
                _ => return Err(ModelError::Checkpoint(format!("missing block{i}.bn.stat_steps"))),
            };
            b.bn.set_running_stats(mean.into_data(), var.into_data(), steps)?;
        }
        for (i, g) in model.net.grus.iter_mut().enumerate() {
            tensor(&mut records, format!("gru{i}.w"), &mut g.w.value)?;
            tensor(&mut records, format!("gru{i}.u"), &mut g.u.value)?;
            tensor(&mut records, format!("gru{i}.b"), &mut g.b.value)?;
        }
        tensor(&mut records, "dense.weight".into(), &mut model.net.dense.weight.value)?;
        tensor(&mut records, "dense.bias".into(), &mut model.net.dense.bias.value)?;
        if let Some(extra) = records.keys().next() {
            return Err(ModelError::Checkpoint(format!("unexpected record {extra}")));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(io_err(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(io_err(path))?;
        Self::from_bytes(&bytes)
    }

    /// Loads and verifies the class count recorded in the header.
    pub fn load_expecting(path: impl AsRef<Path>, n_classes: usize) -> Result<Self, ModelError> {
        let model = Self::load(path)?;
        if model.config.n_classes != n_classes {
            return Err(ModelError::ClassCount { expected: n_classes, found: model.config.n_classes });
        }
        Ok(model)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(ModelError::Checksum)?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ModelError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

