//! Model files. Logistic models are plain JSON. GBDT models are a binary
//! container: magic `QSGB`, u32 version, u64 header length, a JSON header,
//! then per tree a u32 node count followed by fixed 21-byte nodes
//! (u8 tag, u32 feature, u64 value bits, u32 left, u32 right), little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::FeatureMode;
use super::gbdt::{GbdtModel, Node, Tree};
use super::{BoundaryModel, LogisticModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const GBDT_MAGIC: &[u8; 4] = b"QSGB";
const FORMAT_VERSION: u32 = 1;
const LOGISTIC_FORMAT: &str = "qseg-logistic";
const GBDT_FORMAT: &str = "qseg-gbdt";

/// A boundary model with what is needed to rebuild its input features.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile<F: Scalar> {
    pub model: BoundaryModel<F>,
    pub feature_mode: FeatureMode,
    pub embedding_dimension: usize,
    /// Free-form provenance (configuration, seed, metrics).
    pub metadata: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct LogisticDoc<F: Scalar> {
    format: String,
    version: u32,
    scalar: String,
    feature_mode: FeatureMode,
    embedding_dimension: usize,
    metadata: serde_json::Value,
    model: LogisticModel<F>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct GbdtHeader<F: Scalar> {
    format: String,
    scalar: String,
    feature_mode: FeatureMode,
    embedding_dimension: usize,
    n_features: usize,
    base_score: F,
    shrinkage: F,
    max_depth: usize,
    n_estimators: usize,
    n_trees: usize,
    metadata: serde_json::Value,
}

fn check_scalar<F: Scalar>(name: &str) -> Result<()> {
    if name != F::NAME {
        return Err(Error::Format(format!(
            "model stores {name} values, expected {}",
            F::NAME
        )));
    }
    Ok(())
}

pub fn write_model<F: Scalar, W: Write>(mut w: W, file: &ModelFile<F>) -> Result<()> {
    match &file.model {
        BoundaryModel::Logistic(m) => {
            let doc = LogisticDoc {
                format: LOGISTIC_FORMAT.into(),
                version: FORMAT_VERSION,
                scalar: F::NAME.into(),
                feature_mode: file.feature_mode,
                embedding_dimension: file.embedding_dimension,
                metadata: file.metadata.clone(),
                model: m.clone(),
            };
            serde_json::to_writer_pretty(&mut w, &doc)?;
            w.write_all(b"\n")?;
        }
        BoundaryModel::Gbdt(m) => {
            let header = GbdtHeader {
                format: GBDT_FORMAT.into(),
                scalar: F::NAME.into(),
                feature_mode: file.feature_mode,
                embedding_dimension: file.embedding_dimension,
                n_features: m.n_features,
                base_score: m.base_score,
                shrinkage: m.shrinkage,
                max_depth: m.max_depth,
                n_estimators: m.n_estimators,
                n_trees: m.trees.len(),
                metadata: file.metadata.clone(),
            };
            let header = serde_json::to_vec(&header)?;
            w.write_all(GBDT_MAGIC)?;
            w.write_all(&FORMAT_VERSION.to_le_bytes())?;
            w.write_all(&(header.len() as u64).to_le_bytes())?;
            w.write_all(&header)?;
            for t in &m.trees {
                w.write_all(&(t.nodes.len() as u32).to_le_bytes())?;
                for n in &t.nodes {
                    let (tag, feature, bits, left, right) = match *n {
                        Node::Leaf { value } => (0u8, 0u32, value.to_bits_u64(), 0u32, 0u32),
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => (1, feature, threshold.to_bits_u64(), left, right),
                    };
                    w.write_all(&[tag])?;
                    w.write_all(&feature.to_le_bytes())?;
                    w.write_all(&bits.to_le_bytes())?;
                    w.write_all(&left.to_le_bytes())?;
                    w.write_all(&right.to_le_bytes())?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_tree<F: Scalar, R: Read>(r: &mut R, n_features: usize) -> Result<Tree<F>> {
    let count = read_u32(r)? as usize;
    let mut nodes = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let feature = read_u32(r)?;
        let value = F::from_bits_u64(read_u64(r)?);
        let left = read_u32(r)?;
        let right = read_u32(r)?;
        nodes.push(match tag[0] {
            0 => Node::Leaf { value },
            1 => Node::Split {
                feature,
                threshold: value,
                left,
                right,
            },
            t => return Err(Error::Format(format!("unknown node tag {t}"))),
        });
    }
    // Children must point forward so prediction always terminates.
    for (i, n) in nodes.iter().enumerate() {
        if let Node::Split {
            feature, left, right, ..
        } = *n
        {
            let ok = (feature as usize) < n_features
                && (left as usize) > i
                && (right as usize) > i
                && (left as usize) < count
                && (right as usize) < count;
            if !ok {
                return Err(Error::Format(format!("corrupt split node {i}")));
            }
        }
    }
    if nodes.is_empty() {
        return Err(Error::Format("empty tree".into()));
    }
    Ok(Tree { nodes })
}

pub fn read_model<F: Scalar, R: Read>(mut r: R) -> Result<ModelFile<F>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.starts_with(GBDT_MAGIC) {
        let mut cur = &bytes[4..];
        let version = read_u32(&mut cur)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported GBDT format version {version}")));
        }
        let len = read_u64(&mut cur)? as usize;
        if len > cur.len() {
            return Err(Error::Format("truncated header".into()));
        }
        let header: GbdtHeader<F> = serde_json::from_slice(&cur[..len])?;
        cur = &cur[len..];
        if header.format != GBDT_FORMAT {
            return Err(Error::Format(format!("unexpected format {:?}", header.format)));
        }
        check_scalar::<F>(&header.scalar)?;
        let trees = (0..header.n_trees)
            .map(|_| read_tree(&mut cur, header.n_features))
            .collect::<Result<Vec<_>>>()?;
        if !cur.is_empty() {
            return Err(Error::Format("trailing bytes after trees".into()));
        }
        return Ok(ModelFile {
            model: BoundaryModel::Gbdt(GbdtModel {
                base_score: header.base_score,
                shrinkage: header.shrinkage,
                max_depth: header.max_depth,
                n_estimators: header.n_estimators,
                n_features: header.n_features,
                trees,
            }),
            feature_mode: header.feature_mode,
            embedding_dimension: header.embedding_dimension,
            metadata: header.metadata,
        });
    }
    let doc: LogisticDoc<F> = serde_json::from_slice(&bytes)?;
    if doc.format != LOGISTIC_FORMAT {
        return Err(Error::Format(format!("unexpected format {:?}", doc.format)));
    }
    if doc.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported logistic format version {}",
            doc.version
        )));
    }
    check_scalar::<F>(&doc.scalar)?;
    Ok(ModelFile {
        model: BoundaryModel::Logistic(doc.model),
        feature_mode: doc.feature_mode,
        embedding_dimension: doc.embedding_dimension,
        metadata: doc.metadata,
    })
}

pub fn save_model<F: Scalar>(path: &Path, file: &ModelFile<F>) -> Result<()> {
    write_model(BufWriter::new(File::create(path)?), file)
}

pub fn load_model<F: Scalar>(path: &Path) -> Result<ModelFile<F>> {
    read_model(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmenter::{train_gbdt, Dataset, GbdtConfig};

    fn gbdt_file() -> ModelFile<f64> {
        let mut ds = Dataset::new(2);
        for i in 0..60 {
            let x = [(i % 10) as f64 / 3.0, (i % 7) as f64 * 0.37];
            ds.push_row(&x, x[0] > x[1]).unwrap();
        }
        let cfg = GbdtConfig {
            n_estimators: 8,
            max_depth: 3,
            ..GbdtConfig::default()
        };
        ModelFile {
            model: BoundaryModel::Gbdt(train_gbdt(&ds, &cfg).unwrap()),
            feature_mode: FeatureMode::Average,
            embedding_dimension: 2,
            metadata: serde_json::json!({"seed": 4}),
        }
    }

    #[test]
    fn gbdt_round_trip_is_exact() {
        let file = gbdt_file();
        let mut buf = Vec::new();
        write_model(&mut buf, &file).unwrap();
        assert!(buf.starts_with(GBDT_MAGIC));
        assert_eq!(read_model::<f64, _>(buf.as_slice()).unwrap(), file);
        assert!(matches!(read_model::<f32, _>(buf.as_slice()), Err(Error::Format(_))));
        buf.truncate(buf.len() - 3);
        assert!(read_model::<f64, _>(buf.as_slice()).is_err());
    }

    #[test]
    fn logistic_round_trip_is_exact() {
        let file = ModelFile {
            model: BoundaryModel::Logistic(LogisticModel {
                weights: vec![0.1f64, -2.0 / 3.0, 1e-300],
                bias: std::f64::consts::PI,
                l2: 1e-4,
                learning_rate: 0.05,
            }),
            feature_mode: FeatureMode::Concat,
            embedding_dimension: 0,
            metadata: serde_json::Value::Null,
        };
        let mut buf = Vec::new();
        write_model(&mut buf, &file).unwrap();
        assert_eq!(read_model::<f64, _>(buf.as_slice()).unwrap(), file);
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(read_model::<f64, _>(&b"not a model"[..]).is_err());
        assert!(read_model::<f64, _>(&b"QSGB\x09\0\0\0"[..]).is_err());
    }
}
