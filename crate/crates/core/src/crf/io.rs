//! Versioned binary model container: tag set, feature dictionary, weights,
//! template fingerprint and an echo of the training configuration.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use super::{CrfModel, ModelError, TrainConfig};

const MAGIC: &[u8; 8] = b"NECRFMDL";
const VERSION: u32 = 1;
/// Upper bound on any length field; larger values mean a corrupt file.
const MAX_LEN: u64 = 1 << 31;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error(
        "model was trained with a different extractor configuration \
         (template hash {found} != expected {expected}); \
         pass the gazetteers the model was trained with"
    )]
    TemplateMismatch { expected: String, found: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn corrupt_on_eof(e: io::Error, what: &str) -> ModelIoError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        ModelIoError::Corrupt(format!("truncated while reading {what}"))
    } else {
        ModelIoError::Io(e)
    }
}

fn write_string<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_u64::<LittleEndian>(s.len() as u64)?;
    w.write_all(s.as_bytes())
}

fn read_string<R: Read>(r: &mut R, what: &str) -> Result<String, ModelIoError> {
    let len = r
        .read_u64::<LittleEndian>()
        .map_err(|e| corrupt_on_eof(e, what))?;
    if len > MAX_LEN {
        return Err(ModelIoError::Corrupt(format!(
            "implausible {what} length {len}"
        )));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf)
        .map_err(|e| corrupt_on_eof(e, what))?;
    String::from_utf8(buf).map_err(|_| ModelIoError::Corrupt(format!("{what} is not UTF-8")))
}

impl CrfModel {
    pub fn save(&self, path: &Path) -> Result<(), ModelIoError> {
        if let Some(i) = self.weights.iter().position(|w| !w.is_finite()) {
            return Err(ModelError::NonFiniteWeight(i).into());
        }
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        write_string(&mut w, &self.template_hash)?;
        w.write_u64::<LittleEndian>(self.tags.len() as u64)?;
        for tag in &self.tags {
            write_string(&mut w, tag)?;
        }
        w.write_u64::<LittleEndian>(self.feature_keys.len() as u64)?;
        for key in &self.feature_keys {
            write_string(&mut w, key)?;
        }
        w.write_u64::<LittleEndian>(self.weights.len() as u64)?;
        for &weight in &self.weights {
            w.write_f64::<LittleEndian>(weight)?;
        }
        let c = &self.config;
        w.write_f64::<LittleEndian>(c.l1)?;
        w.write_f64::<LittleEndian>(c.l2)?;
        w.write_u64::<LittleEndian>(c.max_epochs as u64)?;
        w.write_u64::<LittleEndian>(c.patience as u64)?;
        w.write_f64::<LittleEndian>(c.eta_plus)?;
        w.write_f64::<LittleEndian>(c.eta_minus)?;
        w.write_f64::<LittleEndian>(c.delta_init)?;
        w.write_f64::<LittleEndian>(c.delta_min)?;
        w.write_f64::<LittleEndian>(c.delta_max)?;
        w.write_u64::<LittleEndian>(c.seed)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<CrfModel, ModelIoError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|e| corrupt_on_eof(e, "magic"))?;
        if &magic != MAGIC {
            return Err(ModelIoError::BadMagic);
        }
        let version = r
            .read_u32::<LittleEndian>()
            .map_err(|e| corrupt_on_eof(e, "version"))?;
        if version != VERSION {
            return Err(ModelIoError::UnsupportedVersion(version));
        }
        let template_hash = read_string(&mut r, "template hash")?;

        let n_tags = r
            .read_u64::<LittleEndian>()
            .map_err(|e| corrupt_on_eof(e, "tag count"))?;
        if n_tags > MAX_LEN {
            return Err(ModelIoError::Corrupt(format!(
                "implausible tag count {n_tags}"
            )));
        }
        let tags: Vec<String> = (0..n_tags)
            .map(|_| read_string(&mut r, "tag"))
            .collect::<Result<_, _>>()?;

        let n_features = r
            .read_u64::<LittleEndian>()
            .map_err(|e| corrupt_on_eof(e, "feature count"))?;
        if n_features > MAX_LEN {
            return Err(ModelIoError::Corrupt(format!(
                "implausible feature count {n_features}"
            )));
        }
        let feature_keys: Vec<String> = (0..n_features)
            .map(|_| read_string(&mut r, "feature key"))
            .collect::<Result<_, _>>()?;

        let n_weights = r
            .read_u64::<LittleEndian>()
            .map_err(|e| corrupt_on_eof(e, "weight count"))?;
        let expected = tags.len() * feature_keys.len() + tags.len() * tags.len();
        if n_weights as usize != expected {
            return Err(ModelIoError::Corrupt(format!(
                "weight count {n_weights} does not match dimensions (expected {expected})"
            )));
        }
        let mut weights = Vec::with_capacity(expected);
        for _ in 0..expected {
            weights.push(
                r.read_f64::<LittleEndian>()
                    .map_err(|e| corrupt_on_eof(e, "weights"))?,
            );
        }

        let config = TrainConfig {
            l1: r
                .read_f64::<LittleEndian>()
                .map_err(|e| corrupt_on_eof(e, "config"))?,
            l2: r
                .read_f64::<LittleEndian>()
                .map_err(|e| corrupt_on_eof(e, "config"))?,
            max_epochs: r
                .read_u64::<LittleEndian>()
                .map_err(|e| corrupt_on_eof(e, "config"))? as usize,
            patience: r
                .read_u64::<LittleEndian>()
                .map_err(|e| corrupt_on_eof(e, "config"))? as usize,
            eta_plus: r
                .read_f64::<LittleEndian>()
                .map_err(|e| corrupt_on_eof(e, "config"))?,
            eta_minus: r
                .read_f64::<LittleEndian>()
                .map_err(|e| corrupt_on_eof(e, "config"))?,
            delta_init: r
                .read_f64::<LittleEndian>()
                .map_err(|e| corrupt_on_eof(e, "config"))?,
            delta_min: r
                .read_f64::<LittleEndian>()
                .map_err(|e| corrupt_on_eof(e, "config"))?,
            delta_max: r
                .read_f64::<LittleEndian>()
                .map_err(|e| corrupt_on_eof(e, "config"))?,
            seed: r
                .read_u64::<LittleEndian>()
                .map_err(|e| corrupt_on_eof(e, "config"))?,
        };
        let mut trailing = [0u8; 1];
        match r.read(&mut trailing) {
            Ok(0) => {}
            Ok(_) => return Err(ModelIoError::Corrupt("trailing bytes after model".into())),
            Err(e) => return Err(e.into()),
        }

        Ok(CrfModel::from_parts(
            tags,
            feature_keys,
            weights,
            template_hash,
            config,
        )?)
    }

    /// Loads and verifies the template fingerprint against the active
    /// extractor; a mismatch is refused.
    pub fn load_checked(path: &Path, expected_hash: &str) -> Result<CrfModel, ModelIoError> {
        let model = CrfModel::load(path)?;
        if model.template_hash != expected_hash {
            return Err(ModelIoError::TemplateMismatch {
                expected: expected_hash.to_owned(),
                found: model.template_hash,
            });
        }
        Ok(model)
    }
}
