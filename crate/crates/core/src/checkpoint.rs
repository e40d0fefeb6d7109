//! Versioned binary checkpoints.
//!
//! Layout: the 8-byte magic `LRRECKPT`, a little-endian `u32` format
//! version, one kind byte, then the bincode payload.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{AeHyper, AutoEncoderParams};
use crate::error::{Error, Result};
use crate::recsys::{RecHyper, RecModelParams};

pub const MAGIC: &[u8; 8] = b"LRRECKPT";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    AutoEncoder = 1,
    Recommender = 2,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::AutoEncoder => "autoencoder",
            Kind::Recommender => "recommender",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeCheckpoint {
    pub hyper: AeHyper,
    /// Carries the vocabulary.
    pub params: AutoEncoderParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecCheckpoint {
    pub hyper: RecHyper,
    /// Carries the variant and task tags.
    pub params: RecModelParams,
}

pub fn encode<T: Serialize>(kind: Kind, value: &T) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + 1024);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(kind as u8);
    bincode::serialize_into(&mut out, value).map_err(|e| Error::Format(e.to_string()))?;
    Ok(out)
}

pub fn decode<T: DeserializeOwned>(kind: Kind, bytes: &[u8]) -> Result<T> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(Error::Format("not a checkpoint file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "checkpoint format version {version}, this build reads {FORMAT_VERSION}"
        )));
    }
    if bytes[12] != kind as u8 {
        return Err(Error::Format(format!(
            "checkpoint holds kind {}, expected {}",
            bytes[12],
            kind.name()
        )));
    }
    bincode::deserialize(&bytes[HEADER_LEN..]).map_err(|e| Error::Format(e.to_string()))
}

pub fn save<T: Serialize>(path: &Path, kind: Kind, value: &T) -> Result<()> {
    fs::write(path, encode(kind, value)?)?;
    Ok(())
}

pub fn load<T: DeserializeOwned>(path: &Path, kind: Kind) -> Result<T> {
    decode(kind, &fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::train_autoencoder;

    fn ae() -> AeCheckpoint {
        let hyper = AeHyper { epochs: 2, maxlen: 6, ..AeHyper::default() };
        let t = train_autoencoder(&["a cozy quiet room", "a spicy dish"], &hyper).unwrap();
        AeCheckpoint { hyper, params: t.params }
    }

    #[test]
    fn round_trip_is_lossless() {
        let c = ae();
        let bytes = encode(Kind::AutoEncoder, &c).unwrap();
        let back: AeCheckpoint = decode(Kind::AutoEncoder, &bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(encode(Kind::AutoEncoder, &back).unwrap(), bytes);
    }

    #[test]
    fn header_is_checked() {
        let mut bytes = encode(Kind::AutoEncoder, &ae()).unwrap();
        assert!(matches!(
            decode::<RecCheckpoint>(Kind::Recommender, &bytes),
            Err(Error::Format(_))
        ));
        bytes[8] = 9;
        assert!(decode::<AeCheckpoint>(Kind::AutoEncoder, &bytes).is_err());
        assert!(decode::<AeCheckpoint>(Kind::AutoEncoder, b"short").is_err());
        let mut cut = encode(Kind::AutoEncoder, &ae()).unwrap();
        cut.truncate(cut.len() / 2);
        assert!(decode::<AeCheckpoint>(Kind::AutoEncoder, &cut).is_err());
    }
}
