//! Dataset container, magic `BAE1`.
//!
//! Layout: magic | u32 header length | JSON header | records (train,
//! validation, calibration, test in order) | CRC32. Each record is `m_w`
//! little-endian f32 features, a u16 label, and an f32 realized-SNR field.
//! Features are stored in linear power regardless of the model-side
//! feature-scale flag recorded in the header.

use beamcred_core::attack::AttackConfig;
use beamcred_core::sweep::{Dataset, DatasetMeta, FeatureScale, NoiseModel, Sample};
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::{data_err, frame, unframe, Reader};
use crate::CliError;

pub const MAGIC: &[u8; 4] = b"BAE1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub calibration: usize,
    pub test: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetHeader {
    pub version: u32,
    pub m_w: usize,
    pub q: usize,
    pub counts: SplitCounts,
    pub p_bs_dbm: f64,
    pub noise: NoiseModel,
    pub seed: u64,
    pub feature_scale: FeatureScale,
    pub scenario_hash: u64,
    #[serde(default)]
    pub config_hash: Option<String>,
    #[serde(default)]
    pub adversarial: bool,
    #[serde(default)]
    pub attack: Option<AttackConfig>,
}

impl DatasetHeader {
    fn from_meta(meta: &DatasetMeta, counts: SplitCounts) -> Self {
        DatasetHeader {
            version: VERSION,
            m_w: meta.m_w,
            q: meta.q,
            counts,
            p_bs_dbm: meta.p_bs_dbm,
            noise: meta.noise,
            seed: meta.seed,
            feature_scale: meta.feature_scale,
            scenario_hash: meta.scenario_hash,
            config_hash: None,
            adversarial: false,
            attack: None,
        }
    }
}

/// Provenance marks added at write time.
#[derive(Debug, Clone, Default)]
pub struct WriteOptions {
    pub config_hash: Option<String>,
    pub adversarial: bool,
    pub attack: Option<AttackConfig>,
}

pub fn encode_dataset(dataset: &Dataset, opts: &WriteOptions) -> Result<Vec<u8>, CliError> {
    if dataset.meta.q > u16::MAX as usize + 1 {
        return Err(data_err("label alphabet exceeds u16 range"));
    }
    let counts = SplitCounts {
        train: dataset.train.len(),
        validation: dataset.validation.len(),
        calibration: dataset.calibration.len(),
        test: dataset.test.len(),
    };
    let mut header = DatasetHeader::from_meta(&dataset.meta, counts);
    header.config_hash = opts.config_hash.clone();
    header.adversarial = opts.adversarial;
    header.attack = opts.attack;

    let m_w = dataset.meta.m_w;
    let record_len = 4 * m_w + 2 + 4;
    let mut payload = Vec::with_capacity(dataset.total_len() * record_len);
    // Generation order: ue ids are positional in this sequence, so readers
    // can reconstruct them without a dedicated field.
    let splits = [
        &dataset.train,
        &dataset.validation,
        &dataset.test,
        &dataset.calibration,
    ];
    for split in splits {
        for s in split {
            if s.rssi.len() != m_w {
                return Err(data_err("sample feature length differs from m_w"));
            }
            if s.label >= dataset.meta.q {
                return Err(data_err("label out of range"));
            }
            for &v in &s.rssi {
                payload.extend_from_slice(&(v as f32).to_le_bytes());
            }
            payload.extend_from_slice(&(s.label as u16).to_le_bytes());
            payload.extend_from_slice(&(s.snr_db as f32).to_le_bytes());
        }
    }
    Ok(frame(MAGIC, &header, &payload))
}

pub fn write_dataset(path: &Path, dataset: &Dataset, opts: &WriteOptions) -> Result<(), CliError> {
    std::fs::write(path, encode_dataset(dataset, opts)?)?;
    Ok(())
}

pub fn decode_dataset(bytes: &[u8]) -> Result<(Dataset, DatasetHeader), CliError> {
    let (header, payload) = unframe::<DatasetHeader>(MAGIC, bytes, "dataset")?;
    if header.version != VERSION {
        return Err(data_err(format!(
            "dataset version mismatch: file has {}, reader supports {VERSION}",
            header.version
        )));
    }
    let total =
        header.counts.train + header.counts.validation + header.counts.calibration + header.counts.test;
    let record_len = 4 * header.m_w + 2 + 4;
    if payload.len() != total * record_len {
        return Err(data_err(format!(
            "dataset truncated: header promises {total} records ({} bytes), payload has {}",
            total * record_len,
            payload.len()
        )));
    }
    let mut r = Reader::new(payload);
    let mut read_split = |n: usize| -> Result<Vec<Sample>, CliError> {
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut rssi = Vec::with_capacity(header.m_w);
            for _ in 0..header.m_w {
                rssi.push(r.f32("feature")? as f64);
            }
            let label = r.u16("label")? as usize;
            if label >= header.q {
                return Err(data_err(format!("record {i}: label {label} >= q {}", header.q)));
            }
            let snr_db = r.f32("snr")? as f64;
            out.push(Sample {
                rssi,
                label,
                snr_db,
                ue_id: 0, // provenance assigned below
            });
        }
        Ok(out)
    };
    let mut train = read_split(header.counts.train)?;
    let mut validation = read_split(header.counts.validation)?;
    let mut test = read_split(header.counts.test)?;
    let mut calibration = read_split(header.counts.calibration)?;
    // ue ids are positional: records are written in generation order
    // (train, validation, test, calibration).
    let mut next = 0u32;
    for split in [&mut train, &mut validation, &mut test, &mut calibration] {
        for s in split.iter_mut() {
            s.ue_id = next;
            next += 1;
        }
    }
    let dataset = Dataset {
        train,
        validation,
        calibration,
        test,
        meta: DatasetMeta {
            m_w: header.m_w,
            q: header.q,
            p_bs_dbm: header.p_bs_dbm,
            scenario_hash: header.scenario_hash,
            seed: header.seed,
            noise: header.noise,
            feature_scale: header.feature_scale,
        },
    };
    Ok((dataset, header))
}

pub fn read_dataset(path: &Path) -> Result<(Dataset, DatasetHeader), CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| data_err(format!("cannot read dataset {}: {e}", path.display())))?;
    decode_dataset(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use beamcred_core::channel::ScenarioConfig;
    use beamcred_core::codebook::{dft_codebook, odft_codebook};
    use beamcred_core::sweep::{build_dataset, SweepConfig};

    fn sample_dataset() -> Dataset {
        let scen = ScenarioConfig {
            n_bs: 8,
            ..ScenarioConfig::default_with(40, 3)
        };
        build_dataset(
            &scen,
            &dft_codebook(8).unwrap(),
            &odft_codebook(8, 4).unwrap(),
            &SweepConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_stable() {
        let d = sample_dataset();
        let bytes = encode_dataset(&d, &WriteOptions::default()).unwrap();
        let (back, header) = decode_dataset(&bytes).unwrap();
        assert_eq!(header.counts.train, d.train.len());
        assert_eq!(back.meta, d.meta);
        // Features survive as their f32 roundings; provenance ids survive
        // positionally.
        for ((_, a), (_, b)) in d.splits().iter().zip(back.splits().iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.label, y.label);
                assert_eq!(x.ue_id, y.ue_id);
                for (u, v) in x.rssi.iter().zip(&y.rssi) {
                    assert_eq!(*u as f32, *v as f32);
                    assert_eq!(*v, *v as f32 as f64);
                }
            }
        }
        // Re-encoding the decoded dataset is byte-identical.
        let again = encode_dataset(&back, &WriteOptions::default()).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn corrupted_magic_is_rejected() {
        let d = sample_dataset();
        let mut bytes = encode_dataset(&d, &WriteOptions::default()).unwrap();
        bytes[0] = b'X';
        let err = decode_dataset(&bytes).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");
    }

    #[test]
    fn truncation_is_detected() {
        let d = sample_dataset();
        let bytes = encode_dataset(&d, &WriteOptions::default()).unwrap();
        // Drop one record plus the checksum, then re-add a valid checksum so
        // only the count check can catch it.
        let record_len = 4 * d.meta.m_w + 6;
        let cut = bytes.len() - 4 - record_len;
        let magic_and_len = 8;
        let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let mut shorter = bytes[..cut].to_vec();
        let mut hasher = crc32fast::Hasher::new();
        hasher.update(&shorter[magic_and_len..magic_and_len + header_len]);
        hasher.update(&shorter[magic_and_len + header_len..]);
        shorter.extend_from_slice(&hasher.finalize().to_le_bytes());
        let err = decode_dataset(&shorter).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn checksum_failure_is_detected() {
        let d = sample_dataset();
        let mut bytes = encode_dataset(&d, &WriteOptions::default()).unwrap();
        let n = bytes.len();
        bytes[n - 20] ^= 0xff;
        let err = decode_dataset(&bytes).unwrap_err();
        assert!(err.to_string().contains("checksum"), "{err}");
    }

    #[test]
    fn version_mismatch_is_detected() {
        let d = sample_dataset();
        let bytes = encode_dataset(&d, &WriteOptions::default()).unwrap();
        let (mut header, _) = unframe::<DatasetHeader>(MAGIC, &bytes, "dataset").unwrap();
        header.version = 9;
        let record_payload = &bytes[8 + u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize
            ..bytes.len() - 4];
        let rewritten = frame(MAGIC, &header, record_payload);
        let err = decode_dataset(&rewritten).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn adversarial_flag_round_trips() {
        let d = sample_dataset();
        let opts = WriteOptions {
            config_hash: Some("deadbeef".into()),
            adversarial: true,
            attack: Some(AttackConfig {
                epsilon: 0.25,
                clamp_nonnegative: true,
                relative_power_budget: None,
            }),
        };
        let bytes = encode_dataset(&d, &opts).unwrap();
        let (_, header) = decode_dataset(&bytes).unwrap();
        assert!(header.adversarial);
        assert_eq!(header.attack.unwrap().epsilon, 0.25);
        assert_eq!(header.config_hash.as_deref(), Some("deadbeef"));
    }
}
