//! On-disk formats: activation stores, model checkpoints, logs and reports.
//!
//! Binary activation format (little-endian):
//!
//! ```text
//! magic "ACTV" | u32 version = 1 | u32 n_samples | u32 dim
//! then n_samples records of: u32 category_id | dim * f32
//! ```
//!
//! Checkpoint format (little-endian):
//!
//! ```text
//! magic "PHIM" | u32 version = 1 | u8 variant (1 linear, 2 two-layer)
//! | u32 dim | parameters as f64 in declared field order
//! ```
//!
//! CSV stores have no header; each line is `category_id,v1,...,vdim`.
//! Values are read at f32 precision to match the binary format; internal
//! arithmetic is f64 throughout. The store writer emits binary only.
//!
//! Malformed inputs are rejected with the byte offset (binary) or line
//! number (CSV) of the problem. Float text output uses 17 significant
//! digits so written values parse back bit-identically.

use std::fs;
use std::path::Path;

use actpred_core::{ActivationStore, CategoryId, PhiModel, PhiVariant, TrainLog};

pub const ACTV_MAGIC: [u8; 4] = *b"ACTV";
pub const ACTV_VERSION: u32 = 1;
pub const PHIM_MAGIC: [u8; 4] = *b"PHIM";
pub const PHIM_VERSION: u32 = 1;

/// Store file encodings accepted by the readers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreFormat {
    Binary,
    Csv,
}

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad magic at byte 0: expected {expected:?}, found {found:?}")]
    BadMagic {
        path: String,
        expected: String,
        found: String,
    },

    #[error("{path}: unsupported version {found} at byte 4 (expected {expected})")]
    BadVersion {
        path: String,
        expected: u32,
        found: u32,
    },

    #[error("{path}: empty file (header at byte 8 declares 0 samples)")]
    Empty { path: String },

    #[error(
        "{path}: dimension mismatch: header declares {n_samples} samples of dim {dim} \
         ({expected} bytes after byte 16), file carries {found}"
    )]
    LengthMismatch {
        path: String,
        n_samples: u32,
        dim: u32,
        expected: u64,
        found: u64,
    },

    #[error("{path}: truncated at byte {offset}: need {expected} bytes, file has {found}")]
    Truncated {
        path: String,
        offset: u64,
        expected: u64,
        found: u64,
    },

    #[error("{path}: line {line}: expected {expected} comma-separated fields, found {found}")]
    CsvArity {
        path: String,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}: line {line}, field {field}: {message}")]
    CsvField {
        path: String,
        line: usize,
        field: usize,
        message: String,
    },

    #[error("{path}: no data lines")]
    CsvEmpty { path: String },

    #[error("{path}: bad variant tag {tag} at byte 8 (1 = linear, 2 = two-layer)")]
    BadVariantTag { path: String, tag: u8 },

    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn io_err(path: &Path, source: std::io::Error) -> FormatError {
    FormatError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

/// Reads an activation store in the requested format.
pub fn read_store(path: &Path, format: StoreFormat) -> Result<ActivationStore, FormatError> {
    match format {
        StoreFormat::Binary => read_store_binary(path),
        StoreFormat::Csv => read_store_csv(path),
    }
}

pub fn read_store_binary(path: &Path) -> Result<ActivationStore, FormatError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() < 16 {
        return Err(FormatError::Truncated {
            path: path_str(path),
            offset: 0,
            expected: 16,
            found: bytes.len() as u64,
        });
    }
    if bytes[0..4] != ACTV_MAGIC {
        return Err(FormatError::BadMagic {
            path: path_str(path),
            expected: String::from_utf8_lossy(&ACTV_MAGIC).into_owned(),
            found: format!("{:?}", &bytes[0..4]),
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != ACTV_VERSION {
        return Err(FormatError::BadVersion {
            path: path_str(path),
            expected: ACTV_VERSION,
            found: version,
        });
    }
    let n_samples = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    if n_samples == 0 {
        return Err(FormatError::Empty {
            path: path_str(path),
        });
    }
    if dim == 0 {
        return Err(FormatError::Invalid {
            path: path_str(path),
            message: "header declares dim 0 at byte 12".into(),
        });
    }
    let record = 4 + 4 * dim as u64;
    let expected = n_samples as u64 * record;
    let found = (bytes.len() - 16) as u64;
    if expected != found {
        return Err(FormatError::LengthMismatch {
            path: path_str(path),
            n_samples,
            dim,
            expected,
            found,
        });
    }

    let mut samples = Vec::with_capacity(n_samples as usize);
    let mut offset = 16usize;
    for _ in 0..n_samples {
        let category = u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap());
        offset += 4;
        let mut v = Vec::with_capacity(dim as usize);
        for _ in 0..dim {
            let x = f32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap());
            offset += 4;
            v.push(x as f64);
        }
        samples.push((category, v));
    }
    ActivationStore::from_samples(dim as usize, samples).map_err(|e| FormatError::Invalid {
        path: path_str(path),
        message: e.to_string(),
    })
}

/// Writes a store in the binary format (values truncated to f32).
pub fn write_store(path: &Path, store: &ActivationStore) -> Result<(), FormatError> {
    let mut bytes = Vec::with_capacity(16 + store.len() * (4 + 4 * store.dim()));
    bytes.extend_from_slice(&ACTV_MAGIC);
    bytes.extend_from_slice(&ACTV_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(store.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&(store.dim() as u32).to_le_bytes());
    for (category, v) in store.samples() {
        bytes.extend_from_slice(&category.to_le_bytes());
        for &x in v {
            bytes.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

pub fn read_store_csv(path: &Path) -> Result<ActivationStore, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut samples: Vec<(CategoryId, Vec<f64>)> = Vec::new();
    let mut dim: Option<usize> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(FormatError::CsvArity {
                path: path_str(path),
                line: line_no,
                expected: dim.map(|d| d + 1).unwrap_or(2),
                found: fields.len(),
            });
        }
        let expected_fields = dim.map(|d| d + 1).unwrap_or(fields.len());
        if fields.len() != expected_fields {
            return Err(FormatError::CsvArity {
                path: path_str(path),
                line: line_no,
                expected: expected_fields,
                found: fields.len(),
            });
        }
        let category: CategoryId =
            fields[0]
                .trim()
                .parse()
                .map_err(|e| FormatError::CsvField {
                    path: path_str(path),
                    line: line_no,
                    field: 1,
                    message: format!("bad category id: {e}"),
                })?;
        let mut v = Vec::with_capacity(fields.len() - 1);
        for (f_idx, field) in fields[1..].iter().enumerate() {
            // f32 precision, matching the binary format.
            let x: f32 = field.trim().parse().map_err(|e| FormatError::CsvField {
                path: path_str(path),
                line: line_no,
                field: f_idx + 2,
                message: format!("bad value: {e}"),
            })?;
            v.push(x as f64);
        }
        dim = Some(v.len());
        samples.push((category, v));
    }
    if samples.is_empty() {
        return Err(FormatError::CsvEmpty {
            path: path_str(path),
        });
    }
    ActivationStore::from_samples(dim.unwrap(), samples).map_err(|e| FormatError::Invalid {
        path: path_str(path),
        message: e.to_string(),
    })
}

pub fn write_checkpoint(path: &Path, model: &PhiModel) -> Result<(), FormatError> {
    let mut bytes = Vec::with_capacity(13 + 8 * model.param_count());
    bytes.extend_from_slice(&PHIM_MAGIC);
    bytes.extend_from_slice(&PHIM_VERSION.to_le_bytes());
    bytes.push(match model.variant() {
        PhiVariant::Linear => 1,
        PhiVariant::TwoLayer => 2,
    });
    bytes.extend_from_slice(&(model.dim() as u32).to_le_bytes());
    for p in model.params() {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<PhiModel, FormatError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() < 13 {
        return Err(FormatError::Truncated {
            path: path_str(path),
            offset: 0,
            expected: 13,
            found: bytes.len() as u64,
        });
    }
    if bytes[0..4] != PHIM_MAGIC {
        return Err(FormatError::BadMagic {
            path: path_str(path),
            expected: String::from_utf8_lossy(&PHIM_MAGIC).into_owned(),
            found: format!("{:?}", &bytes[0..4]),
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != PHIM_VERSION {
        return Err(FormatError::BadVersion {
            path: path_str(path),
            expected: PHIM_VERSION,
            found: version,
        });
    }
    let variant = match bytes[8] {
        1 => PhiVariant::Linear,
        2 => PhiVariant::TwoLayer,
        tag => {
            return Err(FormatError::BadVariantTag {
                path: path_str(path),
                tag,
            })
        }
    };
    let dim = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(FormatError::Invalid {
            path: path_str(path),
            message: "header declares dim 0 at byte 9".into(),
        });
    }
    let expected = 13 + 8 * variant.param_count(dim) as u64;
    if bytes.len() as u64 != expected {
        return Err(FormatError::Truncated {
            path: path_str(path),
            offset: 13,
            expected,
            found: bytes.len() as u64,
        });
    }
    let params: Vec<f64> = bytes[13..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    PhiModel::from_params(dim, variant, params).map_err(|e| FormatError::Invalid {
        path: path_str(path),
        message: e.to_string(),
    })
}

/// 17-significant-digit float rendering; parses back bit-identically.
pub fn float_repr(x: f64) -> String {
    format!("{x:.16e}")
}

/// Train log as line-delimited `epoch,mean_loss,seconds` records.
pub fn write_train_log(path: &Path, log: &TrainLog) -> Result<(), FormatError> {
    let mut out = String::new();
    for (epoch, (loss, secs)) in log
        .epoch_mean_loss
        .iter()
        .zip(log.epoch_seconds.iter())
        .enumerate()
    {
        out.push_str(&format!("{epoch},{},{secs:.3}\n", float_repr(*loss)));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Line-oriented `key=value` report.
pub fn write_key_values(path: &Path, pairs: &[(String, String)]) -> Result<(), FormatError> {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(&format!("{k}={v}\n"));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Machine-readable `metric,split,value` records.
pub fn write_metric_records(
    path: &Path,
    records: &[(String, String, f64)],
) -> Result<(), FormatError> {
    let mut out = String::new();
    for (metric, split, value) in records {
        out.push_str(&format!("{metric},{split},{}\n", float_repr(*value)));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// One value per line.
pub fn write_values(path: &Path, values: &[f64]) -> Result<(), FormatError> {
    let mut out = String::new();
    for v in values {
        out.push_str(&float_repr(*v));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Comma-separated grid, one row per line.
pub fn write_grid_csv(path: &Path, grid: &[Vec<f64>]) -> Result<(), FormatError> {
    let mut out = String::new();
    for row in grid {
        let line: Vec<String> = row.iter().map(|v| float_repr(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Reads a grid written by [`write_grid_csv`].
pub fn read_grid_csv(path: &Path) -> Result<Vec<Vec<f64>>, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut grid = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (f_idx, field) in line.split(',').enumerate() {
            let x: f64 = field.trim().parse().map_err(|e| FormatError::CsvField {
                path: path_str(path),
                line: idx + 1,
                field: f_idx + 1,
                message: format!("bad value: {e}"),
            })?;
            row.push(x);
        }
        grid.push(row);
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use actpred_core::gen_synthetic;
    use actpred_core::SyntheticSpec;

    fn temp_path(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("actpred-fmt-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn sample_store() -> ActivationStore {
        gen_synthetic(&SyntheticSpec {
            n_categories: 3,
            samples_per_category: 4,
            dim: 5,
            center_scale: 1.0,
            noise_sigma: 0.2,
            normalize: false,
            seed: 1,
        })
        .unwrap()
        .0
    }

    #[test]
    fn binary_write_read_write_is_byte_identical() {
        let store = sample_store();
        let p1 = temp_path("roundtrip1.actv");
        let p2 = temp_path("roundtrip2.actv");
        write_store(&p1, &store).unwrap();
        let read_back = read_store_binary(&p1).unwrap();
        write_store(&p2, &read_back).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn binary_rejects_malformed_headers() {
        let store = sample_store();
        let path = temp_path("malformed.actv");
        write_store(&path, &store).unwrap();
        let good = fs::read(&path).unwrap();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        fs::write(&path, &bad_magic).unwrap();
        assert!(matches!(
            read_store_binary(&path),
            Err(FormatError::BadMagic { .. })
        ));

        let mut bad_version = good.clone();
        bad_version[4] = 9;
        fs::write(&path, &bad_version).unwrap();
        assert!(matches!(
            read_store_binary(&path),
            Err(FormatError::BadVersion { found: 9, .. })
        ));

        // Zero samples: "empty file".
        let mut empty = good.clone();
        empty[8..12].copy_from_slice(&0u32.to_le_bytes());
        empty.truncate(16);
        fs::write(&path, &empty).unwrap();
        assert!(matches!(read_store_binary(&path), Err(FormatError::Empty { .. })));

        // Declared dim 4 over a dim-3 payload: length mismatch.
        let dim3 = ActivationStore::from_samples(
            3,
            vec![(0, vec![1.0, 2.0, 3.0]), (1, vec![4.0, 5.0, 6.0])],
        )
        .unwrap();
        write_store(&path, &dim3).unwrap();
        let mut lying = fs::read(&path).unwrap();
        lying[12..16].copy_from_slice(&4u32.to_le_bytes());
        fs::write(&path, &lying).unwrap();
        match read_store_binary(&path) {
            Err(FormatError::LengthMismatch { dim: 4, .. }) => {}
            other => panic!("expected length mismatch, got {other:?}"),
        }

        let truncated = good[..10].to_vec();
        fs::write(&path, truncated).unwrap();
        assert!(matches!(
            read_store_binary(&path),
            Err(FormatError::Truncated { .. })
        ));
    }

    #[test]
    fn csv_reads_minimal_store() {
        let path = temp_path("tiny.csv");
        fs::write(&path, "0,1.0,0.0\n1,0.0,1.0\n").unwrap();
        let store = read_store_csv(&path).unwrap();
        assert_eq!(store.dim(), 2);
        assert_eq!(store.n_categories(), 2);
        assert_eq!(store.vector(0), &[1.0, 0.0]);
    }

    #[test]
    fn csv_reports_line_numbers() {
        let path = temp_path("bad.csv");
        fs::write(&path, "0,1.0,2.0\n1,3.0\n").unwrap();
        match read_store_csv(&path) {
            Err(FormatError::CsvArity { line: 2, .. }) => {}
            other => panic!("expected arity error on line 2, got {other:?}"),
        }

        fs::write(&path, "0,1.0,2.0\n1,x,2.0\n").unwrap();
        match read_store_csv(&path) {
            Err(FormatError::CsvField { line: 2, field: 2, .. }) => {}
            other => panic!("expected field error, got {other:?}"),
        }

        fs::write(&path, "").unwrap();
        assert!(matches!(
            read_store_csv(&path),
            Err(FormatError::CsvEmpty { .. })
        ));
    }

    #[test]
    fn checkpoint_roundtrip_preserves_bits() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for model in [
            PhiModel::init_linear(4, 0.1, &mut rng),
            PhiModel::init_two_layer(4, 0.5, &mut rng),
        ] {
            let p1 = temp_path("model1.phim");
            let p2 = temp_path("model2.phim");
            write_checkpoint(&p1, &model).unwrap();
            let back = read_checkpoint(&p1).unwrap();
            assert_eq!(back, model);
            write_checkpoint(&p2, &back).unwrap();
            assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        }
    }

    #[test]
    fn checkpoint_rejects_bad_tag_and_length() {
        let model = PhiModel::linear_identity(3);
        let path = temp_path("badtag.phim");
        write_checkpoint(&path, &model).unwrap();
        let good = fs::read(&path).unwrap();

        let mut bad_tag = good.clone();
        bad_tag[8] = 7;
        fs::write(&path, &bad_tag).unwrap();
        assert!(matches!(
            read_checkpoint(&path),
            Err(FormatError::BadVariantTag { tag: 7, .. })
        ));

        let mut short = good.clone();
        short.truncate(good.len() - 8);
        fs::write(&path, &short).unwrap();
        assert!(matches!(
            read_checkpoint(&path),
            Err(FormatError::Truncated { .. })
        ));
    }

    #[test]
    fn grid_csv_roundtrips_bit_exactly() {
        let grid = vec![
            vec![0.1234567890123456, -3.0e-12, 1.0 / 3.0],
            vec![f64::MIN_POSITIVE, 1e300, -0.0],
        ];
        let path = temp_path("grid.csv");
        write_grid_csv(&path, &grid).unwrap();
        let back = read_grid_csv(&path).unwrap();
        assert_eq!(grid.len(), back.len());
        for (a, b) in grid.iter().flatten().zip(back.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
