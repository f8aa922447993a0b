//! On-disk RDM bundles: a `meta.txt` descriptor of `key=value` lines next
//! to raw little-endian `f64` arrays stored row-major.
//!
//! ```text
//! format=rdm-bundle-1
//! n=4
//! n_alpha=2
//! n_beta=2
//! basis_label=site
//! producer=rdmc gen
//! sectors=aaaa,bbbb,abab
//! one_rdm=true
//! integrals=true
//! e_core=0
//! shape.aaaa=6x6
//! ...
//! ```
//!
//! Files: `aaaa.f64`, `bbbb.f64`, `abab.f64`, optional `d_alpha.f64` and
//! `d_beta.f64`, optional `h1.f64` and `eri.f64` (chemists' `(ij|kl)`).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rdm::{IntegralSet, OneRDM, PackedRDM, SpinRDMSet, SpinSector, SystemMeta, Tensor4};

pub const FORMAT: &str = "rdm-bundle-1";

/// Array name and its little-endian bytes.
type ArrayFile = (String, Vec<u8>);
const META_FILE: &str = "meta.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct RdmBundle {
    pub basis_label: String,
    pub producer: String,
    pub rdm: SpinRDMSet,
    pub one_rdm: Option<OneRDM>,
    pub integrals: Option<IntegralSet>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Bundle(msg.into())
}

fn to_bytes(values: impl Iterator<Item = f64>) -> Vec<u8> {
    values.flat_map(f64::to_le_bytes).collect()
}

/// Row-major bytes of a matrix.
fn matrix_bytes(m: &DMatrix<f64>) -> Vec<u8> {
    to_bytes((0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])))
}

fn shape_str(dims: &[usize]) -> String {
    dims.iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x")
}

/// Writes `bytes` next to `path` and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

impl RdmBundle {
    pub fn new(rdm: SpinRDMSet, basis_label: &str, producer: &str) -> Self {
        Self {
            basis_label: basis_label.into(),
            producer: producer.into(),
            rdm,
            one_rdm: None,
            integrals: None,
        }
    }

    pub fn meta(&self) -> SystemMeta {
        self.rdm.meta()
    }

    /// Descriptor text and array files, in write order.
    fn encode(&self) -> Result<(String, Vec<ArrayFile>)> {
        for (k, v) in [
            ("basis_label", &self.basis_label),
            ("producer", &self.producer),
        ] {
            if v.contains('\n') || v.contains('\r') {
                return Err(bad(format!("{k} must be a single line")));
            }
        }
        let meta = self.meta();
        let mut files = Vec::new();
        let mut shapes = Vec::new();
        for s in SpinSector::ALL {
            let m = self.rdm.sector(s).matrix();
            shapes.push((s.label().to_string(), shape_str(&[m.nrows(), m.ncols()])));
            files.push((format!("{}.f64", s.label()), matrix_bytes(m)));
        }
        if let Some(d) = &self.one_rdm {
            if d.n() != meta.n {
                return Err(bad("1-RDM size differs from n"));
            }
            for (name, m) in [("d_alpha", &d.alpha), ("d_beta", &d.beta)] {
                shapes.push((name.into(), shape_str(&[meta.n, meta.n])));
                files.push((format!("{name}.f64"), matrix_bytes(m)));
            }
        }
        let mut e_core = 0.0;
        if let Some(ints) = &self.integrals {
            if ints.n() != meta.n {
                return Err(bad("integrals size differs from n"));
            }
            e_core = ints.e_core;
            shapes.push(("h1".into(), shape_str(&[meta.n, meta.n])));
            files.push(("h1.f64".into(), matrix_bytes(&ints.h1)));
            shapes.push(("eri".into(), shape_str(&[meta.n; 4])));
            files.push(("eri.f64".into(), to_bytes(ints.eri.data.iter().cloned())));
        }
        let mut text = format!(
            "format={FORMAT}\nn={}\nn_alpha={}\nn_beta={}\nbasis_label={}\nproducer={}\nsectors=aaaa,bbbb,abab\none_rdm={}\nintegrals={}\n",
            meta.n,
            meta.n_alpha,
            meta.n_beta,
            self.basis_label,
            self.producer,
            self.one_rdm.is_some(),
            self.integrals.is_some(),
        );
        if self.integrals.is_some() {
            // Rust's shortest round-trip formatting keeps the value bit-exact
            text.push_str(&format!("e_core={e_core:?}\n"));
        }
        for (name, shape) in shapes {
            text.push_str(&format!("shape.{name}={shape}\n"));
        }
        Ok((text, files))
    }

    /// Writes the bundle into `dir`, creating it if needed. Arrays go first
    /// and the descriptor last, each file renamed into place.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let (text, files) = self.encode()?;
        for (name, bytes) in &files {
            write_atomic(&dir.join(name), bytes)?;
        }
        write_atomic(&dir.join(META_FILE), text.as_bytes())
    }

    /// SHA-256 over the descriptor and every array, in write order.
    pub fn digest(&self) -> Result<String> {
        let (text, files) = self.encode()?;
        let mut h = Sha256::new();
        h.update(text.as_bytes());
        for (name, bytes) in files {
            h.update(name.as_bytes());
            h.update(&bytes);
        }
        Ok(hex::encode(h.finalize()))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let text = fs::read_to_string(dir.join(META_FILE))?;
        let kv = parse_descriptor(&text)?;
        let get = |k: &str| {
            kv.get(k)
                .map(String::as_str)
                .ok_or_else(|| bad(format!("missing key {k}")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| bad(format!("{k} is not an integer")))
        };
        let flag = |k: &str| -> Result<bool> {
            match get(k)? {
                "true" => Ok(true),
                "false" => Ok(false),
                v => Err(bad(format!("{k}={v} is not a boolean"))),
            }
        };
        if get("format")? != FORMAT {
            return Err(bad(format!("unknown format {}", get("format")?)));
        }
        let meta = SystemMeta::new(num("n")?, num("n_alpha")?, num("n_beta")?)?;
        let n = meta.n;
        let sectors: Vec<&str> = get("sectors")?.split(',').map(str::trim).collect();
        let read = |name: &str, expect: &[usize]| -> Result<Vec<f64>> {
            let shape = get(&format!("shape.{name}"))?;
            let dims: Vec<usize> = shape
                .split('x')
                .map(|t| t.parse().map_err(|_| bad(format!("bad shape {shape}"))))
                .collect::<Result<_>>()?;
            if dims != expect {
                return Err(bad(format!(
                    "{name} has shape {shape}, expected {}",
                    shape_str(expect)
                )));
            }
            let path: PathBuf = dir.join(format!("{name}.f64"));
            let bytes = fs::read(&path)?;
            let count: usize = dims.iter().product();
            if bytes.len() != 8 * count {
                return Err(bad(format!(
                    "{name}: {} bytes for {count} values",
                    bytes.len()
                )));
            }
            Ok(bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect())
        };
        let matrix = |name: &str, r: usize, c: usize| -> Result<DMatrix<f64>> {
            Ok(DMatrix::from_row_slice(r, c, &read(name, &[r, c])?))
        };
        let mut rdm = SpinRDMSet::zeros(meta);
        for s in SpinSector::ALL {
            if !sectors.contains(&s.label()) {
                return Err(bad(format!("sector {} missing", s.label())));
            }
            let d = s.dim(n);
            rdm.replace(PackedRDM::new(s, meta, matrix(s.label(), d, d)?)?)?;
        }
        let one_rdm = if flag("one_rdm")? {
            Some(OneRDM {
                alpha: matrix("d_alpha", n, n)?,
                beta: matrix("d_beta", n, n)?,
            })
        } else {
            None
        };
        let integrals = if flag("integrals")? {
            let e_core: f64 = get("e_core")?
                .parse()
                .map_err(|_| bad("e_core is not a number"))?;
            let eri = Tensor4::from_vec(n, read("eri", &[n; 4])?)?;
            Some(IntegralSet::new(matrix("h1", n, n)?, eri, e_core)?)
        } else {
            None
        };
        Ok(Self {
            basis_label: get("basis_label")?.to_string(),
            producer: get("producer")?.to_string(),
            rdm,
            one_rdm,
            integrals,
        })
    }
}

fn parse_descriptor(text: &str) -> Result<BTreeMap<String, String>> {
    let mut kv = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("line {}: expected key=value", no + 1)))?;
        if kv.insert(k.trim().to_string(), v.to_string()).is_some() {
            return Err(bad(format!("duplicate key {k}")));
        }
    }
    Ok(kv)
}
