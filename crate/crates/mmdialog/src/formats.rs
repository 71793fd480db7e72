//! On-disk formats: JSON-lines catalogs and sessions, JSON configs, and
//! little-endian binary files for features and trained weights.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use mmdialog_core::agent::{AgentHyper, AgentParams};
use mmdialog_core::catalog::{Catalog, EncodedProduct, Product, Standardizer, ViewScaler, Vocabulary};
use mmdialog_core::corrnet::{CorrNetModel, CorrNetParams};
use mmdialog_core::numerics::DenseMatrix;
use mmdialog_core::simulator::{DialogSession, FsaConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

pub const FEATURES_MAGIC: &[u8; 7] = b"MMDENC1";
pub const CORRNET_MAGIC: &[u8; 8] = b"MMDCORR1";
pub const AGENT_MAGIC: &[u8; 8] = b"MMDAGNT1";

fn create(path: &Path) -> AppResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| AppError::io(path, e))
}

fn open(path: &Path) -> AppResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| AppError::io(path, e))
}

/// `path` with `suffix` appended to the full file name.
pub fn sidecar_path(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> AppResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| AppError::format(path, e.to_string()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| AppError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> AppResult<T> {
    serde_json::from_reader(open(path)?).map_err(|e| AppError::Parse {
        path: path.into(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> AppResult<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, &item).map_err(|e| AppError::format(path, e.to_string()))?;
        w.write_all(b"\n").map_err(|e| AppError::io(path, e))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> AppResult<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| AppError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| AppError::Parse {
            path: path.into(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, item));
    }
    Ok(out)
}

/// What is needed besides the product lines to rebuild a catalog and its
/// encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogMeta {
    pub vocabulary: Vocabulary,
    /// Seed of the per-product image noise.
    pub catalog_seed: u64,
    pub image_noise: f64,
}

pub fn catalog_meta_path(catalog: &Path) -> PathBuf {
    sidecar_path(catalog, ".meta.json")
}

/// Writes one product per line.
pub fn save_catalog(path: &Path, catalog: &Catalog) -> AppResult<()> {
    write_jsonl(path, catalog.products())
}

/// Reads a JSON-lines catalog, validating every product against `vocab`.
pub fn load_catalog(path: &Path, vocab: &Vocabulary) -> AppResult<Catalog> {
    let lines: Vec<(usize, Product)> = read_jsonl(path)?;
    if lines.is_empty() {
        log::warn!("{}: empty catalog", path.display());
    }
    let mut products = Vec::with_capacity(lines.len());
    for (line, p) in lines {
        p.validate(vocab).map_err(|e| AppError::Parse {
            path: path.into(),
            line,
            message: e.to_string(),
        })?;
        products.push(p);
    }
    Catalog::new(products, vocab).map_err(|e| AppError::format(path, e.to_string()))
}

/// Catalog plus its sidecar metadata.
pub fn save_catalog_bundle(path: &Path, catalog: &Catalog, meta: &CatalogMeta) -> AppResult<()> {
    save_catalog(path, catalog)?;
    write_json(&catalog_meta_path(path), meta)
}

pub fn load_catalog_bundle(path: &Path) -> AppResult<(Catalog, CatalogMeta)> {
    let meta: CatalogMeta = read_json(&catalog_meta_path(path))?;
    let catalog = load_catalog(path, &meta.vocabulary)?;
    Ok((catalog, meta))
}

pub fn save_sessions(path: &Path, sessions: &[DialogSession]) -> AppResult<()> {
    write_jsonl(path, sessions)
}

pub fn load_sessions(path: &Path) -> AppResult<Vec<DialogSession>> {
    Ok(read_jsonl(path)?.into_iter().map(|(_, s)| s).collect())
}

pub fn load_fsa_config(path: &Path) -> AppResult<FsaConfig> {
    let cfg: FsaConfig = read_json(path)?;
    cfg.validate().map_err(|e| AppError::format(path, e.to_string()))?;
    Ok(cfg)
}

struct BinWriter<W: Write> {
    inner: W,
}

impl<W: Write> BinWriter<W> {
    fn bytes(&mut self, b: &[u8]) -> std::io::Result<()> {
        self.inner.write_all(b)
    }

    fn u32(&mut self, v: usize) -> std::io::Result<()> {
        let v = u32::try_from(v).map_err(|_| std::io::Error::other("length exceeds u32"))?;
        self.bytes(&v.to_le_bytes())
    }

    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    fn f64(&mut self, v: f64) -> std::io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    fn floats(&mut self, vs: &[f64]) -> std::io::Result<()> {
        for &v in vs {
            self.f64(v)?;
        }
        Ok(())
    }

    fn vector(&mut self, vs: &[f64]) -> std::io::Result<()> {
        self.u32(vs.len())?;
        self.floats(vs)
    }

    fn matrix(&mut self, m: &DenseMatrix) -> std::io::Result<()> {
        self.u32(m.rows())?;
        self.u32(m.cols())?;
        self.floats(m.as_slice())
    }

    fn string(&mut self, s: &str) -> std::io::Result<()> {
        self.u32(s.len())?;
        self.bytes(s.as_bytes())
    }
}

/// Upper bound on any single length field, to fail fast on corrupt files.
const MAX_LEN: usize = 1 << 28;

struct BinReader<'p, R: Read> {
    inner: R,
    path: &'p Path,
}

impl<R: Read> BinReader<'_, R> {
    fn err(&self, msg: impl Into<String>) -> AppError {
        AppError::format(self.path, msg)
    }

    fn exact<const N: usize>(&mut self) -> AppResult<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| self.err("unexpected end of file"))?;
        Ok(buf)
    }

    fn magic(&mut self, magic: &[u8]) -> AppResult<()> {
        let mut buf = vec![0u8; magic.len()];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| self.err("file too short for header"))?;
        if buf != magic {
            return Err(self.err(format!(
                "bad header, expected {}",
                String::from_utf8_lossy(magic)
            )));
        }
        Ok(())
    }

    fn u32(&mut self) -> AppResult<usize> {
        let v = u32::from_le_bytes(self.exact()?) as usize;
        if v > MAX_LEN {
            return Err(self.err(format!("length field {v} is implausibly large")));
        }
        Ok(v)
    }

    fn u64(&mut self) -> AppResult<u64> {
        Ok(u64::from_le_bytes(self.exact()?))
    }

    fn f64(&mut self) -> AppResult<f64> {
        Ok(f64::from_le_bytes(self.exact()?))
    }

    fn floats(&mut self, n: usize) -> AppResult<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn vector(&mut self) -> AppResult<Vec<f64>> {
        let n = self.u32()?;
        self.floats(n)
    }

    fn matrix(&mut self) -> AppResult<DenseMatrix> {
        let rows = self.u32()?;
        let cols = self.u32()?;
        if rows.checked_mul(cols).is_none_or(|n| n > MAX_LEN) {
            return Err(self.err("matrix too large"));
        }
        let data = self.floats(rows * cols)?;
        DenseMatrix::from_vec(rows, cols, data).map_err(|e| self.err(e.to_string()))
    }

    fn string(&mut self) -> AppResult<String> {
        let n = self.u32()?;
        let mut buf = vec![0u8; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| self.err("unexpected end of file"))?;
        String::from_utf8(buf).map_err(|_| self.err("invalid UTF-8 in string"))
    }

    fn finish(mut self) -> AppResult<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe) {
            Ok(0) => Ok(()),
            Ok(_) => Err(self.err("trailing bytes after payload")),
            Err(e) => Err(AppError::io(self.path, e)),
        }
    }
}

/// Header, product count and view sizes, then per product a length-prefixed
/// id followed by the image and text vectors.
pub fn save_features(path: &Path, encoded: &[EncodedProduct]) -> AppResult<()> {
    let (dx, dy) = encoded
        .first()
        .map(|e| (e.image.len(), e.text.len()))
        .unwrap_or((0, 0));
    let mut w = BinWriter { inner: create(path)? };
    let res = (|| {
        w.bytes(FEATURES_MAGIC)?;
        w.u32(encoded.len())?;
        w.u32(dx)?;
        w.u32(dy)?;
        for e in encoded {
            if e.image.len() != dx || e.text.len() != dy {
                return Err(std::io::Error::other(format!("{} has inconsistent dimensions", e.id)));
            }
            w.string(&e.id)?;
            w.floats(&e.image)?;
            w.floats(&e.text)?;
        }
        w.inner.flush()
    })();
    res.map_err(|e| AppError::io(path, e))
}

pub fn load_features(path: &Path) -> AppResult<Vec<EncodedProduct>> {
    let mut r = BinReader { inner: open(path)?, path };
    r.magic(FEATURES_MAGIC)?;
    let n = r.u32()?;
    let dx = r.u32()?;
    let dy = r.u32()?;
    let mut out = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let id = r.string()?;
        let image = r.floats(dx)?;
        let text = r.floats(dy)?;
        out.push(EncodedProduct { id, image, text });
    }
    r.finish()?;
    Ok(out)
}

/// Header, `k`, the six weight blocks, then the four standardiser vectors.
pub fn save_corrnet(path: &Path, model: &CorrNetModel) -> AppResult<()> {
    let p = &model.params;
    let mut w = BinWriter { inner: create(path)? };
    let res = (|| {
        w.bytes(CORRNET_MAGIC)?;
        w.u32(p.k())?;
        w.matrix(&p.w)?;
        w.matrix(&p.v)?;
        w.vector(&p.b)?;
        w.matrix(&p.w_dec)?;
        w.matrix(&p.v_dec)?;
        w.vector(&p.b_dec)?;
        for s in [&model.scaler.image, &model.scaler.text] {
            w.vector(s.mean())?;
            w.vector(s.inv_std())?;
        }
        w.inner.flush()
    })();
    res.map_err(|e| AppError::io(path, e))
}

pub fn load_corrnet(path: &Path) -> AppResult<CorrNetModel> {
    let mut r = BinReader { inner: open(path)?, path };
    r.magic(CORRNET_MAGIC)?;
    let k = r.u32()?;
    let params = CorrNetParams {
        w: r.matrix()?,
        v: r.matrix()?,
        b: r.vector()?,
        w_dec: r.matrix()?,
        v_dec: r.matrix()?,
        b_dec: r.vector()?,
    };
    let mut scalers = Vec::with_capacity(2);
    for _ in 0..2 {
        let mean = r.vector()?;
        let inv = r.vector()?;
        scalers.push(Standardizer::from_parts(mean, inv).map_err(|e| r.err(e.to_string()))?);
    }
    r.finish()?;
    if params.k() != k {
        return Err(AppError::format(path, format!("header says k = {k}, weights have {}", params.k())));
    }
    params.validate().map_err(|e| AppError::format(path, e.to_string()))?;
    let text = scalers.pop().expect("two scalers");
    let image = scalers.pop().expect("two scalers");
    if image.dim() != params.image_dim() || text.dim() != params.text_dim() {
        return Err(AppError::format(path, "standardiser sizes do not match the weights"));
    }
    Ok(CorrNetModel {
        params,
        scaler: ViewScaler { image, text },
    })
}

/// Header, the hyper-parameter block, `k`, then per component the mean map,
/// mean bias and covariance factor, then the gate.
pub fn save_agent(path: &Path, params: &AgentParams, hyper: &AgentHyper) -> AppResult<()> {
    let mut w = BinWriter { inner: create(path)? };
    let res = (|| {
        w.bytes(AGENT_MAGIC)?;
        w.u32(hyper.n_gaussians)?;
        w.f64(hyper.tau)?;
        w.f64(hyper.learning_rate)?;
        w.u32(hyper.window)?;
        w.u32(hyper.n_display)?;
        w.u32(hyper.batch_size)?;
        w.u32(hyper.epochs)?;
        w.u64(hyper.seed)?;
        w.u32(params.k())?;
        for i in 0..params.n_gaussians() {
            w.matrix(&params.w_mu[i])?;
            w.vector(&params.b_mu[i])?;
            w.matrix(&params.l[i])?;
        }
        w.matrix(&params.w_g)?;
        w.vector(&params.b_g)?;
        w.inner.flush()
    })();
    res.map_err(|e| AppError::io(path, e))
}

pub fn load_agent(path: &Path) -> AppResult<(AgentParams, AgentHyper)> {
    let mut r = BinReader { inner: open(path)?, path };
    r.magic(AGENT_MAGIC)?;
    let hyper = AgentHyper {
        n_gaussians: r.u32()?,
        tau: r.f64()?,
        learning_rate: r.f64()?,
        window: r.u32()?,
        n_display: r.u32()?,
        batch_size: r.u32()?,
        epochs: r.u32()?,
        seed: r.u64()?,
    };
    hyper.validate().map_err(|e| r.err(e.to_string()))?;
    let k = r.u32()?;
    let mut params = AgentParams::zeros(0, k);
    for _ in 0..hyper.n_gaussians {
        params.w_mu.push(r.matrix()?);
        params.b_mu.push(r.vector()?);
        params.l.push(r.matrix()?);
    }
    params.w_g = r.matrix()?;
    params.b_g = r.vector()?;
    r.finish()?;
    params.validate().map_err(|e| AppError::format(path, e.to_string()))?;
    if params.k() != k {
        return Err(AppError::format(path, "gate width does not match k"));
    }
    Ok((params, hyper))
}
