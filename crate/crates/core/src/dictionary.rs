//! Paired high/low-resolution training dictionaries and the `FHD1` file
//! format.
//!
//! `FHD1` layout, all little-endian:
//!
//! ```text
//! magic        4 bytes  "FHD1"
//! version      u32      1
//! m_h m_l n    u32 x3
//! h_h w_h      u32 x2
//! h_l w_l      u32 x2
//! d            u32
//! k_h k_w      u32 x2   psf dims
//! a_r a_c      u32 x2   psf anchor
//! noise_sigma  f64
//! psf          f64 x (k_h*k_w), row-major
//! d_h          f64 x (m_h*n), column after column
//! d_l          f64 x (m_l*n), column after column
//! labels       u32 x n
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::degrade::{self, DegradationParams, Psf};
use crate::error::{Error, Result};
use crate::imagecore::{devectorize, Dims, Image};

pub const MAGIC: [u8; 4] = *b"FHD1";
pub const VERSION: u32 = 1;

/// Column-stacked HR faces `d_h`, their degraded LR counterparts `d_l`, and
/// one subject label per column. Columns of one subject are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryPair {
    d_h: DMatrix<f64>,
    d_l: DMatrix<f64>,
    labels: Vec<u32>,
    hr_dims: Dims,
    lr_dims: Dims,
    degradation: DegradationParams,
}

/// Which plane of a color training image becomes a dictionary column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelSelect {
    /// Channel average (identity for grayscale input).
    #[default]
    Gray,
    Index(usize),
}

impl ChannelSelect {
    pub fn apply(self, image: &Image) -> Result<Image> {
        match self {
            ChannelSelect::Gray => Ok(image.to_gray()),
            ChannelSelect::Index(c) if c < image.channels() => Ok(image.channel(c)),
            ChannelSelect::Index(c) => Err(Error::InvalidParameter(format!(
                "channel {c} requested from a {}-channel image",
                image.channels()
            ))),
        }
    }
}

impl DictionaryPair {
    /// Builds `d_l` from single-channel HR images with noise-free degradation.
    pub fn from_hr_images(
        images: &[Image],
        labels: Vec<u32>,
        degradation: &DegradationParams,
    ) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::Empty("dictionary needs at least one image".into()))?;
        if images.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        check_grouped(&labels)?;
        let hr = first.dims();
        let degradation = degradation.noiseless();
        degradation.validate_for(hr)?;
        let lr = degradation.lr_dims(hr)?;

        let mut d_h = DMatrix::zeros(hr.len(), images.len());
        let mut d_l = DMatrix::zeros(lr.len(), images.len());
        for (j, img) in images.iter().enumerate() {
            img.require_single_channel("dictionary column")?;
            if img.dims() != hr {
                return Err(Error::DimensionMismatch(format!(
                    "dictionary image {j} is {} but the first is {hr}",
                    img.dims()
                )));
            }
            let low = degrade::degrade(img, &degradation, 0)?;
            d_h.set_column(j, &DVector::from_column_slice(img.data()));
            d_l.set_column(j, &DVector::from_column_slice(low.data()));
        }
        Ok(DictionaryPair {
            d_h,
            d_l,
            labels,
            hr_dims: hr,
            lr_dims: lr,
            degradation,
        })
    }

    pub fn d_h(&self) -> &DMatrix<f64> {
        &self.d_h
    }

    pub fn d_l(&self) -> &DMatrix<f64> {
        &self.d_l
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn hr_dims(&self) -> Dims {
        self.hr_dims
    }

    pub fn lr_dims(&self) -> Dims {
        self.lr_dims
    }

    pub fn degradation(&self) -> &DegradationParams {
        &self.degradation
    }

    pub fn n_atoms(&self) -> usize {
        self.labels.len()
    }

    /// Distinct subject ids in column order.
    pub fn classes(&self) -> Vec<u32> {
        let mut out: Vec<u32> = Vec::new();
        for &l in &self.labels {
            if out.last() != Some(&l) {
                out.push(l);
            }
        }
        out
    }

    pub fn hr_atom(&self, j: usize) -> Image {
        devectorize(self.d_h.column(j).as_slice(), self.hr_dims).expect("column sized from dims")
    }

    pub fn lr_atom(&self, j: usize) -> Image {
        devectorize(self.d_l.column(j).as_slice(), self.lr_dims).expect("column sized from dims")
    }

    /// Recomputes every LR column from its HR column and compares bit for bit.
    pub fn verify(&self) -> Result<()> {
        for j in 0..self.n_atoms() {
            let low = degrade::degrade(&self.hr_atom(j), &self.degradation, 0)?;
            if low.data() != self.d_l.column(j).as_slice() {
                return Err(Error::Internal(format!(
                    "dictionary column {j}: stored LR atom does not match its degraded HR atom"
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let psf = &self.degradation.psf;
        let n = self.n_atoms();
        let mut out = Vec::with_capacity(
            64 + 8 * (psf.kernel().len() + self.d_h.len() + self.d_l.len()) + 4 * n,
        );
        out.extend_from_slice(&MAGIC);
        let header = [
            VERSION,
            self.hr_dims.len() as u32,
            self.lr_dims.len() as u32,
            n as u32,
            self.hr_dims.height as u32,
            self.hr_dims.width as u32,
            self.lr_dims.height as u32,
            self.lr_dims.width as u32,
            self.degradation.d as u32,
            psf.dims().height as u32,
            psf.dims().width as u32,
            psf.anchor().0 as u32,
            psf.anchor().1 as u32,
        ];
        for v in header {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.degradation.noise_sigma.to_le_bytes());
        for v in psf.kernel().iter().chain(self.d_h.iter()).chain(self.d_l.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for l in &self.labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rd = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = rd.take(4, "magic")?.try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let version = rd.u32("version")?;
        if version != VERSION {
            return Err(Error::VersionMismatch(version));
        }
        let mut h = [0usize; 12];
        for slot in h.iter_mut() {
            *slot = rd.u32("header")? as usize;
        }
        let [m_h, m_l, n, h_h, w_h, h_l, w_l, d, k_h, k_w, a_r, a_c] = h;
        let hr = Dims::new(h_h, w_h);
        let lr = Dims::new(h_l, w_l);
        if hr.len() != m_h || lr.len() != m_l || d == 0 || m_h != m_l * d * d {
            return Err(Error::DimensionMismatch(format!(
                "inconsistent header: m_h={m_h} ({hr}), m_l={m_l} ({lr}), d={d}"
            )));
        }
        let noise_sigma = rd.f64("noise sigma")?;
        let kernel = rd.f64s(k_h * k_w, "psf")?;
        let psf = Psf::new(kernel, Dims::new(k_h, k_w), (a_r, a_c))?;
        let degradation = DegradationParams::new(psf, d, noise_sigma)?;
        let d_h = DMatrix::from_vec(m_h, n, rd.f64s(m_h * n, "d_h")?);
        let d_l = DMatrix::from_vec(m_l, n, rd.f64s(m_l * n, "d_l")?);
        let labels = (0..n)
            .map(|_| rd.u32("labels"))
            .collect::<Result<Vec<_>>>()?;
        if rd.pos != bytes.len() {
            return Err(Error::parse(
                "FHD1",
                format!("{} trailing bytes", bytes.len() - rd.pos),
            ));
        }
        check_grouped(&labels)?;
        Ok(DictionaryPair {
            d_h,
            d_l,
            labels,
            hr_dims: hr,
            lr_dims: lr,
            degradation,
        })
    }
}

fn check_grouped(labels: &[u32]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    let mut prev = None;
    for &l in labels {
        if prev != Some(l) && !seen.insert(l) {
            return Err(Error::InvalidParameter(format!(
                "columns of subject {l} are not contiguous"
            )));
        }
        prev = Some(l);
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Truncated(format!(
                    "{what}: need {len} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let len = count
            .checked_mul(8)
            .ok_or_else(|| Error::Truncated(format!("{what}: size overflow")))?;
        Ok(self
            .take(len, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

/// Parses `filename<TAB>subject_id` lines. Blank lines and `#` comments are
/// skipped.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<BTreeMap<String, u32>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, &path.display().to_string())
}

pub fn parse_manifest(text: &str, origin: &str) -> Result<BTreeMap<String, u32>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let loc = || format!("{origin}:{}", i + 1);
        let (name, id) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(loc(), "expected filename<TAB>subject_id"))?;
        let id: u32 = id
            .trim()
            .parse()
            .map_err(|_| Error::parse(loc(), format!("subject id {id:?} is not a u32")))?;
        if out.insert(name.to_string(), id).is_some() {
            return Err(Error::parse(loc(), format!("duplicate entry for {name}")));
        }
    }
    Ok(out)
}

pub(crate) fn is_image_file(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref(),
        Some("pgm" | "ppm" | "png" | "pnm")
    )
}

/// Lists image files in `dir` by file name.
pub fn list_images(dir: impl AsRef<Path>) -> Result<Vec<String>> {
    let dir = dir.as_ref();
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_file() && is_image_file(&path) {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                names.push(name.to_string());
            }
        }
    }
    names.sort();
    Ok(names)
}

/// Loads every image in `hr_dir`, orders columns by subject then file name,
/// and derives the LR dictionary with noise-free degradation.
pub fn build_dictionary(
    hr_dir: impl AsRef<Path>,
    manifest: &BTreeMap<String, u32>,
    degradation: &DegradationParams,
    channel: ChannelSelect,
) -> Result<DictionaryPair> {
    let hr_dir = hr_dir.as_ref();
    let names = list_images(hr_dir)?;
    if names.is_empty() {
        return Err(Error::Empty(format!("no images in {}", hr_dir.display())));
    }
    let mut entries = Vec::with_capacity(names.len());
    for name in &names {
        let id = manifest.get(name).ok_or_else(|| {
            Error::parse("manifest", format!("no manifest entry for {name}"))
        })?;
        entries.push((*id, name.clone()));
    }
    let present: HashMap<&str, ()> = names.iter().map(|n| (n.as_str(), ())).collect();
    if let Some(missing) = manifest.keys().find(|k| !present.contains_key(k.as_str())) {
        return Err(Error::parse(
            "manifest",
            format!("{missing} listed but not found in {}", hr_dir.display()),
        ));
    }
    entries.sort();

    let mut images = Vec::with_capacity(entries.len());
    for (_, name) in &entries {
        let img = Image::load(hr_dir.join(name))?;
        images.push(channel.apply(&img)?);
    }
    let labels = entries.iter().map(|(id, _)| *id).collect();
    DictionaryPair::from_hr_images(&images, labels, degradation)
}
