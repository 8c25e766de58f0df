//! NIfTI-1 reading and writing.
//!
//! Supports single-file (`n+1`) and header/image pair (`ni1`) layouts, plain or
//! gzip-compressed, in either byte order. Voxels of type uint8, int16, int32,
//! float32 and float64 are loaded into `f32` after applying `scl_slope` and
//! `scl_inter`. Header extensions are skipped.

use crate::error::{Error, Result, ResultExt};
use crate::geometry::AffineTransform;
use crate::volume::{Geometry, LabelVolume, VolumeImage};
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

pub const HEADER_SIZE: usize = 348;
const NIFTI2_HEADER_SIZE: i32 = 540;
/// Header plus the 4-byte extension flag.
pub const SINGLE_FILE_OFFSET: usize = 352;
pub const MAGIC_SINGLE: [u8; 4] = *b"n+1\0";
pub const MAGIC_PAIR: [u8; 4] = *b"ni1\0";

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Datatype {
    Uint8,
    Int16,
    Int32,
    Float32,
    Float64,
}

impl Datatype {
    pub const ALL: [Datatype; 5] = [
        Datatype::Uint8,
        Datatype::Int16,
        Datatype::Int32,
        Datatype::Float32,
        Datatype::Float64,
    ];

    pub fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => Datatype::Uint8,
            4 => Datatype::Int16,
            8 => Datatype::Int32,
            16 => Datatype::Float32,
            64 => Datatype::Float64,
            other => return Err(Error::UnsupportedDatatype(other)),
        })
    }

    pub fn code(self) -> i16 {
        match self {
            Datatype::Uint8 => 2,
            Datatype::Int16 => 4,
            Datatype::Int32 => 8,
            Datatype::Float32 => 16,
            Datatype::Float64 => 64,
        }
    }

    pub fn bitpix(self) -> i16 {
        (self.byte_size() * 8) as i16
    }

    pub fn byte_size(self) -> usize {
        match self {
            Datatype::Uint8 => 1,
            Datatype::Int16 => 2,
            Datatype::Int32 | Datatype::Float32 => 4,
            Datatype::Float64 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endian {
    Little,
    Big,
}

/// The subset of NIfTI-1 header fields this crate reads and writes.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub sizeof_hdr: i32,
    pub dim: [i16; 8],
    pub datatype: i16,
    pub bitpix: i16,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub xyzt_units: u8,
    pub qform_code: i16,
    pub sform_code: i16,
    pub quatern_b: f32,
    pub quatern_c: f32,
    pub quatern_d: f32,
    pub qoffset_x: f32,
    pub qoffset_y: f32,
    pub qoffset_z: f32,
    pub srow_x: [f32; 4],
    pub srow_y: [f32; 4],
    pub srow_z: [f32; 4],
    pub magic: [u8; 4],
    pub endian: Endian,
}

impl Default for NiftiHeader {
    fn default() -> Self {
        Self {
            sizeof_hdr: HEADER_SIZE as i32,
            dim: [3, 1, 1, 1, 1, 1, 1, 1],
            datatype: Datatype::Float32.code(),
            bitpix: 32,
            pixdim: [1.0; 8],
            vox_offset: SINGLE_FILE_OFFSET as f32,
            scl_slope: 1.0,
            scl_inter: 0.0,
            xyzt_units: 2,
            qform_code: 0,
            sform_code: 0,
            quatern_b: 0.0,
            quatern_c: 0.0,
            quatern_d: 0.0,
            qoffset_x: 0.0,
            qoffset_y: 0.0,
            qoffset_z: 0.0,
            srow_x: [1.0, 0.0, 0.0, 0.0],
            srow_y: [0.0, 1.0, 0.0, 0.0],
            srow_z: [0.0, 0.0, 1.0, 0.0],
            magic: MAGIC_SINGLE,
            endian: Endian::Little,
        }
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    endian: Endian,
}

impl Cursor<'_> {
    fn bytes<const N: usize>(&self, at: usize) -> [u8; N] {
        self.buf[at..at + N].try_into().unwrap()
    }
    fn i16(&self, at: usize) -> i16 {
        match self.endian {
            Endian::Little => i16::from_le_bytes(self.bytes(at)),
            Endian::Big => i16::from_be_bytes(self.bytes(at)),
        }
    }
    fn i32(&self, at: usize) -> i32 {
        match self.endian {
            Endian::Little => i32::from_le_bytes(self.bytes(at)),
            Endian::Big => i32::from_be_bytes(self.bytes(at)),
        }
    }
    fn f32(&self, at: usize) -> f32 {
        match self.endian {
            Endian::Little => f32::from_le_bytes(self.bytes(at)),
            Endian::Big => f32::from_be_bytes(self.bytes(at)),
        }
    }
    fn f32s<const N: usize>(&self, at: usize) -> [f32; N] {
        std::array::from_fn(|i| self.f32(at + 4 * i))
    }
}

impl NiftiHeader {
    /// Parse the first 348 bytes, detecting byte order from `sizeof_hdr`.
    pub fn parse(buf: &[u8]) -> Result<Self> {
        if buf.len() < HEADER_SIZE {
            return Err(Error::TruncatedData {
                expected: HEADER_SIZE,
                actual: buf.len(),
            });
        }
        let raw: [u8; 4] = buf[0..4].try_into().unwrap();
        let endian = match (i32::from_le_bytes(raw), i32::from_be_bytes(raw)) {
            (348, _) => Endian::Little,
            (_, 348) => Endian::Big,
            (NIFTI2_HEADER_SIZE, _) | (_, NIFTI2_HEADER_SIZE) => return Err(Error::Nifti2Unsupported),
            (le, _) => return Err(Error::InvalidHeader(format!("sizeof_hdr = {le}"))),
        };
        let c = Cursor { buf, endian };
        let magic: [u8; 4] = c.bytes(344);
        if magic != MAGIC_SINGLE && magic != MAGIC_PAIR {
            return Err(Error::BadMagic(magic));
        }
        let hdr = Self {
            sizeof_hdr: c.i32(0),
            dim: std::array::from_fn(|i| c.i16(40 + 2 * i)),
            datatype: c.i16(70),
            bitpix: c.i16(72),
            pixdim: c.f32s(76),
            vox_offset: c.f32(108),
            scl_slope: c.f32(112),
            scl_inter: c.f32(116),
            xyzt_units: buf[123],
            qform_code: c.i16(252),
            sform_code: c.i16(254),
            quatern_b: c.f32(256),
            quatern_c: c.f32(260),
            quatern_d: c.f32(264),
            qoffset_x: c.f32(268),
            qoffset_y: c.f32(272),
            qoffset_z: c.f32(276),
            srow_x: c.f32s(280),
            srow_y: c.f32s(296),
            srow_z: c.f32s(312),
            magic,
            endian,
        };
        hdr.validate()?;
        Ok(hdr)
    }

    fn validate(&self) -> Result<()> {
        let ndim = self.dim[0];
        if !(1..=7).contains(&ndim) {
            return Err(Error::InvalidHeader(format!("dim[0] = {ndim}")));
        }
        let dt = Datatype::from_code(self.datatype)?;
        if self.bitpix != dt.bitpix() {
            return Err(Error::InvalidHeader(format!(
                "bitpix {} inconsistent with datatype {}",
                self.bitpix, self.datatype
            )));
        }
        for i in 1..=ndim as usize {
            if self.dim[i] < 1 {
                return Err(Error::InvalidHeader(format!("dim[{i}] = {}", self.dim[i])));
            }
        }
        if self.extra_volumes() != 1 {
            return Err(Error::InvalidHeader("only single 3D volumes are supported".into()));
        }
        Ok(())
    }

    pub fn data_type(&self) -> Result<Datatype> {
        Datatype::from_code(self.datatype)
    }

    pub fn dims3(&self) -> [usize; 3] {
        let n = self.dim[0] as usize;
        std::array::from_fn(|i| if i < n { self.dim[i + 1] as usize } else { 1 })
    }

    fn extra_volumes(&self) -> usize {
        let n = self.dim[0] as usize;
        (4..=n).map(|i| self.dim[i].max(1) as usize).product()
    }

    pub fn voxel_count(&self) -> usize {
        self.dims3().iter().product()
    }

    pub fn spacing(&self) -> [f64; 3] {
        std::array::from_fn(|i| self.pixdim[i + 1].abs() as f64)
    }

    /// Voxel-to-world transform: sform if set, else qform, else `diag(pixdim)`.
    pub fn affine(&self) -> AffineTransform<f64> {
        if self.sform_code > 0 {
            let r = |row: [f32; 4]| row.map(|v| v as f64);
            return AffineTransform::from_rows([
                r(self.srow_x),
                r(self.srow_y),
                r(self.srow_z),
                [0.0, 0.0, 0.0, 1.0],
            ])
            .unwrap_or_else(|_| AffineTransform::identity());
        }
        if self.qform_code > 0 {
            return self.qform_affine();
        }
        AffineTransform::from_scale_translation(self.spacing(), [0.0; 3])
    }

    fn qform_affine(&self) -> AffineTransform<f64> {
        let (b, c, d) = (
            self.quatern_b as f64,
            self.quatern_c as f64,
            self.quatern_d as f64,
        );
        let a2 = 1.0 - (b * b + c * c + d * d);
        let (a, b, c, d) = if a2 < 1e-7 {
            let n = (b * b + c * c + d * d).sqrt();
            (0.0, b / n, c / n, d / n)
        } else {
            (a2.sqrt(), b, c, d)
        };
        let [dx, dy, dz] = self.spacing();
        let qfac = if self.pixdim[0] < 0.0 { -1.0 } else { 1.0 };
        let dz = dz * qfac;
        let rows = [
            [
                (a * a + b * b - c * c - d * d) * dx,
                2.0 * (b * c - a * d) * dy,
                2.0 * (b * d + a * c) * dz,
                self.qoffset_x as f64,
            ],
            [
                2.0 * (b * c + a * d) * dx,
                (a * a + c * c - b * b - d * d) * dy,
                2.0 * (c * d - a * b) * dz,
                self.qoffset_y as f64,
            ],
            [
                2.0 * (b * d - a * c) * dx,
                2.0 * (c * d + a * b) * dy,
                (a * a + d * d - c * c - b * b) * dz,
                self.qoffset_z as f64,
            ],
            [0.0, 0.0, 0.0, 1.0],
        ];
        AffineTransform::from_rows(rows).unwrap_or_else(|_| AffineTransform::identity())
    }

    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::new(self.dims3(), self.spacing(), self.affine())
    }

    /// Serialise to 348 bytes in this header's byte order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = vec![0u8; HEADER_SIZE];
        let e = self.endian;
        let put = |buf: &mut Vec<u8>, at: usize, bytes: &[u8]| buf[at..at + bytes.len()].copy_from_slice(bytes);
        let i16b = |v: i16| match e {
            Endian::Little => v.to_le_bytes(),
            Endian::Big => v.to_be_bytes(),
        };
        let i32b = |v: i32| match e {
            Endian::Little => v.to_le_bytes(),
            Endian::Big => v.to_be_bytes(),
        };
        let f32b = |v: f32| match e {
            Endian::Little => v.to_le_bytes(),
            Endian::Big => v.to_be_bytes(),
        };
        put(&mut buf, 0, &i32b(self.sizeof_hdr));
        buf[38] = b'r';
        for (i, &d) in self.dim.iter().enumerate() {
            put(&mut buf, 40 + 2 * i, &i16b(d));
        }
        put(&mut buf, 70, &i16b(self.datatype));
        put(&mut buf, 72, &i16b(self.bitpix));
        for (i, &p) in self.pixdim.iter().enumerate() {
            put(&mut buf, 76 + 4 * i, &f32b(p));
        }
        put(&mut buf, 108, &f32b(self.vox_offset));
        put(&mut buf, 112, &f32b(self.scl_slope));
        put(&mut buf, 116, &f32b(self.scl_inter));
        buf[123] = self.xyzt_units;
        put(&mut buf, 252, &i16b(self.qform_code));
        put(&mut buf, 254, &i16b(self.sform_code));
        for (i, v) in [
            self.quatern_b,
            self.quatern_c,
            self.quatern_d,
            self.qoffset_x,
            self.qoffset_y,
            self.qoffset_z,
        ]
        .into_iter()
        .enumerate()
        {
            put(&mut buf, 256 + 4 * i, &f32b(v));
        }
        for (row, at) in [(self.srow_x, 280), (self.srow_y, 296), (self.srow_z, 312)] {
            for (i, &v) in row.iter().enumerate() {
                put(&mut buf, at + 4 * i, &f32b(v));
            }
        }
        put(&mut buf, 344, &self.magic);
        buf
    }

    /// Header describing `geometry` with sform taken from its affine.
    pub fn for_geometry(geometry: &Geometry, datatype: Datatype) -> Self {
        let mut hdr = NiftiHeader::default();
        hdr.dim[0] = 3;
        for i in 0..3 {
            hdr.dim[i + 1] = geometry.dims[i] as i16;
            hdr.pixdim[i + 1] = geometry.spacing[i] as f32;
        }
        hdr.pixdim[0] = 1.0;
        hdr.datatype = datatype.code();
        hdr.bitpix = datatype.bitpix();
        hdr.sform_code = 1;
        let rows = geometry.affine.rows();
        let row = |r: [f64; 4]| r.map(|v| v as f32);
        hdr.srow_x = row(rows[0]);
        hdr.srow_y = row(rows[1]);
        hdr.srow_z = row(rows[2]);
        hdr
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReadOptions {
    /// Fail on NaN/inf voxels instead of replacing them with 0.
    pub strict: bool,
}

/// A parsed image with its header and load-time QC notes.
#[derive(Debug, Clone)]
pub struct NiftiImage {
    pub header: NiftiHeader,
    pub image: VolumeImage,
    /// Non-finite voxels replaced by 0 (non-strict mode only).
    pub non_finite_replaced: usize,
}

fn maybe_gunzip(bytes: &[u8]) -> Result<std::borrow::Cow<'_, [u8]>> {
    if bytes.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::with_capacity(bytes.len() * 4);
        MultiGzDecoder::new(bytes).read_to_end(&mut out)?;
        Ok(out.into())
    } else {
        Ok(bytes.into())
    }
}

/// Scaled voxel values in storage order.
fn decode_values(header: &NiftiHeader, data: &[u8]) -> Result<Vec<f64>> {
    let dt = header.data_type()?;
    let n = header.voxel_count();
    let expected = n * dt.byte_size();
    if data.len() < expected {
        return Err(Error::TruncatedData {
            expected,
            actual: data.len(),
        });
    }
    let data = &data[..expected];
    let le = header.endian == Endian::Little;
    macro_rules! dec {
        ($t:ty, $n:expr) => {
            data.chunks_exact($n)
                .map(|c| {
                    let b: [u8; $n] = c.try_into().unwrap();
                    (if le { <$t>::from_le_bytes(b) } else { <$t>::from_be_bytes(b) }) as f64
                })
                .collect::<Vec<f64>>()
        };
    }
    let mut values = match dt {
        Datatype::Uint8 => data.iter().map(|&b| b as f64).collect(),
        Datatype::Int16 => dec!(i16, 2),
        Datatype::Int32 => dec!(i32, 4),
        Datatype::Float32 => dec!(f32, 4),
        Datatype::Float64 => dec!(f64, 8),
    };
    let slope = header.scl_slope as f64;
    let inter = header.scl_inter as f64;
    if slope != 0.0 && slope.is_finite() && inter.is_finite() {
        for v in &mut values {
            *v = slope * *v + inter;
        }
    }
    Ok(values)
}

fn split_single(bytes: &[u8]) -> Result<(NiftiHeader, &[u8])> {
    let header = NiftiHeader::parse(bytes)?;
    if header.magic != MAGIC_SINGLE {
        return Err(Error::InvalidHeader(
            "header/image pair: image data lives in a separate .img file".into(),
        ));
    }
    let offset = header.vox_offset.max(HEADER_SIZE as f32) as usize;
    if offset > bytes.len() {
        return Err(Error::TruncatedData {
            expected: offset,
            actual: bytes.len(),
        });
    }
    Ok((header, &bytes[offset..]))
}

fn build_image(header: NiftiHeader, data: &[u8], opts: ReadOptions) -> Result<NiftiImage> {
    let geometry = header.geometry()?;
    let values = decode_values(&header, data)?;
    let bad = values.iter().filter(|v| !(**v as f32).is_finite()).count();
    if bad > 0 && opts.strict {
        return Err(Error::NonFiniteVoxels { count: bad });
    }
    let data = values
        .into_iter()
        .map(|v| {
            let v = v as f32;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        })
        .collect();
    Ok(NiftiImage {
        header,
        image: VolumeImage::new(geometry, data)?,
        non_finite_replaced: bad,
    })
}

fn build_labels(header: NiftiHeader, data: &[u8]) -> Result<LabelVolume> {
    let geometry = header.geometry()?;
    let labels = decode_values(&header, data)?
        .into_iter()
        .map(|v| {
            if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(Error::NonIntegerLabel(v))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    LabelVolume::new(geometry, labels)
}

/// Parse a single-file NIfTI-1 stream (gzip auto-detected) as an intensity image.
pub fn parse_nifti(bytes: &[u8], opts: ReadOptions) -> Result<NiftiImage> {
    let bytes = maybe_gunzip(bytes)?;
    let (header, data) = split_single(&bytes)?;
    build_image(header, data, opts)
}

/// Parse a single-file NIfTI-1 stream as a label volume.
pub fn parse_labels(bytes: &[u8]) -> Result<LabelVolume> {
    let bytes = maybe_gunzip(bytes)?;
    let (header, data) = split_single(&bytes)?;
    build_labels(header, data)
}

/// Parse an `ni1` header/image pair.
pub fn parse_nifti_pair(hdr: &[u8], img: &[u8], opts: ReadOptions) -> Result<NiftiImage> {
    let hdr = maybe_gunzip(hdr)?;
    let img = maybe_gunzip(img)?;
    let header = NiftiHeader::parse(&hdr)?;
    let offset = header.vox_offset.max(0.0) as usize;
    if offset > img.len() {
        return Err(Error::TruncatedData {
            expected: offset,
            actual: img.len(),
        });
    }
    build_image(header, &img[offset..], opts)
}

/// Controls how voxel values are stored on disk.
#[derive(Debug, Clone, Copy)]
pub struct EncodeOptions {
    pub datatype: Datatype,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub endian: Endian,
    pub gzip: bool,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        Self {
            datatype: Datatype::Float32,
            scl_slope: 1.0,
            scl_inter: 0.0,
            endian: Endian::Little,
            gzip: false,
        }
    }
}

/// Encode raw (pre-scaling) values as a single-file NIfTI-1 stream. Values are
/// cast to the target datatype with Rust `as` semantics.
pub fn encode_raw(geometry: &Geometry, raw: &[f64], opts: EncodeOptions) -> Result<Vec<u8>> {
    if raw.len() != geometry.len() {
        return Err(Error::InvalidHeader(format!(
            "{} values for dims {:?}",
            raw.len(),
            geometry.dims
        )));
    }
    let mut header = NiftiHeader::for_geometry(geometry, opts.datatype);
    header.scl_slope = opts.scl_slope;
    header.scl_inter = opts.scl_inter;
    header.endian = opts.endian;

    let mut out = header.to_bytes();
    out.extend_from_slice(&[0u8; SINGLE_FILE_OFFSET - HEADER_SIZE]);
    out.reserve(raw.len() * opts.datatype.byte_size());
    let le = opts.endian == Endian::Little;
    macro_rules! enc {
        ($t:ty) => {
            for &v in raw {
                let v = v as $t;
                out.extend_from_slice(&if le { v.to_le_bytes() } else { v.to_be_bytes() });
            }
        };
    }
    match opts.datatype {
        Datatype::Uint8 => out.extend(raw.iter().map(|&v| v as u8)),
        Datatype::Int16 => enc!(i16),
        Datatype::Int32 => enc!(i32),
        Datatype::Float32 => enc!(f32),
        Datatype::Float64 => enc!(f64),
    }
    if opts.gzip {
        let mut enc = GzEncoder::new(Vec::with_capacity(out.len() / 4), Compression::fast());
        enc.write_all(&out)?;
        out = enc.finish()?;
    }
    Ok(out)
}

/// Write an intensity image as float32 `n+1`, sform from the affine.
pub fn write_nifti(vol: &VolumeImage, gzip: bool) -> Result<Vec<u8>> {
    let raw: Vec<f64> = vol.data().iter().map(|&v| v as f64).collect();
    encode_raw(
        vol.geometry(),
        &raw,
        EncodeOptions {
            gzip,
            ..Default::default()
        },
    )
}

/// Smallest of uint8 / int16 / int32 that holds every label.
pub fn label_datatype(labels: &LabelVolume) -> Datatype {
    match labels.max_label() {
        0..=255 => Datatype::Uint8,
        256..=32767 => Datatype::Int16,
        _ => Datatype::Int32,
    }
}

pub fn write_labels(labels: &LabelVolume, gzip: bool) -> Result<Vec<u8>> {
    if labels.max_label() > i32::MAX as u32 {
        return Err(Error::InvalidHeader("label exceeds int32 range".into()));
    }
    let raw: Vec<f64> = labels.data().iter().map(|&v| v as f64).collect();
    encode_raw(
        labels.geometry(),
        &raw,
        EncodeOptions {
            datatype: label_datatype(labels),
            gzip,
            ..Default::default()
        },
    )
}

fn is_gz_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

fn pair_image_path(path: &Path) -> Option<PathBuf> {
    let name = path.file_name()?.to_str()?;
    let img = if let Some(stem) = name.strip_suffix(".hdr.gz") {
        format!("{stem}.img.gz")
    } else {
        format!("{}.img", name.strip_suffix(".hdr")?)
    };
    Some(path.with_file_name(img))
}

/// Read `.nii`, `.nii.gz`, or `.hdr`(+`.img`) from disk.
pub fn read_image(path: &Path, opts: ReadOptions) -> Result<NiftiImage> {
    let bytes = std::fs::read(path).in_file(path)?;
    match pair_image_path(path) {
        Some(img_path) => {
            let img = std::fs::read(&img_path).in_file(&img_path)?;
            parse_nifti_pair(&bytes, &img, opts).in_file(path)
        }
        None => parse_nifti(&bytes, opts).in_file(path),
    }
}

pub fn read_labels(path: &Path) -> Result<LabelVolume> {
    let bytes = std::fs::read(path).in_file(path)?;
    match pair_image_path(path) {
        Some(img_path) => {
            let img = std::fs::read(&img_path).in_file(&img_path)?;
            let parsed = parse_nifti_pair(&bytes, &img, ReadOptions { strict: true }).in_file(path)?;
            LabelVolume::from_image(parsed.image).in_file(path)
        }
        None => parse_labels(&bytes).in_file(path),
    }
}

/// Write an image; gzip is chosen from the `.gz` extension.
pub fn write_image_file(path: &Path, vol: &VolumeImage) -> Result<()> {
    let bytes = write_nifti(vol, is_gz_path(path))?;
    std::fs::write(path, bytes).in_file(path)
}

pub fn write_labels_file(path: &Path, labels: &LabelVolume) -> Result<()> {
    let bytes = write_labels(labels, is_gz_path(path))?;
    std::fs::write(path, bytes).in_file(path)
}
