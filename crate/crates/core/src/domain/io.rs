//! Little-endian binary field format.
//!
//! Layout: magic `CGOF`, `u16` version, `u8` kind, three `u32` dims, six `f64`
//! bounds (lower then upper), then interleaved `(re, im)` `f64` samples with x
//! varying fastest. Multi-component fields are stored component-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::field::{ScalarField, TwoFormField, VectorField};
use super::grid::DomainSpec;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CGOF";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FieldKind {
    Scalar = 0,
    Vector = 1,
    TwoForm = 2,
    DtN = 3,
}

impl FieldKind {
    fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Self::Scalar),
            1 => Ok(Self::Vector),
            2 => Ok(Self::TwoForm),
            3 => Ok(Self::DtN),
            other => Err(Error::Format(format!("unknown field kind {other}"))),
        }
    }
}

/// Any field that can be stored in the format.
#[derive(Debug, Clone)]
pub enum Field {
    Scalar(ScalarField),
    Vector(VectorField),
    TwoForm(TwoFormField),
}

impl From<ScalarField> for Field {
    fn from(f: ScalarField) -> Self {
        Field::Scalar(f)
    }
}

impl From<VectorField> for Field {
    fn from(f: VectorField) -> Self {
        Field::Vector(f)
    }
}

impl From<TwoFormField> for Field {
    fn from(f: TwoFormField) -> Self {
        Field::TwoForm(f)
    }
}

impl Field {
    pub fn domain(&self) -> &DomainSpec {
        match self {
            Field::Scalar(f) => f.domain(),
            Field::Vector(f) => f.domain(),
            Field::TwoForm(f) => f.domain(),
        }
    }

    pub fn kind(&self) -> FieldKind {
        match self {
            Field::Scalar(_) => FieldKind::Scalar,
            Field::Vector(_) => FieldKind::Vector,
            Field::TwoForm(_) => FieldKind::TwoForm,
        }
    }

    pub fn into_scalar(self) -> Result<ScalarField> {
        match self {
            Field::Scalar(f) => Ok(f),
            other => Err(Error::Format(format!("expected scalar field, found {:?}", other.kind()))),
        }
    }

    pub fn into_vector(self) -> Result<VectorField> {
        match self {
            Field::Vector(f) => Ok(f),
            other => Err(Error::Format(format!("expected vector field, found {:?}", other.kind()))),
        }
    }

    pub fn into_two_form(self) -> Result<TwoFormField> {
        match self {
            Field::TwoForm(f) => Ok(f),
            other => Err(Error::Format(format!(
                "expected two-form field, found {:?}",
                other.kind()
            ))),
        }
    }

    fn chunks(&self) -> Vec<&[Complex64]> {
        match self {
            Field::Scalar(f) => vec![f.values()],
            Field::Vector(f) => f.comps().iter().map(|c| c.as_slice()).collect(),
            Field::TwoForm(f) => f.comps().iter().map(|c| c.as_slice()).collect(),
        }
    }
}

pub(crate) fn write_header(w: &mut impl Write, kind: FieldKind, domain: &DomainSpec) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&[kind as u8])?;
    for n in domain.dims() {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    for b in domain.lower().into_iter().chain(domain.upper()) {
        w.write_all(&b.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_header(r: &mut impl Read) -> Result<(FieldKind, DomainSpec)> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = u16::from_le_bytes(read_array(r)?);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let [kind] = read_array::<1>(r)?;
    let kind = FieldKind::from_u8(kind)?;
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = u32::from_le_bytes(read_array(r)?) as usize;
    }
    let mut bounds = [0.0f64; 6];
    for b in &mut bounds {
        *b = read_f64(r)?;
    }
    let domain = DomainSpec::new(
        [bounds[0], bounds[1], bounds[2]],
        [bounds[3], bounds[4], bounds[5]],
        dims,
    )
    .map_err(|e| Error::Format(format!("header describes an invalid grid: {e}")))?;
    Ok((kind, domain))
}

pub(crate) fn write_complex(w: &mut impl Write, values: &[Complex64]) -> Result<()> {
    for v in values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_complex(r: &mut impl Read, n: usize) -> Result<Vec<Complex64>> {
    let mut buf = vec![0u8; 16 * n];
    r.read_exact(&mut buf).map_err(|_| {
        Error::Shape(format!("payload shorter than the {n} samples the header declares"))
    })?;
    Ok(buf
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect())
}

pub(crate) fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    read_exact(r, &mut b)?;
    Ok(b)
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Format("truncated header".into()))
}

/// Fails if the reader still holds bytes.
pub(crate) fn expect_eof(r: &mut impl Read) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(Error::Shape("payload longer than the header declares".into())),
    }
}

pub fn write_field(field: &Field, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, field.kind(), field.domain())?;
    for chunk in field.chunks() {
        write_complex(&mut w, chunk)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<Field> {
    let mut r = BufReader::new(File::open(path)?);
    let (kind, domain) = read_header(&mut r)?;
    let n = domain.len();
    let mut comps = || -> Result<[Vec<Complex64>; 3]> {
        Ok([read_complex(&mut r, n)?, read_complex(&mut r, n)?, read_complex(&mut r, n)?])
    };
    let field = match kind {
        FieldKind::Scalar => Field::Scalar(ScalarField::new(domain, read_complex(&mut r, n)?)?),
        FieldKind::Vector => Field::Vector(VectorField::new(domain, comps()?)?),
        FieldKind::TwoForm => Field::TwoForm(TwoFormField::new(domain, comps()?)?),
        FieldKind::DtN => {
            return Err(Error::Format(
                "file holds a DtN matrix; use the DtN reader".into(),
            ))
        }
    };
    expect_eof(&mut r)?;
    Ok(field)
}
