//! `.t2f` tensor field files and `.rays` ray data files.
//!
//! Both formats are an ASCII magic line, one JSON header line and a raw
//! little-endian payload. Field payloads are component-major in the
//! [`Sym2Field`] storage order; frequency payloads interleave `(re, im)`.
//! Ray payloads are `i_y` outer, `i_v` inner.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Domain, FieldData, Grid4, Sym2Field};
use crate::interp::Interpolation;
use crate::raytransform::{LineQuadrature, RayData, RayGrid, Region, YGrid};
use crate::sphere::{SphereQuadrature, SphereSampler};

pub const FIELD_MAGIC: &[u8] = b"T2F1\n";
pub const RAYS_MAGIC: &[u8] = b"RAYS1\n";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub dims: [usize; 4],
    pub spacing: [f64; 4],
    pub origin: [f64; 4],
    pub domain: Domain,
    pub components: usize,
    pub dtype: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaysHeader {
    pub region: Region,
    pub n_y: usize,
    pub ygrid: YGrid,
    pub sampler: SphereSampler,
    pub n_v: usize,
    pub line: LineQuadrature,
    pub interpolation: Interpolation,
    #[serde(default)]
    pub field_id: String,
    pub dtype: String,
}

pub fn write_field<W: Write>(out: &mut W, f: &Sym2Field) -> Result<()> {
    let grid = f.grid();
    let header = FieldHeader {
        dims: grid.dims,
        spacing: grid.spacing,
        origin: grid.origin,
        domain: f.domain(),
        components: 10,
        dtype: match f.domain() {
            Domain::Position => "f64le".into(),
            Domain::Frequency => "c128le".into(),
        },
    };
    out.write_all(FIELD_MAGIC)?;
    serde_json::to_writer(&mut *out, &header)?;
    out.write_all(b"\n")?;
    match f.data() {
        FieldData::Position(v) => write_f64s(out, v)?,
        FieldData::Frequency(v) => {
            for z in v {
                out.write_all(&z.re.to_le_bytes())?;
                out.write_all(&z.im.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_field<R: BufRead>(input: &mut R) -> Result<Sym2Field> {
    expect_magic(input, FIELD_MAGIC, "magic")?;
    let header: FieldHeader = read_header(input)?;
    if header.components != 10 {
        return Err(Error::format("components", format!("expected 10, got {}", header.components)));
    }
    let grid = Grid4::new(header.dims, header.spacing, header.origin)
        .map_err(|e| Error::format("dims/spacing/origin", e.to_string()))?;
    let n = 10 * grid.len();
    match (header.domain, header.dtype.as_str()) {
        (Domain::Position, "f64le") => {
            let v = read_f64s(input, n, "payload")?;
            Sym2Field::from_position_data(grid, v)
        }
        (Domain::Frequency, "c128le") => {
            let v = read_f64s(input, 2 * n, "payload")?;
            let z = v.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
            Sym2Field::from_frequency_data(grid, z)
        }
        (domain, dtype) => Err(Error::format(
            "dtype",
            format!("{dtype:?} does not match a {} domain field", domain.name()),
        )),
    }
}

pub fn write_rays<W: Write>(out: &mut W, u: &RayData) -> Result<()> {
    let header = RaysHeader {
        region: u.rays.region,
        n_y: u.rays.n_y(),
        ygrid: u.rays.ygrid.clone(),
        sampler: u.rays.sphere.sampler,
        n_v: u.rays.n_v(),
        line: u.rays.line,
        interpolation: u.interpolation,
        field_id: u.field_id.clone(),
        dtype: "f64le".into(),
    };
    out.write_all(RAYS_MAGIC)?;
    serde_json::to_writer(&mut *out, &header)?;
    out.write_all(b"\n")?;
    write_f64s(out, &u.to_y_major())
}

pub fn read_rays<R: BufRead>(input: &mut R) -> Result<RayData> {
    expect_magic(input, RAYS_MAGIC, "magic")?;
    let header: RaysHeader = read_header(input)?;
    if header.dtype != "f64le" {
        return Err(Error::format("dtype", format!("expected \"f64le\", got {:?}", header.dtype)));
    }
    if header.n_y != header.ygrid.len() {
        return Err(Error::format(
            "n_y",
            format!("{} does not match the crossing-point grid ({})", header.n_y, header.ygrid.len()),
        ));
    }
    let sphere = SphereQuadrature::new(header.sampler, header.n_v).map_err(|e| Error::format("n_v", e.to_string()))?;
    if sphere.len() != header.n_v {
        return Err(Error::format(
            "n_v",
            format!("sampler {:?} cannot produce {} directions", header.sampler, header.n_v),
        ));
    }
    let line = LineQuadrature::new(header.line.s_max, header.line.n_s).map_err(|e| Error::format("line", e.to_string()))?;
    let rays = RayGrid::new(header.region, header.ygrid, sphere, line).map_err(|e| Error::format("region", e.to_string()))?;
    let values = read_f64s(input, header.n_y * header.n_v, "payload")?;
    let mut u = RayData::from_y_major(rays, &values)?;
    u.interpolation = header.interpolation;
    u.field_id = header.field_id;
    Ok(u)
}

pub fn save_field(path: &Path, f: &Sym2Field) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_field(&mut out, f)?;
    out.flush()?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<Sym2Field> {
    read_field(&mut BufReader::new(File::open(path)?))
}

pub fn save_rays(path: &Path, u: &RayData) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_rays(&mut out, u)?;
    out.flush()?;
    Ok(())
}

pub fn load_rays(path: &Path) -> Result<RayData> {
    read_rays(&mut BufReader::new(File::open(path)?))
}

fn expect_magic<R: Read>(input: &mut R, magic: &[u8], field: &str) -> Result<()> {
    let mut buf = vec![0u8; magic.len()];
    input
        .read_exact(&mut buf)
        .map_err(|_| Error::format(field, "file too short"))?;
    if buf != magic {
        return Err(Error::format(
            field,
            format!("expected {:?}, got {:?}", String::from_utf8_lossy(magic), String::from_utf8_lossy(&buf)),
        ));
    }
    Ok(())
}

fn read_header<R: BufRead, T: serde::de::DeserializeOwned>(input: &mut R) -> Result<T> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    if !line.ends_with('\n') {
        return Err(Error::format("header", "missing newline after the JSON header"));
    }
    serde_json::from_str(&line).map_err(|e| header_error(&line, e))
}

/// Names the offending header field when serde reports one.
fn header_error(line: &str, e: serde_json::Error) -> Error {
    let msg = e.to_string();
    let field = ["missing field `", "unknown field `"]
        .iter()
        .find_map(|p| msg.split(p).nth(1).and_then(|rest| rest.split('`').next()))
        .map(str::to_string)
        .or_else(|| field_at_column(line, e.column()))
        .unwrap_or_else(|| "header".into());
    Error::format(field, msg)
}

/// Last JSON key that starts before `column` (1-based).
fn field_at_column(line: &str, column: usize) -> Option<String> {
    let prefix = line.get(..column.min(line.len()))?;
    let end = prefix.rfind("\":")?;
    let start = prefix[..end].rfind('"')?;
    Some(prefix[start + 1..end].to_string())
}

fn write_f64s<W: Write>(out: &mut W, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 * values.len());
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&bytes)?;
    Ok(())
}

fn read_f64s<R: Read>(input: &mut R, n: usize, field: &str) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; 8 * n];
    input
        .read_exact(&mut bytes)
        .map_err(|_| Error::format(field, format!("expected {} bytes", 8 * n)))?;
    let mut extra = [0u8; 1];
    if input.read(&mut extra)? != 0 {
        return Err(Error::format(field, format!("trailing bytes after {} values", n)));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::fft_field;
    use crate::raytransform::{forward, RayParams};
    use crate::tensor::Sym2;

    fn sample_field() -> Sym2Field {
        let grid = Grid4::new([3, 4, 2, 5], [0.5, 0.25, 1.0, 0.2], [-1.0, 0.0, 0.5, -0.4]).unwrap();
        Sym2Field::from_fn(grid, |x| {
            let mut s = Sym2::ZERO;
            for p in 0..10 {
                s.0[p] = (x[0] * 1.3 + x[1] * x[2] - x[3] + p as f64).sin() / 3.0;
            }
            s
        })
    }

    #[test]
    fn position_field_round_trips_bit_exactly() {
        let f = sample_field();
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert!(buf.starts_with(FIELD_MAGIC));
        let g = read_field(&mut buf.as_slice()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn frequency_field_round_trips_bit_exactly() {
        let f = fft_field(&sample_field()).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert_eq!(read_field(&mut buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn rays_round_trip_bit_exactly() {
        let grid = Grid4::cube(6, -1.0, 1.0);
        let f = Sym2Field::from_profile(grid, &Sym2::unit(0, 1), |x| (1.0 - x.iter().map(|c| c * c).sum::<f64>()).max(0.0));
        let params = RayParams {
            n_v: 12,
            n_s: 9,
            ..RayParams::default()
        };
        let rays = RayGrid::auto(&f, &params).unwrap();
        let mut u = forward(&f, &rays, Interpolation::Multilinear, None).unwrap();
        u.field_id = "probe".into();
        let mut buf = Vec::new();
        write_rays(&mut buf, &u).unwrap();
        assert!(buf.starts_with(RAYS_MAGIC));
        assert_eq!(read_rays(&mut buf.as_slice()).unwrap(), u);
    }

    fn corrupt(header_edit: impl Fn(&mut serde_json::Value)) -> Error {
        let mut buf = Vec::new();
        write_field(&mut buf, &sample_field()).unwrap();
        let nl = 5 + buf[5..].iter().position(|b| *b == b'\n').unwrap();
        let mut header: serde_json::Value = serde_json::from_slice(&buf[5..nl]).unwrap();
        header_edit(&mut header);
        let mut out = FIELD_MAGIC.to_vec();
        out.extend(serde_json::to_vec(&header).unwrap());
        out.extend_from_slice(&buf[nl..]);
        read_field(&mut out.as_slice()).unwrap_err()
    }

    fn field_of(e: Error) -> String {
        match e {
            Error::Format { field, .. } => field,
            other => panic!("expected a format error, got {other}"),
        }
    }

    #[test]
    fn errors_name_the_offending_header_field() {
        assert_eq!(field_of(corrupt(|h| h["components"] = 9.into())), "components");
        assert_eq!(field_of(corrupt(|h| h["dtype"] = "c128le".into())), "dtype");
        assert_eq!(field_of(corrupt(|h| h["domain"] = "momentum".into())), "domain");
        assert_eq!(field_of(corrupt(|h| h.as_object_mut().unwrap().remove("spacing").map(|_| ()).unwrap())), "spacing");
        assert_eq!(field_of(corrupt(|h| h["dims"] = serde_json::json!([3, 4, 2, 6]))), "payload");
        assert_eq!(field_of(corrupt(|h| h["dims"] = "x".into())), "dims");
        let mut bad = b"T2F2\n{}\n".to_vec();
        bad.extend([0u8; 8]);
        assert_eq!(field_of(read_field(&mut bad.as_slice()).unwrap_err()), "magic");
    }

    #[test]
    fn truncated_ray_payload_is_reported() {
        let grid = Grid4::cube(4, -1.0, 1.0);
        let f = Sym2Field::from_profile(grid, &Sym2::unit(0, 0), |_| 0.0);
        let rays = RayGrid::auto(&f, &RayParams { n_v: 4, n_s: 5, ..RayParams::default() }).unwrap();
        let u = RayData::zeros(rays);
        let mut buf = Vec::new();
        write_rays(&mut buf, &u).unwrap();
        buf.truncate(buf.len() - 8);
        assert_eq!(field_of(read_rays(&mut buf.as_slice()).unwrap_err()), "payload");
    }
}
