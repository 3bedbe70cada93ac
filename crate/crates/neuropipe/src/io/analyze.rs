//! Analyze 7.5 reader and writer: a 348-byte .hdr next to a raw .img,
//! little-endian single-file-pair only.

use crate::error::{Error, Result};
use crate::volume::{Modality, VolumeImage};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

const HEADER_SIZE: usize = 348;

const DT_UNSIGNED_CHAR: i16 = 2;
const DT_SIGNED_SHORT: i16 = 4;
const DT_FLOAT: i16 = 16;

fn corrupt(path: &Path, reason: impl Into<String>) -> Error {
    Error::CorruptHeader { path: path.to_path_buf(), reason: reason.into() }
}

fn pair_paths(path: &Path) -> (PathBuf, PathBuf) {
    let hdr = path.with_extension("hdr");
    let img = path.with_extension("img");
    (hdr, img)
}

pub fn read(path: &Path) -> Result<VolumeImage> {
    let (hdr_path, img_path) = pair_paths(path);
    let header = std::fs::read(&hdr_path)?;
    if header.len() < HEADER_SIZE {
        return Err(corrupt(&hdr_path, "header shorter than 348 bytes"));
    }
    let sizeof_hdr = i32::from_le_bytes(header[0..4].try_into().unwrap());
    if sizeof_hdr != HEADER_SIZE as i32 {
        return Err(corrupt(
            &hdr_path,
            format!("sizeof_hdr = {sizeof_hdr}, expected 348 (little-endian)"),
        ));
    }
    let dim = |i: usize| i16::from_le_bytes(header[40 + 2 * i..42 + 2 * i].try_into().unwrap());
    let ndim = dim(0);
    if !(3..=4).contains(&ndim) || (ndim == 4 && dim(4) > 1) {
        return Err(corrupt(&hdr_path, format!("unsupported dim[0] = {ndim}")));
    }
    let (nx, ny, nz) = (dim(1), dim(2), dim(3));
    if nx <= 0 || ny <= 0 || nz <= 0 {
        return Err(corrupt(&hdr_path, format!("non-positive dims {nx}x{ny}x{nz}")));
    }
    let (nx, ny, nz) = (nx as usize, ny as usize, nz as usize);
    let datatype = i16::from_le_bytes(header[70..72].try_into().unwrap());
    let elem = match datatype {
        DT_UNSIGNED_CHAR => 1,
        DT_SIGNED_SHORT => 2,
        DT_FLOAT => 4,
        other => return Err(corrupt(&hdr_path, format!("unsupported datatype {other}"))),
    };
    let pixdim = |i: usize| f32::from_le_bytes(header[76 + 4 * i..80 + 4 * i].try_into().unwrap());

    let n = nx * ny * nz;
    let img_len = std::fs::metadata(&img_path)?.len() as usize;
    if img_len < n * elem {
        return Err(corrupt(
            &hdr_path,
            format!("dims {nx}x{ny}x{nz} need {} image bytes, {img_path:?} has {img_len}", n * elem),
        ));
    }

    let mut img = BufReader::new(File::open(&img_path)?);
    let mut voxels = Vec::with_capacity(n);
    match datatype {
        DT_UNSIGNED_CHAR => {
            use std::io::Read;
            let mut buf = vec![0u8; n];
            img.read_exact(&mut buf)?;
            voxels.extend(buf.into_iter().map(|b| b as f32));
        }
        DT_SIGNED_SHORT => {
            for _ in 0..n {
                voxels.push(img.read_i16::<LittleEndian>()? as f32);
            }
        }
        DT_FLOAT => {
            for _ in 0..n {
                voxels.push(img.read_f32::<LittleEndian>()?);
            }
        }
        _ => unreachable!(),
    }
    super::reject_non_finite(&img_path, &voxels)?;

    let dims = [nz, ny, nx];
    let spacing = [pixdim(3).abs(), pixdim(2).abs(), pixdim(1).abs()];
    let spacing = spacing.map(|s| if s > 0.0 { s } else { 1.0 });
    VolumeImage::new(dims, voxels, spacing, Modality::T1, super::subject_from_stem(&hdr_path))
}

pub fn write(vol: &VolumeImage, path: &Path) -> Result<()> {
    let (hdr_path, img_path) = pair_paths(path);
    let [d0, d1, d2] = vol.dims();
    let spacing = vol.spacing();

    let mut header = [0u8; HEADER_SIZE];
    header[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    header[32..36].copy_from_slice(&16384i32.to_le_bytes()); // extents, conventional
    header[38] = b'r'; // regular
    let dims_disk = [4i16, d2 as i16, d1 as i16, d0 as i16, 1, 0, 0, 0];
    for (i, d) in dims_disk.iter().enumerate() {
        header[40 + 2 * i..42 + 2 * i].copy_from_slice(&d.to_le_bytes());
    }
    header[70..72].copy_from_slice(&DT_FLOAT.to_le_bytes());
    header[72..74].copy_from_slice(&32i16.to_le_bytes());
    let pixdim = [0.0f32, spacing[2], spacing[1], spacing[0], 0.0, 0.0, 0.0, 0.0];
    for (i, p) in pixdim.iter().enumerate() {
        header[76 + 4 * i..80 + 4 * i].copy_from_slice(&p.to_le_bytes());
    }

    let mut hdr = BufWriter::new(File::create(&hdr_path)?);
    hdr.write_all(&header)?;
    hdr.flush()?;

    let mut img = BufWriter::new(File::create(&img_path)?);
    for &v in vol.voxels() {
        img.write_f32::<LittleEndian>(v)?;
    }
    img.flush()?;
    Ok(())
}
