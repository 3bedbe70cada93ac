//! MetaImage (.mha) reader and writer: text header, LOCAL raw payload,
//! little-endian. MET_UCHAR / MET_SHORT / MET_FLOAT element types.

use crate::error::{Error, Result};
use crate::volume::{Modality, VolumeImage};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

fn corrupt(path: &Path, reason: impl Into<String>) -> Error {
    Error::CorruptHeader { path: path.to_path_buf(), reason: reason.into() }
}

pub fn read(path: &Path) -> Result<VolumeImage> {
    let mut file = BufReader::new(File::open(path)?);

    let mut ndims = 0usize;
    let mut dim_size: Option<Vec<usize>> = None;
    let mut spacing = [1.0f32; 3];
    let mut element_type = String::new();
    let mut msb = false;

    // Header is line-oriented "Key = Value"; payload starts right after
    // the ElementDataFile line.
    loop {
        let mut line = Vec::new();
        loop {
            let mut byte = [0u8; 1];
            if file.read(&mut byte)? == 0 {
                return Err(corrupt(path, "header ended before ElementDataFile"));
            }
            if byte[0] == b'\n' {
                break;
            }
            line.push(byte[0]);
            if line.len() > 4096 {
                return Err(corrupt(path, "unterminated header line"));
            }
        }
        let line = String::from_utf8(line)
            .map_err(|_| corrupt(path, "non-UTF8 header line"))?;
        let Some((key, value)) = line.split_once('=') else {
            return Err(corrupt(path, format!("malformed header line: {line}")));
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "ObjectType" => {
                if value != "Image" {
                    return Err(corrupt(path, format!("ObjectType {value}")));
                }
            }
            "NDims" => {
                ndims = value.parse().map_err(|_| corrupt(path, "bad NDims"))?;
                if ndims != 3 {
                    return Err(corrupt(path, format!("NDims {ndims}, only 3 supported")));
                }
            }
            "BinaryData" => {
                if value != "True" {
                    return Err(corrupt(path, "only binary data supported"));
                }
            }
            "BinaryDataByteOrderMSB" | "ElementByteOrderMSB" => {
                msb = value == "True";
            }
            "CompressedData" => {
                if value == "True" {
                    return Err(corrupt(path, "compressed data not supported"));
                }
            }
            "DimSize" => {
                let dims: Vec<usize> = value
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| corrupt(path, "bad DimSize")))
                    .collect::<Result<_>>()?;
                dim_size = Some(dims);
            }
            "ElementSpacing" => {
                let s: Vec<f32> = value
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| corrupt(path, "bad ElementSpacing")))
                    .collect::<Result<_>>()?;
                if s.len() == 3 {
                    // on-disk order x y z -> our axes 2, 1, 0
                    spacing = [s[2], s[1], s[0]];
                }
            }
            "ElementType" => element_type = value.to_string(),
            "ElementDataFile" => {
                if value != "LOCAL" {
                    return Err(corrupt(path, "only ElementDataFile = LOCAL supported"));
                }
                break;
            }
            _ => {} // TransformMatrix, Offset, etc. are irrelevant here
        }
    }

    if msb {
        return Err(corrupt(path, "big-endian data not supported"));
    }
    let dims_disk = dim_size.ok_or_else(|| corrupt(path, "missing DimSize"))?;
    if dims_disk.len() != 3 || dims_disk.iter().any(|&d| d == 0) {
        return Err(corrupt(path, format!("bad DimSize {dims_disk:?}")));
    }
    let n = dims_disk[0] * dims_disk[1] * dims_disk[2];

    let mut voxels = Vec::with_capacity(n);
    let read_err = |_| corrupt(path, format!("payload shorter than DimSize {dims_disk:?}"));
    match element_type.as_str() {
        "MET_UCHAR" => {
            let mut buf = vec![0u8; n];
            file.read_exact(&mut buf).map_err(read_err)?;
            voxels.extend(buf.into_iter().map(|b| b as f32));
        }
        "MET_SHORT" => {
            for _ in 0..n {
                voxels.push(file.read_i16::<LittleEndian>().map_err(read_err)? as f32);
            }
        }
        "MET_FLOAT" => {
            for _ in 0..n {
                voxels.push(file.read_f32::<LittleEndian>().map_err(read_err)?);
            }
        }
        other => return Err(corrupt(path, format!("unsupported ElementType {other}"))),
    }
    super::reject_non_finite(path, &voxels)?;

    // x fastest on disk = our axis 2 fastest; same linear layout.
    let dims = [dims_disk[2], dims_disk[1], dims_disk[0]];
    VolumeImage::new(dims, voxels, spacing, Modality::T1, super::subject_from_stem(path))
}

pub fn write(vol: &VolumeImage, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let [d0, d1, d2] = vol.dims();
    let [s0, s1, s2] = vol.spacing();
    write!(
        out,
        "ObjectType = Image\n\
         NDims = 3\n\
         BinaryData = True\n\
         BinaryDataByteOrderMSB = False\n\
         CompressedData = False\n\
         DimSize = {d2} {d1} {d0}\n\
         ElementSpacing = {s2} {s1} {s0}\n\
         ElementType = MET_FLOAT\n\
         ElementDataFile = LOCAL\n"
    )?;
    for &v in vol.voxels() {
        out.write_f32::<LittleEndian>(v)?;
    }
    out.flush()?;
    Ok(())
}
