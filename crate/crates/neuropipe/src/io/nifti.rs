//! NIfTI-1 single-file (.nii) reader and writer, little-endian, no
//! extensions, no compression.

use crate::error::{Error, Result};
use crate::volume::{Modality, VolumeImage};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;
const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_INT32: i16 = 8;
const DT_FLOAT32: i16 = 16;
const DT_FLOAT64: i16 = 64;

fn corrupt(path: &Path, reason: impl Into<String>) -> Error {
    Error::CorruptHeader { path: path.to_path_buf(), reason: reason.into() }
}

pub fn read(path: &Path) -> Result<VolumeImage> {
    let mut file = BufReader::new(File::open(path)?);
    let mut header = [0u8; HEADER_SIZE];
    file.read_exact(&mut header)
        .map_err(|_| corrupt(path, "file shorter than the 348-byte header"))?;

    let sizeof_hdr = i32::from_le_bytes(header[0..4].try_into().unwrap());
    if sizeof_hdr != HEADER_SIZE as i32 {
        return Err(corrupt(path, format!("sizeof_hdr = {sizeof_hdr}, expected 348 (little-endian)")));
    }
    let magic = &header[344..348];
    if magic != MAGIC_SINGLE {
        return Err(corrupt(path, "magic is not n+1 (single-file)"));
    }

    let dim = |i: usize| i16::from_le_bytes(header[40 + 2 * i..42 + 2 * i].try_into().unwrap());
    let ndim = dim(0);
    if !(1..=7).contains(&ndim) {
        return Err(corrupt(path, format!("dim[0] = {ndim}")));
    }
    // Accept trailing singleton dimensions beyond the first three.
    let (nx, ny, nz) = (dim(1), dim(2), if ndim >= 3 { dim(3) } else { 1 });
    for i in 4..=ndim as usize {
        if dim(i) > 1 {
            return Err(corrupt(path, format!("non-singleton dim[{i}] = {}", dim(i))));
        }
    }
    if nx <= 0 || ny <= 0 || nz <= 0 {
        return Err(corrupt(path, format!("non-positive dims {nx}x{ny}x{nz}")));
    }
    let (nx, ny, nz) = (nx as usize, ny as usize, nz as usize);

    let datatype = i16::from_le_bytes(header[70..72].try_into().unwrap());
    let elem = match datatype {
        DT_UINT8 => 1,
        DT_INT16 => 2,
        DT_INT32 | DT_FLOAT32 => 4,
        DT_FLOAT64 => 8,
        other => return Err(corrupt(path, format!("unsupported datatype {other}"))),
    };

    let pixdim = |i: usize| f32::from_le_bytes(header[76 + 4 * i..80 + 4 * i].try_into().unwrap());
    let vox_offset = f32::from_le_bytes(header[108..112].try_into().unwrap());
    if vox_offset < HEADER_SIZE as f32 || vox_offset.fract() != 0.0 {
        return Err(corrupt(path, format!("bad vox_offset {vox_offset}")));
    }
    let scl_slope = f32::from_le_bytes(header[112..116].try_into().unwrap());
    let scl_inter = f32::from_le_bytes(header[116..120].try_into().unwrap());

    let n = nx * ny * nz;
    let offset = vox_offset as usize;
    let file_len = std::fs::metadata(path)?.len() as usize;
    if file_len < offset + n * elem {
        return Err(corrupt(
            path,
            format!(
                "dims {nx}x{ny}x{nz} declare {} payload bytes at offset {offset}, file has {file_len}",
                n * elem
            ),
        ));
    }

    // Skip anything between header and payload (extension flag bytes).
    let mut skip = vec![0u8; offset - HEADER_SIZE];
    file.read_exact(&mut skip)?;

    let mut voxels = Vec::with_capacity(n);
    match datatype {
        DT_UINT8 => {
            let mut buf = vec![0u8; n];
            file.read_exact(&mut buf)?;
            voxels.extend(buf.into_iter().map(|b| b as f32));
        }
        DT_INT16 => {
            for _ in 0..n {
                voxels.push(file.read_i16::<LittleEndian>()? as f32);
            }
        }
        DT_INT32 => {
            for _ in 0..n {
                voxels.push(file.read_i32::<LittleEndian>()? as f32);
            }
        }
        DT_FLOAT32 => {
            for _ in 0..n {
                voxels.push(file.read_f32::<LittleEndian>()?);
            }
        }
        DT_FLOAT64 => {
            for _ in 0..n {
                voxels.push(file.read_f64::<LittleEndian>()? as f32);
            }
        }
        _ => unreachable!(),
    }
    if scl_slope != 0.0 && (scl_slope != 1.0 || scl_inter != 0.0) {
        for v in &mut voxels {
            *v = *v * scl_slope + scl_inter;
        }
    }
    super::reject_non_finite(path, &voxels)?;

    // On-disk x varies fastest; x maps to our axis 2, z to axis 0, so the
    // F-order payload already matches our row-major (z, y, x) layout.
    let dims = [nz, ny, nx];
    let spacing = [pixdim(3).abs(), pixdim(2).abs(), pixdim(1).abs()];
    let spacing = spacing.map(|s| if s > 0.0 { s } else { 1.0 });

    let (subject, modality) = parse_descrip(&header[148..228])
        .unwrap_or_else(|| (super::subject_from_stem(path), Modality::T1));
    VolumeImage::new(dims, voxels, spacing, modality, subject)
        .map_err(|e| match e {
            Error::NonFiniteData { .. } => Error::NonFiniteData { path: path.to_path_buf() },
            other => other,
        })
}

pub fn write(vol: &VolumeImage, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let [d0, d1, d2] = vol.dims();
    let mut header = [0u8; HEADER_SIZE];

    header[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    // dim[0..3] in on-disk order: x = axis 2, y = axis 1, z = axis 0
    let dims_disk = [3i16, d2 as i16, d1 as i16, d0 as i16, 1, 1, 1, 1];
    for (i, d) in dims_disk.iter().enumerate() {
        header[40 + 2 * i..42 + 2 * i].copy_from_slice(&d.to_le_bytes());
    }
    header[70..72].copy_from_slice(&DT_FLOAT32.to_le_bytes());
    header[72..74].copy_from_slice(&32i16.to_le_bytes()); // bitpix
    let spacing = vol.spacing();
    let pixdim = [1.0f32, spacing[2], spacing[1], spacing[0], 0.0, 0.0, 0.0, 0.0];
    for (i, p) in pixdim.iter().enumerate() {
        header[76 + 4 * i..80 + 4 * i].copy_from_slice(&p.to_le_bytes());
    }
    header[108..112].copy_from_slice(&(VOX_OFFSET as f32).to_le_bytes());
    header[112..116].copy_from_slice(&1.0f32.to_le_bytes()); // scl_slope
    header[123] = 2; // xyzt_units: millimetres
    let descrip = format!("neuropipe:{}:{}", vol.subject_id, vol.modality);
    let bytes = descrip.as_bytes();
    let len = bytes.len().min(79);
    header[148..148 + len].copy_from_slice(&bytes[..len]);
    header[344..348].copy_from_slice(MAGIC_SINGLE);

    out.write_all(&header)?;
    out.write_all(&[0u8; VOX_OFFSET - HEADER_SIZE])?; // extension flag: none
    for &v in vol.voxels() {
        out.write_f32::<LittleEndian>(v)?;
    }
    out.flush()?;
    Ok(())
}

fn parse_descrip(raw: &[u8]) -> Option<(String, Modality)> {
    let end = raw.iter().position(|&b| b == 0).unwrap_or(raw.len());
    let text = std::str::from_utf8(&raw[..end]).ok()?;
    let mut parts = text.splitn(3, ':');
    if parts.next()? != "neuropipe" {
        return None;
    }
    let subject = parts.next()?.to_string();
    let modality = Modality::parse(parts.next()?)?;
    Some((subject, modality))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Assembles a minimal header by hand, independent of `write`, so the
    /// reader is checked against the byte layout itself.
    fn hand_built_nifti(dims_disk: [i16; 3], payload: &[u8], datatype: i16, bitpix: i16) -> Vec<u8> {
        let mut h = vec![0u8; VOX_OFFSET];
        h[0..4].copy_from_slice(&348i32.to_le_bytes());
        let dim = [3i16, dims_disk[0], dims_disk[1], dims_disk[2], 1, 1, 1, 1];
        for (i, d) in dim.iter().enumerate() {
            h[40 + 2 * i..42 + 2 * i].copy_from_slice(&d.to_le_bytes());
        }
        h[70..72].copy_from_slice(&datatype.to_le_bytes());
        h[72..74].copy_from_slice(&bitpix.to_le_bytes());
        for (i, p) in [1.0f32, 2.0, 3.0, 4.0].iter().enumerate() {
            h[76 + 4 * i..80 + 4 * i].copy_from_slice(&p.to_le_bytes());
        }
        h[108..112].copy_from_slice(&(VOX_OFFSET as f32).to_le_bytes());
        h[344..348].copy_from_slice(MAGIC_SINGLE);
        h.extend_from_slice(payload);
        h
    }

    #[test]
    fn reads_hand_built_fixture() {
        // 2x3x4 int16 volume with values 0..23, x fastest on disk.
        let payload: Vec<u8> = (0..24i16).flat_map(|v| v.to_le_bytes()).collect();
        let bytes = hand_built_nifti([2, 3, 4], &payload, DT_INT16, 16);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hand.nii");
        std::fs::write(&path, &bytes).unwrap();

        let vol = read(&path).unwrap();
        assert_eq!(vol.dims(), [4, 3, 2]); // z, y, x
        assert_eq!(vol.spacing(), [4.0, 3.0, 2.0]);
        // voxel (z, y, x) = linear z*6 + y*2 + x
        assert_eq!(vol.at(0, 0, 0), 0.0);
        assert_eq!(vol.at(0, 0, 1), 1.0);
        assert_eq!(vol.at(0, 1, 0), 2.0);
        assert_eq!(vol.at(1, 0, 0), 6.0);
        assert_eq!(vol.at(3, 2, 1), 23.0);
    }

    #[test]
    fn payload_shorter_than_dims_is_corrupt() {
        // header declares 10x10x10 uint8 but only 500 bytes of payload follow
        let bytes = hand_built_nifti([10, 10, 10], &vec![0u8; 500], DT_UINT8, 8);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.nii");
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read(&path), Err(Error::CorruptHeader { .. })));
    }

    #[test]
    fn nan_payload_rejected() {
        let payload: Vec<u8> = f32::NAN.to_le_bytes().to_vec();
        let bytes = hand_built_nifti([1, 1, 1], &payload, DT_FLOAT32, 32);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nan.nii");
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read(&path), Err(Error::NonFiniteData { .. })));
    }

    #[test]
    fn bad_magic_rejected() {
        let mut bytes = hand_built_nifti([1, 1, 1], &[0u8], DT_UINT8, 8);
        bytes[344..348].copy_from_slice(b"abc\0");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("magic.nii");
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read(&path), Err(Error::CorruptHeader { .. })));
    }

    #[test]
    fn descrip_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let vol = VolumeImage::new([2, 2, 2], vec![1.0; 8], [1.0; 3], Modality::Flair, "case42")
            .unwrap();
        let path = dir.path().join("meta.nii");
        write(&vol, &path).unwrap();
        let back = read(&path).unwrap();
        assert_eq!(back.subject_id, "case42");
        assert_eq!(back.modality, Modality::Flair);
    }
}
