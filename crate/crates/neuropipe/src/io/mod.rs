//! Medical volume I/O: NIfTI-1 (.nii), MetaImage (.mha) and Analyze 7.5
//! (.hdr + .img), all little-endian and uncompressed.
//!
//! Only voxels and spacing survive a round trip in every format. NIfTI
//! additionally carries subject id and modality in its descrip field;
//! the other formats fall back to the file stem (subject) and T1, and the
//! dataset manifest is the authority for both either way.

mod analyze;
mod manifest;
mod meta;
mod nifti;

pub use manifest::{read_manifest, write_manifest, ChannelKind, ManifestRow, Split, MANIFEST_HEADER};

use crate::error::{Error, Result};
use crate::volume::VolumeImage;
use std::path::Path;

/// On-disk volume format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeFormat {
    Nifti,
    MetaImage,
    Analyze,
}

impl VolumeFormat {
    /// Infers the format from a file extension.
    pub fn from_path(path: &Path) -> Option<VolumeFormat> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "nii" => Some(VolumeFormat::Nifti),
            "mha" => Some(VolumeFormat::MetaImage),
            "hdr" | "img" => Some(VolumeFormat::Analyze),
            _ => None,
        }
    }
}

/// Reads a volume, dispatching on the extension unless a hint is given.
pub fn read_volume(path: impl AsRef<Path>, format_hint: Option<VolumeFormat>) -> Result<VolumeImage> {
    let path = path.as_ref();
    let format = format_hint
        .or_else(|| VolumeFormat::from_path(path))
        .ok_or_else(|| Error::UnknownFormat { path: path.to_path_buf() })?;
    match format {
        VolumeFormat::Nifti => nifti::read(path),
        VolumeFormat::MetaImage => meta::read(path),
        VolumeFormat::Analyze => analyze::read(path),
    }
}

/// Writes a volume in the requested format. For Analyze, `path` names the
/// .hdr file and the sibling .img is written next to it.
pub fn write_volume(vol: &VolumeImage, path: impl AsRef<Path>, format: VolumeFormat) -> Result<()> {
    let path = path.as_ref();
    match format {
        VolumeFormat::Nifti => nifti::write(vol, path),
        VolumeFormat::MetaImage => meta::write(vol, path),
        VolumeFormat::Analyze => analyze::write(vol, path),
    }
}

/// Scans a freshly decoded payload for NaN/Inf and rejects it.
pub(crate) fn reject_non_finite(path: &Path, voxels: &[f32]) -> Result<()> {
    if voxels.iter().any(|v| !v.is_finite()) {
        Err(Error::NonFiniteData { path: path.to_path_buf() })
    } else {
        Ok(())
    }
}

/// Subject id guess when a format has nowhere to store one.
pub(crate) fn subject_from_stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("unknown").to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Modality;

    fn fixture_volume() -> VolumeImage {
        let voxels = (0..64).map(|i| i as f32).collect();
        VolumeImage::new([4, 4, 4], voxels, [1.0, 1.5, 2.0], Modality::T2, "subj7").unwrap()
    }

    #[test]
    fn unknown_extension_rejected() {
        let err = read_volume("x.txt", None).unwrap_err();
        assert!(matches!(err, Error::UnknownFormat { .. }));
    }

    #[test]
    fn round_trip_all_formats() {
        let dir = tempfile::tempdir().unwrap();
        let vol = fixture_volume();
        for (format, name) in [
            (VolumeFormat::Nifti, "v.nii"),
            (VolumeFormat::MetaImage, "v.mha"),
            (VolumeFormat::Analyze, "v.hdr"),
        ] {
            let path = dir.path().join(name);
            write_volume(&vol, &path, format).unwrap();
            let back = read_volume(&path, None).unwrap();
            assert_eq!(back.voxels(), vol.voxels(), "{name} voxels");
            assert_eq!(back.spacing(), vol.spacing(), "{name} spacing");
            assert_eq!(back.dims(), vol.dims(), "{name} dims");
        }
    }

    #[test]
    fn round_trip_singleton() {
        let dir = tempfile::tempdir().unwrap();
        let vol = VolumeImage::new([1, 1, 1], vec![7.0], [1.0; 3], Modality::T1, "s").unwrap();
        let path = dir.path().join("one.nii");
        write_volume(&vol, &path, VolumeFormat::Nifti).unwrap();
        let back = read_volume(&path, None).unwrap();
        assert_eq!(back.voxels(), &[7.0]);
    }

    #[test]
    fn write_to_unwritable_path_fails() {
        let vol = fixture_volume();
        let err = write_volume(&vol, "/nonexistent-dir/zzz/v.nii", VolumeFormat::Nifti).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }

    #[test]
    fn format_hint_overrides_extension() {
        let dir = tempfile::tempdir().unwrap();
        let vol = fixture_volume();
        let path = dir.path().join("volume.dat");
        write_volume(&vol, &path, VolumeFormat::MetaImage).unwrap();
        assert!(read_volume(&path, None).is_err());
        let back = read_volume(&path, Some(VolumeFormat::MetaImage)).unwrap();
        assert_eq!(back.voxels(), vol.voxels());
    }
}
