//! Volumetric images, anatomical planes, and multi-channel slice stacks.
//!
//! Axis convention, fixed once and used everywhere: axis 0 indexes axial
//! slices, axis 1 coronal slices, axis 2 sagittal slices. A voxel at
//! `(i, j, k)` lives at linear offset `(i * d1 + j) * d2 + k`.

use crate::error::{Error, Result};
use std::fmt;

/// MRI acquisition modality. The declaration order is the canonical channel
/// order used by [`stack_modalities`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Modality {
    T1,
    T1c,
    T2,
    Flair,
    Dwi,
    Pd,
}

impl Modality {
    pub const ALL: [Modality; 6] = [
        Modality::T1,
        Modality::T1c,
        Modality::T2,
        Modality::Flair,
        Modality::Dwi,
        Modality::Pd,
    ];

    /// Position in the canonical channel order.
    pub fn ordinal(self) -> usize {
        Self::ALL.iter().position(|m| *m == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::T1 => "T1",
            Modality::T1c => "T1c",
            Modality::T2 => "T2",
            Modality::Flair => "FLAIR",
            Modality::Dwi => "DWI",
            Modality::Pd => "PD",
        }
    }

    pub fn parse(s: &str) -> Option<Modality> {
        Modality::ALL.iter().copied().find(|m| m.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Anatomical viewing plane. Each plane maps to exactly one volume axis:
/// axial = axis 0, coronal = axis 1, sagittal = axis 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Plane {
    Axial,
    Coronal,
    Sagittal,
}

impl Plane {
    pub const ALL: [Plane; 3] = [Plane::Axial, Plane::Coronal, Plane::Sagittal];

    /// The volume axis this plane slices along.
    pub fn axis(self) -> usize {
        match self {
            Plane::Axial => 0,
            Plane::Coronal => 1,
            Plane::Sagittal => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Plane::Axial => "axial",
            Plane::Coronal => "coronal",
            Plane::Sagittal => "sagittal",
        }
    }

    pub fn parse(s: &str) -> Option<Plane> {
        Plane::ALL.iter().copied().find(|p| p.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One channel's meaning inside a [`SliceStack`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelTag {
    Modality(Modality),
    Plane(Plane),
}

impl fmt::Display for ChannelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelTag::Modality(m) => write!(f, "{m}"),
            ChannelTag::Plane(p) => write!(f, "{p}"),
        }
    }
}

/// Where a slice stack came from: the subject plus a location description
/// such as `axial:12` or `voi:(0,0,0)-(32,32,32)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub subject_id: String,
    pub location: String,
}

impl Provenance {
    pub fn new(subject_id: impl Into<String>, location: impl Into<String>) -> Self {
        Provenance { subject_id: subject_id.into(), location: location.into() }
    }
}

/// One 3D scalar grid from one modality of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeImage {
    dims: [usize; 3],
    voxels: Vec<f32>,
    spacing: [f32; 3],
    pub modality: Modality,
    pub subject_id: String,
}

impl VolumeImage {
    /// Builds a volume, validating every invariant: positive extents,
    /// positive spacing, finite voxels, matching buffer length.
    pub fn new(
        dims: [usize; 3],
        voxels: Vec<f32>,
        spacing: [f32; 3],
        modality: Modality,
        subject_id: impl Into<String>,
    ) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::ShapeMismatch { reason: format!("zero extent in dims {dims:?}") });
        }
        let n = dims[0] * dims[1] * dims[2];
        if voxels.len() != n {
            return Err(Error::ShapeMismatch {
                reason: format!("dims {dims:?} need {n} voxels, got {}", voxels.len()),
            });
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::ShapeMismatch { reason: format!("non-positive spacing {spacing:?}") });
        }
        if voxels.iter().any(|v| !v.is_finite()) {
            // io::read_volume rewrites this with the offending file's path.
            return Err(Error::NonFiniteData { path: "<in-memory volume>".into() });
        }
        Ok(VolumeImage { dims, voxels, spacing, modality, subject_id: subject_id.into() })
    }

    /// Constant-filled volume, mostly for tests and fixtures.
    pub fn filled(dims: [usize; 3], value: f32, modality: Modality, subject_id: &str) -> Result<Self> {
        let n = dims[0] * dims[1] * dims[2];
        Self::new(dims, vec![value; n], [1.0; 3], modality, subject_id)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f32; 3] {
        self.spacing
    }

    pub fn voxels(&self) -> &[f32] {
        &self.voxels
    }

    pub fn voxels_mut(&mut self) -> &mut [f32] {
        &mut self.voxels
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f32 {
        self.voxels[(i * self.dims[1] + j) * self.dims[2] + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f32) {
        self.voxels[(i * self.dims[1] + j) * self.dims[2] + k] = v;
    }

    pub fn with_modality(mut self, modality: Modality) -> Self {
        self.modality = modality;
        self
    }

    pub fn with_subject(mut self, subject_id: impl Into<String>) -> Self {
        self.subject_id = subject_id.into();
        self
    }

    /// Per-volume min-max normalization to [0, 1]. A constant volume maps
    /// to all zeros. Used for model input, never for I/O round trips.
    pub fn normalized(&self) -> VolumeImage {
        let mut lo = f32::INFINITY;
        let mut hi = f32::NEG_INFINITY;
        for &v in &self.voxels {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let range = hi - lo;
        let mut out = self.clone();
        if range > 0.0 {
            for v in &mut out.voxels {
                *v = (*v - lo) / range;
            }
        } else {
            for v in &mut out.voxels {
                *v = 0.0;
            }
        }
        out
    }
}

/// A rectangular 3D sub-region, lower corner inclusive, upper exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoiSpec {
    pub lower: [usize; 3],
    pub upper: [usize; 3],
}

impl VoiSpec {
    pub fn new(lower: [usize; 3], upper: [usize; 3]) -> Self {
        VoiSpec { lower, upper }
    }

    /// The full extent of a volume as a VOI.
    pub fn full(vol: &VolumeImage) -> Self {
        VoiSpec { lower: [0; 3], upper: vol.dims() }
    }

    pub fn extent(&self) -> [usize; 3] {
        [
            self.upper[0] - self.lower[0],
            self.upper[1] - self.lower[1],
            self.upper[2] - self.lower[2],
        ]
    }

    fn validate(&self, dims: [usize; 3]) -> Result<()> {
        for a in 0..3 {
            if self.lower[a] >= self.upper[a] {
                return Err(Error::VoiOutOfBounds {
                    reason: format!("lower {:?} not below upper {:?}", self.lower, self.upper),
                });
            }
            if self.upper[a] > dims[a] {
                return Err(Error::VoiOutOfBounds {
                    reason: format!("upper {:?} exceeds extent {:?}", self.upper, dims),
                });
            }
        }
        Ok(())
    }
}

/// A 2D multi-channel image. Channels are all modalities (detector and
/// segmenter input) or all planes (classifier input), never mixed.
/// Pixels are stored channel-major: `(c * h + r) * w + col`.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceStack {
    h: usize,
    w: usize,
    tags: Vec<ChannelTag>,
    pixels: Vec<f32>,
    pub provenance: Provenance,
    /// Set when the pixel values were min-max normalized to [0, 1];
    /// contrast augmentation clips only in that case.
    pub normalized: bool,
}

impl SliceStack {
    pub fn new(
        h: usize,
        w: usize,
        tags: Vec<ChannelTag>,
        pixels: Vec<f32>,
        provenance: Provenance,
    ) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::ShapeMismatch { reason: format!("degenerate slice {h}x{w}") });
        }
        if tags.is_empty() || tags.len() > 6 {
            return Err(Error::ShapeMismatch {
                reason: format!("channel count {} outside 1..=6", tags.len()),
            });
        }
        if pixels.len() != tags.len() * h * w {
            return Err(Error::ShapeMismatch {
                reason: format!(
                    "{} channels of {h}x{w} need {} pixels, got {}",
                    tags.len(),
                    tags.len() * h * w,
                    pixels.len()
                ),
            });
        }
        let all_modalities = tags.iter().all(|t| matches!(t, ChannelTag::Modality(_)));
        let all_planes = tags.iter().all(|t| matches!(t, ChannelTag::Plane(_)));
        if !all_modalities && !all_planes {
            return Err(Error::ShapeMismatch {
                reason: "channel tags mix modalities and planes".into(),
            });
        }
        if all_modalities {
            for (i, t) in tags.iter().enumerate() {
                if tags[..i].contains(t) {
                    return Err(Error::DuplicateModality(t.to_string()));
                }
            }
        }
        Ok(SliceStack { h, w, tags, pixels, provenance, normalized: false })
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn channels(&self) -> usize {
        self.tags.len()
    }

    pub fn tags(&self) -> &[ChannelTag] {
        &self.tags
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f32] {
        &mut self.pixels
    }

    #[inline]
    pub fn at(&self, c: usize, r: usize, col: usize) -> f32 {
        self.pixels[(c * self.h + r) * self.w + col]
    }

    #[inline]
    pub fn set(&mut self, c: usize, r: usize, col: usize, v: f32) {
        self.pixels[(c * self.h + r) * self.w + col] = v;
    }

    /// Borrow one channel as a contiguous row-major plane.
    pub fn channel(&self, c: usize) -> &[f32] {
        &self.pixels[c * self.h * self.w..(c + 1) * self.h * self.w]
    }

    pub fn with_normalized_flag(mut self, normalized: bool) -> Self {
        self.normalized = normalized;
        self
    }

    /// Min-max normalize all channels jointly to [0, 1] and mark the stack.
    pub fn normalized(&self) -> SliceStack {
        let mut lo = f32::INFINITY;
        let mut hi = f32::NEG_INFINITY;
        for &v in &self.pixels {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let range = hi - lo;
        let mut out = self.clone();
        for v in &mut out.pixels {
            *v = if range > 0.0 { (*v - lo) / range } else { 0.0 };
        }
        out.normalized = true;
        out
    }
}

/// Copies one plane-aligned slice out of a volume. The returned stack is a
/// fresh buffer, never a view.
pub fn extract_slice(vol: &VolumeImage, plane: Plane, index: usize) -> Result<SliceStack> {
    let dims = vol.dims();
    let axis = plane.axis();
    if index >= dims[axis] {
        return Err(Error::IndexOutOfRange { index, extent: dims[axis] });
    }
    let (h, w) = match plane {
        Plane::Axial => (dims[1], dims[2]),
        Plane::Coronal => (dims[0], dims[2]),
        Plane::Sagittal => (dims[0], dims[1]),
    };
    let mut pixels = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let v = match plane {
                Plane::Axial => vol.at(index, r, c),
                Plane::Coronal => vol.at(r, index, c),
                Plane::Sagittal => vol.at(r, c, index),
            };
            pixels.push(v);
        }
    }
    SliceStack::new(
        h,
        w,
        vec![ChannelTag::Plane(plane)],
        pixels,
        Provenance::new(vol.subject_id.clone(), format!("{plane}:{index}")),
    )
}

/// Crops a volume to a VOI. Spacing and modality are preserved.
pub fn extract_voi(vol: &VolumeImage, voi: &VoiSpec) -> Result<VolumeImage> {
    voi.validate(vol.dims())?;
    let ext = voi.extent();
    let mut voxels = Vec::with_capacity(ext[0] * ext[1] * ext[2]);
    for i in 0..ext[0] {
        for j in 0..ext[1] {
            for k in 0..ext[2] {
                voxels.push(vol.at(voi.lower[0] + i, voi.lower[1] + j, voi.lower[2] + k));
            }
        }
    }
    VolumeImage::new(ext, voxels, vol.spacing(), vol.modality, vol.subject_id.clone())
}

/// Bilinear resize of a row-major plane. Endpoints align with the source
/// corners; constant inputs stay constant.
pub fn bilinear_resize(src: &[f32], h: usize, w: usize, nh: usize, nw: usize) -> Vec<f32> {
    assert_eq!(src.len(), h * w);
    let mut out = vec![0.0f32; nh * nw];
    let ys = if nh > 1 { (h - 1) as f32 / (nh - 1) as f32 } else { 0.0 };
    let xs = if nw > 1 { (w - 1) as f32 / (nw - 1) as f32 } else { 0.0 };
    for r in 0..nh {
        let sy = ys * r as f32;
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ty = sy - y0 as f32;
        for c in 0..nw {
            let sx = xs * c as f32;
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let tx = sx - x0 as f32;
            let tl = src[y0 * w + x0];
            let tr = src[y0 * w + x1];
            let bl = src[y1 * w + x0];
            let br = src[y1 * w + x1];
            let top = tl + (tr - tl) * tx;
            let bot = bl + (br - bl) * tx;
            out[r * nw + c] = top + (bot - top) * ty;
        }
    }
    out
}

/// The three center slices of a VOI (one per plane), each resampled to
/// `side` x `side`, stacked in the fixed order (axial, coronal, sagittal).
pub fn plane_triplet(vol: &VolumeImage, voi: &VoiSpec, side: usize) -> Result<SliceStack> {
    voi.validate(vol.dims())?;
    let cropped = extract_voi(vol, voi)?;
    let ext = cropped.dims();
    let mut pixels = Vec::with_capacity(3 * side * side);
    for plane in Plane::ALL {
        let axis = plane.axis();
        let center = ext[axis] / 2;
        let slice = extract_slice(&cropped, plane, center)?;
        let resized = bilinear_resize(slice.channel(0), slice.height(), slice.width(), side, side);
        pixels.extend_from_slice(&resized);
    }
    let mut stack = SliceStack::new(
        side,
        side,
        Plane::ALL.iter().map(|p| ChannelTag::Plane(*p)).collect(),
        pixels,
        Provenance::new(
            vol.subject_id.clone(),
            format!("voi:{:?}-{:?}", voi.lower, voi.upper),
        ),
    )?;
    stack.normalized = vol.voxels().iter().all(|&v| (0.0..=1.0).contains(&v));
    Ok(stack)
}

/// Stacks single-modality slices into one multi-channel stack in the
/// canonical modality order, regardless of input order.
pub fn stack_modalities(slices: &[SliceStack]) -> Result<SliceStack> {
    if slices.is_empty() {
        return Err(Error::EmptySubset);
    }
    let h = slices[0].height();
    let w = slices[0].width();
    let prov = slices[0].provenance.clone();
    let mut tagged: Vec<(Modality, &SliceStack)> = Vec::with_capacity(slices.len());
    for s in slices {
        if s.channels() != 1 {
            return Err(Error::ShapeMismatch {
                reason: format!("expected single-channel inputs, got {} channels", s.channels()),
            });
        }
        if s.height() != h || s.width() != w {
            return Err(Error::ShapeMismatch {
                reason: format!("{}x{} vs {h}x{w}", s.height(), s.width()),
            });
        }
        if s.provenance != prov {
            return Err(Error::ProvenanceMismatch {
                reason: format!(
                    "{}/{} vs {}/{}",
                    s.provenance.subject_id, s.provenance.location, prov.subject_id, prov.location
                ),
            });
        }
        match s.tags()[0] {
            ChannelTag::Modality(m) => {
                if tagged.iter().any(|(seen, _)| *seen == m) {
                    return Err(Error::DuplicateModality(m.to_string()));
                }
                tagged.push((m, s));
            }
            ChannelTag::Plane(p) => {
                return Err(Error::ShapeMismatch {
                    reason: format!("plane-tagged channel {p} cannot join a modality stack"),
                });
            }
        }
    }
    tagged.sort_by_key(|(m, _)| m.ordinal());
    let mut pixels = Vec::with_capacity(tagged.len() * h * w);
    let mut tags = Vec::with_capacity(tagged.len());
    for (m, s) in &tagged {
        tags.push(ChannelTag::Modality(*m));
        pixels.extend_from_slice(s.channel(0));
    }
    let normalized = slices.iter().all(|s| s.normalized);
    let mut out = SliceStack::new(h, w, tags, pixels, prov)?;
    out.normalized = normalized;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_volume(dims: [usize; 3]) -> VolumeImage {
        let n = dims[0] * dims[1] * dims[2];
        let voxels = (0..n).map(|i| i as f32).collect();
        VolumeImage::new(dims, voxels, [1.0; 3], Modality::T1, "s0").unwrap()
    }

    #[test]
    fn extract_slice_matches_direct_indexing() {
        let vol = ramp_volume([3, 4, 5]);
        let s = extract_slice(&vol, Plane::Axial, 1).unwrap();
        assert_eq!((s.height(), s.width()), (4, 5));
        for r in 0..4 {
            for c in 0..5 {
                assert_eq!(s.at(0, r, c), vol.at(1, r, c));
            }
        }
        let s = extract_slice(&vol, Plane::Coronal, 2).unwrap();
        assert_eq!((s.height(), s.width()), (3, 5));
        for r in 0..3 {
            for c in 0..5 {
                assert_eq!(s.at(0, r, c), vol.at(r, 2, c));
            }
        }
        let s = extract_slice(&vol, Plane::Sagittal, 4).unwrap();
        assert_eq!((s.height(), s.width()), (3, 4));
        for r in 0..3 {
            for c in 0..4 {
                assert_eq!(s.at(0, r, c), vol.at(r, c, 4));
            }
        }
    }

    #[test]
    fn extract_slice_exhaustive_small_volumes() {
        // Element-wise agreement with 3D indexing for every plane and index.
        for dims in [[2, 3, 4], [5, 5, 5], [8, 8, 8]] {
            let vol = ramp_volume(dims);
            for plane in Plane::ALL {
                for idx in 0..dims[plane.axis()] {
                    let s = extract_slice(&vol, plane, idx).unwrap();
                    for r in 0..s.height() {
                        for c in 0..s.width() {
                            let expect = match plane {
                                Plane::Axial => vol.at(idx, r, c),
                                Plane::Coronal => vol.at(r, idx, c),
                                Plane::Sagittal => vol.at(r, c, idx),
                            };
                            assert_eq!(s.at(0, r, c), expect);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn extract_slice_bounds_and_constancy() {
        let vol = ramp_volume([3, 4, 5]);
        assert!(matches!(
            extract_slice(&vol, Plane::Axial, 3),
            Err(Error::IndexOutOfRange { index: 3, extent: 3 })
        ));
        let flat = VolumeImage::filled([3, 3, 3], 2.5, Modality::T2, "s1").unwrap();
        let s = extract_slice(&flat, Plane::Coronal, 1).unwrap();
        assert!(s.pixels().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn extract_voi_identity_and_block() {
        let vol = ramp_volume([4, 4, 4]);
        let full = extract_voi(&vol, &VoiSpec::full(&vol)).unwrap();
        assert_eq!(full, vol);

        let voi = VoiSpec::new([1, 1, 1], [3, 3, 3]);
        let block = extract_voi(&vol, &voi).unwrap();
        assert_eq!(block.dims(), [2, 2, 2]);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert_eq!(block.at(i, j, k), vol.at(i + 1, j + 1, k + 1));
                }
            }
        }

        let bad = VoiSpec::new([0, 0, 0], [5, 4, 4]);
        assert!(matches!(extract_voi(&vol, &bad), Err(Error::VoiOutOfBounds { .. })));
    }

    #[test]
    fn extract_voi_composes() {
        let vol = ramp_volume([6, 6, 6]);
        let outer = VoiSpec::new([1, 0, 2], [6, 5, 6]);
        let inner = VoiSpec::new([1, 1, 0], [4, 4, 3]);
        let two_step = extract_voi(&extract_voi(&vol, &outer).unwrap(), &inner).unwrap();
        let composed = VoiSpec::new([2, 1, 2], [5, 4, 5]);
        let one_step = extract_voi(&vol, &composed).unwrap();
        assert_eq!(two_step, one_step);
    }

    #[test]
    fn plane_triplet_native_size_matches_center_slices() {
        let vol = ramp_volume([4, 4, 4]);
        let stack = plane_triplet(&vol, &VoiSpec::full(&vol), 4).unwrap();
        assert_eq!(stack.channels(), 3);
        assert_eq!(
            stack.tags(),
            &[
                ChannelTag::Plane(Plane::Axial),
                ChannelTag::Plane(Plane::Coronal),
                ChannelTag::Plane(Plane::Sagittal)
            ]
        );
        // side == native extent: no resampling, channels equal center slices
        for (ci, plane) in Plane::ALL.iter().enumerate() {
            let center = extract_slice(&vol, *plane, 2).unwrap();
            for r in 0..4 {
                for c in 0..4 {
                    assert_eq!(stack.at(ci, r, c), center.at(0, r, c));
                }
            }
        }
    }

    #[test]
    fn plane_triplet_constant_voi() {
        let vol = VolumeImage::filled([5, 5, 5], 0.25, Modality::T1, "s2").unwrap();
        let stack = plane_triplet(&vol, &VoiSpec::full(&vol), 8).unwrap();
        assert!(stack.pixels().iter().all(|&v| v == 0.25));

        // degenerate 1x1x1 VOI upsamples to a constant
        let voi = VoiSpec::new([2, 2, 2], [3, 3, 3]);
        let stack = plane_triplet(&vol, &voi, 6).unwrap();
        assert_eq!((stack.height(), stack.width()), (6, 6));
        assert!(stack.pixels().iter().all(|&v| v == 0.25));
    }

    fn tagged_slice(m: Modality, h: usize, w: usize, base: f32) -> SliceStack {
        let pixels = (0..h * w).map(|i| base + i as f32).collect();
        SliceStack::new(h, w, vec![ChannelTag::Modality(m)], pixels, Provenance::new("s0", "axial:0"))
            .unwrap()
    }

    #[test]
    fn stack_modalities_canonical_order() {
        let t1 = tagged_slice(Modality::T1, 2, 3, 0.0);
        let fl = tagged_slice(Modality::Flair, 2, 3, 100.0);
        let a = stack_modalities(&[t1.clone(), fl.clone()]).unwrap();
        let b = stack_modalities(&[fl, t1]).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.tags(),
            &[ChannelTag::Modality(Modality::T1), ChannelTag::Modality(Modality::Flair)]
        );
        assert_eq!(a.at(1, 0, 0), 100.0);
    }

    #[test]
    fn stack_modalities_errors() {
        let t1 = tagged_slice(Modality::T1, 2, 3, 0.0);
        let single = stack_modalities(std::slice::from_ref(&t1)).unwrap();
        assert_eq!(single.pixels(), t1.pixels());

        let tall = tagged_slice(Modality::T2, 3, 3, 0.0);
        assert!(matches!(
            stack_modalities(&[t1.clone(), tall]),
            Err(Error::ShapeMismatch { .. })
        ));
        let dup = tagged_slice(Modality::T1, 2, 3, 5.0);
        assert!(matches!(
            stack_modalities(&[t1.clone(), dup]),
            Err(Error::DuplicateModality(_))
        ));
        let mut other = tagged_slice(Modality::T2, 2, 3, 5.0);
        other.provenance = Provenance::new("s9", "axial:0");
        assert!(matches!(
            stack_modalities(&[t1, other]),
            Err(Error::ProvenanceMismatch { .. })
        ));
    }

    #[test]
    fn volume_invariants_rejected() {
        assert!(VolumeImage::new([0, 2, 2], vec![], [1.0; 3], Modality::T1, "s").is_err());
        assert!(VolumeImage::new([1, 1, 1], vec![f32::NAN], [1.0; 3], Modality::T1, "s").is_err());
        assert!(VolumeImage::new([1, 1, 1], vec![0.0], [0.0, 1.0, 1.0], Modality::T1, "s").is_err());
    }

    #[test]
    fn normalization_range() {
        let vol = ramp_volume([2, 2, 2]);
        let n = vol.normalized();
        assert_eq!(n.voxels()[0], 0.0);
        assert_eq!(*n.voxels().last().unwrap(), 1.0);
        let flat = VolumeImage::filled([2, 2, 2], 7.0, Modality::T1, "s").unwrap();
        assert!(flat.normalized().voxels().iter().all(|&v| v == 0.0));
    }
}
