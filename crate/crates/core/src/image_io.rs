//! Reading and writing PNG / PGM / PPM images as normalized float buffers.

use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer as RawBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::tensor::{BlurKernel, Shape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_code(self) -> f32 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }

    pub fn bits(self) -> u8 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }

    pub fn from_bits(bits: u8) -> Option<Self> {
        match bits {
            8 => Some(BitDepth::Eight),
            16 => Some(BitDepth::Sixteen),
            _ => None,
        }
    }
}

/// A planar (channel-major) image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
    pub source_bit_depth: BitDepth,
}

impl ImageBuffer {
    /// Values are clamped into `[0, 1]`; non-finite values are rejected.
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidShape {
                op: "ImageBuffer::new",
                reason: format!("channels must be 1 or 3, got {channels}"),
            });
        }
        if data.len() != height * width * channels {
            return Err(Error::InvalidShape {
                op: "ImageBuffer::new",
                reason: format!("{} values for {height}×{width}×{channels}", data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image data".into()));
        }
        let data = data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok(ImageBuffer {
            height,
            width,
            channels,
            data,
            source_bit_depth: BitDepth::Eight,
        })
    }

    /// Copies a `[1, c, h, w]` tensor (c ∈ {1, 3}), clamping into `[0, 1]`.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let s = t.shape();
        if s.n() != 1 {
            return Err(Error::InvalidShape {
                op: "ImageBuffer::from_tensor",
                reason: format!("expected batch 1, got {s}"),
            });
        }
        ImageBuffer::new(s.h(), s.w(), s.c(), t.data().to_vec())
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            Shape::new(1, self.channels, self.height, self.width),
            self.data.clone(),
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let p = self.height * self.width;
        &self.data[c * p..(c + 1) * p]
    }

    /// Center crop to `h × w`.
    pub fn center_crop(&self, h: usize, w: usize) -> Result<Self> {
        if h > self.height || w > self.width {
            return Err(Error::InvalidShape {
                op: "center_crop",
                reason: format!("cannot crop {}×{} to {h}×{w}", self.height, self.width),
            });
        }
        let (oy, ox) = ((self.height - h) / 2, (self.width - w) / 2);
        let mut data = Vec::with_capacity(h * w * self.channels);
        for c in 0..self.channels {
            let p = self.plane(c);
            for y in oy..oy + h {
                data.extend_from_slice(&p[y * self.width + ox..y * self.width + ox + w]);
            }
        }
        Ok(ImageBuffer {
            height: h,
            width: w,
            channels: self.channels,
            data,
            source_bit_depth: self.source_bit_depth,
        })
    }

    /// Three identical channels collapse to one; anything else in color stays.
    fn collapse_gray(self) -> std::result::Result<Self, Self> {
        if self.channels == 1 {
            return Ok(self);
        }
        let p = self.height * self.width;
        let (r, rest) = self.data.split_at(p);
        let (g, b) = rest.split_at(p);
        if r != g || r != b {
            return Err(self);
        }
        Ok(ImageBuffer {
            channels: 1,
            data: r.to_vec(),
            ..self
        })
    }

    fn replicate_rgb(self) -> Self {
        if self.channels == 3 {
            return self;
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&self.data);
        ImageBuffer {
            channels: 3,
            data,
            ..self
        }
    }

    fn codes(&self, depth: BitDepth) -> Vec<u16> {
        let p = self.height * self.width;
        let max = depth.max_code();
        let mut out = Vec::with_capacity(self.data.len());
        for k in 0..p {
            for c in 0..self.channels {
                let v = self.data[c * p + k].clamp(0.0, 1.0);
                out.push((v * max).round() as u16);
            }
        }
        out
    }
}

fn image_err(path: &Path, reason: impl ToString) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

/// Loads a PNG or binary PGM/PPM (8 or 16 bit). Alpha is dropped.
pub fn load_image(path: &Path) -> Result<ImageBuffer> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory(&bytes).map_err(|e| image_err(path, e))?;
    let sixteen = matches!(
        img,
        DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
    );
    let (w, h) = (img.width() as usize, img.height() as usize);
    let color = img.color().has_color();
    let channels = if color { 3 } else { 1 };
    let interleaved: Vec<f32> = match (sixteen, color) {
        (false, false) => img.to_luma8().into_raw().into_iter().map(|v| v as f32 / 255.0).collect(),
        (false, true) => img.to_rgb8().into_raw().into_iter().map(|v| v as f32 / 255.0).collect(),
        (true, false) => img.to_luma16().into_raw().into_iter().map(|v| v as f32 / 65535.0).collect(),
        (true, true) => img.to_rgb16().into_raw().into_iter().map(|v| v as f32 / 65535.0).collect(),
    };
    let p = w * h;
    let mut data = vec![0.0f32; interleaved.len()];
    for k in 0..p {
        for c in 0..channels {
            data[c * p + k] = interleaved[k * channels + c];
        }
    }
    let mut buf = ImageBuffer::new(h, w, channels, data).map_err(|e| image_err(path, e))?;
    buf.source_bit_depth = if sixteen { BitDepth::Sixteen } else { BitDepth::Eight };
    Ok(buf)
}

/// Writes PNG, PGM or PPM (chosen by extension) with round-to-nearest
/// quantization of clamped values.
pub fn save_image(img: &ImageBuffer, path: &Path, depth: BitDepth) -> Result<()> {
    let (w, h) = (img.width as u32, img.height as u32);
    let codes = img.codes(depth);
    let shape_err = || image_err(path, "buffer size does not match image dimensions");
    let dynamic = match (depth, img.channels) {
        (BitDepth::Eight, 1) => DynamicImage::ImageLuma8(
            RawBuffer::<Luma<u8>, _>::from_raw(w, h, codes.iter().map(|&v| v as u8).collect()).ok_or_else(shape_err)?,
        ),
        (BitDepth::Eight, _) => DynamicImage::ImageRgb8(
            RawBuffer::<Rgb<u8>, _>::from_raw(w, h, codes.iter().map(|&v| v as u8).collect()).ok_or_else(shape_err)?,
        ),
        (BitDepth::Sixteen, 1) => {
            DynamicImage::ImageLuma16(RawBuffer::<Luma<u16>, _>::from_raw(w, h, codes).ok_or_else(shape_err)?)
        }
        (BitDepth::Sixteen, _) => {
            DynamicImage::ImageRgb16(RawBuffer::<Rgb<u16>, _>::from_raw(w, h, codes).ok_or_else(shape_err)?)
        }
    };
    dynamic.save(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => image_err(path, other),
    })
}

/// The training input: one single-channel modality image, an RGB guide
/// exactly `r` times larger, and an optional blur kernel.
#[derive(Clone, Debug)]
pub struct ImagePair {
    pub modality: ImageBuffer,
    pub guide: ImageBuffer,
    pub r: usize,
    pub kernel: Option<BlurKernel>,
}

impl ImagePair {
    /// Validates the inputs and center-crops the guide to exactly
    /// `r·H × r·W`. A grayscale guide is replicated to three channels.
    pub fn new(modality: ImageBuffer, guide: ImageBuffer, r: usize, kernel: Option<BlurKernel>) -> Result<Self> {
        if r < 2 {
            return Err(Error::InvalidScale(format!("scale must be at least 2, got {r}")));
        }
        let modality = modality
            .collapse_gray()
            .map_err(|_| Error::InvalidPair("modality image must be single-channel".into()))?;
        let (th, tw) = (modality.height * r, modality.width * r);
        if guide.height < th || guide.width < tw {
            return Err(Error::InvalidPair(format!(
                "guide is {}×{} but {r}× the modality needs at least {th}×{tw}",
                guide.height, guide.width
            )));
        }
        let guide = guide.replicate_rgb().center_crop(th, tw)?;
        Ok(ImagePair {
            modality,
            guide,
            r,
            kernel,
        })
    }

    pub fn modality_tensor(&self) -> Tensor {
        self.modality.to_tensor()
    }

    pub fn guide_tensor(&self) -> Tensor {
        self.guide.to_tensor()
    }
}

pub fn make_pair(modality_path: &Path, guide_path: &Path, r: usize, kernel_path: Option<&Path>) -> Result<ImagePair> {
    let modality = load_image(modality_path)?;
    let guide = load_image(guide_path)?;
    let kernel = kernel_path.map(BlurKernel::load).transpose()?;
    ImagePair::new(modality, guide, r, kernel).map_err(|e| match e {
        Error::InvalidPair(reason) => Error::InvalidPair(format!(
            "{} + {}: {reason}",
            modality_path.display(),
            guide_path.display()
        )),
        other => other,
    })
}

/// `<stem><suffix>.<ext>` next to `path`, e.g. `sr.png` → `sr_overlay.png`.
pub fn sibling_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("png");
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}
