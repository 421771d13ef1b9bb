//! Raster images: loading, saving, color conversion, bilinear resizing.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageReader, Luma};

use crate::color;
use crate::error::{Error, Result};

/// Color space tag carried by an [`Image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorSpace {
    /// Gamma-encoded sRGB, samples in [0,1], 3 channels.
    Srgb,
    /// CIELAB, L in [0,100], a/b in [-128,127], 3 channels.
    Lab,
    /// Single-channel gray, samples in [0,1].
    Gray,
}

impl ColorSpace {
    fn name(self) -> &'static str {
        match self {
            ColorSpace::Srgb => "sRGB",
            ColorSpace::Lab => "CIELAB",
            ColorSpace::Gray => "grayscale",
        }
    }
}

/// Row-major floating-point raster with an explicit color space.
///
/// Samples are stored interleaved: `data[(y * width + x) * channels + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
    colorspace: ColorSpace,
}

impl Image {
    /// Build an image, validating sample count and per-colorspace sample range.
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
        colorspace: ColorSpace,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidImage {
                reason: format!("dimensions must be positive, got {height}x{width}"),
            });
        }
        let expected_channels = match colorspace {
            ColorSpace::Gray => 1,
            ColorSpace::Srgb | ColorSpace::Lab => 3,
        };
        if channels != expected_channels {
            return Err(Error::InvalidImage {
                reason: format!(
                    "{} images have {expected_channels} channel(s), got {channels}",
                    colorspace.name()
                ),
            });
        }
        if data.len() != height * width * channels {
            return Err(Error::InvalidImage {
                reason: format!(
                    "expected {} samples for {height}x{width}x{channels}, got {}",
                    height * width * channels,
                    data.len()
                ),
            });
        }
        for (i, &s) in data.iter().enumerate() {
            let ok = match (colorspace, i % channels) {
                (ColorSpace::Srgb | ColorSpace::Gray, _) => (0.0..=1.0).contains(&s),
                (ColorSpace::Lab, 0) => (0.0..=100.0).contains(&s),
                (ColorSpace::Lab, _) => (-128.0..=127.0).contains(&s),
            };
            if !ok {
                return Err(Error::InvalidImage {
                    reason: format!("sample {i} = {s} outside the {} range", colorspace.name()),
                });
            }
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
            colorspace,
        })
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

    pub fn colorspace(&self) -> ColorSpace {
        self.colorspace
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Sample accessor; `c` must be below `channels`.
    #[inline]
    pub fn sample(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Write as PNG: 8-bit RGB for sRGB images, 8-bit grayscale for gray
    /// images. Quantization is round-half-up.
    pub fn save_png<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        match self.colorspace {
            ColorSpace::Gray => save_gray(&self.data, self.height, self.width, path),
            ColorSpace::Srgb => {
                let bytes: Vec<u8> = self.data.iter().map(|&s| quantize_u8(s)).collect();
                let buf: ImageBuffer<image::Rgb<u8>, Vec<u8>> =
                    ImageBuffer::from_raw(self.width as u32, self.height as u32, bytes)
                        .expect("validated dimensions");
                buf.save_with_format(path, image::ImageFormat::Png)
                    .map_err(|e| Error::Io {
                        path: path.into(),
                        source: std::io::Error::other(e),
                    })
            }
            ColorSpace::Lab => Err(Error::WrongColorSpace {
                expected: "sRGB or grayscale".into(),
                found: "CIELAB".into(),
            }),
        }
    }

    /// Expand a grayscale image to 3-channel sRGB by channel replication.
    /// sRGB images pass through unchanged.
    pub fn to_srgb3(&self) -> Result<Image> {
        match self.colorspace {
            ColorSpace::Srgb => Ok(self.clone()),
            ColorSpace::Gray => {
                let mut data = Vec::with_capacity(self.data.len() * 3);
                for &v in &self.data {
                    data.extend_from_slice(&[v, v, v]);
                }
                Image::new(self.height, self.width, 3, data, ColorSpace::Srgb)
            }
            ColorSpace::Lab => Err(Error::WrongColorSpace {
                expected: "sRGB or grayscale".into(),
                found: "CIELAB".into(),
            }),
        }
    }
}

/// Load a PNG or JPEG file as an sRGB (or grayscale) image with samples in [0,1].
pub fn load_image<P: AsRef<Path>>(path: P) -> Result<Image> {
    let path = path.as_ref();
    let reader = ImageReader::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound { path: path.into() },
        _ => Error::Io {
            path: path.into(),
            source: e,
        },
    })?;
    let reader = reader
        .with_guessed_format()
        .map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?;
    match reader.format() {
        Some(image::ImageFormat::Png) | Some(image::ImageFormat::Jpeg) => {}
        _ => return Err(Error::UnsupportedFormat { path: path.into() }),
    }
    let decoded = reader.decode().map_err(|e| Error::CorruptData {
        path: path.into(),
        reason: e.to_string(),
    })?;
    image_from_dynamic(decoded)
}

fn image_from_dynamic(decoded: DynamicImage) -> Result<Image> {
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    match decoded {
        DynamicImage::ImageLuma8(buf) => {
            let data = buf.into_raw().iter().map(|&v| v as f64 / 255.0).collect();
            Image::new(h, w, 1, data, ColorSpace::Gray)
        }
        DynamicImage::ImageLumaA8(buf) => {
            let data = buf
                .into_raw()
                .chunks_exact(2)
                .map(|px| px[0] as f64 / 255.0)
                .collect();
            Image::new(h, w, 1, data, ColorSpace::Gray)
        }
        DynamicImage::ImageLuma16(buf) => {
            let data = buf.into_raw().iter().map(|&v| v as f64 / 65535.0).collect();
            Image::new(h, w, 1, data, ColorSpace::Gray)
        }
        DynamicImage::ImageRgb8(buf) => {
            let data = buf.into_raw().iter().map(|&v| v as f64 / 255.0).collect();
            Image::new(h, w, 3, data, ColorSpace::Srgb)
        }
        DynamicImage::ImageRgba8(buf) => {
            let data = buf
                .into_raw()
                .chunks_exact(4)
                .flat_map(|px| px[..3].iter().map(|&v| v as f64 / 255.0))
                .collect();
            Image::new(h, w, 3, data, ColorSpace::Srgb)
        }
        DynamicImage::ImageRgb16(buf) => {
            let data = buf.into_raw().iter().map(|&v| v as f64 / 65535.0).collect();
            Image::new(h, w, 3, data, ColorSpace::Srgb)
        }
        other => {
            // Remaining variants (f32, 16-bit with alpha) are rare; go through rgb8.
            let buf = other.to_rgb8();
            let data = buf.into_raw().iter().map(|&v| v as f64 / 255.0).collect();
            Image::new(h, w, 3, data, ColorSpace::Srgb)
        }
    }
}

/// Write samples in [0,1] as an 8-bit grayscale PNG. Quantization is
/// round-half-up: byte = round(s * 255).
pub fn save_gray<P: AsRef<Path>>(
    samples: &[f64],
    height: usize,
    width: usize,
    path: P,
) -> Result<()> {
    let path = path.as_ref();
    if samples.len() != height * width {
        return Err(Error::InvalidMap {
            reason: format!(
                "expected {} samples for {height}x{width}, got {}",
                height * width,
                samples.len()
            ),
        });
    }
    let bytes: Vec<u8> = samples.iter().map(|&s| quantize_u8(s)).collect();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(width as u32, height as u32, bytes).expect("sized above");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Io {
            path: path.into(),
            source: std::io::Error::other(e),
        })
}

/// round(s * 255) with round-half-up, clamped to [0,255].
#[inline]
pub fn quantize_u8(s: f64) -> u8 {
    (s * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Convert an sRGB image to CIELAB (D65).
pub fn rgb_to_lab(img: &Image) -> Result<Image> {
    if img.colorspace != ColorSpace::Srgb {
        return Err(Error::WrongColorSpace {
            expected: "sRGB".into(),
            found: img.colorspace.name().into(),
        });
    }
    let mut data = Vec::with_capacity(img.data.len());
    for px in img.data.chunks_exact(3) {
        data.extend_from_slice(&color::srgb_to_lab(px[0], px[1], px[2]));
    }
    Image::new(img.height, img.width, 3, data, ColorSpace::Lab)
}

/// Bilinear resampling with a corner-aligned grid: the first and last input
/// samples along each axis map onto the first and last output samples.
pub(crate) fn bilinear_resample(
    data: &[f64],
    in_h: usize,
    in_w: usize,
    channels: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<f64> {
    let scale = |i: usize, n_out: usize, n_in: usize| -> f64 {
        if n_out <= 1 || n_in <= 1 {
            0.0
        } else {
            i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64
        }
    };
    let mut out = vec![0.0; out_h * out_w * channels];
    for oy in 0..out_h {
        let sy = scale(oy, out_h, in_h);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(in_h - 1);
        let fy = sy - y0 as f64;
        for ox in 0..out_w {
            let sx = scale(ox, out_w, in_w);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(in_w - 1);
            let fx = sx - x0 as f64;
            for c in 0..channels {
                let v00 = data[(y0 * in_w + x0) * channels + c];
                let v01 = data[(y0 * in_w + x1) * channels + c];
                let v10 = data[(y1 * in_w + x0) * channels + c];
                let v11 = data[(y1 * in_w + x1) * channels + c];
                let top = v00 * (1.0 - fx) + v01 * fx;
                let bottom = v10 * (1.0 - fx) + v11 * fx;
                out[(oy * out_w + ox) * channels + c] = top * (1.0 - fy) + bottom * fy;
            }
        }
    }
    out
}

/// Resize an image with corner-aligned bilinear interpolation.
pub fn resize_bilinear(img: &Image, out_h: usize, out_w: usize) -> Result<Image> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::ZeroSizeOutput {
            height: out_h,
            width: out_w,
        });
    }
    let data = bilinear_resample(&img.data, img.height, img.width, img.channels, out_h, out_w);
    Image::new(out_h, out_w, img.channels, data, img.colorspace)
}
