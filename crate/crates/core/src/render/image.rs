//! 8-bit RGB raster with binary PPM (P6) in and out.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    /// rows top to bottom, pixels left to right
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0; 3 * width * height] }
    }

    /// Fills pixel (i, j) = (column, row) from `f`, rows in parallel.
    pub fn from_fn<F>(width: usize, height: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> Rgb + Sync,
    {
        let mut data = vec![0; 3 * width * height];
        data.par_chunks_mut((3 * width).max(1)).enumerate().for_each(|(j, row)| {
            for i in 0..width {
                row[3 * i..3 * i + 3].copy_from_slice(&f(i, j));
            }
        });
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, i: usize, j: usize) -> Rgb {
        let k = 3 * (j * self.width + i);
        [self.data[k], self.data[k + 1], self.data[k + 2]]
    }

    pub fn set(&mut self, i: usize, j: usize, c: Rgb) {
        let k = 3 * (j * self.width + i);
        self.data[k..k + 3].copy_from_slice(&c);
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn write_ppm<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.to_ppm())?;
        Ok(())
    }

    pub fn read_ppm<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        parse_ppm(&bytes)
    }

    /// Writes PPM, or PNG when the extension says so.
    pub fn save(&self, path: &Path) -> Result<()> {
        let png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if png {
            let w = u32::try_from(self.width).map_err(|_| Error::InvalidArgument("image too wide".into()))?;
            let h = u32::try_from(self.height).map_err(|_| Error::InvalidArgument("image too tall".into()))?;
            image::save_buffer(path, &self.data, w, h, image::ExtendedColorType::Rgb8)
                .map_err(|e| Error::Io(e.to_string()))
        } else {
            self.write_ppm(std::io::BufWriter::new(std::fs::File::create(path)?))
        }
    }
}

fn parse_ppm(bytes: &[u8]) -> Result<ImageBuffer> {
    let bad = |what: &str| Error::Parse(format!("ppm: {what}"));
    let mut pos = 0;
    let mut fields = Vec::new();
    // magic, width, height, maxval; '#' comments allowed between fields
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not ascii"))?.to_string());
    }
    if fields[0] != "P6" {
        return Err(bad("only binary P6 is supported"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad number"));
    let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 255 {
        return Err(bad("maxval must be 255"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = 3 * width * height;
    if bytes.len() < pos + n {
        return Err(bad("truncated raster"));
    }
    Ok(ImageBuffer { width, height, data: bytes[pos..pos + n].to_vec() })
}
