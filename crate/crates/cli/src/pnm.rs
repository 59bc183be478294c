//! Binary PNM codecs: 8-bit P6 PPM for RGB images and 16-bit P5 PGM for
//! depth and transmission maps (big-endian sample order, per the format).
//! Values map linearly between [0, 1] and the integer range.

use anyhow::{bail, Context, Result};

use dehaze_core::Tensor;

fn clamp01(v: f32) -> f32 {
    v.clamp(0.0, 1.0)
}

/// Encode a (1, 3, h, w) tensor in [0, 1] as a P6 PPM with maxval 255.
pub fn encode_ppm(img: &Tensor<f32>) -> Result<Vec<u8>> {
    let (n, c, h, w) = img.shape();
    if n != 1 || c != 3 {
        bail!("encode_ppm expects a (1, 3, h, w) tensor, got {:?}", img.shape());
    }
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(3 * h * w);
    let (r, g, b) = (img.plane(0, 0), img.plane(0, 1), img.plane(0, 2));
    for i in 0..h * w {
        out.push((clamp01(r[i]) * 255.0).round() as u8);
        out.push((clamp01(g[i]) * 255.0).round() as u8);
        out.push((clamp01(b[i]) * 255.0).round() as u8);
    }
    Ok(out)
}

/// Encode a (1, 1, h, w) tensor in [0, 1] as a P5 PGM with maxval 65535.
pub fn encode_pgm16(map: &Tensor<f32>) -> Result<Vec<u8>> {
    let (n, c, h, w) = map.shape();
    if n != 1 || c != 1 {
        bail!("encode_pgm16 expects a (1, 1, h, w) tensor, got {:?}", map.shape());
    }
    let mut out = format!("P5\n{w} {h}\n65535\n").into_bytes();
    out.reserve(2 * h * w);
    for &v in map.plane(0, 0) {
        let q = (clamp01(v) * 65535.0).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    Ok(out)
}

struct HeaderParser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderParser<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        HeaderParser { bytes, pos: 0 }
    }

    /// Next whitespace-delimited token, skipping `#` comments.
    fn token(&mut self) -> Result<&'a [u8]> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            bail!("truncated PNM header");
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .with_context(|| format!("bad number in PNM header: {:?}", String::from_utf8_lossy(tok)))
    }

    /// Consume the single whitespace byte that terminates the header.
    fn finish_header(&mut self) -> Result<usize> {
        if self.pos >= self.bytes.len() || !self.bytes[self.pos].is_ascii_whitespace() {
            bail!("missing whitespace after PNM maxval");
        }
        Ok(self.pos + 1)
    }
}

/// Decode a P6 PPM with maxval 255 into a (1, 3, h, w) tensor in [0, 1].
pub fn decode_ppm(bytes: &[u8]) -> Result<Tensor<f32>> {
    let mut p = HeaderParser::new(bytes);
    if p.token()? != b"P6" {
        bail!("not a P6 PPM");
    }
    let w = p.number()?;
    let h = p.number()?;
    let maxval = p.number()?;
    if maxval != 255 {
        bail!("unsupported PPM maxval {maxval} (expected 255)");
    }
    let data_start = p.finish_header()?;
    let need = 3 * h * w;
    let data = bytes
        .get(data_start..data_start + need)
        .with_context(|| format!("PPM truncated: need {need} pixel bytes"))?;
    let mut img = Tensor::zeros(1, 3, h, w);
    for ch in 0..3 {
        let plane = img.plane_mut(0, ch);
        for i in 0..h * w {
            plane[i] = data[3 * i + ch] as f32 / 255.0;
        }
    }
    Ok(img)
}

/// Decode a P5 PGM with maxval 65535 into a (1, 1, h, w) tensor in [0, 1].
pub fn decode_pgm16(bytes: &[u8]) -> Result<Tensor<f32>> {
    let mut p = HeaderParser::new(bytes);
    if p.token()? != b"P5" {
        bail!("not a P5 PGM");
    }
    let w = p.number()?;
    let h = p.number()?;
    let maxval = p.number()?;
    if maxval != 65535 {
        bail!("unsupported PGM maxval {maxval} (expected 65535)");
    }
    let data_start = p.finish_header()?;
    let need = 2 * h * w;
    let data = bytes
        .get(data_start..data_start + need)
        .with_context(|| format!("PGM truncated: need {need} sample bytes"))?;
    let mut map = Tensor::zeros(1, 1, h, w);
    let plane = map.plane_mut(0, 0);
    for i in 0..h * w {
        let v = u16::from_be_bytes([data[2 * i], data[2 * i + 1]]);
        plane[i] = v as f32 / 65535.0;
    }
    Ok(map)
}
