use super::tables::{self, ZIGZAG};
use super::{check_quality, fdct};
use crate::{Error, Result};

struct BitWriter {
    out: Vec<u8>,
    acc: u32,
    nbits: u32,
}

impl BitWriter {
    fn new(out: Vec<u8>) -> Self {
        Self {
            out,
            acc: 0,
            nbits: 0,
        }
    }

    fn put(&mut self, code: u16, len: u8) {
        debug_assert!(len <= 16);
        self.acc = (self.acc << len) | u32::from(code) & ((1u32 << len) - 1);
        self.nbits += u32::from(len);
        while self.nbits >= 8 {
            let byte = (self.acc >> (self.nbits - 8)) as u8;
            self.out.push(byte);
            if byte == 0xFF {
                self.out.push(0x00);
            }
            self.nbits -= 8;
        }
        self.acc &= (1u32 << self.nbits) - 1;
    }

    /// Pads the final partial byte with 1-bits.
    fn finish(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            let pad = 8 - self.nbits as u8;
            self.put((1u16 << pad) - 1, pad);
        }
        self.out
    }
}

/// Magnitude category and the low-order bits emitted after its code.
fn category(v: i32) -> (u8, u16) {
    if v == 0 {
        return (0, 0);
    }
    let cat = 32 - v.unsigned_abs().leading_zeros();
    let bits = if v < 0 { v - 1 } else { v };
    (cat as u8, (bits as u32 & ((1u32 << cat) - 1)) as u16)
}

struct Component {
    quant: [u16; 64],
    dc: [(u16, u8); 256],
    ac: [(u16, u8); 256],
    pred: i32,
}

impl Component {
    fn encode_block(&mut self, block: &mut [f64; 64], w: &mut BitWriter) {
        for v in block.iter_mut() {
            *v -= 128.0;
        }
        fdct(block);
        let mut zz = [0i32; 64];
        for (k, &n) in ZIGZAG.iter().enumerate() {
            zz[k] = (block[n] / f64::from(self.quant[n])).round() as i32;
        }

        let diff = zz[0] - self.pred;
        self.pred = zz[0];
        let (cat, bits) = category(diff);
        let (code, len) = self.dc[usize::from(cat)];
        w.put(code, len);
        w.put(bits, cat);

        let mut run = 0u8;
        for &coef in &zz[1..] {
            if coef == 0 {
                run += 1;
                continue;
            }
            while run >= 16 {
                let (code, len) = self.ac[0xF0];
                w.put(code, len);
                run -= 16;
            }
            let (cat, bits) = category(coef);
            let (code, len) = self.ac[usize::from(run << 4 | cat)];
            w.put(code, len);
            w.put(bits, cat);
            run = 0;
        }
        if run > 0 {
            let (code, len) = self.ac[0x00];
            w.put(code, len);
        }
    }
}

fn segment(out: &mut Vec<u8>, marker: u8, payload: &[u8]) {
    out.extend_from_slice(&[0xFF, marker]);
    out.extend_from_slice(&((payload.len() + 2) as u16).to_be_bytes());
    out.extend_from_slice(payload);
}

fn dqt(out: &mut Vec<u8>, id: u8, table: &[u16; 64]) {
    let mut p = vec![id];
    p.extend(ZIGZAG.iter().map(|&n| table[n] as u8));
    segment(out, 0xDB, &p);
}

fn dht(out: &mut Vec<u8>, class_id: u8, bits: &[u8; 16], vals: &[u8]) {
    let mut p = vec![class_id];
    p.extend_from_slice(bits);
    p.extend_from_slice(vals);
    segment(out, 0xC4, &p);
}

/// Encodes interleaved RGB as a three-component baseline JPEG with 2×2 luma
/// and 1×1 chroma sampling (4:2:0). Edges are replicated out to whole MCUs.
pub fn encode(rgb: &[u8], width: usize, height: usize, quality: u8) -> Result<Vec<u8>> {
    check_quality(quality)?;
    if width == 0 || height == 0 || width > 0xFFFF || height > 0xFFFF {
        return Err(Error::Jpeg(format!("unsupported size {width}x{height}")));
    }
    if rgb.len() != width * height * 3 {
        return Err(Error::Dimension(format!(
            "{} bytes for a {width}x{height} RGB raster",
            rgb.len()
        )));
    }
    let luma_q = tables::scaled_quant_table(&tables::LUMA_QUANT, quality);
    let chroma_q = tables::scaled_quant_table(&tables::CHROMA_QUANT, quality);

    let mcus_x = width.div_ceil(16);
    let mcus_y = height.div_ceil(16);
    let (pw, ph) = (mcus_x * 16, mcus_y * 16);
    let mut planes = [vec![0.0; pw * ph], vec![0.0; pw * ph], vec![0.0; pw * ph]];
    for y in 0..ph {
        let sy = y.min(height - 1);
        for x in 0..pw {
            let sx = x.min(width - 1);
            let i = (sy * width + sx) * 3;
            let (r, g, b) = (f64::from(rgb[i]), f64::from(rgb[i + 1]), f64::from(rgb[i + 2]));
            planes[0][y * pw + x] = 0.299 * r + 0.587 * g + 0.114 * b;
            planes[1][y * pw + x] = -0.168_735_892 * r - 0.331_264_108 * g + 0.5 * b + 128.0;
            planes[2][y * pw + x] = 0.5 * r - 0.418_687_589 * g - 0.081_312_411 * b + 128.0;
        }
    }
    let (cw, ch) = (pw / 2, ph / 2);
    let downsample = |p: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; cw * ch];
        for y in 0..ch {
            for x in 0..cw {
                let i = 2 * y * pw + 2 * x;
                out[y * cw + x] = (p[i] + p[i + 1] + p[i + pw] + p[i + pw + 1]) / 4.0;
            }
        }
        out
    };
    let cb = downsample(&planes[1]);
    let cr = downsample(&planes[2]);

    let mut out = vec![0xFF, 0xD8];
    segment(&mut out, 0xE0, b"JFIF\0\x01\x01\0\0\x01\0\x01\0\0");
    dqt(&mut out, 0, &luma_q);
    dqt(&mut out, 1, &chroma_q);
    let [hh, hl] = (height as u16).to_be_bytes();
    let [wh, wl] = (width as u16).to_be_bytes();
    segment(
        &mut out,
        0xC0,
        &[8, hh, hl, wh, wl, 3, 1, 0x22, 0, 2, 0x11, 1, 3, 0x11, 1],
    );
    dht(&mut out, 0x00, &tables::DC_LUMA_BITS, &tables::DC_LUMA_VALS);
    dht(&mut out, 0x10, &tables::AC_LUMA_BITS, &tables::AC_LUMA_VALS);
    dht(&mut out, 0x01, &tables::DC_CHROMA_BITS, &tables::DC_CHROMA_VALS);
    dht(&mut out, 0x11, &tables::AC_CHROMA_BITS, &tables::AC_CHROMA_VALS);
    segment(&mut out, 0xDA, &[3, 1, 0x00, 2, 0x11, 3, 0x11, 0, 63, 0]);

    let luma_dc = tables::huffman_codes(&tables::DC_LUMA_BITS, &tables::DC_LUMA_VALS);
    let luma_ac = tables::huffman_codes(&tables::AC_LUMA_BITS, &tables::AC_LUMA_VALS);
    let chroma_dc = tables::huffman_codes(&tables::DC_CHROMA_BITS, &tables::DC_CHROMA_VALS);
    let chroma_ac = tables::huffman_codes(&tables::AC_CHROMA_BITS, &tables::AC_CHROMA_VALS);
    let mut comps = [
        Component { quant: luma_q, dc: luma_dc, ac: luma_ac, pred: 0 },
        Component { quant: chroma_q, dc: chroma_dc, ac: chroma_ac, pred: 0 },
        Component { quant: chroma_q, dc: chroma_dc, ac: chroma_ac, pred: 0 },
    ];

    let mut w = BitWriter::new(out);
    let mut block = [0.0; 64];
    let load = |block: &mut [f64; 64], plane: &[f64], stride: usize, x0: usize, y0: usize| {
        for y in 0..8 {
            block[y * 8..y * 8 + 8].copy_from_slice(&plane[(y0 + y) * stride + x0..][..8]);
        }
    };
    for my in 0..mcus_y {
        for mx in 0..mcus_x {
            for (by, bx) in [(0, 0), (0, 8), (8, 0), (8, 8)] {
                load(&mut block, &planes[0], pw, mx * 16 + bx, my * 16 + by);
                comps[0].encode_block(&mut block, &mut w);
            }
            load(&mut block, &cb, cw, mx * 8, my * 8);
            comps[1].encode_block(&mut block, &mut w);
            load(&mut block, &cr, cw, mx * 8, my * 8);
            comps[2].encode_block(&mut block, &mut w);
        }
    }
    let mut out = w.finish();
    out.extend_from_slice(&[0xFF, 0xD9]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categories() {
        assert_eq!(category(0), (0, 0));
        assert_eq!(category(1), (1, 1));
        assert_eq!(category(-1), (1, 0));
        assert_eq!(category(-3), (2, 0));
        assert_eq!(category(5), (3, 5));
        assert_eq!(category(-5), (3, 2));
    }

    #[test]
    fn byte_stuffing() {
        let mut w = BitWriter::new(Vec::new());
        w.put(0xFF, 8);
        w.put(0b1, 1);
        assert_eq!(w.finish(), vec![0xFF, 0x00, 0xFF, 0x00]);
    }

    #[test]
    fn odd_sizes_encode() {
        let rgb: Vec<u8> = (0..17 * 9 * 3).map(|i| (i % 256) as u8).collect();
        let bytes = encode(&rgb, 17, 9, 50).unwrap();
        let d = super::super::decode(&bytes).unwrap();
        assert_eq!((d.width, d.height, d.components), (17, 9, 3));
    }
}
