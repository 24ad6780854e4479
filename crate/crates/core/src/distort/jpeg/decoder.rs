use super::idct;
use super::tables::ZIGZAG;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Decoded {
    pub width: usize,
    pub height: usize,
    /// 1 (grayscale) or 3 (RGB).
    pub components: usize,
    /// Interleaved samples, `width * height * components` bytes.
    pub pixels: Vec<u8>,
}

#[derive(Clone)]
struct Huffman {
    maxcode: [i32; 17],
    valptr: [i32; 17],
    mincode: [i32; 17],
    vals: Vec<u8>,
}

impl Huffman {
    fn new(bits: &[u8], vals: &[u8]) -> Self {
        let mut h = Huffman {
            maxcode: [-1; 17],
            valptr: [0; 17],
            mincode: [0; 17],
            vals: vals.to_vec(),
        };
        let mut code = 0i32;
        let mut k = 0i32;
        for len in 1..=16 {
            let count = i32::from(bits[len - 1]);
            if count > 0 {
                h.valptr[len] = k;
                h.mincode[len] = code;
                code += count;
                k += count;
                h.maxcode[len] = code - 1;
            }
            code <<= 1;
        }
        h
    }
}

struct Frame {
    width: usize,
    height: usize,
    comps: Vec<FrameComponent>,
}

struct FrameComponent {
    id: u8,
    h: usize,
    v: usize,
    tq: usize,
}

struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
    acc: u32,
    nbits: u32,
}

impl<'a> BitReader<'a> {
    fn bit(&mut self) -> Result<u32> {
        if self.nbits == 0 {
            let byte = *self
                .data
                .get(self.pos)
                .ok_or_else(|| Error::Jpeg("entropy-coded data ended early".into()))?;
            self.pos += 1;
            if byte == 0xFF {
                match self.data.get(self.pos) {
                    Some(0x00) => self.pos += 1,
                    _ => return Err(Error::Jpeg("unexpected marker in scan data".into())),
                }
            }
            self.acc = u32::from(byte);
            self.nbits = 8;
        }
        self.nbits -= 1;
        Ok((self.acc >> self.nbits) & 1)
    }

    fn bits(&mut self, n: u8) -> Result<i32> {
        let mut v = 0i32;
        for _ in 0..n {
            v = (v << 1) | self.bit()? as i32;
        }
        Ok(v)
    }

    fn symbol(&mut self, h: &Huffman) -> Result<u8> {
        let mut code = 0i32;
        for len in 1..=16 {
            code = (code << 1) | self.bit()? as i32;
            if code <= h.maxcode[len] {
                let idx = h.valptr[len] + code - h.mincode[len];
                return h
                    .vals
                    .get(idx as usize)
                    .copied()
                    .ok_or_else(|| Error::Jpeg("bad huffman table".into()));
            }
        }
        Err(Error::Jpeg("invalid huffman code".into()))
    }
}

fn extend(v: i32, cat: u8) -> i32 {
    if cat == 0 {
        0
    } else if v < (1 << (cat - 1)) {
        v - (1 << cat) + 1
    } else {
        v
    }
}

fn read_u16(data: &[u8], pos: usize) -> Result<usize> {
    match data.get(pos..pos + 2) {
        Some(b) => Ok(usize::from(u16::from_be_bytes([b[0], b[1]]))),
        None => Err(Error::Jpeg("truncated segment header".into())),
    }
}

pub fn decode(data: &[u8]) -> Result<Decoded> {
    if data.get(..2) != Some(&[0xFF, 0xD8]) {
        return Err(Error::Jpeg("missing SOI marker".into()));
    }
    let mut pos = 2;
    let mut quant = [[0u16; 64]; 4];
    let mut dc_tables: [Option<Huffman>; 4] = Default::default();
    let mut ac_tables: [Option<Huffman>; 4] = Default::default();
    let mut frame: Option<Frame> = None;

    loop {
        while data.get(pos) == Some(&0xFF) && data.get(pos + 1) == Some(&0xFF) {
            pos += 1;
        }
        let (Some(&0xFF), Some(&marker)) = (data.get(pos), data.get(pos + 1)) else {
            return Err(Error::Jpeg(format!("expected marker at offset {pos}")));
        };
        pos += 2;
        if marker == 0xD9 {
            return Err(Error::Jpeg("EOI before any scan".into()));
        }
        let len = read_u16(data, pos)?;
        let seg = data
            .get(pos + 2..pos + len)
            .ok_or_else(|| Error::Jpeg(format!("segment {marker:#04x} overruns file")))?;
        pos += len;
        match marker {
            0xDB => {
                let mut s = seg;
                while !s.is_empty() {
                    let (pq, tq) = (s[0] >> 4, usize::from(s[0] & 15));
                    if pq != 0 || tq > 3 || s.len() < 65 {
                        return Err(Error::Jpeg("only 8-bit quant tables supported".into()));
                    }
                    for k in 0..64 {
                        quant[tq][ZIGZAG[k]] = u16::from(s[1 + k]);
                    }
                    s = &s[65..];
                }
            }
            0xC4 => {
                let mut s = seg;
                while !s.is_empty() {
                    if s.len() < 17 {
                        return Err(Error::Jpeg("truncated DHT".into()));
                    }
                    let (class, id) = (s[0] >> 4, usize::from(s[0] & 15));
                    let bits = &s[1..17];
                    let n: usize = bits.iter().map(|&b| usize::from(b)).sum();
                    let vals = s
                        .get(17..17 + n)
                        .ok_or_else(|| Error::Jpeg("truncated DHT".into()))?;
                    if id > 3 {
                        return Err(Error::Jpeg("bad huffman table id".into()));
                    }
                    let table = Huffman::new(bits, vals);
                    if class == 0 {
                        dc_tables[id] = Some(table);
                    } else {
                        ac_tables[id] = Some(table);
                    }
                    s = &s[17 + n..];
                }
            }
            0xC0 | 0xC1 => {
                if seg.len() < 6 || seg[0] != 8 {
                    return Err(Error::Jpeg("only 8-bit baseline frames supported".into()));
                }
                let height = usize::from(u16::from_be_bytes([seg[1], seg[2]]));
                let width = usize::from(u16::from_be_bytes([seg[3], seg[4]]));
                let n = usize::from(seg[5]);
                if seg.len() < 6 + 3 * n || !(n == 1 || n == 3) || width == 0 || height == 0 {
                    return Err(Error::Jpeg("unsupported frame header".into()));
                }
                let comps = (0..n)
                    .map(|i| {
                        let c = &seg[6 + 3 * i..9 + 3 * i];
                        FrameComponent {
                            id: c[0],
                            h: usize::from(c[1] >> 4).max(1),
                            v: usize::from(c[1] & 15).max(1),
                            tq: usize::from(c[2] & 3),
                        }
                    })
                    .collect();
                frame = Some(Frame {
                    width,
                    height,
                    comps,
                });
            }
            0xC2 | 0xC3 | 0xC5..=0xC7 | 0xC9..=0xCB | 0xCD..=0xCF => {
                return Err(Error::Jpeg("only baseline sequential JPEG is supported".into()));
            }
            0xDD => {
                if read_u16(seg, 0)? != 0 {
                    return Err(Error::Jpeg("restart intervals are not supported".into()));
                }
            }
            0xDA => {
                let frame = frame.ok_or_else(|| Error::Jpeg("scan before frame header".into()))?;
                return decode_scan(&frame, seg, &data[pos..], &quant, &dc_tables, &ac_tables);
            }
            _ => {}
        }
    }
}

fn decode_scan(
    frame: &Frame,
    header: &[u8],
    entropy: &[u8],
    quant: &[[u16; 64]; 4],
    dc_tables: &[Option<Huffman>; 4],
    ac_tables: &[Option<Huffman>; 4],
) -> Result<Decoded> {
    let ns = usize::from(*header.first().unwrap_or(&0));
    if ns != frame.comps.len() || header.len() < 1 + 2 * ns {
        return Err(Error::Jpeg("scan must cover all frame components".into()));
    }
    let hmax = frame.comps.iter().map(|c| c.h).max().unwrap();
    let vmax = frame.comps.iter().map(|c| c.v).max().unwrap();
    let mcus_x = frame.width.div_ceil(8 * hmax);
    let mcus_y = frame.height.div_ceil(8 * vmax);

    let mut tables = Vec::with_capacity(ns);
    for i in 0..ns {
        let id = header[1 + 2 * i];
        let t = header[2 + 2 * i];
        let ci = frame
            .comps
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| Error::Jpeg(format!("scan references unknown component {id}")))?;
        let dc = dc_tables[usize::from(t >> 4) & 3]
            .as_ref()
            .ok_or_else(|| Error::Jpeg("missing DC table".into()))?;
        let ac = ac_tables[usize::from(t & 15) & 3]
            .as_ref()
            .ok_or_else(|| Error::Jpeg("missing AC table".into()))?;
        tables.push((ci, dc, ac));
    }

    // Sample planes, padded to whole MCUs (or whole blocks for a single
    // non-interleaved component).
    let plane_dims: Vec<(usize, usize)> = frame
        .comps
        .iter()
        .map(|c| {
            if ns == 1 {
                (frame.width.div_ceil(8) * 8, frame.height.div_ceil(8) * 8)
            } else {
                (mcus_x * c.h * 8, mcus_y * c.v * 8)
            }
        })
        .collect();
    let mut planes: Vec<Vec<u8>> = plane_dims.iter().map(|&(w, h)| vec![0u8; w * h]).collect();
    let mut preds = vec![0i32; frame.comps.len()];
    let mut reader = BitReader {
        data: entropy,
        pos: 0,
        acc: 0,
        nbits: 0,
    };

    let mut decode_block = |ci: usize,
                            dc: &Huffman,
                            ac: &Huffman,
                            bx: usize,
                            by: usize,
                            reader: &mut BitReader,
                            planes: &mut [Vec<u8>]|
     -> Result<()> {
        let mut coefs = [0.0f64; 64];
        let q = &quant[frame.comps[ci].tq];
        let cat = reader.symbol(dc)?;
        if cat > 11 {
            return Err(Error::Jpeg("bad DC category".into()));
        }
        let diff = extend(reader.bits(cat)?, cat);
        preds[ci] += diff;
        coefs[0] = f64::from(preds[ci]) * f64::from(q[0]);
        let mut k = 1;
        while k < 64 {
            let rs = reader.symbol(ac)?;
            let (run, size) = (usize::from(rs >> 4), rs & 15);
            if size == 0 {
                if run == 15 {
                    k += 16;
                    continue;
                }
                break;
            }
            k += run;
            if k > 63 {
                return Err(Error::Jpeg("AC run past end of block".into()));
            }
            let v = extend(reader.bits(size)?, size);
            coefs[ZIGZAG[k]] = f64::from(v) * f64::from(q[ZIGZAG[k]]);
            k += 1;
        }
        idct(&mut coefs);
        let (pw, _) = plane_dims[ci];
        for y in 0..8 {
            for x in 0..8 {
                planes[ci][(by * 8 + y) * pw + bx * 8 + x] =
                    (coefs[y * 8 + x] + 128.0).round().clamp(0.0, 255.0) as u8;
            }
        }
        Ok(())
    };

    if ns == 1 {
        let (ci, dc, ac) = tables[0];
        let (pw, ph) = plane_dims[ci];
        for by in 0..ph / 8 {
            for bx in 0..pw / 8 {
                decode_block(ci, dc, ac, bx, by, &mut reader, &mut planes)?;
            }
        }
    } else {
        for my in 0..mcus_y {
            for mx in 0..mcus_x {
                for &(ci, dc, ac) in &tables {
                    let c = &frame.comps[ci];
                    for v in 0..c.v {
                        for h in 0..c.h {
                            decode_block(ci, dc, ac, mx * c.h + h, my * c.v + v, &mut reader, &mut planes)?;
                        }
                    }
                }
            }
        }
    }

    let (w, h) = (frame.width, frame.height);
    let sample = |ci: usize, x: usize, y: usize| -> f64 {
        let c = &frame.comps[ci];
        let (pw, _) = plane_dims[ci];
        let (sx, sy) = if ns == 1 { (x, y) } else { (x * c.h / hmax, y * c.v / vmax) };
        f64::from(planes[ci][sy * pw + sx])
    };
    let components = frame.comps.len();
    let mut pixels = Vec::with_capacity(w * h * components);
    for y in 0..h {
        for x in 0..w {
            if components == 1 {
                pixels.push(sample(0, x, y) as u8);
            } else {
                let yy = sample(0, x, y);
                let cb = sample(1, x, y) - 128.0;
                let cr = sample(2, x, y) - 128.0;
                let px = [
                    yy + 1.402 * cr,
                    yy - 0.344_136_286 * cb - 0.714_136_286 * cr,
                    yy + 1.772 * cb,
                ];
                pixels.extend(px.iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
            }
        }
    }
    Ok(Decoded {
        width: w,
        height: h,
        components,
        pixels,
    })
}
