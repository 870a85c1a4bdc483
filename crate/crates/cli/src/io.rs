//! On-disk formats: PGM belief images, box CSVs, detection JSONL, metrics
//! JSON and the raw f32 embedding sidecar.

use std::io::{BufRead, Read, Seek, SeekFrom, Write};

use anyhow::{bail, ensure, Context, Result};
use reidtrack::{
    Detection, EmbeddingMap, EmbeddingVector, GridGeometry, Metrics, OutputBox, ProbabilityGrid,
};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PgmFormat {
    /// P2 text.
    Ascii,
    /// P5 binary, 16 bits per sample, big-endian.
    #[default]
    Binary,
}

pub const PGM_MAX: u16 = u16::MAX;

/// Samples scaled so the largest cell maps to `PGM_MAX`.
pub fn pgm_samples(values: &[f64]) -> Vec<u16> {
    let max = values.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return vec![0; values.len()];
    }
    values
        .iter()
        .map(|v| ((v.max(0.0) / max) * PGM_MAX as f64).round() as u16)
        .collect()
}

pub fn write_pgm<W: Write>(mut w: W, grid: &ProbabilityGrid, format: PgmFormat) -> Result<()> {
    write_pgm_values(&mut w, grid.width(), grid.height(), grid.values(), format)
}

pub fn write_pgm_values<W: Write>(
    mut w: W,
    width: usize,
    height: usize,
    values: &[f64],
    format: PgmFormat,
) -> Result<()> {
    ensure!(
        values.len() == width * height,
        "pgm: {} values for {width}x{height}",
        values.len()
    );
    let samples = pgm_samples(values);
    match format {
        PgmFormat::Ascii => {
            writeln!(w, "P2\n{width} {height}\n{PGM_MAX}")?;
            for row in samples.chunks(width) {
                let line: Vec<String> = row.iter().map(|s| s.to_string()).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
        }
        PgmFormat::Binary => {
            write!(w, "P5\n{width} {height}\n{PGM_MAX}\n")?;
            let bytes: Vec<u8> = samples.iter().flat_map(|s| s.to_be_bytes()).collect();
            w.write_all(&bytes)?;
        }
    }
    Ok(())
}

/// Reads P2 or P5 with a 16-bit maxval. Returns `(width, height, samples)`.
pub fn read_pgm<R: Read>(mut r: R) -> Result<(usize, usize, Vec<u16>)> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let mut pos = 0;
    let mut token = |data: &[u8]| -> Result<String> {
        while pos < data.len() {
            if data[pos] == b'#' {
                while pos < data.len() && data[pos] != b'\n' {
                    pos += 1;
                }
            } else if data[pos].is_ascii_whitespace() {
                pos += 1;
            } else {
                break;
            }
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        ensure!(start < pos, "pgm: truncated header");
        Ok(String::from_utf8_lossy(&data[start..pos]).into_owned())
    };
    let magic = token(&data)?;
    let width: usize = token(&data)?.parse().context("pgm width")?;
    let height: usize = token(&data)?.parse().context("pgm height")?;
    let max: u32 = token(&data)?.parse().context("pgm maxval")?;
    ensure!(
        max == PGM_MAX as u32,
        "pgm: expected maxval {PGM_MAX}, found {max}"
    );
    let n = width * height;
    let samples = match magic.as_str() {
        "P2" => (0..n)
            .map(|_| Ok(token(&data)?.parse::<u16>()?))
            .collect::<Result<Vec<_>>>()?,
        "P5" => {
            let body = &data[pos + 1..];
            ensure!(body.len() >= 2 * n, "pgm: truncated raster");
            body.chunks_exact(2)
                .take(n)
                .map(|b| u16::from_be_bytes([b[0], b[1]]))
                .collect()
        }
        other => bail!("pgm: unsupported magic {other}"),
    };
    Ok((width, height, samples))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct BoxRow {
    frame: usize,
    id: u64,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

/// `frame,id,x,y,w,h` with `x, y` the box center in pixels.
pub fn write_boxes_csv<W: Write>(w: W, boxes: &[OutputBox]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for b in boxes {
        out.serialize(BoxRow {
            frame: b.frame,
            id: b.track_id,
            x: b.center[0],
            y: b.center[1],
            w: b.width,
            h: b.height,
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_boxes_csv<R: Read>(r: R) -> Result<Vec<OutputBox>> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    rd.deserialize::<BoxRow>()
        .map(|row| {
            let row = row?;
            Ok(OutputBox {
                track_id: row.id,
                frame: row.frame,
                center: [row.x, row.y],
                width: row.w,
                height: row.h,
            })
        })
        .collect()
}

pub fn write_metrics_json<W: Write>(mut w: W, metrics: &Metrics) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, metrics)?;
    writeln!(w)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

impl From<&Detection> for DetectionRecord {
    fn from(d: &Detection) -> Self {
        Self {
            frame: d.frame,
            x: d.center[0],
            y: d.center[1],
            score: d.score,
            embedding: d.embedding.as_ref().map(|e| e.as_slice().to_vec()),
        }
    }
}

impl From<DetectionRecord> for Detection {
    fn from(r: DetectionRecord) -> Self {
        Detection {
            frame: r.frame,
            center: [r.x, r.y],
            score: r.score,
            embedding: r.embedding.map(EmbeddingVector::new),
        }
    }
}

pub fn write_detections_jsonl<W: Write>(mut w: W, detections: &[Detection]) -> Result<()> {
    for d in detections {
        serde_json::to_writer(&mut w, &DetectionRecord::from(d))?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_detections_jsonl<R: BufRead>(r: R) -> Result<Vec<Detection>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DetectionRecord =
            serde_json::from_str(&line).with_context(|| format!("detections line {}", i + 1))?;
        out.push(rec.into());
    }
    Ok(out)
}

/// Leading `u32` fields of the embedding sidecar, little-endian.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SidecarHeader {
    pub frames: u32,
    pub height: u32,
    pub width: u32,
    pub dim: u32,
}

impl SidecarHeader {
    pub const BYTES: u64 = 16;

    pub fn frame_floats(&self) -> usize {
        self.height as usize * self.width as usize * self.dim as usize
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for v in [self.frames, self.height, self.width, self.dim] {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = [0u8; 16];
        r.read_exact(&mut buf).context("embedding sidecar header")?;
        let f = |i: usize| u32::from_le_bytes(buf[4 * i..4 * i + 4].try_into().unwrap());
        Ok(Self {
            frames: f(0),
            height: f(1),
            width: f(2),
            dim: f(3),
        })
    }
}

/// Appends one frame's map, row-major cells, each `dim` f32 values.
pub fn write_sidecar_frame<W: Write>(mut w: W, map: &EmbeddingMap) -> Result<()> {
    let bytes: Vec<u8> = map
        .values()
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect();
    w.write_all(&bytes)?;
    Ok(())
}

/// Random access to the frames of an embedding sidecar.
#[derive(Debug)]
pub struct SidecarReader<R> {
    inner: R,
    pub header: SidecarHeader,
}

impl<R: Read + Seek> SidecarReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        inner.seek(SeekFrom::Start(0))?;
        let header = SidecarHeader::read(&mut inner)?;
        let len = inner.seek(SeekFrom::End(0))?;
        let want = SidecarHeader::BYTES + 4 * header.frames as u64 * header.frame_floats() as u64;
        ensure!(
            len == want,
            "embedding sidecar is {len} bytes, header implies {want}"
        );
        Ok(Self { inner, header })
    }

    pub fn frame(&mut self, t: usize, geometry: GridGeometry) -> Result<EmbeddingMap> {
        let h = self.header;
        ensure!(
            t < h.frames as usize,
            "sidecar has {} frames, asked for {t}",
            h.frames
        );
        ensure!(
            geometry.width == h.width as usize && geometry.height == h.height as usize,
            "sidecar is {}x{}, scenario grid is {}x{}",
            h.width,
            h.height,
            geometry.width,
            geometry.height
        );
        let n = h.frame_floats();
        self.inner
            .seek(SeekFrom::Start(SidecarHeader::BYTES + 4 * (t * n) as u64))?;
        let mut buf = vec![0u8; 4 * n];
        self.inner.read_exact(&mut buf)?;
        let values = buf
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        Ok(EmbeddingMap::new(geometry, h.dim as usize, values)?)
    }
}
