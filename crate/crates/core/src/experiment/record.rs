use std::io::{BufRead, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

/// File signature of the binary record layout.
pub const RECORD_MAGIC: [u8; 8] = *b"HSREC\0\0\0";
pub const RECORD_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 8 + 8;

/// A shot series: photon counts plus the noise-free `⟨S_z⟩` of every shot.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub counts: Vec<u32>,
    pub true_sz: Vec<f64>,
    /// T, s
    pub sampling_interval: f64,
    pub seed: u64,
}

impl MeasurementRecord {
    pub fn new(counts: Vec<u32>, true_sz: Vec<f64>, sampling_interval: f64, seed: u64) -> Result<Self> {
        let r = Self { counts, true_sz, sampling_interval, seed };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        if self.counts.len() != self.true_sz.len() {
            return Err(Error::MalformedRecord(format!(
                "{} counts but {} S_z values",
                self.counts.len(),
                self.true_sz.len()
            )));
        }
        if !(self.sampling_interval > 0.0) || !self.sampling_interval.is_finite() {
            return Err(Error::MalformedRecord(format!(
                "sampling interval must be positive, got {}",
                self.sampling_interval
            )));
        }
        Ok(())
    }

    /// M
    pub fn shot_count(&self) -> usize {
        self.counts.len()
    }

    pub fn counts_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    pub fn mean_counts(&self) -> f64 {
        if self.counts.is_empty() {
            return 0.0;
        }
        self.counts.iter().map(|&c| c as f64).sum::<f64>() / self.counts.len() as f64
    }

    /// Little-endian: magic, version u32, T f64, M u64, seed u64, M×u32 counts, M×f64 S_z.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&RECORD_MAGIC)?;
        w.write_u32::<LittleEndian>(RECORD_VERSION)?;
        w.write_f64::<LittleEndian>(self.sampling_interval)?;
        w.write_u64::<LittleEndian>(self.counts.len() as u64)?;
        w.write_u64::<LittleEndian>(self.seed)?;
        let mut buf = Vec::with_capacity(self.counts.len() * 12);
        for &c in &self.counts {
            buf.write_u32::<LittleEndian>(c)?;
        }
        for &s in &self.true_sz {
            buf.write_f64::<LittleEndian>(s)?;
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.counts.len() * 12);
        self.write_binary(&mut out).expect("writing to memory");
        out
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let malformed = |e: std::io::Error| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::MalformedRecord("file is truncated".into()),
            _ => Error::Io(e),
        };
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(malformed)?;
        if magic != RECORD_MAGIC {
            return Err(Error::MalformedRecord("bad magic bytes".into()));
        }
        let version = r.read_u32::<LittleEndian>().map_err(malformed)?;
        if version != RECORD_VERSION {
            return Err(Error::MalformedRecord(format!("unsupported version {version}")));
        }
        let t = r.read_f64::<LittleEndian>().map_err(malformed)?;
        let m = r.read_u64::<LittleEndian>().map_err(malformed)?;
        let seed = r.read_u64::<LittleEndian>().map_err(malformed)?;
        let m = usize::try_from(m).map_err(|_| Error::MalformedRecord(format!("shot count {m} too large")))?;
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() != m * 12 {
            return Err(Error::MalformedRecord(format!(
                "header announces {m} shots ({} bytes) but body has {} bytes",
                m * 12,
                body.len()
            )));
        }
        let (c, s) = body.split_at(m * 4);
        let counts = c.chunks_exact(4).map(|b| u32::from_le_bytes(b.try_into().unwrap())).collect();
        let true_sz = s.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        Self::new(counts, true_sz, t, seed)
    }

    /// Comment header with T and seed, then `shot,time_s,counts,true_sz`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# sampling_interval_s={:e}", self.sampling_interval)?;
        writeln!(w, "# seed={}", self.seed)?;
        writeln!(w, "shot,time_s,counts,true_sz")?;
        for (n, (&c, &s)) in self.counts.iter().zip(&self.true_sz).enumerate() {
            writeln!(w, "{n},{:e},{c},{s:e}", n as f64 * self.sampling_interval)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let bad = |msg: String| Error::MalformedRecord(msg);
        let (mut t, mut seed) = (None, None);
        let (mut counts, mut true_sz) = (Vec::new(), Vec::new());
        let mut header_seen = false;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let (key, value) = meta.trim().split_once('=').ok_or_else(|| bad(format!("line {}: bad comment", i + 1)))?;
                match key.trim() {
                    "sampling_interval_s" => t = value.trim().parse::<f64>().ok(),
                    "seed" => seed = value.trim().parse::<u64>().ok(),
                    _ => {}
                }
                continue;
            }
            if !header_seen {
                if line != "shot,time_s,counts,true_sz" {
                    return Err(bad(format!("line {}: unexpected column header", i + 1)));
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(bad(format!("line {}: expected 4 fields", i + 1)));
            }
            counts.push(fields[2].parse::<u32>().map_err(|e| bad(format!("line {}: {e}", i + 1)))?);
            true_sz.push(fields[3].parse::<f64>().map_err(|e| bad(format!("line {}: {e}", i + 1)))?);
        }
        let t = t.ok_or_else(|| bad("missing sampling_interval_s".into()))?;
        let seed = seed.ok_or_else(|| bad("missing seed".into()))?;
        Self::new(counts, true_sz, t, seed)
    }
}
