use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use super::{BridgeSpec, Path};
use crate::error::{Error, Result};
use crate::stable::StableParams;

const MAGIC: &[u8; 8] = b"LVYBRIDG";
const VERSION: u32 = 1;

/// Time grid of the paths in an ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// Recursive bisection to `2^depth` steps.
    Dyadic { depth: u32 },
    /// Stretched increment paths on `n_steps` equal steps.
    Stretched { n_steps: u64, threshold: f64 },
}

impl Schedule {
    pub fn n_steps(&self) -> usize {
        match *self {
            Schedule::Dyadic { depth } => 1usize << depth,
            Schedule::Stretched { n_steps, .. } => n_steps as usize,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleHeader {
    pub spec: BridgeSpec,
    pub schedule: Schedule,
    /// Path `i` was drawn from stream `i` of this seed.
    pub seed: u64,
    pub n_points: usize,
    pub n_paths: usize,
}

/// Equal-length paths on a shared time grid, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub header: EnsembleHeader,
    pub positions: Vec<f64>,
}

impl Ensemble {
    pub fn times(&self) -> Vec<f64> {
        Path::grid(self.header.spec.total_time, self.header.schedule.n_steps())
    }

    pub fn positions_of(&self, i: usize) -> &[f64] {
        let n = self.header.n_points;
        &self.positions[i * n..(i + 1) * n]
    }

    pub fn path(&self, i: usize) -> Path {
        Path {
            times: self.times(),
            positions: self.positions_of(i).to_vec(),
        }
    }
}

pub fn write_path_csv<W: Write>(path: &Path, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x"])?;
    for (t, x) in path.times.iter().zip(&path.positions) {
        w.write_record([t.to_string(), x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_path_csv<R: Read>(input: R) -> Result<Path> {
    let mut r = csv::Reader::from_reader(input);
    let mut times = Vec::new();
    let mut positions = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Io("missing column".into()))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Io(e.to_string()))
        };
        times.push(parse(0)?);
        positions.push(parse(1)?);
    }
    Path::new(times, positions)
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

/// Binary container: magic, version, header fields, then the positions as
/// packed little-endian f64, one path after another.
pub fn write_ensemble(ens: &Ensemble, file: &FsPath) -> Result<()> {
    let h = &ens.header;
    let mut head = Vec::with_capacity(96);
    head.extend_from_slice(MAGIC);
    head.extend_from_slice(&VERSION.to_le_bytes());
    let (tag, steps, threshold) = match h.schedule {
        Schedule::Dyadic { depth } => (0u32, depth as u64, f64::NAN),
        Schedule::Stretched { n_steps, threshold } => (1u32, n_steps, threshold),
    };
    head.extend_from_slice(&tag.to_le_bytes());
    put_f64(&mut head, h.spec.params.alpha());
    put_f64(&mut head, h.spec.params.sigma());
    put_f64(&mut head, h.spec.total_time);
    put_f64(&mut head, h.spec.arrival);
    put_u64(&mut head, steps);
    put_f64(&mut head, threshold);
    put_u64(&mut head, h.seed);
    put_u64(&mut head, h.n_points as u64);
    put_u64(&mut head, h.n_paths as u64);
    let mut w = BufWriter::new(File::create(file)?);
    w.write_all(&head)?;
    for v in &ens.positions {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

struct Cursor<R: Read>(R);

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b)?;
        Ok(b)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
}

pub fn read_ensemble(file: &FsPath) -> Result<Ensemble> {
    let mut c = Cursor(BufReader::new(File::open(file)?));
    if &c.bytes::<8>()? != MAGIC {
        return Err(Error::Io("not an ensemble file".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Io(format!("unsupported ensemble version {version}")));
    }
    let tag = c.u32()?;
    let (alpha, sigma, total, arrival) = (c.f64()?, c.f64()?, c.f64()?, c.f64()?);
    let steps = c.u64()?;
    let threshold = c.f64()?;
    let seed = c.u64()?;
    let n_points = c.u64()? as usize;
    let n_paths = c.u64()? as usize;
    let schedule = match tag {
        0 => Schedule::Dyadic { depth: steps as u32 },
        1 => Schedule::Stretched { n_steps: steps, threshold },
        _ => return Err(Error::Io(format!("unknown schedule tag {tag}"))),
    };
    let spec = BridgeSpec::new(StableParams::new(alpha, sigma)?, total, arrival)?;
    if schedule.n_steps() + 1 != n_points {
        return Err(Error::Io("point count disagrees with schedule".into()));
    }
    let mut positions = vec![0.0; n_points * n_paths];
    for v in positions.iter_mut() {
        *v = c.f64()?;
    }
    Ok(Ensemble {
        header: EnsembleHeader {
            spec,
            schedule,
            seed,
            n_points,
            n_paths,
        },
        positions,
    })
}
