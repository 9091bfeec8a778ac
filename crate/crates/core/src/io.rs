//! Binary batch files.
//!
//! Both formats are little-endian. An fBm batch is
//!
//! ```text
//! "FBMB" u32:version f64:H f64:T u64:n u64:N u64:master_seed
//! N × (n+1) f64, row-major
//! ```
//!
//! A trajectory batch ("SDEB") carries the same header followed by the
//! drift and diffusion descriptors as length-prefixed JSON, `x0`, the
//! trajectory ids, the effect draws (NaN when unknown) and the rows.

use std::io::{Read, Write};

use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::fbm::FbmPath;
use crate::grid::{HurstIndex, TimeGrid};
use crate::kernel::DiffusionSpec;
use crate::sde::{Trajectory, TrajectoryBatch};

const FBM_MAGIC: &[u8; 4] = b"FBMB";
const SDE_MAGIC: &[u8; 4] = b"SDEB";
pub const FORMAT_VERSION: u32 = 1;
/// Upper bound for a JSON descriptor, to reject corrupted length fields early.
const MAX_DESCRIPTOR_BYTES: u64 = 1 << 26;

struct Header {
    hurst: HurstIndex,
    grid: TimeGrid,
    count: usize,
    seed: u64,
}

fn put_f64<W: Write>(w: &mut W, x: f64) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

fn put_u64<W: Write>(w: &mut W, x: u64) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

fn get<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("batch file is truncated".into()),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(get::<8, _>(r)?))
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(get::<8, _>(r)?))
}

fn write_header<W: Write>(w: &mut W, magic: &[u8; 4], h: &Header) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    put_f64(w, h.hurst.value())?;
    put_f64(w, h.grid.horizon())?;
    put_u64(w, h.grid.steps() as u64)?;
    put_u64(w, h.count as u64)?;
    put_u64(w, h.seed)
}

fn read_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<Header> {
    let found = get::<4, _>(r)?;
    if &found != magic {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&found)
        )));
    }
    let version = u32::from_le_bytes(get::<4, _>(r)?);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported batch version {version}")));
    }
    let hurst = HurstIndex::new(get_f64(r)?).map_err(|e| Error::Format(e.to_string()))?;
    let horizon = get_f64(r)?;
    let steps = to_usize(get_u64(r)?)?;
    let grid = TimeGrid::new(horizon, steps).map_err(|e| Error::Format(e.to_string()))?;
    let count = to_usize(get_u64(r)?)?;
    let seed = get_u64(r)?;
    Ok(Header { hurst, grid, count, seed })
}

fn to_usize(x: u64) -> Result<usize> {
    usize::try_from(x).map_err(|_| Error::Format(format!("count {x} does not fit in memory")))
}

fn read_row<R: Read>(r: &mut R, len: usize) -> Result<Vec<f64>> {
    (0..len).map(|_| get_f64(r)).collect()
}

fn expect_end<R: Read>(r: &mut R) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(Error::Format("trailing bytes after batch data".into())),
    }
}

/// Write paths that share one grid, H and master seed.
pub fn write_fbm_batch<W: Write>(mut out: W, paths: &[FbmPath]) -> Result<()> {
    let first = paths
        .first()
        .ok_or_else(|| Error::contract("cannot write an empty fBm batch"))?;
    if paths
        .iter()
        .any(|p| p.grid != first.grid || p.hurst != first.hurst || p.seed != first.seed)
    {
        return Err(Error::contract("fBm batch mixes grids, Hurst indices or seeds"));
    }
    if paths.iter().enumerate().any(|(i, p)| p.index != i as u64) {
        return Err(Error::contract("fBm batch paths must be stored in stream order"));
    }
    let header = Header {
        hurst: first.hurst,
        grid: first.grid,
        count: paths.len(),
        seed: first.seed,
    };
    write_header(&mut out, FBM_MAGIC, &header)?;
    for p in paths {
        for &x in &p.values {
            put_f64(&mut out, x)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_fbm_batch<R: Read>(mut input: R) -> Result<Vec<FbmPath>> {
    let h = read_header(&mut input, FBM_MAGIC)?;
    let paths = (0..h.count)
        .map(|i| {
            Ok(FbmPath {
                hurst: h.hurst,
                grid: h.grid,
                values: read_row(&mut input, h.grid.len())?,
                seed: h.seed,
                index: i as u64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    expect_end(&mut input)?;
    Ok(paths)
}

fn put_json<W: Write, T: serde::Serialize>(w: &mut W, value: &T) -> Result<()> {
    let bytes = serde_json::to_vec(value)?;
    put_u64(w, bytes.len() as u64)?;
    w.write_all(&bytes)?;
    Ok(())
}

fn get_json<R: Read, T: serde::de::DeserializeOwned>(r: &mut R) -> Result<T> {
    let len = get_u64(r)?;
    if len > MAX_DESCRIPTOR_BYTES {
        return Err(Error::Format(format!("descriptor length {len} is implausible")));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format("batch file is truncated".into()))?;
    serde_json::from_slice(&buf).map_err(|e| Error::Format(format!("bad descriptor: {e}")))
}

pub fn write_trajectory_batch<W: Write>(mut out: W, batch: &TrajectoryBatch) -> Result<()> {
    if batch.trajectories.iter().any(|t| t.grid() != batch.grid) {
        return Err(Error::contract("trajectory batch mixes grids"));
    }
    let header = Header {
        hurst: batch.hurst,
        grid: batch.grid,
        count: batch.len(),
        seed: batch.fbm_seed,
    };
    write_header(&mut out, SDE_MAGIC, &header)?;
    put_json(&mut out, &batch.drift)?;
    put_json(&mut out, &batch.sigma)?;
    put_f64(&mut out, batch.x0)?;
    for t in &batch.trajectories {
        put_u64(&mut out, t.id() as u64)?;
    }
    for t in &batch.trajectories {
        put_f64(&mut out, t.effect_truth().unwrap_or(f64::NAN))?;
    }
    for t in &batch.trajectories {
        for &x in t.values() {
            put_f64(&mut out, x)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_trajectory_batch<R: Read>(mut input: R) -> Result<TrajectoryBatch> {
    let h = read_header(&mut input, SDE_MAGIC)?;
    let drift: DriftModel = get_json(&mut input)?;
    drift.validate()?;
    let sigma: DiffusionSpec = get_json(&mut input)?;
    sigma.validate()?;
    sigma.check_grid(&h.grid)?;
    let x0 = get_f64(&mut input)?;
    let ids = (0..h.count)
        .map(|_| get_u64(&mut input).and_then(to_usize))
        .collect::<Result<Vec<_>>>()?;
    let effects = read_row(&mut input, h.count)?;
    let mut trajectories = Vec::with_capacity(h.count);
    for (id, effect) in ids.into_iter().zip(effects) {
        let t = Trajectory::new(id, h.grid, read_row(&mut input, h.grid.len())?)?;
        trajectories.push(if effect.is_nan() { t } else { t.with_effect(effect) });
    }
    expect_end(&mut input)?;
    Ok(TrajectoryBatch {
        hurst: h.hurst,
        grid: h.grid,
        drift,
        sigma,
        x0,
        fbm_seed: h.seed,
        trajectories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::generate_fbm_paths;
    use crate::sde::{draw_effects, simulate_batch, SimulationSettings};

    fn h(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    #[test]
    fn fbm_round_trip_is_bit_exact() {
        let grid = TimeGrid::new(2.5, 37).unwrap();
        let paths = generate_fbm_paths(grid, h(0.73), 5, 99).unwrap();
        let mut buf = Vec::new();
        write_fbm_batch(&mut buf, &paths).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 * 5 + 5 * 38 * 8);
        let back = read_fbm_batch(&buf[..]).unwrap();
        assert_eq!(back.len(), paths.len());
        for (a, b) in paths.iter().zip(&back) {
            assert_eq!(a.grid, b.grid);
            assert_eq!(a.hurst.value().to_bits(), b.hurst.value().to_bits());
            assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(back, paths);
    }

    #[test]
    fn rejects_corrupt_files() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let paths = generate_fbm_paths(grid, h(0.6), 2, 1).unwrap();
        let mut buf = Vec::new();
        write_fbm_batch(&mut buf, &paths).unwrap();
        assert!(matches!(read_fbm_batch(&buf[..buf.len() - 3]), Err(Error::Format(_))));
        let mut extra = buf.clone();
        extra.push(0);
        assert!(matches!(read_fbm_batch(&extra[..]), Err(Error::Format(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_fbm_batch(&bad[..]), Err(Error::Format(_))));
        assert!(matches!(read_trajectory_batch(&buf[..]), Err(Error::Format(_))));
    }

    #[test]
    fn trajectory_round_trip() {
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let effects = draw_effects(4, 1.0, 0.5, 3).unwrap();
        let batch = simulate_batch(
            &effects,
            &DriftModel::affine(1.0, 1.0),
            &DiffusionSpec::constant(0.8).unwrap(),
            grid,
            h(0.7),
            1.0,
            11,
            SimulationSettings::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trajectory_batch(&mut buf, &batch).unwrap();
        let back = read_trajectory_batch(&buf[..]).unwrap();
        assert_eq!(back, batch);
        assert_eq!(back.trajectories[2].effect_truth(), Some(effects.draws[2]));
    }
}
