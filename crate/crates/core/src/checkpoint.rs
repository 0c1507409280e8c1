//! Binary wavefunction checkpoints.
//!
//! Layout (little-endian): magic "IVRW", format version u32, the three
//! grid sizes as u32, the snapshot time in femtoseconds as f64, then
//! n_cs * n_oc * n_theta amplitudes as (re, im) f64 pairs in row-major
//! (cs, oc, theta) order.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array3;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::wavefunction::GridWavefunction;

const MAGIC: &[u8; 4] = b"IVRW";
const VERSION: u32 = 1;

pub fn write_checkpoint(path: impl AsRef<Path>, psi: &GridWavefunction) -> Result<()> {
    let mut buf: Vec<u8> = Vec::with_capacity(24 + psi.amplitudes.len() * 16);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let [n0, n1, n2] = psi.dims();
    for n in [n0, n1, n2] {
        buf.extend_from_slice(&(n as u32).to_le_bytes());
    }
    buf.extend_from_slice(&psi.time_fs.to_le_bytes());
    for a in psi.amplitudes.iter() {
        buf.extend_from_slice(&a.re.to_le_bytes());
        buf.extend_from_slice(&a.im.to_le_bytes());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<GridWavefunction> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let fail = |msg: &str| Error::InvalidArgument(format!("{}: {msg}", path.display()));
    if bytes.len() < 28 {
        return Err(fail("truncated checkpoint header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(fail("bad magic, not a wavefunction checkpoint"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(fail(&format!("unsupported checkpoint version {version}")));
    }
    let mut dims = [0usize; 3];
    for (i, d) in dims.iter_mut().enumerate() {
        let off = 8 + 4 * i;
        *d = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
    }
    let time_fs = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let count = dims[0] * dims[1] * dims[2];
    let expected = 28 + count * 16;
    if bytes.len() != expected {
        return Err(fail(&format!(
            "size mismatch: expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let mut amps = Vec::with_capacity(count);
    for k in 0..count {
        let off = 28 + 16 * k;
        let re = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        let im = f64::from_le_bytes(bytes[off + 8..off + 16].try_into().unwrap());
        amps.push(Complex64::new(re, im));
    }
    let array = Array3::from_shape_vec((dims[0], dims[1], dims[2]), amps)
        .map_err(|e| fail(&format!("shape error: {e}")))?;
    Ok(GridWavefunction::new(array, time_fs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.ivrw");
        let mut amps = Array3::<Complex64>::zeros((3, 2, 4));
        let mut state = 1234567u64;
        for v in amps.iter_mut() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let re = f64::from_bits((state >> 12) | 0x3ff0000000000000) - 1.5;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let im = f64::from_bits((state >> 12) | 0x3ff0000000000000) - 1.5;
            *v = Complex64::new(re, im);
        }
        let psi = GridWavefunction::new(amps, 17.25);
        write_checkpoint(&path, &psi).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(back.time_fs.to_bits(), psi.time_fs.to_bits());
        assert_eq!(back.dims(), psi.dims());
        for (a, b) in psi.amplitudes.iter().zip(back.amplitudes.iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ivrw");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(read_checkpoint(&path).is_err());
    }
}
