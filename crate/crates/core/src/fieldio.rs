//! Field persistence: a little-endian binary snapshot and a CSV listing, both
//! carrying `(n, α)` and both reproducing coefficients bit for bit.
//!
//! Binary layout: magic `SGF1`, `u32` cutoff, `f64` α, `u64` record count,
//! then per mode `i32 k1, i32 k2, f64 re, f64 im`.
//! CSV layout: a `# n=<n>,alpha=<α>` line, the header `k1,k2,re,im`, one row
//! per mode. Floats use the shortest representation that parses back exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{ModeLayout, SpectralField};

const MAGIC: &[u8; 4] = b"SGF1";

pub fn to_bytes(field: &SpectralField, alpha: f64) -> Vec<u8> {
    let count = field.mode_count() as u64;
    let mut out = Vec::with_capacity(24 + 24 * count as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(field.cutoff() as u32).to_le_bytes());
    out.extend_from_slice(&alpha.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for (k, c) in field.modes() {
        out.extend_from_slice(&k.k1.to_le_bytes());
        out.extend_from_slice(&k.k2.to_le_bytes());
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(slice.try_into().expect("slice length matches"))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<(SpectralField, f64)> {
    let mut r = Reader { bytes, pos: 0 };
    if &r.take::<4>()? != MAGIC {
        return Err(Error::Format("bad magic, expected SGF1".into()));
    }
    let n = u32::from_le_bytes(r.take()?) as usize;
    let alpha = f64::from_le_bytes(r.take()?);
    let count = u64::from_le_bytes(r.take()?);
    if n == 0 {
        return Err(Error::InvalidCutoff(0));
    }
    let mut field = SpectralField::zeros(n);
    let layout = ModeLayout::new(n);
    for _ in 0..count {
        let k1 = i32::from_le_bytes(r.take()?);
        let k2 = i32::from_le_bytes(r.take()?);
        let re = f64::from_le_bytes(r.take()?);
        let im = f64::from_le_bytes(r.take()?);
        store(&mut field, layout, k1, k2, Complex64::new(re, im))?;
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok((field, alpha))
}

fn store(field: &mut SpectralField, layout: ModeLayout, k1: i32, k2: i32, c: Complex64) -> Result<()> {
    if k1 == 0 && k2 == 0 {
        return Err(Error::ZeroWaveVector);
    }
    if !layout.contains(k1, k2) {
        return Err(Error::OutsideCutoff {
            k1,
            k2,
            cutoff: field.cutoff(),
        });
    }
    field.raw_mut()[layout.index(k1, k2)] = c;
    Ok(())
}

pub fn to_csv(field: &SpectralField, alpha: f64) -> String {
    let mut out = format!("# n={},alpha={}\nk1,k2,re,im\n", field.cutoff(), alpha);
    for (k, c) in field.modes() {
        let _ = writeln!(out, "{},{},{},{}", k.k1, k.k2, c.re, c.im);
    }
    out
}

fn parse<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("line {line}: cannot parse {what} from `{s}`")))
}

pub fn from_csv(text: &str) -> Result<(SpectralField, f64)> {
    let mut lines = text.lines().enumerate();
    let (_, meta) = lines.next().ok_or_else(|| Error::Format("empty input".into()))?;
    let meta = meta
        .strip_prefix("# ")
        .ok_or_else(|| Error::Format("line 1: expected `# n=..,alpha=..`".into()))?;
    let mut n = None;
    let mut alpha = None;
    for part in meta.split(',') {
        match part.split_once('=') {
            Some(("n", v)) => n = Some(parse::<usize>(v, 1, "n")?),
            Some(("alpha", v)) => alpha = Some(parse::<f64>(v, 1, "alpha")?),
            _ => return Err(Error::Format(format!("line 1: unexpected entry `{part}`"))),
        }
    }
    let (n, alpha) = match (n, alpha) {
        (Some(n), Some(a)) if n > 0 => (n, a),
        _ => return Err(Error::Format("line 1: n and alpha are required".into())),
    };
    match lines.next() {
        Some((_, "k1,k2,re,im")) => {}
        _ => return Err(Error::Format("line 2: expected header `k1,k2,re,im`".into())),
    }
    let mut field = SpectralField::zeros(n);
    let layout = ModeLayout::new(n);
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::Format(format!("line {}: expected 4 columns", i + 1)));
        }
        let k1 = parse(cols[0], i + 1, "k1")?;
        let k2 = parse(cols[1], i + 1, "k2")?;
        let c = Complex64::new(parse(cols[2], i + 1, "re")?, parse(cols[3], i + 1, "im")?);
        store(&mut field, layout, k1, k2, c)?;
    }
    Ok((field, alpha))
}

/// Writes binary when the extension is `bin`, CSV otherwise.
pub fn save(path: &Path, field: &SpectralField, alpha: f64) -> Result<()> {
    let data = if path.extension().is_some_and(|e| e == "bin") {
        to_bytes(field, alpha)
    } else {
        to_csv(field, alpha).into_bytes()
    };
    fs::write(path, data).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(SpectralField, f64)> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    if data.starts_with(MAGIC) {
        from_bytes(&data)
    } else {
        let text = String::from_utf8(data).map_err(|e| Error::Format(e.to_string()))?;
        from_csv(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bits(f: &SpectralField) -> Vec<(u64, u64)> {
        f.modes().map(|(_, c)| (c.re.to_bits(), c.im.to_bits())).collect()
    }

    proptest! {
        #[test]
        fn binary_round_trip_is_bit_exact(seed in any::<u64>(), n in 1usize..7, alpha in 1e-3f64..10.0) {
            let f = SpectralField::random(n, 0.3, &mut ChaCha8Rng::seed_from_u64(seed));
            let (g, a) = from_bytes(&to_bytes(&f, alpha)).unwrap();
            prop_assert_eq!(bits(&f), bits(&g));
            prop_assert_eq!(a.to_bits(), alpha.to_bits());
        }

        #[test]
        fn csv_round_trip_is_bit_exact(seed in any::<u64>(), n in 1usize..7, alpha in 1e-3f64..10.0) {
            let f = SpectralField::random(n, 1.7, &mut ChaCha8Rng::seed_from_u64(seed));
            let (g, a) = from_csv(&to_csv(&f, alpha)).unwrap();
            prop_assert_eq!(bits(&f), bits(&g));
            prop_assert_eq!(a.to_bits(), alpha.to_bits());
        }
    }

    #[test]
    fn rejects_corrupt_input() {
        let f = SpectralField::zeros(2);
        let mut b = to_bytes(&f, 1.0);
        b.pop();
        assert!(matches!(from_bytes(&b), Err(Error::Format(_))));
        assert!(from_bytes(b"XXXX").is_err());
        assert!(from_csv("k1,k2,re,im\n").is_err());
        assert!(from_csv("# n=1,alpha=1\nk1,k2,re,im\n5,0,1,0\n").is_err());
        assert!(from_csv("# n=1,alpha=1\nk1,k2,re,im\n0,0,1,0\n").is_err());
    }

    #[test]
    fn file_round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let f = SpectralField::random(3, 1.0, &mut ChaCha8Rng::seed_from_u64(5));
        for name in ["f.bin", "f.csv"] {
            let p = dir.path().join(name);
            save(&p, &f, 0.5).unwrap();
            let (g, a) = load(&p).unwrap();
            assert_eq!(g, f);
            assert_eq!(a, 0.5);
        }
    }
}
