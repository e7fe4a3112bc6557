//! CSV and raw binary serialization. Both round-trip bit-exactly.
//!
//! CSV: a comment line `# dim,L,n`, a line with those three values, then one value per line
//! in row-major order. Binary: 32-byte header (`b"CHGF"`, dim as u32, n as u64, L as f64,
//! 8 reserved zero bytes, all little-endian) followed by the values as f64 LE.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Grid, GridFunction};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CHGF";
const HEADER_LEN: usize = 32;

impl GridFunction {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let g = self.grid();
        writeln!(w, "# dim,L,n")?;
        writeln!(w, "{},{:e},{}", g.dim(), g.half_width(), g.n())?;
        for v in self.values() {
            writeln!(w, "{v:e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut header = None;
        for line in lines.by_ref() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            header = Some(t.to_string());
            break;
        }
        let header = header.ok_or_else(|| Error::Parse("missing grid header".into()))?;
        let fields: Vec<&str> = header.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!("grid header needs dim,L,n: {header:?}")));
        }
        let dim: usize = parse(fields[0])?;
        let half_width: f64 = parse(fields[1])?;
        let n: usize = parse(fields[2])?;
        let grid = Grid::new(dim, half_width, n)?;
        let mut values = Vec::with_capacity(grid.len());
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            values.push(parse::<f64>(t)?);
        }
        GridFunction::new(grid, values)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let g = self.grid();
        let mut header = [0u8; HEADER_LEN];
        header[0..4].copy_from_slice(MAGIC);
        header[4..8].copy_from_slice(&(g.dim() as u32).to_le_bytes());
        header[8..16].copy_from_slice(&(g.n() as u64).to_le_bytes());
        header[16..24].copy_from_slice(&g.half_width().to_le_bytes());
        w.write_all(&header)?;
        for v in self.values() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)?;
        if &header[0..4] != MAGIC {
            return Err(Error::Parse("bad magic, expected CHGF".into()));
        }
        let dim = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let n = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
        let half_width = f64::from_le_bytes(header[16..24].try_into().unwrap());
        let grid = Grid::new(dim, half_width, n)?;
        let mut bytes = Vec::with_capacity(grid.len() * 8);
        r.read_to_end(&mut bytes)?;
        if bytes.len() != grid.len() * 8 {
            return Err(Error::Parse(format!(
                "expected {} payload bytes, got {}",
                grid.len() * 8,
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        GridFunction::new(grid, values)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(BufReader::new(File::open(path)?))
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_binary(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_binary(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_binary(BufReader::new(File::open(path)?))
    }
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("cannot parse {s:?}")))
}
