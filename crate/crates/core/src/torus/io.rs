//! Field dumps.
//!
//! CSV: one header line `# L1=<f>,L2=<f>,M1=<n>,M2=<n>` followed by `M1`
//! rows of `M2` comma-separated samples (row-major, row index along `L1`).
//!
//! Binary: magic `CSHF`, then `M1`, `M2` as little-endian `u64`, `L1`, `L2`
//! as little-endian `f64`, then `M1·M2` little-endian `f64` samples.

use std::io::{BufRead, Read, Write};

use super::{Field, FieldError, TorusGrid};

const MAGIC: &[u8; 4] = b"CSHF";

pub fn write_csv<W: Write>(field: &Field, mut out: W) -> Result<(), FieldError> {
    let g = field.grid();
    writeln!(out, "# L1={},L2={},M1={},M2={}", g.l1(), g.l2(), g.m1(), g.m2())?;
    for row in field.values().chunks(g.m2()) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R) -> Result<Field, FieldError> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| FieldError::Format("empty input".into()))??;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| FieldError::Format("missing header".into()))?;
    let mut l1 = None;
    let mut l2 = None;
    let mut m1 = None;
    let mut m2 = None;
    for part in header.split(',') {
        let (k, v) = part
            .trim()
            .split_once('=')
            .ok_or_else(|| FieldError::Format(format!("bad header entry `{part}`")))?;
        let bad = |_| FieldError::Format(format!("bad header value `{part}`"));
        match k {
            "L1" => l1 = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "L2" => l2 = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "M1" => m1 = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "M2" => m2 = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            other => return Err(FieldError::Format(format!("unknown header key `{other}`"))),
        }
    }
    let missing = || FieldError::Format("incomplete header".into());
    let grid = TorusGrid::new(
        l1.ok_or_else(missing)?,
        l2.ok_or_else(missing)?,
        m1.ok_or_else(missing)?,
        m2.ok_or_else(missing)?,
    )?;
    let mut values = Vec::with_capacity(grid.len());
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for tok in line.split(',') {
            values.push(
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| FieldError::Format(format!("bad sample `{tok}`: {e}")))?,
            );
        }
    }
    Field::from_values(grid, values)
}

pub fn write_binary<W: Write>(field: &Field, mut out: W) -> Result<(), FieldError> {
    let g = field.grid();
    out.write_all(MAGIC)?;
    out.write_all(&(g.m1() as u64).to_le_bytes())?;
    out.write_all(&(g.m2() as u64).to_le_bytes())?;
    out.write_all(&g.l1().to_le_bytes())?;
    out.write_all(&g.l2().to_le_bytes())?;
    for v in field.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<Field, FieldError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(FieldError::Format("bad magic".into()));
    }
    let mut b8 = [0u8; 8];
    let mut next = |input: &mut R| -> Result<[u8; 8], FieldError> {
        input.read_exact(&mut b8)?;
        Ok(b8)
    };
    let m1 = u64::from_le_bytes(next(&mut input)?) as usize;
    let m2 = u64::from_le_bytes(next(&mut input)?) as usize;
    let l1 = f64::from_le_bytes(next(&mut input)?);
    let l2 = f64::from_le_bytes(next(&mut input)?);
    let grid = TorusGrid::new(l1, l2, m1, m2)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        values.push(f64::from_le_bytes(next(&mut input)?));
    }
    Field::from_values(grid, values)
}
