//! Extrapolation of a statistic on the `(k, l)` refinement plane, where the
//! velocity refinement is `p = 2^k` and the lattice spacing is `delta = 2^-l`.
//!
//! A missing cell is predicted from the three cells below it in `l` and the
//! three to its left in `k`, assuming each direction keeps the ratio of
//! successive increments it showed one step earlier.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Computed,
    Extrapolated,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Computed => "computed",
            Provenance::Extrapolated => "extrapolated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub value: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StatGrid {
    cells: BTreeMap<(i32, i32), Cell>,
}

impl StatGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_computed(values: impl IntoIterator<Item = ((i32, i32), f64)>) -> Self {
        let mut g = Self::new();
        for ((k, l), v) in values {
            g.insert_computed(k, l, v);
        }
        g
    }

    pub fn insert_computed(&mut self, k: i32, l: i32, value: f64) {
        self.cells.insert((k, l), Cell { value, provenance: Provenance::Computed });
    }

    pub fn get(&self, k: i32, l: i32) -> Option<f64> {
        self.cells.get(&(k, l)).map(|c| c.value)
    }

    pub fn cell(&self, k: i32, l: i32) -> Option<Cell> {
        self.cells.get(&(k, l)).copied()
    }

    /// Value only if it was computed, never an extrapolated one.
    pub fn computed(&self, k: i32, l: i32) -> Option<f64> {
        self.cell(k, l).filter(|c| c.provenance == Provenance::Computed).map(|c| c.value)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((i32, i32), Cell)> + '_ {
        self.cells.iter().map(|(&key, &c)| (key, c))
    }

    /// Columns `k,l,p,delta,value,provenance`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,l,p,delta,value,provenance")?;
        for ((k, l), c) in self.iter() {
            writeln!(
                out,
                "{},{},{},{:.12e},{:.12e},{}",
                k,
                l,
                2f64.powi(k),
                2f64.powi(-l),
                c.value,
                c.provenance.name()
            )?;
        }
        Ok(())
    }

    /// Reads the format written by [`StatGrid::write_csv`]. Lines starting with
    /// `#` are skipped; a missing provenance column means computed.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut g = Self::new();
        let mut header: Option<Vec<String>> = None;
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::Domain(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let Some(h) = &header else {
                header = Some(fields.iter().map(|s| s.to_string()).collect());
                continue;
            };
            let col = |name: &str| -> Result<&str> {
                h.iter()
                    .position(|x| x == name)
                    .and_then(|i| fields.get(i).copied())
                    .ok_or_else(|| Error::Domain(format!("line {}: missing column {name}", lineno + 1)))
            };
            let bad = |what: &str| Error::Domain(format!("line {}: bad {what}", lineno + 1));
            let k: i32 = col("k")?.parse().map_err(|_| bad("k"))?;
            let l: i32 = col("l")?.parse().map_err(|_| bad("l"))?;
            let value: f64 = col("value")?.parse().map_err(|_| bad("value"))?;
            let provenance = match col("provenance").unwrap_or("computed") {
                "computed" => Provenance::Computed,
                "extrapolated" => Provenance::Extrapolated,
                _ => return Err(bad("provenance")),
            };
            g.cells.insert((k, l), Cell { value, provenance });
        }
        Ok(g)
    }
}

/// Ratio of the newest increment to the one before. `0 / 0` is taken as 0,
/// i.e. the sequence has stopped moving.
fn increment_ratio(s1: f64, s2: f64, s3: f64, k: i32, l: i32) -> Result<f64> {
    let (num, den) = (s1 - s2, s2 - s3);
    if den == 0.0 {
        if num == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::NotExtrapolatable { k, l, reason: "zero increment below a nonzero one".into() });
    }
    Ok(num / den)
}

fn need(g: &StatGrid, k: i32, l: i32, target: (i32, i32)) -> Result<f64> {
    g.get(k, l).ok_or_else(|| Error::NotExtrapolatable {
        k: target.0,
        l: target.1,
        reason: format!("missing predecessor ({k},{l})"),
    })
}

/// Prediction for `(k, l)`: the mean of the vertical and horizontal
/// ratio-persistence estimates.
pub fn extrapolate_cell(g: &StatGrid, k: i32, l: i32) -> Result<f64> {
    let t = (k, l);
    let v: Vec<f64> = (1..=3).map(|d| need(g, k, l - d, t)).collect::<Result<_>>()?;
    let h: Vec<f64> = (1..=3).map(|d| need(g, k - d, l, t)).collect::<Result<_>>()?;
    let rv = increment_ratio(v[0], v[1], v[2], k, l)?;
    let rh = increment_ratio(h[0], h[1], h[2], k, l)?;
    let sv = v[0] + rv * (v[0] - v[1]);
    let sh = h[0] + rh * (h[0] - h[1]);
    Ok(0.5 * (sv + sh))
}

fn ready(g: &StatGrid, k: i32, l: i32) -> bool {
    (1..=3).all(|d| g.get(k, l - d).is_some() && g.get(k - d, l).is_some())
}

/// Fills `targets` in dependency order: each pass fills every cell whose six
/// predecessors are present. Already-present cells are left untouched.
pub fn propagate(g: &StatGrid, targets: &[(i32, i32)]) -> Result<StatGrid> {
    let mut out = g.clone();
    let mut pending: Vec<(i32, i32)> = targets.iter().copied().filter(|&(k, l)| out.get(k, l).is_none()).collect();
    pending.dedup();
    while !pending.is_empty() {
        let (now, later): (Vec<_>, Vec<_>) = pending.iter().partition(|&&(k, l)| ready(&out, k, l));
        if now.is_empty() {
            return Err(Error::UnresolvedCells(later));
        }
        let filled: Vec<((i32, i32), f64)> = now
            .iter()
            .map(|&(k, l)| Ok(((k, l), extrapolate_cell(&out, k, l)?)))
            .collect::<Result<_>>()?;
        for (key, value) in filled {
            out.cells.insert(key, Cell { value, provenance: Provenance::Extrapolated });
        }
        pending = later;
    }
    Ok(out)
}

/// Fills `targets` sorted by `l`, then `k`, failing on the first cell whose
/// predecessors are not yet available.
pub fn propagate_row_major(g: &StatGrid, targets: &[(i32, i32)]) -> Result<StatGrid> {
    let mut out = g.clone();
    let mut order: Vec<(i32, i32)> = targets.to_vec();
    order.sort_by_key(|&(k, l)| (l, k));
    order.dedup();
    for (k, l) in order {
        if out.get(k, l).is_some() {
            continue;
        }
        let value = extrapolate_cell(&out, k, l)?;
        out.cells.insert((k, l), Cell { value, provenance: Provenance::Extrapolated });
    }
    Ok(out)
}
