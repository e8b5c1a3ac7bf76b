//! Plain-text checkpoints and CSV tables.
//!
//! A checkpoint is line oriented:
//!
//! ```text
//! bardina-checkpoint 1
//! trunc 15
//! alpha 0.1
//! gamma 1
//! t 30
//! coefficients 256
//! 0
//! 0.0123...
//! ```
//!
//! with one vorticity coefficient per line in degree-major order. Floats
//! use Rust's shortest round-trip formatting, so a write/read cycle is
//! bit-exact.

use crate::error::{Error, Result};
use crate::sht::{mode_count, SpectralScalar};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

pub const CHECKPOINT_MAGIC: &str = "bardina-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub trunc: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub t: f64,
    pub omega: SpectralScalar,
}

pub fn write_checkpoint(mut w: impl Write, cp: &Checkpoint) -> Result<()> {
    writeln!(w, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}")?;
    writeln!(w, "trunc {}", cp.trunc)?;
    writeln!(w, "alpha {}", cp.alpha)?;
    writeln!(w, "gamma {}", cp.gamma)?;
    writeln!(w, "t {}", cp.t)?;
    writeln!(w, "coefficients {}", cp.omega.coeffs().len())?;
    for c in cp.omega.coeffs() {
        writeln!(w, "{c:e}")?;
    }
    w.flush()?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn fail<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Checkpoint { line: self.line, msg: msg.into() })
    }

    fn next_line(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => self.fail("unexpected end of file"),
        }
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let line = self.next_line()?;
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(k), Some(v), None) if k == key => match v.parse() {
                Ok(x) => Ok(x),
                Err(_) => self.fail(format!("cannot parse value {v:?} for {key}")),
            },
            _ => self.fail(format!("expected `{key} <value>`, found {line:?}")),
        }
    }
}

pub fn read_checkpoint(r: impl BufRead) -> Result<Checkpoint> {
    let mut lines = Lines { inner: r.lines(), line: 0 };
    let version: u32 = lines.keyed(CHECKPOINT_MAGIC)?;
    if version != CHECKPOINT_VERSION {
        return lines.fail(format!("unsupported version {version}"));
    }
    let trunc: usize = lines.keyed("trunc")?;
    if trunc == 0 {
        return lines.fail("truncation must be at least 1");
    }
    let alpha: f64 = lines.keyed("alpha")?;
    let gamma: f64 = lines.keyed("gamma")?;
    let t: f64 = lines.keyed("t")?;
    let count: usize = lines.keyed("coefficients")?;
    if count != mode_count(trunc) {
        return lines
            .fail(format!("expected {} coefficients for degree {trunc}, header says {count}", mode_count(trunc)));
    }
    let mut coeffs = Vec::with_capacity(count);
    for _ in 0..count {
        let l = lines.next_line()?;
        match l.trim().parse::<f64>() {
            Ok(x) if x.is_finite() => coeffs.push(x),
            _ => return lines.fail(format!("bad coefficient {l:?}")),
        }
    }
    lines.line += 1;
    if let Some(extra) = lines.inner.next() {
        if !extra?.trim().is_empty() {
            return lines.fail("trailing data after coefficients");
        }
    }
    let omega = SpectralScalar::from_coeffs(trunc, coeffs)?;
    Ok(Checkpoint { trunc, alpha, gamma, t, omega })
}

/// Writes `rows` with a header taken from the row type's field names.
pub fn write_csv<T: Serialize>(w: impl Write, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(r: impl std::io::Read) -> Result<Vec<T>> {
    csv::Reader::from_reader(r).deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Cumulative exponent sum `λ_1 + … + λ_k` over one averaging window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovRow {
    pub window: usize,
    pub t: f64,
    pub k: usize,
    pub cumulative_sum: f64,
}

/// Final averaged exponent `λ_k` and cumulative sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentRow {
    pub k: usize,
    pub exponent: f64,
    pub cumulative_sum: f64,
}

/// Certified enclosure of `R(m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemainderRow {
    pub m: f64,
    pub r_low: f64,
    pub r_high: f64,
}

/// Certified enclosure of `F(m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub m: f64,
    pub f_low: f64,
    pub f_high: f64,
}

/// One randomized family draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiebRow {
    pub n: usize,
    pub m: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// One point of a dimension-bound sweep; `norm` is the forcing norm
/// entering the active branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub alpha: f64,
    pub gamma: f64,
    pub norm: f64,
    pub bound: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DiagnosticsRecord;
    use rand::{Rng, SeedableRng};

    fn sample() -> Checkpoint {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let trunc = 4;
        let mut omega = SpectralScalar::zeros(trunc);
        for c in &mut omega.coeffs_mut()[1..] {
            *c = rng.random_range(-1.0..1.0) * 1e-3f64.powi(rng.random_range(0..4));
        }
        Checkpoint { trunc, alpha: 0.1, gamma: 1.0 / 3.0, t: 12.5, omega }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let cp = sample();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &cp).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, cp);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("bardina-checkpoint 1\ntrunc 4\n"));
    }

    fn corrupt(edit: impl Fn(&mut Vec<String>)) -> Error {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &sample()).unwrap();
        let mut lines: Vec<String> = String::from_utf8(buf).unwrap().lines().map(String::from).collect();
        edit(&mut lines);
        read_checkpoint(lines.join("\n").as_bytes()).unwrap_err()
    }

    #[test]
    fn checkpoint_errors_carry_line_numbers() {
        let line_of = |e: Error| match e {
            Error::Checkpoint { line, .. } => line,
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(line_of(corrupt(|l| l[0] = "bardina-checkpoint 9".into())), 1);
        assert_eq!(line_of(corrupt(|l| l[2] = "alpha x".into())), 3);
        assert_eq!(line_of(corrupt(|l| l[5] = "coefficients 3".into())), 6);
        assert_eq!(line_of(corrupt(|l| l[9] = "nan".into())), 10);
        assert_eq!(line_of(corrupt(|l| l.truncate(20))), 21);
        assert_eq!(line_of(corrupt(|l| l.push("7".into()))), 32);
        assert_eq!(line_of(corrupt(|l| l[1] = "trunk 4".into())), 2);
    }

    #[test]
    fn diagnostics_csv_header_matches_fields() {
        let rec = DiagnosticsRecord {
            t: 0.5,
            energy_alpha: 1.0,
            enstrophy_alpha: 2.0,
            rot_u_l2: 3.0,
            running_time_avg_rot: 4.0,
            slack_energy: 0.1,
            slack_enstrophy: 0.2,
            slack_time_avg_g: 0.3,
            slack_time_avg_rot_g: 0.4,
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, [rec, rec]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "t,energy_alpha,enstrophy_alpha,rot_u_l2,running_time_avg_rot,\
             slack_energy,slack_enstrophy,slack_time_avg_g,slack_time_avg_rot_g"
        );
        let back: Vec<DiagnosticsRecord> = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, vec![rec, rec]);
    }

    #[test]
    fn table_headers() {
        let mut buf = Vec::new();
        write_csv(&mut buf, [LiebRow { n: 1, m: 2.0, lhs: 0.1, rhs: 0.2, slack: 0.1 }]).unwrap();
        assert!(buf.starts_with(b"n,m,lhs,rhs,slack\n"));
        let mut buf = Vec::new();
        write_csv(&mut buf, [SeriesRow { m: 1.0, f_low: 0.5, f_high: 0.6 }]).unwrap();
        assert!(buf.starts_with(b"m,f_low,f_high\n"));
        let mut buf = Vec::new();
        write_csv(&mut buf, [BoundRow { alpha: 1.0, gamma: 1.0, norm: 1.0, bound: 1.0 }]).unwrap();
        assert!(buf.starts_with(b"alpha,gamma,norm,bound\n"));
    }
}
