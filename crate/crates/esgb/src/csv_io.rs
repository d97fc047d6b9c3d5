//! Trajectory serialization. One row per accepted step, full f64 precision
//! so written files round-trip bit for bit.

use crate::integrator::{Direction, Trajectory};
use std::io::{self, BufRead, Write};
use thiserror::Error;

pub const HEADER: &str = "t,a,H,phi,phidot,constraint,power,denominator";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajRow {
    pub t: f64,
    pub a: f64,
    pub h: f64,
    pub phi: f64,
    pub phidot: f64,
    pub constraint: f64,
    pub power: f64,
    pub denominator: f64,
}

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line 1: expected header `{HEADER}`, got `{0}`")]
    BadHeader(String),
    #[error("line {line}: expected 8 fields, got {got}")]
    FieldCount { line: usize, got: usize },
    #[error("line {line}, field `{field}`: unparseable number `{text}`")]
    BadNumber {
        line: usize,
        field: &'static str,
        text: String,
    },
}

pub fn rows_from(traj: &Trajectory) -> Vec<TrajRow> {
    traj.samples
        .iter()
        .zip(traj.diags.iter())
        .map(|(s, d)| TrajRow {
            t: s.t,
            a: s.a,
            h: s.h,
            phi: s.phi,
            phidot: s.phi_dot,
            constraint: d.constraint,
            power: d.power,
            denominator: d.denominator,
        })
        .collect()
}

/// Merge a backward and a forward run launched from the same state into one
/// ascending-time table. The shared launch row appears once.
pub fn stitch(backward: &Trajectory, forward: &Trajectory) -> Vec<TrajRow> {
    debug_assert_eq!(backward.direction, Direction::Backward);
    debug_assert_eq!(forward.direction, Direction::Forward);
    let mut rows = rows_from(backward);
    rows.reverse();
    let fwd = rows_from(forward);
    let skip = usize::from(
        !rows.is_empty() && !fwd.is_empty() && rows[rows.len() - 1].t == fwd[0].t,
    );
    rows.extend(fwd.into_iter().skip(skip));
    rows
}

pub fn write_csv(w: &mut impl Write, rows: &[TrajRow]) -> io::Result<()> {
    writeln!(w, "{HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.t, r.a, r.h, r.phi, r.phidot, r.constraint, r.power, r.denominator
        )?;
    }
    Ok(())
}

const FIELDS: [&str; 8] = [
    "t",
    "a",
    "H",
    "phi",
    "phidot",
    "constraint",
    "power",
    "denominator",
];

pub fn read_csv(r: impl BufRead) -> Result<Vec<TrajRow>, CsvError> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim_end() != HEADER {
        return Err(CsvError::BadHeader(header));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 2;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != FIELDS.len() {
            return Err(CsvError::FieldCount {
                line: lineno,
                got: parts.len(),
            });
        }
        let mut v = [0.0f64; 8];
        for (j, (part, field)) in parts.iter().zip(FIELDS).enumerate() {
            v[j] = part.parse().map_err(|_| CsvError::BadNumber {
                line: lineno,
                field,
                text: (*part).to_owned(),
            })?;
        }
        rows.push(TrajRow {
            t: v[0],
            a: v[1],
            h: v[2],
            phi: v[3],
            phidot: v[4],
            constraint: v[5],
            power: v[6],
            denominator: v[7],
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial_data::{make_initial_state, Branch, FreeData};
    use crate::integrator::{integrate, IntegratorConfig};

    fn sample_rows() -> Vec<TrajRow> {
        let st = make_initial_state(&FreeData {
            a0: 1.0,
            beta: 1.0 / 3.0,
            alpha: 0.0,
            s: Branch::Plus,
        });
        let cfg = IntegratorConfig::default();
        let bwd = integrate(&st, -2.0, &cfg);
        let fwd = integrate(&st, 5.0, &cfg);
        stitch(&bwd, &fwd)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let rows = sample_rows();
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), back.len());
        for (a, b) in rows.iter().zip(back.iter()) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
            assert_eq!(a.a.to_bits(), b.a.to_bits());
            assert_eq!(a.h.to_bits(), b.h.to_bits());
            assert_eq!(a.phi.to_bits(), b.phi.to_bits());
            assert_eq!(a.phidot.to_bits(), b.phidot.to_bits());
            assert_eq!(a.constraint.to_bits(), b.constraint.to_bits());
            assert_eq!(a.power.to_bits(), b.power.to_bits());
            assert_eq!(a.denominator.to_bits(), b.denominator.to_bits());
        }
    }

    #[test]
    fn stitched_rows_ascend_with_single_launch_row() {
        let rows = sample_rows();
        assert!(rows.windows(2).all(|w| w[0].t < w[1].t));
        assert_eq!(rows.iter().filter(|r| r.t == 0.0).count(), 1);
        assert!(rows.first().unwrap().t < 0.0);
        assert!(rows.last().unwrap().t > 0.0);
    }

    #[test]
    fn header_and_shape_are_enforced() {
        let bad = "t,a,H,phi\n0,1,2,3\n";
        assert!(matches!(
            read_csv(bad.as_bytes()),
            Err(CsvError::BadHeader(_))
        ));

        let short = format!("{HEADER}\n0.0,1.0\n");
        assert!(matches!(
            read_csv(short.as_bytes()),
            Err(CsvError::FieldCount { line: 2, got: 2 })
        ));

        let garbled = format!("{HEADER}\n0,1,2,3,4,5,6,x\n");
        match read_csv(garbled.as_bytes()) {
            Err(CsvError::BadNumber { line, field, text }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "denominator");
                assert_eq!(text, "x");
            }
            other => panic!("expected BadNumber, got {other:?}"),
        }
    }

    #[test]
    fn nan_power_survives_round_trip() {
        let mut rows = sample_rows();
        rows[0].power = f64::NAN;
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert!(back[0].power.is_nan());
    }
}
