//! Plain-text output formats. Floats are written in the shortest form that
//! reads back to the same value, so identical runs give identical bytes.

use std::io::{self, Write};

use crate::front_tracking::{EventRecord, EventType, SeriesRow};
use crate::functionals::FunctionalValues;
use crate::piecewise::PiecewiseConstant;

pub const EVENTS_HEADER: &str = "t,x,type,family_in,sigma_in1,sigma_in2,sigma_out1,sigma_out2,V,Q,J";
pub const SERIES_HEADER: &str = "t,V,Q,J,TVstar,max_rarefaction,front_count";

/// One row per event; the initialization record is not an event and is skipped.
pub fn write_events<W: Write>(mut w: W, events: &[EventRecord]) -> io::Result<()> {
    writeln!(w, "{EVENTS_HEADER}")?;
    for e in events.iter().filter(|e| e.event_type != EventType::Init) {
        let families: Vec<String> = e.incoming.iter().map(|(f, _)| f.number().to_string()).collect();
        let sigma = |i: usize| e.incoming.get(i).map(|s| s.1.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            e.t,
            e.x,
            e.event_type.as_str(),
            families.join("-"),
            sigma(0),
            sigma(1),
            e.outgoing[0],
            e.outgoing[1],
            e.after.v,
            e.after.q,
            e.after.j
        )?;
    }
    Ok(())
}

pub fn write_series<W: Write>(mut w: W, rows: &[SeriesRow]) -> io::Result<()> {
    writeln!(w, "{SERIES_HEADER}")?;
    for r in rows {
        let FunctionalValues { t, v, q, j, tv_star } = r.values;
        writeln!(w, "{t},{v},{q},{j},{tv_star},{},{}", r.max_rarefaction, r.front_count)?;
    }
    Ok(())
}

/// Blocks `t=<time>` followed by `x,u1,u2` rows, one per constant piece
/// starting at `x`; blocks are separated by a blank line.
pub fn write_snapshots<W: Write>(mut w: W, snapshots: &[(f64, PiecewiseConstant)]) -> io::Result<()> {
    for (i, (t, u)) in snapshots.iter().enumerate() {
        if i > 0 {
            writeln!(w)?;
        }
        writeln!(w, "t={t}")?;
        writeln!(w, "x,u1,u2")?;
        let starts = std::iter::once(0.0).chain(u.breakpoints.iter().copied());
        for (x, v) in starts.zip(&u.values) {
            writeln!(w, "{x},{},{}", v.u1(), v.u2())?;
        }
    }
    Ok(())
}

/// Reads back what [`write_snapshots`] wrote.
pub fn read_snapshots(text: &str, length: f64) -> Option<Vec<(f64, PiecewiseConstant)>> {
    let mut out = Vec::new();
    for block in text.split("\n\n").filter(|b| !b.trim().is_empty()) {
        let mut lines = block.lines();
        let t: f64 = lines.next()?.strip_prefix("t=")?.parse().ok()?;
        lines.next()?;
        let mut breakpoints = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let mut it = line.split(',').map(|s| s.parse::<f64>());
            let (x, u1, u2) = (it.next()?.ok()?, it.next()?.ok()?, it.next()?.ok()?);
            if i > 0 {
                breakpoints.push(x);
            }
            values.push(crate::linalg::StateVec::new(u1, u2));
        }
        out.push((t, PiecewiseConstant::new(length, breakpoints, values).ok()?));
    }
    Some(out)
}
