//! CSV serialisation: header `t,x,value`, row-major by time then space,
//! 17-significant-digit decimals so values round-trip exactly.

use crate::grid::{GridFunction, SpaceGrid, SpaceTimeFunction, TimeGrid};
use std::io::{self, Write};

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_space_time<W: Write>(
    out: &mut W,
    u: &SpaceTimeFunction,
    sg: &SpaceGrid,
    tg: &TimeGrid,
) -> io::Result<()> {
    writeln!(out, "t,x,value")?;
    for n in 0..=u.n_steps() {
        let t = tg.node(n);
        let frame = u.frame(n);
        for i in 0..frame.len() {
            writeln!(out, "{},{},{}", fmt(t), fmt(sg.node(i)), fmt(frame[i]))?;
        }
    }
    Ok(())
}

pub fn write_grid<W: Write>(out: &mut W, g: &GridFunction, sg: &SpaceGrid) -> io::Result<()> {
    writeln!(out, "t,x,value")?;
    for i in 0..g.len() {
        writeln!(out, "{},{},{}", fmt(0.0), fmt(sg.node(i)), fmt(g[i]))?;
    }
    Ok(())
}
