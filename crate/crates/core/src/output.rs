//! CSV and metadata writers shared by the solvers and the CLI.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::radial::RadialCoefficients;

/// Lossless decimal rendering (17 significant digits).
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header `t,amp_s0,...,amp_sM,amp_ball`.
pub fn amplitude_header(depth: u32) -> String {
    let mut h = String::from("t");
    for j in 0..=depth {
        let _ = write!(h, ",amp_s{j}");
    }
    h.push_str(",amp_ball");
    h
}

/// One amplitude row per sample: `|rho_j(t)|` for every basis component.
pub fn write_amplitudes<W: Write>(
    mut w: W,
    depth: u32,
    times: &[f64],
    states: &[RadialCoefficients],
) -> io::Result<()> {
    writeln!(w, "{}", amplitude_header(depth))?;
    for (t, s) in times.iter().zip(states) {
        let mut line = fmt_float(*t);
        for c in s.iter() {
            line.push(',');
            line.push_str(&fmt_float(c.norm()));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Rows `t,component,re,im` for the selected components.
pub fn write_profile<W: Write>(
    mut w: W,
    components: &[usize],
    times: &[f64],
    states: &[RadialCoefficients],
) -> io::Result<()> {
    writeln!(w, "t,component,re,im")?;
    for (t, s) in times.iter().zip(states) {
        for &j in components {
            if let Some(c) = s.get(j) {
                writeln!(w, "{},{j},{},{}", fmt_float(*t), fmt_float(c.re), fmt_float(c.im))?;
            }
        }
    }
    Ok(())
}
