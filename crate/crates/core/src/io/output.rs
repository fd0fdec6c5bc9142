//! CSV and JSON result files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::engine::{SimConfig, SimOutput};
use crate::io::scenario::OutputKind;
use crate::link::uniform_positions;

/// Grid points across each link in the Moskowitz files.
pub const MOSKOWITZ_POINTS: usize = 101;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write `{path}`: {source}")]
    Write { path: String, source: std::io::Error },
}

/// Formats with 12 significant digits, `%.12g` style.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x.is_infinite() {
            format!("{x}")
        } else {
            "0".into()
        };
    }
    let exp = x.abs().log10().floor() as i32;
    // Rounding can carry into the next decade; format once in scientific form to find out.
    let sci = format!("{:.11e}", x);
    let (mantissa, e) = sci.split_once('e').expect("scientific format");
    let e: i32 = e.parse().expect("exponent");
    let exp = if e != exp { e } else { exp };
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), e)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[derive(Serialize)]
struct Meta<'a> {
    generator: &'static str,
    version: &'static str,
    config: &'a SimConfig,
    seed: u64,
    links: Vec<&'a str>,
    steps: usize,
    wall_time_seconds: f64,
}

pub fn flows_csv(output: &SimOutput) -> String {
    let mut s = String::from("t,link,q_in,q_out\n");
    for n in 0..output.steps() {
        let t = n as f64 * output.config.dt;
        for (link, state) in output.network.links().iter().zip(&output.links) {
            let _ = writeln!(s, "{},{},{},{}", fmt_num(t), link.name, fmt_num(state.q_in[n]), fmt_num(state.q_out[n]));
        }
    }
    s
}

pub fn cumulative_csv(output: &SimOutput) -> String {
    let mut s = String::from("t,link,N_up,N_down\n");
    for n in 0..=output.steps() {
        for (link, state) in output.network.links().iter().zip(&output.links) {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                fmt_num(state.time(n)),
                link.name,
                fmt_num(state.up.counts()[n]),
                fmt_num(state.down.counts()[n])
            );
        }
    }
    s
}

pub fn spillback_csv(output: &SimOutput) -> String {
    let mut s = String::from("t,link,flag\n");
    for n in 0..=output.steps() {
        let t = n as f64 * output.config.dt;
        for (l, link) in output.network.links().iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", fmt_num(t), link.name, u8::from(output.spillback[l][n]));
        }
    }
    s
}

/// Long-format `N(t, x)` on the engine time grid; one extra `is_shock = 1`
/// row per time marks the separating shock.
pub fn moskowitz_csv(output: &SimOutput, link: usize) -> String {
    let state = &output.links[link];
    let times = output.times();
    let xs = uniform_positions(state.params.length, MOSKOWITZ_POINTS);
    let grid = state.reconstruct_moskowitz(&times, &xs, output.config.eps_n);
    let mut s = String::from("t,x,N,is_shock\n");
    for (i, &t) in times.iter().enumerate() {
        for (j, &x) in xs.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},0", fmt_num(t), fmt_num(x), fmt_num(grid.values[i][j]));
        }
        let x = grid.shock[i];
        let _ = writeln!(s, "{},{},{},1", fmt_num(t), fmt_num(x), fmt_num(state.count_at(t, x)));
    }
    s
}

pub fn meta_json(output: &SimOutput) -> String {
    let meta = Meta {
        generator: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: &output.config,
        seed: output.config.seed,
        links: output.network.links().iter().map(|l| l.name.as_str()).collect(),
        steps: output.steps(),
        wall_time_seconds: output.wall_time,
    };
    serde_json::to_string_pretty(&meta).expect("meta serialises")
}

/// Writes every result file into `dir`, creating it if needed, and returns the paths written.
pub fn emit_outputs(output: &SimOutput, requested: &[OutputKind], dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    let write = |name: &str, body: String| -> Result<PathBuf, OutputError> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|source| OutputError::Write { path: path.display().to_string(), source })?;
        Ok(path)
    };
    fs::create_dir_all(dir).map_err(|source| OutputError::Write { path: dir.display().to_string(), source })?;
    let mut written = vec![
        write("flows.csv", flows_csv(output))?,
        write("cumulative.csv", cumulative_csv(output))?,
        write("spillback.csv", spillback_csv(output))?,
    ];
    if requested.contains(&OutputKind::Moskowitz) {
        for (l, link) in output.network.links().iter().enumerate() {
            written.push(write(&format!("moskowitz_{}.csv", link.name), moskowitz_csv(output, l))?);
        }
    }
    written.push(write("meta.json", meta_json(output))?);
    Ok(written)
}
