//! The `vort` command line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::calculus::{christoffel, curl, div, grad, is_killing, VectorField};
use crate::error::Error;
use crate::flow::{integrate_flow, FlowPath};
use crate::helmholtz::{helmholtz_decompose, GridFunction, GridVectorField, Lattice};
use crate::manifest::Manifest;
use crate::manifold::{BoundaryMode, Chart};
use crate::stokes::{verify_curl_stokes, verify_grad_line, IdentityReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "vort", version, about = "Riemannian vector calculus on coordinate charts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Christoffel symbols Γ^k_ij at a point, one `k i j value` row each.
    Christoffel {
        manifest: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Gradient of a scalar at a point.
    Grad {
        manifest: PathBuf,
        #[arg(long)]
        field: String,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Divergence of a contravariant field at a point.
    Div {
        manifest: PathBuf,
        #[arg(long)]
        field: String,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Curl 2-tensor A_ij at a point.
    Curl {
        manifest: PathBuf,
        #[arg(long)]
        field: String,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Killing test on the chart's sampling lattice.
    Killing {
        manifest: PathBuf,
        #[arg(long)]
        field: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Integral curve as CSV `t,x1,..,xn`.
    Flow {
        manifest: PathBuf,
        #[arg(long)]
        field: String,
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        #[arg(long)]
        steps: usize,
    },
    /// Helmholtz decomposition; writes Y.csv, Z.csv and phi.csv.
    Decompose {
        manifest: PathBuf,
        #[arg(long)]
        field: String,
        #[arg(long)]
        res: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Flow lines from a uniform seed grid as CSV `line_id,t,x1,..,xn`.
    Streamplot {
        manifest: PathBuf,
        #[arg(long)]
        field: String,
        #[arg(long)]
        seeds: usize,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Flux of curl X through a surface against the circulation around its boundary.
    StokesCheck {
        manifest: PathBuf,
        #[arg(long)]
        field: String,
        #[arg(long)]
        surface: String,
        #[arg(long, default_value_t = 64)]
        nodes: usize,
    },
    /// Line integral of grad f along a curve against the endpoint values.
    GradlineCheck {
        manifest: PathBuf,
        #[arg(long)]
        scalar: String,
        #[arg(long)]
        curve: String,
        #[arg(long, default_value_t = 64)]
        nodes: usize,
    },
}

/// `%.17g`-style formatting.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let fixed = format!("{:.*}", (16 - exp) as usize, x);
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    } else {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{exp}")
    }
}

fn load(path: &Path) -> anyhow::Result<Manifest> {
    Ok(Manifest::load(path)?)
}

fn report_line(r: &IdentityReport) -> String {
    format!(
        "lhs={} rhs={} abs_err={} nodes={}\n",
        num(r.lhs),
        num(r.rhs),
        num(r.abs_err),
        r.nodes
    )
}

fn csv_header(chart: &Chart, lead: &[&str], trail: &[String]) -> String {
    let mut cols: Vec<String> = lead.iter().map(|s| s.to_string()).collect();
    cols.extend(chart.coords().iter().cloned());
    cols.extend(trail.iter().cloned());
    cols.join(",") + "\n"
}

fn row(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(num).collect::<Vec<_>>().join(",")
}

fn write_vector_csv(path: &Path, chart: &Chart, x: &GridVectorField) -> anyhow::Result<()> {
    let n = chart.dim();
    let lat = x.lattice();
    let trail: Vec<String> = (1..=n).map(|i| format!("v{i}")).collect();
    let mut text = csv_header(chart, &[], &trail);
    for p in 0..lat.len() {
        text += &row(lat.point(p).into_iter().chain(x.at(p)));
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_scalar_csv(path: &Path, chart: &Chart, f: &GridFunction) -> anyhow::Result<()> {
    let lat = f.lattice();
    let mut text = csv_header(chart, &[], &["phi".to_string()]);
    for p in 0..lat.len() {
        text += &row(lat.point(p).into_iter().chain([f.values()[p]]));
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// `count` seeds at the cell centres of a uniform grid over the chart box,
/// row-major, with `ceil(count^(1/n))` cells per axis.
pub fn seed_grid(chart: &Chart, count: usize) -> Vec<Vec<f64>> {
    let n = chart.dim();
    let mut k = 1usize;
    while k.pow(n as u32) < count {
        k += 1;
    }
    (0..count)
        .map(|s| {
            let mut rem = s;
            let mut idx = vec![0; n];
            for a in (0..n).rev() {
                idx[a] = rem % k;
                rem /= k;
            }
            idx.iter()
                .zip(chart.domain())
                .map(|(&i, &(lo, hi))| lo + (i as f64 + 0.5) * (hi - lo) / k as f64)
                .collect()
        })
        .collect()
}

fn svg(chart: &Chart, lines: &[FlowPath]) -> String {
    let axes = [0, 1.min(chart.dim() - 1)];
    let flat = chart.dim() == 1;
    let coord = |y: &[f64], a: usize| if flat && a == 1 { 0.0 } else { y[axes[a]] };
    let (x0, x1) = chart.domain()[axes[0]];
    let (y0, y1) = if flat { (-1.0, 1.0) } else { chart.domain()[axes[1]] };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}">"#,
        num(x0),
        num(-y1),
        num(x1 - x0),
        num(y1 - y0)
    );
    let _ = writeln!(out, r#"<g transform="scale(1,-1)" fill="none" stroke="black">"#);
    for line in lines {
        let mut d = String::new();
        let mut prev: Option<&[f64]> = None;
        for (_, y) in &line.samples {
            let jump = prev.is_some_and(|p| {
                (0..chart.dim()).any(|a| {
                    chart.boundary()[a] == BoundaryMode::Periodic && {
                        let (lo, hi) = chart.domain()[a];
                        (y[a] - p[a]).abs() > 0.5 * (hi - lo)
                    }
                })
            });
            let cmd = if prev.is_none() || jump { "M" } else { "L" };
            let _ = write!(d, "{cmd}{} {} ", num(coord(y, 0)), num(coord(y, 1)));
            prev = Some(y);
        }
        let _ = writeln!(
            out,
            r#"<path d="{}" stroke-width="1" vector-effect="non-scaling-stroke"/>"#,
            d.trim_end()
        );
    }
    out += "</g>\n</svg>\n";
    out
}

fn streamplot(
    m: &Manifest,
    x: &VectorField,
    seeds: usize,
    t_end: f64,
    steps: usize,
) -> anyhow::Result<(String, Vec<FlowPath>)> {
    if seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let chart = &m.chart;
    let results: Vec<(FlowPath, bool)> = seed_grid(chart, seeds)
        .par_iter()
        .map(|s| {
            let start = chart.point(s)?;
            match integrate_flow(x, &start, t_end, steps) {
                Ok(path) => Ok((path, false)),
                Err(Error::FlowEvaluation { .. }) => Ok((
                    FlowPath {
                        field: String::new(),
                        step: t_end / steps as f64,
                        samples: vec![(0.0, s.clone())],
                        exited: true,
                    },
                    true,
                )),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, Error>>()?;
    let mut text = csv_header(chart, &["line_id", "t"], &[]);
    let mut notes = String::new();
    for (i, (path, _)) in results.iter().enumerate() {
        for (t, y) in &path.samples {
            let _ = writeln!(text, "{i},{}", row([*t].into_iter().chain(y.iter().copied())));
        }
        if path.exited {
            let _ = writeln!(notes, "# line {i} exited domain");
        }
    }
    text += &notes;
    Ok((text, results.into_iter().map(|(p, _)| p).collect()))
}

fn execute(cmd: Command, out: &mut dyn Write) -> anyhow::Result<()> {
    match cmd {
        Command::Christoffel { manifest, at } => {
            let m = load(&manifest)?;
            let p = m.chart_point(&at)?;
            let gamma = christoffel(&m.metric, &p)?;
            let n = m.chart.dim();
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        writeln!(out, "{} {} {} {}", k + 1, i + 1, j + 1, num(gamma.get(k, i, j)))?;
                    }
                }
            }
        }
        Command::Grad { manifest, field, at } => {
            let m = load(&manifest)?;
            let p = m.chart_point(&at)?;
            let g = grad(&m.metric, m.scalar(&field)?)?;
            for (i, v) in g.eval(&p)?.into_iter().enumerate() {
                writeln!(out, "{} {}", i + 1, num(v))?;
            }
        }
        Command::Div { manifest, field, at } => {
            let m = load(&manifest)?;
            let p = m.chart_point(&at)?;
            let d = div(&m.metric, m.field(&field)?)?;
            writeln!(out, "{}", num(d.eval(&p)?))?;
        }
        Command::Curl { manifest, field, at } => {
            let m = load(&manifest)?;
            let p = m.chart_point(&at)?;
            let a = curl(&m.metric, m.field(&field)?)?;
            for (i, r) in a.eval(&p)?.into_iter().enumerate() {
                for (j, v) in r.into_iter().enumerate() {
                    writeln!(out, "{} {} {}", i + 1, j + 1, num(v))?;
                }
            }
        }
        Command::Killing { manifest, field, tol } => {
            let m = load(&manifest)?;
            let r = is_killing(&m.metric, m.field(&field)?, tol)?;
            writeln!(
                out,
                "lie_residual={} div_residual={} killing={} divergence_free={}",
                num(r.lie_residual),
                num(r.div_residual),
                r.is_killing,
                r.divergence_free
            )?;
        }
        Command::Flow {
            manifest,
            field,
            from,
            t,
            steps,
        } => {
            let m = load(&manifest)?;
            let start = m.chart_point(&from)?;
            let path = integrate_flow(m.field(&field)?, &start, t, steps)?;
            let mut text = csv_header(&m.chart, &["t"], &[]);
            for (t, y) in &path.samples {
                text += &row([*t].into_iter().chain(y.iter().copied()));
                text.push('\n');
            }
            if path.exited {
                text += "# exited domain\n";
            }
            out.write_all(text.as_bytes())?;
        }
        Command::Decompose {
            manifest,
            field,
            res,
            out: dir,
        } => {
            let m = load(&manifest)?;
            let x = m.field(&field)?;
            let lattice = Arc::new(Lattice::uniform(m.chart.clone(), res)?);
            let d = helmholtz_decompose(&m.metric, lattice, x)?;
            fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
            write_vector_csv(&dir.join("Y.csv"), &m.chart, &d.y)?;
            write_vector_csv(&dir.join("Z.csv"), &m.chart, &d.z)?;
            write_scalar_csv(&dir.join("phi.csv"), &m.chart, &d.phi)?;
            writeln!(
                out,
                "max_divY={} max_curlZ={} residual={}",
                num(d.max_div_y),
                num(d.max_curl_z),
                num(d.solve.residual)
            )?;
        }
        Command::Streamplot {
            manifest,
            field,
            seeds,
            t,
            steps,
            out: path,
            svg: svg_path,
        } => {
            let m = load(&manifest)?;
            let (csv, lines) = streamplot(&m, m.field(&field)?, seeds, t, steps)?;
            fs::write(&path, csv).with_context(|| format!("cannot write {}", path.display()))?;
            if let Some(p) = svg_path {
                fs::write(&p, svg(&m.chart, &lines)).with_context(|| format!("cannot write {}", p.display()))?;
            }
        }
        Command::StokesCheck {
            manifest,
            field,
            surface,
            nodes,
        } => {
            let m = load(&manifest)?;
            let r = verify_curl_stokes(m.field(&field)?, m.surface(&surface)?, nodes)?;
            out.write_all(report_line(&r).as_bytes())?;
        }
        Command::GradlineCheck {
            manifest,
            scalar,
            curve,
            nodes,
        } => {
            let m = load(&manifest)?;
            let r = verify_grad_line(&m.chart, m.scalar(&scalar)?, m.curve(&curve)?, nodes)?;
            out.write_all(report_line(&r).as_bytes())?;
        }
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<Error>() {
        Some(Error::NotConverged { .. }) | Some(Error::Compatibility { .. }) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            exit_code(&e)
        }
    }
}
