//! `torus`: lattice reduction, systoles and isosystolic defect reports for
//! conformal torus metrics.

mod format;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use torus_core::defect::{analyze, DefectReport};
use torus_core::revolution::{isothermal_chart, RevolutionChart};
use torus_core::systole::{systole_upper, SystoleEstimate};
use torus_core::{CurveSpec, LatticeSpec, MetricSpec, SweepSpec, TorusMetric};

use format::{cell, flag, round_value};

#[derive(Parser, Debug)]
#[command(name = "torus", version, about = "Loewner torus inequality checks for conformal metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Reduce a lattice to its modulus in the fundamental domain.
    Reduce(Common),
    /// Systole estimate and full inequality report for a metric spec.
    Analyze(Common),
    /// Systole estimate with its witness loop.
    Systole(Common),
    /// Convert a curve of revolution to a metric and analyze it.
    Revolution(Common),
    /// Run a metric family over a parameter grid and tabulate margins.
    Sweep(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Input spec (JSON).
    input: PathBuf,
    /// Grid size `N[,M]`: N samples along the first lattice vector, M along
    /// the second (default M = N).
    #[arg(long, value_parser = parse_grid, default_value = "256")]
    grid: Grid,
    /// Output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Also run at twice the resolution and report the differences.
    #[arg(long)]
    refine: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Grid {
    n: usize,
    m: usize,
}

impl Grid {
    fn doubled(self) -> Self {
        Self { n: 2 * self.n, m: 2 * self.m }
    }
}

fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let parse = |t: &str| -> std::result::Result<usize, String> {
        let v: usize = t.trim().parse().map_err(|_| format!("invalid grid size {t:?}"))?;
        if v < 4 {
            return Err(format!("grid size {v} is below 4"));
        }
        Ok(v)
    };
    match s.split_once(',') {
        Some((n, m)) => Ok(Grid { n: parse(n)?, m: parse(m)? }),
        None => {
            let n = parse(s)?;
            Ok(Grid { n, m: n })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Rendered output and whether any inequality failed beyond its budget.
struct Outcome {
    text: String,
    violation: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli.command);
    if let Err(e) = &result {
        eprintln!("error: {e:#}");
    }
    ExitCode::from(exit_code(&result))
}

/// 0 when every inequality holds, 2 on a violation beyond budget, 1 on an
/// input error.
fn exit_code(result: &Result<Outcome>) -> u8 {
    match result {
        Ok(Outcome { violation: false, .. }) => 0,
        Ok(Outcome { violation: true, .. }) => 2,
        Err(_) => 1,
    }
}

fn run(command: &Command) -> Result<Outcome> {
    let (common, outcome) = match command {
        Command::Reduce(c) => (c, reduce(c)?),
        Command::Analyze(c) => (c, analyze_cmd(c)?),
        Command::Systole(c) => (c, systole_cmd(c)?),
        Command::Revolution(c) => (c, revolution_cmd(c)?),
        Command::Sweep(c) => (c, sweep_cmd(c)?),
    };
    match &common.out {
        Some(path) => std::fs::write(path, &outcome.text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", outcome.text),
    }
    Ok(outcome)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn render_json(value: Value) -> String {
    let mut s = serde_json::to_string_pretty(&round_value(value)).unwrap();
    s.push('\n');
    s
}

fn reduce(c: &Common) -> Result<Outcome> {
    let text = read(&c.input)?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", c.input.display()))?;
    // accepts a lattice spec or a metric spec
    let spec = value.get("lattice").cloned().unwrap_or(value);
    let lattice_spec: LatticeSpec = serde_json::from_value(spec).context("lattice spec")?;
    let lattice = lattice_spec.to_lattice::<f64>()?;
    let reduced = lattice.reduce();
    let minima = lattice.successive_minima();
    let value = json!({
        "tau": [reduced.tau.re, reduced.tau.im],
        "sigma_sq": reduced.sigma_sq,
        "scale": reduced.scale,
        "rotation": reduced.rotation,
        "basis": reduced.basis(),
        "covolume": lattice.covolume(),
        "lambda1": minima.lambda1,
        "lambda2": minima.lambda2,
        "hermite_ratio": lattice.hermite_ratio(),
        "rectangular": reduced.is_rectangular(),
        "distance_to_eisenstein": reduced.distance_to_eisenstein(),
    });
    let text = match c.format {
        Format::Json => render_json(value),
        Format::Csv => {
            let mut s = String::from("field,value\n");
            for (k, v) in value.as_object().unwrap() {
                let v = round_value(v.clone());
                let shown = match v {
                    Value::Array(items) => items.iter().map(Value::to_string).collect::<Vec<_>>().join(" "),
                    other => other.to_string(),
                };
                let _ = writeln!(s, "{k},\"{}\"", shown.replace('"', ""));
            }
            s
        }
    };
    Ok(Outcome { text, violation: false })
}

/// Metric spec and the directory its relative paths resolve against.
fn load_metric_spec(c: &Common) -> Result<(MetricSpec, PathBuf)> {
    let spec = MetricSpec::from_json(&read(&c.input)?).with_context(|| c.input.display().to_string())?;
    if c.refine && !spec.factor.is_parametric() {
        bail!("--refine needs a parametric factor; tabulated factors have a fixed grid");
    }
    Ok((spec, base_dir(&c.input).to_path_buf()))
}

fn build(spec: &MetricSpec, grid: Grid, base: &Path) -> Result<TorusMetric<f64>> {
    Ok(spec.build(grid.m, grid.n, base)?)
}

struct Analysis {
    metric: TorusMetric<f64>,
    sys: SystoleEstimate<f64>,
    report: DefectReport<f64>,
}

fn analysis(metric: TorusMetric<f64>) -> Result<Analysis> {
    let (sys, report) = analyze(&metric)?;
    Ok(Analysis { metric, sys, report })
}

fn grid_of(metric: &TorusMetric<f64>) -> Value {
    json!([metric.factor().cols(), metric.factor().rows()])
}

fn systole_value(sys: &SystoleEstimate<f64>) -> Value {
    serde_json::to_value(sys).unwrap()
}

fn analysis_value(a: &Analysis) -> Value {
    let mut sys = systole_value(&a.sys);
    sys.as_object_mut().unwrap().remove("witness_path");
    json!({
        "grid": grid_of(&a.metric),
        "systole": sys,
        "report": serde_json::to_value(&a.report).unwrap(),
    })
}

const CSV_HEADER: &str = "inequality,applicable,lhs,rhs,margin,error_budget,pass,strong_pass";

fn report_csv(out: &mut String, prefix: &str, report: &DefectReport<f64>) {
    for (name, row) in report.all_rows() {
        let _ = writeln!(
            out,
            "{prefix}{name},{},{},{},{},{},{},{}",
            row.applicable,
            cell(row.lhs),
            cell(row.rhs),
            cell(row.margin),
            cell(row.error_budget),
            flag(row.pass),
            flag(row.strong_pass)
        );
    }
}

/// Margin differences `fine - coarse` per inequality.
fn margin_differences(coarse: &DefectReport<f64>, fine: &DefectReport<f64>) -> Value {
    let mut map = Map::new();
    for ((name, a), (_, b)) in coarse.all_rows().into_iter().zip(fine.all_rows()) {
        let d = match (a.margin, b.margin) {
            (Some(x), Some(y)) => json!(y - x),
            _ => Value::Null,
        };
        map.insert(name.to_string(), d);
    }
    Value::Object(map)
}

/// Shared single/refined rendering for `analyze` and `revolution`.
fn render_analyses(c: &Common, runs: &[Analysis], extra: Option<(&str, Value)>) -> Outcome {
    let violation = runs.iter().any(|a| a.report.has_violation());
    let text = match c.format {
        Format::Json => {
            let mut value = if let [single] = runs {
                analysis_value(single)
            } else {
                json!({
                    "coarse": analysis_value(&runs[0]),
                    "fine": analysis_value(&runs[1]),
                    "differences": {
                        "sys_upper": runs[1].sys.upper - runs[0].sys.upper,
                        "margins": margin_differences(&runs[0].report, &runs[1].report),
                    },
                })
            };
            if let Some((key, v)) = extra {
                value.as_object_mut().unwrap().insert(key.to_string(), v);
            }
            render_json(value)
        }
        Format::Csv => {
            let mut s = String::new();
            if let [single] = runs {
                s.push_str(CSV_HEADER);
                s.push('\n');
                report_csv(&mut s, "", &single.report);
            } else {
                s.push_str("grid,");
                s.push_str(CSV_HEADER);
                s.push('\n');
                for a in runs {
                    let prefix = format!("{}x{},", a.metric.factor().cols(), a.metric.factor().rows());
                    report_csv(&mut s, &prefix, &a.report);
                }
                let diffs = margin_differences(&runs[0].report, &runs[1].report);
                for (name, d) in diffs.as_object().unwrap() {
                    let _ = writeln!(s, "difference,{name},,,,{},,,", cell(d.as_f64()));
                }
            }
            s
        }
    };
    Outcome { text, violation }
}

fn grids(c: &Common) -> Vec<Grid> {
    if c.refine {
        vec![c.grid, c.grid.doubled()]
    } else {
        vec![c.grid]
    }
}

fn analyze_cmd(c: &Common) -> Result<Outcome> {
    let (spec, base) = load_metric_spec(c)?;
    let runs = grids(c).into_iter().map(|g| analysis(build(&spec, g, &base)?)).collect::<Result<Vec<_>>>()?;
    Ok(render_analyses(c, &runs, None))
}

fn systole_cmd(c: &Common) -> Result<Outcome> {
    let (spec, base) = load_metric_spec(c)?;
    let runs = grids(c)
        .into_iter()
        .map(|g| {
            let metric = build(&spec, g, &base)?;
            let sys = systole_upper(&metric)?;
            Ok((metric, sys))
        })
        .collect::<Result<Vec<_>>>()?;
    let text = match c.format {
        Format::Json => {
            let one = |(m, s): &(TorusMetric<f64>, SystoleEstimate<f64>)| json!({"grid": grid_of(m), "systole": systole_value(s)});
            let value = if let [single] = runs.as_slice() {
                one(single)
            } else {
                json!({
                    "coarse": one(&runs[0]),
                    "fine": one(&runs[1]),
                    "differences": {"upper": runs[1].1.upper - runs[0].1.upper, "err": runs[1].1.err - runs[0].1.err},
                })
            };
            render_json(value)
        }
        Format::Csv => {
            let mut s = String::from("grid,upper,err,err_quadrature,lower_fubini,p,q,method\n");
            for (m, sys) in &runs {
                let _ = writeln!(
                    s,
                    "{}x{},{},{},{},{},{},{},{}",
                    m.factor().cols(),
                    m.factor().rows(),
                    cell(Some(sys.upper)),
                    cell(Some(sys.err)),
                    cell(Some(sys.err_quadrature)),
                    cell(Some(sys.lower_fubini)),
                    sys.witness_class.p,
                    sys.witness_class.q,
                    serde_json::to_value(sys.method).unwrap().as_str().unwrap()
                );
            }
            s
        }
    };
    Ok(Outcome { text, violation: false })
}

fn chart_value(chart: &RevolutionChart<f64>, rows: usize) -> Value {
    let curve = chart.curve();
    json!({
        "a": chart.a,
        "b": chart.b,
        "curve_length": curve.total_length(),
        "curve_samples": curve.len(),
        "area_pappus": curve.surface_area(),
        "area_chart": chart.area(rows),
    })
}

fn revolution_cmd(c: &Common) -> Result<Outcome> {
    let spec = CurveSpec::from_json(&read(&c.input)?).with_context(|| c.input.display().to_string())?;
    let curve = spec.to_curve::<f64>()?;
    let unit = curve.arclength_reparametrize(curve.len())?;
    let chart = isothermal_chart(&unit)?;
    let runs = grids(c).into_iter().map(|g| analysis(chart.to_metric(g.m, g.n)?)).collect::<Result<Vec<_>>>()?;
    let chart_info = chart_value(&chart, c.grid.m);
    Ok(render_analyses(c, &runs, Some(("chart", chart_info))))
}

fn sweep_cmd(c: &Common) -> Result<Outcome> {
    let spec = SweepSpec::from_json(&read(&c.input)?).with_context(|| c.input.display().to_string())?;
    let base = base_dir(&c.input).to_path_buf();
    let pointers: Vec<&str> = spec.parameters.iter().map(|p| p.pointer.as_str()).collect();
    let mut violation = false;
    let mut records = Vec::new();
    for (values, metric_spec) in spec.instances()? {
        let mut runs = Vec::new();
        for g in grids(c) {
            runs.push(analysis(build(&metric_spec, g, &base)?)?);
        }
        violation |= runs.iter().any(|a| a.report.has_violation());
        records.push((values, runs));
    }
    let text = match c.format {
        Format::Csv => {
            let mut s = String::new();
            let names: Vec<&str> = records.first().map(|(_, r)| r[0].report.all_rows().iter().map(|(n, _)| *n).collect()).unwrap_or_default();
            let mut header: Vec<String> = pointers.iter().map(|p| p.to_string()).collect();
            header.extend(["grid".into(), "sys_upper".into(), "sys_err".into()]);
            for n in &names {
                header.push(format!("{n}_margin"));
                header.push(format!("{n}_pass"));
            }
            s.push_str(&header.join(","));
            s.push('\n');
            for (values, runs) in &records {
                for a in runs {
                    let mut row: Vec<String> = values.iter().map(|v| cell(Some(*v))).collect();
                    row.push(format!("{}x{}", a.metric.factor().cols(), a.metric.factor().rows()));
                    row.push(cell(Some(a.sys.upper)));
                    row.push(cell(Some(a.sys.err)));
                    for (_, r) in a.report.all_rows() {
                        row.push(cell(r.margin));
                        row.push(flag(r.pass));
                    }
                    s.push_str(&row.join(","));
                    s.push('\n');
                }
            }
            s
        }
        Format::Json => {
            let items: Vec<Value> = records
                .iter()
                .map(|(values, runs)| {
                    let params: Map<String, Value> = pointers.iter().zip(values).map(|(p, v)| (p.to_string(), json!(v))).collect();
                    json!({"parameters": params, "runs": runs.iter().map(analysis_value).collect::<Vec<_>>()})
                })
                .collect();
            render_json(Value::Array(items))
        }
    };
    Ok(Outcome { text, violation })
}
