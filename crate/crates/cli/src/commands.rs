use std::f64::consts::TAU;
use std::path::Path;

use kicked_rotor::checks::{run_checks, CheckOutcome};
use kicked_rotor::scenario::{AlignmentPeak, DelayScan, DensityGrid, PolarizationScan, ProtocolResult, StrengthScan};
use kicked_rotor::series::ObservableName;
use serde::Serialize;

use crate::config::{Format, RunConfig, ScanConfig};
use crate::output::{num, series_csv, table_csv, verify_dir, Artifacts, Manifest, ARTIFACT_VERSION};
use crate::plot::{density_plot, line_plot, Curve, LinePlot};
use crate::{CliError, Overrides};

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    artifact_version: u32,
    config_hash: &'a str,
    config: &'a RunConfig,
    trev_ps: f64,
    result: &'a T,
}

fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(overrides)?;
    Ok(cfg)
}

fn plot_err(e: String) -> CliError {
    CliError::Io(format!("plot: {e}"))
}

fn trev_ps(cfg: &RunConfig) -> Result<f64, CliError> {
    Ok(cfg.molecule()?.revival_period_ps())
}

fn write_document<T: Serialize>(cfg: &RunConfig, art: &mut Artifacts, result: &T) -> Result<(), CliError> {
    if art.wants(Format::Json) {
        let hash = art.hash().to_string();
        let config = cfg.physics();
        let doc = Document {
            artifact_version: ARTIFACT_VERSION,
            config_hash: &hash,
            config: &config,
            trev_ps: trev_ps(cfg)?,
            result,
        };
        art.write_json(".json", &doc)?;
    }
    Ok(())
}

fn write_plot(art: &mut Artifacts, suffix: &str, plot: &LinePlot) -> Result<(), CliError> {
    if art.wants(Format::Svg) {
        let svg = line_plot(plot, art.hash()).map_err(plot_err)?;
        art.write(suffix, svg.as_bytes())?;
    }
    Ok(())
}

fn y_label(name: ObservableName) -> &'static str {
    match name {
        ObservableName::Cos2theta => "<cos^2 theta>",
        ObservableName::Cos2phi => "<cos^2 phi>",
        ObservableName::Jx => "<J_x>",
        ObservableName::Jy => "<J_y>",
        ObservableName::Jz => "<J_z>",
    }
}

/// Result of a single protocol run plus the optional density.
#[derive(Debug, Clone, Serialize)]
pub struct RunOutput {
    #[serde(flatten)]
    pub protocol: ProtocolResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityGrid>,
}

pub fn execute_run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    if cfg.scan.is_some() {
        return Err(CliError::Config("config has a `[scan]` block; use the `scan` command".into()));
    }
    let runner = cfg.runner()?;
    let proto = cfg.protocol()?;
    let protocol = runner.run_protocol(&proto)?;
    let density = match &cfg.density {
        Some(d) => Some(runner.revival_averaged_distribution(&proto, d.n_theta, d.n_phi)?),
        None => None,
    };
    Ok(RunOutput { protocol, density })
}

pub fn write_run(cfg: &RunConfig, out: &RunOutput) -> Result<Manifest, CliError> {
    let hash = cfg.hash();
    let trev = trev_ps(cfg)?;
    let mut art = Artifacts::create(&cfg.output.dir, &cfg.output.stem, &hash, &cfg.output.formats)?;
    let res = &out.protocol;
    for s in &res.series {
        if art.wants(Format::Csv) {
            art.write(&format!("_{}.csv", s.name), series_csv(&hash, s, trev).as_bytes())?;
        }
        let points = s.times.iter().zip(&s.values).map(|(&t, &v)| (t / TAU, v)).collect();
        let plot = LinePlot {
            title: format!(
                "{} {} K, P1 = {}, P2 = {}",
                s.meta.molecule, s.meta.temperature_k, cfg.protocol.p1, cfg.protocol.p2
            ),
            x_label: "t / T_rev".into(),
            y_label: y_label(s.name).into(),
            curves: vec![Curve::new("", points)],
            reference: if s.name == ObservableName::Cos2phi { vec![0.5] } else { vec![] },
        };
        write_plot(&mut art, &format!("_{}.svg", s.name), &plot)?;
    }
    if let Some(d) = &out.density {
        if art.wants(Format::Csv) {
            let rows = (0..d.theta.len())
                .flat_map(|i| (0..d.phi.len()).map(move |j| vec![d.theta[i], d.phi[j], d.value(i, j)]));
            art.write("_density.csv", table_csv(&hash, &["theta", "phi", "density"], rows).as_bytes())?;
        }
        if art.wants(Format::Svg) {
            let svg = density_plot(d, "revival-averaged angular density", &hash).map_err(plot_err)?;
            art.write("_density.svg", svg.as_bytes())?;
        }
    }
    write_document(cfg, &mut art, out)?;
    art.finish()
}

pub fn run(path: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let cfg = load(path, overrides)?;
    let out = execute_run(&cfg)?;
    let manifest = write_run(&cfg, &out)?;
    let mol = cfg.molecule()?;
    let r = &out.protocol;
    println!("config_hash {}", cfg.hash());
    println!("pulse 2 at t = {} T_rev ({} ps)", num(r.pulse2_time / TAU), num(mol.dimensionless_to_ps(r.pulse2_time)));
    if let Some(p) = &r.peak {
        println!("alignment extremum after pulse 1: {} at t = {} T_rev", num(p.value), num(p.time / TAU));
    }
    println!("<J_y> = {}", num(r.jy));
    if let (Some(jx), Some(jz)) = (r.jx, r.jz) {
        println!("<J_x> = {}, <J_z> = {}", num(jx), num(jz));
    }
    println!("<cos^2 phi> revival mean = {}", num(r.cos2phi_mean));
    if let Some(d) = &out.density {
        println!("density grid integral before normalization = {}", num(d.raw_integral));
    }
    println!("{} files in {}", manifest.files.len(), cfg.output.dir.display());
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "parameter", rename_all = "snake_case")]
pub enum ScanOutput {
    PolAngle(PolarizationScan),
    Strengths(StrengthScan),
    FixedTotal { total: f64, differences: Vec<f64>, jy: Vec<f64> },
    Delay(DelayScan),
    Alignment { p1: Vec<f64>, peaks: Vec<AlignmentPeak> },
}

pub fn execute_scan(cfg: &RunConfig) -> Result<ScanOutput, CliError> {
    let scan = cfg
        .scan
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no `[scan]` block; use the `run` command".into()))?;
    let runner = cfg.runner()?;
    let proto = cfg.protocol()?;
    let engine = cfg.engine.kind;
    Ok(match scan {
        ScanConfig::PolAngle { from_deg, to_deg, step_deg } => {
            let n = ((to_deg - from_deg) / step_deg + 1e-9).floor() as usize;
            let angles: Vec<f64> = (0..=n).map(|i| (from_deg + step_deg * i as f64).to_radians()).collect();
            ScanOutput::PolAngle(runner.scan_polarization(proto.p1, proto.p2, proto.delay, &angles, engine)?)
        }
        ScanConfig::Strengths { p1, p2 } => {
            ScanOutput::Strengths(runner.scan_strengths(p1, p2, proto.pol_angle, proto.delay, engine)?)
        }
        ScanConfig::FixedTotal { total, differences } => ScanOutput::FixedTotal {
            total: *total,
            differences: differences.clone(),
            jy: runner.scan_fixed_total(*total, differences, proto.pol_angle, proto.delay, engine)?,
        },
        ScanConfig::Delay { center, halfwidth, points } => {
            let mol = cfg.molecule()?;
            let c = cfg.time(&mol, "scan.center", center)?;
            let h = cfg.time(&mol, "scan.halfwidth", halfwidth)?;
            let delays: Vec<f64> = (0..*points).map(|i| c - h + 2.0 * h * i as f64 / (*points - 1) as f64).collect();
            ScanOutput::Delay(runner.scan_delay(proto.p1, proto.p2, proto.pol_angle, &delays, engine)?)
        }
        ScanConfig::Alignment { p1 } => ScanOutput::Alignment {
            p1: p1.clone(),
            peaks: p1.iter().map(|&p| runner.find_alignment_peak(p, engine)).collect::<Result<_, _>>()?,
        },
    })
}

struct ScanTable {
    header: Vec<&'static str>,
    rows: Vec<Vec<f64>>,
    plot: LinePlot,
}

fn scan_table(out: &ScanOutput, trev: f64, title: String) -> ScanTable {
    let ps = |t: f64| t * trev / TAU;
    let plot = |x_label: &str, y_label: &str, curves: Vec<Curve>, reference: Vec<f64>| LinePlot {
        title: title.clone(),
        x_label: x_label.into(),
        y_label: y_label.into(),
        curves,
        reference,
    };
    match out {
        ScanOutput::PolAngle(s) => {
            let rows: Vec<Vec<f64>> = s.angles.iter().zip(&s.jy).map(|(a, j)| vec![a.to_degrees(), *j]).collect();
            let pts = rows.iter().map(|r| (r[0], r[1])).collect();
            ScanTable {
                header: vec!["pol_angle_deg", "jy"],
                rows,
                plot: plot("pulse 2 polarization (deg)", "<J_y>", vec![Curve::new("", pts)], vec![0.0]),
            }
        }
        ScanOutput::Strengths(s) => {
            let mut rows = Vec::new();
            let mut curves = Vec::new();
            for (i, p1) in s.p1.iter().enumerate() {
                for (j, p2) in s.p2.iter().enumerate() {
                    rows.push(vec![*p1, *p2, s.jy[i][j], s.pulse2_times[i], ps(s.pulse2_times[i])]);
                }
                curves
                    .push(Curve::new(format!("P1 = {p1}"), s.p2.iter().zip(&s.jy[i]).map(|(a, b)| (*a, *b)).collect()));
            }
            ScanTable {
                header: vec!["p1", "p2", "jy", "pulse2_time_dimensionless", "pulse2_time_ps"],
                rows,
                plot: plot("P2", "<J_y>", curves, vec![]),
            }
        }
        ScanOutput::FixedTotal { total, differences, jy } => {
            let rows: Vec<Vec<f64>> =
                differences.iter().zip(jy).map(|(d, j)| vec![*d, 0.5 * (total + d), 0.5 * (total - d), *j]).collect();
            let pts = rows.iter().map(|r| (r[0], r[3])).collect();
            ScanTable {
                header: vec!["difference", "p1", "p2", "jy"],
                rows,
                plot: plot("P1 - P2", "<J_y>", vec![Curve::new("", pts)], vec![]),
            }
        }
        ScanOutput::Delay(s) => {
            let rows: Vec<Vec<f64>> = s.delays.iter().zip(&s.jy).map(|(t, j)| vec![*t, ps(*t), t / TAU, *j]).collect();
            let pts = rows.iter().map(|r| (r[2], r[3])).collect();
            ScanTable {
                header: vec!["delay_dimensionless", "delay_ps", "delay_trev", "jy"],
                rows,
                plot: plot("pulse 2 time / T_rev", "<J_y>", vec![Curve::new("", pts)], vec![0.0]),
            }
        }
        ScanOutput::Alignment { p1, peaks } => {
            let rows: Vec<Vec<f64>> =
                p1.iter().zip(peaks).map(|(p, k)| vec![*p, k.time, ps(k.time), k.value]).collect();
            let pts = rows.iter().map(|r| (r[0], r[3])).collect();
            ScanTable {
                header: vec!["p1", "peak_time_dimensionless", "peak_time_ps", "peak_cos2theta"],
                rows,
                plot: plot("P1", "max <cos^2 theta>", vec![Curve::new("", pts)], vec![1.0 / 3.0]),
            }
        }
    }
}

pub fn write_scan(cfg: &RunConfig, out: &ScanOutput) -> Result<Manifest, CliError> {
    let hash = cfg.hash();
    let trev = trev_ps(cfg)?;
    let mut art = Artifacts::create(&cfg.output.dir, &cfg.output.stem, &hash, &cfg.output.formats)?;
    let title = format!("{} {} K", cfg.molecule()?.name, cfg.temperature_k);
    let table = scan_table(out, trev, title);
    if art.wants(Format::Csv) {
        art.write(".csv", table_csv(&hash, &table.header, table.rows).as_bytes())?;
    }
    write_plot(&mut art, ".svg", &table.plot)?;
    write_document(cfg, &mut art, out)?;
    art.finish()
}

pub fn scan(path: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let cfg = load(path, overrides)?;
    let out = execute_scan(&cfg)?;
    let manifest = write_scan(&cfg, &out)?;
    let table = scan_table(&out, trev_ps(&cfg)?, String::new());
    println!("config_hash {}", cfg.hash());
    println!("{}", table.header.join("\t"));
    for row in &table.rows {
        println!("{}", row.iter().map(|v| num(*v)).collect::<Vec<_>>().join("\t"));
    }
    println!("{} files in {}", manifest.files.len(), cfg.output.dir.display());
    Ok(())
}

pub fn print_checks(outcomes: &[CheckOutcome]) {
    for c in outcomes {
        let mark = if c.pass { "PASS" } else { "FAIL" };
        match &c.error {
            Some(e) => println!("{mark} {}: {e}", c.name),
            None => println!("{mark} {}: {:.3e} ({})", c.name, c.value, c.bound),
        }
    }
}

pub fn check(filter: Option<&str>, json: Option<&Path>) -> Result<(), CliError> {
    let outcomes = run_checks(filter);
    if outcomes.is_empty() {
        return Err(CliError::Config(format!("no check matches `{}`", filter.unwrap_or(""))));
    }
    print_checks(&outcomes);
    if let Some(path) = json {
        let mut text = serde_json::to_string_pretty(&outcomes).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))?;
    }
    let failed = outcomes.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} of {} checks failed", outcomes.len())));
    }
    println!("{} checks passed", outcomes.len());
    Ok(())
}

pub fn verify(dir: &Path, config: Option<&Path>) -> Result<(), CliError> {
    let expected = match config {
        Some(p) => Some(RunConfig::load(p)?.hash()),
        None => None,
    };
    let (manifest, problems) = verify_dir(dir, expected.as_deref())?;
    if problems.is_empty() {
        println!("ok: {} files match config_hash {}", manifest.files.len(), manifest.config_hash);
        return Ok(());
    }
    for p in &problems {
        println!("{p}");
    }
    Err(CliError::Verify(format!("{} problem(s) in {}", problems.len(), dir.display())))
}
