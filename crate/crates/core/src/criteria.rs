//! Curve analysis and pass/fail judgements for the reference scenarios.

use std::f64::consts::{PI, TAU};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::checks::CheckOutcome;
use crate::scenario::{
    refine_extremum, DelayScan, DoublePulseProtocol, Extremum, PolarizationScan, Runner, ScenarioError, StrengthScan,
};
use crate::spectral::KickMethod;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Least-squares line through `(x, y)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    LinearFit { slope, intercept: my - slope * mx }
}

/// `max |y - fit| / |y|`.
pub fn max_relative_residual(fit: &LinearFit, x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(&a, &b)| ((b - fit.eval(a)) / b).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    /// `c0 + c1 x + c2 x²`.
    pub coeffs: [f64; 3],
    pub r_squared: f64,
}

pub fn quadratic_fit(x: &[f64], y: &[f64]) -> Option<QuadraticFit> {
    if x.len() < 3 {
        return None;
    }
    let a = DMatrix::from_fn(x.len(), 3, |i, j| x[i].powi(j as i32));
    let b = DVector::from_column_slice(y);
    let c = a.clone().svd(true, true).solve(&b, 1e-14).ok()?;
    let fitted = &a * &c;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_res: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|a| (a - mean).powi(2)).sum();
    Some(QuadraticFit { coeffs: [c[0], c[1], c[2]], r_squared: 1.0 - ss_res / ss_tot })
}

/// `|a_k|` for `k = 0..=n/2`, where `y_j = Σ_k a_k e^{2πi jk/n}` over one period.
pub fn harmonic_magnitudes(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[..=n / 2].iter().map(|c| c.norm() / n as f64).collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One measured quantity against its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub what: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

impl Clause {
    pub fn below(what: impl Into<String>, value: f64, tol: f64) -> Self {
        Self { what: what.into(), value, bound: format!("< {tol:e}"), pass: value < tol }
    }

    pub fn above(what: impl Into<String>, value: f64, min: f64) -> Self {
        Self { what: what.into(), value, bound: format!("> {min}"), pass: value > min }
    }

    pub fn within(what: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self { what: what.into(), value, bound: format!("in [{lo}, {hi}]"), pass: (lo..=hi).contains(&value) }
    }

    pub fn holds(what: impl Into<String>, ok: bool) -> Self {
        Self { what: what.into(), value: if ok { 1.0 } else { 0.0 }, bound: "true".into(), pass: ok }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: u32,
    pub title: String,
    pub clauses: Vec<Clause>,
}

impl Verdict {
    pub fn new(id: u32, title: &str, clauses: Vec<Clause>) -> Self {
        Self { id, title: title.into(), clauses }
    }

    pub fn pass(&self) -> bool {
        !self.clauses.is_empty() && self.clauses.iter().all(|c| c.pass)
    }

    /// Single summary line, `criterion N (title): PASS|FAIL`.
    pub fn line(&self) -> String {
        format!("criterion {} ({}): {}", self.id, self.title, if self.pass() { "PASS" } else { "FAIL" })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.line())?;
        for c in &self.clauses {
            let mark = if c.pass { "ok  " } else { "FAIL" };
            writeln!(f, "    [{mark}] {} = {:.6e} ({})", c.what, c.value, c.bound)?;
        }
        Ok(())
    }
}

fn nearest(xs: &[f64], target: f64) -> usize {
    (0..xs.len()).min_by(|&a, &b| (xs[a] - target).abs().total_cmp(&(xs[b] - target).abs())).unwrap_or(0)
}

/// Rotation against pulse-2 polarization: extrema at ±45°, nodes at 0° and
/// ±90°, odd in the angle.
pub fn judge_polarization(scan: &PolarizationScan) -> Verdict {
    let deg: Vec<f64> = scan.angles.iter().map(|a| a.to_degrees()).collect();
    let jy = &scan.jy;
    let peak = jy.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let arg = |sign: f64| {
        (0..jy.len())
            .filter(|&i| sign * deg[i] > 0.0)
            .max_by(|&a, &b| jy[a].abs().total_cmp(&jy[b].abs()))
            .map_or(f64::NAN, |i| deg[i])
    };
    let node = |at: f64| {
        let i = nearest(&deg, at);
        if (deg[i] - at).abs() < 1e-9 {
            jy[i].abs() / peak
        } else {
            f64::NAN
        }
    };
    let mut odd = 0.0f64;
    for (i, &d) in deg.iter().enumerate() {
        let j = nearest(&deg, -d);
        if (deg[j] + d).abs() < 1e-9 {
            odd = odd.max((jy[i] + jy[j]).abs());
        }
    }
    let step = deg.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    Verdict::new(
        1,
        "rotation vs polarization angle",
        vec![
            Clause::below("grid step [deg]", step, 2.0 + 1e-9),
            Clause::within("extremum angle, positive side [deg]", arg(1.0), 43.0, 47.0),
            Clause::within("extremum angle, negative side [deg]", arg(-1.0), -47.0, -43.0),
            Clause::below("|Jy(0°)| / extremum", node(0.0), 1e-4),
            Clause::below("|Jy(90°)| / extremum", node(90.0), 1e-4),
            Clause::below("|Jy(-90°)| / extremum", node(-90.0), 1e-4),
            Clause::below("max |Jy(a) + Jy(-a)|", odd, 1e-6),
        ],
    )
}

/// Alignment maximum against pulse-1 strength: monotone, linear at low
/// strength, saturating in the high band.
pub fn judge_alignment(p1: &[f64], peak: &[f64], low_max: f64) -> Verdict {
    let monotone = peak.windows(2).all(|w| w[1] > w[0]);
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        p1.iter().zip(peak).filter(|(p, _)| **p <= low_max).map(|(a, b)| (*a, *b)).unzip();
    let residual = if lx.len() >= 3 { max_relative_residual(&linear_fit(&lx, &ly), &lx, &ly) } else { f64::NAN };
    let last = peak.last().copied().unwrap_or(f64::NAN);
    Verdict::new(
        2,
        "alignment saturation",
        vec![
            Clause::holds("strictly increasing in P1", monotone),
            Clause::below(format!("linear-fit relative residual, P1 <= {low_max}"), residual, 0.05),
            Clause::within(format!("alignment at P1 = {}", p1.last().copied().unwrap_or(f64::NAN)), last, 0.85, 0.92),
        ],
    )
}

/// `dJy/dP2` across the scanned P2 window, per P1.
pub fn strength_slopes(scan: &StrengthScan) -> Vec<f64> {
    let (lo, hi) = (0, scan.p2.len() - 1);
    scan.jy.iter().map(|row| (row[hi] - row[lo]) / (scan.p2[hi] - scan.p2[lo])).collect()
}

pub fn judge_slopes(scan: &StrengthScan) -> Verdict {
    let slopes = strength_slopes(scan);
    let min_gap = slopes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    Verdict::new(
        3,
        "rotation slope vs first-pulse strength",
        vec![Clause::above("P1 values", slopes.len() as f64, 3.5), Clause::above("min slope increment", min_gap, 0.0)],
    )
}

/// Rotation along `P1 + P2 = const` against `d = P1 - P2`.
pub fn judge_fixed_total(diffs: &[f64], jy: &[f64]) -> Verdict {
    let mut even = 0.0f64;
    for (i, &d) in diffs.iter().enumerate() {
        let j = nearest(diffs, -d);
        if (diffs[j] + d).abs() < 1e-9 {
            even = even.max((jy[i] - jy[j]).abs());
        }
    }
    let curvature = jy.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).fold(f64::NEG_INFINITY, f64::max);
    let step = diffs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let best = (0..jy.len()).max_by(|&a, &b| jy[a].total_cmp(&jy[b])).unwrap_or(0);
    let (lo, hi) = (best.saturating_sub(3), (best + 4).min(jy.len()));
    let r2 = quadratic_fit(&diffs[lo..hi], &jy[lo..hi]).map_or(f64::NAN, |f| f.r_squared);
    let (x, y) = (&diffs[lo..hi], &jy[lo..hi]);
    let fit_peak = quadratic_fit(x, y).map_or(f64::NAN, |f| -f.coeffs[1] / (2.0 * f.coeffs[2]));
    Verdict::new(
        4,
        "optimum at equal strengths",
        vec![
            Clause::below("max |Jy(d) - Jy(-d)|", even, 1e-6),
            Clause::below("max second difference", curvature, 0.0),
            Clause::below("|d| at sampled maximum", diffs[best].abs(), step),
            Clause::below("|d| at fitted vertex (diagnostic)", fit_peak.abs(), step),
            Clause::above("quadratic-fit R² near the peak", r2, 0.98),
        ],
    )
}

/// Extremum times of a delay scan on either side of `split`.
pub fn delay_extrema(scan: &DelayScan, split: f64) -> Result<(f64, f64), String> {
    let dt = scan.delays[1] - scan.delays[0];
    let cut = scan.delays.iter().position(|&t| t > split).ok_or("scan does not cross the split")?;
    let before = refine_extremum(&scan.jy[..cut], scan.delays[0], dt, Extremum::Max).map_err(|e| e.to_string())?;
    let after = refine_extremum(&scan.jy[cut..], scan.delays[cut], dt, Extremum::Min).map_err(|e| e.to_string())?;
    Ok((before.time, after.time))
}

/// Delay scan around half a revival: positive lobe before, negative after,
/// `trev_ps` converting to picoseconds.
pub fn judge_delay(scan: &DelayScan, trev_ps: f64) -> Verdict {
    let at = |t: f64| scan.jy[nearest(&scan.delays, t)];
    let mut clauses = Vec::new();
    match delay_extrema(scan, PI) {
        Ok((max_t, min_t)) => {
            clauses.push(Clause::above("Jy at pre-half-revival maximum", at(max_t), 0.0));
            clauses.push(Clause::below("Jy at post-half-revival minimum", at(min_t), 0.0));
            clauses.push(Clause::below("maximum time - T_rev/2 [T_rev]", max_t / TAU - 0.5, 0.0));
            clauses.push(Clause::above("minimum time - T_rev/2 [T_rev]", min_t / TAU - 0.5, 0.0));
            clauses.push(Clause::within("peak separation [fs]", (min_t - max_t) / TAU * trev_ps * 1e3, 150.0, 250.0));
        }
        Err(e) => clauses.push(Clause {
            what: format!("extrema located ({e})"),
            value: f64::NAN,
            bound: "found".into(),
            pass: false,
        }),
    }
    Verdict::new(5, "rotation vs delay around half revival", clauses)
}

/// Final `⟨J_y⟩` of `proto` and a noise floor: its spread across the two
/// kick methods and a basis 16 shells larger.
pub fn rotation_with_noise(runner: &Runner, proto: &DoublePulseProtocol) -> Result<(f64, f64), ScenarioError> {
    let a = runner.run_protocol(proto)?;
    let mut rk4 = runner.clone();
    rk4.kick_method = match runner.kick_method {
        KickMethod::Rk4 => KickMethod::Chebyshev,
        KickMethod::Chebyshev => KickMethod::Rk4,
    };
    let b = rk4.run_protocol(proto)?;
    let noise = (a.jy - b.jy).abs();
    let noise = match a.l_max {
        Some(l) => noise.max((a.jy - runner.clone().with_l_max(Some(l + 16)).run_protocol(proto)?.jy).abs()),
        None => noise,
    };
    Ok((a.jy, noise.max(f64::EPSILON * a.jy.abs())))
}

/// Spin-isomer ensembles rotate in opposite senses, each well above the
/// noise floor of its own computation.
pub fn judge_isomers(even: f64, odd: f64, noise_even: f64, noise_odd: f64) -> Verdict {
    Verdict::new(
        6,
        "spin-isomer opposition at quarter revival",
        vec![
            Clause::below("Jy(even) * Jy(odd)", even * odd, 0.0),
            Clause::above("|Jy(even)| / noise floor", even.abs() / noise_even, 10.0),
            Clause::above("|Jy(odd)| / noise floor", odd.abs() / noise_odd, 10.0),
        ],
    )
}

pub fn judge_azimuthal_mean(mean: f64) -> Verdict {
    Verdict::new(
        7,
        "revival-averaged azimuthal confinement",
        vec![
            Clause::within("time-averaged <cos²φ>", mean, 0.55, 0.59),
            Clause::above("time-averaged <cos²φ>", mean, 0.5),
        ],
    )
}

pub fn judge_cross_engine(spectral: &[f64], fdtd: &[f64]) -> Verdict {
    let d = spectral.iter().zip(fdtd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Verdict::new(
        8,
        "spectral vs FDTD azimuthal factor",
        vec![
            Clause::holds("equal sample counts", spectral.len() == fdtd.len() && !fdtd.is_empty()),
            Clause::below("max |Δ<cos²φ>|", d, 1e-2),
        ],
    )
}

/// Harmonics `k` of a one-revival record that carry `T_rev/k` periodicity.
pub const FRACTIONAL_HARMONICS: [usize; 3] = [3, 6, 8];

/// Noise floor: median harmonic magnitude over `1..=n/2`.
pub fn judge_fractional_harmonics(one_revival: &[f64]) -> Verdict {
    let mags = harmonic_magnitudes(one_revival);
    let floor = median(&mags[1..]);
    let mut clauses = vec![Clause::above("noise floor (median |a_k|)", floor, 0.0)];
    for k in FRACTIONAL_HARMONICS {
        clauses.push(Clause::above(format!("|a_{k}| / noise floor"), mags[k] / floor, 5.0));
    }
    Verdict::new(9, "fractional-revival harmonics", clauses)
}

pub fn judge_properties(outcomes: &[CheckOutcome]) -> Verdict {
    let clauses = outcomes
        .iter()
        .map(|c| Clause { what: c.name.clone(), value: c.value, bound: c.bound.clone(), pass: c.pass })
        .collect();
    Verdict::new(10, "property suite", clauses)
}
