use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Backend, Dispatch, DoublePulseProtocol, Runner, ScenarioError};
use crate::angular::normalized_legendre_column;
use crate::fdtd::Grid;

/// Probability density on a uniform `(θ, φ)` grid, `θ_i = (i+½)π/n_θ`, `φ_j = 2πj/n_φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// Row-major in `θ`.
    pub values: Vec<f64>,
    /// Fejér weights for `∫ g sinθ dθ`, exact for polynomials in `cosθ` of degree below `n_θ`.
    pub theta_weights: Vec<f64>,
    /// Grid integral before normalization.
    pub raw_integral: f64,
}

impl DensityGrid {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.phi.len() + j]
    }

    /// `∫ ρ dΩ` on the grid.
    pub fn integral(&self) -> f64 {
        self.weighted(|_, _| 1.0)
    }

    /// `∫ ρ g dΩ` on the grid.
    pub fn weighted(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        let mut sum = 0.0;
        for (i, (&t, &w)) in self.theta.iter().zip(&self.theta_weights).enumerate() {
            for (j, &p) in self.phi.iter().enumerate() {
                sum += self.value(i, j) * w * g(t, p);
            }
        }
        sum * TAU / self.phi.len() as f64
    }

    /// `∫ ρ sinθ dθ` at each `φ_j`.
    pub fn phi_marginal(&self) -> Vec<f64> {
        (0..self.phi.len())
            .map(|j| self.theta_weights.iter().enumerate().map(|(i, w)| self.value(i, j) * w).sum())
            .collect()
    }
}

struct DensityJob {
    proto: DoublePulseProtocol,
    n_theta: usize,
    n_phi: usize,
}

impl Dispatch<DensityGrid> for DensityJob {
    fn run<B: Backend>(&self, runner: &Runner, b: &B, _: Option<i64>) -> Result<DensityGrid, ScenarioError> {
        let p = &self.proto;
        let members = runner.members();
        let (tau2, _) = runner.resolve_delay(b, &members, p.p1, p.delay)?;
        let axial = b.kick_operator(0.0);
        let tilted = b.kick_operator(p.pol_angle);
        let packets = runner.per_member(&members, |mem| {
            let mut s = b.init(mem.l, mem.m)?;
            b.kick(&mut s, &axial, p.p1)?;
            b.advance(&mut s, tau2)?;
            b.kick(&mut s, &tilted, p.p2)?;
            b.to_wavepacket(&s)
        })?;
        let l_max = packets.iter().map(|w| w.l_max()).max().unwrap_or(0);

        // Over a full revival only coherences within one shell survive:
        // blocks D_l[m][m'] = Σ w conj(c_lm) c_lm'.
        let shells: Vec<i64> = (0..=l_max).collect();
        let blocks: Vec<Vec<Complex64>> = runner.execution.map(&shells, |&l| {
            let d = (2 * l + 1) as usize;
            let start = (l * l) as usize;
            let mut block = vec![Complex64::new(0.0, 0.0); d * d];
            for (w, mem) in packets.iter().zip(&members) {
                if l > w.l_max() {
                    continue;
                }
                let c = &w.coeffs()[start..start + d];
                for (a, ca) in c.iter().enumerate() {
                    let left = ca.conj() * mem.weight;
                    for (b, cb) in c.iter().enumerate() {
                        block[a * d + b] += left * cb;
                    }
                }
            }
            block
        });

        let theta: Vec<f64> = (0..self.n_theta).map(|i| (i as f64 + 0.5) * PI / self.n_theta as f64).collect();
        let phi: Vec<f64> = (0..self.n_phi).map(|j| TAU * j as f64 / self.n_phi as f64).collect();
        let n_delta = 2 * l_max as usize + 1;
        let rows: Vec<Vec<f64>> = runner.execution.map(&theta, |&t| {
            let x = t.cos();
            let polar: Vec<Vec<f64>> = (0..=l_max).map(|m| normalized_legendre_column(m, l_max, x)).collect();
            let y = |l: i64, m: i64| {
                let v = polar[m.unsigned_abs() as usize][(l - m.abs()) as usize];
                if m < 0 && m % 2 != 0 {
                    -v
                } else {
                    v
                }
            };
            // ρ(θ, φ) = Σ_Δ G_Δ(θ) e^{iΔφ}, Δ = m' - m.
            let mut g = vec![Complex64::new(0.0, 0.0); 2 * n_delta - 1];
            for (l, block) in blocks.iter().enumerate() {
                let l = l as i64;
                let d = (2 * l + 1) as usize;
                for a in 0..d {
                    let ya = y(l, a as i64 - l);
                    for b in 0..d {
                        g[b + n_delta - 1 - a] += block[a * d + b] * (ya * y(l, b as i64 - l));
                    }
                }
            }
            phi.iter()
                .map(|&f| {
                    g.iter()
                        .enumerate()
                        .map(|(k, gk)| (gk * Complex64::from_polar(1.0, (k as f64 - (n_delta - 1) as f64) * f)).re)
                        .sum()
                })
                .collect()
        });
        let mut values: Vec<f64> = rows.into_iter().flatten().collect();
        if runner.folds() {
            // The folded ensemble drops the mirror images m -> -m, i.e. φ -> -φ.
            let n = self.n_phi;
            let orig = values.clone();
            for i in 0..self.n_theta {
                for j in 0..n {
                    values[i * n + j] = 0.5 * (orig[i * n + j] + orig[i * n + (n - j) % n]);
                }
            }
        }
        let theta_weights = Grid::new(self.n_theta).fejer;
        let mut grid = DensityGrid { theta, phi, values, theta_weights, raw_integral: 0.0 };
        let raw = grid.integral();
        grid.values.iter_mut().for_each(|v| *v /= raw);
        grid.raw_integral = raw;
        Ok(grid)
    }
}

impl Runner {
    /// Thermal density after pulse 2, averaged over one revival.
    pub fn revival_averaged_distribution(
        &self,
        proto: &DoublePulseProtocol,
        n_theta: usize,
        n_phi: usize,
    ) -> Result<DensityGrid, ScenarioError> {
        proto.validate()?;
        if n_theta < 2 || n_phi < 2 {
            return Err(ScenarioError::InvalidProtocol("density grid needs at least 2 points per axis".into()));
        }
        self.dispatch(proto.engine, proto.p1 + proto.p2, DensityJob { proto: *proto, n_theta, n_phi })
    }
}
