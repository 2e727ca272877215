//! Reference solver for `∂_t ρ = ∂_u² Φ(ρ)` on the unit torus and the
//! comparison of simulated density profiles against it.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::constraints::canonical_diffusivity;
use crate::error::{Error, Result};
use crate::exact::binomial;
use crate::model::ModelSpec;
use crate::simulate::{check_times, ProfileSpec, Trajectory};

/// Default CFL safety factor.
pub const DEFAULT_CFL: f64 = 0.4;
/// Tolerance of the maximum-principle audit.
pub const MAX_PRINCIPLE_SLACK: f64 = 1e-12;

/// `Φ(ρ) = ∫_0^ρ D`.
pub fn flux_phi(model: &ModelSpec, rho: f64) -> Result<f64> {
    model.validate()?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::DensityOutOfRange(rho));
    }
    Ok(match *model {
        ModelSpec::Ssep => rho,
        ModelSpec::Pmm { n: k } | ModelSpec::ReducedPmm { ell: k, .. } => rho.powi(k as i32 + 1) / (k as f64 + 1.0),
        ModelSpec::Bernstein { n, l } => {
            let terms: f64 = (0..=l - n)
                .map(|k| {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    let p = (n + k + 1) as f64;
                    sign * binomial((l - n) as i64, k as i64) as f64 * rho.powi(p as i32) / p
                })
                .sum();
            binomial(l as i64, n as i64) as f64 * terms
        }
    })
}

/// `max_{ρ ∈ [0,1]} D(ρ)`.
pub fn max_diffusivity(model: &ModelSpec) -> Result<f64> {
    match *model {
        ModelSpec::Bernstein { n, l } => canonical_diffusivity(model, n as f64 / l as f64),
        _ => canonical_diffusivity(model, 1.0),
    }
}

/// Largest stable time step on a grid of `m` cells, before the safety factor.
pub fn stability_bound(model: &ModelSpec, m: usize) -> Result<f64> {
    let du = 1.0 / m as f64;
    Ok(du * du / (2.0 * max_diffusivity(model)?))
}

/// Values at the cell centers `u_i = (i + 1/2) / M` of a periodic grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridProfile {
    pub values: Vec<f64>,
}

impl GridProfile {
    pub fn from_profile(profile: &ProfileSpec, m: usize) -> Result<Self> {
        profile.validate()?;
        Ok(Self {
            values: (0..m).map(|i| profile.density((i as f64 + 0.5) / m as f64)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        let m = self.values.len() as f64;
        (0..self.values.len()).map(move |i| (i as f64 + 0.5) / m)
    }

    /// `∫ ρ du` with compensated summation.
    pub fn mass(&self) -> f64 {
        let (mut sum, mut carry) = (0.0_f64, 0.0_f64);
        for &v in &self.values {
            let y = v - carry;
            let t = sum + y;
            carry = (t - sum) - y;
            sum = t;
        }
        sum / self.values.len() as f64
    }

    /// Averages over `k` equal blocks of cells.
    pub fn restrict(&self, k: usize) -> Result<Vec<f64>> {
        let m = self.values.len();
        if k == 0 || !m.is_multiple_of(k) {
            return Err(Error::InvalidParameter(format!(
                "grid of {m} cells cannot be split into {k} boxes"
            )));
        }
        let w = m / k;
        Ok(self
            .values
            .chunks(w)
            .map(|c| c.iter().sum::<f64>() / w as f64)
            .collect())
    }

    fn bounds(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// One explicit step `ρ_i += δt/δu² (Φ(ρ_{i+1}) − 2Φ(ρ_i) + Φ(ρ_{i−1}))`.
pub fn pde_step(profile: &GridProfile, dt: f64, model: &ModelSpec) -> Result<GridProfile> {
    let m = profile.len();
    if m < 2 {
        return Err(Error::InvalidParameter("grid needs at least two cells".into()));
    }
    let bound = stability_bound(model, m)?;
    if !(dt >= 0.0 && dt <= bound) {
        return Err(Error::CflViolation { dt, bound });
    }
    let phi = profile
        .values
        .iter()
        .map(|&r| flux_phi(model, r.clamp(0.0, 1.0)))
        .collect::<Result<Vec<_>>>()?;
    let lambda = dt * (m * m) as f64;
    let values = (0..m)
        .map(|i| {
            let (left, right) = (phi[(i + m - 1) % m], phi[(i + 1) % m]);
            profile.values[i] + lambda * ((right - phi[i]) - (phi[i] - left))
        })
        .collect();
    Ok(GridProfile { values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroConfig {
    pub model: ModelSpec,
    #[serde(rename = "M")]
    pub grid: usize,
    pub t_max: f64,
    pub output_times: Vec<f64>,
    pub profile: ProfileSpec,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
}

fn default_cfl() -> f64 {
    DEFAULT_CFL
}

impl HydroConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.profile.validate()?;
        if self.grid < 16 {
            return Err(Error::InvalidParameter(format!(
                "M = {} must be at least 16",
                self.grid
            )));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "CFL factor {} not in (0, 1)",
                self.cfl
            )));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_max = {} is invalid", self.t_max)));
        }
        check_times(&self.output_times, self.t_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdeSolution {
    pub model: ModelSpec,
    pub times: Vec<f64>,
    pub profiles: Vec<GridProfile>,
    pub steps: u64,
    pub dt_max: f64,
}

impl PdeSolution {
    /// Rows `t_macro,grid_index,u,rho`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t_macro,grid_index,u,rho")?;
        for (t, p) in self.times.iter().zip(&self.profiles) {
            for (i, (u, rho)) in p.centers().zip(&p.values).enumerate() {
                writeln!(out, "{t},{i},{u},{rho}")?;
            }
        }
        Ok(())
    }
}

/// Integrates up to each output time with equal steps below the CFL bound,
/// landing exactly on the output times, and audits the maximum principle.
pub fn solve_pde(config: &HydroConfig) -> Result<PdeSolution> {
    config.validate()?;
    let dt_max = config.cfl * stability_bound(&config.model, config.grid)?;
    let mut current = GridProfile::from_profile(&config.profile, config.grid)?;
    let (lo, hi) = current.bounds();
    let mut profiles = Vec::with_capacity(config.output_times.len());
    let mut now = 0.0;
    let mut steps = 0_u64;
    for &t in &config.output_times {
        let span = t - now;
        if span > 0.0 {
            let n = (span / dt_max).ceil().max(1.0) as u64;
            let dt = span / n as f64;
            for _ in 0..n {
                current = pde_step(&current, dt, &config.model)?;
                if let Some(cell) = current
                    .values
                    .iter()
                    .position(|&v| v < lo - MAX_PRINCIPLE_SLACK || v > hi + MAX_PRINCIPLE_SLACK)
                {
                    return Err(Error::MaximumPrinciple {
                        cell,
                        value: current.values[cell],
                    });
                }
            }
            steps += n;
            now = t;
        }
        profiles.push(current.clone());
    }
    Ok(PdeSolution {
        model: config.model,
        times: config.output_times.clone(),
        profiles,
        steps,
        dt_max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeComparison {
    pub t: f64,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "Linf")]
    pub linf: f64,
    /// Replica standard error of the box densities, averaged over boxes.
    pub stderr: Option<f64>,
    pub replicas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub model: String,
    #[serde(rename = "N")]
    pub n_sites: usize,
    #[serde(rename = "K")]
    pub boxes: usize,
    #[serde(rename = "M")]
    pub grid: usize,
    pub times: Vec<TimeComparison>,
}

impl Comparison {
    pub fn max_l1(&self) -> f64 {
        self.times.iter().map(|t| t.l1).fold(0.0, f64::max)
    }
}

/// Distances between the replica-averaged simulated profile and the PDE
/// solution averaged over the same boxes, at every output time.
///
/// `L1 = (1/K) Σ_b |ρ̄_sim(b) − ρ̄_pde(b)|`, `Linf = max_b |…|`.
pub fn compare_profiles(sim: &Trajectory, pde: &PdeSolution) -> Result<Comparison> {
    let times = &sim.config.output_times;
    if times.len() != pde.times.len() || times.iter().zip(&pde.times).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(Error::InvalidParameter("simulation and PDE output times differ".into()));
    }
    let k = sim.config.boxes;
    let mut out = Vec::with_capacity(times.len());
    for (i, (&t, profile)) in times.iter().zip(&pde.profiles).enumerate() {
        let reference = profile.restrict(k)?;
        let Some(mean) = sim.mean_profile(i) else {
            break;
        };
        let reached: Vec<&Vec<f64>> = sim.replicas.iter().filter_map(|r| r.profiles.get(i)).collect();
        let diffs: Vec<f64> = mean.iter().zip(&reference).map(|(a, b)| (a - b).abs()).collect();
        let r = reached.len();
        let stderr = (r >= 2).then(|| {
            (0..k)
                .map(|b| {
                    let var = reached.iter().map(|p| (p[b] - mean[b]).powi(2)).sum::<f64>() / (r - 1) as f64;
                    (var / r as f64).sqrt()
                })
                .sum::<f64>()
                / k as f64
        });
        out.push(TimeComparison {
            t,
            l1: diffs.iter().sum::<f64>() / k as f64,
            linf: diffs.iter().cloned().fold(0.0, f64::max),
            stderr,
            replicas: r,
        });
    }
    Ok(Comparison {
        model: sim.config.model.to_string(),
        n_sites: sim.config.n_sites,
        boxes: k,
        grid: pde.profiles.first().map_or(0, GridProfile::len),
        times: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{run_trajectory, Engine, SimulationConfig};
    use std::f64::consts::PI;

    const MODELS: [ModelSpec; 6] = [
        ModelSpec::Ssep,
        ModelSpec::Pmm { n: 2 },
        ModelSpec::Bernstein { n: 1, l: 2 },
        ModelSpec::Bernstein { n: 0, l: 3 },
        ModelSpec::Bernstein { n: 3, l: 4 },
        ModelSpec::ReducedPmm { ell: 2, l: 4 },
    ];

    #[test]
    fn flux_values() {
        assert!((flux_phi(&ModelSpec::ReducedPmm { ell: 2, l: 4 }, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        for l in 1..=4 {
            for n in 0..=l {
                let phi = flux_phi(&ModelSpec::Bernstein { n, l }, 1.0).unwrap();
                assert!((phi - 1.0 / (l as f64 + 1.0)).abs() < 1e-12);
            }
        }
        for model in MODELS {
            assert_eq!(flux_phi(&model, 0.0).unwrap(), 0.0);
        }
        assert!(flux_phi(&ModelSpec::Ssep, 1.5).is_err());
    }

    #[test]
    fn flux_is_monotone_with_derivative_d() {
        for model in MODELS {
            let mut prev = 0.0;
            for i in 0..=10_000 {
                let v = flux_phi(&model, i as f64 / 10_000.0).unwrap();
                assert!(v >= prev - 1e-15, "{model}");
                prev = v;
            }
            let h = 1e-5;
            for i in 1..=100 {
                let rho = i as f64 / 101.0;
                let d = (flux_phi(&model, rho + h).unwrap() - flux_phi(&model, rho - h).unwrap()) / (2.0 * h);
                assert!(
                    (d - canonical_diffusivity(&model, rho).unwrap()).abs() < 1e-6,
                    "{model} {rho}"
                );
            }
        }
    }

    #[test]
    fn max_diffusivity_values() {
        assert_eq!(max_diffusivity(&ModelSpec::Bernstein { n: 1, l: 2 }).unwrap(), 0.5);
        assert_eq!(max_diffusivity(&ModelSpec::ReducedPmm { ell: 2, l: 4 }).unwrap(), 1.0);
    }

    #[test]
    fn step_properties() {
        let flat = GridProfile { values: vec![0.3; 32] };
        let dt = stability_bound(&ModelSpec::Ssep, 32).unwrap();
        assert_eq!(pde_step(&flat, dt, &ModelSpec::Ssep).unwrap(), flat);
        assert!(matches!(
            pde_step(&flat, dt * 1.01, &ModelSpec::Ssep),
            Err(Error::CflViolation { .. })
        ));
        let model = ModelSpec::Bernstein { n: 1, l: 2 };
        let mut p = GridProfile::from_profile(&"cosine:0.5,0.3,2".parse().unwrap(), 64).unwrap();
        let mass = p.mass();
        let dt = DEFAULT_CFL * stability_bound(&model, 64).unwrap();
        for _ in 0..10_000 {
            p = pde_step(&p, dt, &model).unwrap();
        }
        assert!((p.mass() - mass).abs() < 1e-10);
    }

    #[test]
    fn heat_mode_decay() {
        let config = HydroConfig {
            model: ModelSpec::Ssep,
            grid: 256,
            t_max: 0.05,
            output_times: vec![0.0, 0.05],
            profile: "cosine:0.5,0.1,1".parse().unwrap(),
            cfl: DEFAULT_CFL,
        };
        let sol = solve_pde(&config).unwrap();
        let amplitude = |p: &GridProfile| {
            2.0 / p.len() as f64
                * p.centers()
                    .zip(&p.values)
                    .map(|(u, v)| (v - 0.5) * (2.0 * PI * u).cos())
                    .sum::<f64>()
        };
        let ratio = amplitude(&sol.profiles[1]) / amplitude(&sol.profiles[0]);
        let exact = (-4.0 * PI * PI * 0.05).exp();
        assert!((ratio / exact - 1.0).abs() < 0.01);
    }

    #[test]
    fn solver_runs() {
        for model in MODELS {
            let config = HydroConfig {
                model,
                grid: 64,
                t_max: 0.01,
                output_times: vec![0.0, 0.005, 0.01],
                profile: "step:0.8,0.2".parse().unwrap(),
                cfl: DEFAULT_CFL,
            };
            let sol = solve_pde(&config).unwrap();
            assert_eq!(sol.profiles[0], GridProfile::from_profile(&config.profile, 64).unwrap());
            for p in &sol.profiles {
                assert!(p.values.iter().all(|&v| (0.2 - 1e-12..=0.8 + 1e-12).contains(&v)));
            }
        }
        let mut bad = HydroConfig {
            model: ModelSpec::Ssep,
            grid: 8,
            t_max: 0.1,
            output_times: vec![0.0],
            profile: ProfileSpec::Constant(0.5),
            cfl: DEFAULT_CFL,
        };
        assert!(solve_pde(&bad).is_err());
        bad.grid = 16;
        bad.cfl = 1.5;
        assert!(solve_pde(&bad).is_err());
    }

    #[test]
    fn comparison() {
        let sim = SimulationConfig {
            model: ModelSpec::Ssep,
            n_sites: 64,
            profile: ProfileSpec::Constant(1.0),
            t_max: 0.01,
            output_times: vec![0.0, 0.01],
            boxes: 4,
            seed: 1,
            replicas: 2,
            engine: Engine::default(),
        };
        let traj = run_trajectory(&sim).unwrap();
        let hydro = HydroConfig {
            model: ModelSpec::Ssep,
            grid: 16,
            t_max: 0.01,
            output_times: vec![0.0, 0.01],
            profile: ProfileSpec::Constant(1.0),
            cfl: DEFAULT_CFL,
        };
        let pde = solve_pde(&hydro).unwrap();
        let report = compare_profiles(&traj, &pde).unwrap();
        assert!(report
            .times
            .iter()
            .all(|t| t.l1 == 0.0 && t.linf == 0.0 && t.stderr == Some(0.0)));
        let mut other = hydro.clone();
        other.output_times = vec![0.0, 0.005];
        assert!(compare_profiles(&traj, &solve_pde(&other).unwrap()).is_err());
        let mut csv = Vec::new();
        pde.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().next(), Some("t_macro,grid_index,u,rho"));
        assert_eq!(text.lines().count(), 1 + 2 * 16);
    }
}
