//! Dynamic movement primitives learned from a single demonstration.
//!
//! Each configuration dimension is an independent critically damped spring
//! toward the goal, shaped by a forcing term: a normalized mixture of
//! Gaussian basis functions in phase, scaled by the phase and by the motion
//! amplitude `g - y0`. The phase decays exponentially from 1, so the forcing
//! vanishes as the motion completes and the spring settles on the goal.
//!
//! Time is normalized by the motion duration: with `u = t / T`,
//!
//! ```text
//! y''(u) = alpha_y * (beta_y * (g - y) - y'(u)) + f(x(u))
//! x(u)   = exp(-alpha_x * u)
//! ```
//!
//! so gains are per unit of normalized time and a model taught over one
//! duration can be replayed over any other. For a one-second motion the
//! normalized and physical forms coincide.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::trajectory::Trajectory;

/// Dimensions whose amplitude `|g - y0|` is below this are not learned.
pub const DEGENERATE_AMPLITUDE: f64 = 1e-9;

/// Upper bound on the internal integration step, seconds.
pub const MAX_SUBSTEP: f64 = 1e-3;

/// Default goal tolerance as a fraction of each dimension's range.
pub const DEFAULT_GOAL_TOLERANCE: f64 = 1e-3;

/// A recorded motion: strictly increasing timestamps and one configuration per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    times: Vec<f64>,
    configs: Vec<Vec<f64>>,
}

impl Demonstration {
    pub fn new(times: Vec<f64>, configs: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != configs.len() {
            return Err(Error::invalid(format!(
                "{} timestamps but {} configurations",
                times.len(),
                configs.len()
            )));
        }
        if times.len() < 3 {
            return Err(Error::invalid(format!(
                "demonstration needs at least 3 samples, got {}",
                times.len()
            )));
        }
        let n = configs[0].len();
        if n == 0 {
            return Err(Error::invalid("configurations must have at least one dimension"));
        }
        if !times[0].is_finite() {
            return Err(Error::invalid("timestamps must be finite"));
        }
        for (i, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::invalid(format!(
                    "timestamps must be strictly increasing (sample {})",
                    i + 1
                )));
            }
        }
        for (i, q) in configs.iter().enumerate() {
            if q.len() != n {
                return Err(Error::invalid(format!(
                    "sample {i} has dimension {}, expected {n}",
                    q.len()
                )));
            }
            if q.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("sample {i} is not finite")));
            }
        }
        Ok(Demonstration { times, configs })
    }

    pub fn dof(&self) -> usize {
        self.configs[0].len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn configs(&self) -> &[Vec<f64>] {
        &self.configs
    }

    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    pub fn start(&self) -> &[f64] {
        &self.configs[0]
    }

    pub fn goal(&self) -> &[f64] {
        &self.configs[self.configs.len() - 1]
    }

    pub fn column(&self, dim: usize) -> Vec<f64> {
        self.configs.iter().map(|q| q[dim]).collect()
    }

    /// The demonstration shifted to start at `t = 0`.
    pub fn to_trajectory(&self) -> Result<Trajectory> {
        let t0 = self.times[0];
        Trajectory::new(
            self.times.iter().map(|t| t - t0).collect(),
            self.configs.clone(),
        )
    }

    pub fn from_table(table: &io::Table) -> Result<Self> {
        if table.columns.first().map(String::as_str) != Some("t") {
            return Err(Error::invalid("demonstration CSV must start with a `t` column"));
        }
        if table.columns.len() < 2 {
            return Err(Error::invalid("demonstration CSV has no configuration columns"));
        }
        Demonstration::new(
            table.rows.iter().map(|r| r[0]).collect(),
            table.rows.iter().map(|r| r[1..].to_vec()).collect(),
        )
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Demonstration::from_table(&io::read_table(path)?)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let rows = self.times.iter().zip(&self.configs).map(|(t, q)| {
            let mut row = vec![*t];
            row.extend_from_slice(q);
            row
        });
        io::write_table(path, &io::config_header(self.dof()), rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpHyperparams {
    pub alpha_y: f64,
    pub beta_y: f64,
    pub alpha_x: f64,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
}

impl Default for DmpHyperparams {
    fn default() -> Self {
        DmpHyperparams::new(25.0, 6.25, 4.6, 50).expect("valid defaults")
    }
}

impl DmpHyperparams {
    /// Gains plus `n_basis` Gaussians spaced uniformly in normalized time.
    ///
    /// Centers sit at `exp(-alpha_x * i / (N - 1))`; each width is
    /// `1 / (2 * gap^2)` with the gap to the next center, and the last basis
    /// reuses its neighbour's width.
    pub fn new(alpha_y: f64, beta_y: f64, alpha_x: f64, n_basis: usize) -> Result<Self> {
        if n_basis == 0 {
            return Err(Error::invalid("need at least one basis function"));
        }
        let (centers, widths) = if n_basis == 1 {
            (vec![1.0], vec![1.0])
        } else {
            let centers: Vec<f64> = (0..n_basis)
                .map(|i| (-alpha_x * i as f64 / (n_basis - 1) as f64).exp())
                .collect();
            let mut widths: Vec<f64> = centers
                .windows(2)
                .map(|c| 1.0 / (2.0 * (c[1] - c[0]).powi(2)))
                .collect();
            widths.push(widths[widths.len() - 1]);
            (centers, widths)
        };
        let hyper = DmpHyperparams {
            alpha_y,
            beta_y,
            alpha_x,
            centers,
            widths,
        };
        hyper.validate()?;
        Ok(hyper)
    }

    /// Critically damped defaults (`beta_y = alpha_y / 4`, `alpha_x = 4.6`).
    pub fn with_basis(n_basis: usize) -> Result<Self> {
        DmpHyperparams::new(25.0, 6.25, 4.6, n_basis)
    }

    pub fn n_basis(&self) -> usize {
        self.centers.len()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha_y", self.alpha_y),
            ("beta_y", self.beta_y),
            ("alpha_x", self.alpha_x),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.centers.is_empty() || self.centers.len() != self.widths.len() {
            return Err(Error::invalid(
                "centers and widths must be non-empty and of equal length",
            ));
        }
        if let Some(c) = self.centers.iter().find(|c| !(**c > 0.0 && **c <= 1.0)) {
            return Err(Error::invalid(format!("center {c} outside (0, 1]")));
        }
        if let Some(h) = self.widths.iter().find(|h| !(**h > 0.0) || !h.is_finite()) {
            return Err(Error::invalid(format!("width {h} must be positive")));
        }
        Ok(())
    }
}

/// Learned weights plus everything needed to replay the primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct DmpModel {
    pub hyper: DmpHyperparams,
    /// One row of `N` weights per dimension.
    pub weights: Vec<Vec<f64>>,
    pub y0_demo: Vec<f64>,
    pub g_demo: Vec<f64>,
    pub duration_demo: f64,
}

/// On-disk layout of a [`DmpModel`].
#[derive(Serialize, Deserialize)]
struct ModelFile {
    n: usize,
    #[serde(rename = "N")]
    n_basis: usize,
    alpha_y: f64,
    beta_y: f64,
    alpha_x: f64,
    centers: Vec<f64>,
    widths: Vec<f64>,
    weights: Vec<Vec<f64>>,
    y0_demo: Vec<f64>,
    g_demo: Vec<f64>,
    duration_demo: f64,
}

impl From<DmpModel> for ModelFile {
    fn from(m: DmpModel) -> Self {
        ModelFile {
            n: m.dof(),
            n_basis: m.hyper.n_basis(),
            alpha_y: m.hyper.alpha_y,
            beta_y: m.hyper.beta_y,
            alpha_x: m.hyper.alpha_x,
            centers: m.hyper.centers,
            widths: m.hyper.widths,
            weights: m.weights,
            y0_demo: m.y0_demo,
            g_demo: m.g_demo,
            duration_demo: m.duration_demo,
        }
    }
}

impl TryFrom<ModelFile> for DmpModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.centers.len() != f.n_basis {
            return Err(Error::invalid(format!(
                "N = {} but {} centers",
                f.n_basis,
                f.centers.len()
            )));
        }
        let model = DmpModel {
            hyper: DmpHyperparams {
                alpha_y: f.alpha_y,
                beta_y: f.beta_y,
                alpha_x: f.alpha_x,
                centers: f.centers,
                widths: f.widths,
            },
            weights: f.weights,
            y0_demo: f.y0_demo,
            g_demo: f.g_demo,
            duration_demo: f.duration_demo,
        };
        if model.weights.len() != f.n {
            return Err(Error::invalid(format!(
                "n = {} but {} weight rows",
                f.n,
                model.weights.len()
            )));
        }
        model.validate()?;
        Ok(model)
    }
}

impl DmpModel {
    pub fn dof(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        let n = self.dof();
        let big_n = self.hyper.n_basis();
        if n == 0 {
            return Err(Error::invalid("model has no dimensions"));
        }
        if self.weights.iter().any(|row| row.len() != big_n) {
            return Err(Error::invalid(format!("every weight row must hold {big_n} weights")));
        }
        if self.weights.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::invalid("weights must be finite"));
        }
        if self.y0_demo.len() != n || self.g_demo.len() != n {
            return Err(Error::invalid("demo endpoints do not match model dimension"));
        }
        if !(self.duration_demo > 0.0) {
            return Err(Error::invalid("demo duration must be positive"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("model JSON: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        io::read_json(path)
    }
}

/// Phase at time `t` of a motion lasting `duration`: `exp(-alpha_x * t / duration)`.
pub fn canonical_phase(t: f64, alpha_x: f64, duration: f64) -> Result<f64> {
    if !(duration > 0.0) {
        return Err(Error::invalid(format!("duration must be positive, got {duration}")));
    }
    Ok((-alpha_x * t / duration).exp())
}

/// Gaussian basis activations `exp(-h_i * (x - c_i)^2)`.
pub fn basis_activations(x: f64, hyper: &DmpHyperparams) -> Vec<f64> {
    hyper
        .centers
        .iter()
        .zip(&hyper.widths)
        .map(|(c, h)| (-h * (x - c) * (x - c)).exp())
        .collect()
}

fn normalized_mixture(activations: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = activations.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    activations.iter().zip(weights).map(|(p, w)| p * w).sum::<f64>() / total
}

/// Forcing term for one dimension at phase `x`.
pub fn forcing_term(x: f64, dim: usize, model: &DmpModel, y0: &[f64], g: &[f64]) -> f64 {
    let psi = basis_activations(x, &model.hyper);
    normalized_mixture(&psi, &model.weights[dim]) * x * (g[dim] - y0[dim])
}

/// Finite-difference weights for derivatives 0..=order at `z` over the
/// stencil `xs` (Fornberg's recursion). Row `m` holds the weights of the
/// `m`-th derivative.
fn fd_weights(z: f64, xs: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// First and second derivatives of `y` sampled at increasing `t`.
///
/// Three-point divided differences in the interior; four-point one-sided
/// stencils at the ends (three-point when only three samples exist).
pub(crate) fn derivatives(t: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = t.len();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    let edge = n.min(4);
    for i in 0..n {
        let range = if i == 0 {
            0..edge
        } else if i == n - 1 {
            n - edge..n
        } else {
            i - 1..i + 2
        };
        let w = fd_weights(t[i], &t[range.clone()], 2);
        d1[i] = w[1].iter().zip(&y[range.clone()]).map(|(a, b)| a * b).sum();
        d2[i] = w[2].iter().zip(&y[range]).map(|(a, b)| a * b).sum();
    }
    (d1, d2)
}

fn normalized_times(demo: &Demonstration) -> Vec<f64> {
    let t0 = demo.times[0];
    let duration = demo.duration();
    demo.times.iter().map(|t| (t - t0) / duration).collect()
}

/// Forcing the spring would need to reproduce the demonstration exactly,
/// sampled at every demonstration timestamp. The goal is the final sample.
pub fn target_forcing(demo: &Demonstration, hyper: &DmpHyperparams, dim: usize) -> Result<Vec<f64>> {
    if demo.len() < 3 {
        return Err(Error::invalid("need at least 3 samples to differentiate"));
    }
    if dim >= demo.dof() {
        return Err(Error::invalid(format!(
            "dimension {dim} out of range for {} DoF",
            demo.dof()
        )));
    }
    let u = normalized_times(demo);
    let y = demo.column(dim);
    let g = y[y.len() - 1];
    let (dy, ddy) = derivatives(&u, &y);
    Ok(y.iter()
        .zip(dy.iter().zip(&ddy))
        .map(|(yt, (v, a))| a - hyper.alpha_y * (hyper.beta_y * (g - yt) - v))
        .collect())
}

/// Closed-form minimizer of `sum_t psi_t * (target_t - w * regressor_t)^2`.
pub(crate) fn lwr_weight(psi: &[f64], regressor: &[f64], target: &[f64]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((p, s), f) in psi.iter().zip(regressor).zip(target) {
        num += p * s * f;
        den += p * s * s;
    }
    (den > 0.0).then(|| num / den)
}

struct RegressionData {
    /// Activations, indexed `[basis][sample]`.
    psi: Vec<Vec<f64>>,
    /// Phase times amplitude per sample.
    regressor: Vec<f64>,
    target: Vec<f64>,
}

fn regression_data(demo: &Demonstration, hyper: &DmpHyperparams, dim: usize) -> Result<RegressionData> {
    let target = target_forcing(demo, hyper, dim)?;
    let amplitude = demo.goal()[dim] - demo.start()[dim];
    let phases: Vec<f64> = normalized_times(demo)
        .iter()
        .map(|u| (-hyper.alpha_x * u).exp())
        .collect();
    let mut psi = vec![Vec::with_capacity(phases.len()); hyper.n_basis()];
    for x in &phases {
        for (row, a) in psi.iter_mut().zip(basis_activations(*x, hyper)) {
            row.push(a);
        }
    }
    Ok(RegressionData {
        psi,
        regressor: phases.iter().map(|x| x * amplitude).collect(),
        target,
    })
}

/// Locally weighted quadratic error of basis `basis` in dimension `dim` for
/// a candidate `weight`, evaluated directly over the demonstration.
pub fn lwr_cost(
    demo: &Demonstration,
    hyper: &DmpHyperparams,
    dim: usize,
    basis: usize,
    weight: f64,
) -> Result<f64> {
    if basis >= hyper.n_basis() {
        return Err(Error::invalid(format!("basis {basis} out of range")));
    }
    let data = regression_data(demo, hyper, dim)?;
    Ok(data.psi[basis]
        .iter()
        .zip(&data.regressor)
        .zip(&data.target)
        .map(|((p, s), f)| p * (f - weight * s).powi(2))
        .sum())
}

/// Fits forcing-term weights to a demonstration by locally weighted regression.
pub fn learn_weights(demo: &Demonstration, hyper: &DmpHyperparams) -> Result<DmpModel> {
    hyper.validate()?;
    let n = demo.dof();
    let mut weights = Vec::with_capacity(n);
    for dim in 0..n {
        let amplitude = demo.goal()[dim] - demo.start()[dim];
        if amplitude.abs() < DEGENERATE_AMPLITUDE {
            weights.push(vec![0.0; hyper.n_basis()]);
            continue;
        }
        let data = regression_data(demo, hyper, dim)?;
        let row = data
            .psi
            .iter()
            .enumerate()
            .map(|(basis, psi)| {
                lwr_weight(psi, &data.regressor, &data.target)
                    .ok_or(Error::DegenerateRegressor { dim, basis })
            })
            .collect::<Result<Vec<f64>>>()?;
        weights.push(row);
    }
    let model = DmpModel {
        hyper: hyper.clone(),
        weights,
        y0_demo: demo.start().to_vec(),
        g_demo: demo.goal().to_vec(),
        duration_demo: demo.duration(),
    };
    model.validate()?;
    Ok(model)
}

/// Integrates the primitive from `y0` (at rest) toward `g` over `duration`,
/// sampling every `dt`. The final sample lands exactly on `duration`.
///
/// Explicit Euler with substeps no longer than [`MAX_SUBSTEP`] seconds (and
/// no longer than a thousandth of the duration).
pub fn rollout(model: &DmpModel, y0: &[f64], g: &[f64], dt: f64, duration: f64) -> Result<Trajectory> {
    let n = model.dof();
    if y0.len() != n || g.len() != n {
        return Err(Error::invalid(format!(
            "model has {n} dimensions but y0 has {} and g has {}",
            y0.len(),
            g.len()
        )));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::invalid(format!("duration must be positive, got {duration}")));
    }
    let hyper = &model.hyper;
    let amplitude: Vec<f64> = g.iter().zip(y0).map(|(g, y)| g - y).collect();
    let steps = ((duration / dt) - 1e-9).ceil().max(1.0) as usize;
    let max_substep = MAX_SUBSTEP.min(duration * 1e-3);

    let mut y = y0.to_vec();
    let mut z = vec![0.0; n];
    let mut times = Vec::with_capacity(steps + 1);
    let mut configs = Vec::with_capacity(steps + 1);
    times.push(0.0);
    configs.push(y.clone());

    let mut t = 0.0;
    for step in 1..=steps {
        let t_next = if step == steps { duration } else { step as f64 * dt };
        let span = t_next - t;
        let substeps = (span / max_substep).ceil().max(1.0) as usize;
        let h = span / substeps as f64;
        let hu = h / duration;
        for k in 0..substeps {
            let u = (t + k as f64 * h) / duration;
            let x = (-hyper.alpha_x * u).exp();
            let psi = basis_activations(x, hyper);
            for d in 0..n {
                let f = normalized_mixture(&psi, &model.weights[d]) * x * amplitude[d];
                let acc = hyper.alpha_y * (hyper.beta_y * (g[d] - y[d]) - z[d]) + f;
                y[d] += hu * z[d];
                z[d] += hu * acc;
            }
        }
        if y.iter().chain(&z).any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { step });
        }
        t = t_next;
        times.push(t);
        configs.push(y.clone());
    }
    Trajectory::new(times, configs)
}

/// Whether the last configuration is within `fraction * |g - y0|` of `g` in
/// every dimension.
pub fn reaches_goal(traj: &Trajectory, y0: &[f64], g: &[f64], fraction: f64) -> bool {
    traj.last()
        .iter()
        .zip(g.iter().zip(y0))
        .all(|(y, (g, y0))| (y - g).abs() <= (fraction * (g - y0).abs()).max(1e-12))
}

/// Per-dimension RMSE between the demonstration and the model replayed with
/// the demonstration's own endpoints and duration, compared at the
/// demonstration timestamps.
pub fn reconstruction_rmse(model: &DmpModel, demo: &Demonstration) -> Result<Vec<f64>> {
    let duration = demo.duration();
    let dt = duration / (demo.len() - 1) as f64;
    let traj = rollout(model, demo.start(), demo.goal(), dt, duration)?;
    let t0 = demo.times[0];
    let mut sq = vec![0.0; demo.dof()];
    for (t, q) in demo.times.iter().zip(&demo.configs) {
        let s = (t - t0).clamp(0.0, traj.duration());
        let r = traj.config_at(s)?;
        for (acc, (a, b)) in sq.iter_mut().zip(r.iter().zip(q)) {
            *acc += (a - b).powi(2);
        }
    }
    Ok(sq.iter().map(|s| (s / demo.len() as f64).sqrt()).collect())
}
