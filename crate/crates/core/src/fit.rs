//! Fitting a [`LumpedRlModel`] to series R–L samples of the gas film.
//!
//! The objective is the relative complex least-squares misfit
//! `Σ_i |Z_model(jω_i) − Z_i|² / |Z_i|²`, minimized over `ln r_k`, `ln l_k`
//! (positivity by construction) with Levenberg-Marquardt. Several jittered
//! starts are run from a seeded generator and the best one is kept.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::macromodel::{LumpedRlModel, RlBranch, SeriesRlPoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub n_starts: usize,
    pub seed: u64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_starts: 8,
            seed: 0x5eed_f11e,
            max_iterations: 400,
        }
    }
}

/// Fit `n_branches` stages with default options.
pub fn fit_branches(points: &[SeriesRlPoint], n_branches: usize) -> Result<LumpedRlModel> {
    fit_branches_with(points, n_branches, &FitOptions::default())
}

pub fn fit_branches_with(
    points: &[SeriesRlPoint],
    n_branches: usize,
    opts: &FitOptions,
) -> Result<LumpedRlModel> {
    let problem = Problem::new(points, n_branches)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let base = problem.initial_guess();

    let mut best: Option<(Outcome, DVector<f64>)> = None;
    let mut any_converged = false;
    for start in 0..opts.n_starts.max(1) {
        let theta0 = if start == 0 {
            base.clone()
        } else {
            jitter(&base, &mut rng)
        };
        let (theta, outcome) = problem.levenberg_marquardt(theta0, opts.max_iterations);
        log::debug!(
            "fit start {start}: cost {:.3e} after {} iterations (converged: {})",
            outcome.cost,
            outcome.iterations,
            outcome.converged
        );
        any_converged |= outcome.converged;
        if best.as_ref().is_none_or(|(b, _)| outcome.cost < b.cost) {
            best = Some((outcome, theta));
        }
    }
    let (outcome, theta) = best.expect("at least one start");
    let residual = problem.rms(outcome.cost);
    let model = problem.to_model(&theta, residual)?;
    if !any_converged || !residual.is_finite() {
        return Err(Error::Fit {
            best: Box::new(model),
            residual,
            starts: opts.n_starts.max(1),
        });
    }
    Ok(model)
}

/// Multiplicative jitter: corners ±1 decade, resistances ±0.5 decade.
fn jitter(base: &DVector<f64>, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let ln10 = std::f64::consts::LN_10;
    let mut t = base.clone();
    for k in 0..t.len() / 2 {
        let dr = rng.random_range(-0.5..0.5) * ln10;
        let dc = rng.random_range(-1.0..1.0) * ln10;
        // corner = r / l, so ln l = ln r − ln corner
        t[2 * k] += dr;
        t[2 * k + 1] += dr - dc;
    }
    t
}

struct Outcome {
    cost: f64,
    iterations: usize,
    converged: bool,
}

struct Problem {
    omega: Vec<f64>,
    target: Vec<Complex64>,
    inv_mag: Vec<f64>,
    n_branches: usize,
    band_hz: (f64, f64),
}

impl Problem {
    fn new(points: &[SeriesRlPoint], n_branches: usize) -> Result<Self> {
        if n_branches == 0 {
            return Err(Error::param("n_branches", "must be at least 1"));
        }
        if points.len() < 2 * n_branches {
            return Err(Error::param(
                "points",
                format!(
                    "{} points cannot determine {} branches (need >= {})",
                    points.len(),
                    n_branches,
                    2 * n_branches
                ),
            ));
        }
        let mut omega = Vec::with_capacity(points.len());
        let mut target = Vec::with_capacity(points.len());
        let mut inv_mag = Vec::with_capacity(points.len());
        for p in points {
            let z = p.impedance();
            if !(p.omega.is_finite() && p.omega > 0.0) || !(z.norm() > 0.0 && z.norm().is_finite())
            {
                return Err(Error::param(
                    "points",
                    format!("invalid sample at ω = {}", p.omega),
                ));
            }
            omega.push(p.omega);
            target.push(z);
            inv_mag.push(1.0 / z.norm());
        }
        let w_lo = omega.iter().copied().fold(f64::INFINITY, f64::min);
        let w_hi = omega.iter().copied().fold(0.0, f64::max);
        if w_hi < 10.0 * w_lo {
            return Err(Error::param(
                "points",
                "samples must span at least one decade",
            ));
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        Ok(Self {
            omega,
            target,
            inv_mag,
            n_branches,
            band_hz: (w_lo / two_pi, w_hi / two_pi),
        })
    }

    /// Corners log-uniform across the band, `Σ r_k` equal to `|Z|` at the
    /// highest sample.
    fn initial_guess(&self) -> DVector<f64> {
        let n = self.n_branches;
        let two_pi = 2.0 * std::f64::consts::PI;
        let (lo, hi) = (self.band_hz.0 * two_pi, self.band_hz.1 * two_pi);
        let i_hi = self
            .omega
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        let r_each = self.target[i_hi].norm() / n as f64;
        let mut t = DVector::zeros(2 * n);
        for k in 0..n {
            let corner = lo * (hi / lo).powf((k as f64 + 0.5) / n as f64);
            t[2 * k] = r_each.ln();
            t[2 * k + 1] = (r_each / corner).ln();
        }
        t
    }

    fn branches(&self, theta: &DVector<f64>) -> Vec<RlBranch> {
        (0..self.n_branches)
            .map(|k| RlBranch {
                r: theta[2 * k].exp(),
                l: theta[2 * k + 1].exp(),
            })
            .collect()
    }

    fn rms(&self, cost: f64) -> f64 {
        (2.0 * cost / self.omega.len() as f64).sqrt()
    }

    fn to_model(&self, theta: &DVector<f64>, residual: f64) -> Result<LumpedRlModel> {
        let mut branches = self.branches(theta);
        merge_equal_corners(&mut branches);
        LumpedRlModel::new(
            branches,
            self.band_hz,
            if residual.is_finite() {
                residual
            } else {
                f64::MAX
            },
        )
    }

    /// Residual vector `[Re e_0, Im e_0, Re e_1, ...]` with
    /// `e_i = (Z_model − Z_i) / |Z_i|`, and optionally its Jacobian.
    fn evaluate(
        &self,
        theta: &DVector<f64>,
        want_jac: bool,
    ) -> (DVector<f64>, Option<DMatrix<f64>>) {
        let branches = self.branches(theta);
        let m = self.omega.len();
        let p = 2 * self.n_branches;
        let mut res = DVector::zeros(2 * m);
        let mut jac = want_jac.then(|| DMatrix::zeros(2 * m, p));
        for i in 0..m {
            let w = self.omega[i];
            let s = self.inv_mag[i];
            let mut z = Complex64::new(0.0, 0.0);
            for (k, br) in branches.iter().enumerate() {
                let c = Complex64::new(0.0, w * br.l);
                let sum = c + br.r;
                z += c * br.r / sum;
                if let Some(j) = jac.as_mut() {
                    let inv2 = (sum * sum).inv();
                    // ∂Z/∂ln r = r c² / (r+c)², ∂Z/∂ln l = c r² / (r+c)²
                    let dr = c * c * br.r * inv2 * s;
                    let dl = c * br.r * br.r * inv2 * s;
                    j[(2 * i, 2 * k)] = dr.re;
                    j[(2 * i + 1, 2 * k)] = dr.im;
                    j[(2 * i, 2 * k + 1)] = dl.re;
                    j[(2 * i + 1, 2 * k + 1)] = dl.im;
                }
            }
            let e = (z - self.target[i]) * s;
            res[2 * i] = e.re;
            res[2 * i + 1] = e.im;
        }
        (res, jac)
    }

    fn cost(&self, theta: &DVector<f64>) -> f64 {
        0.5 * self.evaluate(theta, false).0.norm_squared()
    }

    /// Damped Gauss-Newton with Marquardt diagonal scaling and Nielsen's
    /// damping update.
    fn levenberg_marquardt(
        &self,
        mut theta: DVector<f64>,
        max_iter: usize,
    ) -> (DVector<f64>, Outcome) {
        const GTOL: f64 = 1e-14;
        const XTOL: f64 = 1e-13;
        const FTOL: f64 = 1e-16;
        // Keeps ln-parameters within f64 range while a branch drifts out of band.
        const LN_LIMIT: f64 = 600.0;

        let p = theta.len();
        let (mut r, jac) = self.evaluate(&theta, true);
        let mut jac = jac.unwrap();
        let mut cost = 0.5 * r.norm_squared();
        let mut lambda = 1e-3;
        let mut nu = 2.0;
        let mut converged = false;
        let mut iterations = 0;

        while iterations < max_iter {
            iterations += 1;
            let jtj = jac.transpose() * &jac;
            let g = jac.transpose() * &r;
            if g.amax() < GTOL || cost < 1e-32 {
                converged = true;
                break;
            }
            let diag: Vec<f64> = (0..p).map(|i| jtj[(i, i)].max(1e-12)).collect();
            let mut a = jtj.clone();
            for (i, d) in diag.iter().enumerate() {
                a[(i, i)] += lambda * d;
            }
            let Some(chol) = a.cholesky() else {
                lambda *= nu;
                nu *= 2.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let candidate = (&theta + &step).map(|v| v.clamp(-LN_LIMIT, LN_LIMIT));
            let new_cost = self.cost(&candidate);
            let predicted = -(step.dot(&g) + 0.5 * step.dot(&(&jtj * &step)));
            let rho = if predicted > 0.0 {
                (cost - new_cost) / predicted
            } else {
                -1.0
            };
            if rho > 0.0 && new_cost.is_finite() {
                let small_step = step.norm() <= XTOL * (theta.norm() + XTOL);
                let small_gain = (cost - new_cost) <= FTOL * cost;
                theta = candidate;
                let (nr, nj) = self.evaluate(&theta, true);
                r = nr;
                jac = nj.unwrap();
                cost = new_cost;
                lambda *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
                nu = 2.0;
                if small_step || small_gain {
                    converged = true;
                    break;
                }
            } else {
                lambda *= nu;
                nu *= 2.0;
                if lambda > 1e16 {
                    // No downhill direction left at working precision.
                    converged = true;
                    break;
                }
            }
        }
        (
            theta,
            Outcome {
                cost,
                iterations,
                converged,
            },
        )
    }
}

/// Two stages with the same corner behave as one with summed `r` and `l`.
fn merge_equal_corners(branches: &mut Vec<RlBranch>) {
    branches.sort_by(|a, b| a.corner().total_cmp(&b.corner()));
    let mut out: Vec<RlBranch> = Vec::with_capacity(branches.len());
    for b in branches.drain(..) {
        match out.last_mut() {
            Some(prev) if prev.corner() == b.corner() => {
                prev.r += b.r;
                prev.l += b.l;
            }
            _ => out.push(b),
        }
    }
    *branches = out;
}
