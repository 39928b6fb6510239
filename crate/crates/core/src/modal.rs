//! Least-squares Prony identification of damped oscillatory modes and the
//! comparison of mode sets recorded at two points of a network.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub dt: f64,
    pub samples: Vec<f64>,
    pub label: String,
    pub start_time: f64,
}

impl TimeSeries {
    pub fn new(dt: f64, samples: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Argument(format!("dt must be positive, got {dt}")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("series contains non-finite samples".into()));
        }
        Ok(TimeSeries {
            dt,
            samples,
            label: label.into(),
            start_time: 0.0,
        })
    }

    pub fn with_start(mut self, start_time: f64) -> Self {
        self.start_time = start_time;
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| self.start_time + k as f64 * self.dt)
            .collect()
    }
}

/// One identified mode; real signals report each conjugate pair once with
/// `omega >= 0` and the pair's combined amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PronyMode {
    /// Real part of the eigenvalue, 1/s.
    pub sigma: f64,
    /// Imaginary part, rad/s.
    pub omega: f64,
    pub amplitude: f64,
    pub phase: f64,
    /// Fraction of the modeled signal energy.
    pub energy: f64,
}

impl PronyMode {
    pub fn eigenvalue(&self) -> C64 {
        C64::new(self.sigma, self.omega)
    }

    pub fn frequency_hz(&self) -> f64 {
        self.omega / (2.0 * std::f64::consts::PI)
    }

    /// Contribution `A e^{sigma t} cos(omega t + phase)` at time `t` from
    /// the record start.
    pub fn value(&self, t: f64) -> f64 {
        self.amplitude * (self.sigma * t).exp() * (self.omega * t + self.phase).cos()
    }
}

/// Removal of slow components. `Mean` and `Linear` project a constant (and a
/// ramp) out of the prediction equations, so the offset and slope are fitted
/// jointly with the modes instead of biasing them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detrend {
    None,
    #[default]
    Mean,
    Linear,
}

impl Detrend {
    fn terms(self) -> usize {
        match self {
            Detrend::None => 0,
            Detrend::Mean => 1,
            Detrend::Linear => 2,
        }
    }
}

/// Complete result of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PronyFit {
    pub modes: Vec<PronyMode>,
    /// Fitted constant offset (zero without detrending).
    pub offset: f64,
    /// Fitted linear trend per second (zero unless `Detrend::Linear`).
    pub slope: f64,
    /// Discrete poles and complex amplitudes of the oscillatory part,
    /// conjugates included.
    pub poles: Vec<(C64, C64)>,
    pub dt: f64,
}

impl PronyFit {
    /// Evaluates the fitted model at the sample instants of the record.
    pub fn reconstruct(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let t = k as f64 * self.dt;
                self.offset + self.slope * t + self.modes.iter().map(|m| m.value(t)).sum::<f64>()
            })
            .collect()
    }

    /// Imaginary residue of the complex-exponential sum at each sample.
    pub fn imaginary_residue(&self, n: usize) -> f64 {
        (0..n)
            .map(|k| {
                self.poles
                    .iter()
                    .map(|(z, h)| h * z.powi(k as i32))
                    .sum::<C64>()
                    .im
                    .abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Removes the span of `[1, m, ..]` (first `terms` powers of the row index)
/// from the columns of `a`.
fn project_out_trend(a: &mut DMatrix<f64>, terms: usize) {
    if terms == 0 || a.nrows() <= terms {
        return;
    }
    let rows = a.nrows();
    let t = DMatrix::from_fn(rows, terms, |r, c| (r as f64).powi(c as i32));
    let q = t.qr().q();
    let proj = &q * (q.transpose() * &*a);
    *a -= proj;
}

/// Relative singular-value floor below which the prediction matrix counts as
/// rank deficient.
const RANK_TOL: f64 = 1e-11;

/// Default extended prediction order.
const EXTENDED_ORDER: usize = 100;

/// Makes near-conjugate roots exact conjugates and near-real roots real, so
/// that real signals reconstruct without imaginary residue.
fn pair_conjugates(mut roots: Vec<C64>) -> Vec<C64> {
    let tol = 1e-9;
    let mut used = vec![false; roots.len()];
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        if roots[i].im.abs() <= tol * roots[i].norm() {
            roots[i].im = 0.0;
            continue;
        }
        let target = roots[i].conj();
        let partner = (0..roots.len()).filter(|&j| !used[j]).min_by(|&a, &b| {
            (roots[a] - target)
                .norm()
                .total_cmp(&(roots[b] - target).norm())
        });
        if let Some(j) = partner {
            let upper = |z: C64| if z.im > 0.0 { z } else { z.conj() };
            let z = 0.5 * (upper(roots[i]) + upper(roots[j]));
            roots[i] = z;
            roots[j] = z.conj();
            used[j] = true;
        }
    }
    roots
}

/// Prony fit with mean removal.
pub fn prony_fit(series: &TimeSeries, order: usize) -> Result<Vec<PronyMode>> {
    Ok(prony_fit_detailed(series, order, Detrend::Mean)?.modes)
}

pub fn prony_fit_detailed(series: &TimeSeries, order: usize, detrend: Detrend) -> Result<PronyFit> {
    let n = series.len();
    if order == 0 {
        return Err(Error::Argument("order must be at least 1".into()));
    }
    if order > n / 4 {
        return Err(Error::Argument(format!(
            "order {order} needs at least {} samples, have {n}",
            4 * order
        )));
    }
    // Backward prediction at an extended order with the data matrix
    // truncated to rank `order` (Kumaresan-Tufts). Signal zeros of the
    // minimum-norm polynomial lie inside the unit circle, extraneous ones
    // outside.
    let trend = detrend.terms();
    let x = &series.samples;
    let ext = ((n - trend) / 3)
        .min(EXTENDED_ORDER.max(4 * order))
        .max(order);
    let rows = n - ext;
    let mut sys = DMatrix::from_fn(
        rows,
        ext + 1,
        |r, c| if c < ext { x[r + c + 1] } else { x[r] },
    );
    project_out_trend(&mut sys, trend);
    let a_mat = sys.columns(0, ext).into_owned();
    let rhs = sys.column(ext).into_owned();
    let svd = a_mat.svd(true, true);
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let smax = svd.singular_values[idx[0]];
    if !(smax > 0.0) || idx.len() < order || svd.singular_values[idx[order - 1]] < RANK_TOL * smax {
        return Err(Error::DegenerateSignal(format!(
            "prediction matrix is rank deficient at order {order}"
        )));
    }
    let (u, vt) = (
        svd.u.as_ref().expect("u requested"),
        svd.v_t.as_ref().expect("v_t requested"),
    );
    let mut coeffs = DVector::<f64>::zeros(ext);
    for &i in idx.iter().take(order) {
        let w = u.column(i).dot(&rhs) / svd.singular_values[i];
        coeffs -= vt.row(i).transpose() * w;
    }

    // 1 + b_1 z + ... + b_L z^L vanishes at z = 1/w with w a root of the
    // monic w^L + b_1 w^{L-1} + ... + b_L
    let mut comp = DMatrix::<f64>::zeros(ext, ext);
    for c in 0..ext {
        comp[(0, c)] = -coeffs[c];
    }
    for r in 1..ext {
        comp[(r, r - 1)] = 1.0;
    }
    let mut w: Vec<C64> = comp.complex_eigenvalues().iter().copied().collect();
    w.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let roots: Vec<C64> = w[..order].iter().map(|w| w.inv()).collect();
    if roots
        .iter()
        .any(|z| z.norm() == 0.0 || !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::DegenerateSignal(
            "prediction polynomial has a zero root".into(),
        ));
    }
    let roots = pair_conjugates(roots);

    // amplitudes against the exponential basis plus trend terms
    let cols = roots.len() + trend;
    let basis = DMatrix::<C64>::from_fn(n, cols, |r, c| {
        if c < roots.len() {
            roots[c].powi(r as i32)
        } else if c == roots.len() {
            C64::new(1.0, 0.0)
        } else {
            C64::new(r as f64, 0.0)
        }
    });
    let target = DVector::<C64>::from_fn(n, |r, _| C64::new(x[r], 0.0));
    let amp = basis
        .svd(true, true)
        .solve(&target, 1e-14)
        .map_err(|e| Error::DegenerateSignal(e.to_string()))?;
    let offset = if trend >= 1 { amp[roots.len()].re } else { 0.0 };
    let slope = if trend >= 2 {
        amp[roots.len() + 1].re / series.dt
    } else {
        0.0
    };

    let dt = series.dt;
    let mut modes = Vec::new();
    let mut poles = Vec::with_capacity(roots.len());
    for (k, &z) in roots.iter().enumerate() {
        let h = amp[k];
        poles.push((z, h));
        let sigma = z.norm().ln() / dt;
        let imag_tol = 1e-12 * z.norm();
        let energy: f64 = (0..n)
            .map(|m| {
                let v = h * z.powi(m as i32);
                if z.im.abs() <= imag_tol {
                    v.re * v.re
                } else {
                    4.0 * v.re * v.re
                }
            })
            .sum();
        if z.im.abs() <= imag_tol {
            let (amplitude, phase) = if h.re >= 0.0 {
                (h.re, 0.0)
            } else {
                (-h.re, std::f64::consts::PI)
            };
            let omega = if z.re < 0.0 {
                std::f64::consts::PI / dt
            } else {
                0.0
            };
            modes.push((
                PronyMode {
                    sigma,
                    omega,
                    amplitude,
                    phase,
                    energy: 0.0,
                },
                energy,
            ));
        } else if z.im > 0.0 {
            modes.push((
                PronyMode {
                    sigma,
                    omega: z.arg() / dt,
                    amplitude: 2.0 * h.norm(),
                    phase: h.arg(),
                    energy: 0.0,
                },
                energy,
            ));
        }
    }
    let total: f64 = modes.iter().map(|(_, e)| e).sum();
    let mut modes: Vec<PronyMode> = modes
        .into_iter()
        .map(|(mut m, e)| {
            m.energy = if total > 0.0 { e / total } else { 0.0 };
            m
        })
        .collect();
    modes.sort_by(|a, b| {
        b.energy
            .total_cmp(&a.energy)
            .then(a.omega.total_cmp(&b.omega))
    });
    Ok(PronyFit {
        modes,
        offset,
        slope,
        poles,
        dt,
    })
}

/// Outcome of singular-value order selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderSelection {
    pub order: usize,
    /// Energy fraction of the two leading singular values.
    pub top_pair_energy: f64,
    /// False when the leading pair holds less than half the energy.
    pub dominant_mode: bool,
}

/// Smallest order whose Hankel singular values reach `energy_threshold` of
/// the total squared singular-value energy, trend terms projected out.
pub fn select_order(series: &TimeSeries, energy_threshold: f64) -> Result<usize> {
    Ok(select_order_detailed(series, energy_threshold, Detrend::Mean)?.order)
}

pub fn select_order_detailed(
    series: &TimeSeries,
    energy_threshold: f64,
    detrend: Detrend,
) -> Result<OrderSelection> {
    if !(energy_threshold > 0.0 && energy_threshold < 1.0) {
        return Err(Error::Argument(format!(
            "energy threshold must lie in (0, 1), got {energy_threshold}"
        )));
    }
    let x = &series.samples;
    let trend = detrend.terms();
    let max_order = series.len() / 4;
    if max_order == 0 || x.len() < 4 + trend {
        return Err(Error::Argument(
            "series too short for order selection".into(),
        ));
    }
    let rows = (x.len() / 2).clamp(2, 200);
    let cols = x.len() - rows + 1;
    // columns are windows; removing the trend from each keeps the rank of
    // the modal part
    let mut hankel = DMatrix::from_fn(cols, rows, |r, c| x[r + c]);
    project_out_trend(&mut hankel, trend);
    let mut sv: Vec<f64> = hankel.singular_values().iter().map(|s| s * s).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = sv.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateSignal(
            "signal has no energy after detrending".into(),
        ));
    }
    let mut cum = 0.0;
    let mut order = sv.len();
    for (k, s) in sv.iter().enumerate() {
        cum += s;
        if cum >= energy_threshold * total {
            order = k + 1;
            break;
        }
    }
    let top_pair_energy = sv.iter().take(2).sum::<f64>() / total;
    Ok(OrderSelection {
        order: order.min(max_order),
        top_pair_energy,
        dominant_mode: top_pair_energy >= 0.5,
    })
}

/// `zeta = -sigma / sqrt(sigma^2 + omega^2)`.
pub fn damping_ratio(mode: &PronyMode) -> Result<f64> {
    let mag = mode.sigma.hypot(mode.omega);
    if mag == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(-mode.sigma / mag)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModePair {
    pub send: PronyMode,
    pub recv: PronyMode,
    pub d_sigma: f64,
    pub d_omega: f64,
    /// `|lambda_recv| - |lambda_send|`.
    pub d_magnitude: f64,
    /// Both `|sigma|` and `|omega|` grow from sender to receiver.
    pub reduced_inertia_signature: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationReport {
    pub pairs: Vec<ModePair>,
    pub unpaired_send: Vec<PronyMode>,
    pub unpaired_recv: Vec<PronyMode>,
    /// Every pair shows the reduced-inertia signature.
    pub signature: bool,
}

/// Greedy nearest-`omega` pairing of two mode sets, ties broken by nearest
/// `sigma`.
pub fn eigen_migration(send: &[PronyMode], recv: &[PronyMode]) -> Result<MigrationReport> {
    if send.is_empty() || recv.is_empty() {
        return Err(Error::Argument("both mode lists must be non-empty".into()));
    }
    let mut cand: Vec<(f64, f64, usize, usize)> = Vec::with_capacity(send.len() * recv.len());
    for (i, a) in send.iter().enumerate() {
        for (j, b) in recv.iter().enumerate() {
            cand.push(((a.omega - b.omega).abs(), (a.sigma - b.sigma).abs(), i, j));
        }
    }
    cand.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then(x.1.total_cmp(&y.1))
            .then(x.2.cmp(&y.2))
            .then(x.3.cmp(&y.3))
    });
    let mut used_s = vec![false; send.len()];
    let mut used_r = vec![false; recv.len()];
    let mut matched = Vec::new();
    for (_, _, i, j) in cand {
        if !used_s[i] && !used_r[j] {
            used_s[i] = true;
            used_r[j] = true;
            matched.push((i, j));
        }
    }
    matched.sort();
    let pairs: Vec<ModePair> = matched
        .into_iter()
        .map(|(i, j)| {
            let (a, b) = (send[i], recv[j]);
            ModePair {
                send: a,
                recv: b,
                d_sigma: b.sigma - a.sigma,
                d_omega: b.omega - a.omega,
                d_magnitude: b.eigenvalue().norm() - a.eigenvalue().norm(),
                reduced_inertia_signature: b.sigma.abs() > a.sigma.abs()
                    && b.omega.abs() > a.omega.abs(),
            }
        })
        .collect();
    let signature = !pairs.is_empty() && pairs.iter().all(|p| p.reduced_inertia_signature);
    Ok(MigrationReport {
        unpaired_send: (0..send.len())
            .filter(|&i| !used_s[i])
            .map(|i| send[i])
            .collect(),
        unpaired_recv: (0..recv.len())
            .filter(|&j| !used_r[j])
            .map(|j| recv[j])
            .collect(),
        pairs,
        signature,
    })
}
