//! First-order (1/c²) corrections to packet widths and the uncertainty
//! product.
//!
//! The canonical path assembles
//!
//! ```text
//! σ²_R(t) = σ²_NR(t) + cov_v(t) / (4 m³ c²)
//! cov_v   = Σ_j c_j(t) [ b·cov(p̂, O_j) + a·cov(q̂, O_j) ]
//! ```
//!
//! from the channel coefficients, the static covariances and the free
//! Heisenberg mixing. [`verbatim`] transcribes the published long-form
//! expressions term by term; it is only ever used as a check layer.

use serde::{Deserialize, Serialize};

use crate::coeffs::{CoeffSet, CoeffSource, Mixing, Side};
use crate::error::{Error, Result};
use crate::gaussian::static_covariances;
use crate::params::{GaussianPacket, OscillatorParams, ScaleRecord};

/// Nonrelativistic variances (σ_q²(t), σ_p²(t), σ_q(t)σ_p(t)).
pub fn nr_variances(packet: &GaussianPacket, params: &OscillatorParams, t: f64) -> (f64, f64, f64) {
    let mw = params.mass * params.omega;
    let sq2 = packet.sigma_q2();
    let sp2 = packet.sigma_p2(params.hbar);
    let (s, c) = (params.omega * t).sin_cos();
    // the Appendix-A packet has no initial q-p correlation
    let q2 = c * c * sq2 + s * s * sp2 / (mw * mw);
    let p2 = c * c * sp2 + mw * mw * s * s * sq2;
    (q2, p2, (q2 * p2).sqrt())
}

fn cov_v(side: Side, t: f64, packet: &GaussianPacket, params: &OscillatorParams, source: CoeffSource) -> f64 {
    let set = CoeffSet::evaluate(t, params, source);
    let weights = set.operator_weights(side);
    let table = static_covariances(packet, params.hbar);
    let (with_p, with_q) = (table.with_p(), table.with_q());
    let Mixing { a1, b1, a2, b2 } = set.mixing;
    let (b, a) = match side {
        Side::P => (b1, a1),
        Side::Q => (b2, a2),
    };
    (0..4)
        .map(|j| weights[j] * (b * with_p[j] + a * with_q[j]))
        .sum()
}

/// cov(p̂_s(t), [V(t), p̂_s(t)]) / (iħ).
pub fn cov_vps(t: f64, packet: &GaussianPacket, params: &OscillatorParams, source: CoeffSource) -> f64 {
    cov_v(Side::P, t, packet, params, source)
}

/// cov(q̂_s(t), [V(t), q̂_s(t)]) / (iħ).
pub fn cov_vqs(t: f64, packet: &GaussianPacket, params: &OscillatorParams, source: CoeffSource) -> f64 {
    cov_v(Side::Q, t, packet, params, source)
}

/// Correction kernels per unit 1/c²: (δσ_q², δσ_p²)·c².
fn kernels(t: f64, packet: &GaussianPacket, params: &OscillatorParams, source: CoeffSource) -> (f64, f64) {
    let m3 = params.mass.powi(3);
    (
        cov_vqs(t, packet, params, source) / (4.0 * m3),
        cov_vps(t, packet, params, source) / (4.0 * m3),
    )
}

/// Corrected variances (σ_q²_R, σ_p²_R) to first order in 1/c².
pub fn rel_variances(
    t: f64,
    packet: &GaussianPacket,
    params: &OscillatorParams,
    source: CoeffSource,
) -> (f64, f64) {
    let (q2, p2, _) = nr_variances(packet, params, t);
    let (kq, kp) = kernels(t, packet, params, source);
    let inv_c2 = params.inv_c2();
    (q2 + inv_c2 * kq, p2 + inv_c2 * kp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductForm {
    /// (ħ/2)[1 + (ħ·cov_vqs/σ_q² + 4σ_q²·cov_vps/ħ)/(8m³c²ħ)], coherent packets only.
    Linearized,
    /// sqrt(σ_q²_R σ_p²_R) expanded to first order about the NR product.
    Product,
    /// sqrt(σ_q²_R σ_p²_R) without truncation.
    Untruncated,
}

fn product_kernel(nr: (f64, f64, f64), k: (f64, f64)) -> f64 {
    let (q2, p2, prod) = nr;
    0.5 * prod * (k.0 / q2 + k.1 / p2)
}

pub fn uncertainty_product(
    t: f64,
    packet: &GaussianPacket,
    params: &OscillatorParams,
    source: CoeffSource,
    form: ProductForm,
) -> Result<f64> {
    let inv_c2 = params.inv_c2();
    match form {
        ProductForm::Linearized => {
            if !packet.is_coherent(params, 1e-12) {
                return Err(Error::Domain(
                    "linearized uncertainty product requires a coherent packet".into(),
                ));
            }
            let h = params.hbar;
            let sq2 = packet.sigma_q2();
            let vq = cov_vqs(t, packet, params, source);
            let vp = cov_vps(t, packet, params, source);
            let m3 = params.mass.powi(3);
            Ok(0.5 * h + 0.5 * h * inv_c2 * (h * vq / sq2 + 4.0 * sq2 * vp / h) / (8.0 * m3 * h))
        }
        ProductForm::Product => {
            let nr = nr_variances(packet, params, t);
            let k = kernels(t, packet, params, source);
            Ok(nr.2 + inv_c2 * product_kernel(nr, k))
        }
        ProductForm::Untruncated => {
            let (q2, p2) = rel_variances(t, packet, params, source);
            Ok((q2 * p2).sqrt())
        }
    }
}

/// Published long-form expressions, evaluated as printed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formula {
    Relpv,
    Relqv,
    Relmug,
    Covps,
    Covqs,
}

impl Formula {
    pub const ALL: [Formula; 5] = [
        Formula::Relpv,
        Formula::Relqv,
        Formula::Relmug,
        Formula::Covps,
        Formula::Covqs,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Formula::Relpv => "relpv",
            Formula::Relqv => "relqv",
            Formula::Relmug => "relmug",
            Formula::Covps => "covps",
            Formula::Covqs => "covqs",
        }
    }
}

/// Evaluates a published long-form expression literally.
///
/// The bare σ of the variance formulas is taken as σ_q with σ_p² = ħ²/4σ_q².
/// `Covps`/`Covqs` use the printed coefficient tables and the printed pairing
/// of mixing factors with covariances, and are returned divided by iħ.
pub fn verbatim(formula: Formula, t: f64, packet: &GaussianPacket, params: &OscillatorParams) -> f64 {
    let (m, w, h) = (params.mass, params.omega, params.hbar);
    let inv_c2 = params.inv_c2();
    let (q0, p0, s) = (packet.q0, packet.p0, packet.sigma_q);
    let s2 = s * s;
    let s4 = s2 * s2;
    let s6 = s4 * s2;
    let h2 = h * h;
    let h4 = h2 * h2;
    let wt = w * t;
    let (sin, cos) = (f64::sin, f64::cos);
    let qs = q0 * q0 + s2;
    match formula {
        Formula::Relpv => {
            let secular = wt
                * (-32.0 * h2 * m * w * p0 * q0 * s4 * cos(wt).powi(2)
                    + 128.0 * m.powi(3) * w.powi(3) * p0 * q0 * s6 * sin(wt).powi(2)
                    + (96.0 * m.powi(4) * w.powi(4) * s6 * qs
                        + 8.0 * m * m * w * w * (h2 * q0 * q0 * s2 + 4.0 * p0 * p0 * s6 + 2.0 * h2 * s4)
                        - 24.0 * h2 * p0 * p0 * s2
                        - 6.0 * h4)
                        * sin(2.0 * wt));
            let bracket = secular
                + (-144.0 * m.powi(4) * w.powi(4) * s6 * qs
                    - 28.0 * m * m * w * w * s4 * (4.0 * p0 * p0 * s2 + h2))
                    * sin(wt).powi(2)
                + (-128.0 * m.powi(3) * p0 * q0 * w.powi(3) * s6) * cos(wt) * sin(wt).powi(3)
                + (-4.0 * h2 * p0 * p0 * s2 - 4.0 * h2 * m * m * w * w * s2 * qs - h4)
                    * sin(2.0 * wt).powi(2)
                + (16.0 * m * m * w * w * p0 * p0 * s6 - 16.0 * m.powi(4) * w.powi(4) * s6 * qs
                    + 4.0 * h2 * m * m * w * w * s4)
                    * sin(wt)
                    * sin(3.0 * wt)
                + (-4.0 * h2 * m * w * p0 * q0 * s4 * (-6.0 * sin(2.0 * wt) + sin(4.0 * wt)));
            h2 / (4.0 * s2) + 3.0 * inv_c2 / (512.0 * m * m * s4) * bracket
        }
        Formula::Relqv => {
            let inner = 4.0
                * sin(wt)
                * (48.0 * m.powi(4) * w.powi(4) * s6 * qs
                    + 4.0 * m * m * w * w * s4 * (4.0 * p0 * p0 * s2 + h2)
                    - 3.0 * (4.0 * p0 * p0 * s2 * h2 + h4))
                * cos(wt)
                - 4.0 * m * w * s2 * h2 * (m * w * qs - 2.0 * p0 * q0 * sin(wt));
            let secular = wt * (128.0 * m * m * w * p0 * q0 * s6 * cos(wt) - inner / (m * w * w));
            let bracket = secular
                + 4.0 * m * s2
                    * (8.0 * m * p0 * q0 * w * s4 * cos(wt) + qs * h2 * sin(wt))
                    * (5.0 * sin(wt) - 3.0 * sin(3.0 * wt))
                - 16.0 * m.powi(3) * w * w * s6 * qs * sin(2.0 * wt) * (5.0 * sin(2.0 * wt) + sin(4.0 * wt))
                + 8.0 * s2 * sin(wt) / w
                    * (m * w * s2 * (4.0 * p0 * p0 * s2 + h2) * cos(wt) + 2.0 * p0 * q0 * h2 * sin(wt))
                    * (3.0 * sin(2.0 * wt) + sin(4.0 * wt))
                + (4.0 * p0 * p0 * s2 * h2 + h4) * sin(wt) / (m * m * w * w)
                    * ((12.0 * w + 4.0 * w * cos(2.0 * wt)) * sin(wt).powi(3)
                        + m * cos(wt) * (8.0 * sin(2.0 * wt) + sin(4.0 * wt)));
            s2 + 3.0 * inv_c2 / (512.0 * m.powi(3) * s4) * bracket
        }
        Formula::Relmug => {
            let secular = -3.0 * t / (m * w * s4)
                * (16.0 * m.powi(3) * p0 * q0 * w.powi(3) * s2 * (16.0 * s4 * s4 + h.powi(3)) * cos(wt).powi(2)
                    + 64.0 * m * p0 * q0 * w * s6 * h * (m.powi(4) * w.powi(4) + h) * sin(wt).powi(2)
                    - (4.0 * s4 - m * m * w * w * h)
                        * (48.0 * m * w * s6 * qs
                            - 4.0 * m * m * w * w * s2 * (4.0 * p0 * p0 * s4 + (q0 * q0 + 2.0 * s2) * h2)
                            + 12.0 * p0 * p0 * s2 * h2
                            + 3.0 * h4)
                        * sin(2.0 * t * w));
            let periodic = 32.0 * h * m * m * w * w * s2 * qs * (5.0 + cos(2.0 * wt)) * sin(wt).powi(2)
                + 8.0 * h2 * (4.0 * p0 * p0 * s2 + h2) * (7.0 + 3.0 * cos(2.0 * wt)) * sin(wt).powi(2)
                    / (m * w * w)
                + 8.0 * h * m.powi(3) * w * w * sin(wt)
                    * (-qs * h2 * cos(wt) + 8.0 * m * p0 * q0 * w * s4 * sin(wt))
                    * sin(2.0 * wt)
                    / s2
                - 96.0 * s2 * sin(wt)
                    * (m * w * s2 * (4.0 * p0 * p0 * s2 + h2) * cos(wt) + 2.0 * p0 * q0 * h2 * sin(wt))
                    * sin(2.0 * wt)
                    / w
                - 192.0 * s6 * qs * sin(2.0 * wt).powi(2) / w
                - m * h.powi(3) * (4.0 * p0 * p0 * s2 + h2) * sin(2.0 * wt).powi(2) / s4
                - 16.0 * m * s2
                    * (8.0 * m * p0 * q0 * w * s4 * cos(wt) + qs * h2 * sin(wt))
                    * (5.0 * sin(wt) - 3.0 * sin(3.0 * wt))
                + 4.0 * m * m * w * h
                    * (-2.0 * p0 * q0 * h2 * cos(wt) + m * w * s2 * (4.0 * p0 * p0 * s2 + h2) * sin(wt))
                    * (-7.0 * sin(wt) + sin(3.0 * wt))
                    / s2;
            0.5 * h + inv_c2 / (1024.0 * m.powi(3) * s2) * (secular + 1.5 * periodic)
        }
        Formula::Covps | Formula::Covqs => {
            let set = CoeffSet::evaluate(t, params, CoeffSource::Printed);
            let side = if formula == Formula::Covps { Side::P } else { Side::Q };
            let x = set.operator_weights(side);
            let Mixing { a1, b1, a2, b2 } = set.mixing;
            let (a, b) = if side == Side::P { (a1, b1) } else { (a2, b2) };
            x[0] * a * (3.0 * h4 / (16.0 * s4) + 3.0 * h2 / (4.0 * s2) * p0 * p0)
                + x[1] * (a * (3.0 * h2 * p0 * q0 / (8.0 * s2)) + b * (3.0 * h2 / 16.0 + 0.75 * p0 * p0 * s2))
                + x[2] * (a * (3.0 * h2 / (16.0 * s2) * qs) + b * (1.5 * p0 * q0 * s2))
                + x[3] * b * (3.0 * s2 * qs)
        }
    }
}

/// Per-formula comparison of a published expression against an assembled
/// value on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyEntry {
    pub name: String,
    /// What the published expression was compared against.
    pub reference: String,
    pub max_abs_dev: f64,
    /// max_abs_dev divided by the largest |reference correction| on the grid.
    pub max_rel_dev: f64,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub entries: Vec<DiscrepancyEntry>,
}

impl DiscrepancyReport {
    pub fn get(&self, name: &str, reference: &str) -> Option<&DiscrepancyEntry> {
        self.entries
            .iter()
            .find(|e| e.name == name && e.reference == reference)
    }
}

/// Compares every published long form with the assembled path, using both
/// the canonical and the printed coefficient tables as references.
pub fn discrepancy_report(packet: &GaussianPacket, params: &OscillatorParams, grid: &[f64]) -> DiscrepancyReport {
    let mut entries = Vec::new();
    for source in [CoeffSource::Oracle, CoeffSource::Printed] {
        for formula in Formula::ALL {
            let mut max_abs: f64 = 0.0;
            let mut max_ref: f64 = 0.0;
            for &t in grid {
                let v = verbatim(formula, t, packet, params);
                let (reference, baseline) = match formula {
                    Formula::Relpv => {
                        let (_, p2) = rel_variances(t, packet, params, source);
                        (p2, nr_variances(packet, params, t).1)
                    }
                    Formula::Relqv => {
                        let (q2, _) = rel_variances(t, packet, params, source);
                        (q2, nr_variances(packet, params, t).0)
                    }
                    Formula::Relmug => {
                        let p = uncertainty_product(t, packet, params, source, ProductForm::Product)
                            .expect("product form accepts any packet");
                        (p, nr_variances(packet, params, t).2)
                    }
                    Formula::Covps => (cov_vps(t, packet, params, source), 0.0),
                    Formula::Covqs => (cov_vqs(t, packet, params, source), 0.0),
                };
                max_abs = max_abs.max((v - reference).abs());
                max_ref = max_ref.max((reference - baseline).abs());
            }
            let max_rel = if max_ref > 0.0 {
                max_abs / max_ref
            } else if max_abs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            entries.push(DiscrepancyEntry {
                name: formula.name().to_string(),
                reference: format!("assembled-{source}"),
                max_abs_dev: max_abs,
                max_rel_dev: max_rel,
                grid: grid.to_vec(),
            });
        }
    }
    DiscrepancyReport { entries }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingSample {
    pub omega_t: f64,
    pub f1: f64,
    pub f2: f64,
}

/// f₁ = (δ(σ_qσ_p)/(ħ/2))/ε and f₂ = (δσ_q²/σ_q²)/ε for the ground packet in
/// oscillator units at relativistic parameter `epsilon`.
pub fn scaling_functions(omega_t: f64, epsilon: f64, source: CoeffSource) -> Result<ScalingSample> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must be finite and > 0, got {epsilon}"),
        });
    }
    let params = OscillatorParams::natural(epsilon)?;
    let packet = crate::params::ground_packet(&params);
    let t = omega_t;
    let nr = nr_variances(&packet, &params, t);
    let k = kernels(t, &packet, &params, source);
    let scale = params.inv_c2() / epsilon;
    Ok(ScalingSample {
        omega_t,
        f1: scale * product_kernel(nr, k) / (0.5 * params.hbar),
        f2: scale * k.0 / nr.0,
    })
}

/// Time series of NR and corrected moments on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    pub omega: f64,
    pub sigma_q2_nr: Vec<f64>,
    pub sigma_p2_nr: Vec<f64>,
    pub sigma_q2_rel: Vec<f64>,
    pub sigma_p2_rel: Vec<f64>,
    pub product_rel: Vec<f64>,
    pub corr_q2: Vec<f64>,
    pub corr_p2: Vec<f64>,
    pub corr_product: Vec<f64>,
    pub mode: CoeffSource,
}

impl MomentSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn omega_t(&self) -> impl Iterator<Item = f64> + '_ {
        self.times.iter().map(move |t| self.omega * t)
    }

    fn rescale(&self, time: f64, length2: f64, momentum2: f64, action: f64) -> Self {
        let scale = |v: &[f64], k: f64| v.iter().map(|x| x * k).collect::<Vec<_>>();
        Self {
            times: scale(&self.times, time),
            omega: self.omega / time,
            sigma_q2_nr: scale(&self.sigma_q2_nr, length2),
            sigma_p2_nr: scale(&self.sigma_p2_nr, momentum2),
            sigma_q2_rel: scale(&self.sigma_q2_rel, length2),
            sigma_p2_rel: scale(&self.sigma_p2_rel, momentum2),
            product_rel: scale(&self.product_rel, action),
            corr_q2: scale(&self.corr_q2, length2),
            corr_p2: scale(&self.corr_p2, momentum2),
            corr_product: scale(&self.corr_product, action),
            mode: self.mode,
        }
    }

    /// Converts a series computed in oscillator units to the units of `scales`.
    pub fn denormalize(&self, scales: &ScaleRecord) -> Self {
        self.rescale(
            scales.time_scale,
            scales.length_scale.powi(2),
            scales.momentum_scale.powi(2),
            scales.length_scale * scales.momentum_scale,
        )
    }

    /// Inverse of [`MomentSeries::denormalize`].
    pub fn normalize(&self, scales: &ScaleRecord) -> Self {
        self.rescale(
            scales.time_scale.recip(),
            scales.length_scale.powi(2).recip(),
            scales.momentum_scale.powi(2).recip(),
            (scales.length_scale * scales.momentum_scale).recip(),
        )
    }
}

/// Evaluates the engine on a non-decreasing time grid.
pub fn series(
    packet: &GaussianPacket,
    params: &OscillatorParams,
    grid: &[f64],
    source: CoeffSource,
) -> Result<MomentSeries> {
    params.validate()?;
    packet.validate()?;
    if grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::Domain("time grid must be non-decreasing".into()));
    }
    if grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Domain("time grid must be finite and >= 0".into()));
    }
    let n = grid.len();
    let mut out = MomentSeries {
        times: grid.to_vec(),
        omega: params.omega,
        sigma_q2_nr: Vec::with_capacity(n),
        sigma_p2_nr: Vec::with_capacity(n),
        sigma_q2_rel: Vec::with_capacity(n),
        sigma_p2_rel: Vec::with_capacity(n),
        product_rel: Vec::with_capacity(n),
        corr_q2: Vec::with_capacity(n),
        corr_p2: Vec::with_capacity(n),
        corr_product: Vec::with_capacity(n),
        mode: source,
    };
    let inv_c2 = params.inv_c2();
    for &t in grid {
        let nr = nr_variances(packet, params, t);
        let k = kernels(t, packet, params, source);
        let (dq, dp) = (inv_c2 * k.0, inv_c2 * k.1);
        let dprod = inv_c2 * product_kernel(nr, k);
        out.sigma_q2_nr.push(nr.0);
        out.sigma_p2_nr.push(nr.1);
        out.sigma_q2_rel.push(nr.0 + dq);
        out.sigma_p2_rel.push(nr.1 + dp);
        out.product_rel.push(nr.2 + dprod);
        out.corr_q2.push(dq);
        out.corr_p2.push(dp);
        out.corr_product.push(dprod);
    }
    Ok(out)
}

/// Uniform grid covering `periods` oscillation periods with
/// `points_per_period` intervals per period (endpoint included).
pub fn period_grid(params: &OscillatorParams, periods: f64, points_per_period: usize) -> Result<Vec<f64>> {
    if !(periods > 0.0) || !periods.is_finite() {
        return Err(Error::Domain(format!("periods must be > 0, got {periods}")));
    }
    if points_per_period == 0 {
        return Err(Error::Domain("points_per_period must be positive".into()));
    }
    let intervals = (periods * points_per_period as f64).round() as usize;
    let t_end = periods * params.period();
    Ok((0..=intervals)
        .map(|k| t_end * k as f64 / intervals as f64)
        .collect())
}

/// Least-squares line through the per-period maxima of |δσ_q²|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecularFit {
    /// Envelope growth per oscillation period.
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; NaN when the envelope is exactly flat.
    pub r_squared: f64,
    pub periods: usize,
}

/// Maxima of |corr_q2| over each complete period of the series.
pub fn period_maxima(series: &MomentSeries) -> Vec<f64> {
    let Some(&t0) = series.times.first() else {
        return Vec::new();
    };
    let tau = std::f64::consts::TAU / series.omega;
    let span = series.times.last().copied().unwrap_or(t0) - t0;
    let full = (span / tau * (1.0 + 1e-12)).floor() as usize;
    let mut maxima = vec![0.0_f64; full];
    let mut touch = |k: usize, v: f64| {
        if let Some(m) = maxima.get_mut(k) {
            *m = m.max(v.abs());
        }
    };
    for (t, v) in series.times.iter().zip(&series.corr_q2) {
        let phase = (t - t0) / tau;
        let nearest = phase.round();
        if (phase - nearest).abs() < 1e-9 {
            // boundary samples close one period and open the next
            let k = nearest as usize;
            touch(k, *v);
            if k > 0 {
                touch(k - 1, *v);
            }
        } else {
            touch(phase.floor() as usize, *v);
        }
    }
    maxima
}

pub fn secular_fit(series: &MomentSeries) -> Result<SecularFit> {
    let maxima = period_maxima(series);
    if maxima.len() < 10 {
        return Err(Error::Domain(format!(
            "secular fit needs at least 10 complete periods, series has {}",
            maxima.len()
        )));
    }
    let n = maxima.len() as f64;
    let xs: Vec<f64> = (0..maxima.len()).map(|k| k as f64).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = maxima.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&maxima).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = maxima.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&maxima)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { f64::NAN };
    Ok(SecularFit {
        slope,
        intercept,
        r_squared,
        periods: maxima.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ground_packet;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn nat(eps: f64) -> OscillatorParams {
        OscillatorParams::natural(eps).unwrap()
    }

    #[test]
    fn nr_baselines() {
        let p = nat(0.0);
        let g = ground_packet(&p);
        for k in 0..50 {
            let t = 0.37 * k as f64;
            let (q2, p2, prod) = nr_variances(&g, &p, t);
            assert!((q2 - 0.5).abs() < 1e-15 && (p2 - 0.5).abs() < 1e-15);
            assert!((prod - 0.5).abs() < 1e-15);
        }
        let sq = GaussianPacket::new(0.0, 0.0, 2.0 * g.sigma_q).unwrap();
        let (q2, _, _) = nr_variances(&sq, &p, FRAC_PI_2);
        assert_relative_eq!(q2, 1.0 / (4.0 * sq.sigma_q2()), max_relative = 1e-14);
    }

    #[test]
    fn zero_time_and_nr_limit() {
        let p = nat(1e-3);
        let pk = GaussianPacket::new(0.7, -0.4, 0.9).unwrap();
        for src in [CoeffSource::Oracle, CoeffSource::Printed] {
            assert_eq!(cov_vps(0.0, &pk, &p, src), 0.0);
            assert_eq!(cov_vqs(0.0, &pk, &p, src), 0.0);
        }
        let (q2, p2) = rel_variances(0.0, &pk, &p, CoeffSource::Oracle);
        assert_eq!(q2, pk.sigma_q2());
        assert_eq!(p2, pk.sigma_p2(1.0));
        let inf = nat(0.0);
        for t in [0.3, 2.0, 9.0] {
            let nr = nr_variances(&pk, &inf, t);
            let (q2, p2) = rel_variances(t, &pk, &inf, CoeffSource::Oracle);
            assert_eq!((q2, p2), (nr.0, nr.1));
        }
    }

    #[test]
    fn small_time_power_law_of_cov_vqs() {
        let p = nat(1e-3);
        let g = ground_packet(&p);
        let (t1, t2) = (1e-2, 2e-2);
        let v1 = cov_vqs(t1, &g, &p, CoeffSource::Oracle).abs();
        let v2 = cov_vqs(t2, &g, &p, CoeffSource::Oracle).abs();
        let slope = (v2 / v1).ln() / (t2 / t1).ln();
        assert!((slope - 2.0).abs() < 1e-3, "slope {slope}");
        // −3t² from the B1 term, +3t²/2 from B2
        let signed = cov_vqs(t1, &g, &p, CoeffSource::Oracle);
        assert!((signed / (t1 * t1) + 1.5).abs() < 1e-4, "{signed}");
    }

    #[test]
    fn product_forms() {
        let p = nat(1e-3);
        let g = ground_packet(&p);
        for t in [0.0, 0.4, 2.2, 7.0] {
            let lin = uncertainty_product(t, &g, &p, CoeffSource::Oracle, ProductForm::Linearized).unwrap();
            let prod = uncertainty_product(t, &g, &p, CoeffSource::Oracle, ProductForm::Product).unwrap();
            assert!((lin - prod).abs() < 1e-15);
        }
        let sq = GaussianPacket::new(0.0, 0.0, 1.3).unwrap();
        assert!(uncertainty_product(1.0, &sq, &p, CoeffSource::Oracle, ProductForm::Linearized).is_err());
        assert!(uncertainty_product(1.0, &sq, &p, CoeffSource::Oracle, ProductForm::Product).is_ok());
        let inf = nat(0.0);
        for t in [0.5, 3.0, 11.0] {
            let v = uncertainty_product(t, &g, &inf, CoeffSource::Oracle, ProductForm::Linearized).unwrap();
            assert_eq!(v, 0.5);
        }
    }

    #[test]
    fn truncated_and_untruncated_product_differ_at_second_order() {
        let grid: Vec<f64> = (0..=300).map(|k| 3.0 * TAU * k as f64 / 300.0).collect();
        let pk = GaussianPacket::new(1.0, 0.5, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        let gap = |eps: f64| {
            let p = nat(eps);
            grid.iter()
                .map(|&t| {
                    let a = uncertainty_product(t, &pk, &p, CoeffSource::Oracle, ProductForm::Linearized).unwrap();
                    let b = uncertainty_product(t, &pk, &p, CoeffSource::Oracle, ProductForm::Untruncated).unwrap();
                    (a - b).abs()
                })
                .fold(0.0, f64::max)
        };
        let (g1, g2) = (gap(1e-3), gap(2e-3));
        let ratio = g2 / g1;
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn coherent_product_has_no_first_order_shift() {
        let p = nat(1e-3);
        for pk in [ground_packet(&p), GaussianPacket::new(1.0, -0.5, std::f64::consts::FRAC_1_SQRT_2).unwrap()] {
            let grid: Vec<f64> = (0..=200).map(|k| 4.0 * PI * k as f64 / 200.0).collect();
            let s = series(&pk, &p, &grid, CoeffSource::Oracle).unwrap();
            let worst = s.corr_product.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let width = s.corr_q2.iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert!(worst < 1e-15, "{worst}");
            assert!(width > 1e-4);
        }
    }

    #[test]
    fn linearity_and_scale_invariance() {
        let pk = GaussianPacket::new(0.3, 0.2, 0.8).unwrap();
        let grid: Vec<f64> = (0..100).map(|k| 0.13 * k as f64).collect();
        let a = series(&pk, &nat(1e-3), &grid, CoeffSource::Oracle).unwrap();
        let b = series(&pk, &nat(2e-3), &grid, CoeffSource::Oracle).unwrap();
        for (x, y) in a.corr_q2.iter().zip(&b.corr_q2).chain(a.corr_p2.iter().zip(&b.corr_p2)) {
            assert!((2.0 * x - y).abs() <= 1e-12 * y.abs() + 1e-300);
        }
        let s1 = scaling_functions(2.1, 1e-3, CoeffSource::Oracle).unwrap();
        let s2 = scaling_functions(2.1, 1e-4, CoeffSource::Oracle).unwrap();
        assert!((s1.f2 - s2.f2).abs() <= 1e-12 * s1.f2.abs());
        assert!((s1.f1 - s2.f1).abs() <= 1e-12 * s1.f1.abs().max(1e-300));

        // two physical scenes with equal (ωt, ε): relative corrections agree
        let phys = OscillatorParams::new(3.0, 2.0, 0.5, (0.5_f64 * 2.0 / (3.0 * 1e-3)).sqrt()).unwrap();
        let g_phys = ground_packet(&phys);
        let g_nat = ground_packet(&nat(1e-3));
        for wt in [0.4, 1.7, 5.5] {
            let (q_a, _) = rel_variances(wt / 2.0, &g_phys, &phys, CoeffSource::Oracle);
            let (q_b, _) = rel_variances(wt, &g_nat, &nat(1e-3), CoeffSource::Oracle);
            let ra = q_a / g_phys.sigma_q2() - 1.0;
            let rb = q_b / g_nat.sigma_q2() - 1.0;
            assert!((ra - rb).abs() <= 1e-10 * rb.abs(), "{ra} vs {rb}");
        }
    }

    #[test]
    fn scaling_function_values() {
        let z = scaling_functions(0.0, 1e-3, CoeffSource::Oracle).unwrap();
        assert_eq!((z.f1, z.f2), (0.0, 0.0));
        let mut max_f2: f64 = 0.0;
        for k in 0..=400 {
            let s = scaling_functions(4.0 * PI * k as f64 / 400.0, 1e-3, CoeffSource::Oracle).unwrap();
            assert!(s.f1.abs() <= 20.0 && s.f2.abs() <= 20.0);
            max_f2 = max_f2.max(s.f2.abs());
        }
        assert!((max_f2 - 0.75).abs() < 1e-3, "{max_f2}");
    }

    #[test]
    fn series_properties() {
        let p = nat(1e-3);
        let g = ground_packet(&p);
        let s = series(&g, &p, &[0.0], CoeffSource::Oracle).unwrap();
        assert_eq!((s.corr_q2[0], s.corr_p2[0], s.corr_product[0]), (0.0, 0.0, 0.0));
        assert_eq!(s.sigma_q2_rel[0], s.sigma_q2_nr[0]);
        let grid = period_grid(&p, 3.0, 64).unwrap();
        let a = series(&g, &p, &grid, CoeffSource::Oracle).unwrap();
        let b = series(&g, &p, &grid, CoeffSource::Oracle).unwrap();
        assert_eq!(a, b);
        assert!(series(&g, &p, &[1.0, 0.5], CoeffSource::Oracle).is_err());
        assert!(a.sigma_q2_rel.iter().chain(&a.sigma_p2_rel).all(|v| *v > 0.0));
    }

    #[test]
    fn series_round_trip_through_units() {
        let phys = OscillatorParams::electron_trap(1000.0).unwrap();
        let (nat_p, nat_pk, scales) = crate::params::to_natural(&phys, &ground_packet(&phys)).unwrap();
        let grid = period_grid(&nat_p, 1.0, 32).unwrap();
        let s = series(&nat_pk, &nat_p, &grid, CoeffSource::Oracle).unwrap();
        let back = s.denormalize(&scales).normalize(&scales);
        let pairs = [
            (&s.times, &back.times),
            (&s.sigma_q2_rel, &back.sigma_q2_rel),
            (&s.sigma_p2_rel, &back.sigma_p2_rel),
            (&s.product_rel, &back.product_rel),
            (&s.corr_q2, &back.corr_q2),
        ];
        for (a, b) in pairs {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() <= 1e-14 * x.abs());
            }
        }
        let si = s.denormalize(&scales);
        assert_relative_eq!(si.product_rel[0], 0.5 * phys.hbar, max_relative = 1e-14);
    }

    #[test]
    fn verbatim_zero_time() {
        let p = nat(1e-3);
        let pk = GaussianPacket::new(0.4, -1.1, 0.9).unwrap();
        assert_relative_eq!(verbatim(Formula::Relpv, 0.0, &pk, &p), pk.sigma_p2(1.0), max_relative = 1e-15);
        assert_relative_eq!(verbatim(Formula::Relqv, 0.0, &pk, &p), pk.sigma_q2(), max_relative = 1e-15);
        assert_eq!(verbatim(Formula::Relmug, 0.0, &pk, &p), 0.5);
        assert_eq!(verbatim(Formula::Covps, 0.0, &pk, &p), 0.0);
    }

    #[test]
    fn verbatim_layer_reports_disagreement() {
        let p = nat(1e-3);
        let g = ground_packet(&p);
        let grid = period_grid(&p, 2.0, 50).unwrap();
        let report = discrepancy_report(&g, &p, &grid);
        assert_eq!(report.entries.len(), 10);
        assert!(report.entries.iter().all(|e| e.max_abs_dev >= 0.0));
        // printed pairing disagrees even with the printed tables
        let covps = report.get("covps", "assembled-printed").unwrap();
        assert!(covps.max_rel_dev > 1e-3);
    }

    #[test]
    fn secular_fits() {
        let grid = period_grid(&nat(1e-3), 20.0, 100).unwrap();
        let nr = series(&ground_packet(&nat(0.0)), &nat(0.0), &grid, CoeffSource::Oracle).unwrap();
        assert_eq!(secular_fit(&nr).unwrap().slope, 0.0);

        let pk = GaussianPacket::new(1.0, 0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        let a = secular_fit(&series(&pk, &nat(1e-3), &grid, CoeffSource::Oracle).unwrap()).unwrap();
        let b = secular_fit(&series(&pk, &nat(2e-3), &grid, CoeffSource::Oracle).unwrap()).unwrap();
        assert_eq!(a.periods, 20);
        assert!(a.r_squared > 0.99, "{a:?}");
        assert!((b.slope / a.slope - 2.0).abs() < 1e-10);

        let short = period_grid(&nat(1e-3), 5.0, 100).unwrap();
        let s = series(&pk, &nat(1e-3), &short, CoeffSource::Oracle).unwrap();
        assert!(secular_fit(&s).is_err());
    }
}
