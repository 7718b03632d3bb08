//! Exact propagation in a truncated harmonic-oscillator eigenbasis.
//!
//! Operators are dense matrices built from ladder operators; the last
//! `guard` rows and columns are treated as unreliable because matrix
//! products of truncated operators are wrong there. Propagation uses a
//! single Hermitian eigendecomposition, so there is no time-step error.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coeffs::{CoeffSet, CoeffSource, Side};
use crate::dynamics::{self, ProductForm};
use crate::error::{Error, Result};
use crate::params::{GaussianPacket, OscillatorParams};
use crate::quadrature::{gauss_legendre, hermite_functions};

type CMat = DMatrix<Complex64>;
type CVec = DVector<Complex64>;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FockConfig {
    pub dim: usize,
    pub tail_tol: f64,
    pub guard: usize,
}

impl Default for FockConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            tail_tol: 1e-12,
            guard: 20,
        }
    }
}

impl FockConfig {
    pub fn new(dim: usize) -> Result<Self> {
        let cfg = Self {
            dim,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim <= self.guard {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: format!("must exceed guard band {}, got {}", self.guard, self.dim),
            });
        }
        if !(self.tail_tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tail_tol",
                reason: format!("must be > 0, got {}", self.tail_tol),
            });
        }
        Ok(())
    }

    /// Size of the block where truncated matrix products are exact.
    pub fn reliable(&self) -> usize {
        self.dim - self.guard
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub matrix: CMat,
    pub hermitian: bool,
}

impl OperatorMatrix {
    fn hermitian(matrix: CMat) -> Self {
        Self {
            matrix,
            hermitian: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// max |M − M†|.
    pub fn hermiticity_defect(&self) -> f64 {
        let m = &self.matrix;
        let mut worst: f64 = 0.0;
        for i in 0..m.nrows() {
            for j in 0..=i {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn expectation(&self, psi: &FockState) -> Complex64 {
        psi.amplitudes.dotc(&(&self.matrix * &psi.amplitudes))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    pub amplitudes: CVec,
}

impl FockState {
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn population(&self, n: usize) -> f64 {
        self.amplitudes[n].norm_sqr()
    }

    /// Population in levels `from..dim`.
    pub fn tail_mass(&self, from: usize) -> f64 {
        self.amplitudes.iter().skip(from).map(|a| a.norm_sqr()).sum()
    }
}

/// The operator set used by the oracle, all in one basis.
#[derive(Debug, Clone)]
pub struct Operators {
    pub q: OperatorMatrix,
    pub p: OperatorMatrix,
    pub p2: OperatorMatrix,
    pub p3: OperatorMatrix,
    pub p4: OperatorMatrix,
    pub q3: OperatorMatrix,
    pub wp2q: OperatorMatrix,
    pub wq2p: OperatorMatrix,
    pub h0: OperatorMatrix,
    pub h: OperatorMatrix,
}

impl Operators {
    /// Channel operators (p³, W(p²q), W(q²p), q³).
    pub fn channels(&self) -> [&CMat; 4] {
        [&self.p3.matrix, &self.wp2q.matrix, &self.wq2p.matrix, &self.q3.matrix]
    }
}

pub fn build_operators(config: &FockConfig, params: &OscillatorParams) -> Result<Operators> {
    config.validate()?;
    params.validate()?;
    let n = config.dim;
    let (m, w, hbar) = (params.mass, params.omega, params.hbar);
    let mut a = CMat::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = Complex64::new((k as f64).sqrt(), 0.0);
    }
    let ad = a.adjoint();
    let q = (&a + &ad) * Complex64::new((hbar / (2.0 * m * w)).sqrt(), 0.0);
    let p = (&ad - &a) * (I * (hbar * m * w / 2.0).sqrt());
    let p2 = &p * &p;
    let p3 = &p2 * &p;
    let p4 = &p2 * &p2;
    let q2 = &q * &q;
    let q3 = &q2 * &q;
    let quarter = Complex64::new(0.25, 0.0);
    let wp2q = (&p2 * &q + &p * &q * &p + &q * &p2) * quarter;
    let wq2p = (&q2 * &p + &q * &p * &q + &p * &q2) * quarter;
    let h0 = CMat::from_diagonal(&CVec::from_iterator(
        n,
        (0..n).map(|k| Complex64::new(hbar * w * (k as f64 + 0.5), 0.0)),
    ));
    let h = &h0 - &p4 * Complex64::new(params.inv_c2() / (8.0 * m.powi(3)), 0.0);
    Ok(Operators {
        q: OperatorMatrix::hermitian(q),
        p: OperatorMatrix::hermitian(p),
        p2: OperatorMatrix::hermitian(p2),
        p3: OperatorMatrix::hermitian(p3),
        p4: OperatorMatrix::hermitian(p4),
        q3: OperatorMatrix::hermitian(q3),
        wp2q: OperatorMatrix::hermitian(wp2q),
        wq2p: OperatorMatrix::hermitian(wq2p),
        h0: OperatorMatrix::hermitian(h0),
        h: OperatorMatrix::hermitian(h),
    })
}

/// Raw (un-normalized) overlaps ⟨n|ψ⟩ for n < dim, by composite
/// Gauss–Legendre over the packet-centred variable y = (q − q₀)/(√2 σ_q),
/// truncated to |y| ≤ 12 where the amplitude is below e^{-72}.
fn overlaps(packet: &GaussianPacket, dim: usize, params: &OscillatorParams, panels: usize) -> CVec {
    let (m, w, hbar) = (params.mass, params.omega, params.hbar);
    let ell = (hbar / (m * w)).sqrt();
    let s = packet.sigma_q;
    let jac = std::f64::consts::SQRT_2 * s;
    // ψ(q) = (2πσ²)^{-1/4} e^{−y²/2} e^{i p₀ q/ħ};  φ_n(q) = ℓ^{-1/2} h_n(q/ℓ)
    let norm = (2.0 * std::f64::consts::PI * s * s).powf(-0.25) * ell.powf(-0.5) * jac;
    let rule = gauss_legendre(PANEL_ORDER);
    let width = 2.0 * Y_CUT / panels as f64;
    let mut c = CVec::from_element(dim, ZERO);
    for k in 0..panels {
        let mid = -Y_CUT + (k as f64 + 0.5) * width;
        for (&x, &wt) in rule.nodes.iter().zip(&rule.weights) {
            let y = mid + 0.5 * width * x;
            let qv = packet.q0 + jac * y;
            let amp = 0.5 * width * wt * (-0.5 * y * y).exp() * norm;
            let phase = Complex64::from_polar(amp, packet.p0 * qv / hbar);
            let h = hermite_functions(dim - 1, qv / ell);
            for (n, hn) in h.iter().enumerate() {
                c[n] += phase * *hn;
            }
        }
    }
    c
}

const Y_CUT: f64 = 12.0;
const PANEL_ORDER: usize = 16;
const MAX_PANELS: usize = 1 << 14;

/// Expands the packet in the first `config.dim` oscillator levels.
///
/// The quadrature panel count doubles until the amplitude vector is stable
/// to 1e−13. The population outside the reliable block (including anything
/// beyond `dim`) must stay below `tail_tol`.
pub fn project_packet(
    packet: &GaussianPacket,
    config: &FockConfig,
    params: &OscillatorParams,
) -> Result<FockState> {
    let raw = project_raw(packet, config.dim, params)?;
    let kept: f64 = raw.iter().take(config.reliable()).map(|a| a.norm_sqr()).sum();
    let tail = (1.0 - kept).max(0.0);
    if tail > config.tail_tol {
        return Err(Error::BasisTooSmall {
            tail,
            tail_tol: config.tail_tol,
            recommended_dim: recommend_dim(packet, config, params),
        });
    }
    let norm = raw.norm();
    Ok(FockState {
        amplitudes: raw / Complex64::new(norm, 0.0),
    })
}

fn project_raw(packet: &GaussianPacket, dim: usize, params: &OscillatorParams) -> Result<CVec> {
    packet.validate()?;
    params.validate()?;
    // enough panels to resolve both the packet phase and the top basis function
    let ell = (params.hbar / (params.mass * params.omega)).sqrt();
    let span = 2.0 * Y_CUT * std::f64::consts::SQRT_2 * packet.sigma_q;
    let k_max = (2.0 * dim as f64 + 1.0).sqrt() / ell + packet.p0.abs() / params.hbar;
    let waves = span * k_max / (2.0 * std::f64::consts::PI);
    let mut panels = ((waves.ceil() as usize) + 8).next_power_of_two().min(MAX_PANELS);
    let mut prev = overlaps(packet, dim, params, panels);
    while panels < MAX_PANELS {
        panels *= 2;
        let next = overlaps(packet, dim, params, panels);
        let diff = (&next - &prev).norm();
        if diff < 1e-13 {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Numeric(format!(
        "packet projection did not converge with {MAX_PANELS} quadrature panels"
    )))
}

/// Smallest dimension on the doubling ladder from `config.dim` whose
/// reliable block holds all but `tail_tol` of the packet.
pub fn recommend_dim(packet: &GaussianPacket, config: &FockConfig, params: &OscillatorParams) -> usize {
    let mut dim = config.dim;
    for _ in 0..6 {
        dim *= 2;
        let Ok(raw) = project_raw(packet, dim, params) else {
            break;
        };
        let kept: f64 = raw.iter().take(dim - config.guard).map(|a| a.norm_sqr()).sum();
        if 1.0 - kept <= config.tail_tol {
            return dim;
        }
    }
    dim
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Population in the guard band.
    pub tail_mass: f64,
    pub converged: bool,
    /// Next dimension to try when not converged.
    pub recommended_dim: Option<usize>,
}

pub fn convergence_report(psi: &FockState, config: &FockConfig) -> ConvergenceReport {
    let tail_mass = psi.tail_mass(config.reliable());
    let converged = tail_mass <= config.tail_tol;
    ConvergenceReport {
        tail_mass,
        converged,
        recommended_dim: (!converged).then_some(2 * config.dim),
    }
}

/// Eigendecomposition of a Hamiltonian, reusable for any number of times.
#[derive(Debug, Clone)]
pub struct Propagator {
    energies: DVector<f64>,
    vectors: CMat,
    hbar: f64,
}

impl Propagator {
    pub fn new(h: &OperatorMatrix, hbar: f64) -> Result<Self> {
        if !h.hermitian || h.hermiticity_defect() > 1e-12 * h.matrix.norm().max(1.0) {
            return Err(Error::Numeric("Hamiltonian is not Hermitian".into()));
        }
        let eig = SymmetricEigen::try_new(h.matrix.clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Numeric("Hermitian eigensolver did not converge".into()))?;
        Ok(Self {
            energies: eig.eigenvalues,
            vectors: eig.eigenvectors,
            hbar,
        })
    }

    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    pub fn evolve(&self, psi0: &FockState, times: &[f64]) -> Vec<FockState> {
        let coeffs = self.vectors.ad_mul(&psi0.amplitudes);
        times
            .iter()
            .map(|&t| {
                if t == 0.0 {
                    return psi0.clone();
                }
                let rotated = CVec::from_iterator(
                    coeffs.len(),
                    coeffs
                        .iter()
                        .zip(self.energies.iter())
                        .map(|(c, e)| c * Complex64::from_polar(1.0, -e * t / self.hbar)),
                );
                FockState {
                    amplitudes: &self.vectors * rotated,
                }
            })
            .collect()
    }
}

/// ψ(t) = e^{−iHt/ħ}ψ₀ on every grid time.
pub fn evolve(h: &OperatorMatrix, psi0: &FockState, times: &[f64], hbar: f64) -> Result<Vec<FockState>> {
    if (psi0.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "initial state must be normalized, norm = {}",
            psi0.norm()
        )));
    }
    Ok(Propagator::new(h, hbar)?.evolve(psi0, times))
}

/// Exact moments per time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSeries {
    pub times: Vec<f64>,
    pub mean_q: Vec<f64>,
    pub mean_p: Vec<f64>,
    pub sigma_q2: Vec<f64>,
    pub sigma_p2: Vec<f64>,
    pub product: Vec<f64>,
    pub energy: Vec<f64>,
    pub norm: Vec<f64>,
}

pub fn exact_moments(times: &[f64], states: &[FockState], ops: &Operators) -> Result<ExactSeries> {
    if times.len() != states.len() {
        return Err(Error::Domain("times and states differ in length".into()));
    }
    let mut out = ExactSeries {
        times: times.to_vec(),
        mean_q: Vec::with_capacity(states.len()),
        mean_p: Vec::with_capacity(states.len()),
        sigma_q2: Vec::with_capacity(states.len()),
        sigma_p2: Vec::with_capacity(states.len()),
        product: Vec::with_capacity(states.len()),
        energy: Vec::with_capacity(states.len()),
        norm: Vec::with_capacity(states.len()),
    };
    for psi in states {
        let qpsi = &ops.q.matrix * &psi.amplitudes;
        let ppsi = &ops.p.matrix * &psi.amplitudes;
        let mq = psi.amplitudes.dotc(&qpsi).re;
        let mp = psi.amplitudes.dotc(&ppsi).re;
        // ‖qψ‖² avoids the edge defect of a truncated q² matrix
        let vq = qpsi.norm_squared() - mq * mq;
        let vp = ppsi.norm_squared() - mp * mp;
        out.mean_q.push(mq);
        out.mean_p.push(mp);
        out.sigma_q2.push(vq);
        out.sigma_p2.push(vp);
        out.product.push((vq * vp).sqrt());
        out.energy.push(ops.h.expectation(psi).re);
        out.norm.push(psi.norm());
    }
    Ok(out)
}

/// V(t) = ∫₀ᵗ (p cos ωs − mω q sin ωs)⁴ ds by composite Gauss–Legendre,
/// starting at 32 nodes per period-long segment and doubling until the
/// Frobenius norm changes by less than 1e−12 (relative).
pub fn v_operator(t: f64, ops: &Operators, params: &OscillatorParams) -> Result<CMat> {
    let n = ops.q.dim();
    if t == 0.0 {
        return Ok(CMat::zeros(n, n));
    }
    let (m, w) = (params.mass, params.omega);
    let segments = ((w * t) / std::f64::consts::TAU).ceil().max(1.0) as usize;
    let build = |nodes: usize| -> CMat {
        let rule = gauss_legendre(nodes);
        let h = t / segments as f64;
        let mut acc = CMat::zeros(n, n);
        for seg in 0..segments {
            let mid = (seg as f64 + 0.5) * h;
            for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                let s = mid + 0.5 * h * x;
                let (sn, cs) = (w * s).sin_cos();
                let big_x = &ops.p.matrix * Complex64::new(cs, 0.0) - &ops.q.matrix * Complex64::new(m * w * sn, 0.0);
                let x2 = &big_x * &big_x;
                acc += (&x2 * &x2) * Complex64::new(0.5 * h * wt, 0.0);
            }
        }
        acc
    };
    let mut nodes = 32;
    let mut prev = build(nodes);
    for _ in 0..5 {
        nodes *= 2;
        let next = build(nodes);
        let change = (&next - &prev).norm() / next.norm().max(f64::MIN_POSITIVE);
        if change < 1e-12 {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureFailure {
        tol: 1e-12,
        achieved: f64::NAN,
    })
}

fn block_norm(m: &CMat, k: usize) -> f64 {
    m.view((0, 0), (k, k)).norm()
}

/// Relative Frobenius residuals of
/// [V, p_s(t)] = iħ Σ_j c_j O_j and [V, q_s(t)] = iħ Σ_j d_j O_j
/// on the reliable block.
pub fn commutator_check(
    t: f64,
    config: &FockConfig,
    params: &OscillatorParams,
    source: CoeffSource,
) -> Result<(f64, f64)> {
    let ops = build_operators(config, params)?;
    let v = v_operator(t, &ops, params)?;
    let set = CoeffSet::evaluate(t, params, source);
    let mx = set.mixing;
    let k = config.reliable();
    let ih = I * params.hbar;
    let residual = |side: Side, op: CMat| -> f64 {
        let lhs = &v * &op - &op * &v;
        let weights = set.operator_weights(side);
        let mut rhs = CMat::zeros(op.nrows(), op.ncols());
        for (wj, oj) in weights.iter().zip(ops.channels()) {
            rhs += oj * (ih * *wj);
        }
        let denom = block_norm(&lhs, k);
        let num = block_norm(&(&lhs - &rhs), k);
        if denom == 0.0 {
            if num == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            num / denom
        }
    };
    let c = |x: f64| Complex64::new(x, 0.0);
    let ps = &ops.p.matrix * c(mx.b1) + &ops.q.matrix * c(mx.a1);
    let qs = &ops.p.matrix * c(mx.b2) + &ops.q.matrix * c(mx.a2);
    Ok((residual(Side::P, ps), residual(Side::Q, qs)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    SigmaQ2,
    SigmaP2,
    Product,
}

impl Observable {
    pub const ALL: [Observable; 3] = [Observable::SigmaQ2, Observable::SigmaP2, Observable::Product];

    pub fn name(&self) -> &'static str {
        match self {
            Observable::SigmaQ2 => "sigma_q2",
            Observable::SigmaP2 => "sigma_p2",
            Observable::Product => "product",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RichardsonRow {
    pub omega_t: f64,
    /// R(ε) = exact − NR − first-order correction at ε.
    pub r_eps: f64,
    /// R(ε/2).
    pub r_half: f64,
    pub ratio: f64,
    /// |R(ε)| exceeds ten times the solver noise.
    pub tested: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RichardsonTable {
    pub observable: Observable,
    pub epsilon: f64,
    pub noise: f64,
    pub rows: Vec<RichardsonRow>,
}

impl RichardsonTable {
    pub fn tested(&self) -> impl Iterator<Item = &RichardsonRow> {
        self.rows.iter().filter(|r| r.tested)
    }

    /// Tested rows whose ratio lies within `target ± tol`.
    pub fn passing(&self, target: f64, tol: f64) -> usize {
        self.tested().filter(|r| (r.ratio - target).abs() <= tol).count()
    }
}

/// Second-order residual test of the perturbative engine against exact
/// propagation, in oscillator units (ħ = m = ω = 1).
///
/// For each observable, R(ε, t) = X_exact(ε, t) − X_NR(t) − δX(ε, t), where
/// δX is the engine's first-order correction (product in truncated form).
/// Solver noise is max |X_exact(0, t) − X_NR(t)| over all observables.
pub fn richardson_tables(
    packet: &GaussianPacket,
    epsilon: f64,
    omega_t: &[f64],
    config: &FockConfig,
    source: CoeffSource,
) -> Result<Vec<RichardsonTable>> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must be > 0, got {epsilon}"),
        });
    }
    let exact_at = |eps: f64| -> Result<ExactSeries> {
        let params = OscillatorParams::natural(eps)?;
        let ops = build_operators(config, &params)?;
        let psi0 = project_packet(packet, config, &params)?;
        let states = evolve(&ops.h, &psi0, omega_t, params.hbar)?;
        exact_moments(omega_t, &states, &ops)
    };
    let pick = |s: &ExactSeries, obs: Observable| -> Vec<f64> {
        match obs {
            Observable::SigmaQ2 => s.sigma_q2.clone(),
            Observable::SigmaP2 => s.sigma_p2.clone(),
            Observable::Product => s.product.clone(),
        }
    };
    let nr_params = OscillatorParams::natural(0.0)?;
    let nr: Vec<(f64, f64, f64)> = omega_t
        .iter()
        .map(|&t| dynamics::nr_variances(packet, &nr_params, t))
        .collect();
    let nr_pick = |obs: Observable| -> Vec<f64> {
        nr.iter()
            .map(|v| match obs {
                Observable::SigmaQ2 => v.0,
                Observable::SigmaP2 => v.1,
                Observable::Product => v.2,
            })
            .collect()
    };
    let correction = |eps: f64, obs: Observable| -> Result<Vec<f64>> {
        let params = OscillatorParams::natural(eps)?;
        omega_t
            .iter()
            .map(|&t| {
                Ok(match obs {
                    Observable::SigmaQ2 => {
                        dynamics::rel_variances(t, packet, &params, source).0
                            - dynamics::nr_variances(packet, &params, t).0
                    }
                    Observable::SigmaP2 => {
                        dynamics::rel_variances(t, packet, &params, source).1
                            - dynamics::nr_variances(packet, &params, t).1
                    }
                    Observable::Product => {
                        dynamics::uncertainty_product(t, packet, &params, source, ProductForm::Product)?
                            - dynamics::nr_variances(packet, &params, t).2
                    }
                })
            })
            .collect()
    };

    let ex0 = exact_at(0.0)?;
    let ex1 = exact_at(epsilon)?;
    let ex2 = exact_at(0.5 * epsilon)?;
    let noise = Observable::ALL
        .iter()
        .flat_map(|&obs| {
            pick(&ex0, obs)
                .into_iter()
                .zip(nr_pick(obs))
                .map(|(a, b)| (a - b).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);

    let mut tables = Vec::with_capacity(3);
    for obs in Observable::ALL {
        let base = nr_pick(obs);
        let d1 = correction(epsilon, obs)?;
        let d2 = correction(0.5 * epsilon, obs)?;
        let (x1, x2) = (pick(&ex1, obs), pick(&ex2, obs));
        let rows = (0..omega_t.len())
            .map(|i| {
                let r_eps = x1[i] - base[i] - d1[i];
                let r_half = x2[i] - base[i] - d2[i];
                RichardsonRow {
                    omega_t: omega_t[i],
                    r_eps,
                    r_half,
                    ratio: r_half / r_eps,
                    tested: r_eps.abs() > 10.0 * noise,
                }
            })
            .collect();
        tables.push(RichardsonTable {
            observable: obs,
            epsilon,
            noise,
            rows,
        });
    }
    Ok(tables)
}
