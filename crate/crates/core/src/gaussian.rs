//! Moments of the Gaussian packet
//! ψ(q) ∝ exp(−(q−q₀)²/4σ_q² + i p₀ q/ħ).
//!
//! [`moment`] and [`static_covariances`] return the published closed forms.
//! [`moment_oracle`] evaluates any short q/p word independently: p̂ is applied
//! to (polynomial × ψ) symbolically, which keeps the result a polynomial in
//! u = q − q₀ times ψ, and the final expectation is a Gauss–Hermite sum.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::GaussianPacket;
use crate::quadrature::gauss_hermite_shared;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Tags of the tabulated expectation values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MomentKind {
    Q,
    Q3,
    Q4,
    P,
    P3,
    P4,
    PQ3,
    Q3P,
    QP3,
    P3Q,
    Wp2q,
    QWp2q,
    Wp2qQ,
    Wp2qP,
    PWp2q,
    Wq2p,
    QWq2p,
    Wq2pQ,
    PWq2p,
    Wq2pP,
}

impl MomentKind {
    pub const ALL: [MomentKind; 20] = [
        MomentKind::Q,
        MomentKind::Q3,
        MomentKind::Q4,
        MomentKind::P,
        MomentKind::P3,
        MomentKind::P4,
        MomentKind::PQ3,
        MomentKind::Q3P,
        MomentKind::QP3,
        MomentKind::P3Q,
        MomentKind::Wp2q,
        MomentKind::QWp2q,
        MomentKind::Wp2qQ,
        MomentKind::Wp2qP,
        MomentKind::PWp2q,
        MomentKind::Wq2p,
        MomentKind::QWq2p,
        MomentKind::Wq2pQ,
        MomentKind::PWq2p,
        MomentKind::Wq2pP,
    ];

    pub fn name(&self) -> &'static str {
        use MomentKind::*;
        match self {
            Q => "q",
            Q3 => "q^3",
            Q4 => "q^4",
            P => "p",
            P3 => "p^3",
            P4 => "p^4",
            PQ3 => "p q^3",
            Q3P => "q^3 p",
            QP3 => "q p^3",
            P3Q => "p^3 q",
            Wp2q => "W(p^2 q)",
            QWp2q => "q W(p^2 q)",
            Wp2qQ => "W(p^2 q) q",
            Wp2qP => "W(p^2 q) p",
            PWp2q => "p W(p^2 q)",
            Wq2p => "W(q^2 p)",
            QWq2p => "q W(q^2 p)",
            Wq2pQ => "W(q^2 p) q",
            PWq2p => "p W(q^2 p)",
            Wq2pP => "W(q^2 p) p",
        }
    }

    /// Total degree in q̂ and p̂; decides parity under (q₀, p₀) → (−q₀, −p₀).
    pub fn degree(&self) -> usize {
        use MomentKind::*;
        match self {
            Q | P => 1,
            Q3 | P3 | Wp2q | Wq2p => 3,
            _ => 4,
        }
    }

    /// The kind as a weighted sum of plain operator words.
    pub fn expansion(&self) -> Vec<(f64, Word)> {
        use MomentKind::*;
        let w = |s: &str| Word::from_str(s).expect("static word");
        let weyl_p2q = ["ppq", "pqp", "qpp"];
        let weyl_q2p = ["qqp", "qpq", "pqq"];
        let wrap = |parts: [&str; 3], pre: &str, post: &str| {
            parts
                .iter()
                .map(|x| (0.25, w(&format!("{pre}{x}{post}"))))
                .collect::<Vec<_>>()
        };
        match self {
            Q => vec![(1.0, w("q"))],
            Q3 => vec![(1.0, w("qqq"))],
            Q4 => vec![(1.0, w("qqqq"))],
            P => vec![(1.0, w("p"))],
            P3 => vec![(1.0, w("ppp"))],
            P4 => vec![(1.0, w("pppp"))],
            PQ3 => vec![(1.0, w("pqqq"))],
            Q3P => vec![(1.0, w("qqqp"))],
            QP3 => vec![(1.0, w("qppp"))],
            P3Q => vec![(1.0, w("pppq"))],
            Wp2q => wrap(weyl_p2q, "", ""),
            QWp2q => wrap(weyl_p2q, "q", ""),
            Wp2qQ => wrap(weyl_p2q, "", "q"),
            Wp2qP => wrap(weyl_p2q, "", "p"),
            PWp2q => wrap(weyl_p2q, "p", ""),
            Wq2p => wrap(weyl_q2p, "", ""),
            QWq2p => wrap(weyl_q2p, "q", ""),
            Wq2pQ => wrap(weyl_q2p, "", "q"),
            PWq2p => wrap(weyl_q2p, "p", ""),
            Wq2pP => wrap(weyl_q2p, "", "p"),
        }
    }
}

impl fmt::Display for MomentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Tabulated closed form of ⟨kind⟩, transcribed as published.
pub fn moment(packet: &GaussianPacket, kind: MomentKind, hbar: f64) -> Complex64 {
    use MomentKind::*;
    let (q0, p0, s) = (packet.q0, packet.p0, packet.sigma_q);
    let s2 = s * s;
    let h = hbar;
    match kind {
        Q => c(q0),
        Q3 => c(q0.powi(3) + 3.0 * q0 * s2),
        Q4 => c(q0.powi(4) + 6.0 * q0 * q0 * s2 + 3.0 * s2 * s2),
        P => c(p0),
        P3 => c(3.0 * h * h * p0 / (4.0 * s2) + p0.powi(3)),
        P4 => c(3.0 * h.powi(4) / (16.0 * s2 * s2)
            + 3.0 / (2.0 * s2) * h * h * p0 * p0
            + p0.powi(4)),
        PQ3 => p0 * (q0.powi(3) + 3.0 * q0 * s2) - 1.5 * I * h * (q0 * q0 + s2),
        Q3P => p0 * (q0.powi(3) + 3.0 * q0 * s2) + 1.5 * I * h * (q0 * q0 + s2),
        QP3 => {
            (8.0 * p0.powi(3) * q0 * s2 + 12.0 * I * h * p0 * p0 * s2 + 6.0 * h * h * p0 * q0
                + 3.0 * I * h.powi(3))
                / (8.0 * s2)
        }
        P3Q => {
            (8.0 * p0.powi(3) * q0 * s2 - 12.0 * I * h * p0 * p0 * s2 + 6.0 * h * h * p0 * q0
                - 3.0 * I * h.powi(3))
                / (8.0 * s2)
        }
        Wp2q => c(3.0 * q0 * (4.0 * p0 * p0 * s2 + h * h) / (16.0 * s2)),
        QWp2q => {
            3.0 * (4.0 * p0 * p0 * s2 * (q0 + s2) + 4.0 * I * h * p0 * q0 * s2
                + h * h * (q0 * q0 + s2))
                / (16.0 * s2)
        }
        Wp2qQ => {
            3.0 * (4.0 * p0 * p0 * s2 * (q0 + s2) - 4.0 * I * h * p0 * q0 * s2
                + h * h * (q0 * q0 + s2))
                / (16.0 * s2)
        }
        Wp2qP => {
            3.0 * (8.0 * p0.powi(3) * q0 * s2 + 4.0 * I * h * p0 * s2 + 6.0 * p0 * q0 * h * h
                + I * h.powi(3))
                / (32.0 * s2)
        }
        PWp2q => {
            3.0 * (8.0 * p0.powi(3) * q0 * s2 - 4.0 * I * h * p0 * s2 + 6.0 * p0 * q0 * h * h
                - I * h.powi(3))
                / (32.0 * s2)
        }
        Wq2p => c(3.0 * p0 * (q0 * q0 + s2) / 4.0),
        QWq2p => {
            0.375 * (2.0 * p0 * (q0.powi(3) + 3.0 * q0 * s2) + I * h * (q0 * q0 + s2))
        }
        Wq2pQ => {
            0.375 * (2.0 * p0 * (q0.powi(3) + 3.0 * q0 * s2) - I * h * (q0 * q0 + s2))
        }
        PWq2p => {
            3.0 * (4.0 * p0 * p0 * s2 * (q0 + s2) - 4.0 * I * h * p0 * q0 * s2
                + h * h * (q0 * q0 + s2))
                / (16.0 * s2)
        }
        Wq2pP => {
            3.0 * (4.0 * p0 * p0 * s2 * (q0 + s2) + 4.0 * I * h * p0 * q0 * s2
                + h * h * (q0 * q0 + s2))
                / (16.0 * s2)
        }
    }
}

/// Symmetrized covariances of q̂, p̂ with the cubic operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct CovarianceTable {
    pub cov_q_q3: f64,
    pub cov_p_p3: f64,
    pub cov_p_q3: f64,
    pub cov_q_p3: f64,
    pub cov_p_Wp2q: f64,
    pub cov_q_Wp2q: f64,
    pub cov_p_Wq2p: f64,
    pub cov_q_Wq2p: f64,
}

impl CovarianceTable {
    /// cov(p̂, O_j) for O = (p³, W(p²q), W(q²p), q³).
    pub fn with_p(&self) -> [f64; 4] {
        [self.cov_p_p3, self.cov_p_Wp2q, self.cov_p_Wq2p, self.cov_p_q3]
    }

    /// cov(q̂, O_j) for O = (p³, W(p²q), W(q²p), q³).
    pub fn with_q(&self) -> [f64; 4] {
        [self.cov_q_p3, self.cov_q_Wp2q, self.cov_q_Wq2p, self.cov_q_q3]
    }

    pub fn entries(&self) -> [(&'static str, f64); 8] {
        [
            ("cov(q,q^3)", self.cov_q_q3),
            ("cov(p,p^3)", self.cov_p_p3),
            ("cov(p,q^3)", self.cov_p_q3),
            ("cov(q,p^3)", self.cov_q_p3),
            ("cov(p,W(p^2 q))", self.cov_p_Wp2q),
            ("cov(q,W(p^2 q))", self.cov_q_Wp2q),
            ("cov(p,W(q^2 p))", self.cov_p_Wq2p),
            ("cov(q,W(q^2 p))", self.cov_q_Wq2p),
        ]
    }
}

/// Published closed forms of the eight static covariances.
pub fn static_covariances(packet: &GaussianPacket, hbar: f64) -> CovarianceTable {
    let (q0, p0, s) = (packet.q0, packet.p0, packet.sigma_q);
    let s2 = s * s;
    let h2 = hbar * hbar;
    CovarianceTable {
        cov_q_q3: 3.0 * s2 * (q0 * q0 + s2),
        cov_p_p3: 3.0 * h2 * h2 / (16.0 * s2 * s2) + 3.0 * h2 / (4.0 * s2) * p0 * p0,
        cov_p_q3: 0.0,
        cov_q_p3: 0.0,
        cov_p_Wp2q: 3.0 * h2 * p0 * q0 / (8.0 * s2),
        cov_q_Wp2q: 3.0 * h2 / 16.0 + 0.75 * p0 * p0 * s2,
        cov_p_Wq2p: 3.0 * h2 / (16.0 * s2) * (q0 * q0 + s2),
        cov_q_Wq2p: 1.5 * p0 * q0 * s2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    Q,
    P,
}

/// A product of q̂ and p̂ factors, written left to right.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word(Vec<Op>);

impl Word {
    pub const MAX_LEN: usize = 6;

    pub fn new(ops: Vec<Op>) -> Result<Self> {
        if ops.len() > Self::MAX_LEN {
            return Err(Error::Domain(format!(
                "operator word longer than {} factors",
                Self::MAX_LEN
            )));
        }
        Ok(Self(ops))
    }

    pub fn ops(&self) -> &[Op] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Coefficients in u = q − q₀ of the polynomial P with (word)ψ = P(u)ψ.
    fn polynomial(&self, packet: &GaussianPacket, hbar: f64) -> Vec<Complex64> {
        let s2 = packet.sigma_q2();
        let mut poly = vec![c(1.0)];
        // rightmost factor acts first
        for op in self.0.iter().rev() {
            let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
            match op {
                Op::Q => {
                    for (k, &a) in poly.iter().enumerate() {
                        next[k + 1] += a;
                        next[k] += packet.q0 * a;
                    }
                }
                Op::P => {
                    // −iħ d/dq (Pψ) = −iħP' + (iħ/2σ²) u P + p₀ P
                    for (k, &a) in poly.iter().enumerate() {
                        if k > 0 {
                            next[k - 1] += -I * hbar * (k as f64) * a;
                        }
                        next[k + 1] += I * hbar / (2.0 * s2) * a;
                        next[k] += packet.p0 * a;
                    }
                }
            }
            poly = next;
        }
        poly
    }

    /// ⟨ψ|word|ψ⟩ from exact central Gaussian moments E[u^k].
    pub fn expectation(&self, packet: &GaussianPacket, hbar: f64) -> Complex64 {
        let s2 = packet.sigma_q2();
        let poly = self.polynomial(packet, hbar);
        let mut total = Complex64::new(0.0, 0.0);
        let mut central = 1.0; // E[u^k] for even k, as k advances by 2
        for (k, &a) in poly.iter().enumerate() {
            if k % 2 == 1 {
                continue;
            }
            if k > 0 {
                central *= (k as f64 - 1.0) * s2;
            }
            total += a * central;
        }
        total
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let ops = s
            .chars()
            .filter(|ch| !ch.is_whitespace())
            .map(|ch| match ch {
                'q' | 'Q' => Ok(Op::Q),
                'p' | 'P' => Ok(Op::P),
                other => Err(Error::Domain(format!("unknown operator `{other}` in word"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Word::new(ops)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for op in &self.0 {
            f.write_str(match op {
                Op::Q => "q",
                Op::P => "p",
            })?;
        }
        Ok(())
    }
}

pub const DEFAULT_HERMITE_ORDER: usize = 80;
const MAX_HERMITE_ORDER: usize = 1280;

/// ⟨ψ|word|ψ⟩ by Gauss–Hermite quadrature, starting at order 80 and doubling
/// until two orders agree within `tol` (relative to max(1, |value|)).
pub fn moment_oracle(
    packet: &GaussianPacket,
    word: &Word,
    hbar: f64,
    tol: f64,
) -> Result<Complex64> {
    moment_oracle_with_order(packet, word, hbar, tol, DEFAULT_HERMITE_ORDER)
}

pub fn moment_oracle_with_order(
    packet: &GaussianPacket,
    word: &Word,
    hbar: f64,
    tol: f64,
    order: usize,
) -> Result<Complex64> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be > 0, got {tol}")));
    }
    if order == 0 {
        return Err(Error::Domain("Gauss-Hermite order must be positive".into()));
    }
    packet.validate()?;
    let poly = word.polynomial(packet, hbar);
    let scale = std::f64::consts::SQRT_2 * packet.sigma_q;
    let eval = |n: usize| -> Complex64 {
        // |ψ|² du = e^{−x²}/√π dx with u = √2 σ x
        let rules = gauss_hermite_shared(n);
        let rule = &rules.0;
        let mut acc = Complex64::new(0.0, 0.0);
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let u = scale * x;
            let mut val = Complex64::new(0.0, 0.0);
            for &a in poly.iter().rev() {
                val = val * u + a;
            }
            acc += w * val;
        }
        acc / std::f64::consts::PI.sqrt()
    };
    let mut n = order;
    let mut prev = eval(n);
    let mut diff = f64::INFINITY;
    while n < MAX_HERMITE_ORDER {
        n *= 2;
        let next = eval(n);
        diff = (next - prev).norm();
        if diff <= tol * next.norm().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureFailure { tol, achieved: diff })
}

/// Oracle value of a tabulated kind (sum over its word expansion).
pub fn moment_kind_oracle(
    packet: &GaussianPacket,
    kind: MomentKind,
    hbar: f64,
    tol: f64,
) -> Result<Complex64> {
    kind.expansion()
        .iter()
        .try_fold(Complex64::new(0.0, 0.0), |acc, (w, word)| {
            Ok(acc + *w * moment_oracle(packet, word, hbar, tol)?)
        })
}

/// Covariances assembled from oracle moments as ½⟨XY + YX⟩ − ⟨X⟩⟨Y⟩.
///
/// Fails if any assembled value keeps an imaginary part above `tol`
/// (relative to max(1, |value|)).
pub fn assembled_covariances(
    packet: &GaussianPacket,
    hbar: f64,
    tol: f64,
) -> Result<CovarianceTable> {
    use MomentKind::*;
    let m = |k| moment_kind_oracle(packet, k, hbar, tol);
    let cov = |xy: Complex64, yx: Complex64, x: Complex64, y: Complex64| -> Result<f64> {
        let v = 0.5 * (xy + yx) - x * y;
        if v.im.abs() > tol * v.norm().max(1.0) {
            return Err(Error::Numeric(format!(
                "assembled covariance has imaginary part {:e}",
                v.im
            )));
        }
        Ok(v.re)
    };
    let (q, p) = (m(Q)?, m(P)?);
    let (q3, p3) = (m(Q3)?, m(P3)?);
    let (wp2q, wq2p) = (m(Wp2q)?, m(Wq2p)?);
    Ok(CovarianceTable {
        cov_q_q3: cov(m(Q4)?, m(Q4)?, q, q3)?,
        cov_p_p3: cov(m(P4)?, m(P4)?, p, p3)?,
        cov_p_q3: cov(m(PQ3)?, m(Q3P)?, p, q3)?,
        cov_q_p3: cov(m(QP3)?, m(P3Q)?, q, p3)?,
        cov_p_Wp2q: cov(m(PWp2q)?, m(Wp2qP)?, p, wp2q)?,
        cov_q_Wp2q: cov(m(QWp2q)?, m(Wp2qQ)?, q, wp2q)?,
        cov_p_Wq2p: cov(m(PWq2p)?, m(Wq2pP)?, p, wq2p)?,
        cov_q_Wq2p: cov(m(QWq2p)?, m(Wq2pQ)?, q, wq2p)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeylOrder {
    /// (1/2^n) Σ_l q^{n−l} p^m q^l
    QFirst,
    /// (1/2^m) Σ_l p^{m−l} q^n p^l
    PFirst,
}

/// Mixed monomial p^m q^n under the symmetrization rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeylSpec {
    pub m: u32,
    pub n: u32,
    pub order: WeylOrder,
}

impl WeylSpec {
    pub const P2Q: WeylSpec = WeylSpec {
        m: 2,
        n: 1,
        order: WeylOrder::PFirst,
    };
    pub const Q2P: WeylSpec = WeylSpec {
        m: 1,
        n: 2,
        order: WeylOrder::QFirst,
    };

    fn words(&self) -> Vec<Word> {
        let rep = |op: Op, k: u32| std::iter::repeat_n(op, k as usize);
        match self.order {
            WeylOrder::PFirst => (0..=self.m)
                .map(|l| {
                    let ops = rep(Op::P, self.m - l)
                        .chain(rep(Op::Q, self.n))
                        .chain(rep(Op::P, l))
                        .collect();
                    Word(ops)
                })
                .collect(),
            WeylOrder::QFirst => (0..=self.n)
                .map(|l| {
                    let ops = rep(Op::Q, self.n - l)
                        .chain(rep(Op::P, self.m))
                        .chain(rep(Op::Q, l))
                        .collect();
                    Word(ops)
                })
                .collect(),
        }
    }
}

/// ⟨W(·)⟩ for W(p²q) (p-first, m=2, n=1) and W(q²p) (q-first, m=1, n=2).
pub fn weyl_expectation(packet: &GaussianPacket, spec: WeylSpec, hbar: f64) -> Result<Complex64> {
    if spec != WeylSpec::P2Q && spec != WeylSpec::Q2P {
        return Err(Error::Domain(format!(
            "unsupported symmetrized monomial p^{} q^{} ({:?})",
            spec.m, spec.n, spec.order
        )));
    }
    let norm = match spec.order {
        WeylOrder::PFirst => 2f64.powi(spec.m as i32),
        WeylOrder::QFirst => 2f64.powi(spec.n as i32),
    };
    let sum: Complex64 = spec
        .words()
        .iter()
        .map(|w| w.expectation(packet, hbar))
        .sum();
    Ok(sum / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn grid() -> Vec<GaussianPacket> {
        let mut out = Vec::new();
        for q0 in [-1.0, 0.0, 2.0] {
            for p0 in [-1.0, 0.0, 3.0] {
                for s in [0.4, FRAC_1_SQRT_2, 1.7] {
                    out.push(GaussianPacket::new(q0, p0, s).unwrap());
                }
            }
        }
        out
    }

    fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
        (a - b).norm() <= rel * b.norm() + 1e-13
    }

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn spot_values() {
        let pk = GaussianPacket::new(0.0, 0.0, 1.0).unwrap();
        assert_eq!(moment(&pk, MomentKind::Q4, 1.0).re, 3.0);
        let g = GaussianPacket::new(0.0, 0.0, FRAC_1_SQRT_2).unwrap();
        assert!((moment(&g, MomentKind::P4, 1.0).re - 0.75).abs() < 1e-14);
        let v = moment_oracle(&g, &w("pppp"), 1.0, 1e-12).unwrap();
        assert!((v - c(0.75)).norm() < 1e-10);
        let d = GaussianPacket::new(1.3, -0.2, 0.9).unwrap();
        assert!((moment_oracle(&d, &w("q"), 1.0, 1e-12).unwrap() - c(1.3)).norm() < 1e-12);
    }

    #[test]
    fn canonical_commutator() {
        for pk in grid() {
            let qp = moment_oracle(&pk, &w("qp"), 1.0, 1e-12).unwrap();
            let pq = moment_oracle(&pk, &w("pq"), 1.0, 1e-12).unwrap();
            assert!((qp - pq - I).norm() < 1e-12);
        }
        let pk = GaussianPacket::new(0.3, 0.4, 1.1).unwrap();
        let h = 2.5;
        let qp = w("qp").expectation(&pk, h);
        let pq = w("pq").expectation(&pk, h);
        assert!((qp - pq - I * h).norm() < 1e-12);
    }

    #[test]
    fn symmetrization_identity() {
        for pk in grid() {
            let lhs: Complex64 = ["ppq", "pqp", "qpp"]
                .iter()
                .map(|s| moment_oracle(&pk, &w(s), 1.0, 1e-12).unwrap())
                .sum();
            let rhs = 3.0 * moment_oracle(&pk, &w("pqp"), 1.0, 1e-12).unwrap();
            assert!((lhs - rhs).norm() < 1e-12 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn quadrature_agrees_with_exact_gaussian_moments() {
        for pk in grid() {
            for s in ["qqqq", "pppp", "qpqpqp", "ppqqpp", "pqqq", "qppp"] {
                let a = moment_oracle(&pk, &w(s), 1.0, 1e-12).unwrap();
                let b = w(s).expectation(&pk, 1.0);
                assert!(close(a, b, 1e-12), "{s} {pk:?}: {a} vs {b}");
            }
        }
    }

    const MISPRINTED: [MomentKind; 6] = [
        MomentKind::QWp2q,
        MomentKind::Wp2qQ,
        MomentKind::Wp2qP,
        MomentKind::PWp2q,
        MomentKind::PWq2p,
        MomentKind::Wq2pP,
    ];

    #[test]
    fn closed_forms_match_oracle_except_known_misprints() {
        for pk in grid() {
            for kind in MomentKind::ALL {
                if MISPRINTED.contains(&kind) {
                    continue;
                }
                let a = moment(&pk, kind, 1.0);
                let b = moment_kind_oracle(&pk, kind, 1.0, 1e-12).unwrap();
                assert!(close(a, b, 1e-10), "{kind} {pk:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn misprinted_entries_and_their_corrections() {
        let h = 1.0;
        for pk in grid() {
            let (q0, p0, s2) = (pk.q0, pk.p0, pk.sigma_q2());
            let weyl_qq = |sign: f64| {
                3.0 * (4.0 * p0 * p0 * s2 * (q0 * q0 + s2) + sign * 4.0 * I * h * p0 * q0 * s2
                    + h * h * (q0 * q0 + s2))
                    / (16.0 * s2)
            };
            let weyl_pp = |sign: f64| {
                3.0 * (8.0 * p0.powi(3) * q0 * s2 + sign * 4.0 * I * h * p0 * p0 * s2
                    + 6.0 * p0 * q0 * h * h
                    + sign * I * h.powi(3))
                    / (32.0 * s2)
            };
            let corrected = [
                (MomentKind::QWp2q, weyl_qq(1.0)),
                (MomentKind::Wp2qQ, weyl_qq(-1.0)),
                (MomentKind::Wp2qP, weyl_pp(1.0)),
                (MomentKind::PWp2q, weyl_pp(-1.0)),
                (MomentKind::PWq2p, weyl_qq(-1.0)),
                (MomentKind::Wq2pP, weyl_qq(1.0)),
            ];
            for (kind, fixed) in corrected {
                let oracle = moment_kind_oracle(&pk, kind, h, 1e-12).unwrap();
                assert!(close(fixed, oracle, 1e-10), "{kind} {pk:?}");
            }
        }
        let pk = GaussianPacket::new(2.0, 3.0, 0.4).unwrap();
        for kind in MISPRINTED {
            let printed = moment(&pk, kind, h);
            let oracle = moment_kind_oracle(&pk, kind, h, 1e-12).unwrap();
            assert!(!close(printed, oracle, 1e-6), "{kind} unexpectedly agrees");
        }
    }

    #[test]
    fn conjugate_pairs_and_parity() {
        use MomentKind::*;
        let pairs = [
            (PQ3, Q3P),
            (QP3, P3Q),
            (QWp2q, Wp2qQ),
            (Wp2qP, PWp2q),
            (QWq2p, Wq2pQ),
            (PWq2p, Wq2pP),
        ];
        for pk in grid() {
            for (a, b) in pairs {
                assert!((moment(&pk, a, 1.0) - moment(&pk, b, 1.0).conj()).norm() < 1e-12);
                let oa = moment_kind_oracle(&pk, a, 1.0, 1e-12).unwrap();
                let ob = moment_kind_oracle(&pk, b, 1.0, 1e-12).unwrap();
                assert!((oa - ob.conj()).norm() < 1e-11 * oa.norm().max(1.0));
            }
            let flipped = GaussianPacket::new(-pk.q0, -pk.p0, pk.sigma_q).unwrap();
            for kind in MomentKind::ALL {
                let sign = if kind.degree() % 2 == 1 { -1.0 } else { 1.0 };
                let a = moment_kind_oracle(&pk, kind, 1.0, 1e-12).unwrap();
                let b = moment_kind_oracle(&flipped, kind, 1.0, 1e-12).unwrap();
                assert!((b - sign * a).norm() < 1e-11 * a.norm().max(1.0), "{kind}");
            }
        }
    }

    #[test]
    fn printed_covariances_match_assembly() {
        for pk in grid() {
            let printed = static_covariances(&pk, 1.0);
            let built = assembled_covariances(&pk, 1.0, 1e-12).unwrap();
            for ((name, a), (_, b)) in printed.entries().iter().zip(built.entries()) {
                assert!((a - b).abs() <= 1e-10 * b.abs() + 1e-13, "{name} {pk:?}: {a} vs {b}");
            }
            assert_eq!(printed.cov_p_q3, 0.0);
            assert!(printed.cov_q_q3 >= 0.0 && printed.cov_p_p3 >= 0.0);
        }
        let pk = GaussianPacket::new(0.0, 0.0, 1.0).unwrap();
        assert_eq!(static_covariances(&pk, 1.0).cov_q_q3, 3.0);
        let pk = GaussianPacket::new(1.5, 0.0, 0.8).unwrap();
        assert_eq!(static_covariances(&pk, 1.0).cov_q_Wq2p, 0.0);
    }

    #[test]
    fn weyl_expectations() {
        let pk = GaussianPacket::new(0.0, 1.2, 0.8).unwrap();
        assert!(weyl_expectation(&pk, WeylSpec::P2Q, 1.0).unwrap().norm() < 1e-14);
        let pk = GaussianPacket::new(0.0, 2.0, 1.0).unwrap();
        let v = weyl_expectation(&pk, WeylSpec::Q2P, 1.0).unwrap();
        assert!((v - c(1.5)).norm() < 1e-13);
        let oracle = moment_kind_oracle(&pk, MomentKind::Wq2p, 1.0, 1e-12).unwrap();
        assert!((v - oracle).norm() < 1e-12);
        let bad = WeylSpec {
            m: 3,
            n: 1,
            order: WeylOrder::PFirst,
        };
        assert!(weyl_expectation(&pk, bad, 1.0).is_err());
    }

    #[test]
    fn word_parsing() {
        assert_eq!(w("q p q").to_string(), "qpq");
        assert!("qpx".parse::<Word>().is_err());
        assert!("qqqqqqq".parse::<Word>().is_err());
    }
}
