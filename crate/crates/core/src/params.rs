//! Physical parameters, natural-unit normalization and validity checks for
//! the 1/c² expansion.
//!
//! Everything downstream of this module runs in oscillator units
//! (ħ = m = ω = 1), where the only remaining scale is the relativistic
//! parameter ε = ħω/(mc²). [`ScaleRecord`] carries the factors needed to map
//! results back to the caller's units.

use serde::{Deserialize, Serialize};

use crate::error::{require_finite, require_positive, Error, Result};

/// CODATA-2018 constants used by the electron presets.
///
/// | symbol | value | unit |
/// |--------|-------|------|
/// | ħ      | 1.054 571 817 × 10⁻³⁴ | J·s |
/// | mₑ     | 9.109 383 7015 × 10⁻³¹ | kg |
/// | c      | 299 792 458 | m/s |
/// | e      | 1.602 176 634 × 10⁻¹⁹ | C |
/// | mₑc²   | 510 998.95 | eV |
pub mod constants {
    pub const HBAR_SI: f64 = 1.054_571_817e-34;
    pub const ELECTRON_MASS_SI: f64 = 9.109_383_701_5e-31;
    pub const SPEED_OF_LIGHT_SI: f64 = 299_792_458.0;
    pub const ELEMENTARY_CHARGE_SI: f64 = 1.602_176_634e-19;
    pub const ELECTRON_REST_ENERGY_EV: f64 = 510_998.95;
}

/// Mass, trap frequency, ħ and c of the oscillator.
///
/// `c` may be `f64::INFINITY`, which is the nonrelativistic limit (ε = 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    pub mass: f64,
    pub omega: f64,
    pub hbar: f64,
    pub c: f64,
}

impl OscillatorParams {
    pub fn new(mass: f64, omega: f64, hbar: f64, c: f64) -> Result<Self> {
        let params = Self {
            mass,
            omega,
            hbar,
            c,
        };
        params.validate()?;
        Ok(params)
    }

    /// Oscillator units with ħ = m = ω = 1 and c = ε^{-1/2}.
    pub fn natural(epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must be finite and >= 0, got {epsilon}"),
            });
        }
        let c = if epsilon == 0.0 {
            f64::INFINITY
        } else {
            epsilon.sqrt().recip()
        };
        Ok(Self {
            mass: 1.0,
            omega: 1.0,
            hbar: 1.0,
            c,
        })
    }

    /// An electron in a trap with level spacing `hbar_omega_ev`, in SI units.
    pub fn electron_trap(hbar_omega_ev: f64) -> Result<Self> {
        use constants::*;
        require_positive("hbar_omega_ev", hbar_omega_ev)?;
        let omega = hbar_omega_ev * ELEMENTARY_CHARGE_SI / HBAR_SI;
        Self::new(ELECTRON_MASS_SI, omega, HBAR_SI, SPEED_OF_LIGHT_SI)
    }

    /// An electron trapped at angular frequency `omega` (rad/s), SI units.
    pub fn electron_at_omega(omega: f64) -> Result<Self> {
        use constants::*;
        Self::new(ELECTRON_MASS_SI, omega, HBAR_SI, SPEED_OF_LIGHT_SI)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("mass", self.mass)?;
        require_positive("omega", self.omega)?;
        require_positive("hbar", self.hbar)?;
        if self.c.is_nan() || self.c <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "c",
                reason: format!("must be > 0 (or +inf), got {}", self.c),
            });
        }
        Ok(())
    }

    /// 1/c², zero in the nonrelativistic limit.
    pub fn inv_c2(&self) -> f64 {
        if self.c.is_infinite() {
            0.0
        } else {
            1.0 / (self.c * self.c)
        }
    }

    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega
    }
}

/// Center and position width of a Gaussian packet
/// ψ(q) ∝ exp(−(q−q₀)²/4σ_q² + i p₀ q/ħ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacket {
    pub q0: f64,
    pub p0: f64,
    pub sigma_q: f64,
}

impl GaussianPacket {
    pub fn new(q0: f64, p0: f64, sigma_q: f64) -> Result<Self> {
        let packet = Self { q0, p0, sigma_q };
        packet.validate()?;
        Ok(packet)
    }

    pub fn validate(&self) -> Result<()> {
        require_finite("q0", self.q0)?;
        require_finite("p0", self.p0)?;
        require_positive("sigma_q", self.sigma_q)
    }

    pub fn sigma_q2(&self) -> f64 {
        self.sigma_q * self.sigma_q
    }

    /// σ_p² = ħ²/(4σ_q²), the momentum variance of this minimum-uncertainty
    /// Gaussian.
    pub fn sigma_p2(&self, hbar: f64) -> f64 {
        hbar * hbar / (4.0 * self.sigma_q2())
    }

    /// True when the width is the coherent one, mωσ_q² = ħ/2, to relative
    /// tolerance `rel_tol`.
    pub fn is_coherent(&self, params: &OscillatorParams, rel_tol: f64) -> bool {
        let lhs = params.mass * params.omega * self.sigma_q2();
        let rhs = 0.5 * params.hbar;
        (lhs - rhs).abs() <= rel_tol * rhs
    }
}

/// η_E = ħω/(mc²).
pub fn eta_e(params: &OscillatorParams) -> f64 {
    params.hbar * params.omega * params.inv_c2() / params.mass
}

/// Ground-state packet: q₀ = p₀ = 0, σ_q = sqrt(ħ/2mω).
pub fn ground_packet(params: &OscillatorParams) -> GaussianPacket {
    GaussianPacket {
        q0: 0.0,
        p0: 0.0,
        sigma_q: (params.hbar / (2.0 * params.mass * params.omega)).sqrt(),
    }
}

/// Conversion factors between oscillator units and the caller's units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleRecord {
    pub length_scale: f64,
    pub momentum_scale: f64,
    pub time_scale: f64,
    pub energy_scale: f64,
    pub epsilon: f64,
}

impl ScaleRecord {
    pub fn from_params(params: &OscillatorParams) -> Self {
        let (m, w, hbar) = (params.mass, params.omega, params.hbar);
        Self {
            length_scale: (hbar / (m * w)).sqrt(),
            momentum_scale: (hbar * m * w).sqrt(),
            time_scale: 1.0 / w,
            energy_scale: hbar * w,
            epsilon: eta_e(params),
        }
    }

    pub fn action_scale(&self) -> f64 {
        self.energy_scale * self.time_scale
    }

    pub fn packet_to_natural(&self, packet: &GaussianPacket) -> GaussianPacket {
        GaussianPacket {
            q0: packet.q0 / self.length_scale,
            p0: packet.p0 / self.momentum_scale,
            sigma_q: packet.sigma_q / self.length_scale,
        }
    }

    pub fn packet_from_natural(&self, packet: &GaussianPacket) -> GaussianPacket {
        GaussianPacket {
            q0: packet.q0 * self.length_scale,
            p0: packet.p0 * self.momentum_scale,
            sigma_q: packet.sigma_q * self.length_scale,
        }
    }

    /// Recovers the physical parameters that produced this record.
    pub fn params_from_natural(&self) -> OscillatorParams {
        let hbar = self.action_scale();
        let omega = 1.0 / self.time_scale;
        let mass = self.momentum_scale / (self.length_scale * omega);
        let c = if self.epsilon == 0.0 {
            f64::INFINITY
        } else {
            (hbar * omega / (mass * self.epsilon)).sqrt()
        };
        OscillatorParams {
            mass,
            omega,
            hbar,
            c,
        }
    }
}

/// Maps `(params, packet)` to oscillator units.
pub fn to_natural(
    params: &OscillatorParams,
    packet: &GaussianPacket,
) -> Result<(OscillatorParams, GaussianPacket, ScaleRecord)> {
    params.validate()?;
    packet.validate()?;
    let scales = ScaleRecord::from_params(params);
    let natural = OscillatorParams::natural(scales.epsilon)?;
    Ok((natural, scales.packet_to_natural(packet), scales))
}

/// Thresholds for the expansion-validity warnings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityThresholds {
    pub eta_max: f64,
    pub v_over_c_max: f64,
}

impl Default for ValidityThresholds {
    fn default() -> Self {
        Self {
            eta_max: 0.05,
            v_over_c_max: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityDiagnostics {
    pub eta_e: f64,
    pub v_rms_over_c: f64,
    pub warnings: Vec<String>,
}

/// Speed scale of the packet relative to c: sqrt(⟨p²⟩ + m²ω²⟨q²⟩)/(mc),
/// i.e. the speed of a classical particle carrying the packet's mean
/// oscillator energy through the trap center. Equals sqrt(η_E) for the
/// ground packet.
pub fn v_rms_over_c(params: &OscillatorParams, packet: &GaussianPacket) -> f64 {
    let (m, w) = (params.mass, params.omega);
    let p2 = packet.p0 * packet.p0 + packet.sigma_p2(params.hbar);
    let q2 = packet.q0 * packet.q0 + packet.sigma_q2();
    let v = (p2 + m * m * w * w * q2).sqrt() / m;
    if params.c.is_infinite() {
        0.0
    } else {
        v / params.c
    }
}

pub fn validity_guard(
    params: &OscillatorParams,
    packet: &GaussianPacket,
    thresholds: &ValidityThresholds,
) -> ValidityDiagnostics {
    let eta = eta_e(params);
    let v = v_rms_over_c(params, packet);
    let mut warnings = Vec::new();
    if eta > thresholds.eta_max {
        warnings.push(format!(
            "eta_E = {eta:.4e} exceeds {:.3}; first-order 1/c^2 truncation is unreliable",
            thresholds.eta_max
        ));
    }
    if v > thresholds.v_over_c_max {
        warnings.push(format!(
            "v_rms/c = {v:.4} exceeds {:.3}; packet is too fast for the 1/c^2 expansion",
            thresholds.v_over_c_max
        ));
    }
    ValidityDiagnostics {
        eta_e: eta,
        v_rms_over_c: v,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eta_for_kev_electron_traps() {
        let p1 = OscillatorParams::electron_trap(1e3).unwrap();
        let p10 = OscillatorParams::electron_trap(1e4).unwrap();
        assert_relative_eq!(eta_e(&p1), 1.9569e-3, max_relative = 1e-4);
        assert_relative_eq!(eta_e(&p10), 1.9569e-2, max_relative = 1e-4);
        // mₑc² from the SI constants agrees with the tabulated rest energy
        assert_relative_eq!(
            eta_e(&p1),
            1e3 / constants::ELECTRON_REST_ENERGY_EV,
            max_relative = 1e-9
        );
    }

    #[test]
    fn eta_natural_is_inverse_c_squared() {
        let p = OscillatorParams::new(1.0, 1.0, 1.0, 10.0).unwrap();
        assert_relative_eq!(eta_e(&p), 1e-2, max_relative = 1e-15);
        assert_eq!(eta_e(&OscillatorParams::natural(0.0).unwrap()), 0.0);
    }

    #[test]
    fn ground_packet_widths() {
        let nat = OscillatorParams::natural(1e-3).unwrap();
        assert_relative_eq!(
            ground_packet(&nat).sigma_q,
            std::f64::consts::FRAC_1_SQRT_2,
            max_relative = 1e-15
        );

        // sqrt(ħ/2mω) for an electron at 2π·1 GHz, evaluated independently
        let e = OscillatorParams::electron_at_omega(std::f64::consts::TAU * 1e9).unwrap();
        assert_relative_eq!(ground_packet(&e).sigma_q, 9.598_174_703e-8, max_relative = 1e-9);

        let e2 = OscillatorParams::electron_at_omega(std::f64::consts::TAU * 2e9).unwrap();
        assert_relative_eq!(
            ground_packet(&e2).sigma_q2(),
            0.5 * ground_packet(&e).sigma_q2(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn ground_packet_is_coherent() {
        let e = OscillatorParams::electron_trap(1e3).unwrap();
        let g = ground_packet(&e);
        assert!(g.is_coherent(&e, 1e-14));
        assert_relative_eq!(
            e.mass * e.omega * g.sigma_q2(),
            0.5 * e.hbar,
            max_relative = 1e-15
        );
    }

    #[test]
    fn natural_identity_and_electron_epsilon() {
        let nat = OscillatorParams::natural(0.25).unwrap();
        let pk = GaussianPacket::new(0.3, -1.2, 0.9).unwrap();
        let (np, npk, sc) = to_natural(&nat, &pk).unwrap();
        assert_eq!(npk, pk);
        assert_relative_eq!(np.c, nat.c, max_relative = 1e-15);
        for s in [sc.length_scale, sc.momentum_scale, sc.time_scale, sc.energy_scale] {
            assert_relative_eq!(s, 1.0, max_relative = 1e-15);
        }

        let e = OscillatorParams::electron_trap(1e3).unwrap();
        let (_, _, sc) = to_natural(&e, &ground_packet(&e)).unwrap();
        assert_relative_eq!(sc.epsilon, eta_e(&e), max_relative = 1e-14);
        assert_relative_eq!(sc.epsilon, 1.9569e-3, max_relative = 1e-4);
    }

    #[test]
    fn natural_round_trip() {
        let e = OscillatorParams::electron_trap(3.7e3).unwrap();
        let pk = GaussianPacket::new(2.1e-12, -4.4e-24, 3.3e-12).unwrap();
        let (np, npk, sc) = to_natural(&e, &pk).unwrap();
        assert_relative_eq!(eta_e(&np), eta_e(&e), max_relative = 1e-14);
        let back = sc.packet_from_natural(&npk);
        assert_relative_eq!(back.q0, pk.q0, max_relative = 1e-14);
        assert_relative_eq!(back.p0, pk.p0, max_relative = 1e-14);
        assert_relative_eq!(back.sigma_q, pk.sigma_q, max_relative = 1e-14);
        let bp = sc.params_from_natural();
        assert_relative_eq!(bp.mass, e.mass, max_relative = 1e-14);
        assert_relative_eq!(bp.omega, e.omega, max_relative = 1e-14);
        assert_relative_eq!(bp.hbar, e.hbar, max_relative = 1e-14);
        assert_relative_eq!(bp.c, e.c, max_relative = 1e-14);
    }

    #[test]
    fn validity_guard_thresholds() {
        let t = ValidityThresholds::default();
        let p10 = OscillatorParams::electron_trap(1e4).unwrap();
        let d = validity_guard(&p10, &ground_packet(&p10), &t);
        assert_relative_eq!(d.v_rms_over_c, 0.139_891, max_relative = 1e-5);
        assert_relative_eq!(d.v_rms_over_c, d.eta_e.sqrt(), max_relative = 1e-14);
        assert!(d.warnings.is_empty());

        let p20 = OscillatorParams::electron_trap(2e4).unwrap();
        let d = validity_guard(&p20, &ground_packet(&p20), &t);
        assert_relative_eq!(d.eta_e, 3.9139e-2, max_relative = 1e-4);
        assert_relative_eq!(d.v_rms_over_c, 0.197_836, max_relative = 1e-5);
        assert_eq!(d.warnings.len(), 1);

        let nr = OscillatorParams::natural(0.0).unwrap();
        let d = validity_guard(&nr, &ground_packet(&nr), &t);
        assert_eq!(d.eta_e, 0.0);
        assert!(d.warnings.is_empty());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(OscillatorParams::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(OscillatorParams::new(1.0, f64::NAN, 1.0, 1.0).is_err());
        assert!(GaussianPacket::new(0.0, 0.0, -1.0).is_err());
        assert!(GaussianPacket::new(f64::INFINITY, 0.0, 1.0).is_err());
        assert!(OscillatorParams::natural(-1e-3).is_err());
    }
}
