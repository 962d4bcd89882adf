//! Named Lindbladians for the standard qubit examples.
//!
//! Every preset maps its textbook equation of motion onto the canonical form
//! `ρ̇ = −i[H, ρ] + Σ γ_j (L_j ρ L_j† − ½{L_j† L_j, ρ})` and states the mapping
//! in its convention string. Qubit basis: `σz = diag(1, −1)`, `σ− = |0⟩⟨1|`,
//! so `|1⟩` is the excited level.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{DilateError, Result};
use crate::generators::{LindbladSpec, TimeProfile};
use crate::linalg::{c, pauli};

/// `ρ̇ = −γ[σz, [σz, ρ]]`, i.e. jump `σz` at rate `2γ`.
pub fn dephasing(gamma: f64) -> LindbladSpec {
    spin_boson(TimeProfile::constant(gamma))
}

/// `ρ̇ = −γ(t)[σz, [σz, ρ]]` with an arbitrary rate profile.
pub fn spin_boson(gamma: TimeProfile) -> LindbladSpec {
    LindbladSpec::empty(2)
        .with_jump(pauli::z(), gamma.scaled(2.0))
        .expect("qubit dephasing is well formed")
}

/// Default non-Markovian rate `γ(t) = γ₀ sin(ω t)`: zero at `t = 0` and
/// negative on part of every period.
pub fn spin_boson_profile(gamma0: f64, omega: f64) -> TimeProfile {
    TimeProfile::Sinusoidal {
        amplitude: gamma0,
        frequency: omega,
        phase: 0.0,
        offset: 0.0,
    }
}

/// `ρ̇ = −γ({σ+σ−, ρ} − 2σ−ρσ+) − i[(ω₀/2)σz, ρ]`: jump `σ−` at rate `2γ`.
pub fn amplitude_damping(gamma: f64, omega0: f64) -> LindbladSpec {
    let mut spec = LindbladSpec::empty(2)
        .with_jump(pauli::minus(), TimeProfile::constant(2.0 * gamma))
        .expect("qubit amplitude damping is well formed");
    if omega0 != 0.0 {
        spec = spec
            .with_hamiltonian(pauli::z() * c(0.5, 0.0), TimeProfile::constant(omega0))
            .expect("σz is Hermitian");
    }
    spec
}

/// Amplitude damping at `ω₀ = 0` plus the drive `−iΩ[σx, ρ]`.
pub fn driven_damping(gamma: f64, omega: f64) -> LindbladSpec {
    amplitude_damping(gamma, 0.0)
        .with_hamiltonian(pauli::x(), TimeProfile::constant(omega))
        .expect("σx is Hermitian")
}

/// Amplitude damping with the resonant drive `−iΩ cos(ω₀t)[σx, ρ]` after the
/// rotating-wave approximation: `H = (ω₀/2)σz + (Ω/2)(cos(ω₀t)σx + sin(ω₀t)σy)`.
pub fn rwa_driving(gamma: f64, omega0: f64, omega: f64) -> LindbladSpec {
    let half = 0.5 * omega;
    amplitude_damping(gamma, omega0)
        .with_hamiltonian(
            pauli::x(),
            TimeProfile::Sinusoidal {
                amplitude: half,
                frequency: omega0,
                phase: std::f64::consts::FRAC_PI_2,
                offset: 0.0,
            },
        )
        .and_then(|s| {
            s.with_hamiltonian(
                pauli::y(),
                TimeProfile::Sinusoidal {
                    amplitude: half,
                    frequency: omega0,
                    phase: 0.0,
                    offset: 0.0,
                },
            )
        })
        .expect("Pauli drives are Hermitian")
}

/// Closed system `ρ̇ = −i[(ω/2)σx, ρ]`.
pub fn unitary_only(omega: f64) -> LindbladSpec {
    LindbladSpec::empty(2)
        .with_hamiltonian(pauli::x() * c(0.5, 0.0), TimeProfile::constant(omega))
        .expect("σx is Hermitian")
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamInfo {
    pub name: &'static str,
    pub default: f64,
    pub description: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct PresetInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub convention: &'static str,
    pub parameters: Vec<ParamInfo>,
}

fn param(name: &'static str, default: f64, description: &'static str) -> ParamInfo {
    ParamInfo {
        name,
        default,
        description,
    }
}

pub fn catalog() -> Vec<PresetInfo> {
    vec![
        PresetInfo {
            name: "dephasing",
            description: "constant-rate pure dephasing (phase-flip channel)",
            convention: "rho' = -gamma [sz, [sz, rho]]  ==  jump sz at rate 2 gamma; coherences decay as exp(-4 gamma t)",
            parameters: vec![param("gamma", 1.0, "dephasing rate")],
        },
        PresetInfo {
            name: "spin_boson",
            description: "dephasing with time-dependent rate gamma(t) = gamma0 sin(omega t), zero at t = 0 and negative for part of each period",
            convention: "rho' = -gamma(t) [sz, [sz, rho]]  ==  jump sz at rate 2 gamma(t)",
            parameters: vec![
                param("gamma0", 1.0, "rate amplitude"),
                param("omega", 1.0, "rate oscillation frequency (rad/time)"),
            ],
        },
        PresetInfo {
            name: "amplitude_damping",
            description: "relaxation to the ground state |0> with level splitting omega0",
            convention: "rho' = -gamma({s+ s-, rho} - 2 s- rho s+) - i[(omega0/2) sz, rho]  ==  jump s- = |0><1| at rate 2 gamma, H = (omega0/2) sz; excited population decays as exp(-2 gamma t)",
            parameters: vec![
                param("gamma", 1.0, "damping rate"),
                param("omega0", 0.0, "level splitting (rad/time)"),
            ],
        },
        PresetInfo {
            name: "driven_damping",
            description: "amplitude damping (omega0 = 0) with a constant transverse drive",
            convention: "amplitude_damping(gamma, 0) plus -i Omega [sx, rho]  ==  H = Omega sx",
            parameters: vec![param("gamma", 1.0, "damping rate"), param("omega", 0.05, "drive strength Omega")],
        },
        PresetInfo {
            name: "rwa_driving",
            description: "amplitude damping with a resonant drive Omega cos(omega0 t) sx in the rotating-wave approximation",
            convention: "amplitude_damping(gamma, omega0) plus H = (Omega/2)(cos(omega0 t) sx + sin(omega0 t) sy)",
            parameters: vec![
                param("gamma", 1.0, "damping rate"),
                param("omega0", 2.0, "level splitting and drive frequency"),
                param("omega", 0.05, "drive strength Omega"),
            ],
        },
        PresetInfo {
            name: "unitary_only",
            description: "closed qubit precessing about x",
            convention: "rho' = -i[(omega/2) sx, rho]",
            parameters: vec![param("omega", 1.0, "precession frequency")],
        },
        PresetInfo {
            name: "custom",
            description: "explicit Hamiltonian terms and jump operators given in the configuration",
            convention: "rho' = -i[sum_k h_k(t) H_k, rho] + sum_j gamma_j(t)(L_j rho L_j^dag - {L_j^dag L_j, rho}/2)",
            parameters: vec![],
        },
    ]
}

/// Build a named preset; missing parameters take their catalog defaults.
pub fn build_preset(name: &str, params: &BTreeMap<String, f64>) -> Result<LindbladSpec> {
    let info = catalog()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| DilateError::InvalidInput(format!("unknown preset '{name}'")))?;
    if name == "custom" {
        return Err(DilateError::InvalidInput(
            "the custom preset needs an explicit Lindbladian".into(),
        ));
    }
    for key in params.keys() {
        if !info.parameters.iter().any(|p| p.name == key) {
            return Err(DilateError::InvalidInput(format!(
                "preset '{name}' has no parameter '{key}'"
            )));
        }
    }
    let get = |key: &str| -> Result<f64> {
        let default = info
            .parameters
            .iter()
            .find(|p| p.name == key)
            .map(|p| p.default)
            .unwrap_or(0.0);
        let v = params.get(key).copied().unwrap_or(default);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DilateError::InvalidInput(format!(
                "parameter '{key}' must be finite"
            )))
        }
    };
    Ok(match name {
        "dephasing" => dephasing(get("gamma")?),
        "spin_boson" => spin_boson(spin_boson_profile(get("gamma0")?, get("omega")?)),
        "amplitude_damping" => amplitude_damping(get("gamma")?, get("omega0")?),
        "driven_damping" => driven_damping(get("gamma")?, get("omega")?),
        "rwa_driving" => rwa_driving(get("gamma")?, get("omega0")?, get("omega")?),
        "unitary_only" => unitary_only(get("omega")?),
        _ => unreachable!("catalog and builder list the same presets"),
    })
}
