//! Named coefficient sets with string parameter overrides.

use std::collections::BTreeMap;

use super::{
    geometric_amplitudes, power_amplitudes, CoefficientSet, DiffusionSpec, FluxSpec, NoiseSpec, ScalarMap,
    SpatialBasis,
};
use crate::error::{Error, Result};

struct Preset {
    name: &'static str,
    flux: &'static str,
    diffusion: &'static str,
    noise: &'static str,
    basis: SpatialBasis,
}

const PRESETS: &[Preset] = &[
    Preset { name: "linear-heat", flux: "zero", diffusion: "identity", noise: "zero", basis: SpatialBasis::Uniform },
    Preset { name: "heat-additive", flux: "zero", diffusion: "identity", noise: "additive", basis: SpatialBasis::Fourier },
    Preset { name: "heat-sin", flux: "zero", diffusion: "identity", noise: "sin", basis: SpatialBasis::Uniform },
    Preset { name: "heat-linear", flux: "zero", diffusion: "identity", noise: "linear", basis: SpatialBasis::Uniform },
    Preset { name: "quasilinear-sin", flux: "burgers", diffusion: "sin", noise: "sin", basis: SpatialBasis::Uniform },
    Preset { name: "quasilinear-additive", flux: "burgers", diffusion: "sin", noise: "additive", basis: SpatialBasis::Fourier },
];

const KEYS: &[&str] = &["dim", "flux", "diffusion", "noise", "modes", "decay", "power", "basis", "cap", "amp", "scale"];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

fn num(params: &BTreeMap<String, String>, key: &'static str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v.trim().parse::<f64>().map_err(|_| Error::InvalidParameter {
            name: key,
            reason: format!("expected a number, got `{v}`"),
        }),
    }
}

/// Build a named set. Recognised keys: `dim`, `flux` (zero|burgers),
/// `diffusion` (identity|sin), `noise` (zero|additive|sin|linear|square),
/// `modes`, `decay` (geometric ratio, default 2), `power` (use `k^{-power}`
/// instead), `basis` (uniform|fourier), `cap`, `amp`, `scale`.
pub fn build_set(name: &str, params: &BTreeMap<String, String>) -> Result<CoefficientSet> {
    let preset = PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownCoefficient(name.to_string()))?;
    if let Some(k) = params.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(Error::UnknownCoefficient(format!("parameter `{k}` for set `{name}`")));
    }
    let dim = num(params, "dim", 1.0)? as usize;
    let get = |k: &str, d: &'static str| params.get(k).map(String::as_str).unwrap_or(d).to_string();

    let flux = match get("flux", preset.flux).as_str() {
        "zero" => FluxSpec::zero(),
        "burgers" => FluxSpec::burgers(dim, num(params, "cap", 10.0)?)?,
        other => return Err(Error::UnknownCoefficient(format!("flux `{other}`"))),
    };
    let diffusion = match get("diffusion", preset.diffusion).as_str() {
        "identity" => DiffusionSpec::identity(),
        "sin" => DiffusionSpec::sin_modulated(num(params, "amp", 0.5)?)?,
        other => return Err(Error::UnknownCoefficient(format!("diffusion `{other}`"))),
    };
    let modes = num(params, "modes", 8.0)?;
    if !(modes >= 1.0 && modes.fract() == 0.0 && modes <= 64.0) {
        return Err(Error::InvalidParameter {
            name: "modes",
            reason: format!("must be an integer in 1..=64 (got {modes})"),
        });
    }
    let modes = modes as usize;
    let scale = num(params, "scale", 1.0)?;
    let mut amplitudes = match params.get("power") {
        Some(_) => {
            let s = num(params, "power", 1.5)?;
            power_amplitudes(modes, s)
        }
        None => {
            let ratio = num(params, "decay", 2.0)?;
            if !(ratio > 1.0) {
                return Err(Error::InvalidParameter {
                    name: "decay",
                    reason: format!("geometric ratio must exceed 1 (got {ratio})"),
                });
            }
            geometric_amplitudes(modes, ratio)
        }
    };
    amplitudes.iter_mut().for_each(|q| *q *= scale);
    let basis = match params.get("basis").map(String::as_str) {
        None => preset.basis,
        Some("uniform") => SpatialBasis::Uniform,
        Some("fourier") => SpatialBasis::Fourier,
        Some(other) => return Err(Error::UnknownCoefficient(format!("basis `{other}`"))),
    };
    let shape = match get("noise", preset.noise).as_str() {
        "zero" => ScalarMap::Zero,
        "additive" => ScalarMap::Constant(1.0),
        "sin" => ScalarMap::Sine { offset: 0.0, amp: 1.0 },
        "linear" => ScalarMap::Linear(1.0),
        "square" => ScalarMap::Square(1.0),
        other => return Err(Error::UnknownCoefficient(format!("noise `{other}`"))),
    };
    let noise = if shape.is_zero() {
        NoiseSpec::zero()
    } else {
        NoiseSpec::new(shape, amplitudes, basis)?
    };
    CoefficientSet::new(name, dim, flux, diffusion, noise)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_builds_and_validates() {
        for name in preset_names() {
            for dim in ["1", "2"] {
                let p = BTreeMap::from([("dim".to_string(), dim.to_string())]);
                let set = build_set(name, &p).unwrap();
                assert_eq!(set.dim, dim.parse::<usize>().unwrap());
                super::super::validate_h1(&set, 300, 7).unwrap_or_else(|e| panic!("{name}: {e}"));
                super::super::validate_h2(&set.noise, 100, 7).unwrap_or_else(|e| panic!("{name}: {e}"));
            }
        }
    }

    #[test]
    fn overrides_and_errors() {
        let p = BTreeMap::from([
            ("modes".to_string(), "3".to_string()),
            ("power".to_string(), "2".to_string()),
            ("basis".to_string(), "uniform".to_string()),
        ]);
        let s = build_set("heat-sin", &p).unwrap();
        assert_eq!(s.noise.amplitudes, vec![1.0, 0.25, 1.0 / 9.0]);
        assert!(matches!(build_set("nope", &BTreeMap::new()), Err(Error::UnknownCoefficient(_))));
        let bad = BTreeMap::from([("colour".to_string(), "red".to_string())]);
        assert!(build_set("heat-sin", &bad).is_err());
        let bad = BTreeMap::from([("modes".to_string(), "x".to_string())]);
        assert!(matches!(build_set("heat-sin", &bad), Err(Error::InvalidParameter { name: "modes", .. })));
        let sq = BTreeMap::from([("noise".to_string(), "square".to_string())]);
        let set = build_set("heat-sin", &sq).unwrap();
        assert!(set.noise.growth.is_infinite());
    }
}
