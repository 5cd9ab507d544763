//! Dimensionless problem description: reference scales, wall layers,
//! boundary forcing signals and initial fields.
//!
//! All solver-facing quantities are dimensionless. Space is scaled by the
//! wall thickness L_ref, time by t_ref, temperature by T_ref and vapour
//! pressure by P_v,ref; transport coefficients are scaled by k_M,ref and
//! k_T,ref. Surface films enter through Biot numbers
//!
//! ```text
//! Bi_M = h_M L_ref / k_M,ref
//! Bi_T = h_T L_ref / k_T,ref
//! Bi_TM = h_M L_v L_ref P_v,ref / (k_T,ref T_ref)
//! ```
//!
//! and driving rain through the dimensionless surface flux
//! g*_inf = g_inf L_ref / (k_M,ref P_v,ref) plus its sensible-heat load
//! H*_l g*_inf, where H_l = c_w (T_inf - 273 K) is the rain enthalpy.
//!
//! Each layer carries an affine map between its slab [x*_a, x*_b] and the
//! spectral interval [-1, 1] with metric s = 2 / (x*_b - x*_a); spatial
//! derivatives of the spectral representation pick up one factor of s per
//! order.

use serde::{Deserialize, Serialize};

use crate::materials::{saturation_pressure, DimlessCoefficientSet, WaterProperties};
use crate::{Error, Result};

/// Temperature origin of the rain enthalpy H_l = c_w (T - 273 K).
pub const ENTHALPY_REF_K: f64 = 273.0;

/// Reference quantities tying the dimensionless problem to SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScales {
    /// t_ref [s].
    #[serde(rename = "time_ref_s")]
    pub time_s: f64,
    /// T_ref [K].
    #[serde(rename = "temperature_ref_k")]
    pub temperature_k: f64,
    /// P_v,ref [Pa].
    #[serde(rename = "vapour_pressure_ref_pa")]
    pub vapour_pressure_pa: f64,
    /// L_ref [m], the total wall thickness.
    #[serde(rename = "length_ref_m")]
    pub length_m: f64,
    /// k_M,ref [s].
    #[serde(rename = "moisture_transfer_ref_s")]
    pub moisture_transfer: f64,
    /// k_T,ref [W/(m K)].
    #[serde(rename = "thermal_conductivity_ref_w_per_m_k")]
    pub thermal_conductivity: f64,
}

impl ReferenceScales {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("time_ref_s", self.time_s),
            ("temperature_ref_k", self.temperature_k),
            ("vapour_pressure_ref_pa", self.vapour_pressure_pa),
            ("length_ref_m", self.length_m),
            ("moisture_transfer_ref_s", self.moisture_transfer),
            (
                "thermal_conductivity_ref_w_per_m_k",
                self.thermal_conductivity,
            ),
        ];
        for (name, value) in fields {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Config(format!(
                    "reference scale {name} must be positive, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// One sinusoidal forcing term amplitude sin(2 pi t / period + phase)^power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinTerm {
    pub amplitude: f64,
    /// Period in t* units.
    pub period: f64,
    /// Integer exponent; even powers give non-negative pulses.
    #[serde(default = "one_u32")]
    pub power: u32,
    #[serde(default)]
    pub phase: f64,
}

fn one_u32() -> u32 {
    1
}

/// Time signal driving one ambient quantity, in dimensionless units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AmbientSignal {
    Constant {
        value: f64,
    },
    /// base + sum of sinusoidal terms.
    Sinusoids {
        base: f64,
        terms: Vec<SinTerm>,
    },
    /// base + amplitude (1 + tanh((t - center)/width)) / 2.
    SmoothStep {
        base: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Relative-humidity signal times P_s(u(t) T_ref) / P_v,ref: ambient
    /// vapour pressure following the ambient temperature's saturation curve.
    HumiditySaturation {
        relative_humidity: Box<AmbientSignal>,
        temperature: Box<AmbientSignal>,
    },
    /// Piecewise-linear table in t*; queries outside the span are errors.
    Table {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

impl AmbientSignal {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::Config("constant signal must be finite".into()));
                }
            }
            Self::Sinusoids { base, terms } => {
                if !base.is_finite() {
                    return Err(Error::Config("sinusoid base must be finite".into()));
                }
                for t in terms {
                    if !(t.period > 0.0) {
                        return Err(Error::Config(format!(
                            "sinusoid period must be positive, got {}",
                            t.period
                        )));
                    }
                }
            }
            Self::SmoothStep { width, .. } => {
                if !(width > &0.0) {
                    return Err(Error::Config("smooth step needs positive width".into()));
                }
            }
            Self::HumiditySaturation {
                relative_humidity,
                temperature,
            } => {
                relative_humidity.validate()?;
                temperature.validate()?;
            }
            Self::Table { times, values } => {
                if times.len() != values.len() {
                    return Err(Error::Config(format!(
                        "table lengths differ: {} times vs {} values",
                        times.len(),
                        values.len()
                    )));
                }
                if times.len() < 2 {
                    return Err(Error::Config("table needs at least two samples".into()));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config("table times must increase strictly".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config("table values must be finite".into()));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, scales: &ReferenceScales) -> Result<f64> {
        match self {
            Self::Constant { value } => Ok(*value),
            Self::Sinusoids { base, terms } => {
                let mut acc = *base;
                for term in terms {
                    let s = (2.0 * std::f64::consts::PI * t / term.period + term.phase).sin();
                    acc += term.amplitude * s.powi(term.power as i32);
                }
                Ok(acc)
            }
            Self::SmoothStep {
                base,
                amplitude,
                center,
                width,
            } => Ok(base + amplitude * 0.5 * (1.0 + ((t - center) / width).tanh())),
            Self::HumiditySaturation {
                relative_humidity,
                temperature,
            } => {
                let rh = relative_humidity.eval(t, scales)?;
                let u = temperature.eval(t, scales)?;
                let p_s = saturation_pressure(u * scales.temperature_k)?;
                Ok(rh * p_s / scales.vapour_pressure_pa)
            }
            Self::Table { times, values } => {
                let (t0, t1) = (times[0], *times.last().unwrap());
                // absorb end-of-horizon round-off, reject true extrapolation
                let slack = 1e-9 * (t1 - t0).max(1.0);
                if t < t0 - slack || t > t1 + slack {
                    return Err(Error::Config(format!(
                        "forcing table queried at t* = {t} outside [{t0}, {t1}]"
                    )));
                }
                let t = t.clamp(t0, t1);
                let idx = match times.binary_search_by(|probe| probe.total_cmp(&t)) {
                    Ok(i) => i.min(times.len() - 2),
                    Err(i) => i.saturating_sub(1).min(times.len() - 2),
                };
                let frac = (t - times[idx]) / (times[idx + 1] - times[idx]);
                Ok(values[idx] + frac * (values[idx + 1] - values[idx]))
            }
        }
    }
}

/// Surface coupling: film transfer through Biot numbers, or prescribed trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryCondition {
    Robin { bi_m: f64, bi_t: f64, bi_tm: f64 },
    Dirichlet,
}

/// Everything the solvers need about one wall face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryForcing {
    pub condition: BoundaryCondition,
    /// u_inf(t*).
    pub ambient_temperature: AmbientSignal,
    /// v_inf(t*).
    pub ambient_vapour_pressure: AmbientSignal,
    /// g*_inf(t*) >= 0; None for rain-free faces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rain: Option<AmbientSignal>,
}

impl BoundaryForcing {
    pub fn validate(&self) -> Result<()> {
        if let BoundaryCondition::Robin { bi_m, bi_t, bi_tm } = self.condition {
            for (name, value) in [("Bi_M", bi_m), ("Bi_T", bi_t), ("Bi_TM", bi_tm)] {
                if !value.is_finite() || value < 0.0 {
                    return Err(Error::Config(format!(
                        "{name} must be finite and non-negative, got {value}"
                    )));
                }
            }
        }
        self.ambient_temperature.validate()?;
        self.ambient_vapour_pressure.validate()?;
        if let Some(rain) = &self.rain {
            rain.validate()?;
        }
        Ok(())
    }

    /// Ambient (u_inf, v_inf) at t*.
    pub fn ambient(&self, t: f64, scales: &ReferenceScales) -> Result<(f64, f64)> {
        Ok((
            self.ambient_temperature.eval(t, scales)?,
            self.ambient_vapour_pressure.eval(t, scales)?,
        ))
    }

    /// Dimensionless rain flux g*_inf at t*; zero when no rain is attached.
    pub fn rain_flux(&self, t: f64, scales: &ReferenceScales) -> Result<f64> {
        match &self.rain {
            Some(signal) => signal.eval(t, scales),
            None => Ok(0.0),
        }
    }

    /// Dimensionless rain enthalpy H*_l at t*, following the ambient
    /// temperature: H_l = c_w (u_inf T_ref - 273 K), scaled by
    /// k_M,ref P_v,ref / (k_T,ref T_ref).
    pub fn liquid_enthalpy(
        &self,
        t: f64,
        scales: &ReferenceScales,
        water: &WaterProperties,
    ) -> Result<f64> {
        let u = self.ambient_temperature.eval(t, scales)?;
        let h_l = water.specific_heat * (u * scales.temperature_k - ENTHALPY_REF_K);
        Ok(h_l * scales.moisture_transfer * scales.vapour_pressure_pa
            / (scales.thermal_conductivity * scales.temperature_k))
    }
}

/// Film transfer coefficients in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilmCoefficients {
    /// h_M [s/m].
    pub h_m_s_per_m: f64,
    /// h_T [W/(m^2 K)].
    pub h_t_w_per_m2_k: f64,
}

/// Biot numbers of a surface film.
pub fn biot_numbers(
    film: &FilmCoefficients,
    scales: &ReferenceScales,
    water: &WaterProperties,
) -> BoundaryCondition {
    BoundaryCondition::Robin {
        bi_m: film.h_m_s_per_m * scales.length_m / scales.moisture_transfer,
        bi_t: film.h_t_w_per_m2_k * scales.length_m / scales.thermal_conductivity,
        bi_tm: film.h_m_s_per_m * water.latent_heat * scales.length_m * scales.vapour_pressure_pa
            / (scales.thermal_conductivity * scales.temperature_k),
    }
}

/// One material slab with its dimensionless extent and coefficient closures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// [x*_a, x*_b] within the unit wall.
    pub extent: (f64, f64),
    pub coeffs: DimlessCoefficientSet,
}

impl Layer {
    pub fn width(&self) -> f64 {
        self.extent.1 - self.extent.0
    }

    /// d xbar / d x* = 2 / width.
    pub fn metric(&self) -> f64 {
        2.0 / self.width()
    }

    /// Affine map x* -> xbar in [-1, 1]; positions outside the slab (beyond
    /// round-off) are rejected.
    pub fn to_spectral(&self, x_star: f64) -> Result<f64> {
        let (a, b) = self.extent;
        let slack = 64.0 * f64::EPSILON * (1.0 + b.abs());
        if x_star < a - slack || x_star > b + slack {
            return Err(Error::OutsideLayer { x: x_star, a, b });
        }
        let xbar = (2.0 * x_star - a - b) / (b - a);
        Ok(xbar.clamp(-1.0, 1.0))
    }

    /// Inverse affine map xbar -> x*.
    pub fn from_spectral(&self, xbar: f64) -> f64 {
        let (a, b) = self.extent;
        0.5 * (a + b + xbar * (b - a))
    }
}

/// Initial dimensionless field over the whole wall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialField {
    Uniform {
        value: f64,
    },
    /// Ascending coefficients in the global coordinate x*.
    Polynomial {
        coeffs: Vec<f64>,
    },
}

impl InitialField {
    pub fn eval(&self, x_star: f64) -> f64 {
        match self {
            Self::Uniform { value } => *value,
            Self::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x_star + c),
        }
    }
}

/// Fully scaled problem consumed by both solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessProblem {
    /// Layers tiling [0, 1] left to right.
    pub layers: Vec<Layer>,
    pub left: BoundaryForcing,
    pub right: BoundaryForcing,
    /// u_0(x*).
    pub initial_temperature: InitialField,
    /// v_0(x*).
    pub initial_vapour_pressure: InitialField,
    /// tau*, the integration horizon in t* units.
    pub horizon: f64,
    pub scales: ReferenceScales,
    pub water: WaterProperties,
}

// WaterProperties carries no serde derive upstream (it is a plain constants
// struct); (de)serialize it here through a mirror with unit-bearing names.
impl Serialize for WaterProperties {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WaterMirror {
            specific_heat_j_per_kg_k: self.specific_heat,
            latent_heat_j_per_kg: self.latent_heat,
            gas_constant_j_per_kg_k: self.gas_constant,
            density_kg_per_m3: self.density,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for WaterProperties {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = WaterMirror::deserialize(d)?;
        Ok(WaterProperties {
            specific_heat: m.specific_heat_j_per_kg_k,
            latent_heat: m.latent_heat_j_per_kg,
            gas_constant: m.gas_constant_j_per_kg_k,
            density: m.density_kg_per_m3,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct WaterMirror {
    specific_heat_j_per_kg_k: f64,
    latent_heat_j_per_kg: f64,
    gas_constant_j_per_kg_k: f64,
    density_kg_per_m3: f64,
}

impl DimensionlessProblem {
    pub fn validate(&self) -> Result<()> {
        self.scales.validate()?;
        if self.layers.is_empty() {
            return Err(Error::Config("problem needs at least one layer".into()));
        }
        let tol = 1e-12;
        if (self.layers[0].extent.0).abs() > tol {
            return Err(Error::Config(format!(
                "first layer must start at x* = 0, starts at {}",
                self.layers[0].extent.0
            )));
        }
        for (idx, layer) in self.layers.iter().enumerate() {
            if !(layer.width() > tol) {
                return Err(Error::Config(format!(
                    "layer {idx} has non-positive width {}",
                    layer.width()
                )));
            }
            if idx > 0 && (layer.extent.0 - self.layers[idx - 1].extent.1).abs() > tol {
                return Err(Error::Config(format!(
                    "layer {idx} does not join its neighbour: {} vs {}",
                    layer.extent.0,
                    self.layers[idx - 1].extent.1
                )));
            }
        }
        let end = self.layers.last().unwrap().extent.1;
        if (end - 1.0).abs() > tol {
            return Err(Error::Config(format!(
                "layers must tile [0, 1], last ends at {end}"
            )));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::Config(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        self.left.validate()?;
        self.right.validate()?;
        Ok(())
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Index of the layer owning x*; interface points belong to the layer on
    /// their left, matching the slab decomposition [x_a, x_int] u [x_int, x_b].
    pub fn layer_of(&self, x_star: f64) -> Result<usize> {
        if !(0.0..=1.0 + 1e-12).contains(&x_star) || x_star < -1e-12 {
            return Err(Error::OutsideLayer {
                x: x_star,
                a: 0.0,
                b: 1.0,
            });
        }
        for (idx, layer) in self.layers.iter().enumerate() {
            if x_star <= layer.extent.1 + 1e-12 {
                return Ok(idx);
            }
        }
        Ok(self.layers.len() - 1)
    }
}
