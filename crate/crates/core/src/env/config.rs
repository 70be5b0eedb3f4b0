use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::hh::HhParams;
use crate::error::{Error, Result};

/// Neurons per population.
pub const POP_SIZE: usize = 10;
/// Number of simulated populations.
pub const N_POPULATIONS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PopulationId {
    CtxE,
    CtxI,
    StrD1,
    StrD2,
    #[serde(rename = "STN")]
    Stn,
    #[serde(rename = "GPe")]
    Gpe,
    #[serde(rename = "GPi")]
    Gpi,
    Thal,
}

impl PopulationId {
    pub const ALL: [PopulationId; N_POPULATIONS] = [
        PopulationId::CtxE,
        PopulationId::CtxI,
        PopulationId::StrD1,
        PopulationId::StrD2,
        PopulationId::Stn,
        PopulationId::Gpe,
        PopulationId::Gpi,
        PopulationId::Thal,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PopulationId::CtxE => "CtxE",
            PopulationId::CtxI => "CtxI",
            PopulationId::StrD1 => "StrD1",
            PopulationId::StrD2 => "StrD2",
            PopulationId::Stn => "STN",
            PopulationId::Gpe => "GPe",
            PopulationId::Gpi => "GPi",
            PopulationId::Thal => "Thal",
        }
    }
}

impl fmt::Display for PopulationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Excitatory,
    Inhibitory,
}

/// The fixed cortico-basal-ganglia-thalamic circuit.
pub const CIRCUIT: [(PopulationId, PopulationId, Sign); 11] = {
    use PopulationId::*;
    use Sign::*;
    [
        (CtxE, CtxI, Excitatory),
        (CtxI, CtxE, Inhibitory),
        (CtxE, StrD1, Excitatory),
        (CtxE, StrD2, Excitatory),
        (StrD1, Gpi, Inhibitory),
        (StrD2, Gpe, Inhibitory),
        (Gpe, Stn, Inhibitory),
        (Stn, Gpe, Excitatory),
        (Stn, Gpi, Excitatory),
        (Gpi, Thal, Inhibitory),
        (Thal, CtxE, Excitatory),
    ]
};

/// Sign the fixed circuit assigns to `src -> dst`, if the edge exists.
pub fn circuit_sign(src: PopulationId, dst: PopulationId) -> Option<Sign> {
    CIRCUIT
        .iter()
        .find(|(s, d, _)| *s == src && *d == dst)
        .map(|&(_, _, sign)| sign)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Healthy,
    Parkinsonian,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "healthy" => Ok(Mode::Healthy),
            "parkinsonian" | "pd" => Ok(Mode::Parkinsonian),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// One projection between populations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionSpec {
    pub src: PopulationId,
    pub dst: PopulationId,
    pub sign: Sign,
    /// Conductance increment per presynaptic spike (mS/cm²).
    pub weight: f64,
    /// Probability that a given neuron pair is wired; 1 means all-to-all.
    #[serde(default = "one")]
    pub probability: f64,
    /// Axonal plus synaptic delay (ms).
    #[serde(default)]
    pub delay: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub id: PopulationId,
    /// Constant depolarising bias current (µA/cm²).
    pub bias: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynapseParams {
    pub tau_exc: f64,
    pub tau_inh: f64,
    pub e_exc: f64,
    pub e_inh: f64,
    /// Upward crossing of this voltage counts as a presynaptic spike.
    pub spike_threshold: f64,
    pub refractory_ms: f64,
}

impl Default for SynapseParams {
    fn default() -> Self {
        Self {
            tau_exc: 5.0,
            tau_inh: 8.0,
            e_exc: 0.0,
            e_inh: -80.0,
            spike_threshold: 0.0,
            refractory_ms: 1.0,
        }
    }
}

/// Weight multipliers that turn the healthy circuit parkinsonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParkinsonianGains {
    pub stn_to_gpe: f64,
    pub gpe_to_stn: f64,
    pub d2_to_gpe: f64,
}

impl Default for ParkinsonianGains {
    fn default() -> Self {
        Self {
            stn_to_gpe: 6.0,
            gpe_to_stn: 15.0,
            d2_to_gpe: 3.0,
        }
    }
}

/// DBS pulse train delivered to the STN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StimConfig {
    /// µA/cm²
    pub pulse_amplitude: f64,
    /// ms
    pub pulse_width: f64,
    /// Hz
    pub carrier_freq: f64,
}

impl Default for StimConfig {
    fn default() -> Self {
        Self {
            pulse_amplitude: 500.0,
            pulse_width: 0.3,
            carrier_freq: 50.0,
        }
    }
}

impl StimConfig {
    pub fn with_freq(self, carrier_freq: f64) -> Self {
        Self { carrier_freq, ..self }
    }

    pub fn period_ms(&self) -> f64 {
        1000.0 / self.carrier_freq
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_freq.is_finite() && self.carrier_freq > 0.0) {
            return Err(Error::Config(format!(
                "carrier frequency must be positive, got {}",
                self.carrier_freq
            )));
        }
        if !(self.pulse_width > 0.0 && self.pulse_width < self.period_ms()) {
            return Err(Error::Config(format!(
                "pulse width {} ms must lie in (0, {} ms)",
                self.pulse_width,
                self.period_ms()
            )));
        }
        if !self.pulse_amplitude.is_finite() {
            return Err(Error::NonFinite("pulse amplitude"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub hh: HhParams,
    pub synapse: SynapseParams,
    /// Integration step (ms).
    pub dt: f64,
    /// Duration of one environment step (ms).
    pub step_ms: f64,
    /// GPi recording rate (Hz).
    pub sample_rate: f64,
    /// Half-width of the uniform per-neuron bias spread (µA/cm²).
    pub bias_jitter: f64,
    /// Standard deviation of the white-noise current (µA/cm² · ms^½).
    pub noise_std: f64,
    pub parkinsonian: ParkinsonianGains,
    pub populations: Vec<PopulationSpec>,
    pub connections: Vec<ConnectionSpec>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        use PopulationId::*;
        use Sign::*;
        let pop = |id, bias| PopulationSpec { id, bias };
        let edge = |src, dst, sign, weight, probability, delay| ConnectionSpec {
            src,
            dst,
            sign,
            weight,
            probability,
            delay,
        };
        Self {
            hh: HhParams::default(),
            synapse: SynapseParams::default(),
            dt: 0.02,
            step_ms: 2.0,
            sample_rate: 2000.0,
            bias_jitter: 3.0,
            noise_std: 1.5,
            parkinsonian: ParkinsonianGains::default(),
            populations: vec![
                pop(CtxE, 8.0),
                pop(CtxI, 5.0),
                pop(StrD1, 5.0),
                pop(StrD2, 5.0),
                pop(Stn, 10.0),
                pop(Gpe, 3.0),
                pop(Gpi, -12.0),
                pop(Thal, 8.0),
            ],
            connections: vec![
                edge(CtxE, CtxI, Excitatory, 0.02, 0.5, 1.0),
                edge(CtxI, CtxE, Inhibitory, 0.02, 0.5, 1.0),
                edge(CtxE, StrD1, Excitatory, 0.02, 0.5, 2.0),
                edge(CtxE, StrD2, Excitatory, 0.02, 0.5, 2.0),
                edge(StrD1, Gpi, Inhibitory, 0.02, 1.0, 2.0),
                edge(StrD2, Gpe, Inhibitory, 0.02, 1.0, 2.0),
                edge(Gpe, Stn, Inhibitory, 0.05, 1.0, 8.0),
                edge(Stn, Gpe, Excitatory, 0.05, 1.0, 2.0),
                edge(Stn, Gpi, Excitatory, 0.03, 1.0, 2.0),
                edge(Gpi, Thal, Inhibitory, 0.02, 1.0, 2.0),
                edge(Thal, CtxE, Excitatory, 0.02, 0.5, 2.0),
            ],
        }
    }
}

impl NetworkConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn bias(&self, id: PopulationId) -> f64 {
        self.populations
            .iter()
            .find(|p| p.id == id)
            .map(|p| p.bias)
            .unwrap_or(0.0)
    }

    /// Substeps per environment step.
    pub fn substeps_per_step(&self) -> usize {
        (self.step_ms / self.dt).round() as usize
    }

    /// Substeps between two GPi recordings.
    pub fn record_stride(&self) -> usize {
        (1000.0 / self.sample_rate / self.dt).round() as usize
    }

    /// GPi samples recorded per environment step.
    pub fn samples_per_step(&self) -> usize {
        self.substeps_per_step() / self.record_stride()
    }

    pub fn validate(&self) -> Result<()> {
        for id in PopulationId::ALL {
            let count = self.populations.iter().filter(|p| p.id == id).count();
            if count != 1 {
                return Err(Error::Config(format!(
                    "population {id} must appear exactly once, found {count}"
                )));
            }
        }
        if !(self.dt > 0.0 && self.step_ms > 0.0 && self.sample_rate > 0.0) {
            return Err(Error::Config(
                "dt, step_ms and sample_rate must be positive".into(),
            ));
        }
        let sub = self.step_ms / self.dt;
        if (sub - sub.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "step {} ms is not a whole number of {} ms substeps",
                self.step_ms, self.dt
            )));
        }
        let stride = 1000.0 / self.sample_rate / self.dt;
        if (stride - stride.round()).abs() > 1e-9 || stride.round() < 1.0 {
            return Err(Error::Config(format!(
                "sample rate {} Hz is not a whole-substep stride",
                self.sample_rate
            )));
        }
        if !self.substeps_per_step().is_multiple_of(self.record_stride()) {
            return Err(Error::Config(
                "step is not a whole number of sample periods".into(),
            ));
        }
        if self.bias_jitter < 0.0 || self.noise_std < 0.0 {
            return Err(Error::Config(
                "bias_jitter and noise_std must be non-negative".into(),
            ));
        }
        let mut seen = Vec::new();
        for c in &self.connections {
            match circuit_sign(c.src, c.dst) {
                None => {
                    return Err(Error::Config(format!(
                        "{} -> {} is not part of the circuit",
                        c.src, c.dst
                    )))
                }
                Some(sign) if sign != c.sign => {
                    return Err(Error::Config(format!(
                        "{} -> {} must be {:?}, config says {:?}",
                        c.src, c.dst, sign, c.sign
                    )))
                }
                Some(_) => {}
            }
            if seen.contains(&(c.src, c.dst)) {
                return Err(Error::Config(format!("duplicate edge {} -> {}", c.src, c.dst)));
            }
            seen.push((c.src, c.dst));
            if !(0.0..=1.0).contains(&c.probability) || c.probability == 0.0 {
                return Err(Error::Config(format!(
                    "{} -> {}: probability {} outside (0, 1]",
                    c.src, c.dst, c.probability
                )));
            }
            if !(c.weight >= 0.0 && c.weight.is_finite()) || c.delay < 0.0 {
                return Err(Error::Config(format!(
                    "{} -> {}: weight and delay must be non-negative",
                    c.src, c.dst
                )));
            }
        }
        Ok(())
    }
}
