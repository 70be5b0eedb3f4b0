use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{Mode, NetworkConfig, PopulationId, Sign, StimConfig, N_POPULATIONS, POP_SIZE};
use super::hh::{hh_derivatives, resting_potential, Gates, GatesDerivative, HhParams};
use crate::error::Result;

pub const N_NEURONS: usize = N_POPULATIONS * POP_SIZE;

/// Binary stimulation decision for one environment step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stimulate {
    Off,
    On,
}

impl Stimulate {
    pub fn from_index(a: usize) -> Self {
        if a == 0 {
            Stimulate::Off
        } else {
            Stimulate::On
        }
    }

    pub fn index(self) -> usize {
        match self {
            Stimulate::Off => 0,
            Stimulate::On => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuronState {
    pub gates: Gates<f64>,
    /// One conductance (mS/cm²) per projection into this neuron's population.
    pub syn: Vec<f64>,
}

/// Wiring and in-flight spikes of one projection.
#[derive(Debug, Clone, PartialEq)]
struct Projection {
    src: PopulationId,
    dst: PopulationId,
    weight: f64,
    e_rev: f64,
    decay_half: f64,
    decay_full: f64,
    delay_steps: usize,
    /// Slot of this projection inside the post-synaptic `syn` vector.
    slot: usize,
    /// `connected[pre * POP_SIZE + post]`
    connected: Vec<bool>,
    /// Ring of pending conductance increments, `ring_len * POP_SIZE`.
    pending: Vec<f64>,
}

impl Projection {
    fn ring_len(&self) -> usize {
        self.delay_steps + 1
    }
}

/// GPi membrane potentials recorded during one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct GpiTrace {
    /// Simulation time (ms) of the first sample.
    pub start_ms: f64,
    /// Sample spacing (ms).
    pub sample_ms: f64,
    /// `samples[k][j]`: neuron `j` at sample `k`.
    pub samples: Vec<[f64; POP_SIZE]>,
}

impl GpiTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_ms(&self, k: usize) -> f64 {
        self.start_ms + k as f64 * self.sample_ms
    }

    /// CSV rows `time_ms,neuron_0..neuron_9` (header included when `header`).
    pub fn to_csv(&self, header: bool) -> String {
        let mut out = String::new();
        if header {
            out.push_str("time_ms");
            for j in 0..POP_SIZE {
                out.push_str(&format!(",neuron_{j}"));
            }
            out.push('\n');
        }
        for (k, row) in self.samples.iter().enumerate() {
            out.push_str(&format!("{:.3}", self.time_ms(k)));
            for v in row {
                out.push_str(&format!(",{v:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Full state of the simulated network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    config: NetworkConfig,
    mode: Mode,
    seed: u64,
    neurons: Vec<NeuronState>,
    bias: Vec<f64>,
    projections: Vec<Projection>,
    /// Projections leaving each population.
    outgoing: Vec<Vec<usize>>,
    /// Substeps elapsed since reset.
    substep: u64,
    steps: u64,
    refractory_until: Vec<u64>,
    /// Active DBS pulse as a half-open substep interval.
    pulse: Option<(u64, u64)>,
    rng: ChaCha8Rng,
    spikes: Vec<u64>,
    v_range: (f64, f64),
    gates_in_unit: bool,
}

#[inline]
fn neuron_index(pop: PopulationId, i: usize) -> usize {
    pop.index() * POP_SIZE + i
}

impl NetworkState {
    /// Builds a network at rest. Stochastic wiring and per-neuron bias
    /// offsets are drawn once from `seed`.
    pub fn new(config: &NetworkConfig, seed: u64, mode: Mode) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let syn_cfg = config.synapse;
        let dt = config.dt;

        let mut slots = [0usize; N_POPULATIONS];
        let mut projections = Vec::with_capacity(config.connections.len());
        let mut outgoing = vec![Vec::new(); N_POPULATIONS];
        for c in &config.connections {
            let (tau, e_rev) = match c.sign {
                Sign::Excitatory => (syn_cfg.tau_exc, syn_cfg.e_exc),
                Sign::Inhibitory => (syn_cfg.tau_inh, syn_cfg.e_inh),
            };
            let gain = match (mode, c.src, c.dst) {
                (Mode::Parkinsonian, PopulationId::Stn, PopulationId::Gpe) => config.parkinsonian.stn_to_gpe,
                (Mode::Parkinsonian, PopulationId::Gpe, PopulationId::Stn) => config.parkinsonian.gpe_to_stn,
                (Mode::Parkinsonian, PopulationId::StrD2, PopulationId::Gpe) => config.parkinsonian.d2_to_gpe,
                _ => 1.0,
            };
            let connected: Vec<bool> = (0..POP_SIZE * POP_SIZE)
                .map(|_| c.probability >= 1.0 || rng.random::<f64>() < c.probability)
                .collect();
            let delay_steps = (c.delay / dt).round() as usize;
            let slot = slots[c.dst.index()];
            slots[c.dst.index()] += 1;
            outgoing[c.src.index()].push(projections.len());
            projections.push(Projection {
                src: c.src,
                dst: c.dst,
                weight: c.weight * gain,
                e_rev,
                decay_half: (-0.5 * dt / tau).exp(),
                decay_full: (-dt / tau).exp(),
                delay_steps,
                slot,
                connected,
                pending: vec![0.0; (delay_steps + 1) * POP_SIZE],
            });
        }

        let rest = Gates::steady_state(resting_potential(&config.hh));
        let mut neurons = Vec::with_capacity(N_NEURONS);
        let mut bias = Vec::with_capacity(N_NEURONS);
        for pop in PopulationId::ALL {
            let base = config.bias(pop);
            for _ in 0..POP_SIZE {
                neurons.push(NeuronState {
                    gates: rest,
                    syn: vec![0.0; slots[pop.index()]],
                });
                let jitter = if config.bias_jitter > 0.0 {
                    rng.random_range(-config.bias_jitter..=config.bias_jitter)
                } else {
                    0.0
                };
                bias.push(base + jitter);
            }
        }

        Ok(Self {
            config: config.clone(),
            mode,
            seed,
            neurons,
            bias,
            projections,
            outgoing,
            substep: 0,
            steps: 0,
            refractory_until: vec![0; N_NEURONS],
            pulse: None,
            rng,
            spikes: vec![0; N_NEURONS],
            v_range: (rest.v, rest.v),
            gates_in_unit: true,
        })
    }

    /// Re-initialises neurons, wiring and rng as a fresh network.
    pub fn reset(&mut self, seed: u64, mode: Mode) -> Result<()> {
        *self = Self::new(&self.config, seed, mode)?;
        Ok(())
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Elapsed simulated time (ms).
    pub fn sim_clock(&self) -> f64 {
        self.steps as f64 * self.config.step_ms
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn neurons(&self) -> &[NeuronState] {
        &self.neurons
    }

    pub fn neuron(&self, pop: PopulationId, i: usize) -> &NeuronState {
        &self.neurons[neuron_index(pop, i)]
    }

    /// Lowest and highest membrane potential reached at any substep.
    pub fn voltage_range(&self) -> (f64, f64) {
        self.v_range
    }

    /// Whether every gating variable stayed in `[0, 1]` at every substep.
    pub fn gates_stayed_in_unit_interval(&self) -> bool {
        self.gates_in_unit
    }

    /// Spike counts per neuron since reset.
    pub fn spike_counts(&self) -> &[u64] {
        &self.spikes
    }

    pub fn population_spikes(&self, pop: PopulationId) -> u64 {
        let start = pop.index() * POP_SIZE;
        self.spikes[start..start + POP_SIZE].iter().sum()
    }

    /// Number of wired neuron pairs of the `src -> dst` projection.
    pub fn connection_count(&self, src: PopulationId, dst: PopulationId) -> Option<usize> {
        self.projections
            .iter()
            .find(|p| p.src == src && p.dst == dst)
            .map(|p| p.connected.iter().filter(|&&c| c).count())
    }

    /// Pulse onsets (ms) that fall inside the step starting at `start_ms`.
    pub fn pulse_onsets(stim: &StimConfig, start_ms: f64, step_ms: f64) -> Vec<f64> {
        let period = stim.period_ms();
        let mut k = (start_ms / period - 1e-9).ceil().max(0.0);
        let mut out = Vec::new();
        loop {
            let t = k * period;
            if t >= start_ms + step_ms - 1e-9 {
                break;
            }
            out.push(t);
            k += 1.0;
        }
        out
    }

    /// Advances one environment step and returns the recorded GPi trace.
    pub fn step(&mut self, action: Stimulate, stim: &StimConfig) -> GpiTrace {
        let n_sub = self.config.substeps_per_step();
        let stride = self.config.record_stride();
        let start_ms = self.sim_clock();
        let dt = self.config.dt;

        if action == Stimulate::On {
            for onset in Self::pulse_onsets(stim, start_ms, self.config.step_ms) {
                let first = (onset / dt - 1e-9).ceil() as u64;
                let width = ((stim.pulse_width / dt).round() as u64).max(1);
                self.pulse = Some((first, first + width));
            }
        }

        let mut samples = Vec::with_capacity(n_sub / stride);
        for k in 0..n_sub {
            self.substep_once(stim.pulse_amplitude);
            if (k + 1) % stride == 0 {
                let mut row = [0.0; POP_SIZE];
                for (j, v) in row.iter_mut().enumerate() {
                    *v = self.neurons[neuron_index(PopulationId::Gpi, j)].gates.v;
                }
                samples.push(row);
            }
        }
        self.steps += 1;
        let sample_ms = stride as f64 * dt;
        GpiTrace {
            start_ms: start_ms + sample_ms,
            sample_ms,
            samples,
        }
    }

    fn dbs_current(&self, amplitude: f64) -> f64 {
        match self.pulse {
            Some((a, b)) if self.substep >= a && self.substep < b => amplitude,
            _ => 0.0,
        }
    }

    fn substep_once(&mut self, amplitude: f64) {
        let dt = self.config.dt;
        let half = 0.5 * dt;
        let hh: HhParams = self.config.hh;
        let noise_scale = self.config.noise_std / dt.sqrt();
        let dbs = self.dbs_current(amplitude);

        // Per-projection reversal and decay factors, indexed by dst slot.
        let mut syn_e = [[0.0f64; 4]; N_POPULATIONS];
        let mut syn_dh = [[0.0f64; 4]; N_POPULATIONS];
        let mut syn_df = [[0.0f64; 4]; N_POPULATIONS];
        for p in &self.projections {
            syn_e[p.dst.index()][p.slot] = p.e_rev;
            syn_dh[p.dst.index()][p.slot] = p.decay_half;
            syn_df[p.dst.index()][p.slot] = p.decay_full;
        }

        let threshold = self.config.synapse.spike_threshold;
        let mut fired = [false; N_NEURONS];
        for pop in PopulationId::ALL {
            let pi = pop.index();
            let stim_here = if pop == PopulationId::Stn { dbs } else { 0.0 };
            for i in 0..POP_SIZE {
                let idx = pi * POP_SIZE + i;
                let noise = if noise_scale > 0.0 {
                    noise_scale * self.rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                let i_const = self.bias[idx] + stim_here + noise;
                let neuron = &mut self.neurons[idx];
                let g = neuron.gates;
                let syn = &neuron.syn;
                let n_syn = syn.len();
                let syn_current = |v: f64, decay: &[f64; 4]| -> f64 {
                    let mut acc = 0.0;
                    for s in 0..n_syn {
                        acc += syn[s] * decay[s] * (syn_e[pi][s] - v);
                    }
                    acc
                };
                let ones = [1.0; 4];
                let k1 = hh_derivatives(&g, i_const + syn_current(g.v, &ones), &hh);
                let g2 = g.axpy(&k1, half);
                let k2 = hh_derivatives(&g2, i_const + syn_current(g2.v, &syn_dh[pi]), &hh);
                let g3 = g.axpy(&k2, half);
                let k3 = hh_derivatives(&g3, i_const + syn_current(g3.v, &syn_dh[pi]), &hh);
                let g4 = g.axpy(&k3, dt);
                let k4 = hh_derivatives(&g4, i_const + syn_current(g4.v, &syn_df[pi]), &hh);
                let sum = GatesDerivative {
                    dv: k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv,
                    dm: k1.dm + 2.0 * k2.dm + 2.0 * k3.dm + k4.dm,
                    dh: k1.dh + 2.0 * k2.dh + 2.0 * k3.dh + k4.dh,
                    dn: k1.dn + 2.0 * k2.dn + 2.0 * k3.dn + k4.dn,
                };
                let next = g.axpy(&sum, dt / 6.0);
                for (x, decay) in neuron.syn.iter_mut().zip(&syn_df[pi]) {
                    *x *= decay;
                }
                if g.v < threshold && next.v >= threshold {
                    fired[idx] = true;
                }
                self.v_range.0 = self.v_range.0.min(next.v);
                self.v_range.1 = self.v_range.1.max(next.v);
                self.gates_in_unit &= [next.m, next.h, next.n].iter().all(|x| (0.0..=1.0).contains(x));
                neuron.gates = next;
            }
        }
        self.substep += 1;
        let now = self.substep;

        for p in &mut self.projections {
            let ring = p.ring_len();
            let base = (now as usize % ring) * POP_SIZE;
            let dst = p.dst.index() * POP_SIZE;
            for post in 0..POP_SIZE {
                let inc = std::mem::take(&mut p.pending[base + post]);
                if inc != 0.0 {
                    self.neurons[dst + post].syn[p.slot] += inc;
                }
            }
        }

        let refractory = (self.config.synapse.refractory_ms / dt).round() as u64;
        for idx in (0..N_NEURONS).filter(|&i| fired[i]) {
            if now < self.refractory_until[idx] {
                continue;
            }
            self.refractory_until[idx] = now + refractory;
            self.spikes[idx] += 1;
            let pop = idx / POP_SIZE;
            let pre = idx % POP_SIZE;
            for &pj in &self.outgoing[pop] {
                let p = &mut self.projections[pj];
                let dst = p.dst.index() * POP_SIZE;
                for post in 0..POP_SIZE {
                    if !p.connected[pre * POP_SIZE + post] {
                        continue;
                    }
                    if p.delay_steps == 0 {
                        self.neurons[dst + post].syn[p.slot] += p.weight;
                    } else {
                        let slot = ((now as usize + p.delay_steps) % p.ring_len()) * POP_SIZE;
                        p.pending[slot + post] += p.weight;
                    }
                }
            }
        }
    }

    /// Runs `n` unstimulated steps and returns their traces.
    pub fn run_unstimulated(&mut self, n: usize) -> Vec<GpiTrace> {
        let stim = StimConfig::default();
        (0..n).map(|_| self.step(Stimulate::Off, &stim)).collect()
    }
}
