use seadbs::env::{
    resting_potential, ClosedLoopEnv, EpisodeConfig, Mode, NetworkConfig, NetworkState, PopulationId, Sign,
    StimConfig, Stimulate, CIRCUIT, N_NEURONS, POP_SIZE,
};
use seadbs::Error;

fn config() -> NetworkConfig {
    NetworkConfig::default()
}

#[test]
fn starts_with_eighty_neurons_at_rest() {
    let cfg = config();
    let net = NetworkState::new(&cfg, 1, Mode::Parkinsonian).unwrap();
    let rest = resting_potential(&cfg.hh);
    assert_eq!(net.neurons().len(), N_NEURONS);
    assert_eq!(N_NEURONS, 80);
    assert!(net.neurons().iter().all(|n| n.gates.v == rest));
    assert_eq!(net.sim_clock(), 0.0);
    for &(src, dst, _) in &CIRCUIT {
        let c = net.connection_count(src, dst).unwrap();
        assert!(c > 0 && c <= POP_SIZE * POP_SIZE, "{src} -> {dst}: {c}");
    }
}

#[test]
fn default_config_follows_the_circuit() {
    let cfg = config();
    assert_eq!(cfg.connections.len(), CIRCUIT.len());
    for &(src, dst, sign) in &CIRCUIT {
        let c = cfg
            .connections
            .iter()
            .find(|c| c.src == src && c.dst == dst)
            .unwrap();
        assert_eq!(c.sign, sign);
    }
    assert_eq!(cfg.substeps_per_step(), 100);
    assert_eq!(cfg.samples_per_step(), 4);
}

#[test]
fn flipped_sign_is_rejected() {
    let mut cfg = config();
    let e = cfg
        .connections
        .iter_mut()
        .find(|c| c.src == PopulationId::Gpe && c.dst == PopulationId::Stn)
        .unwrap();
    e.sign = Sign::Excitatory;
    assert!(matches!(
        NetworkState::new(&cfg, 0, Mode::Healthy),
        Err(Error::Config(_))
    ));
}

#[test]
fn missing_population_is_rejected() {
    let mut cfg = config();
    cfg.populations.retain(|p| p.id != PopulationId::Thal);
    assert!(matches!(cfg.validate(), Err(Error::Config(m)) if m.contains("Thal")));
}

#[test]
fn edge_outside_the_circuit_is_rejected() {
    let mut cfg = config();
    let mut extra = cfg.connections[0].clone();
    extra.src = PopulationId::Gpi;
    extra.dst = PopulationId::Stn;
    cfg.connections.push(extra);
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
}

#[test]
fn thirty_steps_advance_sixty_ms() {
    let mut net = NetworkState::new(&config(), 2, Mode::Healthy).unwrap();
    let stim = StimConfig::default();
    for k in 0..30 {
        let trace = net.step(Stimulate::from_index(k % 2), &stim);
        assert_eq!(trace.len(), 4);
        assert!((trace.sample_ms - 0.5).abs() < 1e-12);
        // samples sit at the end of each 0.5 ms stride
        assert!((trace.start_ms - (2.0 * k as f64 + 0.5)).abs() < 1e-9);
    }
    assert!((net.sim_clock() - 60.0).abs() < 1e-9);
    assert_eq!(net.steps(), 30);
}

#[test]
fn same_seed_same_trajectory() {
    let cfg = config();
    let stim = StimConfig::default();
    let run = |seed| {
        let mut net = NetworkState::new(&cfg, seed, Mode::Parkinsonian).unwrap();
        (0..40)
            .map(|k| net.step(Stimulate::from_index((k / 5) % 2), &stim))
            .collect::<Vec<_>>()
    };
    assert_eq!(run(7), run(7));
    assert_ne!(run(7), run(8));
}

#[test]
fn reset_reproduces_a_fresh_network() {
    let cfg = config();
    let stim = StimConfig::default();
    let mut used = NetworkState::new(&cfg, 3, Mode::Healthy).unwrap();
    for _ in 0..20 {
        used.step(Stimulate::On, &stim);
    }
    used.reset(5, Mode::Parkinsonian).unwrap();
    let fresh = NetworkState::new(&cfg, 5, Mode::Parkinsonian).unwrap();
    assert_eq!(used, fresh);
}

#[test]
fn action_off_equals_unstimulated_run() {
    let cfg = config();
    let mut a = NetworkState::new(&cfg, 4, Mode::Parkinsonian).unwrap();
    let mut b = a.clone();
    let traces = a.run_unstimulated(25);
    let stim = StimConfig::default().with_freq(130.0);
    let manual: Vec<_> = (0..25).map(|_| b.step(Stimulate::Off, &stim)).collect();
    assert_eq!(traces, manual);
}

#[test]
fn on_without_pulse_onset_changes_nothing() {
    let cfg = config();
    let stim = StimConfig::default().with_freq(30.0);
    let mut net = NetworkState::new(&cfg, 6, Mode::Parkinsonian).unwrap();
    net.step(Stimulate::On, &stim); // onset at 0 ms; pulse ends at 0.3 ms
    let start = net.sim_clock();
    assert!(NetworkState::pulse_onsets(&stim, start, cfg.step_ms).is_empty());
    let mut off = net.clone();
    let a = net.step(Stimulate::On, &stim);
    let b = off.step(Stimulate::Off, &stim);
    assert_eq!(a, b);
    assert_eq!(net, off);
}

#[test]
fn stimulation_perturbs_the_network() {
    let cfg = config();
    let stim = StimConfig::default();
    let mut on = NetworkState::new(&cfg, 6, Mode::Parkinsonian).unwrap();
    let mut off = on.clone();
    let a: Vec<_> = (0..10).map(|_| on.step(Stimulate::On, &stim)).collect();
    let b: Vec<_> = (0..10).map(|_| off.step(Stimulate::Off, &stim)).collect();
    assert_ne!(a, b);
    assert_ne!(on.neuron(PopulationId::Stn, 0), off.neuron(PopulationId::Stn, 0));
}

#[test]
fn pulse_onsets_follow_the_global_clock() {
    let stim = StimConfig::default(); // 50 Hz, 20 ms period
    assert_eq!(NetworkState::pulse_onsets(&stim, 0.0, 2.0), vec![0.0]);
    assert!(NetworkState::pulse_onsets(&stim, 2.0, 2.0).is_empty());
    assert_eq!(NetworkState::pulse_onsets(&stim, 20.0, 2.0), vec![20.0]);
    let fast = stim.with_freq(1000.0);
    assert_eq!(NetworkState::pulse_onsets(&fast, 4.0, 2.0).len(), 2);
    let onsets: usize = (0..30)
        .map(|k| NetworkState::pulse_onsets(&stim, 2.0 * k as f64, 2.0).len())
        .sum();
    assert_eq!(onsets, 3);
}

#[test]
fn voltages_and_gates_stay_physiological_under_stimulation() {
    let cfg = config();
    let stim = StimConfig::default();
    for seed in 0..3 {
        let mut net = NetworkState::new(&cfg, seed, Mode::Parkinsonian).unwrap();
        for _ in 0..100 {
            net.step(Stimulate::On, &stim);
        }
        let (lo, hi) = net.voltage_range();
        assert!(lo > -120.0 && hi < 70.0, "seed {seed}: [{lo}, {hi}]");
        assert!(net.gates_stayed_in_unit_interval());
        assert!(net.spike_counts().iter().sum::<u64>() > 0);
    }
}

#[test]
fn parkinsonian_gains_only_touch_their_edges() {
    let cfg = config();
    let h = NetworkState::new(&cfg, 9, Mode::Healthy).unwrap();
    let p = NetworkState::new(&cfg, 9, Mode::Parkinsonian).unwrap();
    // wiring draws come from the same stream in both modes
    for &(src, dst, _) in &CIRCUIT {
        assert_eq!(h.connection_count(src, dst), p.connection_count(src, dst));
    }
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = config();
    let text = toml::to_string(&cfg).unwrap();
    assert_eq!(NetworkConfig::from_toml_str(&text).unwrap(), cfg);
    assert!(matches!(
        NetworkConfig::from_toml_str("dt = \"fast\""),
        Err(Error::Config(_))
    ));
}

#[test]
fn mode_parses() {
    assert_eq!("pd".parse::<Mode>().unwrap(), Mode::Parkinsonian);
    assert_eq!("healthy".parse::<Mode>().unwrap(), Mode::Healthy);
    assert!("sick".parse::<Mode>().is_err());
}

#[test]
fn invalid_stimulation_is_rejected() {
    assert!(StimConfig::default().with_freq(0.0).validate().is_err());
    let wide = StimConfig {
        pulse_width: 25.0,
        ..StimConfig::default()
    };
    assert!(wide.validate().is_err());
}

#[test]
fn trace_csv_has_header_and_rows() {
    let mut net = NetworkState::new(&config(), 0, Mode::Healthy).unwrap();
    let csv = net.step(Stimulate::Off, &StimConfig::default()).to_csv(true);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "time_ms,neuron_0,neuron_1,neuron_2,neuron_3,neuron_4,neuron_5,neuron_6,neuron_7,neuron_8,neuron_9"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0.500,"));
    assert_eq!(lines[1].split(',').count(), 11);
}

#[test]
fn closed_loop_env_observes_after_warm_up() {
    let cfg = config();
    let ep = EpisodeConfig::default();
    let mut env = ClosedLoopEnv::new(&cfg, StimConfig::default(), ep, Mode::Parkinsonian, 1).unwrap();
    assert_eq!(env.network().steps(), 64);
    let first = env.state();
    assert_eq!(first.len(), 5);
    assert!(first.iter().all(|b| *b == first[0]));
    let obs = env.step(Stimulate::On).unwrap();
    assert_eq!(obs.state.len(), 5);
    assert_eq!(obs.state[4], obs.beta);
    assert!((0.0..=1.0).contains(&obs.beta));
    let again = env.reset(1).unwrap();
    assert_eq!(again.state, first);
    assert_eq!(env.network().steps(), 64);
}

#[test]
fn warm_up_must_cover_the_analysis_window() {
    let ep = EpisodeConfig {
        warmup_ms: 64.0,
        ..EpisodeConfig::default()
    };
    assert!(matches!(
        ClosedLoopEnv::new(&config(), StimConfig::default(), ep, Mode::Healthy, 0),
        Err(Error::Config(_))
    ));
}
