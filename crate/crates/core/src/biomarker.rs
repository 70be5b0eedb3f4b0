//! Beta-band biomarker: periodogram, relative beta power of the GPi
//! population, and the observation window fed to the agent.

use std::collections::VecDeque;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::env::GpiTrace;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Shortest signal the periodogram accepts.
pub const MIN_SIGNAL_LEN: usize = 64;

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    /// Bin centre frequencies (Hz), `k * fs / N`.
    pub freqs: Vec<T>,
    /// Power per bin (signal units² / Hz).
    pub power: Vec<T>,
    /// Bin spacing (Hz).
    pub df: T,
}

impl<T: Scalar> Spectrum<T> {
    /// Rectangle-rule integral of the power over bins whose centre lies in
    /// `[lo, hi]`.
    pub fn band_power(&self, lo: T, hi: T) -> T {
        self.freqs
            .iter()
            .zip(&self.power)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, p)| *p)
            .sum::<T>()
            * self.df
    }

    pub fn total_power(&self) -> T {
        self.power.iter().copied().sum::<T>() * self.df
    }

    /// Index of the largest bin.
    pub fn peak_bin(&self) -> usize {
        let mut best = 0;
        for (k, p) in self.power.iter().enumerate() {
            if *p > self.power[best] {
                best = k;
            }
        }
        best
    }
}

/// Hann-windowed, mean-detrended periodogram estimator for a fixed length.
pub struct Periodogram<T: Scalar> {
    len: usize,
    sample_rate: T,
    window: Vec<T>,
    fft: Arc<dyn Fft<T>>,
}

impl<T: Scalar> Periodogram<T> {
    pub fn new(len: usize, sample_rate: T) -> Result<Self> {
        if len < MIN_SIGNAL_LEN {
            return Err(Error::SignalTooShort {
                len,
                min: MIN_SIGNAL_LEN,
            });
        }
        let two_pi = T::lit(std::f64::consts::TAU);
        let n = T::from_usize(len).unwrap();
        // periodic Hann
        let window = (0..len)
            .map(|i| {
                let x = two_pi * T::from_usize(i).unwrap() / n;
                T::lit(0.5) * (T::one() - x.cos())
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(len);
        Ok(Self {
            len,
            sample_rate,
            window,
            fft,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn df(&self) -> T {
        self.sample_rate / T::from_usize(self.len).unwrap()
    }

    /// Windowed, detrended copy of `signal` (the sequence whose mean square
    /// the spectrum integrates to).
    pub fn windowed(&self, signal: &[T]) -> Result<Vec<T>> {
        if signal.len() != self.len {
            return Err(Error::Dimension {
                expected: self.len,
                got: signal.len(),
            });
        }
        let n = T::from_usize(self.len).unwrap();
        let mean = signal.iter().copied().sum::<T>() / n;
        Ok(signal
            .iter()
            .zip(&self.window)
            .map(|(x, w)| (*x - mean) * *w)
            .collect())
    }

    pub fn estimate(&self, signal: &[T]) -> Result<Spectrum<T>> {
        let windowed = self.windowed(signal)?;
        let mut buf: Vec<Complex<T>> = windowed
            .into_iter()
            .map(|re| Complex { re, im: T::zero() })
            .collect();
        self.fft.process(&mut buf);

        let n = self.len;
        let scale = T::one() / (T::from_usize(n).unwrap() * self.sample_rate);
        let half = n / 2;
        let df = self.df();
        let mut freqs = Vec::with_capacity(half + 1);
        let mut power = Vec::with_capacity(half + 1);
        for (k, x) in buf.iter().take(half + 1).enumerate() {
            let edge = k == 0 || (n.is_multiple_of(2) && k == half);
            let fold = if edge { T::one() } else { T::lit(2.0) };
            freqs.push(T::from_usize(k).unwrap() * df);
            power.push(fold * x.norm_sqr() * scale);
        }
        Ok(Spectrum { freqs, power, df })
    }
}

/// One-shot periodogram of `signal` sampled at `sample_rate` Hz.
pub fn periodogram<T: Scalar>(signal: &[T], sample_rate: T) -> Result<Spectrum<T>> {
    Periodogram::new(signal.len(), sample_rate)?.estimate(signal)
}

/// Frequency limits for the relative beta computation (Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandConfig {
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub total_lo: f64,
    pub total_hi: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self {
            beta_lo: 13.0,
            beta_hi: 35.0,
            total_lo: 1.0,
            total_hi: 200.0,
        }
    }
}

/// Relative beta power in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct BetaPower(pub f64);

impl BetaPower {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Beta-band fraction of each channel's total power, averaged over channels.
/// A channel with no power in the total band contributes zero.
pub fn relative_beta_power<T: Scalar, S: AsRef<[T]>>(
    channels: &[S],
    estimator: &Periodogram<T>,
    bands: &BandConfig,
) -> Result<BetaPower> {
    if channels.is_empty() {
        return Err(Error::Dimension { expected: 1, got: 0 });
    }
    let mut acc = 0.0;
    for ch in channels {
        let spec = estimator.estimate(ch.as_ref())?;
        let beta = spec.band_power(T::lit(bands.beta_lo), T::lit(bands.beta_hi));
        let total = spec.band_power(T::lit(bands.total_lo), T::lit(bands.total_hi));
        if total > T::zero() {
            acc += (beta / total).as_f64();
        }
    }
    Ok(BetaPower((acc / channels.len() as f64).clamp(0.0, 1.0)))
}

/// Rolling buffer of GPi samples spanning the analysis window.
#[derive(Clone)]
pub struct BetaTracker {
    samples: VecDeque<Vec<f64>>,
    capacity: usize,
    channels: usize,
    estimator: Arc<Periodogram<f64>>,
    bands: BandConfig,
}

impl std::fmt::Debug for BetaTracker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BetaTracker")
            .field("len", &self.samples.len())
            .field("capacity", &self.capacity)
            .field("channels", &self.channels)
            .finish()
    }
}

impl BetaTracker {
    /// `window_ms` of history at `sample_rate` Hz over `channels` neurons.
    pub fn new(window_ms: f64, sample_rate: f64, channels: usize, bands: BandConfig) -> Result<Self> {
        let capacity = (window_ms * sample_rate / 1000.0).round() as usize;
        let estimator = Arc::new(Periodogram::new(capacity, sample_rate)?);
        Ok(Self {
            samples: VecDeque::with_capacity(capacity),
            capacity,
            channels,
            estimator,
            bands,
        })
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_warm(&self) -> bool {
        self.samples.len() == self.capacity
    }

    pub fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.channels);
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(row.to_vec());
    }

    pub fn push_trace(&mut self, trace: &GpiTrace) {
        for row in &trace.samples {
            self.push_row(row);
        }
    }

    /// Relative beta power of the buffered history.
    pub fn beta_power(&self) -> Result<BetaPower> {
        if !self.is_warm() {
            return Err(Error::InsufficientHistory {
                have: self.samples.len(),
                need: self.capacity,
            });
        }
        let channels: Vec<Vec<f64>> = (0..self.channels)
            .map(|j| self.samples.iter().map(|row| row[j]).collect())
            .collect();
        relative_beta_power(&channels, &self.estimator, &self.bands)
    }
}

/// Fixed-length window of recent beta estimates, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationWindow {
    values: VecDeque<f64>,
    n_obs: usize,
}

impl ObservationWindow {
    pub fn new(n_obs: usize) -> Self {
        assert!(n_obs > 0, "observation window needs at least one slot");
        Self {
            values: VecDeque::with_capacity(n_obs),
            n_obs,
        }
    }

    /// Window pre-filled with `values` (oldest first); extra leading values
    /// are dropped.
    pub fn from_values(n_obs: usize, values: &[f64]) -> Self {
        let mut w = Self::new(n_obs);
        for &v in values {
            w.push(v);
        }
        w
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn clear(&mut self) {
        self.values.clear();
    }

    pub fn push(&mut self, p: f64) {
        if self.values.len() == self.n_obs {
            self.values.pop_front();
        }
        self.values.push_back(p);
    }

    /// Agent state: the window contents, front-padded with the oldest value
    /// until `n_obs` estimates have been seen. Empty before the first push.
    pub fn state(&self) -> Vec<f64> {
        let Some(&first) = self.values.front() else {
            return Vec::new();
        };
        let mut out = vec![first; self.n_obs - self.values.len()];
        out.extend(self.values.iter().copied());
        out
    }

    /// Appends `p` and returns the resulting state vector.
    pub fn push_and_build_state(&mut self, p: BetaPower) -> Vec<f64> {
        self.push(p.value());
        self.state()
    }

    /// Mean beta power over the (padded) window; 0 when empty.
    pub fn mean_beta(&self) -> f64 {
        let s = self.state();
        if s.is_empty() {
            return 0.0;
        }
        s.iter().sum::<f64>() / s.len() as f64
    }
}
