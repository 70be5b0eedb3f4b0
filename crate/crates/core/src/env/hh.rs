//! Hodgkin-Huxley single-compartment kinetics.
//!
//! Voltages in mV, time in ms, conductances in mS/cm², currents in µA/cm².
//! Rate functions use the modern sign convention with rest near -65 mV.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Membrane and channel parameters of a single compartment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HhParams {
    pub c_m: f64,
    pub g_na: f64,
    pub g_k: f64,
    pub g_l: f64,
    pub e_na: f64,
    pub e_k: f64,
    pub e_l: f64,
}

impl Default for HhParams {
    fn default() -> Self {
        Self {
            c_m: 1.0,
            g_na: 120.0,
            g_k: 36.0,
            g_l: 0.3,
            e_na: 50.0,
            e_k: -77.0,
            e_l: -54.4,
        }
    }
}

/// Membrane potential and gating variables of one neuron.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Gates<T> {
    pub v: T,
    pub m: T,
    pub h: T,
    pub n: T,
}

/// Time derivatives of [`Gates`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GatesDerivative<T> {
    pub dv: T,
    pub dm: T,
    pub dh: T,
    pub dn: T,
}

/// Opening and closing rates (1/ms) of the three gates at one voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates<T> {
    pub alpha_m: T,
    pub beta_m: T,
    pub alpha_h: T,
    pub beta_h: T,
    pub alpha_n: T,
    pub beta_n: T,
}

/// `x / (1 - exp(-x))`, continuous through `x = 0`.
#[inline]
fn exprel<T: Scalar>(x: T) -> T {
    if x.abs() < T::lit(1e-6) {
        T::one() + x / T::lit(2.0)
    } else {
        x / (T::one() - (-x).exp())
    }
}

impl<T: Scalar> Rates<T> {
    #[inline]
    pub fn at(v: T) -> Self {
        let rest = v + T::lit(65.0);
        Self {
            alpha_m: exprel((v + T::lit(40.0)) / T::lit(10.0)),
            beta_m: T::lit(4.0) * (-rest / T::lit(18.0)).exp(),
            alpha_h: T::lit(0.07) * (-rest / T::lit(20.0)).exp(),
            beta_h: T::one() / (T::one() + (-(v + T::lit(35.0)) / T::lit(10.0)).exp()),
            alpha_n: T::lit(0.1) * exprel((v + T::lit(55.0)) / T::lit(10.0)),
            beta_n: T::lit(0.125) * (-rest / T::lit(80.0)).exp(),
        }
    }

    pub fn m_inf(&self) -> T {
        self.alpha_m / (self.alpha_m + self.beta_m)
    }

    pub fn h_inf(&self) -> T {
        self.alpha_h / (self.alpha_h + self.beta_h)
    }

    pub fn n_inf(&self) -> T {
        self.alpha_n / (self.alpha_n + self.beta_n)
    }
}

impl<T: Scalar> Gates<T> {
    /// Gates at their steady-state values for a clamped voltage `v`.
    pub fn steady_state(v: T) -> Self {
        let r = Rates::at(v);
        Self {
            v,
            m: r.m_inf(),
            h: r.h_inf(),
            n: r.n_inf(),
        }
    }

    #[inline]
    pub fn axpy(&self, d: &GatesDerivative<T>, scale: T) -> Self {
        Self {
            v: self.v + d.dv * scale,
            m: self.m + d.dm * scale,
            h: self.h + d.dh * scale,
            n: self.n + d.dn * scale,
        }
    }
}

/// Sodium, potassium and leak currents (outward positive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelCurrents<T> {
    pub i_na: T,
    pub i_k: T,
    pub i_l: T,
}

impl<T: Scalar> ChannelCurrents<T> {
    #[inline]
    pub fn of(g: &Gates<T>, p: &HhParams) -> Self {
        let m3 = g.m * g.m * g.m;
        let n2 = g.n * g.n;
        Self {
            i_na: T::lit(p.g_na) * m3 * g.h * (g.v - T::lit(p.e_na)),
            i_k: T::lit(p.g_k) * n2 * n2 * (g.v - T::lit(p.e_k)),
            i_l: T::lit(p.g_l) * (g.v - T::lit(p.e_l)),
        }
    }

    pub fn total(&self) -> T {
        self.i_na + self.i_k + self.i_l
    }
}

/// Right-hand side of the HH equations with `i_ext` as net inward current.
#[inline]
pub fn hh_derivatives<T: Scalar>(g: &Gates<T>, i_ext: T, p: &HhParams) -> GatesDerivative<T> {
    let r = Rates::at(g.v);
    let i_ion = ChannelCurrents::of(g, p).total();
    GatesDerivative {
        dv: (i_ext - i_ion) / T::lit(p.c_m),
        dm: r.alpha_m * (T::one() - g.m) - r.beta_m * g.m,
        dh: r.alpha_h * (T::one() - g.h) - r.beta_h * g.h,
        dn: r.alpha_n * (T::one() - g.n) - r.beta_n * g.n,
    }
}

/// Membrane potential at which the unforced neuron is at rest, found by
/// bisection on the steady-state current-voltage curve.
pub fn resting_potential(p: &HhParams) -> f64 {
    let net = |v: f64| ChannelCurrents::of(&Gates::steady_state(v), p).total();
    let (mut lo, mut hi) = (-80.0_f64, -50.0_f64);
    debug_assert!(net(lo) < 0.0 && net(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if net(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One classical RK4 step of an isolated neuron under constant drive.
pub fn rk4_step<T: Scalar>(g: &Gates<T>, i_ext: T, dt: T, p: &HhParams) -> Gates<T> {
    let half = dt / T::lit(2.0);
    let k1 = hh_derivatives(g, i_ext, p);
    let k2 = hh_derivatives(&g.axpy(&k1, half), i_ext, p);
    let k3 = hh_derivatives(&g.axpy(&k2, half), i_ext, p);
    let k4 = hh_derivatives(&g.axpy(&k3, dt), i_ext, p);
    let six = T::lit(6.0);
    let two = T::lit(2.0);
    Gates {
        v: g.v + dt / six * (k1.dv + two * k2.dv + two * k3.dv + k4.dv),
        m: g.m + dt / six * (k1.dm + two * k2.dm + two * k3.dm + k4.dm),
        h: g.h + dt / six * (k1.dh + two * k2.dh + two * k3.dh + k4.dh),
        n: g.n + dt / six * (k1.dn + two * k2.dn + two * k3.dn + k4.dn),
    }
}

/// Spike times (ms) of an isolated neuron under constant drive, detected as
/// upward crossings of `threshold`.
pub fn spike_times(i_ext: f64, duration_ms: f64, dt: f64, threshold: f64, p: &HhParams) -> Vec<f64> {
    let mut g = Gates::steady_state(resting_potential(p));
    let steps = (duration_ms / dt).round() as usize;
    let mut out = Vec::new();
    for k in 0..steps {
        let next = rk4_step(&g, i_ext, dt, p);
        if g.v < threshold && next.v >= threshold {
            // linear interpolation of the crossing instant
            let frac = (threshold - g.v) / (next.v - g.v);
            out.push((k as f64 + frac) * dt);
        }
        g = next;
    }
    out
}

/// Mean firing rate (Hz) from the inter-spike intervals after `skip_ms`.
pub fn firing_rate(spikes: &[f64], skip_ms: f64) -> Option<f64> {
    let late: Vec<f64> = spikes.iter().copied().filter(|&t| t >= skip_ms).collect();
    if late.len() < 2 {
        return None;
    }
    let span = late[late.len() - 1] - late[0];
    Some(1000.0 * (late.len() - 1) as f64 / span)
}
