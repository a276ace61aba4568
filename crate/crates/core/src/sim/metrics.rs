use serde::{Deserialize, Serialize};

use super::SimTrace;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Theta,
    OmegaR,
    IC,
    VC,
    UDac,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub rise_time_10_90: f64,
    pub overshoot_pct: f64,
    pub settling_time_2pct: f64,
    pub steady_state_error_pct: f64,
}

/// Metrics of `channel` after the last full reference edge.
///
/// The expected final value is `target_gain` times the reference level.
/// Levels are normalized against the measured final value (mean of the last
/// 10 % of the segment); the steady-state error is taken against the
/// expected value, in percent of it.
pub fn step_metrics(trace: &SimTrace, channel: super::Channel, target_gain: f64) -> Result<StepMetrics> {
    let y = trace.channel(channel);
    let r = &trace.reference;
    let n = trace.len();
    if n < 3 {
        return Err(Error::Metric("trace too short".into()));
    }

    // edges: (index of first sample at the new level, old level)
    let mut edges: Vec<(usize, f64)> = Vec::new();
    if r[0] != 0.0 {
        edges.push((0, 0.0));
    }
    edges.extend((1..n).filter(|&i| r[i] != r[i - 1]).map(|i| (i, r[i - 1])));
    if edges.is_empty() {
        return Err(Error::Metric("no reference edge in trace".into()));
    }
    let seg_end = |k: usize| edges.get(k + 1).map_or(n, |e| e.0);
    let mut k = edges.len() - 1;
    if k > 0 {
        let last = seg_end(k) - edges[k].0;
        let prev = seg_end(k - 1) - edges[k - 1].0;
        if (last as f64) < 0.99 * prev as f64 {
            k -= 1;
        }
    }
    let (start, r0) = edges[k];
    let end = seg_end(k);
    let r1 = r[start];
    if end - start < 10 {
        return Err(Error::Metric("step segment too short".into()));
    }

    let y0 = if start == 0 { target_gain * r0 } else { y[start - 1] };
    let tail = (end - start) / 10;
    let yss = y[end - tail.max(1)..end].iter().sum::<f64>() / tail.max(1) as f64;
    let span = yss - y0;
    if span == 0.0 {
        return Err(Error::Metric("output does not move".into()));
    }
    let t0 = if start == 0 { trace.t[0] } else { trace.t[start - 1] };
    let z = |i: usize| (y[i] - y0) / span;
    let first_cross = |level: f64| -> Option<f64> {
        let mut prev_t = t0;
        let mut prev_z = 0.0;
        for i in start..end {
            let zi = z(i);
            if zi >= level {
                let frac = if zi == prev_z { 0.0 } else { (level - prev_z) / (zi - prev_z) };
                return Some(prev_t + frac * (trace.t[i] - prev_t));
            }
            prev_t = trace.t[i];
            prev_z = zi;
        }
        None
    };
    let t10 = first_cross(0.1).ok_or_else(|| Error::Metric("never reaches 10 %".into()))?;
    let t90 = first_cross(0.9).ok_or_else(|| Error::Metric("never reaches 90 %".into()))?;
    let zmax = (start..end).map(z).fold(f64::NEG_INFINITY, f64::max);
    let settle = (start..end)
        .rev()
        .find(|&i| (z(i) - 1.0).abs() > 0.02)
        .map_or(0.0, |i| trace.t[(i + 1).min(end - 1)] - t0);

    let expected = target_gain * r1;
    let denom = if expected != 0.0 { expected.abs() } else { (target_gain * (r1 - r0)).abs() };
    Ok(StepMetrics {
        rise_time_10_90: t90 - t10,
        overshoot_pct: 100.0 * (zmax - 1.0).max(0.0),
        settling_time_2pct: settle,
        steady_state_error_pct: 100.0 * (yss - expected).abs() / denom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::RationalTF;
    use crate::sim::lti_step;

    fn trace_of(y: Vec<f64>, dt: f64) -> SimTrace {
        let mut t = SimTrace::with_capacity(y.len());
        for (k, v) in y.into_iter().enumerate() {
            t.push(k as f64 * dt, 1.0, v, 0.0, 0.0, 0.0, 0.0, 0.0);
        }
        t
    }

    #[test]
    fn first_order_rise_time() {
        let tau = 2e-3;
        let dt = 1e-6;
        let y = lti_step(&RationalTF::first_order(1.0, tau), dt, 40_000).unwrap();
        let m = step_metrics(&trace_of(y, dt), Channel::Theta, 1.0).unwrap();
        let expected = tau * 9f64.ln();
        assert!((m.rise_time_10_90 - expected).abs() < 0.02 * expected);
        assert!(m.overshoot_pct < 1e-4);
    }

    #[test]
    fn constant_reference_has_no_edge() {
        let mut t = trace_of(vec![0.0; 20], 1.0);
        t.reference.iter_mut().for_each(|r| *r = 0.0);
        assert!(matches!(step_metrics(&t, Channel::Theta, 1.0), Err(Error::Metric(_))));
    }
}
