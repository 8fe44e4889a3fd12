//! Delivery success, the logarithmic (Weber-Fechner) QoE metric and the
//! windowed per-link outage estimate used for the reliability constraint.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QoeParams {
    pub rate_weight: f64,
    pub similarity_weight: f64,
    /// bit/s
    pub rate_ref: f64,
    pub similarity_ref: f64,
    /// s, end-to-end budget for generation plus delivery
    pub deadline: f64,
    /// Largest tolerated empirical outage per link.
    pub outage_cap: f64,
    /// slots
    pub outage_window: usize,
}

impl Default for QoeParams {
    fn default() -> Self {
        Self {
            rate_weight: 1.0,
            similarity_weight: 1.0,
            rate_ref: 1.0e6,
            similarity_ref: 0.5,
            deadline: 0.050,
            outage_cap: 0.1,
            outage_window: 50,
        }
    }
}

impl QoeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_weight >= 0.0 && self.similarity_weight >= 0.0) {
            return Err(Error::config("qoe.rate_weight", "weights must be non-negative"));
        }
        if self.rate_weight == 0.0 && self.similarity_weight == 0.0 {
            return Err(Error::config("qoe.rate_weight", "weights must not both be zero"));
        }
        if !(self.rate_ref > 0.0) {
            return Err(Error::config("qoe.rate_ref", "must be positive"));
        }
        if !(self.similarity_ref > 0.0) {
            return Err(Error::config("qoe.similarity_ref", "must be positive"));
        }
        if !(self.deadline > 0.0 && self.deadline.is_finite()) {
            return Err(Error::config("qoe.deadline", "must be positive"));
        }
        if !(self.outage_cap > 0.0 && self.outage_cap < 1.0) {
            return Err(Error::config(
                "qoe.outage_cap",
                format!("must lie in (0, 1), got {}", self.outage_cap),
            ));
        }
        if self.outage_window == 0 {
            return Err(Error::config("qoe.outage_window", "must be at least 1"));
        }
        Ok(())
    }
}

/// Time left for delivery once generation has consumed part of the deadline,
/// capped by the coherence time.
pub fn delivery_window(gen_time: f64, deadline: f64, t_coh: f64) -> f64 {
    (deadline - gen_time).min(t_coh).max(0.0)
}

/// Whether a payload generated in `gen_time` reaches the receiver in time.
pub fn success_indicator(rate: f64, payload: f64, gen_time: f64, deadline: f64, t_coh: f64) -> bool {
    gen_time < deadline && rate * delivery_window(gen_time, deadline, t_coh) >= payload
}

/// Per-link QoE: zero on failure, logarithmic in rate and similarity otherwise.
pub fn link_qoe(rate: f64, similarity: f64, success: bool, params: &QoeParams) -> f64 {
    if !success {
        return 0.0;
    }
    params.rate_weight * (rate / params.rate_ref).ln_1p()
        + params.similarity_weight * (similarity / params.similarity_ref).ln_1p()
}

pub fn system_qoe(link_qoes: &[f64]) -> Result<f64> {
    if link_qoes.is_empty() {
        return Err(Error::Domain("system QoE needs at least one link".into()));
    }
    Ok(link_qoes.iter().sum())
}

/// Sliding-window success history for every link.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageTracker {
    window: usize,
    history: Vec<VecDeque<bool>>,
    failures: Vec<usize>,
}

impl OutageTracker {
    pub fn new(num_links: usize, window: usize) -> Self {
        Self {
            window,
            history: vec![VecDeque::with_capacity(window); num_links],
            failures: vec![0; num_links],
        }
    }

    pub fn num_links(&self) -> usize {
        self.history.len()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Record one slot's outcome for `link` and return its empirical outage.
    pub fn update(&mut self, link: usize, success: bool) -> Result<f64> {
        let hist = self
            .history
            .get_mut(link)
            .ok_or_else(|| Error::Domain(format!("link index {link} out of range")))?;
        if hist.len() == self.window && hist.pop_front() == Some(false) {
            self.failures[link] -= 1;
        }
        hist.push_back(success);
        if !success {
            self.failures[link] += 1;
        }
        Ok(self.outage(link))
    }

    /// Failures in the window divided by the window length.
    pub fn outage(&self, link: usize) -> f64 {
        self.failures[link] as f64 / self.window as f64
    }

    pub fn failures(&self, link: usize) -> usize {
        self.failures[link]
    }

    pub fn outages(&self) -> Vec<f64> {
        (0..self.num_links()).map(|k| self.outage(k)).collect()
    }

    pub fn clear(&mut self) {
        self.history.iter_mut().for_each(VecDeque::clear);
        self.failures.iter_mut().for_each(|f| *f = 0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn success_hand_cases() {
        // window = min(50 - 5, 20) ms = 20 ms, capacity 20 kbit
        assert!(success_indicator(1e6, 10e3, 5e-3, 50e-3, 20e-3));
        assert!(!success_indicator(1e6, 25e3, 5e-3, 50e-3, 20e-3));
        assert!(!success_indicator(1e12, 1.0, 50e-3, 50e-3, 1.0));
        assert!(!success_indicator(1e12, 1.0, 60e-3, 50e-3, 1.0));
        assert!(success_indicator(0.0, 0.0, 1e-3, 50e-3, 1.0));
    }

    #[test]
    fn qoe_values() {
        let p = QoeParams::default();
        let unit = link_qoe(p.rate_ref, p.similarity_ref, true, &p);
        assert!((unit - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!((unit - 1.3863).abs() < 1e-4);
        assert_eq!(link_qoe(5e6, 0.9, false, &p), 0.0);
        let doubled = link_qoe(2.0 * p.rate_ref, p.similarity_ref, true, &p);
        assert!((doubled - (3f64.ln() + 2f64.ln())).abs() < 1e-15);
        assert!((doubled - 1.7918).abs() < 1e-4);
        // diminishing sensitivity
        assert!(doubled < 2.0 * unit);
    }

    #[test]
    fn system_qoe_sums() {
        assert!((system_qoe(&[1.0, 0.5, 0.0]).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(system_qoe(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(system_qoe(&[0.0, 0.5, 1.0]).unwrap(), system_qoe(&[1.0, 0.0, 0.5]).unwrap());
        assert!(system_qoe(&[]).is_err());
    }

    #[test]
    fn tracker_ring_semantics() {
        let mut t = OutageTracker::new(2, 4);
        for s in [false, true, true] {
            t.update(0, s).unwrap();
        }
        assert_eq!(t.update(0, true).unwrap(), 0.25);
        // fifth push evicts the leading failure
        assert_eq!(t.update(0, true).unwrap(), 0.0);
        for _ in 0..6 {
            t.update(1, true).unwrap();
        }
        assert_eq!(t.outage(1), 0.0);
        assert!(t.update(2, true).is_err());
        t.update(1, false).unwrap();
        t.clear();
        assert_eq!(t.failures(1), 0);
    }

    #[test]
    fn validation() {
        assert!(QoeParams::default().validate().is_ok());
        let bad = QoeParams { outage_cap: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = QoeParams { rate_weight: 0.0, similarity_weight: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn qoe_monotone(r1 in 0.0f64..1e8, r2 in 0.0f64..1e8, s1 in 0.0f64..1.0, s2 in 0.0f64..1.0) {
            let p = QoeParams::default();
            let (rl, rh) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            let (sl, sh) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
            prop_assert!(link_qoe(rl, sl, true, &p) <= link_qoe(rh, sh, true, &p));
            prop_assert!(link_qoe(rl, sl, true, &p) >= 0.0);
        }

        #[test]
        fn common_weight_scaling_preserves_order(scale in 0.01f64..100.0,
                                                 a in (0.0f64..1e7, 0.0f64..1.0),
                                                 b in (0.0f64..1e7, 0.0f64..1.0)) {
            let p = QoeParams::default();
            let q = QoeParams { rate_weight: scale, similarity_weight: scale, ..p.clone() };
            let (pa, pb) = (link_qoe(a.0, a.1, true, &p), link_qoe(b.0, b.1, true, &p));
            let (qa, qb) = (link_qoe(a.0, a.1, true, &q), link_qoe(b.0, b.1, true, &q));
            prop_assert!((qa - scale * pa).abs() <= 1e-9 * qa.abs().max(1.0));
            if (pa - pb).abs() > 1e-9 {
                prop_assert_eq!(pa < pb, qa < qb);
            }
        }

        #[test]
        fn success_monotone(rate in 0.0f64..1e7, payload in 0.0f64..1e5, gen in 0.0f64..0.06,
                            deadline in 0.001f64..0.1, tcoh in 0.0f64..0.1, bump in 0.0f64..0.05) {
            let base = success_indicator(rate, payload, gen, deadline, tcoh);
            if base {
                prop_assert!(success_indicator(rate * 1.5 + 1.0, payload, gen, deadline, tcoh));
                prop_assert!(success_indicator(rate, payload, gen, deadline + bump, tcoh));
                prop_assert!(success_indicator(rate, payload, gen, deadline, tcoh + bump));
            } else {
                prop_assert!(!success_indicator(rate, payload + 1.0, gen, deadline, tcoh));
                prop_assert!(!success_indicator(rate, payload, gen + bump, deadline, tcoh));
            }
        }
    }
}
