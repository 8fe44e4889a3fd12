//! Wireless channel model: log-distance path loss with log-normal shadowing,
//! block Rayleigh fading per slot and sub-channel, SINR, Shannon rates and a
//! closed-form interference-free outage probability.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 2.998e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    /// Hz
    pub carrier_freq: f64,
    /// Hz per sub-channel
    pub subchannel_bandwidth: f64,
    pub num_subchannels: usize,
    /// W per sub-channel
    pub noise_power: f64,
    pub pathloss_ref_db: f64,
    /// m
    pub pathloss_ref_dist: f64,
    pub pathloss_exponent: f64,
    pub shadowing_sigma_db: f64,
    /// Coherence time reported for a stationary vehicle, s.
    pub max_coherence_time: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            carrier_freq: 5.9e9,
            subchannel_bandwidth: 1.0e6,
            num_subchannels: 4,
            noise_power: 3.98e-15,
            pathloss_ref_db: 63.3,
            pathloss_ref_dist: 10.0,
            pathloss_exponent: 2.7,
            shadowing_sigma_db: 4.0,
            max_coherence_time: 1.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("channel.carrier_freq", self.carrier_freq),
            ("channel.subchannel_bandwidth", self.subchannel_bandwidth),
            ("channel.noise_power", self.noise_power),
            ("channel.pathloss_ref_db", self.pathloss_ref_db),
            ("channel.pathloss_ref_dist", self.pathloss_ref_dist),
            ("channel.max_coherence_time", self.max_coherence_time),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, format!("must be positive and finite, got {v}")));
            }
        }
        // Zero shadowing is allowed so that deterministic large-scale gains can be configured.
        if !(self.shadowing_sigma_db.is_finite() && self.shadowing_sigma_db >= 0.0) {
            return Err(Error::config(
                "channel.shadowing_sigma_db",
                format!("must be non-negative, got {}", self.shadowing_sigma_db),
            ));
        }
        if self.num_subchannels == 0 {
            return Err(Error::config("channel.num_subchannels", "must be at least 1"));
        }
        if !(1.6..=6.0).contains(&self.pathloss_exponent) {
            return Err(Error::config(
                "channel.pathloss_exponent",
                format!("must lie in [1.6, 6.0], got {}", self.pathloss_exponent),
            ));
        }
        Ok(())
    }
}

/// Distances and speeds of the V2V links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkGeometry {
    /// Transmitter-to-own-receiver distance per link, m.
    pub tx_rx_distance: Vec<f64>,
    /// `cross_distances[j][k]`: transmitter of link j to receiver of link k, m.
    /// Diagonal entries are ignored.
    pub cross_distances: Vec<Vec<f64>>,
    /// m/s per link.
    pub speed: Vec<f64>,
}

impl Default for LinkGeometry {
    fn default() -> Self {
        Self::uniform(3, 1700.0, 200.0, 0.2)
    }
}

impl LinkGeometry {
    /// `num_links` links with identical direct distance, cross distance and speed.
    pub fn uniform(num_links: usize, direct: f64, cross: f64, speed: f64) -> Self {
        Self {
            tx_rx_distance: vec![direct; num_links],
            cross_distances: (0..num_links)
                .map(|j| (0..num_links).map(|k| if j == k { direct } else { cross }).collect())
                .collect(),
            speed: vec![speed; num_links],
        }
    }

    pub fn num_links(&self) -> usize {
        self.tx_rx_distance.len()
    }

    /// Distance from the transmitter of `tx` to the receiver of `rx`.
    pub fn distance(&self, tx: usize, rx: usize) -> f64 {
        if tx == rx {
            self.tx_rx_distance[tx]
        } else {
            self.cross_distances[tx][rx]
        }
    }

    pub fn validate(&self, num_links: usize) -> Result<()> {
        let n = self.tx_rx_distance.len();
        if n != num_links {
            return Err(Error::config(
                "geometry.tx_rx_distance",
                format!("expected {num_links} entries, got {n}"),
            ));
        }
        if self.speed.len() != n {
            return Err(Error::config(
                "geometry.speed",
                format!("expected {n} entries, got {}", self.speed.len()),
            ));
        }
        if self.cross_distances.len() != n || self.cross_distances.iter().any(|r| r.len() != n) {
            return Err(Error::config(
                "geometry.cross_distances",
                format!("must be a {n}x{n} matrix"),
            ));
        }
        for tx in 0..n {
            for rx in 0..n {
                let d = self.distance(tx, rx);
                if !(d.is_finite() && d > 0.0) {
                    return Err(Error::config(
                        "geometry",
                        format!("distance tx {tx} -> rx {rx} must be positive, got {d}"),
                    ));
                }
            }
        }
        if let Some(v) = self.speed.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::config("geometry.speed", format!("must be non-negative, got {v}")));
        }
        Ok(())
    }
}

/// How small-scale fading is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FadingMode {
    /// Unit-mean exponential power gain, i.i.d. per (tx, rx, sub-channel, slot).
    #[default]
    Rayleigh,
    /// Fading power gain fixed at 1.
    Unit,
}

/// Linear power gains for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    num_links: usize,
    num_subchannels: usize,
    /// [tx][rx][subchannel]
    gain: Vec<f64>,
    /// [tx][rx]
    shadowing_db: Vec<f64>,
    /// [tx][rx], path loss and shadowing combined
    mean_gain: Vec<f64>,
    pub slot_index: u64,
}

/// Path loss in dB at distance `d` metres.
pub fn path_loss_db(d: f64, params: &ChannelParams) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    Ok(params.pathloss_ref_db
        + 10.0 * params.pathloss_exponent * (d / params.pathloss_ref_dist).log10())
}

/// Clarke-model coherence time `9 / (16 pi f_d)`, capped at `max_coherence_time`
/// for a stationary vehicle.
pub fn coherence_time(speed: f64, carrier_freq: f64, max_coherence_time: f64) -> Result<f64> {
    if !(carrier_freq > 0.0) {
        return Err(Error::Domain(format!("carrier frequency must be positive, got {carrier_freq}")));
    }
    if speed < 0.0 || speed.is_nan() {
        return Err(Error::Domain(format!("speed must be non-negative, got {speed}")));
    }
    if speed == 0.0 {
        return Ok(max_coherence_time);
    }
    let doppler = speed * carrier_freq / SPEED_OF_LIGHT;
    Ok((9.0 / (16.0 * std::f64::consts::PI * doppler)).min(max_coherence_time))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm) * 1e-3
}

impl ChannelRealization {
    /// Draw a fresh realization: new shadowing for every (tx, rx) pair and new
    /// fading on every sub-channel. The slot index starts at zero.
    pub fn draw<R: Rng + ?Sized>(
        geom: &LinkGeometry,
        params: &ChannelParams,
        fading: FadingMode,
        rng: &mut R,
    ) -> Result<Self> {
        let n = geom.num_links();
        geom.validate(n)?;
        let mut shadowing_db = Vec::with_capacity(n * n);
        let mut mean_gain = Vec::with_capacity(n * n);
        for tx in 0..n {
            for rx in 0..n {
                let z: f64 = StandardNormal.sample(rng);
                let x = params.shadowing_sigma_db * z;
                let pl = path_loss_db(geom.distance(tx, rx), params)?;
                shadowing_db.push(x);
                mean_gain.push(db_to_linear(-(pl + x)));
            }
        }
        let mut real = Self {
            num_links: n,
            num_subchannels: params.num_subchannels,
            gain: vec![0.0; n * n * params.num_subchannels],
            shadowing_db,
            mean_gain,
            slot_index: 0,
        };
        real.redraw_fading(fading, rng);
        Ok(real)
    }

    /// Build a realization directly from gains indexed `[tx][rx][c]`
    /// (flattened), with zero shadowing.
    pub fn from_gains(num_links: usize, num_subchannels: usize, gain: Vec<f64>) -> Result<Self> {
        if gain.len() != num_links * num_links * num_subchannels {
            return Err(Error::Shape(format!(
                "expected {} gains, got {}",
                num_links * num_links * num_subchannels,
                gain.len()
            )));
        }
        if gain.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::Domain("gains must be positive and finite".into()));
        }
        let mean_gain = (0..num_links * num_links)
            .map(|i| {
                let s = &gain[i * num_subchannels..(i + 1) * num_subchannels];
                s.iter().sum::<f64>() / num_subchannels as f64
            })
            .collect();
        Ok(Self {
            num_links,
            num_subchannels,
            gain,
            shadowing_db: vec![0.0; num_links * num_links],
            mean_gain,
            slot_index: 0,
        })
    }

    /// Move to the next slot: fading is redrawn, shadowing is kept.
    pub fn advance<R: Rng + ?Sized>(&mut self, fading: FadingMode, rng: &mut R) {
        self.redraw_fading(fading, rng);
        self.slot_index += 1;
    }

    fn redraw_fading<R: Rng + ?Sized>(&mut self, fading: FadingMode, rng: &mut R) {
        let c = self.num_subchannels;
        for (pair, &mean) in self.mean_gain.iter().enumerate() {
            for g in &mut self.gain[pair * c..(pair + 1) * c] {
                let h: f64 = match fading {
                    FadingMode::Rayleigh => Exp1.sample(rng),
                    FadingMode::Unit => 1.0,
                };
                // An exact zero draw would make the gain non-positive.
                *g = mean * h.max(f64::MIN_POSITIVE);
            }
        }
    }

    pub fn num_links(&self) -> usize {
        self.num_links
    }

    pub fn num_subchannels(&self) -> usize {
        self.num_subchannels
    }

    #[inline]
    pub fn gain(&self, tx: usize, rx: usize, c: usize) -> f64 {
        self.gain[(tx * self.num_links + rx) * self.num_subchannels + c]
    }

    /// Path loss and shadowing combined, without fading.
    pub fn mean_gain(&self, tx: usize, rx: usize) -> f64 {
        self.mean_gain[tx * self.num_links + rx]
    }

    pub fn shadowing_db(&self, tx: usize, rx: usize) -> f64 {
        self.shadowing_db[tx * self.num_links + rx]
    }

    pub fn gains(&self) -> &[f64] {
        &self.gain
    }
}

/// Interference received at link `k`'s receiver on sub-channel `c` from every
/// other link assigned to `c`.
pub fn interference(
    k: usize,
    c: usize,
    powers: &[f64],
    assignment: &[usize],
    real: &ChannelRealization,
) -> f64 {
    assignment
        .iter()
        .zip(powers)
        .enumerate()
        .filter(|&(j, (&cj, _))| j != k && cj == c)
        .map(|(j, (_, &pj))| pj * real.gain(j, k, c))
        .sum()
}

/// SINR of link `k` on sub-channel `c`.
pub fn sinr(
    k: usize,
    c: usize,
    powers: &[f64],
    assignment: &[usize],
    real: &ChannelRealization,
    params: &ChannelParams,
) -> Result<f64> {
    let n = real.num_links();
    if powers.len() != n || assignment.len() != n {
        return Err(Error::Shape(format!(
            "expected {n} powers and assignments, got {} and {}",
            powers.len(),
            assignment.len()
        )));
    }
    if k >= n || c >= real.num_subchannels() {
        return Err(Error::Domain(format!("link {k} / sub-channel {c} out of range")));
    }
    if assignment[k] != c {
        return Err(Error::Contract(format!(
            "link {k} is assigned to sub-channel {}, not {c}",
            assignment[k]
        )));
    }
    let signal = powers[k] * real.gain(k, k, c);
    Ok(signal / (params.noise_power + interference(k, c, powers, assignment, real)))
}

/// Shannon rate in bit/s.
pub fn rate_bps(sinr: f64, bandwidth: f64) -> Result<f64> {
    if !(sinr >= 0.0) {
        return Err(Error::Domain(format!("sinr must be non-negative, got {sinr}")));
    }
    Ok(bandwidth * sinr.ln_1p() / std::f64::consts::LN_2)
}

/// Probability that an interference-free Rayleigh link with transmit power `p`
/// and mean gain `mean_gain` cannot deliver `payload` bits within `window` seconds.
pub fn analytic_outage(
    p: f64,
    mean_gain: f64,
    params: &ChannelParams,
    payload: f64,
    window: f64,
) -> Result<f64> {
    if !(window > 0.0) {
        return Err(Error::Domain(format!("window must be positive, got {window}")));
    }
    if payload < 0.0 || payload.is_nan() {
        return Err(Error::Domain(format!("payload must be non-negative, got {payload}")));
    }
    if p <= 0.0 || mean_gain <= 0.0 {
        return Ok(1.0);
    }
    let threshold = (payload / (params.subchannel_bandwidth * window)).exp2() - 1.0;
    let mean_snr = p * mean_gain / params.noise_power;
    Ok((-(-threshold / mean_snr).exp_m1()).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn params() -> ChannelParams {
        ChannelParams::default()
    }

    #[test]
    fn path_loss_reference_points() {
        let p = params();
        assert!((path_loss_db(10.0, &p).unwrap() - 63.3).abs() < 1e-12);
        assert!((path_loss_db(100.0, &p).unwrap() - 90.3).abs() < 1e-12);
        // 10 * 10^0.5 metres: 27 dB/decade times half a decade.
        let d = 10.0 * 10f64.powf(0.5);
        assert!((path_loss_db(d, &p).unwrap() - 76.8).abs() < 1e-9);
        assert!((path_loss_db(31.623, &p).unwrap() - 76.8).abs() < 1e-3);
        assert!(path_loss_db(0.0, &p).is_err());
        assert!(path_loss_db(-1.0, &p).is_err());
    }

    #[test]
    fn coherence_time_clarke() {
        let t = coherence_time(2.0, 5.9e9, 1.0).unwrap();
        // f_d = 2 * 5.9e9 / 2.998e8 = 39.359 Hz
        let fd: f64 = 2.0 * 5.9e9 / 2.998e8;
        assert!((fd - 39.36).abs() < 0.01);
        assert!((t - 4.549e-3).abs() < 1e-5, "{t}");
        let t2 = coherence_time(4.0, 5.9e9, 1.0).unwrap();
        assert!((t2 - t / 2.0).abs() < 1e-15);
        assert_eq!(coherence_time(0.0, 5.9e9, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_draw_equals_path_loss() {
        let mut p = params();
        p.shadowing_sigma_db = 0.0;
        let geom = LinkGeometry::uniform(2, 100.0, 300.0, 1.0);
        let real = ChannelRealization::draw(&geom, &p, FadingMode::Unit, &mut stream(1, &[])).unwrap();
        for c in 0..p.num_subchannels {
            assert_eq!(real.gain(0, 0, c), db_to_linear(-path_loss_db(100.0, &p).unwrap()));
            assert_eq!(real.gain(0, 1, c), db_to_linear(-path_loss_db(300.0, &p).unwrap()));
        }
    }

    #[test]
    fn equal_seeds_give_equal_realizations() {
        let geom = LinkGeometry::default();
        let p = params();
        let mut r1 = stream(42, &[3]);
        let mut r2 = stream(42, &[3]);
        let mut a = ChannelRealization::draw(&geom, &p, FadingMode::Rayleigh, &mut r1).unwrap();
        let mut b = ChannelRealization::draw(&geom, &p, FadingMode::Rayleigh, &mut r2).unwrap();
        for _ in 0..5 {
            assert_eq!(a.gains(), b.gains());
            a.advance(FadingMode::Rayleigh, &mut r1);
            b.advance(FadingMode::Rayleigh, &mut r2);
        }
        assert_eq!(a, b);
    }

    #[test]
    fn shadowing_is_held_across_slots() {
        let geom = LinkGeometry::default();
        let p = params();
        let mut rng = stream(5, &[]);
        let mut real = ChannelRealization::draw(&geom, &p, FadingMode::Rayleigh, &mut rng).unwrap();
        let before = real.clone();
        real.advance(FadingMode::Rayleigh, &mut rng);
        assert_eq!(real.slot_index, 1);
        assert_eq!(real.shadowing_db(0, 1), before.shadowing_db(0, 1));
        assert_ne!(real.gain(0, 0, 0), before.gain(0, 0, 0));
    }

    fn two_link(g: [f64; 4]) -> ChannelRealization {
        // [tx][rx] gains, identical on both sub-channels.
        let mut gains = Vec::new();
        for v in g {
            gains.push(v);
            gains.push(v);
        }
        ChannelRealization::from_gains(2, 2, gains).unwrap()
    }

    #[test]
    fn sinr_constructed_cases() {
        let mut p = params();
        p.noise_power = 0.5;
        let single = ChannelRealization::from_gains(1, 1, vec![1.0]).unwrap();
        assert!((sinr(0, 0, &[0.5], &[0], &single, &p).unwrap() - 1.0).abs() < 1e-15);

        // p1 g11 = 2 sigma^2, p2 g21 = sigma^2
        let real = two_link([2.0, 0.5, 1.0, 1.0]);
        let powers = [0.5, 0.5];
        let co = sinr(0, 0, &powers, &[0, 0], &real, &p).unwrap();
        assert!((co - 1.0).abs() < 1e-15);
        let apart = sinr(0, 0, &powers, &[0, 1], &real, &p).unwrap();
        assert!((apart - 2.0).abs() < 1e-15);
        assert!(matches!(sinr(0, 1, &powers, &[0, 1], &real, &p), Err(Error::Contract(_))));
    }

    #[test]
    fn rate_values() {
        assert!((rate_bps(1.0, 1e6).unwrap() - 1e6).abs() < 1e-6);
        assert_eq!(rate_bps(0.0, 1e6).unwrap(), 0.0);
        assert!((rate_bps(3.0, 1e6).unwrap() - 2e6).abs() < 1e-6);
        assert!(rate_bps(-0.1, 1e6).is_err());
    }

    #[test]
    fn analytic_outage_values() {
        let p = ChannelParams {
            noise_power: 1.0,
            subchannel_bandwidth: 1.0,
            ..params()
        };
        let v = analytic_outage(10.0, 1.0, &p, 1.0, 1.0).unwrap();
        assert!((v - (1.0 - (-0.1f64).exp())).abs() < 1e-15);
        assert!((v - 0.09516).abs() < 1e-5);
        assert!(analytic_outage(10.0, 1.0, &p, 1e-12, 1.0).unwrap() < 1e-11);
        assert!(analytic_outage(1e-12, 1.0, &p, 1.0, 1.0).unwrap() > 1.0 - 1e-9);
        assert_eq!(analytic_outage(0.0, 1.0, &p, 1.0, 1.0).unwrap(), 1.0);
        assert!(analytic_outage(1.0, 1.0, &p, 1.0, 0.0).is_err());
    }

    #[test]
    fn validation_rejects_bad_exponent() {
        let mut p = params();
        p.pathloss_exponent = 7.0;
        assert!(p.validate().is_err());
        p.pathloss_exponent = 2.0;
        p.num_subchannels = 0;
        assert!(p.validate().is_err());
    }

    proptest! {
        #[test]
        fn path_loss_increasing(a in 0.1f64..5000.0, b in 0.1f64..5000.0) {
            prop_assume!(a < b);
            let p = params();
            prop_assert!(path_loss_db(a, &p).unwrap() < path_loss_db(b, &p).unwrap());
        }

        #[test]
        fn coherence_decreasing(a in 0.01f64..60.0, b in 0.01f64..60.0) {
            prop_assume!(a < b);
            let ta = coherence_time(a, 5.9e9, 10.0).unwrap();
            let tb = coherence_time(b, 5.9e9, 10.0).unwrap();
            prop_assert!(tb < ta);
        }

        #[test]
        fn rate_strictly_increasing(a in 0.0f64..1e3, b in 0.0f64..1e3) {
            prop_assume!(a < b);
            prop_assert!(rate_bps(a, 1e6).unwrap() < rate_bps(b, 1e6).unwrap());
        }

        #[test]
        fn sinr_non_increasing_in_interferer_power(g in prop::array::uniform4(0.01f64..10.0),
                                                   p2 in 0.0f64..5.0, extra in 0.0f64..5.0) {
            let real = two_link(g);
            let p = params();
            let lo = sinr(0, 0, &[1.0, p2], &[0, 0], &real, &p).unwrap();
            let hi = sinr(0, 0, &[1.0, p2 + extra], &[0, 0], &real, &p).unwrap();
            prop_assert!(hi <= lo);
            prop_assert!(lo.is_finite() && lo >= 0.0);
        }
    }
}
