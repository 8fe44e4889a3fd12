//! Parametric stand-in for the receiver-side generative pipeline.
//!
//! A sender transmits an image skeleton plus a text prompt; the receiver runs
//! a diffusion model for a chosen number of denoising steps. More steps give
//! a reconstruction closer to the captured image but cost generation time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Skeleton of a full-resolution road image: 0.5 MB.
pub const FULL_SCALE_SKELETON_BITS: f64 = 0.5e6 * 8.0;
/// Original captured road image: 6.7 MB. Never transmitted.
pub const ORIGINAL_IMAGE_BITS: f64 = 6.7e6 * 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContentParams {
    pub similarity_floor: f64,
    pub similarity_ceiling: f64,
    /// Diffusion steps per e-fold of the remaining similarity gap.
    pub similarity_timescale: f64,
    /// s per diffusion step
    pub per_step_gen_time: f64,
    pub skeleton_bits: f64,
    pub prompt_bits: f64,
    /// Payload size (bits) per e-fold of semantic detail carried by the
    /// package. Zero means every payload carries full detail.
    pub semantic_scale_bits: f64,
}

impl Default for ContentParams {
    fn default() -> Self {
        Self {
            similarity_floor: 0.50,
            similarity_ceiling: 0.95,
            similarity_timescale: 8.0,
            per_step_gen_time: 1e-3,
            skeleton_bits: 19_200.0,
            prompt_bits: 800.0,
            semantic_scale_bits: 80_000.0,
        }
    }
}

impl ContentParams {
    /// Defaults with a full-resolution skeleton instead of the desk-scale
    /// 20 kbit package used in experiments.
    pub fn full_scale() -> Self {
        Self {
            skeleton_bits: FULL_SCALE_SKELETON_BITS,
            ..Self::default()
        }
    }

    /// Same parameters with the skeleton resized so the total payload is `bits`.
    pub fn with_payload(&self, bits: f64) -> Self {
        Self {
            skeleton_bits: bits - self.prompt_bits,
            ..self.clone()
        }
    }

    pub fn payload_bits(&self) -> f64 {
        self.skeleton_bits + self.prompt_bits
    }

    pub fn validate(&self) -> Result<()> {
        let ok_unit = |v: f64| v > 0.0 && v < 1.0;
        if !ok_unit(self.similarity_floor) {
            return Err(Error::config(
                "content.similarity_floor",
                format!("must lie in (0, 1), got {}", self.similarity_floor),
            ));
        }
        if !(self.similarity_ceiling > self.similarity_floor && self.similarity_ceiling <= 1.0) {
            return Err(Error::config(
                "content.similarity_ceiling",
                format!(
                    "must lie in (similarity_floor, 1], got {}",
                    self.similarity_ceiling
                ),
            ));
        }
        if !(self.similarity_timescale > 0.0 && self.similarity_timescale.is_finite()) {
            return Err(Error::config("content.similarity_timescale", "must be positive"));
        }
        if !(self.per_step_gen_time >= 0.0 && self.per_step_gen_time.is_finite()) {
            return Err(Error::config("content.per_step_gen_time", "must be non-negative"));
        }
        if !(self.prompt_bits >= 0.0 && self.prompt_bits.is_finite()) {
            return Err(Error::config("content.prompt_bits", "must be non-negative"));
        }
        if !(self.skeleton_bits > self.prompt_bits && self.skeleton_bits.is_finite()) {
            return Err(Error::config(
                "content.skeleton_bits",
                format!(
                    "must exceed prompt_bits ({}), got {}",
                    self.prompt_bits, self.skeleton_bits
                ),
            ));
        }
        if !(self.semantic_scale_bits >= 0.0 && self.semantic_scale_bits.is_finite()) {
            return Err(Error::config("content.semantic_scale_bits", "must be non-negative"));
        }
        Ok(())
    }
}

/// What one link sends and what its receiver reconstructs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContentProfile {
    pub diffusion_steps: u32,
    /// Generation fidelity reached after `diffusion_steps`.
    pub similarity: f64,
    /// Fraction of scene detail carried by the payload, in (0, 1].
    pub semantic_fidelity: f64,
    /// s
    pub generation_time: f64,
    pub payload_bits: f64,
}

impl ContentProfile {
    /// Similarity of the reconstructed image to the captured one.
    pub fn delivered_similarity(&self) -> f64 {
        self.similarity * self.semantic_fidelity
    }
}

pub fn similarity(steps: u32, params: &ContentParams) -> f64 {
    let gap = params.similarity_ceiling - params.similarity_floor;
    params.similarity_floor - gap * (-(steps as f64) / params.similarity_timescale).exp_m1()
}

pub fn generation_time(steps: u32, params: &ContentParams) -> f64 {
    params.per_step_gen_time * steps as f64
}

/// Share of scene detail a payload of `payload_bits` carries.
pub fn semantic_fidelity(payload_bits: f64, params: &ContentParams) -> f64 {
    if params.semantic_scale_bits == 0.0 {
        1.0
    } else {
        -(-payload_bits / params.semantic_scale_bits).exp_m1()
    }
}

/// Profile for a diffusion-step count drawn from the configured `levels`.
pub fn build_profile(steps: u32, params: &ContentParams, levels: &[u32]) -> Result<ContentProfile> {
    if !levels.contains(&steps) {
        return Err(Error::InvalidAction(format!(
            "{steps} diffusion steps is not one of the configured levels {levels:?}"
        )));
    }
    let payload_bits = params.payload_bits();
    Ok(ContentProfile {
        diffusion_steps: steps,
        similarity: similarity(steps, params),
        semantic_fidelity: semantic_fidelity(payload_bits, params),
        generation_time: generation_time(steps, params),
        payload_bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn similarity_curve_points() {
        let p = ContentParams::default();
        assert_eq!(similarity(0, &p), p.similarity_floor);
        let one_tau = similarity(8, &p);
        let expected = p.similarity_floor + 0.6321 * (p.similarity_ceiling - p.similarity_floor);
        assert!((one_tau - expected).abs() < 1e-4 * (p.similarity_ceiling - p.similarity_floor));
        let far = similarity(10_000, &p);
        assert!((far - p.similarity_ceiling).abs() < 1e-12);
    }

    #[test]
    fn generation_time_is_linear() {
        let p = ContentParams::default();
        assert_eq!(generation_time(0, &p), 0.0);
        assert!((generation_time(20, &p) - 0.020).abs() < 1e-15);
        for (a, b) in [(3, 4), (5, 15), (0, 7)] {
            let lhs = generation_time(a + b, &p);
            let rhs = generation_time(a, &p) + generation_time(b, &p);
            assert!((lhs - rhs).abs() < 1e-15);
        }
    }

    #[test]
    fn full_scale_payload() {
        let p = ContentParams::full_scale();
        let prof = build_profile(10, &p, &[5, 10, 15, 20]).unwrap();
        assert_eq!(prof.payload_bits, 4.0e6 + p.prompt_bits);
        let no_prompt = ContentParams { prompt_bits: 0.0, ..p.clone() };
        let prof = build_profile(10, &no_prompt, &[5, 10, 15, 20]).unwrap();
        assert_eq!(prof.payload_bits, no_prompt.skeleton_bits);
        assert!((ORIGINAL_IMAGE_BITS / FULL_SCALE_SKELETON_BITS - 13.4).abs() < 1e-12);
    }

    #[test]
    fn profile_rejects_unknown_level() {
        let p = ContentParams::default();
        assert!(matches!(build_profile(7, &p, &[5, 10]), Err(Error::InvalidAction(_))));
    }

    #[test]
    fn payload_does_not_depend_on_steps() {
        let p = ContentParams::default();
        assert_eq!(p.payload_bits(), 20_000.0);
        let levels = [5, 10, 15, 20];
        let sizes: Vec<f64> = levels
            .iter()
            .map(|&d| build_profile(d, &p, &levels).unwrap().payload_bits)
            .collect();
        assert!(sizes.iter().all(|&s| s == 20_000.0));
    }

    #[test]
    fn semantic_fidelity_saturates() {
        let p = ContentParams::default();
        let small = semantic_fidelity(5_000.0, &p);
        let large = semantic_fidelity(80_000.0, &p);
        assert!(0.0 < small && small < large && large < 1.0);
        let off = ContentParams { semantic_scale_bits: 0.0, ..p };
        assert_eq!(semantic_fidelity(1.0, &off), 1.0);
    }

    #[test]
    fn validation() {
        assert!(ContentParams::default().validate().is_ok());
        let bad = ContentParams { similarity_ceiling: 0.4, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ContentParams::default().with_payload(1000.0);
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn steps_trade_similarity_for_latency(a in 0u32..200, b in 0u32..200) {
            prop_assume!(a < b);
            let p = ContentParams::default();
            prop_assert!(similarity(a, &p) < similarity(b, &p) || similarity(b, &p) == p.similarity_ceiling);
            prop_assert!(similarity(b, &p) <= p.similarity_ceiling);
            prop_assert!(generation_time(a, &p) < generation_time(b, &p));
        }
    }
}
