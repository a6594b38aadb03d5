//! Gauss–Markov vehicle motion and cooperative-set handoff counting.
//!
//! Positions are integrated in absolute coordinates. A handoff is counted in
//! a slot whenever the cooperative set, taken as a set of BS identities,
//! differs from the previous slot. The change of the nearest BS alone is
//! tracked alongside as the single-cell reference.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::cooperation::select_coop_set_indexed;
use crate::error::{invalid, Error, Result};
use crate::geometry::{sample_ppp, Deployment, Point, SpatialIndex};
use crate::numerics::z_for_confidence;
use crate::rng::{purpose, substream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityParams {
    pub alpha: f64,
    /// m/s
    pub mean_speed: f64,
    /// rad
    pub mean_direction: f64,
    pub speed_sigma: f64,
    pub direction_sigma: f64,
    /// Slot length, s.
    pub tau: f64,
    /// s
    pub total_time: f64,
    pub seed: u64,
}

impl Default for MobilityParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            mean_speed: 10.0,
            mean_direction: 0.0,
            speed_sigma: 1.0,
            direction_sigma: 0.1,
            tau: 0.015,
            total_time: 200.0,
            seed: 0,
        }
    }
}

impl MobilityParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid("alpha", "must lie in [0, 1]"));
        }
        if !(self.mean_speed >= 0.0) || !self.mean_speed.is_finite() {
            return Err(invalid("mean_speed", "must be finite and >= 0"));
        }
        if !(self.speed_sigma >= 0.0) || !(self.direction_sigma >= 0.0) {
            return Err(invalid("speed_sigma", "innovation deviations must be >= 0"));
        }
        if !(self.tau > 0.0) {
            return Err(invalid("tau", "must be > 0"));
        }
        if !(self.total_time >= self.tau) || !self.total_time.is_finite() {
            return Err(invalid("total_time", "must be finite and >= tau"));
        }
        Ok(())
    }

    pub fn slots(&self) -> usize {
        (self.total_time / self.tau + 1e-9).floor() as usize
    }

    /// Upper estimate of the distance covered in `total_time`.
    pub fn travel_bound(&self) -> f64 {
        let spread = if self.alpha < 1.0 {
            4.0 * self.speed_sigma
        } else {
            0.0
        };
        (self.mean_speed + spread) * self.total_time
    }
}

/// Speed (m/s) and heading (rad).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub speed: f64,
    pub direction: f64,
}

impl VehicleState {
    pub fn initial(params: &MobilityParams) -> Self {
        Self {
            speed: params.mean_speed,
            direction: params.mean_direction,
        }
    }

    pub fn velocity(&self) -> Point {
        Point::new(
            self.speed * self.direction.cos(),
            self.speed * self.direction.sin(),
        )
    }
}

/// One AR(1) update of speed and heading. The flag reports a negative speed
/// draw that was clamped to zero.
pub fn gauss_markov_step<R: Rng + ?Sized>(
    state: &VehicleState,
    params: &MobilityParams,
    rng: &mut R,
) -> (VehicleState, bool) {
    let a = params.alpha;
    if a == 1.0 {
        return (*state, false);
    }
    let w = (1.0 - a * a).sqrt();
    let zs: f64 = rng.sample(StandardNormal);
    let zd: f64 = rng.sample(StandardNormal);
    let speed = a * state.speed + (1.0 - a) * params.mean_speed + w * params.speed_sigma * zs;
    let direction = a * state.direction + (1.0 - a) * params.mean_direction + w * params.direction_sigma * zd;
    let clamped = speed < 0.0;
    (
        VehicleState {
            speed: speed.max(0.0),
            direction,
        },
        clamped,
    )
}

/// Distance to a BS after moving `step` metres at angle `theta` from the
/// BS-to-vehicle direction.
pub fn update_distance(r: f64, step: f64, theta: f64) -> f64 {
    let rad = r * r + step * step + 2.0 * r * step * theta.cos();
    assert!(rad >= -1e-9 * (r + step).powi(2), "negative radicand {rad}");
    rad.max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: usize,
    pub time: f64,
    pub position: Point,
    pub speed: f64,
    pub direction: f64,
    pub coop_set: Vec<usize>,
    pub handoff: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityTrace {
    /// Empty when only totals were requested.
    pub records: Vec<SlotRecord>,
    pub handoff_count: u64,
    /// Changes of the nearest-BS identity.
    pub serving_handoff_count: u64,
    /// Observed span, s.
    pub duration: f64,
    pub truncated: bool,
    pub clamped_speeds: u64,
}

impl MobilityTrace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "slot,t_s,x_m,y_m,speed_mps,dir_rad,coop_set_size,coop_set_ids,handoff"
        )?;
        for r in &self.records {
            let ids: Vec<String> = r.coop_set.iter().map(|i| i.to_string()).collect();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.slot,
                r.time,
                r.position.x,
                r.position.y,
                r.speed,
                r.direction,
                r.coop_set.len(),
                ids.join(";"),
                r.handoff as u8
            )?;
        }
        Ok(())
    }
}

/// Drives one vehicle from `start` through `deployment`.
pub fn simulate_mobility_from<R: Rng + ?Sized>(
    deployment: &Deployment,
    start: Point,
    mob: &MobilityParams,
    rho: f64,
    rng: &mut R,
    keep_records: bool,
) -> Result<MobilityTrace> {
    mob.validate()?;
    if deployment.is_empty() {
        return Err(Error::EmptyDeployment);
    }
    if !deployment.in_trusted_region(&start) {
        return Err(Error::StartOutsideTrustedRegion);
    }
    // grid cell of about one mean BS spacing
    let area = PI * deployment.sampled_radius().powi(2);
    let index = SpatialIndex::new(deployment, (area / deployment.len() as f64).sqrt().max(1e-3));

    let mut state = VehicleState::initial(mob);
    let mut pos = start;
    let mut set = Vec::new();
    let mut serving = select_coop_set_indexed(&index, &pos, rho, &mut set)?;
    let mut next = Vec::with_capacity(set.capacity());
    let mut trace = MobilityTrace {
        records: Vec::new(),
        handoff_count: 0,
        serving_handoff_count: 0,
        duration: 0.0,
        truncated: false,
        clamped_speeds: 0,
    };
    let record = |trace: &mut MobilityTrace, slot, pos, st: &VehicleState, set: &Vec<usize>, handoff| {
        if keep_records {
            trace.records.push(SlotRecord {
                slot,
                time: slot as f64 * mob.tau,
                position: pos,
                speed: st.speed,
                direction: st.direction,
                coop_set: set.clone(),
                handoff,
            });
        }
    };
    record(&mut trace, 0, pos, &state, &set, false);

    for slot in 1..=mob.slots() {
        let (s, clamped) = gauss_markov_step(&state, mob, rng);
        state = s;
        trace.clamped_speeds += clamped as u64;
        let v = state.velocity();
        let moved = Point::new(pos.x + v.x * mob.tau, pos.y + v.y * mob.tau);
        if !deployment.in_trusted_region(&moved) {
            trace.truncated = true;
            break;
        }
        pos = moved;
        let nearest = select_coop_set_indexed(&index, &pos, rho, &mut next)?;
        let handoff = next != set;
        trace.handoff_count += handoff as u64;
        trace.serving_handoff_count += (nearest != serving) as u64;
        serving = nearest;
        std::mem::swap(&mut set, &mut next);
        trace.duration = slot as f64 * mob.tau;
        record(&mut trace, slot, pos, &state, &set, handoff);
    }
    Ok(trace)
}

/// Trace from the origin with the stream of replication 0 of `mob.seed`.
pub fn simulate_mobility(deployment: &Deployment, mob: &MobilityParams, rho: f64) -> Result<MobilityTrace> {
    let mut rng = substream(mob.seed, purpose::MOBILITY, 0);
    simulate_mobility_from(deployment, Point::ORIGIN, mob, rho, &mut rng, true)
}

/// Deployment for replication `rep`: the disc holds the whole trajectory
/// plus a guard of five cell radii.
pub fn replication_deployment(lambda_s: f64, mob: &MobilityParams, rep: u64) -> Result<Deployment> {
    let radius = (1.0 / (PI * lambda_s)).sqrt();
    let window = mob.travel_bound() + 2.0 * radius;
    let mut rng = substream(mob.seed, purpose::DEPLOYMENT, rep);
    sample_ppp(lambda_s, window, 5.0 * radius, &mut rng)
}

/// Independent replications, each on its own deployment and motion stream.
/// Only totals are kept.
pub fn run_replications(
    lambda_s: f64,
    mob: &MobilityParams,
    rho: f64,
    replications: u64,
) -> Result<Vec<MobilityTrace>> {
    mob.validate()?;
    if !(lambda_s > 0.0) {
        return Err(invalid("lambda_s", "must be > 0"));
    }
    (0..replications)
        .into_par_iter()
        .map(|rep| {
            let dep = replication_deployment(lambda_s, mob, rep)?;
            let mut rng = substream(mob.seed, purpose::MOBILITY, rep);
            simulate_mobility_from(&dep, Point::ORIGIN, mob, rho, &mut rng, false)
        })
        .collect()
}

/// Pooled handoff rate with a normal-approximation interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandoffRate {
    /// Handoffs per second.
    pub rate: f64,
    pub std_error: f64,
    pub confidence: f64,
    pub total_handoffs: u64,
    pub total_duration: f64,
    pub replications: usize,
}

impl HandoffRate {
    pub fn ci(&self) -> (f64, f64) {
        let h = z_for_confidence(self.confidence) * self.std_error;
        (self.rate - h, self.rate + h)
    }
}

fn pooled_rate(counts: &[(u64, f64)]) -> Result<HandoffRate> {
    if counts.is_empty() {
        return Err(Error::NoTrials);
    }
    let total_h: u64 = counts.iter().map(|c| c.0).sum();
    let total_t: f64 = counts.iter().map(|c| c.1).sum();
    if !(total_t > 0.0) {
        return Err(Error::ZeroDuration);
    }
    let rate = total_h as f64 / total_t;
    let n = counts.len();
    let std_error = if n >= 2 {
        let ss: f64 = counts.iter().map(|&(h, t)| (h as f64 - rate * t).powi(2)).sum();
        (n as f64 / (n as f64 - 1.0) * ss).sqrt() / total_t
    } else {
        (total_h as f64).sqrt() / total_t
    };
    Ok(HandoffRate {
        rate,
        std_error,
        confidence: 0.95,
        total_handoffs: total_h,
        total_duration: total_t,
        replications: n,
    })
}

/// `Σ handoffs / Σ duration` over `traces`; the standard error is the
/// ratio-estimator form across replications.
pub fn handoff_rate(traces: &[MobilityTrace]) -> Result<HandoffRate> {
    let c: Vec<(u64, f64)> = traces.iter().map(|t| (t.handoff_count, t.duration)).collect();
    pooled_rate(&c)
}

/// Same estimator applied to nearest-BS changes.
pub fn serving_handoff_rate(traces: &[MobilityTrace]) -> Result<HandoffRate> {
    let c: Vec<(u64, f64)> = traces
        .iter()
        .map(|t| (t.serving_handoff_count, t.duration))
        .collect();
    pooled_rate(&c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> MobilityParams {
        MobilityParams {
            total_time: 20.0,
            ..MobilityParams::default()
        }
    }

    #[test]
    fn unit_memory_keeps_state() {
        let p = MobilityParams::default();
        let s = VehicleState {
            speed: 7.0,
            direction: 1.0,
        };
        let (n, c) = gauss_markov_step(&s, &p, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(n, s);
        assert!(!c);
    }

    #[test]
    fn zero_memory_forgets_state() {
        let p = MobilityParams {
            alpha: 0.0,
            ..MobilityParams::default()
        };
        let a = gauss_markov_step(
            &VehicleState {
                speed: 1.0,
                direction: 0.0,
            },
            &p,
            &mut ChaCha8Rng::seed_from_u64(3),
        );
        let b = gauss_markov_step(
            &VehicleState {
                speed: 30.0,
                direction: 2.0,
            },
            &p,
            &mut ChaCha8Rng::seed_from_u64(3),
        );
        assert_eq!(a, b);
    }

    #[test]
    fn stationary_mean_speed() {
        let p = MobilityParams {
            alpha: 0.5,
            speed_sigma: 2.0,
            ..MobilityParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = VehicleState::initial(&p);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            s = gauss_markov_step(&s, &p, &mut rng).0;
            sum += s.speed;
        }
        // AR(1) with coefficient α: variance of the mean ≈ σ²(1+α)/((1−α)n)
        let se = (4.0 * 1.5 / 0.5 / n as f64).sqrt();
        assert!((sum / n as f64 - p.mean_speed).abs() < 3.0 * se);
    }

    #[test]
    fn negative_speeds_are_clamped_and_counted() {
        let p = MobilityParams {
            alpha: 0.0,
            mean_speed: 0.0,
            speed_sigma: 1.0,
            ..MobilityParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut clamps = 0;
        for _ in 0..1000 {
            let (s, c) = gauss_markov_step(&VehicleState::initial(&p), &p, &mut rng);
            assert!(s.speed >= 0.0);
            clamps += c as u32;
        }
        assert!(clamps > 400 && clamps < 600);
    }

    #[test]
    fn distance_update_examples() {
        assert!((update_distance(10.0, 3.0, 0.0) - 13.0).abs() < 1e-12);
        assert!((update_distance(10.0, 3.0, PI) - 7.0).abs() < 1e-12);
        assert!((update_distance(2.0, 3.0, PI) - 1.0).abs() < 1e-12);
        assert!((update_distance(3.0, 4.0, PI / 2.0) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn distance_update_matches_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let bs = Point::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0));
            let p = Point::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0));
            let dir: f64 = rng.random_range(-PI..PI);
            let step: f64 = rng.random_range(0.0..5.0);
            let q = Point::new(p.x + step * dir.cos(), p.y + step * dir.sin());
            let theta = dir - (p.y - bs.y).atan2(p.x - bs.x);
            let r = p.distance(&bs);
            assert!((update_distance(r, step, theta) - q.distance(&bs)).abs() < 1e-9);
        }
    }

    #[test]
    fn stationary_vehicle_never_hands_off() {
        let p = MobilityParams {
            mean_speed: 0.0,
            ..params()
        };
        let dep = replication_deployment(1.0 / (PI * 2500.0), &p, 0).unwrap();
        let t = simulate_mobility(&dep, &p, 1.5).unwrap();
        assert_eq!(t.handoff_count, 0);
        assert_eq!(t.records.len(), p.slots() + 1);
    }

    #[test]
    fn unit_threshold_tracks_serving_changes() {
        let p = params();
        let dep = replication_deployment(1.0 / (PI * 2500.0), &p, 2).unwrap();
        let t = simulate_mobility(&dep, &p, 1.0).unwrap();
        assert_eq!(t.handoff_count, t.serving_handoff_count);
        for w in t.records.windows(2) {
            assert_eq!(w[1].coop_set.len(), 1);
            assert_eq!(w[1].handoff, w[0].coop_set != w[1].coop_set);
        }
    }

    #[test]
    fn handoff_flags_follow_set_changes() {
        let p = params();
        let dep = replication_deployment(1.0 / (PI * 2500.0), &p, 3).unwrap();
        let t = simulate_mobility(&dep, &p, 1.5).unwrap();
        let mut count = 0;
        for w in t.records.windows(2) {
            assert_eq!(w[1].handoff, w[0].coop_set != w[1].coop_set);
            count += w[1].handoff as u64;
        }
        assert_eq!(count, t.handoff_count);
        assert!(count > 0);
    }

    #[test]
    fn leaving_the_window_truncates() {
        let p = MobilityParams {
            total_time: 100.0,
            ..MobilityParams::default()
        };
        let dep = sample_ppp(1e-3, 200.0, 50.0, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let t = simulate_mobility(&dep, &p, 1.2).unwrap();
        assert!(t.truncated);
        assert!(t.duration < 20.5 && t.duration > 19.5);
    }

    #[test]
    fn start_outside_trusted_region_is_rejected() {
        let dep = sample_ppp(1e-3, 200.0, 50.0, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let r = simulate_mobility_from(
            &dep,
            Point::new(230.0, 0.0),
            &params(),
            1.2,
            &mut ChaCha8Rng::seed_from_u64(1),
            false,
        );
        assert_eq!(r, Err(Error::StartOutsideTrustedRegion));
        let empty = Deployment::new(vec![], 100.0, 10.0);
        assert_eq!(
            simulate_mobility(&empty, &params(), 1.2),
            Err(Error::EmptyDeployment)
        );
    }

    #[test]
    fn trace_csv_layout() {
        let p = MobilityParams {
            total_time: 0.03,
            ..params()
        };
        let dep = replication_deployment(1.0 / (PI * 2500.0), &p, 0).unwrap();
        let t = simulate_mobility(&dep, &p, 2.0).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "slot,t_s,x_m,y_m,speed_mps,dir_rad,coop_set_size,coop_set_ids,handoff"
        );
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,0,0,0,10,0,"));
    }

    #[test]
    fn rate_estimator() {
        let trace = |h, d| MobilityTrace {
            records: vec![],
            handoff_count: h,
            serving_handoff_count: 0,
            duration: d,
            truncated: false,
            clamped_speeds: 0,
        };
        let r = handoff_rate(&[trace(0, 10.0), trace(0, 5.0)]).unwrap();
        assert_eq!(r.rate, 0.0);
        let r = handoff_rate(&[trace(4, 10.0), trace(2, 10.0)]).unwrap();
        assert!((r.rate - 0.3).abs() < 1e-15);
        assert!((r.std_error - (2.0f64 * 2.0).sqrt() / 20.0).abs() < 1e-12);
        assert_eq!(handoff_rate(&[trace(0, 0.0)]), Err(Error::ZeroDuration));
        assert_eq!(handoff_rate(&[]), Err(Error::NoTrials));
    }

    #[test]
    fn replications_are_deterministic_across_pools() {
        let p = MobilityParams {
            alpha: 0.7,
            total_time: 5.0,
            ..MobilityParams::default()
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_replications(1.0 / (PI * 2500.0), &p, 1.2, 6).unwrap())
        };
        assert_eq!(run(1), run(3));
    }
}
