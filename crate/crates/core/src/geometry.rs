//! Poisson deployment model and ordered-distance laws.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{invalid, Error, Result};
use crate::numerics::{ln_gamma, regularized_gamma_lower};

/// Radio and deployment parameters of the small-cell tier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkParams {
    /// BS intensity per m².
    pub lambda_s: f64,
    pub eta: f64,
    pub n_t: u32,
    pub n_r: u32,
    /// SIR threshold, linear scale.
    pub epsilon: f64,
    pub p_s: f64,
    pub sigma2: f64,
    /// Mean cell radius in metres; `lambda_s = 1 / (π · cell_radius²)`.
    pub cell_radius: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            lambda_s: intensity_for_radius(50.0),
            eta: 4.0,
            n_t: 4,
            n_r: 2,
            epsilon: 1.0,
            p_s: 1.0,
            sigma2: 0.0,
            cell_radius: 50.0,
        }
    }
}

pub fn intensity_for_radius(radius: f64) -> f64 {
    1.0 / (PI * radius * radius)
}

pub fn radius_for_intensity(lambda: f64) -> f64 {
    (1.0 / (PI * lambda)).sqrt()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

impl NetworkParams {
    pub fn siso() -> Self {
        Self {
            n_t: 1,
            n_r: 1,
            ..Self::default()
        }
    }

    pub fn with_cell_radius(mut self, radius: f64) -> Self {
        self.cell_radius = radius;
        self.lambda_s = intensity_for_radius(radius);
        self
    }

    pub fn with_intensity(mut self, lambda_s: f64) -> Self {
        self.lambda_s = lambda_s;
        self.cell_radius = radius_for_intensity(lambda_s);
        self
    }

    pub fn with_epsilon_db(mut self, db: f64) -> Self {
        self.epsilon = db_to_linear(db);
        self
    }

    pub fn with_antennas(mut self, n_t: u32, n_r: u32) -> Self {
        self.n_t = n_t;
        self.n_r = n_r;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    /// `n_t · n_r`, the Gamma shape of one link's MRT/MRC gain.
    pub fn diversity(&self) -> u32 {
        self.n_t * self.n_r
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_s > 0.0) || !self.lambda_s.is_finite() {
            return Err(invalid("lambda_s", "must be positive and finite"));
        }
        if !(self.eta > 2.0) {
            return Err(Error::DivergentInterference { eta: self.eta });
        }
        if self.n_t < 1 {
            return Err(invalid("n_t", "must be >= 1"));
        }
        if self.n_r < 1 {
            return Err(invalid("n_r", "must be >= 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(invalid("epsilon", "must be > 0"));
        }
        if !(self.p_s > 0.0) {
            return Err(invalid("p_s", "must be > 0"));
        }
        if !(self.sigma2 >= 0.0) {
            return Err(invalid("sigma2", "must be >= 0"));
        }
        if !(self.cell_radius > 0.0) {
            return Err(invalid("cell_radius", "must be > 0"));
        }
        let mismatch = (self.lambda_s * PI * self.cell_radius * self.cell_radius - 1.0).abs();
        if mismatch >= 1e-9 {
            return Err(invalid(
                "cell_radius",
                format!("inconsistent with lambda_s (lambda_s·π·r² − 1 = {mismatch:e})"),
            ));
        }
        Ok(())
    }
}

/// Density of the distance to the `n`-th nearest point of a planar PPP.
pub fn nth_distance_pdf(r: f64, n: u32, lambda: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("distance must be > 0, got {r}")));
    }
    check_order_and_intensity(n, lambda)?;
    let t = lambda * PI * r * r;
    let ln = std::f64::consts::LN_2 - t + n as f64 * t.ln() - r.ln() - ln_gamma(n as f64);
    Ok(ln.exp())
}

/// CDF of the distance to the `n`-th nearest point: `1 − Q(n, λπr²)`.
pub fn nth_distance_cdf(r: f64, n: u32, lambda: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("distance must be >= 0, got {r}")));
    }
    check_order_and_intensity(n, lambda)?;
    regularized_gamma_lower(n as f64, lambda * PI * r * r)
}

fn check_order_and_intensity(n: u32, lambda: f64) -> Result<()> {
    if n < 1 {
        return Err(invalid("n", "order must be >= 1"));
    }
    if !(lambda > 0.0) {
        return Err(invalid("lambda", "intensity must be > 0"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// A sampled BS layout. The identity of a BS is its index in `bs_positions`.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub bs_positions: Vec<Point>,
    pub window_radius: f64,
    pub guard_radius: f64,
}

impl Deployment {
    pub fn new(bs_positions: Vec<Point>, window_radius: f64, guard_radius: f64) -> Self {
        Self {
            bs_positions,
            window_radius,
            guard_radius,
        }
    }

    pub fn len(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bs_positions.is_empty()
    }

    /// Radius of the disc the positions were drawn from.
    pub fn sampled_radius(&self) -> f64 {
        self.window_radius + self.guard_radius
    }

    /// True when `p` is at least `guard_radius` inside the sampled disc.
    pub fn in_trusted_region(&self, p: &Point) -> bool {
        p.norm() <= self.window_radius
    }

    /// `(id, distance)` pairs sorted by distance, ties broken by id.
    pub fn ordered_distances(&self, from: &Point) -> Vec<(usize, f64)> {
        let mut d: Vec<(usize, f64)> = self
            .bs_positions
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.distance(from)))
            .collect();
        d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        d
    }

    pub fn nearest(&self, from: &Point) -> Option<(usize, f64)> {
        self.bs_positions
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.distance(from)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "id,x_m,y_m")?;
        for (i, p) in self.bs_positions.iter().enumerate() {
            writeln!(w, "{i},{},{}", p.x, p.y)?;
        }
        Ok(())
    }

    /// Reads the `id,x_m,y_m` layout written by [`Deployment::write_csv`].
    /// Rows must be in id order so identities survive the round trip.
    pub fn read_csv<R: BufRead>(r: R, window_radius: f64, guard_radius: f64) -> Result<Self> {
        let mut positions = Vec::new();
        for (line_no, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line_no == 0 || line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Io(format!("line {}: expected 3 columns", line_no + 1)));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Io(format!("line {}: {e}", line_no + 1)))
            };
            let id: usize = fields[0]
                .trim()
                .parse()
                .map_err(|e| Error::Io(format!("line {}: {e}", line_no + 1)))?;
            if id != positions.len() {
                return Err(Error::Io(format!(
                    "line {}: ids must be consecutive",
                    line_no + 1
                )));
            }
            positions.push(Point::new(parse(fields[1])?, parse(fields[2])?));
        }
        Ok(Self::new(positions, window_radius, guard_radius))
    }
}

/// Samples a homogeneous PPP of intensity `lambda` on the disc of radius
/// `window_radius + guard_radius` centred at the origin.
pub fn sample_ppp<R: Rng + ?Sized>(
    lambda: f64,
    window_radius: f64,
    guard_radius: f64,
    rng: &mut R,
) -> Result<Deployment> {
    if !(window_radius > 0.0) {
        return Err(invalid("window_radius", "must be > 0"));
    }
    if !(guard_radius >= 0.0) {
        return Err(invalid("guard_radius", "must be >= 0"));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda", "intensity must be >= 0 and finite"));
    }
    let radius = window_radius + guard_radius;
    let mean = lambda * PI * radius * radius;
    let count = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|e| invalid("lambda", e.to_string()))?
            .sample(rng) as usize
    } else {
        0
    };
    let positions = (0..count)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let theta = 2.0 * PI * rng.random::<f64>();
            Point::new(r * theta.cos(), r * theta.sin())
        })
        .collect();
    Ok(Deployment::new(positions, window_radius, guard_radius))
}

/// Uniform-grid bucket index over a deployment for repeated neighbourhood
/// queries along a trajectory.
#[derive(Debug, Clone)]
pub struct SpatialIndex<'a> {
    deployment: &'a Deployment,
    origin: Point,
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<u32>>,
}

impl<'a> SpatialIndex<'a> {
    pub fn new(deployment: &'a Deployment, cell_size: f64) -> Self {
        let extent = deployment.sampled_radius().max(cell_size);
        let cols = ((2.0 * extent / cell_size).ceil() as usize).max(1);
        let origin = Point::new(-extent, -extent);
        let mut buckets = vec![Vec::new(); cols * cols];
        for (id, p) in deployment.bs_positions.iter().enumerate() {
            let (i, j) = Self::cell_of(origin, cell_size, cols, cols, p);
            buckets[j * cols + i].push(id as u32);
        }
        Self {
            deployment,
            origin,
            cell: cell_size,
            cols,
            rows: cols,
            buckets,
        }
    }

    fn cell_of(origin: Point, cell: f64, cols: usize, rows: usize, p: &Point) -> (usize, usize) {
        let i = ((p.x - origin.x) / cell).floor().clamp(0.0, (cols - 1) as f64) as usize;
        let j = ((p.y - origin.y) / cell).floor().clamp(0.0, (rows - 1) as f64) as usize;
        (i, j)
    }

    pub fn deployment(&self) -> &Deployment {
        self.deployment
    }

    pub fn nearest(&self, p: &Point) -> Option<(usize, f64)> {
        if self.deployment.is_empty() {
            return None;
        }
        let (ci, cj) = Self::cell_of(self.origin, self.cell, self.cols, self.rows, p);
        let max_ring = self.cols.max(self.rows);
        let mut best: Option<(usize, f64)> = None;
        for ring in 0..=max_ring {
            let lo_i = ci as isize - ring as isize;
            let hi_i = ci as isize + ring as isize;
            let lo_j = cj as isize - ring as isize;
            let hi_j = cj as isize + ring as isize;
            for j in lo_j..=hi_j {
                for i in lo_i..=hi_i {
                    let on_ring = i == lo_i || i == hi_i || j == lo_j || j == hi_j;
                    if !on_ring || i < 0 || j < 0 || i >= self.cols as isize || j >= self.rows as isize {
                        continue;
                    }
                    for &id in &self.buckets[j as usize * self.cols + i as usize] {
                        let d = self.deployment.bs_positions[id as usize].distance(p);
                        let better = match best {
                            None => true,
                            Some((bid, bd)) => d < bd || (d == bd && (id as usize) < bid),
                        };
                        if better {
                            best = Some((id as usize, d));
                        }
                    }
                }
            }
            if let Some((_, d)) = best {
                // Every cell beyond this ring is at least `ring · cell` away.
                if d <= ring as f64 * self.cell {
                    break;
                }
            }
        }
        best
    }

    /// Ids of all BSs within `radius` of `p`, sorted ascending.
    pub fn within(&self, p: &Point, radius: f64, out: &mut Vec<usize>) {
        out.clear();
        let lo = Point::new(p.x - radius, p.y - radius);
        let hi = Point::new(p.x + radius, p.y + radius);
        let (i0, j0) = Self::cell_of(self.origin, self.cell, self.cols, self.rows, &lo);
        let (i1, j1) = Self::cell_of(self.origin, self.cell, self.cols, self.rows, &hi);
        for j in j0..=j1 {
            for i in i0..=i1 {
                for &id in &self.buckets[j * self.cols + i] {
                    if self.deployment.bs_positions[id as usize].distance(p) <= radius {
                        out.push(id as usize);
                    }
                }
            }
        }
        out.sort_unstable();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate_semi_infinite, QuadratureSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn defaults_are_consistent() {
        let p = NetworkParams::default();
        p.validate().unwrap();
        assert_eq!(p.diversity(), 8);
        assert_abs_diff_eq!(p.lambda_s, 1.0 / (PI * 2500.0), epsilon = 1e-18);
    }

    #[test]
    fn inconsistent_radius_is_rejected() {
        let p = NetworkParams {
            cell_radius: 60.0,
            ..NetworkParams::default()
        };
        assert!(p.validate().is_err());
        assert!(NetworkParams::default().with_cell_radius(60.0).validate().is_ok());
    }

    #[test]
    fn low_path_loss_exponent_is_rejected() {
        let p = NetworkParams::default().with_eta(2.0);
        assert!(matches!(p.validate(), Err(Error::DivergentInterference { .. })));
    }

    #[test]
    fn pdf_normalizes() {
        let lambda = 1.0 / (PI * 50.0 * 50.0);
        for n in [1, 2, 3, 5] {
            let v = integrate_semi_infinite(
                |r| {
                    if r > 0.0 {
                        nth_distance_pdf(r, n, lambda).unwrap()
                    } else {
                        0.0
                    }
                },
                0.0,
                50.0,
                &QuadratureSpec::default(),
            )
            .unwrap();
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn pdf_direct_value() {
        // n = 1, λ = 1/π: f(r) = 2r e^{-r²}
        assert_abs_diff_eq!(
            nth_distance_pdf(1.0, 1, 1.0 / PI).unwrap(),
            2.0 * (-1.0f64).exp(),
            epsilon = 1e-14
        );
        assert!(nth_distance_pdf(0.0, 1, 1.0).is_err());
        assert!(nth_distance_pdf(-1.0, 1, 1.0).is_err());
    }

    #[test]
    fn squared_distance_mean() {
        let lambda = 1.0 / (PI * 50.0 * 50.0);
        for n in [1u32, 2, 4] {
            let m2 = integrate_semi_infinite(
                |r| {
                    if r > 0.0 {
                        r * r * nth_distance_pdf(r, n, lambda).unwrap()
                    } else {
                        0.0
                    }
                },
                0.0,
                50.0,
                &QuadratureSpec::default(),
            )
            .unwrap();
            assert_abs_diff_eq!(m2, n as f64 / (lambda * PI), epsilon = 1e-6 * m2);
        }
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(nth_distance_cdf(0.0, 3, 0.1).unwrap(), 0.0);
        assert_abs_diff_eq!(
            nth_distance_cdf(1.0, 1, 1.0 / PI).unwrap(),
            1.0 - (-1.0f64).exp(),
            epsilon = 1e-14
        );
        assert!(nth_distance_cdf(1e6, 2, 1.0).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn cdf_derivative_matches_pdf() {
        let lambda = 1.0 / (PI * 50.0 * 50.0);
        let h = 1e-3;
        for n in [1u32, 2, 3] {
            for i in 1..40 {
                let r = i as f64 * 5.0;
                let fd = (nth_distance_cdf(r + h, n, lambda).unwrap()
                    - nth_distance_cdf(r - h, n, lambda).unwrap())
                    / (2.0 * h);
                assert!((fd - nth_distance_pdf(r, n, lambda).unwrap()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn zero_intensity_gives_empty_deployment() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = sample_ppp(0.0, 100.0, 10.0, &mut rng).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let a = sample_ppp(0.01, 30.0, 5.0, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = sample_ppp(0.01, 30.0, 5.0, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        assert!(a.bs_positions.iter().all(|p| p.norm() <= 35.0));
    }

    #[test]
    fn mean_count_matches_poisson_mean() {
        let lambda = 0.02;
        let radius = 25.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 10_000;
        let total: usize = (0..draws)
            .map(|_| sample_ppp(lambda, radius, 0.0 + 1e-9, &mut rng).unwrap().len())
            .sum();
        let mean = lambda * PI * radius * radius;
        let sigma = (mean / draws as f64).sqrt();
        let emp = total as f64 / draws as f64;
        assert!((emp - mean).abs() < 3.0 * sigma, "emp={emp} mean={mean}");
    }

    #[test]
    fn nearest_distance_passes_ks_test() {
        let lambda = intensity_for_radius(50.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut samples: Vec<f64> = (0..4000)
            .map(|_| {
                let d = sample_ppp(lambda, 250.0, 0.0 + 1e-9, &mut rng).unwrap();
                d.nearest(&Point::ORIGIN).map(|(_, r)| r).unwrap_or(f64::INFINITY)
            })
            .collect();
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        let mut stat: f64 = 0.0;
        for (i, &r) in samples.iter().enumerate() {
            let f = nth_distance_cdf(r.min(1e9), 1, lambda).unwrap();
            stat = stat
                .max((f - i as f64 / n).abs())
                .max(((i + 1) as f64 / n - f).abs());
        }
        // asymptotic 1% critical value
        assert!(stat < 1.628 / n.sqrt(), "KS statistic {stat}");
    }

    #[test]
    fn ordered_distances_are_monotone() {
        let d = sample_ppp(0.005, 60.0, 20.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let o = d.ordered_distances(&Point::new(3.0, -4.0));
        assert_eq!(o.len(), d.len());
        assert!(o.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn spatial_index_agrees_with_brute_force() {
        let d = sample_ppp(0.002, 200.0, 50.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let idx = SpatialIndex::new(&d, 20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut out = Vec::new();
        for _ in 0..500 {
            let p = Point::new(rng.random_range(-200.0..200.0), rng.random_range(-200.0..200.0));
            assert_eq!(idx.nearest(&p), d.nearest(&p));
            let radius = rng.random_range(1.0..60.0);
            idx.within(&p, radius, &mut out);
            let brute: Vec<usize> = d
                .ordered_distances(&p)
                .into_iter()
                .filter(|&(_, r)| r <= radius)
                .map(|(i, _)| i)
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            assert_eq!(out, brute);
        }
    }

    #[test]
    fn csv_round_trip() {
        let d = sample_ppp(0.01, 20.0, 5.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"id,x_m,y_m\n"));
        let back = Deployment::read_csv(&buf[..], 20.0, 5.0).unwrap();
        assert_eq!(back, d);
    }

    proptest! {
        #[test]
        fn distance_laws_are_scale_invariant(
            r in 0.1f64..300.0,
            n in 1u32..8,
            c in 0.05f64..20.0,
        ) {
            let lambda = intensity_for_radius(50.0);
            let a = nth_distance_cdf(r, n, lambda).unwrap();
            let b = nth_distance_cdf(r * c, n, lambda / (c * c)).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
