//! Toroidal 2D geometry: wrapped positions, periodic distances and
//! displacements, circular mating zones, and the Gaussian crowding kernel.
//!
//! Every distance in the simulator goes through [`periodic_distance`] or
//! [`periodic_displacement`], including zone eligibility.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// World extent in meters. Both sides must be strictly positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub width: f64,
    pub height: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            width: 25.0,
            height: 25.0,
        }
    }
}

impl WorldConfig {
    pub fn new(width: f64, height: f64) -> Self {
        assert!(
            width > 0.0 && height > 0.0,
            "world dimensions must be positive"
        );
        Self { width, height }
    }

    /// Largest possible periodic distance, reached at the half-box corner.
    pub fn max_distance(&self) -> f64 {
        (0.5 * self.width).hypot(0.5 * self.height)
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Uniform position over the whole torus.
    pub fn sample_position<R: Rng + ?Sized>(&self, rng: &mut R) -> Position {
        let x = rng.random::<f64>() * self.width;
        let y = rng.random::<f64>() * self.height;
        wrap_position(Vec2::new(x, y), self)
    }
}

/// Plain 2-vector, used for raw coordinates and displacements.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }

    /// Unit vector in the same direction, or zero for a zero vector.
    pub fn normalized_or_zero(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self.scale(1.0 / n)
        } else {
            Vec2::ZERO
        }
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// A point on the torus, always stored wrapped into `[0, W) x [0, H)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    x: f64,
    y: f64,
}

impl Position {
    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn as_vec(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Wrap-aware translation.
    pub fn offset(&self, delta: Vec2, world: &WorldConfig) -> Position {
        wrap_position(self.as_vec() + delta, world)
    }
}

fn wrap_axis(v: f64, extent: f64) -> f64 {
    let r = v.rem_euclid(extent);
    // rem_euclid rounds tiny negative inputs up to `extent` itself.
    if r >= extent {
        0.0
    } else {
        r
    }
}

/// Map an arbitrary coordinate pair onto the torus. Idempotent.
pub fn wrap_position(p: Vec2, world: &WorldConfig) -> Position {
    Position {
        x: wrap_axis(p.x, world.width),
        y: wrap_axis(p.y, world.height),
    }
}

fn axis_gap(a: f64, b: f64, extent: f64) -> f64 {
    let d = (a - b).abs();
    d.min(extent - d)
}

/// Minimum-image distance between two wrapped positions.
pub fn periodic_distance(a: Position, b: Position, world: &WorldConfig) -> f64 {
    let dx = axis_gap(a.x, b.x, world.width);
    let dy = axis_gap(a.y, b.y, world.height);
    dx.hypot(dy)
}

fn axis_delta(from: f64, to: f64, extent: f64) -> f64 {
    let d = to - from;
    let half = 0.5 * extent;
    if d > half {
        d - extent
    } else if d < -half {
        d + extent
    } else {
        d
    }
}

/// Shortest wrap-aware vector from `from` to `to`.
pub fn periodic_displacement(from: Position, to: Position, world: &WorldConfig) -> Vec2 {
    Vec2::new(
        axis_delta(from.x, to.x, world.width),
        axis_delta(from.y, to.y, world.height),
    )
}

/// Width of the Gaussian kernel used for local crowding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityKernel {
    pub sigma: f64,
}

impl Default for DensityKernel {
    fn default() -> Self {
        Self { sigma: 3.0 }
    }
}

/// `rho_i = sum_{j != i} exp(-d_ij^2 / (2 sigma^2))` over periodic distances.
pub fn local_density(
    i: usize,
    positions: &[Position],
    kernel: DensityKernel,
    world: &WorldConfig,
) -> f64 {
    let two_sigma_sq = 2.0 * kernel.sigma * kernel.sigma;
    positions
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &p)| {
            let d = periodic_distance(positions[i], p, world);
            (-(d * d) / two_sigma_sq).exp()
        })
        .sum()
}

/// Densities for every position, in input order.
pub fn local_densities(
    positions: &[Position],
    kernel: DensityKernel,
    world: &WorldConfig,
) -> Vec<f64> {
    (0..positions.len())
        .map(|i| local_density(i, positions, kernel, world))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatingZone {
    pub center: Position,
    pub radius: f64,
}

impl MatingZone {
    pub fn contains(&self, p: Position, world: &WorldConfig) -> bool {
        periodic_distance(p, self.center, world) <= self.radius
    }
}

/// Lowest-index zone whose disc (boundary included) contains `p`.
pub fn zone_membership(p: Position, zones: &[MatingZone], world: &WorldConfig) -> Option<usize> {
    zones.iter().position(|z| z.contains(p, world))
}

/// Same radius, center resampled uniformly over the world.
pub fn relocate_zone<R: Rng + ?Sized>(
    zone: &MatingZone,
    rng: &mut R,
    world: &WorldConfig,
) -> MatingZone {
    MatingZone {
        center: world.sample_position(rng),
        radius: zone.radius,
    }
}

/// Initial zone layout: `count` zones with uniform random centers.
pub fn place_zones<R: Rng + ?Sized>(
    count: usize,
    radius: f64,
    rng: &mut R,
    world: &WorldConfig,
) -> Vec<MatingZone> {
    (0..count)
        .map(|_| MatingZone {
            center: world.sample_position(rng),
            radius,
        })
        .collect()
}
