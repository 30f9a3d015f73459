//! Concrete lens and slit configurations: periodic Eaton-lens families
//! L(Lambda, centers, radii), the closed ergodic curve `gamma_w`,
//! admissibility and properness checks, the flat-lens (slit) replacement,
//! separation by a lattice vector, and railed rescaling of slit systems to a
//! new normal direction.

use crate::geom::{Lattice, Vec2};
use crate::skeleton::{Fold, Skeleton, SlitFold};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("lens centers are not pairwise distinct modulo the lattice")]
    ImproperCenters,
    #[error("slits are parallel to the separating vector")]
    SlitParallelToW,
    #[error("railed rescaling blocked: deformation regions of lenses {0} and {1} collide")]
    DeformationBlocked(usize, usize),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// A Lambda-periodic family of Eaton lenses.
#[derive(Debug, Clone)]
pub struct LensConfiguration {
    pub lattice: Lattice,
    /// (center, radius) per lens in one fundamental cell; zero-radius lenses
    /// are dropped at construction (a lens of radius zero disappears).
    pub lenses: Vec<(Vec2, f64)>,
}

impl LensConfiguration {
    pub fn new(lattice: Lattice, lenses: Vec<(Vec2, f64)>) -> Result<Self, ConfigError> {
        let mut kept: Vec<(Vec2, f64)> = Vec::new();
        for (c, r) in lenses.into_iter().filter(|&(_, r)| r > 0.0) {
            // a listed pair can degenerate onto one lens orbit (the gamma_w
            // pair does at theta = pi/2); identical lenses merge, genuinely
            // conflicting ones are improper
            match kept.iter().find(|&&(ck, _)| lattice.min_dist(c - ck, false) < 1e-9) {
                Some(&(_, rk)) if (rk - r).abs() < 1e-9 => continue,
                Some(_) => return Err(ConfigError::ImproperCenters),
                None => kept.push((c, r)),
            }
        }
        Ok(LensConfiguration { lattice, lenses: kept })
    }

    /// Centers pairwise distinct modulo the lattice.
    pub fn is_proper(&self, tol: f64) -> bool {
        for i in 0..self.lenses.len() {
            for j in (i + 1)..self.lenses.len() {
                let d = self.lattice.min_dist(self.lenses[i].0 - self.lenses[j].0, false);
                if d < tol {
                    return false;
                }
            }
        }
        true
    }
}

/// A Lambda-periodic family of slit-folds parallel to a common unit vector.
#[derive(Debug, Clone)]
pub struct SlitConfiguration {
    pub lattice: Lattice,
    /// Common slit direction.
    pub direction: Vec2,
    /// (center, half-length) per slit in one fundamental cell.
    pub slits: Vec<(Vec2, f64)>,
}

impl SlitConfiguration {
    pub fn skeleton(&self) -> Skeleton {
        Skeleton {
            lattice: Some(self.lattice),
            folds: self
                .slits
                .iter()
                .map(|&(c, r)| Fold::Slit(SlitFold::new(c - self.direction * r, c + self.direction * r)))
                .collect(),
        }
    }
}

/// `l(theta) = 2 - cot(theta) (1 - cot(theta))`.
fn l_of(theta: f64) -> f64 {
    let cot = theta.cos() / theta.sin();
    2.0 - cot * (1.0 - cot)
}

/// The closed curve of admissible Eaton lens configurations parameterised by
/// the light direction. Branch layout over [0, pi]:
///
/// * `[0, pi/4]`: lattice Z(0,4) + Z(4,2); central lens of radius
///   `2 sin(theta)` at the origin, a symmetric pair at `+-(1, 1 + tan theta)`
///   of radius `cos theta`;
/// * `[pi/4, pi/2]`: lattice Z(0,4) + Z(2 l(theta), 2); central radius
///   `l(theta) sin(theta)`, pair at `+-(cot theta, 2)` of radius `cos theta`;
/// * `[pi/2, 3pi/4]` and `[3pi/4, pi]`: the reflections of the first two
///   branches across the vertical axis (`theta -> pi - theta`), which is how
///   the admissibility proof continues the curve; radii stay positive.
///
/// At `theta = pi` the configuration equals the one at 0 translated by (0,2).
pub fn gamma_w(theta: f64) -> LensConfiguration {
    // the curve is defined on [0, pi] with the endpoint closing up only
    // after a translation, so keep theta = pi on the final branch
    let t = if (0.0..=std::f64::consts::PI).contains(&theta) {
        theta
    } else {
        theta.rem_euclid(std::f64::consts::PI)
    };
    let quarter = std::f64::consts::FRAC_PI_4;
    if t <= quarter {
        let lat = Lattice::new(Vec2::new(0.0, 4.0), Vec2::new(4.0, 2.0)).unwrap();
        let c = Vec2::new(1.0, 1.0 + t.tan());
        LensConfiguration::new(
            lat,
            vec![
                (Vec2::ZERO, 2.0 * t.sin()),
                (c, t.cos()),
                (-c, t.cos()),
            ],
        )
        .expect("gamma_w branch 1")
    } else if t <= 2.0 * quarter {
        let l = l_of(t);
        let lat = Lattice::new(Vec2::new(0.0, 4.0), Vec2::new(2.0 * l, 2.0)).unwrap();
        let cot = t.cos() / t.sin();
        let c = Vec2::new(cot, 2.0);
        LensConfiguration::new(
            lat,
            vec![(Vec2::ZERO, l * t.sin()), (c, t.cos()), (-c, t.cos())],
        )
        .expect("gamma_w branch 2")
    } else {
        // Reflect the configuration at pi - t across the vertical axis.
        let mirrored = gamma_w(std::f64::consts::PI - t);
        let refl = |v: Vec2| Vec2::new(-v.x, v.y);
        let lat = Lattice::new(refl(mirrored.lattice.g1), refl(mirrored.lattice.g2)).unwrap();
        LensConfiguration {
            lattice: lat,
            lenses: mirrored.lenses.iter().map(|&(c, r)| (refl(c), r)).collect(),
        }
    }
}

/// Admissibility: no pair of lenses in the periodic family overlaps;
/// tangency counts as admissible. Returns the worst pair and its slack
/// `dist - (r_i + r_j)` alongside the verdict.
pub fn is_admissible(cfg: &LensConfiguration, tol: f64) -> (bool, Option<(usize, usize, f64)>) {
    let mut worst: Option<(usize, usize, f64)> = None;
    for i in 0..cfg.lenses.len() {
        for j in i..cfg.lenses.len() {
            let (ci, ri) = cfg.lenses[i];
            let (cj, rj) = cfg.lenses[j];
            let d = cfg.lattice.min_dist(ci - cj, i == j);
            let slack = d - (ri + rj);
            if worst.is_none() || slack < worst.unwrap().2 {
                worst = Some((i, j, slack));
            }
        }
    }
    match worst {
        None => (true, None),
        Some((_, _, slack)) => (slack >= -tol, worst),
    }
}

/// Flat-lens replacement: each lens becomes a slit of the same center whose
/// half-length equals the radius, attached perpendicular to the light
/// direction.
pub fn lens_to_slits(cfg: &LensConfiguration, theta: f64) -> SlitConfiguration {
    let v = Vec2::dir(theta).perp();
    SlitConfiguration {
        lattice: cfg.lattice,
        direction: v,
        slits: cfg.lenses.clone(),
    }
}

/// Separation of a slit system by a nonzero lattice vector `w`: every shadow
/// cylinder `S_j(w) = {c_j + s v + t w}` is proper (not the whole torus) and
/// two shadows are either disjoint or their centers lie on one line parallel
/// to `w` modulo the lattice.
pub fn is_separated(slits: &SlitConfiguration, w: Vec2) -> Result<bool, ConfigError> {
    if !slits.lattice.contains(w, 1e-9) || w.norm() < 1e-12 {
        return Err(ConfigError::Invalid("w must be a nonzero lattice vector".into()));
    }
    let wn = w.norm();
    let v = slits.direction;
    if v.cross(w).abs() < 1e-12 * wn {
        return Err(ConfigError::SlitParallelToW);
    }
    // Project along w: the transversal circle has length covol / |w|; a slit
    // of half-length r projects to an interval of half-width r |cross(w^, v)|.
    let circ = slits.lattice.covolume() / wn;
    let w_hat = w * (1.0 / wn);
    let proj = |p: Vec2| w_hat.cross(p).rem_euclid(circ);
    let half_widths: Vec<f64> = slits
        .slits
        .iter()
        .map(|&(_, r)| r * w_hat.cross(v).abs())
        .collect();
    // proper: no strip covers the whole circle
    for &h in &half_widths {
        if 2.0 * h >= circ - 1e-9 {
            return Ok(false);
        }
    }
    let wrapped_dist = |a: f64, b: f64| -> f64 {
        let d = (a - b).rem_euclid(circ);
        d.min(circ - d)
    };
    for i in 0..slits.slits.len() {
        for j in (i + 1)..slits.slits.len() {
            let di = proj(slits.slits[i].0);
            let dj = proj(slits.slits[j].0);
            let gap = wrapped_dist(di, dj);
            if gap < 1e-9 {
                continue; // centers on one w-line: allowed to overlap
            }
            if gap < half_widths[i] + half_widths[j] - 1e-9 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The swept deformation region of one slit under a railed rescale from
/// normal direction `theta` to `xi`: the parallelogram
/// `{c + r t e^{i theta} (s tan(theta - xi) + i) : t in [-1,1], s in [0,1]}`,
/// spanned from the original slit (s = 0) to the rescaled one (s = 1).
pub fn delta_region(center: Vec2, radius: f64, theta: f64, xi: f64) -> (Vec2, Vec2, Vec2) {
    let e = Vec2::dir(theta);
    let side0 = e.perp() * radius; // r * e^{i theta} * i
    let tanp = (theta - xi).tan();
    let side1 = (e * tanp + e.perp()) * radius; // r e^{i theta} (tan + i)
    // parallelogram with corners center +- side0, center +- side1:
    // origin at center - side0, spanned by 2*side0 and (side1 - side0)
    (center - side0, side0 * 2.0, side1 - side0)
}

/// Result of a railed rescale.
#[derive(Debug, Clone)]
pub struct RailedRescale {
    pub slits: SlitConfiguration,
    /// Swept regions, one per slit, as (origin, edge1, edge2) parallelograms.
    pub regions: Vec<(Vec2, Vec2, Vec2)>,
}

/// Re-orients all slits perpendicular to `xi`, scaling half-lengths by
/// `sec(theta - xi)`. Valid iff the swept regions are pairwise disjoint
/// modulo the lattice; then the input and output systems are
/// railed-equivalent in direction `theta`.
pub fn railed_rescale(slits: &SlitConfiguration, theta: f64, xi: f64) -> Result<RailedRescale, ConfigError> {
    if ((theta - xi).abs() % std::f64::consts::PI) >= std::f64::consts::FRAC_PI_2 {
        return Err(ConfigError::Invalid("|theta - xi| must be below pi/2".into()));
    }
    let sec = 1.0 / (theta - xi).cos();
    let out = SlitConfiguration {
        lattice: slits.lattice,
        direction: Vec2::dir(xi).perp(),
        slits: slits
            .slits
            .iter()
            .map(|&(c, r)| (c, r * sec.abs()))
            .collect(),
    };
    let regions: Vec<(Vec2, Vec2, Vec2)> = slits
        .slits
        .iter()
        .map(|&(c, r)| delta_region(c, r, theta, xi))
        .collect();
    // Pairwise disjointness over nearby lattice translates.
    let lat = slits.lattice.reduce();
    let max_ext = regions
        .iter()
        .map(|(_, e1, e2)| e1.norm() + e2.norm())
        .fold(0.0f64, f64::max);
    let reach = ((2.0 * max_ext + lat.g2.norm()) / lat.g1.norm()).ceil() as i64 + 1;
    for i in 0..regions.len() {
        for j in i..regions.len() {
            for m in -reach..=reach {
                for n in -reach..=reach {
                    if i == j && m == 0 && n == 0 {
                        continue;
                    }
                    let shift = lat.point(m, n);
                    if parallelograms_overlap(&regions[i], &shifted(&regions[j], shift)) {
                        return Err(ConfigError::DeformationBlocked(i, j));
                    }
                }
            }
        }
    }
    Ok(RailedRescale { slits: out, regions })
}

fn shifted(r: &(Vec2, Vec2, Vec2), v: Vec2) -> (Vec2, Vec2, Vec2) {
    (r.0 + v, r.1, r.2)
}

/// Separating-axis overlap test for two (possibly degenerate) parallelograms.
fn parallelograms_overlap(a: &(Vec2, Vec2, Vec2), b: &(Vec2, Vec2, Vec2)) -> bool {
    let corners = |p: &(Vec2, Vec2, Vec2)| -> [Vec2; 4] {
        [p.0, p.0 + p.1, p.0 + p.1 + p.2, p.0 + p.2]
    };
    let ca = corners(a);
    let cb = corners(b);
    let mut axes = Vec::new();
    for e in [a.1, a.2, b.1, b.2] {
        if e.norm() > 1e-15 {
            axes.push(e.perp().normalized());
        }
    }
    if axes.is_empty() {
        return false;
    }
    for ax in axes {
        let pa: Vec<f64> = ca.iter().map(|&p| ax.dot(p)).collect();
        let pb: Vec<f64> = cb.iter().map(|&p| ax.dot(p)).collect();
        let (amin, amax) = (pa.iter().cloned().fold(f64::MAX, f64::min), pa.iter().cloned().fold(f64::MIN, f64::max));
        let (bmin, bmax) = (pb.iter().cloned().fold(f64::MAX, f64::min), pb.iter().cloned().fold(f64::MIN, f64::max));
        if amax <= bmin + 1e-12 || bmax <= amin + 1e-12 {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

/// On-disk lens configuration:
/// `{"lattice": [[g1x,g1y],[g2x,g2y]], "lenses": [{"c":[x,y],"r":r}, ...]}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct LensConfigJson {
    pub lattice: [[f64; 2]; 2],
    pub lenses: Vec<LensJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LensJson {
    pub c: [f64; 2],
    pub r: f64,
}

impl LensConfigJson {
    pub fn build(&self) -> Result<LensConfiguration, ConfigError> {
        let g1 = Vec2::new(self.lattice[0][0], self.lattice[0][1]);
        let g2 = Vec2::new(self.lattice[1][0], self.lattice[1][1]);
        if !(g1.is_finite() && g2.is_finite()) {
            return Err(ConfigError::Invalid("non-finite lattice".into()));
        }
        let lat = Lattice::new(g1, g2).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let mut lenses = Vec::new();
        for l in &self.lenses {
            let c = Vec2::new(l.c[0], l.c[1]);
            if !c.is_finite() || !l.r.is_finite() || l.r < 0.0 {
                return Err(ConfigError::Invalid("bad lens entry".into()));
            }
            lenses.push((c, l.r));
        }
        LensConfiguration::new(lat, lenses)
    }

    pub fn from_config(cfg: &LensConfiguration) -> Self {
        LensConfigJson {
            lattice: [
                [cfg.lattice.g1.x, cfg.lattice.g1.y],
                [cfg.lattice.g2.x, cfg.lattice.g2.y],
            ],
            lenses: cfg
                .lenses
                .iter()
                .map(|&(c, r)| LensJson { c: [c.x, c.y], r })
                .collect(),
        }
    }
}

/// Parses and validates a lens configuration from JSON bytes (fuzzing entry
/// point).
pub fn parse_lens_config_json(bytes: &[u8]) -> Result<LensConfiguration, String> {
    let j: LensConfigJson = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    j.build().map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn config_eq_mod_translation(a: &LensConfiguration, b: &LensConfiguration, shift: Vec2, tol: f64) -> bool {
        if a.lenses.len() != b.lenses.len() {
            return false;
        }
        // lattices agree (as lattices)
        for g in [a.lattice.g1, a.lattice.g2] {
            if !b.lattice.contains(g, tol) {
                return false;
            }
        }
        for g in [b.lattice.g1, b.lattice.g2] {
            if !a.lattice.contains(g, tol) {
                return false;
            }
        }
        // every lens of a matches a lens of b + shift mod lattice
        a.lenses.iter().all(|&(c, r)| {
            b.lenses
                .iter()
                .any(|&(cb, rb)| (r - rb).abs() < tol && a.lattice.min_dist(c - (cb + shift), false) < tol)
        })
    }

    #[test]
    fn gamma_w_at_zero() {
        let cfg = gamma_w(0.0);
        // central lens disappears (radius 0), the pair at +-(1,1) of radius 1 stays
        assert_eq!(cfg.lenses.len(), 2);
        assert!((cfg.lenses[0].0 - Vec2::new(1.0, 1.0)).norm() < 1e-12);
        assert!((cfg.lenses[0].1 - 1.0).abs() < 1e-12);
        // tangent pair: admissible with equality
        let (ok, worst) = is_admissible(&cfg, 1e-9);
        assert!(ok);
        assert!(worst.unwrap().2.abs() < 1e-9);
    }

    #[test]
    fn gamma_w_branch_boundaries_agree() {
        for &t in &[PI / 4.0, PI / 2.0, 3.0 * PI / 4.0] {
            let lo = gamma_w(t - 1e-12);
            let hi = gamma_w(t + 1e-12);
            assert!(
                config_eq_mod_translation(&lo, &hi, Vec2::ZERO, 1e-7),
                "branches disagree at t = {t}"
            );
        }
        // explicit check at pi/4: branch-2 radii equal branch-1 radii
        let c = gamma_w(PI / 4.0);
        let r0 = c.lenses[0].1;
        assert!((r0 - 2f64.sqrt()).abs() < 1e-12);
        assert!((c.lenses[1].1 - 2f64.sqrt() / 2.0).abs() < 1e-12);
        assert!((c.lenses[1].0 - Vec2::new(1.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn gamma_w_closes_up_to_translation() {
        let a = gamma_w(PI);
        let b = gamma_w(0.0);
        // gamma_w(0) = gamma_w(pi) + (0,2)
        assert!(config_eq_mod_translation(&b, &a, Vec2::new(0.0, 2.0), 1e-9));
    }

    #[test]
    fn gamma_w_admissible_on_grid() {
        for k in 0..=200 {
            let t = PI * k as f64 / 200.0;
            let (ok, worst) = is_admissible(&gamma_w(t), 1e-9);
            assert!(ok, "inadmissible at t = {t}: {worst:?}");
        }
    }

    #[test]
    fn single_big_lens_is_inadmissible() {
        let lat = Lattice::new(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)).unwrap();
        let cfg = LensConfiguration::new(lat, vec![(Vec2::ZERO, 0.6)]).unwrap();
        let (ok, worst) = is_admissible(&cfg, 1e-9);
        assert!(!ok);
        let w = worst.unwrap();
        assert!((w.2 - (1.0 - 1.2)).abs() < 1e-12);
    }

    #[test]
    fn lens_to_slits_orientation() {
        let cfg = gamma_w(0.0);
        let slits = lens_to_slits(&cfg, 0.0);
        // theta = 0: slits vertical
        assert!((slits.direction - Vec2::new(0.0, 1.0)).norm() < 1e-12);
        assert_eq!(slits.slits.len(), 2);
        let sk = slits.skeleton();
        assert_eq!(sk.slit_folds().len(), 2);
    }

    #[test]
    fn separation_examples() {
        let lat = Lattice::new(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)).unwrap();
        // horizontal slits whose vertical shadows are the strips
        // [0.1,0.3] and [0.5,0.7]: separated by w = (0,1)
        let slits = SlitConfiguration {
            lattice: lat,
            direction: Vec2::new(1.0, 0.0),
            slits: vec![(Vec2::new(0.2, 0.3), 0.1), (Vec2::new(0.6, 0.8), 0.1)],
        };
        assert_eq!(is_separated(&slits, Vec2::new(0.0, 1.0)), Ok(true));
        // overlapping strips with non-collinear centers: not separated
        let slits_bad = SlitConfiguration {
            slits: vec![(Vec2::new(0.2, 0.3), 0.15), (Vec2::new(0.4, 0.8), 0.15)],
            ..slits.clone()
        };
        assert_eq!(is_separated(&slits_bad, Vec2::new(0.0, 1.0)), Ok(false));
        // two slits stacked on one vertical line: the same-line clause
        let slits_stack = SlitConfiguration {
            slits: vec![(Vec2::new(0.2, 0.3), 0.15), (Vec2::new(0.2, 0.8), 0.15)],
            ..slits.clone()
        };
        assert_eq!(is_separated(&slits_stack, Vec2::new(0.0, 1.0)), Ok(true));
        // slits parallel to w
        let slits_par = SlitConfiguration {
            direction: Vec2::new(0.0, 1.0),
            ..slits.clone()
        };
        assert_eq!(
            is_separated(&slits_par, Vec2::new(0.0, 1.0)),
            Err(ConfigError::SlitParallelToW)
        );
        // w must be a lattice vector
        assert!(is_separated(&slits, Vec2::new(0.5, 0.5)).is_err());
    }

    #[test]
    fn railed_rescale_identity_and_blocked() {
        let cfg = gamma_w(PI / 8.0);
        let slits = lens_to_slits(&cfg, PI / 8.0);
        // xi = theta: sec = 1, regions degenerate to the slits, always valid
        let r = railed_rescale(&slits, PI / 8.0, PI / 8.0).unwrap();
        for (s_in, s_out) in slits.slits.iter().zip(r.slits.slits.iter()) {
            assert!((s_in.1 - s_out.1).abs() < 1e-12);
        }
        // small tilt on a well-separated configuration stays valid
        let r = railed_rescale(&slits, PI / 8.0, PI / 8.0 + 0.02);
        assert!(r.is_ok());
        // tightly packed slits with a large tilt collide
        let lat = Lattice::new(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)).unwrap();
        let tight = SlitConfiguration {
            lattice: lat,
            direction: Vec2::new(0.0, 1.0),
            slits: vec![(Vec2::new(0.0, 0.0), 0.45), (Vec2::new(0.5, 0.0), 0.45)],
        };
        assert!(matches!(
            railed_rescale(&tight, 0.0, 1.2),
            Err(ConfigError::DeformationBlocked(_, _))
        ));
    }

    #[test]
    fn gamma_w_lipschitz_witness() {
        // adjacent samples differ by < 10 * dtheta in every center and radius
        let n = 2000;
        let dt = PI / n as f64;
        for k in 0..n {
            let a = gamma_w(k as f64 * dt);
            let b = gamma_w((k + 1) as f64 * dt);
            if a.lenses.len() != b.lenses.len() {
                continue; // the radius-0 lens appears/disappears at the endpoints
            }
            for (la, lb) in a.lenses.iter().zip(b.lenses.iter()) {
                assert!(
                    a.lattice.min_dist(la.0 - lb.0, false) < 10.0 * dt,
                    "center jump at k = {k}"
                );
                assert!((la.1 - lb.1).abs() < 10.0 * dt, "radius jump at k = {k}");
            }
        }
    }

    #[test]
    fn json_roundtrip() {
        let cfg = gamma_w(0.3);
        let js = LensConfigJson::from_config(&cfg);
        let text = serde_json::to_string(&js).unwrap();
        let back = parse_lens_config_json(text.as_bytes()).unwrap();
        assert_eq!(back.lenses.len(), cfg.lenses.len());
    }
}
