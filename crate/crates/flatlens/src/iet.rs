//! Poincaré return maps of directional foliations on torus skeletons, their
//! homology cocycles, skew-product orbits over Z^d, and the rigidity-time
//! essential-value scanner.
//!
//! The section is doubled over the direction sign: a state is a point of the
//! transversal together with the side it is crossed from. On the doubled
//! section the return map of the unoriented foliation becomes a genuine
//! orientation-preserving interval exchange. Coordinates: with section
//! length L, a state crossing with velocity `+dir(theta)` at offset `u` has
//! doubled coordinate `x = u`, one crossing with `-dir(theta)` has
//! `x = 2L - u`; the map is then piecewise a translation.

use crate::flow::CompiledModel;
use crate::geom::{segment_ray_hit, Lattice, Segment, Vec2};
use crate::skeleton::Skeleton;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IetError {
    #[error("saddle connection detected: {0}")]
    SaddleConnectionDetected(String),
    #[error("section touches a fold or singular point")]
    SectionThroughSingularity,
    #[error("section is not transversal to the flow direction")]
    NotTransversal,
    #[error("orbit failed to return to the section within the travel cap")]
    NoReturn,
    #[error("orbit point is a discontinuity of the return map")]
    DiscontinuityHit,
    #[error("base map is periodic with period {0}")]
    ExactPeriodicity(usize),
    #[error("skeleton must be periodic (a torus) for section extraction")]
    NotPeriodic,
    #[error("return map is not a bijection: {0}")]
    NotBijective(String),
}

/// One exchanged interval of the doubled-section return map, in doubled
/// coordinates on `[0, 2L)`.
#[derive(Debug, Clone, Copy)]
pub struct IetInterval {
    pub lo: f64,
    pub hi: f64,
    /// Image of `lo`; the map is `x -> image_lo + (x - lo)` on the interval.
    pub image_lo: f64,
    /// Deck displacement of the return loop (lattice coordinates).
    pub xi: (i64, i64),
    /// First-return path length.
    pub tau: f64,
}

#[derive(Debug, Clone)]
pub struct IetWithCocycle {
    pub section: Segment,
    pub theta: f64,
    /// Length of the undoubled section.
    pub section_length: f64,
    /// Intervals sorted by `lo`, tiling `[0, 2L)`.
    pub intervals: Vec<IetInterval>,
}

impl IetWithCocycle {
    pub fn total_length(&self) -> f64 {
        2.0 * self.section_length
    }

    /// Interval index containing `x`; an error if `x` sits within `tol` of a
    /// breakpoint.
    pub fn locate(&self, x: f64, tol: f64) -> Result<usize, IetError> {
        let x = x.rem_euclid(self.total_length());
        for (k, iv) in self.intervals.iter().enumerate() {
            if x >= iv.lo - tol && x < iv.hi - tol {
                if (x - iv.lo).abs() < tol || (x - iv.hi).abs() < tol {
                    return Err(IetError::DiscontinuityHit);
                }
                return Ok(k);
            }
        }
        Err(IetError::DiscontinuityHit)
    }

    /// One step of the exchange.
    pub fn apply(&self, x: f64) -> Result<(f64, usize), IetError> {
        let k = self.locate(x, 1e-12)?;
        let iv = &self.intervals[k];
        let y = (iv.image_lo + (x.rem_euclid(self.total_length()) - iv.lo)).rem_euclid(self.total_length());
        Ok((y, k))
    }
}

/// IET JSON dump: `{"lengths":[..],"images":[..],"tau":[..],"xi":[[i,j],..]}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct IetJson {
    pub lengths: Vec<f64>,
    pub images: Vec<f64>,
    pub tau: Vec<f64>,
    pub xi: Vec<[i64; 2]>,
}

impl IetJson {
    pub fn from_iet(iet: &IetWithCocycle) -> Self {
        IetJson {
            lengths: iet.intervals.iter().map(|i| i.hi - i.lo).collect(),
            images: iet.intervals.iter().map(|i| i.image_lo).collect(),
            tau: iet.intervals.iter().map(|i| i.tau).collect(),
            xi: iet.intervals.iter().map(|i| [i.xi.0, i.xi.1]).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

/// Internal: flow from a doubled-section state until the first crossing of
/// any section translate. Returns (new doubled coordinate, deck displacement,
/// path length).
struct SectionFlow<'a> {
    model: &'a CompiledModel,
    lattice: Lattice,
    section: Segment,
    theta: f64,
}

impl<'a> SectionFlow<'a> {
    fn state_of(&self, x: f64) -> (Vec2, i8) {
        let l = (self.section.b - self.section.a).norm();
        let i_hat = self.section.direction();
        if x < l {
            (self.section.a + i_hat * x, 1)
        } else {
            (self.section.a + i_hat * (2.0 * l - x), -1)
        }
    }

    /// Flow until the next section crossing. Object hits and section
    /// crossings are searched window-by-window together, so object-free
    /// stretches cost time proportional to the distance flown.
    fn step(&self, x: f64) -> Result<(f64, (i64, i64), f64), IetError> {
        let l = (self.section.b - self.section.a).norm();
        let (pos, sign) = self.state_of(x);
        let vel = Vec2::dir(self.theta) * sign as f64;
        match self.flow_to_section(pos, vel) {
            Ok((hit_pos, u, arriving_vel, tau)) => {
                // deck displacement: lattice coordinates of the shift between
                // the crossing translate and the base section
                let raw = hit_pos - (self.section.a + self.section.direction() * u);
                let (cu, cv) = self.lattice.coords(raw);
                let li = cu.round() as i64;
                let lj = cv.round() as i64;
                debug_assert!((cu - li as f64).abs() < 1e-6 && (cv - lj as f64).abs() < 1e-6);
                let x_new = if arriving_vel.dot(Vec2::dir(self.theta)) > 0.0 {
                    u
                } else {
                    2.0 * l - u
                };
                Ok((x_new, (li, lj), tau))
            }
            Err(e) => Err(e),
        }
    }

    /// Core walk: returns (crossing position, offset u, arriving velocity,
    /// path length).
    fn flow_to_section(&self, mut pos: Vec2, mut vel: Vec2) -> Result<(Vec2, f64, Vec2, f64), IetError> {
        let mut tau = 0.0;
        let window = 2.0 * (self.lattice.g2.norm() + self.section.half_length() + 1.0);
        let travel_cap = 1e5 * (1.0 + self.lattice.g2.norm());
        let mut traveled = 0.0;
        for _ in 0..2_000_000 {
            if traveled > travel_cap {
                return Err(IetError::NoReturn);
            }
            let hit = crate::flow::next_leg(self.model, pos, vel, window).map_err(|_| IetError::NoReturn)?;
            let leg_end_t = hit.as_ref().map(|h| h.t).unwrap_or(window);
            if let Some((t_s, u, _arr, _lambda)) = self.section_crossing(pos, vel, leg_end_t) {
                return Ok((pos + vel * t_s, u, vel, tau + t_s));
            }
            match hit {
                None => {
                    // free flight through this window
                    pos = pos + vel * window;
                    tau += window;
                    traveled += window;
                }
                Some(h) => {
                    if h.singular {
                        return Err(IetError::SaddleConnectionDetected(
                            "orbit hits a singular point before returning".into(),
                        ));
                    }
                    tau += h.t;
                    traveled += h.t;
                    let hit_pos = pos + vel * h.t;
                    let (new_pos, new_vel) = crate::flow::transition(self.model, &h, hit_pos, vel)
                        .ok_or(IetError::NoReturn)?;
                    pos = new_pos;
                    vel = new_vel;
                }
            }
        }
        Err(IetError::NoReturn)
    }

    /// Earliest crossing of a section translate strictly inside the leg,
    /// scanned in bounded windows so unbounded free flights stay cheap.
    /// Returns (t, offset u in [0, L), arriving sign, lambda).
    fn section_crossing(&self, pos: Vec2, vel: Vec2, leg_t: f64) -> Option<(f64, f64, i8, (i64, i64))> {
        let lat = &self.lattice;
        let half = self.section.half_length();
        let det = lat.covolume();
        let window = 2.0 * (lat.g2.norm() + half + 1.0);
        let mut t0 = 0.0f64;
        while t0 < leg_t {
            let t1 = (t0 + window).min(leg_t);
            let mid_pt = pos + vel * (0.5 * (t0 + t1));
            let reach = 0.5 * (t1 - t0) + half + 1.0;
            let (u0, v0) = lat.coords(mid_pt - self.section.center());
            let du = (reach * lat.g2.norm() / det).ceil() as i64 + 1;
            let dv = (reach * lat.g1.norm() / det).ceil() as i64 + 1;
            let mut best: Option<(f64, f64, i8, (i64, i64))> = None;
            for m in (u0.floor() as i64 - du)..=(u0.ceil() as i64 + du) {
                for n in (v0.floor() as i64 - dv)..=(v0.ceil() as i64 + dv) {
                    let seg = self.section.translated(lat.point(m, n));
                    if let Ok(Some(h)) = segment_ray_hit(&seg, pos, vel, 1e-9) {
                        if h.t <= t1 + 1e-12 && best.as_ref().map_or(true, |b| h.t < b.0) {
                            let u = h.u + half;
                            let arriving = if vel.dot(Vec2::dir(self.theta)) > 0.0 { 1 } else { -1 };
                            best = Some((h.t, u.clamp(0.0, 2.0 * half), arriving, (m, n)));
                        }
                    }
                }
            }
            if best.is_some() {
                return best;
            }
            t0 = t1;
        }
        None
    }
}

/// Extracts the doubled-section return map of the direction-theta foliation
/// on a periodic skeleton, with per-interval deck classes and return times.
///
/// Discontinuity candidates are located by tracing the flow backward from
/// every fold endpoint and from the section endpoints until the first
/// section return; intervals are then filled in by sampling midpoints.
pub fn extract_iet(skel: &Skeleton, theta: f64, section: Segment) -> Result<IetWithCocycle, IetError> {
    let lattice = skel.lattice.ok_or(IetError::NotPeriodic)?.reduce();
    let dir = Vec2::dir(theta);
    let i_hat = section.direction();
    if dir.cross(i_hat).abs() < 1e-9 {
        return Err(IetError::NotTransversal);
    }
    // the section must not touch any fold translate
    let model = crate::flow::compile_skeleton(skel);
    for f in skel.slit_folds() {
        let reach = ((section.center() - f.seg.center()).norm() + section.half_length() + f.seg.half_length())
            / lattice.g1.norm();
        let r = reach.ceil() as i64 + 1;
        for m in -r..=r {
            for n in -r..=r {
                let seg = f.seg.translated(lattice.point(m, n));
                if crate::geom::segments_cross(&seg, &section, 1e-12)
                    || point_on_segment(&section, seg.a)
                    || point_on_segment(&section, seg.b)
                    || point_on_segment(&seg, section.a)
                    || point_on_segment(&seg, section.b)
                {
                    return Err(IetError::SectionThroughSingularity);
                }
            }
        }
    }

    let l = 2.0 * section.half_length();
    let sf = SectionFlow {
        model: &model,
        lattice,
        section,
        theta,
    };

    // Backward traces from every fold endpoint in the four germ directions.
    let mut cuts: Vec<f64> = vec![0.0, l];
    let mut endpoints: Vec<Vec2> = Vec::new();
    for f in skel.slit_folds() {
        endpoints.push(f.seg.a);
        endpoints.push(f.seg.b);
    }
    for f in &skel.folds {
        if let crate::skeleton::Fold::Pillow(p) = f {
            let (lo, up) = p.translation_edges();
            endpoints.extend([lo.a, lo.b, up.a, up.b]);
        }
    }
    endpoints.push(section.a);
    endpoints.push(section.b);
    for e in endpoints {
        for v in [dir, -dir] {
            if let Some((_t, u, arrival)) = backward_to_section(&sf, e, v) {
                // the forward orbit passes this crossing with the reversed
                // arrival velocity of the backward trace, which fixes the copy
                let x = if arrival.dot(dir) < 0.0 { u } else { 2.0 * l - u };
                cuts.push(x.rem_euclid(2.0 * l));
            }
        }
    }
    cuts.push(l * 2.0);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if cuts.last().map_or(true, |&x| x < 2.0 * l - 1e-9) {
        cuts.push(2.0 * l);
    }

    // Sample a midpoint per candidate interval, merging intervals whose
    // return data agree and are contiguous images.
    let mut intervals: Vec<IetInterval> = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo < 1e-9 {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let (y, xi, tau) = sf.step(mid)?;
        let image_lo = y - (mid - lo);
        match intervals.last_mut() {
            Some(prev)
                if (prev.hi - lo).abs() < 1e-9
                    && prev.xi == xi
                    && (prev.image_lo + (lo - prev.lo) - image_lo).abs() < 1e-7
                    && (prev.tau - tau).abs() < 1e-6 =>
            {
                prev.hi = hi; // same branch continues across a spurious cut
            }
            _ => intervals.push(IetInterval {
                lo,
                hi,
                image_lo,
                xi,
                tau,
            }),
        }
    }

    let iet = IetWithCocycle {
        section,
        theta,
        section_length: l,
        intervals,
    };
    if std::env::var("FLATLENS_IET_DEBUG").is_ok() {
        eprintln!("cuts: {cuts:?}");
        for iv in &iet.intervals {
            eprintln!("  [{:.9},{:.9}) -> {:.9} xi={:?} tau={:.4}", iv.lo, iv.hi, iv.image_lo, iv.xi, iv.tau);
        }
    }
    validate_bijection(&iet)?;
    Ok(iet)
}

fn point_on_segment(seg: &Segment, p: Vec2) -> bool {
    let d = seg.b - seg.a;
    let len = d.norm();
    let rel = p - seg.a;
    if d.cross(rel).abs() / len > 1e-9 {
        return false;
    }
    let t = rel.dot(d) / (len * len);
    (-1e-12..=1.0 + 1e-12).contains(&t)
}

/// Backward flow from a singular point until the first section crossing;
/// returns (path, offset u). `None` when the backward orbit hits another
/// singular point first (a saddle connection through the section region is
/// reported by the caller when it affects sampling).
fn backward_to_section(sf: &SectionFlow, from: Vec2, v: Vec2) -> Option<(f64, f64, Vec2)> {
    match sf.flow_to_section(from, v) {
        Ok((_pos, u, arrival, tau)) => Some((tau, u, arrival)),
        Err(_) => None,
    }
}

fn validate_bijection(iet: &IetWithCocycle) -> Result<(), IetError> {
    let total = iet.total_length();
    let sum: f64 = iet.intervals.iter().map(|i| i.hi - i.lo).sum();
    if (sum - total).abs() > 1e-9 * total.max(1.0) {
        return Err(IetError::NotBijective(format!(
            "interval lengths sum to {sum}, section doubled length {total}"
        )));
    }
    let mut images: Vec<(f64, f64)> = iet
        .intervals
        .iter()
        .map(|i| {
            let mut lo = i.image_lo.rem_euclid(total);
            // an image starting within noise of the wrap point belongs at 0
            if total - lo < 1e-7 * total.max(1.0) {
                lo = 0.0;
            }
            (lo, i.hi - i.lo)
        })
        .collect();
    images.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut cursor = 0.0;
    for (lo, len) in images {
        if (lo - cursor).abs() > 1e-7 * total.max(1.0) {
            return Err(IetError::NotBijective(format!(
                "image gap or overlap at {lo} (expected {cursor})"
            )));
        }
        cursor = lo + len;
    }
    if (cursor - total).abs() > 1e-7 * total.max(1.0) {
        return Err(IetError::NotBijective("images do not tile".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Cocycles and skew orbits
// ---------------------------------------------------------------------------

/// Homology pairing `<gamma, xi>` realized as the integer cross product.
pub fn pairing(gamma: (i64, i64), xi: (i64, i64)) -> i64 {
    gamma.0 * xi.1 - gamma.1 * xi.0
}

/// The dual basis for the standard plane cover: `psi = xi` componentwise.
pub fn standard_plane_gamma() -> Vec<(i64, i64)> {
    vec![(0, -1), (1, 0)]
}

/// The piecewise-constant cocycle table: one Z^d row per exchanged interval.
pub fn cocycle(iet: &IetWithCocycle, gamma: &[(i64, i64)]) -> Vec<Vec<i64>> {
    iet.intervals
        .iter()
        .map(|iv| gamma.iter().map(|&g| pairing(g, iv.xi)).collect())
        .collect()
}

#[derive(Debug, Clone)]
pub struct SkewOrbit {
    pub xs: Vec<f64>,
    /// Accumulated cocycle sums; `gs[n]` is the deck value after n steps.
    pub gs: Vec<Vec<i64>>,
}

/// N-step orbit of the skew product `T_psi(x, g) = (Tx, g + psi(x))`.
pub fn skew_orbit(iet: &IetWithCocycle, psi: &[Vec<i64>], x0: f64, n: usize) -> Result<SkewOrbit, IetError> {
    let d = psi.first().map(|r| r.len()).unwrap_or(0);
    let mut xs = vec![x0];
    let mut gs = vec![vec![0i64; d]];
    let mut x = x0;
    let mut g = vec![0i64; d];
    for _ in 0..n {
        let (y, k) = iet.apply(x)?;
        for (gi, dpsi) in g.iter_mut().zip(&psi[k]) {
            *gi += dpsi;
        }
        x = y;
        xs.push(x);
        gs.push(g.clone());
    }
    Ok(SkewOrbit { xs, gs })
}

/// Re-traces the same leaf in the plane flow model and demands exact integer
/// agreement of the deck values at every section return.
pub fn deck_consistency(
    iet: &IetWithCocycle,
    skel: &Skeleton,
    theta: f64,
    x0: f64,
    n: usize,
) -> Result<bool, IetError> {
    let model = crate::flow::compile_skeleton(skel);
    let lattice = skel.lattice.ok_or(IetError::NotPeriodic)?.reduce();
    let sf = SectionFlow {
        model: &model,
        lattice,
        section: iet.section,
        theta,
    };
    let psi = cocycle(iet, &standard_plane_gamma());
    let orbit = skew_orbit(iet, &psi, x0, n)?;
    let mut x = x0;
    let mut acc = (0i64, 0i64);
    for step in 0..n {
        let (y, xi, _tau) = sf.step(x)?;
        acc = (acc.0 + xi.0, acc.1 + xi.1);
        if orbit.gs[step + 1] != vec![acc.0, acc.1] {
            return Ok(false);
        }
        // follow the geometric return rather than the interval arithmetic
        x = y;
        if (x - orbit.xs[step + 1]).abs() > 1e-6 * iet.total_length() {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Induction (first-return to a subinterval) and tower constancy
// ---------------------------------------------------------------------------

/// A tower of the induced map on `J = [a, b)`: the base subinterval, the
/// return height, the accumulated cocycle over the return word, and the
/// image position of the base's left end.
#[derive(Debug, Clone)]
pub struct Tower {
    pub base_lo: f64,
    pub base_hi: f64,
    pub height: usize,
    pub xi_induced: (i64, i64),
    pub tau_induced: f64,
}

/// First-return map of the exchange to the subinterval `[a, b)`, computed by
/// symbolic interval pushing: pieces of `J` are iterated, split at the
/// discontinuities of `T`, until every piece returns.
pub fn induce(iet: &IetWithCocycle, a: f64, b: f64, max_height: usize) -> Result<Vec<Tower>, IetError> {
    #[derive(Clone)]
    struct Piece {
        base_lo: f64,
        base_hi: f64,
        cur_lo: f64, // current image of base_lo
        height: usize,
        xi: (i64, i64),
        tau: f64,
    }
    let total = iet.total_length();
    let inside = |x: f64| -> bool { x >= a - 1e-12 && x < b - 1e-12 };
    let mut active = vec![Piece {
        base_lo: a,
        base_hi: b,
        cur_lo: a,
        height: 0,
        xi: (0, 0),
        tau: 0.0,
    }];
    let mut towers = Vec::new();
    while let Some(p) = active.pop() {
        if p.height > max_height {
            return Err(IetError::NoReturn);
        }
        // split the current image interval [cur_lo, cur_lo + len) at the
        // discontinuities of T
        let len = p.base_hi - p.base_lo;
        let cur_hi = p.cur_lo + len;
        let mut splits = vec![p.cur_lo, cur_hi];
        for iv in &iet.intervals {
            for c in [iv.lo, iv.hi] {
                if c > p.cur_lo + 1e-12 && c < cur_hi - 1e-12 {
                    splits.push(c);
                }
            }
        }
        splits.sort_by(|x, y| x.partial_cmp(y).unwrap());
        splits.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
        for w in splits.windows(2) {
            let (slo, shi) = (w[0], w[1]);
            if shi - slo < 1e-12 {
                continue;
            }
            let mid = 0.5 * (slo + shi);
            let k = iet.locate(mid, 1e-13)?;
            let iv = &iet.intervals[k];
            let new_lo = (iv.image_lo + (slo - iv.lo)).rem_euclid(total);
            let q = Piece {
                base_lo: p.base_lo + (slo - p.cur_lo),
                base_hi: p.base_lo + (shi - p.cur_lo),
                cur_lo: new_lo,
                height: p.height + 1,
                xi: (p.xi.0 + iv.xi.0, p.xi.1 + iv.xi.1),
                tau: p.tau + iv.tau,
            };
            // a returned piece must land entirely inside J; straddling J's
            // ends means the subdivision missed a cut, which cannot happen
            // since J's endpoints are added as splits on every pass
            if inside(q.cur_lo + 0.5 * (q.base_hi - q.base_lo)) {
                towers.push(Tower {
                    base_lo: q.base_lo,
                    base_hi: q.base_hi,
                    height: q.height,
                    xi_induced: q.xi,
                    tau_induced: q.tau,
                });
            } else {
                // also split at J's boundary images on the next pass
                let mut q = q;
                for c in [a, b] {
                    let off = c - q.cur_lo;
                    if off > 1e-12 && off < (q.base_hi - q.base_lo) - 1e-12 {
                        // split q at offset `off`
                        let q2 = Piece {
                            base_lo: q.base_lo + off,
                            base_hi: q.base_hi,
                            cur_lo: q.cur_lo + off,
                            ..q.clone()
                        };
                        q.base_hi = q.base_lo + off;
                        active.push(q2);
                    }
                }
                active.push(q);
            }
        }
    }
    towers.sort_by(|x, y| x.base_lo.partial_cmp(&y.base_lo).unwrap());
    Ok(towers)
}

/// Checks the tower-constancy identity: for each induced tower with height
/// `h` and induced class `xi(J)`, the Birkhoff sum `psi^(h)` is exactly
/// `<gamma, xi(J)>` at every sampled point of the tower interior.
pub fn tower_constancy_holds(
    iet: &IetWithCocycle,
    gamma: &[(i64, i64)],
    a: f64,
    b: f64,
    samples_per_tower: usize,
) -> Result<bool, IetError> {
    let towers = induce(iet, a, b, 100_000)?;
    let psi = cocycle(iet, gamma);
    for t in &towers {
        let expect: Vec<i64> = gamma.iter().map(|&g| pairing(g, t.xi_induced)).collect();
        for s in 0..samples_per_tower {
            let frac = (s as f64 + 0.5) / samples_per_tower as f64;
            // climb the tower from a base point
            let mut x = t.base_lo + frac * (t.base_hi - t.base_lo);
            // Birkhoff sum over the full return word from the base
            let mut acc = vec![0i64; gamma.len()];
            for _ in 0..t.height {
                let (y, k) = iet.apply(x)?;
                for (ai, d) in acc.iter_mut().zip(&psi[k]) {
                    *ai += d;
                }
                x = y;
            }
            if acc != expect {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Rigidity scan
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct EssentialValueCandidate {
    pub g: Vec<i64>,
    pub rigidity_time: usize,
    pub measure: f64,
    pub sup_displacement: f64,
}

#[derive(Debug, Clone)]
pub struct RigidityReport {
    pub candidates: Vec<EssentialValueCandidate>,
    /// Index of the subgroup of Z^d generated by the candidate values
    /// (0 when the rank is deficient; only meaningful for d = 2).
    pub subgroup_index: Option<i64>,
}

/// Scans return times `h <= h_max` for near-rigidity: at a rigidity time
/// most sample points satisfy `|T^h x - x| < rigid_tol` with `psi^(h)`
/// locally constant; every constant value carried by at least
/// `measure_floor` of the near-rigid mass is reported. Measure estimates are
/// Monte Carlo over a uniform sample grid.
pub fn rigidity_scan(
    iet: &IetWithCocycle,
    psi: &[Vec<i64>],
    h_max: usize,
    rigid_tol: f64,
    measure_floor: f64,
    n_samples: usize,
) -> Result<RigidityReport, IetError> {
    let d = psi.first().map(|r| r.len()).unwrap_or(0);
    let total = iet.total_length();
    let xs0: Vec<f64> = (0..n_samples)
        .map(|k| (k as f64 + 0.618_033_988_749_894_8) / n_samples as f64 * total)
        .collect();
    let mut xs = xs0.clone();
    let mut sums: Vec<Vec<i64>> = vec![vec![0; d]; n_samples];
    let mut alive: Vec<bool> = vec![true; n_samples];
    let mut candidates: Vec<EssentialValueCandidate> = Vec::new();
    for h in 1..=h_max {
        for i in 0..n_samples {
            if !alive[i] {
                continue;
            }
            match iet.apply(xs[i]) {
                Ok((y, k)) => {
                    for (s, dpsi) in sums[i].iter_mut().zip(&psi[k]) {
                        *s += dpsi;
                    }
                    xs[i] = y;
                }
                Err(_) => alive[i] = false,
            }
        }
        // near-rigid set at time h
        let mut groups: std::collections::BTreeMap<Vec<i64>, (usize, f64)> = Default::default();
        let mut rigid_count = 0usize;
        for i in 0..n_samples {
            if !alive[i] {
                continue;
            }
            let disp = circle_dist(xs[i], xs0[i], total);
            if disp < rigid_tol {
                rigid_count += 1;
                let e = groups.entry(sums[i].clone()).or_insert((0, 0.0));
                e.0 += 1;
                e.1 = e.1.max(disp);
            }
        }
        if rigid_count == n_samples && groups.len() == 1 && groups.keys().next().unwrap().iter().all(|&v| v == 0)
        {
            let disp_max = groups.values().next().unwrap().1;
            if disp_max < 1e-12 * total {
                return Err(IetError::ExactPeriodicity(h));
            }
        }
        for (g, (count, sup)) in groups {
            let measure = count as f64 / n_samples as f64;
            if measure >= measure_floor {
                candidates.push(EssentialValueCandidate {
                    g,
                    rigidity_time: h,
                    measure,
                    sup_displacement: sup,
                });
            }
        }
    }
    let subgroup_index = (d == 2).then(|| subgroup_index_z2(&candidates));
    Ok(RigidityReport {
        candidates,
        subgroup_index,
    })
}

fn circle_dist(a: f64, b: f64, total: f64) -> f64 {
    let d = (a - b).rem_euclid(total);
    d.min(total - d)
}

/// Index of the subgroup of Z^2 generated by the candidate values, via the
/// 2x2 Hermite form; 0 when the rank is below 2.
fn subgroup_index_z2(cands: &[EssentialValueCandidate]) -> i64 {
    let mut basis: Vec<(i64, i64)> = Vec::new();
    for c in cands {
        if c.g.len() != 2 || (c.g[0] == 0 && c.g[1] == 0) {
            continue;
        }
        basis.push((c.g[0], c.g[1]));
    }
    // reduce to at most two generators by repeated gcd elimination
    let mut det_gcd: i64 = 0;
    for i in 0..basis.len() {
        for j in (i + 1)..basis.len() {
            let det = basis[i].0 * basis[j].1 - basis[i].1 * basis[j].0;
            det_gcd = gcd_i64(det_gcd, det.abs());
        }
    }
    det_gcd
}

fn gcd_i64(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd_i64(b, a % b)
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{builtin_skeleton, Fold, SlitFold};
    use std::f64::consts::PI;

    fn single_slit_skeleton() -> Skeleton {
        Skeleton {
            lattice: Some(Lattice::new(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)).unwrap()),
            folds: vec![Fold::Slit(SlitFold::new(
                Vec2::new(0.25, 0.5),
                Vec2::new(0.75, 0.5),
            ))],
        }
    }

    fn worked_section() -> Segment {
        Segment::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0))
    }

    #[test]
    fn worked_single_slit_example() {
        let skel = single_slit_skeleton();
        let iet = extract_iet(&skel, PI / 2.0, worked_section()).unwrap();
        // doubled length 2, six intervals with breakpoints at 0.25/0.75 on
        // each copy
        assert!((iet.total_length() - 2.0).abs() < 1e-12);
        let cuts: Vec<f64> = iet.intervals.iter().map(|i| i.lo).collect();
        for expect in [0.0, 0.25, 0.75, 1.0, 1.25, 1.75] {
            assert!(
                cuts.iter().any(|c| (c - expect).abs() < 1e-9),
                "missing cut {expect}: {cuts:?}"
            );
        }
        for iv in &iet.intervals {
            assert!((iv.tau - 1.0).abs() < 1e-9, "tau = {}", iv.tau);
            let mid = 0.5 * (iv.lo + iv.hi);
            let (img, _) = iet.apply(mid).unwrap();
            if mid < 0.25 || (0.75..1.0).contains(&mid) {
                // up-copy straight through: returns to itself with xi = (0,1)
                assert_eq!(iv.xi, (0, 1));
                assert!((img - mid).abs() < 1e-9);
            } else if mid < 0.75 {
                // up-copy shadow of the slit: to the down-copy, xi = (0,0);
                // in plane coordinates u' = 1 - u, i.e. doubled x' = x + 1
                assert_eq!(iv.xi, (0, 0));
                assert!((img - (mid + 1.0)).abs() < 1e-9, "img {img} mid {mid}");
            } else if mid < 1.25 || mid >= 1.75 {
                assert_eq!(iv.xi, (0, -1));
                assert!((img - mid).abs() < 1e-9);
            } else {
                assert_eq!(iv.xi, (0, 0));
                assert!((img - (mid - 1.0)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn empty_torus_is_a_rotation() {
        let skel = Skeleton {
            lattice: Some(Lattice::new(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)).unwrap()),
            folds: vec![],
        };
        let iet = extract_iet(&skel, PI / 2.0, worked_section()).unwrap();
        // one interval per copy, xi = (0, +-1), tau = 1
        assert_eq!(iet.intervals.len(), 2);
        assert_eq!(iet.intervals[0].xi, (0, 1));
        assert_eq!(iet.intervals[1].xi, (0, -1));
        assert!((iet.intervals[0].tau - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cocycle_projections() {
        let skel = single_slit_skeleton();
        let iet = extract_iet(&skel, PI / 2.0, worked_section()).unwrap();
        let psi = cocycle(&iet, &standard_plane_gamma());
        for (iv, row) in iet.intervals.iter().zip(&psi) {
            assert_eq!(row, &vec![iv.xi.0, iv.xi.1]);
        }
        // gamma = 0 gives psi = 0
        let zero = cocycle(&iet, &[(0, 0)]);
        assert!(zero.iter().all(|r| r == &vec![0]));
        // single-component projection
        let first = cocycle(&iet, &[(0, -1)]);
        for (iv, row) in iet.intervals.iter().zip(&first) {
            assert_eq!(row, &vec![iv.xi.0]);
        }
    }

    #[test]
    fn skew_orbit_deck_growth() {
        let skel = single_slit_skeleton();
        let iet = extract_iet(&skel, PI / 2.0, worked_section()).unwrap();
        let psi = cocycle(&iet, &standard_plane_gamma());
        // x0 = 0.1 is off the slit shadow: g_n = (0, n)
        let orb = skew_orbit(&iet, &psi, 0.1, 20).unwrap();
        assert_eq!(orb.gs[20], vec![0, 20]);
        // x0 = 0 steps: n = 0 keeps g = 0
        let orb0 = skew_orbit(&iet, &psi, 0.1, 0).unwrap();
        assert_eq!(orb0.gs[0], vec![0, 0]);
        // a shadow point alternates copies with zero net vertical drift
        let orb = skew_orbit(&iet, &psi, 0.4, 21).unwrap();
        let g = &orb.gs[21];
        assert!(g[1].abs() <= 1);
    }

    #[test]
    fn deck_consistency_single_slit() {
        let skel = single_slit_skeleton();
        let iet = extract_iet(&skel, PI / 2.0, worked_section()).unwrap();
        assert!(deck_consistency(&iet, &skel, PI / 2.0, 0.1, 300).unwrap());
        assert!(deck_consistency(&iet, &skel, PI / 2.0, 0.4, 300).unwrap());
    }

    #[test]
    fn wollmilchsau_iet_consistency() {
        let skel = builtin_skeleton("wollmilchsau").unwrap();
        let theta = (1.0f64 / 3.0).atan();
        let section = Segment::new(Vec2::new(0.35, -1.3), Vec2::new(1.55, -1.3));
        let iet = extract_iet(&skel, theta, section).unwrap();
        let total: f64 = iet.intervals.iter().map(|i| i.hi - i.lo).sum();
        assert!((total - iet.total_length()).abs() < 1e-9);
        // return map bijection on sampled points
        let mut hits = 0usize;
        for k in 0..1000 {
            let x = (k as f64 + 0.5) / 1000.0 * iet.total_length();
            if let Ok((y, _)) = iet.apply(x) {
                assert!((0.0..iet.total_length()).contains(&y));
                hits += 1;
            }
        }
        assert!(hits >= 990);
        assert!(deck_consistency(&iet, &skel, theta, 0.1 * iet.total_length(), 500).unwrap());
    }

    #[test]
    fn induction_tower_constancy() {
        let skel = single_slit_skeleton();
        let iet = extract_iet(&skel, PI / 2.0, worked_section()).unwrap();
        let ok = tower_constancy_holds(&iet, &standard_plane_gamma(), 0.05, 0.18, 4).unwrap();
        assert!(ok);
        // an irrational-direction torus rotation induces like a golden rotation
        let skel = Skeleton {
            lattice: Some(Lattice::new(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)).unwrap()),
            folds: vec![],
        };
        let theta = 1.0f64.atan2(1.618_033_988_749_894_8);
        let section = Segment::new(Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0));
        let iet = extract_iet(&skel, theta, section).unwrap();
        let ok = tower_constancy_holds(&iet, &standard_plane_gamma(), 0.2, 0.45, 3).unwrap();
        assert!(ok);
    }

    #[test]
    fn rigidity_scan_golden_rotation() {
        // synthetic golden-mean rotation with a +-1 cocycle: candidates show
        // up at Fibonacci rigidity times
        let alpha = (5f64.sqrt() - 1.0) / 2.0;
        let iet = IetWithCocycle {
            section: Segment::new(Vec2::ZERO, Vec2::new(1.0, 0.0)),
            theta: 0.0,
            section_length: 0.5,
            intervals: vec![
                IetInterval {
                    lo: 0.0,
                    hi: 1.0 - alpha,
                    image_lo: alpha,
                    xi: (1, 0),
                    tau: 1.0,
                },
                IetInterval {
                    lo: 1.0 - alpha,
                    hi: 1.0,
                    image_lo: 0.0,
                    xi: (-1, 0),
                    tau: 1.0,
                },
            ],
        };
        let psi = cocycle(&iet, &[(0, -1)]);
        let rep = rigidity_scan(&iet, &psi, 150, 0.02, 0.2, 600).unwrap();
        assert!(!rep.candidates.is_empty());
        let fib = [2usize, 3, 5, 8, 13, 21, 34, 55, 89, 144];
        // nonzero candidate values occur, concentrated at Fibonacci times
        assert!(rep.candidates.iter().any(|c| c.g.iter().any(|&v| v != 0)));
        let times: Vec<usize> = rep.candidates.iter().map(|c| c.rigidity_time).collect();
        assert!(times.iter().any(|t| fib.contains(t)), "times: {times:?}");
    }

    #[test]
    fn rigidity_scan_periodic_base_aborts() {
        // rational rotation: exactly periodic
        let iet = IetWithCocycle {
            section: Segment::new(Vec2::ZERO, Vec2::new(1.0, 0.0)),
            theta: 0.0,
            section_length: 0.5,
            intervals: vec![
                IetInterval {
                    lo: 0.0,
                    hi: 0.5,
                    image_lo: 0.5,
                    xi: (0, 0),
                    tau: 1.0,
                },
                IetInterval {
                    lo: 0.5,
                    hi: 1.0,
                    image_lo: 0.0,
                    xi: (0, 0),
                    tau: 1.0,
                },
            ],
        };
        let psi = cocycle(&iet, &standard_plane_gamma());
        let r = rigidity_scan(&iet, &psi, 10, 1e-6, 0.2, 128);
        assert!(matches!(r, Err(IetError::ExactPeriodicity(2))));
    }
}
