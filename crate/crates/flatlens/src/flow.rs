//! Event-driven tracing of the direction-theta foliation on periodic
//! skeletons and exact Eaton-lens fields, with integer deck bookkeeping,
//! model-equivalence comparison, and trapping/diffusion statistics.
//!
//! Path length advances by the Euclidean length outside lenses and by the
//! exact transit clock `pi R` inside a lens; slit and pillow crossings are
//! instantaneous. Comparisons between models use crossing itineraries, not
//! clocks.

use crate::config::LensConfiguration;
use crate::geom::{circle_ray_hit, segment_ray_hit, GeomError, Lattice, Segment, Vec2};
use crate::lens::{lens_retroreflect, EatonLens, GRAZING_BAND};
use crate::skeleton::{Fold, Skeleton};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("free flight exceeded the travel cap (non-periodic model)")]
    TravelCapExceeded,
    #[error("trajectory hit a singular point: {0}")]
    SingularHit(String),
    #[error("too few displacement samples for statistics ({0})")]
    TooFewSamples(usize),
    #[error("start position is inside or on a lens")]
    StartInsideLens,
}

/// Band (absolute) around fold endpoints treated as singular hits.
const ENDPOINT_BAND: f64 = 1e-9;
/// Minimal ray parameter accepted for the next event.
const T_MIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
enum ObjShape {
    Slit(Segment),
    Edge { seg: Segment, shift: Vec2 },
    Lens { center: Vec2, radius: f64 },
}

/// A traceable model: compiled object list over an optional lattice.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    lattice: Option<Lattice>,
    objs: Vec<ObjShape>,
    max_extent: f64,
}

/// Compiles a skeleton (slits, pillow sides and edges, chips) for tracing.
pub fn compile_skeleton(skel: &Skeleton) -> CompiledModel {
    let mut objs = Vec::new();
    for f in &skel.folds {
        match f {
            Fold::Slit(s) => objs.push(ObjShape::Slit(s.seg)),
            Fold::Chip(c) => {
                for s in c.slits() {
                    objs.push(ObjShape::Slit(s.seg));
                }
            }
            Fold::Pillow(p) => {
                for s in p.slit_sides() {
                    objs.push(ObjShape::Slit(s));
                }
                let (lower, upper) = p.translation_edges();
                let j = p.jump();
                objs.push(ObjShape::Edge { seg: lower, shift: j });
                objs.push(ObjShape::Edge { seg: upper, shift: -j });
            }
        }
    }
    finish_model(skel.lattice.map(|l| l.reduce()), objs)
}

/// Compiles a periodic lens field for tracing.
pub fn compile_lenses(cfg: &LensConfiguration) -> CompiledModel {
    let objs = cfg
        .lenses
        .iter()
        .map(|&(center, radius)| ObjShape::Lens { center, radius })
        .collect();
    finish_model(Some(cfg.lattice.reduce()), objs)
}

fn finish_model(lattice: Option<Lattice>, objs: Vec<ObjShape>) -> CompiledModel {
    let max_extent = objs
        .iter()
        .map(|o| match o {
            ObjShape::Slit(s) | ObjShape::Edge { seg: s, .. } => s.half_length(),
            ObjShape::Lens { radius, .. } => *radius,
        })
        .fold(0.0f64, f64::max);
    CompiledModel {
        lattice,
        objs,
        max_extent,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowState {
    pub pos: Vec2,
    /// +1 moves along `dir(theta)`, -1 against it.
    pub sign: i8,
    /// Direction of the foliation, taken mod pi.
    pub theta: f64,
    pub path_length: f64,
}

impl FlowState {
    pub fn new(pos: Vec2, sign: i8, theta: f64) -> Self {
        FlowState {
            pos,
            sign,
            theta,
            path_length: 0.0,
        }
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::dir(self.theta) * self.sign as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    FoldCross,
    LensTransit,
    PillowJump,
    Singular,
}

#[derive(Debug, Clone, Copy)]
pub struct Event {
    pub path_length: f64,
    pub kind: EventKind,
    pub location: Vec2,
    /// Object index in the compiled model.
    pub obj: usize,
    /// Lattice translate of the object that was hit.
    pub lambda: (i64, i64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    PathExhausted,
    Singular,
    TravelCap,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub theta: f64,
    pub start: Vec2,
    pub events: Vec<Event>,
    /// `pos - start` at evenly spaced path-length checkpoints.
    pub displacement_samples: Vec<Vec2>,
    /// Lattice cell of the position at each checkpoint.
    pub deck_samples: Vec<(i64, i64)>,
    /// Lattice cell of every event location, relative to the start cell.
    pub event_cells: Vec<(i64, i64)>,
    pub final_state: FlowState,
    pub terminated: Termination,
}

/// Raw next-event candidate along a ray.
#[derive(Debug, Clone, Copy)]
pub struct LegHit {
    pub t: f64,
    pub obj: usize,
    pub lambda: (i64, i64),
    pub singular: bool,
}

use LegHit as Hit;

/// Public leg stepper: first object hit along `pos + t v`, `t <= cap`.
/// `Ok(None)` means free flight to the cap (periodic models only);
/// non-periodic models report `TravelCapExceeded` instead.
pub fn next_leg(model: &CompiledModel, pos: Vec2, v: Vec2, cap: f64) -> Result<Option<LegHit>, FlowError> {
    next_event(model, pos, v, cap)
}

/// Applies the crossing map of the hit object: returns the new position and
/// velocity, or `None` for a singular interaction.
pub fn transition(model: &CompiledModel, hit: &LegHit, hit_pos: Vec2, v: Vec2) -> Option<(Vec2, Vec2)> {
    let shift = match &model.lattice {
        Some(lat) => lat.point(hit.lambda.0, hit.lambda.1),
        None => Vec2::ZERO,
    };
    match &model.objs[hit.obj] {
        ObjShape::Slit(s) => {
            let seg = s.translated(shift);
            Some((seg.center() * 2.0 - hit_pos, -v))
        }
        ObjShape::Edge { shift: jump, .. } => Some((hit_pos + *jump, v)),
        ObjShape::Lens { center, radius } => {
            let lens = EatonLens::new(*center + shift, *radius);
            lens_retroreflect(&lens, hit_pos, v)
                .ok()
                .map(|tr| (tr.exit, tr.exit_dir))
        }
    }
}

/// First intersection of the ray from `state` with any object translate,
/// searched window-by-window along the ray up to `cap`.
fn next_event(model: &CompiledModel, pos: Vec2, v: Vec2, cap: f64) -> Result<Option<Hit>, FlowError> {
    match &model.lattice {
        None => {
            let mut best: Option<Hit> = None;
            for (oi, obj) in model.objs.iter().enumerate() {
                if let Some(h) = hit_obj(obj, pos, v, cap, oi, (0, 0)) {
                    if best.as_ref().map_or(true, |b| h.t < b.t) {
                        best = Some(h);
                    }
                }
            }
            if best.is_none() && cap.is_finite() {
                return Err(FlowError::TravelCapExceeded);
            }
            Ok(best)
        }
        Some(lat) => {
            if model.objs.is_empty() {
                return Ok(None);
            }
            let window = 2.0 * lat.g2.norm().max(model.max_extent);
            let det = lat.covolume();
            let mut win_start = 0.0f64;
            while win_start < cap {
                let win_end = (win_start + window).min(cap);
                let mid = pos + v * (0.5 * (win_start + win_end));
                let reach = 0.5 * (win_end - win_start) + model.max_extent + window * 0.1;
                let mut best: Option<Hit> = None;
                for (oi, obj) in model.objs.iter().enumerate() {
                    let center = match obj {
                        ObjShape::Slit(s) | ObjShape::Edge { seg: s, .. } => s.center(),
                        ObjShape::Lens { center, .. } => *center,
                    };
                    let (u0, v0) = lat.coords(mid - center);
                    let du = (reach * lat.g2.norm() / det).ceil() as i64 + 1;
                    let dv = (reach * lat.g1.norm() / det).ceil() as i64 + 1;
                    for m in (u0.floor() as i64 - du)..=(u0.ceil() as i64 + du) {
                        for n in (v0.floor() as i64 - dv)..=(v0.ceil() as i64 + dv) {
                            let shift = lat.point(m, n);
                            if let Some(h) = hit_obj_shifted(obj, shift, pos, v, win_end, oi, (m, n)) {
                                if best.as_ref().map_or(true, |b| h.t < b.t) {
                                    best = Some(h);
                                }
                            }
                        }
                    }
                }
                if let Some(h) = best {
                    // accept only if the hit lies within this window; hits
                    // beyond will be rediscovered by the next window
                    if h.t <= win_end + 1e-12 {
                        return Ok(Some(h));
                    }
                }
                win_start = win_end;
            }
            Ok(None)
        }
    }
}

fn hit_obj(obj: &ObjShape, pos: Vec2, v: Vec2, cap: f64, oi: usize, lambda: (i64, i64)) -> Option<Hit> {
    hit_obj_shifted(obj, Vec2::ZERO, pos, v, cap, oi, lambda)
}

fn hit_obj_shifted(
    obj: &ObjShape,
    shift: Vec2,
    pos: Vec2,
    v: Vec2,
    cap: f64,
    oi: usize,
    lambda: (i64, i64),
) -> Option<Hit> {
    match obj {
        ObjShape::Slit(s) | ObjShape::Edge { seg: s, .. } => {
            let seg = s.translated(shift);
            match segment_ray_hit(&seg, pos, v, T_MIN) {
                Ok(Some(h)) if h.t <= cap => {
                    let singular = seg.half_length() - h.u.abs() < ENDPOINT_BAND;
                    Some(Hit {
                        t: h.t,
                        obj: oi,
                        lambda,
                        singular,
                    })
                }
                Ok(_) => None,
                Err(GeomError::ParallelGrazing) => {
                    // running along the fold line: singular leaf, event at the
                    // closest approach of an endpoint ahead of the ray
                    let ta = (seg.a - pos).dot(v);
                    let tb = (seg.b - pos).dot(v);
                    let t = [ta, tb]
                        .into_iter()
                        .filter(|&t| t > T_MIN)
                        .fold(f64::INFINITY, f64::min);
                    (t <= cap).then_some(Hit {
                        t,
                        obj: oi,
                        lambda,
                        singular: true,
                    })
                }
                Err(_) => None,
            }
        }
        ObjShape::Lens { center, radius } => {
            let c = *center + shift;
            circle_ray_hit(c, *radius, pos, v, T_MIN, GRAZING_BAND)
                .filter(|&t| t <= cap)
                .map(|t| Hit {
                    t,
                    obj: oi,
                    lambda,
                    singular: false,
                })
        }
    }
}

/// Traces the flow from `start` until `max_path`, recording events and
/// `checkpoints` evenly spaced displacement/deck samples. A singular hit
/// terminates the trace with a flag; for non-periodic skeletons a free
/// flight beyond `travel_cap` terminates with `TravelCap`.
pub fn trace(model: &CompiledModel, start: FlowState, max_path: f64, checkpoints: usize) -> Trajectory {
    let mut st = start;
    let origin = start.pos;
    let mark_step = max_path / checkpoints.max(1) as f64;
    let mut next_mark = mark_step;
    let mut events = Vec::new();
    let mut displacement = Vec::new();
    let mut decks = Vec::new();
    let mut event_cells = Vec::new();
    let cell0 = cell_of(model, origin);
    let travel_cap = 1e6f64.max(10.0 * max_path);

    let record_marks = |st: &FlowState, leg_start: Vec2, leg_len: f64, path_before: f64,
                            next_mark: &mut f64,
                            displacement: &mut Vec<Vec2>,
                            decks: &mut Vec<(i64, i64)>| {
        let v = st.velocity();
        while *next_mark <= path_before + leg_len + 1e-12 && displacement.len() < checkpoints {
            let along = (*next_mark - path_before).clamp(0.0, leg_len);
            let p = leg_start + v * along;
            displacement.push(p - origin);
            let c = cell_of(model, p);
            decks.push((c.0 - cell0.0, c.1 - cell0.1));
            *next_mark += mark_step;
        }
    };

    let terminated;
    loop {
        let remaining = max_path - st.path_length;
        if remaining <= 1e-12 {
            terminated = Termination::PathExhausted;
            break;
        }
        let v = st.velocity();
        let cap = remaining.min(travel_cap);
        let hit = match next_event(model, st.pos, v, cap) {
            Ok(h) => h,
            Err(FlowError::TravelCapExceeded) => {
                terminated = Termination::TravelCap;
                break;
            }
            Err(_) => unreachable!(),
        };
        let Some(hit) = hit else {
            // free flight to the end of the path budget
            record_marks(&st, st.pos, remaining, st.path_length, &mut next_mark, &mut displacement, &mut decks);
            st.pos = st.pos + v * remaining;
            st.path_length = max_path;
            terminated = Termination::PathExhausted;
            break;
        };
        let hit_pos = st.pos + v * hit.t;
        record_marks(&st, st.pos, hit.t, st.path_length, &mut next_mark, &mut displacement, &mut decks);
        st.path_length += hit.t;
        if hit.singular {
            events.push(Event {
                path_length: st.path_length,
                kind: EventKind::Singular,
                location: hit_pos,
                obj: hit.obj,
                lambda: hit.lambda,
            });
            let c = cell_of(model, hit_pos);
            event_cells.push((c.0 - cell0.0, c.1 - cell0.1));
            st.pos = hit_pos;
            terminated = Termination::Singular;
            break;
        }
        let shift = match &model.lattice {
            Some(lat) => lat.point(hit.lambda.0, hit.lambda.1),
            None => Vec2::ZERO,
        };
        match &model.objs[hit.obj] {
            ObjShape::Slit(s) => {
                let seg = s.translated(shift);
                st.pos = seg.center() * 2.0 - hit_pos;
                st.sign = -st.sign;
                events.push(Event {
                    path_length: st.path_length,
                    kind: EventKind::FoldCross,
                    location: hit_pos,
                    obj: hit.obj,
                    lambda: hit.lambda,
                });
                let c = cell_of(model, hit_pos);
                event_cells.push((c.0 - cell0.0, c.1 - cell0.1));
            }
            ObjShape::Edge { shift: jump, .. } => {
                st.pos = hit_pos + *jump;
                events.push(Event {
                    path_length: st.path_length,
                    kind: EventKind::PillowJump,
                    location: hit_pos,
                    obj: hit.obj,
                    lambda: hit.lambda,
                });
                let c = cell_of(model, hit_pos);
                event_cells.push((c.0 - cell0.0, c.1 - cell0.1));
            }
            ObjShape::Lens { center, radius } => {
                let lens = EatonLens::new(*center + shift, *radius);
                match lens_retroreflect(&lens, hit_pos, v) {
                    Ok(tr) => {
                        // advance the transit clock, recording any checkpoint
                        // that falls inside the lens at the exit point
                        let before = st.path_length;
                        st.path_length += tr.transit_time;
                        while next_mark <= st.path_length && displacement.len() < checkpoints {
                            displacement.push(tr.exit - origin);
                            let c = cell_of(model, tr.exit);
                            decks.push((c.0 - cell0.0, c.1 - cell0.1));
                            next_mark += mark_step;
                        }
                        let _ = before;
                        st.pos = tr.exit;
                        st.sign = -st.sign;
                        events.push(Event {
                            path_length: st.path_length,
                            kind: EventKind::LensTransit,
                            location: hit_pos,
                            obj: hit.obj,
                            lambda: hit.lambda,
                        });
                        let c = cell_of(model, hit_pos);
                        event_cells.push((c.0 - cell0.0, c.1 - cell0.1));
                    }
                    Err(_) => {
                        events.push(Event {
                            path_length: st.path_length,
                            kind: EventKind::Singular,
                            location: hit_pos,
                            obj: hit.obj,
                            lambda: hit.lambda,
                        });
                        st.pos = hit_pos;
                        terminated = Termination::Singular;
                        break;
                    }
                }
            }
        }
        if st.path_length >= max_path {
            terminated = Termination::PathExhausted;
            break;
        }
    }
    Trajectory {
        theta: start.theta,
        start: origin,
        events,
        displacement_samples: displacement,
        deck_samples: decks,
        event_cells,
        final_state: st,
        terminated,
    }
}

fn cell_of(model: &CompiledModel, p: Vec2) -> (i64, i64) {
    match &model.lattice {
        Some(lat) => lat.cell_of(p),
        None => (0, 0),
    }
}

// ---------------------------------------------------------------------------
// Model comparison
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub rays: usize,
    pub compared: usize,
    pub matched: usize,
    pub singular: usize,
}

impl CompareReport {
    pub fn match_fraction(&self) -> f64 {
        if self.compared == 0 {
            1.0
        } else {
            self.matched as f64 / self.compared as f64
        }
    }
}

/// Itinerary of a trajectory: the sequence of (object, translate) crossings.
fn itinerary(tr: &Trajectory) -> Vec<(usize, (i64, i64))> {
    tr.events
        .iter()
        .filter(|e| e.kind != EventKind::Singular)
        .map(|e| (e.obj, e.lambda))
        .collect()
}

/// Compares the lens field with its flat (slit) counterpart by tracing
/// `n_rays` seeded random starts in both models and matching the ordered
/// crossing itineraries. Rays with a singular hit in either model are
/// excluded.
pub fn compare_models(
    lenses: &LensConfiguration,
    slits: &Skeleton,
    theta: f64,
    n_rays: usize,
    path: f64,
    seed: u64,
) -> CompareReport {
    let lens_model = compile_lenses(lenses);
    let slit_model = compile_skeleton(slits);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut compared = 0;
    let mut matched = 0;
    let mut singular = 0;
    for _ in 0..n_rays {
        let start = match seed_start(&mut rng, lenses, theta) {
            Some(s) => s,
            None => continue,
        };
        let ta = trace(&lens_model, start, path, 8);
        let tb = trace(&slit_model, start, path, 8);
        if ta.terminated == Termination::Singular || tb.terminated == Termination::Singular {
            singular += 1;
            continue;
        }
        compared += 1;
        // the lens clock advances by pi R per transit, so the same path
        // budget holds fewer lens events; itineraries are compared on the
        // common prefix (orbits, not clocks)
        let ia = itinerary(&ta);
        let ib = itinerary(&tb);
        let n = ia.len().min(ib.len());
        if ia[..n] == ib[..n] {
            matched += 1;
        }
    }
    CompareReport {
        rays: n_rays,
        compared,
        matched,
        singular,
    }
}

/// Uniform random start in the fundamental cell, outside every lens.
pub fn seed_start<R: Rng>(rng: &mut R, cfg: &LensConfiguration, theta: f64) -> Option<FlowState> {
    for _ in 0..200 {
        let u: f64 = rng.gen();
        let v: f64 = rng.gen();
        let pos = cfg.lattice.g1 * u + cfg.lattice.g2 * v;
        let clear = cfg
            .lenses
            .iter()
            .all(|&(c, r)| cfg.lattice.min_dist(pos - c, false) > r + 1e-6);
        if clear {
            let sign = if rng.gen::<bool>() { 1 } else { -1 };
            return Some(FlowState::new(pos, sign, theta));
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Trapping statistics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TrapStats {
    /// Minimal directional width of the displacement hull.
    pub min_width: f64,
    /// Unit direction in which the width is minimal.
    pub trap_direction: Vec2,
    /// Distinct lattice cells visited at checkpoints.
    pub cell_count: usize,
    /// Log-log slope of max |<d, u*>| against path length over the last two
    /// decades, u* the minimizing direction.
    pub growth_exponent: f64,
}

/// Andrew monotone chain convex hull.
fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
    pts.dedup_by(|a, b| (*a - *b).norm() < 1e-15);
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::new();
    for &p in pts.iter().chain(pts.iter().rev().skip(1)) {
        while hull.len() >= 2 {
            let q = hull[hull.len() - 1];
            let r = hull[hull.len() - 2];
            if (q - r).cross(p - q) <= 1e-15 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Rotating-calipers minimal width of a convex hull; returns the width and
/// the normal direction achieving it.
fn min_width(hull: &[Vec2]) -> (f64, Vec2) {
    if hull.len() < 2 {
        return (0.0, Vec2::new(0.0, 1.0));
    }
    if hull.len() == 2 {
        return (0.0, (hull[1] - hull[0]).normalized().perp());
    }
    let n = hull.len();
    let mut best = f64::INFINITY;
    let mut dir = Vec2::new(0.0, 1.0);
    for i in 0..n {
        let e = (hull[(i + 1) % n] - hull[i]).normalized();
        let nrm = e.perp();
        let width = hull
            .iter()
            .map(|&p| nrm.dot(p - hull[i]))
            .fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let w = width.1 - width.0;
        if w < best {
            best = w;
            dir = nrm;
        }
    }
    if dir.y < 0.0 || (dir.y == 0.0 && dir.x < 0.0) {
        dir = -dir;
    }
    (best, dir)
}

/// Computes trapping statistics for a trajectory with at least 10 samples.
pub fn trap_stats(traj: &Trajectory) -> Result<TrapStats, FlowError> {
    let samples = &traj.displacement_samples;
    if samples.len() < 10 {
        return Err(FlowError::TooFewSamples(samples.len()));
    }
    let hull = convex_hull(samples);
    let (width, u_star) = min_width(&hull);
    // distinct cells visited: checkpoint cells plus the cells of every
    // crossing event (checkpoints alone undersample long traces)
    let mut cells: Vec<(i64, i64)> = traj.deck_samples.clone();
    cells.extend(traj.event_cells.iter().copied());
    cells.sort_unstable();
    cells.dedup();

    // growth of W(L) = max_{k <= L} |<d_k, u*>| over the last two decades
    let n = samples.len();
    let mut running = 0.0f64;
    let mut ws = Vec::with_capacity(n);
    for d in samples {
        running = running.max(d.dot(u_star).abs());
        ws.push(running.max(1e-9));
    }
    let l_full = n as f64;
    let lo = (l_full / 100.0).max(2.0);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, w) in ws.iter().enumerate() {
        let l = (k + 1) as f64;
        if l >= lo {
            xs.push(l.ln());
            ys.push(w.ln());
        }
    }
    let growth_exponent = least_squares_slope(&xs, &ys).unwrap_or(0.0);
    Ok(TrapStats {
        min_width: width,
        trap_direction: u_star,
        cell_count: cells.len(),
        growth_exponent,
    })
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    (den > 1e-12).then(|| num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{gamma_w, lens_to_slits};
    use crate::skeleton::{builtin_skeleton, SlitFold};
    use std::f64::consts::PI;

    #[test]
    fn single_lens_retroreflects_the_ray() {
        // lens R=1 at the origin on a huge lattice; ray from (-3, 0.5) east.
        let lat = Lattice::new(Vec2::new(100.0, 0.0), Vec2::new(0.0, 100.0)).unwrap();
        let cfg = LensConfiguration::new(lat, vec![(Vec2::ZERO, 1.0)]).unwrap();
        let model = compile_lenses(&cfg);
        let tr = trace(&model, FlowState::new(Vec2::new(-3.0, 0.5), 1, 0.0), 10.0, 16);
        assert_eq!(tr.events.len(), 1);
        assert_eq!(tr.events[0].kind, EventKind::LensTransit);
        // exits at (-sqrt(0.75), -0.5) moving left
        let exit_expect = Vec2::new(-(0.75f64).sqrt(), -0.5);
        let after = tr.final_state;
        assert_eq!(after.sign, -1);
        // final position lies on the leftward ray from the exit point
        let back = exit_expect - after.pos;
        assert!(back.normalized().dot(Vec2::new(1.0, 0.0)) > 1.0 - 1e-9, "pos {:?}", after.pos);
    }

    #[test]
    fn slit_equals_flat_lens_on_one_crossing() {
        // a single slit >(0,-1),(0,1)< and the same start: identical outcome
        let lat = Lattice::new(Vec2::new(100.0, 0.0), Vec2::new(0.0, 100.0)).unwrap();
        let skel = Skeleton {
            lattice: Some(lat),
            folds: vec![Fold::Slit(SlitFold::new(Vec2::new(0.0, -1.0), Vec2::new(0.0, 1.0)))],
        };
        let model = compile_skeleton(&skel);
        let tr = trace(&model, FlowState::new(Vec2::new(-3.0, 0.5), 1, 0.0), 10.0, 16);
        assert_eq!(tr.events.len(), 1);
        // continue from (0,-0.5) moving left
        let st = tr.final_state;
        assert_eq!(st.sign, -1);
        assert!((st.pos.y - (-0.5)).abs() < 1e-9);
        assert!(st.pos.x < 0.0);
    }

    #[test]
    fn empty_plane_skeleton_hits_travel_cap() {
        let skel = Skeleton {
            lattice: None,
            folds: vec![],
        };
        let model = compile_skeleton(&skel);
        let tr = trace(&model, FlowState::new(Vec2::ZERO, 1, 0.3), 1e9, 4);
        assert_eq!(tr.terminated, Termination::TravelCap);
    }

    #[test]
    fn wollmilchsau_first_hit_is_found() {
        let skel = builtin_skeleton("wollmilchsau").unwrap();
        let model = compile_skeleton(&skel);
        let tr = trace(&model, FlowState::new(Vec2::new(1.0, -1.0), 1, PI / 4.0), 50.0, 8);
        assert!(!tr.events.is_empty());
        // exhaustive small-translate search for the first hit
        let lat = skel.lattice.unwrap().reduce();
        let mut best_t = f64::INFINITY;
        let v = Vec2::dir(PI / 4.0);
        for f in skel.slit_folds() {
            for m in -6..=6 {
                for n in -6..=6 {
                    let seg = f.seg.translated(lat.point(m, n));
                    if let Ok(Some(h)) = segment_ray_hit(&seg, Vec2::new(1.0, -1.0), v, 1e-9) {
                        best_t = best_t.min(h.t);
                    }
                }
            }
        }
        assert!(((tr.events[0].path_length) - best_t).abs() < 1e-9);
    }

    #[test]
    fn path_length_is_additive() {
        let skel = builtin_skeleton("wollmilchsau").unwrap();
        let model = compile_skeleton(&skel);
        let tr = trace(&model, FlowState::new(Vec2::new(0.3, -0.7), 1, 0.37), 500.0, 32);
        assert_eq!(tr.terminated, Termination::PathExhausted);
        assert!((tr.final_state.path_length - 500.0).abs() < 1e-9);
        let mut last = 0.0;
        for e in &tr.events {
            assert!(e.path_length > last - 1e-12);
            last = e.path_length;
        }
    }

    #[test]
    fn time_reversal_retraces_events() {
        let skel = builtin_skeleton("wollmilchsau").unwrap();
        let model = compile_skeleton(&skel);
        let fwd = trace(&model, FlowState::new(Vec2::new(0.3, -0.7), 1, 0.37), 200.0, 8);
        assert_eq!(fwd.terminated, Termination::PathExhausted);
        let back_start = FlowState::new(fwd.final_state.pos, -fwd.final_state.sign, 0.37);
        let back = trace(&model, back_start, 200.0, 8);
        assert_eq!(back.events.len(), fwd.events.len());
        let total = 200.0;
        for (e_b, e_f) in back.events.iter().zip(fwd.events.iter().rev()) {
            assert!((e_b.path_length - (total - e_f.path_length)).abs() < 1e-6);
            assert_eq!(e_b.obj, e_f.obj);
        }
    }

    #[test]
    fn deck_samples_match_positions() {
        let cfg = gamma_w(PI / 8.0);
        let model = compile_lenses(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let start = seed_start(&mut rng, &cfg, PI / 8.0).unwrap();
        let tr = trace(&model, start, 2000.0, 64);
        assert!(tr.deck_samples.len() >= 10);
        let lat = cfg.lattice.reduce();
        let c0 = lat.cell_of(tr.start);
        for (d, cell) in tr.displacement_samples.iter().zip(tr.deck_samples.iter()) {
            let c = lat.cell_of(*d + tr.start);
            assert_eq!((c.0 - c0.0, c.1 - c0.1), *cell);
        }
        // the ergodic curve leaves its starting cell
        let distinct: std::collections::BTreeSet<_> = tr.deck_samples.iter().collect();
        assert!(distinct.len() > 1);
    }

    #[test]
    fn gamma_w_model_equivalence() {
        let theta = PI / 8.0;
        let cfg = gamma_w(theta);
        let slits = lens_to_slits(&cfg, theta).skeleton();
        let rep = compare_models(&cfg, &slits, theta, 100, 100.0, 7);
        assert!(rep.compared > 80);
        assert!(
            rep.match_fraction() >= 0.99,
            "match fraction {}",
            rep.match_fraction()
        );
    }

    #[test]
    fn broken_correspondence_is_detected() {
        let theta = PI / 8.0;
        let cfg = gamma_w(theta);
        let mut slits = lens_to_slits(&cfg, theta);
        // deliberately shift one slit off its lens
        slits.slits[0].0 = slits.slits[0].0 + Vec2::new(0.35, 0.0);
        let rep = compare_models(&cfg, &slits.skeleton(), theta, 60, 100.0, 7);
        assert!(rep.match_fraction() < 0.6, "match fraction {}", rep.match_fraction());
    }

    #[test]
    fn trap_stats_on_synthetic_samples() {
        // purely horizontal displacement: zero width, vertical trap direction
        let samples: Vec<Vec2> = (0..100).map(|k| Vec2::new(k as f64, 0.0)).collect();
        let traj = Trajectory {
            theta: 0.0,
            start: Vec2::ZERO,
            events: vec![],
            deck_samples: samples.iter().map(|d| (d.x as i64, 0)).collect(),
            displacement_samples: samples,
            event_cells: vec![],
            final_state: FlowState::new(Vec2::ZERO, 1, 0.0),
            terminated: Termination::PathExhausted,
        };
        let st = trap_stats(&traj).unwrap();
        assert!(st.min_width < 1e-9);
        assert!((st.trap_direction - Vec2::new(0.0, 1.0)).norm() < 1e-9);

        // isotropic random walk: growth exponent near 1/2
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = Vec2::ZERO;
        let mut samples = Vec::new();
        for _ in 0..20000 {
            let a: f64 = rng.gen::<f64>() * 2.0 * PI;
            p = p + Vec2::dir(a);
            samples.push(p);
        }
        let traj = Trajectory {
            theta: 0.0,
            start: Vec2::ZERO,
            events: vec![],
            deck_samples: samples.iter().map(|d| (d.x.floor() as i64, d.y.floor() as i64)).collect(),
            displacement_samples: samples,
            event_cells: vec![],
            final_state: FlowState::new(Vec2::ZERO, 1, 0.0),
            terminated: Termination::PathExhausted,
        };
        let st = trap_stats(&traj).unwrap();
        assert!(
            (0.3..0.7).contains(&st.growth_exponent),
            "exponent {}",
            st.growth_exponent
        );

        // too few samples
        let short = Trajectory {
            displacement_samples: vec![Vec2::ZERO; 3],
            deck_samples: vec![(0, 0); 3],
            event_cells: vec![],
            ..traj
        };
        assert!(matches!(trap_stats(&short), Err(FlowError::TooFewSamples(3))));
    }
}
