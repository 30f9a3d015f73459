//! Singularity census of a skeleton by sector tracing.
//!
//! Around every singular point of the flat structure (fold endpoints, strand
//! centers, T-junctions and their fold mirrors, translation-edge corners) the
//! plane is divided into angular sectors by the incident cut germs. Crossing
//! a cut glues sector walls pairwise:
//!
//! * slit-fold cut: `(p, germ d, side s) -> (rho(p), germ -d, side -s)` where
//!   `rho` is the point reflection through the fold center (each strand is
//!   identified with itself, so the global side of the line is preserved);
//! * translation edge: `(p, germ d, side s) -> (p -+ shift, germ d, side -s)`.
//!
//! Wall gluing is an involution, every sector has exactly two walls, so the
//! sectors decompose into cycles; the cone angle of a singularity is the sum
//! of its cycle's sector angles. This is fully independent of the gcd
//! formulas in [`crate::covers`] and is used to cross-validate the built-in
//! skeletons against cover branching data.

use crate::geom::{Lattice, Segment, Vec2};
use crate::skeleton::{Fold, Skeleton};
use std::collections::BTreeSet;

const TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy)]
enum Glue {
    /// Point reflection through the fold center.
    Fold { center: Vec2 },
    /// Translation onto the partner edge.
    Edge { shift: Vec2 },
}

#[derive(Debug, Clone, Copy)]
struct Cut {
    seg: Segment,
    glue: Glue,
}

/// Multiset of cone angles, in units of pi, of the singular points of the
/// quotient surface (regular 2-pi points are dropped). The inside of every
/// pillow-fold is a separate invariant pillowcase component; its cone points
/// are reported in `inner_angles_over_pi` and kept out of the main census,
/// which describes the outer surface the flow lives on. `euler` is the Euler
/// characteristic of the outer component computed from the angle defects.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularityCensus {
    pub angles_over_pi: Vec<u32>,
    pub inner_angles_over_pi: Vec<u32>,
    pub euler: i64,
}

impl SingularityCensus {
    /// Total order sum `sum (m_i - 2)`; equals `4g - 4` on a genus-g surface.
    pub fn order_sum(&self) -> i64 {
        self.angles_over_pi.iter().map(|&m| m as i64 - 2).sum()
    }
}

/// Open parallelogram regions enclosed by pillow-folds (their "insides").
fn pillow_interiors(skel: &Skeleton) -> Vec<(Vec2, Vec2, Vec2)> {
    let mut out = Vec::new();
    for f in &skel.folds {
        if let Fold::Pillow(p) = f {
            let span = p.step() * p.n as f64;
            out.push((p.c, span, p.jump()));
        }
    }
    out
}

fn point_in_parallelogram(origin: Vec2, e1: Vec2, e2: Vec2, p: Vec2, lattice: &Option<Lattice>) -> bool {
    let inside = |q: Vec2| -> bool {
        let det = e1.cross(e2);
        let rel = q - origin;
        let u = rel.cross(e2) / det;
        let v = e1.cross(rel) / det;
        (1e-9..=1.0 - 1e-9).contains(&u) && (1e-9..=1.0 - 1e-9).contains(&v)
    };
    match lattice {
        None => inside(p),
        Some(lat) => {
            // test p against all nearby translates of the region
            let lat = lat.reduce();
            let reach = ((e1.norm() + e2.norm() + (p - origin).norm()) / lat.g1.norm()).ceil() as i64 + 1;
            for m in -reach..=reach {
                for n in -reach..=reach {
                    if inside(p - lat.point(m, n)) {
                        return true;
                    }
                }
            }
            false
        }
    }
}

fn expand_cuts(skel: &Skeleton) -> Vec<Cut> {
    let mut cuts = Vec::new();
    let mut push_slit = |seg: Segment| {
        cuts.push(Cut {
            seg,
            glue: Glue::Fold { center: seg.center() },
        });
    };
    for f in &skel.folds {
        match f {
            Fold::Slit(s) => push_slit(s.seg),
            Fold::Chip(c) => {
                for s in c.slits() {
                    push_slit(s.seg);
                }
            }
            Fold::Pillow(p) => {
                for s in p.slit_sides() {
                    push_slit(s);
                }
            }
        }
    }
    for f in &skel.folds {
        if let Fold::Pillow(p) = f {
            let (lower, upper) = p.translation_edges();
            let j = p.jump();
            cuts.push(Cut {
                seg: lower,
                glue: Glue::Edge { shift: j },
            });
            cuts.push(Cut {
                seg: upper,
                glue: Glue::Edge { shift: -j },
            });
        }
    }
    cuts
}

struct Arena {
    cuts: Vec<Cut>,
    lattice: Option<Lattice>,
    scale: f64,
}

impl Arena {
    fn canon(&self, p: Vec2) -> Vec2 {
        match &self.lattice {
            None => p,
            Some(lat) => {
                let (u, v) = lat.coords(p);
                let (mut fu, mut fv) = (u - u.floor(), v - v.floor());
                // snap near-1 fractions to 0
                if fu > 1.0 - 1e-9 {
                    fu = 0.0;
                }
                if fv > 1.0 - 1e-9 {
                    fv = 0.0;
                }
                lat.g1 * fu + lat.g2 * fv
            }
        }
    }

    fn same_point(&self, p: Vec2, q: Vec2) -> bool {
        match &self.lattice {
            None => (p - q).norm() < TOL * self.scale,
            Some(lat) => {
                let (u, v) = lat.coords(p - q);
                (u - u.round()).abs() < TOL && (v - v.round()).abs() < TOL
            }
        }
    }

    /// Translates of cut `ci` that pass within `radius` of `p`.
    fn incident_translates(&self, p: Vec2, ci: usize) -> Vec<Vec2> {
        let cut = &self.cuts[ci];
        match &self.lattice {
            None => vec![Vec2::ZERO],
            Some(lat) => {
                let lat = lat.reduce();
                let reach = ((cut.seg.half_length() + (p - cut.seg.center()).norm()) / lat.g1.norm()).ceil()
                    as i64
                    + 2;
                let mut out = Vec::new();
                for m in -reach..=reach {
                    for n in -reach..=reach {
                        let v = lat.point(m, n);
                        let d = (p - (cut.seg.center() + v)).norm();
                        if d <= cut.seg.half_length() + TOL * self.scale {
                            out.push(v);
                        }
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Germ {
    dir: Vec2,
    cut: usize,
    /// Lattice translate of the cut this germ belongs to.
    shift: Vec2,
}

/// Computes the singularity census of a skeleton. Panics on structurally
/// inconsistent skeletons (cone angles that are not multiples of pi), which
/// indicates invalid input geometry such as transversally crossing folds.
pub fn skeleton_census(skel: &Skeleton) -> SingularityCensus {
    let cuts = expand_cuts(skel);
    let scale = cuts
        .iter()
        .map(|c| c.seg.half_length())
        .fold(1.0f64, f64::max);
    let arena = Arena {
        cuts,
        lattice: skel.lattice,
        scale,
    };

    // Seed singular points: endpoints and strand centers of every cut.
    let mut points: Vec<Vec2> = Vec::new();
    let add_point = |points: &mut Vec<Vec2>, arena: &Arena, p: Vec2| {
        let p = arena.canon(p);
        if !points.iter().any(|&q| arena.same_point(p, q)) {
            points.push(p);
        }
    };
    for c in &arena.cuts {
        add_point(&mut points, &arena, c.seg.a);
        add_point(&mut points, &arena, c.seg.b);
        if matches!(c.glue, Glue::Fold { .. }) {
            add_point(&mut points, &arena, c.seg.center());
        }
    }

    // Closure under glue images of junction points sitting on cut interiors.
    for _ in 0..16 {
        let mut new_pts = Vec::new();
        for &p in &points {
            for ci in 0..arena.cuts.len() {
                for shift in arena.incident_translates(p, ci) {
                    let seg = arena.cuts[ci].seg.translated(shift);
                    if !on_interior(&seg, p, arena.scale) {
                        continue;
                    }
                    let img = match arena.cuts[ci].glue {
                        Glue::Fold { center } => (center + shift) * 2.0 - p,
                        Glue::Edge { shift: t } => p + t,
                    };
                    let img = arena.canon(img);
                    if !points.iter().any(|&q| arena.same_point(img, q))
                        && !new_pts.iter().any(|&q| arena.same_point(img, q))
                    {
                        new_pts.push(img);
                    }
                }
            }
        }
        if new_pts.is_empty() {
            break;
        }
        points.extend(new_pts);
    }

    // Germs at every singular point.
    let mut germs: Vec<Vec<Germ>> = Vec::with_capacity(points.len());
    for &p in &points {
        let mut here = Vec::new();
        for ci in 0..arena.cuts.len() {
            for shift in arena.incident_translates(p, ci) {
                let seg = arena.cuts[ci].seg.translated(shift);
                let tol = TOL * arena.scale;
                if (p - seg.a).norm() < tol {
                    here.push(Germ {
                        dir: seg.direction(),
                        cut: ci,
                        shift,
                    });
                } else if (p - seg.b).norm() < tol {
                    here.push(Germ {
                        dir: -seg.direction(),
                        cut: ci,
                        shift,
                    });
                } else if on_interior(&seg, p, arena.scale) {
                    here.push(Germ {
                        dir: seg.direction(),
                        cut: ci,
                        shift,
                    });
                    here.push(Germ {
                        dir: -seg.direction(),
                        cut: ci,
                        shift,
                    });
                }
            }
        }
        here.sort_by(|a, b| a.dir.angle().partial_cmp(&b.dir.angle()).unwrap());
        germs.push(here);
    }

    // Sectors and walls. Wall id: (point, germ, side).
    // Sector k at a point with sorted germs g_0..g_{m-1} spans from g_k to
    // g_{k+1}; its walls are (g_k, +1) and (g_{k+1}, -1).
    #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
    struct WallId {
        point: usize,
        germ: usize,
        side: i8,
    }
    let mut sector_angle: Vec<f64> = Vec::new();
    let mut sector_of_wall: std::collections::BTreeMap<WallId, usize> = Default::default();
    let mut walls_of_sector: Vec<[WallId; 2]> = Vec::new();
    for (pi, gs) in germs.iter().enumerate() {
        let m = gs.len();
        if m == 0 {
            continue;
        }
        if m == 1 {
            let w1 = WallId {
                point: pi,
                germ: 0,
                side: 1,
            };
            let w2 = WallId {
                point: pi,
                germ: 0,
                side: -1,
            };
            let id = sector_angle.len();
            sector_angle.push(2.0 * std::f64::consts::PI);
            sector_of_wall.insert(w1, id);
            sector_of_wall.insert(w2, id);
            walls_of_sector.push([w1, w2]);
            continue;
        }
        for k in 0..m {
            let a1 = gs[k].dir.angle();
            let a2 = gs[(k + 1) % m].dir.angle();
            let mut span = a2 - a1;
            if k + 1 == m {
                span += 2.0 * std::f64::consts::PI;
            }
            let w1 = WallId {
                point: pi,
                germ: k,
                side: 1,
            };
            let w2 = WallId {
                point: pi,
                germ: (k + 1) % m,
                side: -1,
            };
            let id = sector_angle.len();
            sector_angle.push(span);
            sector_of_wall.insert(w1, id);
            sector_of_wall.insert(w2, id);
            walls_of_sector.push([w1, w2]);
        }
    }

    // Wall gluing.
    let find_point = |p: Vec2| -> usize {
        let p = arena.canon(p);
        points
            .iter()
            .position(|&q| arena.same_point(p, q))
            .expect("glue image must be a registered singular point")
    };
    let glue_wall = |w: WallId| -> WallId {
        let g = germs[w.point][w.germ];
        let p = points[w.point];
        let (target_raw, tdir, tside) = match arena.cuts[g.cut].glue {
            Glue::Fold { center } => ((center + g.shift) * 2.0 - p, -g.dir, -w.side),
            Glue::Edge { shift } => (p + shift, g.dir, -w.side),
        };
        let tp = find_point(target_raw);
        let canon_offset = points[tp] - target_raw;
        let candidates: Vec<usize> = germs[tp]
            .iter()
            .enumerate()
            .filter(|(_, h)| (h.dir - tdir).norm() < 1e-6)
            .map(|(i, _)| i)
            .collect();
        let tg = if candidates.len() == 1 {
            candidates[0]
        } else {
            // disambiguate collinear germs by cut identity and translate
            *candidates
                .iter()
                .find(|&&i| {
                    let h = germs[tp][i];
                    match (arena.cuts[g.cut].glue, arena.cuts[h.cut].glue) {
                        (Glue::Fold { .. }, Glue::Fold { .. }) => {
                            h.cut == g.cut && (h.shift - (g.shift + canon_offset)).norm() < 1e-6 * arena.scale.max(1.0)
                        }
                        (Glue::Edge { shift: s1 }, Glue::Edge { shift: s2 }) => (s1 + s2).norm() < 1e-9,
                        _ => false,
                    }
                })
                .expect("ambiguous collinear germs could not be resolved")
        };
        WallId {
            point: tp,
            germ: tg,
            side: tside,
        }
    };

    // Classify sectors: inside a pillow hole or on the outer surface. The
    // inner worlds are invariant pillowcase components of their own.
    let interiors = pillow_interiors(skel);
    let sector_is_inner: Vec<bool> = walls_of_sector
        .iter()
        .enumerate()
        .map(|(si, walls)| {
            let w = walls[0];
            let p = points[w.point];
            let gs = &germs[w.point];
            // bisector direction of the sector
            let a1 = gs[w.germ].dir.angle();
            let span = sector_angle[si];
            let mid = a1 + 0.5 * span;
            let probe = p + Vec2::dir(mid) * (1e-4 * arena.scale);
            interiors
                .iter()
                .any(|&(o, e1, e2)| point_in_parallelogram(o, e1, e2, probe, &arena.lattice))
        })
        .collect();

    // Trace cycles: every sector has exactly two walls and wall gluing is an
    // involution, so sectors decompose into closed chains.
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    let mut census = Vec::new();
    let mut inner_census = Vec::new();
    let mut euler_twice = 0i64; // 2 * chi of the outer component
    for start in 0..sector_angle.len() {
        if seen.contains(&start) {
            continue;
        }
        let w0 = walls_of_sector[start][0];
        let mut sector = start;
        let mut entry = w0;
        let mut angle = 0.0;
        let mut inner_votes = 0usize;
        let mut total = 0usize;
        loop {
            seen.insert(sector);
            angle += sector_angle[sector];
            total += 1;
            if sector_is_inner[sector] {
                inner_votes += 1;
            }
            let [a, b] = walls_of_sector[sector];
            let out = if a == entry { b } else { a };
            let glued = glue_wall(out);
            if glued == w0 {
                break;
            }
            entry = glued;
            sector = *sector_of_wall.get(&glued).expect("glued wall has a sector");
        }
        assert!(
            inner_votes == 0 || inner_votes == total,
            "cycle mixes pillow-interior and outer sectors; invalid skeleton geometry"
        );
        let inner = inner_votes > 0;
        let m = angle / std::f64::consts::PI;
        let m_round = m.round() as i64;
        assert!(
            (m - m_round as f64).abs() < 1e-6 && m_round >= 1,
            "cone angle {m} pi is not an integer multiple of pi; invalid skeleton geometry"
        );
        if inner {
            if m_round != 2 {
                inner_census.push(m_round as u32);
            }
        } else {
            euler_twice += 2 - m_round;
            if m_round != 2 {
                census.push(m_round as u32);
            }
        }
    }
    census.sort_unstable();
    inner_census.sort_unstable();
    assert!(
        euler_twice % 2 == 0,
        "half-integer Euler characteristic, invalid gluing"
    );
    SingularityCensus {
        angles_over_pi: census,
        inner_angles_over_pi: inner_census,
        euler: euler_twice / 2,
    }
}

fn on_interior(seg: &Segment, p: Vec2, scale: f64) -> bool {
    let d = seg.b - seg.a;
    let len = d.norm();
    let rel = p - seg.a;
    let tol = TOL * scale;
    if d.cross(rel).abs() / len > tol {
        return false;
    }
    let t = rel.dot(d) / (len * len);
    let margin = tol / len;
    t > margin && t < 1.0 - margin
}

/// Whether `skel` is a Whitehead degeneration of a surface with cone angles
/// `cover` (both in units of pi, regular points omitted): reachable by
/// repeatedly merging a zero with a pole (`m >= 3` and `1` become `m - 1`)
/// or two zeros (`m1, m2 >= 3` become `m1 + m2 - 2`), dropping any `2`
/// produced. Exact equality counts as compatible.
pub fn census_compatible(skel: &[u32], cover: &[u32]) -> bool {
    fn norm(mut v: Vec<u32>) -> Vec<u32> {
        v.retain(|&m| m != 2);
        v.sort_unstable();
        v
    }
    fn reach(cur: Vec<u32>, goal: &[u32], seen: &mut BTreeSet<Vec<u32>>) -> bool {
        if cur == goal {
            return true;
        }
        if cur.len() < goal.len() || !seen.insert(cur.clone()) {
            return false;
        }
        let n = cur.len();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (a, b) = (cur[i], cur[j]);
                let merged = if a >= 3 && b == 1 {
                    Some(a - 1)
                } else if a >= 3 && b >= 3 && i < j {
                    Some(a + b - 2)
                } else {
                    None
                };
                if let Some(m) = merged {
                    let mut next: Vec<u32> = cur
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != i && k != j)
                        .map(|(_, &x)| x)
                        .collect();
                    if m != 2 {
                        next.push(m);
                    }
                    next.sort_unstable();
                    if reach(next, goal, seen) {
                        return true;
                    }
                }
            }
        }
        false
    }
    let goal = norm(skel.to_vec());
    let start = norm(cover.to_vec());
    reach(start, &goal, &mut BTreeSet::new())
}
