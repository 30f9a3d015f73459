//! Slit-folds, pillow-folds and chip-folds: the data model, the local
//! transition maps of the directional foliation, the pillow-to-chip
//! conversion, railed-deformation verification and the built-in skeletons.
//!
//! A slit-fold `>a,b<` identifies, on each strand of the doubled segment,
//! the pairs of points equidistant from the center; a leaf crossing the fold
//! continues from the centrally reflected point with reversed orientation.
//! A pillow-fold keeps the two sides parallel to `[a,b]` as slit-folds and
//! glues the other two sides to each other by a translation, modelling a
//! rectangular hole whose inside is a pillowcase.

use crate::geom::{segments_cross, Lattice, Segment, Vec2, EPS_GEOM};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkeletonError {
    #[error("trajectory tangential to the fold (singular leaf)")]
    TangentialHit,
    #[error("unknown builtin skeleton `{0}`")]
    UnknownName(String),
    #[error("skeletons have no declared slit-fold correspondence: {0}")]
    CorrespondenceMissing(String),
    #[error("invalid fold data: {0}")]
    InvalidFold(String),
}

/// A single slit-fold `>a,b<`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlitFold {
    pub seg: Segment,
}

impl SlitFold {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        SlitFold {
            seg: Segment::new(a, b),
        }
    }
}

/// An n-pillow-fold `>a,b< x n|c,d|`. The sides parallel to `[a,b]` (at the
/// `n+1` positions `a + k(d-c)`) are slit-folds; the two sides parallel to
/// `[c,d]` are identified with each other by the translation `a + b - 2c`
/// (for the standard corner-anchored pillow, `c = a`, this is `b - a`).
/// `c` lies on `[a, (a+b)/2]` per the normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PillowFold {
    pub a: Vec2,
    pub b: Vec2,
    pub c: Vec2,
    pub d: Vec2,
    pub n: u32,
}

/// An n-chip-fold: same parallelogram data, all sides are slit-folds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChipFold {
    pub a: Vec2,
    pub b: Vec2,
    pub c: Vec2,
    pub d: Vec2,
    pub n: u32,
}

impl PillowFold {
    pub fn new(a: Vec2, b: Vec2, c: Vec2, d: Vec2, n: u32) -> Result<Self, SkeletonError> {
        validate_fold_frame(a, b, c, d, n)?;
        Ok(PillowFold { a, b, c, d, n })
    }

    /// Step vector between consecutive `[a,b]`-parallel slit-folds.
    pub fn step(&self) -> Vec2 {
        self.d - self.c
    }

    /// The `n+1` slit-fold sides.
    pub fn slit_sides(&self) -> Vec<Segment> {
        let dc = self.step();
        (0..=self.n)
            .map(|k| Segment::new(self.a + dc * k as f64, self.b + dc * k as f64))
            .collect()
    }

    /// Translation jump between the paired sides.
    pub fn jump(&self) -> Vec2 {
        self.a + self.b - self.c * 2.0
    }

    /// The two translation-identified edges (lower at `c`, upper at `a+b-c`),
    /// each spanning the full `n (d-c)` extent.
    pub fn translation_edges(&self) -> (Segment, Segment) {
        let dc = self.step();
        let lower = Segment::new(self.c, self.c + dc * self.n as f64);
        let upper = lower.translated(self.jump());
        (lower, upper)
    }
}

impl ChipFold {
    pub fn new(a: Vec2, b: Vec2, c: Vec2, d: Vec2, n: u32) -> Result<Self, SkeletonError> {
        validate_fold_frame(a, b, c, d, n)?;
        Ok(ChipFold { a, b, c, d, n })
    }

    /// Expands to the explicit slit-fold union: `n+1` sides parallel to
    /// `[a,b]` plus the `[c,d]`-parallel pieces at heights `c` and `a+b-c`.
    /// When the two height families coincide (`2c = a+b` up to the step
    /// lattice) the merged pieces are emitted once.
    pub fn slits(&self) -> Vec<SlitFold> {
        let dc = self.d - self.c;
        let mut out = Vec::new();
        for k in 0..=self.n {
            let off = dc * k as f64;
            out.push(SlitFold::new(self.a + off, self.b + off));
        }
        let upper_start = self.a + self.b - self.c;
        let merged = (upper_start - self.c).norm() < 1e-9 * (self.b - self.a).norm().max(dc.norm());
        for k in 0..self.n {
            let off = dc * k as f64;
            out.push(SlitFold::new(self.c + off, self.d + off));
            if !merged {
                out.push(SlitFold::new(upper_start + off, upper_start + dc + off));
            }
        }
        out
    }
}

fn validate_fold_frame(a: Vec2, b: Vec2, c: Vec2, d: Vec2, n: u32) -> Result<(), SkeletonError> {
    let ab = b - a;
    let cd = d - c;
    if n == 0 {
        return Err(SkeletonError::InvalidFold("n must be positive".into()));
    }
    if ab.cross(cd).abs() < EPS_GEOM * ab.norm() * cd.norm() {
        return Err(SkeletonError::InvalidFold("fold sides are parallel".into()));
    }
    // c on [a, (a+b)/2]: colinear with ab and within the lower half
    let rel = c - a;
    if rel.cross(ab).abs() > 1e-9 * ab.norm().max(1.0) {
        return Err(SkeletonError::InvalidFold("c must lie on segment [a,(a+b)/2]".into()));
    }
    let h = rel.dot(ab) / ab.norm_sq();
    if !(-1e-12..=0.5 + 1e-12).contains(&h) {
        return Err(SkeletonError::InvalidFold("c must lie on segment [a,(a+b)/2]".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fold {
    Slit(SlitFold),
    Pillow(PillowFold),
    Chip(ChipFold),
}

/// A lattice-periodic (or finite planar, when `lattice` is `None`) union of
/// folds defining a quadratic differential on a torus or on the plane.
#[derive(Debug, Clone)]
pub struct Skeleton {
    pub lattice: Option<Lattice>,
    pub folds: Vec<Fold>,
}

impl Skeleton {
    pub fn slit_folds(&self) -> Vec<SlitFold> {
        let mut out = Vec::new();
        for f in &self.folds {
            match f {
                Fold::Slit(s) => out.push(*s),
                Fold::Pillow(p) => out.extend(p.slit_sides().into_iter().map(|s| SlitFold { seg: s })),
                Fold::Chip(c) => out.extend(c.slits()),
            }
        }
        out
    }
}

/// Crossing map of a slit-fold: the new point is the reflection of the hit
/// through the fold center and the direction sign flips, so the trajectory
/// departs on the side it arrived from.
pub fn slit_cross(fold: &SlitFold, hit: Vec2, dir_sign: i8, theta: f64) -> Result<(Vec2, i8), SkeletonError> {
    let dir = Vec2::dir(theta);
    let seg_dir = fold.seg.direction();
    if dir.cross(seg_dir).abs() < 1e-10 {
        return Err(SkeletonError::TangentialHit);
    }
    Ok((fold.seg.center() * 2.0 - hit, -dir_sign))
}

/// Crossing map of a pillow translation edge: teleport by the edge-pairing
/// translation, direction sign unchanged. `on_lower` says which edge was hit.
pub fn pillow_edge_cross(fold: &PillowFold, hit: Vec2, dir_sign: i8, on_lower: bool) -> (Vec2, i8) {
    let j = fold.jump();
    if on_lower {
        (hit + j, dir_sign)
    } else {
        (hit - j, dir_sign)
    }
}

/// Converts a pillow-fold into the slit-folds whose outer direction-theta
/// foliation is Whitehead equivalent (up to finitely many leaves):
/// the minimal `n >= 1` with per-cell slope at most 1 is chosen, the fold is
/// subdivided into an n-pillow-fold, and the translation edges are pushed
/// through the slit-fold sides along theta. At the degenerate boundary
/// (slope exactly 1 per cell) both pushed families fall together into a
/// single slit-fold per cell.
///
/// When theta is parallel to the `[a,b]` sides the trivial two-slit-fold
/// output (the outer sides alone) is returned.
pub fn pillow_to_chip(fold: &PillowFold, theta: f64) -> Vec<SlitFold> {
    let full = fold.step() * fold.n as f64; // full extent along [c,d]
    let ab = fold.b - fold.a;
    let e = Vec2::dir(theta);
    // Decompose e = alpha * full + beta * ab.
    let det = full.cross(ab);
    let alpha = e.cross(ab) / det;
    let beta = full.cross(e) / det;
    if alpha.abs() < 1e-12 {
        // theta parallel to the slit-fold sides: just the two outer sides.
        return vec![
            SlitFold::new(fold.a, fold.b),
            SlitFold::new(fold.a + full, fold.b + full),
        ];
    }
    let slope = (beta / alpha).abs(); // leaf slope in fold-normalized coordinates
    let n = (slope - 1e-9).ceil().max(1.0) as u32;
    // Push height within a unit cell: h = slope_per_cell / 2 in [0, 1/2].
    let h = 0.5 * slope / n as f64;
    // Inset pillows (c != a) reduce to the corner-anchored case on the band
    // between the edges; c - a is parallel to ab by the fold invariant.
    let h_c = (fold.c - fold.a).dot(ab) / ab.norm_sq();
    let h_eff = h_c + h * (1.0 - 2.0 * h_c);
    let step = full * (1.0 / n as f64);
    let c_star = fold.a + ab * h_eff;
    let chip = ChipFold {
        a: fold.a,
        b: fold.b,
        c: c_star,
        d: c_star + step,
        n,
    };
    chip.slits()
}

/// Certificate of a railed deformation between two corresponding slit-folds:
/// the two connecting segments along direction-theta leaves (`None` when the
/// endpoints already coincide).
#[derive(Debug, Clone)]
pub struct RailedCertificate {
    pub connectors: Vec<(Option<Segment>, Option<Segment>)>,
}

/// Decides whether `skel_a` and `skel_b` are railed-equivalent in direction
/// theta: every corresponding slit-fold pair must have both endpoints joined
/// by direction-theta segments that cross no other fold segment in either
/// skeleton. The correspondence is by index over the expanded slit-fold
/// lists.
pub fn railed_equivalent(
    skel_a: &Skeleton,
    skel_b: &Skeleton,
    theta: f64,
) -> Result<(bool, RailedCertificate), SkeletonError> {
    let sa = skel_a.slit_folds();
    let sb = skel_b.slit_folds();
    if sa.len() != sb.len() {
        return Err(SkeletonError::CorrespondenceMissing(format!(
            "slit-fold counts differ: {} vs {}",
            sa.len(),
            sb.len()
        )));
    }
    let dir = Vec2::dir(theta);
    let mut connectors = Vec::new();
    for (fa, fb) in sa.iter().zip(sb.iter()) {
        let pairings = [
            (fa.seg.a, fb.seg.a, fa.seg.b, fb.seg.b),
            (fa.seg.a, fb.seg.b, fa.seg.b, fb.seg.a),
        ];
        let mut found = None;
        for (p1, q1, p2, q2) in pairings {
            if parallel_to(q1 - p1, dir) && parallel_to(q2 - p2, dir) {
                found = Some((connector(p1, q1), connector(p2, q2)));
                break;
            }
        }
        match found {
            Some(pair) => connectors.push(pair),
            None => return Ok((false, RailedCertificate { connectors })),
        }
    }
    // Connectors must not cross any other fold segment in either skeleton
    // (including nearby lattice translates in the periodic case).
    let mut blocked = false;
    'outer: for (idx, (c1, c2)) in connectors.iter().enumerate() {
        for skel in [skel_a, skel_b] {
            let translates = nearby_translates(skel, c1, c2);
            for (j, seg) in translates {
                if j == Some(idx) {
                    continue; // the deforming fold itself
                }
                for conn in [c1, c2].into_iter().flatten() {
                    if segments_cross(conn, &seg, 1e-9) {
                        blocked = true;
                        break 'outer;
                    }
                }
            }
        }
    }
    Ok((!blocked, RailedCertificate { connectors }))
}

fn parallel_to(v: Vec2, dir: Vec2) -> bool {
    v.norm() < 1e-9 || v.cross(dir).abs() < 1e-9 * v.norm()
}

fn connector(p: Vec2, q: Vec2) -> Option<Segment> {
    if (q - p).norm() < 1e-12 {
        None
    } else {
        Some(Segment::new(p, q))
    }
}

/// All fold segments of `skel` whose translates come near the connectors.
fn nearby_translates(skel: &Skeleton, c1: &Option<Segment>, c2: &Option<Segment>) -> Vec<(Option<usize>, Segment)> {
    let mut pts = Vec::new();
    for c in [c1, c2].into_iter().flatten() {
        pts.push(c.a);
        pts.push(c.b);
    }
    if pts.is_empty() {
        return Vec::new();
    }
    let center = pts.iter().fold(Vec2::ZERO, |s, &p| s + p) * (1.0 / pts.len() as f64);
    let radius = pts.iter().map(|&p| (p - center).norm()).fold(0.0, f64::max);
    let slits = skel.slit_folds();
    let mut out = Vec::new();
    match skel.lattice {
        None => {
            for (i, s) in slits.iter().enumerate() {
                out.push((Some(i), s.seg));
            }
        }
        Some(lat) => {
            let lat = lat.reduce();
            let reach = ((radius + 4.0 * lat.g2.norm()) / lat.g1.norm()).ceil() as i64 + 1;
            for (i, s) in slits.iter().enumerate() {
                for m in -reach..=reach {
                    for n in -reach..=reach {
                        let v = lat.point(m, n);
                        let seg = s.seg.translated(v);
                        let d = (seg.center() - center).norm();
                        if d <= radius + seg.half_length() + 1e-9 {
                            let tag = if m == 0 && n == 0 { Some(i) } else { None };
                            out.push((tag, seg));
                        }
                    }
                }
            }
        }
    }
    out
}

/// The theta-dependent Wollmilchsau slit-folds `S0, S+, S-` obtained from the
/// flat-lens representation of the `gamma_w` lenses on the branch
/// `theta in [0, pi/4]`; they railed-deform to the fixed Wollmilchsau
/// skeleton.
pub fn wollmilchsau_theta_folds(theta: f64) -> Skeleton {
    let (s, c) = theta.sin_cos();
    let t = theta.tan();
    let s0 = SlitFold::new(
        Vec2::new(-2.0 * s * s, 2.0 * s * c),
        Vec2::new(2.0 * s * s, -2.0 * s * c),
    );
    let sp = SlitFold::new(
        Vec2::new(1.0 + c * s, 1.0 + t - c * c),
        Vec2::new(1.0 - c * s, 1.0 + t + c * c),
    );
    let sm = SlitFold::new(-sp.seg.a, -sp.seg.b);
    Skeleton {
        lattice: Some(Lattice::new(Vec2::new(0.0, 4.0), Vec2::new(4.0, 2.0)).unwrap()),
        folds: vec![Fold::Slit(s0), Fold::Slit(sp), Fold::Slit(sm)],
    }
}

/// Built-in skeletons.
///
/// * `wollmilchsau` (alias `x3`): the fixed skeleton `>-2,2< u >0,2i< u >0,-2i<`
///   on `Z(0,4) + Z(4,2)`, the degree-4 pillowcase cover.
/// * `x2`: a two-slit-fold torus with mutually attached folds (each fold's
///   endpoint at the other's center), Whitehead equivalent to the degree-3
///   cover; its census is the degree-3 census with one zero/pole pair merged.
/// * `x4`: the degree-6 cover in brickwork form: three horizontal slit-folds
///   plus one pillow-fold per cell.
/// * `c6_3_1`: the same data read as the plane skeleton of the Z^2-cover of
///   the degree-6 surface (tiles with rectangular holes).
pub fn builtin_skeleton(name: &str) -> Result<Skeleton, SkeletonError> {
    match name {
        "wollmilchsau" | "x3" => Ok(Skeleton {
            lattice: Some(Lattice::new(Vec2::new(0.0, 4.0), Vec2::new(4.0, 2.0)).unwrap()),
            folds: vec![
                Fold::Slit(SlitFold::new(Vec2::new(-2.0, 0.0), Vec2::new(2.0, 0.0))),
                Fold::Slit(SlitFold::new(Vec2::new(0.0, 0.0), Vec2::new(0.0, 2.0))),
                Fold::Slit(SlitFold::new(Vec2::new(0.0, 0.0), Vec2::new(0.0, -2.0))),
            ],
        }),
        "x2" => Ok(Skeleton {
            lattice: Some(Lattice::new(Vec2::new(-1.0, 1.0), Vec2::new(4.0, 0.0)).unwrap()),
            folds: vec![
                // vertical fold with its lower endpoint at the horizontal's center
                Fold::Slit(SlitFold::new(Vec2::new(0.0, 0.0), Vec2::new(0.0, 2.0))),
                // horizontal fold whose endpoint (1,0) = (0,1) mod the lattice
                // sits at the vertical's center
                Fold::Slit(SlitFold::new(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0))),
            ],
        }),
        "x4" | "c6_3_1" => Ok(Skeleton {
            lattice: Some(Lattice::new(Vec2::new(-4.0, 2.0), Vec2::new(4.0, 2.0)).unwrap()),
            folds: vec![
                Fold::Slit(SlitFold::new(Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0))),
                Fold::Slit(SlitFold::new(Vec2::new(2.0, 0.0), Vec2::new(4.0, 0.0))),
                Fold::Slit(SlitFold::new(Vec2::new(4.0, 0.0), Vec2::new(6.0, 0.0))),
                Fold::Pillow(
                    PillowFold::new(
                        Vec2::new(6.0, -1.0),
                        Vec2::new(6.0, 1.0),
                        Vec2::new(6.0, -1.0),
                        Vec2::new(8.0, -1.0),
                        1,
                    )
                    .expect("builtin pillow"),
                ),
            ],
        }),
        other => Err(SkeletonError::UnknownName(other.to_string())),
    }
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

/// On-disk skeleton description:
/// `{"lattice": [[g1x,g1y],[g2x,g2y]] | null, "folds": [...]}` with fold
/// entries `{"type":"slit","a":[x,y],"b":[x,y]}`,
/// `{"type":"pillow","a":..,"b":..,"c":..,"d":..,"n":1}` or the same with
/// `"type":"chip"`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SkeletonJson {
    pub lattice: Option<[[f64; 2]; 2]>,
    pub folds: Vec<FoldJson>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum FoldJson {
    #[serde(rename = "slit")]
    Slit { a: [f64; 2], b: [f64; 2] },
    #[serde(rename = "pillow")]
    Pillow {
        a: [f64; 2],
        b: [f64; 2],
        c: [f64; 2],
        d: [f64; 2],
        n: u32,
    },
    #[serde(rename = "chip")]
    Chip {
        a: [f64; 2],
        b: [f64; 2],
        c: [f64; 2],
        d: [f64; 2],
        n: u32,
    },
}

fn v(p: [f64; 2]) -> Vec2 {
    Vec2::new(p[0], p[1])
}

impl SkeletonJson {
    pub fn build(&self) -> Result<Skeleton, SkeletonError> {
        let lattice = match self.lattice {
            None => None,
            Some([g1, g2]) => {
                if !(v(g1).is_finite() && v(g2).is_finite()) {
                    return Err(SkeletonError::InvalidFold("non-finite lattice".into()));
                }
                Some(
                    Lattice::new(v(g1), v(g2))
                        .map_err(|e| SkeletonError::InvalidFold(e.to_string()))?,
                )
            }
        };
        let mut folds = Vec::new();
        for f in &self.folds {
            folds.push(match *f {
                FoldJson::Slit { a, b } => {
                    let (a, b) = (v(a), v(b));
                    if !(a.is_finite() && b.is_finite()) || (b - a).norm() < EPS_GEOM {
                        return Err(SkeletonError::InvalidFold("bad slit".into()));
                    }
                    Fold::Slit(SlitFold::new(a, b))
                }
                FoldJson::Pillow { a, b, c, d, n } => {
                    let (a, b, c, d) = (v(a), v(b), v(c), v(d));
                    if ![a, b, c, d].iter().all(|p| p.is_finite()) || n > 1_000_000 {
                        return Err(SkeletonError::InvalidFold("bad pillow".into()));
                    }
                    Fold::Pillow(PillowFold::new(a, b, c, d, n)?)
                }
                FoldJson::Chip { a, b, c, d, n } => {
                    let (a, b, c, d) = (v(a), v(b), v(c), v(d));
                    if ![a, b, c, d].iter().all(|p| p.is_finite()) || n > 1_000_000 {
                        return Err(SkeletonError::InvalidFold("bad chip".into()));
                    }
                    Fold::Chip(ChipFold::new(a, b, c, d, n)?)
                }
            });
        }
        Ok(Skeleton { lattice, folds })
    }

    pub fn from_skeleton(s: &Skeleton) -> Self {
        SkeletonJson {
            lattice: s.lattice.map(|l| [[l.g1.x, l.g1.y], [l.g2.x, l.g2.y]]),
            folds: s
                .folds
                .iter()
                .map(|f| match f {
                    Fold::Slit(s) => FoldJson::Slit {
                        a: [s.seg.a.x, s.seg.a.y],
                        b: [s.seg.b.x, s.seg.b.y],
                    },
                    Fold::Pillow(p) => FoldJson::Pillow {
                        a: [p.a.x, p.a.y],
                        b: [p.b.x, p.b.y],
                        c: [p.c.x, p.c.y],
                        d: [p.d.x, p.d.y],
                        n: p.n,
                    },
                    Fold::Chip(c) => FoldJson::Chip {
                        a: [c.a.x, c.a.y],
                        b: [c.b.x, c.b.y],
                        c: [c.c.x, c.c.y],
                        d: [c.d.x, c.d.y],
                        n: c.n,
                    },
                })
                .collect(),
        }
    }
}

/// Parses and validates a skeleton from JSON bytes (the fuzzing entry point).
pub fn parse_skeleton_json(bytes: &[u8]) -> Result<Skeleton, String> {
    let j: SkeletonJson = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    j.build().map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn slit_cross_examples() {
        let fold = SlitFold::new(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0));
        // hit (0.3, 0) going up: continue from (-0.3, 0) with flipped sign
        let (p, s) = slit_cross(&fold, Vec2::new(0.3, 0.0), 1, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((p - Vec2::new(-0.3, 0.0)).norm() < 1e-12);
        assert_eq!(s, -1);
        // center hit is a fixed point of the fold map
        let (p, s) = slit_cross(&fold, Vec2::new(0.0, 0.0), 1, 1.0).unwrap();
        assert!(p.norm() < 1e-12);
        assert_eq!(s, -1);
        // Wollmilchsau vertical slit, horizontal hit at height 1.5
        let fold = SlitFold::new(Vec2::new(0.0, -2.0), Vec2::new(0.0, 2.0));
        let (p, s) = slit_cross(&fold, Vec2::new(0.0, 1.5), 1, 0.0).unwrap();
        assert!((p - Vec2::new(0.0, -1.5)).norm() < 1e-12);
        assert_eq!(s, -1);
        // tangential hit is singular
        assert!(matches!(
            slit_cross(&fold, Vec2::new(0.0, 1.0), 1, std::f64::consts::FRAC_PI_2),
            Err(SkeletonError::TangentialHit)
        ));
    }

    #[test]
    fn pillow_edge_examples() {
        let p = PillowFold::new(
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            1,
        )
        .unwrap();
        let (q, s) = pillow_edge_cross(&p, Vec2::new(0.4, 0.0), 1, true);
        assert!((q - Vec2::new(0.4, 1.0)).norm() < 1e-12);
        assert_eq!(s, 1);
        let (q, s) = pillow_edge_cross(&p, Vec2::new(0.7, 1.0), -1, false);
        assert!((q - Vec2::new(0.7, 0.0)).norm() < 1e-12);
        assert_eq!(s, -1);
    }

    #[test]
    fn pillow_to_chip_vertical_direction_is_trivial() {
        // theta parallel to the slit-fold sides: two vertical slit-folds.
        let p = unit_square_pillow();
        let slits = pillow_to_chip(&p, std::f64::consts::FRAC_PI_2);
        assert_eq!(slits.len(), 2);
        assert!((slits[0].seg.a - Vec2::new(0.0, 0.0)).norm() < 1e-12);
        assert!((slits[0].seg.b - Vec2::new(0.0, 1.0)).norm() < 1e-12);
        assert!((slits[1].seg.a - Vec2::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn pillow_to_chip_diagonal_merges() {
        // tan theta = 1 on the unit square: a single slit-fold through the center.
        let p = unit_square_pillow();
        let slits = pillow_to_chip(&p, std::f64::consts::FRAC_PI_4);
        // n = 1: two verticals plus one merged horizontal at mid-height
        assert_eq!(slits.len(), 3);
        let merged = &slits[2];
        assert!((merged.seg.center() - Vec2::new(0.5, 0.5)).norm() < 1e-12);
        assert!((merged.seg.a.y - 0.5).abs() < 1e-12 && (merged.seg.b.y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pillow_to_chip_steep_subdivides() {
        // tan theta = 3 on the unit square: minimal n is 3 (exactly at the
        // boundary, so the per-cell pair merges into one slit-fold each).
        let p = unit_square_pillow();
        let theta = 3.0f64.atan();
        let slits = pillow_to_chip(&p, theta);
        assert_eq!(slits.len(), 4 + 3);
        // subdividing verticals at x = 0, 1/3, 2/3, 1
        for (k, s) in slits[..4].iter().enumerate() {
            assert!((s.seg.a.x - k as f64 / 3.0).abs() < 1e-12);
        }
        // sub-critical: distinct pushed pairs
        let slits = pillow_to_chip(&p, 2.5f64.atan());
        assert_eq!(slits.len(), 4 + 6);
    }

    #[test]
    fn pillow_to_chip_output_inside_closure() {
        let p = unit_square_pillow();
        for &t in &[0.3f64, 0.7, 1.2, 1.9] {
            for s in pillow_to_chip(&p, t.atan()) {
                for q in [s.seg.a, s.seg.b] {
                    assert!((-1e-9..=1.0 + 1e-9).contains(&q.x), "{q:?}");
                    assert!((-1e-9..=1.0 + 1e-9).contains(&q.y), "{q:?}");
                }
            }
        }
    }

    #[test]
    fn railed_wollmilchsau_deformation() {
        let theta = std::f64::consts::PI / 8.0;
        let moving = wollmilchsau_theta_folds(theta);
        let fixed = builtin_skeleton("wollmilchsau").unwrap();
        let (ok, cert) = railed_equivalent(&moving, &fixed, theta).unwrap();
        assert!(ok, "certificate: {:?}", cert.connectors);
        // identical skeletons are railed-equivalent at any angle
        let (ok, _) = railed_equivalent(&fixed, &fixed, 0.73).unwrap();
        assert!(ok);
    }

    #[test]
    fn railed_blocked_by_crossing_fold() {
        // Two parallel slit-folds whose theta-connector crosses a third fold.
        let theta = 0.0;
        let a = Skeleton {
            lattice: None,
            folds: vec![
                Fold::Slit(SlitFold::new(Vec2::new(0.0, -1.0), Vec2::new(0.0, 1.0))),
                Fold::Slit(SlitFold::new(Vec2::new(0.0, 4.0), Vec2::new(1.0, 4.0))),
            ],
        };
        let b = Skeleton {
            lattice: None,
            folds: vec![
                Fold::Slit(SlitFold::new(Vec2::new(6.0, -1.0), Vec2::new(6.0, 1.0))),
                Fold::Slit(SlitFold::new(Vec2::new(0.0, 4.0), Vec2::new(1.0, 4.0))),
            ],
        };
        // blocker: a vertical fold between x=0 and x=6 crossing the horizontal rails
        let mut a_blocked = a.clone();
        a_blocked
            .folds
            .push(Fold::Slit(SlitFold::new(Vec2::new(3.0, -2.0), Vec2::new(3.0, 2.0))));
        let mut b_blocked = b.clone();
        b_blocked
            .folds
            .push(Fold::Slit(SlitFold::new(Vec2::new(3.0, -2.0), Vec2::new(3.0, 2.0))));
        let (ok, _) = railed_equivalent(&a, &b, theta).unwrap();
        assert!(ok);
        let (ok, _) = railed_equivalent(&a_blocked, &b_blocked, theta).unwrap();
        assert!(!ok);
    }

    #[test]
    fn builtin_names() {
        for name in ["wollmilchsau", "x2", "x4", "c6_3_1"] {
            assert!(builtin_skeleton(name).is_ok(), "{name}");
        }
        assert!(matches!(
            builtin_skeleton("nope"),
            Err(SkeletonError::UnknownName(_))
        ));
        let w = builtin_skeleton("wollmilchsau").unwrap();
        assert_eq!(w.slit_folds().len(), 3);
    }

    #[test]
    fn json_roundtrip() {
        let skel = builtin_skeleton("c6_3_1").unwrap();
        let js = SkeletonJson::from_skeleton(&skel);
        let text = serde_json::to_string(&js).unwrap();
        let back = parse_skeleton_json(text.as_bytes()).unwrap();
        assert_eq!(back.folds.len(), skel.folds.len());
    }

    fn unit_square_pillow() -> PillowFold {
        PillowFold::new(
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            1,
        )
        .unwrap()
    }

    proptest! {
        /// slit_cross is an involution and preserves the fold segment setwise.
        #[test]
        fn slit_cross_involution(u in -0.9..0.9f64, theta in 0.3..1.2f64) {
            let fold = SlitFold::new(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0));
            let hit = fold.seg.at_offset(u);
            let (p1, s1) = slit_cross(&fold, hit, 1, theta).unwrap();
            prop_assert!((p1 - fold.seg.at_offset(-u)).norm() < 1e-12);
            let (p2, s2) = slit_cross(&fold, p1, s1, theta).unwrap();
            prop_assert!((p2 - hit).norm() < 1e-12);
            prop_assert_eq!(s2, 1);
        }
    }
}
