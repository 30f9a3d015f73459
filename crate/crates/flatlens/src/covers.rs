//! Cyclic pillowcase covers X_d(w_h, w_v): genus and fiber formulas, the
//! polygonal gluing complex as an independent oracle, the torus-cover census,
//! and the SL2(Z) action on weights.
//!
//! A degree-d cover branched over three of the four pillowcase corners is
//! determined by the weight pair (w_h, w_v) in Z/d; it is connected iff
//! gcd(d, w_h, w_v) = 1 and branched over all three points iff neither
//! weight nor their difference vanishes mod d. The geometric realization
//! glues d copies of the cut-open pillowcase (a 2x1 rectangle): right
//! vertical edge of copy i to the left vertical edge of copy i + w_v by a
//! translation, the right half of the upper edge of copy i to the left half
//! of the upper edge of copy i + w_h by a half turn, and the right half of
//! the lower edge of copy i to its own left half by a half turn.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoverError {
    #[error("cover is disconnected: gcd(d, w_h, w_v) = {0} > 1")]
    Disconnected(u32),
    #[error("cover is not branched over all three points (w_h = {0}, w_v = {1} mod {2})")]
    NotBranchedOverThree(u32, u32, u32),
    #[error("weights must satisfy 1 <= w < d, got w_h = {0}, w_v = {1}, d = {2}")]
    WeightOutOfRange(u32, u32, u32),
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// The cover X_d(w_h, w_v) of the pillowcase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CyclicCover {
    pub degree: u32,
    pub w_h: u32,
    pub w_v: u32,
}

impl CyclicCover {
    pub fn new(degree: u32, w_h: u32, w_v: u32) -> Result<Self, CoverError> {
        if degree < 2 || w_h == 0 || w_v == 0 || w_h >= degree || w_v >= degree {
            return Err(CoverError::WeightOutOfRange(w_h, w_v, degree));
        }
        Ok(CyclicCover { degree, w_h, w_v })
    }

    pub fn is_connected(&self) -> bool {
        gcd(gcd(self.degree, self.w_h), self.w_v) == 1
    }

    /// Branched over all of p1, p2, p3: weights and their difference nonzero
    /// mod d. (With the convention gcd(0, d) = d an unbranched point would be
    /// silently classified; it is detected instead.)
    pub fn branched_over_three(&self) -> bool {
        self.w_h != self.w_v
    }

    fn check(&self) -> Result<(), CoverError> {
        if !self.is_connected() {
            return Err(CoverError::Disconnected(gcd(gcd(self.degree, self.w_h), self.w_v)));
        }
        if !self.branched_over_three() {
            return Err(CoverError::NotBranchedOverThree(self.w_h, self.w_v, self.degree));
        }
        Ok(())
    }

    /// Fiber cardinalities over (p1, p2, p3):
    /// `(gcd(w_h,d), gcd(|w_h-w_v|,d), gcd(w_v,d))`.
    pub fn fiber_counts(&self) -> (u32, u32, u32) {
        let d = self.degree;
        (
            gcd(self.w_h, d),
            gcd(self.w_h.abs_diff(self.w_v), d),
            gcd(self.w_v, d),
        )
    }

    /// Branching orders `o_i = d / fiber_i`.
    pub fn branching_orders(&self) -> (u32, u32, u32) {
        let (n1, n2, n3) = self.fiber_counts();
        (self.degree / n1, self.degree / n2, self.degree / n3)
    }

    /// Genus from the gcd formula:
    /// `g = 1 + (d - gcd(w_h,d) - gcd(w_v,d) - gcd(|w_h-w_v|,d)) / 2`.
    pub fn genus(&self) -> Result<u32, CoverError> {
        self.check()?;
        let (n1, n2, n3) = self.fiber_counts();
        let num = self.degree as i64 - n1 as i64 - n2 as i64 - n3 as i64;
        debug_assert!(num % 2 == 0);
        Ok((1 + num / 2) as u32)
    }

    /// Cone angles (in units of pi) of all branch-point preimages, the
    /// unbranched corner contributing `d` poles. Regular 2-pi points are
    /// dropped, matching [`crate::census::SingularityCensus`].
    pub fn cone_angles(&self) -> Vec<u32> {
        let (n1, n2, n3) = self.fiber_counts();
        let (o1, o2, o3) = self.branching_orders();
        let mut v = Vec::new();
        for (count, order) in [(n1, o1), (n2, o2), (n3, o3)] {
            for _ in 0..count {
                if order != 2 {
                    v.push(order);
                }
            }
        }
        for _ in 0..self.degree {
            v.push(1);
        }
        v.sort_unstable();
        v
    }
}

// ---------------------------------------------------------------------------
// Gluing-complex oracle
// ---------------------------------------------------------------------------

/// The polygonal complex of d glued rectangles: F = d faces, E = 3d edges
/// after pairing, and vertex classes traced through the identifications.
/// Everything here is combinatorial union-find, fully independent of the gcd
/// formulas.
#[derive(Debug)]
pub struct GluedComplex {
    pub degree: u32,
    /// Vertex classes; each entry is the total corner angle in units of pi/2.
    pub vertex_angle_quarters: Vec<u32>,
    /// Which pillowcase point each vertex class sits over (1..=4).
    pub vertex_over: Vec<u8>,
}

/// Vertex slots per rectangle: 4 corners and the two edge midpoints.
/// Corners contribute a quarter turn (pi/2), midpoints a half turn (pi).
#[derive(Clone, Copy, PartialEq)]
enum Slot {
    BottomLeft,
    BottomMid,
    BottomRight,
    TopLeft,
    TopMid,
    TopRight,
}

const SLOTS: [Slot; 6] = [
    Slot::BottomLeft,
    Slot::BottomMid,
    Slot::BottomRight,
    Slot::TopLeft,
    Slot::TopMid,
    Slot::TopRight,
];

fn find(uf: &mut Vec<usize>, mut x: usize) -> usize {
    while uf[x] != x {
        uf[x] = uf[uf[x]];
        x = uf[x];
    }
    x
}

pub fn build_complex(cover: &CyclicCover) -> GluedComplex {
    let d = cover.degree as usize;
    let idx = |i: usize, s: Slot| -> usize { i * 6 + SLOTS.iter().position(|&x| x == s).unwrap() };
    let mut uf: Vec<usize> = (0..6 * d).collect();
    let union = |uf: &mut Vec<usize>, a: usize, b: usize| {
        let (ra, rb) = (find(uf, a), find(uf, b));
        if ra != rb {
            uf[ra] = rb;
        }
    };

    for i in 0..d {
        let iv = (i + cover.w_v as usize) % d;
        let ih = (i + cover.w_h as usize) % d;
        // Right vertical edge of i ~ left vertical edge of i + w_v, by a
        // translation: endpoints map straight across.
        union(&mut uf, idx(i, Slot::BottomRight), idx(iv, Slot::BottomLeft));
        union(&mut uf, idx(i, Slot::TopRight), idx(iv, Slot::TopLeft));
        // Right half of the upper edge of i ~ left half of the upper edge of
        // i + w_h, by a half turn: shared midpoints meet, the outer endpoint
        // of the right half (the corner) goes to the outer endpoint of the
        // left half (the corner).
        union(&mut uf, idx(i, Slot::TopMid), idx(ih, Slot::TopMid));
        union(&mut uf, idx(i, Slot::TopRight), idx(ih, Slot::TopLeft));
        // Right half of the lower edge of i ~ its own left half, half turn
        // fixing the midpoint and joining the two bottom corners.
        union(&mut uf, idx(i, Slot::BottomRight), idx(i, Slot::BottomLeft));
    }

    let mut reps: Vec<usize> = Vec::new();
    let mut angle: Vec<u32> = Vec::new();
    let mut over: Vec<u8> = Vec::new();
    for i in 0..d {
        for s in SLOTS {
            let r = find(&mut uf, idx(i, s));
            let slot_quarters = match s {
                Slot::BottomMid | Slot::TopMid => 2,
                _ => 1,
            };
            // Top midpoints sit over p1, top corners over p2, bottom corners
            // over p3, bottom midpoints over the unbranched p4.
            let slot_over = match s {
                Slot::TopMid => 1,
                Slot::TopLeft | Slot::TopRight => 2,
                Slot::BottomLeft | Slot::BottomRight => 3,
                Slot::BottomMid => 4,
            };
            match reps.iter().position(|&x| x == r) {
                Some(k) => {
                    angle[k] += slot_quarters;
                    debug_assert_eq!(over[k], slot_over);
                }
                None => {
                    reps.push(r);
                    angle.push(slot_quarters);
                    over.push(slot_over);
                }
            }
        }
    }
    GluedComplex {
        degree: cover.degree,
        vertex_angle_quarters: angle,
        vertex_over: over,
    }
}

impl GluedComplex {
    /// Euler characteristic `V - E + F = V - 3d + d`.
    pub fn euler_char(&self) -> i64 {
        self.vertex_angle_quarters.len() as i64 - 2 * self.degree as i64
    }

    /// Cone angles in units of pi (total angle of each vertex class),
    /// regular 2-pi classes dropped.
    pub fn singularity_orders(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self
            .vertex_angle_quarters
            .iter()
            .map(|&q| {
                debug_assert!(q % 2 == 0, "angle must be a multiple of pi");
                q / 2
            })
            .filter(|&m| m != 2)
            .collect();
        v.sort_unstable();
        v
    }

    /// Fiber cardinality over each branched pillowcase point (p1, p2, p3),
    /// traced from vertex classes.
    pub fn fiber_counts(&self) -> (u32, u32, u32) {
        let count = |p: u8| self.vertex_over.iter().filter(|&&o| o == p).count() as u32;
        (count(1), count(2), count(3))
    }
}

// ---------------------------------------------------------------------------
// Census and classification
// ---------------------------------------------------------------------------

/// All connected, branched-over-three, genus-1 covers with degree <= d_max.
pub fn enumerate_torus_covers(d_max: u32) -> Vec<CyclicCover> {
    let mut out = Vec::new();
    for d in 2..=d_max {
        for w_h in 1..d {
            for w_v in 1..d {
                if w_h == w_v {
                    continue;
                }
                let c = CyclicCover { degree: d, w_h, w_v };
                if c.is_connected() && c.genus() == Ok(1) {
                    out.push(c);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParabolicGen {
    /// `P_h: (w_h, w_v) -> (w_v - w_h, w_v)`
    Ph,
    /// `P_v: (w_h, w_v) -> (w_h, w_h - w_v)`
    Pv,
}

/// One parabolic generator step of the SL2(Z) action on weights.
pub fn sl2z_step(cover: &CyclicCover, generator: ParabolicGen) -> CyclicCover {
    let d = cover.degree;
    let m = |x: i64| -> u32 { x.rem_euclid(d as i64) as u32 };
    match generator {
        ParabolicGen::Ph => CyclicCover {
            degree: d,
            w_h: m(cover.w_v as i64 - cover.w_h as i64),
            w_v: cover.w_v,
        },
        ParabolicGen::Pv => CyclicCover {
            degree: d,
            w_h: cover.w_h,
            w_v: m(cover.w_h as i64 - cover.w_v as i64),
        },
    }
}

/// Closure of a cover under both parabolic generators; at most six elements.
pub fn sl2z_orbit(cover: &CyclicCover) -> Vec<CyclicCover> {
    let mut orbit = vec![*cover];
    let mut frontier = vec![*cover];
    while let Some(c) = frontier.pop() {
        for g in [ParabolicGen::Ph, ParabolicGen::Pv] {
            let n = sl2z_step(&c, g);
            if !orbit.contains(&n) {
                orbit.push(n);
                frontier.push(n);
            }
        }
    }
    orbit.sort();
    orbit
}

/// Units of Z/d.
fn units(d: u32) -> Vec<u32> {
    (1..d).filter(|&a| gcd(a, d) == 1).collect()
}

/// Deck renaming by a unit `a` of Z/d: `(w_h, w_v) -> (a w_h, a w_v)`.
pub fn rename_decks(cover: &CyclicCover, a: u32) -> CyclicCover {
    let d = cover.degree;
    CyclicCover {
        degree: d,
        w_h: (cover.w_h * a) % d,
        w_v: (cover.w_v * a) % d,
    }
}

/// Canonical form under deck renaming: the lexicographically smallest
/// `(a w_h, a w_v)` over all units `a` of Z/d.
pub fn canonical_form(cover: &CyclicCover) -> CyclicCover {
    units(cover.degree)
        .into_iter()
        .map(|a| rename_decks(cover, a))
        .min_by_key(|c| (c.w_h, c.w_v))
        .unwrap()
}

/// The table normal form used for the printed census: among the deck
/// renamings with `w_v | d`, the lexicographically largest `(w_h, w_v)`.
/// This reproduces the classical degree-3/4/6 table rows.
pub fn table_form(cover: &CyclicCover) -> CyclicCover {
    let d = cover.degree;
    units(d)
        .into_iter()
        .map(|a| rename_decks(cover, a))
        .filter(|c| c.w_v != 0 && d % c.w_v == 0)
        .max_by_key(|c| (c.w_h, c.w_v))
        .unwrap_or_else(|| canonical_form(cover))
}

/// One row of the cover table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub cover: CyclicCover,
    pub fibers: (u32, u32, u32),
}

/// The census of genus-1 cyclic pillowcase covers branched over exactly
/// three points, up to deck renaming, for degrees up to `d_max`;
/// `d_max = 6` reproduces the classical ten-row table.
pub fn torus_cover_table(d_max: u32) -> Vec<TableRow> {
    let mut rows: Vec<CyclicCover> = Vec::new();
    for c in enumerate_torus_covers(d_max) {
        let t = table_form(&c);
        if !rows.contains(&t) {
            rows.push(t);
        }
    }
    rows.sort();
    rows.into_iter()
        .map(|cover| TableRow {
            fibers: cover.fiber_counts(),
            cover,
        })
        .collect()
}

/// Equivalence classes of the genus-1 census under the combined SL2(Z)
/// action and deck renaming.
pub fn classify_torus_covers(d_max: u32) -> Vec<Vec<CyclicCover>> {
    let all = enumerate_torus_covers(d_max);
    let mut assigned: Vec<bool> = vec![false; all.len()];
    let mut classes: Vec<Vec<CyclicCover>> = Vec::new();
    for i in 0..all.len() {
        if assigned[i] {
            continue;
        }
        let mut members = vec![all[i]];
        let mut frontier = vec![all[i]];
        while let Some(c) = frontier.pop() {
            let mut nexts: Vec<CyclicCover> = vec![
                sl2z_step(&c, ParabolicGen::Ph),
                sl2z_step(&c, ParabolicGen::Pv),
            ];
            for a in units(c.degree) {
                nexts.push(rename_decks(&c, a));
            }
            for n in nexts {
                // parabolic steps can momentarily leave the branched set
                if n.w_h == 0 || n.w_v == 0 {
                    continue;
                }
                if !members.contains(&n) {
                    members.push(n);
                    frontier.push(n);
                }
            }
        }
        for (j, c) in all.iter().enumerate() {
            if members.contains(c) {
                assigned[j] = true;
            }
        }
        classes.push(members);
    }
    classes
}
