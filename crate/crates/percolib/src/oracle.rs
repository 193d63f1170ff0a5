//! Ground truth at small scale: exact event probabilities by enumeration of
//! all 2^|E| configurations, exact disjoint-occurrence probabilities with BK
//! checks, entrywise two-point matrix inequalities, and ghost-field
//! inequality checks with the ghosts integrated out analytically.
//!
//! Probabilities at rational p are exact integer fractions: a configuration
//! with c open edges has weight num^c (den-num)^{|E|-c} / den^|E|, and all
//! comparisons in the inequality checkers are done on integer numerators.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{Graph, NO_DISTANCE};

/// Hard cap for plain event enumeration.
pub const EXACT_ENUM_CAP: u32 = 22;
/// Cap for disjoint-occurrence and entrywise matrix-product checks.
pub const PRODUCT_CAP: u32 = 18;
/// Cap for the ghost-field inequality checks.
pub const INVERSE_BK_CAP: u32 = 14;

// ---------------------------------------------------------------------------
// Rational edge probabilities
// ---------------------------------------------------------------------------

/// p = num/den in [0,1], kept reduced so denominator powers stay small.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rational {
    num: u64,
    den: u64,
}

impl Rational {
    pub fn new(num: u64, den: u64) -> Result<Rational> {
        if den == 0 || num > den {
            return Err(Error::InvalidParameter(format!(
                "rational {num}/{den} is not a probability"
            )));
        }
        let g = gcd(num.max(1), den);
        Ok(Rational {
            num: num / g,
            den: den / g,
        })
    }

    /// Parse a decimal such as "0.25" into the exact fraction 1/4.
    pub fn from_decimal_str(s: &str) -> Result<Rational> {
        let bad = || Error::InvalidParameter(format!("cannot parse probability {s:?}"));
        let (int_part, frac_part) = match s.split_once('.') {
            Some((a, b)) => (a, b),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        let int_val: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| bad())?
        };
        if frac_part.len() > 9 {
            return Err(Error::InvalidParameter(format!(
                "probability {s:?} has more than 9 decimal places"
            )));
        }
        let mut den = 1u64;
        let mut num = 0u64;
        for ch in frac_part.chars() {
            let d = ch.to_digit(10).ok_or_else(bad)?;
            num = num * 10 + d as u64;
            den *= 10;
        }
        Rational::new(int_val * den + num, den)
    }

    pub fn numerator(&self) -> u64 {
        self.num
    }

    pub fn denominator(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn complement(&self) -> Rational {
        Rational {
            num: self.den - self.num,
            den: self.den,
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Configuration weights as integer numerators over den^|E|.
struct WeightTable {
    /// by_open[c] = num^c (den-num)^{E-c}.
    by_open: Vec<u128>,
    den_pow: u128,
    as_f64: Vec<f64>,
}

fn weight_table(edge_count: u32, p: &Rational) -> Result<WeightTable> {
    let e = edge_count as usize;
    let mut den_pow: u128 = 1;
    for _ in 0..e {
        den_pow = den_pow
            .checked_mul(p.den as u128)
            .ok_or_else(|| Error::CapExceeded(format!("den^{e} overflows at p = {}/{}", p.num, p.den)))?;
    }
    let mut pn = vec![1u128; e + 1];
    let mut qn = vec![1u128; e + 1];
    for i in 1..=e {
        pn[i] = pn[i - 1] * p.num as u128;
        qn[i] = qn[i - 1] * (p.den - p.num) as u128;
    }
    let by_open: Vec<u128> = (0..=e).map(|c| pn[c] * qn[e - c]).collect();
    let as_f64 = by_open.iter().map(|&w| w as f64 / den_pow as f64).collect();
    Ok(WeightTable {
        by_open,
        den_pow,
        as_f64,
    })
}

fn check_cap(graph: &Graph, cap: u32, what: &str) -> Result<()> {
    if graph.edge_count() > cap {
        return Err(Error::CapExceeded(format!(
            "{what} is capped at {cap} edges; graph has {}",
            graph.edge_count()
        )));
    }
    Ok(())
}

/// Guard for routes that multiply two probability numerators: den^E must fit
/// in 61 bits so products and short sums stay inside i128.
fn check_product_range(edge_count: u32, p: &Rational) -> Result<()> {
    let bits = libm::log2(p.den as f64) * edge_count as f64;
    if bits > 61.0 {
        return Err(Error::CapExceeded(format!(
            "denominator {}^{edge_count} too large for exact product checks",
            p.den
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Events
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RadiusMetric {
    Intrinsic,
    Extrinsic,
}

/// Events evaluable on a configuration. All variants are increasing.
/// `GhostConnection` evaluates to the conditional probability
/// 1 - e^{-h|K_v|} with the ghost field integrated out.
#[derive(Clone, Debug)]
pub enum EventSpec {
    Connection { u: u32, v: u32 },
    VolumeAtLeast { v: u32, n: u32 },
    RadiusAtLeast { v: u32, n: u32, metric: RadiusMetric },
    GhostConnection { v: u32, h: f64 },
    /// Clusters of the listed vertices are pairwise distinct and the i-th
    /// has volume >= thresholds[i].
    DisjointVolumes { vertices: Vec<u32>, thresholds: Vec<u32> },
    /// Some vertex of `a` connects to some vertex of `b`.
    SetConnection { a: Vec<u32>, b: Vec<u32> },
}

impl EventSpec {
    pub fn is_boolean(&self) -> bool {
        !matches!(self, EventSpec::GhostConnection { .. })
    }
}

/// Reusable per-mask scratch: union-find arrays and a BFS queue.
struct MaskScratch {
    parent: Vec<u32>,
    size: Vec<u32>,
    dist: Vec<u32>,
    queue: VecDeque<u32>,
}

impl MaskScratch {
    fn new(n: u32) -> Self {
        MaskScratch {
            parent: vec![0; n as usize],
            size: vec![0; n as usize],
            dist: vec![0; n as usize],
            queue: VecDeque::new(),
        }
    }

    fn load(&mut self, graph: &Graph, mask: u32) {
        let n = graph.vertex_count();
        for v in 0..n {
            self.parent[v as usize] = v;
            self.size[v as usize] = 1;
        }
        for (e, &(u, v)) in graph.edges().iter().enumerate() {
            if mask >> e & 1 == 1 {
                self.union(u, v);
            }
        }
    }

    fn find(&mut self, v: u32) -> u32 {
        let mut root = v;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = v;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: u32, b: u32) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return;
        }
        let (big, small) = if self.size[ra as usize] >= self.size[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
    }

    fn volume(&mut self, v: u32) -> u32 {
        let r = self.find(v);
        self.size[r as usize]
    }

    /// BFS depths from v over the open edges of `mask`.
    fn intrinsic_from(&mut self, graph: &Graph, mask: u32, v: u32) {
        for d in self.dist.iter_mut() {
            *d = NO_DISTANCE;
        }
        self.queue.clear();
        self.dist[v as usize] = 0;
        self.queue.push_back(v);
        while let Some(w) = self.queue.pop_front() {
            let dw = self.dist[w as usize];
            for (x, e) in graph.neighbors(w) {
                if mask >> e & 1 == 1 && self.dist[x as usize] == NO_DISTANCE {
                    self.dist[x as usize] = dw + 1;
                    self.queue.push_back(x);
                }
            }
        }
    }
}

fn validate_event(graph: &Graph, event: &EventSpec) -> Result<()> {
    let check = |v: u32| -> Result<()> {
        if v >= graph.vertex_count() {
            Err(Error::InvalidParameter(format!("event vertex {v} out of range")))
        } else {
            Ok(())
        }
    };
    match event {
        EventSpec::Connection { u, v } => {
            check(*u)?;
            check(*v)
        }
        EventSpec::VolumeAtLeast { v, .. } => check(*v),
        EventSpec::RadiusAtLeast { v, .. } => check(*v),
        EventSpec::GhostConnection { v, h } => {
            if *h <= 0.0 {
                return Err(Error::InvalidParameter(format!("ghost intensity h = {h} must be > 0")));
            }
            check(*v)
        }
        EventSpec::DisjointVolumes { vertices, thresholds } => {
            if vertices.len() != thresholds.len() || vertices.is_empty() {
                return Err(Error::InvalidParameter(
                    "DisjointVolumes needs matching, nonempty vertex/threshold lists".into(),
                ));
            }
            for &v in vertices {
                check(v)?;
            }
            Ok(())
        }
        EventSpec::SetConnection { a, b } => {
            if a.is_empty() || b.is_empty() {
                return Err(Error::InvalidParameter("SetConnection needs nonempty sets".into()));
            }
            for &v in a.iter().chain(b.iter()) {
                check(v)?;
            }
            Ok(())
        }
    }
}

/// Evaluate an event on one configuration; boolean events yield 0/1 and
/// ghost events their conditional probability. `ambient` holds distances
/// from the event's base vertex when the extrinsic radius is involved.
fn eval_event(
    graph: &Graph,
    mask: u32,
    event: &EventSpec,
    scratch: &mut MaskScratch,
    ambient: Option<&[u32]>,
) -> f64 {
    match event {
        EventSpec::Connection { u, v } => {
            scratch.load(graph, mask);
            (scratch.find(*u) == scratch.find(*v)) as u32 as f64
        }
        EventSpec::VolumeAtLeast { v, n } => {
            scratch.load(graph, mask);
            (scratch.volume(*v) >= *n) as u32 as f64
        }
        EventSpec::RadiusAtLeast { v, n, metric } => {
            scratch.intrinsic_from(graph, mask, *v);
            let hit = match metric {
                RadiusMetric::Intrinsic => scratch
                    .dist
                    .iter()
                    .any(|&d| d != NO_DISTANCE && d >= *n),
                RadiusMetric::Extrinsic => {
                    let amb = ambient.expect("extrinsic radius needs ambient distances");
                    scratch
                        .dist
                        .iter()
                        .zip(amb.iter())
                        .any(|(&d, &a)| d != NO_DISTANCE && a >= *n)
                }
            };
            hit as u32 as f64
        }
        EventSpec::GhostConnection { v, h } => {
            scratch.load(graph, mask);
            1.0 - libm::exp(-h * scratch.volume(*v) as f64)
        }
        EventSpec::DisjointVolumes { vertices, thresholds } => {
            scratch.load(graph, mask);
            for i in 0..vertices.len() {
                if scratch.volume(vertices[i]) < thresholds[i] {
                    return 0.0;
                }
                for j in 0..i {
                    if scratch.find(vertices[i]) == scratch.find(vertices[j]) {
                        return 0.0;
                    }
                }
            }
            1.0
        }
        EventSpec::SetConnection { a, b } => {
            scratch.load(graph, mask);
            for &x in a {
                for &y in b {
                    if scratch.find(x) == scratch.find(y) {
                        return 1.0;
                    }
                }
            }
            0.0
        }
    }
}

fn ambient_for_event(graph: &Graph, event: &EventSpec) -> Option<Vec<u32>> {
    match event {
        EventSpec::RadiusAtLeast {
            v,
            metric: RadiusMetric::Extrinsic,
            ..
        } => Some(graph.distances_from(*v)),
        _ => None,
    }
}

/// Exact probability of `event` at rational p: the sum over all 2^|E|
/// configurations of p^{#open}(1-p)^{#closed} times the event value.
pub fn exact_event_prob(graph: &Graph, event: &EventSpec, p: &Rational) -> Result<f64> {
    check_cap(graph, EXACT_ENUM_CAP, "exact_event_prob")?;
    validate_event(graph, event)?;
    let e = graph.edge_count();
    let wt = weight_table(e, p)?;
    let mut scratch = MaskScratch::new(graph.vertex_count());
    let ambient = ambient_for_event(graph, event);
    if event.is_boolean() {
        let mut acc: u128 = 0;
        for mask in 0..1u64 << e {
            let mask = mask as u32;
            if eval_event(graph, mask, event, &mut scratch, ambient.as_deref()) == 1.0 {
                acc += wt.by_open[mask.count_ones() as usize];
            }
        }
        Ok(acc as f64 / wt.den_pow as f64)
    } else {
        let mut acc = 0.0f64;
        for mask in 0..1u64 << e {
            let mask = mask as u32;
            let val = eval_event(graph, mask, event, &mut scratch, ambient.as_deref());
            if val > 0.0 {
                acc += wt.as_f64[mask.count_ones() as usize] * val;
            }
        }
        Ok(acc)
    }
}

/// Reliability-polynomial coefficients of a boolean event: counts[c] is the
/// number of configurations with c open edges on which the event holds, so
/// P(p) = sum_c counts[c] p^c (1-p)^{|E|-c}.
pub fn exact_event_poly(graph: &Graph, event: &EventSpec) -> Result<Vec<u64>> {
    check_cap(graph, EXACT_ENUM_CAP, "exact_event_poly")?;
    validate_event(graph, event)?;
    if !event.is_boolean() {
        return Err(Error::InvalidParameter(
            "reliability polynomial requires a boolean event".into(),
        ));
    }
    let e = graph.edge_count();
    let mut counts = vec![0u64; e as usize + 1];
    let mut scratch = MaskScratch::new(graph.vertex_count());
    let ambient = ambient_for_event(graph, event);
    for mask in 0..1u64 << e {
        let mask = mask as u32;
        if eval_event(graph, mask, event, &mut scratch, ambient.as_deref()) == 1.0 {
            counts[mask.count_ones() as usize] += 1;
        }
    }
    Ok(counts)
}

pub fn eval_reliability_poly(counts: &[u64], edge_count: u32, p: f64) -> f64 {
    let e = edge_count as usize;
    let mut acc = 0.0;
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            acc += n as f64 * libm::pow(p, c as f64) * libm::pow(1.0 - p, (e - c) as f64);
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// Exact matrices
// ---------------------------------------------------------------------------

/// Symmetric matrix of exact probability numerators over den^|E|.
#[derive(Clone, Debug)]
pub struct ExactMatrix {
    pub n: usize,
    pub den_pow: u128,
    num: Vec<u128>,
}

impl ExactMatrix {
    fn zeros(n: usize, den_pow: u128) -> Self {
        ExactMatrix {
            n,
            den_pow,
            num: vec![0; n * n],
        }
    }

    #[inline]
    pub fn num(&self, u: usize, v: usize) -> u128 {
        self.num[u * self.n + v]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        let d = self.den_pow as f64;
        self.num.iter().map(|&x| x as f64 / d).collect()
    }

    pub fn value(&self, u: usize, v: usize) -> f64 {
        self.num(u, v) as f64 / self.den_pow as f64
    }
}

/// Exact two-point matrix T_p(u,v) = P(u <-> v), all pairs in one sweep.
pub fn exact_two_point(graph: &Graph, p: &Rational) -> Result<ExactMatrix> {
    check_cap(graph, EXACT_ENUM_CAP, "exact_two_point")?;
    let e = graph.edge_count();
    let n = graph.vertex_count() as usize;
    let wt = weight_table(e, p)?;
    let mut m = ExactMatrix::zeros(n, wt.den_pow);
    let mut scratch = MaskScratch::new(graph.vertex_count());
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); n];
    for mask in 0..1u64 << e {
        let mask = mask as u32;
        let w = wt.by_open[mask.count_ones() as usize];
        scratch.load(graph, mask);
        for g in members.iter_mut() {
            g.clear();
        }
        for v in 0..n as u32 {
            let r = scratch.find(v);
            members[r as usize].push(v);
        }
        for group in &members {
            for &a in group {
                for &b in group {
                    m.num[a as usize * n + b as usize] += w;
                }
            }
        }
    }
    Ok(m)
}

/// Exact intrinsic-distance tables: bucket[d] is the matrix of
/// P(d_int(u,v) = d) numerators for finite d = 0..n-1.
pub struct IntrinsicTables {
    pub n: usize,
    pub den_pow: u128,
    buckets: Vec<Vec<u128>>,
}

impl IntrinsicTables {
    fn bucket_num(&self, d: usize, u: usize, v: usize) -> u128 {
        self.buckets[d][u * self.n + v]
    }

    /// B^int_n(u,v) = P(d_int <= n). n may exceed the largest distance.
    pub fn ball_num(&self, n_cap: i64, u: usize, v: usize) -> u128 {
        if n_cap < 0 {
            return 0;
        }
        let hi = (n_cap as usize).min(self.buckets.len() - 1);
        (0..=hi).map(|d| self.bucket_num(d, u, v)).sum()
    }

    /// S^int_n(u,v) = P(d_int = n).
    pub fn sphere_num(&self, n: usize, u: usize, v: usize) -> u128 {
        if n >= self.buckets.len() {
            0
        } else {
            self.bucket_num(n, u, v)
        }
    }

    /// A^int_{n,m}(u,v) = P(n <= d_int <= m).
    pub fn annulus_num(&self, n: usize, m: usize, u: usize, v: usize) -> u128 {
        let hi = m.min(self.buckets.len() - 1);
        if n > hi {
            return 0;
        }
        (n..=hi).map(|d| self.bucket_num(d, u, v)).sum()
    }
}

pub fn exact_intrinsic_tables(graph: &Graph, p: &Rational) -> Result<IntrinsicTables> {
    check_cap(graph, PRODUCT_CAP, "exact_intrinsic_tables")?;
    let e = graph.edge_count();
    let n = graph.vertex_count() as usize;
    let wt = weight_table(e, p)?;
    let max_d = n; // finite intrinsic distances are < n vertices
    let mut buckets = vec![vec![0u128; n * n]; max_d];
    let mut scratch = MaskScratch::new(graph.vertex_count());
    for mask in 0..1u64 << e {
        let mask = mask as u32;
        let w = wt.by_open[mask.count_ones() as usize];
        for u in 0..n as u32 {
            scratch.intrinsic_from(graph, mask, u);
            for v in 0..n {
                let d = scratch.dist[v];
                if d != NO_DISTANCE {
                    buckets[d as usize][u as usize * n + v] += w;
                }
            }
        }
    }
    Ok(IntrinsicTables {
        n,
        den_pow: wt.den_pow,
        buckets,
    })
}

/// Margins for the entrywise inequalities C_{p,n+m} ≼ C_{p,m} S_{p,n}
/// (extrinsic; sphere/complement masks of T) and A^int_{p,n,n+m} ≼
/// B^int_{p,m} S^int_{p,n}. Slacks are exact integer comparisons reported as
/// normalized f64; a negative slack is a counterexample.
#[derive(Clone, Debug)]
pub struct EntrywiseReport {
    pub n: u32,
    pub m: u32,
    pub sc_min_slack: f64,
    pub sc_exact_nonneg: bool,
    pub intrinsic_min_slack: f64,
    pub intrinsic_exact_nonneg: bool,
}

pub fn verify_entrywise_inequalities(
    graph: &Graph,
    p: &Rational,
    n: u32,
    m: u32,
) -> Result<EntrywiseReport> {
    Ok(verify_entrywise_batch(graph, p, &[(n, m)])?.remove(0))
}

/// Batched form: the exact two-point matrix and intrinsic tables are built
/// once and reused for every (n, m) pair.
pub fn verify_entrywise_batch(
    graph: &Graph,
    p: &Rational,
    pairs: &[(u32, u32)],
) -> Result<Vec<EntrywiseReport>> {
    check_cap(graph, PRODUCT_CAP, "verify_entrywise_inequalities")?;
    check_product_range(graph.edge_count(), p)?;
    let nv = graph.vertex_count() as usize;
    let t = exact_two_point(graph, p)?;
    let tables = exact_intrinsic_tables(graph, p)?;
    let dist: Vec<Vec<u32>> = (0..nv as u32).map(|v| graph.distances_from(v)).collect();
    let den = t.den_pow as i128;
    let mut out = Vec::new();
    for &(n, m) in pairs {
        out.push(entrywise_single(graph, &t, &tables, &dist, den, n, m));
    }
    Ok(out)
}

fn entrywise_single(
    graph: &Graph,
    t: &ExactMatrix,
    tables: &IntrinsicTables,
    dist: &[Vec<u32>],
    den: i128,
    n: u32,
    m: u32,
) -> EntrywiseReport {
    let nv = graph.vertex_count() as usize;

    // Extrinsic: C_r(u,v) = T(u,v) 1(d >= r); S_r with equality.
    let c_num = |r: u32, u: usize, v: usize| -> u128 {
        if dist[u][v] >= r {
            t.num(u, v)
        } else {
            0
        }
    };
    let s_num = |r: u32, u: usize, v: usize| -> u128 {
        if dist[u][v] == r {
            t.num(u, v)
        } else {
            0
        }
    };
    let mut sc_min: i128 = i128::MAX;
    for u in 0..nv {
        for v in 0..nv {
            let lhs = c_num(n + m, u, v) as i128 * den;
            let mut rhs: i128 = 0;
            for w in 0..nv {
                rhs += c_num(m, u, w) as i128 * s_num(n, w, v) as i128;
            }
            sc_min = sc_min.min(rhs - lhs);
        }
    }

    let mut int_min: i128 = i128::MAX;
    let (nn, mm) = (n as usize, m as usize);
    for u in 0..nv {
        for v in 0..nv {
            let lhs = tables.annulus_num(nn, nn + mm, u, v) as i128 * den;
            let mut rhs: i128 = 0;
            for w in 0..nv {
                rhs += tables.ball_num(mm as i64, u, w) as i128 * tables.sphere_num(nn, w, v) as i128;
            }
            int_min = int_min.min(rhs - lhs);
        }
    }

    let norm = (t.den_pow as f64) * (t.den_pow as f64);
    EntrywiseReport {
        n,
        m,
        sc_min_slack: sc_min as f64 / norm,
        sc_exact_nonneg: sc_min >= 0,
        intrinsic_min_slack: int_min as f64 / norm,
        intrinsic_exact_nonneg: int_min >= 0,
    }
}

// ---------------------------------------------------------------------------
// Disjoint occurrence and BK
// ---------------------------------------------------------------------------

/// Exact P(A ∘ B) for increasing events. Connection pairs are decided by
/// unit-capacity max flow when they share endpoints and by minimal-witness
/// path enumeration otherwise; generic increasing pairs fall back to the
/// witness-subset search over open-edge partitions (|E| <= 14).
pub fn disjoint_occurrence_prob(
    graph: &Graph,
    a: &EventSpec,
    b: &EventSpec,
    p: &Rational,
) -> Result<f64> {
    let num = disjoint_occurrence_numerator(graph, a, b, p)?;
    let den = weight_table(graph.edge_count(), p)?.den_pow;
    Ok(num as f64 / den as f64)
}

fn disjoint_occurrence_numerator(
    graph: &Graph,
    a: &EventSpec,
    b: &EventSpec,
    p: &Rational,
) -> Result<u128> {
    check_cap(graph, PRODUCT_CAP, "disjoint_occurrence_prob")?;
    validate_event(graph, a)?;
    validate_event(graph, b)?;
    if !a.is_boolean() || !b.is_boolean() {
        return Err(Error::InvalidParameter(
            "disjoint occurrence requires boolean increasing events".into(),
        ));
    }
    let connection_pair = matches!(
        (a, b),
        (EventSpec::Connection { .. }, EventSpec::Connection { .. })
    );
    if !connection_pair {
        check_cap(graph, INVERSE_BK_CAP, "generic disjoint occurrence (witness-subset search)")?;
    }
    let e = graph.edge_count();
    let wt = weight_table(e, p)?;
    let mut scratch = MaskScratch::new(graph.vertex_count());
    let amb_a = ambient_for_event(graph, a);
    let amb_b = ambient_for_event(graph, b);
    let mut acc: u128 = 0;
    for mask in 0..1u64 << e {
        let mask = mask as u32;
        // Both events must hold outright.
        if eval_event(graph, mask, a, &mut scratch, amb_a.as_deref()) != 1.0 {
            continue;
        }
        if eval_event(graph, mask, b, &mut scratch, amb_b.as_deref()) != 1.0 {
            continue;
        }
        let holds = if let (EventSpec::Connection { u: a1, v: a2 }, EventSpec::Connection { u: b1, v: b2 }) =
            (a, b)
        {
            circ_connection_pair(graph, mask, (*a1, *a2), (*b1, *b2), &mut scratch)
        } else {
            circ_generic(graph, mask, a, b, &mut scratch, amb_a.as_deref(), amb_b.as_deref())
        };
        if holds {
            acc += wt.by_open[mask.count_ones() as usize];
        }
    }
    Ok(acc)
}

#[derive(Clone, Debug)]
pub struct BkReport {
    pub p_a: f64,
    pub p_b: f64,
    pub p_circ: f64,
    /// P(A)P(B) - P(A∘B); the BK inequality demands >= 0.
    pub slack: f64,
    /// Sign of the slack decided on integer numerators.
    pub exact_nonneg: bool,
    /// P(A∘B) <= min(P(A), P(B)), also decided exactly.
    pub exact_min_bound: bool,
}

/// BK check: P(A ∘ B) <= P(A) P(B), with the comparison done on exact
/// integer numerators over den^(2|E|).
pub fn verify_bk(graph: &Graph, a: &EventSpec, b: &EventSpec, p: &Rational) -> Result<BkReport> {
    check_product_range(graph.edge_count(), p)?;
    if !a.is_boolean() || !b.is_boolean() {
        return Err(Error::InvalidParameter("BK check requires boolean events".into()));
    }
    let num_a = exact_event_numerator(graph, a, p)?;
    let num_b = exact_event_numerator(graph, b, p)?;
    let num_circ = disjoint_occurrence_numerator(graph, a, b, p)?;
    let den = weight_table(graph.edge_count(), p)?.den_pow;
    let slack_int = num_a as i128 * num_b as i128 - num_circ as i128 * den as i128;
    let denf = den as f64;
    Ok(BkReport {
        p_a: num_a as f64 / denf,
        p_b: num_b as f64 / denf,
        p_circ: num_circ as f64 / denf,
        slack: slack_int as f64 / (denf * denf),
        exact_nonneg: slack_int >= 0,
        exact_min_bound: num_circ <= num_a.min(num_b),
    })
}

fn exact_event_numerator(graph: &Graph, event: &EventSpec, p: &Rational) -> Result<u128> {
    check_cap(graph, EXACT_ENUM_CAP, "exact_event_prob")?;
    validate_event(graph, event)?;
    let e = graph.edge_count();
    let wt = weight_table(e, p)?;
    let mut scratch = MaskScratch::new(graph.vertex_count());
    let ambient = ambient_for_event(graph, event);
    let mut acc: u128 = 0;
    for mask in 0..1u64 << e {
        let mask = mask as u32;
        if eval_event(graph, mask, event, &mut scratch, ambient.as_deref()) == 1.0 {
            acc += wt.by_open[mask.count_ones() as usize];
        }
    }
    Ok(acc)
}

/// Decide {a1<->a2} ∘ {b1<->b2} on one configuration.
fn circ_connection_pair(
    graph: &Graph,
    mask: u32,
    (a1, a2): (u32, u32),
    (b1, b2): (u32, u32),
    scratch: &mut MaskScratch,
) -> bool {
    // Trivial events have the empty witness.
    if a1 == a2 || b1 == b2 {
        return true;
    }
    let same_pair = (a1 == b1 && a2 == b2) || (a1 == b2 && a2 == b1);
    if same_pair {
        return max_flow_at_least(graph, mask, a1, &[a2, a2], 2);
    }
    // One shared endpoint: two edge-disjoint paths from it to the free ends.
    let shared = [(a1, a2, b1, b2), (a1, a2, b2, b1), (a2, a1, b1, b2), (a2, a1, b2, b1)]
        .into_iter()
        .find(|&(s, _, t, _)| s == t);
    if let Some((s, a_free, _, b_free)) = shared {
        return max_flow_at_least(graph, mask, s, &[a_free, b_free], 2);
    }
    // Disjoint endpoint pairs: enumerate minimal witnesses (simple paths)
    // for A and test B in the leftover edges.
    let mut found = false;
    let mut on_path = vec![false; graph.vertex_count() as usize];
    let mut path_edges: u32 = 0;
    enumerate_paths(
        graph,
        mask,
        a1,
        a2,
        &mut on_path,
        &mut path_edges,
        &mut |used: u32| {
            if !found && connected_in_mask(graph, mask & !used, b1, b2, scratch) {
                found = true;
            }
            found // stop early once witnessed
        },
    );
    found
}

/// DFS over simple paths from `cur` to `target` in the open graph; calls
/// `visit(path_edge_mask)` at each completed path. `visit` returning true
/// stops the enumeration.
fn enumerate_paths(
    graph: &Graph,
    mask: u32,
    cur: u32,
    target: u32,
    on_path: &mut Vec<bool>,
    path_edges: &mut u32,
    visit: &mut impl FnMut(u32) -> bool,
) -> bool {
    if cur == target {
        return visit(*path_edges);
    }
    on_path[cur as usize] = true;
    for (x, e) in graph.neighbors(cur) {
        if mask >> e & 1 == 1 && !on_path[x as usize] {
            *path_edges |= 1 << e;
            let stop = enumerate_paths(graph, mask, x, target, on_path, path_edges, visit);
            *path_edges &= !(1 << e);
            if stop {
                on_path[cur as usize] = false;
                return true;
            }
        }
    }
    on_path[cur as usize] = false;
    false
}

fn connected_in_mask(graph: &Graph, mask: u32, u: u32, v: u32, scratch: &mut MaskScratch) -> bool {
    scratch.load(graph, mask);
    scratch.find(u) == scratch.find(v)
}

/// Unit-capacity max flow (undirected edges as antiparallel arc pairs) from
/// `source` to a super-sink attached to `sinks`; true if the max flow
/// reaches `need`.
fn max_flow_at_least(graph: &Graph, mask: u32, source: u32, sinks: &[u32], need: u32) -> bool {
    let n = graph.vertex_count() as usize;
    let t = n; // super sink
    // arcs: (to, cap); arc pairs are (i, i^1).
    let mut arc_to: Vec<u32> = Vec::new();
    let mut arc_cap: Vec<u32> = Vec::new();
    let mut head: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
    let mut push_arc = |from: usize, to: usize, cap: u32, head: &mut Vec<Vec<u32>>| {
        head[from].push(arc_to.len() as u32);
        arc_to.push(to as u32);
        arc_cap.push(cap);
    };
    for (e, &(u, v)) in graph.edges().iter().enumerate() {
        if mask >> e & 1 == 1 {
            push_arc(u as usize, v as usize, 1, &mut head);
            push_arc(v as usize, u as usize, 1, &mut head);
        }
    }
    for &s in sinks {
        push_arc(s as usize, t, 1, &mut head);
        push_arc(t, s as usize, 0, &mut head);
    }
    let mut flow = 0u32;
    let mut prev_arc = vec![u32::MAX; n + 1];
    while flow < need {
        for p in prev_arc.iter_mut() {
            *p = u32::MAX;
        }
        let mut queue = VecDeque::new();
        queue.push_back(source as usize);
        prev_arc[source as usize] = u32::MAX - 1;
        let mut reached = false;
        'bfs: while let Some(w) = queue.pop_front() {
            for &a in &head[w] {
                let to = arc_to[a as usize] as usize;
                if arc_cap[a as usize] > 0 && prev_arc[to] == u32::MAX {
                    prev_arc[to] = a;
                    if to == t {
                        reached = true;
                        break 'bfs;
                    }
                    queue.push_back(to);
                }
            }
        }
        if !reached {
            return false;
        }
        // Augment one unit along the path.
        let mut cur = t;
        while cur != source as usize {
            let a = prev_arc[cur] as usize;
            arc_cap[a] -= 1;
            arc_cap[a ^ 1] += 1;
            cur = if a % 2 == 0 {
                arc_to[a + 1] as usize
            } else {
                arc_to[a - 1] as usize
            };
        }
        flow += 1;
    }
    true
}

/// Witness-subset search: A ∘ B holds iff the open edges split into S and
/// its complement with A holding on S alone and B on the complement alone.
fn circ_generic(
    graph: &Graph,
    mask: u32,
    a: &EventSpec,
    b: &EventSpec,
    scratch: &mut MaskScratch,
    amb_a: Option<&[u32]>,
    amb_b: Option<&[u32]>,
) -> bool {
    let mut sub = mask;
    loop {
        if eval_event(graph, sub, a, scratch, amb_a) == 1.0
            && eval_event(graph, mask & !sub, b, scratch, amb_b) == 1.0
        {
            return true;
        }
        if sub == 0 {
            return false;
        }
        sub = (sub - 1) & mask;
    }
}

// ---------------------------------------------------------------------------
// Ghost-field inequalities (inverse BK and the diagrammatic comparison)
// ---------------------------------------------------------------------------

/// Exact per-vertex magnetizations M_{p,h}(v) = E_p[1 - e^{-h|K_v|}].
pub fn exact_magnetizations(graph: &Graph, p: &Rational, h: f64) -> Result<Vec<f64>> {
    check_cap(graph, EXACT_ENUM_CAP, "exact_magnetizations")?;
    if h <= 0.0 {
        return Err(Error::InvalidParameter(format!("h = {h} must be > 0")));
    }
    let e = graph.edge_count();
    let n = graph.vertex_count() as usize;
    let wt = weight_table(e, p)?;
    let mut scratch = MaskScratch::new(graph.vertex_count());
    let mut out = vec![0.0f64; n];
    for mask in 0..1u64 << e {
        let mask = mask as u32;
        let w = wt.as_f64[mask.count_ones() as usize];
        scratch.load(graph, mask);
        for v in 0..n {
            let vol = scratch.volume(v as u32);
            out[v] += w * (1.0 - libm::exp(-h * vol as f64));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct InverseBkReport {
    pub ell: usize,
    /// P({v_1 <-> G_1} ∘ ... ∘ {v_l <-> G_l}), ghosts integrated out.
    pub circ_prob: f64,
    /// P(clusters pairwise disjoint and v_i <-> G_i for all i).
    pub disjoint_connect_prob: f64,
    pub inf_magnetization: Vec<f64>,
    pub sup_magnetization: Vec<f64>,
    pub t2_max: f64,
    pub t3_max: f64,
    /// prod inf M - (4 M_deg / p^2) C(l,2) prod sup M * max T^2.
    pub inverse_bk_bound: f64,
    pub inverse_bk_slack: f64,
    /// circ_prob - l(l-1) prod sup M * max T^3.
    pub diagrammatic_bound: f64,
    pub diagrammatic_slack: f64,
}

/// Exact evaluation of both ghost-field inequalities for l in {2,3}.
/// Correction constants follow the inductive proofs: C(l,2) path pairs for
/// the inverse-BK bound and l(l-1) ordered pairs for the diagrammatic one.
pub fn verify_inverse_bk(
    graph: &Graph,
    p: &Rational,
    hs: &[f64],
    vertices: &[u32],
) -> Result<InverseBkReport> {
    check_cap(graph, INVERSE_BK_CAP, "verify_inverse_bk")?;
    let ell = vertices.len();
    if ell != hs.len() || !(2..=3).contains(&ell) {
        return Err(Error::InvalidParameter(
            "verify_inverse_bk needs l in {2,3} with matching h values".into(),
        ));
    }
    for (i, &v) in vertices.iter().enumerate() {
        if v >= graph.vertex_count() {
            return Err(Error::InvalidParameter(format!("vertex {v} out of range")));
        }
        for &w in &vertices[..i] {
            if w == v {
                return Err(Error::InvalidParameter("vertices must be distinct".into()));
            }
        }
        if hs[i] <= 0.0 {
            return Err(Error::InvalidParameter("ghost intensities must be > 0".into()));
        }
    }
    if graph.vertex_count() > 32 {
        return Err(Error::CapExceeded("verify_inverse_bk supports at most 32 vertices".into()));
    }
    let e = graph.edge_count();
    let nv = graph.vertex_count() as usize;
    let wt = weight_table(e, p)?;
    let mut scratch = MaskScratch::new(graph.vertex_count());

    // Magnetizations per field and the two-point powers.
    let mags: Vec<Vec<f64>> = hs
        .iter()
        .map(|&h| exact_magnetizations(graph, p, h))
        .collect::<Result<_>>()?;
    let inf_mag: Vec<f64> = mags
        .iter()
        .map(|m| m.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let sup_mag: Vec<f64> = mags
        .iter()
        .map(|m| m.iter().copied().fold(0.0, f64::max))
        .collect();

    let t = exact_two_point(graph, p)?.to_f64();
    let mut t2 = vec![0.0f64; nv * nv];
    let mut t3 = vec![0.0f64; nv * nv];
    for u in 0..nv {
        for w in 0..nv {
            let tuw = t[u * nv + w];
            if tuw == 0.0 {
                continue;
            }
            for v in 0..nv {
                t2[u * nv + v] += tuw * t[w * nv + v];
            }
        }
    }
    for u in 0..nv {
        for w in 0..nv {
            let x = t2[u * nv + w];
            if x == 0.0 {
                continue;
            }
            for v in 0..nv {
                t3[u * nv + v] += x * t[w * nv + v];
            }
        }
    }
    let mut t2_max = 0.0f64;
    let mut t3_max = 0.0f64;
    for i in 0..ell {
        for j in 0..i {
            let (a, b) = (vertices[i] as usize, vertices[j] as usize);
            t2_max = t2_max.max(t2[a * nv + b]);
            t3_max = t3_max.max(t3[a * nv + b]);
        }
    }

    // Main enumeration: circ product and disjoint-clusters-and-connect.
    let mut circ_prob = 0.0f64;
    let mut disjoint_prob = 0.0f64;
    for mask in 0..1u64 << e {
        let mask = mask as u32;
        let w = wt.as_f64[mask.count_ones() as usize];
        scratch.load(graph, mask);
        let roots: Vec<u32> = vertices.iter().map(|&v| scratch.find(v)).collect();
        let vols: Vec<u32> = vertices.iter().map(|&v| scratch.volume(v)).collect();

        // Disjoint clusters and each connects to its ghost.
        let pairwise_disjoint = (0..ell).all(|i| (0..i).all(|j| roots[i] != roots[j]));
        if pairwise_disjoint {
            let prod: f64 = (0..ell)
                .map(|i| 1.0 - libm::exp(-hs[i] * vols[i] as f64))
                .product();
            disjoint_prob += w * prod;
            // With pairwise-disjoint clusters the witnesses are automatically
            // edge-disjoint, so the circ probability factorizes identically.
            circ_prob += w * prod;
            continue;
        }

        // Group indices sharing a cluster; blocks multiply (ghost fields are
        // independent and witnesses live inside their clusters).
        let mut prob = 1.0f64;
        let mut used = [false; 3];
        for i in 0..ell {
            if used[i] {
                continue;
            }
            let block: Vec<usize> = (i..ell).filter(|&j| roots[j] == roots[i]).collect();
            for &j in &block {
                used[j] = true;
            }
            prob *= match block.len() {
                1 => 1.0 - libm::exp(-hs[i] * vols[i] as f64),
                2 => circ_two_shared(graph, mask, vertices[block[0]], hs[block[0]], vertices[block[1]], hs[block[1]])?,
                3 => circ_three_shared(
                    graph,
                    mask,
                    [vertices[0], vertices[1], vertices[2]],
                    [hs[0], hs[1], hs[2]],
                )?,
                _ => unreachable!(),
            };
        }
        circ_prob += w * prob;
    }

    let p_f = p.as_f64();
    let max_deg = graph.max_degree() as f64;
    let choose2 = (ell * (ell - 1) / 2) as f64;
    let prod_inf: f64 = inf_mag.iter().product();
    let prod_sup: f64 = sup_mag.iter().product();
    let inverse_bk_bound = prod_inf - 4.0 * max_deg / (p_f * p_f) * choose2 * prod_sup * t2_max;
    let diagrammatic_bound = circ_prob - (ell * (ell - 1)) as f64 * prod_sup * t3_max;

    Ok(InverseBkReport {
        ell,
        circ_prob,
        disjoint_connect_prob: disjoint_prob,
        inf_magnetization: inf_mag,
        sup_magnetization: sup_mag,
        t2_max,
        t3_max,
        inverse_bk_bound,
        inverse_bk_slack: circ_prob - inverse_bk_bound,
        diagrammatic_bound,
        diagrammatic_slack: disjoint_prob - diagrammatic_bound,
    })
}

/// Vertices reachable from `v` over open edges in `mask`, as a bitset.
fn reach_mask(graph: &Graph, mask: u32, v: u32) -> u32 {
    let mut seen: u32 = 1 << v;
    let mut stack = vec![v];
    while let Some(w) = stack.pop() {
        for (x, e) in graph.neighbors(w) {
            if mask >> e & 1 == 1 && seen >> x & 1 == 0 {
                seen |= 1 << x;
                stack.push(x);
            }
        }
    }
    seen
}

/// P over the two ghost fields of {v_i <-> G_i} ∘ {v_j <-> G_j} when both
/// vertices share one open cluster. W[g] collects everything v_j can still
/// reach once some simple path v_i -> g is removed; the expectation over
/// G_i then reduces to a subset sum over the candidate endpoints.
fn circ_two_shared(
    graph: &Graph,
    mask: u32,
    v_i: u32,
    h_i: f64,
    v_j: u32,
    h_j: f64,
) -> Result<f64> {
    let nv = graph.vertex_count() as usize;
    let mut w_sets = vec![0u32; nv];
    let mut on_path = vec![false; nv];
    let mut path_edges: u32 = 0;
    let mut endpoint_stack = vec![v_i];
    // DFS over all simple paths from v_i; every DFS node is a path endpoint.
    collect_reach_per_endpoint(
        graph,
        mask,
        v_i,
        v_j,
        &mut on_path,
        &mut path_edges,
        &mut endpoint_stack,
        &mut w_sets,
    );
    let candidates: Vec<usize> = (0..nv).filter(|&g| w_sets[g] != 0).collect();
    let q_i = libm::exp(-h_i);
    let mut total = 0.0f64;
    // Recursive include/exclude over candidate ghosts of field i.
    fn rec(
        idx: usize,
        weight: f64,
        union: u32,
        candidates: &[usize],
        w_sets: &[u32],
        q_i: f64,
        h_j: f64,
        total: &mut f64,
    ) {
        if idx == candidates.len() {
            *total += weight * (1.0 - libm::exp(-h_j * union.count_ones() as f64));
            return;
        }
        let g = candidates[idx];
        rec(idx + 1, weight * q_i, union, candidates, w_sets, q_i, h_j, total);
        rec(
            idx + 1,
            weight * (1.0 - q_i),
            union | w_sets[g],
            candidates,
            w_sets,
            q_i,
            h_j,
            total,
        );
    }
    rec(0, 1.0, 0, &candidates, &w_sets, q_i, h_j, &mut total);
    Ok(total)
}

/// DFS helper: for every simple path v_i -> g over open edges, union the
/// set reachable by v_j in the remaining edges into w_sets[g].
#[allow(clippy::too_many_arguments)]
fn collect_reach_per_endpoint(
    graph: &Graph,
    mask: u32,
    cur: u32,
    v_j: u32,
    on_path: &mut Vec<bool>,
    path_edges: &mut u32,
    endpoint_stack: &mut Vec<u32>,
    w_sets: &mut Vec<u32>,
) {
    w_sets[cur as usize] |= reach_mask(graph, mask & !*path_edges, v_j);
    on_path[cur as usize] = true;
    for (x, e) in graph.neighbors(cur) {
        if mask >> e & 1 == 1 && !on_path[x as usize] {
            *path_edges |= 1 << e;
            collect_reach_per_endpoint(graph, mask, x, v_j, on_path, path_edges, endpoint_stack, w_sets);
            *path_edges &= !(1 << e);
        }
    }
    on_path[cur as usize] = false;
}

/// Triple-shared-cluster case: A[g1][g2] collects what v_3 reaches once an
/// edge-disjoint pair of simple paths v_1 -> g1, v_2 -> g2 is removed; the
/// double expectation over G_1, G_2 is a nested subset sum with the inner
/// sums memoized on the per-g2 union vector.
fn circ_three_shared(graph: &Graph, mask: u32, vs: [u32; 3], hs: [f64; 3]) -> Result<f64> {
    let nv = graph.vertex_count() as usize;
    let mut a_sets = vec![0u32; nv * nv];

    // Outer DFS over paths from v_1, inner DFS over disjoint paths from v_2.
    let mut on_path1 = vec![false; nv];
    let mut pe1: u32 = 0;
    fn outer(
        graph: &Graph,
        mask: u32,
        cur: u32,
        vs: &[u32; 3],
        on_path1: &mut Vec<bool>,
        pe1: &mut u32,
        a_sets: &mut Vec<u32>,
        nv: usize,
    ) {
        {
            // Inner enumeration with the outer path removed.
            let inner_mask = mask & !*pe1;
            let mut on_path2 = vec![false; nv];
            let mut pe2: u32 = 0;
            inner(graph, inner_mask, vs[1], vs[2], cur, &mut on_path2, &mut pe2, a_sets, nv);
        }
        on_path1[cur as usize] = true;
        for (x, e) in graph.neighbors(cur) {
            if mask >> e & 1 == 1 && !on_path1[x as usize] {
                *pe1 |= 1 << e;
                outer(graph, mask, x, vs, on_path1, pe1, a_sets, nv);
                *pe1 &= !(1 << e);
            }
        }
        on_path1[cur as usize] = false;
    }
    #[allow(clippy::too_many_arguments)]
    fn inner(
        graph: &Graph,
        mask: u32,
        cur: u32,
        v3: u32,
        g1: u32,
        on_path2: &mut Vec<bool>,
        pe2: &mut u32,
        a_sets: &mut Vec<u32>,
        nv: usize,
    ) {
        a_sets[g1 as usize * nv + cur as usize] |= reach_mask(graph, mask & !*pe2, v3);
        on_path2[cur as usize] = true;
        for (x, e) in graph.neighbors(cur) {
            if mask >> e & 1 == 1 && !on_path2[x as usize] {
                *pe2 |= 1 << e;
                inner(graph, mask, x, v3, g1, on_path2, pe2, a_sets, nv);
                *pe2 &= !(1 << e);
            }
        }
        on_path2[cur as usize] = false;
    }
    outer(graph, mask, vs[0], &vs, &mut on_path1, &mut pe1, &mut a_sets, nv);

    let c1: Vec<usize> = (0..nv)
        .filter(|&g1| (0..nv).any(|g2| a_sets[g1 * nv + g2] != 0))
        .collect();
    let c2: Vec<usize> = (0..nv)
        .filter(|&g2| (0..nv).any(|g1| a_sets[g1 * nv + g2] != 0))
        .collect();
    if c1.len() + c2.len() > 26 {
        return Err(Error::CapExceeded(format!(
            "inverse-bk triple block with {} x {} ghost candidates is too large",
            c1.len(),
            c2.len()
        )));
    }
    let q1 = libm::exp(-hs[0]);
    let q2 = libm::exp(-hs[1]);
    let mut memo: alloc::collections::BTreeMap<Vec<u32>, f64> = alloc::collections::BTreeMap::new();

    // Inner sum over G_2 for a fixed per-g2 union vector b.
    fn inner_sum(idx: usize, weight: f64, union: u32, b: &[u32], c2: &[usize], q2: f64, h3: f64, total: &mut f64) {
        if idx == c2.len() {
            *total += weight * (1.0 - libm::exp(-h3 * union.count_ones() as f64));
            return;
        }
        inner_sum(idx + 1, weight * q2, union, b, c2, q2, h3, total);
        inner_sum(idx + 1, weight * (1.0 - q2), union | b[idx], b, c2, q2, h3, total);
    }

    // Outer recursion over G_1 maintaining b[g2] = union of A[g1][g2].
    #[allow(clippy::too_many_arguments)]
    fn outer_sum(
        idx: usize,
        weight: f64,
        b: Vec<u32>,
        c1: &[usize],
        c2: &[usize],
        a_sets: &[u32],
        nv: usize,
        q1: f64,
        q2: f64,
        h3: f64,
        memo: &mut alloc::collections::BTreeMap<Vec<u32>, f64>,
        total: &mut f64,
    ) {
        if idx == c1.len() {
            let inner_total = if let Some(&v) = memo.get(&b) {
                v
            } else {
                let mut t = 0.0;
                inner_sum(0, 1.0, 0, &b, c2, q2, h3, &mut t);
                memo.insert(b.clone(), t);
                t
            };
            *total += weight * inner_total;
            return;
        }
        let g1 = c1[idx];
        outer_sum(idx + 1, weight * q1, b.clone(), c1, c2, a_sets, nv, q1, q2, h3, memo, total);
        let mut b2 = b;
        for (slot, &g2) in b2.iter_mut().zip(c2.iter()) {
            *slot |= a_sets[g1 * nv + g2];
        }
        outer_sum(idx + 1, weight * (1.0 - q1), b2, c1, c2, a_sets, nv, q1, q2, h3, memo, total);
    }

    let mut total = 0.0;
    outer_sum(
        0,
        1.0,
        vec![0u32; c2.len()],
        &c1,
        &c2,
        &a_sets,
        nv,
        q1,
        q2,
        hs[2],
        &mut memo,
        &mut total,
    );
    Ok(total)
}
