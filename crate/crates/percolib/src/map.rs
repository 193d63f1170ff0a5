//! Rotation-system maps: {p,q} tessellation patches grown face-layer by
//! face-layer with exact combinatorics (no floating point), planar duals via
//! the dart bijection, and dual configurations.
//!
//! Darts 2e and 2e+1 are the two orientations of edge e; alpha is the
//! implicit involution d ^ 1; sigma rotates darts counterclockwise around
//! their origin. Stored faces are the interior faces; the outer face is the
//! unique remaining orbit of sigma∘alpha.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::perc::Configuration;

const OUTER: u32 = u32::MAX;
const PENDING: u32 = u32::MAX - 1;

#[derive(Clone, Debug)]
pub struct CombinatorialMap {
    graph: Graph,
    /// sigma[d] = next dart counterclockwise around origin(d).
    sigma: Vec<u32>,
    dart_origin: Vec<u32>,
    /// Interior faces as vertex cycles, all consistently oriented.
    faces: Vec<Vec<u32>>,
    /// Interior face id per dart, OUTER for the outer face.
    face_of_dart: Vec<u32>,
}

impl CombinatorialMap {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn faces(&self) -> &[Vec<u32>] {
        &self.faces
    }

    pub fn dart_count(&self) -> u32 {
        self.sigma.len() as u32
    }

    pub fn sigma(&self) -> &[u32] {
        &self.sigma
    }

    pub fn dart_origin(&self, d: u32) -> u32 {
        self.dart_origin[d as usize]
    }

    /// The involution pairing the two darts of each edge.
    pub fn alpha(&self, d: u32) -> u32 {
        d ^ 1
    }

    pub fn face_of_dart(&self, d: u32) -> Option<u32> {
        let f = self.face_of_dart[d as usize];
        (f != OUTER).then_some(f)
    }

    /// Interior faces on both sides of edge e, outer encoded as None.
    pub fn edge_faces(&self, e: u32) -> (Option<u32>, Option<u32>) {
        (self.face_of_dart(2 * e), self.face_of_dart(2 * e + 1))
    }

    pub fn edge_touches_outer(&self, e: u32) -> bool {
        let (a, b) = self.edge_faces(e);
        a.is_none() || b.is_none()
    }

    /// Assemble a map from consistently oriented interior face cycles.
    /// Edges are numbered by first appearance; sigma is derived from the
    /// face corners and validated (single rotation cycle per vertex, orbit
    /// structure reproducing the faces plus one outer face, Euler formula).
    pub fn from_faces(tag: &str, vertex_count: u32, faces: Vec<Vec<u32>>) -> Result<CombinatorialMap> {
        let mut edge_ids: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        let mut edges: Vec<(u32, u32)> = Vec::new();
        for cycle in &faces {
            if cycle.len() < 3 {
                return Err(Error::InvalidParameter("face with fewer than 3 sides".into()));
            }
            for i in 0..cycle.len() {
                let (a, b) = (cycle[i], cycle[(i + 1) % cycle.len()]);
                let key = (a.min(b), a.max(b));
                edge_ids.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edges.len() as u32 - 1
                });
            }
        }
        let dart_count = 2 * edges.len();
        let dart =
            |a: u32, b: u32| -> u32 {
                let key = (a.min(b), a.max(b));
                let e = edge_ids[&key];
                if edges[e as usize].0 == a {
                    2 * e
                } else {
                    2 * e + 1
                }
            };
        let mut dart_origin = vec![0u32; dart_count];
        for (e, &(a, b)) in edges.iter().enumerate() {
            dart_origin[2 * e] = a;
            dart_origin[2 * e + 1] = b;
        }

        // Face-successor map N(d): if d = x_i -> x_{i+1} within a face then
        // N(d) = x_{i+1} -> x_{i+2}. sigma(alpha(d)) = N(d).
        let mut sigma = vec![OUTER; dart_count];
        let mut face_of_dart = vec![OUTER; dart_count];
        for (f, cycle) in faces.iter().enumerate() {
            let len = cycle.len();
            for i in 0..len {
                let d = dart(cycle[i], cycle[(i + 1) % len]);
                let n = dart(cycle[(i + 1) % len], cycle[(i + 2) % len]);
                if face_of_dart[d as usize] != OUTER {
                    return Err(Error::InvalidParameter(format!(
                        "dart {d} traversed by two faces; face orientations are inconsistent"
                    )));
                }
                face_of_dart[d as usize] = f as u32;
                let slot = (d ^ 1) as usize;
                if sigma[slot] != OUTER {
                    return Err(Error::InvalidParameter(
                        "rotation conflict while assembling map".into(),
                    ));
                }
                sigma[slot] = n;
            }
        }

        // Close the rotation at boundary vertices: chain heads are darts
        // that nothing maps to yet.
        let mut has_pre = vec![false; dart_count];
        for &s in &sigma {
            if s != OUTER {
                has_pre[s as usize] = true;
            }
        }
        let mut head_of: BTreeMap<u32, u32> = BTreeMap::new();
        for d in 0..dart_count as u32 {
            if !has_pre[d as usize] {
                let v = dart_origin[d as usize];
                if head_of.insert(v, d).is_some() {
                    return Err(Error::InvalidParameter(format!(
                        "vertex {v} has a disconnected rotation (patch not a disc)"
                    )));
                }
            }
        }
        for d in 0..dart_count as u32 {
            if sigma[d as usize] == OUTER {
                let v = dart_origin[d as usize];
                let head = head_of.get(&v).copied().ok_or_else(|| {
                    Error::InvalidParameter(format!("cannot close rotation at vertex {v}"))
                })?;
                sigma[d as usize] = head;
            }
        }

        let boundary: Vec<u32> = {
            let mut interior_degree = vec![0u32; vertex_count as usize];
            let mut full_degree = vec![0u32; vertex_count as usize];
            for (e, &(a, b)) in edges.iter().enumerate() {
                full_degree[a as usize] += 1;
                full_degree[b as usize] += 1;
                if face_of_dart[2 * e] != OUTER && face_of_dart[2 * e + 1] != OUTER {
                    interior_degree[a as usize] += 1;
                    interior_degree[b as usize] += 1;
                }
            }
            (0..vertex_count)
                .filter(|&v| interior_degree[v as usize] != full_degree[v as usize])
                .collect()
        };
        let graph = Graph::from_edges(tag, vertex_count, edges, &boundary)?;

        let map = CombinatorialMap {
            graph,
            sigma,
            dart_origin,
            faces,
            face_of_dart,
        };
        map.validate()?;
        Ok(map)
    }

    /// Rebuild a map from its serialized parts: the underlying graph, the
    /// rotation sigma, and one dart of the outer face. Faces are recovered
    /// as the remaining orbits of sigma∘alpha, ordered by smallest dart.
    pub fn from_parts(graph: Graph, sigma: Vec<u32>, outer_dart: u32) -> Result<CombinatorialMap> {
        let dart_count = 2 * graph.edge_count() as usize;
        if sigma.len() != dart_count || outer_dart as usize >= dart_count {
            return Err(Error::InvalidParameter("sigma/outer darts out of range".into()));
        }
        let mut dart_origin = vec![0u32; dart_count];
        for (e, &(a, b)) in graph.edges().iter().enumerate() {
            dart_origin[2 * e] = a;
            dart_origin[2 * e + 1] = b;
        }
        let mut face_of_dart = vec![OUTER; dart_count];
        // Mark the outer orbit first.
        let mut cur = outer_dart;
        loop {
            if face_of_dart[cur as usize] != OUTER {
                break;
            }
            face_of_dart[cur as usize] = OUTER - 2; // temp marker
            cur = sigma[(cur ^ 1) as usize];
            if cur == outer_dart {
                break;
            }
        }
        let mut faces = Vec::new();
        for d0 in 0..dart_count as u32 {
            if face_of_dart[d0 as usize] != OUTER {
                continue;
            }
            let id = faces.len() as u32;
            let mut cycle = Vec::new();
            let mut cur = d0;
            loop {
                if face_of_dart[cur as usize] != OUTER {
                    return Err(Error::InvalidParameter("face orbits overlap".into()));
                }
                face_of_dart[cur as usize] = id;
                cycle.push(dart_origin[cur as usize]);
                cur = sigma[(cur ^ 1) as usize];
                if cur == d0 {
                    break;
                }
                if cycle.len() > dart_count {
                    return Err(Error::InvalidParameter("runaway face orbit".into()));
                }
            }
            faces.push(cycle);
        }
        for f in face_of_dart.iter_mut() {
            if *f == OUTER - 2 {
                *f = OUTER;
            }
        }
        let map = CombinatorialMap {
            graph,
            sigma,
            dart_origin,
            faces,
            face_of_dart,
        };
        map.validate()?;
        Ok(map)
    }

    /// Structural validation: sigma is a permutation forming one cycle per
    /// vertex, sigma∘alpha orbits are exactly the stored faces plus one
    /// outer face, and the Euler formula holds with the outer face counted.
    pub fn validate(&self) -> Result<()> {
        let dart_count = self.sigma.len();
        let mut first_dart = vec![OUTER; self.graph.vertex_count() as usize];
        for d in (0..dart_count as u32).rev() {
            first_dart[self.dart_origin[d as usize] as usize] = d;
        }
        // Permutation and per-vertex single cycle.
        let mut seen = vec![false; dart_count];
        for v in 0..self.graph.vertex_count() {
            let start = first_dart[v as usize];
            if start == OUTER {
                continue;
            }
            let mut cur = start;
            let mut steps = 0usize;
            loop {
                if self.dart_origin[cur as usize] != v {
                    return Err(Error::InvalidParameter(format!(
                        "sigma leaves the star of vertex {v}"
                    )));
                }
                if seen[cur as usize] {
                    return Err(Error::InvalidParameter("sigma is not a permutation".into()));
                }
                seen[cur as usize] = true;
                cur = self.sigma[cur as usize];
                steps += 1;
                if cur == start {
                    break;
                }
                if steps > dart_count {
                    return Err(Error::InvalidParameter("sigma has a runaway orbit".into()));
                }
            }
            if steps != self.graph.degree(v) as usize {
                return Err(Error::InvalidParameter(format!(
                    "vertex {v}: rotation cycle length {steps} != degree {}",
                    self.graph.degree(v)
                )));
            }
        }
        // Face orbits of phi = sigma∘alpha.
        let mut orbit_of = vec![OUTER; dart_count];
        let mut orbits = 0u32;
        let mut outer_orbits = 0u32;
        for d0 in 0..dart_count as u32 {
            if orbit_of[d0 as usize] != OUTER {
                continue;
            }
            let claimed = self.face_of_dart[d0 as usize];
            let mut cur = d0;
            let mut len = 0usize;
            loop {
                if orbit_of[cur as usize] != OUTER {
                    return Err(Error::InvalidParameter("face orbits overlap".into()));
                }
                orbit_of[cur as usize] = orbits;
                if self.face_of_dart[cur as usize] != claimed {
                    return Err(Error::InvalidParameter(
                        "sigma orbit crosses between faces; orientation broken".into(),
                    ));
                }
                cur = self.sigma[(cur ^ 1) as usize];
                len += 1;
                if cur == d0 {
                    break;
                }
                if len > dart_count {
                    return Err(Error::InvalidParameter("runaway face orbit".into()));
                }
            }
            if claimed == OUTER {
                outer_orbits += 1;
            } else if len != self.faces[claimed as usize].len() {
                return Err(Error::InvalidParameter(format!(
                    "face {claimed} orbit length {len} != cycle length {}",
                    self.faces[claimed as usize].len()
                )));
            }
            orbits += 1;
        }
        if outer_orbits != 1 {
            return Err(Error::InvalidParameter(format!(
                "expected exactly one outer face, found {outer_orbits}"
            )));
        }
        if orbits as usize != self.faces.len() + 1 {
            return Err(Error::InvalidParameter("face orbit count mismatch".into()));
        }
        // Euler with the outer face counted.
        let v = self.graph.vertex_count() as i64;
        let e = self.graph.edge_count() as i64;
        let f = self.faces.len() as i64 + 1;
        if v - e + f != 2 {
            return Err(Error::InvalidParameter(format!(
                "Euler formula violated: {v} - {e} + {f} != 2"
            )));
        }
        Ok(())
    }

    /// Dual map: one vertex per interior face, one edge per primal edge
    /// whose both sides are interior, crossing via the dart bijection.
    /// Dual faces are the face-cycles around interior primal vertices.
    pub fn dual(&self) -> Result<DualMap> {
        let nf = self.faces.len() as u32;
        let mut first_dart = vec![OUTER; self.graph.vertex_count() as usize];
        for d in (0..self.dart_count()).rev() {
            first_dart[self.dart_origin[d as usize] as usize] = d;
        }
        let mut dual_faces: Vec<Vec<u32>> = Vec::new();
        let mut primal_vertex_of_dual_face: Vec<u32> = Vec::new();
        for v in 0..self.graph.vertex_count() {
            if self.graph.is_boundary(v) {
                continue;
            }
            // Walk sigma around v; the faces met form the dual face cycle.
            let start = first_dart[v as usize];
            if start == OUTER {
                continue;
            }
            let mut cycle = Vec::new();
            let mut cur = start;
            loop {
                let f = self.face_of_dart[cur as usize];
                if f == OUTER {
                    return Err(Error::InvalidParameter(format!(
                        "interior vertex {v} touches the outer face"
                    )));
                }
                cycle.push(f);
                cur = self.sigma[cur as usize];
                if cur == start {
                    break;
                }
            }
            dual_faces.push(cycle);
            primal_vertex_of_dual_face.push(v);
        }
        let map = CombinatorialMap::from_faces(
            &format!("dual({})", self.graph.family_tag()),
            nf,
            dual_faces,
        )?;
        // e -> dual edge id, for primal edges with two interior sides.
        let mut dual_edge_of_primal = vec![None; self.graph.edge_count() as usize];
        let mut lookup: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        for (de, &(a, b)) in map.graph.edges().iter().enumerate() {
            lookup.insert((a.min(b), a.max(b)), de as u32);
        }
        for e in 0..self.graph.edge_count() {
            if let (Some(f), Some(g)) = self.edge_faces(e) {
                let key = (f.min(g), f.max(g));
                dual_edge_of_primal[e as usize] = lookup.get(&key).copied();
            }
        }
        Ok(DualMap {
            map,
            dual_edge_of_primal,
            primal_vertex_of_dual_face,
        })
    }
}

/// A dual map together with the edge bijection back to the primal.
#[derive(Clone, Debug)]
pub struct DualMap {
    pub map: CombinatorialMap,
    /// Primal edge -> dual edge; None when the primal edge borders the
    /// outer face (its dual would touch the boundary).
    pub dual_edge_of_primal: Vec<Option<u32>>,
    /// Dual face index -> interior primal vertex it surrounds.
    pub primal_vertex_of_dual_face: Vec<u32>,
}

impl DualMap {
    /// Transport a primal configuration through e -> e†, flipping bits:
    /// the dual of Bernoulli-p is Bernoulli-(1-p).
    pub fn dual_config(&self, primal: &Graph, config: &Configuration) -> Result<Configuration> {
        if config.graph_fingerprint != primal.fingerprint() {
            return Err(Error::InvalidParameter(
                "configuration does not belong to the primal graph".into(),
            ));
        }
        let dual_graph = self.map.graph();
        let mut open = Bits::zeros(dual_graph.edge_count() as usize);
        for e in 0..primal.edge_count() {
            if let Some(de) = self.dual_edge_of_primal[e as usize] {
                open.set(de as usize, !config.is_open(e));
            }
        }
        Ok(Configuration::from_bits(
            dual_graph.fingerprint(),
            1.0 - config.p,
            config.master_seed,
            config.stream,
            open,
        ))
    }
}

/// Simply connected {p,q} patch: a central p-gon plus `layers` face rings,
/// every interior vertex of degree q. Purely combinatorial layer growth;
/// vertex ids are breadth-first by layer and rotation order.
pub fn build_tiling(p_gon: u32, q_deg: u32, layers: u32) -> Result<CombinatorialMap> {
    if p_gon < 3 || q_deg < 3 {
        return Err(Error::InvalidParameter(format!(
            "tiling {{{p_gon},{q_deg}}} needs p, q >= 3"
        )));
    }
    // 1/p + 1/q <= 1/2, i.e. 2(p + q) <= pq, rejects the spherical family.
    if 2 * (p_gon + q_deg) > p_gon * q_deg {
        return Err(Error::InvalidParameter(format!(
            "tiling {{{p_gon},{q_deg}}} is spherical (1/p + 1/q > 1/2)"
        )));
    }
    if layers < 1 {
        return Err(Error::InvalidParameter("layers must be >= 1".into()));
    }

    let p = p_gon as usize;
    let mut faces: Vec<Vec<u32>> = vec![(0..p_gon).collect()];
    let mut face_count: Vec<u32> = vec![1; p];
    let mut edge_set: BTreeSet<(u32, u32)> = (0..p_gon)
        .map(|i| {
            let j = (i + 1) % p_gon;
            (i.min(j), i.max(j))
        })
        .collect();
    let mut next_vertex = p_gon;
    // Boundary cycle with the patch interior on the left.
    let mut boundary: Vec<u32> = (0..p_gon).collect();

    for _ in 0..layers {
        grow_layer(
            p_gon,
            q_deg,
            &mut faces,
            &mut face_count,
            &mut edge_set,
            &mut next_vertex,
            &mut boundary,
        )?;
        if next_vertex > 30_000_000 {
            return Err(Error::CapExceeded(format!(
                "tiling {{{p_gon},{q_deg}}} exceeded 30M vertices at this layer count"
            )));
        }
    }

    CombinatorialMap::from_faces(
        &format!("tiling({p_gon},{q_deg},layers={layers})"),
        next_vertex,
        faces,
    )
}

/// One face ring. Every current boundary vertex is saturated to q faces:
/// each boundary edge receives a glued p-gon (maximal runs across
/// deficit-1 vertices merge into a single face) and each corner with
/// deficit d >= 3 receives d-2 fan faces. Consecutive new faces share one
/// new edge at their common corner, tracked by `carry`; the wrap-around
/// share is resolved by a deferred placeholder.
#[allow(clippy::too_many_arguments)]
fn grow_layer(
    p_gon: u32,
    q_deg: u32,
    faces: &mut Vec<Vec<u32>>,
    face_count: &mut Vec<u32>,
    edge_set: &mut BTreeSet<(u32, u32)>,
    next_vertex: &mut u32,
    boundary: &mut Vec<u32>,
) -> Result<()> {
    let len = boundary.len();
    let deficit = |v: u32, fc: &[u32]| -> i64 { q_deg as i64 - fc[v as usize] as i64 };
    for &v in boundary.iter() {
        if deficit(v, face_count) < 1 {
            return Err(Error::InvalidParameter(format!(
                "boundary vertex {v} already saturated; {{{p_gon},{q_deg}}} is not expanding"
            )));
        }
    }
    // Start at a corner with deficit >= 2 (deficit-1 vertices sit inside
    // swallow runs and cannot head a layer walk).
    let start = boundary
        .iter()
        .position(|&v| deficit(v, face_count) >= 2)
        .ok_or_else(|| Error::InvalidParameter("entire boundary has deficit 1".into()))?;
    let at = |i: usize| boundary[(start + i) % len];

    enum Spec {
        /// Maximal run of glued boundary edges, as boundary offsets
        /// [first, first + s] relative to the walk start.
        Run { first: usize, s: usize },
        /// Fan face at this corner vertex.
        Fan { v: u32 },
    }
    let mut specs: Vec<Spec> = Vec::new();
    let mut i = 0usize;
    while i < len {
        let mut s = 1usize;
        while i + s < len && deficit(at(i + s), face_count) == 1 {
            s += 1;
        }
        if s >= p_gon as usize - 1 {
            return Err(Error::InvalidParameter(format!(
                "swallow run of {s} edges cannot fit in a {p_gon}-gon"
            )));
        }
        specs.push(Spec::Run { first: i, s });
        let end_corner = at(i + s); // == start corner on the last run
        let d = deficit(end_corner, face_count);
        for _ in 0..(d - 2).max(0) {
            specs.push(Spec::Fan { v: end_corner });
        }
        i += s;
    }

    let mut fresh: Vec<u32> = Vec::new();
    let mut carry: u32 = PENDING;
    let mut deferred_edges: Vec<(u32, u32)> = Vec::new();
    let mut deferred_slots: Vec<(usize, usize)> = Vec::new(); // (face idx, slot idx)
    let mk_vertex = |fresh: &mut Vec<u32>, next_vertex: &mut u32| -> u32 {
        let v = *next_vertex;
        *next_vertex += 1;
        fresh.push(v);
        v
    };
    let add_edge = |a: u32, b: u32, edge_set: &mut BTreeSet<(u32, u32)>, deferred: &mut Vec<(u32, u32)>| {
        if a == PENDING || b == PENDING {
            deferred.push((a, b));
        } else {
            edge_set.insert((a.min(b), a.max(b)));
        }
    };

    for spec in &specs {
        let mut cycle: Vec<u32> = Vec::new();
        match *spec {
            Spec::Run { first, s } => {
                // Shared path traversed against the boundary orientation,
                // then the outer path from the run start back to its end.
                for off in (0..=s).rev() {
                    cycle.push(at(first + off));
                }
                let outer_edges = p_gon as usize - s; // >= 2
                let b_start = at(first);
                let b_end = at(first + s);
                let mut prev = carry;
                cycle.push(carry);
                // carry edge (b_start, carry) was laid down by the
                // predecessor face, or is deferred at the walk start.
                if carry == PENDING {
                    add_edge(b_start, carry, edge_set, &mut deferred_edges);
                }
                for _ in 1..outer_edges - 1 {
                    let v = mk_vertex(&mut fresh, next_vertex);
                    add_edge(prev, v, edge_set, &mut deferred_edges);
                    cycle.push(v);
                    prev = v;
                }
                add_edge(prev, b_end, edge_set, &mut deferred_edges);
                carry = prev; // == carry when the run swallows p-2 edges
            }
            Spec::Fan { v } => {
                cycle.push(v);
                cycle.push(carry);
                let mut prev = carry;
                for _ in 0..p_gon - 2 {
                    let u = mk_vertex(&mut fresh, next_vertex);
                    add_edge(prev, u, edge_set, &mut deferred_edges);
                    cycle.push(u);
                    prev = u;
                }
                add_edge(prev, v, edge_set, &mut deferred_edges);
                carry = prev;
            }
        }
        let fidx = faces.len();
        for (slot, &vv) in cycle.iter().enumerate() {
            if vv == PENDING {
                deferred_slots.push((fidx, slot));
            }
        }
        faces.push(cycle);
    }
    if carry == PENDING {
        return Err(Error::InvalidParameter(
            "layer produced no fresh vertices; parameters are not expanding".into(),
        ));
    }
    // Resolve the wrap-around share: the walk-start carry is the final one.
    for (f, slot) in deferred_slots {
        faces[f][slot] = carry;
    }
    for (a, b) in deferred_edges {
        let a = if a == PENDING { carry } else { a };
        let b = if b == PENDING { carry } else { b };
        edge_set.insert((a.min(b), a.max(b)));
    }
    // Update face counts; newly created vertices enter via face membership.
    face_count.resize(*next_vertex as usize, 0);
    for f in faces.len() - specs.len()..faces.len() {
        for &v in &faces[f] {
            face_count[v as usize] += 1;
        }
    }
    *boundary = fresh;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perc::sample_config;

    fn interior_vertices(m: &CombinatorialMap) -> Vec<u32> {
        (0..m.graph().vertex_count())
            .filter(|&v| !m.graph().is_boundary(v))
            .collect()
    }

    #[test]
    fn rejects_spherical_and_bad_params() {
        assert!(build_tiling(3, 5, 1).is_err());
        assert!(build_tiling(4, 3, 1).is_err());
        assert!(build_tiling(2, 8, 1).is_err());
        assert!(build_tiling(4, 4, 0).is_err());
        assert!(build_tiling(4, 4, 1).is_ok());
    }

    #[test]
    fn square_grid_patch() {
        let m = build_tiling(4, 4, 3).unwrap();
        for f in m.faces() {
            assert_eq!(f.len(), 4);
        }
        for v in interior_vertices(&m) {
            assert_eq!(m.graph().degree(v), 4, "vertex {v}");
        }
        // Euler and orbit structure are checked inside validate() on build.
    }

    #[test]
    fn heptagonal_triangles() {
        let m = build_tiling(3, 7, 2).unwrap();
        for f in m.faces() {
            assert_eq!(f.len(), 3);
        }
        for v in interior_vertices(&m) {
            assert_eq!(m.graph().degree(v), 7, "vertex {v}");
        }
        assert!(!interior_vertices(&m).is_empty());
    }

    #[test]
    fn triangle_heptagons() {
        let m = build_tiling(7, 3, 2).unwrap();
        for f in m.faces() {
            assert_eq!(f.len(), 7);
        }
        for v in interior_vertices(&m) {
            assert_eq!(m.graph().degree(v), 3, "vertex {v}");
        }
    }

    #[test]
    fn deeper_layers_stay_valid() {
        for (p, q, l) in [(3u32, 7u32, 4u32), (7, 3, 5), (4, 5, 3), (5, 4, 3), (4, 4, 5), (3, 8, 3), (8, 3, 4)] {
            let m = build_tiling(p, q, l).unwrap();
            for f in m.faces() {
                assert_eq!(f.len(), p as usize, "{{{p},{q}}}");
            }
            for v in interior_vertices(&m) {
                assert_eq!(m.graph().degree(v), q, "{{{p},{q}}} vertex {v}");
            }
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let a = build_tiling(3, 7, 3).unwrap();
        let b = build_tiling(3, 7, 3).unwrap();
        assert_eq!(a.graph().fingerprint(), b.graph().fingerprint());
        assert_eq!(a.sigma(), b.sigma());
        assert_eq!(a.faces(), b.faces());
    }

    #[test]
    fn dual_of_square_patch_is_square() {
        let m = build_tiling(4, 4, 4).unwrap();
        let d = m.dual().unwrap();
        for f in d.map.faces() {
            assert_eq!(f.len(), 4);
        }
        for v in interior_vertices(&d.map) {
            assert_eq!(d.map.graph().degree(v), 4);
        }
    }

    #[test]
    fn dual_of_3_7_looks_like_7_3() {
        let m = build_tiling(3, 7, 3).unwrap();
        let d = m.dual().unwrap();
        // Dual vertices are triangles: degree 3 in the interior; dual faces
        // surround interior primal vertices: 7-gons.
        for v in interior_vertices(&d.map) {
            assert_eq!(d.map.graph().degree(v), 3);
        }
        for f in d.map.faces() {
            assert_eq!(f.len(), 7);
        }
    }

    #[test]
    fn dual_edge_bijection_covers_interior() {
        let m = build_tiling(3, 7, 2).unwrap();
        let d = m.dual().unwrap();
        let interior_primal_edges = (0..m.graph().edge_count())
            .filter(|&e| !m.edge_touches_outer(e))
            .count();
        let mapped = d.dual_edge_of_primal.iter().flatten().count();
        assert_eq!(mapped, interior_primal_edges);
        assert_eq!(mapped as u32, d.map.graph().edge_count());
    }

    #[test]
    fn dual_of_dual_recovers_interior_incidences() {
        let m = build_tiling(3, 7, 3).unwrap();
        let d = m.dual().unwrap();
        let dd = d.map.dual().unwrap();
        // dd vertices are dual faces, which correspond to interior primal
        // vertices; check the edge sets agree under that identification.
        let back = &d.primal_vertex_of_dual_face;
        let mut original: BTreeSet<(u32, u32)> = BTreeSet::new();
        for &(a, b) in m.graph().edges() {
            if !m.graph().is_boundary(a) && !m.graph().is_boundary(b) {
                original.insert((a.min(b), a.max(b)));
            }
        }
        let mut recovered: BTreeSet<(u32, u32)> = BTreeSet::new();
        for &(x, y) in dd.map.graph().edges() {
            let (a, b) = (back[x as usize], back[y as usize]);
            recovered.insert((a.min(b), a.max(b)));
        }
        // Every recovered incidence is an original interior incidence, and
        // the deep interior is fully recovered.
        assert!(recovered.is_subset(&original));
        let bdist = m.graph().boundary_distance();
        for &(a, b) in &original {
            if bdist[a as usize] >= 2 && bdist[b as usize] >= 2 {
                assert!(recovered.contains(&(a, b)), "missing edge ({a},{b})");
            }
        }
    }

    #[test]
    fn dual_config_flips_bits() {
        let m = build_tiling(4, 4, 3).unwrap();
        let d = m.dual().unwrap();
        let g = m.graph();
        let all_open = sample_config(g, 1.0, 0, 0).unwrap();
        let dual = d.dual_config(g, &all_open).unwrap();
        assert_eq!(dual.open_count(), 0);
        assert!((dual.p - 0.0).abs() < 1e-15);

        let cfg = sample_config(g, 0.37, 5, 9).unwrap();
        let dual = d.dual_config(g, &cfg).unwrap();
        for e in 0..g.edge_count() {
            if let Some(de) = d.dual_edge_of_primal[e as usize] {
                assert_eq!(dual.is_open(de), !cfg.is_open(e));
            }
        }
        // Involution through the double dual on doubly-interior edges.
        let dd = d.map.dual().unwrap();
        let dual2 = dd.dual_config(d.map.graph(), &dual).unwrap();
        for e in 0..g.edge_count() {
            if let Some(de) = d.dual_edge_of_primal[e as usize] {
                if let Some(dde) = dd.dual_edge_of_primal[de as usize] {
                    assert_eq!(dual2.is_open(dde), cfg.is_open(e));
                }
            }
        }
    }

    #[test]
    fn growth_is_exponential_on_hyperbolic_patch() {
        let m = build_tiling(3, 7, 6).unwrap();
        let g = m.graph();
        let growth = g.growth_rate(0, 5).unwrap();
        assert!(growth.gamma > 0.5, "gamma = {}", growth.gamma);
    }
}
