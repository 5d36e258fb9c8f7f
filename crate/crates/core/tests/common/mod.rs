//! Brute-force reference implementations shared by the integration tests.
//! None of them call into the library's own kernels.
#![allow(dead_code)]

use geoforge::geom::TriangleMesh;
use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_cloud(n: usize, seed: u64) -> Vec<Point3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Triangles with vertices scattered in `[-0.8, 0.8]^3`, as a soup.
pub fn random_soup(n: usize, seed: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut verts = Vec::with_capacity(3 * n);
    for _ in 0..n {
        let c = Vector3::new(rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6));
        for _ in 0..3 {
            let d = Vector3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
            verts.push(Point3::from(c + d));
        }
    }
    let tris = (0..n as u32).map(|t| [3 * t, 3 * t + 1, 3 * t + 2]).collect();
    TriangleMesh::new(verts, tris).expect("finite soup")
}

pub fn brute_nearest_squared(from: &[Point3<f64>], to: &[Point3<f64>]) -> Vec<f64> {
    from.iter()
        .map(|p| to.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min))
        .collect()
}

pub fn brute_chamfer(a: &[Point3<f64>], b: &[Point3<f64>]) -> f64 {
    let ab = brute_nearest_squared(a, b);
    let ba = brute_nearest_squared(b, a);
    ab.iter().sum::<f64>() / ab.len() as f64 + ba.iter().sum::<f64>() / ba.len() as f64
}

pub fn brute_f_score(a: &[Point3<f64>], b: &[Point3<f64>], d: f64) -> f64 {
    let within = |v: Vec<f64>| v.iter().filter(|&&x| x <= d * d).count() as f64 / v.len() as f64;
    let p = within(brute_nearest_squared(a, b));
    let r = within(brute_nearest_squared(b, a));
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Greedy farthest-point order starting at `first`: each step rescans the
/// picked set for every candidate. Ties go to the lower index.
pub fn brute_fps(points: &[Point3<f64>], k: usize, first: usize) -> Vec<usize> {
    let mut picked = vec![first];
    while picked.len() < k {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for (i, p) in points.iter().enumerate() {
            if picked.contains(&i) {
                continue;
            }
            let d = picked.iter().map(|&j| (p - points[j]).norm_squared()).fold(f64::INFINITY, f64::min);
            if d > best.1 {
                best = (i, d);
            }
        }
        picked.push(best.0);
    }
    picked
}

/// Mean matched Euclidean distance of a min-cost perfect matching, found by
/// successive shortest paths with Bellman-Ford on the residual graph.
pub fn flow_emd(a: &[Point3<f64>], b: &[Point3<f64>]) -> f64 {
    let n = a.len();
    assert_eq!(n, b.len());
    // nodes: source 0, rows 1..=n, cols n+1..=2n, sink 2n+1
    let (s, t) = (0, 2 * n + 1);
    let mut to = Vec::new();
    let mut cap = Vec::new();
    let mut cost = Vec::new();
    let mut adj = vec![Vec::new(); 2 * n + 2];
    let mut add = |u: usize, v: usize, c: f64, adj: &mut Vec<Vec<usize>>| {
        adj[u].push(to.len());
        to.push(v);
        cap.push(1i32);
        cost.push(c);
        adj[v].push(to.len());
        to.push(u);
        cap.push(0);
        cost.push(-c);
    };
    for i in 0..n {
        add(s, 1 + i, 0.0, &mut adj);
        add(n + 1 + i, t, 0.0, &mut adj);
        for j in 0..n {
            add(1 + i, n + 1 + j, (a[i] - b[j]).norm(), &mut adj);
        }
    }
    let mut total = 0.0;
    for _ in 0..n {
        let mut dist = vec![f64::INFINITY; 2 * n + 2];
        let mut prev = vec![usize::MAX; 2 * n + 2];
        dist[s] = 0.0;
        for _ in 0..2 * n + 2 {
            let mut changed = false;
            for u in 0..2 * n + 2 {
                if dist[u] == f64::INFINITY {
                    continue;
                }
                for &e in &adj[u] {
                    if cap[e] > 0 && dist[u] + cost[e] < dist[to[e]] - 1e-15 {
                        dist[to[e]] = dist[u] + cost[e];
                        prev[to[e]] = e;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut v = t;
        while v != s {
            let e = prev[v];
            cap[e] -= 1;
            cap[e ^ 1] += 1;
            total += cost[e];
            v = to[e ^ 1];
        }
    }
    total / n as f64
}

fn seg_dist2(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm_squared()
}

/// Point-triangle distance by plane projection plus edge segments.
pub fn point_triangle_distance(p: &Point3<f64>, [a, b, c]: &[Point3<f64>; 3]) -> f64 {
    let n = (b - a).cross(&(c - a));
    let nn = n.norm_squared();
    let edges = seg_dist2(p, a, b).min(seg_dist2(p, b, c)).min(seg_dist2(p, c, a));
    if nn == 0.0 {
        return edges.sqrt();
    }
    let q = p - n * ((p - a).dot(&n) / nn);
    let inside = [(a, b), (b, c), (c, a)]
        .iter()
        .all(|(u, v)| (*v - *u).cross(&(q - *u)).dot(&n) >= 0.0);
    if inside {
        (p - q).norm().min(edges.sqrt())
    } else {
        edges.sqrt()
    }
}

pub fn brute_udf(mesh: &TriangleMesh, p: &Point3<f64>) -> f64 {
    (0..mesh.triangles().len())
        .map(|t| point_triangle_distance(p, &mesh.triangle(t)))
        .fold(f64::INFINITY, f64::min)
}

/// Signed crossing count of a fixed skew ray from `p`: the winding number of
/// a closed, consistently oriented mesh wherever the ray misses edges.
pub fn ray_winding(mesh: &TriangleMesh, p: &Point3<f64>) -> i32 {
    let d = Vector3::new(0.5773, 0.2113, 0.7887).normalize();
    let mut w = 0;
    for t in 0..mesh.triangles().len() {
        let [a, b, c] = mesh.triangle(t);
        let (e1, e2) = (b - a, c - a);
        let h = d.cross(&e2);
        let det = e1.dot(&h);
        if det.abs() < 1e-14 {
            continue;
        }
        let s = p - a;
        let u = s.dot(&h) / det;
        let q = s.cross(&e1);
        let v = d.dot(&q) / det;
        let tt = e2.dot(&q) / det;
        if u < 0.0 || v < 0.0 || u + v > 1.0 || tt <= 0.0 {
            continue;
        }
        // ray leaving through an outward face counts +1
        w += if e1.cross(&e2).dot(&d) > 0.0 { 1 } else { -1 };
    }
    w
}
