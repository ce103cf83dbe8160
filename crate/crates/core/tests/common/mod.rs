//! Independent reference implementations shared by the integration tests and
//! the acceptance runner. They favor brute force over speed.

#![allow(dead_code)]

use rand::Rng;
use tomtalk_core::perception::Tensor;
use tomtalk_core::rewards::RewardParams;
use tomtalk_core::socialgraph::{Catalog, GeoPoint, SocialGraph, UserId, UserProfile};

/// Zero-padded "same" cross-correlation written against a materialized
/// padded copy of the input, `w[ky][kx][ci][co]`.
pub fn naive_conv_same(input: &Tensor, w: &[Vec<Vec<Vec<f64>>>]) -> Vec<f64> {
    let (h, wd, cin) = input.shape();
    let k = w.len();
    let pad = k / 2;
    let cout = w[0][0][0].len();
    let ph = h + 2 * pad;
    let pw = wd + 2 * pad;
    let mut padded = vec![vec![vec![0.0; cin]; pw]; ph];
    for y in 0..h {
        for x in 0..wd {
            for c in 0..cin {
                padded[y + pad][x + pad][c] = input.get(y, x, c);
            }
        }
    }
    let mut out = vec![0.0; h * wd * cout];
    for y in 0..h {
        for x in 0..wd {
            for co in 0..cout {
                let mut s = 0.0;
                for ky in 0..k {
                    for kx in 0..k {
                        for ci in 0..cin {
                            s += padded[y + ky][x + kx][ci] * w[ky][kx][ci][co];
                        }
                    }
                }
                out[(y * wd + x) * cout + co] = s;
            }
        }
    }
    out
}

/// Full kernel `W[ky][kx][ci][co] = D[ky][kx][ci] * P[ci][co]`.
pub fn rank_one_kernel(
    depthwise: &[f64],
    pointwise: &[f64],
    k: usize,
    cin: usize,
    cout: usize,
) -> Vec<Vec<Vec<Vec<f64>>>> {
    (0..k)
        .map(|ky| {
            (0..k)
                .map(|kx| {
                    (0..cin)
                        .map(|ci| {
                            (0..cout)
                                .map(|co| depthwise[(ky * k + kx) * cin + ci] * pointwise[ci * cout + co])
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Users `n00..` scattered over a small box with random feature vectors;
/// each pair is linked with probability `p_edge` and `1..=4` meetups.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p_edge: f64, spread_deg: f64) -> SocialGraph {
    let catalog = Catalog {
        attributes: 2,
        preferences: 3,
    };
    let mut g = SocialGraph::new(catalog, RewardParams::default()).unwrap();
    let ids: Vec<UserId> = (0..n)
        .map(|i| {
            let loc = GeoPoint::new(
                30.0 + rng.random::<f64>() * spread_deg,
                120.0 + rng.random::<f64>() * spread_deg,
            );
            // occasional zero vectors exercise the defined zero-similarity case
            let zero = rng.random::<f64>() < 0.05;
            let mut feat = |k: usize| -> Vec<f64> {
                (0..k).map(|_| if zero { 0.0 } else { rng.random::<f64>() }).collect()
            };
            let (a, p) = (feat(2), feat(3));
            g.add_user(UserProfile::new(format!("n{i:02}"), loc).with_features(a, p))
                .unwrap()
        })
        .collect();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p_edge {
                let t = rng.random_range(0..10);
                for _ in 0..rng.random_range(1..=4) {
                    g.record_meetup(&ids[i], &ids[j], t).unwrap();
                }
            }
        }
    }
    g
}

pub fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}

pub fn oracle_similarity(g: &SocialGraph, u: &UserId, v: &UserId) -> f64 {
    let (a, b) = (g.user(u).unwrap(), g.user(v).unwrap());
    let fa: Vec<f64> = a.preferences.iter().chain(&a.attributes).copied().collect();
    let fb: Vec<f64> = b.preferences.iter().chain(&b.attributes).copied().collect();
    oracle_cosine(&fa, &fb)
}

/// `(n_i, m_i)` of the components of the subgraph induced on the common
/// neighbors, found by transitive closure of the adjacency matrix; sorted.
pub fn oracle_components(g: &SocialGraph, u: &UserId, v: &UserId) -> Vec<(usize, usize)> {
    let common: Vec<UserId> = g
        .user_ids()
        .filter(|w| *w != u && *w != v && g.are_adjacent(w, u) && g.are_adjacent(w, v))
        .cloned()
        .collect();
    let k = common.len();
    let adj = |i: usize, j: usize| g.are_adjacent(&common[i], &common[j]);
    let mut reach = vec![vec![false; k]; k];
    for i in 0..k {
        for j in 0..k {
            reach[i][j] = i == j || adj(i, j);
        }
    }
    for m in 0..k {
        for i in 0..k {
            for j in 0..k {
                if reach[i][m] && reach[m][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    let mut seen = vec![false; k];
    let mut out = Vec::new();
    for i in 0..k {
        if seen[i] {
            continue;
        }
        let members: Vec<usize> = (0..k).filter(|&j| reach[i][j]).collect();
        for &j in &members {
            seen[j] = true;
        }
        let mut edges = 0;
        for a in 0..members.len() {
            for b in a + 1..members.len() {
                if adj(members[a], members[b]) {
                    edges += 1;
                }
            }
        }
        out.push((members.len(), edges));
    }
    out.sort();
    out
}

/// Eq. (3) evaluated from scratch; `None` without common neighbors.
pub fn oracle_network_score(g: &SocialGraph, u: &UserId, v: &UserId, alpha: f64) -> Option<f64> {
    let comps = oracle_components(g, u, v);
    if comps.is_empty() {
        return None;
    }
    let structure: f64 = comps.iter().map(|&(n, m)| (n * (m + 1)) as f64).sum();
    let mut affinity = oracle_similarity(g, u, v);
    for w in g.user_ids() {
        if w != u && w != v && g.are_adjacent(w, u) && g.are_adjacent(w, v) {
            affinity += (oracle_similarity(g, w, u) + oracle_similarity(g, w, v)) / 2.0;
        }
    }
    Some(alpha * structure + (1.0 - alpha) * affinity)
}

/// Haversine distance written independently of the library.
pub fn oracle_distance_km(g: &SocialGraph, u: &UserId, v: &UserId) -> f64 {
    let (a, b) = (g.user(u).unwrap().location, g.user(v).unwrap().location);
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * 6371.0088 * h.sqrt().min(1.0).asin()
}

/// Integrates `y'' + 2 z w y' + w^2 y = w^2 input` from rest with RK4.
pub fn rk4_step_response(input: f64, z: f64, w: f64, tau: f64, steps: usize) -> f64 {
    let h = tau / steps as f64;
    let f = |y: f64, v: f64| (v, w * w * (input - y) - 2.0 * z * w * v);
    let (mut y, mut v) = (0.0, 0.0);
    for _ in 0..steps {
        let (k1y, k1v) = f(y, v);
        let (k2y, k2v) = f(y + 0.5 * h * k1y, v + 0.5 * h * k1v);
        let (k3y, k3v) = f(y + 0.5 * h * k2y, v + 0.5 * h * k2v);
        let (k4y, k4v) = f(y + h * k3y, v + h * k3v);
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    y
}
