//! Reference computations for the integration tests. Nothing here calls the
//! library's solvers; only its data types are shared.
#![allow(dead_code)]

use marc_core::{
    build_geometry_ensemble, ChannelConfig, FadingEnsemble, GainState, NodeGeometry, Point,
    PowerPolicy,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `bw · log2(1 + x / bw)`, written without `ln_1p`.
pub fn cap(bw: f64, x: f64) -> f64 {
    bw * (1.0 + x / bw).log2()
}

/// `[T1, T2, T3, T4]` accumulated state by state in reverse order:
/// relay sum, destination sum plus link, `R1r + R2d + link`, `R1d + R2r + link`.
pub fn reverse_bounds(p: &PowerPolicy, e: &FadingEnsemble, cfg: &ChannelConfig) -> [f64; 4] {
    let (th, thb) = (cfg.theta, 1.0 - cfg.theta);
    let mut t = [0.0; 4];
    for i in (0..e.len()).rev() {
        let w = e.weights()[i];
        let s = &e.states()[i];
        let (p1, p2, pr) = (p.p1[i], p.p2[i], p.pr[i]);
        let link = cap(thb, s.g_dr * pr);
        t[0] += w * cap(th, s.g_r1 * p1 + s.g_r2 * p2);
        t[1] += w * (cap(th, s.g_d1 * p1 + s.g_d2 * p2) + link);
        t[2] += w * (cap(th, s.g_r1 * p1) + cap(th, s.g_d2 * p2) + link);
        t[3] += w * (cap(th, s.g_d1 * p1) + cap(th, s.g_r2 * p2) + link);
    }
    t
}

/// Max `R1 + R2` over `{R ≥ 0, R1 ≤ a1, R2 ≤ a2, R1 + R2 ≤ s, R1 ≤ b1, R2 ≤ b2,
/// R1 + R2 ≤ t}` by enumerating vertices of the constraint lines.
pub fn polygon_max(relay: [f64; 3], dest: [f64; 3]) -> f64 {
    // rows (c1, c2, rhs) meaning c1·R1 + c2·R2 ≤ rhs
    let rows = [
        (1.0, 0.0, relay[0]),
        (0.0, 1.0, relay[1]),
        (1.0, 1.0, relay[2]),
        (1.0, 0.0, dest[0]),
        (0.0, 1.0, dest[1]),
        (1.0, 1.0, dest[2]),
        (-1.0, 0.0, 0.0),
        (0.0, -1.0, 0.0),
    ];
    let feasible = |x: f64, y: f64| {
        rows.iter()
            .all(|&(a, b, c)| a * x + b * y <= c + 1e-12 * (1.0 + c.abs()))
    };
    let mut best = f64::NEG_INFINITY;
    for (i, &(a1, b1, c1)) in rows.iter().enumerate() {
        for &(a2, b2, c2) in &rows[i + 1..] {
            let det = a1 * b2 - a2 * b1;
            if det.abs() < 1e-15 {
                continue;
            }
            let x = (c1 * b2 - c2 * b1) / det;
            let y = (a1 * c2 - a2 * c1) / det;
            if feasible(x, y) {
                best = best.max(x + y);
            }
        }
    }
    best
}

/// Water-filling by scanning the level on a log grid, then bisecting the
/// bracketing cell. Returns powers and `ν = bw / (level · ln 2)`.
pub fn waterfill_scan(gains: &[f64], weights: &[f64], budget: f64, bw: f64) -> (Vec<f64>, f64) {
    let powers = |level: f64| -> Vec<f64> {
        gains
            .iter()
            .map(|&g| {
                if g > 0.0 {
                    (level - bw / g).max(0.0)
                } else {
                    0.0
                }
            })
            .collect()
    };
    let used = |level: f64| -> f64 { powers(level).iter().zip(weights).map(|(p, w)| p * w).sum() };
    let mut lo = 1e-12;
    let mut hi = lo;
    for k in 0..4000 {
        hi = 1e-12 * 1.02f64.powi(k);
        if used(hi) >= budget {
            break;
        }
        lo = hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if used(mid) < budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let level = 0.5 * (lo + hi);
    (powers(level), bw / (level * std::f64::consts::LN_2))
}

/// Per-state Lagrangian in bits: `Σ_b w_b · term_b − ν · P` for the bound
/// weights `w` over `[T1, T2, T3, T4]` (relay link omitted).
pub fn state_lagrangian_bits(
    s: &GainState,
    w: [f64; 4],
    nu: [f64; 2],
    p: [f64; 2],
    theta: f64,
) -> f64 {
    let [p1, p2] = p;
    let terms = [
        cap(theta, s.g_r1 * p1 + s.g_r2 * p2),
        cap(theta, s.g_d1 * p1 + s.g_d2 * p2),
        cap(theta, s.g_r1 * p1) + cap(theta, s.g_d2 * p2),
        cap(theta, s.g_d1 * p1) + cap(theta, s.g_r2 * p2),
    ];
    let rate: f64 = w.iter().zip(terms).map(|(a, b)| a * b).sum();
    rate - nu[0] * p1 - nu[1] * p2
}

/// Largest Lagrangian over a `steps × steps` grid on `[0, pmax]²`.
pub fn grid_max(
    s: &GainState,
    w: [f64; 4],
    nu: [f64; 2],
    theta: f64,
    pmax: [f64; 2],
    steps: usize,
) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for i in 0..steps {
        let p1 = pmax[0] * i as f64 / (steps - 1) as f64;
        for j in 0..steps {
            let p2 = pmax[1] * j as f64 / (steps - 1) as f64;
            best = best.max(state_lagrangian_bits(s, w, nu, [p1, p2], theta));
        }
    }
    best
}

/// Beyond this power every term's marginal is below its price, so the
/// per-state maximizer lies in `[0, p_cap]`.
pub fn power_cap(s: &GainState, w: [f64; 4], nu: [f64; 2], theta: f64) -> [f64; 2] {
    let l2 = std::f64::consts::LN_2;
    let g1 = s.g_r1.max(s.g_d1);
    let g2 = s.g_r2.max(s.g_d2);
    let total: f64 = w.iter().sum::<f64>() * 2.0;
    // each derivative ≤ total · θ / ln2 / (θ/g + p)
    [(g1, nu[0]), (g2, nu[1])].map(|(g, n)| {
        if g <= 0.0 {
            0.0
        } else {
            (total * theta / (l2 * n) - theta / g).max(0.0)
        }
    })
}

/// Sum rate with source 2 silent, by duality over the two binding bounds:
/// `min_β max_P (1 − β)·R1r(P) + β·(R1d(P) + L)`, with `L` the relay link's
/// water-filling rate. Golden section over β, bisection on the price.
pub fn single_user_sum_rate(e: &FadingEnsemble, cfg: &ChannelConfig) -> f64 {
    let th = cfg.theta;
    let thb = 1.0 - th;
    let w = e.weights();
    let gdr: Vec<f64> = e.states().iter().map(|s| s.g_dr).collect();
    let link = if cfg.pr > 0.0 {
        let (pr, _) = waterfill_scan(&gdr, w, cfg.pr, thb);
        pr.iter()
            .zip(&gdr)
            .zip(w)
            .map(|((p, g), wi)| wi * cap(thb, g * p))
            .sum()
    } else {
        0.0
    };
    let l2 = std::f64::consts::LN_2;
    let pair = |beta: f64, p: f64, s: &GainState| {
        (1.0 - beta) * cap(th, s.g_r1 * p) + beta * cap(th, s.g_d1 * p)
    };
    // derivative of `pair` in p
    let slope = |beta: f64, p: f64, s: &GainState| {
        (1.0 - beta) * s.g_r1 / (l2 * (1.0 + s.g_r1 * p / th))
            + beta * s.g_d1 / (l2 * (1.0 + s.g_d1 * p / th))
    };
    let best_power = |beta: f64, price: f64, s: &GainState| -> f64 {
        if slope(beta, 0.0, s) <= price {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while slope(beta, hi, s) > price {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope(beta, mid, s) > price {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let dual = |beta: f64| -> f64 {
        if cfg.p1 <= 0.0 {
            return beta * link;
        }
        let used = |price: f64| -> f64 {
            e.iter()
                .map(|(wi, s)| wi * best_power(beta, price, s))
                .sum()
        };
        let (mut lo, mut hi) = (1e-12, 1.0);
        while used(hi) > cfg.p1 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if used(mid) > cfg.p1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let price = (lo * hi).sqrt();
        let rate: f64 = e
            .iter()
            .map(|(wi, s)| wi * pair(beta, best_power(beta, price, s), s))
            .sum();
        rate + price * (cfg.p1 - used(price)) + beta * link
    };
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (dual(c), dual(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = dual(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = dual(d);
        }
    }
    dual(0.0).min(dual(1.0)).min(fc.min(fd))
}

/// A randomized fixture: geometry in the unit square, γ ∈ [2, 4],
/// budgets in [0.1, 10], θ ∈ {0.25, 0.5, 0.75}, 4 to 64 states.
pub fn random_fixture(rng: &mut ChaCha8Rng) -> (FadingEnsemble, ChannelConfig) {
    let mut pt = || Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let (source1, source2, relay, destination) = (pt(), pt(), pt(), pt());
    let g = NodeGeometry {
        source1,
        source2,
        relay,
        destination,
        path_loss_exponent: rng.random_range(2.0..4.0),
    };
    let n = rng.random_range(4..=64);
    let theta = [0.25, 0.5, 0.75][rng.random_range(0..3)];
    let mut b = || rng.random_range(0.1..10.0);
    let cfg = ChannelConfig::new(theta, b(), b(), b()).unwrap();
    let e = build_geometry_ensemble(&g, n, rng.random()).unwrap();
    (e, cfg)
}

/// Random positive gains, each exponential-like with a random scale.
pub fn random_state(rng: &mut ChaCha8Rng) -> GainState {
    let mut g = || {
        let scale = 10f64.powf(rng.random_range(-1.0..1.0));
        -scale * (1.0 - rng.random::<f64>()).ln()
    };
    GainState::new(g(), g(), g(), g(), g())
}

pub fn random_ensemble(rng: &mut ChaCha8Rng, n: usize) -> FadingEnsemble {
    FadingEnsemble::uniform((0..n).map(|_| random_state(rng)).collect()).unwrap()
}

/// A random policy meeting every budget with equality.
pub fn random_policy(rng: &mut ChaCha8Rng, e: &FadingEnsemble, cfg: &ChannelConfig) -> PowerPolicy {
    let mut p = PowerPolicy::zeros(e.len());
    for (v, budget) in [
        (&mut p.p1, cfg.p1),
        (&mut p.p2, cfg.p2),
        (&mut p.pr, cfg.pr),
    ] {
        for x in v.iter_mut() {
            *x = rng.random_range(0.05..1.0);
        }
        let used: f64 = v.iter().zip(e.weights()).map(|(x, w)| x * w).sum();
        for x in v.iter_mut() {
            *x *= budget / used;
        }
    }
    p
}

/// Central difference of `f` at `x` along coordinate `i`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut a = x.to_vec();
    let mut b = x.to_vec();
    a[i] += h;
    b[i] -= h;
    (f(&a) - f(&b)) / (2.0 * h)
}

/// A sources-near-relay geometry with the destination at (1, 0).
pub fn sources_near_relay() -> NodeGeometry {
    NodeGeometry {
        source1: Point::new(0.2, 0.2),
        source2: Point::new(0.1, -0.2),
        relay: Point::new(0.0, 0.0),
        destination: Point::new(1.0, 0.0),
        path_loss_exponent: 2.0,
    }
}

/// First index `i` whose step `|y[i+1] − y[i]|` exceeds `factor` times the
/// largest of the neighbouring steps `i ± 1, i ± 2` (plus `abs_tol`).
pub fn first_jump(y: &[f64], factor: f64, abs_tol: f64) -> Option<usize> {
    let d: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    (0..d.len()).find(|&i| {
        let local = [i.wrapping_sub(2), i.wrapping_sub(1), i + 1, i + 2]
            .into_iter()
            .filter_map(|j| d.get(j))
            .fold(0.0f64, |a, &b| a.max(b));
        d[i] > factor * local + abs_tol
    })
}
