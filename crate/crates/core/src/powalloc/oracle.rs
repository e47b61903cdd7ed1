//! Exhaustive grid search over per-user coefficients, used to validate the
//! allocator. Everything is in `a = rho * gamma` units with SIC threshold `tau`.

use std::f64::consts::LN_2;

/// Unweighted cluster sum rate for coefficients in decoding order.
pub fn cluster_rate(a: &[f64], omegas: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut total = 0.0;
    for (l, &om) in omegas.iter().enumerate() {
        total += (a[l] * om / (1.0 + a[l] * s)).ln_1p() / LN_2;
        s += om;
    }
    total
}

/// QoS and SIC conditions with a `1e-12` slack.
pub fn satisfies(a: &[f64], omegas: &[f64], r_qos: f64, tau: f64) -> bool {
    let mut s = 0.0;
    for (l, &om) in omegas.iter().enumerate() {
        let rate = (a[l] * om / (1.0 + a[l] * s)).ln_1p() / LN_2;
        if rate < r_qos - 1e-12 {
            return false;
        }
        if l > 0 && a[l - 1] * (om - s) < tau - 1e-12 {
            return false;
        }
        s += om;
    }
    true
}

/// Best feasible rate with total coefficient at most `j * step`, for `j = 0..=n`.
/// Entries with no feasible grid point are `-inf`. Supports up to three users.
pub fn budget_curve(a: &[f64], r_qos: f64, tau: f64, step: f64, n: usize) -> Vec<f64> {
    assert!((1..=3).contains(&a.len()), "grid oracle handles one to three users");
    let mut best = vec![f64::NEG_INFINITY; n + 1];
    let mut visit = |idx: &[usize]| {
        let omegas: Vec<f64> = idx.iter().map(|&i| i as f64 * step).collect();
        if satisfies(a, &omegas, r_qos, tau) {
            let j: usize = idx.iter().sum();
            let r = cluster_rate(a, &omegas);
            if r > best[j] {
                best[j] = r;
            }
        }
    };
    match a.len() {
        1 => (0..=n).for_each(|i| visit(&[i])),
        2 => {
            for i in 0..=n {
                for k in 0..=n - i {
                    visit(&[i, k]);
                }
            }
        }
        _ => {
            for i in 0..=n {
                for k in 0..=n - i {
                    for t in 0..=n - i - k {
                        visit(&[i, k, t]);
                    }
                }
            }
        }
    }
    for j in 1..=n {
        best[j] = best[j].max(best[j - 1]);
    }
    best
}

/// Exhaustive search of one cluster under `budget`; returns the best rate and
/// its coefficients (empty when nothing on the grid is feasible).
pub fn bruteforce_cluster_oracle(
    a: &[f64],
    r_qos: f64,
    tau: f64,
    budget: f64,
    step: f64,
) -> (f64, Vec<f64>) {
    assert!((1..=3).contains(&a.len()), "grid oracle handles one to three users");
    let n = (budget / step + 1e-9).floor() as usize;
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut idx = vec![0usize; a.len()];
    loop {
        let omegas: Vec<f64> = idx.iter().map(|&i| i as f64 * step).collect();
        if satisfies(a, &omegas, r_qos, tau) {
            let r = cluster_rate(a, &omegas);
            if r > best.0 {
                best = (r, omegas);
            }
        }
        // Odometer over index vectors with sum <= n.
        let mut pos = a.len();
        loop {
            if pos == 0 {
                return best;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx.iter().sum::<usize>() <= n {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Best weighted sum rate of two clusters sharing a unit budget on the grid.
pub fn two_cluster_oracle(
    clusters: [(&[f64], f64); 2],
    r_qos: f64,
    tau: f64,
    step: f64,
) -> f64 {
    let n = (1.0 / step).round() as usize;
    let g0 = budget_curve(clusters[0].0, r_qos, tau, step, n);
    let g1 = budget_curve(clusters[1].0, r_qos, tau, step, n);
    (0..=n)
        .map(|j| clusters[0].1 * g0[j] + clusters[1].1 * g1[n - j])
        .fold(f64::NEG_INFINITY, f64::max)
}
