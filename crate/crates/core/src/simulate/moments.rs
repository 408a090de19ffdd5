use serde::{Deserialize, Serialize};

use super::bundle::PathBundle;

/// Sample moments of the running sup-norm `‖X‖_T = max_i |X_{t_i}|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub n_paths: usize,
    pub n_steps: usize,
    pub sup_p2: f64,
    pub sup_p2_se: f64,
    pub sup_p4: f64,
    pub sup_p4_se: f64,
    /// Mean and sample variance of the first coordinate at the horizon.
    pub terminal_mean: f64,
    pub terminal_var: f64,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let m = v.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}

pub fn moment_report(b: &PathBundle) -> MomentReport {
    let mut sup = Vec::with_capacity(b.n_paths);
    let mut term = Vec::with_capacity(b.n_paths);
    for p in 0..b.n_paths {
        let mut m: f64 = 0.0;
        for i in 0..=b.n_steps {
            let x = b.disp(p, i);
            m = m.max(x.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        sup.push(m);
        term.push(b.disp(p, b.n_steps)[0]);
    }
    let p2: Vec<f64> = sup.iter().map(|m| m * m).collect();
    let p4: Vec<f64> = p2.iter().map(|m| m * m).collect();
    let (sup_p2, sup_p2_se) = mean_se(&p2);
    let (sup_p4, sup_p4_se) = mean_se(&p4);
    let (terminal_mean, tse) = mean_se(&term);
    let n = term.len();
    MomentReport {
        n_paths: b.n_paths,
        n_steps: b.n_steps,
        sup_p2,
        sup_p2_se,
        sup_p4,
        sup_p4_se,
        terminal_mean,
        terminal_var: tse * tse * n as f64,
    }
}

/// `max_{p,i} |X_i − X′_i|` for two bundles of the same shape.
pub fn common_noise_gap(a: &PathBundle, b: &PathBundle) -> f64 {
    assert_eq!((a.n_paths, a.n_steps, a.dim), (b.n_paths, b.n_steps, b.dim));
    let mut gap: f64 = 0.0;
    for p in 0..a.n_paths {
        for i in 0..=a.n_steps {
            for (x, y) in a.disp(p, i).iter().zip(b.disp(p, i)) {
                gap = gap.max((x - y).abs());
            }
        }
    }
    gap
}
