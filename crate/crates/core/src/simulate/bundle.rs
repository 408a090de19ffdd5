use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::policy::ControlPolicy;
use crate::error::{domain, Result};
use crate::model::ProblemData;
use crate::path_space::{DiscretePath, PathPoint, PathState};

/// Independent Gaussian stream for path `p`. Antithetic partners share a
/// stream, so every draw is a pure function of `(seed, p, step)`.
pub fn path_rng(seed: u64, path: usize, antithetic: bool) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(if antithetic { (path / 2) as u64 } else { path as u64 });
    rng
}

/// Simulated controlled paths `X^{t,ω,k}` on `[t, T]`, stored as
/// displacements from the base point together with absolute running
/// extrema.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub base: PathState,
    pub t0: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub dim: usize,
    pub seed: u64,
    pub antithetic: bool,
    pub policy: ControlPolicy,
    disp: Vec<f64>,
    run_max: Vec<f64>,
    run_min: Vec<f64>,
    controls: Vec<u32>,
}

impl PathBundle {
    #[inline]
    fn at(&self, p: usize, i: usize) -> usize {
        (p * (self.n_steps + 1) + i) * self.dim
    }

    /// Displacement `X_{t_i} − X_t` of path `p`.
    #[inline]
    pub fn disp(&self, p: usize, i: usize) -> &[f64] {
        let a = self.at(p, i);
        &self.disp[a..a + self.dim]
    }

    /// Absolute first coordinate.
    #[inline]
    pub fn x1(&self, p: usize, i: usize) -> f64 {
        self.base.x[0] + self.disp[self.at(p, i)]
    }

    #[inline]
    pub fn control(&self, p: usize, i: usize) -> usize {
        self.controls[p * self.n_steps.max(1) + i] as usize
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Absolute features of the stopped path at step `i`.
    pub fn state(&self, p: usize, i: usize) -> PathState {
        let mut st = self.base.clone();
        self.fill_state(p, i, &mut st);
        st
    }

    /// Overwrites `st` (already of the right dimension) with the state of
    /// path `p` at step `i`.
    #[inline]
    pub fn fill_state(&self, p: usize, i: usize, st: &mut PathState) {
        let a = self.at(p, i);
        st.t = self.time(i);
        for c in 0..self.dim {
            st.x[c] = self.base.x[c] + self.disp[a + c];
            st.run_max[c] = self.run_max[a + c];
            st.run_min[c] = self.run_min[a + c];
        }
    }

    pub fn path(&self, p: usize) -> DiscretePath {
        let a = self.at(p, 0);
        let b = self.at(p, self.n_steps) + self.dim;
        DiscretePath::new(self.t0, self.dt.max(1e-300), self.dim, self.disp[a..b].to_vec())
            .expect("bundle paths start at the origin")
    }

    /// Long-format CSV: `path, step, time, control, x_1..x_d` (displacements).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["path".to_string(), "step".into(), "time".into(), "control".into()];
        header.extend((1..=self.dim).map(|c| format!("x_{c}")));
        wtr.write_record(&header)?;
        for p in 0..self.n_paths {
            for i in 0..=self.n_steps {
                let k = if i < self.n_steps { self.control(p, i).to_string() } else { String::new() };
                let mut rec = vec![p.to_string(), i.to_string(), format!("{}", self.time(i)), k];
                rec.extend(self.disp(p, i).iter().map(|v| format!("{v}")));
                wtr.write_record(&rec)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Euler scheme `X_{i+1} = X_i + σ(k_i)·ΔW_i` from `base` to the horizon,
/// with antithetic pairs.
pub fn euler_bundle(
    data: &ProblemData,
    base: &PathPoint,
    policy: &ControlPolicy,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathBundle> {
    euler_bundle_from_state(data, &base.state(), policy, n_steps, n_paths, seed, true)
}

/// [`euler_bundle`] from explicit path features, with antithetics optional.
pub fn euler_bundle_from_state(
    data: &ProblemData,
    base: &PathState,
    policy: &ControlPolicy,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    antithetic: bool,
) -> Result<PathBundle> {
    let dim = data.dim();
    if base.dim() != dim {
        return Err(domain("base point and problem differ in dimension"));
    }
    if base.t > data.horizon + 1e-12 {
        return Err(domain(format!("base time {} is past the horizon", base.t)));
    }
    policy.check(data.controls.len())?;
    let dt = if n_steps == 0 { 0.0 } else { (data.horizon - base.t) / n_steps as f64 };
    let stride = (n_steps + 1) * dim;
    let mut disp = vec![0.0; n_paths * stride];
    let mut run_max = vec![0.0; n_paths * stride];
    let mut run_min = vec![0.0; n_paths * stride];
    let mut controls = vec![0u32; n_paths * n_steps.max(1)];
    let sq = dt.sqrt();

    disp.par_chunks_mut(stride.max(1))
        .zip(run_max.par_chunks_mut(stride.max(1)))
        .zip(run_min.par_chunks_mut(stride.max(1)))
        .zip(controls.par_chunks_mut(n_steps.max(1)))
        .enumerate()
        .for_each(|(p, (((xs, mx), mn), ks))| {
            let mut rng = path_rng(seed, p, antithetic);
            let sign = if antithetic && p % 2 == 1 { -1.0 } else { 1.0 };
            let mut dw = vec![0.0; dim];
            let mut abs = base.x.to_vec();
            mx[..dim].copy_from_slice(&base.run_max);
            mn[..dim].copy_from_slice(&base.run_min);
            for i in 0..n_steps {
                let k = policy.control(i, &abs);
                ks[i] = k as u32;
                for w in dw.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *w = sign * sq * z;
                }
                let s = data.controls.sigma(k);
                for c in 0..dim {
                    let mut inc = 0.0;
                    for j in 0..dim {
                        inc += s[(c, j)] * dw[j];
                    }
                    let (a, b) = (i * dim + c, (i + 1) * dim + c);
                    xs[b] = xs[a] + inc;
                    abs[c] = base.x[c] + xs[b];
                    mx[b] = mx[a].max(abs[c]);
                    mn[b] = mn[a].min(abs[c]);
                }
            }
        });

    Ok(PathBundle {
        base: base.clone(),
        t0: base.t,
        dt,
        n_steps,
        n_paths,
        dim,
        seed,
        antithetic,
        policy: policy.clone(),
        disp,
        run_max,
        run_min,
        controls,
    })
}
