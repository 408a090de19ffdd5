use std::io::{Read, Write};

use super::{euclid, Coords, PathState, TIME_EPS};
use crate::error::{domain, Error, Result};

/// A path sampled on a uniform grid `t0, t0 + dt, ...` with values in `R^d`.
///
/// The first value is always the zero vector: paths live on the shifted
/// canonical space starting from the origin at `t0`. Between grid points the
/// path is read as its linear interpolant, and it is extended constantly on
/// both sides of its span.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    t0: f64,
    dt: f64,
    dim: usize,
    values: Vec<f64>,
}

impl DiscretePath {
    /// Builds a path from flattened values (`len * dim` entries).
    pub fn new(t0: f64, dt: f64, dim: usize, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(domain(format!("time step must be positive, got {dt}")));
        }
        if dim == 0 || values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(domain("value buffer does not hold whole points"));
        }
        if values[..dim].iter().any(|v| v.abs() > 1e-12) {
            return Err(domain("a path must start at the origin"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(domain("path values must be finite"));
        }
        Ok(Self { t0, dt, dim, values })
    }

    pub fn zeros(t0: f64, dt: f64, n_steps: usize, dim: usize) -> Self {
        Self { t0, dt, dim, values: vec![0.0; (n_steps + 1) * dim] }
    }

    /// Builds a path from a closure evaluated at each grid time. The value at
    /// `t0` is forced to zero.
    pub fn from_fn(t0: f64, dt: f64, n_steps: usize, dim: usize, mut f: impl FnMut(f64, &mut [f64])) -> Result<Self> {
        let mut values = vec![0.0; (n_steps + 1) * dim];
        for i in 1..=n_steps {
            f(t0 + i as f64 * dt, &mut values[i * dim..(i + 1) * dim]);
        }
        Self::new(t0, dt, dim, values)
    }

    /// Straight line with the given velocity.
    pub fn linear(t0: f64, dt: f64, n_steps: usize, slope: &[f64]) -> Self {
        let dim = slope.len();
        let mut values = vec![0.0; (n_steps + 1) * dim];
        for i in 0..=n_steps {
            for c in 0..dim {
                values[i * dim + c] = slope[c] * (i as f64 * dt);
            }
        }
        Self { t0, dt, dim, values }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_steps(&self) -> usize {
        self.len() - 1
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.n_steps())
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// True when the grid fits inside `[t0, horizon]` up to half a step.
    pub fn fits_horizon(&self, horizon: f64) -> bool {
        self.end_time() <= horizon + 0.5 * self.dt
    }

    /// Nearest grid index to `t`; fails when `t` is outside the span by more
    /// than half a step.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let pos = (t - self.t0) / self.dt;
        if pos < -0.5 - TIME_EPS || pos > self.n_steps() as f64 + 0.5 + TIME_EPS {
            return Err(domain(format!("time {t} outside the path span [{}, {}]", self.t0, self.end_time())));
        }
        Ok((pos.round().max(0.0) as usize).min(self.n_steps()))
    }

    /// Grid index of `t` when `t` is a grid time (up to rounding).
    pub fn grid_index(&self, t: f64) -> Result<usize> {
        let i = self.index_of(t)?;
        if (self.time(i) - t).abs() > TIME_EPS * self.dt.max(1.0) * 10.0 {
            return Err(domain(format!("time {t} is not on the path grid")));
        }
        Ok(i)
    }

    /// Value of the linear interpolant at `t` (constant outside the span).
    pub fn value_at(&self, t: f64, out: &mut [f64]) {
        let pos = (t - self.t0) / self.dt;
        if pos <= 0.0 {
            out.copy_from_slice(self.point(0));
            return;
        }
        let last = self.n_steps();
        if pos >= last as f64 {
            out.copy_from_slice(self.point(last));
            return;
        }
        let i = pos.floor() as usize;
        let w = pos - i as f64;
        if w < 1e-12 {
            out.copy_from_slice(self.point(i));
            return;
        }
        let (a, b) = (self.point(i), self.point(i + 1));
        for c in 0..self.dim {
            out[c] = a[c] + w * (b[c] - a[c]);
        }
    }

    pub fn value_vec(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.value_at(t, &mut out);
        out
    }

    /// Features of the stopped path at grid index `i`.
    pub fn state_at(&self, i: usize) -> PathState {
        let mut st = PathState::origin(self.time(i), self.dim);
        for j in 0..=i {
            for (c, v) in self.point(j).iter().enumerate() {
                st.run_max[c] = st.run_max[c].max(*v);
                st.run_min[c] = st.run_min[c].min(*v);
            }
        }
        st.x = Coords::from_slice(self.point(i));
        st
    }

    /// Features of the stopped path at an arbitrary time `t` in the span.
    pub fn state_at_time(&self, t: f64) -> PathState {
        let pos = ((t - self.t0) / self.dt).clamp(0.0, self.n_steps() as f64);
        let i = pos.floor() as usize;
        let mut st = self.state_at(i);
        let mut cur = vec![0.0; self.dim];
        self.value_at(t, &mut cur);
        for c in 0..self.dim {
            st.run_max[c] = st.run_max[c].max(cur[c]);
            st.run_min[c] = st.run_min[c].min(cur[c]);
        }
        st.x = Coords::from_slice(&cur);
        st.t = t;
        st
    }

    /// Writes the path as CSV with columns `time, x_1, ..., x_d`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["time".to_string()];
        header.extend((1..=self.dim).map(|c| format!("x_{c}")));
        wtr.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![format!("{}", self.time(i))];
            rec.extend(self.point(i).iter().map(|v| format!("{v}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads a path written by [`DiscretePath::write_csv`]. The grid step is
    /// inferred from the first two rows and checked for uniformity.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let dim = rdr.headers()?.len().saturating_sub(1);
        if dim == 0 {
            return Err(domain("path CSV needs a time column and at least one coordinate"));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad number {s:?}: {e}")));
            times.push(parse(&rec[0])?);
            for c in 0..dim {
                values.push(parse(&rec[c + 1])?);
            }
        }
        if times.is_empty() {
            return Err(domain("empty path CSV"));
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { 1.0 };
        for w in times.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
                return Err(domain("path CSV grid is not uniform"));
            }
        }
        Self::new(times[0], dt, dim, values)
    }
}

/// A point `(t, ω)` of the space of stopped paths. Values of `path` beyond
/// `t` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub t: f64,
    pub path: DiscretePath,
}

impl PathPoint {
    pub fn new(t: f64, path: DiscretePath) -> Self {
        Self { t, path }
    }

    /// The origin `(t, 0)`.
    pub fn origin(t: f64, dim: usize) -> Self {
        Self { t, path: DiscretePath::zeros(t, 1.0, 0, dim) }
    }

    pub fn state(&self) -> PathState {
        self.path.state_at_time(self.t)
    }

    /// Stopped value `ω_{s∧t}` (linear interpolant, constant outside the span).
    fn stopped_value(&self, s: f64, out: &mut [f64]) {
        let s = if s < self.path.t0 { self.path.t0 } else { s.min(self.t) };
        self.path.value_at(s, out);
    }
}

/// The stopped path `ω_{·∧t}` on the same grid.
pub fn stop(path: &DiscretePath, t: f64) -> Result<DiscretePath> {
    let i = path.index_of(t)?;
    let dim = path.dim;
    let mut values = path.values.clone();
    let frozen: Vec<f64> = path.point(i).to_vec();
    for j in i + 1..path.len() {
        values[j * dim..(j + 1) * dim].copy_from_slice(&frozen);
    }
    Ok(DiscretePath { values, ..path.clone() })
}

/// Concatenation `l ⊗_t r`: equal to `l` before `t` and `l(t) + r(·)` after.
pub fn concat(left: &DiscretePath, right: &DiscretePath) -> Result<DiscretePath> {
    if left.dim != right.dim {
        return Err(domain("concatenated paths differ in dimension"));
    }
    if (left.dt - right.dt).abs() > 1e-12 * left.dt.max(1.0) {
        return Err(domain(format!("grid steps differ: {} vs {}", left.dt, right.dt)));
    }
    if (left.end_time() - right.t0).abs() > TIME_EPS * left.dt.max(1.0) * 10.0 {
        return Err(domain(format!("left ends at {} but right starts at {}", left.end_time(), right.t0)));
    }
    let dim = left.dim;
    let n_left = left.len();
    let mut values = Vec::with_capacity((n_left + right.len() - 1) * dim);
    values.extend_from_slice(&left.values[..(n_left - 1) * dim]);
    let anchor = left.point(n_left - 1).to_vec();
    for j in 0..right.len() {
        for c in 0..dim {
            values.push(anchor[c] + right.point(j)[c]);
        }
    }
    Ok(DiscretePath { t0: left.t0, dt: left.dt, dim, values })
}

/// Shifted path `s ↦ ω_s − ω_t` on `[t, end]`.
pub fn shift(path: &DiscretePath, t: f64) -> Result<DiscretePath> {
    let i = path.grid_index(t)?;
    let dim = path.dim;
    let base = path.point(i).to_vec();
    let mut values = Vec::with_capacity((path.len() - i) * dim);
    for j in i..path.len() {
        for c in 0..dim {
            values.push(path.point(j)[c] - base[c]);
        }
    }
    Ok(DiscretePath { t0: path.time(i), dt: path.dt, dim, values })
}

/// `d∞((t,ω),(t',ω')) = |t − t'| + sup_s |ω_{s∧t} − ω'_{s∧t'}|`.
///
/// The sup runs over the union of both grids (and the two stopping times),
/// which is exact for piecewise-linear paths.
pub fn dist_dinfty(a: &PathPoint, b: &PathPoint) -> f64 {
    let dim = a.path.dim;
    assert_eq!(dim, b.path.dim, "points of different dimension");
    let mut knots: Vec<f64> = Vec::with_capacity(a.path.len() + b.path.len() + 2);
    for p in [a, b] {
        for i in 0..p.path.len() {
            let s = p.path.time(i);
            if s <= p.t + TIME_EPS {
                knots.push(s);
            }
        }
        knots.push(p.t);
    }
    let mut va = vec![0.0; dim];
    let mut vb = vec![0.0; dim];
    let mut diff = vec![0.0; dim];
    let mut sup: f64 = 0.0;
    for &s in &knots {
        a.stopped_value(s, &mut va);
        b.stopped_value(s, &mut vb);
        for c in 0..dim {
            diff[c] = va[c] - vb[c];
        }
        sup = sup.max(euclid(&diff));
    }
    (a.t - b.t).abs() + sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_linear() -> DiscretePath {
        DiscretePath::linear(0.0, 0.1, 10, &[1.0])
    }

    #[test]
    fn stop_freezes_after_t() {
        let p = unit_linear();
        let s = stop(&p, 0.5).unwrap();
        for i in 0..=10 {
            let expect = if i <= 5 { p.point(i)[0] } else { p.point(5)[0] };
            assert_abs_diff_eq!(s.point(i)[0], expect, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(s.point(10)[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn stop_of_zero_path_is_identity() {
        let z = DiscretePath::zeros(0.0, 0.1, 10, 2);
        assert_eq!(stop(&z, 0.3).unwrap(), z);
    }

    #[test]
    fn stop_is_idempotent() {
        let p = unit_linear();
        let once = stop(&p, 0.3).unwrap();
        assert_eq!(stop(&once, 0.7).unwrap(), once);
    }

    #[test]
    fn stop_outside_span_is_domain_error() {
        assert!(matches!(stop(&unit_linear(), 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn concat_adds_left_endpoint() {
        let left = DiscretePath::zeros(0.0, 0.1, 5, 1);
        let right = DiscretePath::linear(0.5, 0.1, 5, &[2.0]);
        let c = concat(&left, &right).unwrap();
        assert_eq!(c.len(), 11);
        assert_abs_diff_eq!(c.point(10)[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn concat_with_zero_continuation_is_stop() {
        let p = unit_linear();
        let left = stop(&p, 0.4).unwrap();
        let left = DiscretePath::new(0.0, 0.1, 1, left.values()[..5].to_vec()).unwrap();
        let right = DiscretePath::zeros(0.4, 0.1, 6, 1);
        let c = concat(&left, &right).unwrap();
        assert_eq!(c, stop(&p, 0.4).unwrap());
    }

    #[test]
    fn concat_rejects_misaligned_grids() {
        let left = DiscretePath::zeros(0.0, 0.1, 5, 1);
        let right = DiscretePath::zeros(0.6, 0.1, 4, 1);
        assert!(matches!(concat(&left, &right), Err(Error::Domain(_))));
        let right = DiscretePath::zeros(0.5, 0.05, 4, 1);
        assert!(matches!(concat(&left, &right), Err(Error::Domain(_))));
    }

    #[test]
    fn shift_identity_at_start() {
        let p = unit_linear();
        assert_eq!(shift(&p, 0.0).unwrap(), p);
    }

    #[test]
    fn shift_of_slope_two_path() {
        let p = DiscretePath::linear(0.0, 0.1, 10, &[2.0]);
        let s = shift(&p, 0.5).unwrap();
        assert_abs_diff_eq!(s.t0(), 0.5, epsilon = 1e-12);
        assert_eq!(s.len(), 6);
        for i in 0..6 {
            assert_abs_diff_eq!(s.point(i)[0], 2.0 * 0.1 * i as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn shift_beyond_span_fails() {
        assert!(shift(&unit_linear(), 2.0).is_err());
    }

    #[test]
    fn shift_inverts_concat() {
        let left = DiscretePath::linear(0.0, 0.1, 4, &[-1.0]);
        let right = DiscretePath::linear(0.4, 0.1, 6, &[3.0]);
        let c = concat(&left, &right).unwrap();
        let back = shift(&c, 0.4).unwrap();
        assert_eq!(back.len(), right.len());
        for i in 0..right.len() {
            assert_abs_diff_eq!(back.point(i)[0], right.point(i)[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn distance_examples() {
        let z = DiscretePath::zeros(0.0, 0.1, 10, 1);
        let a = PathPoint::new(0.3, unit_linear());
        assert_eq!(dist_dinfty(&a, &a), 0.0);
        let p0 = PathPoint::new(0.0, z.clone());
        let p1 = PathPoint::new(0.5, z.clone());
        assert_abs_diff_eq!(dist_dinfty(&p0, &p1), 0.5, epsilon = 1e-15);
        let c = DiscretePath::from_fn(0.0, 0.1, 10, 1, |_, v| v[0] = -0.7).unwrap();
        let q0 = PathPoint::new(1.0, z);
        let q1 = PathPoint::new(1.0, c);
        assert_abs_diff_eq!(dist_dinfty(&q0, &q1), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn distance_ignores_values_after_stop() {
        let p = unit_linear();
        let q = stop(&p, 0.4).unwrap();
        let a = PathPoint::new(0.4, p);
        let b = PathPoint::new(0.4, q);
        assert_abs_diff_eq!(dist_dinfty(&a, &b), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let p = DiscretePath::linear(0.25, 0.125, 4, &[1.0, -2.0]);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = DiscretePath::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn state_tracks_extrema() {
        let p = DiscretePath::new(0.0, 0.5, 1, vec![0.0, 1.0, -2.0]).unwrap();
        let s = p.state_at(2);
        assert_eq!((s.x1(), s.run_max[0], s.run_min[0]), (-2.0, 1.0, -2.0));
        let mid = p.state_at_time(0.75);
        assert_abs_diff_eq!(mid.x1(), -0.5, epsilon = 1e-12);
        assert_eq!(mid.run_max[0], 1.0);
    }
}
