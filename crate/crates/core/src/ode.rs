//! Fixed-step classical Runge-Kutta integration.

use crate::error::OdeError;

/// Solution states sampled at requested output times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const D: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; D]>,
}

impl<const D: usize> Trajectory<D> {
    pub fn to_csv_string(&self, column_names: &[&str; D]) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("time");
        for c in column_names {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (t, s) in self.times.iter().zip(&self.states) {
            let _ = write!(out, "{t}");
            for v in s {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Classical 4th-order Runge-Kutta with step `h`, sampled at `t_grid`.
///
/// Every grid point must be an integer multiple of `h` from the first
/// (within 1e-9) so output states are exact step states, never interpolants.
/// Integration fails if the state leaves `valid` or becomes non-finite; the
/// error carries the failing time.
pub fn rk4_solve_guarded<const D: usize>(
    mut rhs: impl FnMut(f64, &[f64; D]) -> [f64; D],
    y0: [f64; D],
    t_grid: &[f64],
    h: f64,
    valid: impl Fn(&[f64; D]) -> bool,
) -> Result<Trajectory<D>, OdeError> {
    if !(h > 0.0) {
        return Err(OdeError::BadStep(h));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(OdeError::GridNotIncreasing);
    }
    let t0 = t_grid.first().copied().unwrap_or(0.0);
    let mut step_counts = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let steps = (t - t0) / h;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(OdeError::GridOffStep { t, h });
        }
        step_counts.push(steps.round() as u64);
    }

    let mut y = y0;
    if !y.iter().all(|v| v.is_finite()) || !valid(&y) {
        return Err(OdeError::IntegrationFailure { t: t0 });
    }
    let mut states = Vec::with_capacity(t_grid.len());
    let mut step = 0u64;
    for (&want, &t_out) in step_counts.iter().zip(t_grid) {
        while step < want {
            let t = t0 + step as f64 * h;
            y = rk4_step(&mut rhs, t, &y, h);
            step += 1;
            if !y.iter().all(|v| v.is_finite()) || !valid(&y) {
                return Err(OdeError::IntegrationFailure { t: t0 + step as f64 * h });
            }
        }
        let _ = t_out;
        states.push(y);
    }
    Ok(Trajectory { times: t_grid.to_vec(), states })
}

/// `rk4_solve_guarded` with only the finiteness guard.
pub fn rk4_solve<const D: usize>(
    rhs: impl FnMut(f64, &[f64; D]) -> [f64; D],
    y0: [f64; D],
    t_grid: &[f64],
    h: f64,
) -> Result<Trajectory<D>, OdeError> {
    rk4_solve_guarded(rhs, y0, t_grid, h, |_| true)
}

#[inline]
pub fn rk4_step<const D: usize>(
    rhs: &mut impl FnMut(f64, &[f64; D]) -> [f64; D],
    t: f64,
    y: &[f64; D],
    h: f64,
) -> [f64; D] {
    let k1 = rhs(t, y);
    let mut y2 = *y;
    for i in 0..D {
        y2[i] = y[i] + 0.5 * h * k1[i];
    }
    let k2 = rhs(t + 0.5 * h, &y2);
    for i in 0..D {
        y2[i] = y[i] + 0.5 * h * k2[i];
    }
    let k3 = rhs(t + 0.5 * h, &y2);
    for i in 0..D {
        y2[i] = y[i] + h * k3[i];
    }
    let k4 = rhs(t + h, &y2);
    let mut out = *y;
    for i in 0..D {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}
