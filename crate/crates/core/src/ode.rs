//! Classical fixed-step Runge-Kutta for complex state vectors.

use num_complex::Complex64;

fn axpy(y: &[Complex64], h: f64, k: &[Complex64]) -> Vec<Complex64> {
    y.iter().zip(k).map(|(a, b)| a + b * h).collect()
}

/// One RK4 step of `y' = f(y)`.
pub fn rk4_step<F>(y: &[Complex64], dt: f64, mut f: F) -> Vec<Complex64>
where
    F: FnMut(&[Complex64]) -> Vec<Complex64>,
{
    let k1 = f(y);
    let k2 = f(&axpy(y, 0.5 * dt, &k1));
    let k3 = f(&axpy(y, 0.5 * dt, &k2));
    let k4 = f(&axpy(y, dt, &k3));
    let w = dt / 6.0;
    y.iter()
        .enumerate()
        .map(|(i, yi)| yi + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w)
        .collect()
}

/// Number of steps of size `dt` covering `[0, t_end]`.
pub fn step_count(t_end: f64, dt: f64) -> usize {
    (t_end / dt).round().max(0.0) as usize
}
