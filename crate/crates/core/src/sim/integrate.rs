use crate::matcore::Vector;

/// One classical fourth-order Runge-Kutta step of `ẋ = f(t, x)`.
pub fn rk4_step<F, E>(f: &mut F, t: f64, x: &Vector, dt: f64) -> Result<Vector, E>
where
    F: FnMut(f64, &Vector) -> Result<Vector, E>,
{
    let k1 = f(t, x)?;
    let k2 = f(t + 0.5 * dt, &(x + &k1 * (0.5 * dt)))?;
    let k3 = f(t + 0.5 * dt, &(x + &k2 * (0.5 * dt)))?;
    let k4 = f(t + dt, &(x + &k3 * dt))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Integrates on the uniform grid `0, dt, ..., n·dt` and returns every state.
pub fn rk4_fixed<F, E>(mut f: F, x0: &Vector, dt: f64, steps: usize) -> Result<Vec<Vector>, E>
where
    F: FnMut(f64, &Vector) -> Result<Vector, E>,
{
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x0.clone());
    let mut x = x0.clone();
    for i in 0..steps {
        x = rk4_step(&mut f, i as f64 * dt, &x, dt)?;
        out.push(x.clone());
    }
    Ok(out)
}
