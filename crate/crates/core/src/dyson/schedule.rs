use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct BootstrapSchedule {
    pub r0: f64,
    pub beta: f64,
    /// R_0, R_1, ..., R_J.
    pub r_sequence: Vec<f64>,
    /// M_1, ..., M_J.
    pub m_sequence: Vec<f64>,
    /// M_j^-1/3 > R_j > R_{j-1} > M_j^-1/2 for each step j.
    pub constraints_ok: Vec<bool>,
    /// Smallest J with (3/8) (7/9)^J <= beta.
    pub minimal_steps: usize,
}

/// R_j = R_{j-1}^(7/9), M_j = R_j^(-19/7).
pub fn bootstrap_schedule(r0: f64, beta: f64, steps: usize) -> Result<BootstrapSchedule> {
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(Error::precondition(format!("r0 = {r0} must lie in (0, 1)")));
    }
    if !(beta > 0.0 && beta <= 0.375) {
        return Err(Error::precondition(format!("beta = {beta} must lie in (0, 3/8]")));
    }
    if steps == 0 {
        return Err(Error::invalid("at least one step is required"));
    }
    let mut r = vec![r0];
    let mut m = Vec::with_capacity(steps);
    let mut ok = Vec::with_capacity(steps);
    for j in 1..=steps {
        let prev = r[j - 1];
        let rj = prev.powf(7.0 / 9.0);
        let mj = rj.powf(-19.0 / 7.0);
        ok.push(mj.powf(-1.0 / 3.0) > rj && rj > prev && prev > mj.powf(-0.5));
        r.push(rj);
        m.push(mj);
    }
    Ok(BootstrapSchedule { r0, beta, r_sequence: r, m_sequence: m, constraints_ok: ok, minimal_steps: minimal_steps(beta) })
}

pub fn minimal_steps(beta: f64) -> usize {
    let mut j = 0;
    let mut t = 0.375;
    while t > beta {
        t *= 7.0 / 9.0;
        j += 1;
    }
    j
}
