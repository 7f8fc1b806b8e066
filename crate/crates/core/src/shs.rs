//! Numerical age oracle: builds the transition structure of the three-state
//! server chain (idle / busy-informative / busy-uninformative) together with
//! the linear age-reset maps of a stochastic hybrid system, and solves the
//! resulting linear systems directly. Shares nothing with the closed forms in
//! [`crate::analysis`] beyond [`informative_rates`].

use serde::Serialize;

use crate::analysis::StationaryDistribution;
use crate::error::{Error, Result};
use crate::linalg::lu_solve;
use crate::model::{informative_rates, PreemptionPolicy, SystemConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShsSolution {
    pub pi: StationaryDistribution,
    /// `(v00, v01, v10, v11, v20, v21)`.
    pub v_bar: [f64; 6],
    pub aoi: f64,
}

fn nonnegative(what: &'static str, value: f64, scale: f64) -> Result<f64> {
    if value < -1e-12 * scale {
        return Err(Error::NegativeTransitionRate { what, value });
    }
    Ok(value.max(0.0))
}

pub fn shs_oracle_aoi(
    config: &SystemConfig,
    policy: &PreemptionPolicy,
    process: usize,
) -> Result<ShsSolution> {
    config.check_process(process)?;
    let rates = informative_rates(config, policy)?.process(process);
    if rates.informative() <= 0.0 {
        return Err(Error::UncoveredProcess { process });
    }
    let mu = config.service_rate();
    let lc = rates.channel_total;
    let ltc = rates.channel_preempting;
    let lt = rates.preempting;
    let ld = rates.nonpreempting;
    let idle_to_uninformative = nonnegative("lc - informative", lc - lt - ld, lc)?;
    let informative_to_uninformative =
        nonnegative("preempting channel - preempting informative", ltc - lt, lc)?;

    // Exit rates of states 0, 1, 2 and the transition-rate matrix (self loops included).
    let exit = [lc, mu + ltc, mu + lt];
    let q = [
        [0.0, lt + ld, idle_to_uninformative],
        [mu, lt, informative_to_uninformative],
        [mu, lt, 0.0],
    ];
    // pi (D - Q) = 0 transposed, last equation replaced by normalization.
    let mut a = [[0.0; 3]; 3];
    for (r, row) in a.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().enumerate() {
            let d = if r == c { exit[c] } else { 0.0 };
            *entry = d - q[c][r];
        }
    }
    a[2] = [1.0; 3];
    let pi = lu_solve(a, [0.0, 0.0, 1.0]).ok_or(Error::SingularSystem {
        what: "stationary distribution",
    })?;

    // Age moments: v (D - R) = pi B over (v00, v01, v10, v11, v20, v21).
    let d6 = [lc, lc, mu + ltc, mu + ltc, mu + lt, mu + lt];
    let mut r6 = [[0.0; 6]; 6];
    r6[0][2] = lt + ld;
    r6[0][4] = idle_to_uninformative;
    r6[2][2] = lt;
    r6[2][4] = informative_to_uninformative;
    r6[3][0] = mu;
    r6[4][0] = mu;
    r6[4][2] = lt;
    let b = [
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    ];
    let mut a6 = [[0.0; 6]; 6];
    let mut rhs = [0.0; 6];
    for c in 0..6 {
        for r in 0..6 {
            let d = if r == c { d6[c] } else { 0.0 };
            a6[c][r] = d - r6[r][c];
        }
        rhs[c] = (0..3).map(|s| pi[s] * b[s][c]).sum();
    }
    let v_bar = lu_solve(a6, rhs).ok_or(Error::SingularSystem {
        what: "age moments",
    })?;

    Ok(ShsSolution {
        pi: StationaryDistribution {
            pi0: pi[0],
            pi1: pi[1],
            pi2: pi[2],
        },
        v_bar,
        aoi: v_bar[0] + v_bar[2] + v_bar[4],
    })
}
