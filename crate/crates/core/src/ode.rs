//! Adaptive Dormand-Prince 5(4) integrator for the small deterministic flows.

use crate::error::{Error, Result};

/// Local error tolerance used by the flow integrators.
pub const FLOW_TOL: f64 = 1e-10;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// embedded 4th-order weights
const E1: f64 = 5179.0 / 57600.0;
const E3: f64 = 7571.0 / 16695.0;
const E4: f64 = 393.0 / 640.0;
const E5: f64 = -92097.0 / 339200.0;
const E6: f64 = 187.0 / 2100.0;
const E7: f64 = 1.0 / 40.0;

/// Integrate dy/dt = rhs(t, y) from `t0`, reporting the state at each of the
/// strictly increasing `times` via `record`. Steps adapt to the mixed
/// absolute/relative tolerance `tol`; collapse of the step size below
/// 1e-14 x the horizon reports stiffness.
pub fn integrate<F, R>(
    mut rhs: F,
    y0: &[f64],
    t0: f64,
    times: &[f64],
    tol: f64,
    mut record: R,
) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    R: FnMut(f64, &[f64]),
{
    if times.is_empty() {
        return Ok(());
    }
    if times[0] < t0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "output times must be strictly increasing and start at or after t0".into(),
        ));
    }
    let horizon = times[times.len() - 1] - t0;
    let h_floor = 1e-14 * horizon.max(1.0);

    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut h = (horizon / 100.0).min(0.1).max(h_floor * 10.0);

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];
    let mut y5 = vec![0.0; dim];

    rhs(t, &y, &mut k1);

    for &t_out in times {
        if t_out == t {
            record(t, &y);
            continue;
        }
        while t < t_out {
            let h_try = h.min(t_out - t);

            for i in 0..dim {
                stage[i] = y[i] + h_try * A21 * k1[i];
            }
            rhs(t + h_try / 5.0, &stage, &mut k2);
            for i in 0..dim {
                stage[i] = y[i] + h_try * (A31 * k1[i] + A32 * k2[i]);
            }
            rhs(t + 3.0 * h_try / 10.0, &stage, &mut k3);
            for i in 0..dim {
                stage[i] = y[i] + h_try * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            rhs(t + 4.0 * h_try / 5.0, &stage, &mut k4);
            for i in 0..dim {
                stage[i] = y[i] + h_try * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            rhs(t + 8.0 * h_try / 9.0, &stage, &mut k5);
            for i in 0..dim {
                stage[i] = y[i]
                    + h_try * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            rhs(t + h_try, &stage, &mut k6);
            for i in 0..dim {
                y5[i] =
                    y[i] + h_try * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            rhs(t + h_try, &y5, &mut k7);

            // weighted rms of the 5th-vs-4th order difference
            let mut err = 0.0;
            for i in 0..dim {
                let y4 = y[i]
                    + h_try
                        * (E1 * k1[i]
                            + E3 * k3[i]
                            + E4 * k4[i]
                            + E5 * k5[i]
                            + E6 * k6[i]
                            + E7 * k7[i]);
                let scale = tol + tol * y[i].abs().max(y5[i].abs());
                let e = (y5[i] - y4) / scale;
                err += e * e;
            }
            let err = (err / dim as f64).sqrt();

            if err <= 1.0 {
                t += h_try;
                y.copy_from_slice(&y5);
                k1.copy_from_slice(&k7); // FSAL
                let grow = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).min(5.0)
                };
                h = (h_try * grow).max(h_floor);
            } else {
                h = (h_try * (0.9 * err.powf(-0.2)).max(0.2)).max(h_floor);
                if h <= h_floor {
                    return Err(Error::Stiffness(t));
                }
                rhs(t, &y, &mut k1);
            }
        }
        record(t, &y);
    }
    Ok(())
}
