//! wasm-bindgen bindings for the static demo page in `www/`.

use wasm_bindgen::prelude::*;

use wplab::experiments::interaction::measure_interaction_interval;
use wplab::experiments::pipeline::{run_point, trajectories};
use wplab::experiments::scenario::{main_scenario, superposition_different_modes};
use wplab::{MatrixPotential, Mode, PotentialKind, WpError};

fn js(e: WpError) -> JsError {
    JsError::new(&e.to_string())
}

fn model(id: &str) -> Result<MatrixPotential, JsError> {
    match id {
        "bump" => Ok(MatrixPotential::bump_coupling(1)),
        "rotation" => MatrixPotential::new(
            PotentialKind::Rotation {
                decay: 1.0,
                angle_amplitude: 1.0,
                angle_radius: 1.5,
            },
            1,
        )
        .map_err(js),
        other => Err(JsError::new(&format!("unknown model '{other}'"))),
    }
}

/// `[x_0, lambda_+(x_0), lambda_-(x_0), x_1, ...]` on `n` points of `[lo, hi]`.
#[wasm_bindgen]
pub fn eigen_curves(id: &str, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, JsError> {
    let m = model(id)?;
    let n = n.max(2);
    let mut out = Vec::with_capacity(3 * n);
    for k in 0..n {
        let x = lo + (hi - lo) * k as f64 / (n - 1) as f64;
        let e = m.eigen(&[x]).map_err(js)?;
        out.extend([x, e.lambda_plus, e.lambda_minus]);
    }
    Ok(out)
}

/// Error series of one d = 1 bump-model run.
#[wasm_bindgen]
pub struct PacketRun {
    t: Vec<f64>,
    w: Vec<f64>,
    theta: Vec<f64>,
    minus: Vec<f64>,
    path: Vec<f64>,
}

#[wasm_bindgen]
impl PacketRun {
    #[wasm_bindgen(getter)]
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }

    /// `||w||_{H_eps^1}` at each snapshot.
    #[wasm_bindgen(getter)]
    pub fn w(&self) -> Vec<f64> {
        self.w.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn theta(&self) -> Vec<f64> {
        self.theta.clone()
    }

    /// Mass on the other mode.
    #[wasm_bindgen(getter)]
    pub fn minus(&self) -> Vec<f64> {
        self.minus.clone()
    }

    /// Classical position at each snapshot.
    #[wasm_bindgen(getter)]
    pub fn path(&self) -> Vec<f64> {
        self.path.clone()
    }
}

/// Runs the single plus packet launched at `(x0, xi0)` up to `t_final`.
/// `eps` below 1/32 is refused to keep the page responsive.
#[wasm_bindgen]
pub fn run_packet(eps: f64, x0: f64, xi0: f64, t_final: f64) -> Result<PacketRun, JsError> {
    if !(eps >= 1.0 / 32.0 && eps <= 1.0) {
        return Err(JsError::new("eps must lie in [1/32, 1]"));
    }
    let mut s = main_scenario(1).map_err(js)?;
    s.packets[0].position[0] = x0;
    s.packets[0].momentum[0] = xi0;
    s.t_final = t_final;
    s.snapshots = 32;
    let series = run_point(&s, eps).map_err(js)?;
    let record = &trajectories(&s).map_err(js)?[0];
    let path = series.t.iter().map(|&t| record.state_at(t).x[0]).collect();
    Ok(PacketRun {
        t: series.t,
        w: series.w_heps1,
        theta: series.theta_l2,
        minus: series.minus_mass,
        path,
    })
}

/// `[measure, count, max_j, s_1, e_1, s_2, e_2, ...]` for the plus/minus pair
/// crossing on the bump model.
#[wasm_bindgen]
pub fn interaction(eps: f64, gamma: f64, t_final: f64) -> Result<Vec<f64>, JsError> {
    let mut s = superposition_different_modes().map_err(js)?;
    s.t_final = t_final;
    let r = trajectories(&s).map_err(js)?;
    let rep = measure_interaction_interval(&r[0], &r[1], eps, gamma, t_final).map_err(js)?;
    let mut out = vec![rep.measure, rep.n_intervals as f64, rep.max_j];
    for (a, b) in rep.intervals {
        out.extend([a, b]);
    }
    Ok(out)
}

/// Separation `|x_+(t) - x_-(t)|` of the same pair on `n` times.
#[wasm_bindgen]
pub fn separation(t_final: f64, n: usize) -> Result<Vec<f64>, JsError> {
    let mut s = superposition_different_modes().map_err(js)?;
    s.t_final = t_final;
    let r = trajectories(&s).map_err(js)?;
    debug_assert!(r[0].mode == Mode::Plus);
    let n = n.max(2);
    Ok((0..n)
        .map(|k| {
            let t = t_final * k as f64 / (n - 1) as f64;
            (r[0].state_at(t).x[0] - r[1].state_at(t).x[0]).abs()
        })
        .collect())
}
