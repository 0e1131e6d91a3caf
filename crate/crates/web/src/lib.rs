//! Browser demo: three small experiments whose results are handed to the
//! page as JSON strings.

use serde::Serialize;
use swipt_core::montecarlo::{stream_rng, validate_design_seeded};
use swipt_core::scenario::{db_to_linear, sample_channels, ChannelSet};
use swipt_core::srm::{srm_solve, SrmSettings};
use swipt_core::{solve_power_min, MethodTag, ScenarioConfig, SolverSettings};
use wasm_bindgen::prelude::*;

/// Grid sizes are capped so one click stays interactive.
const MAX_POINTS: usize = 25;
const MAX_TRIALS: usize = 50_000;

#[derive(Debug, Serialize)]
pub struct Curve {
    pub method: String,
    /// `None` where the method is infeasible.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Serialize)]
pub struct Sweep {
    pub x: Vec<f64>,
    pub curves: Vec<Curve>,
}

#[derive(Debug, Serialize)]
pub struct Outage {
    pub method: String,
    pub feasible: bool,
    pub power: Option<f64>,
    pub rank_ratio: Option<f64>,
    pub secrecy_outage: Option<f64>,
    pub secrecy_half_width: Option<f64>,
    pub eh_outage: Vec<f64>,
    pub p: f64,
    pub q: f64,
}

fn scenario(preset: &str, eps_sq: f64, seed: u32) -> Result<(ScenarioConfig, ChannelSet), String> {
    let mut cfg = ScenarioConfig::preset(preset).map_err(|e| e.to_string())?;
    cfg.set_param("eps_sq", eps_sq).map_err(|e| e.to_string())?;
    let cs = sample_channels(&cfg, &mut stream_rng(seed as u64, 0)).map_err(|e| e.to_string())?;
    Ok((cfg, cs))
}

fn grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, String> {
    if !(lo.is_finite() && hi.is_finite() && hi >= lo) || n == 0 || n > MAX_POINTS {
        return Err(format!("need lo <= hi and 1..={MAX_POINTS} points"));
    }
    Ok((0..n)
        .map(|k| if n == 1 { lo } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 })
        .collect())
}

fn methods(list: &str) -> Result<Vec<MethodTag>, String> {
    MethodTag::parse_list(list).map_err(|e| e.to_string())
}

/// Minimum transmit power (dBW) against the secrecy-rate target.
pub fn power_curve(
    preset: &str,
    seed: u32,
    eps_sq: f64,
    method_list: &str,
    r_lo: f64,
    r_hi: f64,
    points: usize,
) -> Result<Sweep, String> {
    let (cfg, cs) = scenario(preset, eps_sq, seed)?;
    let x = grid(r_lo, r_hi, points)?;
    let mut curves = Vec::new();
    for m in methods(method_list)? {
        let mut values = Vec::new();
        for &r in &x {
            let mut c = cfg.clone();
            c.rate_target = r;
            let out = solve_power_min(&cs, &c, m, &SolverSettings::default()).map_err(|e| e.to_string())?;
            values.push(out.power().map(|p| 10.0 * p.log10()));
        }
        curves.push(Curve { method: m.to_string(), values });
    }
    Ok(Sweep { x, curves })
}

/// Maximum secrecy rate against the power budget in dB.
pub fn srm_curve(
    preset: &str,
    seed: u32,
    eps_sq: f64,
    method_list: &str,
    pt_lo_db: f64,
    pt_hi_db: f64,
    points: usize,
) -> Result<Sweep, String> {
    let (cfg, cs) = scenario(preset, eps_sq, seed)?;
    let x = grid(pt_lo_db, pt_hi_db, points)?;
    let settings = SrmSettings { tol_rate: 1e-2, ..SrmSettings::default() };
    let mut curves = Vec::new();
    for m in methods(method_list)? {
        let mut values = Vec::new();
        for &pt in &x {
            let mut c = cfg.clone();
            c.power_budget = db_to_linear(pt);
            let out = srm_solve(&cs, &c, m, &SolverSettings::default(), &settings).map_err(|e| e.to_string())?;
            values.push(out.design.is_some().then_some(out.rate));
        }
        curves.push(Curve { method: m.to_string(), values });
    }
    Ok(Sweep { x, curves })
}

/// Solves the power minimisation at the preset's targets and estimates the
/// true outage probabilities of the design.
pub fn outage(preset: &str, seed: u32, eps_sq: f64, method_list: &str, trials: usize) -> Result<Vec<Outage>, String> {
    if trials == 0 || trials > MAX_TRIALS {
        return Err(format!("trials must lie in 1..={MAX_TRIALS}"));
    }
    let (cfg, cs) = scenario(preset, eps_sq, seed)?;
    let mut rows = Vec::new();
    for m in methods(method_list)? {
        let out = solve_power_min(&cs, &cfg, m, &SolverSettings::default()).map_err(|e| e.to_string())?;
        let report = match &out.design {
            Some(d) => Some(validate_design_seeded(d, &cs, &cfg, trials, seed as u64 ^ 0x5eed).map_err(|e| e.to_string())?),
            None => None,
        };
        rows.push(Outage {
            method: m.to_string(),
            feasible: out.design.is_some(),
            power: out.power(),
            rank_ratio: out.design.as_ref().map(|d| d.rank_ratio),
            secrecy_outage: report.as_ref().map(|r| r.secrecy_outage_rate),
            secrecy_half_width: report.as_ref().map(|r| r.secrecy_half_width),
            eh_outage: report.map(|r| r.eh_outage_rate).unwrap_or_default(),
            p: cfg.p_secrecy,
            q: cfg.q_eh,
        });
    }
    Ok(rows)
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn power_vs_rate(
    preset: &str,
    seed: u32,
    eps_sq: f64,
    methods: &str,
    r_lo: f64,
    r_hi: f64,
    points: usize,
) -> Result<String, JsError> {
    to_js(power_curve(preset, seed, eps_sq, methods, r_lo, r_hi, points))
}

#[wasm_bindgen]
pub fn rate_vs_budget(
    preset: &str,
    seed: u32,
    eps_sq: f64,
    methods: &str,
    pt_lo_db: f64,
    pt_hi_db: f64,
    points: usize,
) -> Result<String, JsError> {
    to_js(srm_curve(preset, seed, eps_sq, methods, pt_lo_db, pt_hi_db, points))
}

#[wasm_bindgen]
pub fn outage_check(preset: &str, seed: u32, eps_sq: f64, methods: &str, trials: usize) -> Result<String, JsError> {
    to_js(outage(preset, seed, eps_sq, methods, trials))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_curve_is_nondecreasing() {
        let s = power_curve("small", 3, 0.002, "ldi,nonrobust", 0.5, 1.5, 3).unwrap();
        assert_eq!(s.x, vec![0.5, 1.0, 1.5]);
        for c in &s.curves {
            let v: Vec<f64> = c.values.iter().flatten().copied().collect();
            assert!(v.windows(2).all(|w| w[1] >= w[0] - 1e-6), "{}: {v:?}", c.method);
        }
    }

    #[test]
    fn srm_and_outage_shapes() {
        let s = srm_curve("small", 1, 0.002, "mrt", 50.0, 60.0, 2).unwrap();
        assert_eq!(s.curves[0].values.len(), 2);
        let o = outage("small", 1, 0.002, "ldi", 200).unwrap();
        assert_eq!(o.len(), 1);
        if o[0].feasible {
            assert_eq!(o[0].eh_outage.len(), 2);
        }
        let json = serde_json::to_string(&o).unwrap();
        assert!(json.contains("\"method\":\"ldi\""));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(power_curve("nope", 0, 0.002, "ldi", 1.0, 2.0, 2).is_err());
        assert!(power_curve("small", 0, 0.002, "ldi", 2.0, 1.0, 2).is_err());
        assert!(power_curve("small", 0, 0.002, "ldi", 1.0, 2.0, 100).is_err());
        assert!(outage("small", 0, 0.002, "ldi", 0).is_err());
        assert!(srm_curve("small", 0, -1.0, "ldi", 50.0, 60.0, 2).is_err());
    }
}
