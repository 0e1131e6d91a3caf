//! Problem instances: configuration, channel draws and CSI error draws.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{CMat, CVec, HermitianMatrix, C64};

/// Covariance matrices with a more negative eigenvalue are rejected.
pub const PSD_REJECT_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLoss {
    #[serde(deserialize_with = "de_quantity")]
    pub lc: f64,
    pub exponent: f64,
    /// Default distance in meters for every receiver.
    pub distance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ir_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub er_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eve_distance: Option<f64>,
}

impl PathLoss {
    pub fn gain(&self, distance: f64) -> f64 {
        self.lc * distance.powf(-self.exponent)
    }
    pub fn ir_gain(&self) -> f64 {
        self.gain(self.ir_distance.unwrap_or(self.distance))
    }
    pub fn er_gain(&self) -> f64 {
        self.gain(self.er_distance.unwrap_or(self.distance))
    }
    pub fn eve_gain(&self) -> f64 {
        self.gain(self.eve_distance.unwrap_or(self.distance))
    }
}

impl Default for PathLoss {
    fn default() -> Self {
        Self {
            lc: 35.97e-4,
            exponent: 2.7,
            distance: 10.0,
            ir_distance: None,
            er_distance: None,
            eve_distance: None,
        }
    }
}

/// CSI error covariances: `eps_sq * I` (times the receiver's path-loss gain
/// when `relative_to_pathloss`), unless files are given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorSpec {
    pub eps_sq: f64,
    #[serde(default = "default_true")]
    pub relative_to_pathloss: bool,
    /// One file per ER (or a single file shared by all).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub er_covariance_files: Vec<String>,
    /// One file per Eve (or a single file shared by all).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eve_covariance_files: Vec<String>,
}

fn default_true() -> bool {
    true
}

impl Default for ErrorSpec {
    fn default() -> Self {
        Self {
            eps_sq: 0.002,
            relative_to_pathloss: true,
            er_covariance_files: Vec::new(),
            eve_covariance_files: Vec::new(),
        }
    }
}

/// All parameters of one problem instance, in linear units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_tx: usize,
    pub n_er: usize,
    /// Antennas per Eve; its length is the number of Eves.
    #[serde(deserialize_with = "de_usize_list")]
    pub eve_antennas: Vec<usize>,
    /// Broadcasts a single `eve_antennas` entry to this many Eves.
    #[serde(default, skip_serializing)]
    pub n_eve: Option<usize>,
    #[serde(deserialize_with = "de_quantity")]
    pub sigma_d_sq: f64,
    #[serde(deserialize_with = "de_quantity")]
    pub sigma_e_sq: f64,
    pub p_secrecy: f64,
    pub q_eh: f64,
    pub rate_target: f64,
    #[serde(deserialize_with = "de_quantity_list")]
    pub eh_targets: Vec<f64>,
    #[serde(deserialize_with = "de_quantity_list")]
    pub eh_efficiency: Vec<f64>,
    #[serde(deserialize_with = "de_quantity")]
    pub power_budget: f64,
    #[serde(default)]
    pub pathloss: PathLoss,
    #[serde(default)]
    pub error: ErrorSpec,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::preset("fig3").expect("built-in preset")
    }
}

impl ScenarioConfig {
    pub fn n_eve(&self) -> usize {
        self.eve_antennas.len()
    }

    /// Built-in configurations shaped like the simulation figures:
    /// `fig2`, `fig3`, `fig4`, `fig5`, `fig6`, and `small`.
    pub fn preset(name: &str) -> Result<Self> {
        let base = |n_tx, n_er, n_eve, n_e, rate: f64, eta_db: f64, pt_db: f64| ScenarioConfig {
            n_tx,
            n_er,
            eve_antennas: vec![n_e; n_eve],
            n_eve: None,
            sigma_d_sq: 1.0,
            sigma_e_sq: 1.0,
            p_secrecy: 0.1,
            q_eh: 0.1,
            rate_target: rate,
            eh_targets: vec![db_to_linear(eta_db); n_er],
            eh_efficiency: vec![1.0; n_er],
            power_budget: db_to_linear(pt_db),
            pathloss: PathLoss::default(),
            error: ErrorSpec::default(),
            rng_seed: 1,
        };
        let cfg = match name {
            "fig2" => base(6, 3, 3, 3, 1.0, 0.0, 60.0),
            "fig3" => base(8, 3, 2, 2, 3.0, -10.0, 60.0),
            "fig4" => base(8, 3, 2, 2, 3.0, -10.0, 60.0),
            "fig5" => base(8, 3, 3, 2, 1.0, -5.0, 60.0),
            "fig6" => base(6, 3, 2, 2, 1.0, -5.0, 60.0),
            "small" => base(4, 2, 2, 2, 1.0, -10.0, 60.0),
            _ => return Err(Error::Config(format!("unknown preset `{name}`"))),
        };
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.broadcast();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn broadcast(&mut self) {
        if let (Some(l), [n]) = (self.n_eve, self.eve_antennas.as_slice()) {
            self.eve_antennas = vec![*n; l];
        }
        self.n_eve = None;
        if self.eh_targets.len() == 1 && self.n_er != 1 {
            self.eh_targets = vec![self.eh_targets[0]; self.n_er];
        }
        if self.eh_efficiency.len() == 1 && self.n_er != 1 {
            self.eh_efficiency = vec![self.eh_efficiency[0]; self.n_er];
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_tx == 0 {
            return bad("n_tx must be positive".into());
        }
        if self.eve_antennas.iter().any(|&n| n == 0) {
            return bad("every Eve needs at least one antenna".into());
        }
        if self.eh_targets.len() != self.n_er || self.eh_efficiency.len() != self.n_er {
            return bad(format!(
                "n_er = {} but {} EH targets and {} efficiencies given",
                self.n_er,
                self.eh_targets.len(),
                self.eh_efficiency.len()
            ));
        }
        if !(self.sigma_d_sq > 0.0 && self.sigma_e_sq > 0.0) {
            return bad("noise powers must be positive".into());
        }
        for (name, v) in [("p_secrecy", self.p_secrecy), ("q_eh", self.q_eh)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        if !(self.rate_target >= 0.0 && self.rate_target.is_finite()) {
            return bad(format!("rate_target must be nonnegative, got {}", self.rate_target));
        }
        if self.eh_targets.iter().any(|&e| !(e >= 0.0 && e.is_finite())) {
            return bad("EH targets must be nonnegative".into());
        }
        if self.eh_efficiency.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return bad("EH efficiencies must lie in (0, 1]".into());
        }
        if !(self.power_budget > 0.0 && self.power_budget.is_finite()) {
            return bad("power_budget must be positive".into());
        }
        let pl = &self.pathloss;
        if !(pl.lc > 0.0 && pl.distance > 0.0) {
            return bad("path loss constant and distance must be positive".into());
        }
        if !(self.error.eps_sq >= 0.0) {
            return bad("error.eps_sq must be nonnegative".into());
        }
        for (files, n) in [
            (&self.error.er_covariance_files, self.n_er),
            (&self.error.eve_covariance_files, self.n_eve()),
        ] {
            if !files.is_empty() && files.len() != 1 && files.len() != n {
                return bad(format!("expected 1 or {n} covariance files, got {}", files.len()));
            }
        }
        Ok(())
    }

    /// Sets a named parameter, as used by sweeps. Values are linear.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!("`{name}` needs a count, got {value}")))
            }
        };
        match name {
            "R" | "rate" | "rate_target" => self.rate_target = value,
            "eta" | "eh_target" => self.eh_targets.iter_mut().for_each(|e| *e = value),
            "p" | "p_secrecy" => self.p_secrecy = value,
            "q" | "q_eh" => self.q_eh = value,
            "rho" => {
                self.p_secrecy = value;
                self.q_eh = value;
            }
            "Pt" | "P_T" | "power_budget" => self.power_budget = value,
            "eps_sq" => self.error.eps_sq = value,
            "n_tx" | "N_T" => self.n_tx = count(value)?,
            "L" | "n_eve" => {
                let per = self.eve_antennas.first().copied().unwrap_or(1);
                self.eve_antennas.resize(count(value)?, per);
            }
            "K" | "n_er" => {
                let k = count(value)?;
                let eta = self.eh_targets.first().copied().unwrap_or(0.0);
                let xi = self.eh_efficiency.first().copied().unwrap_or(1.0);
                self.n_er = k;
                self.eh_targets.resize(k, eta);
                self.eh_efficiency.resize(k, xi);
            }
            "N_e" | "eve_antennas" => {
                let n = count(value)?;
                self.eve_antennas.iter_mut().for_each(|e| *e = n);
            }
            "d" | "distance" => self.pathloss.distance = value,
            "seed" | "rng_seed" => self.rng_seed = value as u64,
            _ => return Err(Error::Config(format!("unknown sweep parameter `{name}`"))),
        }
        self.validate()
    }
}

/// `10^(x / 10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts `"x"`, `"x dB"`, `"x dBm"` (to watts) or `"x W"` to linear units.
pub fn parse_quantity(text: &str) -> Result<f64> {
    let t = text.trim();
    let split = t
        .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
        .unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad number in quantity `{text}`")))?;
    match unit.trim() {
        "" | "W" | "lin" => Ok(v),
        "dB" => Ok(db_to_linear(v)),
        "dBm" => Ok(db_to_linear(v - 30.0)),
        u => Err(Error::Parse(format!("unknown unit `{u}` in `{text}`"))),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawQuantity {
    Num(f64),
    Text(String),
}

impl RawQuantity {
    fn linear<E: de::Error>(self) -> std::result::Result<f64, E> {
        match self {
            RawQuantity::Num(v) => Ok(v),
            RawQuantity::Text(s) => parse_quantity(&s).map_err(E::custom),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn de_quantity<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    RawQuantity::deserialize(d)?.linear()
}

fn de_quantity_list<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    match OneOrMany::<RawQuantity>::deserialize(d)? {
        OneOrMany::One(q) => Ok(vec![q.linear()?]),
        OneOrMany::Many(v) => v.into_iter().map(RawQuantity::linear).collect(),
    }
}

fn de_usize_list<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<usize>, D::Error> {
    Ok(match OneOrMany::<usize>::deserialize(d)? {
        OneOrMany::One(n) => vec![n],
        OneOrMany::Many(v) => v,
    })
}

/// Estimated channels and the Gaussian error covariances.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    /// IR channel, perfectly known.
    pub h: CVec,
    pub g_hat: Vec<CVec>,
    /// `N_T x N_e` estimated Eve channels.
    pub h_hat: Vec<CMat>,
    /// ER error covariances, `N_T x N_T`.
    pub r_g: Vec<HermitianMatrix>,
    /// Eve error covariances over column-major `vec(Delta)`.
    pub r_h: Vec<HermitianMatrix>,
}

impl ChannelSet {
    pub fn n_tx(&self) -> usize {
        self.h.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_tx();
        if self.g_hat.len() != self.r_g.len() || self.h_hat.len() != self.r_h.len() {
            return Err(Error::Dimension("channel and covariance counts differ".into()));
        }
        for (g, r) in self.g_hat.iter().zip(&self.r_g) {
            if g.len() != n || r.side() != n {
                return Err(Error::Dimension("ER channel dimensions".into()));
            }
            r.check_psd(1e-10)?;
        }
        for (he, r) in self.h_hat.iter().zip(&self.r_h) {
            if he.nrows() != n || r.side() != n * he.ncols() {
                return Err(Error::Dimension("Eve channel dimensions".into()));
            }
            r.check_psd(1e-10)?;
        }
        Ok(())
    }

    /// Replaces every covariance by zero, keeping the estimates.
    pub fn without_uncertainty(&self) -> Self {
        let mut c = self.clone();
        c.r_g.iter_mut().for_each(|r| *r = HermitianMatrix::zeros(r.side()));
        c.r_h.iter_mut().for_each(|r| *r = HermitianMatrix::zeros(r.side()));
        c
    }

    /// Multiplies every covariance by `s`.
    pub fn scale_uncertainty(&self, s: f64) -> Self {
        let mut c = self.clone();
        c.r_g.iter_mut().for_each(|r| *r = r.scale(s));
        c.r_h.iter_mut().for_each(|r| *r = r.scale(s));
        c
    }
}

/// Circularly-symmetric complex Gaussian with `E|z|^2 = var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, var: f64) -> CVec {
    CVec::from_fn(n, |_, _| complex_gaussian(rng, var))
}

/// Draws estimated channels with per-entry variance `gain / N_T`.
pub fn sample_channels<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<ChannelSet> {
    cfg.validate()?;
    let n = cfg.n_tx;
    let pl = &cfg.pathloss;
    let (gi, gr, ge) = (pl.ir_gain(), pl.er_gain(), pl.eve_gain());
    let h = gaussian_vec(rng, n, gi / n as f64);
    let g_hat: Vec<CVec> = (0..cfg.n_er).map(|_| gaussian_vec(rng, n, gr / n as f64)).collect();
    let h_hat: Vec<CMat> = cfg
        .eve_antennas
        .iter()
        .map(|&ne| CMat::from_fn(n, ne, |_, _| complex_gaussian(rng, ge / n as f64)))
        .collect();

    let err = &cfg.error;
    let scaled_identity = |side: usize, gain: f64| {
        let s = if err.relative_to_pathloss { err.eps_sq * gain } else { err.eps_sq };
        HermitianMatrix::identity(side).scale(s)
    };
    let pick = |files: &[String], i: usize| -> Option<String> {
        match files.len() {
            0 => None,
            1 => Some(files[0].clone()),
            _ => Some(files[i].clone()),
        }
    };
    let mut r_g = Vec::with_capacity(cfg.n_er);
    for k in 0..cfg.n_er {
        r_g.push(match pick(&err.er_covariance_files, k) {
            Some(f) => load_covariance(Path::new(&f), n)?,
            None => scaled_identity(n, gr),
        });
    }
    let mut r_h = Vec::with_capacity(cfg.n_eve());
    for (i, &ne) in cfg.eve_antennas.iter().enumerate() {
        r_h.push(match pick(&err.eve_covariance_files, i) {
            Some(f) => load_covariance(Path::new(&f), n * ne)?,
            None => scaled_identity(n * ne, ge),
        });
    }
    let cs = ChannelSet { h, g_hat, h_hat, r_g, r_h };
    cs.validate()?;
    Ok(cs)
}

/// Parses a dense complex matrix: one row per line, `re im` pairs.
/// Blank lines and lines starting with `#` are ignored.
pub fn parse_complex_matrix(text: &str) -> Result<CMat> {
    let mut rows: Vec<Vec<C64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let nums: std::result::Result<Vec<f64>, _> =
            line.split_whitespace().map(str::parse::<f64>).collect();
        let nums = nums.map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        if nums.len() % 2 != 0 {
            return Err(Error::Parse(format!("line {}: odd number of values", lineno + 1)));
        }
        rows.push(nums.chunks(2).map(|p| C64::new(p[0], p[1])).collect());
    }
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if nr == 0 || rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Parse("matrix rows are empty or ragged".into()));
    }
    Ok(CMat::from_fn(nr, nc, |i, j| rows[i][j]))
}

pub fn format_complex_matrix(m: &CMat) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:e} {:e}", m[(i, j)].re, m[(i, j)].im))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Loads a PSD covariance of the given side from disk.
pub fn load_covariance(path: &Path, side: usize) -> Result<HermitianMatrix> {
    let text = std::fs::read_to_string(path)?;
    let m = parse_complex_matrix(&text)?;
    if m.nrows() != side || m.ncols() != side {
        return Err(Error::Dimension(format!(
            "{}: expected {side}x{side} covariance, got {}x{}",
            path.display(),
            m.nrows(),
            m.ncols()
        )));
    }
    let h = HermitianMatrix::new(m)?;
    h.check_psd(1e-10)?;
    Ok(h)
}

/// Channels realised after adding CSI errors to the estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    pub g: Vec<CVec>,
    pub h_e: Vec<CMat>,
}

/// Error sampler with cached covariance square roots.
#[derive(Clone, Debug)]
pub struct ErrorSampler<'a> {
    cs: &'a ChannelSet,
    sqrt_g: Vec<Option<CMat>>,
    sqrt_h: Vec<Option<CMat>>,
}

impl<'a> ErrorSampler<'a> {
    pub fn new(cs: &'a ChannelSet) -> Result<Self> {
        let root = |r: &HermitianMatrix| -> Result<Option<CMat>> {
            if r.is_zero() {
                Ok(None)
            } else {
                Ok(Some(r.psd_sqrt(PSD_REJECT_TOL)?.into_inner()))
            }
        };
        Ok(Self {
            cs,
            sqrt_g: cs.r_g.iter().map(root).collect::<Result<_>>()?,
            sqrt_h: cs.r_h.iter().map(root).collect::<Result<_>>()?,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Realization {
        let g = self
            .cs
            .g_hat
            .iter()
            .zip(&self.sqrt_g)
            .map(|(g, s)| match s {
                Some(s) => g + s * gaussian_vec(rng, g.len(), 1.0),
                None => g.clone(),
            })
            .collect();
        let h_e = self
            .cs
            .h_hat
            .iter()
            .zip(&self.sqrt_h)
            .map(|(he, s)| match s {
                Some(s) => {
                    let d = s * gaussian_vec(rng, he.len(), 1.0);
                    he + CMat::from_column_slice(he.nrows(), he.ncols(), d.as_slice())
                }
                None => he.clone(),
            })
            .collect();
        Realization { g, h_e }
    }
}

/// One draw of the realised channels.
pub fn sample_errors<R: Rng + ?Sized>(cs: &ChannelSet, rng: &mut R) -> Result<Realization> {
    Ok(ErrorSampler::new(cs)?.sample(rng))
}

/// Sample covariance `(1/n) sum x x^H` of zero-mean draws.
pub fn sample_covariance(draws: &[CVec]) -> CMat {
    let n = draws.first().map_or(0, |d| d.len());
    let mut acc = CMat::zeros(n, n);
    for d in draws {
        acc += d * d.adjoint();
    }
    acc / C64::new(draws.len().max(1) as f64, 0.0)
}
