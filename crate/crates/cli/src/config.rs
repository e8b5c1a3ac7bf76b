//! TOML run configuration.
//!
//! ```toml
//! alpha = 0.1
//! gamma = 1.0
//! trunc = 15
//! dt = 0.01
//! t_end = 30.0
//! record_every = 10
//! seed = 7
//! initial_energy = 1.0
//! nonlinear = true
//! out_dir = "out"
//!
//! [[forcing]]
//! n = 2
//! k = 1
//! amplitude = 1.0
//! ```
//!
//! A forcing entry adds `amplitude · ∇⊥Y_n^k` to `g`. Only `alpha`, `gamma`
//! and `trunc` are required.

use bardina::dynamics::SimConfig;
use bardina::fields::{AlphaParams, DivFreeField};
use bardina::sht::{index, SpectralScalar};
use serde::Deserialize;
use std::ops::Range;
use std::path::{Path, PathBuf};
use toml::Spanned;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    alpha: Spanned<f64>,
    gamma: Spanned<f64>,
    trunc: Spanned<usize>,
    dt: Option<Spanned<f64>>,
    t_end: Option<Spanned<f64>>,
    record_every: Option<Spanned<usize>>,
    seed: Option<u64>,
    initial_energy: Option<Spanned<f64>>,
    nonlinear: Option<bool>,
    out_dir: Option<PathBuf>,
    #[serde(default)]
    forcing: Vec<Spanned<RawForcing>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForcing {
    n: usize,
    k: usize,
    amplitude: f64,
}

/// A forcing mode `amplitude · ∇⊥Y_n^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingMode {
    pub n: usize,
    pub k: usize,
    pub amplitude: f64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub forcing: Vec<ForcingMode>,
    pub out_dir: Option<PathBuf>,
}

/// A configuration problem, located by line where possible.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn line_of(text: &str, span: Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

/// Builds `g` from forcing modes, rejecting modes the truncation cannot hold.
pub fn forcing_field(trunc: usize, modes: &[ForcingMode]) -> Result<DivFreeField, String> {
    let mut psi = SpectralScalar::zeros(trunc);
    for m in modes {
        if m.n == 0 || m.n > trunc {
            return Err(format!("forcing degree n = {} must lie in 1..={trunc}", m.n));
        }
        if m.k == 0 || m.k > 2 * m.n + 1 {
            return Err(format!("forcing order k = {} must lie in 1..={} for n = {}", m.k, 2 * m.n + 1, m.n));
        }
        if !m.amplitude.is_finite() {
            return Err(format!("forcing amplitude {} is not finite", m.amplitude));
        }
        psi.coeffs_mut()[index(m.n, m.k)] += m.amplitude;
    }
    Ok(DivFreeField::from_streamfunction(psi))
}

pub fn parse(text: &str, origin: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s));
        let msg = e.message().trim().to_string();
        match line {
            Some(l) => ConfigError(format!("{origin}:{l}: {msg}")),
            None => ConfigError(format!("{origin}: {msg}")),
        }
    })?;
    let at = |span: Range<usize>, msg: String| ConfigError(format!("{origin}:{}: {msg}", line_of(text, span)));

    let positive = |v: &Spanned<f64>, name: &str| -> Result<f64, ConfigError> {
        let x = *v.get_ref();
        if x.is_finite() && x > 0.0 {
            Ok(x)
        } else {
            Err(at(v.span(), format!("{name} must be positive and finite, got {x}")))
        }
    };
    let alpha = positive(&raw.alpha, "alpha")?;
    let gamma = positive(&raw.gamma, "gamma")?;
    let trunc = *raw.trunc.get_ref();
    if trunc == 0 {
        return Err(at(raw.trunc.span(), "trunc must be at least 1".into()));
    }
    let params = AlphaParams::new(alpha, gamma).map_err(|e| ConfigError(format!("{origin}: {e}")))?;
    let mut sim = SimConfig::new(params, trunc);
    if let Some(v) = &raw.dt {
        sim.dt = positive(v, "dt")?;
    }
    if let Some(v) = &raw.t_end {
        sim.t_end = positive(v, "t_end")?;
    }
    if let Some(v) = &raw.initial_energy {
        let x = *v.get_ref();
        if !(x.is_finite() && x >= 0.0) {
            return Err(at(v.span(), format!("initial_energy must be nonnegative, got {x}")));
        }
        sim.initial_energy = x;
    }
    if let Some(v) = &raw.record_every {
        if *v.get_ref() == 0 {
            return Err(at(v.span(), "record_every must be at least 1".into()));
        }
        sim.record_every = *v.get_ref();
    }
    if let Some(s) = raw.seed {
        sim.seed = s;
    }
    if let Some(b) = raw.nonlinear {
        sim.nonlinear = b;
    }
    let mut forcing = Vec::with_capacity(raw.forcing.len());
    for f in &raw.forcing {
        let r = f.get_ref();
        let mode = ForcingMode { n: r.n, k: r.k, amplitude: r.amplitude };
        forcing_field(trunc, &[mode]).map_err(|msg| at(f.span(), msg))?;
        forcing.push(mode);
    }
    sim.forcing = forcing_field(trunc, &forcing).map_err(|msg| ConfigError(format!("{origin}: {msg}")))?;
    sim.validate().map_err(|e| ConfigError(format!("{origin}: {e}")))?;
    Ok(RunConfig { sim, forcing, out_dir: raw.out_dir })
}

pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    parse(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = "alpha = 0.1\ngamma = 0.5\ntrunc = 7\ndt = 0.02\nt_end = 3.0\nrecord_every = 5\nseed = 9\n\
                        initial_energy = 2.0\nnonlinear = false\nout_dir = \"x\"\n\n[[forcing]]\nn = 2\nk = 1\namplitude = 1.5\n";

    #[test]
    fn full_config() {
        let c = parse(FULL, "cfg").unwrap();
        assert_eq!(c.sim.trunc, 7);
        assert_eq!(c.sim.dt, 0.02);
        assert_eq!(c.sim.record_every, 5);
        assert_eq!(c.sim.seed, 9);
        assert!(!c.sim.nonlinear);
        assert_eq!(c.out_dir, Some(PathBuf::from("x")));
        assert_eq!(c.sim.forcing.streamfunction().get(2, 1), 1.5);
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let c = parse("alpha = 1\ngamma = 1\ntrunc = 4\n", "cfg").unwrap();
        assert!(c.forcing.is_empty());
        assert_eq!(c.sim.forcing.l2_norm_sq(), 0.0);
    }

    fn err(text: &str) -> String {
        parse(text, "cfg").unwrap_err().0
    }

    #[test]
    fn errors_are_line_numbered() {
        assert!(err("alpha = 0.1\ngamma = \ntrunc = 4\n").starts_with("cfg:2:"));
        assert!(err("alpha = 0.1\ngamma = 1\ntrunc = 4\nbogus = 1\n").starts_with("cfg:4:"));
        assert!(err("alpha = -1\ngamma = 1\ntrunc = 4\n").starts_with("cfg:1:"));
        assert!(err("alpha = 1\ngamma = 1\ntrunc = 0\n").starts_with("cfg:3:"));
        let e = err("alpha = 1\ngamma = 1\ntrunc = 4\n\n[[forcing]]\nn = 9\nk = 1\namplitude = 1\n");
        assert!(e.starts_with("cfg:6:") || e.starts_with("cfg:5:"), "{e}");
        assert!(err("gamma = 1\ntrunc = 4\n").contains("alpha"));
    }
}
