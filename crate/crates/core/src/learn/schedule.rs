use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Learned unfolding parameters: thresholds `ζ_0..ζ_K`, step sizes
/// `η_1..η_K`, and the geometric tail `(β, φ)` used past layer `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSchedule {
    zetas: Vec<f64>,
    etas: Vec<f64>,
    beta: f64,
    phi: f64,
}

impl ParamSchedule {
    /// `zetas` must have one more entry than `etas`, and `etas` at least one.
    pub fn new(zetas: Vec<f64>, etas: Vec<f64>, beta: f64, phi: f64) -> Result<Self> {
        if etas.is_empty() || zetas.len() != etas.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "schedule needs K+1 thresholds and K >= 1 step sizes, got {} and {}",
                zetas.len(),
                etas.len()
            )));
        }
        if let Some(z) = zetas.iter().find(|z| !(**z >= 0.0) || !z.is_finite()) {
            return Err(Error::InvalidThreshold(*z));
        }
        if etas.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidInput("non-finite step size".into()));
        }
        if !(beta > 0.0 && beta.is_finite()) || !(phi > 0.0 && phi.is_finite()) {
            return Err(Error::InvalidInput(format!("tail factors must be positive, got beta={beta}, phi={phi}")));
        }
        Ok(Self { zetas, etas, beta, phi })
    }

    /// Constant schedule `ζ_k = zeta`, `η_k = eta` for `k = 1..K`, flat tail.
    pub fn constant(k: usize, zeta0: f64, zeta: f64, eta: f64) -> Result<Self> {
        let mut zetas = vec![zeta; k + 1];
        zetas[0] = zeta0;
        Self::new(zetas, vec![eta; k], 1.0, 1.0)
    }

    /// Number of individually parameterized layers.
    pub fn k(&self) -> usize {
        self.etas.len()
    }

    pub fn zeta0(&self) -> f64 {
        self.zetas[0]
    }

    pub fn zetas(&self) -> &[f64] {
        &self.zetas
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn with_tail(&self, beta: f64, phi: f64) -> Result<Self> {
        Self::new(self.zetas.clone(), self.etas.clone(), beta, phi)
    }

    /// `(ζ_k, η_k)` for `k ≥ 1`. Past `K` the tail follows `ζ_k = φ·ζ_{k−1}`
    /// and `η_k = β·η_{k−1}`. `k = 0` returns `(ζ_0, η_1)`.
    pub fn at(&self, k: usize) -> (f64, f64) {
        let kk = self.k();
        if k == 0 {
            return (self.zetas[0], self.etas[0]);
        }
        if k <= kk {
            return (self.zetas[k], self.etas[k - 1]);
        }
        let mut zeta = self.zetas[kk];
        let mut eta = self.etas[kk - 1];
        for _ in kk..k {
            zeta *= self.phi;
            eta *= self.beta;
        }
        (zeta, eta)
    }

    /// Thresholds scaled by `(n_base/n_target)·(r_target/r_base)`; step sizes
    /// and tail factors are kept.
    pub fn rescale(&self, n_base: usize, r_base: usize, n_target: usize, r_target: usize) -> Result<Self> {
        if n_base == 0 || r_base == 0 || n_target == 0 || r_target == 0 {
            return Err(Error::InvalidInput("rescale needs positive sizes".into()));
        }
        let factor = (n_base as f64 / n_target as f64) * (r_target as f64 / r_base as f64);
        Self::new(
            self.zetas.iter().map(|z| z * factor).collect(),
            self.etas.clone(),
            self.beta,
            self.phi,
        )
    }

    /// CSV with header `kind,k,value`; one row per threshold and step size,
    /// then one `beta` and one `phi` row (both tagged with `k = K`).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,k,value\n");
        for (k, z) in self.zetas.iter().enumerate() {
            let _ = writeln!(out, "zeta,{k},{z:.16e}");
        }
        for (k, e) in self.etas.iter().enumerate() {
            let _ = writeln!(out, "eta,{},{e:.16e}", k + 1);
        }
        let kk = self.k();
        let _ = writeln!(out, "beta,{kk},{:.16e}", self.beta);
        let _ = writeln!(out, "phi,{kk},{:.16e}", self.phi);
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "kind,k,value" => {}
            Some(h) => return Err(Error::ParseError(format!("unexpected header `{h}`"))),
            None => return Err(Error::ParseError("empty schedule".into())),
        }
        let mut zetas: Vec<(usize, f64)> = Vec::new();
        let mut etas: Vec<(usize, f64)> = Vec::new();
        let mut beta = None;
        let mut phi = None;
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 3 {
                return Err(Error::ParseError(format!("row {}: expected 3 fields", lineno + 2)));
            }
            let k: usize = fields[1]
                .parse()
                .map_err(|_| Error::ParseError(format!("row {}: bad index `{}`", lineno + 2, fields[1])))?;
            let v: f64 = fields[2]
                .parse()
                .map_err(|_| Error::ParseError(format!("row {}: bad value `{}`", lineno + 2, fields[2])))?;
            match fields[0] {
                "zeta" => zetas.push((k, v)),
                "eta" => etas.push((k, v)),
                "beta" if beta.is_none() => beta = Some(v),
                "phi" if phi.is_none() => phi = Some(v),
                "beta" | "phi" => return Err(Error::ParseError(format!("duplicate `{}` row", fields[0]))),
                other => return Err(Error::ParseError(format!("unknown kind `{other}`"))),
            }
        }
        let zetas = contiguous(zetas, 0, "zeta")?;
        let etas = contiguous(etas, 1, "eta")?;
        let beta = beta.ok_or_else(|| Error::ParseError("missing beta row".into()))?;
        let phi = phi.ok_or_else(|| Error::ParseError("missing phi row".into()))?;
        Self::new(zetas, etas, beta, phi).map_err(|e| Error::ParseError(e.to_string()))
    }
}

fn contiguous(mut rows: Vec<(usize, f64)>, first: usize, kind: &str) -> Result<Vec<f64>> {
    rows.sort_by_key(|r| r.0);
    for (i, (k, _)) in rows.iter().enumerate() {
        if *k != first + i {
            return Err(Error::ParseError(format!("{kind} rows must cover k = {first}.. without gaps")));
        }
    }
    if rows.is_empty() {
        return Err(Error::ParseError(format!("no {kind} rows")));
    }
    Ok(rows.into_iter().map(|r| r.1).collect())
}
