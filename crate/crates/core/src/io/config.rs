//! Run configuration: a flat JSON object, optionally layered over a preset.
//!
//! Keys are resolved in order preset < config file < command-line overrides.
//! Unknown keys are rejected.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::dynamics::{SpinorPacket, ZeemanStep};
use crate::error::{Error, Result};
use crate::io::pgm::Normalization;
use crate::quadrature::{KQuadrature, QuadratureRule};
use crate::units::{GaussianSpectrum, SpacetimeGrid, StepPotential};

pub type Document = Map<String, Value>;

pub const KEYS: &[&str] = &[
    "mode",
    "preset",
    "k0",
    "dk",
    "x0",
    "v1",
    "v2",
    "mu_b",
    "weight_up",
    "weight_down",
    "x_min",
    "x_max",
    "nx",
    "t_min",
    "t_max",
    "nt",
    "nodes",
    "rule",
    "k_lo",
    "k_hi",
    "outputs",
    "gamma",
    "normalization",
    "overlay_rays",
    "theta1_deg",
    "alpha_v",
    "dispersion",
    "n1",
    "n2",
    "distance",
];

pub const PRESETS: &[&str] = &["fig2", "fig3", "fig4"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Step,
    Spinor,
    Snell,
    Ray,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Output {
    Heatmap,
    Csv,
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dispersion {
    Quantum,
    Nondispersive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scatterer {
    Step(StepPotential),
    Zeeman { zeeman: ZeemanStep, spinor: SpinorPacket },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapSettings {
    pub gamma: f64,
    pub normalization: Normalization,
    pub overlay_rays: bool,
}

impl Default for HeatmapSettings {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            normalization: Normalization::PerFrameMax,
            overlay_rays: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnellSettings {
    pub theta1_deg: f64,
    pub alpha_v: f64,
    pub dispersion: Dispersion,
    /// Only used without dispersion; quantum indices follow from the step.
    pub n1: Option<f64>,
    pub n2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub packet: Option<GaussianSpectrum>,
    pub scatterer: Option<Scatterer>,
    pub grid: SpacetimeGrid,
    pub quad: Option<KQuadrature>,
    pub outputs: Vec<Output>,
    pub heatmap: HeatmapSettings,
    pub snell: SnellSettings,
    /// Propagation distance for the broadening diagnostics.
    pub distance: Option<f64>,
}

pub const DEFAULT_GRID: SpacetimeGrid = SpacetimeGrid {
    x_min: -60.0,
    x_max: 60.0,
    nx: 1201,
    t_min: 0.0,
    t_max: 25.0,
    nt: 600,
};

/// Parameters of a named preset.
pub fn preset(name: &str) -> Result<Document> {
    let v = match name {
        "fig2" => json!({
            "k0": 2.35, "dk": 0.1, "x0": -30.0, "v1": 0.0, "v2": 2.5,
            "x_min": -60.0, "x_max": 60.0, "nx": 1201, "t_min": 0.0, "t_max": 25.0, "nt": 600,
        }),
        "fig3" => json!({
            "k0": 2.35, "dk": 0.5, "x0": -30.0, "v1": 0.0, "v2": 2.5,
            "x_min": -60.0, "x_max": 60.0, "nx": 1201, "t_min": 0.0, "t_max": 25.0, "nt": 600,
        }),
        // Wider window: the fast spin-up lobe reaches x ~ 95 by T = 25 and
        // the weak reflected lobe x ~ -80.
        "fig4" => json!({
            "k0": 3.5, "dk": 0.1, "x0": -30.0, "mu_b": 2.5,
            "weight_up": std::f64::consts::FRAC_1_SQRT_2,
            "weight_down": std::f64::consts::FRAC_1_SQRT_2,
            "x_min": -90.0, "x_max": 110.0, "nx": 2001, "t_min": 0.0, "t_max": 25.0, "nt": 600,
        }),
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    match v {
        Value::Object(map) => Ok(map),
        _ => unreachable!(),
    }
}

/// Parse a config document and check its keys, without resolving it.
pub fn parse_document(text: &str) -> Result<Document> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::schema("$", e.to_string()))?;
    match value {
        Value::Object(map) => {
            check_keys(&map)?;
            Ok(map)
        }
        _ => Err(Error::schema("$", "config must be a JSON object")),
    }
}

pub fn check_keys(doc: &Document) -> Result<()> {
    match doc.keys().find(|k| !KEYS.contains(&k.as_str())) {
        Some(k) => Err(Error::schema(k.as_str(), "unknown key")),
        None => Ok(()),
    }
}

/// Parse and resolve a standalone config document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    resolve(&[parse_document(text)?])
}

/// Merge layers (later wins) on top of the preset named by the last layer
/// that has one, then validate.
pub fn resolve(layers: &[Document]) -> Result<RunConfig> {
    let mut merged = Document::new();
    for layer in layers {
        check_keys(layer)?;
    }
    let preset_name = layers.iter().rev().find_map(|l| l.get("preset"));
    if let Some(name) = preset_name {
        let name = name
            .as_str()
            .ok_or_else(|| Error::schema("preset", "expected a string"))?;
        merged = preset(name)?;
    }
    for layer in layers {
        for (k, v) in layer {
            if k != "preset" {
                merged.insert(k.clone(), v.clone());
            }
        }
    }
    Fields(&merged).build()
}

struct Fields<'a>(&'a Document);

impl Fields<'_> {
    fn has(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| Error::schema(key, format!("expected a finite number, got {v}"))),
        }
    }

    fn req_f64(&self, key: &str, why: &str) -> Result<f64> {
        self.f64(key)?
            .ok_or_else(|| Error::schema(key, format!("missing, required {why}")))
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(|n| Some(n as usize))
                .ok_or_else(|| Error::schema(key, format!("expected a non-negative integer, got {v}"))),
        }
    }

    fn bool(&self, key: &str) -> Result<Option<bool>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_bool()
                .map(Some)
                .ok_or_else(|| Error::schema(key, format!("expected true or false, got {v}"))),
        }
    }

    fn enumeration<T: for<'de> Deserialize<'de>>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|_| Error::schema(key, format!("unrecognized value {v}"))),
        }
    }

    /// A real number or a `[re, im]` pair.
    fn complex(&self, key: &str) -> Result<Option<Complex64>> {
        let bad = |v: &Value| Error::schema(key, format!("expected a number or [re, im], got {v}"));
        match self.0.get(key) {
            None => Ok(None),
            Some(v @ Value::Number(_)) => v.as_f64().map(|re| Some(Complex64::new(re, 0.0))).ok_or_else(|| bad(v)),
            Some(v @ Value::Array(parts)) if parts.len() == 2 => {
                let re = parts[0].as_f64().ok_or_else(|| bad(v))?;
                let im = parts[1].as_f64().ok_or_else(|| bad(v))?;
                Ok(Some(Complex64::new(re, im)))
            }
            Some(v) => Err(bad(v)),
        }
    }

    fn outputs(&self) -> Result<Vec<Output>> {
        let Some(v) = self.0.get("outputs") else {
            return Ok(Vec::new());
        };
        let items = v
            .as_array()
            .ok_or_else(|| Error::schema("outputs", "expected an array"))?;
        let mut out = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let o: Output = serde_json::from_value(item.clone())
                .map_err(|_| Error::schema(format!("outputs[{i}]"), format!("unrecognized output {item}")))?;
            if !out.contains(&o) {
                out.push(o);
            }
        }
        Ok(out)
    }

    /// Attach the field path to a validation failure from a domain constructor.
    fn at<T>(key: &str, r: Result<T>) -> Result<T> {
        r.map_err(|e| match e {
            Error::InvalidParameter(m) => Error::schema(key, m),
            other => other,
        })
    }

    fn build(&self) -> Result<RunConfig> {
        let mode: Mode = self
            .enumeration("mode")?
            .ok_or_else(|| Error::schema("mode", "missing"))?;
        let dispersion = self.enumeration("dispersion")?.unwrap_or(Dispersion::Quantum);
        let needs_packet = !(mode == Mode::Snell && dispersion == Dispersion::Nondispersive);

        let packet = if needs_packet || self.has("k0") {
            let why = "to describe the packet";
            let k0 = self.req_f64("k0", why)?;
            // the snell mode only needs the central wave number
            let dk = match mode {
                Mode::Snell => self.f64("dk")?.unwrap_or(k0 / 10.0),
                _ => self.req_f64("dk", why)?,
            };
            let x0 = match mode {
                Mode::Snell => self.f64("x0")?.unwrap_or(-30.0),
                _ => self.req_f64("x0", why)?,
            };
            Some(Self::at("packet", GaussianSpectrum::new(k0, dk, x0))?)
        } else {
            None
        };

        let scatterer = self.scatterer(mode, packet, dispersion)?;

        let grid = Self::at(
            "grid",
            SpacetimeGrid::new(
                self.f64("x_min")?.unwrap_or(DEFAULT_GRID.x_min),
                self.f64("x_max")?.unwrap_or(DEFAULT_GRID.x_max),
                self.usize("nx")?.unwrap_or(DEFAULT_GRID.nx),
                self.f64("t_min")?.unwrap_or(DEFAULT_GRID.t_min),
                self.f64("t_max")?.unwrap_or(DEFAULT_GRID.t_max),
                self.usize("nt")?.unwrap_or(DEFAULT_GRID.nt),
            ),
        )?;

        let quad = match packet {
            Some(p) => {
                let rule = self.enumeration("rule")?.unwrap_or(QuadratureRule::GaussLegendre);
                let nodes = self.usize("nodes")?.unwrap_or(KQuadrature::DEFAULT_NODES);
                let window = Self::at("nodes", KQuadrature::for_packet(&p, nodes, rule))?;
                let k_lo = self.f64("k_lo")?.unwrap_or(window.k_lo);
                let k_hi = self.f64("k_hi")?.unwrap_or(window.k_hi);
                Some(Self::at("k_lo", KQuadrature::new(k_lo, k_hi, nodes, rule))?)
            }
            None => None,
        };

        let gamma = self.f64("gamma")?.unwrap_or(0.5);
        if !(gamma > 0.0) {
            return Err(Error::schema("gamma", format!("must be positive, got {gamma}")));
        }
        let heatmap = HeatmapSettings {
            gamma,
            normalization: self.enumeration("normalization")?.unwrap_or(Normalization::PerFrameMax),
            overlay_rays: self.bool("overlay_rays")?.unwrap_or(true),
        };

        let theta1_deg = self.f64("theta1_deg")?.unwrap_or(45.0);
        if !(0.0..90.0).contains(&theta1_deg) {
            return Err(Error::schema("theta1_deg", format!("must lie in [0, 90), got {theta1_deg}")));
        }
        let (n1, n2) = (self.f64("n1")?, self.f64("n2")?);
        if dispersion == Dispersion::Nondispersive && mode == Mode::Snell {
            self.req_f64("n1", "without dispersion")?;
            self.req_f64("n2", "without dispersion")?;
        }
        let snell = SnellSettings {
            theta1_deg,
            alpha_v: self.f64("alpha_v")?.unwrap_or(2.0),
            dispersion,
            n1,
            n2,
        };

        let distance = self.f64("distance")?;
        if let Some(d) = distance {
            if !(d > 0.0) {
                return Err(Error::schema("distance", format!("must be positive, got {d}")));
            }
        }

        Ok(RunConfig {
            mode,
            packet,
            scatterer,
            grid,
            quad,
            outputs: self.outputs()?,
            heatmap,
            snell,
            distance,
        })
    }

    fn scatterer(
        &self,
        mode: Mode,
        packet: Option<GaussianSpectrum>,
        dispersion: Dispersion,
    ) -> Result<Option<Scatterer>> {
        let has_step = self.has("v1") || self.has("v2");
        if self.has("mu_b") {
            if has_step {
                return Err(Error::schema("mu_b", "cannot be combined with v1/v2"));
            }
            if matches!(mode, Mode::Step | Mode::Snell) {
                return Err(Error::schema("mu_b", "not used in this mode; give v1/v2"));
            }
            let zeeman = Self::at("mu_b", ZeemanStep::new(self.req_f64("mu_b", "")?))?;
            let half = std::f64::consts::FRAC_1_SQRT_2;
            let up = self.complex("weight_up")?.unwrap_or(Complex64::new(half, 0.0));
            let down = self.complex("weight_down")?.unwrap_or(Complex64::new(half, 0.0));
            let packet = packet.ok_or_else(|| Error::schema("k0", "missing"))?;
            let spinor = Self::at("weight_up", SpinorPacket::new(packet, up, down))?;
            return Ok(Some(Scatterer::Zeeman { zeeman, spinor }));
        }
        for key in ["weight_up", "weight_down"] {
            if self.has(key) {
                return Err(Error::schema(key, "only used with mu_b"));
            }
        }
        match mode {
            Mode::Spinor => Err(Error::schema("mu_b", "missing, required in spinor mode")),
            Mode::Snell if dispersion == Dispersion::Nondispersive => Ok(None),
            _ => {
                let v2 = self.req_f64("v2", "for the potential step")?;
                let v1 = self.f64("v1")?.unwrap_or(0.0);
                Ok(Some(Scatterer::Step(Self::at("v2", StepPotential::new(v1, v2))?)))
            }
        }
    }
}

impl RunConfig {
    /// Flat document that resolves back to this config.
    pub fn to_document(&self) -> Document {
        let mut d = Document::new();
        d.insert("mode".into(), json!(self.mode));
        if let Some(p) = self.packet {
            d.insert("k0".into(), json!(p.k0));
            d.insert("dk".into(), json!(p.dk));
            d.insert("x0".into(), json!(p.x0));
        }
        match self.scatterer {
            Some(Scatterer::Step(s)) => {
                d.insert("v1".into(), json!(s.v1));
                d.insert("v2".into(), json!(s.v2));
            }
            Some(Scatterer::Zeeman { zeeman, spinor }) => {
                d.insert("mu_b".into(), json!(zeeman.mu_b));
                d.insert("weight_up".into(), json!([spinor.weight_up.re, spinor.weight_up.im]));
                d.insert("weight_down".into(), json!([spinor.weight_down.re, spinor.weight_down.im]));
            }
            None => {}
        }
        let g = self.grid;
        for (k, v) in [("x_min", g.x_min), ("x_max", g.x_max), ("t_min", g.t_min), ("t_max", g.t_max)] {
            d.insert(k.into(), json!(v));
        }
        d.insert("nx".into(), json!(g.nx));
        d.insert("nt".into(), json!(g.nt));
        if let Some(q) = self.quad {
            d.insert("nodes".into(), json!(q.n_nodes));
            d.insert("rule".into(), json!(q.rule));
            d.insert("k_lo".into(), json!(q.k_lo));
            d.insert("k_hi".into(), json!(q.k_hi));
        }
        d.insert("outputs".into(), json!(self.outputs));
        d.insert("gamma".into(), json!(self.heatmap.gamma));
        d.insert("normalization".into(), json!(self.heatmap.normalization));
        d.insert("overlay_rays".into(), json!(self.heatmap.overlay_rays));
        d.insert("theta1_deg".into(), json!(self.snell.theta1_deg));
        d.insert("alpha_v".into(), json!(self.snell.alpha_v));
        d.insert("dispersion".into(), json!(self.snell.dispersion));
        if let Some(n1) = self.snell.n1 {
            d.insert("n1".into(), json!(n1));
        }
        if let Some(n2) = self.snell.n2 {
            d.insert("n2".into(), json!(n2));
        }
        if let Some(l) = self.distance {
            d.insert("distance".into(), json!(l));
        }
        d
    }

    pub fn wants(&self, output: Output) -> bool {
        self.outputs.contains(&output)
    }
}
