//! Arterial tree model.
//!
//! A network is a binary tree of conical segments rooted at the ascending
//! aorta. Every leaf ends in a three-element Windkessel terminal and five named
//! measurement sites are pinned to fractional positions along segments.

mod anthropometry;
mod cfpwv;

pub use anthropometry::{anthropometric_multipliers, body_surface_area, AnthropometricModel, Sex};
pub use cfpwv::{cfpwv_path, compute_cfpwv, fit_lambda_c, PathPiece};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

/// The bundled 24-segment reference tree.
pub const REFERENCE_NETWORK_JSON: &str = include_str!("../../assets/reference_network.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: i64,
    pub name: String,
    pub length_cm: f64,
    pub d_prox_cm: f64,
    pub d_dist_cm: f64,
    /// Fractional area change per unit pressure at the reference pressure (1/mmHg).
    pub distensibility_per_mmhg: f64,
    pub parent: Option<i64>,
    #[serde(default)]
    pub children: Vec<i64>,
}

impl Segment {
    /// Reference lumen diameter at fractional position `s` in [0, 1].
    pub fn diameter_at(&self, s: f64) -> f64 {
        self.d_prox_cm + (self.d_dist_cm - self.d_prox_cm) * s
    }

    /// Reference lumen area (cm²) at fractional position `s`.
    pub fn area_at(&self, s: f64) -> f64 {
        let d = self.diameter_at(s);
        std::f64::consts::PI * d * d / 4.0
    }

    /// Moens–Korteweg speed `1/sqrt(rho * d)` in cm/s.
    pub fn wave_speed(&self, rho: f64) -> f64 {
        1.0 / (rho * units::distensibility_to_cgs(self.distensibility_per_mmhg)).sqrt()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindkesselTerminal {
    pub segment_id: i64,
    /// Proximal resistance, mmHg·s/mL.
    pub r1: f64,
    /// Distal resistance, mmHg·s/mL.
    pub r2: f64,
    /// Compliance, mL/mmHg.
    pub ct: f64,
}

impl WindkesselTerminal {
    /// Terminal resistance R_T = R1 + R2.
    pub fn total_resistance(&self) -> f64 {
        self.r1 + self.r2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Site {
    AorticRoot,
    Brachial,
    Radial,
    Carotid,
    Femoral,
}

impl Site {
    pub const ALL: [Site; 5] = [
        Site::AorticRoot,
        Site::Brachial,
        Site::Radial,
        Site::Carotid,
        Site::Femoral,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Site::AorticRoot => "aortic_root",
            Site::Brachial => "brachial",
            Site::Radial => "radial",
            Site::Carotid => "carotid",
            Site::Femoral => "femoral",
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SitePosition {
    pub segment_id: i64,
    /// Fractional position along the segment, 0 = proximal end.
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Blood density, g/mL.
    pub rho: f64,
    /// Dynamic viscosity, mmHg·s.
    pub mu: f64,
    /// Reference pressure of the tube law, mmHg.
    pub p_ref: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            rho: 1.05,
            mu: 0.004 / 133.322_387_4,
            p_ref: 100.0,
        }
    }
}

/// Global multipliers applied to a reference network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleSet {
    pub lambda_l: f64,
    pub lambda_d: f64,
    pub lambda_c: f64,
    pub lambda_rt: f64,
    pub lambda_ct: f64,
}

impl Default for ScaleSet {
    fn default() -> Self {
        ScaleSet {
            lambda_l: 1.0,
            lambda_d: 1.0,
            lambda_c: 1.0,
            lambda_rt: 1.0,
            lambda_ct: 1.0,
        }
    }
}

impl ScaleSet {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("lambda_l", self.lambda_l),
            ("lambda_d", self.lambda_d),
            ("lambda_c", self.lambda_c),
            ("lambda_rt", self.lambda_rt),
            ("lambda_ct", self.lambda_ct),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Componentwise product: scaling by `self` then `other`.
    pub fn compose(&self, other: &ScaleSet) -> ScaleSet {
        ScaleSet {
            lambda_l: self.lambda_l * other.lambda_l,
            lambda_d: self.lambda_d * other.lambda_d,
            lambda_c: self.lambda_c * other.lambda_c,
            lambda_rt: self.lambda_rt * other.lambda_rt,
            lambda_ct: self.lambda_ct * other.lambda_ct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NetworkFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    version: Option<u32>,
    segments: Vec<Segment>,
    terminals: Vec<WindkesselTerminal>,
    sites: BTreeMap<String, SitePosition>,
    constants: Constants,
}

/// A validated arterial tree. Immutable once built; cheap to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ArterialNetwork {
    segments: Vec<Segment>,
    terminals: Vec<WindkesselTerminal>,
    sites: BTreeMap<Site, SitePosition>,
    constants: Constants,
    index: HashMap<i64, usize>,
    terminal_of: Vec<Option<usize>>,
    root: usize,
}

impl ArterialNetwork {
    pub fn new(
        segments: Vec<Segment>,
        terminals: Vec<WindkesselTerminal>,
        sites: BTreeMap<Site, SitePosition>,
        constants: Constants,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(segments.len());
        for (i, seg) in segments.iter().enumerate() {
            if index.insert(seg.id, i).is_some() {
                return Err(Error::invariant(seg.id, "duplicate segment id"));
            }
        }
        let mut net = ArterialNetwork {
            terminal_of: vec![None; segments.len()],
            segments,
            terminals,
            sites,
            constants,
            index,
            root: 0,
        };
        net.validate()?;
        Ok(net)
    }

    /// The bundled reference network.
    pub fn reference() -> Self {
        Self::from_json_str(REFERENCE_NETWORK_JSON).expect("bundled network is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: NetworkFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut sites = BTreeMap::new();
        for (name, pos) in file.sites {
            let site = serde_json::from_value::<Site>(serde_json::Value::String(name.clone()))
                .map_err(|_| Error::Network(format!("unknown site '{name}'")))?;
            sites.insert(site, pos);
        }
        Self::new(file.segments, file.terminals, sites, file.constants)
    }

    pub fn to_json_string(&self) -> String {
        let file = NetworkFile {
            version: Some(1),
            segments: self.segments.clone(),
            terminals: self.terminals.clone(),
            sites: self
                .sites
                .iter()
                .map(|(k, v)| (k.as_str().to_string(), *v))
                .collect(),
            constants: self.constants,
        };
        serde_json::to_string_pretty(&file).expect("network serializes")
    }

    fn validate(&mut self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::Network("network has no segments".into()));
        }
        let c = self.constants;
        if !(c.rho > 0.0 && c.mu > 0.0 && c.p_ref.is_finite()) {
            return Err(Error::Network("constants rho and mu must be > 0".into()));
        }
        for seg in &self.segments {
            let checks = [
                ("length", seg.length_cm),
                ("proximal diameter", seg.d_prox_cm),
                ("distal diameter", seg.d_dist_cm),
                ("distensibility", seg.distensibility_per_mmhg),
            ];
            for (what, v) in checks {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::invariant(seg.id, format!("{what} must be > 0")));
                }
            }
            if seg.children.len() > 2 {
                return Err(Error::invariant(seg.id, "more than 2 children"));
            }
            for child in &seg.children {
                let Some(&ci) = self.index.get(child) else {
                    return Err(Error::invariant(seg.id, format!("unknown child {child}")));
                };
                if self.segments[ci].parent != Some(seg.id) {
                    return Err(Error::invariant(
                        seg.id,
                        format!("not a tree: child {child} does not name this segment as parent"),
                    ));
                }
            }
            if let Some(p) = seg.parent {
                let Some(&pi) = self.index.get(&p) else {
                    return Err(Error::invariant(seg.id, format!("unknown parent {p}")));
                };
                if !self.segments[pi].children.contains(&seg.id) {
                    return Err(Error::invariant(
                        seg.id,
                        format!("not a tree: parent {p} does not list this segment as child"),
                    ));
                }
            }
        }

        let roots: Vec<usize> = (0..self.segments.len())
            .filter(|&i| self.segments[i].parent.is_none())
            .collect();
        match roots.as_slice() {
            [r] => self.root = *r,
            [] => {
                return Err(Error::Network(
                    "not a tree: no root segment (cyclic parent links)".into(),
                ))
            }
            _ => {
                return Err(Error::Network(format!(
                    "not a tree: {} segments have no parent",
                    roots.len()
                )))
            }
        }

        // every segment must be reachable from the root exactly once
        let mut seen = vec![false; self.segments.len()];
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            if seen[i] {
                return Err(Error::invariant(self.segments[i].id, "not a tree: revisited"));
            }
            seen[i] = true;
            for child in &self.segments[i].children {
                stack.push(self.index[child]);
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::invariant(
                self.segments[i].id,
                "not a tree: unreachable from root (cyclic parent links)",
            ));
        }

        self.terminal_of = vec![None; self.segments.len()];
        for (ti, term) in self.terminals.iter().enumerate() {
            let Some(&si) = self.index.get(&term.segment_id) else {
                return Err(Error::invariant(
                    term.segment_id,
                    "terminal attached to unknown segment",
                ));
            };
            if !self.segments[si].is_leaf() {
                return Err(Error::invariant(term.segment_id, "terminal on a non-leaf segment"));
            }
            if self.terminal_of[si].is_some() {
                return Err(Error::invariant(term.segment_id, "duplicate terminal"));
            }
            for (what, v) in [("r1", term.r1), ("r2", term.r2), ("ct", term.ct)] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::invariant(
                        term.segment_id,
                        format!("terminal {what} must be > 0"),
                    ));
                }
            }
            self.terminal_of[si] = Some(ti);
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.is_leaf() && self.terminal_of[i].is_none() {
                return Err(Error::invariant(seg.id, "missing terminal"));
            }
        }

        for site in Site::ALL {
            let Some(pos) = self.sites.get(&site) else {
                return Err(Error::MissingSite(site.to_string()));
            };
            if !self.index.contains_key(&pos.segment_id) {
                return Err(Error::MissingSite(format!(
                    "{site} refers to unknown segment {}",
                    pos.segment_id
                )));
            }
            if !(0.0..=1.0).contains(&pos.s) {
                return Err(Error::Network(format!("{site} position {} outside [0, 1]", pos.s)));
            }
        }
        cfpwv::cfpwv_path(self)?;
        Ok(())
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn terminals(&self) -> &[WindkesselTerminal] {
        &self.terminals
    }

    pub fn sites(&self) -> &BTreeMap<Site, SitePosition> {
        &self.sites
    }

    pub fn site(&self, site: Site) -> SitePosition {
        self.sites[&site]
    }

    pub fn constants(&self) -> Constants {
        self.constants
    }

    pub fn root_index(&self) -> usize {
        self.root
    }

    pub fn index_of(&self, id: i64) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn segment(&self, id: i64) -> Option<&Segment> {
        self.index_of(id).map(|i| &self.segments[i])
    }

    /// Terminal attached to the segment at position `index`, if it is a leaf.
    pub fn terminal_at(&self, index: usize) -> Option<&WindkesselTerminal> {
        self.terminal_of[index].map(|t| &self.terminals[t])
    }

    pub fn parent_index(&self, index: usize) -> Option<usize> {
        self.segments[index].parent.map(|p| self.index[&p])
    }

    pub fn children_indices(&self, index: usize) -> Vec<usize> {
        self.segments[index]
            .children
            .iter()
            .map(|c| self.index[c])
            .collect()
    }

    /// Parallel combination of all terminal resistances (mmHg·s/mL).
    pub fn total_terminal_resistance(&self) -> f64 {
        1.0 / self
            .terminals
            .iter()
            .map(|t| 1.0 / t.total_resistance())
            .sum::<f64>()
    }

    /// Sum of terminal compliances (mL/mmHg).
    pub fn total_terminal_compliance(&self) -> f64 {
        self.terminals.iter().map(|t| t.ct).sum()
    }

    /// Volume compliance of the 1-D segments at the reference pressure (mL/mmHg).
    pub fn arterial_compliance(&self) -> f64 {
        // A0(s) is quadratic in s; Simpson's rule integrates it exactly.
        self.segments
            .iter()
            .map(|s| {
                let mean_area = (s.area_at(0.0) + 4.0 * s.area_at(0.5) + s.area_at(1.0)) / 6.0;
                mean_area * s.length_cm * s.distensibility_per_mmhg
            })
            .sum()
    }

    /// Applies global multipliers. Topology and sites are unchanged.
    pub fn scale(&self, s: &ScaleSet) -> Result<ArterialNetwork> {
        s.validate()?;
        let segments = self
            .segments
            .iter()
            .map(|seg| Segment {
                length_cm: seg.length_cm * s.lambda_l,
                d_prox_cm: seg.d_prox_cm * s.lambda_d,
                d_dist_cm: seg.d_dist_cm * s.lambda_d,
                distensibility_per_mmhg: seg.distensibility_per_mmhg * s.lambda_c,
                ..seg.clone()
            })
            .collect();
        let terminals = self
            .terminals
            .iter()
            .map(|t| WindkesselTerminal {
                segment_id: t.segment_id,
                r1: t.r1 * s.lambda_rt,
                r2: t.r2 * s.lambda_rt,
                ct: t.ct * s.lambda_ct,
            })
            .collect();
        ArterialNetwork::new(segments, terminals, self.sites.clone(), self.constants)
    }
}

/// Free-function form of [`ArterialNetwork::load`].
pub fn load_network(path: impl AsRef<Path>) -> Result<ArterialNetwork> {
    ArterialNetwork::load(path)
}

/// Free-function form of [`ArterialNetwork::scale`].
pub fn scale_network(net: &ArterialNetwork, s: &ScaleSet) -> Result<ArterialNetwork> {
    net.scale(s)
}

/// Windkessel split used when building terminals: R1 is the characteristic
/// impedance of the terminal end, capped at 40% of R_T.
pub fn split_terminal_resistance(seg: &Segment, rho: f64, total_resistance: f64) -> (f64, f64) {
    let area = seg.area_at(1.0);
    let z0 = units::dyn_to_mmhg(rho * seg.wave_speed(rho) / area);
    let r1 = z0.min(0.4 * total_resistance);
    (r1, total_resistance - r1)
}
