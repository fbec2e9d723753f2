//! Run configuration: a versioned TOML schema, named benchmark presets, and
//! construction of a ready-to-run [`Simulation`].
//!
//! A scenario file either spells out every section or names a preset and
//! overrides selected keys. Parsing is strict: unknown keys, a wrong schema
//! version, or out-of-range values are errors that name the offending field.
//! The fully resolved scenario (all defaults filled) serializes back to TOML,
//! and that dump reproduces the run when parsed again.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assembly::{BoundaryConditions, DirichletSpec, TractionSpec};
use crate::constitutive::MaterialModel;
use crate::mesh::{
    central_crack_slab, double_edge_notch, holed_panel, interface_strip, rect_structured,
    HoleSpec, RegionMap, TriMesh,
};
use crate::phasefield::{CrackModel, CrackVariant};
use crate::solver::{AdaptivityConfig, LoadSchedule, Simulation, SolverConfig};

pub const SCHEMA_VERSION: u32 = 1;

pub const PRESET_NAMES: [&str; 4] = [
    "double_edge_notch",
    "central_crack_slab",
    "holed_panel",
    "interface_strip",
];

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    /// TOML syntax or schema mismatch; the message carries line/column and
    /// the unknown or missing key.
    #[error("scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scenario: {field}: {message}")]
    Invalid { field: String, message: String },
    #[error("unknown preset '{0}' (available: double_edge_notch, central_crack_slab, holed_panel, interface_strip)")]
    UnknownPreset(String),
    #[error("mesh construction: {0}")]
    Mesh(#[from] crate::mesh::MeshError),
    #[error("mesh file: {0}")]
    MeshFile(#[from] crate::io::IoError),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

/// Parameter scale of a preset: `Desk` finishes on a workstation in minutes,
/// `Full` matches the published benchmark resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Desk,
    Full,
}

impl std::str::FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "desk" => Ok(Tier::Desk),
            "full" => Ok(Tier::Full),
            other => Err(format!("unknown tier '{other}', expected desk or full")),
        }
    }
}

/// Fully resolved run description. Field order keeps scalars ahead of tables
/// so the TOML serializer accepts it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub geometry: Geometry,
    pub material: MaterialSpec,
    pub crack: CrackSpec,
    pub boundary: BoundarySpec,
    pub loading: LoadingSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub adaptivity: AdaptivityConfig,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Mesh source. Generated geometries take the initial spacing `h0`; the
/// refinement policy then controls how far bisection sharpens it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    /// Quarter model of a double-edge-notched sheet; groups `sym_x`,
    /// `sym_y`, `load`.
    DoubleEdgeNotch {
        width: f64,
        height: f64,
        notch: f64,
        h0: f64,
    },
    /// Quarter model of a slab with a central crack; groups `sym_x`,
    /// `sym_y`, `load`.
    CentralCrackSlab {
        width: f64,
        height: f64,
        crack: f64,
        h0: f64,
    },
    /// Panel with circular holes; groups `fixed` (left) and `load` (right).
    HoledPanel {
        width: f64,
        height: f64,
        h0: f64,
        holes: Vec<Hole>,
    },
    /// Two sheets bonded along a weak vertical seam, pre-cracked from the
    /// left at mid-height; groups `grip_bottom`, `grip_top`. The seam band
    /// carries region tag 1.
    InterfaceStrip {
        width: f64,
        height: f64,
        notch: f64,
        band_center: f64,
        band_width: f64,
        h0: f64,
    },
    /// Plain structured rectangle; groups `bottom`, `right`, `top`, `left`.
    Rect {
        width: f64,
        height: f64,
        nx: usize,
        ny: usize,
    },
    /// External mesh in the plain-text exchange format, with whatever groups
    /// its nodes carry.
    MeshFile { path: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hole {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

/// Compressible neo-Hookean material. Exactly one of `nu` (Poisson form,
/// beta = 2 nu / (1 - nu)) or `lambda` (Lame form, beta = lambda / mu) picks
/// the volumetric coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    /// Shear modulus (N/mm^2).
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Residual stiffness fraction keeping broken material invertible.
    #[serde(default = "default_residual_stiffness")]
    pub residual_stiffness: f64,
}

fn default_residual_stiffness() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrackSpec {
    pub variant: CrackVariant,
    /// Regularization length (mm).
    pub l0: f64,
    /// Fracture energy of the bulk (N/mm).
    pub gc_bulk: f64,
    /// Fracture energy of tagged interface regions, when different.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gc_interface: Option<f64>,
    /// Viscous regularization (N s/mm^2); zero is rate-independent.
    #[serde(default)]
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    /// Node group whose reaction force is reported.
    pub reaction_group: String,
    /// Reaction component: 0 horizontal, 1 vertical.
    pub reaction_component: usize,
    /// Multiplier taking the model reaction force to the reported value; 2
    /// restores the full cross-section of a symmetric half model.
    /// Displacements are reported as applied.
    pub report_scale: f64,
    #[serde(default)]
    pub dirichlet: Vec<DirichletEntry>,
    #[serde(default)]
    pub traction: Vec<TractionEntry>,
}

/// Prescribed displacement per unit load factor; an absent component is
/// unconstrained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletEntry {
    pub group: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ux: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uy: Option<f64>,
}

/// Dead-load traction per unit load factor (N/mm per mm of edge).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TractionEntry {
    pub group: String,
    pub tx: f64,
    pub ty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadingSpec {
    /// Load factor at which the schedule ends (mm of applied displacement
    /// for displacement-driven scenarios).
    pub target: f64,
    pub initial_increment: f64,
    /// Floor below which adaptive halving gives up. Default: 1e-6 of the
    /// initial increment.
    #[serde(default)]
    pub min_increment: Option<f64>,
    /// Ceiling for adaptive growth. Default: the initial increment.
    #[serde(default)]
    pub max_increment: Option<f64>,
    /// Load factor per second; converts increments to viscous time steps.
    #[serde(default = "default_rate")]
    pub rate: f64,
}

fn default_rate() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Run directory; holds the resolved scenario, CSV, records, snapshots.
    pub dir: String,
    /// Write VTK snapshots every N accepted steps; 0 disables them.
    pub snapshot_every: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: "out".to_string(),
            snapshot_every: 0,
        }
    }
}

/// Parses a scenario document. A `preset = "name"` key (with optional
/// `tier = "desk"|"full"`) pulls that preset's definition first; every other
/// key in the document then overrides the preset value at the same path.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut table: toml::Table = text.parse()?;
    let preset = take_string(&mut table, "preset")?;
    let tier_key = take_string(&mut table, "tier")?;
    if preset.is_none() && tier_key.is_some() {
        return Err(invalid("tier", "only meaningful together with a preset"));
    }
    let tier = match tier_key {
        None => Tier::Desk,
        Some(t) => t.parse().map_err(|e: String| invalid("tier", e))?,
    };
    let merged = match preset {
        Some(name) => {
            let base = preset_scenario(&name, tier)?;
            let mut base_table = scenario_to_table(&base);
            merge_tables(&mut base_table, table);
            base_table
        }
        None => table,
    };
    scenario_from_table(merged)
}

fn take_string(table: &mut toml::Table, key: &str) -> Result<Option<String>, ScenarioError> {
    match table.remove(key) {
        None => Ok(None),
        Some(toml::Value::String(s)) => Ok(Some(s)),
        Some(other) => Err(invalid(key, format!("expected a string, got {other}"))),
    }
}

/// Recursive table merge, overriding values take precedence. The `geometry`
/// table is replaced wholesale when the override names a different variant,
/// since two variant keys cannot coexist.
fn merge_tables(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => {
                if key == "geometry" && different_single_key(b, &o) {
                    *b = o;
                } else {
                    merge_tables(b, o);
                }
            }
            (Some(slot), v) => *slot = v,
            (None, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn different_single_key(base: &toml::Table, over: &toml::Table) -> bool {
    match (base.keys().next(), over.keys().next()) {
        (Some(b), Some(o)) => base.len() == 1 && over.len() == 1 && b != o,
        _ => false,
    }
}

pub fn scenario_to_table(scenario: &Scenario) -> toml::Table {
    match toml::Value::try_from(scenario) {
        Ok(toml::Value::Table(t)) => t,
        _ => unreachable!("a scenario always serializes to a table"),
    }
}

pub fn scenario_from_table(table: toml::Table) -> Result<Scenario, ScenarioError> {
    let mut scenario: Scenario = table.try_into()?;
    scenario.normalize();
    scenario.validate()?;
    Ok(scenario)
}

/// Applies a `section.key=value` override to a scenario document; the value
/// is parsed as a TOML literal, falling back to a bare string.
pub fn set_path(table: &mut toml::Table, path: &str, value: &str) -> Result<(), ScenarioError> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(invalid(path, "empty key segment"));
    }
    let mut current = table;
    for key in &keys[..keys.len() - 1] {
        current = current
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| invalid(*key, "path walks through a non-table value"))?;
    }
    current.insert(keys[keys.len() - 1].to_string(), parse_literal(value));
    Ok(())
}

fn parse_literal(value: &str) -> toml::Value {
    let doc = format!("v = {value}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key v was just written"),
        Err(_) => toml::Value::String(value.to_string()),
    }
}

impl Scenario {
    pub fn preset(name: &str) -> Result<Scenario, ScenarioError> {
        preset_scenario(name, Tier::Desk)
    }

    pub fn preset_tier(name: &str, tier: Tier) -> Result<Scenario, ScenarioError> {
        preset_scenario(name, tier)
    }

    /// Fills derived defaults so the serialized form is fully explicit.
    fn normalize(&mut self) {
        if self.loading.min_increment.is_none() {
            self.loading.min_increment = Some(self.loading.initial_increment * 1e-6);
        }
        if self.loading.max_increment.is_none() {
            self.loading.max_increment = Some(self.loading.initial_increment);
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!(
                    "this build reads version {SCHEMA_VERSION}, got {}",
                    self.schema_version
                ),
            ));
        }
        if self.name.is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        self.validate_geometry()?;
        self.validate_material()?;
        self.validate_crack()?;
        self.validate_boundary()?;
        self.validate_loading()?;
        self.validate_solver()?;
        self.validate_adaptivity()?;
        Ok(())
    }

    fn validate_geometry(&self) -> Result<(), ScenarioError> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("geometry.{field}"), format!("must be positive, got {v}")))
            }
        };
        match &self.geometry {
            Geometry::DoubleEdgeNotch { width, height, notch, h0 } => {
                positive("width", *width)?;
                positive("height", *height)?;
                positive("h0", *h0)?;
                if !(*notch > 0.0 && notch < width) {
                    return Err(invalid(
                        "geometry.notch",
                        format!("must lie in (0, width), got {notch}"),
                    ));
                }
            }
            Geometry::CentralCrackSlab { width, height, crack, h0 } => {
                positive("width", *width)?;
                positive("height", *height)?;
                positive("h0", *h0)?;
                if !(*crack > 0.0 && crack < width) {
                    return Err(invalid(
                        "geometry.crack",
                        format!("must lie in (0, width), got {crack}"),
                    ));
                }
            }
            Geometry::HoledPanel { width, height, h0, holes } => {
                positive("width", *width)?;
                positive("height", *height)?;
                positive("h0", *h0)?;
                if holes.is_empty() {
                    return Err(invalid("geometry.holes", "must name at least one hole"));
                }
                for (i, hole) in holes.iter().enumerate() {
                    if !(hole.r > 0.0 && hole.r.is_finite()) {
                        return Err(invalid(
                            format!("geometry.holes[{i}].r"),
                            format!("must be positive, got {}", hole.r),
                        ));
                    }
                }
            }
            Geometry::InterfaceStrip { width, height, notch, band_center, band_width, h0 } => {
                positive("width", *width)?;
                positive("height", *height)?;
                positive("h0", *h0)?;
                positive("band_width", *band_width)?;
                if !(*notch > 0.0 && notch < width) {
                    return Err(invalid(
                        "geometry.notch",
                        format!("must lie in (0, width), got {notch}"),
                    ));
                }
                if !(*band_center > 0.0 && band_center < width) {
                    return Err(invalid(
                        "geometry.band_center",
                        format!("must lie in (0, width), got {band_center}"),
                    ));
                }
            }
            Geometry::Rect { width, height, nx, ny } => {
                positive("width", *width)?;
                positive("height", *height)?;
                if *nx == 0 || *ny == 0 {
                    return Err(invalid("geometry.nx", "divisions must be at least 1"));
                }
            }
            Geometry::MeshFile { path } => {
                if path.is_empty() {
                    return Err(invalid("geometry.path", "must not be empty"));
                }
            }
        }
        Ok(())
    }

    fn validate_material(&self) -> Result<(), ScenarioError> {
        let m = &self.material;
        if !(m.mu > 0.0 && m.mu.is_finite()) {
            return Err(invalid("material.mu", format!("must be positive, got {}", m.mu)));
        }
        match (m.nu, m.lambda) {
            (Some(_), Some(_)) => {
                return Err(invalid("material", "give exactly one of nu and lambda, got both"))
            }
            (None, None) => {
                return Err(invalid("material", "give exactly one of nu and lambda, got neither"))
            }
            (Some(nu), None) => {
                if !(nu > 0.0 && nu < 0.5) {
                    return Err(invalid(
                        "material.nu",
                        format!("must lie in (0, 0.5), got {nu}"),
                    ));
                }
            }
            (None, Some(lambda)) => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(invalid(
                        "material.lambda",
                        format!("must be positive, got {lambda}"),
                    ));
                }
            }
        }
        if !(m.residual_stiffness >= 0.0 && m.residual_stiffness < 1e-2) {
            return Err(invalid(
                "material.residual_stiffness",
                format!("must lie in [0, 1e-2), got {}", m.residual_stiffness),
            ));
        }
        Ok(())
    }

    fn validate_crack(&self) -> Result<(), ScenarioError> {
        let c = &self.crack;
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("crack.{field}"), format!("must be positive, got {v}")))
            }
        };
        positive("l0", c.l0)?;
        positive("gc_bulk", c.gc_bulk)?;
        if let Some(gci) = c.gc_interface {
            positive("gc_interface", gci)?;
        }
        if !(c.eta >= 0.0 && c.eta.is_finite()) {
            return Err(invalid("crack.eta", format!("must be non-negative, got {}", c.eta)));
        }
        Ok(())
    }

    fn validate_boundary(&self) -> Result<(), ScenarioError> {
        let b = &self.boundary;
        if b.reaction_group.is_empty() {
            return Err(invalid("boundary.reaction_group", "must name a node group"));
        }
        if b.reaction_component > 1 {
            return Err(invalid(
                "boundary.reaction_component",
                format!("must be 0 or 1, got {}", b.reaction_component),
            ));
        }
        if !(b.report_scale > 0.0 && b.report_scale.is_finite()) {
            return Err(invalid(
                "boundary.report_scale",
                format!("must be positive, got {}", b.report_scale),
            ));
        }
        if b.dirichlet.is_empty() {
            return Err(invalid("boundary.dirichlet", "must constrain at least one group"));
        }
        let mut seen = BTreeSet::new();
        for (i, d) in b.dirichlet.iter().enumerate() {
            if d.group.is_empty() {
                return Err(invalid(
                    format!("boundary.dirichlet[{i}].group"),
                    "must name a node group",
                ));
            }
            if d.ux.is_none() && d.uy.is_none() {
                return Err(invalid(
                    format!("boundary.dirichlet[{i}]"),
                    "must prescribe ux, uy, or both",
                ));
            }
            if !seen.insert(d.group.clone()) {
                return Err(invalid(
                    format!("boundary.dirichlet[{i}].group"),
                    format!("group '{}' appears twice", d.group),
                ));
            }
        }
        for (i, t) in b.traction.iter().enumerate() {
            if t.group.is_empty() {
                return Err(invalid(
                    format!("boundary.traction[{i}].group"),
                    "must name a node group",
                ));
            }
        }
        Ok(())
    }

    fn validate_loading(&self) -> Result<(), ScenarioError> {
        let l = &self.loading;
        if !(l.target > 0.0 && l.target.is_finite()) {
            return Err(invalid("loading.target", format!("must be positive, got {}", l.target)));
        }
        if !(l.initial_increment > 0.0 && l.initial_increment <= l.target) {
            return Err(invalid(
                "loading.initial_increment",
                format!("must lie in (0, target], got {}", l.initial_increment),
            ));
        }
        let min = l.min_increment.unwrap_or(l.initial_increment * 1e-6);
        let max = l.max_increment.unwrap_or(l.initial_increment);
        if !(min > 0.0 && min <= l.initial_increment) {
            return Err(invalid(
                "loading.min_increment",
                format!("must lie in (0, initial_increment], got {min}"),
            ));
        }
        if !(max >= l.initial_increment) {
            return Err(invalid(
                "loading.max_increment",
                format!("must be at least the initial increment, got {max}"),
            ));
        }
        if !(l.rate > 0.0 && l.rate.is_finite()) {
            return Err(invalid("loading.rate", format!("must be positive, got {}", l.rate)));
        }
        Ok(())
    }

    fn validate_solver(&self) -> Result<(), ScenarioError> {
        self.solver
            .validate()
            .map_err(|e| invalid("solver", e.to_string()))
    }

    fn validate_adaptivity(&self) -> Result<(), ScenarioError> {
        let a = &self.adaptivity;
        if !(a.refine_threshold > 0.0 && a.refine_threshold < 1.0) {
            return Err(invalid(
                "adaptivity.refine_threshold",
                format!("must lie in (0, 1), got {}", a.refine_threshold),
            ));
        }
        if !(a.coarsen_threshold >= 0.0 && a.coarsen_threshold < a.refine_threshold) {
            return Err(invalid(
                "adaptivity.coarsen_threshold",
                format!(
                    "must lie in [0, refine_threshold), got {}",
                    a.coarsen_threshold
                ),
            ));
        }
        if a.max_level > 32 {
            return Err(invalid(
                "adaptivity.max_level",
                format!("must be at most 32, got {}", a.max_level),
            ));
        }
        Ok(())
    }

    /// Initial element spacing of the generated mesh, when known.
    pub fn initial_spacing(&self) -> Option<f64> {
        match &self.geometry {
            Geometry::DoubleEdgeNotch { h0, .. }
            | Geometry::CentralCrackSlab { h0, .. }
            | Geometry::HoledPanel { h0, .. }
            | Geometry::InterfaceStrip { h0, .. } => Some(*h0),
            Geometry::Rect { width, height, nx, ny } => {
                Some((width / *nx as f64).max(height / *ny as f64))
            }
            Geometry::MeshFile { .. } => None,
        }
    }

    /// Element size the refinement policy drives toward at the crack:
    /// bisection halves the longest edge about every two levels, so the
    /// finest size is h0 / 2^(max_level / 2).
    pub fn target_fine_size(&self) -> Option<f64> {
        let h0 = self.initial_spacing()?;
        if !self.adaptivity.enabled {
            return Some(h0);
        }
        Some(h0 / 2f64.powf(self.adaptivity.max_level as f64 / 2.0))
    }

    /// Constructs the mesh and models. `base_dir` anchors a relative
    /// `mesh_file` path, normally the scenario file's directory.
    pub fn build(&self, base_dir: &Path) -> Result<Simulation, ScenarioError> {
        self.validate()?;
        let mesh = self.build_mesh(base_dir)?;

        let groups: Vec<(String, String)> = self
            .boundary
            .dirichlet
            .iter()
            .enumerate()
            .map(|(i, d)| (format!("boundary.dirichlet[{i}].group"), d.group.clone()))
            .chain(
                self.boundary
                    .traction
                    .iter()
                    .enumerate()
                    .map(|(i, t)| (format!("boundary.traction[{i}].group"), t.group.clone())),
            )
            .chain(std::iter::once((
                "boundary.reaction_group".to_string(),
                self.boundary.reaction_group.clone(),
            )))
            .collect();
        for (field, group) in groups {
            if mesh.group_nodes(&group).is_empty() {
                return Err(invalid(field, format!("mesh has no node group '{group}'")));
            }
        }

        let m = &self.material;
        let material = match (m.nu, m.lambda) {
            (Some(nu), None) => MaterialModel::nu_form(m.mu, nu, m.residual_stiffness),
            (None, Some(lambda)) => MaterialModel::lambda_form(m.mu, lambda, m.residual_stiffness),
            _ => unreachable!("validate enforces exactly one volumetric parameter"),
        }
        .map_err(|e| invalid("material", e.to_string()))?;

        let crack = CrackModel::new(
            self.crack.variant,
            self.crack.l0,
            self.crack.gc_bulk,
            self.crack.gc_interface,
            self.crack.eta,
        )
        .map_err(|e| invalid("crack", e.to_string()))?;

        let bcs = BoundaryConditions {
            dirichlet: self
                .boundary
                .dirichlet
                .iter()
                .map(|d| DirichletSpec {
                    group: d.group.clone(),
                    components: [d.ux, d.uy],
                })
                .collect(),
            tractions: self
                .boundary
                .traction
                .iter()
                .map(|t| TractionSpec {
                    group: t.group.clone(),
                    t: [t.tx, t.ty],
                })
                .collect(),
        };

        let mut loading = LoadSchedule::new(self.loading.initial_increment, self.loading.target);
        loading.min_increment = self
            .loading
            .min_increment
            .unwrap_or(self.loading.initial_increment * 1e-6);
        loading.max_increment = self
            .loading
            .max_increment
            .unwrap_or(self.loading.initial_increment);
        loading.rate = self.loading.rate;

        Ok(Simulation {
            mesh,
            material,
            crack,
            bcs,
            loading,
            config: self.solver.clone(),
            adaptivity: self.adaptivity.clone(),
            reaction_group: self.boundary.reaction_group.clone(),
            reaction_component: self.boundary.reaction_component,
            report_scale: self.boundary.report_scale,
        })
    }

    fn build_mesh(&self, base_dir: &Path) -> Result<TriMesh, ScenarioError> {
        match &self.geometry {
            Geometry::DoubleEdgeNotch { width, height, notch, h0 } => {
                Ok(double_edge_notch(*width, *height, *notch, *h0)?)
            }
            Geometry::CentralCrackSlab { width, height, crack, h0 } => {
                Ok(central_crack_slab(*width, *height, *crack, *h0)?)
            }
            Geometry::HoledPanel { width, height, h0, holes } => {
                let specs: Vec<HoleSpec> = holes
                    .iter()
                    .map(|h| HoleSpec {
                        center: [h.x, h.y],
                        radius: h.r,
                    })
                    .collect();
                Ok(holed_panel(*width, *height, &specs, *h0)?)
            }
            Geometry::InterfaceStrip { width, height, notch, band_center, band_width, h0 } => {
                let region = RegionMap::VerticalBand {
                    x0: band_center - band_width / 2.0,
                    x1: band_center + band_width / 2.0,
                    tag: 1,
                };
                Ok(interface_strip(*width, *height, *notch, *h0, region)?)
            }
            Geometry::Rect { width, height, nx, ny } => {
                Ok(rect_structured(*width, *height, *nx, *ny, [0.0, 0.0])?)
            }
            Geometry::MeshFile { path } => {
                let full = base_dir.join(path);
                Ok(crate::io::read_mesh(&full)?)
            }
        }
    }
}

/// Shortest longest-edge over the elements: the sharpest resolution actually
/// present in a mesh.
pub fn finest_element_size(mesh: &TriMesh) -> f64 {
    let mut finest = f64::INFINITY;
    for e in &mesh.elements {
        let mut longest: f64 = 0.0;
        for k in 0..3 {
            let a = mesh.nodes[e.nodes[k]].x;
            let b = mesh.nodes[e.nodes[(k + 1) % 3]].x;
            longest = longest.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
        }
        finest = finest.min(longest);
    }
    finest
}

fn preset_scenario(name: &str, tier: Tier) -> Result<Scenario, ScenarioError> {
    let desk = tier == Tier::Desk;
    let scenario = match name {
        // Double-edge-notched rubber sheet under tension, quarter model.
        // Elastomer constants fitted to Hocine's experiments; quadratic
        // crack density.
        "double_edge_notch" => Scenario {
            schema_version: SCHEMA_VERSION,
            name: name.to_string(),
            geometry: Geometry::DoubleEdgeNotch {
                width: 40.0,
                height: 100.0,
                notch: 16.0,
                h0: if desk { 2.0 } else { 1.0 },
            },
            material: MaterialSpec {
                mu: 0.612,
                nu: Some(0.45),
                lambda: None,
                residual_stiffness: 1e-8,
            },
            crack: CrackSpec {
                variant: CrackVariant::At2,
                l0: 1.0,
                gc_bulk: 7.5,
                gc_interface: None,
                eta: 1e-3,
            },
            boundary: BoundarySpec {
                reaction_group: "load".to_string(),
                reaction_component: 1,
                report_scale: 2.0,
                dirichlet: vec![
                    dirichlet_x("sym_x", 0.0),
                    dirichlet_y("sym_y", 0.0),
                    dirichlet_y("load", 1.0),
                ],
                traction: Vec::new(),
            },
            loading: LoadingSpec {
                target: 66.0,
                initial_increment: 1.0,
                min_increment: None,
                max_increment: Some(2.0),
                rate: 1.0,
            },
            solver: SolverConfig::default(),
            adaptivity: AdaptivityConfig {
                enabled: true,
                refine_threshold: 0.25,
                coarsen_threshold: 0.05,
                max_level: 6,
            },
            output: OutputSpec::default(),
        },
        // Slab with a central crack, quarter model; Lame-form volumetric
        // coupling and the linear crack density with its elastic threshold.
        // The source figure gives no dimensions, so the geometry here is an
        // estimate sized to the published failure displacement.
        "central_crack_slab" => Scenario {
            schema_version: SCHEMA_VERSION,
            name: name.to_string(),
            geometry: Geometry::CentralCrackSlab {
                width: 0.5,
                height: 0.5,
                crack: 0.15,
                h0: 0.05,
            },
            material: MaterialSpec {
                mu: 5.0,
                nu: None,
                lambda: Some(7.5),
                residual_stiffness: 1e-8,
            },
            crack: CrackSpec {
                variant: CrackVariant::At1,
                l0: 0.01,
                gc_bulk: 3.0,
                gc_interface: None,
                eta: 1e-3,
            },
            boundary: BoundarySpec {
                reaction_group: "load".to_string(),
                reaction_component: 1,
                report_scale: 2.0,
                dirichlet: vec![
                    dirichlet_x("sym_x", 0.0),
                    dirichlet_y("sym_y", 0.0),
                    dirichlet_y("load", 1.0),
                ],
                traction: Vec::new(),
            },
            loading: LoadingSpec {
                target: 0.55,
                initial_increment: 0.005,
                min_increment: None,
                max_increment: Some(0.01),
                rate: 1.0,
            },
            solver: SolverConfig::default(),
            adaptivity: AdaptivityConfig {
                enabled: true,
                refine_threshold: 0.25,
                coarsen_threshold: 0.05,
                max_level: if desk { 6 } else { 12 },
            },
            output: OutputSpec::default(),
        },
        // Soft panel with two offset holes stretched horizontally; cracks
        // nucleate at the hole rims without any pre-crack.
        "holed_panel" => Scenario {
            schema_version: SCHEMA_VERSION,
            name: name.to_string(),
            geometry: Geometry::HoledPanel {
                width: 40.0,
                height: 40.0,
                h0: 2.0,
                holes: vec![
                    Hole { x: 15.0, y: 25.0, r: 5.0 },
                    Hole { x: 25.0, y: 15.0, r: 5.0 },
                ],
            },
            material: MaterialSpec {
                mu: 0.28,
                nu: Some(0.45),
                lambda: None,
                residual_stiffness: 1e-8,
            },
            crack: CrackSpec {
                variant: CrackVariant::At1,
                l0: 0.5,
                gc_bulk: 1.4,
                gc_interface: None,
                eta: 1e-3,
            },
            boundary: BoundarySpec {
                reaction_group: "load".to_string(),
                reaction_component: 0,
                report_scale: 1.0,
                dirichlet: vec![
                    DirichletEntry {
                        group: "fixed".to_string(),
                        ux: Some(0.0),
                        uy: Some(0.0),
                    },
                    dirichlet_x("load", 1.0),
                ],
                traction: Vec::new(),
            },
            loading: LoadingSpec {
                target: 35.0,
                initial_increment: 0.25,
                min_increment: None,
                max_increment: Some(0.5),
                rate: 1.0,
            },
            solver: SolverConfig::default(),
            adaptivity: AdaptivityConfig {
                enabled: true,
                refine_threshold: 0.25,
                coarsen_threshold: 0.05,
                max_level: if desk { 4 } else { 9 },
            },
            output: OutputSpec::default(),
        },
        // Pre-cracked strip of two sheets bonded along a weak vertical seam;
        // the crack reaches the seam and deflects along it when the seam is
        // much weaker than the bulk.
        "interface_strip" => Scenario {
            schema_version: SCHEMA_VERSION,
            name: name.to_string(),
            geometry: Geometry::InterfaceStrip {
                width: 24.0,
                height: 120.0,
                notch: 12.0,
                band_center: 12.0,
                band_width: 0.8,
                h0: 1.5,
            },
            material: MaterialSpec {
                mu: 0.035,
                nu: Some(0.45),
                lambda: None,
                residual_stiffness: 1e-8,
            },
            crack: CrackSpec {
                variant: CrackVariant::At1,
                l0: 0.2,
                gc_bulk: 0.034,
                gc_interface: Some(0.0017),
                eta: 1e-3,
            },
            boundary: BoundarySpec {
                reaction_group: "grip_top".to_string(),
                reaction_component: 1,
                report_scale: 1.0,
                dirichlet: vec![
                    DirichletEntry {
                        group: "grip_bottom".to_string(),
                        ux: Some(0.0),
                        uy: Some(-1.0),
                    },
                    DirichletEntry {
                        group: "grip_top".to_string(),
                        ux: Some(0.0),
                        uy: Some(1.0),
                    },
                ],
                traction: Vec::new(),
            },
            loading: LoadingSpec {
                target: 15.0,
                initial_increment: 0.25,
                min_increment: None,
                max_increment: Some(0.5),
                rate: 1.0,
            },
            solver: SolverConfig::default(),
            adaptivity: AdaptivityConfig {
                enabled: true,
                refine_threshold: 0.25,
                coarsen_threshold: 0.05,
                max_level: if desk { 8 } else { 10 },
            },
            output: OutputSpec::default(),
        },
        other => return Err(ScenarioError::UnknownPreset(other.to_string())),
    };
    let mut scenario = scenario;
    scenario.normalize();
    Ok(scenario)
}

fn dirichlet_x(group: &str, value: f64) -> DirichletEntry {
    DirichletEntry {
        group: group.to_string(),
        ux: Some(value),
        uy: None,
    }
}

fn dirichlet_y(group: &str, value: f64) -> DirichletEntry {
    DirichletEntry {
        group: group.to_string(),
        ux: None,
        uy: Some(value),
    }
}
