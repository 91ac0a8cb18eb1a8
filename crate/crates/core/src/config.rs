//! Run configuration: a single sectioned key-value text file.
//!
//! The format is deliberately small so a run is fully described by one
//! human-diffable file: `[section]` headers, `key = value` lines, `#`
//! comments, whitespace-separated lists. Unknown sections or keys are
//! rejected rather than ignored, so a typo cannot silently fall back to a
//! default. Every key has a default tuned to the harmonic desk case; an
//! empty file is a valid configuration.
//!
//! ```text
//! [potential]
//! kind = square          # square | table | zero
//! v0 = 4.0               # barrier height (square)
//! radius = 1.0           # barrier radius (square)
//! file = pot.dat         # two-column r V(r) table (table)
//!
//! [trap]
//! kind = harmonic        # harmonic | polynomial | none
//! box_half_width = 12.0
//! coefficients = 0.0 0.0 0.5   # polynomial in r
//!
//! [scattering]
//! ell = 0.4              # ball radius exponent ratio, Nℓ = ell·N
//! r_max = 4000.0         # output grid extent
//! points = 4000          # output grid size
//! ell_n_list = 100 300 1000 3000   # Neumann family for asymptotics
//!
//! [gp]
//! a0 = 0.37182           # optional: skip the scattering solve
//! nodes = 480            # radial basis size
//!
//! [spectrum]
//! max_l = 3              # angular momentum channels merged
//! count = 12             # eigenvalues kept per channel
//! zeta = 10.0            # excitation-level enumeration cutoff
//!
//! [kernels]
//! n_list = 25 50 100     # particle numbers for the kernel suite
//!
//! [ebog]
//! kappa = 5.0
//! quad_nodes = 128
//! delta_list = 0.8 0.4 0.2 0.1 0.05
//!
//! [oracle]
//! n_max = 16             # Fock truncation
//! cases = 10             # seeded random forms
//!
//! [output]
//! directory = out
//! seed = 1
//! binary_dumps = false
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{validation, Error, Result};

/// Potential specification prior to construction.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Square { v0: f64, radius: f64 },
    Table { file: PathBuf },
    Zero,
}

/// Trap specification prior to construction.
#[derive(Debug, Clone, PartialEq)]
pub enum TrapSpec {
    Harmonic { box_half_width: f64 },
    Polynomial {
        coefficients: Vec<f64>,
        box_half_width: f64,
    },
    None,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub potential: PotentialSpec,
    pub trap: TrapSpec,
    /// Scattering length override; when absent the scatter stage must run.
    pub a0_override: Option<f64>,
    pub ell: f64,
    pub scatter_r_max: f64,
    pub scatter_points: usize,
    /// Ball radii `Nℓ` for the Neumann asymptotics family.
    pub ell_n_list: Vec<f64>,
    /// Radial basis size for the GP solve and everything downstream.
    pub gp_nodes: usize,
    pub max_l: u32,
    pub count: usize,
    pub zeta: f64,
    /// Particle numbers for the kernel comparison suite.
    pub n_list: Vec<f64>,
    pub kappa: f64,
    pub quad_nodes: usize,
    pub delta_list: Vec<f64>,
    pub oracle_n_max: usize,
    pub oracle_cases: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub binary_dumps: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            potential: PotentialSpec::Square { v0: 4.0, radius: 1.0 },
            trap: TrapSpec::Harmonic { box_half_width: 12.0 },
            a0_override: None,
            ell: 0.4,
            scatter_r_max: 4000.0,
            scatter_points: 4000,
            ell_n_list: vec![100.0, 300.0, 1000.0, 3000.0],
            gp_nodes: 480,
            max_l: 3,
            count: 12,
            zeta: 10.0,
            n_list: vec![25.0, 50.0, 100.0],
            kappa: 5.0,
            quad_nodes: 128,
            delta_list: vec![0.8, 0.4, 0.2, 0.1, 0.05],
            oracle_n_max: 16,
            oracle_cases: 10,
            out_dir: PathBuf::from("out"),
            seed: 1,
            binary_dumps: false,
        }
    }
}

/// Raw parsed sections: section name → key → value string.
type Sections = BTreeMap<String, BTreeMap<String, String>>;

fn parse_sections(text: &str) -> Result<Sections> {
    let mut sections: Sections = BTreeMap::new();
    let mut current = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Validation(format!("line {}: unterminated section header", lineno + 1)))?
                .trim();
            current = name.to_string();
            sections.entry(current.clone()).or_default();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Validation(format!("line {}: expected 'key = value', got '{line}'", lineno + 1))
        })?;
        if current.is_empty() {
            return validation(format!("line {}: key outside any [section]", lineno + 1));
        }
        let prev = sections
            .get_mut(&current)
            .unwrap()
            .insert(key.trim().to_string(), value.trim().to_string());
        if prev.is_some() {
            return validation(format!("line {}: duplicate key '{}'", lineno + 1, key.trim()));
        }
    }
    Ok(sections)
}

fn parse_f64(section: &str, key: &str, value: &str) -> Result<f64> {
    value.parse().map_err(|_| {
        Error::Validation(format!("[{section}] {key}: '{value}' is not a number"))
    })
}

fn parse_list(section: &str, key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split_whitespace()
        .map(|tok| parse_f64(section, key, tok))
        .collect()
}

fn parse_usize(section: &str, key: &str, value: &str) -> Result<usize> {
    value.parse().map_err(|_| {
        Error::Validation(format!("[{section}] {key}: '{value}' is not a count"))
    })
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => validation(format!("[{section}] {key}: '{value}' is not a boolean")),
    }
}

impl RunConfig {
    /// Parse a configuration file; relative paths inside it resolve
    /// against the file's directory.
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        RunConfig::from_str_with_base(&text, base)
    }

    /// Parse configuration text with an explicit base for relative paths.
    pub fn from_str_with_base(text: &str, base: &Path) -> Result<RunConfig> {
        let sections = parse_sections(text)?;
        let mut cfg = RunConfig::default();
        for (section, keys) in &sections {
            for (key, value) in keys {
                cfg.apply(section, key, value, base)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str, base: &Path) -> Result<()> {
        match (section, key) {
            ("potential", "kind") => match value {
                "square" => {
                    if !matches!(self.potential, PotentialSpec::Square { .. }) {
                        self.potential = PotentialSpec::Square { v0: 4.0, radius: 1.0 };
                    }
                }
                "table" => {
                    if !matches!(self.potential, PotentialSpec::Table { .. }) {
                        self.potential = PotentialSpec::Table { file: PathBuf::new() };
                    }
                }
                "zero" => self.potential = PotentialSpec::Zero,
                _ => return validation(format!("[potential] kind: unknown '{value}'")),
            },
            ("potential", "v0") => {
                let v = parse_f64(section, key, value)?;
                match &mut self.potential {
                    PotentialSpec::Square { v0, .. } => *v0 = v,
                    _ => self.potential = PotentialSpec::Square { v0: v, radius: 1.0 },
                }
            }
            ("potential", "radius") => {
                let r = parse_f64(section, key, value)?;
                match &mut self.potential {
                    PotentialSpec::Square { radius, .. } => *radius = r,
                    _ => self.potential = PotentialSpec::Square { v0: 4.0, radius: r },
                }
            }
            ("potential", "file") => {
                self.potential = PotentialSpec::Table { file: base.join(value) };
            }
            ("trap", "kind") => match value {
                "harmonic" => {
                    if !matches!(self.trap, TrapSpec::Harmonic { .. }) {
                        self.trap = TrapSpec::Harmonic { box_half_width: 12.0 };
                    }
                }
                "polynomial" => {
                    if !matches!(self.trap, TrapSpec::Polynomial { .. }) {
                        self.trap = TrapSpec::Polynomial {
                            coefficients: vec![0.0, 0.0, 0.5],
                            box_half_width: 12.0,
                        };
                    }
                }
                "none" => self.trap = TrapSpec::None,
                _ => return validation(format!("[trap] kind: unknown '{value}'")),
            },
            ("trap", "box_half_width") => {
                let w = parse_f64(section, key, value)?;
                match &mut self.trap {
                    TrapSpec::Harmonic { box_half_width }
                    | TrapSpec::Polynomial { box_half_width, .. } => *box_half_width = w,
                    TrapSpec::None => {
                        self.trap = TrapSpec::Harmonic { box_half_width: w }
                    }
                }
            }
            ("trap", "coefficients") => {
                let coeffs = parse_list(section, key, value)?;
                match &mut self.trap {
                    TrapSpec::Polynomial { coefficients, .. } => *coefficients = coeffs,
                    _ => {
                        self.trap = TrapSpec::Polynomial {
                            coefficients: coeffs,
                            box_half_width: 12.0,
                        }
                    }
                }
            }
            ("scattering", "ell") => self.ell = parse_f64(section, key, value)?,
            ("scattering", "r_max") => self.scatter_r_max = parse_f64(section, key, value)?,
            ("scattering", "points") => self.scatter_points = parse_usize(section, key, value)?,
            ("scattering", "ell_n_list") => self.ell_n_list = parse_list(section, key, value)?,
            ("gp", "a0") => self.a0_override = Some(parse_f64(section, key, value)?),
            ("gp", "nodes") => self.gp_nodes = parse_usize(section, key, value)?,
            ("spectrum", "max_l") => {
                self.max_l = parse_usize(section, key, value)? as u32
            }
            ("spectrum", "count") => self.count = parse_usize(section, key, value)?,
            ("spectrum", "zeta") => self.zeta = parse_f64(section, key, value)?,
            ("kernels", "n_list") => self.n_list = parse_list(section, key, value)?,
            ("ebog", "kappa") => self.kappa = parse_f64(section, key, value)?,
            ("ebog", "quad_nodes") => self.quad_nodes = parse_usize(section, key, value)?,
            ("ebog", "delta_list") => self.delta_list = parse_list(section, key, value)?,
            ("oracle", "n_max") => self.oracle_n_max = parse_usize(section, key, value)?,
            ("oracle", "cases") => self.oracle_cases = parse_usize(section, key, value)?,
            ("output", "directory") => self.out_dir = base.join(value),
            ("output", "seed") => {
                self.seed = value.parse().map_err(|_| {
                    Error::Validation(format!("[output] seed: '{value}' is not a u64"))
                })?
            }
            ("output", "binary_dumps") => self.binary_dumps = parse_bool(section, key, value)?,
            _ => return validation(format!("unknown configuration key [{section}] {key}")),
        }
        Ok(())
    }

    /// Range checks shared by the file parser and flag overrides.
    pub fn validate(&self) -> Result<()> {
        if let PotentialSpec::Square { v0, radius } = self.potential {
            if v0 < 0.0 || radius <= 0.0 {
                return validation("[potential] square barrier needs v0 ≥ 0, radius > 0");
            }
        }
        if let PotentialSpec::Table { file } = &self.potential {
            if !file.is_file() {
                return validation(format!(
                    "[potential] file {} does not exist",
                    file.display()
                ));
            }
        }
        if !(self.ell > 0.0 && self.ell < 1.0) {
            return validation(format!("[scattering] ell must lie in (0,1), got {}", self.ell));
        }
        if let Some(a0) = self.a0_override {
            if a0 < 0.0 {
                return validation("[gp] a0 must be nonnegative");
            }
        }
        if self.gp_nodes < 16 {
            return validation("[gp] nodes must be at least 16");
        }
        if self.zeta <= 0.0 {
            return validation("[spectrum] zeta must be positive");
        }
        if self.kappa <= 0.0 {
            return validation("[ebog] kappa must be positive");
        }
        if self.quad_nodes < 2 {
            return validation("[ebog] quad_nodes must be at least 2");
        }
        if self.n_list.iter().any(|&n| n <= 0.0) {
            return validation("[kernels] n_list entries must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default() {
        let cfg = RunConfig::from_str_with_base("", Path::new(".")).unwrap();
        assert_eq!(cfg.gp_nodes, RunConfig::default().gp_nodes);
        assert_eq!(cfg.kappa, RunConfig::default().kappa);
    }

    #[test]
    fn sections_and_lists_parse() {
        let text = "
            [potential]
            kind = square
            v0 = 9.0      # comment
            radius = 0.5

            [kernels]
            n_list = 10 20 40

            [gp]
            a0 = 0.25
            nodes = 64

            [output]
            seed = 7
            binary_dumps = true
        ";
        let cfg = RunConfig::from_str_with_base(text, Path::new(".")).unwrap();
        assert_eq!(cfg.potential, PotentialSpec::Square { v0: 9.0, radius: 0.5 });
        assert_eq!(cfg.n_list, vec![10.0, 20.0, 40.0]);
        assert_eq!(cfg.a0_override, Some(0.25));
        assert_eq!(cfg.gp_nodes, 64);
        assert_eq!(cfg.seed, 7);
        assert!(cfg.binary_dumps);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = "[gp]\nnods = 100\n";
        assert!(RunConfig::from_str_with_base(bad, Path::new(".")).is_err());
        let bad = "[gps]\nnodes = 100\n";
        assert!(RunConfig::from_str_with_base(bad, Path::new(".")).is_err());
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(RunConfig::from_str_with_base("nodes = 5\n", Path::new(".")).is_err());
        assert!(RunConfig::from_str_with_base("[gp\nnodes = 5\n", Path::new(".")).is_err());
        assert!(RunConfig::from_str_with_base("[gp]\nnodes\n", Path::new(".")).is_err());
        assert!(RunConfig::from_str_with_base("[gp]\nnodes = 5\nnodes = 6\n", Path::new(".")).is_err());
    }

    #[test]
    fn range_checks_fire() {
        assert!(RunConfig::from_str_with_base("[scattering]\nell = 1.5\n", Path::new(".")).is_err());
        assert!(RunConfig::from_str_with_base("[ebog]\nkappa = -1\n", Path::new(".")).is_err());
        assert!(RunConfig::from_str_with_base("[gp]\na0 = -0.1\n", Path::new(".")).is_err());
    }
}
