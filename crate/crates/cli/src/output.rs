//! Output files and their JSON sidecars.

use std::path::PathBuf;

use fbsys::diagnostics::{write_contour_csv, Contour};
use fbsys::io::fmt_f64;
use fbsys::DomainMesh;
use serde_json::json;

use crate::config::RunConfig;
use crate::Failure;

pub struct Out<'a> {
    pub cfg: &'a RunConfig,
    pub mesh: &'a DomainMesh,
    pub files: Vec<PathBuf>,
}

impl<'a> Out<'a> {
    pub fn new(cfg: &'a RunConfig, mesh: &'a DomainMesh) -> Result<Self, Failure> {
        std::fs::create_dir_all(&cfg.output).map_err(io)?;
        Ok(Out { cfg, mesh, files: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.cfg.output.join(name)
    }

    /// Writes `<name>.json` next to an output file that already exists.
    pub fn sidecar(&mut self, name: &str) -> Result<(), Failure> {
        let t = &self.cfg.tolerances;
        let meta = json!({
            "file": name,
            "config_hash": self.cfg.hash(),
            "mode": self.cfg.mode,
            "seed": self.cfg.seed,
            "mesh": {
                "shape": self.cfg.domain.shape,
                "aspect": self.cfg.domain.aspect,
                "n": self.cfg.domain.n,
                "h": self.mesh.h(),
                "interior_nodes": self.mesh.len(),
            },
            "tolerances": {
                "newton": t.newton,
                "newton_max_iter": t.newton_max_iter,
                "fixed_point": t.fixed_point,
                "sigma_floor": t.sigma_floor,
                "bracket_width": self.cfg.step.bracket_width,
            },
        });
        self.json(&format!("{name}.json"), &meta)?;
        self.files.push(self.path(name));
        Ok(())
    }

    pub fn json(&self, name: &str, v: &serde_json::Value) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(v).expect("json serializes");
        std::fs::write(self.path(name), text + "\n").map_err(io)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), Failure> {
        fbsys::io::write_csv(&self.path(name), header, rows).map_err(io)?;
        self.sidecar(name)
    }

    /// One CSV per contour plus `<prefix>contours.json` listing them.
    pub fn contours(&mut self, prefix: &str, contours: &[Contour]) -> Result<(), Failure> {
        let mut entries = Vec::new();
        for (k, c) in contours.iter().enumerate() {
            let name = format!("{prefix}contour_{k:03}.csv");
            write_contour_csv(c, &self.path(&name)).map_err(Failure::from_core)?;
            self.sidecar(&name)?;
            entries.push(json!({
                "file": name,
                "component": c.component,
                "closed": c.closed,
                "interior": c.interior,
                "points": c.points.len(),
                "area": c.area,
            }));
        }
        self.json(&format!("{prefix}contours.json"), &json!({ "contours": entries }))
    }
}

pub fn row(values: &[f64]) -> Vec<String> {
    values.iter().map(|&v| fmt_f64(v)).collect()
}

pub fn io(e: std::io::Error) -> Failure {
    Failure::Solver(fbsys::Error::Io(e).to_string())
}
