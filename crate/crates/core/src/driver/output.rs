//! Files written by a run: CSV streams, legacy VTK snapshots, checkpoints
//! and the manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::run::{Observer, RunOutcome, StepDiagnostics};
use super::{io_err, DriverError};
use crate::angular::AngularQuadrature;
use crate::dg::{DGField, ReferenceElement};
use crate::linalg::SmallMat;
use crate::mesh::{Domain, Point, SimplicialMesh};
use crate::metric::MetricField;
use crate::mmpde::MmpdeTrace;
use crate::norms::{Norms, SpatialNorms};

pub const MANIFEST: &str = "manifest.json";

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String, DriverError> {
    let data = std::fs::read(path).map_err(io_err(path))?;
    Ok(hex(&Sha256::digest(&data)))
}

/// Write `bytes` to `path` via a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DriverError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

/// Legacy ASCII unstructured grid with optional per-cell scalars.
pub fn write_vtk(
    path: &Path,
    mesh: &SimplicialMesh,
    title: &str,
    cell_data: &[(String, Vec<f64>)],
) -> Result<(), DriverError> {
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    let nv = mesh.dim + 1;
    let ne = mesh.n_elements();
    let res: std::io::Result<()> = (|| {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "{}", title.replace('\n', " "))?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", mesh.n_vertices())?;
        for p in &mesh.vertices {
            writeln!(w, "{} {} 0", p[0], p[1])?;
        }
        writeln!(w, "CELLS {} {}", ne, ne * (nv + 1))?;
        for k in 0..ne {
            let ids: Vec<String> = mesh.element(k).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{} {}", nv, ids.join(" "))?;
        }
        writeln!(w, "CELL_TYPES {ne}")?;
        let ty = if mesh.dim == 1 { 3 } else { 5 };
        for _ in 0..ne {
            writeln!(w, "{ty}")?;
        }
        if !cell_data.is_empty() {
            writeln!(w, "CELL_DATA {ne}")?;
            for (name, vals) in cell_data {
                writeln!(w, "SCALARS {name} double 1")?;
                writeln!(w, "LOOKUP_TABLE default")?;
                for v in vals {
                    writeln!(w, "{v}")?;
                }
            }
        }
        w.flush()
    })();
    res.map_err(io_err(path))
}

/// Vertex table `step,vertex_id,x,y`.
pub fn write_vertex_csv(
    path: &Path,
    step: usize,
    mesh: &SimplicialMesh,
) -> Result<(), DriverError> {
    let mut s = String::from("step,vertex_id,x,y\n");
    for (i, p) in mesh.vertices.iter().enumerate() {
        s.push_str(&format!("{step},{i},{},{}\n", p[0], p[1]));
    }
    std::fs::write(path, s).map_err(io_err(path))
}

/// Element averages of modal coefficients `c` (`[k * L + p]`).
pub fn cell_averages(re: &ReferenceElement, c: &[f64]) -> Vec<f64> {
    let l = re.n_modes;
    c.chunks(l)
        .map(|ck| {
            (0..re.volume.len())
                .map(|q| {
                    re.volume.weights[q]
                        * (0..l).map(|p| ck[p] * re.vol_phi[q * l + p]).sum::<f64>()
                })
                .sum()
        })
        .collect()
}

/// Snapshot of a field: mesh, degree, directions and coefficients. The
/// coefficients are stored as little-endian `f64` in a companion file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Checkpoint {
    pub step: usize,
    pub time: f64,
    pub problem: String,
    pub degree: usize,
    pub domain: Domain,
    /// `(zeta, eta, mu)` per direction.
    pub directions: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub vertices: Vec<Point>,
    pub elements: Vec<usize>,
    pub coeffs_file: String,
    pub coeffs_sha256: String,
}

impl Checkpoint {
    pub fn json_name(step: usize) -> String {
        format!("checkpoint_{step:05}.json")
    }

    pub fn write(
        dir: &Path,
        step: usize,
        problem: &str,
        field: &DGField,
        quad: &AngularQuadrature,
    ) -> Result<[PathBuf; 2], DriverError> {
        Self::write_stem(
            dir,
            &format!("checkpoint_{step:05}"),
            step,
            problem,
            field,
            quad,
        )
    }

    /// Write `<stem>.json` and `<stem>.bin`.
    pub fn write_stem(
        dir: &Path,
        stem: &str,
        step: usize,
        problem: &str,
        field: &DGField,
        quad: &AngularQuadrature,
    ) -> Result<[PathBuf; 2], DriverError> {
        let bin_name = format!("{stem}.bin");
        let bin = dir.join(&bin_name);
        let bytes: Vec<u8> = field.coeffs.iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(&bin, &bytes).map_err(io_err(&bin))?;
        let cp = Checkpoint {
            step,
            time: field.time,
            problem: problem.to_string(),
            degree: field.degree,
            domain: field.mesh.domain,
            directions: quad
                .directions
                .iter()
                .map(|d| [d.omega[0], d.omega[1], d.mu])
                .collect(),
            weights: quad.weights.clone(),
            vertices: field.mesh.vertices.clone(),
            elements: field.mesh.elements.clone(),
            coeffs_file: bin_name,
            coeffs_sha256: hex(&Sha256::digest(&bytes)),
        };
        let json = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string(&cp).expect("checkpoint serializes");
        std::fs::write(&json, text).map_err(io_err(&json))?;
        Ok([json, bin])
    }

    /// The checkpoint of `step`, or the last one when `step` is `None`.
    pub fn load(dir: &Path, step: Option<usize>) -> Result<(Checkpoint, DGField), DriverError> {
        let step = match step {
            Some(s) => s,
            None => Self::steps(dir)?
                .last()
                .copied()
                .ok_or(DriverError::NoCheckpoint(0))?,
        };
        let json = dir.join(Self::json_name(step));
        if !json.exists() {
            return Err(DriverError::NoCheckpoint(step));
        }
        Self::load_file(&json)
    }

    /// Load from the JSON half of a checkpoint.
    pub fn load_file(json: &Path) -> Result<(Checkpoint, DGField), DriverError> {
        let dir = json.parent().unwrap_or(Path::new("."));
        let json = json.to_path_buf();
        let text = std::fs::read_to_string(&json).map_err(io_err(&json))?;
        let cp: Checkpoint = serde_json::from_str(&text).map_err(|e| DriverError::Format {
            path: json.clone(),
            message: e.to_string(),
        })?;
        let bin = dir.join(&cp.coeffs_file);
        let bytes = std::fs::read(&bin).map_err(io_err(&bin))?;
        let bad = |message: String| DriverError::Format {
            path: bin.clone(),
            message,
        };
        if hex(&Sha256::digest(&bytes)) != cp.coeffs_sha256 {
            return Err(bad("hash mismatch".into()));
        }
        let mesh = SimplicialMesh::from_parts(cp.domain, cp.vertices.clone(), cp.elements.clone())?;
        let mut field = DGField::zeros(Arc::new(mesh), cp.degree, cp.directions.len(), cp.time);
        if bytes.len() != 8 * field.coeffs.len() {
            return Err(bad(format!(
                "expected {} values, found {} bytes",
                field.coeffs.len(),
                bytes.len()
            )));
        }
        for (c, b) in field.coeffs.iter_mut().zip(bytes.chunks_exact(8)) {
            *c = f64::from_le_bytes(b.try_into().expect("8 bytes"));
        }
        Ok((cp, field))
    }

    /// Steps with a checkpoint in `dir`, ascending.
    pub fn steps(dir: &Path) -> Result<Vec<usize>, DriverError> {
        let mut out: Vec<usize> = std::fs::read_dir(dir)
            .map_err(io_err(dir))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                name.strip_prefix("checkpoint_")?
                    .strip_suffix(".json")?
                    .parse()
                    .ok()
            })
            .collect();
        out.sort_unstable();
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeshInfo {
    pub dim: usize,
    pub domain: Domain,
    pub subdivisions: usize,
    pub n_elements: usize,
    pub n_vertices: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InitAdaptInfo {
    pub cycle: usize,
    pub substeps: usize,
    pub rejected: usize,
    pub energy_start: Option<f64>,
    pub energy_end: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub code_version: String,
    pub config: RunConfig,
    pub overrides: Vec<String>,
    pub mesh: MeshInfo,
    pub n_directions: usize,
    pub init_adapt: Vec<InitAdaptInfo>,
    pub steps: Vec<StepDiagnostics>,
    pub global_errors: Option<Norms>,
    pub wall_seconds: f64,
    pub outputs: Vec<FileEntry>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self, DriverError> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| DriverError::Format {
            path,
            message: e.to_string(),
        })
    }
}

/// [`Observer`] that writes the configured outputs.
pub struct OutputWriter {
    dir: PathBuf,
    cfg: RunConfig,
    files: Vec<PathBuf>,
    errors: Option<BufWriter<File>>,
    diagnostics: BufWriter<File>,
    trajectory: Option<BufWriter<File>>,
    energy: Option<BufWriter<File>>,
    quad: Option<AngularQuadrature>,
    re: Option<ReferenceElement>,
    n_steps: usize,
}

fn csv_file(
    dir: &Path,
    name: &str,
    header: &str,
    files: &mut Vec<PathBuf>,
) -> Result<BufWriter<File>, DriverError> {
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    writeln!(w, "{header}").map_err(io_err(&path))?;
    files.push(path);
    Ok(w)
}

fn metric_csv(path: &Path, metric: &[SmallMat]) -> Result<(), DriverError> {
    let mut s = String::from("element_id,m11,m12,m22,det\n");
    for (k, m) in metric.iter().enumerate() {
        let (m12, m22) = if m.dim == 2 {
            (m.get(0, 1), m.get(1, 1))
        } else {
            (0.0, 0.0)
        };
        s.push_str(&format!("{k},{},{m12},{m22},{}\n", m.get(0, 0), m.det()));
    }
    std::fs::write(path, s).map_err(io_err(path))
}

impl OutputWriter {
    pub fn create(dir: &Path, cfg: &RunConfig) -> Result<Self, DriverError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut files = Vec::new();
        let config_path = dir.join("config.toml");
        std::fs::write(&config_path, cfg.to_toml()).map_err(io_err(&config_path))?;
        files.push(config_path);
        let diagnostics = csv_file(
            dir,
            "diagnostics.csv",
            "step,t,si_iterations,last_delta,sweep_violations,min_area,mmpde_substeps,mmpde_rejected,mmpde_stopped_early,mmpde_applied",
            &mut files,
        )?;
        let energy = if cfg.output.trace_energy {
            Some(csv_file(
                dir,
                "energy.csv",
                "step,substep,energy",
                &mut files,
            )?)
        } else {
            None
        };
        Ok(OutputWriter {
            dir: dir.to_path_buf(),
            cfg: cfg.clone(),
            files,
            errors: None,
            diagnostics,
            trajectory: None,
            energy,
            quad: None,
            re: None,
            n_steps: cfg.n_steps(),
        })
    }

    fn csv_line(w: &mut BufWriter<File>, line: String, path: &Path) -> Result<(), DriverError> {
        writeln!(w, "{line}").map_err(io_err(path))
    }

    fn trace_energy(&mut self, step: usize, trace: &MmpdeTrace) -> Result<(), DriverError> {
        if let Some(w) = self.energy.as_mut() {
            let path = self.dir.join("energy.csv");
            for (i, e) in trace.energies.iter().enumerate() {
                Self::csv_line(w, format!("{step},{i},{e}"), &path)?;
            }
        }
        Ok(())
    }

    fn record_mesh(
        &mut self,
        step: usize,
        t: f64,
        mesh: &SimplicialMesh,
    ) -> Result<(), DriverError> {
        let Some(w) = self.trajectory.as_mut() else {
            return Ok(());
        };
        if mesh.dim == 1 {
            let path = self.dir.join("trajectory.csv");
            let xs: Vec<String> = mesh.vertices.iter().map(|p| p[0].to_string()).collect();
            Self::csv_line(w, format!("{t},{}", xs.join(",")), &path)
        } else {
            let path = self.dir.join("vertices.csv");
            for (i, p) in mesh.vertices.iter().enumerate() {
                Self::csv_line(w, format!("{step},{i},{},{}", p[0], p[1]), &path)?;
            }
            Ok(())
        }
    }

    fn snapshot(&mut self, step: usize, field: &DGField) -> Result<(), DriverError> {
        let quad = self.quad.as_ref().expect("started");
        let re = self.re.as_ref().expect("started");
        let name = &self.cfg.problem.name;
        self.files
            .extend(Checkpoint::write(&self.dir, step, name, field, quad)?);
        if self.cfg.output.vtk {
            let mut data = vec![(
                "angular_mean".to_string(),
                cell_averages(re, &field.angular_mean(&quad.weights)),
            )];
            for &m in &self.cfg.output.directions {
                if m < field.n_dirs {
                    let s = field.direction_slice(m);
                    data.push((format!("I_{m}"), cell_averages(re, s)));
                }
            }
            let path = self.dir.join(format!("snapshot_{step:05}.vtk"));
            write_vtk(
                &path,
                &field.mesh,
                &format!("{name} t={}", field.time),
                &data,
            )?;
            self.files.push(path);
        }
        Ok(())
    }

    pub fn finish(
        mut self,
        cfg: &RunConfig,
        overrides: &[String],
        outcome: &RunOutcome,
    ) -> Result<RunManifest, DriverError> {
        for w in [
            self.errors.as_mut(),
            Some(&mut self.diagnostics),
            self.trajectory.as_mut(),
            self.energy.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            w.flush().map_err(io_err(&self.dir))?;
        }
        drop(self.errors.take());
        drop(self.trajectory.take());
        drop(self.energy.take());
        let mut outputs = Vec::with_capacity(self.files.len());
        for p in &self.files {
            let bytes = std::fs::metadata(p).map_err(io_err(p))?.len();
            let rel = p
                .strip_prefix(&self.dir)
                .unwrap_or(p)
                .to_string_lossy()
                .into_owned();
            outputs.push(FileEntry {
                path: rel,
                bytes,
                sha256: sha256_file(p)?,
            });
        }
        let mesh = &outcome.field.mesh;
        let manifest = RunManifest {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
            overrides: overrides.to_vec(),
            mesh: MeshInfo {
                dim: mesh.dim,
                domain: mesh.domain,
                subdivisions: cfg.subdivisions(mesh.dim),
                n_elements: mesh.n_elements(),
                n_vertices: mesh.n_vertices(),
            },
            n_directions: outcome.quadrature.len(),
            init_adapt: outcome
                .init_traces
                .iter()
                .enumerate()
                .map(|(cycle, t)| InitAdaptInfo {
                    cycle,
                    substeps: t.substeps,
                    rejected: t.rejected,
                    energy_start: t.energies.first().copied(),
                    energy_end: t.energies.last().copied(),
                })
                .collect(),
            steps: outcome.diagnostics.clone(),
            global_errors: outcome.errors.as_ref().map(|e| e.global),
            wall_seconds: outcome.wall_seconds,
            outputs,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_atomic(&self.dir.join(MANIFEST), text.as_bytes())?;
        Ok(manifest)
    }
}

impl Observer for OutputWriter {
    fn on_init_adapt(
        &mut self,
        cycle: usize,
        metric: &MetricField,
        trace: &MmpdeTrace,
    ) -> Result<(), DriverError> {
        self.trace_energy(0, trace)?;
        if self.cfg.output.dump_metric {
            let path = self.dir.join(format!("metric_init{cycle}.csv"));
            metric_csv(&path, &metric.tensors)?;
            self.files.push(path);
        }
        Ok(())
    }

    fn on_start(&mut self, field: &DGField, quad: &AngularQuadrature) -> Result<(), DriverError> {
        self.quad = Some(quad.clone());
        self.re = Some(ReferenceElement::new(field.mesh.dim, field.degree));
        if self.cfg.output.trajectory {
            let w = if field.mesh.dim == 1 {
                let header: Vec<String> = (1..=field.mesh.n_vertices())
                    .map(|i| format!("x_{i}"))
                    .collect();
                csv_file(
                    &self.dir,
                    "trajectory.csv",
                    &format!("t,{}", header.join(",")),
                    &mut self.files,
                )?
            } else {
                csv_file(
                    &self.dir,
                    "vertices.csv",
                    "step,vertex_id,x,y",
                    &mut self.files,
                )?
            };
            self.trajectory = Some(w);
        }
        self.record_mesh(0, 0.0, &field.mesh)?;
        self.snapshot(0, field)
    }

    fn on_step(
        &mut self,
        diag: &StepDiagnostics,
        field: &DGField,
        errors: Option<&SpatialNorms>,
        metric: Option<&MetricField>,
        trace: Option<&MmpdeTrace>,
    ) -> Result<(), DriverError> {
        let step = diag.step;
        let path = self.dir.join("diagnostics.csv");
        let line = format!(
            "{step},{},{},{},{},{},{},{},{},{}",
            diag.t,
            diag.si_iterations,
            diag.last_delta,
            diag.sweep_violations,
            diag.min_area,
            diag.mmpde_substeps,
            diag.mmpde_rejected,
            diag.mmpde_stopped_early,
            diag.mmpde_applied
        );
        Self::csv_line(&mut self.diagnostics, line, &path)?;
        if let Some(n) = errors {
            if self.errors.is_none() {
                self.errors = Some(csv_file(
                    &self.dir,
                    "errors.csv",
                    "step,t,L1,L2,Linf",
                    &mut self.files,
                )?);
            }
            let a = n.aggregate;
            let path = self.dir.join("errors.csv");
            Self::csv_line(
                self.errors.as_mut().expect("opened"),
                format!("{step},{},{},{},{}", diag.t, a.l1, a.l2, a.linf),
                &path,
            )?;
        }
        if let Some(t) = trace {
            self.trace_energy(step, t)?;
        }
        if let (true, Some(m)) = (self.cfg.output.dump_metric, metric) {
            let path = self.dir.join(format!("metric_{step:05}.csv"));
            metric_csv(&path, &m.tensors)?;
            self.files.push(path);
        }
        self.record_mesh(step, diag.t, &field.mesh)?;
        let every = self.cfg.output.checkpoint_every;
        if step == self.n_steps || (every > 0 && step % every == 0) {
            self.snapshot(step, field)?;
        }
        Ok(())
    }
}

/// Write the mesh of the checkpoint at `step` as VTK and a vertex table.
pub fn meshdump(run_dir: &Path, step: usize) -> Result<[PathBuf; 2], DriverError> {
    let (_, field) = Checkpoint::load(run_dir, Some(step))?;
    let vtk = run_dir.join(format!("mesh_{step:05}.vtk"));
    write_vtk(&vtk, &field.mesh, &format!("mesh step {step}"), &[])?;
    let csv = run_dir.join(format!("mesh_{step:05}.csv"));
    write_vertex_csv(&csv, step, &field.mesh)?;
    Ok([vtk, csv])
}
