//! Commands, their output files, and run manifests.
//!
//! A command produces a set of named files in memory; [`run`] writes them under
//! the run directory together with `config.json` (the effective configuration)
//! and `manifest.json` (command, configuration, and SHA-256 digests of every
//! input and output). [`replay`] re-executes a manifest and checks that the
//! outputs come out byte for byte the same.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use uavchan_core::airsim::{snr_map, SnrMapSpec};
use uavchan_core::citygen::{generate_city, split};
use uavchan_core::genmodel::train_generative_model;
use uavchan_core::gpp::{fit_pathloss, fit_plos, pathloss_3gpp, plos_3gpp, GppCondition, ScaledParams, ALPHA_NOMINAL};
use uavchan_core::metrics::{
    angular_distribution, omni_pathloss_samples, plos_grid_mae, wasserstein1, AngularDistribution, CdfSamples,
    GridMae, ANGLE_NAMES,
};
use uavchan_core::numerics::SeededRng;
use uavchan_core::{Dataset, GenerativeModel, LinkCondition, LinkRecord, LinkState};

use crate::config::RunConfig;
use crate::dataset::{read_conditions_file, read_dataset_file, write_dataset};
use crate::error::{io_err, Error, Result};
use crate::model::{load_model, model_to_json};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Plos,
    Pathloss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Command {
    Datagen,
    Train {
        data: PathBuf,
    },
    Generate {
        model: PathBuf,
        data: PathBuf,
    },
    #[serde(rename = "fit-3gpp")]
    Fit3gpp {
        data: PathBuf,
        which: Which,
    },
    Eval {
        data: PathBuf,
        model: Option<PathBuf>,
        gpp_plos: Option<PathBuf>,
        gpp_pathloss: Option<PathBuf>,
    },
    SnrMap {
        model: PathBuf,
    },
}

impl Command {
    fn inputs(&self) -> Vec<&PathBuf> {
        match self {
            Command::Datagen => vec![],
            Command::Train { data } | Command::Fit3gpp { data, .. } => vec![data],
            Command::Generate { model, data } => vec![model, data],
            Command::Eval {
                data,
                model,
                gpp_plos,
                gpp_pathloss,
            } => [Some(data), model.as_ref(), gpp_plos.as_ref(), gpp_pathloss.as_ref()]
                .into_iter()
                .flatten()
                .collect(),
            Command::SnrMap { model } => vec![model],
        }
    }

    fn inputs_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            Command::Datagen => vec![],
            Command::Train { data } | Command::Fit3gpp { data, .. } => vec![data],
            Command::Generate { model, data } => vec![model, data],
            Command::Eval {
                data,
                model,
                gpp_plos,
                gpp_pathloss,
            } => [Some(data), model.as_mut(), gpp_plos.as_mut(), gpp_pathloss.as_mut()]
                .into_iter()
                .flatten()
                .collect(),
            Command::SnrMap { model } => vec![model],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the run directory, excluding the manifest itself.
    pub outputs: Vec<FileDigest>,
}

/// Fitted 3GPP parameters as written by `fit-3gpp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GppParamsFile {
    pub which: Which,
    pub carrier_hz: f64,
    pub params: ScaledParams,
    pub values: Vec<f64>,
}

impl GppParamsFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in d {
        let _ = write!(s, "{b:02x}");
    }
    s
}

fn digest_file(path: &Path) -> Result<FileDigest> {
    Ok(FileDigest {
        path: path.to_path_buf(),
        sha256: sha256_hex(&fs::read(path).map_err(io_err(path))?),
    })
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

type Outputs = Vec<(&'static str, Vec<u8>)>;

/// Runs `command` and writes its outputs plus `config.json` and
/// `manifest.json` under `out`. Input paths are made absolute in the manifest.
pub fn run(command: &Command, cfg: &RunConfig, out: &Path, log: &mut dyn FnMut(&str)) -> Result<Manifest> {
    let mut command = command.clone();
    for p in command.inputs_mut() {
        *p = std::path::absolute(&*p).map_err(io_err(p))?;
    }
    let inputs = command
        .inputs()
        .into_iter()
        .map(|p| digest_file(p))
        .collect::<Result<Vec<_>>>()?;
    let mut files = execute(&command, cfg, log)?;
    files.push((CONFIG_FILE, cfg.to_json().into_bytes()));

    fs::create_dir_all(out).map_err(io_err(out))?;
    let out_abs = std::path::absolute(out).map_err(io_err(out))?;
    let mut outputs = Vec::with_capacity(files.len());
    for (name, _) in &files {
        let target = out_abs.join(name);
        if command.inputs().iter().any(|p| **p == target) {
            return Err(Error::Invalid(format!(
                "refusing to overwrite input {}; choose another --out",
                target.display()
            )));
        }
    }
    for (name, bytes) in &files {
        let target = out.join(name);
        if let Some(dir) = target.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        fs::write(&target, bytes).map_err(io_err(&target))?;
        outputs.push(FileDigest {
            path: PathBuf::from(name),
            sha256: sha256_hex(bytes),
        });
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command,
        config: cfg.clone(),
        inputs,
        outputs,
    };
    let path = out.join(MANIFEST_FILE);
    fs::write(&path, json_bytes(&manifest)).map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Re-executes a manifest into `out` and checks every output digest. Inputs
/// must still match their recorded digests.
pub fn replay(manifest_path: &Path, out: &Path, log: &mut dyn FnMut(&str)) -> Result<Manifest> {
    let old = load_manifest(manifest_path)?;
    for rec in &old.inputs {
        let now = digest_file(&rec.path)?;
        if now.sha256 != rec.sha256 {
            return Err(Error::Invalid(format!("input {} changed since the recorded run", rec.path.display())));
        }
    }
    let new = run(&old.command, &old.config, out, log)?;
    let differing: Vec<String> = old
        .outputs
        .iter()
        .filter(|o| !new.outputs.contains(o))
        .map(|o| o.path.display().to_string())
        .collect();
    if !differing.is_empty() || old.outputs.len() != new.outputs.len() {
        return Err(Error::Invalid(format!("replayed outputs differ: {}", differing.join(", "))));
    }
    Ok(new)
}

fn execute(command: &Command, cfg: &RunConfig, log: &mut dyn FnMut(&str)) -> Result<Outputs> {
    match command {
        Command::Datagen => datagen(cfg, log),
        Command::Train { data } => train(cfg, &read_dataset_file(data)?, log),
        Command::Generate { model, data } => generate(cfg, &load_model(model)?, &read_conditions_file(data)?),
        Command::Fit3gpp { data, which } => fit_3gpp(cfg, &read_dataset_file(data)?, *which),
        Command::Eval {
            data,
            model,
            gpp_plos,
            gpp_pathloss,
        } => {
            let test = read_dataset_file(data)?;
            match (model, gpp_plos, gpp_pathloss) {
                (Some(m), None, None) => eval_model(cfg, &load_model(m)?, &test),
                (None, None, None) => Err(Error::Invalid("eval needs --model or 3GPP parameter files".into())),
                (None, p, l) => {
                    let p = p.as_deref().map(GppParamsFile::load).transpose()?;
                    let l = l.as_deref().map(GppParamsFile::load).transpose()?;
                    eval_gpp(cfg, p.as_ref(), l.as_ref(), &test)
                }
                _ => Err(Error::Invalid("eval takes either a model or 3GPP parameters, not both".into())),
            }
        }
        Command::SnrMap { model } => snr(cfg, &load_model(model)?),
    }
}

fn dataset_bytes(d: &Dataset) -> Result<Vec<u8>> {
    let mut b = Vec::new();
    write_dataset(d, &mut b)?;
    Ok(b)
}

fn datagen(cfg: &RunConfig, log: &mut dyn FnMut(&str)) -> Result<Outputs> {
    let city = generate_city(&cfg.oracle, cfg.n_links, cfg.seed)?;
    let (train, test) = split(&city, cfg.split_fraction, cfg.seed)?;
    log(&format!("generated {} links ({} train, {} test)", city.len(), train.len(), test.len()));
    Ok(vec![
        ("dataset.csv", dataset_bytes(&city)?),
        ("train.csv", dataset_bytes(&train)?),
        ("test.csv", dataset_bytes(&test)?),
    ])
}

fn train(cfg: &RunConfig, data: &Dataset, log: &mut dyn FnMut(&str)) -> Result<Outputs> {
    let env_id = data.records[0].env_id.clone();
    let total = cfg.train.vae.epochs;
    let mut progress = |e: usize, loss: f64| {
        if (e + 1) % 100 == 0 || e + 1 == total {
            log(&format!("vae epoch {}/{total}: loss {loss:.4}", e + 1));
        }
    };
    let fit = train_generative_model(data, &env_id, &cfg.train, Some(&mut progress))?;
    let mut losses = String::from("stage,epoch,loss\n");
    for (e, l) in fit.link_state_losses.iter().enumerate() {
        let _ = writeln!(losses, "link_state,{e},{l}");
    }
    for (e, l) in fit.vae_losses.iter().enumerate() {
        let _ = writeln!(losses, "vae,{},{l}", e + 1);
    }
    let mut model = model_to_json(&fit.model)?;
    model.push('\n');
    Ok(vec![("model.json", model.into_bytes()), ("losses.csv", losses.into_bytes())])
}

fn generate(cfg: &RunConfig, model: &GenerativeModel, conds: &[LinkCondition]) -> Result<Outputs> {
    let paths = model.generate_batch(conds, cfg.seed)?;
    let records = conds
        .iter()
        .zip(paths)
        .map(|(u, paths)| LinkRecord {
            env_id: model.env_id.clone(),
            condition: *u,
            paths,
        })
        .collect();
    Ok(vec![("generated.csv", dataset_bytes(&Dataset::new(records, model.carrier_hz)?)?)])
}

fn fit_3gpp(cfg: &RunConfig, data: &Dataset, which: Which) -> Result<Outputs> {
    let fit = match which {
        Which::Plos => fit_plos(data, &cfg.gpp)?,
        Which::Pathloss => fit_pathloss(data, &cfg.gpp)?,
    };
    let mut losses = String::from("epoch,loss\n");
    for (e, l) in fit.epoch_losses.iter().enumerate() {
        let _ = writeln!(losses, "{},{l}", e + 1);
    }
    let file = GppParamsFile {
        which,
        carrier_hz: data.carrier_hz,
        values: fit.params.values(),
        params: fit.params,
    };
    Ok(vec![("params.json", json_bytes(&file)), ("losses.csv", losses.into_bytes())])
}

fn check_carrier(what: &str, carrier_hz: f64, data: &Dataset) -> Result<()> {
    if carrier_hz != data.carrier_hz {
        return Err(Error::Invalid(format!(
            "{what} carrier {carrier_hz} Hz does not match the dataset carrier {} Hz",
            data.carrier_hz
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub predictor: String,
    pub n_test: usize,
    pub n_test_with_paths: usize,
    pub n_predicted_with_paths: usize,
    pub wasserstein1_db: Option<f64>,
    pub plos_grid_mae: Option<f64>,
    pub n_grid_bins: Option<usize>,
}

fn grid_csv(g: &GridMae) -> Vec<u8> {
    let mut s = String::from("gnb_type,d2d_center_m,dz_center_m,n_links,n_los,empirical_p_los,model_p_los\n");
    for b in &g.bins {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            b.gnb_type,
            b.d2d_center_m,
            b.dz_center_m,
            b.n_links,
            b.n_los,
            b.empirical_p_los(),
            b.model_p_los
        );
    }
    s.into_bytes()
}

fn cdf_csv(sets: &[(&str, &CdfSamples)]) -> Vec<u8> {
    let mut s = String::from("source,loss_db,cdf\n");
    for (name, c) in sets {
        for (x, p) in c.points() {
            let _ = writeln!(s, "{name},{x},{p}");
        }
    }
    s.into_bytes()
}

fn angles_csv(sets: &[(&str, &AngularDistribution)]) -> (Vec<u8>, Vec<u8>) {
    let mut hist = String::from("source,angle,d3d_lo_m,d3d_hi_m,angle_lo_deg,angle_hi_deg,fraction\n");
    let mut iqr = String::from("source,angle,d3d_lo_m,d3d_hi_m,n_paths,iqr_deg\n");
    for (name, a) in sets {
        for (k, angle) in ANGLE_NAMES.iter().enumerate() {
            for (b, d) in a.d3d_edges_m.windows(2).enumerate() {
                for (i, e) in a.angle_edges_deg.windows(2).enumerate() {
                    let _ = writeln!(hist, "{name},{angle},{},{},{},{},{}", d[0], d[1], e[0], e[1], a.hist[k][b][i]);
                }
                let v = a.iqr_deg[k][b].map_or(String::new(), |v| v.to_string());
                let _ = writeln!(iqr, "{name},{angle},{},{},{},{v}", d[0], d[1], a.n_paths[b]);
            }
        }
    }
    (hist.into_bytes(), iqr.into_bytes())
}

fn cdf_or_none(v: Vec<f64>) -> Option<CdfSamples> {
    CdfSamples::new(v).ok()
}

fn finish_eval(
    cfg: &RunConfig,
    predictor: &str,
    test: &Dataset,
    grid: Option<GridMae>,
    predicted: Option<Vec<f64>>,
    mut files: Outputs,
) -> Result<Outputs> {
    let test_omni = cdf_or_none(omni_pathloss_samples(test.records.iter().map(|r| &r.paths), cfg.omni_mode));
    let pred_omni = predicted.and_then(cdf_or_none);
    let w1 = match (&test_omni, &pred_omni) {
        (Some(t), Some(p)) => Some(wasserstein1(p, t)),
        _ => None,
    };
    let mut cdfs = Vec::new();
    if let Some(p) = &pred_omni {
        cdfs.push(("predicted", p));
    }
    if let Some(t) = &test_omni {
        cdfs.push(("test", t));
    }
    let metrics = EvalMetrics {
        predictor: predictor.into(),
        n_test: test.len(),
        n_test_with_paths: test_omni.as_ref().map_or(0, |c| c.len()),
        n_predicted_with_paths: pred_omni.as_ref().map_or(0, |c| c.len()),
        wasserstein1_db: w1,
        plos_grid_mae: grid.as_ref().map(|g| g.mae),
        n_grid_bins: grid.as_ref().map(|g| g.bins.len()),
    };
    if let Some(g) = &grid {
        files.push(("eval/plos_grid.csv", grid_csv(g)));
    }
    files.push(("eval/omni_cdf.csv", cdf_csv(&cdfs)));
    files.push(("eval/metrics.json", json_bytes(&metrics)));
    Ok(files)
}

/// Grid MAE of the state classifier, and omnidirectional loss and angular
/// statistics of links generated at the test conditions.
pub fn eval_model(cfg: &RunConfig, model: &GenerativeModel, test: &Dataset) -> Result<Outputs> {
    check_carrier("model", model.carrier_hz, test)?;
    let grid = plos_grid_mae(|u| Ok(model.predict_state_probs(u)?[0]), test, &cfg.grid)?;
    let conds: Vec<LinkCondition> = test.records.iter().map(|r| r.condition).collect();
    let generated = model.generate_batch(&conds, cfg.seed)?;
    let omni = omni_pathloss_samples(&generated, cfg.omni_mode);
    let gen_angles = angular_distribution(conds.iter().zip(&generated), &cfg.angular)?;
    let test_angles = angular_distribution(test.records.iter().map(|r| (&r.condition, &r.paths)), &cfg.angular)?;
    let (hist, iqr) = angles_csv(&[("predicted", &gen_angles), ("test", &test_angles)]);
    let files = vec![("eval/angles_hist.csv", hist), ("eval/angles_iqr.csv", iqr)];
    finish_eval(cfg, "model", test, Some(grid), Some(omni), files)
}

/// The same evaluation for the closed-form baselines. Omnidirectional losses
/// draw each link's state from the LOS probability (nominal unless a fitted
/// file is given); links outside the formulas' height range are skipped.
pub fn eval_gpp(
    cfg: &RunConfig,
    plos: Option<&GppParamsFile>,
    pathloss: Option<&GppParamsFile>,
    test: &Dataset,
) -> Result<Outputs> {
    for (f, want) in [(plos, Which::Plos), (pathloss, Which::Pathloss)] {
        if let Some(f) = f {
            if f.which != want {
                return Err(Error::Invalid(format!("expected {want:?} parameters, got {:?}", f.which)));
            }
            check_carrier("3GPP parameter", f.carrier_hz, test)?;
        }
    }
    let alpha = match plos {
        Some(p) => p.params.alpha()?,
        None => ALPHA_NOMINAL,
    };
    let p_los = |u: &LinkCondition| -> Option<f64> {
        let c = GppCondition::from_link(u);
        c.is_valid().then(|| plos_3gpp(&c, &alpha)).and_then(|r| r.ok())
    };
    let grid = match plos {
        Some(_) => Some(plos_grid_mae(|u| plos_3gpp(&GppCondition::from_link(u), &alpha), test, &cfg.grid)?),
        None => None,
    };
    let predicted = match pathloss {
        Some(l) => {
            let mut v = Vec::with_capacity(test.len());
            for (i, r) in test.records.iter().enumerate() {
                let u = &r.condition;
                let Some(p) = p_los(u) else { continue };
                let z = SeededRng::substream(cfg.seed, i as u64).uniform();
                let s = if z < p { LinkState::Los } else { LinkState::Nlos };
                v.push(pathloss_3gpp(&GppCondition::from_link(u), s, &l.values, test.carrier_hz)?);
            }
            Some(v)
        }
        None => None,
    };
    finish_eval(cfg, "3gpp", test, grid, predicted, Vec::new())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SnrMeta {
    env_id: String,
    spec: SnrMapSpec,
    budget: uavchan_core::airsim::LinkBudget,
    noise_dbm: f64,
    nx: usize,
    nz: usize,
}

fn snr(cfg: &RunConfig, model: &GenerativeModel) -> Result<Outputs> {
    if cfg.budget.carrier_hz != model.carrier_hz {
        return Err(Error::Invalid(format!(
            "budget carrier {} Hz does not match the model carrier {} Hz",
            cfg.budget.carrier_hz, model.carrier_hz
        )));
    }
    let spec = SnrMapSpec {
        seed: cfg.seed,
        ..cfg.snr_map
    };
    let map = snr_map(model, &spec, &cfg.budget)?;
    let mut s = String::from("x_m,z_m,median_snr_db\n");
    for (iz, z) in map.z_m.iter().enumerate() {
        for (ix, x) in map.x_m.iter().enumerate() {
            let _ = writeln!(s, "{x},{z},{}", map.at(ix, iz));
        }
    }
    let meta = SnrMeta {
        env_id: model.env_id.clone(),
        spec,
        budget: cfg.budget,
        noise_dbm: cfg.budget.noise_dbm(),
        nx: map.x_m.len(),
        nz: map.z_m.len(),
    };
    Ok(vec![("snr_map.csv", s.into_bytes()), ("snr_map.json", json_bytes(&meta))])
}
