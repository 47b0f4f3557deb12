use std::fmt::Display;
use std::path::Path;

use ccresp::bench::{ratio_increasing, run_bench, to_csv};
use ccresp::chem::{ingest_fcidump, parse_geometries, parse_xyz, Molecule};
use ccresp::datastore::{generate_dataset, load, save, DatasetOptions, DatasetRecord, RecordStatus};
use ccresp::pipeline::{prepare, prepare_fcidump, solve_prepared, Method, PipelineOptions, Prepared};
use ccresp::response::{
    cc_rdm1, cc_rdm2, density_on_grid, forces_fd, on_top_pair_density, pair_density, polarizability_ff, quadrupole,
    system_dipole, write_cube, CubeGrid, PropertyReport,
};
use ccresp::surrogate::{
    evaluate, initial_losses, train, EvalOptions, FeatureConfig, Mode, SurrogateModel, TrainOptions, UNIT_WEIGHTS,
};
use ccresp::{Error, Result};

use crate::config::RunConfig;

fn log(key: &str, value: impl Display) {
    println!("{key}={value}");
}

fn join<T: Display>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// Category name for the error log line.
pub fn error_kind(e: &Error) -> &'static str {
    match e.exit_code() {
        3 => "convergence",
        4 => "io",
        _ => "usage",
    }
}

pub fn dispatch(name: &str, cfg: &RunConfig) -> Result<()> {
    match name {
        "scf" => cmd_scf(cfg),
        "ccsd" => cmd_ccsd(cfg),
        "props" => cmd_props(cfg),
        "dataset-gen" => cmd_dataset_gen(cfg),
        "train" => cmd_train(cfg),
        "eval" => cmd_eval(cfg),
        "bench" => cmd_bench(cfg),
        other => Err(Error::Invalid(format!("unknown command `{other}`"))),
    }
}

fn pipeline_options(cfg: &RunConfig) -> Result<PipelineOptions> {
    let mut o = PipelineOptions::default();
    o.scf.e_tol = cfg.get("scf_tol")?;
    o.cc.tol = cfg.get("cc_tol")?;
    o.cc.max_iter = cfg.get("cc_max_iter")?;
    Ok(o)
}

fn with_path(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| with_path(path, e))
}

fn write_text(path: &Path, text: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, text).map_err(|e| with_path(path, e))
}

fn is_xyz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xyz"))
}

fn read_molecule(path: &Path) -> Result<Molecule> {
    let mut mol = parse_xyz(&read_text(path)?)?;
    if mol.id.is_empty() {
        mol.id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    }
    Ok(mol)
}

/// XYZ by extension, FCIDUMP otherwise.
fn prepare_input(cfg: &RunConfig, opts: &PipelineOptions) -> Result<Prepared> {
    let path = cfg.required_path("input")?;
    if is_xyz(path) {
        prepare(&read_molecule(path)?, cfg.str("basis"), &opts.scf)
    } else {
        prepare_fcidump(&ingest_fcidump(&read_text(path)?)?, &opts.scf)
    }
}

fn cmd_scf(cfg: &RunConfig) -> Result<()> {
    let opts = pipeline_options(cfg)?;
    let prep = prepare_input(cfg, &opts)?;
    let scf = &prep.scf;
    log("scf.e_hf", format!("{:.12}", scf.e_hf));
    log("scf.converged", scf.converged);
    log("scf.iterations", scf.n_iter);
    log("scf.n_occ", scf.n_occ);
    log("scf.n_virt", scf.n_virt);
    log("scf.eps", join(scf.eps.iter().map(|e| format!("{e:.10}"))));
    if let Some(out) = cfg.path("out") {
        save(scf, out)?;
        log("artifact", out.display());
    }
    Ok(())
}

fn cmd_ccsd(cfg: &RunConfig) -> Result<()> {
    let opts = pipeline_options(cfg)?;
    let lambda = cfg.flag("lambda")?;
    let solved = solve_prepared(prepare_input(cfg, &opts)?, lambda, &opts)?;
    let cc = &solved.cc;
    log("scf.e_hf", format!("{:.12}", solved.prep.scf.e_hf));
    log("ccsd.e_corr", format!("{:.12}", cc.e_corr));
    log("ccsd.e_total", format!("{:.12}", cc.e_total));
    log("ccsd.iterations", cc.n_iter_t);
    log("ccsd.residual_norm", format!("{:e}", cc.t_residual_norm));
    if lambda {
        log("lambda.iterations", cc.n_iter_lambda);
        log("lambda.residual_norm", format!("{:e}", cc.lambda_residual_norm));
    }
    if let Some(g) = &solved.gauge {
        log("gauge.localization_sweeps", g.sweeps);
        log("gauge.localized_basis_id", &g.basis_id);
    }
    if let Some(out) = cfg.path("out") {
        save(cc, out)?;
        log("artifact", out.display());
    }
    Ok(())
}

fn parse_point(s: &str) -> Result<[f64; 3]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::Invalid(format!("bad coordinate `{x}` in `{s}`"))))
        .collect::<Result<_>>()?;
    <[f64; 3]>::try_from(v).map_err(|_| Error::Invalid(format!("point `{s}` needs three coordinates")))
}

fn cmd_props(cfg: &RunConfig) -> Result<()> {
    let opts = pipeline_options(cfg)?;
    let path = cfg.required_path("input")?;
    if !is_xyz(path) {
        return Err(Error::Invalid("props needs an XYZ geometry; FCIDUMP input has no multipole integrals".into()));
    }
    let mol = read_molecule(path)?;
    let basis_name = cfg.str("basis").to_string();
    let solved = solve_prepared(prepare(&mol, &basis_name, &opts.scf)?, true, &opts)?;
    let (prep, cc) = (&solved.prep, &solved.cc);
    let rdm = cc_rdm1(&cc.amps)?;
    let mut report = PropertyReport::new(cc.e_total, &rdm);
    report.note("method", "ccsd-lambda");
    report.note("density", "cc_response_unrelaxed");
    report.note("origin", format!("{:.10} {:.10} {:.10}", prep.ints.origin[0], prep.ints.origin[1], prep.ints.origin[2]));
    report.note("basis", &basis_name);
    report.note("cc_tol", format!("{:e}", opts.cc.tol));

    if cfg.flag("dipole")? {
        report.dipole = Some(system_dipole(&rdm, &prep.sys)?);
    }
    if cfg.flag("quadrupole")? {
        let q = prep.sys.quadrupole.as_ref().ok_or_else(|| Error::Invalid("no quadrupole integrals".into()))?;
        report.quadrupole = Some(quadrupole(&rdm, q, &mol, prep.ints.origin)?);
    }
    if cfg.flag("polarizability")? {
        report.polarizability = Some(polarizability_ff(&prep.sys, cfg.get("field_step")?, &opts.cc)?);
    }
    if cfg.flag("forces")? {
        let step: f64 = cfg.get("fd_step")?;
        report.forces = Some(forces_fd(&mol, &basis_name, Method::Ccsd, step, &opts)?);
        report.note("fd_step", format!("{step:e}"));
    }

    let wants_grid = ["density_cube", "pair_density", "ontop"].iter().any(|k| cfg.path(k).is_some());
    if wants_grid {
        let basis = prep.basis.as_ref().expect("molecular input has a basis");
        let grid = CubeGrid::around(&mol, cfg.get("grid_spacing")?, cfg.get("grid_margin")?);
        let points = grid.points();
        log("grid.points", points.len());
        if let Some(out) = cfg.path("density_cube") {
            let rho = density_on_grid(&rdm, &prep.scf.c, basis, &mol, &points)?;
            log("grid.density_integral", format!("{:.8}", rho.iter().sum::<f64>() * grid.voxel_volume()));
            write_text(out, write_cube(&mol, &grid, &rho, "CC response density"))?;
            log("artifact", out.display());
        }
        let needs_rdm2 = cfg.path("pair_density").is_some() || cfg.path("ontop").is_some();
        let rdm2 = if needs_rdm2 { Some(cc_rdm2(&cc.amps)?) } else { None };
        if let (Some(out), Some(g2)) = (cfg.path("pair_density"), &rdm2) {
            let r_ref = match cfg.str("pair_ref") {
                "" => mol.atoms[0].pos,
                s => parse_point(s)?,
            };
            let pi = pair_density(g2, &prep.scf.c, basis, &mol, r_ref, &points)?;
            log("pair_density.reference", join(r_ref));
            write_text(out, write_cube(&mol, &grid, &pi, "CC pair density"))?;
            log("artifact", out.display());
        }
        if let (Some(out), Some(g2)) = (cfg.path("ontop"), &rdm2) {
            let pi = on_top_pair_density(g2, &prep.scf.c, basis, &mol, &points)?;
            write_text(out, write_cube(&mol, &grid, &pi, "CC on-top pair density"))?;
            log("artifact", out.display());
        }
    }

    for line in report.to_text().lines() {
        if let Some((k, v)) = line.split_once(": ") {
            log(&format!("props.{k}"), v);
        }
    }
    if let Some(out) = cfg.path("out") {
        save(&report, out)?;
        log("artifact", out.display());
    }
    Ok(())
}

fn cmd_dataset_gen(cfg: &RunConfig) -> Result<()> {
    let path = cfg.required_path("input")?;
    let out = cfg.required_path("out")?;
    let geoms = parse_geometries(&read_text(path)?)?;
    let opts = DatasetOptions {
        pipeline: pipeline_options(cfg)?,
        forces: cfg.flag("forces")?,
        force_step: cfg.get("fd_step")?,
    };
    let records = generate_dataset(&geoms, cfg.str("basis"), &opts)?;
    let mut failed = 0;
    for r in &records {
        match &r.status {
            RecordStatus::Converged => {
                let l = r.labels()?;
                log(&format!("record.{}.e_total", r.molecule_id), format!("{:.12}", l.e_total));
            }
            RecordStatus::Failed(why) => {
                failed += 1;
                log(&format!("record.{}.failed", r.molecule_id), why);
            }
        }
    }
    log("dataset.records", records.len());
    log("dataset.converged", records.len() - failed);
    log("dataset.failed", failed);
    save(&records, out)?;
    log("artifact", out.display());
    Ok(())
}

fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let records: Vec<DatasetRecord> = load(cfg.required_path("data")?)?;
    let out = cfg.required_path("out")?;
    let fc = FeatureConfig::new(cfg.get("r_cut")?, cfg.get("radial_bins")?)?;
    let examples = records
        .iter()
        .filter(|r| r.is_converged())
        .map(|r| r.training_example(&fc))
        .collect::<Result<Vec<_>>>()?;
    log("train.examples", examples.len());
    log("train.skipped_failed", records.len() - examples.len());
    let mode = Mode::parse(cfg.str("mode"))?;
    let model = SurrogateModel::new(fc, mode, cfg.get("hidden")?, cfg.get("seed")?)?;
    let batch: usize = cfg.get("batch")?;
    let opts = TrainOptions {
        epochs: cfg.get("epochs")?,
        lr: cfg.get("lr")?,
        batch: (batch > 0).then_some(batch),
        seed: cfg.get("seed")?,
        weights: UNIT_WEIGHTS,
        check_params: cfg.get("check_params")?,
    };
    if !examples.is_empty() {
        let (direct, residual) = initial_losses(&model, &examples, &opts.weights)?;
        log("train.initial_loss_direct", format!("{direct:.9e}"));
        log("train.initial_loss_residual", format!("{residual:.9e}"));
    }
    let trained = train(&model, &examples, &opts)?;
    log("train.parameters", trained.n_params());
    log("train.epochs", trained.epochs);
    log("train.final_loss", format!("{:.9e}", trained.loss_trace.last().copied().unwrap_or(f64::NAN)));
    save(&trained, out)?;
    log("artifact", out.display());
    Ok(())
}

fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let model: SurrogateModel = load(cfg.required_path("model")?)?;
    let records: Vec<DatasetRecord> = load(cfg.required_path("data")?)?;
    let opts = EvalOptions {
        forces: cfg.flag("forces")?,
        force_step: cfg.get("fd_step")?,
        pipeline: pipeline_options(cfg)?,
    };
    let ev = evaluate(&model, &records, &opts);
    for (id, why) in &ev.failures {
        log(&format!("eval.{id}.failed"), why);
    }
    let m = ev.aggregate();
    log("eval.molecules", ev.rows.len());
    log("eval.e_mae", format!("{:.9e}", m.e_mae));
    log("eval.dip_mae", format!("{:.9e}", m.dip_mae));
    if let Some(f) = m.f_mae {
        log("eval.f_mae", format!("{f:.9e}"));
    }
    log("eval.t1_mae", format!("{:.9e}", m.t1_mae));
    log("eval.t2_mae", format!("{:.9e}", m.t2_mae));
    log("eval.l1_mae", format!("{:.9e}", m.l1_mae));
    log("eval.l2_mae", format!("{:.9e}", m.l2_mae));
    let csv = ev.to_csv();
    match cfg.path("out") {
        Some(out) => {
            write_text(out, csv)?;
            log("artifact", out.display());
        }
        None => print!("{csv}"),
    }
    if ev.rows.is_empty() {
        return Err(Error::Invalid("no record could be evaluated".into()));
    }
    Ok(())
}

fn cmd_bench(cfg: &RunConfig) -> Result<()> {
    let model = match cfg.path("model") {
        Some(path) => load(path)?,
        None => SurrogateModel::new(FeatureConfig::default(), Mode::Residual, cfg.get("hidden")?, cfg.get("seed")?)?,
    };
    let sizes: Vec<usize> = cfg.list("sizes")?;
    let rows = run_bench(&sizes, &model, cfg.get("repeats")?, &pipeline_options(cfg)?)?;
    for r in &rows {
        log(&format!("bench.{}.ratio", r.system), format!("{:.3}", r.ratio()));
    }
    let tail = rows.iter().position(|r| r.n_orbitals >= 4).unwrap_or(rows.len());
    log("bench.ratio_increasing", ratio_increasing(&rows[tail..]));
    let csv = to_csv(&rows);
    match cfg.path("out") {
        Some(out) => {
            write_text(out, csv)?;
            log("artifact", out.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}
