mod columns;

use atnquant::data::DataDir;
use atnquant::maskderive::{derive_mask, rank_structures, read_ranking, GroupSuvrTable, DEFAULT_THRESHOLD};
use atnquant::nifti::{write_image_file, write_labels_file};
use atnquant::phantom::{make_phantom, write_ground_truth_csv, PhantomSpec};
use atnquant::pipeline::{read_manifest, run_batch, run_quantify, write_batch_summary, RunConfig};
use atnquant::report::biomarker_lines;
use atnquant::roi::{MaskDefinition, RegionSet};
use atnquant::scales::{check_centiloid_criteria, fit_centaur_level1, fit_level1, fit_level2, CalibrationLine, Scale, Tracer};
use atnquant::staging::{AmyloidScheme, AtnProfile, StagingThresholds};
use atnquant::stats::{agreement, anova_oneway, bland_altman, cohens_d, icc, linear_fit};
use atnquant::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use columns::Table;
use serde_json::json;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Exit status for command-line usage errors.
const USAGE_EXIT: u8 = 64;

#[derive(Parser)]
#[command(name = "atnquant", version, about = "Regional PET quantification with Centiloid/CenTauR scaling and A/T2/N staging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantify one subject, or a batch from a manifest.
    Quantify(QuantifyArgs),
    /// Fit or check calibration lines.
    Calibrate(CalibrateArgs),
    /// Build a composite mask from effect sizes.
    DeriveMask(DeriveMaskArgs),
    /// Agreement and group-difference statistics.
    Concordance(ConcordanceArgs),
    /// Generate a synthetic PET/label pair with ground truth.
    Phantom(PhantomArgs),
    /// Classify A/T2/N status from scale values.
    Stage(StageArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Amypad,
    Binary,
}

impl From<SchemeArg> for AmyloidScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Amypad => AmyloidScheme::Amypad,
            SchemeArg::Binary => AmyloidScheme::Binary,
        }
    }
}

#[derive(Args)]
struct QuantifyArgs {
    #[arg(long, default_value = "subject")]
    subject: String,
    #[arg(long)]
    age: Option<f64>,
    #[arg(long)]
    sex: Option<String>,
    #[arg(long)]
    amyloid_pet: Option<PathBuf>,
    #[arg(long)]
    tau_pet: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    xfm_amyloid: Option<PathBuf>,
    #[arg(long)]
    xfm_tau: Option<PathBuf>,
    /// PET is already in label space; resample with an identity transform if grids differ.
    #[arg(long)]
    assume_registered: bool,
    #[arg(long)]
    amyloid_tracer: Option<Tracer>,
    #[arg(long)]
    tau_tracer: Option<Tracer>,
    /// JSON with `centiloid` and `centaur` mask definitions.
    #[arg(long)]
    masks: Option<PathBuf>,
    /// Region list JSON for the regional tables.
    #[arg(long)]
    regions: Option<PathBuf>,
    /// Calibration registry JSON.
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Volumes CSV (`label,name,volume_mm3,volume_normalized`).
    #[arg(long)]
    volumes: Option<PathBuf>,
    #[arg(long)]
    havas_model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "amypad")]
    amyloid_scheme: SchemeArg,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fail on non-finite voxels instead of setting them to 0.
    #[arg(long)]
    strict: bool,
    /// Exclude voxels resampled from outside the PET field of view.
    #[arg(long)]
    exclude_oof: bool,
    /// Batch manifest CSV; per-row columns override the flags above.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Worker threads for batch runs.
    #[arg(long)]
    jobs: Option<usize>,
}

impl QuantifyArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            subject: self.subject.clone(),
            age: self.age,
            sex: self.sex.clone(),
            amyloid_pet: self.amyloid_pet.clone(),
            tau_pet: self.tau_pet.clone(),
            labels: self.labels.clone(),
            xfm_amyloid: self.xfm_amyloid.clone(),
            xfm_tau: self.xfm_tau.clone(),
            assume_registered: self.assume_registered,
            amyloid_tracer: self.amyloid_tracer,
            tau_tracer: self.tau_tracer,
            masks: self.masks.clone(),
            regions: self.regions.clone(),
            registry: self.registry.clone(),
            volumes: self.volumes.clone(),
            havas_model: self.havas_model.clone(),
            amyloid_scheme: self.amyloid_scheme.into(),
            out: self.out.clone(),
            strict: self.strict,
            exclude_oof: self.exclude_oof,
        }
    }
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(subcommand)]
    mode: CalibrateMode,
}

#[derive(Subcommand)]
enum CalibrateMode {
    /// PiB anchor line from `group,suvr` rows (groups `ycn` and `ad`).
    Level1 {
        #[arg(long)]
        input: PathBuf,
    },
    /// Tracer line from paired `pib_suvr,tracer_suvr` rows.
    Level2 {
        #[arg(long)]
        tracer: Tracer,
        #[arg(long)]
        input: PathBuf,
        /// Level-1 line as `slope,intercept`; defaults to the registry PiB row.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        level1: Option<Vec<f64>>,
    },
    /// Check replicated against published Centiloids (`published,replicated`).
    Criteria {
        #[arg(long)]
        input: PathBuf,
    },
    /// CenTauR line from `published_suvr,local_suvr` rows.
    Centaur {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args)]
struct DeriveMaskArgs {
    /// Reference group SUVR table (`subject,<label>,...`).
    #[arg(long, requires = "group_b")]
    group_a: Option<PathBuf>,
    /// Comparison group SUVR table.
    #[arg(long, requires = "group_a")]
    group_b: Option<PathBuf>,
    /// Precomputed `label,name,cohens_d` table; the shipped table is used when
    /// no groups are given.
    #[arg(long, conflicts_with = "group_a")]
    d_values: Option<PathBuf>,
    /// Region list JSON providing contralateral partners.
    #[arg(long)]
    partners: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value = "derived")]
    name: String,
    /// Reference labels; defaults to the shipped Centiloid reference.
    #[arg(long, value_delimiter = ',')]
    reference: Option<Vec<u32>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConcordanceArgs {
    /// Paired measurements.
    #[arg(long, required_unless_present = "groups")]
    pairs: Option<PathBuf>,
    #[arg(long, default_value = "x")]
    x: String,
    #[arg(long, default_value = "y")]
    y: String,
    /// `group,value` rows for one-way ANOVA.
    #[arg(long)]
    groups: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StageArgs {
    #[arg(long, allow_hyphen_values = true)]
    cl: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    ctrz: Option<f64>,
    #[arg(long)]
    havas: Option<f64>,
    #[arg(long, value_enum, default_value = "amypad")]
    amyloid_scheme: SchemeArg,
    /// Print JSON instead of text lines.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(USAGE_EXIT) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Quantify(a) => quantify(&a),
        Command::Calibrate(a) => calibrate(a.mode).map(|_| ExitCode::SUCCESS),
        Command::DeriveMask(a) => derive(&a).map(|_| ExitCode::SUCCESS),
        Command::Concordance(a) => concordance(&a).map(|_| ExitCode::SUCCESS),
        Command::Phantom(a) => phantom(&a).map(|_| ExitCode::SUCCESS),
        Command::Stage(a) => stage(&a).map(|_| ExitCode::SUCCESS),
    }
}

fn emit_json(value: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::from(e).in_file(path)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn quantify(a: &QuantifyArgs) -> Result<ExitCode> {
    let base = a.config();
    let Some(manifest) = &a.manifest else {
        let result = run_quantify(&base)?;
        for line in biomarker_lines(&result.profile) {
            println!("{line}");
        }
        return Ok(ExitCode::SUCCESS);
    };
    let out = a
        .out
        .as_ref()
        .ok_or_else(|| Error::Config("--out is required with --manifest".into()))?;
    let configs = read_manifest(manifest, &base)?;
    let results = run_batch(&configs, a.jobs)?;
    std::fs::create_dir_all(out).map_err(|e| Error::from(e).in_file(out))?;
    write_batch_summary(&results, &out.join("batch_summary.csv"))?;
    let mut code = ExitCode::SUCCESS;
    for (subject, r) in &results {
        match r {
            Ok(r) => println!("{subject}: {}", biomarker_lines(&r.profile).join("; ")),
            Err(e) => {
                eprintln!("{subject}: error: {e}");
                if code == ExitCode::SUCCESS {
                    code = ExitCode::from(e.exit_code() as u8);
                }
            }
        }
    }
    Ok(code)
}

fn calibrate(mode: CalibrateMode) -> Result<()> {
    let value = match mode {
        CalibrateMode::Level1 { input } => {
            let groups = Table::read(&input)?.groups("group", "suvr")?;
            let pick = |name: &str| {
                groups
                    .iter()
                    .find(|(g, _)| g.eq_ignore_ascii_case(name))
                    .map(|(_, v)| v.clone())
                    .ok_or_else(|| Error::Config(format!("no rows for group {name:?}")).in_file(&input))
            };
            let (anchors, line) = fit_level1(&pick("ycn")?, &pick("ad")?)?;
            json!({ "anchors": anchors, "line": line })
        }
        CalibrateMode::Level2 { tracer, input, level1 } => {
            let t = Table::read(&input)?;
            let pib = t.numbers("pib_suvr").map_err(|e| e.in_file(&input))?;
            let trc = t.numbers("tracer_suvr").map_err(|e| e.in_file(&input))?;
            let l1 = match level1 {
                Some(v) if v.len() == 2 => CalibrationLine::new(Tracer::PiB, Scale::CL, v[0], v[1]),
                Some(v) => {
                    return Err(Error::Config(format!("--level1 takes slope,intercept, got {} values", v.len())))
                }
                None => *DataDir::from_env()?.registry()?.line(Tracer::PiB, Scale::CL)?,
            };
            let (line, r2) = fit_level2(tracer, &pib, &trc, &l1)?;
            json!({ "line": line, "r2": r2 })
        }
        CalibrateMode::Criteria { input } => {
            let t = Table::read(&input)?;
            let published = t.numbers("published").map_err(|e| e.in_file(&input))?;
            let replicated = t.numbers("replicated").map_err(|e| e.in_file(&input))?;
            json!(check_centiloid_criteria(&replicated, &published)?)
        }
        CalibrateMode::Centaur { input } => {
            let t = Table::read(&input)?;
            let published = t.numbers("published_suvr").map_err(|e| e.in_file(&input))?;
            let local = t.numbers("local_suvr").map_err(|e| e.in_file(&input))?;
            json!({ "line": fit_centaur_level1(&published, &local)? })
        }
    };
    emit_json(&value, None)
}

fn derive(a: &DeriveMaskArgs) -> Result<()> {
    let data = DataDir::from_env()?;
    let ranked = match (&a.group_a, &a.group_b, &a.d_values) {
        (Some(ga), Some(gb), _) => rank_structures(&GroupSuvrTable::read(ga)?, &GroupSuvrTable::read(gb)?)?,
        (_, _, Some(d)) => read_ranking(d)?,
        _ => data.cohens_d()?,
    };
    let regions = match &a.partners {
        Some(p) => RegionSet::read(p)?,
        None => data.regions()?,
    };
    let reference: BTreeSet<u32> = match &a.reference {
        Some(r) => r.iter().copied().collect(),
        None => data.masks()?.centiloid.reference_labels,
    };
    for s in ranked.iter().filter(|s| s.flagged()) {
        eprintln!("warning: label {} has zero pooled sd and was not ranked", s.label);
    }
    let derived = derive_mask(&ranked, a.threshold, &regions.partner_map())?;
    let mask: MaskDefinition = derived.into_mask(a.name.clone(), reference)?;
    emit_json(&json!(mask), a.out.as_deref())
}

fn concordance(a: &ConcordanceArgs) -> Result<()> {
    let mut value = serde_json::Map::new();
    if let Some(path) = &a.pairs {
        let t = Table::read(path)?;
        let x = t.numbers(&a.x).map_err(|e| e.in_file(path))?;
        let y = t.numbers(&a.y).map_err(|e| e.in_file(path))?;
        value.insert("n".into(), json!(x.len()));
        value.insert("fit".into(), json!(linear_fit(&x, &y)?));
        value.insert("icc".into(), json!(icc(&x, &y)?));
        value.insert("bland_altman".into(), json!(bland_altman(&x, &y)?));
        value.insert("agreement".into(), json!(agreement(&x, &y)?));
    }
    if let Some(path) = &a.groups {
        let groups = Table::read(path)?.groups("group", "value").map_err(|e| e.in_file(path))?;
        let values: Vec<Vec<f64>> = groups.iter().map(|(_, v)| v.clone()).collect();
        let names: Vec<&String> = groups.iter().map(|(g, _)| g).collect();
        value.insert("groups".into(), json!(names));
        value.insert("anova".into(), json!(anova_oneway(&values)?));
        if values.len() == 2 {
            value.insert("cohens_d".into(), json!(cohens_d(&values[0], &values[1])?));
        }
    }
    emit_json(&serde_json::Value::Object(value), a.out.as_deref())
}

fn phantom(a: &PhantomArgs) -> Result<()> {
    let spec = PhantomSpec::read(&a.spec)?;
    let p = make_phantom(&spec)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::from(e).in_file(&a.out))?;
    write_image_file(&a.out.join("pet.nii.gz"), &p.image)?;
    write_labels_file(&a.out.join("labels.nii.gz"), &p.labels)?;
    let gt = a.out.join("ground_truth.csv");
    let file = std::fs::File::create(&gt).map_err(|e| Error::from(e).in_file(&gt))?;
    write_ground_truth_csv(&p.ground_truth, file).map_err(|e| e.in_file(&gt))
}

fn stage(a: &StageArgs) -> Result<()> {
    if a.cl.is_none() && a.ctrz.is_none() && a.havas.is_none() {
        return Err(Error::Config("give at least one of --cl, --ctrz, --havas".into()));
    }
    let thresholds = StagingThresholds::with_scheme(a.amyloid_scheme.into());
    let profile = AtnProfile::classify(a.cl, a.ctrz, a.havas, &thresholds)?;
    if a.json {
        return emit_json(&json!(profile), None);
    }
    for line in biomarker_lines(&profile) {
        println!("{line}");
    }
    Ok(())
}

