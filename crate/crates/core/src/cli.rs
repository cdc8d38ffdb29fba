//! Command-line surface. Every subcommand writes its artifacts plus a
//! `manifest.json` into `--out`.
//!
//! Exit codes: 0 success, 2 usage or validation error, 1 internal error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::acoustics::{
    f0_band, measure_durations, track_f0, track_formants, track_intensity, AnnotationTier, FormantFrame,
};
use crate::analysis::{
    build_profiles, linear_regression, pearson, permutation_threshold, rank_latents, spectral_cluster, Condition,
    DEFAULT_GAMMA, DEFAULT_K,
};
use crate::error::{Error, Result};
use crate::generator::{forward, sample_latent, GeneratorSpec, LatentVector, WeightBundle, SAMPLE_RATE};
use crate::io::{self, PlotSeries, RunManifest, WavEncoding};
use crate::probe::{probe_trace, series_to_waveform, LayerProbe};
use crate::sweep::{run_sweep, sweep_energy_profile, SweepSpec, SweepTarget};
use crate::tensor::Rng;

pub const THREADS_ENV: &str = "LAYERSCOPE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "layerscope", version, about = "Layer-wise probes and acoustic analysis for waveform generators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Root seed; per-output seeds are derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run directory for artifacts and the manifest.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Model {
    /// Generator weights in `.lgw` format.
    #[arg(long)]
    weights: PathBuf,
    /// Latent overrides, e.g. `z11=-15,z3=2`.
    #[arg(long = "set", default_value = "")]
    set: String,
    /// Code entries (comma separated) for generators with a code input.
    #[arg(long, value_delimiter = ',')]
    code: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Wavegan,
    Ciwgan,
    Deep10,
    /// Five layers with 64 dense channels; same sample counts as wavegan.
    Tiny,
}

impl Preset {
    fn spec(self) -> GeneratorSpec {
        match self {
            Preset::Wavegan => GeneratorSpec::wavegan(),
            Preset::Ciwgan => GeneratorSpec::ciwgan(),
            Preset::Deep10 => GeneratorSpec::deep10(),
            Preset::Tiny => GeneratorSpec::halving(100, 0, 64, 16, 5, 4),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Encoding {
    Float32,
    Pcm16,
}

impl From<Encoding> for WavEncoding {
    fn from(e: Encoding) -> Self {
        match e {
            Encoding::Float32 => WavEncoding::Float32,
            Encoding::Pcm16 => WavEncoding::Pcm16,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate outputs as WAV files plus their latents.
    Generate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, value_enum, default_value = "float32")]
        encoding: Encoding,
    },
    /// Averaged-ReLU probes of every layer for one latent.
    Probe {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        /// Average pre-activation values instead of post-ReLU ones.
        #[arg(long)]
        pre: bool,
    },
    /// Sweep one latent or code entry over a range.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        /// `z<N>` (0-based noise entry) or `c<N>` (1-based code entry).
        #[arg(long)]
        target: String,
        #[arg(long = "from", allow_hyphen_values = true)]
        from: f64,
        #[arg(long = "to", allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 2.0)]
        step: f64,
    },
    /// Acoustic measurements of a WAV file or annotation tiers.
    Acoustics {
        #[command(subcommand)]
        measure: Measure,
    },
    /// Pearson correlation and OLS regression of two series CSVs.
    Correlate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
    },
    /// Rank latent entries by how well they predict a binary property.
    RankLatents {
        #[command(flatten)]
        common: Common,
        /// Matrix CSV, one row of latent values per output.
        #[arg(long)]
        latents: PathBuf,
        /// Series CSV of 0/1 presence labels.
        #[arg(long)]
        presence: PathBuf,
        /// Label permutations for a chance-level score (0 disables).
        #[arg(long, default_value_t = 0)]
        permutations: usize,
    },
    /// Mean post-ReLU feature maps of one layer under latent conditions.
    Profiles {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        weights: PathBuf,
        /// Conditions such as `z11=-15`; repeat for several.
        #[arg(long = "condition", required = true)]
        conditions: Vec<String>,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long)]
        layer: usize,
    },
    /// Spectral clustering of the rows of a matrix CSV.
    Cluster {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GAMMA)]
        gamma: f64,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
    },
    /// Render one layer of a probe CSV as a 16 kHz WAV.
    ExportWav {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        layer: usize,
        #[arg(long, value_enum, default_value = "float32")]
        encoding: Encoding,
    },
    /// Overlay plot (CSV + SVG) of layers from a probe CSV.
    Plot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Layers to include (default: all).
        #[arg(long, value_delimiter = ',')]
        layers: Option<Vec<usize>>,
        /// Output WAV; probes are scaled to its peak and it is drawn too.
        #[arg(long)]
        wav: Option<PathBuf>,
    },
    /// Write random weights for a preset architecture.
    SynthWeights {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "wavegan")]
        preset: Preset,
        #[arg(long, default_value_t = 0.05)]
        scale: f64,
    },
    /// Record a forward-pass fixture for one latent.
    RecordFixture {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
    },
    /// Compare the forward pass against a fixture file.
    CheckFixture {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        fixture: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum Measure {
    /// F0 track (`time,value`, empty when unvoiced).
    F0 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = f0_band::SPEECH.0)]
        floor: f64,
        #[arg(long, default_value_t = f0_band::SPEECH.1)]
        ceiling: f64,
    },
    /// Intensity track in dB.
    Intensity {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 100.0)]
        min_pitch: f64,
    },
    /// F1/F2 track.
    Formants {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 5500.0)]
        max_formant: f64,
        #[arg(long, default_value_t = 10)]
        order: usize,
    },
    /// Paired interval durations of two annotation tiers, with a regression.
    Duration {
        #[command(flatten)]
        common: Common,
        /// Tier annotated on a layer probe.
        #[arg(long)]
        layer_tier: PathBuf,
        /// Tier annotated on the output.
        #[arg(long)]
        output_tier: PathBuf,
        #[arg(long)]
        label: String,
    },
}

/// Run the CLI on `argv` (including the program name) and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let result = match &pool {
        Some(pool) => pool.install(|| dispatch(cli.command)),
        None => dispatch(cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Validation(format!("{THREADS_ENV}={raw} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))
}

/// Run directory plus the manifest being built for it.
struct Run {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Run {
    fn new(command: &str, common: &Common) -> Result<Self> {
        std::fs::create_dir_all(&common.out).map_err(|e| Error::io(&common.out, e))?;
        let mut manifest = RunManifest::start(command);
        manifest.seed = Some(common.seed);
        Ok(Self {
            dir: common.out.clone(),
            manifest,
        })
    }

    fn path(&self, name: &str) -> Result<PathBuf> {
        let p = self.dir.join(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        Ok(p)
    }

    fn record(&mut self, path: &Path) -> Result<()> {
        self.manifest.add_artifact(&self.dir, path)
    }

    fn load(&mut self, weights: &Path) -> Result<(GeneratorSpec, WeightBundle)> {
        self.manifest.weights_sha256 = Some(io::sha256_file(weights)?);
        self.manifest.param("weights", weights.display().to_string());
        io::load_weights(weights)
    }

    fn finish(self) -> Result<()> {
        self.manifest.finish(&self.dir).map(|_| ())
    }
}

fn latent_for(spec: &GeneratorSpec, model: &Model, seed: u64, index: u64) -> Result<LatentVector> {
    let cond = Condition::parse(&model.set)?;
    let mut rng = Rng::derived(seed, index);
    sample_latent(&mut rng, spec, &cond.overrides, model.code.as_deref())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Generate {
            common,
            model,
            n,
            encoding,
        } => generate(&common, &model, n, encoding.into()),
        Command::Probe { common, model, pre } => probe(&common, &model, pre),
        Command::Sweep {
            common,
            model,
            target,
            from,
            to,
            step,
        } => sweep(&common, &model, &target, from, to, step),
        Command::Acoustics { measure } => acoustics(measure),
        Command::Correlate { common, x, y } => correlate(&common, &x, &y),
        Command::RankLatents {
            common,
            latents,
            presence,
            permutations,
        } => rank(&common, &latents, &presence, permutations),
        Command::Profiles {
            common,
            weights,
            conditions,
            n,
            layer,
        } => profiles(&common, &weights, &conditions, n, layer),
        Command::Cluster {
            common,
            input,
            gamma,
            k,
        } => cluster(&common, &input, gamma, k),
        Command::ExportWav {
            common,
            input,
            layer,
            encoding,
        } => export_wav(&common, &input, layer, encoding.into()),
        Command::Plot {
            common,
            input,
            layers,
            wav,
        } => plot(&common, &input, layers, wav),
        Command::SynthWeights { common, preset, scale } => synth_weights(&common, preset, scale),
        Command::RecordFixture { common, model } => record_fixture(&common, &model),
        Command::CheckFixture {
            common,
            weights,
            fixture,
        } => check_fixture(&common, &weights, &fixture),
    }
}

fn generate(common: &Common, model: &Model, n: usize, encoding: WavEncoding) -> Result<()> {
    if n == 0 {
        return Err(Error::Validation("--n must be at least 1".into()));
    }
    let mut run = Run::new("generate", common)?;
    run.manifest.param("n", n);
    run.manifest.param("set", &model.set);
    run.manifest.param("encoding", encoding);
    let (spec, weights) = run.load(&model.weights)?;
    use rayon::prelude::*;
    let outputs = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let latent = latent_for(&spec, model, common.seed, i)?;
            let trace = forward(&spec, &weights, &latent)?;
            Ok((latent, trace.waveform))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut latents = Vec::with_capacity(n);
    for (i, (latent, wave)) in outputs.into_iter().enumerate() {
        let p = run.path(&format!("output_{i:04}.wav"))?;
        io::write_wav(&p, &wave, SAMPLE_RATE, encoding)?;
        run.record(&p)?;
        latents.push(latent.to_input());
    }
    let p = run.path("latents.csv")?;
    io::write_matrix(&p, &latents)?;
    run.record(&p)?;
    run.finish()
}

fn write_probes(run: &mut Run, prefix: &str, probes: &[LayerProbe], waveform: &[f64]) -> Result<()> {
    let p = run.path(&format!("{prefix}probes.csv"))?;
    io::write_probe_csv(&p, probes)?;
    run.record(&p)?;
    for probe in probes {
        let p = run.path(&format!("{prefix}conv{}.wav", probe.layer_index))?;
        io::write_wav(&p, &series_to_waveform(&probe.series), SAMPLE_RATE, WavEncoding::Float32)?;
        run.record(&p)?;
    }
    let p = run.path(&format!("{prefix}output.wav"))?;
    io::write_wav(&p, waveform, SAMPLE_RATE, WavEncoding::Float32)?;
    run.record(&p)?;
    Ok(())
}

fn probe(common: &Common, model: &Model, pre: bool) -> Result<()> {
    let mut run = Run::new("probe", common)?;
    run.manifest.param("set", &model.set);
    run.manifest.param("pre_activation", pre);
    let (spec, weights) = run.load(&model.weights)?;
    let latent = latent_for(&spec, model, common.seed, 0)?;
    let trace = forward(&spec, &weights, &latent)?;
    let probes = probe_trace(&trace, pre);
    write_probes(&mut run, "", &probes, &trace.waveform)?;

    let mut series: Vec<PlotSeries> = probes.iter().map(PlotSeries::from_probe).collect();
    series.push(PlotSeries::new("output", trace.waveform.clone()));
    let (csv, svg) = io::emit_plot(&series, &run.path("overlay")?)?;
    run.record(&csv)?;
    run.record(&svg)?;
    run.finish()
}

fn sweep(common: &Common, model: &Model, target: &str, from: f64, to: f64, step: f64) -> Result<()> {
    let mut run = Run::new("sweep", common)?;
    run.manifest.param("target", target);
    run.manifest.param("from", from);
    run.manifest.param("to", to);
    run.manifest.param("step", step);
    run.manifest.param("set", &model.set);
    let (spec, weights) = run.load(&model.weights)?;
    let sweep_spec = SweepSpec {
        target: target.parse::<SweepTarget>()?,
        start: from,
        end: to,
        step,
        base: latent_for(&spec, model, common.seed, 0)?,
    };
    let result = run_sweep(&sweep_spec, &spec, &weights)?;
    for (k, s) in result.steps.iter().enumerate() {
        write_probes(&mut run, &format!("step_{k:02}/"), &s.probes, &s.waveform)?;
    }
    let energy = (1..=spec.n_layers())
        .map(|layer| sweep_energy_profile(&result, layer, None))
        .collect::<Result<Vec<_>>>()?;
    let summary = json!({
        "target": sweep_spec.target.to_string(),
        "values": result.steps.iter().map(|s| s.value).collect::<Vec<_>>(),
        "layer_energy": energy,
    });
    let p = run.path("sweep.json")?;
    io::atomic_write(&p, &serde_json::to_vec_pretty(&summary)?)?;
    run.record(&p)?;
    run.finish()
}

fn acoustics(measure: Measure) -> Result<()> {
    match measure {
        Measure::F0 {
            common,
            input,
            floor,
            ceiling,
        } => {
            let mut run = Run::new("acoustics f0", &common)?;
            run.manifest.param("input", input.display().to_string());
            run.manifest.param("floor", floor);
            run.manifest.param("ceiling", ceiling);
            let (x, rate) = io::read_wav(&input)?;
            let t = track_f0(&x, rate as f64, floor, ceiling)?;
            let p = run.path("f0.csv")?;
            io::write_track_csv(&p, &t.times, &t.f0)?;
            run.record(&p)?;
            run.finish()
        }
        Measure::Intensity {
            common,
            input,
            min_pitch,
        } => {
            let mut run = Run::new("acoustics intensity", &common)?;
            run.manifest.param("input", input.display().to_string());
            run.manifest.param("min_pitch", min_pitch);
            let (x, rate) = io::read_wav(&input)?;
            let t = track_intensity(&x, rate as f64, min_pitch)?;
            let p = run.path("intensity.csv")?;
            let values: Vec<Option<f64>> = t.db.iter().copied().map(Some).collect();
            io::write_track_csv(&p, &t.times, &values)?;
            run.record(&p)?;
            run.finish()
        }
        Measure::Formants {
            common,
            input,
            max_formant,
            order,
        } => {
            let mut run = Run::new("acoustics formants", &common)?;
            run.manifest.param("input", input.display().to_string());
            run.manifest.param("max_formant", max_formant);
            run.manifest.param("order", order);
            let (x, rate) = io::read_wav(&input)?;
            let t = track_formants(&x, rate as f64, max_formant, order)?;
            let p = run.path("formants.csv")?;
            write_formants(&p, &t.frames)?;
            run.record(&p)?;
            run.finish()
        }
        Measure::Duration {
            common,
            layer_tier,
            output_tier,
            label,
        } => {
            let mut run = Run::new("acoustics duration", &common)?;
            run.manifest.param("layer_tier", layer_tier.display().to_string());
            run.manifest.param("output_tier", output_tier.display().to_string());
            run.manifest.param("label", &label);
            let a = AnnotationTier::read(&layer_tier)?;
            let b = AnnotationTier::read(&output_tier)?;
            let pairs = measure_durations(&a, &b, &label)?;
            let p = run.path("durations.csv")?;
            io::write_matrix(&p, &pairs.iter().map(|(x, y)| vec![*x, *y]).collect::<Vec<_>>())?;
            run.record(&p)?;
            let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let reg = linear_regression(&xs, &ys)?;
            let p = run.path("regression.json")?;
            io::atomic_write(&p, &serde_json::to_vec_pretty(&reg)?)?;
            run.record(&p)?;
            run.finish()
        }
    }
}

fn write_formants(path: &Path, frames: &[FormantFrame]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time", "f1", "f2", "b1", "b2"])?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for f in frames {
        w.write_record([f.time.to_string(), cell(f.f1), cell(f.f2), cell(f.b1), cell(f.b2)])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Validation(format!("csv buffer: {e}")))?;
    io::atomic_write(path, &bytes)
}

fn correlate(common: &Common, x: &Path, y: &Path) -> Result<()> {
    let mut run = Run::new("correlate", common)?;
    run.manifest.param("x", x.display().to_string());
    run.manifest.param("y", y.display().to_string());
    let xs = io::read_series_csv(x)?;
    let ys = io::read_series_csv(y)?;
    let r = pearson(&xs, &ys)?;
    let reg = linear_regression(&xs, &ys)?;
    let p = run.path("correlation.json")?;
    io::atomic_write(&p, &serde_json::to_vec_pretty(&json!({ "pearson_r": r, "regression": reg }))?)?;
    run.record(&p)?;
    run.finish()
}

fn rank(common: &Common, latents: &Path, presence: &Path, permutations: usize) -> Result<()> {
    let mut run = Run::new("rank-latents", common)?;
    run.manifest.param("latents", latents.display().to_string());
    run.manifest.param("presence", presence.display().to_string());
    run.manifest.param("permutations", permutations);
    let z = io::read_matrix(latents)?;
    let labels = io::read_series_csv(presence)?
        .into_iter()
        .map(|v| match v {
            v if v == 0.0 => Ok(false),
            v if v == 1.0 => Ok(true),
            v => Err(Error::Validation(format!("presence label {v} is not 0 or 1"))),
        })
        .collect::<Result<Vec<bool>>>()?;
    let ranking = rank_latents(&z, &labels)?;
    let threshold = if permutations > 0 {
        Some(permutation_threshold(&z, &labels, permutations, common.seed)?)
    } else {
        None
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "index", "coefficient"])?;
    for (r, e) in ranking.entries.iter().enumerate() {
        w.write_record([(r + 1).to_string(), e.index.to_string(), e.coefficient.to_string()])?;
    }
    let p = run.path("ranking.csv")?;
    io::atomic_write(&p, &w.into_inner().map_err(|e| Error::Validation(e.to_string()))?)?;
    run.record(&p)?;
    let p = run.path("ranking.json")?;
    io::atomic_write(
        &p,
        &serde_json::to_vec_pretty(&json!({
            "method": ranking.method,
            "iterations": ranking.iterations,
            "top": ranking.top(),
            "permutation_threshold": threshold,
        }))?,
    )?;
    run.record(&p)?;
    run.finish()
}

fn profiles(common: &Common, weights: &Path, conditions: &[String], n: usize, layer: usize) -> Result<()> {
    let mut run = Run::new("profiles", common)?;
    run.manifest.param("conditions", conditions);
    run.manifest.param("n", n);
    run.manifest.param("layer", layer);
    let (spec, w) = run.load(weights)?;
    let conds = conditions
        .iter()
        .map(|c| Condition::parse(c))
        .collect::<Result<Vec<_>>>()?;
    let profiles = build_profiles(&spec, &w, n, &conds, layer, common.seed)?;
    let mut labels = BTreeMap::new();
    for (i, prof) in profiles.iter().enumerate() {
        let rows: Vec<Vec<f64>> = prof.maps.rows().map(<[f64]>::to_vec).collect();
        let name = format!("profile_{i:02}.csv");
        let p = run.path(&name)?;
        io::write_matrix(&p, &rows)?;
        run.record(&p)?;
        labels.insert(name, prof.label.clone());
    }
    run.manifest.param("labels", labels);
    run.finish()
}

fn cluster(common: &Common, input: &Path, gamma: f64, k: usize) -> Result<()> {
    let mut run = Run::new("cluster", common)?;
    run.manifest.param("input", input.display().to_string());
    run.manifest.param("gamma", gamma);
    run.manifest.param("k", k);
    let rows = io::read_matrix(input)?;
    let result = spectral_cluster(&rows, gamma, k, common.seed)?;
    let p = run.path("assignments.csv")?;
    io::write_assignments(&p, &result.assignments)?;
    run.record(&p)?;
    let p = run.path("eigenvalues.json")?;
    io::atomic_write(&p, &serde_json::to_vec_pretty(&result.eigenvalues)?)?;
    run.record(&p)?;
    run.finish()
}

fn probe_layer(input: &Path, layer: usize) -> Result<Vec<f64>> {
    io::read_probe_csv(input)?
        .into_iter()
        .find(|(l, _)| *l == layer)
        .map(|(_, s)| s)
        .ok_or_else(|| Error::Validation(format!("layer {layer} not found in {}", input.display())))
}

fn export_wav(common: &Common, input: &Path, layer: usize, encoding: WavEncoding) -> Result<()> {
    let mut run = Run::new("export-wav", common)?;
    run.manifest.param("input", input.display().to_string());
    run.manifest.param("layer", layer);
    run.manifest.param("encoding", encoding);
    let series = probe_layer(input, layer)?;
    let p = run.path(&format!("conv{layer}.wav"))?;
    io::write_wav(&p, &series_to_waveform(&series), SAMPLE_RATE, encoding)?;
    run.record(&p)?;
    run.finish()
}

fn plot(common: &Common, input: &Path, layers: Option<Vec<usize>>, wav: Option<PathBuf>) -> Result<()> {
    let mut run = Run::new("plot", common)?;
    run.manifest.param("input", input.display().to_string());
    run.manifest.param("layers", &layers);
    let all = io::read_probe_csv(input)?;
    let waveform = match &wav {
        Some(p) => {
            run.manifest.param("wav", p.display().to_string());
            Some(io::read_wav(p)?.0)
        }
        None => None,
    };
    let mut series = Vec::new();
    for (layer, s) in all {
        if layers.as_ref().is_some_and(|ls| !ls.contains(&layer)) {
            continue;
        }
        let mut probe = LayerProbe {
            layer_index: layer,
            series: s,
            upsampled: None,
            scale_hint: 1.0,
        };
        if let Some(w) = &waveform {
            probe = probe.with_scale_hint(w);
        }
        series.push(PlotSeries::from_probe(&probe));
    }
    if series.is_empty() {
        return Err(Error::Validation("no layers selected".into()));
    }
    if let Some(w) = waveform {
        series.push(PlotSeries::new("output", w));
    }
    let (csv, svg) = io::emit_plot(&series, &run.path("plot")?)?;
    run.record(&csv)?;
    run.record(&svg)?;
    run.finish()
}

fn synth_weights(common: &Common, preset: Preset, scale: f64) -> Result<()> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Validation("--scale must be positive".into()));
    }
    let mut run = Run::new("synth-weights", common)?;
    run.manifest.param("preset", format!("{preset:?}").to_lowercase());
    run.manifest.param("scale", scale);
    let spec = preset.spec();
    let w = WeightBundle::random(&spec, common.seed, scale);
    let p = run.path("weights.lgw")?;
    io::save_weights(&p, &spec, &w)?;
    run.record(&p)?;
    run.finish()
}

fn record_fixture(common: &Common, model: &Model) -> Result<()> {
    let mut run = Run::new("record-fixture", common)?;
    run.manifest.param("set", &model.set);
    let (spec, w) = run.load(&model.weights)?;
    let latent = latent_for(&spec, model, common.seed, 0)?;
    let fx = io::Fixture::record(&spec, &w, &latent, concat!("layerscope ", env!("CARGO_PKG_VERSION")))?;
    let p = run.path("fixture.lgwfix")?;
    io::save_fixture(&p, &fx)?;
    run.record(&p)?;
    run.finish()
}

fn check_fixture(common: &Common, weights: &Path, fixture: &Path) -> Result<()> {
    let mut run = Run::new("check-fixture", common)?;
    run.manifest.param("fixture", fixture.display().to_string());
    let (spec, w) = run.load(weights)?;
    let fx = io::load_fixture(fixture)?;
    let report = io::compare_fixture(&spec, &w, &fx)?;
    let p = run.path("fixture_report.json")?;
    io::atomic_write(&p, &serde_json::to_vec_pretty(&report)?)?;
    run.record(&p)?;
    run.finish()?;
    if report.passed {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "fixture mismatch: max relative error {:.3e} exceeds {:.0e}",
            report.max_rel_error,
            io::FIXTURE_TOLERANCE
        )))
    }
}
