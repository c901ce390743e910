use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use dcae_core::corpus::{build_pairs, synthetic_records, CleanRecord, CorpusConfig};
use dcae_core::dsp::{spectrogram, welch_psd, write_psd_csv, write_spectrogram_csv};
use dcae_core::eval::{
    evaluate_dataset, occlusion_probe, subject_template, write_eval_csv, write_summary, Region,
};
use dcae_core::io::{
    load_checkpoint, load_wfdb_record, read_dataset, save_checkpoint, write_dataset,
};
use dcae_core::model::{build_model, train_with, DcaeConfig, DcaeModel, TrainConfig};
use dcae_core::nn::AdamConfig;
use dcae_core::noise::{augment, NoiseMixConfig, NoisyCleanPair};
use dcae_core::seed::derive_seed;
use dcae_core::{Error, SignalWindow};

use crate::{
    io_err, Cli, CliError, Command, DenoiseArgs, EvalArgs, ExportArgs, ExportKind, GenerateArgs,
    OccludeArgs, RegionArg, SignalArg, TrainArgs, OUT_DIR_ENV,
};

type Result<T> = std::result::Result<T, CliError>;

/// Runs one subcommand. Human-readable results go to `stdout`; progress
/// and diagnostics go to stderr.
pub fn run<W: Write>(cli: &Cli, stdout: &mut W) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => generate(a, stdout),
        Command::Train(a) => train(a, stdout),
        Command::Denoise(a) => denoise(a, stdout),
        Command::Eval(a) => eval(a, stdout),
        Command::Occlude(a) => occlude(a, stdout),
        Command::Export(a) => export(a, stdout),
    }
}

fn resolve_out(arg: &Option<PathBuf>, default_name: &str) -> PathBuf {
    match arg {
        Some(p) => p.clone(),
        None => match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) => PathBuf::from(dir).join(default_name),
            None => PathBuf::from(default_name),
        },
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn write_with(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> dcae_core::Result<()>,
) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush().map_err(io_err(path))
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(CliError::Usage(format!(
            "{what} {} does not exist",
            path.display()
        )));
    }
    Ok(())
}

fn read_pairs(path: &Path) -> Result<Vec<NoisyCleanPair>> {
    require_file(path, "dataset")?;
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(read_dataset(&bytes)?.1)
}

fn load_model(path: &Path) -> Result<DcaeModel> {
    require_file(path, "checkpoint")?;
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(load_checkpoint(&bytes)?.0)
}

#[derive(Serialize)]
struct Resolved<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    args: &'a T,
}

/// Records the fully resolved arguments as `<out>.config.json`.
fn write_config<T: Serialize>(out: &Path, command: &str, args: &T) -> Result<()> {
    let path = sibling(out, ".config.json");
    let mut w = create(&path)?;
    let doc = Resolved {
        command,
        version: env!("CARGO_PKG_VERSION"),
        args,
    };
    serde_json::to_writer_pretty(&mut w, &doc)
        .map_err(|e| io_err(&path)(std::io::Error::other(e)))?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err(&path))
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

fn wfdb_records(dir: &Path, channel: &str, first_subject: u32) -> Result<Vec<CleanRecord>> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let p = e.path();
            (p.extension().is_some_and(|x| x == "hea"))
                .then(|| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
                .flatten()
        })
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(CliError::Usage(format!(
            "no .hea headers in {}",
            dir.display()
        )));
    }
    names
        .iter()
        .zip(first_subject..)
        .map(|(name, subject)| {
            let rec = load_wfdb_record(dir, name)?;
            let idx = rec
                .names
                .iter()
                .position(|n| n.eq_ignore_ascii_case(channel))
                .or_else(|| {
                    channel
                        .parse()
                        .ok()
                        .filter(|&i: &usize| i < rec.channels.len())
                })
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("record {name} has no channel {channel:?}"))
                })?;
            Ok(CleanRecord {
                subject,
                signal: rec.channels[idx].clone(),
                fs: rec.fs,
                peaks: None,
            })
        })
        .collect()
}

fn generate<W: Write>(a: &GenerateArgs, stdout: &mut W) -> Result<()> {
    let out = resolve_out(&a.out, "dataset.ecgd");
    let records = match (a.synth, &a.wfdb_dir) {
        (Some(n), None) => synthetic_records(
            a.first_subject,
            n,
            a.duration,
            a.fs,
            derive_seed(a.seed, "synth", 0),
        )?,
        (None, Some(dir)) => wfdb_records(dir, &a.channel, a.first_subject)?,
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --synth N or --wfdb-dir DIR".into(),
            ))
        }
    };
    let cfg = CorpusConfig {
        fs: a.fs,
        window_s: a.window,
        overlap: a.overlap,
        mix: NoiseMixConfig {
            snr_mean: a.snr_mean,
            snr_std: a.snr_std,
            seed: derive_seed(a.seed, "mix", 0),
            ..Default::default()
        },
        ..Default::default()
    };
    let mut pairs = build_pairs(&records, &cfg)?;
    if let Some(max) = a.max_pairs {
        pairs.truncate(max);
    }
    if pairs.is_empty() {
        return Err(
            Error::InsufficientData("no complete windows in the input records".into()).into(),
        );
    }
    write_with(&out, |w| write_dataset(w, &pairs))?;
    let resolved = GenerateArgs {
        out: Some(out.clone()),
        ..a.clone()
    };
    write_config(&out, "generate", &resolved)?;

    let achieved: Vec<f64> = pairs.iter().map(|p| p.achieved_snr).collect();
    let (m, s) = mean_std(&achieved);
    let w = |e| io_err(Path::new("<stdout>"))(e);
    writeln!(stdout, "pairs: {}", pairs.len()).map_err(w)?;
    writeln!(stdout, "subjects: {}", records.len()).map_err(w)?;
    writeln!(stdout, "achieved_snr_mean_db: {m:.4}").map_err(w)?;
    writeln!(stdout, "achieved_snr_std_db: {s:.4}").map_err(w)?;
    writeln!(stdout, "dataset: {}", out.display()).map_err(w)?;
    Ok(())
}

fn check_window_len(pairs: &[NoisyCleanPair], cfg: &DcaeConfig, what: &str) -> Result<()> {
    if let Some(p) = pairs.iter().find(|p| p.clean.len() != cfg.input_length) {
        return Err(Error::InvalidConfig(format!(
            "{what} windows have {} samples, model expects {}",
            p.clean.len(),
            cfg.input_length
        ))
        .into());
    }
    Ok(())
}

fn train<W: Write>(a: &TrainArgs, stdout: &mut W) -> Result<()> {
    let out = resolve_out(&a.out, "model.edae");
    let train_pairs = read_pairs(&a.train)?;
    let val_pairs = read_pairs(&a.val)?;
    let cfg = DcaeConfig {
        encoder_channels: a.model.channels.clone(),
        kernel_sizes: a.model.kernels.clone(),
        stride: 1,
        dropout_p: a.model.dropout,
        input_length: a.model.input_length,
    };
    cfg.validate()?;
    check_window_len(&train_pairs, &cfg, "training")?;
    check_window_len(&val_pairs, &cfg, "validation")?;
    let mut aug_rng = ChaCha8Rng::seed_from_u64(derive_seed(a.seed, "augment", 0));
    let train_pairs = augment(&train_pairs, a.augment, &mut aug_rng)?;

    let tcfg = TrainConfig {
        batch_size: a.batch_size,
        max_epochs: a.max_epochs,
        patience: a.patience,
        adam: AdamConfig {
            lr: a.lr,
            ..Default::default()
        },
        seed: derive_seed(a.seed, "train", 0),
    };
    let model = build_model(&cfg, derive_seed(a.seed, "init", 0))?;
    eprintln!("epoch,train_loss,val_loss");
    let outcome = train_with(model, &train_pairs, &val_pairs, &tcfg, |e| {
        eprintln!("{},{},{}", e.epoch, e.train_loss, e.val_loss);
    })?;

    write_with(&out, |w| {
        save_checkpoint(w, &outcome.model, Some(&outcome.optimizer))
    })?;
    let h = &outcome.history;
    write_with(&sibling(&out, ".history.csv"), |w| {
        writeln!(w, "epoch,train_loss,val_loss,best_val_loss,best_epoch")?;
        let mut best = f64::INFINITY;
        let mut best_epoch = 0;
        for (i, (t, v)) in h.train_loss.iter().zip(&h.val_loss).enumerate() {
            if *v < best {
                best = *v;
                best_epoch = i + 1;
            }
            writeln!(w, "{},{t},{v},{best},{best_epoch}", i + 1)?;
        }
        Ok(())
    })?;
    let resolved = TrainArgs {
        out: Some(out.clone()),
        ..a.clone()
    };
    write_config(&out, "train", &resolved)?;

    let w = |e| io_err(Path::new("<stdout>"))(e);
    writeln!(stdout, "training_pairs: {}", train_pairs.len()).map_err(w)?;
    writeln!(stdout, "stopped_epoch: {}", h.stopped_epoch).map_err(w)?;
    writeln!(stdout, "best_epoch: {}", h.best_epoch).map_err(w)?;
    writeln!(stdout, "best_val_loss: {}", h.val_loss[h.best_epoch - 1]).map_err(w)?;
    writeln!(stdout, "checkpoint: {}", out.display()).map_err(w)?;
    Ok(())
}

fn denoise<W: Write>(a: &DenoiseArgs, stdout: &mut W) -> Result<()> {
    let out = resolve_out(&a.out, "denoised.ecgd");
    let model = load_model(&a.checkpoint)?;
    let pairs = read_pairs(&a.data)?;
    let noisy: Vec<&SignalWindow> = pairs.iter().map(|p| &p.noisy).collect();
    let denoised = model.denoise_all(&noisy)?;
    let replaced: Vec<NoisyCleanPair> = pairs
        .iter()
        .zip(denoised)
        .map(|(p, d)| NoisyCleanPair {
            noisy: d,
            ..p.clone()
        })
        .collect();
    write_with(&out, |w| write_dataset(w, &replaced))?;
    let resolved = DenoiseArgs {
        out: Some(out.clone()),
        ..a.clone()
    };
    write_config(&out, "denoise", &resolved)?;
    writeln!(
        stdout,
        "windows: {}\ndataset: {}",
        replaced.len(),
        out.display()
    )
    .map_err(io_err(Path::new("<stdout>")))
}

fn eval<W: Write>(a: &EvalArgs, stdout: &mut W) -> Result<()> {
    let out = resolve_out(&a.out, "eval.csv");
    let model = load_model(&a.checkpoint)?;
    let pairs = read_pairs(&a.data)?;
    let first = pairs
        .first()
        .ok_or_else(|| Error::InvalidArgument("dataset is empty".into()))?;
    let subject = a.template_subject.unwrap_or(first.subject_id());
    let template = subject_template(&pairs, subject)?;
    let report = evaluate_dataset(&model, &pairs, &template)?;
    write_with(&out, |w| write_eval_csv(w, &report.rows))?;
    write_with(&sibling(&out, ".summary.json"), |w| {
        write_summary(w, &report.summary)
    })?;
    let resolved = EvalArgs {
        out: Some(out.clone()),
        template_subject: Some(subject),
        ..a.clone()
    };
    write_config(&out, "eval", &resolved)?;
    write_summary(stdout, &report.summary)?;
    Ok(())
}

fn occlude<W: Write>(a: &OccludeArgs, stdout: &mut W) -> Result<()> {
    let out = resolve_out(&a.out, "occlusion.csv");
    let model = load_model(&a.checkpoint)?;
    let pairs = read_pairs(&a.data)?;
    let region = match a.region {
        RegionArg::TWave => Region::TWave,
        RegionArg::PQrs => Region::PQrs,
    };
    let rows = occlusion_probe(
        &model,
        &pairs,
        region,
        a.windows,
        derive_seed(a.seed, "occlude", 0),
    )?;
    write_with(&out, |w| {
        writeln!(w, "index,subject,r_peak,amplitude,occluded_amplitude,ratio")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.index, r.subject, r.r_peak, r.amplitude, r.occluded_amplitude, r.ratio
            )?;
        }
        Ok(())
    })?;
    let resolved = OccludeArgs {
        out: Some(out.clone()),
        ..a.clone()
    };
    write_config(&out, "occlude", &resolved)?;
    let reduced = rows.iter().filter(|r| r.ratio < 1.0).count();
    let frac = if rows.is_empty() {
        0.0
    } else {
        reduced as f64 / rows.len() as f64
    };
    writeln!(
        stdout,
        "region: {}\nwindows: {}\nreduced: {reduced}\nfraction_reduced: {frac:.4}",
        region.name(),
        rows.len()
    )
    .map_err(io_err(Path::new("<stdout>")))
}

fn export<W: Write>(a: &ExportArgs, stdout: &mut W) -> Result<()> {
    let default_name = match a.kind {
        ExportKind::Psd => "psd.csv",
        ExportKind::Spectrogram => "spectrogram.csv",
        ExportKind::Latent => "latent.csv",
    };
    let out = resolve_out(&a.out, default_name);
    let pairs = read_pairs(&a.data)?;
    let model = a.checkpoint.as_deref().map(load_model).transpose()?;
    let pick = |i: usize| -> Result<&NoisyCleanPair> {
        pairs.get(i).ok_or_else(|| {
            CliError::Usage(format!("window {i} out of range ({} windows)", pairs.len()))
        })
    };
    let need_model = || {
        model
            .as_ref()
            .ok_or_else(|| CliError::Usage("this export needs --checkpoint".into()))
    };

    match a.kind {
        ExportKind::Psd => {
            if pairs.is_empty() {
                return Err(CliError::Usage("dataset is empty".into()));
            }
            let mut classes: Vec<(&str, Vec<&SignalWindow>)> = vec![
                ("clean", pairs.iter().map(|p| &p.clean).collect()),
                ("noisy", pairs.iter().map(|p| &p.noisy).collect()),
            ];
            let denoised;
            if let Some(m) = &model {
                denoised = m.denoise_all(&classes[1].1)?;
                classes.push(("denoised", denoised.iter().collect()));
            }
            let mut freqs = Vec::new();
            let mut columns: Vec<(&str, Vec<f64>)> = Vec::new();
            for (name, windows) in &classes {
                let mut acc: Vec<f64> = Vec::new();
                for w in windows {
                    let p = welch_psd(&w.samples, w.fs, a.segment, a.overlap)?;
                    if acc.is_empty() {
                        acc = vec![0.0; p.power.len()];
                        freqs = p.freqs;
                    }
                    acc.iter_mut().zip(&p.power).for_each(|(s, v)| *s += v);
                }
                let n = windows.len() as f64;
                columns.push((name, acc.into_iter().map(|v| v / n).collect()));
            }
            let cols: Vec<(&str, &[f64])> =
                columns.iter().map(|(n, v)| (*n, v.as_slice())).collect();
            write_with(&out, |w| write_psd_csv(w, &freqs, &cols))?;
        }
        ExportKind::Spectrogram => {
            let p = pick(a.index)?;
            let w = match a.signal {
                SignalArg::Clean => p.clean.clone(),
                SignalArg::Noisy => p.noisy.clone(),
                SignalArg::Denoised => need_model()?.denoise(&p.noisy)?,
            };
            let s = spectrogram(&w.samples, w.fs, a.window, a.overlap, a.sigma)?;
            write_with(&out, |f| write_spectrogram_csv(f, &s))?;
        }
        ExportKind::Latent => {
            let m = need_model()?;
            let latent = m.config.latent_channels();
            let channels: Vec<usize> = a.channels.clone().unwrap_or_else(|| (0..latent).collect());
            if let Some(&c) = channels.iter().find(|&&c| c >= latent) {
                return Err(CliError::Usage(format!(
                    "latent channel {c} out of range (model has {latent})"
                )));
            }
            let p = pick(a.index)?;
            let z = m.encode(&p.noisy)?;
            let fs = p.noisy.fs;
            write_with(&out, |w| {
                write!(w, "channel")?;
                for t in 0..z[0].len() {
                    write!(w, ",{}", t as f64 / fs)?;
                }
                writeln!(w)?;
                for &c in &channels {
                    write!(w, "{c}")?;
                    for v in &z[c] {
                        write!(w, ",{v}")?;
                    }
                    writeln!(w)?;
                }
                Ok(())
            })?;
        }
    }
    let resolved = ExportArgs {
        out: Some(out.clone()),
        ..a.clone()
    };
    write_config(&out, "export", &resolved)?;
    writeln!(stdout, "wrote: {}", out.display()).map_err(io_err(Path::new("<stdout>")))
}
