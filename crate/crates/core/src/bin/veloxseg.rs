use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use veloxseg::analysis::{mad, MadInput};
use veloxseg::bench::bench;
use veloxseg::io::{gen_synthetic, read_volume, write_synthetic, write_volume, SyntheticSpec};
use veloxseg::jl::{plan_profile, Profile};
use veloxseg::network::{build, NetworkConfig};
use veloxseg::pwa::{pwa_flops, pwa_flops_multimodal};
use veloxseg::sdkt::{sdkt_grad, sdkt_loss, FeatureMap};
use veloxseg::tensor::volume;
use veloxseg::{Error, Result, Tensor5, Triple};

#[derive(Parser)]
#[command(name = "veloxseg", version, about = "Dual-stream 3D segmentation network: inference, costs and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Group sizes per stage from the JL bound, as JSON.
    PlanGroups {
        #[arg(long, default_value_t = 2)]
        modalities: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value = "medical3d")]
        profile: Profile,
        #[arg(long, default_value_t = 4)]
        n: usize,
    },
    /// Parameter and operation counts per stage, as JSON.
    Flops {
        #[command(flatten)]
        net: NetArgs,
        /// Input extent, `DxHxW` or a single edge; defaults to the configured extent.
        #[arg(long, value_parser = parse_triple)]
        extent: Option<Triple>,
    },
    /// Runs one forward pass and writes the logits.
    Forward {
        #[command(flatten)]
        net: NetArgs,
        /// One multi-modality volume, or one single-modality volume per modality in order.
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Gram-matrix transfer loss of a feature volume against weighted teachers.
    SdktLoss {
        #[arg(long)]
        seg: PathBuf,
        /// `path` or `path:weight` (weight defaults to 1).
        #[arg(long, required = true)]
        teacher: Vec<String>,
        /// Also write the gradient with respect to the segmentation features.
        #[arg(long)]
        grad: Option<PathBuf>,
    },
    /// Mean attention distance of every `L×L` matrix stored in a volume file.
    Mad {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, value_parser = parse_triple)]
        grid: Triple,
        #[arg(long, default_value_t = 1.0)]
        spacing: f64,
    },
    /// Times forward passes and reports patches per second.
    Bench {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, value_parser = parse_triple, default_value = "96x96x96")]
        extent: Triple,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long, default_value_t = 20)]
        iters: usize,
        #[arg(long, default_value_t = 1)]
        warmup: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Writes seeded synthetic volumes `<prefix>_mod<k>.vxs` and `<prefix>_label.vxs`.
    GenSynthetic {
        #[arg(long, value_parser = parse_triple, default_value = "96x96x96")]
        extent: Triple,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_prefix: String,
        #[arg(long, default_value_t = 2)]
        modalities: usize,
        #[arg(long, default_value_t = 3)]
        blobs: usize,
        #[arg(long, default_value_t = 5)]
        radius: usize,
        #[arg(long, default_value_t = 4.0)]
        intensity: f32,
        #[arg(long, default_value_t = 0.1)]
        noise: f32,
    },
}

#[derive(Args)]
struct NetArgs {
    /// Network configuration JSON; omitted fields take the defaults.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: autopet, conv-only, early-fusion4 or hecktor.
    #[arg(long)]
    preset: Option<String>,
}

impl NetArgs {
    fn load(&self) -> Result<NetworkConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => NetworkConfig::load(path),
            (None, Some(name)) => NetworkConfig::preset(name),
            (None, None) => Ok(NetworkConfig::default()),
        }
    }
}

fn parse_triple(s: &str) -> std::result::Result<Triple, String> {
    let parts: Vec<usize> = s
        .split(['x', 'X'])
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts[..] {
        [e] => Ok([e; 3]),
        [d, h, w] => Ok([d, h, w]),
        _ => Err(format!("expected DxHxW or a single edge, got {s:?}")),
    }
}

fn print_json(value: &serde_json::Value) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).expect("json value serializes");
    // a closed pipe (e.g. `| head`) is not an error worth reporting
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn load_inputs(paths: &[PathBuf]) -> Result<Tensor5> {
    let parts = paths.iter().map(|p| read_volume(p)).collect::<Result<Vec<_>>>()?;
    if parts.len() == 1 {
        return Ok(parts.into_iter().next().expect("one input"));
    }
    Tensor5::stack_modalities(&parts)
}

fn features(path: &Path) -> Result<FeatureMap<f64>> {
    Ok(FeatureMap::from_tensor(&read_volume(path)?).to_f64())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::PlanGroups {
            modalities,
            alpha,
            profile,
            n,
        } => {
            let plan = plan_profile(profile, modalities, &profile.volume_ratios(), n, alpha)?;
            print_json(&serde_json::to_value(plan)?);
        }
        Command::Flops { net, extent } => {
            let mut cfg = net.load()?;
            let extent = extent.unwrap_or(cfg.input_extent);
            cfg.input_extent = extent;
            let model = build(&cfg, 0)?;
            let report = model.cost_report(extent)?;
            let attention: Vec<_> = model
                .attention_stages()
                .map(|(k, a)| {
                    let c = cfg.stage_widths[k];
                    json!({
                        "stage": k + 1,
                        "extent": a.schedule.extent(),
                        "big_windows": a.schedule.big_windows(),
                        "n_win": a.schedule.n_win(),
                        "seq_len": a.schedule.seq_len(),
                        "channels": c,
                        "pwa_flops": pwa_flops(&a.schedule, c),
                        "pwa_flops_multimodal": pwa_flops_multimodal(&a.schedule, c, cfg.attention_modalities()),
                        "layers": a.layers.len(),
                    })
                })
                .collect();
            print_json(&json!({
                "extent": extent,
                "params": model.param_count(),
                "total_flops": report.flops(),
                "attention_flops": report.attention_flops(),
                "stages": report.stages,
                "attention": attention,
            }));
        }
        Command::Forward {
            net,
            input,
            output,
            seed,
        } => {
            let x = load_inputs(&input)?;
            let mut cfg = net.load()?;
            cfg.input_extent = x.spatial();
            let model = build(&cfg, seed)?;
            let logits = model.forward(&x)?;
            write_volume(&output, &logits)?;
            print_json(&json!({
                "input": x.dims(),
                "output": logits.dims(),
                "path": output,
            }));
        }
        Command::SdktLoss { seg, teacher, grad } => {
            let student = features(&seg)?;
            let teachers = teacher
                .iter()
                .map(|spec| {
                    let (path, weight) = match spec.rsplit_once(':') {
                        Some((p, w)) => (
                            p,
                            w.parse::<f64>()
                                .map_err(|e| Error::Config(format!("teacher weight {w:?}: {e}")))?,
                        ),
                        None => (spec.as_str(), 1.0),
                    };
                    Ok((features(Path::new(path))?, weight))
                })
                .collect::<Result<Vec<_>>>()?;
            let loss = sdkt_loss(&student, &teachers)?;
            if let Some(path) = &grad {
                let g = sdkt_grad(&student, &teachers)?.to_f32();
                let dims = read_volume(&seg)?.dims();
                write_volume(path, &Tensor5::from_vec(dims, g.data().to_vec())?)?;
            }
            print_json(&json!({ "loss": loss, "teachers": teachers.len(), "grad": grad }));
        }
        Command::Mad { weights, grid, spacing } => {
            let w = read_volume(&weights)?;
            let l = volume(grid);
            if l == 0 || w.len() % (l * l) != 0 {
                return Err(Error::Validation(format!(
                    "{} weights are not a whole number of {l}x{l} matrices",
                    w.len()
                )));
            }
            let values = w
                .data()
                .chunks_exact(l * l)
                .map(|chunk| MadInput::from_f32(chunk, grid, spacing).map(|inp| mad(&inp)))
                .collect::<Result<Vec<_>>>()?;
            print_json(&json!({ "grid": grid, "spacing": spacing, "mad": values }));
        }
        Command::Bench {
            net,
            extent,
            threads,
            iters,
            warmup,
            report,
        } => {
            let cfg = net.load()?;
            let r = bench(&cfg, extent, threads, warmup, iters)?;
            let value = serde_json::to_value(&r)?;
            if let Some(path) = report {
                std::fs::write(&path, serde_json::to_string_pretty(&value)?)
                    .map_err(|source| Error::Io { path: path.clone(), source })?;
            }
            print_json(&value);
        }
        Command::GenSynthetic {
            extent,
            seed,
            out_prefix,
            modalities,
            blobs,
            radius,
            intensity,
            noise,
        } => {
            let spec = SyntheticSpec {
                extent,
                modalities,
                blobs,
                radius,
                intensity,
                noise_sigma: noise,
            };
            let (volumes, label) = gen_synthetic(&spec, seed)?;
            let paths = write_synthetic(&out_prefix, &volumes, &label)?;
            let foreground = label.data().iter().filter(|&&v| v > 0.0).count();
            print_json(&json!({ "files": paths, "foreground_voxels": foreground }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
