//! Resolution of command-line flags, config files and presets into the list
//! of link configurations a `curve` invocation sweeps.

use std::path::Path;

use anyhow::{bail, Context};
use mimo_ppsnr::modem::Modulation;
use mimo_ppsnr::sim::{CeMode, LinkConfig};

use crate::{CeArg, CurveArgs, ModArg, Preset};

/// One labelled sweep configuration.
pub struct RunVariant {
    pub label: String,
    pub preset_name: &'static str,
    pub cfg: LinkConfig,
}

/// Fully resolved invocation.
pub struct RunPlan {
    pub variants: Vec<RunVariant>,
    pub seed: u64,
    pub scale_name: &'static str,
}

fn grid(start: f64, stop: f64, step: f64) -> anyhow::Result<Vec<f64>> {
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
        bail!("invalid SNR grid {start}:{step}:{stop}");
    }
    let mut points = Vec::new();
    let mut x = start;
    while x <= stop + 1e-9 {
        points.push(x);
        x += step;
    }
    Ok(points)
}

impl ModArg {
    pub fn to_modulation(self) -> Modulation {
        match self {
            ModArg::Bpsk => Modulation::Bpsk,
            ModArg::Qpsk => Modulation::Qpsk,
            ModArg::Qam16 => Modulation::Qam16,
        }
    }
}

/// Flag-equivalent settings gathered from a config file.
#[derive(Default)]
struct FileSettings {
    nt: Option<usize>,
    nr: Option<usize>,
    ntr: Option<usize>,
    modulation: Option<ModArg>,
    ce: Option<CeArg>,
    sigma_e: Option<f64>,
    snr_start: Option<f64>,
    snr_stop: Option<f64>,
    snr_step: Option<f64>,
    channels: Option<usize>,
    packets: Option<usize>,
    symbols: Option<usize>,
    seed: Option<u64>,
    paper_scale: Option<bool>,
    ce_var_nt: Option<bool>,
}

fn parse_file(path: &Path) -> anyhow::Result<FileSettings> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let mut s = FileSettings::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("line {}: expected key=value, got `{line}`", lineno + 1))?;
        let key = key.trim();
        let value = value.trim();
        let ctx = |what: &str| format!("line {}: bad {what} value `{value}`", lineno + 1);
        match key {
            "nt" => s.nt = Some(value.parse().with_context(|| ctx("nt"))?),
            "nr" => s.nr = Some(value.parse().with_context(|| ctx("nr"))?),
            "ntr" => s.ntr = Some(value.parse().with_context(|| ctx("ntr"))?),
            "mod" => {
                s.modulation = Some(match value {
                    "bpsk" => ModArg::Bpsk,
                    "qpsk" => ModArg::Qpsk,
                    "qam16" => ModArg::Qam16,
                    other => bail!("line {}: unknown modulation `{other}`", lineno + 1),
                })
            }
            "ce" => {
                s.ce = Some(match value {
                    "perfect" => CeArg::Perfect,
                    "ml" => CeArg::Ml,
                    "fixed" => CeArg::Fixed,
                    other => bail!("line {}: unknown ce mode `{other}`", lineno + 1),
                })
            }
            "sigma-e" => s.sigma_e = Some(value.parse().with_context(|| ctx("sigma-e"))?),
            "snr-start" => s.snr_start = Some(value.parse().with_context(|| ctx("snr-start"))?),
            "snr-stop" => s.snr_stop = Some(value.parse().with_context(|| ctx("snr-stop"))?),
            "snr-step" => s.snr_step = Some(value.parse().with_context(|| ctx("snr-step"))?),
            "channels" => s.channels = Some(value.parse().with_context(|| ctx("channels"))?),
            "packets" => s.packets = Some(value.parse().with_context(|| ctx("packets"))?),
            "symbols" => s.symbols = Some(value.parse().with_context(|| ctx("symbols"))?),
            "seed" => s.seed = Some(value.parse().with_context(|| ctx("seed"))?),
            "paper-scale" => {
                s.paper_scale = Some(value.parse().with_context(|| ctx("paper-scale"))?)
            }
            "ce-var-nt" => s.ce_var_nt = Some(value.parse().with_context(|| ctx("ce-var-nt"))?),
            other => bail!("unknown config key `{other}` (line {})", lineno + 1),
        }
    }
    Ok(s)
}

const DESK: (usize, usize, usize) = (200, 50, 500);
const PAPER: (usize, usize, usize) = (1000, 500, 2000);
const DEFAULT_SEED: u64 = 42;

pub fn resolve(args: &CurveArgs) -> anyhow::Result<RunPlan> {
    let file = match &args.config {
        Some(path) => parse_file(path)?,
        None => FileSettings::default(),
    };

    // Flags override file entries.
    let nt = args.nt.or(file.nt);
    let nr = args.nr.or(file.nr);
    let ntr = args.ntr.or(file.ntr);
    let modulation = args.modulation.or(file.modulation);
    let ce = args.ce.or(file.ce);
    let sigma_e = args.sigma_e.or(file.sigma_e);
    let snr_start = args.snr_start.or(file.snr_start);
    let snr_stop = args.snr_stop.or(file.snr_stop);
    let snr_step = args.snr_step.or(file.snr_step);
    let channels = args.channels.or(file.channels);
    let packets = args.packets.or(file.packets);
    let symbols = args.symbols.or(file.symbols);
    let seed = args.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let paper_scale = args.paper_scale || file.paper_scale.unwrap_or(false);
    let ce_var_nt = args.ce_var_nt || file.ce_var_nt.unwrap_or(false);

    let (mut n_channels, mut n_packets, mut n_symbols) = if paper_scale { PAPER } else { DESK };
    if let Some(c) = channels {
        n_channels = c;
    }
    if let Some(p) = packets {
        n_packets = p;
    }
    if let Some(s) = symbols {
        n_symbols = s;
    }
    let scale_name = if paper_scale { "paper" } else { "desk" };

    let base = LinkConfig {
        n_t: 2,
        n_r: 4,
        n_tr: 4,
        modulation: Modulation::Bpsk,
        snr_grid_db: Vec::new(),
        ce_mode: CeMode::PerfectCsi,
        n_channels,
        n_packets,
        n_symbols_per_packet: n_symbols,
        seed,
        sigma_e2_scaled_by_nt: ce_var_nt,
        max_bit_errors: Some(10_000),
    };

    let variants = if let Some(preset) = args.preset {
        // Presets pin the physical configuration; only sweep range and
        // effort may be tuned on top of them.
        if nt.is_some()
            || nr.is_some()
            || ntr.is_some()
            || modulation.is_some()
            || ce.is_some()
            || sigma_e.is_some()
        {
            bail!("--preset fixes nt/nr/ntr/mod/ce/sigma-e; drop those flags or use a custom run");
        }
        let override_grid = match (snr_start, snr_stop, snr_step) {
            (None, None, None) => None,
            (start, stop, step) => {
                let (d_start, d_stop) = preset_grid_bounds(preset);
                Some(grid(
                    start.unwrap_or(d_start),
                    stop.unwrap_or(d_stop),
                    step.unwrap_or(2.0),
                )?)
            }
        };
        preset_variants(preset, &base, override_grid)?
    } else {
        let snr_grid_db = grid(
            snr_start.unwrap_or(0.0),
            snr_stop.unwrap_or(20.0),
            snr_step.unwrap_or(2.0),
        )?;
        let ce_mode = match ce.unwrap_or(CeArg::Perfect) {
            CeArg::Perfect => CeMode::PerfectCsi,
            CeArg::Ml => CeMode::MlTraining,
            CeArg::Fixed => {
                let se = sigma_e
                    .context("--ce fixed needs --sigma-e (estimation-error standard deviation)")?;
                CeMode::FixedSigma(se)
            }
        };
        if sigma_e.is_some() && ce != Some(CeArg::Fixed) {
            bail!("--sigma-e only applies to --ce fixed");
        }
        let cfg = LinkConfig {
            n_t: nt.unwrap_or(2),
            n_r: nr.unwrap_or(4),
            n_tr: ntr.unwrap_or(4),
            modulation: modulation.unwrap_or(ModArg::Bpsk).to_modulation(),
            snr_grid_db,
            ce_mode,
            ..base
        };
        let label = format!(
            "custom {}x{} {} ce={}",
            cfg.n_t,
            cfg.n_r,
            cfg.modulation.name(),
            cfg.ce_mode.name()
        );
        vec![RunVariant {
            label,
            preset_name: "custom",
            cfg,
        }]
    };

    for v in &variants {
        v.cfg
            .validate()
            .map_err(|e| anyhow::anyhow!("{}: {e}", v.label))?;
    }

    Ok(RunPlan {
        variants,
        seed,
        scale_name,
    })
}

fn preset_grid_bounds(preset: Preset) -> (f64, f64) {
    match preset {
        Preset::Fig1Bpsk | Preset::Fig2Qam16 => (0.0, 20.0),
        Preset::Fig3QpskFloor => (0.0, 40.0),
    }
}

fn preset_variants(
    preset: Preset,
    base: &LinkConfig,
    override_grid: Option<Vec<f64>>,
) -> anyhow::Result<Vec<RunVariant>> {
    let (d_start, d_stop) = preset_grid_bounds(preset);
    let snr = match override_grid {
        Some(g) => g,
        None => grid(d_start, d_stop, 2.0)?,
    };
    let mut variants = Vec::new();
    match preset {
        Preset::Fig1Bpsk | Preset::Fig2Qam16 => {
            let (modulation, name) = match preset {
                Preset::Fig1Bpsk => (Modulation::Bpsk, "fig1-bpsk"),
                _ => (Modulation::Qam16, "fig2-16qam"),
            };
            for &(n_t, n_r) in &[(1usize, 4usize), (2, 4), (4, 4)] {
                for ce_mode in [CeMode::MlTraining, CeMode::PerfectCsi] {
                    variants.push(RunVariant {
                        label: format!("{name} {n_t}x{n_r} {}", ce_mode.name()),
                        preset_name: name,
                        cfg: LinkConfig {
                            n_t,
                            n_r,
                            modulation,
                            snr_grid_db: snr.clone(),
                            ce_mode,
                            ..base.clone()
                        },
                    });
                }
            }
        }
        Preset::Fig3QpskFloor => {
            for &sigma_e in &[0.0, 0.05, 0.10, 0.20] {
                variants.push(RunVariant {
                    label: format!("fig3-qpsk-floor 4x5 sigma-e={sigma_e}"),
                    preset_name: "fig3-qpsk-floor",
                    cfg: LinkConfig {
                        n_t: 4,
                        n_r: 5,
                        modulation: Modulation::Qpsk,
                        snr_grid_db: snr.clone(),
                        ce_mode: CeMode::FixedSigma(sigma_e),
                        ..base.clone()
                    },
                });
            }
        }
    }
    Ok(variants)
}
