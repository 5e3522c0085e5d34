//! The `cmsr` commands, callable without spawning the binary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use cmsr::checkpoint::Model;
use cmsr::config::RunConfig;
use cmsr::deform::{rg_overlay, DeformationStack};
use cmsr::image_io::{load_image, make_pair, save_image, BitDepth, ImageBuffer};
use cmsr::infer::gradual_sr;
use cmsr::metrics::{format_db, QualityReport};
use cmsr::record::{join, Record};
use cmsr::tensor::Tensor;
use cmsr::train::train;

/// Flag values layered over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub scale: Option<usize>,
    pub seed: Option<u64>,
    pub p_alt: Option<f64>,
    pub max_iters: Option<usize>,
}

/// Defaults, then `path`, then the flags.
pub fn resolve_config(path: Option<&Path>, flags: &Overrides) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = flags.scale {
        cfg.train.r = v;
    }
    if let Some(v) = flags.seed {
        cfg.train.seed = v;
    }
    if let Some(v) = flags.p_alt {
        cfg.train.p_alt = v;
    }
    if let Some(v) = flags.max_iters {
        cfg.train.max_iters = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `<stem><suffix>.<ext>` next to `path`.
pub fn derived_path(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

#[derive(Clone, Debug)]
pub struct Inputs {
    pub modality: PathBuf,
    pub guide: PathBuf,
    pub kernel: Option<PathBuf>,
}

impl Inputs {
    fn record(&self) -> Record {
        let mut r = Record::new();
        r.set("modality", self.modality.display());
        r.set("guide", self.guide.display());
        r.set("kernel", self.kernel.as_ref().map_or("none".to_string(), |k| k.display().to_string()));
        r
    }
}

/// Files written by one command, in write order.
#[derive(Clone, Debug, Default)]
pub struct Written(pub Vec<PathBuf>);

impl Written {
    fn png(&mut self, t: &Tensor, path: PathBuf, depth: BitDepth) -> Result<()> {
        save_image(&ImageBuffer::from_tensor(t)?, &path, depth)?;
        self.0.push(path);
        Ok(())
    }

    fn record(&mut self, rec: &Record, path: PathBuf) -> Result<()> {
        std::fs::write(&path, rec.to_string()).with_context(|| format!("writing {}", path.display()))?;
        self.0.push(path);
        Ok(())
    }
}

fn shifted(residual: &Tensor) -> Tensor {
    residual.map(|v| v + 0.5)
}

/// Trains and super-resolves one pair. Writes `out`, `<stem>_report.txt`
/// and, with `debug`, per-stage images and checkpoints.
pub fn cmd_sr(inputs: &Inputs, out: &Path, cfg: &RunConfig, debug: bool) -> Result<Written> {
    let start = Instant::now();
    let pair = make_pair(&inputs.modality, &inputs.guide, cfg.train.r, inputs.kernel.as_deref())?;
    let depth = pair.modality.source_bit_depth;
    let result = gradual_sr(&pair, &cfg.train, &cfg.infer)?;
    let mut written = Written::default();
    written.png(&result.sr, out.to_path_buf(), depth)?;

    let mut rec = Record::new();
    rec.set("command", "sr");
    rec.extend(&inputs.record());
    rec.set("out", out.display());
    rec.extend(&cfg.to_record());
    let s = result.sr.shape();
    rec.set("output_size", format!("{}x{}", s.h(), s.w()));
    rec.set("stages", result.stages.len());
    let mut input = pair.modality_tensor();
    for (k, st) in result.stages.iter().enumerate() {
        let prefix = format!("stage{}", k + 1);
        let mut sr = st.report.to_record();
        sr.set("ensemble_members", st.ensemble_members);
        sr.set("ibp_trace", join(st.ibp_trace.iter().map(|e| format!("{e:.3e}"))));
        sr.set("affine", join(st.stack.affine.as_array().iter()));
        rec.extend_prefixed(&prefix, &sr);
        if debug {
            let tag = format!("_stage{}", k + 1);
            written.png(&st.sr, derived_path(out, &tag, "png"), depth)?;
            written.png(&st.warped_guide, derived_path(out, &format!("{tag}_warped_guide"), "png"), BitDepth::Eight)?;
            written.png(&rg_overlay(&st.warped_guide, &input), derived_path(out, &format!("{tag}_overlay"), "png"), BitDepth::Eight)?;
            written.png(&shifted(&st.residual), derived_path(out, &format!("{tag}_residual"), "png"), BitDepth::Sixteen)?;
            let model = Model {
                weights: st.weights.clone(),
                stack: st.stack.clone(),
                deform: cfg.train.deform,
            };
            let path = derived_path(out, &tag, "ckpt");
            model.save(&path)?;
            written.0.push(path);
        }
        input = st.sr.clone();
    }
    rec.set("wall_time_secs", format!("{:.3}", start.elapsed().as_secs_f64()));
    written.record(&rec, derived_path(out, "_report", "txt"))?;
    Ok(written)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub name: String,
    pub report: QualityReport,
}

pub fn eval_pair(sr: &Path, gt: &Path) -> Result<QualityReport> {
    let (a, b) = (load_image(sr)?, load_image(gt)?);
    let dims = |i: &ImageBuffer| (i.height(), i.width(), i.channels());
    if dims(&a) != dims(&b) {
        let (h, w, c) = dims(&a);
        let (gh, gw, gc) = dims(&b);
        bail!("{} is {h}x{w}x{c} but {} is {gh}x{gw}x{gc}", sr.display(), gt.display());
    }
    Ok(QualityReport::measure(&a.to_tensor(), &b.to_tensor())?)
}

fn is_image(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "pgm" | "ppm")
    )
}

/// Scores one pair of files, or every image in the `sr` directory against
/// the file of the same name in the `gt` directory. Returns the rows and
/// their mean.
pub fn cmd_eval(sr: &Path, gt: &Path) -> Result<(Vec<EvalRow>, QualityReport)> {
    let mut rows = Vec::new();
    if sr.is_dir() {
        if !gt.is_dir() {
            bail!("{} is a directory but {} is not", sr.display(), gt.display());
        }
        let mut names: Vec<PathBuf> = std::fs::read_dir(sr)
            .with_context(|| format!("reading {}", sr.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && is_image(p))
            .collect();
        names.sort();
        for p in names {
            let name = p.file_name().expect("listed file").to_string_lossy().into_owned();
            let target = gt.join(&name);
            if !target.exists() {
                bail!("{} has no ground truth at {}", p.display(), target.display());
            }
            rows.push(EvalRow {
                report: eval_pair(&p, &target)?,
                name,
            });
        }
        if rows.is_empty() {
            bail!("no images in {}", sr.display());
        }
    } else {
        rows.push(EvalRow {
            name: sr.file_name().map_or("sr".into(), |n| n.to_string_lossy().into_owned()),
            report: eval_pair(sr, gt)?,
        });
    }
    let reports: Vec<QualityReport> = rows.iter().map(|r| r.report).collect();
    let mean = QualityReport::mean(&reports).expect("at least one row");
    Ok((rows, mean))
}

pub fn eval_record(sr: &Path, gt: &Path, rows: &[EvalRow], mean: &QualityReport) -> Record {
    let mut rec = Record::new();
    rec.set("command", "eval");
    rec.set("sr", sr.display());
    rec.set("gt", gt.display());
    rec.set("pairs", rows.len());
    for row in rows {
        rec.set(format!("{}.psnr", row.name), format_db(row.report.psnr));
        rec.set(format!("{}.ssim", row.name), format!("{:.6}", row.report.ssim));
    }
    rec.set("mean.psnr", format_db(mean.psnr));
    rec.set("mean.ssim", format!("{:.6}", mean.ssim));
    rec
}

/// Where `eval` writes its record when `--out` is absent.
pub fn default_eval_path(sr: &Path) -> PathBuf {
    if sr.is_dir() {
        sr.join("eval.txt")
    } else {
        derived_path(sr, "_eval", "txt")
    }
}

pub fn write_eval(rec: &Record, path: &Path) -> Result<()> {
    Written::default().record(rec, path.to_path_buf())
}

/// Trains at the full ratio and writes the deformed guide to `out` with
/// `_before` and `_after` R-G overlays beside it. A failed run still writes
/// everything, using the identity warp, and says so in the report.
pub fn cmd_warp_debug(inputs: &Inputs, out: &Path, cfg: &RunConfig) -> Result<Written> {
    let pair = make_pair(&inputs.modality, &inputs.guide, cfg.train.r, inputs.kernel.as_deref())?;
    let modality = pair.modality_tensor();
    let guide = pair.guide_tensor();
    let mut written = Written::default();
    written.png(&rg_overlay(&guide, &modality), derived_path(out, "_before", "png"), BitDepth::Eight)?;

    let mut rec = Record::new();
    rec.set("command", "warp-debug");
    rec.extend(&inputs.record());
    rec.set("out", out.display());
    rec.extend(&cfg.to_record());
    let (stack, status) = match train(&pair, &cfg.train) {
        Ok(o) if o.stack.affine.params.data().iter().all(|v| v.is_finite()) => {
            rec.extend_prefixed("train", &o.report.to_record());
            (o.stack, "trained".to_string())
        }
        Ok(_) => (DeformationStack::new(&cfg.train.deform)?, "failed: non-finite deformation".into()),
        Err(e) => (DeformationStack::new(&cfg.train.deform)?, format!("failed: {e}")),
    };
    let warped = stack.warp(&guide)?;
    written.png(&warped, out.to_path_buf(), pair.guide.source_bit_depth)?;
    written.png(&rg_overlay(&warped, &modality), derived_path(out, "_after", "png"), BitDepth::Eight)?;

    let p = stack.affine.as_array();
    let (h, w) = (guide.shape().h() as f32, guide.shape().w() as f32);
    rec.set("status", status);
    rec.set("affine", join(p.iter()));
    rec.set("translation_px", format!("{:.3},{:.3}", p[2] * w / 2.0, p[5] * h / 2.0));
    rec.set("layers", format!("affine={} cpab={} tps={}", stack.enabled.affine, stack.enabled.cpab, stack.enabled.tps));
    written.record(&rec, derived_path(out, "_report", "txt"))?;
    Ok(written)
}
