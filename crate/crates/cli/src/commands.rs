use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde_json::{json, Value};

use facehall::align3d::{
    build_aligned_dictionaries, estimate_similarity, AlignmentConfig, AlignmentSample, LandmarkSet,
    Mesh,
};
use facehall::degrade::{self, DegradationParams, Psf};
use facehall::dictionary::{self, build_dictionary, read_manifest, ChannelSelect, DictionaryPair};
use facehall::halluc::{
    bicubic_baseline, classify_src, HallucinationParams, Hallucinator, ResidualSpace, RunOptions,
};
use facehall::metrics::{psnr, ssim, SSIM_WINDOW};
use facehall::sparse::L1Options;
use facehall::{Image, Mask};

use crate::args::*;
use crate::report::{db, degradation_json, mean, write_report, Provenance};

fn resolve_degradation(a: &PsfArgs, sigma: f64) -> Result<(DegradationParams, Value)> {
    let (psf, psf_desc) = match &a.psf_file {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading psf file {}", path.display()))?;
            (Psf::from_text(&text)?, json!({ "psf_file": path.display().to_string() }))
        }
        None => (a.psf.clone(), json!({})),
    };
    let params = DegradationParams::new(psf, a.scale as usize, sigma)?;
    let mut desc = degradation_json(&params);
    if let (Value::Object(d), Value::Object(s)) = (&mut desc, psf_desc) {
        d.extend(s);
    }
    Ok((params, desc))
}

fn solver_params(s: &SolverArgs, clip: bool) -> HallucinationParams {
    HallucinationParams {
        mu: s.mu,
        lambda: s.lambda,
        iterations: s.iters as usize,
        sparse_opts: L1Options {
            max_iters: s.l1_max_iters,
            tol: s.l1_tol,
        },
        clip_output: clip,
    }
}

fn solver_json(p: &HallucinationParams) -> Value {
    json!({
        "mu": p.mu,
        "lambda": p.lambda,
        "iterations": p.iterations,
        "l1_tol": p.sparse_opts.tol,
        "l1_max_iters": p.sparse_opts.max_iters,
        "clip_output": p.clip_output,
    })
}

fn channel_select(c: ChannelArg) -> ChannelSelect {
    match c {
        ChannelArg::Gray => ChannelSelect::Gray,
        ChannelArg::R => ChannelSelect::Index(0),
        ChannelArg::G => ChannelSelect::Index(1),
        ChannelArg::B => ChannelSelect::Index(2),
    }
}

fn load_image(path: &Path) -> Result<Image> {
    Ok(Image::load(path)?)
}

pub fn build_dict(a: &BuildDictArgs) -> Result<()> {
    let (degradation, desc) = resolve_degradation(&a.psf, 0.0)?;
    let manifest = read_manifest(&a.manifest)?;
    let pair = build_dictionary(&a.hr_dir, &manifest, &degradation, channel_select(a.channel))?;
    pair.save(&a.out)?;

    let mut prov = Provenance::new(
        "build-dict",
        json!({ "degradation": desc, "channel": format!("{:?}", a.channel).to_lowercase() }),
    );
    prov.input("manifest", &a.manifest)?;
    let names = dictionary::list_images(&a.hr_dir)?;
    for name in &names {
        prov.input("hr_image", &a.hr_dir.join(name))?;
    }
    let digest = crate::report::sha256_file(&a.out)?;
    println!(
        "{}: {} atoms, {} subjects, {} -> {}",
        a.out.display(),
        pair.n_atoms(),
        pair.classes().len(),
        pair.hr_dims(),
        pair.lr_dims()
    );
    write_report(
        a.report.as_deref(),
        prov,
        json!({
            "dictionary": a.out.display().to_string(),
            "dictionary_sha256": digest,
            "atoms": pair.n_atoms(),
            "subjects": pair.classes(),
            "hr_dims": [pair.hr_dims().height, pair.hr_dims().width],
            "lr_dims": [pair.lr_dims().height, pair.lr_dims().width],
        }),
    )
}

pub fn degrade(a: &DegradeArgs) -> Result<()> {
    let (degradation, desc) = resolve_degradation(&a.psf, a.sigma)?;
    let input = load_image(&a.input)?;
    let out = degrade::degrade(&input, &degradation, a.seed)?;
    out.save(&a.out)?;
    let mut prov = Provenance::new("degrade", json!({ "degradation": desc }))
        .seeds(json!({ "noise": a.seed }));
    prov.input("image", &a.input)?;
    write_report(
        a.report.as_deref(),
        prov,
        json!({
            "output": a.out.display().to_string(),
            "output_sha256": crate::report::sha256_file(&a.out)?,
            "dims": [out.height(), out.width()],
        }),
    )
}

fn load_dicts(paths: &[PathBuf], prov: &mut Provenance) -> Result<Vec<DictionaryPair>> {
    let mut out = Vec::new();
    for p in paths {
        prov.input("dictionary", p)?;
        out.push(DictionaryPair::load(p).with_context(|| format!("loading {}", p.display()))?);
    }
    Ok(out)
}

fn ssim_or_null(a: &Image, b: &Image) -> Result<Value> {
    if a.height() < SSIM_WINDOW || a.width() < SSIM_WINDOW {
        return Ok(Value::Null);
    }
    Ok(json!(ssim(a, b)?))
}

pub fn hallucinate(a: &HallucinateArgs) -> Result<()> {
    let params = solver_params(&a.solver, !a.no_clip);
    let mut prov = Provenance::new("hallucinate", solver_json(&params));
    let dicts = load_dicts(&a.dict, &mut prov)?;
    prov.input("input", &a.input)?;
    let y = load_image(&a.input)?;
    if dicts.len() != 1 && dicts.len() != y.channels() {
        bail!(
            "{} dictionaries for a {}-channel input; give one, or one per channel",
            dicts.len(),
            y.channels()
        );
    }
    let mask = match &a.mask {
        Some(p) => {
            prov.input("mask", p)?;
            Some(Mask::from_image(&load_image(p)?))
        }
        None => None,
    };
    let truth = match &a.ground_truth {
        Some(p) => {
            prov.input("ground_truth", p)?;
            let g = load_image(p)?;
            if g.channels() != y.channels() {
                bail!("ground truth has {} channels, input has {}", g.channels(), y.channels());
            }
            Some(g)
        }
        None => None,
    };

    let mut planes = Vec::new();
    let mut bicubic = Vec::new();
    let mut per_channel = Vec::new();
    for c in 0..y.channels() {
        let pair = &dicts[if dicts.len() == 1 { 0 } else { c }];
        let solver = Hallucinator::new(pair)?;
        let yc = y.channel(c);
        let gt = truth.as_ref().map(|t| t.channel(c));
        let res = solver.run(
            &yc,
            &params,
            RunOptions {
                mask: mask.as_ref(),
                ground_truth: gt.as_ref(),
            },
        )?;
        let decision = classify_src(&res.alpha_hat.alpha, pair, ResidualSpace::HighRes)?;
        per_channel.push(json!({
            "objective_trace": res.objective_trace,
            "per_iteration_psnr": res.per_iteration_psnr.map(|v| v.into_iter().map(db).collect::<Vec<_>>()),
            "alpha": res.alpha_hat.alpha.as_slice(),
            "nonzeros": res.alpha_hat.alpha.iter().filter(|v| **v != 0.0).count(),
            "src_subject": decision.subject,
            "src_residuals": decision.residuals.iter().map(|(c, r)| json!([c, r])).collect::<Vec<_>>(),
        }));
        bicubic.push(bicubic_baseline(&yc, pair).clamped());
        planes.push(res.x_hat);
    }
    let x_hat = Image::from_channels(&planes)?;
    x_hat.save(&a.out)?;

    let mut body = json!({
        "output": a.out.display().to_string(),
        "output_sha256": crate::report::sha256_file(&a.out)?,
        "hr_dims": [x_hat.height(), x_hat.width()],
        "channels": per_channel,
    });
    if let Some(gt) = &truth {
        if gt.dims() != x_hat.dims() {
            bail!("ground truth is {} but the estimate is {}", gt.dims(), x_hat.dims());
        }
        let bic = Image::from_channels(&bicubic)?;
        let p = psnr(&x_hat, gt, 255.0)?;
        body["metrics"] = json!({
            "psnr": db(p),
            "ssim": ssim_or_null(&x_hat, gt)?,
            "bicubic_psnr": db(psnr(&bic, gt, 255.0)?),
            "bicubic_ssim": ssim_or_null(&bic, gt)?,
        });
        println!("PSNR {}", if p.is_finite() { format!("{p:.4}") } else { "inf".into() });
    }
    write_report(a.report.as_deref(), prov, body)
}

fn read_pairs(path: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (r, c) = line
            .split_once('\t')
            .ok_or_else(|| anyhow!("{}:{}: expected reference<TAB>candidate", path.display(), i + 1))?;
        out.push((base.join(r.trim()), base.join(c.trim())));
    }
    if out.is_empty() {
        bail!("{} lists no pairs", path.display());
    }
    Ok(out)
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let pairs = read_pairs(&a.pairs)?;
    let mut prov = Provenance::new("evaluate", json!({ "peak": 255.0 }));
    prov.input("pairs", &a.pairs)?;
    for (r, c) in &pairs {
        prov.input("reference", r)?;
        prov.input("candidate", c)?;
    }
    let rows: Vec<(f64, Option<f64>)> = pairs
        .par_iter()
        .map(|(r, c)| -> Result<(f64, Option<f64>)> {
            let (ri, ci) = (load_image(r)?, load_image(c)?);
            let p = psnr(&ri, &ci, 255.0).with_context(|| format!("{} vs {}", r.display(), c.display()))?;
            let s = if ri.height() >= SSIM_WINDOW && ri.width() >= SSIM_WINDOW {
                Some(ssim(&ri, &ci)?)
            } else {
                None
            };
            Ok((p, s))
        })
        .collect::<Result<_>>()?;

    println!("reference\tcandidate\tpsnr\tssim");
    let mut items = Vec::new();
    for ((r, c), (p, s)) in pairs.iter().zip(&rows) {
        let ps = if p.is_finite() { format!("{p:.4}") } else { "inf".into() };
        let ss = s.map_or("n/a".to_string(), |v| format!("{v:.6}"));
        println!("{}\t{}\t{ps}\t{ss}", r.display(), c.display());
        items.push(json!({
            "reference": r.display().to_string(),
            "candidate": c.display().to_string(),
            "psnr": db(*p),
            "ssim": s,
        }));
    }
    let psnrs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ssims: Vec<f64> = rows.iter().filter_map(|r| r.1).collect();
    write_report(
        a.report.as_deref(),
        prov,
        json!({
            "items": items,
            "mean_psnr": db(mean(&psnrs)),
            "mean_ssim": if ssims.is_empty() { Value::Null } else { json!(mean(&ssims)) },
            "count": rows.len(),
        }),
    )
}

pub fn recognize(a: &RecognizeArgs) -> Result<()> {
    let params = solver_params(&a.solver, true);
    let mut prov = Provenance::new(
        "recognize",
        json!({ "solver": solver_json(&params), "residual": format!("{:?}", a.residual).to_lowercase() }),
    );
    prov.input("dictionary", &a.dict)?;
    prov.input("manifest", &a.manifest)?;
    let pair = DictionaryPair::load(&a.dict)?;
    let manifest = read_manifest(&a.manifest)?;
    let names = dictionary::list_images(&a.in_dir)?;
    if names.is_empty() {
        bail!("no probe images in {}", a.in_dir.display());
    }
    let mut probes = Vec::new();
    for name in &names {
        let subject = *manifest
            .get(name)
            .ok_or_else(|| anyhow!("probe {name} has no manifest entry"))?;
        let path = a.in_dir.join(name);
        prov.input("probe", &path)?;
        probes.push((name.clone(), path, subject));
    }
    let classes = pair.classes();
    let max_rank = a.max_rank.unwrap_or(classes.len().min(10)).clamp(1, classes.len());
    let solver = Hallucinator::new(&pair)?;

    let results: Vec<Value> = probes
        .par_iter()
        .map(|(name, path, subject)| -> Result<Value> {
            let img = load_image(path)?.to_gray();
            let (y, degraded) = if img.dims() == pair.lr_dims() {
                (img, false)
            } else if img.dims() == pair.hr_dims() {
                (degrade::degrade(&img, pair.degradation(), 0)?, true)
            } else {
                bail!(
                    "probe {name} is {}; expected {} or {}",
                    img.dims(),
                    pair.lr_dims(),
                    pair.hr_dims()
                );
            };
            let res = solver.run(&y, &params, RunOptions::default())?;
            let space = match a.residual {
                ResidualArg::Hr => ResidualSpace::HighRes,
                ResidualArg::Lr => ResidualSpace::LowRes(&y),
            };
            let d = classify_src(&res.alpha_hat.alpha, &pair, space)?;
            Ok(json!({
                "probe": name,
                "subject": subject,
                "predicted": d.subject,
                "rank": d.rank_of(*subject).map(|r| r + 1),
                "degraded_from_hr": degraded,
                "residuals": d.residuals.iter().map(|(c, r)| json!([c, r])).collect::<Vec<_>>(),
            }))
        })
        .collect::<Result<_>>()?;

    let n = results.len() as f64;
    let cumulative: Vec<f64> = (1..=max_rank)
        .map(|k| {
            results
                .iter()
                .filter(|r| r["rank"].as_u64().is_some_and(|x| x as usize <= k))
                .count() as f64
                / n
        })
        .collect();
    println!("rank-1 accuracy {:.4} over {} probes", cumulative[0], results.len());
    write_report(
        a.report.as_deref(),
        prov,
        json!({
            "items": results,
            "accuracy": cumulative[0],
            "cumulative_match": cumulative,
            "probes": results.len(),
        }),
    )
}

pub fn align_dict(a: &AlignDictArgs) -> Result<()> {
    let (degradation, desc) = resolve_degradation(&a.psf, 0.0)?;
    let mut prov = Provenance::new(
        "align-dict",
        json!({
            "degradation": desc,
            "theta": a.theta,
            "size": [a.size.height, a.size.width],
        }),
    );
    prov.input("reference", &a.reference)?;
    prov.input("y_landmarks", &a.y_landmarks)?;
    let p_ref = LandmarkSet::load(&a.reference)?;
    let p_y = LandmarkSet::load(&a.y_landmarks)?;
    let manifest: Option<BTreeMap<String, u32>> = match &a.manifest {
        Some(m) => {
            prov.input("manifest", m)?;
            Some(read_manifest(m)?)
        }
        None => None,
    };

    let mut names: Vec<String> = fs::read_dir(&a.meshes)
        .with_context(|| format!("listing {}", a.meshes.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("obj")))
        .filter_map(|p| p.file_name().and_then(|n| n.to_str()).map(str::to_string))
        .collect();
    names.sort();
    if names.is_empty() {
        bail!("no .obj meshes in {}", a.meshes.display());
    }

    let mut samples = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let mesh_path = a.meshes.join(name);
        let stem = Path::new(name).file_stem().and_then(|s| s.to_str()).unwrap_or(name);
        let lmk_path = a.landmarks.join(format!("{stem}.lmk"));
        prov.input("mesh", &mesh_path)?;
        prov.input("landmarks", &lmk_path)?;
        let mesh = Mesh::load_obj(&mesh_path)?;
        let p_i = LandmarkSet::load(&lmk_path)?;
        let (to_ref, _) = estimate_similarity(&p_i, &p_ref)
            .with_context(|| format!("registering {name} to the reference"))?;
        let label = match &manifest {
            Some(m) => *m.get(name).ok_or_else(|| anyhow!("mesh {name} has no manifest entry"))?,
            None => i as u32,
        };
        samples.push(AlignmentSample { mesh, to_ref, label });
    }

    let mut cfg = AlignmentConfig::new(a.size, degradation);
    cfg.theta = a.theta;
    let aligned = build_aligned_dictionaries(&samples, &p_y, &p_ref, &cfg)?;
    aligned.pair.save(&a.out)?;
    aligned.mask.to_image().save(&a.mask)?;
    println!(
        "{}: kept {} of {} samples; mask keeps {} of {} LR pixels",
        a.out.display(),
        aligned.kept.len(),
        samples.len(),
        aligned.mask.count(),
        aligned.mask.dims().len()
    );
    write_report(
        a.report.as_deref(),
        prov,
        json!({
            "dictionary": a.out.display().to_string(),
            "dictionary_sha256": crate::report::sha256_file(&a.out)?,
            "mask": a.mask.display().to_string(),
            "mask_sha256": crate::report::sha256_file(&a.mask)?,
            "kept": aligned.kept.iter().map(|&i| &names[i]).collect::<Vec<_>>(),
            "rejected": aligned.rejected.iter().map(|&i| &names[i]).collect::<Vec<_>>(),
            "mask_pixels": aligned.mask.count(),
        }),
    )
}
