use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dgcca::dataset::{save_matrix, Matrix};
use dgcca::manifest::{DecompositionManifest, ViewFiles};
use dgcca::nuisance::{Overrides, StageLevels};
use dgcca::{assemble_dataset, decompose_hierarchical, load_matrix, Error, HierarchyConfig, NuisanceParams, Result, SelectionConfig};
use serde::Serialize;

use crate::files::{create_dir, extension, format_for, read_json, seed_or_generate, write_json};
use crate::DecomposeArgs;

#[derive(Serialize)]
struct LevelReport<'a> {
    level: usize,
    report: &'a dgcca::nuisance::SelectionReport,
}

fn view_name(k: usize, path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("view");
    format!("{k}_{stem}")
}

pub fn run(a: &DecomposeArgs) -> Result<()> {
    if a.views.len() < 2 {
        return Err(Error::Arity(format!("need at least 2 views, got {}", a.views.len())));
    }
    let out_format = dgcca::Format::parse(&a.output_format)?;
    let mut mats = Vec::with_capacity(a.views.len());
    for path in &a.views {
        let fmt = format_for(path, a.format.as_deref())?;
        mats.push(load_matrix(path, fmt)?);
    }
    let labels: Vec<(Option<Vec<String>>, Option<Vec<String>>)> =
        mats.iter().map(|m| (m.row_labels.clone(), m.col_labels.clone())).collect();
    let ds = assemble_dataset(mats)?;

    let (seed, generated) = seed_or_generate(a.seed);
    let stage_levels: StageLevels = match &a.significance_map {
        Some(p) => read_json(p)?,
        None => StageLevels::default(),
    };
    let selection = SelectionConfig {
        alpha: a.significance,
        stage_levels,
        sign_bootstrap: a.bootstrap,
        rank_bootstrap: a.rank_bootstrap,
        k_max: a.k_max,
        seed,
        ..SelectionConfig::default()
    };
    selection.validate()?;
    let mut cfg = HierarchyConfig::new(a.levels, a.pve_floor, selection);
    if let Some(p) = &a.params {
        let params: NuisanceParams = read_json(p)?;
        cfg.level_params = vec![Some(params)];
    }
    cfg.overrides = Overrides { ranks: a.ranks.clone(), ..Overrides::default() };

    let h = decompose_hierarchical(&ds, &cfg)?;

    create_dir(&a.out)?;
    let ext = extension(out_format);
    let mut views = Vec::with_capacity(ds.k());
    let mut names = Vec::with_capacity(ds.k());
    for (k, path) in a.views.iter().enumerate() {
        let name = view_name(k, path);
        names.push(name.clone());
        views.push(ViewFiles {
            name,
            source: path.display().to_string(),
            p: ds.views[k].p(),
            files: Vec::new(),
        });
    }
    for (t, level) in h.levels.iter().enumerate() {
        let dir = a.out.join(format!("level{}", t + 1));
        create_dir(&dir)?;
        for (k, v) in level.views.iter().enumerate() {
            let (rows, cols) = &labels[k];
            for (part, m) in [("X", &v.x_hat), ("C", &v.c_hat), ("D", &v.d_hat)] {
                let file = format!("{}_{part}.{ext}", names[k]);
                let mat = Matrix::with_labels(m.clone(), rows.clone(), cols.clone())?;
                save_matrix(&mat, &dir.join(&file), out_format)?;
                views[k].files.push(format!("level{}/{file}", t + 1));
            }
        }
    }
    write_pve(&a.out.join("pve_variables.csv"), &h, &names, &labels)?;
    let reports: Vec<LevelReport> = h
        .reports
        .iter()
        .enumerate()
        .map(|(t, report)| LevelReport { level: t + 1, report })
        .collect();
    write_json(&a.out.join("selection_report.json"), &reports)?;
    let manifest = DecompositionManifest::new(&h, ds.n, seed, generated, views);
    write_json(&a.out.join("manifest.json"), &manifest)?;
    Ok(())
}

fn write_pve(
    path: &PathBuf,
    h: &dgcca::HierarchyResult,
    names: &[String],
    labels: &[(Option<Vec<String>>, Option<Vec<String>>)],
) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "level,view,variable,pve_c,pve_d").map_err(io)?;
    for (t, level) in h.levels.iter().enumerate() {
        for (k, v) in level.views.iter().enumerate() {
            for (i, c) in v.pve_var_c.iter().enumerate() {
                let var = labels[k].0.as_ref().map(|r| r[i].clone()).unwrap_or_else(|| i.to_string());
                let var = if var.contains([',', '"', '\n']) { format!("\"{}\"", var.replace('"', "\"\"")) } else { var };
                writeln!(w, "{},{},{var},{c:?},{:?}", t + 1, names[k], 1.0 - c).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}
