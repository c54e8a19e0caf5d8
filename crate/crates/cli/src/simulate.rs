use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use dgcca::manifest::SCHEMA_VERSION;
use dgcca::simulation::{run_study, EstimatorConfig, ParamChoice, ReplicationMetrics, SetupId, SetupSpec, StudySummary};
use dgcca::{Error, Result, SelectionConfig};
use serde::Serialize;

use crate::files::{create_dir, seed_or_generate, write_json};
use crate::SimulateArgs;

#[derive(Serialize)]
struct StudyManifest<'a> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    seed: u64,
    seed_generated: bool,
    rng: &'static str,
    summary: &'a StudySummary,
}

pub fn run(a: &SimulateArgs) -> Result<()> {
    let setup = SetupId::parse(&a.setup)?;
    let (seed, generated) = seed_or_generate(a.seed);
    let spec = SetupSpec::new(setup, a.theta, a.p1, a.sigma2, a.n, seed)?;
    let params = if a.select {
        let sel = SelectionConfig {
            alpha: a.alpha,
            sign_bootstrap: a.bootstrap,
            rank_bootstrap: a.rank_bootstrap,
            ..SelectionConfig::default()
        };
        sel.validate()?;
        ParamChoice::Select(sel)
    } else {
        ParamChoice::Truth
    };
    if !(a.fdr > 0.0 && a.fdr < 1.0) {
        return Err(Error::Config(format!("FDR level {} outside (0, 1)", a.fdr)));
    }
    let cfg = EstimatorConfig { params, fdr_level: a.fdr, top_fraction: a.top_fraction };
    let (summary, reps) = run_study(&spec, a.reps, &cfg)?;

    create_dir(&a.out)?;
    let manifest = StudyManifest {
        schema_version: SCHEMA_VERSION,
        tool: "dgcca",
        version: env!("CARGO_PKG_VERSION"),
        seed,
        seed_generated: generated,
        rng: dgcca::rng::GENERATOR_NAME,
        summary: &summary,
    };
    write_json(&a.out.join("summary.json"), &manifest)?;
    write_replications(&a.out.join("replications.csv"), &reps)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

fn write_replications(path: &Path, reps: &[ReplicationMetrics]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let k = reps.first().map(|r| r.err_x.len()).unwrap_or(0);
    let mut header = vec!["rep".to_string()];
    for name in ["err_x", "err_c", "err_d", "pve_view_abs_err", "spearman", "ndcg", "ndcg_top"] {
        header.extend((1..=k).map(|v| format!("{name}_{v}")));
    }
    header.extend(["orthogonal_pair", "rho1", "params_correct"].map(String::from));
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for r in reps {
        let mut row = vec![r.rep.to_string()];
        for series in [&r.err_x, &r.err_c, &r.err_d, &r.pve_view_abs_err] {
            row.extend(series.iter().map(|v| format!("{v:?}")));
        }
        row.extend(r.spearman.iter().map(|v| opt(*v)));
        for series in [&r.ndcg, &r.ndcg_top] {
            row.extend(series.iter().map(|v| format!("{v:?}")));
        }
        row.push(r.orthogonal_pair.to_string());
        row.push(opt(r.rho1));
        row.push(r.params_correct.map(|b| b.to_string()).unwrap_or_default());
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}
