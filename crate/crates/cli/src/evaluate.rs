use std::io::Write;
use std::path::PathBuf;

use dgcca::evaluation::{orthogonal_pair_rate, rank_quality, rho1, swiss};
use dgcca::{load_matrix, Error, Result};
use serde_json::json;

use crate::files::{format_for, read_labels, read_vector};
use crate::EvaluateCommand;

fn load_all(paths: &[PathBuf], format: Option<&str>) -> Result<Vec<dgcca::Matrix>> {
    paths
        .iter()
        .map(|p| load_matrix(p, format_for(p, format)?))
        .collect()
}

pub fn run(cmd: &EvaluateCommand) -> Result<()> {
    let out = match cmd {
        EvaluateCommand::Swiss { matrix, labels, format } => {
            let m = load_matrix(matrix, format_for(matrix, format.as_deref())?)?;
            let labels = read_labels(labels, m.n())?;
            json!({ "metric": "swiss", "score": swiss(&m.values, &labels)? })
        }
        EvaluateCommand::Rho1 { matrices, ranks, format } => {
            let mats = load_all(matrices, format.as_deref())?;
            let refs: Vec<_> = mats.iter().map(|m| &m.values).collect();
            json!({ "metric": "rho1", "value": rho1(&refs, ranks.as_deref())? })
        }
        EvaluateCommand::OrthogonalPairs { matrices, ranks, fdr, format } => {
            let mats = load_all(matrices, format.as_deref())?;
            let refs: Vec<_> = mats.iter().map(|m| &m.values).collect();
            let res = orthogonal_pair_rate(&refs, *fdr, ranks.as_deref())?;
            json!({ "metric": "orthogonal_pairs", "result": res })
        }
        EvaluateCommand::RankQuality { truth, estimate, column, top_fraction } => {
            let t = read_vector(truth, column.as_deref())?;
            let e = read_vector(estimate, column.as_deref())?;
            json!({ "metric": "rank_quality", "result": rank_quality(&t, &e, *top_fraction)? })
        }
    };
    let text = serde_json::to_string_pretty(&out)?;
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}
