//! Report emission: the fixed-width property matrix, JSON-lines verdict
//! logs, and CSV revenue curves / interim rules. All outputs are
//! deterministic functions of the run record.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunOutputs {
    /// Serialized PropertyVerdict objects, in emission order.
    pub verdicts: Vec<serde_json::Value>,
    pub revenue_curve: Vec<CurvePoint>,
    pub interim: Vec<InterimOut>,
    pub matrix: Option<MatrixOut>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvePoint {
    pub scenario: String,
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub reps: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InterimOut {
    pub user: usize,
    pub grid: Vec<f64>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub se_x: Vec<f64>,
    pub se_p: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixOut {
    pub rows: Vec<MatrixRowOut>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixRowOut {
    pub id: String,
    pub label: String,
    pub off_chain_influence_proof: bool,
    pub user_simple: bool,
    pub miner_simple: bool,
}

const MARK_YES: &str = "✓";
const MARK_NO: &str = "✗";

/// Fixed-width text table mirroring the canonical matrix layout.
pub fn render_matrix(matrix: &MatrixOut) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>24} {:>12} {:>13}\n",
        "Mechanism", "OffChainInfluenceProof", "UserSimple", "MinerSimple"
    ));
    for row in &matrix.rows {
        let mark = |b: bool| if b { MARK_YES } else { MARK_NO };
        out.push_str(&format!(
            "{:<12} {:>24} {:>12} {:>13}\n",
            row.label,
            mark(row.off_chain_influence_proof),
            mark(row.user_simple),
            mark(row.miner_simple)
        ));
    }
    out
}

pub fn render_verdicts_jsonl(outputs: &RunOutputs) -> String {
    let mut out = String::new();
    for v in &outputs.verdicts {
        out.push_str(&serde_json::to_string(v).expect("verdict serializes"));
        out.push('\n');
    }
    out
}

pub fn render_revenue_csv(outputs: &RunOutputs) -> String {
    let mut out = String::from("scenario,n,mean,stderr,reps,seed\n");
    for p in &outputs.revenue_curve {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.scenario, p.n, p.mean, p.stderr, p.reps, p.seed
        ));
    }
    out
}

pub fn render_interim_csv(interim: &InterimOut) -> String {
    let mut out = String::from("v,x,p,se_x,se_p\n");
    for i in 0..interim.grid.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            interim.grid[i], interim.x[i], interim.p[i], interim.se_x[i], interim.se_p[i]
        ));
    }
    out
}

/// Writes every report for the record into `out_dir`. Returns the list of
/// files written.
pub fn emit_reports(
    outputs: &RunOutputs,
    out_dir: &Path,
) -> std::io::Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut write = |name: String, body: String| -> std::io::Result<()> {
        let path = out_dir.join(&name);
        let mut f = std::fs::File::create(&path)?;
        f.write_all(body.as_bytes())?;
        written.push(path);
        Ok(())
    };
    write("verdicts.jsonl".into(), render_verdicts_jsonl(outputs))?;
    write("revenue_curves.csv".into(), render_revenue_csv(outputs))?;
    for interim in &outputs.interim {
        write(
            format!("interim_{}.csv", interim.user),
            render_interim_csv(interim),
        )?;
    }
    if let Some(matrix) = &outputs.matrix {
        write("matrix.txt".into(), render_matrix(matrix))?;
    }
    Ok(written)
}
