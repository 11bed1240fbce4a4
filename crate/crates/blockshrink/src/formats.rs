//! JSON and CSV documents for estimates, step graphons, score tables and
//! experiment records.

use std::path::Path;

use blockshrink_core::eb::{ConnectivityEstimate, EstimateFlag, HyperParams, Method};
use blockshrink_core::eval::ExperimentRecord;
use blockshrink_core::graphon::StepGraphon;
use blockshrink_core::select::SelectionScore;
use blockshrink_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::write_atomic;

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDoc {
    #[serde(rename = "K")]
    pub k: usize,
    pub method: Method,
    pub theta: Vec<Vec<f64>>,
    pub hyper: Option<HyperParams>,
    pub shrinkage: Option<Vec<Vec<f64>>>,
    pub flags: Vec<EstimateFlag>,
}

impl From<&ConnectivityEstimate> for EstimateDoc {
    fn from(e: &ConnectivityEstimate) -> Self {
        EstimateDoc {
            k: e.k(),
            method: e.method,
            theta: rows(&e.theta),
            hyper: e.hyper,
            shrinkage: e.shrinkage.as_ref().map(rows),
            flags: e.flags.clone(),
        }
    }
}

impl EstimateDoc {
    pub fn theta_matrix(&self) -> Matrix {
        Matrix::from_rows(&self.theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepGraphonDoc {
    pub boundaries: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
}

impl From<&StepGraphon> for StepGraphonDoc {
    fn from(g: &StepGraphon) -> Self {
        StepGraphonDoc {
            boundaries: g.boundaries().to_vec(),
            theta: rows(g.theta()),
        }
    }
}

impl StepGraphonDoc {
    pub fn to_graphon(&self) -> Result<StepGraphon> {
        Ok(StepGraphon::new(
            self.boundaries.clone(),
            Matrix::from_rows(&self.theta),
        )?)
    }
}

/// `G × G` midpoint evaluations, one CSV row per `x`.
pub fn graphon_grid_csv(g: &StepGraphon, grid: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for i in 0..grid {
        let x = (i as f64 + 0.5) / grid as f64;
        let row: Vec<String> = (0..grid)
            .map(|j| {
                let y = (j as f64 + 0.5) / grid as f64;
                g.evaluate(x, y).map(|v| format!("{v:?}"))
            })
            .collect::<std::result::Result<_, _>>()?;
        w.write_record(&row)?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

pub const SCORE_HEADER: [&str; 9] = [
    "K", "j_z", "penalty", "total", "cvrp", "alpha0", "beta0", "alpha1", "beta1",
];

fn score_fields(s: &SelectionScore) -> Vec<String> {
    let h = &s.hyper;
    let mut out = vec![s.k.to_string()];
    out.extend(
        [
            s.j_z, s.penalty, s.total, s.cvrp, h.alpha0, h.beta0, h.alpha1, h.beta1,
        ]
        .iter()
        .map(|v| format!("{v:?}")),
    );
    out
}

/// Score table keyed by input K; `K` is the number of blocks returned.
pub fn scores_csv(scores: &[(usize, SelectionScore)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["K_input"];
    header.extend(SCORE_HEADER);
    w.write_record(&header)?;
    for (k_input, s) in scores {
        let mut row = vec![k_input.to_string()];
        row.extend(score_fields(s));
        w.write_record(&row)?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

pub fn write_scores(path: &Path, scores: &[(usize, SelectionScore)]) -> Result<()> {
    write_atomic(path, &scores_csv(scores)?)
}

/// One JSON object per line.
pub fn records_jsonl(records: &[ExperimentRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Flattened records; each record contributes one row per score.
pub fn records_csv(records: &[ExperimentRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "replicate",
        "seed",
        "K_input",
        "K_returned",
        "mse_mle",
        "mse_eb",
        "mse_vbem",
    ];
    header.extend(&SCORE_HEADER[1..]);
    w.write_record(&header)?;
    for r in records {
        let lead = [
            r.replicate.to_string(),
            r.seed.to_string(),
            r.k_input.to_string(),
            r.k_returned.to_string(),
            format!("{:?}", r.mse_mle),
            format!("{:?}", r.mse_eb),
            format!("{:?}", r.mse_vbem),
        ];
        for s in &r.scores {
            let mut row: Vec<String> = lead.to_vec();
            row.extend(score_fields(s).into_iter().skip(1));
            w.write_record(&row)?;
        }
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use blockshrink_core::eb::{eb_estimate, mle_estimate};
    use blockshrink_core::graph::BlockStats;

    #[test]
    fn estimate_json_shape() {
        let s = BlockStats::from_counts(2, vec![3, 1, 1, 0], vec![10, 4, 4, 0]).unwrap();
        let doc = EstimateDoc::from(&mle_estimate(&s));
        let v: serde_json::Value = serde_json::to_value(&doc).unwrap();
        assert_eq!(v["K"], 2);
        assert_eq!(v["method"], "MLE");
        assert_eq!(v["theta"][0][0], 0.3);
        assert_eq!(v["flags"][0]["flag"], "empty_block_filled");

        let h = HyperParams::new(1.0, 1.0, 2.0, 3.0).unwrap();
        let doc = EstimateDoc::from(&eb_estimate(&s, &h));
        let back: EstimateDoc =
            serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.hyper.unwrap().beta1, 3.0);
    }

    #[test]
    fn step_graphon_round_trip_and_grid() {
        let g = StepGraphon::new(
            vec![0.0, 0.5, 1.0],
            Matrix::from_rows(&[[0.8, 0.1], [0.1, 0.6]]),
        )
        .unwrap();
        let doc = StepGraphonDoc::from(&g);
        assert_eq!(doc.to_graphon().unwrap(), g);
        let text = String::from_utf8(graphon_grid_csv(&g, 2).unwrap()).unwrap();
        assert_eq!(text, "0.8,0.1\n0.1,0.6\n");
    }

    #[test]
    fn score_csv_columns() {
        let s = SelectionScore {
            k: 2,
            j_z: -10.0,
            penalty: 3.0,
            total: -13.0,
            cvrp: -0.5,
            hyper: HyperParams::new(1.0, 2.0, 3.0, 4.0).unwrap(),
        };
        let text = String::from_utf8(scores_csv(&[(3, s)]).unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "K_input,K,j_z,penalty,total,cvrp,alpha0,beta0,alpha1,beta1"
        );
        assert_eq!(
            lines.next().unwrap(),
            "3,2,-10.0,3.0,-13.0,-0.5,1.0,2.0,3.0,4.0"
        );
    }
}
