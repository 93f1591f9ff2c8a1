//! The canonical eight-scenario property matrix: every combination of
//! {off-chain influence proof, on-chain user simple, on-chain miner simple}
//! is realized by one mechanism/equilibrium pair, and the checkers must
//! reproduce the expected ✓/✗ pattern cell by cell.

use crate::agents::{BelowReserve, MinerStrategy, UserStrategy};
use crate::checkers::{
    check_miner_simplicity, check_off_chain_influence, check_strong_collusion,
    check_user_simplicity, CheckCfg, CheckerError, PropertyVerdict, Scenario,
};
use crate::dist::ValueDistribution;
use crate::engine::OnChainProfile;
use crate::mech::{CryptoModel, Mechanism};
use serde::Serialize;

/// Fixed row order of the matrix report.
pub const ROW_IDS: [&str; 8] = [
    "c2pa",
    "eip1559",
    "p2pa",
    "bomb_pp",
    "wpb_sigma0",
    "sr2pa_2pa",
    "bomb_wpb",
    "sr2pa_1pa",
];

/// Display labels, mirroring the row order above.
pub const ROW_LABELS: [&str; 8] = [
    "C2PA",
    "EIP-1559",
    "P2PA",
    "BoMB-pp",
    "WPB-σ0",
    "SR2PA-2PA",
    "BoMB-wpb",
    "SR2PA-1PA",
];

/// Expected cells (off-chain influence proof, user simple, miner simple).
pub const GOLDEN_CELLS: [(bool, bool, bool); 8] = [
    (true, true, true),    // C2PA
    (false, true, true),   // EIP-1559
    (true, true, false),   // P2PA
    (true, false, true),   // BoMB posted-price equilibrium
    (true, false, false),  // WPB shaded equilibrium
    (false, true, false),  // SR2PA second-price equilibrium
    (false, false, true),  // BoMB shaded equilibrium
    (false, false, false), // SR2PA first-price equilibrium
];

/// Parameter overrides for negative controls (a wrong reserve must break the
/// golden comparison).
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Table1Overrides {
    pub c2pa_reserve: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct MatrixRowSpec {
    pub id: String,
    pub label: String,
    pub scenario: Scenario,
}

/// Builds the canonical eight rows on U[0,1], n = 2, monopoly reserve 0.5.
pub fn table1_rows(overrides: &Table1Overrides) -> Vec<MatrixRowSpec> {
    let dist = ValueDistribution::uniform(0.0, 1.0).expect("unit uniform");
    let reserve = 0.5;
    let c2pa_reserve = overrides.c2pa_reserve.unwrap_or(reserve);
    let n = 2;
    let compliant = |advice: f64| MinerStrategy::Compliant { advice };
    let shade_val = UserStrategy::ShadeWpb {
        reserve,
        below: BelowReserve::BidValue,
    };
    let rows: Vec<(usize, Mechanism, OnChainProfile)> = vec![
        (
            0,
            Mechanism::KPlusOnePrice {
                k: 1,
                crypto: CryptoModel::Gatekeeper,
            },
            OnChainProfile::symmetric(compliant(c2pa_reserve), UserStrategy::Truthful),
        ),
        (
            1,
            Mechanism::Eip1559 { price: 0.4 },
            OnChainProfile::symmetric(compliant(0.0), UserStrategy::Truthful),
        ),
        (
            2,
            Mechanism::KPlusOnePrice {
                k: 1,
                crypto: CryptoModel::Plaintext,
            },
            OnChainProfile::symmetric(compliant(reserve), UserStrategy::Truthful),
        ),
        (
            3,
            Mechanism::Bomb { reserve },
            OnChainProfile::symmetric(compliant(0.0), UserStrategy::Threshold { reserve }),
        ),
        (
            4,
            Mechanism::WinnerPaysBid {
                k: 1,
                crypto: CryptoModel::Gatekeeper,
            },
            OnChainProfile::symmetric(compliant(reserve), shade_val.clone()),
        ),
        (
            5,
            Mechanism::Sr2pa,
            OnChainProfile::symmetric(compliant(reserve), UserStrategy::Truthful),
        ),
        (
            6,
            Mechanism::Bomb { reserve },
            OnChainProfile::symmetric(compliant(0.0), shade_val),
        ),
        (
            7,
            Mechanism::Sr2pa,
            OnChainProfile::symmetric(
                MinerStrategy::ReserveAtMaxBid,
                UserStrategy::ShadeWpb {
                    reserve: 0.0,
                    below: BelowReserve::BidValue,
                },
            ),
        ),
    ];
    rows.into_iter()
        .map(|(i, mech, profile)| MatrixRowSpec {
            id: ROW_IDS[i].to_string(),
            label: ROW_LABELS[i].to_string(),
            scenario: Scenario {
                name: ROW_IDS[i].to_string(),
                mech,
                dist: dist.clone(),
                n,
                profile,
            },
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MatrixCells {
    pub off_chain_influence_proof: bool,
    pub user_simple: bool,
    pub miner_simple: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MatrixRowResult {
    pub id: String,
    pub label: String,
    pub cells: MatrixCells,
    pub verdicts: Vec<PropertyVerdict>,
    /// Strong-collusion verdict, evaluated for rows that pass all three
    /// matrix columns (the impossibility demonstration needs it only there).
    pub strong_collusion: Option<PropertyVerdict>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MatrixReport {
    pub rows: Vec<MatrixRowResult>,
}

impl MatrixReport {
    pub fn matches_golden(&self) -> bool {
        self.rows.len() == GOLDEN_CELLS.len()
            && self.rows.iter().zip(GOLDEN_CELLS).all(|(row, (o, u, m))| {
                row.cells.off_chain_influence_proof == o
                    && row.cells.user_simple == u
                    && row.cells.miner_simple == m
            })
    }

    /// The impossibility demonstration: no row satisfies all of user
    /// simplicity, miner simplicity, influence proofness, and strong
    /// collusion proofness simultaneously.
    pub fn no_row_satisfies_all_four(&self) -> bool {
        self.rows.iter().all(|row| {
            let all_three = row.cells.off_chain_influence_proof
                && row.cells.user_simple
                && row.cells.miner_simple;
            match (&row.strong_collusion, all_three) {
                (_, false) => true,
                (Some(v), true) => !v.passed(),
                (None, true) => false, // unverified quadruple counts as a failure
            }
        })
    }
}

/// Runs the three matrix checkers on every row, in row order, plus strong
/// collusion for rows that pass all three.
pub fn property_matrix(
    rows: &[MatrixRowSpec],
    cfg: &CheckCfg,
) -> Result<MatrixReport, CheckerError> {
    for required in ROW_IDS {
        if !rows.iter().any(|r| r.id == required) {
            return Err(CheckerError::ScenarioGap {
                missing: required.to_string(),
            });
        }
    }
    let mut results = Vec::with_capacity(rows.len());
    for row in rows {
        let sc = &row.scenario;
        let ocip = check_off_chain_influence(sc, cfg)?;
        let user = check_user_simplicity(sc, cfg)?;
        let miner = check_miner_simplicity(sc, cfg)?;
        let cells = MatrixCells {
            off_chain_influence_proof: ocip.passed(),
            user_simple: user.passed(),
            miner_simple: miner.passed(),
        };
        let strong = if cells.off_chain_influence_proof && cells.user_simple && cells.miner_simple {
            Some(check_strong_collusion(sc, cfg, 0)?)
        } else {
            None
        };
        let mut verdicts = vec![ocip, user, miner];
        if let Some(s) = &strong {
            verdicts.push(s.clone());
        }
        results.push(MatrixRowResult {
            id: row.id.clone(),
            label: row.label.clone(),
            cells,
            verdicts,
            strong_collusion: strong,
        });
    }
    Ok(MatrixReport { rows: results })
}
