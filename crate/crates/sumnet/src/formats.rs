//! JSON encodings of networks, codes, traces, transfer matrices and search
//! reports. Output is pretty-printed with a trailing newline; maps are
//! ordered by key and lists follow the canonical network order, so saving a
//! loaded file reproduces it byte for byte.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sumnet_core::codes::{CodeError, LinearCode, NonlinearCode, TransferMatrix};
use sumnet_core::gflin::{FieldSpec, GfError, MatrixGF};
use sumnet_core::netmodel::{build_network, Demand, Edge, NetError, Network, NetworkSpec};
use sumnet_core::solver::{Mode, SearchReport, Verdict, Witness};
use sumnet_core::transforms::TransformTrace;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Gf(#[from] GfError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error("matrix {what} is not rectangular")]
    Ragged { what: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkJson {
    pub name: String,
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeJson>,
    pub sources: BTreeMap<String, Vec<String>>,
    pub terminals: BTreeMap<String, DemandJson>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeJson {
    pub id: String,
    pub tail: String,
    pub head: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DemandJson {
    Sum,
    Recover { messages: Vec<String> },
}

impl From<&Network> for NetworkJson {
    fn from(net: &Network) -> Self {
        let spec = net.to_spec();
        Self {
            name: spec.name,
            nodes: spec.nodes,
            edges: spec.edges.into_iter().map(|e| EdgeJson { id: e.id, tail: e.tail, head: e.head }).collect(),
            sources: spec.sources,
            terminals: spec
                .terminals
                .into_iter()
                .map(|(t, d)| {
                    let d = match d {
                        Demand::Sum => DemandJson::Sum,
                        Demand::Recover(messages) => DemandJson::Recover { messages },
                    };
                    (t, d)
                })
                .collect(),
        }
    }
}

impl NetworkJson {
    pub fn into_network(self) -> Result<Network, FormatError> {
        let spec = NetworkSpec {
            name: self.name,
            nodes: self.nodes,
            edges: self.edges.into_iter().map(|e| Edge::new(e.id, e.tail, e.head)).collect(),
            sources: self.sources,
            terminals: self
                .terminals
                .into_iter()
                .map(|(t, d)| {
                    let d = match d {
                        DemandJson::Sum => Demand::Sum,
                        DemandJson::Recover { messages } => Demand::Recover(messages),
                    };
                    (t, d)
                })
                .collect(),
        };
        Ok(build_network(spec)?)
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn network_to_json(net: &Network) -> String {
    pretty(&NetworkJson::from(net))
}

pub fn network_from_json(text: &str) -> Result<Network, FormatError> {
    serde_json::from_str::<NetworkJson>(text)?.into_network()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeJson {
    pub field: u32,
    pub k: usize,
    pub n: usize,
    pub source_coeff: Vec<SourceCoeffJson>,
    pub local_coeff: Vec<LocalCoeffJson>,
    pub decode_coeff: Vec<DecodeCoeffJson>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceCoeffJson {
    pub msg: String,
    pub edge: String,
    pub mat: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalCoeffJson {
    #[serde(rename = "in")]
    pub input: String,
    pub out: String,
    pub mat: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeCoeffJson {
    pub terminal: String,
    pub edge: String,
    pub slot: usize,
    pub mat: Vec<Vec<u32>>,
}

pub fn matrix_from_rows(field: FieldSpec, rows: &[Vec<u32>], cols: usize, what: &str) -> Result<MatrixGF, FormatError> {
    if rows.iter().any(|r| r.len() != cols) {
        return Err(FormatError::Ragged { what: what.into() });
    }
    Ok(MatrixGF::new(field, rows.len(), cols, rows.concat())?)
}

impl From<&LinearCode> for CodeJson {
    fn from(code: &LinearCode) -> Self {
        Self {
            field: code.field().p(),
            k: code.k(),
            n: code.n(),
            source_coeff: code
                .source_coeffs()
                .iter()
                .map(|((msg, edge), m)| SourceCoeffJson { msg: msg.clone(), edge: edge.clone(), mat: m.to_rows() })
                .collect(),
            local_coeff: code
                .local_coeffs()
                .iter()
                .map(|((i, o), m)| LocalCoeffJson { input: i.clone(), out: o.clone(), mat: m.to_rows() })
                .collect(),
            decode_coeff: code
                .decode_coeffs()
                .iter()
                .map(|((t, slot, e), m)| DecodeCoeffJson {
                    terminal: t.clone(),
                    edge: e.clone(),
                    slot: *slot,
                    mat: m.to_rows(),
                })
                .collect(),
        }
    }
}

impl CodeJson {
    pub fn into_code(self) -> Result<LinearCode, FormatError> {
        let field = FieldSpec::new(self.field)?;
        let (k, n) = (self.k, self.n);
        let mut code = LinearCode::new(field, k, n);
        for c in self.source_coeff {
            let what = format!("source({}, {})", c.msg, c.edge);
            code.set_source(&c.msg, &c.edge, matrix_from_rows(field, &c.mat, k, &what)?)?;
        }
        for c in self.local_coeff {
            let what = format!("local({}, {})", c.input, c.out);
            code.set_local(&c.input, &c.out, matrix_from_rows(field, &c.mat, n, &what)?)?;
        }
        for c in self.decode_coeff {
            let what = format!("decode({}, {}, {})", c.terminal, c.slot, c.edge);
            code.set_decode(&c.terminal, c.slot, &c.edge, matrix_from_rows(field, &c.mat, n, &what)?)?;
        }
        Ok(code)
    }
}

pub fn code_to_json(code: &LinearCode) -> String {
    pretty(&CodeJson::from(code))
}

pub fn code_from_json(text: &str) -> Result<LinearCode, FormatError> {
    serde_json::from_str::<CodeJson>(text)?.into_code()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearCodeJson {
    pub q: u32,
    pub edge_fn: BTreeMap<String, Vec<u32>>,
    pub decode_fn: Vec<DecodeTableJson>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeTableJson {
    pub terminal: String,
    pub slot: usize,
    pub table: Vec<u32>,
}

impl From<&NonlinearCode> for NonlinearCodeJson {
    fn from(code: &NonlinearCode) -> Self {
        Self {
            q: code.q,
            edge_fn: code.edge_fn.clone(),
            decode_fn: code
                .decode_fn
                .iter()
                .map(|((t, slot), table)| DecodeTableJson { terminal: t.clone(), slot: *slot, table: table.clone() })
                .collect(),
        }
    }
}

impl From<NonlinearCodeJson> for NonlinearCode {
    fn from(j: NonlinearCodeJson) -> Self {
        NonlinearCode {
            q: j.q,
            edge_fn: j.edge_fn,
            decode_fn: j.decode_fn.into_iter().map(|d| ((d.terminal, d.slot), d.table)).collect(),
        }
    }
}

pub fn nonlinear_code_to_json(code: &NonlinearCode) -> String {
    pretty(&NonlinearCodeJson::from(code))
}

pub fn nonlinear_code_from_json(text: &str) -> Result<NonlinearCode, FormatError> {
    Ok(serde_json::from_str::<NonlinearCodeJson>(text)?.into())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceJson {
    pub op: String,
    pub nodes: BTreeMap<String, String>,
    pub edges: BTreeMap<String, String>,
}

pub fn trace_to_json(trace: &TransformTrace) -> String {
    pretty(&TraceJson { op: trace.op.clone(), nodes: trace.nodes.clone(), edges: trace.edges.clone() })
}

pub fn trace_from_json(text: &str) -> Result<TransformTrace, FormatError> {
    let j: TraceJson = serde_json::from_str(text)?;
    Ok(TransformTrace { op: j.op, nodes: j.nodes, edges: j.edges })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotJson {
    pub terminal: String,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferJson {
    pub field: u32,
    pub k: usize,
    pub rows: Vec<SlotJson>,
    pub cols: Vec<String>,
    pub matrix: Vec<Vec<u32>>,
}

pub fn transfer_to_json(t: &TransferMatrix) -> String {
    pretty(&TransferJson {
        field: t.matrix.field().p(),
        k: t.k,
        rows: t.rows.iter().map(|(terminal, slot)| SlotJson { terminal: terminal.clone(), slot: *slot }).collect(),
        cols: t.cols.clone(),
        matrix: t.matrix.to_rows(),
    })
}

/// Human-readable block dump: one line per matrix row, `|` between blocks.
pub fn transfer_to_text(t: &TransferMatrix) -> String {
    let mut out = String::new();
    let label_width = t.rows.iter().map(|(term, s)| term.len() + s.to_string().len() + 1).max().unwrap_or(0);
    out.push_str(&format!("{:label_width$}  {}\n", "", t.cols.join(" | ")));
    for (r, row) in t.matrix.to_rows().iter().enumerate() {
        let label = if t.k == 0 || r % t.k == 0 {
            let (term, s) = &t.rows[r / t.k.max(1)];
            format!("{term}#{s}")
        } else {
            String::new()
        };
        let blocks: Vec<String> = row
            .chunks(t.k.max(1))
            .map(|b| b.iter().map(u32::to_string).collect::<Vec<_>>().join(" "))
            .collect();
        out.push_str(&format!("{label:label_width$}  {}\n", blocks.join(" | ")));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModeJson {
    Scalar,
    Vector { k: usize },
    Fractional { k: usize, n: usize },
    Nonlinear { q: u32 },
}

impl From<Mode> for ModeJson {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Scalar => ModeJson::Scalar,
            Mode::Vector(k) => ModeJson::Vector { k },
            Mode::Fractional(k, n) => ModeJson::Fractional { k, n },
            Mode::Nonlinear(q) => ModeJson::Nonlinear { q },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub network: String,
    pub verdict: String,
    pub mode: ModeJson,
    pub enumerated: u64,
    pub elapsed_ms: f64,
    /// Where the witness was written, if it was.
    pub witness: Option<String>,
}

pub fn report_to_json(net: &Network, report: &SearchReport, witness_path: Option<&str>) -> String {
    pretty(&ReportJson {
        network: net.name().to_string(),
        verdict: report.verdict.label().to_string(),
        mode: report.mode.into(),
        enumerated: report.enumerated,
        elapsed_ms: report.elapsed.as_secs_f64() * 1e3,
        witness: witness_path.map(str::to_string),
    })
}

/// The witness of a solvable report in its JSON encoding.
pub fn witness_to_json(verdict: &Verdict) -> Option<String> {
    match verdict {
        Verdict::Solvable(Witness::Linear(c)) => Some(code_to_json(c)),
        Verdict::Solvable(Witness::Nonlinear(c)) => Some(nonlinear_code_to_json(c)),
        _ => None,
    }
}
