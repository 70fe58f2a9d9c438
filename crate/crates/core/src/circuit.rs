//! Boolean circuits over AND/OR/NOT gates.
//!
//! Wires `0..inputs` are the circuit inputs; gate `k` drives wire
//! `inputs + k` and may only read lower-numbered wires, so gate order is a
//! topological order. On the ±1 side, `-1` encodes *true* and `+1` *false*.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::{self, Write as _};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    And,
    Or,
    Not,
}

impl GateKind {
    fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Not => "NOT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub inputs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BooleanCircuit {
    inputs: usize,
    gates: Vec<Gate>,
    outputs: Vec<usize>,
}

impl BooleanCircuit {
    pub fn new(inputs: usize, gates: Vec<Gate>, outputs: Vec<usize>) -> Result<Self> {
        for (k, g) in gates.iter().enumerate() {
            let wire = inputs + k;
            match (g.kind, g.inputs.len()) {
                (GateKind::Not, 1) => {}
                (GateKind::Not, n) => {
                    return Err(Error::Circuit(format!("NOT gate {k} has fan-in {n}")))
                }
                (_, 0) => return Err(Error::Circuit(format!("gate {k} has no inputs"))),
                _ => {}
            }
            if let Some(&bad) = g.inputs.iter().find(|&&w| w >= wire) {
                return Err(Error::Circuit(format!(
                    "gate {k} reads wire {bad}, which is not earlier than its own wire {wire}"
                )));
            }
        }
        let wires = inputs + gates.len();
        if let Some(&bad) = outputs.iter().find(|&&w| w >= wires) {
            return Err(Error::Circuit(format!("output refers to missing wire {bad}")));
        }
        Ok(Self {
            inputs,
            gates,
            outputs,
        })
    }

    /// Outputs copy the inputs.
    pub fn identity(n: usize) -> Self {
        Self {
            inputs: n,
            gates: Vec::new(),
            outputs: (0..n).collect(),
        }
    }

    pub fn input_len(&self) -> usize {
        self.inputs
    }

    pub fn output_len(&self) -> usize {
        self.outputs.len()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn wire_count(&self) -> usize {
        self.inputs + self.gates.len()
    }

    /// Appends a gate and returns its wire.
    pub fn push_gate(&mut self, kind: GateKind, inputs: Vec<usize>) -> Result<usize> {
        let wire = self.wire_count();
        let mut gates = std::mem::take(&mut self.gates);
        gates.push(Gate { kind, inputs });
        *self = Self::new(self.inputs, gates, std::mem::take(&mut self.outputs))?;
        Ok(wire)
    }

    pub fn set_outputs(&mut self, outputs: Vec<usize>) -> Result<()> {
        *self = Self::new(self.inputs, std::mem::take(&mut self.gates), outputs)?;
        Ok(())
    }

    /// Evaluates every wire.
    pub fn eval_wires(&self, input: &[bool]) -> Vec<bool> {
        assert_eq!(input.len(), self.inputs, "circuit input length");
        let mut wires = Vec::with_capacity(self.wire_count());
        wires.extend_from_slice(input);
        for g in &self.gates {
            let v = match g.kind {
                GateKind::And => g.inputs.iter().all(|&w| wires[w]),
                GateKind::Or => g.inputs.iter().any(|&w| wires[w]),
                GateKind::Not => !wires[g.inputs[0]],
            };
            wires.push(v);
        }
        wires
    }

    pub fn eval(&self, input: &[bool]) -> Vec<bool> {
        let wires = self.eval_wires(input);
        self.outputs.iter().map(|&w| wires[w]).collect()
    }

    /// Longest gate chain from any input to any output.
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.wire_count()];
        for (k, g) in self.gates.iter().enumerate() {
            depth[self.inputs + k] = 1 + g.inputs.iter().map(|&w| depth[w]).max().unwrap_or(0);
        }
        self.outputs.iter().map(|&w| depth[w]).max().unwrap_or(0)
    }

    /// Set of inputs each output depends on.
    pub fn output_supports(&self) -> Vec<Vec<usize>> {
        let mut support: Vec<Vec<usize>> = (0..self.inputs).map(|i| vec![i]).collect();
        for g in &self.gates {
            let mut s: Vec<usize> = g.inputs.iter().flat_map(|&w| support[w].clone()).collect();
            s.sort_unstable();
            s.dedup();
            support.push(s);
        }
        self.outputs.iter().map(|&w| support[w].clone()).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "inputs {}", self.inputs).unwrap();
        for g in &self.gates {
            write!(s, "{}", g.kind.name()).unwrap();
            for w in &g.inputs {
                write!(s, " {w}").unwrap();
            }
            s.push('\n');
        }
        s.push_str("outputs");
        for w in &self.outputs {
            write!(s, " {w}").unwrap();
        }
        s.push('\n');
        s
    }

    /// Parses the gate-list format written by [`BooleanCircuit::to_text`].
    /// Blank lines and `#` comments are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut inputs = None;
        let mut gates = Vec::new();
        let mut outputs = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut tokens = body.split_whitespace();
            let head = tokens.next().unwrap();
            let nums: std::result::Result<Vec<usize>, _> = tokens.map(str::parse).collect();
            let nums = nums.map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
            let kind = match head {
                "inputs" => {
                    if nums.len() != 1 {
                        return Err(Error::Parse {
                            line,
                            msg: "`inputs` takes one count".into(),
                        });
                    }
                    inputs = Some(nums[0]);
                    continue;
                }
                "outputs" => {
                    outputs = Some(nums);
                    continue;
                }
                "AND" => GateKind::And,
                "OR" => GateKind::Or,
                "NOT" => GateKind::Not,
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown directive `{other}`"),
                    })
                }
            };
            if inputs.is_none() {
                return Err(Error::Parse {
                    line,
                    msg: "gate before `inputs`".into(),
                });
            }
            gates.push(Gate { kind, inputs: nums });
        }
        let inputs = inputs.ok_or(Error::Parse {
            line: 0,
            msg: "missing `inputs`".into(),
        })?;
        let outputs = outputs.ok_or(Error::Parse {
            line: 0,
            msg: "missing `outputs`".into(),
        })?;
        Self::new(inputs, gates, outputs)
    }
}

impl fmt::Display for BooleanCircuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
