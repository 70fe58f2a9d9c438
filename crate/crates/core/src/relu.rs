//! Explicit feed-forward ReLU networks and the compilers that build score
//! networks out of piecewise-linear pieces, hypercube gadgets and circuits.
//!
//! A network is a chain of sparse affine layers. Every unit carries its own
//! activation, either ReLU or the identity, so linear skip paths do not have
//! to be simulated with `ReLU(x) − ReLU(−x)` pairs.

use crate::circuit::{BooleanCircuit, GateKind};
use crate::error::{ensure_dim, invalid, Error, Result};
use crate::fmt::g17;
use crate::instance::InstanceParams;
use crate::piecewise::{build_score_approx, ApproxParams, PiecewiseLinear};
use crate::scores::{two_point_score, DiscreteGaussianSpec, ScoreProvider};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;

/// Tolerance used when collapsing collinear knots before compilation.
pub const SIMPLIFY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub weights: Vec<(usize, f64)>,
    pub bias: f64,
    pub act: Activation,
}

impl Unit {
    #[inline]
    fn eval(&self, input: &[f64]) -> f64 {
        let v = self.bias + self.weights.iter().map(|&(c, w)| w * input[c]).sum::<f64>();
        match self.act {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub units: Vec<Unit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReluNetwork {
    input_dim: usize,
    layers: Vec<Layer>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamReport {
    pub param_count: usize,
    pub max_abs_weight: f64,
    pub depth: usize,
}

impl ReluNetwork {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("layers", "a network needs at least one layer"));
        }
        let mut width = input_dim;
        for layer in &layers {
            ensure_dim(width, layer.in_dim)?;
            for u in &layer.units {
                if u.weights.iter().any(|&(c, w)| c >= width || !w.is_finite()) || !u.bias.is_finite() {
                    return Err(invalid("weights", "column out of range or non-finite weight"));
                }
            }
            width = layer.units.len();
        }
        Ok(Self { input_dim, layers })
    }

    /// One identity layer.
    pub fn identity(n: usize) -> Self {
        let units = (0..n)
            .map(|i| Unit {
                weights: vec![(i, 1.0)],
                bias: 0.0,
                act: Activation::Identity,
            })
            .collect();
        Self {
            input_dim: n,
            layers: vec![Layer { in_dim: n, units }],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().units.len()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.input_dim, x.len())?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            next.clear();
            next.extend(layer.units.iter().map(|u| u.eval(&cur)));
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Convenience for scalar networks.
    pub fn eval1(&self, x: f64) -> f64 {
        self.eval(&[x]).expect("scalar network")[0]
    }

    pub fn report(&self) -> ParamReport {
        let mut count = 0;
        let mut max_w: f64 = 0.0;
        for layer in &self.layers {
            for u in &layer.units {
                count += u.weights.len() + 1;
                max_w = u.weights.iter().fold(max_w.max(u.bias.abs()), |m, &(_, w)| m.max(w.abs()));
            }
        }
        ParamReport {
            param_count: count,
            max_abs_weight: max_w,
            depth: self.depth(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "relunet v1").unwrap();
        writeln!(s, "input_dim {}", self.input_dim).unwrap();
        writeln!(s, "depth {}", self.depth()).unwrap();
        for layer in &self.layers {
            writeln!(s, "layer {} {}", layer.in_dim, layer.units.len()).unwrap();
            for u in &layer.units {
                s.push(match u.act {
                    Activation::Relu => 'R',
                    Activation::Identity => 'I',
                });
                write!(s, " {}", g17(u.bias)).unwrap();
                for &(c, w) in &u.weights {
                    write!(s, " {c}:{}", g17(w)).unwrap();
                }
                s.push('\n');
            }
        }
        s.push_str("end\n");
        s
    }

    /// Parses [`ReluNetwork::to_text`] output starting at `lines`; returns
    /// the network and the number of lines consumed.
    fn parse_lines(lines: &[&str], offset: usize) -> Result<(Self, usize)> {
        let err = |i: usize, msg: String| Error::Parse { line: offset + i + 1, msg };
        let mut i = 0;
        let next = |i: &mut usize| -> Result<(usize, Vec<&str>)> {
            while *i < lines.len() && is_blank(lines[*i]) {
                *i += 1;
            }
            if *i >= lines.len() {
                return Err(err(*i, "unexpected end of network".into()));
            }
            let at = *i;
            *i += 1;
            Ok((at, lines[at].split_whitespace().collect()))
        };
        let (at, t) = next(&mut i)?;
        if t != ["relunet", "v1"] {
            return Err(err(at, "expected `relunet v1`".into()));
        }
        let field = |name: &str, i: &mut usize| -> Result<usize> {
            let (at, t) = next(i)?;
            if t.len() != 2 || t[0] != name {
                return Err(err(at, format!("expected `{name} <n>`")));
            }
            t[1].parse().map_err(|e| err(at, format!("{name}: {e}")))
        };
        let input_dim = field("input_dim", &mut i)?;
        let depth = field("depth", &mut i)?;
        let mut layers = Vec::with_capacity(depth);
        for _ in 0..depth {
            let (at, t) = next(&mut i)?;
            if t.len() != 3 || t[0] != "layer" {
                return Err(err(at, "expected `layer <in> <out>`".into()));
            }
            let in_dim: usize = t[1].parse().map_err(|e| err(at, format!("{e}")))?;
            let out: usize = t[2].parse().map_err(|e| err(at, format!("{e}")))?;
            let mut units = Vec::with_capacity(out);
            for _ in 0..out {
                let (at, t) = next(&mut i)?;
                if t.len() < 2 {
                    return Err(err(at, "unit needs an activation and a bias".into()));
                }
                let act = match t[0] {
                    "R" => Activation::Relu,
                    "I" => Activation::Identity,
                    other => return Err(err(at, format!("unknown activation `{other}`"))),
                };
                let bias: f64 = t[1].parse().map_err(|e| err(at, format!("bias: {e}")))?;
                let weights = t[2..]
                    .iter()
                    .map(|tok| {
                        let (c, w) = tok.split_once(':').ok_or_else(|| err(at, format!("bad weight `{tok}`")))?;
                        let c: usize = c.parse().map_err(|e| err(at, format!("column: {e}")))?;
                        let w: f64 = w.parse().map_err(|e| err(at, format!("weight: {e}")))?;
                        Ok((c, w))
                    })
                    .collect::<Result<Vec<_>>>()?;
                units.push(Unit { weights, bias, act });
            }
            layers.push(Layer { in_dim, units });
        }
        let (at, t) = next(&mut i)?;
        if t != ["end"] {
            return Err(err(at, "expected `end`".into()));
        }
        Ok((Self::new(input_dim, layers)?, i))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        Ok(Self::parse_lines(&lines, 0)?.0)
    }
}

/// Empty or `#` comment line.
fn is_blank(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

/// Forward evaluation.
pub fn eval_net(net: &ReluNetwork, x: &[f64]) -> Result<Vec<f64>> {
    net.eval(x)
}

pub fn report(net: &ReluNetwork) -> ParamReport {
    net.report()
}

/// Handle to a value inside a [`NetBuilder`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Value(usize);

#[derive(Debug, Clone)]
struct Node {
    level: usize,
    terms: Vec<(usize, f64)>,
    bias: f64,
    act: Activation,
}

/// Assembles a layered network from a DAG of units.
///
/// A unit lands one layer above its deepest input; shallower inputs are
/// forwarded with identity units (shared between consumers). Unused units
/// are dropped by [`NetBuilder::finish`].
#[derive(Debug, Clone)]
pub struct NetBuilder {
    input_dim: usize,
    nodes: Vec<Node>,
    carries: HashMap<(usize, usize), usize>,
}

impl NetBuilder {
    pub fn new(input_dim: usize) -> Self {
        let nodes = (0..input_dim)
            .map(|_| Node {
                level: 0,
                terms: Vec::new(),
                bias: 0.0,
                act: Activation::Identity,
            })
            .collect();
        Self {
            input_dim,
            nodes,
            carries: HashMap::new(),
        }
    }

    pub fn input(&self, i: usize) -> Value {
        assert!(i < self.input_dim, "input index out of range");
        Value(i)
    }

    pub fn inputs(&self) -> Vec<Value> {
        (0..self.input_dim).map(Value).collect()
    }

    pub fn level(&self, v: Value) -> usize {
        self.nodes[v.0].level
    }

    fn carry(&mut self, node: usize, level: usize) -> usize {
        let own = self.nodes[node].level;
        debug_assert!(level >= own);
        if level == own {
            return node;
        }
        if let Some(&c) = self.carries.get(&(node, level)) {
            return c;
        }
        let below = self.carry(node, level - 1);
        self.nodes.push(Node {
            level,
            terms: vec![(below, 1.0)],
            bias: 0.0,
            act: Activation::Identity,
        });
        let id = self.nodes.len() - 1;
        self.carries.insert((node, level), id);
        id
    }

    /// `act(bias + Σ w·v)`.
    pub fn unit(&mut self, terms: &[(Value, f64)], bias: f64, act: Activation) -> Value {
        let top = terms.iter().map(|(v, _)| self.nodes[v.0].level).max().unwrap_or(0);
        let level = top + 1;
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for &(v, w) in terms {
            if w == 0.0 {
                continue;
            }
            let src = self.carry(v.0, top);
            match merged.iter_mut().find(|(s, _)| *s == src) {
                Some(slot) => slot.1 += w,
                None => merged.push((src, w)),
            }
        }
        self.nodes.push(Node {
            level,
            terms: merged,
            bias,
            act,
        });
        Value(self.nodes.len() - 1)
    }

    pub fn relu(&mut self, terms: &[(Value, f64)], bias: f64) -> Value {
        self.unit(terms, bias, Activation::Relu)
    }

    pub fn linear(&mut self, terms: &[(Value, f64)], bias: f64) -> Value {
        self.unit(terms, bias, Activation::Identity)
    }

    /// Inlines `net` applied to `inputs`.
    pub fn embed(&mut self, net: &ReluNetwork, inputs: &[Value]) -> Result<Vec<Value>> {
        ensure_dim(net.input_dim(), inputs.len())?;
        let mut cur = inputs.to_vec();
        for layer in net.layers() {
            let next: Vec<Value> = layer
                .units
                .iter()
                .map(|u| {
                    let terms: Vec<(Value, f64)> = u.weights.iter().map(|&(c, w)| (cur[c], w)).collect();
                    self.unit(&terms, u.bias, u.act)
                })
                .collect();
            cur = next;
        }
        Ok(cur)
    }

    pub fn finish(mut self, outputs: &[Value]) -> Result<ReluNetwork> {
        if outputs.is_empty() {
            return Err(invalid("outputs", "network needs at least one output"));
        }
        let mut depth = outputs.iter().map(|v| self.nodes[v.0].level).max().unwrap();
        let mut outs: Vec<usize> = outputs.iter().map(|v| v.0).collect();
        if depth == 0 {
            depth = 1;
        }
        // Outputs become rows of the last layer, so bring their inputs to
        // depth − 1 and copy their definitions there.
        let mut rows = Vec::with_capacity(outs.len());
        for o in outs.iter_mut() {
            let node = self.nodes[*o].clone();
            let (terms, bias, act) = if node.level == depth {
                (node.terms, node.bias, node.act)
            } else {
                let src = self.carry(*o, depth - 1);
                (vec![(src, 1.0)], 0.0, Activation::Identity)
            };
            rows.push((terms, bias, act));
        }
        // Reachability from the final rows.
        let mut live = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = rows.iter().flat_map(|(t, _, _)| t.iter().map(|&(s, _)| s)).collect();
        while let Some(n) = stack.pop() {
            if live[n] {
                continue;
            }
            live[n] = true;
            stack.extend(self.nodes[n].terms.iter().map(|&(s, _)| s));
        }
        let mut index = vec![usize::MAX; self.nodes.len()];
        let mut per_level: Vec<Vec<usize>> = vec![Vec::new(); depth];
        for i in 0..self.input_dim {
            index[i] = i;
        }
        per_level[0] = (0..self.input_dim).collect();
        for (n, node) in self.nodes.iter().enumerate().skip(self.input_dim) {
            if live[n] && node.level < depth {
                index[n] = per_level[node.level].len();
                per_level[node.level].push(n);
            }
        }
        let mut layers = Vec::with_capacity(depth);
        for level in 1..depth {
            let units = per_level[level]
                .iter()
                .map(|&n| {
                    let node = &self.nodes[n];
                    Unit {
                        weights: node.terms.iter().map(|&(s, w)| (index[s], w)).collect(),
                        bias: node.bias,
                        act: node.act,
                    }
                })
                .collect();
            layers.push(Layer {
                in_dim: per_level[level - 1].len(),
                units,
            });
        }
        let units = rows
            .into_iter()
            .map(|(terms, bias, act)| Unit {
                weights: terms.iter().map(|&(s, w)| (index[s], w)).collect(),
                bias,
                act,
            })
            .collect();
        layers.push(Layer {
            in_dim: per_level[depth - 1].len(),
            units,
        });
        ReluNetwork::new(self.input_dim, layers)
    }
}

/// One hidden layer computing `a₁x + b₁ + Σ Δa_i·ReLU(x − γ_i)`.
///
/// Hidden unit 0 is the linear part; unit `i` is `ReLU(x − γ_i)` and its
/// slope change sits in the output layer.
pub fn compile_piecewise(l: &PiecewiseLinear) -> ReluNetwork {
    let slopes = l.slopes();
    let knots = l.knots();
    let a1 = slopes[0];
    let b1 = l.values()[0] - a1 * knots[0];
    let mut hidden = vec![Unit {
        weights: vec![(0, a1)],
        bias: b1,
        act: Activation::Identity,
    }];
    let mut out = vec![(0usize, 1.0)];
    for (i, &g) in knots.iter().enumerate() {
        let da = slopes[i + 1] - slopes[i];
        if da == 0.0 {
            continue;
        }
        hidden.push(Unit {
            weights: vec![(0, 1.0)],
            bias: -g,
            act: Activation::Relu,
        });
        out.push((hidden.len() - 1, da));
    }
    let width = hidden.len();
    ReluNetwork::new(
        1,
        vec![
            Layer { in_dim: 1, units: hidden },
            Layer {
                in_dim: width,
                units: vec![Unit {
                    weights: out,
                    bias: 0.0,
                    act: Activation::Identity,
                }],
            },
        ],
    )
    .expect("piecewise network is well formed")
}

/// Largest weight the piecewise construction may use.
pub fn piecewise_weight_bound(l: &PiecewiseLinear) -> f64 {
    let slopes = l.slopes();
    let knots = l.knots();
    let a1 = slopes[0];
    let b1 = l.values()[0] - a1 * knots[0];
    let max_slope = slopes.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let max_knot = knots.iter().fold(0.0f64, |m, k| m.max(k.abs()));
    (2.0 * max_slope).max(max_knot).max(a1.abs()).max(b1.abs()).max(1.0)
}

/// Block-diagonal stacking: output block `i` is `nets[i]` on input block `i`.
pub fn compose_coordinatewise(nets: &[ReluNetwork]) -> Result<ReluNetwork> {
    if nets.is_empty() {
        return Err(invalid("nets", "need at least one network"));
    }
    let total: usize = nets.iter().map(ReluNetwork::input_dim).sum();
    let mut b = NetBuilder::new(total);
    let mut outputs = Vec::new();
    let mut offset = 0;
    for net in nets {
        let ins: Vec<Value> = (offset..offset + net.input_dim()).map(|i| b.input(i)).collect();
        outputs.extend(b.embed(net, &ins)?);
        offset += net.input_dim();
    }
    b.finish(&outputs)
}

/// Adds `clamp(x_i/α, −1, 1) = ReLU(x_i/α + 1) − ReLU(x_i/α − 1) − 1` units.
pub fn vertex_identifier_into(b: &mut NetBuilder, xs: &[Value], alpha: f64) -> Vec<Value> {
    xs.iter()
        .map(|&x| {
            let hi = b.relu(&[(x, 1.0 / alpha)], 1.0);
            let lo = b.relu(&[(x, 1.0 / alpha)], -1.0);
            b.linear(&[(hi, 1.0), (lo, -1.0)], -1.0)
        })
        .collect()
}

/// `x ↦ clamp(x/α, −1, 1)` coordinatewise; equals `sign(x)` once `|x| > α`.
pub fn vertex_identifier(d: usize, alpha: f64) -> Result<ReluNetwork> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", "must lie in (0, 1)"));
    }
    let mut b = NetBuilder::new(d);
    let xs = b.inputs();
    let out = vertex_identifier_into(&mut b, &xs, alpha);
    b.finish(&out)
}

/// `ReLU(x − 2T + 2Ty) − ReLU(−x − 2T + 2Ty)`: passes `x` when `y = 1` and
/// gives 0 when `y = −1`, for `|x| ≤ T`. `y` is given as an affine
/// expression `sign·y + 0` so negated controls need no extra unit.
pub fn switch_into(b: &mut NetBuilder, x: Value, y: Value, y_sign: f64, t: f64) -> Value {
    let pos = b.relu(&[(x, 1.0), (y, 2.0 * t * y_sign)], -2.0 * t);
    let neg = b.relu(&[(x, -1.0), (y, 2.0 * t * y_sign)], -2.0 * t);
    b.linear(&[(pos, 1.0), (neg, -1.0)], 0.0)
}

/// Inputs `(x_1..x_k, y_1..y_k)`, outputs `x_i` gated by `y_i`.
pub fn switch_net(dims: usize, t: f64) -> Result<ReluNetwork> {
    if !(t > 0.0) {
        return Err(invalid("T", "must be positive"));
    }
    let mut b = NetBuilder::new(2 * dims);
    let out: Vec<Value> = (0..dims)
        .map(|i| {
            let (x, y) = (b.input(i), b.input(dims + i));
            switch_into(&mut b, x, y, 1.0, t)
        })
        .collect();
    b.finish(&out)
}

/// Gate gadgets over `{0,1}` (1 = true).
pub fn and_gadget(b: &mut NetBuilder, ys: &[Value]) -> Value {
    let terms: Vec<(Value, f64)> = ys.iter().map(|&y| (y, 1.0)).collect();
    b.relu(&terms, 1.0 - ys.len() as f64)
}

pub fn or_gadget(b: &mut NetBuilder, ys: &[Value]) -> Value {
    let terms: Vec<(Value, f64)> = ys.iter().map(|&y| (y, -1.0)).collect();
    let inner = b.relu(&terms, 1.0);
    b.relu(&[(inner, -1.0)], 1.0)
}

pub fn not_gadget(b: &mut NetBuilder, y: Value) -> Value {
    b.relu(&[(y, -1.0)], 1.0)
}

/// Circuit gadgets on `±1` inputs. Returns the `{0,1}` output wires (1 =
/// true, i.e. the ±1 value `1 − 2b`).
pub fn circuit_into(b: &mut NetBuilder, c: &BooleanCircuit, inputs: &[Value]) -> Result<Vec<Value>> {
    ensure_dim(c.input_len(), inputs.len())?;
    let mut wires: Vec<Value> = inputs.iter().map(|&v| b.relu(&[(v, -0.5)], 0.5)).collect();
    for g in c.gates() {
        let ys: Vec<Value> = g.inputs.iter().map(|&w| wires[w]).collect();
        let v = match g.kind {
            GateKind::And => and_gadget(b, &ys),
            GateKind::Or => or_gadget(b, &ys),
            GateKind::Not => not_gadget(b, ys[0]),
        };
        wires.push(v);
    }
    Ok(c.outputs().iter().map(|&w| wires[w]).collect())
}

/// `{±1}^n → {±1}^m` network agreeing with the circuit on every input.
pub fn circuit_to_relu(c: &BooleanCircuit) -> Result<ReluNetwork> {
    let mut b = NetBuilder::new(c.input_len());
    let ins = b.inputs();
    let bits = circuit_into(&mut b, c, &ins)?;
    let outs: Vec<Value> = bits.iter().map(|&w| b.linear(&[(w, -2.0)], 1.0)).collect();
    b.finish(&outs)
}

/// A compiled score network together with the pieces it was built from.
#[derive(Debug, Clone)]
pub struct AssembledNet {
    pub net: ReluNetwork,
    pub report: ParamReport,
    pub sigma: f64,
    /// Switch bound; zero when no switches are used.
    pub switch_t: f64,
}

fn compiled_approx<F: Fn(f64) -> f64>(score: F, kappa: f64, sigma: f64, m2: f64) -> Result<(PiecewiseLinear, ReluNetwork)> {
    let ap = ApproxParams::new(kappa, sigma, m2, 0.0)?;
    let l = build_score_approx(score, &ap)?.simplify(SIMPLIFY_TOL);
    let net = compile_piecewise(&l);
    Ok((l, net))
}

/// Network for the small-σ regime.
///
/// Head coordinate `i` evaluates a compiled Gaussian score at
/// `x_i − R·r_i`, with `r` the vertex identified from the head. Each tail
/// coordinate evaluates both phase networks and lets the circuit output
/// `f(r)_j` switch one of them on.
pub fn assemble_score_net_small_sigma(
    params: &InstanceParams,
    f: &BooleanCircuit,
    sigma: f64,
    kappa: f64,
) -> Result<AssembledNet> {
    params.validate()?;
    ensure_dim(params.d, f.input_len())?;
    ensure_dim(params.d_prime, f.output_len())?;
    if !(sigma > 0.0) {
        return Err(invalid("sigma", "must be positive"));
    }
    let v = 1.0 + sigma * sigma;
    let (_, head_net) = compiled_approx(|u| -u / v, kappa, sigma, v.sqrt())?;
    let dim = params.dim();
    let mut b = NetBuilder::new(dim);
    let xs = b.inputs();
    let alpha = 0.5;
    let r = vertex_identifier_into(&mut b, &xs[..params.d], alpha);
    let mut outputs = Vec::with_capacity(dim);
    for i in 0..params.d {
        let u = b.linear(&[(xs[i], 1.0), (r[i], -params.r)], 0.0);
        outputs.extend(b.embed(&head_net, &[u])?);
    }
    let mut switch_t = 0.0;
    if params.d_prime > 0 {
        let even = DiscreteGaussianSpec::for_bit(1, params.eps, sigma)?;
        let odd = DiscreteGaussianSpec::for_bit(-1, params.eps, sigma)?;
        let m2 = even.variance().max(odd.variance()).sqrt();
        let (l_even, net_even) = compiled_approx(|x| even.score(x).unwrap(), kappa, sigma, m2)?;
        let (l_odd, net_odd) = compiled_approx(|x| odd.score(x).unwrap(), kappa, sigma, m2)?;
        switch_t = l_even.max_abs_value().max(l_odd.max_abs_value()).ceil() + 1.0;
        let bits = circuit_into(&mut b, f, &r)?;
        for j in 0..params.d_prime {
            let x = xs[params.d + j];
            let he = b.embed(&net_even, &[x])?[0];
            let ho = b.embed(&net_odd, &[x])?[0];
            // z_j = 1 − 2·bit_j; the even net is selected by z_j = +1.
            let z = b.linear(&[(bits[j], -2.0)], 1.0);
            let se = switch_into(&mut b, he, z, 1.0, switch_t);
            let so = switch_into(&mut b, ho, z, -1.0, switch_t);
            outputs.push(b.linear(&[(se, 1.0), (so, 1.0)], 0.0));
        }
    }
    let net = b.finish(&outputs)?;
    Ok(AssembledNet {
        report: net.report(),
        net,
        sigma,
        switch_t,
    })
}

/// Product network for the large-σ regime: compiled two-point mixture
/// scores on the head, the exact linear map `−x/(1+σ²)` on the tail.
pub fn assemble_score_net_large_sigma(params: &InstanceParams, sigma: f64, kappa: f64) -> Result<AssembledNet> {
    params.validate()?;
    if !(sigma > 0.0) {
        return Err(invalid("sigma", "must be positive"));
    }
    let v = 1.0 + sigma * sigma;
    let r = params.r;
    let mut nets = Vec::with_capacity(params.dim());
    if params.d > 0 {
        let (_, head) = compiled_approx(|x| two_point_score(r, v, x), kappa, sigma, (r * r + v).sqrt())?;
        nets.extend(std::iter::repeat_n(head, params.d));
    }
    let tail = compile_piecewise(&PiecewiseLinear::linear(-1.0 / v, 0.0));
    nets.extend(std::iter::repeat_n(tail, params.d_prime));
    let net = compose_coordinatewise(&nets)?;
    Ok(AssembledNet {
        report: net.report(),
        net,
        sigma,
        switch_t: 0.0,
    })
}

/// Networks indexed by σ; a query uses the entry nearest in `log σ`.
#[derive(Debug, Clone)]
pub struct ReluBank {
    entries: Vec<(f64, ReluNetwork)>,
}

impl ReluBank {
    pub fn new(mut entries: Vec<(f64, ReluNetwork)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("entries", "bank is empty"));
        }
        let dim = entries[0].1.input_dim();
        for (s, n) in &entries {
            if !(*s > 0.0) {
                return Err(invalid("sigma", "bank entries need positive sigma"));
            }
            ensure_dim(dim, n.input_dim())?;
            ensure_dim(dim, n.output_dim())?;
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(f64, ReluNetwork)] {
        &self.entries
    }

    pub fn nearest(&self, sigma: f64) -> &ReluNetwork {
        let ls = sigma.ln();
        &self
            .entries
            .iter()
            .min_by(|a, b| (a.0.ln() - ls).abs().total_cmp(&(b.0.ln() - ls).abs()))
            .unwrap()
            .1
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("relubank v1\n");
        for (sigma, net) in &self.entries {
            writeln!(s, "sigma {}", g17(*sigma)).unwrap();
            s.push_str(&net.to_text());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        let mut i = 0;
        let skip_blank = |i: &mut usize| {
            while *i < lines.len() && is_blank(lines[*i]) {
                *i += 1;
            }
        };
        skip_blank(&mut i);
        if i >= lines.len() || lines[i].trim() != "relubank v1" {
            // A bare network is a one-entry bank valid at every σ.
            let net = ReluNetwork::from_text(text)?;
            return Self::new(vec![(1.0, net)]);
        }
        i += 1;
        let mut entries = Vec::new();
        loop {
            skip_blank(&mut i);
            if i >= lines.len() {
                break;
            }
            let t: Vec<&str> = lines[i].split_whitespace().collect();
            if t.len() != 2 || t[0] != "sigma" {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "expected `sigma <value>`".into(),
                });
            }
            let sigma: f64 = t[1].parse().map_err(|e| Error::Parse {
                line: i + 1,
                msg: format!("sigma: {e}"),
            })?;
            i += 1;
            let (net, used) = ReluNetwork::parse_lines(&lines[i..], i)?;
            i += used;
            entries.push((sigma, net));
        }
        Self::new(entries)
    }
}

impl ScoreProvider for ReluBank {
    fn dim(&self) -> usize {
        self.entries[0].1.input_dim()
    }
    fn label(&self) -> String {
        format!("relu-bank[{}]", self.entries.len())
    }
    fn score(&self, sigma: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.nearest(sigma).eval(x)
    }
}
