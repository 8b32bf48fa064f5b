//! Expression evaluation and exact program interpretation.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::One;

use super::{FiniteDistribution, Modulus, SemanticsError, Value};
use crate::dsl::ast::{BaseType, BinOp};
use crate::dsl::{CExpr, FlatProgram, FlatRhs};

/// Total map from input names to values.
pub type Assignment = BTreeMap<String, Value>;

/// Default bound on the number of random-sample combinations enumerated per
/// input assignment.
pub const DEFAULT_CAP: u64 = 1 << 24;

/// Evaluates `e` with variables looked up in `env`.
pub fn eval_expr(e: &CExpr, env: &HashMap<String, Value>, q: Modulus) -> Result<Value, SemanticsError> {
    let lookup = |v: &str| {
        env.get(v)
            .cloned()
            .ok_or_else(|| SemanticsError::Unbound(v.to_string()))
    };
    eval_with(e, &lookup, q)
}

fn eval_with<F>(e: &CExpr, lookup: &F, q: Modulus) -> Result<Value, SemanticsError>
where
    F: Fn(&str) -> Result<Value, SemanticsError>,
{
    Ok(match e {
        CExpr::Var(v) => lookup(v)?,
        CExpr::Const(c) => Value::Ring(q.reduce(*c)),
        CExpr::Index(i) => Value::Index(*i),
        CExpr::Bool(b) => Value::Bool(*b),
        CExpr::Tuple(items) => Value::Tuple(
            items
                .iter()
                .map(|i| eval_with(i, lookup, q))
                .collect::<Result<_, _>>()?,
        ),
        CExpr::Proj(k, a) => proj(*k, eval_with(a, lookup, q)?)?,
        CExpr::Neg(a) => neg(eval_with(a, lookup, q)?, q)?,
        CExpr::Bin(op, a, b) => bin(*op, eval_with(a, lookup, q)?, eval_with(b, lookup, q)?, q)?,
        CExpr::Ite(c, a, b) => match eval_with(c, lookup, q)? {
            Value::Bool(true) => eval_with(a, lookup, q)?,
            Value::Bool(false) => eval_with(b, lookup, q)?,
            v => return Err(type_error(format!("condition evaluated to {v}"))),
        },
    })
}

fn type_error(msg: String) -> SemanticsError {
    SemanticsError::Type(msg)
}

fn proj(k: usize, v: Value) -> Result<Value, SemanticsError> {
    match v {
        Value::Tuple(mut items) if k < items.len() => Ok(items.swap_remove(k)),
        v => Err(type_error(format!("proj_{} of {v}", k + 1))),
    }
}

fn neg(v: Value, q: Modulus) -> Result<Value, SemanticsError> {
    match v {
        Value::Ring(a) => Ok(Value::Ring(q.neg(a))),
        Value::Index(i) => Ok(Value::Index(-i)),
        v => Err(type_error(format!("negation of {v}"))),
    }
}

fn bin(op: BinOp, a: Value, b: Value, q: Modulus) -> Result<Value, SemanticsError> {
    Ok(match (op, a, b) {
        (BinOp::Add, Value::Ring(x), Value::Ring(y)) => Value::Ring(q.add(x, y)),
        (BinOp::Sub, Value::Ring(x), Value::Ring(y)) => Value::Ring(q.sub(x, y)),
        (BinOp::Mul, Value::Ring(x), Value::Ring(y)) => Value::Ring(q.mul(x, y)),
        (BinOp::Add, Value::Index(x), Value::Index(y)) => Value::Index(x + y),
        (BinOp::Sub, Value::Index(x), Value::Index(y)) => Value::Index(x - y),
        (BinOp::Mul, Value::Index(x), Value::Index(y)) => Value::Index(x * y),
        (BinOp::And, Value::Bool(x), Value::Bool(y)) => Value::Bool(x && y),
        (BinOp::Or, Value::Bool(x), Value::Bool(y)) => Value::Bool(x || y),
        (BinOp::Eq, x, y) => Value::Bool(x == y),
        (BinOp::Ne, x, y) => Value::Bool(x != y),
        (op, x, y) => return Err(type_error(format!("{x} {} {y}", op.symbol()))),
    })
}

#[derive(Debug, Clone)]
enum Op {
    Slot(usize),
    Lit(Value),
    Ring(u64),
    Tuple(Vec<Op>),
    Proj(usize, Box<Op>),
    Neg(Box<Op>),
    Bin(BinOp, Box<Op>, Box<Op>),
    Ite(Box<Op>, Box<Op>, Box<Op>),
}

#[derive(Debug, Clone)]
enum Step {
    Sample(usize),
    Eval(Op),
}

/// A program compiled to slot-indexed steps for repeated evaluation.
/// Slots hold the inputs (declaration order) followed by the bindings.
#[derive(Debug, Clone)]
pub struct Compiled {
    q: Modulus,
    n_inputs: usize,
    n_samples: usize,
    steps: Vec<Step>,
    outputs: Vec<usize>,
    slot_names: Vec<String>,
}

impl Compiled {
    pub fn new(p: &FlatProgram, q: Modulus) -> Self {
        let mut slots: HashMap<String, usize> = HashMap::new();
        let mut slot_names = Vec::new();
        for i in &p.inputs {
            slots.insert(i.name.clone(), slot_names.len());
            slot_names.push(i.name.clone());
        }
        let mut steps = Vec::new();
        let mut n_samples = 0;
        for b in &p.body {
            let step = match &b.rhs {
                FlatRhs::Unif => {
                    n_samples += 1;
                    Step::Sample(n_samples - 1)
                }
                FlatRhs::Expr(e) => Step::Eval(compile(e, &slots)),
            };
            steps.push(step);
            slots.insert(b.name.clone(), slot_names.len());
            slot_names.push(b.name.clone());
        }
        let outputs = p.outputs.iter().map(|o| slots[&o.name]).collect();
        Compiled {
            q,
            n_inputs: p.inputs.len(),
            n_samples,
            steps,
            outputs,
            slot_names,
        }
    }

    pub fn modulus(&self) -> Modulus {
        self.q
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn slot_names(&self) -> &[String] {
        &self.slot_names
    }

    /// Number of sample combinations, if it fits in `u64`.
    pub fn sample_space(&self) -> Option<u64> {
        (self.q.get() as u64).checked_pow(self.n_samples as u32)
    }

    pub fn check_cap(&self, cap: u64) -> Result<u64, SemanticsError> {
        match self.sample_space() {
            Some(n) if n <= cap => Ok(n),
            n => Err(SemanticsError::CapExceeded {
                states: n.map_or_else(|| format!("{}^{}", self.q.get(), self.n_samples), |n| n.to_string()),
                cap,
            }),
        }
    }

    /// Evaluates every slot for one input vector and one sample vector.
    pub fn run_into(&self, inputs: &[Value], samples: &[u32], slots: &mut Vec<Value>) {
        slots.clear();
        slots.extend_from_slice(&inputs[..self.n_inputs]);
        for step in &self.steps {
            let v = match step {
                Step::Sample(k) => Value::Ring(samples[*k]),
                Step::Eval(op) => self.eval(op, slots),
            };
            slots.push(v);
        }
    }

    /// Slot index of each output position.
    pub fn output_slots(&self) -> &[usize] {
        &self.outputs
    }

    /// Calls `f` with the slot values of every sample combination, in
    /// lexicographic order of the sample vector.
    pub fn for_each_sample<F: FnMut(&[Value])>(&self, inputs: &[Value], mut f: F) {
        let mut samples = vec![0u32; self.n_samples];
        let mut slots = Vec::with_capacity(self.slot_names.len());
        loop {
            self.run_into(inputs, &samples, &mut slots);
            f(&slots);
            if !odometer(&mut samples, self.q.get()) {
                break;
            }
        }
    }

    fn eval(&self, op: &Op, slots: &[Value]) -> Value {
        let q = self.q;
        match op {
            Op::Slot(i) => slots[*i].clone(),
            Op::Lit(v) => v.clone(),
            Op::Ring(c) => Value::Ring(q.reduce(*c)),
            Op::Tuple(items) => Value::Tuple(items.iter().map(|i| self.eval(i, slots)).collect()),
            Op::Proj(k, a) => proj(*k, self.eval(a, slots)).expect("well typed"),
            Op::Neg(a) => neg(self.eval(a, slots), q).expect("well typed"),
            Op::Bin(op, a, b) => {
                bin(*op, self.eval(a, slots), self.eval(b, slots), q).expect("well typed")
            }
            Op::Ite(c, a, b) => match self.eval(c, slots) {
                Value::Bool(true) => self.eval(a, slots),
                _ => self.eval(b, slots),
            },
        }
    }
}

fn compile(e: &CExpr, slots: &HashMap<String, usize>) -> Op {
    match e {
        CExpr::Var(v) => Op::Slot(slots[v]),
        CExpr::Const(c) => Op::Ring(*c),
        CExpr::Index(i) => Op::Lit(Value::Index(*i)),
        CExpr::Bool(b) => Op::Lit(Value::Bool(*b)),
        CExpr::Tuple(items) => Op::Tuple(items.iter().map(|i| compile(i, slots)).collect()),
        CExpr::Proj(k, a) => Op::Proj(*k, Box::new(compile(a, slots))),
        CExpr::Neg(a) => Op::Neg(Box::new(compile(a, slots))),
        CExpr::Bin(op, a, b) => Op::Bin(*op, Box::new(compile(a, slots)), Box::new(compile(b, slots))),
        CExpr::Ite(c, a, b) => Op::Ite(
            Box::new(compile(c, slots)),
            Box::new(compile(a, slots)),
            Box::new(compile(b, slots)),
        ),
    }
}

/// Advances `digits` as a base-`base` counter, last digit fastest.
/// Returns `false` after the last combination.
fn odometer(digits: &mut [u32], base: u32) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// Values an input of type `ty` can take.
pub fn domain(ty: BaseType, q: Modulus) -> Vec<Value> {
    match ty {
        BaseType::Ring => (0..q.get()).map(Value::Ring).collect(),
        BaseType::Bool => vec![Value::Bool(false), Value::Bool(true)],
    }
}

/// All input vectors of `p`, in declaration order of the inputs, with the
/// first-declared input varying fastest.
pub fn enumerate_assignments(p: &FlatProgram, q: Modulus) -> Vec<Vec<Value>> {
    let domains: Vec<Vec<Value>> = p.inputs.iter().map(|i| domain(i.ty, q)).collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; domains.len()];
    loop {
        out.push(idx.iter().zip(&domains).map(|(&k, d)| d[k].clone()).collect());
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return out;
            }
            idx[pos] += 1;
            if idx[pos] < domains[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Orders an assignment map by the program's input declaration.
pub fn assignment_vector(p: &FlatProgram, a: &Assignment, q: Modulus) -> Result<Vec<Value>, SemanticsError> {
    p.inputs
        .iter()
        .map(|i| {
            let v = a
                .get(&i.name)
                .ok_or_else(|| SemanticsError::MissingInput(i.name.clone()))?;
            let ok = match (i.ty, v) {
                (BaseType::Ring, Value::Ring(r)) => *r < q.get(),
                (BaseType::Bool, Value::Bool(_)) => true,
                _ => false,
            };
            if ok {
                Ok(v.clone())
            } else {
                Err(SemanticsError::Type(format!("input `{}` cannot take value {v}", i.name)))
            }
        })
        .collect()
}

pub fn assignment_map(p: &FlatProgram, values: &[Value]) -> Assignment {
    p.inputs
        .iter()
        .zip(values)
        .map(|(i, v)| (i.name.clone(), v.clone()))
        .collect()
}

/// Exact output distribution of `p` on the input assignment `a`.
pub fn interpret(p: &FlatProgram, a: &Assignment, q: Modulus, cap: u64) -> Result<FiniteDistribution, SemanticsError> {
    let values = assignment_vector(p, a, q)?;
    interpret_vector(p, &values, q, cap)
}

pub fn interpret_vector(
    p: &FlatProgram,
    inputs: &[Value],
    q: Modulus,
    cap: u64,
) -> Result<FiniteDistribution, SemanticsError> {
    let c = Compiled::new(p, q);
    c.check_cap(cap)?;
    let mut counts: BTreeMap<Vec<Value>, u64> = BTreeMap::new();
    c.for_each_sample(inputs, |slots| {
        let row: Vec<Value> = c.output_slots().iter().map(|&i| slots[i].clone()).collect();
        *counts.entry(row).or_insert(0) += 1;
    });
    Ok(FiniteDistribution::from_weights(
        counts.into_iter().map(|(v, n)| (v, BigInt::from(n))),
    )
    .unwrap_or_else(|| FiniteDistribution::point(Vec::new())))
}

/// Probability of each sample vector: `1 / q^k`.
pub fn sample_weight(c: &Compiled) -> num_rational::BigRational {
    num_rational::BigRational::new(
        BigInt::one(),
        BigInt::from(c.modulus().get()).pow(c.n_samples() as u32),
    )
}
