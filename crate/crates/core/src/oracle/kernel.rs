//! Tabulated kernel of an exposed program: every output for every input
//! assignment and every random-sample vector.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use num_bigint::BigInt;

use super::OracleError;
use crate::dsl::{expose_internals, FlatProgram};
use crate::semantics::{enumerate_assignments, Assignment, Compiled, FiniteDistribution, Modulus, Value};

type CacheKey = (Vec<usize>, Vec<usize>);

pub struct Kernel {
    program: FlatProgram,
    q: Modulus,
    assignments: Vec<Vec<Value>>,
    samples: usize,
    width: usize,
    /// `codes[(a * samples + s) * width + o]`
    codes: Vec<u32>,
    decode: Vec<Vec<Value>>,
    cache: Mutex<HashMap<CacheKey, Option<(usize, usize)>>>,
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Kernel")
            .field("program", &self.program.name)
            .field("q", &self.q.get())
            .field("assignments", &self.assignments.len())
            .field("samples", &self.samples)
            .field("outputs", &self.width)
            .finish()
    }
}

impl Kernel {
    /// Tabulates `p` with its internals exposed. `cap` bounds the number of
    /// (assignment, sample) pairs.
    pub fn build(p: &FlatProgram, q: Modulus, cap: u64) -> Result<Self, OracleError> {
        let program = expose_internals(p);
        let compiled = Compiled::new(&program, q);
        let samples = compiled.check_cap(cap)?;
        let n_assign = (q.get() as u128).pow(
            program
                .inputs
                .iter()
                .filter(|i| i.ty == crate::dsl::BaseType::Ring)
                .count() as u32,
        ) << program
            .inputs
            .iter()
            .filter(|i| i.ty == crate::dsl::BaseType::Bool)
            .count();
        let states = n_assign.saturating_mul(samples as u128);
        if states > cap as u128 {
            return Err(OracleError::Cap {
                what: "input assignments times random samples".into(),
                size: states.to_string(),
                cap,
            });
        }
        let assignments = enumerate_assignments(&program, q);
        let width = program.outputs.len();
        let slots = compiled.output_slots().to_vec();
        let mut encode: Vec<HashMap<Value, u32>> = vec![HashMap::new(); width];
        let mut decode: Vec<Vec<Value>> = vec![Vec::new(); width];
        let mut codes = Vec::with_capacity(assignments.len() * samples as usize * width);
        for a in &assignments {
            compiled.for_each_sample(a, |vals| {
                for (o, &slot) in slots.iter().enumerate() {
                    let v = &vals[slot];
                    let code = match encode[o].get(v) {
                        Some(&c) => c,
                        None => {
                            let c = decode[o].len() as u32;
                            encode[o].insert(v.clone(), c);
                            decode[o].push(v.clone());
                            c
                        }
                    };
                    codes.push(code);
                }
            });
        }
        Ok(Kernel {
            program,
            q,
            assignments,
            samples: samples as usize,
            width,
            codes,
            decode,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// The exposed program the table was built from.
    pub fn program(&self) -> &FlatProgram {
        &self.program
    }

    pub fn modulus(&self) -> Modulus {
        self.q
    }

    pub fn assignments(&self) -> &[Vec<Value>] {
        &self.assignments
    }

    pub fn samples_per_assignment(&self) -> usize {
        self.samples
    }

    pub fn output_names(&self) -> Vec<&str> {
        self.program.output_names()
    }

    pub fn output_position(&self, name: &str) -> Option<usize> {
        self.program.outputs.iter().position(|o| o.name == name)
    }

    pub fn input_position(&self, name: &str) -> Option<usize> {
        self.program.inputs.iter().position(|i| i.name == name)
    }

    pub fn output_positions(&self, names: &[String]) -> Result<Vec<usize>, OracleError> {
        names
            .iter()
            .map(|n| {
                self.output_position(n)
                    .ok_or_else(|| OracleError::UnknownOutput(n.clone()))
            })
            .collect()
    }

    pub fn input_positions(&self, names: &[String]) -> Result<Vec<usize>, OracleError> {
        names
            .iter()
            .map(|n| {
                self.input_position(n)
                    .ok_or_else(|| OracleError::UnknownInput(n.clone()))
            })
            .collect()
    }

    pub fn assignment(&self, a: usize) -> Assignment {
        crate::semantics::assignment_map(&self.program, &self.assignments[a])
    }

    fn row(&self, a: usize, s: usize) -> &[u32] {
        let start = (a * self.samples + s) * self.width;
        &self.codes[start..start + self.width]
    }

    /// Sorted multiset of projected sample rows. Every sample has the same
    /// weight, so two assignments have equal `positions`-marginals exactly
    /// when their signatures are equal.
    pub fn signature(&self, a: usize, positions: &[usize]) -> Vec<u32> {
        let k = positions.len();
        if k == 0 {
            return Vec::new();
        }
        let mut rows: Vec<&[u32]> = Vec::new();
        let mut flat = Vec::with_capacity(self.samples * k);
        for s in 0..self.samples {
            let row = self.row(a, s);
            flat.extend(positions.iter().map(|&p| row[p]));
        }
        for chunk in flat.chunks(k) {
            rows.push(chunk);
        }
        rows.sort_unstable();
        rows.concat()
    }

    /// Exact marginal of the outputs at `positions` on assignment `a`.
    pub fn distribution(&self, a: usize, positions: &[usize]) -> FiniteDistribution {
        let mut counts: BTreeMap<Vec<Value>, u64> = BTreeMap::new();
        for s in 0..self.samples {
            let row = self.row(a, s);
            let key = positions
                .iter()
                .map(|&p| self.decode[p][row[p] as usize].clone())
                .collect();
            *counts.entry(key).or_insert(0) += 1;
        }
        FiniteDistribution::from_weights(counts.into_iter().map(|(k, n)| (k, BigInt::from(n))))
            .expect("at least one sample")
    }

    /// Joint distribution of (all inputs, outputs at `positions`) when the
    /// inputs are drawn uniformly.
    pub fn joint_with_uniform_inputs(&self, positions: &[usize]) -> FiniteDistribution {
        let mut counts: BTreeMap<Vec<Value>, u64> = BTreeMap::new();
        for (a, inputs) in self.assignments.iter().enumerate() {
            for s in 0..self.samples {
                let row = self.row(a, s);
                let mut key = inputs.clone();
                key.extend(positions.iter().map(|&p| self.decode[p][row[p] as usize].clone()));
                *counts.entry(key).or_insert(0) += 1;
            }
        }
        FiniteDistribution::from_weights(counts.into_iter().map(|(k, n)| (k, BigInt::from(n))))
            .expect("at least one sample")
    }

    /// First pair of assignments that agree on the inputs at `inputs` but
    /// have different marginals at `outputs`, scanning in enumeration order.
    pub(crate) fn distinguishing_pair(&self, inputs: &[usize], outputs: &[usize]) -> Option<(usize, usize)> {
        let mut key_i = inputs.to_vec();
        key_i.sort_unstable();
        let mut key_o = outputs.to_vec();
        key_o.sort_unstable();
        key_o.dedup();
        let key = (key_i, key_o);
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return *hit;
        }
        let (inputs, outputs) = (&key.0, &key.1);
        let mut groups: HashMap<Vec<&Value>, (usize, Vec<u32>)> = HashMap::new();
        let mut found = None;
        for a in 0..self.assignments.len() {
            let k: Vec<&Value> = inputs.iter().map(|&i| &self.assignments[a][i]).collect();
            let sig = self.signature(a, outputs);
            match groups.get(&k) {
                Some((rep, rep_sig)) => {
                    if *rep_sig != sig {
                        found = Some((*rep, a));
                        break;
                    }
                }
                None => {
                    groups.insert(k, (a, sig));
                }
            }
        }
        self.cache.lock().expect("cache lock").insert(key, found);
        found
    }
}
