//! Exact evaluation of finite-memory strategies.
//!
//! Composing a model with a transducer gives a finite Markov chain on
//! (state, memory) pairs with rewards r(k, m) = g(k, act(m)). On a finite
//! chain the running average reward converges almost surely, so the lim inf
//! payoff of the strategy is plain linear algebra: find the recurrent
//! classes (closed strongly connected components), solve each one's
//! stationary distribution for its gain, and mix gains by absorption
//! probabilities for the transient part.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::belief::GainPartition;
use crate::linalg::{self, LinalgError};
use crate::model::{Belief, Pomdp};
use crate::strategy::FiniteMemoryStrategy;
use crate::tolerances;

#[derive(Debug, thiserror::Error)]
pub enum ChainError {
    #[error("strategy incompatible with model: {0}")]
    Incompatible(String),
    #[error("stationary solve failed for class {class}: {source}")]
    SingularClass {
        class: usize,
        source: LinalgError,
    },
    #[error("absorption solve failed: {0}")]
    SingularTransient(LinalgError),
    #[error("per-state gain of `{state}` is not almost-surely constant")]
    NonConstantGain { state: String },
    #[error("{0}")]
    BadInput(String),
}

/// The Markov chain induced by a model and a transducer.
///
/// Nodes are (state, memory) pairs. [`product_chain`] materializes all
/// `|K| * |M|` of them; [`product_chain_reachable`] keeps only nodes
/// reachable from given starts, which is what enumeration loops want.
#[derive(Debug, Clone)]
pub struct ProductChain {
    pub n_states: usize,
    pub n_memories: usize,
    /// Local node index -> (state, memory).
    pub nodes: Vec<(usize, usize)>,
    /// `k * n_memories + m` -> local node index, or `usize::MAX`.
    pub lookup: Vec<usize>,
    /// Sparse outgoing rows, targets ascending, probabilities summed over
    /// the signals that lead to the same memory update.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rewards: Vec<f64>,
}

impl ProductChain {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Local index of the (state, memory) pair, if materialized.
    pub fn node(&self, k: usize, m: usize) -> Option<usize> {
        let id = self.lookup[k * self.n_memories + m];
        (id != usize::MAX).then_some(id)
    }
}

fn check_compatible(pomdp: &Pomdp, sigma: &FiniteMemoryStrategy) -> Result<(), ChainError> {
    if sigma.n_actions != pomdp.n_actions() || sigma.n_signals != pomdp.n_signals() {
        return Err(ChainError::Incompatible(format!(
            "strategy speaks {} actions / {} signals, model has {} / {}",
            sigma.n_actions,
            sigma.n_signals,
            pomdp.n_actions(),
            pomdp.n_signals()
        )));
    }
    Ok(())
}

/// Outgoing row of the product chain at (k, m), as (target global id, prob).
fn node_row(pomdp: &Pomdp, sigma: &FiniteMemoryStrategy, k: usize, m: usize) -> Vec<(usize, f64)> {
    let n_mem = sigma.memory_states.len();
    let a = sigma.act[m];
    let kernel_row = pomdp.kernel_row(k, a);
    let mut dense = vec![0.0; pomdp.n_states() * n_mem];
    for to in 0..pomdp.n_states() {
        for s in 0..pomdp.n_signals() {
            let p = kernel_row[pomdp.ks(to, s)];
            if p != 0.0 {
                dense[to * n_mem + sigma.update_of(m, a, s)] += p;
            }
        }
    }
    dense
        .into_iter()
        .enumerate()
        .filter(|(_, p)| *p != 0.0)
        .collect()
}

/// Builds the full product chain on all `|K| * |M|` nodes.
pub fn product_chain(
    pomdp: &Pomdp,
    sigma: &FiniteMemoryStrategy,
) -> Result<ProductChain, ChainError> {
    check_compatible(pomdp, sigma)?;
    let n_mem = sigma.memory_states.len();
    let n = pomdp.n_states() * n_mem;
    let mut nodes = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    let mut rewards = Vec::with_capacity(n);
    for k in 0..pomdp.n_states() {
        for m in 0..n_mem {
            nodes.push((k, m));
            rows.push(node_row(pomdp, sigma, k, m));
            rewards.push(pomdp.reward(k, sigma.act[m]));
        }
    }
    Ok(ProductChain {
        n_states: pomdp.n_states(),
        n_memories: n_mem,
        nodes,
        lookup: (0..n).collect(),
        rows,
        rewards,
    })
}

/// Builds only the part of the product chain reachable from `starts`.
/// Node order is breadth-first discovery order, starts first.
pub fn product_chain_reachable(
    pomdp: &Pomdp,
    sigma: &FiniteMemoryStrategy,
    starts: &[(usize, usize)],
) -> Result<ProductChain, ChainError> {
    check_compatible(pomdp, sigma)?;
    let n_mem = sigma.memory_states.len();
    let mut lookup = vec![usize::MAX; pomdp.n_states() * n_mem];
    let mut nodes = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    for &(k, m) in starts {
        let g = k * n_mem + m;
        if lookup[g] == usize::MAX {
            lookup[g] = nodes.len();
            nodes.push((k, m));
            queue.push_back((k, m));
        }
    }
    let mut global_rows = Vec::new();
    while let Some((k, m)) = queue.pop_front() {
        let row = node_row(pomdp, sigma, k, m);
        for &(target, _) in &row {
            if lookup[target] == usize::MAX {
                lookup[target] = nodes.len();
                let pair = (target / n_mem, target % n_mem);
                nodes.push(pair);
                queue.push_back(pair);
            }
        }
        global_rows.push(row);
    }
    let rows = global_rows
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|(target, p)| (lookup[target], p))
                .collect()
        })
        .collect();
    let rewards = nodes
        .iter()
        .map(|&(k, m)| pomdp.reward(k, sigma.act[m]))
        .collect();
    Ok(ProductChain {
        n_states: pomdp.n_states(),
        n_memories: n_mem,
        nodes,
        lookup,
        rows,
        rewards,
    })
}

/// A closed strongly connected component with its stationary distribution
/// (aligned with `nodes`) and gain.
#[derive(Debug, Clone)]
pub struct RecurrentClass {
    pub nodes: Vec<usize>,
    pub stationary: Vec<f64>,
    pub gain: f64,
}

/// Full decomposition of a product chain.
#[derive(Debug, Clone)]
pub struct ChainAnalysis {
    pub classes: Vec<RecurrentClass>,
    /// `absorption[node][class]`: probability of ending in that class.
    pub absorption: Vec<Vec<f64>>,
    /// Expected long-run average reward from each node.
    pub node_gains: Vec<f64>,
}

/// Strongly connected components over edges above the structural cutoff,
/// iterative so deep chains cannot overflow the stack.
fn strongly_connected_components(rows: &[Vec<(usize, f64)>]) -> Vec<Vec<usize>> {
    let n = rows.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut components = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        call.push((root, 0));
        while let Some(&(v, edge)) = call.last() {
            let successors = &rows[v];
            let mut advanced = false;
            for (offset, &(w, p)) in successors.iter().enumerate().skip(edge) {
                call.last_mut().unwrap().1 = offset + 1;
                if p <= tolerances::STRUCTURAL {
                    continue;
                }
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                    advanced = true;
                    break;
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            }
            if advanced {
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut component = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    component.push(w);
                    if w == v {
                        break;
                    }
                }
                component.sort_unstable();
                components.push(component);
            }
        }
    }
    components.sort_by_key(|c| c[0]);
    components
}

/// Decomposes the chain: recurrent classes, their stationary gains, and
/// per-node absorption probabilities and gains.
pub fn analyze(chain: &ProductChain) -> Result<ChainAnalysis, ChainError> {
    let n = chain.len();
    let components = strongly_connected_components(&chain.rows);

    let mut component_of = vec![usize::MAX; n];
    for (c, comp) in components.iter().enumerate() {
        for &v in comp {
            component_of[v] = c;
        }
    }
    let closed: Vec<bool> = components
        .iter()
        .enumerate()
        .map(|(c, comp)| {
            comp.iter().all(|&v| {
                chain.rows[v]
                    .iter()
                    .all(|&(w, p)| p <= tolerances::STRUCTURAL || component_of[w] == c)
            })
        })
        .collect();

    let mut classes = Vec::new();
    let mut class_of = vec![usize::MAX; n];
    for (c, comp) in components.iter().enumerate() {
        if !closed[c] {
            continue;
        }
        let class_index = classes.len();
        for &v in comp {
            class_of[v] = class_index;
        }
        let size = comp.len();
        let local: std::collections::HashMap<usize, usize> =
            comp.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        // Stationary distribution: pi (P - I) = 0 with the first balance
        // equation replaced by normalization, solved as a transposed system.
        let mut matrix = vec![0.0; size * size];
        for (j, &v) in comp.iter().enumerate() {
            matrix[j * size + j] -= 1.0;
            // Column j of the transposed system is row v of P.
            for &(w, p) in &chain.rows[v] {
                if let Some(&i) = local.get(&w) {
                    matrix[i * size + j] += p;
                }
            }
        }
        for j in 0..size {
            matrix[j] = 1.0;
        }
        let mut rhs = vec![0.0; size];
        rhs[0] = 1.0;
        let stationary = linalg::solve(&matrix, size, &rhs).map_err(|source| {
            ChainError::SingularClass {
                class: class_index,
                source,
            }
        })?;
        let gain = comp
            .iter()
            .zip(&stationary)
            .map(|(&v, pi)| pi * chain.rewards[v])
            .sum();
        classes.push(RecurrentClass {
            nodes: comp.clone(),
            stationary,
            gain,
        });
    }

    let transient: Vec<usize> = (0..n).filter(|&v| class_of[v] == usize::MAX).collect();
    let transient_local: std::collections::HashMap<usize, usize> = transient
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i))
        .collect();

    let mut absorption = vec![vec![0.0; classes.len()]; n];
    for v in 0..n {
        if class_of[v] != usize::MAX {
            absorption[v][class_of[v]] = 1.0;
        }
    }
    if !transient.is_empty() {
        let t = transient.len();
        let mut matrix = vec![0.0; t * t];
        for (i, &v) in transient.iter().enumerate() {
            matrix[i * t + i] = 1.0;
            for &(w, p) in &chain.rows[v] {
                if let Some(&j) = transient_local.get(&w) {
                    matrix[i * t + j] -= p;
                }
            }
        }
        let factors = linalg::lu_factor(&matrix, t).map_err(ChainError::SingularTransient)?;
        for c in 0..classes.len() {
            let rhs: Vec<f64> = transient
                .iter()
                .map(|&v| {
                    chain.rows[v]
                        .iter()
                        .filter(|&&(w, _)| class_of[w] == c)
                        .map(|&(_, p)| p)
                        .sum()
                })
                .collect();
            let column = factors.solve(&rhs).map_err(ChainError::SingularTransient)?;
            for (i, &v) in transient.iter().enumerate() {
                absorption[v][c] = column[i];
            }
        }
    }

    let node_gains = absorption
        .iter()
        .map(|probs| {
            probs
                .iter()
                .zip(&classes)
                .map(|(p, class)| p * class.gain)
                .sum()
        })
        .collect();

    Ok(ChainAnalysis {
        classes,
        absorption,
        node_gains,
    })
}

/// A recurrent class in (state, memory) terms, for reports.
#[derive(Debug, Clone)]
pub struct ClassSummary {
    pub nodes: Vec<(usize, usize)>,
    pub stationary: Vec<f64>,
    pub gain: f64,
}

/// Exact payoff of a strategy: per-state gains, their mix under the
/// initial belief, and whether each state's gain is almost-surely constant
/// (all recurrent classes reachable from its start node agree).
#[derive(Debug, Clone)]
pub struct EvaluationResult {
    pub per_state_gains: Vec<f64>,
    pub overall_gain: f64,
    pub constant_gain: Vec<bool>,
    pub classes: Vec<ClassSummary>,
}

fn reachable_class_gains(chain: &ProductChain, class_of: &[usize], start: usize) -> Vec<usize> {
    let mut seen = vec![false; chain.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut classes = Vec::new();
    while let Some(v) = stack.pop() {
        if class_of[v] != usize::MAX && !classes.contains(&class_of[v]) {
            classes.push(class_of[v]);
        }
        for &(w, p) in &chain.rows[v] {
            if p > tolerances::STRUCTURAL && !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    classes.sort_unstable();
    classes
}

/// Evaluates `sigma` from `p1`, exactly.
pub fn evaluate(
    pomdp: &Pomdp,
    p1: &Belief,
    sigma: &FiniteMemoryStrategy,
) -> Result<EvaluationResult, ChainError> {
    if p1.weights.len() != pomdp.n_states() {
        return Err(ChainError::BadInput(format!(
            "belief over {} states, model has {}",
            p1.weights.len(),
            pomdp.n_states()
        )));
    }
    let chain = product_chain(pomdp, sigma)?;
    let analysis = analyze(&chain)?;

    let mut class_of = vec![usize::MAX; chain.len()];
    for (c, class) in analysis.classes.iter().enumerate() {
        for &v in &class.nodes {
            class_of[v] = c;
        }
    }

    let m0 = sigma.initial;
    let mut per_state_gains = Vec::with_capacity(pomdp.n_states());
    let mut constant_gain = Vec::with_capacity(pomdp.n_states());
    let mut reachable_union: Vec<usize> = Vec::new();
    for k in 0..pomdp.n_states() {
        let start = chain.node(k, m0).expect("full chain has all nodes");
        per_state_gains.push(analysis.node_gains[start]);
        let reached = reachable_class_gains(&chain, &class_of, start);
        let gains: Vec<f64> = reached.iter().map(|&c| analysis.classes[c].gain).collect();
        let constant = match gains.split_first() {
            None => true,
            Some((first, rest)) => rest
                .iter()
                .all(|g| (g - first).abs() <= tolerances::GAIN_GROUPING),
        };
        constant_gain.push(constant);
        if p1.weights[k] > tolerances::STRUCTURAL {
            for c in reached {
                if !reachable_union.contains(&c) {
                    reachable_union.push(c);
                }
            }
        }
    }
    reachable_union.sort_unstable();

    let overall_gain = p1
        .weights
        .iter()
        .zip(&per_state_gains)
        .map(|(w, g)| w * g)
        .sum();
    let classes = reachable_union
        .into_iter()
        .map(|c| {
            let class = &analysis.classes[c];
            ClassSummary {
                nodes: class.nodes.iter().map(|&v| chain.nodes[v]).collect(),
                stationary: class.stationary.clone(),
                gain: class.gain,
            }
        })
        .collect();

    Ok(EvaluationResult {
        per_state_gains,
        overall_gain,
        constant_gain,
        classes,
    })
}

/// Overall gain only, computed on the reachable part of the chain. Same
/// number as [`evaluate`]'s `overall_gain`, but cheap enough for million
/// candidate enumeration loops.
pub fn gain(pomdp: &Pomdp, p1: &Belief, sigma: &FiniteMemoryStrategy) -> Result<f64, ChainError> {
    let starts: Vec<(usize, usize)> = p1
        .support()
        .into_iter()
        .map(|k| (k, sigma.initial))
        .collect();
    if starts.is_empty() {
        return Err(ChainError::BadInput("belief has empty support".into()));
    }
    let chain = product_chain_reachable(pomdp, sigma, &starts)?;
    let analysis = analyze(&chain)?;
    Ok(p1
        .support()
        .into_iter()
        .map(|k| {
            let node = chain.node(k, sigma.initial).expect("start is materialized");
            p1.weights[k] * analysis.node_gains[node]
        })
        .sum())
}

/// True when every state in `support` has an almost-surely constant gain.
pub fn has_constant_gain(result: &EvaluationResult, support: &[usize]) -> bool {
    support.iter().all(|&k| result.constant_gain[k])
}

/// Groups `support` into blocks of equal per-state gain, ordered by
/// descending gain. Requires constant gains on the support.
pub fn gain_partition(
    pomdp: &Pomdp,
    result: &EvaluationResult,
    support: &[usize],
) -> Result<GainPartition, ChainError> {
    if support.is_empty() {
        return Err(ChainError::BadInput("empty support".into()));
    }
    for &k in support {
        if !result.constant_gain[k] {
            return Err(ChainError::NonConstantGain {
                state: pomdp.states[k].clone(),
            });
        }
    }
    let mut order: Vec<usize> = support.to_vec();
    order.sort_by(|&x, &y| {
        result.per_state_gains[y]
            .partial_cmp(&result.per_state_gains[x])
            .expect("gains are finite")
            .then(x.cmp(&y))
    });
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut gains: Vec<f64> = Vec::new();
    for k in order {
        let g = result.per_state_gains[k];
        match gains.last() {
            Some(last) if (last - g).abs() <= tolerances::GAIN_GROUPING => {
                blocks.last_mut().expect("block exists").push(k);
            }
            _ => {
                blocks.push(vec![k]);
                gains.push(g);
            }
        }
    }
    for block in &mut blocks {
        block.sort_unstable();
    }
    GainPartition::new(blocks, gains).map_err(|e| ChainError::BadInput(e.to_string()))
}

/// One forward step of the node distribution.
pub fn step_distribution(chain: &ProductChain, dist: &[f64]) -> Vec<f64> {
    let mut next = vec![0.0; chain.len()];
    for (v, mass) in dist.iter().enumerate() {
        if *mass != 0.0 {
            for &(w, p) in &chain.rows[v] {
                next[w] += mass * p;
            }
        }
    }
    next
}

/// One backward accumulation step: expected reward now plus expected
/// continuation, per node. Iterating from zero gives expected n-stage sums.
pub fn accumulate_expected_rewards(chain: &ProductChain, continuation: &[f64]) -> Vec<f64> {
    (0..chain.len())
        .map(|v| {
            chain.rewards[v]
                + chain.rows[v]
                    .iter()
                    .map(|&(w, p)| p * continuation[w])
                    .sum::<f64>()
        })
        .collect()
}

/// Expected n-stage average reward from a distribution over chain nodes.
pub fn expected_average(chain: &ProductChain, start: &[f64], n: usize) -> f64 {
    assert!(n > 0, "horizon must be positive");
    let mut dist = start.to_vec();
    let mut total = 0.0;
    for stage in 0..n {
        total += dist
            .iter()
            .zip(&chain.rewards)
            .map(|(d, r)| d * r)
            .sum::<f64>();
        if stage + 1 < n {
            dist = step_distribution(chain, &dist);
        }
    }
    total / n as f64
}

/// Expected n-stage average of `sigma` started from a distribution over
/// (state, memory) nodes of the full product chain.
pub fn finite_horizon_expectation(
    pomdp: &Pomdp,
    start: &[f64],
    sigma: &FiniteMemoryStrategy,
    n: usize,
) -> Result<f64, ChainError> {
    let chain = product_chain(pomdp, sigma)?;
    if start.len() != chain.len() {
        return Err(ChainError::BadInput(format!(
            "start distribution over {} nodes, chain has {}",
            start.len(),
            chain.len()
        )));
    }
    Ok(expected_average(&chain, start, n))
}

/// Start distribution on the full product chain putting `p1` on memory
/// `sigma.initial`.
pub fn initial_node_distribution(
    pomdp: &Pomdp,
    sigma: &FiniteMemoryStrategy,
    p1: &Belief,
) -> Vec<f64> {
    let n_mem = sigma.memory_states.len();
    let mut dist = vec![0.0; pomdp.n_states() * n_mem];
    for (k, w) in p1.weights.iter().enumerate() {
        dist[k * n_mem + sigma.initial] = *w;
    }
    dist
}

/// One simulated stage.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// Stage number, starting at 1.
    pub m: usize,
    pub k: usize,
    pub mem: usize,
    pub a: usize,
    pub s: usize,
    pub g: f64,
}

fn sample_index(weights: impl Iterator<Item = (usize, f64)>, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights {
        if w > 0.0 {
            last_positive = i;
            acc += w;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

fn simulate_inner(
    pomdp: &Pomdp,
    p1: &Belief,
    sigma: &FiniteMemoryStrategy,
    horizon: usize,
    seed: u64,
    record: bool,
) -> Result<(Vec<TraceRow>, f64), ChainError> {
    check_compatible(pomdp, sigma)?;
    if p1.weights.len() != pomdp.n_states() {
        return Err(ChainError::BadInput("belief length mismatch".into()));
    }
    if horizon == 0 {
        return Err(ChainError::BadInput("horizon must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut k = sample_index(
        p1.weights.iter().copied().enumerate(),
        rng.gen::<f64>(),
    );
    let mut m = sigma.initial;
    let mut trace = Vec::with_capacity(if record { horizon } else { 0 });
    let mut total = 0.0;
    for stage in 1..=horizon {
        let a = sigma.act[m];
        let g = pomdp.reward(k, a);
        total += g;
        let row = pomdp.kernel_row(k, a);
        let pick = sample_index(row.iter().copied().enumerate(), rng.gen::<f64>());
        let (to, s) = (pick / pomdp.n_signals(), pick % pomdp.n_signals());
        if record {
            trace.push(TraceRow {
                m: stage,
                k,
                mem: m,
                a,
                s,
                g,
            });
        }
        k = to;
        m = sigma.update_of(m, a, s);
    }
    Ok((trace, total / horizon as f64))
}

/// Simulates one play, returning the per-stage trace and the empirical
/// average reward. Fully reproducible: a fixed 64-bit seed drives a
/// portable stream cipher generator, and rows are sampled by inverse CDF
/// in declaration order.
pub fn simulate(
    pomdp: &Pomdp,
    p1: &Belief,
    sigma: &FiniteMemoryStrategy,
    horizon: usize,
    seed: u64,
) -> Result<(Vec<TraceRow>, f64), ChainError> {
    simulate_inner(pomdp, p1, sigma, horizon, seed, true)
}

/// Empirical average only; skips trace recording for batch use.
pub fn simulate_average(
    pomdp: &Pomdp,
    p1: &Belief,
    sigma: &FiniteMemoryStrategy,
    horizon: usize,
    seed: u64,
) -> Result<f64, ChainError> {
    simulate_inner(pomdp, p1, sigma, horizon, seed, false).map(|(_, avg)| avg)
}

/// Renders a trace as JSON lines, one record per stage, names resolved.
pub fn trace_to_jsonl(pomdp: &Pomdp, sigma: &FiniteMemoryStrategy, trace: &[TraceRow]) -> String {
    let mut out = String::new();
    for row in trace {
        let line = serde_json::json!({
            "m": row.m,
            "k": pomdp.states[row.k],
            "mem": sigma.memory_states[row.mem],
            "a": pomdp.actions[row.a],
            "s": pomdp.signals[row.s],
            "g": row.g,
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}
