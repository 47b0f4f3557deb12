//! Einsum-style tensor contractions and a reverse-mode tape over them.
//!
//! Binary contractions are lowered to batched matrix products
//! (transpose–transpose–GEMM–transpose). The tape records every contraction
//! so that the adjoint of a scalar functional with respect to any leaf can be
//! evaluated exactly; the adjoint of `C = α·einsum(A, B)` with respect to `A`
//! is again an einsum, `α·einsum(C̄, B)`, with the index strings permuted.

use std::borrow::Cow;

use ndarray::{linalg::general_mat_mul, Array2, ArrayD, ArrayViewD, Axis, Dimension, Ix2, Ix3, Ix4, Ix5, Ix6, IxDyn};

pub type Tensor = ArrayD<f64>;

#[derive(Debug, Clone, PartialEq)]
struct Spec {
    inputs: Vec<Vec<char>>,
    output: Vec<char>,
}

fn parse(spec: &str) -> Spec {
    let (lhs, rhs) = spec
        .split_once("->")
        .unwrap_or_else(|| panic!("einsum spec `{spec}` lacks `->`"));
    let inputs: Vec<Vec<char>> = lhs.split(',').map(|s| s.trim().chars().collect()).collect();
    let output: Vec<char> = rhs.trim().chars().collect();
    for labels in inputs.iter().chain(std::iter::once(&output)) {
        for (k, c) in labels.iter().enumerate() {
            assert!(
                !labels[k + 1..].contains(c),
                "einsum spec `{spec}`: repeated label `{c}` within one operand"
            );
        }
    }
    Spec { inputs, output }
}

fn pos(labels: &[char], c: char) -> Option<usize> {
    labels.iter().position(|&x| x == c)
}

fn permute(t: &Tensor, from: &[char], to: &[char]) -> Tensor {
    arranged(t, from, to).into_owned()
}

/// `t` with axes reordered from `from` to `to` in standard layout, borrowed
/// when no copy is needed.
fn arranged<'a>(t: &'a Tensor, from: &[char], to: &[char]) -> Cow<'a, Tensor> {
    let perm: Vec<usize> = to.iter().map(|&c| pos(from, c).expect("label")).collect();
    if perm.iter().enumerate().all(|(k, &p)| k == p) && t.is_standard_layout() {
        return Cow::Borrowed(t);
    }
    let v = t.view().permuted_axes(IxDyn(&perm));
    // static-rank views iterate far faster than IxDyn ones
    fn owned<D: Dimension>(v: ArrayViewD<'_, f64>) -> Tensor {
        v.into_dimensionality::<D>()
            .expect("rank")
            .as_standard_layout()
            .into_owned()
            .into_dyn()
    }
    Cow::Owned(match v.ndim() {
        2 => owned::<Ix2>(v),
        3 => owned::<Ix3>(v),
        4 => owned::<Ix4>(v),
        5 => owned::<Ix5>(v),
        6 => owned::<Ix6>(v),
        _ => v.as_standard_layout().into_owned(),
    })
}

fn unary(spec: &Spec, a: &Tensor) -> Tensor {
    let la = &spec.inputs[0];
    assert_eq!(la.len(), a.ndim(), "einsum operand rank mismatch");
    // sum out labels absent from the output
    let mut cur = a.clone();
    let mut labels = la.clone();
    let mut k = labels.len();
    while k > 0 {
        k -= 1;
        if pos(&spec.output, labels[k]).is_none() {
            cur = cur.sum_axis(Axis(k));
            labels.remove(k);
        }
    }
    assert_eq!(labels.len(), spec.output.len(), "unary einsum output label missing");
    permute(&cur, &labels, &spec.output)
}

/// Sums out labels present in one operand only and absent from the output.
fn reduce_private<'a>(t: &'a Tensor, own: &[char], other: &[char], out: &[char]) -> (Cow<'a, Tensor>, Vec<char>) {
    let mut cur = Cow::Borrowed(t);
    let mut labels = own.to_vec();
    let mut k = labels.len();
    while k > 0 {
        k -= 1;
        let c = labels[k];
        if pos(other, c).is_none() && pos(out, c).is_none() {
            cur = Cow::Owned(cur.sum_axis(Axis(k)));
            labels.remove(k);
        }
    }
    (cur, labels)
}

fn binary(spec: &Spec, a: &Tensor, b: &Tensor) -> Tensor {
    let (la, lb, lo) = (&spec.inputs[0], &spec.inputs[1], &spec.output);
    assert_eq!(la.len(), a.ndim(), "einsum lhs rank mismatch");
    assert_eq!(lb.len(), b.ndim(), "einsum rhs rank mismatch");

    let (a, la) = reduce_private(a, la, lb, lo);
    let (b, lb) = reduce_private(b, lb, &la, lo);

    let mut sizes: Vec<(char, usize)> = Vec::with_capacity(la.len() + lb.len());
    for (labels, t) in [(&la, &a), (&lb, &b)] {
        for (k, &c) in labels.iter().enumerate() {
            let d = t.shape()[k];
            match sizes.iter().find(|e| e.0 == c) {
                Some(&(_, prev)) => assert_eq!(prev, d, "einsum size mismatch for label `{c}`"),
                None => sizes.push((c, d)),
            }
        }
    }
    let dim = |c: char| sizes.iter().find(|e| e.0 == c).expect("label size").1;
    let batch: Vec<char> = la
        .iter()
        .copied()
        .filter(|&c| pos(&lb, c).is_some() && pos(lo, c).is_some())
        .collect();
    let contr: Vec<char> = la
        .iter()
        .copied()
        .filter(|&c| pos(&lb, c).is_some() && pos(lo, c).is_none())
        .collect();
    let free_a: Vec<char> = la.iter().copied().filter(|&c| pos(&lb, c).is_none()).collect();
    let free_b: Vec<char> = lb.iter().copied().filter(|&c| pos(&la, c).is_none()).collect();
    for &c in lo {
        assert!(
            pos(&la, c).is_some() || pos(&lb, c).is_some(),
            "einsum output label `{c}` not found in operands"
        );
    }
    let size = |labels: &[char]| labels.iter().map(|&c| dim(c)).product::<usize>();
    let (nb, nk, nfa, nfb) = (size(&batch), size(&contr), size(&free_a), size(&free_b));

    let order_a: Vec<char> = batch.iter().chain(&free_a).chain(&contr).copied().collect();
    let order_b: Vec<char> = batch.iter().chain(&contr).chain(&free_b).copied().collect();
    let pa = arranged(&a, &la, &order_a);
    let pb = arranged(&b, &lb, &order_b);
    let pa = pa.as_slice().expect("standard layout");
    let pb = pb.as_slice().expect("standard layout");

    let mut out = vec![0.0; nb * nfa * nfb];
    for k in 0..nb {
        let am = ndarray::ArrayView2::from_shape((nfa, nk), &pa[k * nfa * nk..(k + 1) * nfa * nk])
            .expect("shape");
        let bm = ndarray::ArrayView2::from_shape((nk, nfb), &pb[k * nk * nfb..(k + 1) * nk * nfb])
            .expect("shape");
        let mut cm = ndarray::ArrayViewMut2::from_shape(
            (nfa, nfb),
            &mut out[k * nfa * nfb..(k + 1) * nfa * nfb],
        )
        .expect("shape");
        general_mat_mul(1.0, &am, &bm, 0.0, &mut cm);
    }
    let res_labels: Vec<char> = batch.iter().chain(&free_a).chain(&free_b).copied().collect();
    let shape: Vec<usize> = res_labels.iter().map(|&c| dim(c)).collect();
    let res = Tensor::from_shape_vec(IxDyn(&shape), out).expect("shape");
    match arranged(&res, &res_labels, lo) {
        Cow::Borrowed(_) => res,
        Cow::Owned(p) => p,
    }
}

fn eval(spec: &Spec, ops: &[&Tensor]) -> Tensor {
    match ops.len() {
        1 => unary(spec, ops[0]),
        2 => binary(spec, ops[0], ops[1]),
        n => panic!("einsum supports one or two operands, got {n}"),
    }
}

/// `einsum("ijab,jb->ia", &[&t2, &t1])`; one or two operands, no repeated labels
/// within an operand.
pub fn einsum(spec: &str, ops: &[&Tensor]) -> Tensor {
    let s = parse(spec);
    assert_eq!(s.inputs.len(), ops.len(), "einsum operand count mismatch");
    eval(&s, ops)
}

pub fn to_dyn(a: Array2<f64>) -> Tensor {
    a.into_dyn()
}

pub fn to_2d(t: Tensor) -> Array2<f64> {
    t.into_dimensionality().expect("rank-2 tensor")
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Einsum { spec: Spec, args: Vec<Var>, alpha: f64 },
    Lin(Vec<(Var, f64)>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Records tensor expressions for reverse-mode differentiation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// `alpha · einsum(spec, args)`.
    pub fn ein(&mut self, spec: &str, args: &[Var], alpha: f64) -> Var {
        let s = parse(spec);
        assert_eq!(s.inputs.len(), args.len(), "einsum operand count mismatch");
        // every operand label must survive into the output or the partner,
        // otherwise the adjoint would need a broadcast
        for (k, labels) in s.inputs.iter().enumerate() {
            for &c in labels {
                let elsewhere = pos(&s.output, c).is_some()
                    || s
                        .inputs
                        .iter()
                        .enumerate()
                        .any(|(j, l)| j != k && pos(l, c).is_some());
                assert!(elsewhere, "taped einsum `{spec}`: label `{c}` is summed within one operand");
            }
        }
        let ops: Vec<&Tensor> = args.iter().map(|v| &self.nodes[v.0].value).collect();
        let mut value = eval(&s, &ops);
        if alpha != 1.0 {
            value *= alpha;
        }
        self.nodes.push(Node {
            value,
            op: Op::Einsum {
                spec: s,
                args: args.to_vec(),
                alpha,
            },
        });
        Var(self.nodes.len() - 1)
    }

    /// Linear combination `Σ c_k x_k` of equally shaped nodes.
    pub fn lin(&mut self, terms: &[(Var, f64)]) -> Var {
        let mut value = self.nodes[terms[0].0 .0].value.clone() * terms[0].1;
        for &(v, c) in &terms[1..] {
            value.scaled_add(c, &self.nodes[v.0].value);
        }
        self.nodes.push(Node {
            value,
            op: Op::Lin(terms.to_vec()),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.lin(&[(a, 1.0), (b, 1.0)])
    }

    /// Antisymmetrizer over two output positions: `x - x(swapped)`.
    pub fn antisym(&mut self, x: Var, labels: &str, swapped: &str) -> Var {
        let spec = format!("{labels}->{swapped}");
        let p = self.ein(&spec, &[x], 1.0);
        self.lin(&[(x, 1.0), (p, -1.0)])
    }

    /// Adjoints of every node given output cotangents.
    pub fn backward(&self, seeds: &[(Var, &Tensor)]) -> Gradients {
        let mut adj: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        let accumulate = |adj: &mut Vec<Option<Tensor>>, v: Var, g: Tensor| match &mut adj[v.0] {
            Some(x) => *x += &g,
            slot @ None => *slot = Some(g),
        };
        for &(v, s) in seeds {
            assert_eq!(s.shape(), self.nodes[v.0].value.shape(), "seed shape mismatch");
            accumulate(&mut adj, v, s.clone());
        }
        for k in (0..self.nodes.len()).rev() {
            let Some(g) = adj[k].take() else { continue };
            match &self.nodes[k].op {
                Op::Leaf => {
                    adj[k] = Some(g);
                }
                Op::Lin(terms) => {
                    for &(v, c) in terms {
                        accumulate(&mut adj, v, &g * c);
                    }
                }
                Op::Einsum { spec, args, alpha } => {
                    if args.len() == 1 {
                        let back = Spec {
                            inputs: vec![spec.output.clone()],
                            output: spec.inputs[0].clone(),
                        };
                        let mut d = eval(&back, &[&g]);
                        d *= *alpha;
                        accumulate(&mut adj, args[0], d);
                    } else {
                        let (a, b) = (args[0], args[1]);
                        let back_a = Spec {
                            inputs: vec![spec.output.clone(), spec.inputs[1].clone()],
                            output: spec.inputs[0].clone(),
                        };
                        let mut da = eval(&back_a, &[&g, &self.nodes[b.0].value]);
                        da *= *alpha;
                        let back_b = Spec {
                            inputs: vec![spec.output.clone(), spec.inputs[0].clone()],
                            output: spec.inputs[1].clone(),
                        };
                        let mut db = eval(&back_b, &[&g, &self.nodes[a.0].value]);
                        db *= *alpha;
                        accumulate(&mut adj, a, da);
                        accumulate(&mut adj, b, db);
                    }
                }
            }
        }
        Gradients { adj }
    }
}

/// Adjoints returned by [`Tape::backward`]; only leaves are retained.
#[derive(Debug)]
pub struct Gradients {
    adj: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Adjoint of a leaf, zeros of `shape` when the leaf is unreachable.
    pub fn get(&self, v: Var, shape: &[usize]) -> Tensor {
        self.adj[v.0]
            .clone()
            .unwrap_or_else(|| Tensor::zeros(IxDyn(shape)))
    }
}
