//! Expression trees for translation-scale equivariant maps g: R^d -> R.
//!
//! The combinator set — coordinates, affine combinations whose weights sum
//! to one, pointwise max and min — is closed under both equivariances
//! (g(x + c·1) = g(x) + c and g(u·x) = u·g(x) for u >= 0), so every
//! constructible map is in the admissible class by induction. One-sided
//! directional derivatives are computed analytically from the tree;
//! [`GMap::gn_hat`] is the data-driven approximation used by the surface
//! simulation.
//!
//! Raw sums of equivariant maps (e.g. max of one block plus max of another)
//! are deliberately *not* constructible: translating every coordinate by c
//! would change such a sum by 2c. Their affine-combination counterparts
//! (0.5·max + 0.5·max) are in the class and are what the parser accepts.

use rand::Rng;

use crate::error::{Error, Result};

/// Absolute tolerance for the argmax/argmin tie set in [`GMap::dderiv`].
/// Evaluation is plain floating arithmetic; ties below this are noise.
pub const TIE_TOL: f64 = 1e-10;
/// Constructor tolerance for affine weight sums.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Parser tolerance for affine weight sums; accepted weights are
/// renormalized so constructed values meet [`WEIGHT_SUM_TOL`].
pub const PARSE_WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    /// Coordinate projection x -> x_i (0-based).
    Coord(usize),
    /// Affine combination with weights summing to one. Weights may be
    /// negative; scale equivariance needs only the sum constraint.
    Affine { weights: Vec<f64>, children: Vec<Node> },
    Max(Vec<Node>),
    Min(Vec<Node>),
}

/// A translation-scale equivariant map, immutable after construction.
///
/// Values are freely shareable across threads; all operations are pure.
#[derive(Clone, Debug, PartialEq)]
pub struct GMap {
    dim: usize,
    root: Node,
}

impl GMap {
    pub fn new(dim: usize, root: Node) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("ambient dimension must be >= 1".into()));
        }
        validate_node(&root, dim)?;
        Ok(GMap { dim, root })
    }

    /// g(x) = x_i (0-based index).
    pub fn coord(dim: usize, index: usize) -> Result<Self> {
        GMap::new(dim, Node::Coord(index))
    }

    /// g(x) = max over all coordinates.
    pub fn max_coords(dim: usize) -> Result<Self> {
        GMap::new(dim, Node::Max((0..dim).map(Node::Coord).collect()))
    }

    /// g(x) = min over all coordinates.
    pub fn min_coords(dim: usize) -> Result<Self> {
        GMap::new(dim, Node::Min((0..dim).map(Node::Coord).collect()))
    }

    /// g(x) = w^T x with the weights summing to one.
    pub fn affine_coords(dim: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != dim {
            return Err(Error::Input(format!(
                "affine weight count {} does not match dimension {}",
                weights.len(),
                dim
            )));
        }
        let children = (0..dim).map(Node::Coord).collect();
        GMap::new(dim, Node::Affine { weights, children })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Recursive evaluation.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_len("x", x)?;
        Ok(eval_node(&self.root, x))
    }

    /// Evaluation without the dimension check, for hot loops that guarantee
    /// the length by construction.
    #[inline]
    pub fn eval_unchecked(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        eval_node(&self.root, x)
    }

    /// One-sided directional derivative g~(x; z) = lim_{t->0+} (g(x+tz) - g(x))/t.
    ///
    /// Computed analytically: coordinates differentiate to the direction,
    /// affine nodes to the weighted combination, and max/min nodes to the
    /// extremum of the derivatives of the children attaining the node value
    /// at `x` (tie set resolved with [`TIE_TOL`]).
    pub fn dderiv(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        self.check_len("x", x)?;
        self.check_len("z", z)?;
        Ok(dderiv_node(&self.root, x, z))
    }

    /// The directional derivative z -> g~(x; z) as a map in its own right.
    ///
    /// Max/min nodes are pruned to their tie sets at `x` (those sets do not
    /// depend on z), so the result evaluates the derivative at plain-eval
    /// cost. The pruned map stays in the equivariant class.
    pub fn deriv_map(&self, x: &[f64]) -> Result<GMap> {
        self.check_len("x", x)?;
        GMap::new(self.dim, prune_node(&self.root, x))
    }

    /// Data-driven derivative approximation:
    /// g(z + (beta_hat - g(beta_hat)·1) / eps_n).
    pub fn gn_hat(&self, beta_hat: &[f64], eps_n: f64, z: &[f64]) -> Result<f64> {
        let offset = self.gn_hat_offset(beta_hat, eps_n)?;
        self.check_len("z", z)?;
        let shifted: Vec<f64> = z.iter().zip(&offset).map(|(a, b)| a + b).collect();
        Ok(eval_node(&self.root, &shifted))
    }

    /// The additive offset (beta_hat - g(beta_hat)·1) / eps_n used by
    /// [`GMap::gn_hat`]; precompute it when evaluating on many points.
    pub fn gn_hat_offset(&self, beta_hat: &[f64], eps_n: f64) -> Result<Vec<f64>> {
        if eps_n <= 0.0 {
            return Err(Error::Input(format!("eps_n must be > 0, got {eps_n}")));
        }
        self.check_len("beta_hat", beta_hat)?;
        let g_beta = eval_node(&self.root, beta_hat);
        Ok(beta_hat.iter().map(|b| (b - g_beta) / eps_n).collect())
    }

    /// Tracked Lipschitz bound of z -> g~(x; z) in the sup norm:
    /// coordinates 1, affine nodes the weighted absolute sum, max/min the
    /// child maximum.
    pub fn lipschitz_bound(&self) -> f64 {
        lipschitz_node(&self.root)
    }

    fn check_len(&self, name: &str, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Input(format!(
                "{name} has length {}, expected dimension {}",
                v.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

fn validate_node(node: &Node, dim: usize) -> Result<()> {
    match node {
        Node::Coord(i) => {
            if *i >= dim {
                return Err(Error::Input(format!(
                    "coordinate index x{} out of range for dimension {}",
                    i + 1,
                    dim
                )));
            }
        }
        Node::Affine { weights, children } => {
            if children.is_empty() {
                return Err(Error::Input("affine node needs at least one term".into()));
            }
            if weights.len() != children.len() {
                return Err(Error::Input(format!(
                    "affine node has {} weights for {} children",
                    weights.len(),
                    children.len()
                )));
            }
            let sum: f64 = weights.iter().sum();
            if !sum.is_finite() || (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(Error::Input(format!(
                    "affine weights must sum to 1 (got {sum})"
                )));
            }
            for c in children {
                validate_node(c, dim)?;
            }
        }
        Node::Max(children) | Node::Min(children) => {
            if children.is_empty() {
                return Err(Error::Input("max/min node needs at least one child".into()));
            }
            for c in children {
                validate_node(c, dim)?;
            }
        }
    }
    Ok(())
}

fn eval_node(node: &Node, x: &[f64]) -> f64 {
    match node {
        Node::Coord(i) => x[*i],
        Node::Affine { weights, children } => weights
            .iter()
            .zip(children)
            .map(|(w, c)| w * eval_node(c, x))
            .sum(),
        Node::Max(children) => children
            .iter()
            .map(|c| eval_node(c, x))
            .fold(f64::NEG_INFINITY, f64::max),
        Node::Min(children) => children
            .iter()
            .map(|c| eval_node(c, x))
            .fold(f64::INFINITY, f64::min),
    }
}

fn dderiv_node(node: &Node, x: &[f64], z: &[f64]) -> f64 {
    match node {
        Node::Coord(i) => z[*i],
        Node::Affine { weights, children } => weights
            .iter()
            .zip(children)
            .map(|(w, c)| w * dderiv_node(c, x, z))
            .sum(),
        Node::Max(children) => {
            let evals: Vec<f64> = children.iter().map(|c| eval_node(c, x)).collect();
            let m = evals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            children
                .iter()
                .zip(&evals)
                .filter(|(_, e)| **e >= m - TIE_TOL)
                .map(|(c, _)| dderiv_node(c, x, z))
                .fold(f64::NEG_INFINITY, f64::max)
        }
        Node::Min(children) => {
            let evals: Vec<f64> = children.iter().map(|c| eval_node(c, x)).collect();
            let m = evals.iter().copied().fold(f64::INFINITY, f64::min);
            children
                .iter()
                .zip(&evals)
                .filter(|(_, e)| **e <= m + TIE_TOL)
                .map(|(c, _)| dderiv_node(c, x, z))
                .fold(f64::INFINITY, f64::min)
        }
    }
}

fn prune_node(node: &Node, x: &[f64]) -> Node {
    match node {
        Node::Coord(i) => Node::Coord(*i),
        Node::Affine { weights, children } => Node::Affine {
            weights: weights.clone(),
            children: children.iter().map(|c| prune_node(c, x)).collect(),
        },
        Node::Max(children) => {
            let evals: Vec<f64> = children.iter().map(|c| eval_node(c, x)).collect();
            let m = evals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let kept: Vec<Node> = children
                .iter()
                .zip(&evals)
                .filter(|(_, e)| **e >= m - TIE_TOL)
                .map(|(c, _)| prune_node(c, x))
                .collect();
            if kept.len() == 1 {
                kept.into_iter().next().unwrap()
            } else {
                Node::Max(kept)
            }
        }
        Node::Min(children) => {
            let evals: Vec<f64> = children.iter().map(|c| eval_node(c, x)).collect();
            let m = evals.iter().copied().fold(f64::INFINITY, f64::min);
            let kept: Vec<Node> = children
                .iter()
                .zip(&evals)
                .filter(|(_, e)| **e <= m + TIE_TOL)
                .map(|(c, _)| prune_node(c, x))
                .collect();
            if kept.len() == 1 {
                kept.into_iter().next().unwrap()
            } else {
                Node::Min(kept)
            }
        }
    }
}

fn lipschitz_node(node: &Node) -> f64 {
    match node {
        Node::Coord(_) => 1.0,
        Node::Affine { weights, children } => weights
            .iter()
            .zip(children)
            .map(|(w, c)| w.abs() * lipschitz_node(c))
            .sum(),
        Node::Max(children) | Node::Min(children) => children
            .iter()
            .map(lipschitz_node)
            .fold(0.0, f64::max),
    }
}

impl std::fmt::Display for GMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fmt_node(&self.root, f)
    }
}

fn fmt_node(node: &Node, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
    match node {
        Node::Coord(i) => write!(f, "x{}", i + 1),
        Node::Affine { weights, children } => {
            write!(f, "affine(")?;
            for (k, (w, c)) in weights.iter().zip(children).enumerate() {
                if k > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{w}*")?;
                fmt_node(c, f)?;
            }
            write!(f, ")")
        }
        Node::Max(children) | Node::Min(children) => {
            let name = if matches!(node, Node::Max(_)) { "max" } else { "min" };
            write!(f, "{name}(")?;
            for (k, c) in children.iter().enumerate() {
                if k > 0 {
                    write!(f, ", ")?;
                }
                fmt_node(c, f)?;
            }
            write!(f, ")")
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing: nested textual expressions like
//   max(x1, x2)
//   min(max(x1, x2), x3)
//   affine(0.5*x1, 0.5*max(x2, x3))
// ---------------------------------------------------------------------------

/// Parse a map expression. `dim` is the ambient dimension; coordinate
/// indices beyond it are rejected.
pub fn parse_gmap(text: &str, dim: usize) -> Result<GMap> {
    let mut p = ExprParser {
        src: text.as_bytes(),
        pos: 0,
    };
    p.skip_ws();
    let node = p.parse_expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    GMap::new(dim, node)
}

struct ExprParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> ExprParser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Input(format!("g expression: {} at offset {}", msg, self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, ch: u8) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(ch) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", ch as char)))
        }
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        if matches!(self.peek(), Some(b'+') | Some(b'-')) {
            self.pos += 1;
        }
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit()
                || matches!(self.src[self.pos], b'.' | b'e' | b'E'))
        {
            if matches!(self.src[self.pos], b'e' | b'E')
                && matches!(self.src.get(self.pos + 1), Some(b'+') | Some(b'-'))
            {
                self.pos += 1;
            }
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| self.err("expected a number"))
    }

    fn parse_expr(&mut self) -> Result<Node> {
        self.skip_ws();
        let name = self.ident();
        if name.is_empty() {
            return Err(self.err("expected 'max', 'min', 'affine' or a coordinate like x1"));
        }
        if let Some(rest) = name.strip_prefix('x') {
            if let Ok(idx) = rest.parse::<usize>() {
                if idx == 0 {
                    return Err(self.err("coordinate indices start at x1"));
                }
                return Ok(Node::Coord(idx - 1));
            }
        }
        match name.as_str() {
            "max" | "min" => {
                self.expect(b'(')?;
                let mut children = vec![self.parse_expr()?];
                loop {
                    self.skip_ws();
                    match self.peek() {
                        Some(b',') => {
                            self.pos += 1;
                            children.push(self.parse_expr()?);
                        }
                        Some(b')') => {
                            self.pos += 1;
                            break;
                        }
                        _ => return Err(self.err("expected ',' or ')'")),
                    }
                }
                Ok(if name == "max" {
                    Node::Max(children)
                } else {
                    Node::Min(children)
                })
            }
            "affine" => {
                self.expect(b'(')?;
                let mut weights = Vec::new();
                let mut children = Vec::new();
                loop {
                    let w = self.number()?;
                    self.expect(b'*')?;
                    weights.push(w);
                    children.push(self.parse_expr()?);
                    self.skip_ws();
                    match self.peek() {
                        Some(b',') => {
                            self.pos += 1;
                        }
                        Some(b')') => {
                            self.pos += 1;
                            break;
                        }
                        _ => return Err(self.err("expected ',' or ')'")),
                    }
                }
                let sum: f64 = weights.iter().sum();
                if !sum.is_finite() || (sum - 1.0).abs() > PARSE_WEIGHT_SUM_TOL {
                    return Err(self.err(&format!(
                        "affine weights must sum to 1 within {PARSE_WEIGHT_SUM_TOL:e} (got {sum})"
                    )));
                }
                // Renormalize so the constructed value meets the tighter
                // construction invariant.
                for w in &mut weights {
                    *w /= sum;
                }
                Ok(Node::Affine { weights, children })
            }
            other => Err(self.err(&format!("unknown map '{other}'"))),
        }
    }
}

// ---------------------------------------------------------------------------
// Randomized map generation, used by the certification checks and tests.
// ---------------------------------------------------------------------------

/// Random map of depth at most `max_depth` on R^dim. Affine weights are
/// drawn in (-1, 1) with the last weight set to 1 minus the others, so the
/// sum constraint holds to the last bit.
pub fn random_gmap<R: Rng>(rng: &mut R, dim: usize, max_depth: usize) -> GMap {
    let root = random_node(rng, dim, max_depth);
    GMap::new(dim, root).expect("generated node is valid by construction")
}

fn random_node<R: Rng>(rng: &mut R, dim: usize, depth: usize) -> Node {
    if depth == 0 || rng.random_range(0..4) == 0 {
        return Node::Coord(rng.random_range(0..dim));
    }
    let arity = rng.random_range(2..=3);
    let children: Vec<Node> = (0..arity).map(|_| random_node(rng, dim, depth - 1)).collect();
    match rng.random_range(0..3) {
        0 => Node::Max(children),
        1 => Node::Min(children),
        _ => {
            let mut weights: Vec<f64> =
                (0..arity - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
            let partial: f64 = weights.iter().sum();
            weights.push(1.0 - partial);
            Node::Affine { weights, children }
        }
    }
}
