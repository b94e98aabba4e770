//! Ward agglomerative clustering and dendrogram export.
//!
//! Node numbering follows the usual linkage convention: leaves are
//! `0..n`, and merge `i` creates node `n + i`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::similarity::SquareMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge<T> {
    pub left: usize,
    pub right: usize,
    pub height: T,
    /// Leaves under the new node.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct ClusterTree<T> {
    pub leaves: Vec<String>,
    pub merges: Vec<Merge<T>>,
}

/// Ward update of the distance from `a ∪ b` to `c`.
pub fn lance_williams_update<T: Scalar>(
    d_ac: T,
    d_bc: T,
    d_ab: T,
    n_a: usize,
    n_b: usize,
    n_c: usize,
) -> Result<T> {
    if n_a == 0 || n_b == 0 || n_c == 0 {
        return Err(Error::Cluster("cluster sizes must be positive".into()));
    }
    if d_ac < T::zero() || d_bc < T::zero() || d_ab < T::zero() {
        return Err(Error::Cluster("negative distance".into()));
    }
    let (na, nb, nc) = (T::of_usize(n_a), T::of_usize(n_b), T::of_usize(n_c));
    let radicand = ((na + nc) * d_ac * d_ac + (nb + nc) * d_bc * d_bc - nc * d_ab * d_ab) / (na + nb + nc);
    if radicand < T::zero() {
        return Err(Error::Cluster(format!(
            "negative Ward radicand {radicand} (d_ac={d_ac}, d_bc={d_bc}, d_ab={d_ab})"
        )));
    }
    Ok(radicand.sqrt())
}

struct Active {
    node: usize,
    lowest: usize,
    size: usize,
}

/// Ward clustering of a symmetric, zero-diagonal, non-negative distance
/// matrix. Exact distance ties go to the pair whose lowest leaf indices
/// are lexicographically smallest.
pub fn ward_cluster<T: Scalar>(distances: &SquareMatrix<T>) -> Result<ClusterTree<T>> {
    let n = distances.len();
    if n < 2 {
        return Err(Error::Cluster(format!("need at least 2 items, got {n}")));
    }
    for a in 0..n {
        if distances.get(a, a) != T::zero() {
            return Err(Error::Cluster(format!("non-zero diagonal at {a}")));
        }
        for b in 0..n {
            let d = distances.get(a, b);
            if !d.is_finite() || d < T::zero() {
                return Err(Error::Cluster(format!("invalid distance at ({a}, {b}): {d}")));
            }
            if d != distances.get(b, a) {
                return Err(Error::Cluster(format!("asymmetric distances at ({a}, {b})")));
            }
        }
    }

    let mut d: Vec<Vec<T>> = distances.rows();
    let mut active: Vec<Option<Active>> = (0..n)
        .map(|i| {
            Some(Active {
                node: i,
                lowest: i,
                size: 1,
            })
        })
        .collect();
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best: Option<(T, (usize, usize), usize, usize)> = None;
        for i in 0..n {
            let Some(ci) = &active[i] else { continue };
            for j in i + 1..n {
                let Some(cj) = &active[j] else { continue };
                let key = (ci.lowest.min(cj.lowest), ci.lowest.max(cj.lowest));
                let dist = d[i][j];
                let better = match &best {
                    None => true,
                    Some((bd, bkey, _, _)) => dist < *bd || (dist == *bd && key < *bkey),
                };
                if better {
                    best = Some((dist, key, i, j));
                }
            }
        }
        let (height, _, i, j) = best.expect("at least two active clusters");
        let (a, b) = {
            let ci = active[i].as_ref().unwrap();
            let cj = active[j].as_ref().unwrap();
            if ci.lowest < cj.lowest {
                (i, j)
            } else {
                (j, i)
            }
        };
        let (na, nb) = (active[a].as_ref().unwrap().size, active[b].as_ref().unwrap().size);
        for c in 0..n {
            if c == a || c == b {
                continue;
            }
            let Some(cc) = &active[c] else { continue };
            let updated = lance_williams_update(d[a][c], d[b][c], height, na, nb, cc.size)?;
            d[a][c] = updated;
            d[c][a] = updated;
        }
        let left = active[a].take().unwrap();
        let right = active[b].take().unwrap();
        merges.push(Merge {
            left: left.node,
            right: right.node,
            height,
            count: na + nb,
        });
        active[a] = Some(Active {
            node: n + step,
            lowest: left.lowest.min(right.lowest),
            size: na + nb,
        });
    }
    Ok(ClusterTree {
        leaves: distances.languages.clone(),
        merges,
    })
}

impl<T: Scalar> ClusterTree<T> {
    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn root(&self) -> usize {
        self.n_leaves() + self.merges.len() - 1
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node < self.n_leaves()
    }

    pub fn height(&self, node: usize) -> T {
        if self.is_leaf(node) {
            T::zero()
        } else {
            self.merges[node - self.n_leaves()].height
        }
    }

    pub fn children(&self, node: usize) -> Option<(usize, usize)> {
        if self.is_leaf(node) {
            None
        } else {
            let m = &self.merges[node - self.n_leaves()];
            Some((m.left, m.right))
        }
    }

    /// Leaf indices under `node`, ascending.
    pub fn members(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            match self.children(x) {
                None => out.push(x),
                Some((l, r)) => {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Parent of every node; `None` for the root.
    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.n_leaves() + self.merges.len()];
        for (i, m) in self.merges.iter().enumerate() {
            parent[m.left] = Some(self.n_leaves() + i);
            parent[m.right] = Some(self.n_leaves() + i);
        }
        parent
    }

    /// Internal nodes from the leaf's parent up to the root.
    pub fn ancestors(&self, leaf: usize) -> Vec<usize> {
        let parents = self.parents();
        let mut out = Vec::new();
        let mut at = leaf;
        while let Some(p) = parents[at] {
            out.push(p);
            at = p;
        }
        out
    }

    pub fn leaf_index(&self, name: &str) -> Option<usize> {
        self.leaves.iter().position(|l| l == name)
    }

    /// Checks the strict-binary-tree and monotone-height invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_leaves();
        if n == 0 || self.merges.len() != n - 1 {
            return Err(Error::Cluster(format!(
                "{} leaves need {} merges, found {}",
                n,
                n.saturating_sub(1),
                self.merges.len()
            )));
        }
        let mut used = vec![false; n + self.merges.len()];
        let mut sizes = vec![1usize; n + self.merges.len()];
        for (i, m) in self.merges.iter().enumerate() {
            let node = n + i;
            for child in [m.left, m.right] {
                if child >= node || used[child] {
                    return Err(Error::Cluster(format!("invalid child {child} in merge {i}")));
                }
                used[child] = true;
            }
            if m.left == m.right {
                return Err(Error::Cluster(format!("merge {i} joins a node with itself")));
            }
            sizes[node] = sizes[m.left] + sizes[m.right];
            if sizes[node] != m.count {
                return Err(Error::Cluster(format!("merge {i} has wrong member count")));
            }
            if i > 0 && m.height < self.merges[i - 1].height {
                return Err(Error::Cluster(format!("merge {i} lowers the height")));
            }
        }
        Ok(())
    }

    /// Leaf-set clusters and their heights, for topology comparison.
    pub fn clusters(&self) -> Vec<(BTreeSet<String>, T)> {
        let n = self.n_leaves();
        (0..self.merges.len())
            .map(|i| {
                let set = self
                    .members(n + i)
                    .into_iter()
                    .map(|l| self.leaves[l].clone())
                    .collect();
                (set, self.merges[i].height)
            })
            .collect()
    }

    /// The two leaf sets separated by the root merge.
    pub fn top_split(&self) -> (Vec<usize>, Vec<usize>) {
        let (l, r) = self.children(self.root()).expect("root is internal");
        (self.members(l), self.members(r))
    }

    /// Branch lengths are parent height minus child height.
    pub fn to_newick(&self) -> String {
        let mut out = String::new();
        self.write_newick(self.root(), &mut out);
        out.push(';');
        out
    }

    fn write_newick(&self, node: usize, out: &mut String) {
        match self.children(node) {
            None => out.push_str(&escape_newick(&self.leaves[node])),
            Some((l, r)) => {
                let h = self.height(node);
                out.push('(');
                self.write_newick(l, out);
                let _ = write!(out, ":{}", h - self.height(l));
                out.push(',');
                self.write_newick(r, out);
                let _ = write!(out, ":{}", h - self.height(r));
                out.push(')');
            }
        }
    }

    pub fn from_newick(text: &str) -> Result<Self> {
        let mut p = NewickParser {
            chars: text.chars().collect(),
            at: 0,
        };
        let root = p.subtree()?;
        p.skip_ws();
        if p.peek() != Some(';') {
            return Err(Error::format("newick: expected ';'"));
        }
        p.at += 1;
        p.skip_ws();
        if p.at != p.chars.len() {
            return Err(Error::format("newick: trailing characters"));
        }

        // assign leaf ids in appearance order, then internal nodes by height
        #[derive(Clone, Copy)]
        enum Ref {
            Leaf(usize),
            Internal(usize),
        }
        type Internal<T> = (T, Ref, Ref);
        // heights come from the left branch; children are emitted first
        fn walk<T: Scalar>(
            node: &NewickNode<T>,
            leaves: &mut Vec<String>,
            internals: &mut Vec<Internal<T>>,
        ) -> (Ref, T) {
            match node {
                NewickNode::Leaf(name) => {
                    leaves.push(name.clone());
                    (Ref::Leaf(leaves.len() - 1), T::zero())
                }
                NewickNode::Internal(l, ll, r, _) => {
                    let (a, ha) = walk(l, leaves, internals);
                    let (b, _) = walk(r, leaves, internals);
                    let height = ha + *ll;
                    internals.push((height, a, b));
                    (Ref::Internal(internals.len() - 1), height)
                }
            }
        }
        let mut leaves = Vec::new();
        let mut internals: Vec<Internal<T>> = Vec::new();
        walk(&root, &mut leaves, &mut internals);
        let n = leaves.len();
        // post-order index breaks height ties, so children precede parents
        let mut order: Vec<usize> = (0..internals.len()).collect();
        order.sort_by(|&a, &b| {
            internals[a]
                .0
                .partial_cmp(&internals[b].0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut new_id = vec![0usize; internals.len()];
        for (rank, &i) in order.iter().enumerate() {
            new_id[i] = n + rank;
        }
        let resolve = |r: Ref| match r {
            Ref::Leaf(i) => i,
            Ref::Internal(i) => new_id[i],
        };
        let mut merges = Vec::with_capacity(internals.len());
        let mut sizes = vec![1usize; n + internals.len()];
        for &i in &order {
            let (h, a, b) = internals[i];
            let (a, b) = (resolve(a), resolve(b));
            let count = sizes[a] + sizes[b];
            sizes[new_id[i]] = count;
            merges.push(Merge {
                left: a,
                right: b,
                height: h,
                count,
            });
        }
        let tree = ClusterTree { leaves, merges };
        tree.validate()?;
        Ok(tree)
    }

    pub fn to_json(&self) -> String
    where
        T: Serialize,
    {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let tree: ClusterTree<T> = serde_json::from_str(text)?;
        tree.validate()?;
        Ok(tree)
    }

    /// Static dendrogram: leaves on the left, merge height along x.
    pub fn to_svg(&self) -> String {
        let n = self.n_leaves();
        let row = 22.0;
        let label_w = 10.0 + 8.0 * self.leaves.iter().map(|l| l.chars().count()).max().unwrap_or(1) as f64;
        let plot_w = 420.0;
        let top = 20.0;
        let width = label_w + plot_w + 40.0;
        let height = top * 2.0 + row * n as f64 + 20.0;
        let max_h = self.height(self.root()).as_f64().max(f64::MIN_POSITIVE);
        let x = |h: f64| label_w + 10.0 + plot_w * h / max_h;

        let mut order = Vec::new();
        let mut stack = vec![self.root()];
        while let Some(node) = stack.pop() {
            match self.children(node) {
                None => order.push(node),
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
        let mut y = vec![0.0f64; n + self.merges.len()];
        for (rank, &leaf) in order.iter().enumerate() {
            y[leaf] = top + row * (rank as f64 + 0.5);
        }
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        for &leaf in &order {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="end" dominant-baseline="middle">{}</text>"#,
                label_w,
                y[leaf],
                xml_escape(&self.leaves[leaf])
            );
        }
        for (i, m) in self.merges.iter().enumerate() {
            let node = n + i;
            y[node] = (y[m.left] + y[m.right]) / 2.0;
            let xh = x(m.height.as_f64());
            for child in [m.left, m.right] {
                let _ = writeln!(
                    out,
                    r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
                    x(self.height(child).as_f64()),
                    y[child],
                    xh,
                    y[child]
                );
            }
            let _ = writeln!(
                out,
                r#"<line x1="{xh:.2}" y1="{:.2}" x2="{xh:.2}" y2="{:.2}" stroke="black"/>"#,
                y[m.left], y[m.right]
            );
        }
        let axis_y = top + row * n as f64 + 8.0;
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{axis_y:.2}" x2="{:.2}" y2="{axis_y:.2}" stroke="gray"/>"#,
            x(0.0),
            x(max_h)
        );
        for tick in 0..=4 {
            let h = max_h * tick as f64 / 4.0;
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{:.3}</text>"#,
                x(h),
                axis_y + 12.0,
                h
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn escape_newick(name: &str) -> String {
    let special = |c: char| c.is_whitespace() || "()[]':;,".contains(c);
    if name.is_empty() || name.chars().any(special) {
        format!("'{}'", name.replace('\'', "''"))
    } else {
        name.to_string()
    }
}

enum NewickNode<T> {
    Leaf(String),
    Internal(Box<NewickNode<T>>, T, Box<NewickNode<T>>, T),
}

struct NewickParser {
    chars: Vec<char>,
    at: usize,
}

impl NewickParser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.at).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.at += 1;
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.at += 1;
            Ok(())
        } else {
            Err(Error::format(format!("newick: expected {c:?} at offset {}", self.at)))
        }
    }

    fn subtree<T: Scalar>(&mut self) -> Result<NewickNode<T>> {
        self.skip_ws();
        if self.peek() == Some('(') {
            self.at += 1;
            let left = self.subtree()?;
            let ll = self.length()?;
            self.expect(',')?;
            let right = self.subtree()?;
            let rl = self.length()?;
            self.expect(')')?;
            Ok(NewickNode::Internal(Box::new(left), ll, Box::new(right), rl))
        } else {
            Ok(NewickNode::Leaf(self.name()?))
        }
    }

    fn length<T: Scalar>(&mut self) -> Result<T> {
        self.expect(':')?;
        self.skip_ws();
        let start = self.at;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_digit() || "+-.eE".contains(c) || c.is_ascii_alphabetic())
        {
            self.at += 1;
        }
        let text: String = self.chars[start..self.at].iter().collect();
        text.parse()
            .map_err(|_| Error::format(format!("newick: bad branch length {text:?}")))
    }

    fn name(&mut self) -> Result<String> {
        self.skip_ws();
        if self.peek() == Some('\'') {
            self.at += 1;
            let mut out = String::new();
            loop {
                match self.peek() {
                    None => return Err(Error::format("newick: unterminated quoted name")),
                    Some('\'') if self.chars.get(self.at + 1) == Some(&'\'') => {
                        out.push('\'');
                        self.at += 2;
                    }
                    Some('\'') => {
                        self.at += 1;
                        return Ok(out);
                    }
                    Some(c) => {
                        out.push(c);
                        self.at += 1;
                    }
                }
            }
        }
        let start = self.at;
        while self
            .peek()
            .is_some_and(|c| !c.is_whitespace() && !"()[]':;,".contains(c))
        {
            self.at += 1;
        }
        if start == self.at {
            return Err(Error::format(format!("newick: expected a name at offset {start}")));
        }
        Ok(self.chars[start..self.at].iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(names: &[&str], rows: &[&[f64]]) -> SquareMatrix<f64> {
        SquareMatrix::from_fn(names.iter().map(|s| s.to_string()).collect(), |a, b| rows[a][b])
    }

    #[test]
    fn update_formula_values() {
        let v = lance_williams_update(1.0, 1.0, 0.0, 1, 1, 1).unwrap();
        assert!((v - (4.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((v - 1.1547).abs() < 1e-4);
        let d = 0.37;
        let v = lance_williams_update(d, d, 0.0, 1, 1, 1).unwrap();
        assert!((v - (4.0 * d * d / 3.0f64).sqrt()).abs() < 1e-15);
        assert_eq!(lance_williams_update(1.0, 1.0, 1.0, 1, 1, 1).unwrap(), 1.0);
        assert!(lance_williams_update(0.0, 0.0, 1.0, 1, 1, 1).is_err());
    }

    #[test]
    fn two_items() {
        let m = matrix(&["A", "B"], &[&[0.0, 0.4], &[0.4, 0.0]]);
        let t = ward_cluster(&m).unwrap();
        assert_eq!(t.merges, vec![Merge { left: 0, right: 1, height: 0.4, count: 2 }]);
        assert_eq!(t.to_newick(), "(A:0.4,B:0.4);");
    }

    #[test]
    fn two_pairs_then_root() {
        let m = matrix(
            &["A", "B", "C", "D"],
            &[
                &[0.0, 0.1, 0.9, 0.9],
                &[0.1, 0.0, 0.9, 0.9],
                &[0.9, 0.9, 0.0, 0.1],
                &[0.9, 0.9, 0.1, 0.0],
            ],
        );
        let t = ward_cluster(&m).unwrap();
        assert_eq!((t.merges[0].left, t.merges[0].right), (0, 1));
        assert_eq!((t.merges[1].left, t.merges[1].right), (2, 3));
        assert_eq!((t.merges[2].left, t.merges[2].right), (4, 5));
        // sqrt(2 * Δ) with Δ the within-cluster sum-of-squares increase
        let expected = ((4.0 * 0.81 - 0.01 - 0.01) / 2.0f64).sqrt();
        assert!((t.merges[2].height - expected).abs() < 1e-12);
        t.validate().unwrap();
        assert_eq!(t.top_split(), (vec![0, 1], vec![2, 3]));
    }

    #[test]
    fn ties_break_by_lowest_member() {
        let m = matrix(
            &["A", "B", "C"],
            &[&[0.0, 0.5, 0.5], &[0.5, 0.0, 0.5], &[0.5, 0.5, 0.0]],
        );
        let t = ward_cluster(&m).unwrap();
        assert_eq!((t.merges[0].left, t.merges[0].right), (0, 1));
    }

    #[test]
    fn rejects_bad_input() {
        let one = matrix(&["A"], &[&[0.0]]);
        assert!(ward_cluster(&one).is_err());
        let asym = matrix(&["A", "B"], &[&[0.0, 0.4], &[0.3, 0.0]]);
        assert!(ward_cluster(&asym).is_err());
        let diag = matrix(&["A", "B"], &[&[0.1, 0.4], &[0.4, 0.0]]);
        assert!(ward_cluster(&diag).is_err());
    }

    #[test]
    fn chain_newick_and_round_trip() {
        let m = matrix(
            &["A", "B", "C"],
            &[&[0.0, 0.2, 0.6], &[0.2, 0.0, 0.5], &[0.6, 0.5, 0.0]],
        );
        let t = ward_cluster(&m).unwrap();
        let nwk = t.to_newick();
        assert!(nwk.starts_with("((A:0.2,B:0.2):"));
        assert!(nwk.ends_with(",C:") || nwk.contains(",C:"));
        let back = ClusterTree::<f64>::from_newick(&nwk).unwrap();
        let (c1, c2) = (t.clusters(), back.clusters());
        assert_eq!(c1.len(), c2.len());
        for ((s1, h1), (s2, h2)) in c1.iter().zip(&c2) {
            assert_eq!(s1, s2);
            assert!((h1 - h2).abs() < 1e-9);
        }
        for m in &back.merges {
            assert!(m.height >= 0.0);
        }
    }

    #[test]
    fn quoted_names() {
        let m = matrix(&["Chinese (Mandarin)", "O'odham"], &[&[0.0, 1.0], &[1.0, 0.0]]);
        let t = ward_cluster(&m).unwrap();
        let nwk = t.to_newick();
        assert_eq!(nwk, "('Chinese (Mandarin)':1,'O''odham':1);");
        let back = ClusterTree::<f64>::from_newick(&nwk).unwrap();
        assert_eq!(back.leaves, t.leaves);
    }

    #[test]
    fn json_round_trip_and_svg() {
        let m = matrix(
            &["A", "B", "C"],
            &[&[0.0, 0.2, 0.6], &[0.2, 0.0, 0.5], &[0.6, 0.5, 0.0]],
        );
        let t = ward_cluster(&m).unwrap();
        let back = ClusterTree::<f64>::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        let svg = t.to_svg();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<line").count(), 3 * 2 + 1);
    }

    #[test]
    fn ancestors_walk_to_root() {
        let m = matrix(
            &["A", "B", "C"],
            &[&[0.0, 0.2, 0.6], &[0.2, 0.0, 0.5], &[0.6, 0.5, 0.0]],
        );
        let t = ward_cluster(&m).unwrap();
        assert_eq!(t.ancestors(0), vec![3, 4]);
        assert_eq!(t.ancestors(2), vec![4]);
        assert_eq!(t.members(3), vec![0, 1]);
    }
}
