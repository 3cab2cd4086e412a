//! Agglomerative hierarchical clustering with Euclidean distance.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Linkage {
    Single,
    #[default]
    Complete,
    Average,
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            other => Err(Error::InvalidArgument(format!("unknown linkage {other:?}"))),
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
        })
    }
}

/// Where to cut the dendrogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cut {
    /// Merges at or below this distance are kept.
    Absolute(f64),
    /// Threshold is this fraction of the largest merge distance.
    Relative(f64),
}

impl Default for Cut {
    fn default() -> Self {
        Cut::Relative(0.5)
    }
}

impl FromStr for Cut {
    type Err = Error;

    /// `"0.5"` is relative, `"abs:1.2"` absolute.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad cut {s:?}"));
        let (abs, num) = match s.strip_prefix("abs:") {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let v: f64 = num.trim().parse().map_err(|_| bad())?;
        if !v.is_finite() || v < 0.0 {
            return Err(bad());
        }
        Ok(if abs { Cut::Absolute(v) } else { Cut::Relative(v) })
    }
}

impl fmt::Display for Cut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cut::Absolute(v) => write!(f, "abs:{v}"),
            Cut::Relative(v) => write!(f, "{v}"),
        }
    }
}

/// One agglomeration step. Leaves are ids `0..n`; the cluster created by
/// merge `m` gets id `n + m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    leaves: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn leaves(&self) -> usize {
        self.leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn max_distance(&self) -> f64 {
        self.merges.iter().fold(0.0, |m, x| m.max(x.distance))
    }

    pub fn threshold(&self, cut: Cut) -> f64 {
        match cut {
            Cut::Absolute(t) => t,
            Cut::Relative(f) => f * self.max_distance(),
        }
    }

    /// Applies every merge whose distance is at or below the cut threshold.
    pub fn cut(&self, cut: Cut) -> Partition {
        let t = self.threshold(cut);
        let n = self.leaves;
        let mut parent: Vec<usize> = (0..n + self.merges.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (m, merge) in self.merges.iter().enumerate() {
            if merge.distance <= t {
                let id = n + m;
                let a = find(&mut parent, merge.left);
                let b = find(&mut parent, merge.right);
                parent[a] = id;
                parent[b] = id;
            }
        }
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        for leaf in 0..n {
            let root = find(&mut parent, leaf);
            match groups.iter_mut().find(|(r, _)| *r == root) {
                Some((_, g)) => g.push(leaf),
                None => groups.push((root, vec![leaf])),
            }
        }
        Partition::new(groups.into_iter().map(|(_, g)| g).collect())
    }

    /// One merge per line: `id left right distance size`.
    pub fn to_text(&self) -> String {
        let mut out = format!("# leaves {}\n", self.leaves);
        for (m, x) in self.merges.iter().enumerate() {
            out.push_str(&format!(
                "{} {} {} {:.12e} {}\n",
                self.leaves + m,
                x.left,
                x.right,
                x.distance,
                x.size
            ));
        }
        out
    }
}

/// Clusters as sorted member lists, ordered by smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition(Vec<Vec<usize>>);

impl Partition {
    pub fn new(mut groups: Vec<Vec<usize>>) -> Self {
        groups.retain(|g| !g.is_empty());
        for g in &mut groups {
            g.sort_unstable();
        }
        groups.sort();
        Partition(groups)
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Partition {
    /// Members space-separated, clusters `|`-separated: `0 3 7|1 2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|g| g.iter().map(usize::to_string).collect::<Vec<_>>().join(" "))
            .collect();
        f.write_str(&parts.join("|"))
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let groups = s
            .split('|')
            .map(|g| {
                g.split_whitespace()
                    .map(|x| {
                        x.parse()
                            .map_err(|_| Error::InvalidArgument(format!("bad partition {s:?}")))
                    })
                    .collect::<Result<Vec<usize>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Partition::new(groups))
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Builds the full dendrogram.
///
/// Each step merges the closest pair of active clusters; equal distances
/// are resolved by the pair's smallest leaf ids, lower first.
pub fn linkage(points: &[Vec<f64>], method: Linkage) -> Result<Dendrogram> {
    let n = points.len();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::shape("cluster point", dim, p.len()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("cluster points must be finite".into()));
    }

    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean(&points[i], &points[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    // Slot i holds an active cluster: (id, smallest leaf, size).
    let mut active: Vec<Option<(usize, usize, usize)>> = (0..n).map(|i| Some((i, i, 1))).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for a in 0..n {
            let Some((_, min_a, _)) = active[a] else { continue };
            for b in a + 1..n {
                let Some((_, min_b, _)) = active[b] else { continue };
                let key = (dist[a][b], min_a.min(min_b), min_a.max(min_b));
                let better = match best {
                    None => true,
                    Some((d, lo, hi, _, _)) => key.0.total_cmp(&d).then((key.1, key.2).cmp(&(lo, hi))).is_lt(),
                };
                if better {
                    best = Some((key.0, key.1, key.2, a, b));
                }
            }
        }
        let (d, _, _, a, b) = best.expect("at least two active clusters");
        let (id_a, min_a, size_a) = active[a].expect("active");
        let (id_b, min_b, size_b) = active[b].expect("active");
        let (left, right) = if min_a < min_b { (id_a, id_b) } else { (id_b, id_a) };
        merges.push(Merge {
            left,
            right,
            distance: d,
            size: size_a + size_b,
        });
        for c in 0..n {
            if c == a || c == b || active[c].is_none() {
                continue;
            }
            let (da, db) = (dist[a][c], dist[b][c]);
            let merged = match method {
                Linkage::Single => da.min(db),
                Linkage::Complete => da.max(db),
                Linkage::Average => (size_a as f64 * da + size_b as f64 * db) / (size_a + size_b) as f64,
            };
            dist[a][c] = merged;
            dist[c][a] = merged;
        }
        active[a] = Some((n + step, min_a.min(min_b), size_a + size_b));
        active[b] = None;
    }
    Ok(Dendrogram { leaves: n, merges })
}

pub fn cluster(points: &[Vec<f64>], method: Linkage, cut: Cut) -> Result<Partition> {
    Ok(linkage(points, method)?.cut(cut))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_form_one_cluster() {
        let pts = vec![vec![1.0, 2.0]; 5];
        for cut in [Cut::Relative(0.5), Cut::Absolute(0.1)] {
            assert_eq!(cluster(&pts, Linkage::Complete, cut).unwrap().len(), 1);
        }
    }

    #[test]
    fn two_far_groups() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![10.0, 10.0],
            vec![0.1, 0.0],
            vec![10.0, 10.2],
            vec![0.0, 0.1],
        ];
        let p = cluster(&pts, Linkage::Complete, Cut::Absolute(1.0)).unwrap();
        assert_eq!(p, Partition::new(vec![vec![0, 2, 4], vec![1, 3]]));
        assert_eq!(p.to_string(), "0 2 4|1 3");
        assert_eq!(p.to_string().parse::<Partition>().unwrap(), p);
    }

    #[test]
    fn merge_count_and_monotone_complete_distances() {
        let pts: Vec<Vec<f64>> = (0..9).map(|i| vec![(i * i) as f64 % 7.0, i as f64 * 0.3]).collect();
        let d = linkage(&pts, Linkage::Complete).unwrap();
        assert_eq!(d.merges().len(), 8);
        assert!(d.merges().windows(2).all(|w| w[0].distance <= w[1].distance));
        assert_eq!(d.merges().last().unwrap().size, 9);
    }

    #[test]
    fn ties_merge_lowest_leaves_first() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let d = linkage(&pts, Linkage::Single).unwrap();
        assert_eq!((d.merges()[0].left, d.merges()[0].right), (0, 1));
        assert_eq!((d.merges()[1].left, d.merges()[1].right), (4, 2));
    }

    #[test]
    fn errors() {
        assert!(matches!(linkage(&[], Linkage::Single), Err(Error::EmptyData)));
        assert!(linkage(&[vec![1.0], vec![1.0, 2.0]], Linkage::Single).is_err());
        assert!("abs:x".parse::<Cut>().is_err());
        assert_eq!("abs:2".parse::<Cut>().unwrap(), Cut::Absolute(2.0));
        assert_eq!("0.5".parse::<Cut>().unwrap(), Cut::Relative(0.5));
        assert_eq!("average".parse::<Linkage>().unwrap(), Linkage::Average);
    }

    #[test]
    fn single_point() {
        let p = cluster(&[vec![3.0]], Linkage::Average, Cut::default()).unwrap();
        assert_eq!(p.groups(), &[vec![0]]);
    }
}
