//! Distance-to-measure evaluation.
//!
//! For a finite measure with support points `x_i` and weights `w_i`, the
//! pseudo-distance at level `l` is the smallest radius whose closed ball
//! around the query carries mass strictly above `l`. The DTM with mass
//! parameter `m` is the average of the pseudo-distance over levels in
//! `[0, m]`, which collapses to a finite sum over sorted distances: with
//! cumulative weights `c_0 = 0 < c_1 < ... <= 1`, each segment contributes
//! `d_(i) * (min(c_i, m) - c_{i-1})` while `c_{i-1} < m`, and the total is
//! divided by `m`. For uniform weights and `m = k/N` this is exactly the
//! mean of the `k` nearest-neighbour distances.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::knn::KdTree;
use crate::space::{FiniteMeasureSpace, Geometry};

/// Coordinate-form spaces up to this dimension are served by the k-d tree;
/// everything else falls back to brute-force partial selection.
pub const KDTREE_MAX_DIM: usize = 16;

/// A query location: a support point by index, or free coordinates
/// (coordinate-form spaces only).
#[derive(Debug, Clone, Copy)]
pub enum QueryPoint<'a> {
    Index(usize),
    Coords(&'a [f64]),
}

/// DTM values over a batch of query points.
#[derive(Debug, Clone)]
pub struct DtmField {
    values: Vec<f64>,
    mass: f64,
    source_size: usize,
}

impl DtmField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Number of support points of the measure the field was computed
    /// against (not the number of queries).
    pub fn source_size(&self) -> usize {
        self.source_size
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

fn check_mass(m: f64) -> Result<()> {
    if !(m > 0.0 && m <= 1.0) {
        return Err(Error::MassOutOfRange(m));
    }
    Ok(())
}

fn check_level(l: f64) -> Result<()> {
    if !(0.0..1.0).contains(&l) {
        return Err(Error::LevelOutOfRange(l));
    }
    Ok(())
}

/// Shared machinery for repeated DTM queries against one space.
///
/// Builds the k-d tree once for coordinate-form spaces of moderate
/// dimension; read-only afterwards, safe to share across rayon workers.
pub struct DtmEvaluator<'a> {
    space: &'a FiniteMeasureSpace,
    tree: Option<KdTree<'a>>,
}

impl<'a> DtmEvaluator<'a> {
    pub fn new(space: &'a FiniteMeasureSpace) -> Self {
        let tree = match space.geometry() {
            Geometry::Points { coords, dim } if *dim <= KDTREE_MAX_DIM => {
                Some(KdTree::new(coords, *dim))
            }
            _ => None,
        };
        DtmEvaluator { space, tree }
    }

    pub fn space(&self) -> &FiniteMeasureSpace {
        self.space
    }

    /// DTM at a single query point.
    pub fn dtm_at(&self, query: QueryPoint<'_>, m: f64) -> Result<f64> {
        check_mass(m)?;
        let profile = self.profile(query, m)?;
        let mut acc = 0.0;
        let mut c_prev = 0.0;
        for (d, w) in profile {
            let c = c_prev + w;
            let take = c.min(m) - c_prev;
            if take > 0.0 {
                acc += d * take;
            }
            c_prev = c;
            if c >= m {
                break;
            }
        }
        Ok(acc / m)
    }

    /// Smallest radius at which the closed ball holds mass strictly above `l`.
    pub fn pseudo_distance_at(&self, query: QueryPoint<'_>, l: f64) -> Result<f64> {
        check_level(l)?;
        let profile = self.profile(query, l)?;
        let mut c = 0.0;
        let mut last = 0.0;
        for (d, w) in profile {
            c += w;
            last = d;
            if c > l {
                return Ok(d);
            }
        }
        // The total mass is 1 > l; reaching here means the cumulative sum
        // fell short of l by rounding only, so the answer is the largest
        // distance in the support.
        Ok(last)
    }

    /// Merged-tie segments `(distance, group weight)` sorted by distance,
    /// covering cumulative weight strictly above `target` (or the whole
    /// support). Weights inside a tie group are summed in value order so the
    /// result is independent of point labels.
    fn profile(&self, query: QueryPoint<'_>, target: f64) -> Result<Vec<(f64, f64)>> {
        let hits = self.covering_hits(query, target)?;
        let weights = self.space.weights();
        let mut segments: Vec<(f64, f64)> = Vec::with_capacity(hits.len());
        let mut group: Vec<f64> = Vec::new();
        let mut i = 0;
        while i < hits.len() {
            let d = hits[i].0;
            group.clear();
            while i < hits.len() && hits[i].0 == d {
                group.push(weights[hits[i].1]);
                i += 1;
            }
            group.sort_by(|a, b| a.total_cmp(b));
            segments.push((d, group.iter().sum()));
        }
        Ok(segments)
    }

    /// Sorted `(distance, index)` hits whose cumulative weight strictly
    /// exceeds `target`, complete with boundary ties.
    fn covering_hits(&self, query: QueryPoint<'_>, target: f64) -> Result<Vec<(f64, usize)>> {
        let n = self.space.len();
        let weights = self.space.weights();
        let k0 = ((target * n as f64).ceil() as usize + 1).clamp(1, n);

        if let Some(tree) = &self.tree {
            let q = self.resolve_coords(query)?;
            let mut k = k0;
            loop {
                let hits = tree.knn_with_ties(q, k);
                let cum: f64 = hits.iter().map(|h| weights[h.index]).sum();
                if cum > target || hits.len() == n {
                    return Ok(hits.into_iter().map(|h| (h.dist, h.index)).collect());
                }
                k = (2 * k).min(n);
            }
        }

        // Brute force: all distances, partial selection up to coverage.
        let mut pairs: Vec<(f64, u32)> = match self.space.geometry() {
            Geometry::Matrix { dist, n: nn } => {
                let QueryPoint::Index(i) = query else {
                    return Err(Error::CoordinateQueryOnMatrix);
                };
                if i >= n {
                    return Err(Error::IndexOutOfRange { index: i, len: n });
                }
                dist[i * nn..(i + 1) * nn]
                    .iter()
                    .enumerate()
                    .map(|(j, &d)| (d, j as u32))
                    .collect()
            }
            Geometry::Points { coords, dim } => {
                let q = self.resolve_coords(query)?;
                (0..n)
                    .map(|j| {
                        let p = &coords[j * dim..(j + 1) * dim];
                        let d2: f64 = q.iter().zip(p).map(|(x, y)| (x - y) * (x - y)).sum();
                        (d2.sqrt(), j as u32)
                    })
                    .collect()
            }
        };

        let cmp = |a: &(f64, u32), b: &(f64, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        let mut k = k0;
        loop {
            if k >= n {
                pairs.sort_unstable_by(cmp);
                return Ok(pairs.into_iter().map(|(d, j)| (d, j as usize)).collect());
            }
            pairs.select_nth_unstable_by(k - 1, cmp);
            let kth = pairs[k - 1].0;
            let mut hits: Vec<(f64, u32)> = pairs[..k].to_vec();
            hits.extend(pairs[k..].iter().copied().filter(|p| p.0 == kth));
            let cum: f64 = hits.iter().map(|&(_, j)| weights[j as usize]).sum();
            if cum > target || hits.len() == n {
                hits.sort_unstable_by(cmp);
                return Ok(hits.into_iter().map(|(d, j)| (d, j as usize)).collect());
            }
            k = (2 * k).min(n);
        }
    }

    fn resolve_coords<'q>(&'q self, query: QueryPoint<'q>) -> Result<&'q [f64]> {
        match query {
            QueryPoint::Coords(c) => {
                let dim = self.space.dim().ok_or(Error::CoordinateQueryOnMatrix)?;
                if c.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: c.len(),
                    });
                }
                Ok(c)
            }
            QueryPoint::Index(i) => match self.space.geometry() {
                Geometry::Points { coords, dim } => {
                    if i >= self.space.len() {
                        return Err(Error::IndexOutOfRange {
                            index: i,
                            len: self.space.len(),
                        });
                    }
                    Ok(&coords[i * dim..(i + 1) * dim])
                }
                Geometry::Matrix { .. } => Err(Error::CoordinateQueryOnMatrix),
            },
        }
    }
}

/// Pseudo-distance of the space's measure at one query point.
pub fn pseudo_distance_at(
    space: &FiniteMeasureSpace,
    query: QueryPoint<'_>,
    l: f64,
) -> Result<f64> {
    DtmEvaluator::new(space).pseudo_distance_at(query, l)
}

/// Distance to the space's measure at one query point.
pub fn dtm_at(space: &FiniteMeasureSpace, query: QueryPoint<'_>, m: f64) -> Result<f64> {
    DtmEvaluator::new(space).dtm_at(query, m)
}

/// DTM evaluated at every support point, in index order.
///
/// Queries run in parallel; the output ordering (and every value) is
/// independent of the worker count.
pub fn dtm_field(space: &FiniteMeasureSpace, m: f64) -> Result<DtmField> {
    check_mass(m)?;
    let eval = DtmEvaluator::new(space);
    let values = (0..space.len())
        .into_par_iter()
        .map(|i| eval.dtm_at(QueryPoint::Index(i), m))
        .collect::<Result<Vec<f64>>>()?;
    Ok(DtmField {
        values,
        mass: m,
        source_size: space.len(),
    })
}

/// DTM of `space`'s measure evaluated at external coordinate queries
/// (row-major flat buffer).
pub fn dtm_field_at_points(
    space: &FiniteMeasureSpace,
    queries: &[f64],
    query_dim: usize,
    m: f64,
) -> Result<DtmField> {
    check_mass(m)?;
    let dim = space.dim().ok_or(Error::CoordinateQueryOnMatrix)?;
    if query_dim != dim || !queries.len().is_multiple_of(query_dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: query_dim,
        });
    }
    let eval = DtmEvaluator::new(space);
    let values = queries
        .par_chunks(query_dim)
        .map(|q| eval.dtm_at(QueryPoint::Coords(q), m))
        .collect::<Result<Vec<f64>>>()?;
    Ok(DtmField {
        values,
        mass: m,
        source_size: space.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line_space(xs: &[f64]) -> FiniteMeasureSpace {
        FiniteMeasureSpace::from_points(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    /// Independent pseudo-distance: full sort over all support distances,
    /// first cumulative weight strictly above `l`.
    fn pseudo_by_full_scan(space: &FiniteMeasureSpace, query: &[f64], l: f64) -> f64 {
        let n = space.len();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|j| {
                (
                    space.distance_to_point(query, j).unwrap(),
                    space.weights()[j],
                )
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut c = 0.0;
        for (d, w) in &pairs {
            c += w;
            if c > l {
                return *d;
            }
        }
        pairs.last().unwrap().0
    }

    /// Midpoint Riemann integration of the pseudo-distance over [0, m].
    fn riemann_dtm(space: &FiniteMeasureSpace, query: &[f64], m: f64, steps: usize) -> f64 {
        let n = space.len();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|j| {
                (
                    space.distance_to_point(query, j).unwrap(),
                    space.weights()[j],
                )
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cum = Vec::with_capacity(n);
        let mut c = 0.0;
        for (_, w) in &pairs {
            c += w;
            cum.push(c);
        }
        let dl = m / steps as f64;
        let mut ptr = 0usize;
        let mut acc = 0.0;
        for i in 0..steps {
            let l = (i as f64 + 0.5) * dl;
            while ptr + 1 < n && cum[ptr] <= l {
                ptr += 1;
            }
            acc += pairs[ptr].0 * dl;
        }
        acc / m
    }

    #[test]
    fn pseudo_distance_examples() {
        let s = line_space(&[0.0, 1.0, 3.0]);
        assert_eq!(
            pseudo_distance_at(&s, QueryPoint::Coords(&[0.0]), 0.4).unwrap(),
            1.0
        );
        // Own mass already exceeds the level.
        assert_eq!(
            pseudo_distance_at(&s, QueryPoint::Index(0), 0.2).unwrap(),
            0.0
        );
        let w = FiniteMeasureSpace::from_points_weighted(
            vec![vec![0.0], vec![2.0]],
            vec![0.25, 0.75],
        )
        .unwrap();
        assert_eq!(
            pseudo_distance_at(&w, QueryPoint::Coords(&[0.0]), 0.5).unwrap(),
            2.0
        );
        assert!(matches!(
            pseudo_distance_at(&s, QueryPoint::Index(0), 1.0),
            Err(Error::LevelOutOfRange(_))
        ));
    }

    #[test]
    fn dtm_examples() {
        let s = line_space(&[0.0, 1.0, 3.0]);
        let q = QueryPoint::Coords(&[0.0]);
        assert!((dtm_at(&s, q, 2.0 / 3.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((dtm_at(&s, q, 1.0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((dtm_at(&s, q, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(dtm_at(&s, q, 0.0), Err(Error::MassOutOfRange(_))));
        assert!(matches!(dtm_at(&s, q, 1.5), Err(Error::MassOutOfRange(_))));
    }

    #[test]
    fn dtm_field_examples() {
        let s = line_space(&[0.0, 1.0, 3.0]);
        let f = dtm_field(&s, 2.0 / 3.0).unwrap();
        let want = [0.5, 0.5, 1.0];
        for (v, w) in f.values().iter().zip(&want) {
            assert!((v - w).abs() < 1e-15);
        }
        // m below the smallest weight: support points see only themselves.
        let f = dtm_field(&s, 0.25).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dtm_scales_exactly_under_dilation() {
        let s = line_space(&[0.0, 1.0, 3.0, 7.5]);
        let scaled = s.scale(2.0).unwrap();
        let m = 0.6;
        let a = dtm_field(&s, m).unwrap();
        let b = dtm_field(&scaled, m).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_eq!(2.0 * x, *y);
        }
    }

    #[test]
    fn segment_form_matches_riemann_integration() {
        let s = FiniteMeasureSpace::from_points_weighted(
            vec![vec![0.0], vec![0.7], vec![1.3], vec![2.9], vec![4.0]],
            vec![0.1, 0.3, 0.2, 0.25, 0.15],
        )
        .unwrap();
        for &m in &[0.07, 0.3, 0.55, 0.999, 1.0] {
            let closed = dtm_at(&s, QueryPoint::Coords(&[0.2]), m).unwrap();
            let oracle = riemann_dtm(&s, &[0.2], m, 200_000);
            assert!(
                (closed - oracle).abs() < 1e-4,
                "m={m}: closed {closed} vs riemann {oracle}"
            );
        }
    }

    #[test]
    fn strict_and_closed_ball_conventions_integrate_alike() {
        // The pseudo-distance with closed inequality (mass >= l) differs from
        // the strict one only at jump levels, so the integrated DTM agrees.
        let s = FiniteMeasureSpace::from_points_weighted(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![5.0]],
            vec![0.25, 0.25, 0.25, 0.25],
        )
        .unwrap();
        let q = [0.0];
        let m = 0.75;
        let steps = 400_000;
        let dl = m / steps as f64;
        let mut strict = 0.0;
        let mut closed = 0.0;
        for i in 0..steps {
            let l = (i as f64 + 0.5) * dl;
            strict += pseudo_by_full_scan(&s, &q, l) * dl;
            // Closed convention: first cumulative weight >= l.
            let mut pairs: Vec<(f64, f64)> = (0..s.len())
                .map(|j| (s.distance_to_point(&q, j).unwrap(), s.weights()[j]))
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut c = 0.0;
            let mut val = pairs.last().unwrap().0;
            for (d, w) in &pairs {
                c += w;
                if c >= l {
                    val = *d;
                    break;
                }
            }
            closed += val * dl;
        }
        let exact = dtm_at(&s, QueryPoint::Coords(&q), m).unwrap();
        assert!((strict / m - exact).abs() < 1e-4);
        assert!((closed / m - exact).abs() < 1e-4);
    }

    #[test]
    fn permutation_invariance_bit_exact() {
        // Weighted matrix space with tied distances: summation inside a tie
        // group must not depend on labels.
        let rows = vec![
            vec![0.0, 1.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0, 2.0],
            vec![1.0, 1.0, 0.0, 2.0],
            vec![2.0, 2.0, 2.0, 0.0],
        ];
        let w = vec![0.1, 0.2, 0.3, 0.4];
        let s = FiniteMeasureSpace::from_distance_matrix_weighted(rows.clone(), w.clone()).unwrap();

        let perm = [2usize, 0, 3, 1]; // new position of each old point
        let mut prows = vec![vec![0.0; 4]; 4];
        let mut pw = vec![0.0; 4];
        for i in 0..4 {
            pw[perm[i]] = w[i];
            for j in 0..4 {
                prows[perm[i]][perm[j]] = rows[i][j];
            }
        }
        let sp = FiniteMeasureSpace::from_distance_matrix_weighted(prows, pw).unwrap();

        for m in [0.15, 0.5, 0.95] {
            for i in 0..4 {
                let a = dtm_at(&s, QueryPoint::Index(i), m).unwrap();
                let b = dtm_at(&sp, QueryPoint::Index(perm[i]), m).unwrap();
                assert_eq!(a, b, "m={m} i={i}");
            }
        }
    }

    #[test]
    fn field_at_external_points() {
        let s = line_space(&[0.0, 1.0, 3.0]);
        let f = dtm_field_at_points(&s, &[0.0, 10.0], 1, 2.0 / 3.0).unwrap();
        assert!((f.values()[0] - 0.5).abs() < 1e-15);
        // Far query: mean of distances to the two nearest points {3, 1}.
        assert!((f.values()[1] - 8.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn monotone_in_mass(
            xs in prop::collection::vec(-10.0f64..10.0, 2..30),
            q in -12.0f64..12.0,
            m1 in 0.01f64..1.0,
            m2 in 0.01f64..1.0,
        ) {
            let s = line_space(&xs);
            let (lo, hi) = if m1 <= m2 { (m1, m2) } else { (m2, m1) };
            let a = dtm_at(&s, QueryPoint::Coords(&[q]), lo).unwrap();
            let b = dtm_at(&s, QueryPoint::Coords(&[q]), hi).unwrap();
            prop_assert!(a <= b + 1e-12);
        }

        #[test]
        fn one_lipschitz_in_query(
            pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 3..40),
            qa in prop::collection::vec(-6.0f64..6.0, 2),
            qb in prop::collection::vec(-6.0f64..6.0, 2),
            m in 0.05f64..1.0,
        ) {
            let s = FiniteMeasureSpace::from_points(pts).unwrap();
            let a = dtm_at(&s, QueryPoint::Coords(&qa), m).unwrap();
            let b = dtm_at(&s, QueryPoint::Coords(&qb), m).unwrap();
            let gap = ((qa[0] - qb[0]).powi(2) + (qa[1] - qb[1]).powi(2)).sqrt();
            prop_assert!((a - b).abs() <= gap + 1e-12);
        }

        #[test]
        fn uniform_mass_is_knn_mean(
            xs in prop::collection::vec(-100.0f64..100.0, 8),
            q in -120.0f64..120.0,
            k in 1usize..8,
        ) {
            // N = 8 is a power of two, so m = k/N and the per-point weight
            // are exact and the identity holds bit-for-bit.
            let s = line_space(&xs);
            let m = k as f64 / 8.0;
            let got = dtm_at(&s, QueryPoint::Coords(&[q]), m).unwrap();
            let mut d: Vec<f64> = xs.iter().map(|x| (x - q).abs()).collect();
            d.sort_by(|a, b| a.total_cmp(b));
            let mean = d[..k].iter().sum::<f64>() / k as f64;
            prop_assert_eq!(got, mean);
        }

        #[test]
        fn uniform_mass_knn_mean_general_n(
            xs in prop::collection::vec(-100.0f64..100.0, 3..25),
            q in -120.0f64..120.0,
            kf in 0.0f64..1.0,
        ) {
            let n = xs.len();
            let k = ((kf * n as f64) as usize).clamp(1, n);
            let s = line_space(&xs);
            let got = dtm_at(&s, QueryPoint::Coords(&[q]), k as f64 / n as f64).unwrap();
            let mut d: Vec<f64> = xs.iter().map(|x| (x - q).abs()).collect();
            d.sort_by(|a, b| a.total_cmp(b));
            let mean = d[..k].iter().sum::<f64>() / k as f64;
            prop_assert!((got - mean).abs() <= 1e-10 * (1.0 + mean));
        }

        #[test]
        fn tree_and_brute_paths_agree(
            pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 3..30),
            m in 0.05f64..1.0,
        ) {
            // Coordinate form takes the k-d tree path; the matrix copy of the
            // same geometry takes brute-force partial selection.
            let n = pts.len();
            let s = FiniteMeasureSpace::from_points(pts).unwrap();
            let mut rows = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    rows[i][j] = s.pairwise_distance(i, j).unwrap();
                }
            }
            let sm = FiniteMeasureSpace::from_distance_matrix(rows).unwrap();
            let a = dtm_field(&s, m).unwrap();
            let b = dtm_field(&sm, m).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}
