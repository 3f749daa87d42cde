use std::collections::HashMap;
use std::hash::Hash;

use nalgebra::{DMatrix, DVector};

use super::ols::OlsFit;
use crate::error::{Error, Result};

pub const WITHIN_TOL: f64 = 1e-10;
pub const WITHIN_MAX_ITER: usize = 1000;

#[derive(Debug, Clone)]
pub struct ClusteredSe {
    pub se: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub n_firm: usize,
    pub n_month: usize,
    /// Parameters whose two-way variance came out negative and was replaced
    /// by the intersection-only variance.
    pub floored: Vec<usize>,
}

fn labels<T: Hash + Eq + Clone>(ids: &[T]) -> (Vec<usize>, usize) {
    let mut map: HashMap<T, usize> = HashMap::new();
    let out = ids
        .iter()
        .map(|id| {
            let next = map.len();
            *map.entry(id.clone()).or_insert(next)
        })
        .collect();
    (out, map.len())
}

/// One-way cluster sandwich with the `G/(G−1)·(N−1)/(N−K)` correction.
/// `k` is the parameter count used in the correction.
pub fn one_way(fit: &OlsFit, groups: &[usize], n_groups: usize, k: usize) -> DMatrix<f64> {
    let p = fit.n_params();
    let n = fit.n_obs();
    let mut scores = vec![DVector::<f64>::zeros(p); n_groups];
    for (i, &g) in groups.iter().enumerate() {
        let row = fit.x.row(i).transpose();
        scores[g] += row * fit.residuals[i];
    }
    let mut meat = DMatrix::<f64>::zeros(p, p);
    for s in &scores {
        meat += s * s.transpose();
    }
    let g = n_groups as f64;
    let c = g / (g - 1.0) * (n as f64 - 1.0) / (n as f64 - k as f64);
    &fit.xtx_inv * meat * &fit.xtx_inv * c
}

/// Two-way clustered covariance `V_firm + V_month − V_firm∩month`.
pub fn clustered_se<F, M>(fit: &OlsFit, firm: &[F], month: &[M], k: usize) -> Result<ClusteredSe>
where
    F: Hash + Eq + Clone,
    M: Hash + Eq + Clone,
{
    let n = fit.n_obs();
    if firm.len() != n || month.len() != n {
        return Err(Error::validation("cluster labels do not match the sample"));
    }
    let (f, nf) = labels(firm);
    let (m, nm) = labels(month);
    if nf < 2 || nm < 2 {
        return Err(Error::validation(format!(
            "two-way clustering needs at least two clusters per dimension (firm {nf}, month {nm})"
        )));
    }
    let pairs: Vec<(usize, usize)> = f.iter().copied().zip(m.iter().copied()).collect();
    let (fm, nfm) = labels(&pairs);
    let v_inter = one_way(fit, &fm, nfm, k);
    let mut v = one_way(fit, &f, nf, k) + one_way(fit, &m, nm, k) - &v_inter;
    let mut floored = Vec::new();
    for j in 0..v.nrows() {
        if v[(j, j)] < 0.0 {
            v[(j, j)] = v_inter[(j, j)];
            floored.push(j);
        }
    }
    Ok(ClusteredSe {
        se: (0..v.nrows()).map(|j| v[(j, j)].sqrt()).collect(),
        covariance: v,
        n_firm: nf,
        n_month: nm,
        floored,
    })
}

/// Alternating firm and month demeaning of every column until the largest
/// change in a pass drops below `WITHIN_TOL`. Returns the pass count.
pub fn within_transform<F, M>(
    columns: &mut [Vec<f64>],
    firm: Option<&[F]>,
    month: Option<&[M]>,
) -> Result<usize>
where
    F: Hash + Eq + Clone,
    M: Hash + Eq + Clone,
{
    let dims: Vec<(Vec<usize>, usize)> =
        [firm.map(labels), month.map(labels)].into_iter().flatten().collect();
    if dims.is_empty() {
        return Ok(0);
    }
    for pass in 1..=WITHIN_MAX_ITER {
        let mut max_change = 0.0f64;
        for (g, ng) in &dims {
            for col in columns.iter_mut() {
                let mut sum = vec![0.0; *ng];
                let mut cnt = vec![0usize; *ng];
                for (i, &k) in g.iter().enumerate() {
                    sum[k] += col[i];
                    cnt[k] += 1;
                }
                for (i, &k) in g.iter().enumerate() {
                    let mean = sum[k] / cnt[k] as f64;
                    col[i] -= mean;
                    max_change = max_change.max(mean.abs());
                }
            }
        }
        if max_change < WITHIN_TOL || dims.len() == 1 {
            return Ok(pass);
        }
        if pass == WITHIN_MAX_ITER {
            return Err(Error::WithinNonConvergence { iterations: pass, max_change });
        }
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::super::ols::{design, ols_fit};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fit_random(n: usize, seed: u64) -> OlsFit {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let y: Vec<f64> = (0..n).map(|i| 1.0 + x[i] - z[i] + rng.gen::<f64>()).collect();
        ols_fit(&y, design(&[x, z], true), vec!["c".into(), "x".into(), "z".into()], true).unwrap()
    }

    /// Brute force: meat = Σ_i Σ_j 1[same cluster] e_i e_j x_i x_j'.
    fn brute(fit: &OlsFit, same: impl Fn(usize, usize) -> bool, groups: usize) -> DMatrix<f64> {
        let (n, p) = fit.x.shape();
        let mut meat = DMatrix::<f64>::zeros(p, p);
        for i in 0..n {
            for j in 0..n {
                if same(i, j) {
                    let xi = fit.x.row(i).transpose();
                    let xj = fit.x.row(j);
                    meat += xi * xj * (fit.residuals[i] * fit.residuals[j]);
                }
            }
        }
        let g = groups as f64;
        let c = g / (g - 1.0) * (n as f64 - 1.0) / (n as f64 - p as f64);
        &fit.xtx_inv * meat * &fit.xtx_inv * c
    }

    #[test]
    fn two_way_matches_brute_force() {
        let fit = fit_random(60, 11);
        let firm: Vec<usize> = (0..60).map(|i| i % 7).collect();
        let month: Vec<usize> = (0..60).map(|i| i / 6).collect();
        let got = clustered_se(&fit, &firm, &month, 3).unwrap();
        let pairs: std::collections::HashSet<(usize, usize)> = (0..60).map(|i| (firm[i], month[i])).collect();
        let v = brute(&fit, |i, j| firm[i] == firm[j], 7) + brute(&fit, |i, j| month[i] == month[j], 10)
            - brute(&fit, |i, j| firm[i] == firm[j] && month[i] == month[j], pairs.len());
        for j in 0..3 {
            let want = if v[(j, j)] < 0.0 { f64::NAN } else { v[(j, j)].sqrt() };
            assert!((got.se[j] - want).abs() < 1e-8, "{j}: {} vs {want}", got.se[j]);
        }
    }

    #[test]
    fn singleton_clusters_give_robust_sandwich() {
        let fit = fit_random(40, 5);
        let ids: Vec<usize> = (0..40).collect();
        let got = clustered_se(&fit, &ids, &ids, 3).unwrap();
        let hc1 = brute(&fit, |i, j| i == j, 40);
        for j in 0..3 {
            assert!((got.se[j] - hc1[(j, j)].sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn clustering_inflates_with_duplicated_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base: Vec<(f64, f64)> = (0..50).map(|_| (rng.gen::<f64>(), rng.gen::<f64>() - 0.5)).collect();
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut g = Vec::new();
        for (k, (xv, e)) in base.iter().enumerate() {
            for _ in 0..4 {
                x.push(*xv);
                y.push(2.0 * xv + e + 0.01 * rng.gen::<f64>());
                g.push(k);
            }
        }
        let fit = ols_fit(&y, design(&[x], true), vec!["c".into(), "x".into()], true).unwrap();
        let (labs, ng) = labels(&g);
        let clustered = one_way(&fit, &labs, ng, 2);
        let s2 = fit.residuals.iter().map(|e| e * e).sum::<f64>() / (fit.n_obs() - 2) as f64;
        let naive = fit.xtx_inv[(1, 1)] * s2;
        assert!(clustered[(1, 1)] > naive);
    }

    #[test]
    fn single_cluster_is_rejected() {
        let fit = fit_random(20, 1);
        let one = vec![0; 20];
        let ids: Vec<usize> = (0..20).collect();
        assert!(clustered_se(&fit, &one, &ids, 3).is_err());
    }

    #[test]
    fn relabeling_clusters_changes_nothing() {
        let fit = fit_random(60, 2);
        let firm: Vec<usize> = (0..60).map(|i| i % 5).collect();
        let month: Vec<usize> = (0..60).map(|i| i / 5).collect();
        let a = clustered_se(&fit, &firm, &month, 3).unwrap();
        let firm2: Vec<String> = firm.iter().map(|f| format!("firm{}", 100 - f)).collect();
        let month2: Vec<i64> = month.iter().map(|m| -7 * *m as i64).collect();
        let b = clustered_se(&fit, &firm2, &month2, 3).unwrap();
        for j in 0..3 {
            assert!((a.se[j] - b.se[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn balanced_panel_converges_in_one_double_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let firm: Vec<usize> = (0..30).map(|i| i / 6).collect();
        let month: Vec<usize> = (0..30).map(|i| i % 6).collect();
        let mut cols = vec![(0..30).map(|_| rng.gen::<f64>()).collect::<Vec<f64>>()];
        let passes = within_transform(&mut cols, Some(&firm), Some(&month)).unwrap();
        assert!(passes <= 2);
    }

    #[test]
    fn unbalanced_panel_has_zero_group_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 80;
        let firm: Vec<usize> = (0..n).map(|_| rng.gen_range(0..6)).collect();
        let month: Vec<usize> = (0..n).map(|_| rng.gen_range(0..9)).collect();
        let mut cols = vec![(0..n).map(|_| rng.gen::<f64>()).collect::<Vec<f64>>()];
        within_transform(&mut cols, Some(&firm), Some(&month)).unwrap();
        for (g, ng) in [labels(&firm), labels(&month)] {
            let mut sum = vec![0.0; ng];
            for (i, &k) in g.iter().enumerate() {
                sum[k] += cols[0][i];
            }
            assert!(sum.iter().all(|s| s.abs() < 1e-9));
        }
    }

    #[test]
    fn one_firm_is_month_demeaning() {
        let firm = vec![0; 6];
        let month = vec![0, 0, 1, 1, 2, 2];
        let mut a = vec![vec![1.0, 3.0, 5.0, 9.0, 2.0, 2.0]];
        within_transform(&mut a, Some(&firm), Some(&month)).unwrap();
        let mut b = vec![vec![1.0, 3.0, 5.0, 9.0, 2.0, 2.0]];
        within_transform::<usize, usize>(&mut b, None, Some(&month)).unwrap();
        for (x, y) in a[0].iter().zip(&b[0]) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(b[0], vec![-1.0, 1.0, -2.0, 2.0, 0.0, 0.0]);
    }
}
