//! Brute-force oracles shared by the oracle suite and the acceptance run.

#![allow(dead_code)]

use std::sync::Arc;

use joinsafe_core::classifiers::svm::{dual_objective, solve_smo, DenseGram};
use joinsafe_core::classifiers::logreg::loss_and_gradient;
use joinsafe_core::classifiers::{best_split, train_nb, KernelSpec, SmoParams, SplitCriterion};
use joinsafe_core::relational::{one_hot_encode, CategoricalDomain, Column, Dataset, EncodedMatrix, FeatureRole};
use joinsafe_core::simulation::decompose_bias_variance;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Home-feature dataset from explicit code columns.
pub fn dataset(sizes: &[usize], columns: Vec<Vec<u32>>, labels: Vec<u8>) -> Dataset {
    let cols = sizes
        .iter()
        .zip(columns)
        .enumerate()
        .map(|(i, (&k, codes))| {
            let d = Arc::new(CategoricalDomain::indexed(format!("f{i}"), k).unwrap());
            Column::new(format!("f{i}"), d, codes).unwrap()
        })
        .collect();
    Dataset::new(cols, vec![FeatureRole::Home; sizes.len()], labels).unwrap()
}

pub fn random_dataset(r: &mut ChaCha8Rng, n: usize, sizes: &[usize]) -> Dataset {
    let columns = sizes
        .iter()
        .map(|&k| (0..n).map(|_| r.random_range(0..k as u32)).collect())
        .collect();
    let labels = (0..n).map(|_| r.random_range(0..2u8)).collect();
    dataset(sizes, columns, labels)
}

fn entropy(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    c.iter()
        .filter(|&&x| x > 0)
        .map(|&x| {
            let p = x as f64 / n;
            -p * p.log2()
        })
        .sum()
}

fn gini(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    1.0 - c.iter().map(|&x| (x as f64 / n).powi(2)).sum::<f64>()
}

fn oracle_gain(l: [usize; 2], r: [usize; 2], crit: SplitCriterion) -> f64 {
    let (nl, nr) = ((l[0] + l[1]) as f64, (r[0] + r[1]) as f64);
    let n = nl + nr;
    let p = [l[0] + r[0], l[1] + r[1]];
    let imp = |c| if crit == SplitCriterion::Gini { gini(c) } else { entropy(c) };
    let g = imp(p) - nl / n * imp(l) - nr / n * imp(r);
    if crit == SplitCriterion::GainRatio {
        g / entropy([l[0] + l[1], r[0] + r[1]])
    } else {
        g
    }
}

/// (gain, feature, signature) of the best root split by full enumeration.
fn oracle_root(data: &Dataset, crit: SplitCriterion) -> Option<(f64, usize, Vec<u8>)> {
    let mut best: Option<(f64, usize, Vec<u8>)> = None;
    for (f, col) in data.columns().iter().enumerate() {
        let mut values: Vec<u32> = col.codes.clone();
        values.sort_unstable();
        values.dedup();
        let k = values.len();
        for mask in 0u32..(1 << k) {
            // canonical form: the smallest value sits left
            if mask & 1 != 0 || mask == 0 {
                continue;
            }
            let side = |v: u32| (mask >> values.iter().position(|&x| x == v).unwrap()) & 1;
            let (mut l, mut r) = ([0usize; 2], [0usize; 2]);
            for (&v, &y) in col.codes.iter().zip(data.labels()) {
                if side(v) == 0 {
                    l[y as usize] += 1;
                } else {
                    r[y as usize] += 1;
                }
            }
            let gain = oracle_gain(l, r, crit).max(0.0);
            let sig: Vec<u8> = (0..k).map(|i| ((mask >> i) & 1) as u8).collect();
            let better = match &best {
                None => true,
                Some((bg, bf, bs)) => {
                    gain > bg + 1e-12 || ((gain - bg).abs() <= 1e-12 && (f, &sig) < (*bf, bs))
                }
            };
            if better {
                best = Some((gain, f, sig));
            }
        }
    }
    best.filter(|b| b.0 > 1e-12)
}

/// Root split of `best_split` against enumeration on one random instance.
pub fn tree_root_matches(seed: u64) -> Check {
    let mut r = rng(seed);
    let n = r.random_range(2..=20);
    let sizes: Vec<usize> = (0..r.random_range(1..=3)).map(|_| r.random_range(2..=5)).collect();
    let data = random_dataset(&mut r, n, &sizes);
    let rows: Vec<usize> = (0..n).collect();
    for crit in SplitCriterion::ALL {
        let got = best_split(&data, &rows, crit).map(|s| (s.gain, s.feature, s.signature()));
        let want = oracle_root(&data, crit);
        let same = match (&got, &want) {
            (None, None) => true,
            (Some(g), Some(w)) => (g.0 - w.0).abs() <= 1e-12 && g.1 == w.1 && g.2 == w.2,
            _ => false,
        };
        if !same {
            return Err(format!("seed {seed} {crit:?}: got {got:?}, oracle {want:?}"));
        }
    }
    Ok(())
}

/// Exhaustive dual optimum: every free/lower/upper assignment whose
/// stationarity system is solvable and feasible.
fn smo_oracle(gram: &DMatrix<f64>, y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * gram[(i, j)]);
    let objective = |a: &[f64]| {
        let av = DVector::from_column_slice(a);
        a.iter().sum::<f64>() - 0.5 * (av.transpose() * &q * &av)[(0, 0)]
    };
    let mut best = f64::NEG_INFINITY;
    let mut state = vec![0u8; n];
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut x = code;
        for s in state.iter_mut() {
            *s = (x % 3) as u8;
            x /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        if !free.is_empty() {
            // [Q_FF y_F; y_Fᵀ 0] [α_F; b] = [1 - Q_FB α_B; -y_Bᵀ α_B]
            let m = free.len();
            let mut a = DMatrix::zeros(m + 1, m + 1);
            let mut rhs = DVector::zeros(m + 1);
            for (ii, &i) in free.iter().enumerate() {
                for (jj, &j) in free.iter().enumerate() {
                    a[(ii, jj)] = q[(i, j)];
                }
                a[(ii, m)] = y[i];
                a[(m, ii)] = y[i];
                rhs[ii] = 1.0 - (0..n).filter(|&j| state[j] != 2).map(|j| q[(i, j)] * alpha[j]).sum::<f64>();
            }
            rhs[m] = -(0..n).filter(|&j| state[j] != 2).map(|j| y[j] * alpha[j]).sum::<f64>();
            let Some(sol) = a.clone().lu().solve(&rhs) else { continue };
            if (&a * &sol - &rhs).norm() > 1e-8 {
                continue;
            }
            for (ii, &i) in free.iter().enumerate() {
                alpha[i] = sol[ii];
            }
        }
        let eq: f64 = alpha.iter().zip(y).map(|(a, y)| a * y).sum();
        if eq.abs() > 1e-9 || alpha.iter().any(|&a| a < -1e-9 || a > c + 1e-9) {
            continue;
        }
        best = best.max(objective(&alpha));
    }
    best
}

/// SMO's dual objective on one random instance of at most 8 one-hot rows
/// with 4 columns, against the exhaustive optimum.
pub fn smo_matches_oracle(seed: u64) -> Check {
    let mut r = rng(seed);
    let n = r.random_range(2..=8);
    let mut labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2u8)).collect();
    labels[0] = 0;
    labels[1] = 1;
    let data = random_dataset(&mut r, n, &[2, 2]);
    let data = dataset(
        &[2, 2],
        data.columns().iter().map(|c| c.codes.clone()).collect(),
        labels,
    );
    let enc = one_hot_encode(&data).unwrap();
    let c = [0.1, 1.0, 10.0][r.random_range(0..3)];
    let spec = match r.random_range(0..3) {
        0 => KernelSpec::linear(c),
        1 => KernelSpec::rbf(c, [0.1, 0.5, 2.0][r.random_range(0..3)]),
        _ => KernelSpec::quadratic(c, 0.5),
    };
    let rows: Vec<&[f64]> = (0..n).map(|i| enc.row(i)).collect();
    let gram = DenseGram::new(&rows, &spec).unwrap();
    let y: Vec<f64> = enc.labels().iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let params = SmoParams {
        tol: 1e-10,
        max_passes: 10_000,
    };
    let sol = solve_smo(&gram, &y, c, &params).map_err(|e| format!("seed {seed}: {e}"))?;
    if sol.alpha.iter().any(|&a| !(0.0..=c).contains(&a)) {
        return Err(format!("seed {seed}: alpha outside [0, {c}]: {:?}", sol.alpha));
    }
    let got = dual_objective(&gram, &y, &sol.alpha);
    let dense = DMatrix::from_fn(n, n, |i, j| joinsafe_core::classifiers::svm::Gram::get(&gram, i, j));
    let want = smo_oracle(&dense, &y, c);
    if (got - want).abs() > 1e-6 {
        return Err(format!("seed {seed} {spec:?}: SMO {got}, oracle {want}"));
    }
    Ok(())
}

/// Largest relative error of the analytic logreg gradient against central
/// differences at 10 random parameter points.
pub fn logreg_fd_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let data = random_dataset(&mut r, 30, &[3, 4, 2]);
    let enc: EncodedMatrix = one_hot_encode(&data).unwrap();
    let d = enc.n_cols() + 1;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let p: Vec<f64> = (0..d).map(|_| r.random_range(-2.0..2.0)).collect();
        let l2 = r.random_range(0.0..0.5);
        let (_, g) = loss_and_gradient(&enc, &p, l2).unwrap();
        let h = 1e-5;
        for k in 0..d {
            let mut up = p.clone();
            let mut dn = p.clone();
            up[k] += h;
            dn[k] -= h;
            let fd = (loss_and_gradient(&enc, &up, l2).unwrap().0 - loss_and_gradient(&enc, &dn, l2).unwrap().0) / (2.0 * h);
            worst = worst.max((fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-3));
        }
    }
    worst
}

/// Naive Bayes posteriors on three fixtures against hand-computed values.
pub fn nb_fixtures() -> Check {
    // 1: one binary feature, labels 0,0,1,1 with codes 0,0,0,1
    // P(y)=1/2; P(x=0|0)=(2+1)/(2+2)=3/4, P(x=0|1)=(1+1)/4=1/2
    // posterior(1|x=0) = (1/2)/(3/4+1/2) = 0.4
    let m = train_nb(&dataset(&[2], vec![vec![0, 0, 0, 1]], vec![0, 0, 1, 1])).unwrap();
    check_close("fixture 1", m.posterior(&[0]).unwrap()[1], 0.4)?;
    // 2: three-valued feature, priors 1/3 and 2/3
    // codes/labels: (0,0) (1,1) (1,1) (2,1) (2,0) (0,1)
    // P(y=0)=2/6, P(y=1)=4/6; P(x=2|0)=(1+1)/(2+3)=2/5, P(x=2|1)=(1+1)/(4+3)=2/7
    // joint0 = 1/3*2/5 = 2/15, joint1 = 2/3*2/7 = 4/21; post1 = (4/21)/(2/15+4/21) = 10/17
    let m = train_nb(&dataset(&[3], vec![vec![0, 1, 1, 2, 2, 0]], vec![0, 1, 1, 1, 0, 1])).unwrap();
    check_close("fixture 2", m.posterior(&[2]).unwrap()[1], 10.0 / 17.0)?;
    // 3: two binary features, rows (0,0,y0) (0,1,y0) (1,1,y1) (1,0,y1) (1,1,y1)
    // P(y=0)=2/5, P(y=1)=3/5
    // f0=1: P(.|0)=(0+1)/4=1/4, P(.|1)=(3+1)/5=4/5
    // f1=1: P(.|0)=(1+1)/4=1/2, P(.|1)=(2+1)/5=3/5
    // joint0 = 2/5*1/4*1/2 = 1/20, joint1 = 3/5*4/5*3/5 = 36/125
    let m = train_nb(&dataset(&[2, 2], vec![vec![0, 0, 1, 1, 1], vec![0, 1, 1, 0, 1]], vec![0, 0, 1, 1, 1])).unwrap();
    let (j0, j1) = (1.0 / 20.0, 36.0 / 125.0);
    check_close("fixture 3", m.posterior(&[1, 1]).unwrap()[1], j1 / (j0 + j1))?;
    Ok(())
}

fn check_close(what: &str, got: f64, want: f64) -> Check {
    if (got - want).abs() <= 1e-12 {
        Ok(())
    } else {
        Err(format!("{what}: got {got}, want {want}"))
    }
}

/// `avg_error = bias + net_variance` on one random prediction matrix.
pub fn decomposition_identity_gap(seed: u64) -> f64 {
    let mut r = rng(seed);
    let runs = r.random_range(1..=30);
    let points = r.random_range(1..=50);
    let bias_p: f64 = r.random();
    let preds: Vec<Vec<u8>> = (0..runs)
        .map(|_| (0..points).map(|_| u8::from(r.random_bool(bias_p))).collect())
        .collect();
    let optimal: Vec<u8> = (0..points).map(|_| r.random_range(0..2u8)).collect();
    let d = decompose_bias_variance(&preds, &optimal).unwrap();
    (d.avg_error - d.bias - d.net_variance).abs()
}
