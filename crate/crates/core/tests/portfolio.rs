use chrono::NaiveDate;
use tailclust::data::ReturnPanel;
use tailclust::hierclust::Partition;
use tailclust::portfolio::*;

fn panel(returns: Vec<Vec<f64>>) -> ReturnPanel {
    let base = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let t = returns[0].len();
    ReturnPanel {
        tickers: (0..returns.len()).map(|i| format!("A{i:02}")).collect(),
        base_date: base,
        dates: (1..=t as i64).map(|k| base + chrono::Duration::days(k)).collect(),
        returns,
    }
}

/// Closed-form returns reproducible outside Rust.
fn wave(d: usize, t: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| {
            let fi = i as f64;
            (0..t)
                .map(|k| {
                    let x = k as f64;
                    0.02 * (1.3 * x + 0.7 * fi * fi + fi).sin() + 0.004 * (0.37 * x * (fi + 1.0)).cos() + 0.0005 * (fi - d as f64 / 2.0)
                })
                .collect()
        })
        .collect()
}

fn simple_cvar(w: &[f64], r: &[Vec<f64>], alpha: f64) -> f64 {
    let p: Vec<f64> = (0..r[0].len()).map(|k| w.iter().zip(r).map(|(w, r)| w * r[k].exp_m1()).sum()).collect();
    cvar(&p, alpha).unwrap()
}

#[test]
fn min_cvar_matches_highs() {
    // optimal objective from scipy.optimize.linprog(method="highs")
    for (d, t, alpha, reference) in [
        (4, 60, 0.05, 0.001381043127303757),
        (6, 200, 0.1, 0.0012592763410417798),
        (10, 500, 0.05, 0.000962516175434567),
    ] {
        let r = wave(d, t);
        let w = min_cvar_unconstrained(&panel(r.clone()), alpha).unwrap();
        w.validate().unwrap();
        let got = simple_cvar(&w.weights, &r, alpha);
        assert!((got - reference).abs() < 1e-12, "d={d}: {got} vs {reference}");
    }
}

#[test]
fn min_cvar_beats_grid() {
    let r = wave(3, 10);
    let alpha = 0.2;
    let w = min_cvar_unconstrained(&panel(r.clone()), alpha).unwrap();
    let lp = cvar(&portfolio_log_returns(&w.weights, &r), alpha).unwrap();
    let mut grid = f64::INFINITY;
    for a in 0..=100 {
        for b in 0..=100 - a {
            let ws = [a as f64 / 100.0, b as f64 / 100.0, (100 - a - b) as f64 / 100.0];
            grid = grid.min(cvar(&portfolio_log_returns(&ws, &r), alpha).unwrap());
        }
    }
    assert!((lp - grid).abs() < 1e-3 && lp <= grid + 1e-6, "{lp} vs {grid}");
}

#[test]
fn min_cvar_dominance_and_duplicates() {
    let mut r = wave(3, 80);
    r[1] = r[0].iter().zip(&r[2]).map(|(a, b)| a.max(*b) + 0.01).collect();
    let w = min_cvar_unconstrained(&panel(r.clone()), 0.1).unwrap();
    assert_eq!(w.weights, vec![0.0, 1.0, 0.0]);

    let r = vec![r[2].clone(), r[2].clone()];
    let w = min_cvar_unconstrained(&panel(r), 0.1).unwrap();
    assert_eq!(w.weights, vec![0.5, 0.5]);
}

#[test]
fn min_cvar_full_scale() {
    let r = wave(38, 1250);
    let start = std::time::Instant::now();
    let w = min_cvar_unconstrained(&panel(r), 0.2).unwrap();
    w.validate().unwrap();
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn gmv_beats_equal_weight() {
    let p = panel(wave(5, 300));
    let cov = covariance(&p);
    let g = global_min_variance(&p.tickers, &cov).unwrap();
    let var = |w: &[f64]| -> f64 { (0..5).map(|i| (0..5).map(|j| w[i] * cov[i][j] * w[j]).sum::<f64>()).sum() };
    let ew = equal_weight(&p.tickers).unwrap();
    assert!(var(&g.weights) <= var(&ew.weights) + 1e-18);
    for (i, row) in cov.iter().enumerate() {
        assert!(var(&g.weights) <= row[i]);
    }
}

#[test]
fn cluster_selection_is_exhaustive_optimum() {
    let p = panel(wave(7, 150));
    let part = Partition::from_labels(&[0, 1, 0, 2, 1, 2, 2]);
    let sel = cluster_min_cvar(&p, &part, 0.2).unwrap();
    let all = enumerate_cluster_candidates(&p, &part, 0.2).unwrap();
    assert_eq!(all.len() as u64, sel.candidates);
    assert_eq!(sel.candidates, 3 * 3 * 4 - 1);
    assert!(all.iter().all(|(_, c)| sel.train_cvar <= *c));
    let min = all.iter().map(|(_, c)| *c).fold(f64::INFINITY, f64::min);
    assert_eq!(sel.train_cvar, min);
    let nonzero: Vec<usize> = (0..7).filter(|&i| sel.weights.weights[i] > 0.0).collect();
    let labels: Vec<usize> = nonzero.iter().map(|&i| part.labels[i]).collect();
    let mut dedup = labels.clone();
    dedup.sort();
    dedup.dedup();
    assert_eq!(dedup.len(), labels.len());
}

#[test]
fn cluster_tie_prefers_fewer_assets() {
    let r = wave(1, 50);
    let p = panel(vec![r[0].clone(), r[0].clone()]);
    let sel = cluster_min_cvar(&p, &Partition::from_labels(&[0, 1]), 0.1).unwrap();
    assert_eq!(sel.weights.weights, vec![1.0, 0.0]);
    assert!(cluster_min_cvar(&p, &Partition::from_labels::<u8>(&[]), 0.1).is_err());
}

#[test]
fn four_cluster_candidate_count() {
    let labels: Vec<u8> = [(0u8, 13), (1, 12), (2, 7), (3, 6)].iter().flat_map(|&(l, n)| std::iter::repeat_n(l, n)).collect();
    assert_eq!(candidate_count(&Partition::from_labels(&labels)), Some(10191));
}

#[test]
fn backtest_fixtures() {
    let w = PortfolioWeights { strategy: "x".into(), tickers: vec!["A00".into()], weights: vec![1.0] };
    let rep = backtest(&w, &panel(vec![vec![0.1, -0.1]]), 0.5).unwrap();
    assert!((rep.curve[1] - 100.0 * 0.1f64.exp()).abs() < 1e-10);
    assert!((rep.curve[2] - 100.0).abs() < 1e-10);
    assert_eq!(rep.curve[0], 100.0);
    assert!((rep.mdd - (1.0 - (-0.1f64).exp())).abs() < 1e-10);
    assert!(rep.mu_annual.abs() < 1e-10);
    let sd = (0.02f64).sqrt();
    assert!((rep.sigma_annual - sd * 252f64.sqrt()).abs() < 1e-10);
    assert!((rep.cvar_annual - 0.1 * 252f64.sqrt()).abs() < 1e-10);
    assert!((rep.ce - (0.0 - sd * sd * 252.0 / 2.0)).abs() < 1e-10);
    assert_eq!(rep.dates.len(), 3);
    assert!(rep.curve_csv().starts_with("date,value\n2020-01-01,100\n"));

    let flat = backtest(&w, &panel(vec![vec![0.0; 5]]), 0.2).unwrap();
    assert_eq!((flat.mu_annual, flat.sigma_annual, flat.mdd, flat.ce, flat.cvar_annual), (0.0, 0.0, 0.0, 0.0, 0.0));
    assert!(flat.curve.iter().all(|v| *v == 100.0));

    let r = wave(1, 40);
    let single = backtest(&w, &panel(r.clone()), 0.2).unwrap();
    let twin = PortfolioWeights { strategy: "x".into(), tickers: vec!["A00".into(), "A01".into()], weights: vec![0.5, 0.5] };
    let double = backtest(&twin, &panel(vec![r[0].clone(), r[0].clone()]), 0.2).unwrap();
    assert_eq!(single.curve, double.curve);
    assert_eq!(single.mdd, double.mdd);
}

#[test]
fn curve_permutation_invariance() {
    let r = wave(4, 60);
    let p = panel(r.clone());
    let w = PortfolioWeights { strategy: "x".into(), tickers: p.tickers.clone(), weights: vec![0.1, 0.2, 0.3, 0.4] };
    let a = backtest(&w, &p, 0.2).unwrap();
    let perm = [2, 0, 3, 1];
    let mut q = panel(perm.iter().map(|&i| r[i].clone()).collect());
    q.tickers = perm.iter().map(|&i| p.tickers[i].clone()).collect();
    let wp = PortfolioWeights { strategy: "x".into(), tickers: q.tickers.clone(), weights: perm.iter().map(|&i| w.weights[i]).collect() };
    let b = backtest(&wp, &q, 0.2).unwrap();
    for (x, y) in a.curve.iter().zip(&b.curve) {
        assert!((x - y).abs() < 1e-10);
    }
}
