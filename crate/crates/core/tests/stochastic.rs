use fiscal_default::stochastic::{draw_period, stationary_distribution, tauchen};
use fiscal_default::{DebtGrid, MeanConvention, OfferEvent, OfferSchedule, ShockChain, SimRng};
use nalgebra::{DMatrix, DVector};

fn paper_chain() -> ShockChain {
    tauchen(0.114, 0.56, 0.037, 11, 3.0, MeanConvention::Level).unwrap()
}

#[test]
fn tauchen_chain_is_stochastic_and_centered() {
    let c = paper_chain();
    assert_eq!(c.len(), 11);
    for i in 0..11 {
        let s: f64 = c.row(i).iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(c.row(i).iter().all(|&p| p >= 0.0));
    }
    assert!(c.g_values.windows(2).all(|w| w[1] > w[0]));
    let mean_log: f64 = c
        .stationary
        .iter()
        .zip(&c.g_values)
        .map(|(p, g)| p * g.ln())
        .sum();
    let target = 0.114_f64.ln();
    assert!(((mean_log - target) / target).abs() < 0.02);
    assert!((c.g_values[5] - 0.114).abs() < 1e-12);

    let log = tauchen(-2.0, 0.56, 0.037, 11, 3.0, MeanConvention::Log).unwrap();
    assert!((log.g_values[5].ln() + 2.0).abs() < 1e-12);
}

#[test]
fn tauchen_grid_spans_the_requested_multiple() {
    let c = tauchen(0.114, 0.56, 0.037, 11, 2.5, MeanConvention::Level).unwrap();
    let sd = 0.037 / (1.0 - 0.56f64.powi(2)).sqrt();
    assert!((c.g_values[10].ln() - c.g_values[0].ln() - 5.0 * sd).abs() < 1e-12);
}

#[test]
fn tauchen_without_persistence_is_iid() {
    let c = tauchen(0.114, 0.0, 0.037, 5, 3.0, MeanConvention::Level).unwrap();
    assert!(c.iid);
    for i in 1..5 {
        assert_eq!(c.row(i), c.row(0));
    }
    assert!(!paper_chain().iid);
}

#[test]
fn tauchen_transition_is_centrosymmetric() {
    let c = paper_chain();
    let n = c.len();
    for i in 0..n {
        for j in 0..n {
            assert!((c.prob(i, j) - c.prob(n - 1 - i, n - 1 - j)).abs() < 1e-13);
        }
    }
}

#[test]
fn tauchen_rejects_degenerate_inputs() {
    let t = |rho, s, n, span| tauchen(0.114, rho, s, n, span, MeanConvention::Level);
    assert!(t(1.0, 0.037, 11, 3.0).is_err());
    assert!(t(0.5, 0.0, 11, 3.0).is_err());
    assert!(t(0.5, 0.037, 1, 3.0).is_err());
    assert!(t(0.5, 0.037, 11, 0.0).is_err());
    assert!(tauchen(-1.0, 0.5, 0.037, 11, 3.0, MeanConvention::Level).is_err());
}

#[test]
fn stationary_distribution_examples() {
    let sym = ShockChain::new(vec![0.1, 0.2], vec![0.9, 0.1, 0.1, 0.9]).unwrap();
    let pi = stationary_distribution(&sym).unwrap();
    assert!((pi[0] - 0.5).abs() < 1e-12 && (pi[1] - 0.5).abs() < 1e-12);

    let row = [0.2, 0.5, 0.3];
    let iid = ShockChain::new(vec![0.1, 0.2, 0.3], [row, row, row].concat()).unwrap();
    let pi = stationary_distribution(&iid).unwrap();
    for k in 0..3 {
        assert!((pi[k] - row[k]).abs() < 1e-12);
    }

    // Three-state chain; oracle: (P' - I) pi = 0 with one row replaced by sum(pi) = 1.
    let t = [0.6, 0.4, 0.0, 0.5, 0.45, 0.05, 0.1, 0.1, 0.8];
    let c = ShockChain::new(vec![0.05, 0.1, 0.2], t.to_vec()).unwrap();
    let mut a = DMatrix::from_fn(3, 3, |i, j| t[j * 3 + i] - if i == j { 1.0 } else { 0.0 });
    for j in 0..3 {
        a[(2, j)] = 1.0;
    }
    let oracle = a
        .lu()
        .solve(&DVector::from_vec(vec![0.0, 0.0, 1.0]))
        .unwrap();
    let pi = stationary_distribution(&c).unwrap();
    for k in 0..3 {
        assert!((pi[k] - oracle[k]).abs() < 1e-10);
    }
    assert_eq!(pi, c.stationary);
}

#[test]
fn chain_rejects_non_stochastic_rows() {
    assert!(ShockChain::new(vec![0.1, 0.2], vec![0.5, 0.4, 0.5, 0.5]).is_err());
    assert!(ShockChain::new(vec![0.2, 0.1], vec![0.5, 0.5, 0.5, 0.5]).is_err());
}

#[test]
fn offer_schedule_invariants() {
    let s = OfferSchedule::equispaced(0.47, 0.45, 0.90, 10).unwrap();
    assert_eq!(s.len(), 10);
    assert!((s.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((s.deltas[1] - 0.5).abs() < 1e-12);
    assert!(OfferSchedule::new(0.5, vec![0.5, 0.4], vec![0.5, 0.5]).is_err());
    assert!(OfferSchedule::new(0.5, vec![0.5, 1.0], vec![0.5, 0.5]).is_err());
    assert!(OfferSchedule::new(0.5, vec![0.4, 0.5], vec![0.5, 0.4]).is_err());
    assert!(OfferSchedule::new(1.5, vec![0.5], vec![1.0]).is_err());
}

#[test]
fn debt_grid_contains_zero_once() {
    let g = DebtGrid::uniform(0.4, 800).unwrap();
    assert_eq!(g.b_values[0], 0.0);
    assert_eq!(g.b_values.iter().filter(|&&b| b == 0.0).count(), 1);
    assert!((g.max() - 0.4).abs() < 1e-15);
    assert_eq!(g.nearest(g.b_values[400] + 1e-6), 400);
    assert_eq!(g.nearest(-1.0), 0);
    assert!(DebtGrid::new(vec![0.1, 0.2]).is_err());
}

#[test]
fn no_offers_without_arrival_probability() {
    let c = paper_chain();
    let s = OfferSchedule::equispaced(0.0, 0.45, 0.90, 10).unwrap();
    let mut rng = SimRng::new(1);
    for _ in 0..10_000 {
        assert_eq!(
            draw_period(&c, &s, 5, false, &mut rng).1,
            OfferEvent::NoOffer
        );
    }
}

#[test]
fn access_means_the_debt_is_due() {
    let c = paper_chain();
    let s = OfferSchedule::equispaced(1.0, 0.45, 0.90, 10).unwrap();
    let mut rng = SimRng::new(2);
    for _ in 0..10_000 {
        assert_eq!(draw_period(&c, &s, 5, true, &mut rng).1, OfferEvent::Due);
    }
}

#[test]
fn offer_frequencies_match_probabilities() {
    let c = paper_chain();
    let probs = vec![0.1, 0.2, 0.3, 0.4];
    let s = OfferSchedule::new(1.0, vec![0.2, 0.4, 0.6, 0.8], probs.clone()).unwrap();
    let mut rng = SimRng::new(3);
    let n = 100_000;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        match draw_period(&c, &s, 0, false, &mut rng).1 {
            OfferEvent::Offer(k) => counts[k] += 1,
            e => panic!("unexpected {e:?}"),
        }
    }
    for k in 0..4 {
        let f = counts[k] as f64 / n as f64;
        let se = (probs[k] * (1.0 - probs[k]) / n as f64).sqrt();
        assert!((f - probs[k]).abs() < 3.0 * se, "offer {k}: {f}");
    }
}

#[test]
fn simulated_log_spending_autocorrelation() {
    let c = paper_chain();
    let s = OfferSchedule::equispaced(0.0, 0.45, 0.90, 10).unwrap();
    let mut rng = SimRng::new(4);
    let n = 100_000;
    let mut x = Vec::with_capacity(n);
    let mut state = 5;
    for _ in 0..n {
        state = draw_period(&c, &s, state, true, &mut rng).0;
        x.push(c.g_values[state].ln());
    }
    let m = x.iter().sum::<f64>() / n as f64;
    let var: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    let cov: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    let rho_hat = cov / var;

    // Exact first-order autocorrelation of the discretized chain.
    let pi = &c.stationary;
    let lg: Vec<f64> = c.g_values.iter().map(|g| g.ln()).collect();
    let mu: f64 = pi.iter().zip(&lg).map(|(p, l)| p * l).sum();
    let v: f64 = pi.iter().zip(&lg).map(|(p, l)| p * (l - mu).powi(2)).sum();
    let mut cv = 0.0;
    for i in 0..c.len() {
        for j in 0..c.len() {
            cv += pi[i] * c.prob(i, j) * (lg[i] - mu) * (lg[j] - mu);
        }
    }
    let rho_chain = cv / v;
    let se = ((1.0 - rho_chain * rho_chain) / n as f64).sqrt();
    assert!(
        (rho_hat - rho_chain).abs() < 3.0 * se,
        "{rho_hat} vs {rho_chain}"
    );
    assert!((rho_chain - 0.56).abs() < 0.03, "{rho_chain}");
}

#[test]
fn identical_seeds_give_identical_streams() {
    let mut a = SimRng::for_replication(99, 7);
    let mut b = SimRng::for_replication(99, 7);
    let mut c = SimRng::for_replication(99, 8);
    let xa: Vec<u64> = (0..1000).map(|_| a.uniform().to_bits()).collect();
    let xb: Vec<u64> = (0..1000).map(|_| b.uniform().to_bits()).collect();
    let xc: Vec<u64> = (0..1000).map(|_| c.uniform().to_bits()).collect();
    assert_eq!(xa, xb);
    assert_ne!(xa, xc);
}
