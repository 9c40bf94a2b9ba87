use fractal_sio::cantor::{build_similarities, CantorParams};
use fractal_sio::config::{cantor_line, gasket};
use fractal_sio::ifs::enumerate_cylinders;
use fractal_sio::kernel::{default_c_q, eval_gamma};
use fractal_sio::operators::{
    cylindrical_maximal_estimate, gamma_potential, lipschitz_probe, maximal_operator_estimate, truncated_operator,
};
use fractal_sio::quadrature::{
    check_unboundedness, integrate_region, quadrature_nodes, telescope_eta, CertMode, CriterionOptions,
    QuadratureOptions, Region, Sign, Verdict,
};
use fractal_sio::{Error, GroupSpace, Ifs, KernelSpec, Point, Refinement, SelfSimilarMeasure, Similarity, Word};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn plane() -> GroupSpace {
    GroupSpace::euclidean(2).unwrap()
}

fn gasket_third() -> (Ifs, SelfSimilarMeasure) {
    gasket(1.0 / 3.0).build().unwrap()
}

fn cube_kernel() -> KernelSpec {
    KernelSpec::complex_power(plane(), 3, 1.0).unwrap()
}

fn four_corners() -> Ifs {
    let e = plane();
    let maps = [[0.0, 0.0], [0.75, 0.0], [0.0, 0.75], [0.75, 0.75]]
        .iter()
        .map(|q| Similarity::new(&e, Point::from(*q), 0.25).unwrap())
        .collect();
    Ifs::new(e, maps).unwrap()
}

fn five_squares() -> Ifs {
    let e = plane();
    let maps = [[0.0, 0.0], [0.8, 0.0], [0.0, 0.8], [0.8, 0.8], [0.4, 0.4]]
        .iter()
        .map(|q| Similarity::new(&e, Point::from(*q), 0.2).unwrap())
        .collect();
    Ifs::with_base_point(e, maps, Point::from([0.5, 0.5])).unwrap()
}

fn small_cantor() -> Ifs {
    build_similarities(&CantorParams::new(1, 4, 0.1)).unwrap()
}

fn riesz_h1() -> KernelSpec {
    let h = GroupSpace::heisenberg(1).unwrap();
    KernelSpec::heisenberg_riesz(h, default_c_q(&h)).unwrap().reflected()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn heuristic(spec: &KernelSpec, refinement: Refinement) -> QuadratureOptions {
    QuadratureOptions::new(spec, refinement)
        .unwrap()
        .with_mode(CertMode::Heuristic)
        .with_budget(10_000_000)
}

fn interval(spec: &KernelSpec, refinement: Refinement) -> QuadratureOptions {
    QuadratureOptions::new(spec, refinement).unwrap().with_budget(10_000_000)
}

fn far_point(ifs: &Ifs) -> Point {
    let mut c = vec![0.0; ifs.space().coord_len()];
    c[0] = ifs.invariant_box()[0].hi + 3.0 * ifs.base_radius() + 1.0;
    Point::new(c)
}

fn random_ifs(rng: &mut ChaCha8Rng) -> (Ifs, KernelSpec) {
    let spaces = [
        GroupSpace::euclidean(1).unwrap(),
        plane(),
        GroupSpace::heisenberg(1).unwrap(),
        GroupSpace::heisenberg(2).unwrap(),
    ];
    let space = spaces[rng.random_range(0..spaces.len())];
    let k = rng.random_range(2..=4);
    let maps = (0..k)
        .map(|_| {
            let q = Point::new((0..space.coord_len()).map(|_| rng.random_range(-1.0..1.0)).collect());
            Similarity::new(&space, q, rng.random_range(0.1..0.45)).unwrap()
        })
        .collect();
    let spec = if space.is_heisenberg() {
        KernelSpec::heisenberg_riesz(space, default_c_q(&space)).unwrap()
    } else {
        KernelSpec::coordinate_riesz(space, 0, space.coord_len() as f64).unwrap()
    };
    (Ifs::new(space, maps).unwrap(), spec)
}

#[test]
fn constant_kernel_is_certified_positive() {
    let (ifs, mu) = gasket_third();
    let spec = KernelSpec::constant(plane(), 2.0, 1.0).unwrap();
    let x = far_point(&ifs);
    for opts in [interval(&spec, Refinement::Depth(3)), heuristic(&spec, Refinement::Depth(3))] {
        let est = integrate_region(&ifs, &mu, &spec, &x, &Region::Whole, &opts).unwrap();
        assert!(est.value[0] > 0.0);
        assert_eq!(est.certified_sign, vec![Sign::Positive]);
    }
    let eta = telescope_eta(&ifs, &mu, &spec, &Word::new(vec![1]), 4, &interval(&spec, Refinement::Depth(2))).unwrap();
    for (k, e) in eta.eta.iter().enumerate() {
        assert!(e[0] > 0.0, "eta_{k} = {e:?}");
        assert_eq!(eta.estimates[k].certified_sign, vec![Sign::Positive]);
    }
}

#[test]
fn odd_kernel_at_center_of_symmetric_set_is_inconclusive() {
    let ifs = four_corners();
    let mu = SelfSimilarMeasure::natural(&ifs);
    let spec = cube_kernel();
    let center = Point::from([0.5, 0.5]);
    let mut last = f64::INFINITY;
    for depth in 2..=7 {
        let h = integrate_region(&ifs, &mu, &spec, &center, &Region::Whole, &heuristic(&spec, Refinement::Depth(depth)))
            .unwrap();
        for c in 0..2 {
            assert!(h.value[c].abs() < h.error_indicator[c]);
            assert_eq!(h.certified_sign[c], Sign::None);
        }
        assert!(norm(&h.value) < last);
        last = norm(&h.value);
        let i = integrate_region(&ifs, &mu, &spec, &center, &Region::Whole, &interval(&spec, Refinement::Depth(depth)))
            .unwrap();
        assert_eq!(i.certified_sign, vec![Sign::None, Sign::None]);
    }
    assert!(last < 1e-3);
    let err = integrate_region(&ifs, &mu, &spec, &center, &Region::Whole, &heuristic(&spec, Refinement::Depth(0)));
    assert!(matches!(err, Err(Error::Singularity(_))));
}

#[test]
fn recursive_quadrature_matches_flat_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let (ifs, spec) = random_ifs(&mut rng);
        let mu = SelfSimilarMeasure::natural(&ifs);
        let x = far_point(&ifs);
        let depth = rng.random_range(1..=4);
        let flat = enumerate_cylinders(&ifs, &mu, Refinement::Depth(depth), 10_000_000).unwrap();
        let mut oracle = vec![0.0; spec.num_components()];
        for c in &flat {
            let rel = ifs.space().relative(&x, &c.anchor).unwrap();
            for (o, k) in oracle.iter_mut().zip(spec.kernel_at(rel.coords())) {
                *o += k * c.mass;
            }
        }
        let nodes = quadrature_nodes(&ifs, &mu, &Region::Whole, Refinement::Depth(depth), 10_000_000).unwrap();
        let words: Vec<&Word> = nodes.iter().map(|n| &n.word).collect();
        let flat_words: Vec<&Word> = flat.iter().map(|c| &c.word).collect();
        assert_eq!(words, flat_words);
        for opts in [heuristic(&spec, Refinement::Depth(depth)), interval(&spec, Refinement::Depth(depth))] {
            let est = integrate_region(&ifs, &mu, &spec, &x, &Region::Whole, &opts).unwrap();
            assert!(diff(&est.value, &oracle) <= 1e-12 * norm(&oracle).max(1e-300));
            assert_eq!(est.nodes, flat.len() as u64);
        }
    }
}

#[test]
fn telescoped_annuli_agree_on_the_gasket() {
    let (ifs, mu) = gasket_third();
    let spec = cube_kernel();
    for i in 0..3 {
        let w = Word::new(vec![i]);
        let opts = heuristic(&spec, Refinement::Depth(5));
        let eta = telescope_eta(&ifs, &mu, &spec, &w, 3, &opts).unwrap();
        let e0 = &eta.eta[0];
        for e in &eta.eta {
            assert!(diff(e, e0) <= 1e-10 * norm(e0));
        }
        for m in 1..=4 {
            let region = Region::ComplementOf { word: w.power(m) };
            let total = integrate_region(&ifs, &mu, &spec, &eta.fixed_point, &region, &opts).unwrap();
            let expect: Vec<f64> = e0.iter().map(|v| m as f64 * v).collect();
            assert!(diff(&total.value, &expect) <= 1e-9 * norm(&expect));
        }
    }
}

#[test]
fn telescoped_annuli_agree_on_a_heisenberg_cantor_set() {
    let ifs = small_cantor();
    let spec = riesz_h1();
    let mu = SelfSimilarMeasure::with_exponent(&ifs, spec.s);
    for w in [Word::new(vec![0]), Word::new(vec![5]), Word::new(vec![100])] {
        let opts = heuristic(&spec, Refinement::Depth(1));
        let eta = telescope_eta(&ifs, &mu, &spec, &w, 3, &opts).unwrap();
        let e0 = &eta.eta[0];
        for e in &eta.eta {
            assert!(diff(e, e0) <= 1e-10 * norm(e0));
        }
    }
}

#[test]
fn gasket_criterion_certifies_vertices() {
    let (ifs, mu) = gasket_third();
    let spec = cube_kernel();
    let words: Vec<Word> = (0..3).map(|i| Word::new(vec![i])).collect();
    for depth in 2..=8 {
        let opts = CriterionOptions {
            quadrature: interval(&spec, Refinement::Depth(depth)),
            separation_depth: 2,
            eta_generations: 2,
        };
        let (sep, reports) = check_unboundedness(&ifs, &mu, &spec, &words, &opts).unwrap();
        assert!(sep.disjoint);
        for r in &reports {
            assert!(r.any_certified(), "depth {depth} word {}", r.word_label);
            for c in &r.per_component {
                if c.verdict == Verdict::NonzeroCertified {
                    assert_ne!(r.estimate.certified_sign[c.component], Sign::None);
                    assert!(!c.interval.unwrap().contains(0.0));
                }
            }
        }
    }
}

#[test]
fn criterion_is_inconclusive_for_an_odd_symmetric_configuration() {
    let ifs = five_squares();
    let mu = SelfSimilarMeasure::natural(&ifs);
    let spec = cube_kernel();
    let opts = CriterionOptions {
        quadrature: interval(&spec, Refinement::Depth(3)),
        separation_depth: 2,
        eta_generations: 1,
    };
    let (_, reports) = check_unboundedness(&ifs, &mu, &spec, &[Word::new(vec![4])], &opts).unwrap();
    for c in &reports[0].per_component {
        assert_eq!(c.verdict, Verdict::Inconclusive);
        assert!(c.value.abs() < 1e-12);
    }
}

#[test]
fn criterion_refuses_overlapping_sets() {
    let e1 = GroupSpace::euclidean(1).unwrap();
    let (ifs, mu) = cantor_line(0.6).build().unwrap();
    let spec = KernelSpec::coordinate_riesz(e1, 0, mu.s).unwrap();
    let opts = CriterionOptions {
        quadrature: interval(&spec, Refinement::Depth(3)),
        separation_depth: 2,
        eta_generations: 1,
    };
    let res = check_unboundedness(&ifs, &mu, &spec, &[Word::new(vec![0])], &opts);
    assert!(matches!(res, Err(Error::InconclusiveSeparation { .. })));
}

#[test]
fn verdicts_are_scale_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (g, gmu) = gasket_third();
    let h = small_cantor();
    let hmu = SelfSimilarMeasure::natural(&h);
    let cases = [
        (g, gmu, cube_kernel(), vec![Word::new(vec![0]), Word::new(vec![2])], Refinement::Depth(4)),
        (h, hmu, riesz_h1(), vec![Word::new(vec![0]), Word::new(vec![7])], Refinement::Depth(1)),
    ];
    for (ifs, mu, spec, words, refinement) in cases {
        let run = |mu: &SelfSimilarMeasure, spec: &KernelSpec| {
            let opts = CriterionOptions {
                quadrature: interval(spec, refinement),
                separation_depth: 2,
                eta_generations: 1,
            };
            check_unboundedness(&ifs, mu, spec, &words, &opts).unwrap().1
        };
        let base = run(&mu, &spec);
        for _ in 0..3 {
            let a = 10f64.powf(rng.random_range(-3.0..3.0));
            let b = 10f64.powf(rng.random_range(-3.0..3.0));
            let scaled = run(&mu.scaled(b), &spec.rescaled(a));
            for (r0, r1) in base.iter().zip(&scaled) {
                for (c0, c1) in r0.per_component.iter().zip(&r1.per_component) {
                    assert_eq!(c0.verdict, c1.verdict);
                    assert_eq!(c0.certified_sign, c1.certified_sign);
                    let k = if spec.rescaled(a) == spec { b } else { a * b };
                    assert!((c1.value - k * c0.value).abs() <= 1e-12 * k * norm(&r0.estimate.value));
                }
            }
        }
    }
}

#[test]
fn integrals_are_left_invariant() {
    let ifs = small_cantor();
    let mu = SelfSimilarMeasure::natural(&ifs);
    let spec = riesz_h1();
    let space = *ifs.space();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = heuristic(&spec, Refinement::Depth(1));
    let x = far_point(&ifs);
    let w = Word::new(vec![3]);
    let base = integrate_region(&ifs, &mu, &spec, &x, &Region::Whole, &opts).unwrap();
    let base_eta = telescope_eta(&ifs, &mu, &spec, &w, 1, &opts).unwrap();
    for _ in 0..5 {
        let a = Point::new((0..3).map(|_| rng.random_range(-2.0..2.0)).collect());
        let moved = ifs.translated(&a).unwrap();
        let ax = space.mul(&a, &x).unwrap();
        let est = integrate_region(&moved, &mu, &spec, &ax, &Region::Whole, &opts).unwrap();
        assert!(diff(&est.value, &base.value) <= 1e-10 * norm(&base.value));
        let eta = telescope_eta(&moved, &mu, &spec, &w, 1, &opts).unwrap();
        for (e, e0) in eta.eta.iter().zip(&base_eta.eta) {
            assert!(diff(e, e0) <= 1e-10 * norm(e0));
        }
    }
}

#[test]
fn single_thread_is_reproducible_and_threads_agree() {
    let (ifs, mu) = gasket_third();
    let spec = cube_kernel();
    let x = ifs.fixed_point(&Word::new(vec![0])).unwrap();
    let region = Region::ComplementOf { word: Word::new(vec![0]) };
    let opts = interval(&spec, Refinement::Depth(8));
    let a = integrate_region(&ifs, &mu, &spec, &x, &region, &opts).unwrap();
    let b = integrate_region(&ifs, &mu, &spec, &x, &region, &opts).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    for threads in [2, 4, 8] {
        let p = integrate_region(&ifs, &mu, &spec, &x, &region, &opts.clone().with_threads(threads)).unwrap();
        assert!(diff(&p.value, &a.value) <= 1e-12 * norm(&a.value));
        assert_eq!(p.certified_sign, a.certified_sign);
        assert_eq!(p.nodes, a.nodes);
    }
}

#[test]
fn budget_and_singularity_errors() {
    let (ifs, mu) = gasket_third();
    let spec = cube_kernel();
    let x = far_point(&ifs);
    let opts = heuristic(&spec, Refinement::Depth(8)).with_budget(100);
    assert!(matches!(
        integrate_region(&ifs, &mu, &spec, &x, &Region::Whole, &opts),
        Err(Error::BudgetExceeded { budget: 100 })
    ));
    let on_set = ifs.fixed_point(&Word::new(vec![0])).unwrap();
    let opts = heuristic(&spec, Refinement::Depth(3));
    assert!(matches!(
        integrate_region(&ifs, &mu, &spec, &on_set, &Region::Whole, &opts),
        Err(Error::Singularity(_))
    ));
}

#[test]
fn truncation_beyond_the_set_is_zero() {
    let (ifs, mu) = gasket_third();
    let spec = cube_kernel();
    let p = Point::from([0.3, 0.2]);
    let opts = heuristic(&spec, Refinement::Depth(4));
    let reach = ifs.base_diam() + plane().dist(&p, &ifs.maps()[0].apply(&plane(), ifs.base_point())).unwrap();
    let t = truncated_operator(&ifs, &mu, &spec, &p, reach * 1.01, &opts).unwrap();
    assert_eq!(t.value, vec![0.0, 0.0]);
    assert_eq!(t.nodes, 0);
    assert!(truncated_operator(&ifs, &mu, &spec, &p, 0.0, &opts).is_err());
}

#[test]
fn small_truncation_far_away_matches_the_full_integral() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let (ifs, spec) = random_ifs(&mut rng);
        let mu = SelfSimilarMeasure::natural(&ifs);
        let x = far_point(&ifs);
        let opts = heuristic(&spec, Refinement::Depth(3));
        let t = truncated_operator(&ifs, &mu, &spec, &x, 1e-9, &opts).unwrap();
        let full = integrate_region(&ifs, &mu, &spec, &x, &Region::Whole, &opts).unwrap();
        assert!(diff(&t.value, &full.value) <= 1e-10 * norm(&full.value));
    }
}

#[test]
fn truncation_error_does_not_grow_with_depth() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let (ifs, spec) = random_ifs(&mut rng);
        let mu = SelfSimilarMeasure::natural(&ifs);
        let w = Word::new(vec![rng.random_range(0..ifs.len()), rng.random_range(0..ifs.len())]);
        let p = ifs.fixed_point(&w).unwrap();
        let eps = ifs.base_radius() * rng.random_range(0.05..0.5);
        let mut last = f64::INFINITY;
        for depth in 1..=5 {
            let t = truncated_operator(&ifs, &mu, &spec, &p, eps, &heuristic(&spec, Refinement::Depth(depth))).unwrap();
            assert!(t.error_indicator[0] <= last * (1.0 + 1e-12), "depth {depth}: {} > {last}", t.error_indicator[0]);
            last = t.error_indicator[0];
        }
    }
}

#[test]
fn maximal_operator_examples() {
    let (ifs, mu) = gasket_third();
    let spec = cube_kernel();
    let w = Word::new(vec![0]);
    let x = ifs.fixed_point(&w).unwrap();
    let opts = heuristic(&spec, Refinement::Depth(12));
    let single = maximal_operator_estimate(&ifs, &mu, &spec, &x, &[0.2], &opts).unwrap();
    let t = truncated_operator(&ifs, &mu, &spec, &x, 0.2, &opts).unwrap();
    assert_eq!(single.estimate, norm(&t.value));
    assert!(maximal_operator_estimate(&ifs, &mu, &spec, &x, &[], &opts).is_err());

    let grid: Vec<f64> = (1..=6).map(|m| 1.5 * 3f64.powi(-m)).collect();
    let mut coarse = f64::NEG_INFINITY;
    let mut estimates = Vec::new();
    for m in 1..=grid.len() {
        let e = maximal_operator_estimate(&ifs, &mu, &spec, &x, &grid[..m], &opts).unwrap().estimate;
        assert!(e >= coarse);
        coarse = e;
        estimates.push(e);
    }
    let eta = telescope_eta(&ifs, &mu, &spec, &w, 0, &opts).unwrap();
    let n = estimates.len() as f64;
    let mx = (1..=estimates.len()).map(|m| m as f64).sum::<f64>() / n;
    let my = estimates.iter().sum::<f64>() / n;
    let sxy: f64 = estimates.iter().enumerate().map(|(i, y)| ((i + 1) as f64 - mx) * (y - my)).sum();
    let sxx: f64 = (1..=estimates.len()).map(|m| (m as f64 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let eta_norm = norm(&eta.eta[0]);
    assert!((slope - eta_norm).abs() <= 0.2 * eta_norm, "slope {slope} vs |eta| {eta_norm}");
}

#[test]
fn cylindrical_maximal_examples() {
    let (ifs, mu) = cantor_line(1.0 / 3.0).build().unwrap();
    let e1 = GroupSpace::euclidean(1).unwrap();
    let spec = KernelSpec::coordinate_riesz(e1, 0, mu.s).unwrap();
    let opts = heuristic(&spec, Refinement::Depth(6));
    let one = cylindrical_maximal_estimate(&ifs, &mu, &spec, &Word::new(vec![0]), 1, &opts).unwrap();
    assert_eq!(one.best_pair, (0, 1));
    assert_eq!(one.estimate, norm(&one.shells[0]));
    assert!(cylindrical_maximal_estimate(&ifs, &mu, &spec, &Word::new(vec![0]), 0, &opts).is_err());

    let (g, gmu) = gasket_third();
    let spec = cube_kernel();
    let opts = heuristic(&spec, Refinement::Depth(4));
    for i in 0..3 {
        let w = Word::new(vec![i]);
        let x = g.fixed_point(&w).unwrap();
        let mut last = 0.0;
        for depth in [1, 2, 4, 6] {
            let c = cylindrical_maximal_estimate(&g, &gmu, &spec, &w, depth, &opts).unwrap();
            assert!(c.estimate > last);
            last = c.estimate;
            let grid: Vec<f64> = (1..=depth as i32 + 1).map(|m| 1.5 * 3f64.powi(-m)).collect();
            let max = maximal_operator_estimate(&g, &gmu, &spec, &x, &grid, &opts).unwrap();
            assert!(c.estimate <= 2.0 * max.estimate + 1.0);
        }
    }
}

#[test]
fn gamma_potential_examples() {
    let ifs = small_cantor();
    let mu = SelfSimilarMeasure::natural(&ifs);
    let space = *ifs.space();
    let p = far_point(&ifs);
    let atom = gamma_potential(&ifs, &mu, 1.0, &p, Refinement::Depth(0), 1_000_000).unwrap();
    let rel = space.relative(ifs.base_point(), &p).unwrap();
    assert!((atom - eval_gamma(&space, 1.0, &rel).unwrap()).abs() <= 1e-15 * atom.abs());

    let dir = Point::from([0.6, -0.3, 0.5]);
    let f = |r: f64| {
        let q = space.dilate(r, &dir).unwrap();
        gamma_potential(&ifs, &mu, 1.0, &q, Refinement::Depth(1), 1_000_000).unwrap()
    };
    let (r1, r2) = (100.0, 1000.0);
    let slope = (f(r2).ln() - f(r1).ln()) / (r2.ln() - r1.ln());
    let expect = 2.0 - space.homogeneous_dim() as f64;
    assert!((slope - expect).abs() <= 0.05 * expect.abs());
    assert!(gamma_potential(&gasket_third().0, &gasket_third().1, 1.0, &Point::from([5.0, 5.0]), Refinement::Depth(0), 10).is_err());
}

#[test]
fn lipschitz_probe_is_stable_across_seeds() {
    let ifs = small_cantor();
    let mu = SelfSimilarMeasure::natural(&ifs);
    let a = lipschitz_probe(&ifs, &mu, 1.0, 2000, 1, Refinement::Depth(1), 10_000_000).unwrap();
    let b = lipschitz_probe(&ifs, &mu, 1.0, 2000, 2, Refinement::Depth(1), 10_000_000).unwrap();
    assert!(a.max_ratio.is_finite() && a.max_ratio > 0.0);
    assert_eq!(a.pairs, 2000);
    assert!((a.max_ratio - b.max_ratio).abs() <= 0.15 * a.max_ratio.max(b.max_ratio));
    let again = lipschitz_probe(&ifs, &mu, 1.0, 2000, 1, Refinement::Depth(1), 10_000_000).unwrap();
    assert_eq!(a, again);
    assert!(lipschitz_probe(&ifs, &mu, 1.0, 0, 1, Refinement::Depth(1), 100).is_err());
}
