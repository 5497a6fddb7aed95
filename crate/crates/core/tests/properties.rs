use num_traits::{Signed, Zero};
use proptest::prelude::*;
use raycert_core::arrangements::{
    enumerate_cells, find_hyperplane_partition, hyperplane_multiplicity, is_almost_bounded, locate_in_c,
    recession_interior_direction, sign_vector_of, verify_hyperplane_partition,
};
use raycert_core::certificates::{check_corollary, check_escape, check_theorem1, CorollaryMethod};
use raycert_core::coverage::{hit_count, min_missed};
use raycert_core::invariant_body::{check_invariant, projection_closure, Hull};
use raycert_core::rational::{dot, rat, ratio, sub};
use raycert_core::search::{
    corollary_reduction, find_certificate, is_prime, is_prime_power, weighted_projection_step, SearchConfig,
    WeightVector,
};
use raycert_core::{ConvexBody, Direction, Family, Hyperplane, Point, Rational, SearchOutcome, VPolytope};

fn point_strategy(d: usize, lim: i64) -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(-lim..=lim, d)
}

fn polytope_strategy(d: usize) -> impl Strategy<Value = VPolytope> {
    prop::collection::vec(point_strategy(d, 6), 1..=5)
        .prop_map(|vs| VPolytope::new(vs.iter().map(|v| Point::from_ints(v)).collect()).unwrap())
}

fn direction_strategy(d: usize) -> impl Strategy<Value = Direction> {
    point_strategy(d, 5)
        .prop_filter("nonzero", |v| v.iter().any(|&c| c != 0))
        .prop_map(|v| Direction::from_ints(&v).unwrap())
}

fn body_point_dir(d: usize) -> impl Strategy<Value = (ConvexBody, Point, Direction)> {
    (polytope_strategy(d), point_strategy(d, 8), direction_strategy(d))
        .prop_map(|(b, p, u)| (b.into(), Point::from_ints(&p), u))
}

fn planar_family(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Family> {
    prop::collection::vec(polytope_strategy(2), n)
        .prop_map(|ps| Family::new(ps.into_iter().map(ConvexBody::from).collect()).unwrap())
}

fn lines(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<Hyperplane>> {
    prop::collection::vec((-4i64..=4, -4i64..=4, -6i64..=6), n).prop_map(|raw| {
        raw.into_iter()
            .filter(|&(a, b, _)| a != 0 || b != 0)
            .map(|(a, b, c)| Hyperplane::from_ints(&[a, b], c).unwrap())
            .collect()
    })
}

fn in_cell(x: &Point, planes: &[Hyperplane], signs: &raycert_core::SignVector) -> bool {
    sign_vector_of(x, planes).map(|s| &s == signs).unwrap_or(false)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_is_idempotent_and_obtuse((body, p, _) in prop_oneof![body_point_dir(2), body_point_dir(3)]) {
        let pr = body.project(&p).unwrap();
        prop_assert_eq!(&body.project(&pr.point).unwrap().point, &pr.point);
        prop_assert!(body.contains(&pr.point).unwrap());
        let ConvexBody::Polytope(poly) = &body else { unreachable!() };
        let away = sub(p.coords(), pr.point.coords());
        for v in poly.vertices() {
            prop_assert!(!dot(&sub(v.coords(), pr.point.coords()), &away).is_positive());
        }
    }

    #[test]
    fn ray_verdict_ignores_direction_scale((body, p, u) in prop_oneof![body_point_dir(2), body_point_dir(3)]) {
        let hit = body.ray_intersects(&p, &u).unwrap();
        prop_assert_eq!(hit, body.ray_intersects(&p, &u.scaled(&rat(3)).unwrap()).unwrap());
        prop_assert_eq!(hit, body.ray_intersects(&p, &u.scaled(&ratio(1, 7)).unwrap()).unwrap());
        if body.contains(&p).unwrap() {
            prop_assert!(hit);
        }
    }

    #[test]
    fn ray_verdict_matches_sampling((body, p, u) in body_point_dir(2)) {
        let hit = body.ray_intersects(&p, &u).unwrap();
        // every body lies within 6 per axis, so t <= 14 / min|u_i| covers it
        let sampled = (0..=400).any(|k| {
            let t = ratio(k, 10);
            body.contains(&p.offset(u.vec(), &t)).unwrap()
        });
        if sampled {
            prop_assert!(hit);
        }
    }

    #[test]
    fn min_missed_bounds_every_direction(fam in planar_family(1..=5), p in point_strategy(2, 8), us in prop::collection::vec(direction_strategy(2), 20)) {
        let p = Point::from_ints(&p);
        let m = min_missed(&p, &fam, None).unwrap();
        for u in &us {
            prop_assert!(m.missed <= fam.len() - hit_count(&p, u, &fam).unwrap());
        }
    }

    #[test]
    fn escape_certificates_are_sound(fam in planar_family(2..=4), p in point_strategy(2, 3), us in prop::collection::vec(direction_strategy(2), 60)) {
        let p = Point::from_ints(&p);
        let members: Vec<&ConvexBody> = fam.bodies().iter().collect();
        if let Ok(cert) = check_escape(&p, &members).unwrap() {
            prop_assert!(cert.coefficients_balance());
            for u in &us {
                let missed = members.iter().any(|b| !b.ray_intersects(&p, u).unwrap());
                prop_assert!(missed, "every member hit along {:?}", u);
            }
        }
    }

    #[test]
    fn escape_survives_rigid_motions(fam in planar_family(2..=4), p in point_strategy(2, 3), shift in point_strategy(2, 5), turn in 0usize..4) {
        let p = Point::from_ints(&p);
        let (c, s) = [(ratio(3, 5), ratio(4, 5)), (ratio(5, 13), ratio(12, 13)), (ratio(8, 17), ratio(-15, 17)), (rat(0), rat(1))][turn].clone();
        let m = vec![vec![c.clone(), -s.clone()], vec![s, c]];
        let t: Vec<Rational> = shift.iter().map(|&v| rat(v)).collect();
        let moved: Vec<ConvexBody> = fam.bodies().iter().map(|b| b.map_affine(&m, &t, &rat(1)).unwrap()).collect();
        let mp = Point::new((0..2).map(|i| dot(&m[i], p.coords()) + &t[i]).collect()).unwrap();
        let before = check_escape(&p, &fam.bodies().iter().collect::<Vec<_>>()).unwrap().is_ok();
        let after = check_escape(&mp, &moved.iter().collect::<Vec<_>>()).unwrap().is_ok();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn simple_arrangements_have_quadratic_cell_counts(planes in lines(1..=6)) {
        prop_assume!(!planes.is_empty());
        let parallel = planes.iter().enumerate().any(|(i, a)| planes[..i].iter().any(|b| {
            let (x, y) = (a.normal(), b.normal());
            (&x[0] * &y[1] - &x[1] * &y[0]).is_zero()
        }));
        let simple = !parallel && hyperplane_multiplicity(&planes).unwrap() <= 2;
        let n = planes.len();
        let cells = enumerate_cells(&planes).unwrap();
        if simple {
            prop_assert_eq!(cells.len(), 1 + n + n * (n - 1) / 2);
        }
        for cell in &cells {
            prop_assert!(in_cell(&cell.sample, &planes, &cell.sign_vector));
            let ab = is_almost_bounded(cell, &planes).unwrap();
            if cell.bounded_radius.is_some() {
                prop_assert!(ab);
            }
            if !ab {
                let u = recession_interior_direction(&planes, &cell.sign_vector.0).unwrap();
                for t in [1, 10, 100, 1000] {
                    prop_assert!(in_cell(&cell.sample.offset(&u, &rat(t)), &planes, &cell.sign_vector));
                }
            }
        }
    }

    #[test]
    fn locate_in_c_commutes_with_homothety(planes in lines(1..=5), x in point_strategy(2, 7), num in 1i64..9, den in 1i64..9) {
        let x = Point::new(x.iter().map(|&v| ratio(2 * v + 1, 2)).collect()).unwrap();
        prop_assume!(sign_vector_of(&x, &planes).is_ok());
        let lambda = ratio(num, den);
        let scaled: Vec<Hyperplane> = planes
            .iter()
            .map(|h| Hyperplane::new(h.normal().to_vec(), h.offset() * &lambda).unwrap())
            .collect();
        let sx = Point::new(x.coords().iter().map(|c| c * &lambda).collect()).unwrap();
        prop_assert_eq!(locate_in_c(&x, &planes).unwrap(), locate_in_c(&sx, &scaled).unwrap());
    }

    #[test]
    fn projection_step_stays_in_the_hull(fam in planar_family(1..=4), p in point_strategy(2, 30)) {
        let n = fam.len();
        let w = WeightVector::new(vec![(0..n).map(|i| (i, ratio(1, n as i64))).collect()]).unwrap();
        let q = weighted_projection_step(&Point::from_ints(&p), &w, &fam, None).unwrap();
        let all: Vec<Point> = fam
            .bodies()
            .iter()
            .flat_map(|b| match b {
                ConvexBody::Polytope(v) => v.vertices().to_vec(),
                ConvexBody::Ball(_) => unreachable!(),
            })
            .collect();
        prop_assert!(ConvexBody::from(VPolytope::new(all).unwrap()).contains(&q).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn invariant_body_grows_and_closes(planes in lines(1..=4), seed in polytope_strategy(2)) {
        prop_assume!(!planes.is_empty());
        let res = projection_closure(&planes, &seed, 1e-9, 5_000).unwrap();
        let hull = Hull::new(&res.body.vertices().iter().map(Point::to_f64).collect::<Vec<_>>()).unwrap();
        for v in seed.vertices() {
            prop_assert!(hull.distance(&v.to_f64()) <= 1e-9);
        }
        if res.converged {
            prop_assert!(check_invariant(&res.body, &planes, 1e-8).unwrap().0);
        }
    }
}

#[test]
fn reduction_is_minimal() {
    for r in 2..=60i64 {
        let red = corollary_reduction(r).unwrap();
        assert!(is_prime(red.big_r));
        assert_eq!(red.big_r, red.k * (r as u64 - 1) + 1);
        assert!((1..red.k).all(|k| !is_prime(k * (r as u64 - 1) + 1)));
    }
    let composite: Vec<i64> = (2..=20).filter(|&r| !is_prime_power(r).unwrap()).collect();
    assert_eq!(composite, vec![6, 10, 12, 14, 15, 18, 20]);
}

fn square_ring() -> Family {
    let sq = |x: i64, y: i64| -> ConvexBody {
        VPolytope::from_ints(&[&[x, y], &[x + 1, y], &[x + 1, y + 1], &[x, y + 1]]).unwrap().into()
    };
    Family::new(vec![sq(3, -1), sq(-1, 3), sq(-5, -1), sq(-1, -5), sq(3, 3), sq(-5, -5)]).unwrap()
}

#[test]
fn certificate_search_is_deterministic_across_pools() {
    let fam = square_ring();
    let cfg = SearchConfig { grid_steps: 15, seed: 5, ..SearchConfig::default_for(&fam) };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| find_certificate(&fam, 2, &cfg).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(8));
    let SearchOutcome::Found(cert) = one else { panic!("no certificate") };
    assert!(check_theorem1(&cert, &fam, 2).unwrap().passed());
    let candidates: Vec<Vec<usize>> = cert.subfamilies.iter().map(|s| s.member_indices.clone()).collect();
    assert!(check_corollary(&cert.p, &fam, 2, &CorollaryMethod::Certificate { candidates }).unwrap().passed());
    assert!(check_corollary(&cert.p, &fam, 1, &CorollaryMethod::Exact2d).unwrap().passed());
}

#[test]
fn six_general_lines_split_into_two_triangles() {
    let planes: Vec<Hyperplane> = [(1, 0, 0), (0, 1, 1), (1, 1, 5), (1, -1, 7), (2, 1, -3), (1, 3, 13)]
        .iter()
        .map(|&(a, b, c)| Hyperplane::from_ints(&[a, b], c).unwrap())
        .collect();
    assert_eq!(hyperplane_multiplicity(&planes).unwrap(), 2);
    let found = find_hyperplane_partition(&planes, 2, &SearchConfig::default()).unwrap().found().expect("partition");
    assert!(found.partition.iter().all(|p| p.len() == 3));
    assert!(verify_hyperplane_partition(&planes, &found, 2).unwrap().passed());
}
