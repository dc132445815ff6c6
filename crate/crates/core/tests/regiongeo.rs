mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reachplan::baseregion::BaseRegion;
use reachplan::grid::{BaseGridSpec, Mask};
use reachplan::regiongeo::{
    connected_components, enumerate_intersections, filter_by_uncertainty, inscribed_circle, intersect,
    squared_distance_transform, ErrorModel, IntersectionRecord, RegionGeoError, UncertaintyModel,
};

fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> Mask {
    Mask::from_fn(w, h, |_, _| rng.random_bool(density))
}

fn brute_edt(mask: &Mask) -> Vec<u64> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut out = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let mut d2 = u64::MAX;
            for rr in -1..=h {
                for cc in -1..=w {
                    if !mask.get_signed(rr, cc) {
                        d2 = d2.min(((rr - r).pow(2) + (cc - c).pow(2)) as u64);
                    }
                }
            }
            out.push(d2);
        }
    }
    out
}

fn regions_from(grid: BaseGridSpec, masks: Vec<Mask>) -> Vec<BaseRegion> {
    masks
        .into_iter()
        .enumerate()
        .map(|(i, mask)| BaseRegion { tray: format!("t{i}"), grid, mask })
        .collect()
}

fn union_find_components(mask: &Mask) -> Vec<usize> {
    let (w, h) = (mask.width(), mask.height());
    let mut parent: Vec<usize> = (0..w * h).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        let mut i = i;
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) {
                continue;
            }
            for (rr, cc) in [(r + 1, c), (r, c + 1)] {
                if rr < h && cc < w && mask.get(rr, cc) {
                    let (a, b) = (find(&mut parent, r * w + c), find(&mut parent, rr * w + cc));
                    parent[a] = b;
                }
            }
        }
    }
    (0..w * h).map(|i| find(&mut parent, i)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn distance_transform_matches_brute_force(seed in any::<u64>(), w in 1usize..=24, h in 1usize..=24, density in 0.2f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask = random_mask(&mut rng, w, h, density);
        let dt = squared_distance_transform(&mask);
        let brute = brute_edt(&mask);
        for i in 0..w * h {
            let expected = if mask.get(i / w, i % w) { brute[i] } else { 0 };
            prop_assert_eq!(dt[i], expected, "cell {}", i);
        }
        let grid = BaseGridSpec::new([0.0, 0.0], 0.1, w, h, 0.0).unwrap();
        match (inscribed_circle(&mask, &grid), brute_inscribed(&mask)) {
            (Ok(c), Some((cell, d2))) => {
                prop_assert_eq!((c.cell, c.squared_cells), (cell, d2));
                prop_assert!((c.radius - (d2 as f64).sqrt() * 0.1).abs() < 1e-12);
            }
            (Err(RegionGeoError::EmptyMask), None) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn inscribed_disk_is_feasible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = BaseGridSpec::new([-1.0, -1.0], 0.05, 40, 40, 0.0).unwrap();
        let disks: Vec<([f64; 2], f64)> = (0..3)
            .map(|_| ([rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6)], rng.random_range(0.1..0.5)))
            .collect();
        let mask = disk_mask(&grid, &disks);
        let c = inscribed_circle(&mask, &grid).unwrap();
        // every cell center strictly inside the circle is feasible
        for r in 0..40 {
            for col in 0..40 {
                let [x, y] = grid.cell_center(r, col);
                if (x - c.center[0]).hypot(y - c.center[1]) < c.radius - 1e-9 {
                    prop_assert!(mask.get(r, col));
                }
            }
        }
        // and a base displaced by less than the radius minus half a cell
        // diagonal still lands in a feasible cell
        let reach = c.radius - grid.cell * std::f64::consts::SQRT_2 / 2.0;
        if reach > 0.0 {
            for k in 0..64 {
                let a = k as f64 * std::f64::consts::TAU / 64.0;
                let p = [c.center[0] + 0.999 * reach * a.cos(), c.center[1] + 0.999 * reach * a.sin()];
                let (r, col) = grid.cell_of(p[0], p[1]).unwrap();
                prop_assert!(mask.get(r, col));
            }
        }
    }

    #[test]
    fn components_partition_the_mask(seed in any::<u64>(), w in 1usize..=20, h in 1usize..=20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask = random_mask(&mut rng, w, h, 0.55);
        let comps = connected_components(&mask);
        let roots = union_find_components(&mask);
        let mut seen = Mask::new(w, h);
        for (k, m) in comps.iter().enumerate() {
            if k > 0 {
                prop_assert!(comps[k - 1].count() >= m.count());
            }
            let cells: Vec<_> = m.iter_set().collect();
            let root = roots[cells[0].0 * w + cells[0].1];
            prop_assert_eq!(cells.len(), roots.iter().enumerate().filter(|(i, r)| **r == root && mask.get(i / w, i % w)).count());
            for (r, c) in cells {
                prop_assert!(!seen.get(r, c));
                prop_assert_eq!(roots[r * w + c], root);
                seen.set(r, c, true);
            }
        }
        prop_assert_eq!(seen, mask);
    }

    #[test]
    fn enumeration_matches_all_subsets(seed in any::<u64>(), n in 1usize..=5, lambda in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = BaseGridSpec::new([0.0, 0.0], 0.1, 12, 12, 0.0).unwrap();
        let masks: Vec<Mask> = (0..n)
            .map(|_| {
                let density = rng.random_range(0.0..0.7);
                random_mask(&mut rng, 12, 12, density)
            })
            .collect();
        let regions = regions_from(grid, masks);
        let got = enumerate_intersections(&regions, lambda).unwrap();
        let mut expected = Vec::new();
        for bits in 1u32..(1 << n) {
            let members: Vec<usize> = (0..n).filter(|i| bits >> i & 1 == 1).collect();
            if members.len() > lambda {
                continue;
            }
            let refs: Vec<&BaseRegion> = members.iter().map(|&i| &regions[i]).collect();
            let m = intersect(&refs).unwrap();
            if !m.is_empty() {
                expected.push((members, m));
            }
        }
        expected.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then(a.0.cmp(&b.0)));
        prop_assert_eq!(got.len(), expected.len());
        for (rec, (members, m)) in got.iter().zip(&expected) {
            prop_assert_eq!(&rec.members, members);
            prop_assert_eq!(&rec.mask, m);
        }
    }

    #[test]
    fn intersection_radius_never_exceeds_its_parts(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = BaseGridSpec::new([-1.0, -1.0], 0.05, 40, 40, 0.0).unwrap();
        let disk = |rng: &mut ChaCha8Rng| disk_mask(&grid, &[([rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)], rng.random_range(0.2..0.6))]);
        let regions = regions_from(grid, vec![disk(&mut rng), disk(&mut rng), disk(&mut rng)]);
        let recs = enumerate_intersections(&regions, 3).unwrap();
        let radius = |members: &[usize]| recs.iter().find(|r| r.members == members).map_or(0.0, IntersectionRecord::inscribed_radius);
        for r in recs.iter().filter(|r| r.order() >= 2) {
            for drop in 0..r.order() {
                let sub: Vec<usize> = r.members.iter().enumerate().filter(|(i, _)| *i != drop).map(|(_, v)| *v).collect();
                prop_assert!(r.inscribed_radius() <= radius(&sub) + 1e-12);
            }
        }
    }

    #[test]
    fn filter_is_monotone_in_sigma(seed in any::<u64>(), s1 in 0.0f64..0.5, extra in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = BaseGridSpec::new([0.0, 0.0], 0.05, 30, 30, 0.0).unwrap();
        let masks: Vec<Mask> = (0..4).map(|_| random_mask(&mut rng, 30, 30, 0.8)).collect();
        let recs = enumerate_intersections(&regions_from(grid, masks), 4).unwrap();
        let loose = filter_by_uncertainty(&recs, &UncertaintyModel::new(s1, ErrorModel::default(), 0).unwrap());
        let tight = filter_by_uncertainty(&recs, &UncertaintyModel::new(s1 + extra, ErrorModel::default(), 0).unwrap());
        for r in &tight {
            prop_assert!(loose.contains(r));
            prop_assert!(r.inscribed_radius() >= s1 + extra);
        }
        for r in &recs {
            prop_assert_eq!(loose.contains(r), r.inscribed_radius() >= s1);
        }
    }
}

#[test]
fn mismatched_grids_are_rejected() {
    let a = BaseGridSpec::new([0.0, 0.0], 0.1, 4, 4, 0.0).unwrap();
    let b = BaseGridSpec::new([0.0, 0.0], 0.1, 4, 5, 0.0).unwrap();
    let regions = vec![
        BaseRegion { tray: "a".into(), grid: a, mask: Mask::filled(4, 4) },
        BaseRegion { tray: "b".into(), grid: b, mask: Mask::filled(4, 5) },
    ];
    assert!(enumerate_intersections(&regions, 2).is_err());
    assert!(matches!(enumerate_intersections(&[], 2), Err(RegionGeoError::NoRegions)));
}

#[test]
fn uncertainty_model_validates() {
    assert!(UncertaintyModel::new(-0.1, ErrorModel::default(), 0).is_err());
    assert!(UncertaintyModel::new(f64::NAN, ErrorModel::default(), 0).is_err());
    for m in [ErrorModel::BoundaryWorstCase, ErrorModel::UniformDisk, ErrorModel::GaussianRadial] {
        assert_eq!(ErrorModel::parse(m.name()), Some(m));
    }
}

#[test]
fn ties_go_to_the_lowest_cell() {
    let mask = Mask::from_rows(&["###.###", "###.###", "###.###"]).unwrap();
    let grid = BaseGridSpec::new([0.0, 0.0], 1.0, 7, 3, 0.0).unwrap();
    let c = inscribed_circle(&mask, &grid).unwrap();
    assert_eq!(c.cell, (1, 1));
    assert_eq!(c.squared_cells, 4);
}
