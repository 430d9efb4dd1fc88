use neutral_core::assemblage::{assemblage_to_field, overlap_test, pack, Assemblage, PackOptions, PlacedInclusion, StopReason};
use neutral_core::effective::effective_conductivity_p2;
use neutral_core::geometry::volume_fraction;
use neutral_core::verifier::{effective_from_cell, solve_cell, Grid, SolveOptions};
use neutral_core::{k_factors, Axis, EllipsoidSpec, MaterialPair, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn proto() -> EllipsoidSpec {
    EllipsoidSpec::from_volume_fraction([0.8, 1.0, 1.25], 0.5).unwrap()
}

fn mat() -> MaterialPair {
    MaterialPair::linear(10.0, 1.0).unwrap()
}

fn inside(x: &Vec3, inc: &PlacedInclusion, le: &Vec3) -> bool {
    (0..3)
        .map(|d| ((x[d] - inc.center[d]) / (inc.scale * le[d])).powi(2))
        .sum::<f64>()
        < 1.0
}

#[test]
fn overlap_agrees_with_point_membership() {
    let proto = proto();
    let le = proto.exterior_semi_axes();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (mut trials, mut overlapping) = (0, 0);
    while trials < 10_000 {
        let mut draw = || PlacedInclusion {
            center: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            scale: rng.gen_range(0.05..0.6),
        };
        let (a, b) = (draw(), draw());
        // gap between the mapped balls, relative to the smaller one
        let gap = ((0..3)
            .map(|d| ((a.center[d] - b.center[d]) / le[d]).powi(2))
            .sum::<f64>()
            .sqrt()
            - a.scale
            - b.scale)
            / a.scale.min(b.scale);
        if gap.abs() < 0.1 {
            continue;
        }
        trials += 1;
        // sample the intersection of the two bounding boxes
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for d in 0..3 {
            lo[d] = (a.center[d] - a.scale * le[d]).max(b.center[d] - b.scale * le[d]);
            hi[d] = (a.center[d] + a.scale * le[d]).min(b.center[d] + b.scale * le[d]);
        }
        let mut shared = false;
        if (0..3).all(|d| lo[d] < hi[d]) {
            for _ in 0..4000 {
                let x = [
                    rng.gen_range(lo[0]..hi[0]),
                    rng.gen_range(lo[1]..hi[1]),
                    rng.gen_range(lo[2]..hi[2]),
                ];
                if inside(&x, &a, &le) && inside(&x, &b, &le) {
                    shared = true;
                    break;
                }
            }
        }
        assert_eq!(overlap_test(&a, &b, &proto), shared, "{a:?} {b:?} gap {gap}");
        overlapping += shared as usize;
    }
    assert!(overlapping > 1000 && overlapping < 9000, "{overlapping}");
}

#[test]
fn tangent_copies_do_not_overlap() {
    let proto = EllipsoidSpec::sphere(0.5, 1.0).unwrap();
    let a = PlacedInclusion { center: [0.0; 3], scale: 0.25 };
    let b = PlacedInclusion { center: [0.5, 0.0, 0.0], scale: 0.25 };
    assert!(!overlap_test(&a, &b, &proto));
    assert!(overlap_test(&a, &a, &proto));
}

#[test]
fn small_target_keeps_the_centered_copy() {
    let opts = PackOptions {
        target_fill: 0.01,
        ..PackOptions::default()
    };
    let asm = pack(&proto(), &mat(), &opts).unwrap();
    assert_eq!(asm.inclusions.len(), 1);
    assert_eq!(asm.inclusions[0].center, [0.0; 3]);
    assert_eq!(asm.stop, StopReason::TargetReached);
}

#[test]
fn sphere_packing_reaches_forty_percent() {
    let proto = EllipsoidSpec::sphere(0.5, 1.0).unwrap();
    let opts = PackOptions {
        target_fill: 0.5,
        levels: 8,
        lambda0: Some(0.3),
        max_inclusions: 3000,
        ..PackOptions::default()
    };
    let asm = pack(&proto, &mat(), &opts).unwrap();
    assert!(asm.fill >= 0.4, "fill {}", asm.fill);
    asm.validate().unwrap();
    assert_eq!(asm, pack(&proto, &mat(), &opts).unwrap());
    let other = pack(&proto, &mat(), &PackOptions { seed: 1, ..opts }).unwrap();
    assert_ne!(asm.inclusions, other.inclusions);
}

#[test]
fn copies_share_shape_constants() {
    let proto = proto();
    let asm = pack(&proto, &mat(), &PackOptions { max_inclusions: 50, ..PackOptions::default() }).unwrap();
    assert_eq!(asm.theta1(), volume_fraction(&proto));
    assert_eq!(asm.k_factors().unwrap(), k_factors(&proto).unwrap());
    let k = k_factors(&proto).unwrap();
    for inc in &asm.inclusions {
        let s = inc.spec(&proto).unwrap();
        assert!((volume_fraction(&s) - asm.theta1()).abs() < 1e-13);
        let ks = k_factors(&s).unwrap();
        assert!((0..3).all(|j| (ks[j] - k[j]).abs() < 1e-13 * k[j]));
    }
}

#[test]
fn empty_assemblage_is_uniform() {
    let asm = Assemblage {
        prototype: proto(),
        materials: mat(),
        inclusions: vec![],
        fill: 0.0,
        target_fill: 0.5,
        stop: StopReason::MaxInclusions,
    };
    let (field, report) = assemblage_to_field(&asm, 2.5, &Grid::new(16, 0.5).unwrap(), 2).unwrap();
    assert!(field.is_uniform());
    assert_eq!(report.rasterized, 0);
}

#[test]
fn conductivity_independent_of_copy_count() {
    let proto = proto();
    let lmax = 1.25;
    let opts = PackOptions {
        target_fill: 0.9,
        max_inclusions: 3,
        seed: 11,
        levels: 5,
        lambda0: Some(0.3 / lmax),
        ..PackOptions::default()
    };
    let asm = pack(&proto, &mat(), &opts).unwrap();
    assert_eq!(asm.inclusions.len(), 3);
    let sigma = effective_conductivity_p2(&proto, &mat(), Axis::X1).unwrap();
    let grid = Grid::new(64, 0.5).unwrap();
    let measure = |a: &Assemblage| {
        let (field, _) = assemblage_to_field(a, sigma, &grid, 4).unwrap();
        let sol = solve_cell(&field, 1.0, Axis::X1, &SolveOptions::default()).unwrap();
        effective_from_cell(&sol, &field)
    };
    let mut single = asm.clone();
    single.inclusions.truncate(1);
    let (many, one) = (measure(&asm), measure(&single));
    assert!((many / sigma - 1.0).abs() < 0.02, "{many} vs {sigma}");
    assert!((many / one - 1.0).abs() < 0.01, "{many} vs {one}");
}
