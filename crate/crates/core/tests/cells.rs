use flatbill::cells::{cell_extent, classify, induced_step, periodic_point, window_endpoints, window_radius, Node};
use flatbill::map::scatterer_map;
use flatbill::stats::fit::linear_fit;
use flatbill::stats::{sample_mu_scatterer, stream_rng, Stratification};
use flatbill::{PhasePoint, Table, TableConfig};

fn table() -> Table {
    Table::new(TableConfig::default()).unwrap()
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly).0
}

/// Signed distance along the boundary from the nearest flat point, computed from scratch.
fn offset(t: &Table, r: f64) -> f64 {
    let p = t.perimeter();
    t.flat_points().iter().map(|f| (r - f + 0.5 * p).rem_euclid(p) - 0.5 * p).fold(f64::INFINITY, |a, b| if b.abs() < a.abs() { b } else { a })
}

#[test]
fn labels_survive_a_raw_trajectory_audit() {
    let t = table();
    let eps = t.config().epsilon0;
    let beta = t.beta();
    let mut rng = stream_rng(31, 0);
    let mut audited = 0;
    while audited < 1000 {
        let x = sample_mu_scatterer(&t, &mut rng);
        let Ok(label) = classify(&t, x) else { continue };
        if label.in_window {
            continue;
        }
        // Walk the scatterer map, counting window collisions with the window of each collision's own flight.
        let (mut y, ev) = scatterer_map(&t, x).unwrap();
        assert_eq!(ev.cells_crossed, label.n);
        let mut k = 0;
        loop {
            let (next, ev) = scatterer_map(&t, y).unwrap();
            let n = ev.cells_crossed.max(1) as f64;
            if offset(&t, y.r).abs() > eps * n.powf(-1.0 / (beta - 1.0)) {
                break;
            }
            k += 1;
            y = next;
        }
        assert_eq!(k, label.trap_k, "{x:?}");
        audited += 1;
    }
}

#[test]
fn windows_shrink_with_the_closed_form_exponent() {
    let t = table();
    let (q1, q2, _) = window_endpoints(&t, 0, 1).unwrap();
    let eps = t.config().epsilon0;
    assert!((q2 - eps).abs() < 1e-15 && (q1 - (t.perimeter() - eps)).abs() < 1e-12);
    let ms: Vec<f64> = (0..8).map(|i| 2f64.powi(i)).collect();
    let radii: Vec<f64> = ms.iter().map(|&m| window_radius(&t, m as u64)).collect();
    assert!((slope(&ms, &radii) + 1.0 / (t.beta() - 1.0)).abs() < 1e-12);
}

#[test]
fn curvature_at_the_window_edge_follows_the_profile() {
    let t = table();
    let ms: Vec<f64> = (3..9).map(|i| 2f64.powi(i)).collect();
    let ks: Vec<f64> = ms.iter().map(|&m| window_endpoints(&t, 0, m as u64).unwrap().2).collect();
    let want = -1.0 + 1.0 / (t.beta() - 1.0);
    let s = slope(&ms, &ks);
    assert!((s / want - 1.0).abs() < 0.1, "{s} vs {want}");
}

#[test]
fn cell_extent_scales_like_n_to_minus_one_over_beta() {
    let t = table();
    let ns: Vec<f64> = [10.0, 20.0, 40.0, 80.0, 160.0, 320.0].to_vec();
    let ext: Vec<f64> = ns.iter().map(|&n| cell_extent(&t, n as u64).unwrap()).collect();
    let s = slope(&ns, &ext);
    let want = -1.0 / t.beta();
    assert!((s / want - 1.0).abs() < 0.15, "{s} vs {want}");
}

#[test]
fn periodic_point_sits_in_its_window() {
    let t = table();
    for m in [2u64, 5, 20] {
        let y = periodic_point(&t, m).unwrap();
        let node = Node::at(&t, y).unwrap();
        assert_eq!(node.cell(), m);
        assert!(node.in_window(&t));
        assert!(offset(&t, y.r).abs() <= window_radius(&t, m));
        // Period two: reflection at the partner point sends the orbit back.
        let (y1, _) = scatterer_map(&t, y).unwrap();
        let (y2, _) = scatterer_map(&t, y1).unwrap();
        let p = t.perimeter();
        let dr = (y2.r - y.r + 0.5 * p).rem_euclid(p) - 0.5 * p;
        assert!(dr.abs() < 1e-9 && (y2.phi - y.phi).abs() < 1e-9, "{y:?} {y2:?}");
    }
}

/// `x ∈ M_n` with `F x ∈ M_m` has `m` between lines of slopes `(β-1)/β` and `β/(β-1)` in log-log.
#[test]
fn transitions_stay_between_the_power_envelopes() {
    let t = table();
    let beta = t.beta();
    let strata = Stratification::flat_funnel(&t, &[16.0, 64.0, 256.0, 1024.0], 200_000);
    let mut rng = stream_rng(32, 0);
    let octaves = 12;
    let mut lo = vec![f64::INFINITY; octaves];
    let mut hi = vec![0.0f64; octaves];
    let mut count = vec![0u64; octaves];
    for (region, &n_samples) in strata.regions.iter().zip(&strata.samples) {
        for _ in 0..n_samples {
            let x: PhasePoint = region.sample(&t, &mut rng);
            let Ok(node) = Node::at(&t, x) else { continue };
            if !node.in_m(&t) {
                continue;
            }
            let Ok(st) = induced_step(&t, &node) else { continue };
            let (n, m) = (node.cell() as f64, st.image.cell() as f64);
            if n < 1.0 || m < 1.0 || n.log2() as usize >= octaves {
                continue;
            }
            let b = n.log2() as usize;
            count[b] += 1;
            lo[b] = lo[b].min(m / n.powf((beta - 1.0) / beta));
            hi[b] = hi[b].max(m / n.powf(beta / (beta - 1.0)));
        }
    }
    let pooled = |v: &[f64], r: std::ops::Range<usize>, min: bool| {
        r.filter(|&b| count[b] >= 5).map(|b| v[b]).fold(if min { f64::INFINITY } else { 0.0 }, |a, x| if min { a.min(x) } else { a.max(x) })
    };
    // Constants fitted on the lower octaves bound the upper ones.
    let (lo_small, lo_large) = (pooled(&lo, 3..7, true), pooled(&lo, 7..octaves, true));
    let (hi_small, hi_large) = (pooled(&hi, 0..7, false), pooled(&hi, 7..octaves, false));
    assert!(lo_large.is_finite() && lo_large >= 0.5 * lo_small, "{lo:?} {count:?}");
    assert!(hi_large <= hi_small, "{hi:?} {count:?}");
}
