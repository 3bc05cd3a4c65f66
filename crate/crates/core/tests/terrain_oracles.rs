//! LOS census oracles on synthetic terrain with known answers.

mod common;

use common::*;

#[test]
fn flat_terrain_is_always_los() {
    let t = flat_census();
    for h in 0..t.ue_heights.len() {
        for k in 0..t.n_bins() {
            assert!(t.total[h][k] > 0);
            assert_eq!(t.los[h][k], t.total[h][k], "height {} bin {k}", t.ue_heights[h]);
        }
    }
}

#[test]
fn ridge_shadow_boundary_within_one_bin() {
    for o in ridge_oracle() {
        let e = o.empirical_bin.expect("LOS reappears beyond the shadow");
        assert!(
            e.abs_diff(o.analytic_bin) <= 1,
            "UE {} m: analytic {:.1} m (bin {}), empirical bin {e}",
            o.ue_height,
            o.analytic_m,
            o.analytic_bin
        );
        assert_eq!(o.max_p_in_shadow, 0.0, "{o:?}");
        assert_eq!(o.min_p_beyond, 1.0, "{o:?}");
    }
}

#[test]
fn wall_grid_matches_lattice_census() {
    let mc = wall_census(5000);
    let exact = wall_exhaustive(1.25);
    let gap = wall_census_gap(&mc, &exact);
    assert!(gap <= 0.02, "largest per-bin gap {gap:.4}");
}

#[test]
fn wall_grid_curves_are_monotone() {
    let m = monotonicity(&wall_census(2000));
    assert!(m.fitted_nonincreasing);
    assert!(m.height_nondecreasing);
    assert!(m.worst_distance_rise_se < 3.0, "{m:?}");
}

#[test]
fn tall_ue_clears_walls() {
    let t = wall_census(200);
    let top = t.ue_heights.len() - 1;
    assert_eq!(t.los[top], t.total[top]);
}
