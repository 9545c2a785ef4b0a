//! Carotid–femoral pulse wave velocity from segment properties.
//!
//! Along the tree path between the carotid and femoral sites,
//!
//! ```text
//! cfPWV = Σ L_i / Σ L_i·sqrt(ρ·λ_C·D_i)
//! ```
//!
//! with `D_i` the segment distensibility, so each denominator term is the
//! Moens–Korteweg transit time of that piece. Because every term scales with
//! `sqrt(λ_C)`, the multiplier matching a measured cfPWV has a closed form.

use super::{ArterialNetwork, Site};
use crate::error::{Error, Result};
use crate::units;

/// A fraction of one segment lying on the carotid–femoral path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPiece {
    /// Position of the segment in [`ArterialNetwork::segments`].
    pub segment: usize,
    /// Fraction of the segment length on the path, in (0, 1].
    pub fraction: f64,
}

/// Pieces of the tree path from the carotid site to the femoral site.
pub fn cfpwv_path(net: &ArterialNetwork) -> Result<Vec<PathPiece>> {
    let car = net.site(Site::Carotid);
    let fem = net.site(Site::Femoral);
    let ia = net
        .index_of(car.segment_id)
        .ok_or_else(|| Error::DisconnectedPath("carotid segment not found".into()))?;
    let ib = net
        .index_of(fem.segment_id)
        .ok_or_else(|| Error::DisconnectedPath("femoral segment not found".into()))?;

    let ancestors = |mut i: usize| {
        let mut chain = vec![i];
        while let Some(p) = net.parent_index(i) {
            chain.push(p);
            i = p;
        }
        chain.reverse();
        chain
    };
    let chain_a = ancestors(ia);
    let chain_b = ancestors(ib);
    if chain_a[0] != chain_b[0] {
        return Err(Error::DisconnectedPath("sites lie in different trees".into()));
    }
    let common = chain_a
        .iter()
        .zip(&chain_b)
        .take_while(|(a, b)| a == b)
        .count();
    let lca = chain_a[common - 1];

    let mut pieces = Vec::new();
    let mut push = |segment: usize, fraction: f64| {
        if fraction > 0.0 {
            pieces.push(PathPiece { segment, fraction });
        }
    };

    if ia == ib {
        push(ia, (fem.s - car.s).abs());
    } else {
        // side hanging below the LCA: from the site up to the segment's proximal end
        let mut side = |chain: &[usize], site_s: f64, leaf: usize| {
            if leaf == lca {
                // the other site is a descendant: go from the site to the distal end
                push(leaf, 1.0 - site_s);
            } else {
                push(leaf, site_s);
                for &i in &chain[common..chain.len() - 1] {
                    push(i, 1.0);
                }
            }
        };
        side(&chain_a, car.s, ia);
        side(&chain_b, fem.s, ib);
    }

    if pieces.is_empty() {
        return Err(Error::DisconnectedPath(
            "carotid and femoral sites coincide".into(),
        ));
    }
    Ok(pieces)
}

/// Length-weighted harmonic pulse wave velocity along the carotid–femoral
/// path, in m/s.
pub fn compute_cfpwv(net: &ArterialNetwork, lambda_c: f64) -> Result<f64> {
    if !(lambda_c.is_finite() && lambda_c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda_c must be > 0, got {lambda_c}"
        )));
    }
    let rho = net.constants().rho;
    let mut length = 0.0;
    let mut transit = 0.0;
    for piece in cfpwv_path(net)? {
        let seg = &net.segments()[piece.segment];
        let l = piece.fraction * seg.length_cm;
        let d = units::distensibility_to_cgs(seg.distensibility_per_mmhg);
        length += l;
        transit += l * (rho * lambda_c * d).sqrt();
    }
    Ok(units::cm_per_s_to_m_per_s(length / transit))
}

/// Distensibility multiplier reproducing a measured cfPWV (m/s).
pub fn fit_lambda_c(net: &ArterialNetwork, cfpwv_target: f64) -> Result<f64> {
    if !(cfpwv_target.is_finite() && cfpwv_target > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "cfPWV target must be > 0, got {cfpwv_target}"
        )));
    }
    let base = compute_cfpwv(net, 1.0)?;
    Ok((base / cfpwv_target).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hemonet::{Constants, ScaleSet, Segment, SitePosition, WindkesselTerminal};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn uniform_chain(n: usize, distensibility: f64) -> ArterialNetwork {
        let segments = (0..n)
            .map(|i| Segment {
                id: i as i64 + 1,
                name: format!("s{i}"),
                length_cm: 10.0,
                d_prox_cm: 2.0,
                d_dist_cm: 2.0,
                distensibility_per_mmhg: distensibility,
                parent: (i > 0).then_some(i as i64),
                children: if i + 1 < n { vec![i as i64 + 2] } else { vec![] },
            })
            .collect();
        let terminals = vec![WindkesselTerminal {
            segment_id: n as i64,
            r1: 0.1,
            r2: 1.0,
            ct: 1.0,
        }];
        let mut sites = BTreeMap::new();
        for site in Site::ALL {
            sites.insert(site, SitePosition { segment_id: 1, s: 0.0 });
        }
        sites.insert(
            Site::Femoral,
            SitePosition {
                segment_id: n as i64,
                s: 1.0,
            },
        );
        ArterialNetwork::new(segments, terminals, sites, Constants::default()).unwrap()
    }

    #[test]
    fn uniform_path_gives_moens_korteweg_speed() {
        let d0 = 3.0e-3;
        let net = uniform_chain(4, d0);
        let lambda_c = 1.7;
        let expected = 1.0 / (1.05 * lambda_c * d0 / units::MMHG).sqrt() / 100.0;
        let got = compute_cfpwv(&net, lambda_c).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn quadrupled_lambda_halves_speed() {
        let net = ArterialNetwork::reference();
        let a = compute_cfpwv(&net, 0.8).unwrap();
        let b = compute_cfpwv(&net, 3.2).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bundled_network_in_clinical_range() {
        let v = compute_cfpwv(&ArterialNetwork::reference(), 1.0).unwrap();
        assert!((4.5..=9.0).contains(&v), "cfPWV {v}");
    }

    #[test]
    fn bundled_path_is_the_aortic_route() {
        let net = ArterialNetwork::reference();
        let names: Vec<_> = cfpwv_path(&net)
            .unwrap()
            .iter()
            .map(|p| net.segments()[p.segment].name.clone())
            .collect();
        assert!(names.contains(&"thoracic_aorta".to_string()));
        assert!(names.contains(&"right_femoral".to_string()));
        assert!(!names.contains(&"ascending_aorta".to_string()));
    }

    #[test]
    fn fit_fixed_points() {
        let net = ArterialNetwork::reference();
        let base = compute_cfpwv(&net, 1.0).unwrap();
        assert!((fit_lambda_c(&net, base).unwrap() - 1.0).abs() < 1e-12);
        assert!((fit_lambda_c(&net, 2.0 * base).unwrap() - 0.25).abs() < 1e-12);
        let lc = fit_lambda_c(&net, 6.4).unwrap();
        assert!((compute_cfpwv(&net, lc).unwrap() - 6.4).abs() < 1e-9);
    }

    #[test]
    fn fit_rejects_non_positive_target() {
        let net = ArterialNetwork::reference();
        assert!(fit_lambda_c(&net, 0.0).is_err());
        assert!(fit_lambda_c(&net, -3.0).is_err());
    }

    #[test]
    fn geometry_scaling_leaves_cfpwv_unchanged() {
        let net = ArterialNetwork::reference();
        let scaled = net
            .scale(&ScaleSet {
                lambda_l: 1.1,
                lambda_d: 0.9,
                ..Default::default()
            })
            .unwrap();
        let a = compute_cfpwv(&net, 1.0).unwrap();
        let b = compute_cfpwv(&scaled, 1.0).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    proptest! {
        #[test]
        fn sqrt_lambda_scaling_law(l in 0.05f64..20.0) {
            let net = ArterialNetwork::reference();
            let k1 = compute_cfpwv(&net, 1.0).unwrap();
            let kl = compute_cfpwv(&net, l).unwrap() * l.sqrt();
            prop_assert!((kl - k1).abs() < 1e-12 * k1);
        }

        #[test]
        fn fit_inverts_compute(l in 0.05f64..20.0) {
            let net = ArterialNetwork::reference();
            let v = compute_cfpwv(&net, l).unwrap();
            let back = fit_lambda_c(&net, v).unwrap();
            prop_assert!((back - l).abs() < 1e-10 * l);
        }

        #[test]
        fn strictly_decreasing_in_lambda(a in 0.05f64..10.0, da in 1e-3f64..10.0) {
            let net = ArterialNetwork::reference();
            prop_assert!(compute_cfpwv(&net, a + da).unwrap() < compute_cfpwv(&net, a).unwrap());
        }
    }
}
