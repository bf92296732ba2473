//! Certification of every graph-engine rule against the dense oracle.
//!
//! For each operation and each outcome branch: take the physical input state,
//! replay the operation at amplitude level with the engine's logged outcomes,
//! and require equality (up to global phase) with the physical state the
//! engine reports afterwards.

use qnet::graphstate::{
    random_framed_graph, GraphError, GraphState, OutcomeSource, QubitId,
};
use qnet::oracle::{
    equal_up_to_phase, measure_bell, measure_projective, physical_statevector, MeasureBasis,
    StateVector,
};

fn q(i: u32) -> QubitId {
    QubitId::new("v", i)
}

fn assert_match(reference: &StateVector, engine_after: &GraphState, ctx: &str) {
    let got = physical_statevector(engine_after).unwrap();
    assert!(
        equal_up_to_phase(reference, &got, 1e-9).unwrap_or(false),
        "engine/oracle mismatch: {ctx}"
    );
}

fn corpus() -> Vec<GraphState> {
    let mut out = Vec::new();
    let mut seed = 0u64;
    for round in 0..30u32 {
        for n in 2..=8u32 {
            let labels: Vec<QubitId> = (0..n).map(q).collect();
            let p = match round % 3 {
                0 => 0.3,
                1 => 0.5,
                _ => 0.8,
            };
            out.push(random_framed_graph(&labels, p, seed));
            seed += 1;
        }
    }
    assert!(out.len() >= 200);
    out
}

#[test]
fn local_complement_preserves_physical_state() {
    for g in corpus() {
        let sv = physical_statevector(&g).unwrap();
        for a in g.vertices() {
            let g2 = g.local_complement(a).unwrap();
            assert_match(&sv, &g2, &format!("lc at {a}"));
        }
    }
}

#[test]
fn single_qubit_measurements_match_oracle() {
    for (gi, g) in corpus().into_iter().enumerate() {
        let sv = physical_statevector(&g).unwrap();
        let verts: Vec<QubitId> = g.vertices().cloned().collect();
        for a in &verts {
            for bit in 0..2u8 {
                for basis in [MeasureBasis::Z, MeasureBasis::Y, MeasureBasis::X] {
                    let mut src = OutcomeSource::fixed(bit);
                    let g2 = match basis {
                        MeasureBasis::Z => g.measure_z(a, &mut src),
                        MeasureBasis::Y => g.measure_y(a, &mut src),
                        MeasureBasis::X => g.measure_x(a, None, &mut src),
                    }
                    .unwrap();
                    let m = g2.outcome_log.last().unwrap().outcome;
                    let (_, reference) = measure_projective(&sv, a, basis, m).unwrap();
                    assert_match(
                        &reference,
                        &g2,
                        &format!("graph {gi}, {basis:?} on {a}, branch {bit}"),
                    );
                }
            }
        }
    }
}

#[test]
fn x_measurement_special_neighbour_choices_match_oracle() {
    for (gi, g) in corpus().into_iter().enumerate().filter(|(_, g)| g.vertex_count() <= 5) {
        let sv = physical_statevector(&g).unwrap();
        let verts: Vec<QubitId> = g.vertices().cloned().collect();
        for a in &verts {
            let ns: Vec<QubitId> = g.neighbours(a).unwrap().iter().cloned().collect();
            for b0 in &ns {
                for bit in 0..2u8 {
                    let mut src = OutcomeSource::fixed(bit);
                    let g2 = g.measure_x(a, Some(b0), &mut src).unwrap();
                    let m = g2.outcome_log.last().unwrap().outcome;
                    let (_, reference) = measure_projective(&sv, a, MeasureBasis::X, m).unwrap();
                    assert_match(&reference, &g2, &format!("graph {gi}, X on {a} via {b0}"));
                }
            }
        }
    }
}

#[test]
fn cz_matches_oracle() {
    for (gi, g) in corpus().into_iter().enumerate() {
        let mut sv = physical_statevector(&g).unwrap();
        let verts: Vec<QubitId> = g.vertices().cloned().collect();
        for i in 0..verts.len() {
            for j in 0..verts.len() {
                if i == j {
                    continue;
                }
                let g2 = g.apply_cz(&verts[i], &verts[j]).unwrap();
                let mut reference = sv.clone();
                reference.apply_cz(&verts[i], &verts[j]).unwrap();
                assert_match(&reference, &g2, &format!("graph {gi}, CZ {i}->{j}"));
            }
        }
        // Chains of CZ on one evolving state.
        let mut g_acc = g.clone();
        for w in verts.windows(2) {
            g_acc = g_acc.apply_cz(&w[0], &w[1]).unwrap();
            sv.apply_cz(&w[0], &w[1]).unwrap();
        }
        assert_match(&sv, &g_acc, &format!("graph {gi}, CZ chain"));
    }
}

#[test]
fn measurement_chains_on_random_graphs_match_oracle() {
    // Deplete whole graphs with seeded measurement sequences.
    for (gi, g) in corpus().into_iter().enumerate() {
        let mut src = OutcomeSource::seeded(1000 + gi as u64);
        let mut engine = g.clone();
        let mut reference = physical_statevector(&g).unwrap();
        let mut step = 0usize;
        while engine.vertex_count() > 0 {
            let a = engine.vertices().next().unwrap().clone();
            let basis = match step % 3 {
                0 => MeasureBasis::X,
                1 => MeasureBasis::Y,
                _ => MeasureBasis::Z,
            };
            engine = match basis {
                MeasureBasis::X => engine.measure_x(&a, None, &mut src),
                MeasureBasis::Y => engine.measure_y(&a, &mut src),
                MeasureBasis::Z => engine.measure_z(&a, &mut src),
            }
            .unwrap();
            let m = engine.outcome_log.last().unwrap().outcome;
            let (_, next) = measure_projective(&reference, &a, basis, m).unwrap();
            reference = next;
            step += 1;
        }
        assert_match(&reference, &engine, &format!("graph {gi} depletion"));
    }
}

#[test]
fn ghz_fusion_law_all_outcomes() {
    // Bell merge of GHZ_m and GHZ_n gives GHZ_{m+n-2}; every outcome pair.
    for m in 2..=5u32 {
        for n in 2..=5u32 {
            let left: Vec<QubitId> = (0..m).map(|i| QubitId::new("l", i)).collect();
            let right: Vec<QubitId> = (0..n).map(|i| QubitId::new("r", i)).collect();
            let mut g = GraphState::new();
            g.add_star(&left).unwrap();
            g.add_star(&right).unwrap();
            let sv = physical_statevector(&g).unwrap();
            // Merge a leaf of the left star with a leaf of the right star
            // (roots when the star is a bare pair work too; covered below).
            let a = left.last().unwrap();
            let b = right.last().unwrap();
            let mut sv = sv;
            sv.apply_clifford(a, g.ghz_frame_correction(a).unwrap()).unwrap();
            sv.apply_clifford(b, g.ghz_frame_correction(b).unwrap()).unwrap();
            for x in 0..2u8 {
                for z in 0..2u8 {
                    let mut src = OutcomeSource::script(vec![x, z]);
                    let g2 = g.bell_merge(a, b, &mut src).unwrap();
                    let log = &g2.outcome_log;
                    let (mx, mz) = (log[log.len() - 2].outcome, log[log.len() - 1].outcome);
                    assert_eq!((mx, mz), (x, z));
                    assert_eq!(g2.vertex_count() as u32, m + n - 2);
                    let survivor = g2.vertices().next().unwrap();
                    if m + n - 2 >= 2 {
                        assert!(
                            g2.star_centre(survivor).is_some(),
                            "fusion result not a star for m={m} n={n}"
                        );
                        assert_eq!(g2.component(survivor).len() as u32, m + n - 2);
                    }
                    let (_, reference) = measure_bell(&sv, a, b, mx, mz).unwrap();
                    assert_match(&reference, &g2, &format!("fusion m={m} n={n} ({x},{z})"));
                }
            }
        }
    }
}

#[test]
fn ghz_fusion_on_roots_matches_oracle() {
    for m in 2..=4u32 {
        for n in 2..=4u32 {
            let left: Vec<QubitId> = (0..m).map(|i| QubitId::new("l", i)).collect();
            let right: Vec<QubitId> = (0..n).map(|i| QubitId::new("r", i)).collect();
            let mut g = GraphState::new();
            g.add_star(&left).unwrap();
            g.add_star(&right).unwrap();
            let mut sv = physical_statevector(&g).unwrap();
            sv.apply_clifford(&left[0], g.ghz_frame_correction(&left[0]).unwrap())
                .unwrap();
            sv.apply_clifford(&right[0], g.ghz_frame_correction(&right[0]).unwrap())
                .unwrap();
            let mut src = OutcomeSource::seeded(7 + (m * 10 + n) as u64);
            let g2 = g.bell_merge(&left[0], &right[0], &mut src).unwrap();
            let log = &g2.outcome_log;
            let (mx, mz) = (log[log.len() - 2].outcome, log[log.len() - 1].outcome);
            assert_eq!(g2.vertex_count() as u32, m + n - 2);
            let (_, reference) = measure_bell(&sv, &left[0], &right[0], mx, mz).unwrap();
            assert_match(&reference, &g2, &format!("root fusion m={m} n={n}"));
        }
    }
}

#[test]
fn ghz_fusion_leaf_with_root_matches_oracle() {
    // Mixed-role merge: operands carry different structural dressings, so
    // this exercises the GHZ-frame rotation inside the merge.
    for m in 3..=5u32 {
        for n in 2..=5u32 {
            let left: Vec<QubitId> = (0..m).map(|i| QubitId::new("l", i)).collect();
            let right: Vec<QubitId> = (0..n).map(|i| QubitId::new("r", i)).collect();
            let mut g = GraphState::new();
            g.add_star(&left).unwrap();
            g.add_star(&right).unwrap();
            let a = &left[1]; // leaf
            let b = &right[0]; // root
            let mut sv = physical_statevector(&g).unwrap();
            sv.apply_clifford(a, g.ghz_frame_correction(a).unwrap()).unwrap();
            sv.apply_clifford(b, g.ghz_frame_correction(b).unwrap()).unwrap();
            for x in 0..2u8 {
                for z in 0..2u8 {
                    let mut src = OutcomeSource::script(vec![x, z]);
                    let g2 = g.bell_merge(a, b, &mut src).unwrap();
                    assert_eq!(g2.vertex_count() as u32, m + n - 2);
                    let survivor = g2.vertices().next().unwrap();
                    assert_eq!(g2.component(survivor).len() as u32, m + n - 2);
                    assert!(g2.star_centre(survivor).is_some());
                    let (_, reference) = measure_bell(&sv, a, b, x, z).unwrap();
                    assert_match(&reference, &g2, &format!("leaf-root m={m} n={n} ({x},{z})"));
                }
            }
        }
    }
}

#[test]
fn merge_keep_size_law_and_oracle() {
    for m in 2..=4u32 {
        for n in 2..=4u32 {
            let left: Vec<QubitId> = (0..m).map(|i| QubitId::new("l", i)).collect();
            let right: Vec<QubitId> = (0..n).map(|i| QubitId::new("r", i)).collect();
            let mut g = GraphState::new();
            g.add_star(&left).unwrap();
            g.add_star(&right).unwrap();
            let sv = physical_statevector(&g).unwrap();
            let a = left.last().unwrap();
            let b = right.last().unwrap();
            for bit in 0..2u8 {
                let mut src = OutcomeSource::fixed(bit);
                let g2 = g.merge_keep(a, b, &mut src).unwrap();
                let mz = g2.outcome_log.last().unwrap().outcome;
                assert_eq!(g2.vertex_count() as u32, m + n - 1);
                assert!(g2.contains(a));
                assert!(!g2.contains(b));
                assert!(g2.star_centre(a).is_some());
                assert_eq!(g2.component(a).len() as u32, m + n - 1);
                // Physical reference: rotate operands to the GHZ frame, then
                // CNOT(a -> b) and a Z measurement of b.
                let mut reference = sv.clone();
                reference
                    .apply_clifford(a, g.ghz_frame_correction(a).unwrap())
                    .unwrap();
                reference
                    .apply_clifford(b, g.ghz_frame_correction(b).unwrap())
                    .unwrap();
                reference
                    .apply_clifford(b, qnet::clifford::Clifford::hadamard())
                    .unwrap();
                reference.apply_cz(a, b).unwrap();
                reference
                    .apply_clifford(b, qnet::clifford::Clifford::hadamard())
                    .unwrap();
                let (_, reference) = measure_projective(&reference, b, MeasureBasis::Z, mz).unwrap();
                assert_match(&reference, &g2, &format!("merge_keep m={m} n={n} bit {bit}"));
            }
        }
    }
}

#[test]
fn ghz_star_shape() {
    // 3-star: root connected to both leaves, no leaf-leaf edge.
    let labels: Vec<QubitId> = (0..3).map(q).collect();
    let g = GraphState::ghz_star(&labels).unwrap();
    assert!(g.has_edge(&q(0), &q(1)));
    assert!(g.has_edge(&q(0), &q(2)));
    assert!(!g.has_edge(&q(1), &q(2)));
    assert_eq!(g.star_centre(&q(1)), Some(q(0)));
}

#[test]
fn triangle_z_measurement_keeps_far_edge() {
    let labels: Vec<QubitId> = (0..3).map(q).collect();
    let mut g = GraphState::new();
    for l in &labels {
        g.add_vertex(l.clone()).unwrap();
    }
    let g = g
        .apply_cz(&q(0), &q(1))
        .unwrap()
        .apply_cz(&q(1), &q(2))
        .unwrap()
        .apply_cz(&q(0), &q(2))
        .unwrap();
    let mut src = OutcomeSource::fixed(0);
    let g2 = g.measure_z(&q(0), &mut src).unwrap();
    assert!(g2.has_edge(&q(1), &q(2)));
    assert_eq!(g2.vertex_count(), 2);
}

#[test]
fn x_measure_star_root_moves_root_to_special_neighbour() {
    let labels: Vec<QubitId> = (0..4).map(q).collect();
    let g = GraphState::ghz_star(&labels).unwrap();
    let mut src = OutcomeSource::fixed(0);
    let g2 = g.measure_x(&q(0), Some(&q(1)), &mut src).unwrap();
    assert_eq!(g2.vertex_count(), 3);
    assert_eq!(g2.star_centre(&q(2)), Some(q(1)));
}

#[test]
fn y_measure_ghz3_leaf_keeps_connection() {
    let labels: Vec<QubitId> = (0..3).map(q).collect();
    let g = GraphState::ghz_star(&labels).unwrap();
    for bit in 0..2u8 {
        let mut src = OutcomeSource::fixed(bit);
        let g2 = g.measure_y(&q(1), &mut src).unwrap();
        assert_eq!(g2.vertex_count(), 2);
        assert!(g2.has_edge(&q(0), &q(2)));
    }
}

#[test]
fn cz_joins_two_pairs_into_path() {
    let mut g = GraphState::new();
    g.add_star(&[q(0), q(1)]).unwrap();
    g.add_star(&[q(2), q(3)]).unwrap();
    let g2 = g.apply_cz(&q(1), &q(2)).unwrap();
    assert!(g2.has_edge(&q(0), &q(1)));
    assert!(g2.has_edge(&q(1), &q(2)));
    assert!(g2.has_edge(&q(2), &q(3)));
    assert!(!g2.has_edge(&q(0), &q(3)));
}

#[test]
fn error_paths() {
    let labels: Vec<QubitId> = (0..3).map(q).collect();
    let g = GraphState::ghz_star(&labels).unwrap();
    let missing = q(99);
    let mut src = OutcomeSource::fixed(0);

    assert!(matches!(GraphState::ghz_star(&[q(0)]), Err(GraphError::InvalidSize(1))));
    assert!(matches!(
        GraphState::ghz_star(&[q(0), q(0)]),
        Err(GraphError::InvalidLabels)
    ));
    assert!(matches!(
        g.measure_z(&missing, &mut src),
        Err(GraphError::NotFound(_))
    ));
    assert!(matches!(g.apply_cz(&q(0), &q(0)), Err(GraphError::InvalidPair)));
    assert!(matches!(
        g.measure_x(&q(0), Some(&missing), &mut src),
        Err(GraphError::InvalidSpecialNeighbour(_))
    ));
    // merge within one component
    assert!(matches!(
        g.bell_merge(&q(1), &q(2), &mut src),
        Err(GraphError::WouldCreateLoop)
    ));
    // merge on a non-star component
    let mut h = GraphState::new();
    for i in 0..4 {
        h.add_vertex(q(i)).unwrap();
    }
    let h = h
        .apply_cz(&q(0), &q(1))
        .unwrap()
        .apply_cz(&q(1), &q(2))
        .unwrap()
        .apply_cz(&q(2), &q(0))
        .unwrap();
    assert!(matches!(
        h.bell_merge(&q(0), &q(3), &mut src),
        Err(GraphError::UnsupportedShape)
    ));
}

#[test]
fn cz_fallback_table_generates() {
    assert_eq!(qnet::graphstate::selfcheck_cz_table(), 2 * 24 * 24);
}

#[test]
fn seeded_outcomes_reproduce() {
    let labels: Vec<QubitId> = (0..6).map(q).collect();
    let g = random_framed_graph(&labels, 0.5, 99);
    let run = |seed: u64| {
        let mut src = OutcomeSource::seeded(seed);
        let mut cur = g.clone();
        for a in labels.iter() {
            cur = cur.measure_y(a, &mut src).unwrap();
        }
        cur.outcome_log.clone()
    };
    assert_eq!(run(5), run(5));
}
