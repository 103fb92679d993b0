use gsx_core::gf2::{rank, right_kernel, AffineSystem};
use gsx_core::stabilizer::stab_fidelity;
use gsx_core::{BitVec, Graph, MeasurementPattern, PatternAnalysis, Pauli, PauliString, StabilizerTableau, StateVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Matrix = Vec<Vec<Complex64>>;

fn single(p: Pauli) -> [[Complex64; 2]; 2] {
    let (o, l, i) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
    match p {
        Pauli::I => [[l, o], [o, l]],
        Pauli::X => [[o, l], [l, o]],
        Pauli::Y => [[o, -i], [i, o]],
        Pauli::Z => [[l, o], [o, -l]],
    }
}

/// Dense matrix with qubit q on bit q of the basis index.
fn dense(p: &PauliString) -> Matrix {
    let n = p.num_qubits();
    let dim = 1 << n;
    let phase = Complex64::new(0.0, 1.0).powu(p.phase() as u32);
    let mut m = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
    for (row, out) in m.iter_mut().enumerate() {
        for (col, entry) in out.iter_mut().enumerate() {
            let mut v = phase;
            for q in 0..n {
                v *= single(p.pauli(q))[(row >> q) & 1][(col >> q) & 1];
            }
            *entry = v;
        }
    }
    m
}

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let dim = a.len();
    (0..dim)
        .map(|r| (0..dim).map(|c| (0..dim).map(|k| a[r][k] * b[k][c]).sum()).collect())
        .collect()
}

fn close(a: &Matrix, b: &Matrix) -> bool {
    a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| (x - y).norm() < 1e-12)
}

fn pauli_string(n: usize) -> impl Strategy<Value = PauliString> {
    (prop::collection::vec(0u8..4, n), 0u8..4).prop_map(|(letters, phase)| {
        let paulis: Vec<Pauli> = letters
            .into_iter()
            .map(|l| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][l as usize])
            .collect();
        PauliString::from_paulis(&paulis).with_phase(phase)
    })
}

fn pauli_pair() -> impl Strategy<Value = (PauliString, PauliString)> {
    (1usize..=4).prop_flat_map(|n| (pauli_string(n), pauli_string(n)))
}

fn graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (2usize..=max_n).prop_flat_map(|n| {
        prop::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |mask| {
            let mut g = Graph::new(n);
            let mut k = 0;
            for a in 0..n {
                for b in a + 1..n {
                    if mask[k] {
                        g.add_edge(a, b).unwrap();
                    }
                    k += 1;
                }
            }
            g
        })
    })
}

fn graph_and_pattern(max_n: usize) -> impl Strategy<Value = (Graph, Vec<(usize, Pauli)>, u64)> {
    graph(max_n).prop_flat_map(|g| {
        let n = g.num_vertices();
        (
            Just(g),
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
            1..n,
            prop::collection::vec(0usize..3, n),
            any::<u64>(),
        )
            .prop_map(|(g, order, count, bases, seed)| {
                let steps = order[..count]
                    .iter()
                    .map(|&q| (q, [Pauli::X, Pauli::Y, Pauli::Z][bases[q]]))
                    .collect();
                (g, steps, seed)
            })
    })
}

fn bits(max_rows: usize, cols: usize) -> impl Strategy<Value = Vec<BitVec>> {
    prop::collection::vec(prop::collection::vec(any::<bool>(), cols), 0..=max_rows)
        .prop_map(|rows| rows.iter().map(|r| BitVec::from_bools(r)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn product_matches_dense_matrices((a, b) in pauli_pair()) {
        let ab = a.multiply(&b).unwrap();
        prop_assert!(close(&dense(&ab), &matmul(&dense(&a), &dense(&b))));
    }

    #[test]
    fn commutation_matches_dense_matrices((a, b) in pauli_pair()) {
        let same = close(&matmul(&dense(&a), &dense(&b)), &matmul(&dense(&b), &dense(&a)));
        prop_assert_eq!(a.commutes(&b).unwrap(), same);
    }

    #[test]
    fn product_is_associative((a, b, c) in (1usize..=6).prop_flat_map(|n| (pauli_string(n), pauli_string(n), pauli_string(n)))) {
        let left = a.multiply(&b).unwrap().multiply(&c).unwrap();
        let right = a.multiply(&b.multiply(&c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn tableau_stays_valid_under_measurement((g, steps, seed) in graph_and_pattern(9)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = StabilizerTableau::from_graph(&g);
        t.validate().unwrap();
        for (i, &(q, b)) in steps.iter().enumerate() {
            let r = t.measure(q, b, None, &mut rng).unwrap();
            prop_assert!(r.probability == 1.0 || r.probability == 0.5);
            t.validate().unwrap();
            // A repeated measurement is deterministic and reproduces the sign.
            prop_assert_eq!(t.peek(q, b).unwrap(), Some(r.sign));
            if i % 2 == 0 {
                t.apply_local_z((q + 1) % g.num_vertices()).unwrap();
                t.validate().unwrap();
            }
        }
    }

    #[test]
    fn consistent_subgroup_rebuilds_measured_state((g, steps, seed) in graph_and_pattern(9)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = g.num_vertices();
        let m = MeasurementPattern::new(n, steps.iter().copied()).unwrap();
        let mut t = StabilizerTableau::from_graph(&g);
        let mut signs = Vec::new();
        for &(q, b) in &steps {
            signs.push((q, t.measure(q, b, None, &mut rng).unwrap().sign));
        }
        let post = t.reduce(&steps).unwrap();
        let analysis = PatternAnalysis::new(&StabilizerTableau::from_graph(&g), &m).unwrap();
        let outcome = gsx_core::OutcomeRecord::new(signs).unwrap();
        let b = outcome.to_bits(&analysis.measured).unwrap();
        prop_assert!(analysis.is_possible(&b));
        prop_assert!(analysis.post_state(&b).same_state(&post));
        // Every consistent element agrees with the pattern on measured qubits.
        for row in &analysis.consistent {
            for &(q, basis) in &steps {
                let p = row.pauli(q);
                prop_assert!(p == Pauli::I || p == basis);
            }
        }
    }

    #[test]
    fn stabilizer_fidelity_matches_statevector(a in graph(7), flips in prop::collection::vec(any::<bool>(), 7), rewire in any::<u64>()) {
        let n = a.num_vertices();
        let mut b = a.clone();
        let mut r = rewire;
        for x in 0..n {
            for y in x + 1..n {
                if r & 1 == 1 {
                    if b.has_edge(x, y) { b.remove_edge(x, y) } else { b.add_edge(x, y).unwrap() }
                }
                r = r.rotate_right(1);
            }
        }
        let mut tb = StabilizerTableau::from_graph(&b);
        let mut psi_b = StateVector::from_graph(&b).unwrap();
        for (q, _) in flips.iter().enumerate().filter(|(q, f)| **f && *q < n) {
            tb.apply_local_z(q).unwrap();
            psi_b = psi_b.apply_pauli(&PauliString::single(n, q, Pauli::Z).unwrap()).unwrap();
        }
        let ta = StabilizerTableau::from_graph(&a);
        let psi_a = StateVector::from_graph(&a).unwrap();
        let f = stab_fidelity(&ta, &tb).unwrap();
        let dense = psi_a.inner(&psi_b).unwrap().norm_sqr();
        prop_assert!((f - dense).abs() < 1e-12, "{} vs {}", f, dense);
        prop_assert!(f == 0.0 || f.log2().fract() == 0.0);
        prop_assert_eq!(f, stab_fidelity(&tb, &ta).unwrap());
    }

    #[test]
    fn kernel_vectors_annihilate_rows(rows in bits(8, 10)) {
        let k = right_kernel(&rows, 10);
        prop_assert_eq!(k.len() + rank(&rows), 10);
        for v in &k {
            for r in &rows {
                prop_assert!(!r.dot(v));
            }
        }
    }

    #[test]
    fn affine_solution_count(rows in bits(6, 6), rhs in prop::collection::vec(any::<bool>(), 6)) {
        let mut sys = AffineSystem::new(6);
        for (r, &b) in rows.iter().zip(&rhs) {
            sys.push(r.clone(), b);
        }
        let brute = (0..64u32)
            .filter(|x| {
                let v = BitVec::from_bools(&(0..6).map(|i| (x >> i) & 1 == 1).collect::<Vec<_>>());
                sys.is_satisfied_by(&v)
            })
            .count();
        match sys.log2_solutions() {
            Some(k) => prop_assert_eq!(brute, 1 << k),
            None => prop_assert_eq!(brute, 0),
        }
    }
}
