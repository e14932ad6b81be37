use proptest::prelude::*;
use tn_tsp::tensor::{contract, IndexPairing, Tensor};

/// Matrix data with roughly half the entries zero.
fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), -4.0..4.0f64], rows * cols)
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs().max(y.abs())))
}

fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * m];
    for i in 0..n {
        for l in 0..k {
            for j in 0..m {
                c[i * m + j] += a[i * k + l] * b[l * m + j];
            }
        }
    }
    c
}

fn pair() -> impl Strategy<Value = (usize, usize, usize, Vec<f64>, Vec<f64>)> {
    (1..5usize, 1..5usize, 1..5usize).prop_flat_map(|(n, k, m)| (Just(n), Just(k), Just(m), matrix(n, k), matrix(k, m)))
}

proptest! {
    #[test]
    fn every_storage_combination_multiplies((n, k, m, a, b) in pair()) {
        let want = matmul(&a, &b, n, k, m);
        let da = Tensor::dense(&["i", "k"], &[n, k], a).unwrap();
        let db = Tensor::dense(&["k", "j"], &[k, m], b).unwrap();
        let pairing = IndexPairing::new(&[("k", "k")]);
        for x in [da.clone(), da.to_sparse()] {
            for y in [db.clone(), db.to_sparse()] {
                let c = contract(&x, &y, &pairing).unwrap();
                prop_assert_eq!(c.labels(), &["i".to_string(), "j".to_string()][..]);
                prop_assert!(close(&c.to_vec(), &want));
            }
        }
    }

    #[test]
    fn sparse_round_trip_keeps_values((n, k, _m, a, _b) in pair()) {
        let t = Tensor::dense(&["i", "k"], &[n, k], a.clone()).unwrap();
        let s = t.to_sparse();
        prop_assert_eq!(s.nnz(), a.iter().filter(|v| **v != 0.0).count());
        prop_assert_eq!(s.to_dense().to_vec(), a);
    }

    #[test]
    fn permute_moves_coordinates(dims in prop::collection::vec(1..4usize, 3), seed in 0..1000u64) {
        let len: usize = dims.iter().product();
        let data: Vec<f64> = (0..len).map(|k| ((k as u64 * 31 + seed) % 17) as f64).collect();
        let t = Tensor::dense(&["a", "b", "c"], &dims, data).unwrap();
        for src in [t.clone(), t.to_sparse()] {
            let p = src.permute(&["c", "a", "b"]).unwrap();
            for (coord, v) in src.entries() {
                prop_assert_eq!(p.get(&[coord[2], coord[0], coord[1]]).unwrap(), v);
            }
            let back = p.permute(&["a", "b", "c"]).unwrap();
            prop_assert_eq!(back.to_vec(), t.to_vec());
        }
    }

    #[test]
    fn trace_sums_the_axis((n, k, _m, a, _b) in pair()) {
        let t = Tensor::dense(&["i", "k"], &[n, k], a.clone()).unwrap();
        let want: Vec<f64> = (0..n).map(|i| a[i * k..(i + 1) * k].iter().sum()).collect();
        for src in [t.clone(), t.to_sparse()] {
            let r = src.trace_index("k").unwrap();
            prop_assert!(close(&r.to_vec(), &want));
        }
    }

    #[test]
    fn slice_matches_get((n, k, _m, a, _b) in pair(), pick in 0..4usize) {
        let t = Tensor::dense(&["i", "k"], &[n, k], a).unwrap();
        let col = pick % k;
        for src in [t.clone(), t.to_sparse()] {
            let s = src.slice("k", col).unwrap();
            for i in 0..n {
                prop_assert_eq!(s.get(&[i]).unwrap(), t.get(&[i, col]).unwrap());
            }
        }
    }
}

#[test]
fn outer_product_without_pairs() {
    let a = Tensor::vector("i", vec![1.0, 2.0]);
    let b = Tensor::vector("j", vec![3.0, 0.0, 5.0]);
    let c = contract(&a, &b.to_sparse(), &IndexPairing::default()).unwrap();
    assert_eq!(c.to_vec(), vec![3.0, 0.0, 5.0, 6.0, 0.0, 10.0]);
}

#[test]
fn mismatched_dims_are_rejected() {
    let a = Tensor::dense(&["i", "k"], &[2, 2], vec![1.0; 4]).unwrap();
    let b = Tensor::dense(&["k", "j"], &[3, 2], vec![1.0; 6]).unwrap();
    assert!(contract(&a, &b, &IndexPairing::new(&[("k", "k")])).is_err());
}
