use std::collections::BTreeSet;
use std::fs;

use lwgcn::fixed::Format;
use lwgcn::graph::{export_graph, gen_powerlaw, ingest_graph, BundlePaths, PowerLawParams};
use lwgcn::matrix::DenseMatrix;
use lwgcn::runtime::{verify_against_oracle, write_weights, Features, ModelSpec};
use lwgcn::schedule::ArchConfig;
use lwgcn::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn export_then_ingest_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let params = PowerLawParams { nodes: 300, features: 40, layer_widths: vec![8, 3], seed: 7, ..Default::default() };
    let mut bundle = gen_powerlaw(&params).unwrap();
    bundle.labels = Some((0..300).map(|i| i % 3).collect());
    let paths = export_graph(&bundle, dir.path()).unwrap();
    assert_eq!(paths, BundlePaths::in_dir(dir.path(), 2, true));
    assert_eq!(paths.ingest().unwrap(), bundle);
}

/// Writes a graph with Cora's published shape: 2708 nodes, 5278 undirected
/// edges (10556 adjacency entries), 1433 binary features at 1.27% density.
#[test]
fn cora_shaped_text_files_ingest_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2708);
    let n = 2708;
    let mut edges = BTreeSet::new();
    while edges.len() < 5278 {
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if u != v {
            edges.insert((u.min(v), u.max(v)));
        }
    }
    // Both directions and a duplicate line, to exercise symmetrization.
    let mut text = String::from("# cites\n");
    for &(u, v) in &edges {
        text.push_str(&format!("{u}\t{v}\n{v} {u}\n"));
    }
    text.push_str("0 1\n1 0\n");
    edges.insert((0, 1));
    fs::write(dir.path().join("edges.txt"), &text).unwrap();

    let mut feats = String::from("sparse 2708 1433\n");
    let mut nnz = 0;
    for r in 0..n {
        for c in 0..1433 {
            if rng.gen_bool(0.0127) {
                feats.push_str(&format!("{r} {c} 1\n"));
                nnz += 1;
            }
        }
    }
    fs::write(dir.path().join("features.txt"), feats).unwrap();

    let mut weights = Vec::new();
    for (i, (rows, cols)) in [(1433, 16), (16, 7)].into_iter().enumerate() {
        let data = (0..rows * cols).map(|_| rng.gen_range(-8..8)).collect();
        let w = DenseMatrix::try_new(rows, cols, data, Format::SINT4_INPUT).unwrap();
        let path = dir.path().join(format!("w{i}.lwfp"));
        write_weights(fs::File::create(&path).unwrap(), &w).unwrap();
        weights.push(path);
    }

    let bundle = ingest_graph(&dir.path().join("edges.txt"), &dir.path().join("features.txt"), &weights, None).unwrap();
    assert_eq!(bundle.nodes(), 2708);
    assert_eq!(bundle.adjacency.nnz(), 2 * edges.len());
    assert_eq!((bundle.features.rows(), bundle.features.cols(), bundle.features.nnz()), (2708, 1433, nnz));
    assert!(bundle.features.is_binary());

    let model = ModelSpec::gcn(bundle.weights.clone()).unwrap();
    let v =
        verify_against_oracle(&model, &bundle.adjacency, &Features::Sparse(bundle.features), &ArchConfig::default())
            .unwrap();
    assert!(v.exact_match);
    assert!(v.argmax_agreement >= 0.99, "{v:?}");
}

#[test]
fn malformed_files_report_their_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("f.txt"), "1 0\n0 1\n").unwrap();
    fs::write(dir.path().join("e.txt"), "0 1\n\n1 x\n").unwrap();
    let err = ingest_graph(&dir.path().join("e.txt"), &dir.path().join("f.txt"), &[], None).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    let err = ingest_graph(&dir.path().join("missing.txt"), &dir.path().join("f.txt"), &[], None).unwrap_err();
    assert!(matches!(err, Error::Io(_)), "{err}");
}
