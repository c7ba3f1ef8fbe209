use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use hetgnn::schema::{Fanout, Task, TrainConfig};
use hetgnn::synth::{gaussian_matrix, random_edges, write_csv_dataset, GraphBuilder};
use hetgnn::util::DrawRng;
use hetgnn_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn cp(p: &Path) -> CString {
    c(p.to_str().unwrap())
}

fn last_error() -> String {
    let p = hg_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// Writes a small user/item dataset and an NC config; returns (schema, config).
fn dataset(root: &Path) -> (CString, CString) {
    let mut rng = DrawRng::new(3);
    let (us, it) = random_edges(60, 40, 300, &mut rng);
    let g = GraphBuilder::new("toy", 3)
        .node_type("user", 60)
        .node_type("item", 40)
        .feature("user", "f", gaussian_matrix(60, 4, &mut rng))
        .labels("user", (0..60).map(|i| (i % 2) as i32).collect(), [0.6, 0.2, 0.2])
        .relation("user", "buys", "item", us.clone(), it.clone())
        .relation("item", "bought-by", "user", it, us)
        .build();
    write_csv_dataset(&g, &root.join("data")).unwrap();
    let mut cfg = TrainConfig::new(Task::NodeClassification);
    cfg.target_ntype = Some("user".into());
    cfg.hidden_dim = 6;
    cfg.fanout = vec![Fanout::Count(4)];
    cfg.num_epochs = 2;
    cfg.batch_size = 16;
    std::fs::write(root.join("nc.json"), cfg.to_json()).unwrap();
    (cp(&root.join("data/schema.json")), cp(&root.join("nc.json")))
}

#[test]
fn end_to_end_through_the_c_abi() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let (schema, config) = dataset(root);
    let parts = cp(&root.join("parts"));
    unsafe {
        assert_eq!(hg_gconstruct(schema.as_ptr(), parts.as_ptr(), c("toy").as_ptr(), 2, 7), HgStatus::Ok);
        let mut graph = ptr::null_mut();
        assert_eq!(hg_graph_open(cp(&root.join("parts/toy.json")).as_ptr(), &mut graph), HgStatus::Ok);
        let mut n = 0usize;
        assert_eq!(hg_graph_num_partitions(graph, &mut n), HgStatus::Ok);
        assert_eq!(n, 2);
        assert_eq!(hg_graph_num_nodes(graph, c("item").as_ptr(), &mut n), HgStatus::Ok);
        assert_eq!(n, 40);

        let mut model = ptr::null_mut();
        assert_eq!(hg_train(graph, config.as_ptr(), &mut model), HgStatus::Ok);
        let mut report = ptr::null_mut();
        assert_eq!(hg_model_report_json(model, &mut report), HgStatus::Ok);
        let json: serde_json::Value = serde_json::from_str(CStr::from_ptr(report).to_str().unwrap()).unwrap();
        assert_eq!(json["num_workers"], 2);
        hg_string_free(report);

        let saved = cp(&root.join("model"));
        assert_eq!(hg_model_save(model, saved.as_ptr()), HgStatus::Ok);
        let mut restored = ptr::null_mut();
        assert_eq!(hg_model_load(saved.as_ptr(), &mut restored), HgStatus::Ok);
        let mut none = ptr::dangling_mut();
        assert_eq!(hg_model_report_json(restored, &mut none), HgStatus::Ok);
        assert!(none.is_null());

        let read = |m: *const HgModel| {
            let mut emb = ptr::null_mut();
            assert_eq!(hg_infer(graph, m, true, &mut emb), HgStatus::Ok);
            let (mut r, mut k) = (0usize, 0usize);
            assert_eq!(hg_embeddings_shape(emb, c("user").as_ptr(), &mut r, &mut k), HgStatus::Ok);
            assert_eq!((r, k), (60, 6));
            let mut small = vec![0.0; r * k - 1];
            assert_eq!(hg_embeddings_copy(emb, c("user").as_ptr(), small.as_mut_ptr(), small.len()), HgStatus::BufferTooSmall);
            let mut buf = vec![0.0; r * k];
            assert_eq!(hg_embeddings_copy(emb, c("user").as_ptr(), buf.as_mut_ptr(), buf.len()), HgStatus::Ok);
            hg_embeddings_free(emb);
            buf
        };
        let a = read(model);
        let b = read(restored);
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.is_finite()) && a.iter().any(|v| *v != 0.0));

        hg_model_free(model);
        hg_model_free(restored);
        hg_graph_free(graph);
    }
}

#[test]
fn null_and_bad_arguments_report_errors() {
    unsafe {
        let mut graph = ptr::null_mut();
        assert_eq!(hg_graph_open(ptr::null(), &mut graph), HgStatus::NullArgument);
        assert!(last_error().contains("manifest_path"));
        assert_eq!(hg_graph_open(c("/nonexistent/x.json").as_ptr(), ptr::null_mut()), HgStatus::NullArgument);
        assert_eq!(hg_graph_open(c("/nonexistent/x.json").as_ptr(), &mut graph), HgStatus::Io);
        assert!(graph.is_null());
        assert!(last_error().contains("/nonexistent/x.json"));

        let bad = [0xffu8, 0xfe, 0];
        assert_eq!(hg_model_load(bad.as_ptr().cast(), &mut ptr::null_mut()), HgStatus::InvalidUtf8);
        let mut n = 0;
        assert_eq!(hg_graph_num_partitions(ptr::null(), &mut n), HgStatus::NullArgument);
        assert_eq!(hg_embeddings_shape(ptr::null(), c("user").as_ptr(), &mut n, &mut n), HgStatus::NullArgument);

        assert_eq!(hg_version(), hg_version());
        assert_eq!(CStr::from_ptr(hg_version()).to_str().unwrap(), env!("CARGO_PKG_VERSION"));
        hg_graph_free(ptr::null_mut());
        hg_model_free(ptr::null_mut());
        hg_embeddings_free(ptr::null_mut());
        hg_string_free(ptr::null_mut());

        let dir = tempfile::tempdir().unwrap();
        let (schema, _) = dataset(dir.path());
        assert_eq!(hg_gconstruct(schema.as_ptr(), cp(dir.path()).as_ptr(), c("g").as_ptr(), 2, 0), HgStatus::Ok);
        assert!(hg_last_error().is_null());
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/hetgnn.h")).unwrap();
    for name in [
        "hg_last_error",
        "hg_version",
        "hg_string_free",
        "hg_gconstruct",
        "hg_graph_open",
        "hg_graph_free",
        "hg_graph_num_partitions",
        "hg_graph_num_nodes",
        "hg_train",
        "hg_model_load",
        "hg_model_save",
        "hg_model_report_json",
        "hg_model_free",
        "hg_infer",
        "hg_embeddings_shape",
        "hg_embeddings_copy",
        "hg_embeddings_free",
        "typedef struct HgGraph HgGraph",
        "HG_STATUS_BUFFER_TOO_SMALL = 11",
        "#ifndef HETGNN_H",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <stdlib.h>
#include "hetgnn.h"

int main(int argc, char **argv) {
    HgGraph *graph = NULL;
    HgModel *model = NULL;
    HgEmbeddings *emb = NULL;
    size_t rows = 0, cols = 0;
    if (hg_graph_open("/nonexistent.json", &graph) != HG_STATUS_IO || hg_last_error() == NULL) return 10;
    if (hg_gconstruct(argv[1], argv[2], "toy", 1, 0) != HG_STATUS_OK) { fprintf(stderr, "%s\n", hg_last_error()); return 11; }
    if (hg_graph_open(argv[3], &graph) != HG_STATUS_OK) return 12;
    if (hg_train(graph, argv[4], &model) != HG_STATUS_OK) { fprintf(stderr, "%s\n", hg_last_error()); return 13; }
    if (hg_infer(graph, model, true, &emb) != HG_STATUS_OK) return 14;
    if (hg_embeddings_shape(emb, "item", &rows, &cols) != HG_STATUS_OK) return 15;
    double *buf = malloc(rows * cols * sizeof(double));
    if (hg_embeddings_copy(emb, "item", buf, rows * cols) != HG_STATUS_OK) return 16;
    printf("%zu %zu\n", rows, cols);
    free(buf);
    hg_embeddings_free(emb);
    hg_model_free(model);
    hg_graph_free(graph);
    return 0;
}
"#;

#[test]
fn c_program_links_against_the_static_library() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libhetgnn_ffi.a");
    assert!(lib.is_file(), "missing {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let (schema, config) = dataset(root);
    let src = root.join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let bin = root.join("main");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let o = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .expect("run cc");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = Command::new(&bin)
        .arg(schema.to_str().unwrap())
        .arg(root.join("parts"))
        .arg(root.join("parts/toy.json"))
        .arg(config.to_str().unwrap())
        .output()
        .unwrap();
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "40 6");
}
