//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::{Command, Output};

/// Agreement between a partition and reference classes: the smaller of purity
/// (each cluster's majority class) and inverse purity (each class's majority
/// cluster), as a fraction of documents.
pub fn agreement<A: Ord, B: Ord>(clusters: &[A], truth: &[B]) -> f64 {
    assert_eq!(clusters.len(), truth.len());
    if clusters.is_empty() {
        return 1.0;
    }
    let a = ranks(clusters);
    let b = ranks(truth);
    let purity = majority_total(&a, &b);
    let inverse = majority_total(&b, &a);
    purity.min(inverse) as f64 / clusters.len() as f64
}

fn majority_total(outer: &[usize], inner: &[usize]) -> usize {
    let mut table: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&o, &i) in outer.iter().zip(inner) {
        *table.entry(o).or_default().entry(i).or_default() += 1;
    }
    table
        .values()
        .map(|row| row.values().max().copied().unwrap_or(0))
        .sum()
}

/// Replaces each value by the rank of its distinct value.
fn ranks<T: Ord>(xs: &[T]) -> Vec<usize> {
    let mut distinct: Vec<&T> = xs.iter().collect();
    distinct.sort();
    distinct.dedup();
    xs.iter().map(|x| distinct.binary_search(&x).unwrap()).collect()
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_neclust"))
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn neclust")
}

pub fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}
