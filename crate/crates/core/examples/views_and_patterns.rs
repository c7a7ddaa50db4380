// Write a light field to disk as PNGs, load it back, and split it into the
// two subsets of the C2 and H2 prediction patterns.

use lfc::io::{load_lightfield, write_lightfield, Layout};
use lfc::pattern::{partition_views, PatternKind, PredictionPattern};
use lfc::synthetic::fixture_3x3;

pub fn run_example() -> lfc::Result<()> {
    let dir = tempfile::tempdir()?;
    let layout = Layout::parse("view_{r}_{c}.{ext}")?;
    write_lightfield(&fixture_3x3(5), dir.path(), &layout)?;

    let lf = load_lightfield(dir.path(), &layout)?;
    println!("loaded {}x{} views of {}x{} pixels", lf.grid().rows(), lf.grid().cols(), lf.height(), lf.width());

    for kind in [PatternKind::Circular2, PatternKind::Hierarchical2] {
        let pattern = PredictionPattern::builtin(kind, lf.grid())?;
        let (s1, s2) = partition_views(&lf, &pattern)?;
        let fmt = |v: &[lfc::lightfield::ViewCoord]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
        println!("{}: subset 1 ({}) {}", kind.label(), s1.len(), fmt(pattern.order1()));
        println!("{}: subset 2 ({}) {}", kind.label(), s2.len(), fmt(pattern.order2()));
    }
    Ok(())
}

fn main() -> lfc::Result<()> {
    run_example()
}
