//! Merging two sorted blocks through a bitonic network, then streaming two
//! runs through one merge unit block by block.

use hbmsort::merge_net::{bitonic_merge_blocks, merge_runs, mms_step, mms_stats, Block, MergeUnitState, Record};

fn keys(recs: &[Record]) -> Vec<u32> {
    recs.iter().map(|r| r.key).collect()
}

fn main() -> hbmsort::Result<()> {
    let a = Block::from_keys(&[1, 4, 6, 9])?;
    let b = Block::from_keys(&[2, 3, 7, 8])?;
    println!("bitonic merge: {:?}", keys(&bitonic_merge_blocks(&a, &b)?));

    let mut unit = MergeUnitState::new(4)?;
    let next = [Block::from_keys(&[10, 11, 12, 13])?, Block::from_keys(&[5, 14, 15, 16])?];
    let mut step = mms_step(&mut unit, Some(&a), Some(&b))?;
    println!("step 1 emits {:?} ({:?})", keys(&step.out), step.consumed);
    step = mms_step(&mut unit, Some(&next[0]), Some(&next[1]))?;
    println!("step 2 emits {:?} ({:?})", keys(&step.out), step.consumed);

    let run_a: Vec<Record> = (0..40).map(|k| Record::new(2 * k, 0)).collect();
    let run_b: Vec<Record> = (0..40).map(|k| Record::new(2 * k + 1, 1)).collect();
    let (merged, steps) = merge_runs(8, &run_a, &run_b)?;
    let stats = mms_stats(8)?;
    println!(
        "rate 8: {} records in {steps} invocations; {} comparators over {} stages",
        merged.len(),
        stats.comparators,
        stats.stages
    );
    Ok(())
}
