//! Partition planning over block-structured files.
//!
//! A partition is a contiguous block range of one file. Plans are ordered by
//! file index (callers pass files already sorted by path), then block range,
//! and together cover every block exactly once.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartitionSpec {
    pub file: usize,
    pub blocks: Range<usize>,
}

impl PartitionSpec {
    pub fn new(file: usize, blocks: Range<usize>) -> Self {
        PartitionSpec { file, blocks }
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("no input files to partition")]
    NoFiles,
    #[error("invalid custom partition plan: {0}")]
    InvalidCustomPlan(String),
}

/// Greedily packs whole blocks into partitions of at most `target_bytes`.
/// A block is never split; a block larger than the target forms its own
/// partition. `block_bytes[f][b]` is the stored size of block `b` of file `f`.
pub fn plan_auto(block_bytes: &[Vec<u64>], target_bytes: u64) -> Result<Vec<PartitionSpec>, PlanError> {
    if block_bytes.is_empty() {
        return Err(PlanError::NoFiles);
    }
    let mut out = Vec::new();
    for (file, sizes) in block_bytes.iter().enumerate() {
        let mut start = 0;
        let mut acc = 0u64;
        for (b, &size) in sizes.iter().enumerate() {
            if b > start && acc.saturating_add(size) > target_bytes {
                out.push(PartitionSpec::new(file, start..b));
                start = b;
                acc = 0;
            }
            acc = acc.saturating_add(size);
        }
        if start < sizes.len() {
            out.push(PartitionSpec::new(file, start..sizes.len()));
        }
    }
    Ok(out)
}

/// Splits every file into `per_file` contiguous, near-equal block ranges.
/// Earlier ranges take the remainder; files with fewer blocks than
/// `per_file` get one partition per block.
pub fn plan_per_file(block_counts: &[usize], per_file: usize) -> Result<Vec<PartitionSpec>, PlanError> {
    if block_counts.is_empty() {
        return Err(PlanError::NoFiles);
    }
    if per_file == 0 {
        return Err(PlanError::InvalidCustomPlan(
            "partitions per file must be at least 1".into(),
        ));
    }
    let mut out = Vec::new();
    for (file, &n) in block_counts.iter().enumerate() {
        let (base, extra) = (n / per_file, n % per_file);
        let mut start = 0;
        for k in 0..per_file {
            let len = base + usize::from(k < extra);
            if len > 0 {
                out.push(PartitionSpec::new(file, start..start + len));
                start += len;
            }
        }
    }
    Ok(out)
}

/// Checks that explicit ranges tile every file's blocks without overlap or
/// gap, and returns them in canonical order.
pub fn validate_custom(
    block_counts: &[usize],
    mut ranges: Vec<PartitionSpec>,
) -> Result<Vec<PartitionSpec>, PlanError> {
    if block_counts.is_empty() {
        return Err(PlanError::NoFiles);
    }
    let invalid = |msg: String| Err(PlanError::InvalidCustomPlan(msg));
    for r in &ranges {
        if r.file >= block_counts.len() {
            return invalid(format!("file index {} out of range", r.file));
        }
        if r.blocks.start >= r.blocks.end {
            return invalid(format!("empty block range {:?} in file {}", r.blocks, r.file));
        }
        if r.blocks.end > block_counts[r.file] {
            return invalid(format!(
                "block range {:?} exceeds the {} blocks of file {}",
                r.blocks, block_counts[r.file], r.file
            ));
        }
    }
    ranges.sort_by_key(|r| (r.file, r.blocks.start, r.blocks.end));
    let mut i = 0;
    for (file, &n) in block_counts.iter().enumerate() {
        let mut next = 0;
        while i < ranges.len() && ranges[i].file == file {
            let r = &ranges[i].blocks;
            if r.start < next {
                return invalid(format!(
                    "blocks {}..{} of file {file} are covered twice",
                    r.start,
                    next.min(r.end)
                ));
            }
            if r.start > next {
                return invalid(format!("blocks {next}..{} of file {file} are not covered", r.start));
            }
            next = r.end;
            i += 1;
        }
        if next < n {
            return invalid(format!("blocks {next}..{n} of file {file} are not covered"));
        }
    }
    Ok(ranges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn greedy_never_exceeds_target_when_splitting() {
        let plan = plan_auto(&[vec![60, 60, 60]], 100).unwrap();
        assert_eq!(
            plan,
            vec![
                PartitionSpec::new(0, 0..1),
                PartitionSpec::new(0, 1..2),
                PartitionSpec::new(0, 2..3)
            ]
        );
        let plan = plan_auto(&[vec![40, 40, 40, 200, 10]], 100).unwrap();
        assert_eq!(
            plan,
            vec![
                PartitionSpec::new(0, 0..2),
                PartitionSpec::new(0, 2..3),
                PartitionSpec::new(0, 3..4),
                PartitionSpec::new(0, 4..5)
            ]
        );
    }

    #[test]
    fn large_target_gives_one_partition_per_file() {
        let plan = plan_auto(&[vec![60, 60], vec![], vec![5]], 1_000).unwrap();
        assert_eq!(plan, vec![PartitionSpec::new(0, 0..2), PartitionSpec::new(2, 0..1)]);
    }

    #[test]
    fn per_file_split() {
        let plan = plan_per_file(&[10, 10, 10], 2).unwrap();
        assert_eq!(plan.len(), 6);
        assert!(plan.iter().all(|p| p.block_count() == 5));
        let uneven = plan_per_file(&[5], 3).unwrap();
        let lens: Vec<usize> = uneven.iter().map(|p| p.block_count()).collect();
        assert_eq!(lens, vec![2, 2, 1]);
        assert_eq!(plan_per_file(&[1], 4).unwrap(), vec![PartitionSpec::new(0, 0..1)]);
    }

    #[test]
    fn custom_plan_validation() {
        let ok = validate_custom(&[4], vec![PartitionSpec::new(0, 2..4), PartitionSpec::new(0, 0..2)]).unwrap();
        assert_eq!(ok[0].blocks, 0..2);
        let gap = validate_custom(&[4], vec![PartitionSpec::new(0, 0..2), PartitionSpec::new(0, 3..4)]);
        assert!(matches!(gap, Err(PlanError::InvalidCustomPlan(_))));
        let missing_tail = validate_custom(&[4], vec![PartitionSpec::new(0, 0..3)]);
        assert!(matches!(missing_tail, Err(PlanError::InvalidCustomPlan(_))));
        let overlap = validate_custom(&[4], vec![PartitionSpec::new(0, 0..3), PartitionSpec::new(0, 2..4)]);
        assert!(matches!(overlap, Err(PlanError::InvalidCustomPlan(_))));
        let bad_file = validate_custom(&[4], vec![PartitionSpec::new(1, 0..4)]);
        assert!(matches!(bad_file, Err(PlanError::InvalidCustomPlan(_))));
    }

    #[test]
    fn no_files() {
        assert_eq!(plan_auto(&[], 10), Err(PlanError::NoFiles));
    }
}
