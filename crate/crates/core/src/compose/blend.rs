use std::collections::BTreeSet;

use rand::Rng;

use super::SlateEntry;
use crate::recommenders::{RankedJobs, Source};

fn entry(job_id: &str, source: Source) -> SlateEntry {
    SlateEntry {
        job_id: job_id.to_string(),
        source,
    }
}

/// Takes up to `n` not-yet-placed jobs from `it`.
fn take_fresh<'a>(
    it: &mut impl Iterator<Item = &'a str>,
    n: usize,
    placed: &mut BTreeSet<String>,
) -> Vec<&'a str> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        match it.next() {
            Some(j) if placed.insert(j.to_string()) => out.push(j),
            Some(_) => {}
            None => break,
        }
    }
    out
}

/// Interleaves the similarity lists into the model list.
///
/// With model entries, every window of `window` model entries keeps its order
/// and receives up to `per_source` jobs from each other list, each placed
/// directly before a uniformly drawn model entry of that window. Without
/// model entries the two lists alternate, first list first.
pub fn blend(
    r_ml: &RankedJobs,
    r_nml1: &RankedJobs,
    r_nml2: &RankedJobs,
    rng: &mut impl Rng,
    window: usize,
    per_source: usize,
) -> Vec<SlateEntry> {
    let mut placed = BTreeSet::new();
    let mut it1 = r_nml1.job_ids();
    let mut it2 = r_nml2.job_ids();
    let mut out = Vec::new();
    if r_ml.is_empty() {
        loop {
            let a = take_fresh(&mut it1, 1, &mut placed);
            let b = take_fresh(&mut it2, 1, &mut placed);
            if a.is_empty() && b.is_empty() {
                break;
            }
            out.extend(a.into_iter().map(|j| entry(j, r_nml1.source)));
            out.extend(b.into_iter().map(|j| entry(j, r_nml2.source)));
        }
        return out;
    }
    let ml: Vec<&str> = r_ml
        .job_ids()
        .filter(|j| placed.insert(j.to_string()))
        .collect();
    for chunk in ml.chunks(window.max(1)) {
        let mut before: Vec<Vec<SlateEntry>> = vec![Vec::new(); chunk.len()];
        let inserts = take_fresh(&mut it1, per_source, &mut placed)
            .into_iter()
            .map(|j| entry(j, r_nml1.source))
            .chain(
                take_fresh(&mut it2, per_source, &mut placed)
                    .into_iter()
                    .map(|j| entry(j, r_nml2.source)),
            )
            .collect::<Vec<_>>();
        for e in inserts {
            before[rng.gen_range(0..chunk.len())].push(e);
        }
        for (slot, job) in before.into_iter().zip(chunk) {
            out.extend(slot);
            out.push(entry(job, r_ml.source));
        }
    }
    out
}
