//! Random image selection with a per-session repeat-avoidance window.

use std::collections::{HashSet, VecDeque};

use rand::Rng;

use super::EngineError;
use crate::catalog::Catalog;

const REJECTION_TRIES: usize = 64;

/// The last `window` catalog indices served to a session.
#[derive(Debug, Clone)]
pub struct RecentImages {
    window: usize,
    order: VecDeque<usize>,
    members: HashSet<usize>,
}

impl RecentImages {
    pub fn new(window: usize) -> Self {
        RecentImages {
            window,
            order: VecDeque::with_capacity(window),
            members: HashSet::with_capacity(window),
        }
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.members.contains(&idx)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn clear(&mut self) {
        self.order.clear();
        self.members.clear();
    }

    pub fn note(&mut self, idx: usize) {
        if self.window == 0 {
            return;
        }
        if self.members.insert(idx) {
            self.order.push_back(idx);
        } else {
            // Refresh position.
            self.order.retain(|&i| i != idx);
            self.order.push_back(idx);
        }
        while self.order.len() > self.window {
            if let Some(old) = self.order.pop_front() {
                self.members.remove(&old);
            }
        }
    }
}

/// Uniform over catalog indices satisfying `ok`; `None` if there are none.
fn uniform_where<R: Rng + ?Sized>(n: usize, rng: &mut R, ok: impl Fn(usize) -> bool) -> Option<usize> {
    for _ in 0..REJECTION_TRIES {
        let i = rng.random_range(0..n);
        if ok(i) {
            return Some(i);
        }
    }
    let candidates: Vec<usize> = (0..n).filter(|&i| ok(i)).collect();
    if candidates.is_empty() {
        None
    } else {
        Some(candidates[rng.random_range(0..candidates.len())])
    }
}

/// Pick one image uniformly among those not recently served. When the
/// window would exclude the whole catalog it is reset first.
pub fn pick_year_image<R: Rng + ?Sized>(
    catalog: &Catalog,
    recent: &mut RecentImages,
    rng: &mut R,
) -> Result<usize, EngineError> {
    let n = catalog.len();
    if n == 0 {
        return Err(EngineError::EmptyCatalog);
    }
    if recent.len() >= n {
        recent.clear();
    }
    let idx = match uniform_where(n, rng, |i| !recent.contains(i)) {
        Some(i) => i,
        None => {
            recent.clear();
            rng.random_range(0..n)
        }
    };
    recent.note(idx);
    Ok(idx)
}

/// Pick two images with different years and return them as
/// `(left, right)` in a random orientation.
pub fn pick_timeline_pair<R: Rng + ?Sized>(
    catalog: &Catalog,
    recent: &mut RecentImages,
    rng: &mut R,
) -> Result<(usize, usize), EngineError> {
    let n = catalog.len();
    if n == 0 {
        return Err(EngineError::EmptyCatalog);
    }
    if catalog.distinct_years() < 2 {
        return Err(EngineError::NoDistinctYears);
    }
    let records = catalog.records();
    let year = |i: usize| records[i].gt_year;

    let pair = match draw_distinct_pair(n, rng, |i| !recent.contains(i), year) {
        Some(p) => p,
        None => {
            recent.clear();
            draw_distinct_pair(n, rng, |_| true, year).expect("catalog has two distinct years")
        }
    };
    let (a, b) = pair;
    let (left, right) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
    recent.note(left);
    recent.note(right);
    Ok((left, right))
}

fn draw_distinct_pair<R: Rng + ?Sized, Y: PartialEq>(
    n: usize,
    rng: &mut R,
    available: impl Fn(usize) -> bool,
    year: impl Fn(usize) -> Y,
) -> Option<(usize, usize)> {
    // Draw both uniformly and redraw until the years differ.
    for _ in 0..REJECTION_TRIES {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if available(a) && available(b) && year(a) != year(b) {
            return Some((a, b));
        }
    }
    let avail: Vec<usize> = (0..n).filter(|&i| available(i)).collect();
    let first_ok: Vec<usize> = avail
        .iter()
        .copied()
        .filter(|&a| avail.iter().any(|&b| year(b) != year(a)))
        .collect();
    if first_ok.is_empty() {
        return None;
    }
    let a = first_ok[rng.random_range(0..first_ok.len())];
    let seconds: Vec<usize> = avail.iter().copied().filter(|&b| year(b) != year(a)).collect();
    let b = seconds[rng.random_range(0..seconds.len())];
    Some((a, b))
}
