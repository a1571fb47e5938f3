use crate::scalar::Scalar;

/// `a` dominates `b` under minimization: no worse in every objective and
/// strictly better in at least one.
pub fn dominates<T: Scalar>(a: &[T], b: &[T]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Fast non-dominated sort. Returns fronts in order, each listing indices
/// into `objectives` in ascending order; front 0 is the non-dominated set.
pub fn fast_nondominated_sort<T: Scalar, O: AsRef<[T]>>(objectives: &[O]) -> Vec<Vec<usize>> {
    let n = objectives.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for p in 0..n {
        for q in (p + 1)..n {
            let (a, b) = (objectives[p].as_ref(), objectives[q].as_ref());
            if dominates(a, b) {
                dominated_by[p].push(q);
                counts[q] += 1;
            } else if dominates(b, a) {
                dominated_by[q].push(p);
                counts[p] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominated_by[p] {
                counts[q] -= 1;
                if counts[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of one front. Boundary members of every
/// objective get +inf; interior members sum neighbour gaps normalized by the
/// objective's range. Fronts of one or two members are all +inf.
pub fn crowding_distance<T: Scalar, O: AsRef<[T]>>(front: &[O]) -> Vec<T> {
    let n = front.len();
    if n <= 2 {
        return vec![T::infinity(); n];
    }
    let m = front[0].as_ref().len();
    let mut distance = vec![T::zero(); n];
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..m {
        let value = |i: usize| front[i].as_ref()[k];
        order.sort_by(|&a, &b| value(a).order(&value(b)).then(a.cmp(&b)));
        let lo = value(order[0]);
        let hi = value(order[n - 1]);
        distance[order[0]] = T::infinity();
        distance[order[n - 1]] = T::infinity();
        let span = hi - lo;
        if span > T::zero() {
            for j in 1..n - 1 {
                distance[order[j]] += (value(order[j + 1]) - value(order[j - 1])) / span;
            }
        }
    }
    distance
}
