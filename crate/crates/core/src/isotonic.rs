//! Weighted isotonic projection onto the non-increasing cone, by pool
//! adjacent violators. Hand-rolled because the published crates fix the
//! ascending direction or unit weights, and the projection here must respect
//! piece lengths as weights.

/// Replace `values` with the weighted least-squares projection onto
/// { z : z_1 >= z_2 >= ... }. Weights must be positive.
pub fn project_non_increasing(values: &mut [f64], weights: &[f64]) {
    assert_eq!(values.len(), weights.len());
    let n = values.len();
    if n <= 1 {
        return;
    }
    // blocks of pooled entries: (weighted sum, weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        blocks.push((values[i] * weights[i], weights[i], 1));
        while blocks.len() >= 2 {
            let last = blocks[blocks.len() - 1];
            let prev = blocks[blocks.len() - 2];
            // violation of non-increasing order: earlier mean below later mean
            if prev.0 / prev.1 < last.0 / last.1 {
                blocks.pop();
                let top = blocks.last_mut().unwrap();
                top.0 += last.0;
                top.1 += last.1;
                top.2 += last.2;
            } else {
                break;
            }
        }
    }
    let mut i = 0;
    for (sum, w, count) in blocks {
        let mean = sum / w;
        for v in values[i..i + count].iter_mut() {
            *v = mean;
        }
        i += count;
    }
}

/// Projection onto { z non-increasing, z >= 0 }: pool, then clamp.
pub fn project_non_increasing_nonneg(values: &mut [f64], weights: &[f64]) {
    project_non_increasing(values, weights);
    for v in values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}
