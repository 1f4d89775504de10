/// Numerically stable softmax in place; the maximum score is subtracted first.
pub fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        total += *s;
    }
    for s in scores.iter_mut() {
        *s /= total;
    }
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let mut p = scores.to_vec();
    softmax_in_place(&mut p);
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_and_positive() {
        let p = softmax(&[1.0, -3.0, 200.0, 199.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn shift_invariant() {
        let a = softmax(&[0.3, 1.7, -2.0]);
        let b = softmax(&[1000.3, 1001.7, 998.0]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn singleton_is_one() {
        assert_eq!(softmax(&[-1e300]), vec![1.0]);
    }
}
