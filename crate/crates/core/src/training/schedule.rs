/// Linear warmup to `init` at `warmup` steps, then `init * sqrt(warmup / step)`.
/// Steps count from 1.
pub fn lr_schedule(step: usize, init: f64, warmup: usize) -> f64 {
    let step = step.max(1) as f64;
    let warmup = warmup.max(1) as f64;
    if step <= warmup {
        init * step / warmup
    } else {
        init * (warmup / step).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_and_decay() {
        assert!((lr_schedule(5000, 1e-4, 5000) - 1e-4).abs() < 1e-18);
        assert!((lr_schedule(2500, 1e-4, 5000) - 5e-5).abs() < 1e-18);
        assert!((lr_schedule(20000, 1e-4, 5000) - 5e-5).abs() < 1e-18);
        assert!((lr_schedule(100, 1e-4, 200) - 5e-5).abs() < 1e-18);
    }
}
