//! Bounded ring-buffer history for delayed state lookups on a uniform grid,
//! seeded analytically: queries at or before t = 0 evaluate the initial
//! history, queries inside the buffer interpolate linearly.

use crate::error::{Error, Result};
use crate::Scalar;

pub struct History {
    step: Scalar,
    /// Index of the oldest retained grid point.
    base: usize,
    /// States at grid points `base, base+1, ...` (bounded ring).
    data: std::collections::VecDeque<Vec<Scalar>>,
    capacity: usize,
}

impl History {
    /// `max_delay` bounds how far back queries reach; a small margin of
    /// extra slots absorbs stage lookups.
    pub fn new(step: Scalar, max_delay: Scalar, initial: Vec<Scalar>) -> Self {
        let capacity = (max_delay / step).ceil() as usize + 4;
        let mut data = std::collections::VecDeque::with_capacity(capacity + 1);
        data.push_back(initial);
        Self {
            step,
            base: 0,
            data,
            capacity,
        }
    }

    /// Append the state at the next grid point.
    pub fn push(&mut self, state: Vec<Scalar>) {
        self.data.push_back(state);
        while self.data.len() > self.capacity + 1 {
            self.data.pop_front();
            self.base += 1;
        }
    }

    /// Latest stored grid time.
    pub fn latest_time(&self) -> Scalar {
        (self.base + self.data.len() - 1) as Scalar * self.step
    }

    /// Linear interpolation at time `t > 0`; `pre` supplies values for
    /// `t <= 0`. Queries beyond the newest point clamp to it (arises only
    /// when a delay is shorter than the integration step).
    pub fn sample(&self, t: Scalar, pre: &dyn Fn(Scalar) -> Vec<Scalar>) -> Result<Vec<Scalar>> {
        if t <= 0.0 {
            return Ok(pre(t));
        }
        let pos = t / self.step;
        let lo = pos.floor() as usize;
        let frac = pos - lo as Scalar;
        let newest = self.base + self.data.len() - 1;
        if lo >= newest {
            return Ok(self.data.back().expect("nonempty").clone());
        }
        if lo < self.base {
            return Err(Error::Range(format!(
                "history lookup at t={t} fell off the retained window"
            )));
        }
        let a = &self.data[lo - self.base];
        let b = &self.data[lo + 1 - self.base];
        Ok(a.iter()
            .zip(b)
            .map(|(&x, &y)| x + frac * (y - x))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_and_delegates_prehistory() {
        let mut h = History::new(0.5, 2.0, vec![0.0]);
        h.push(vec![1.0]);
        h.push(vec![4.0]);
        let pre = |_t: Scalar| vec![-7.0];
        assert_eq!(h.sample(-0.3, &pre).unwrap(), vec![-7.0]);
        assert_eq!(h.sample(0.5, &pre).unwrap(), vec![1.0]);
        assert_eq!(h.sample(0.75, &pre).unwrap(), vec![2.5]);
        // beyond the newest point: clamp
        assert_eq!(h.sample(5.0, &pre).unwrap(), vec![4.0]);
    }

    #[test]
    fn ring_evicts_old_entries() {
        let mut h = History::new(1.0, 3.0, vec![0.0]);
        for k in 1..=20 {
            h.push(vec![k as f64]);
        }
        assert_eq!(h.latest_time(), 20.0);
        assert!(h.sample(19.5, &|_| vec![0.0]).is_ok());
        assert!(h.sample(2.0, &|_| vec![0.0]).is_err());
    }
}
