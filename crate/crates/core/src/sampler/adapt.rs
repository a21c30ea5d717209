//! Warmup adaptation: dual-averaging step size and windowed diagonal metric.

/// Nesterov dual averaging of `ln(step size)` toward a target acceptance statistic.
#[derive(Debug, Clone)]
pub struct StepSizeAdapter {
    target_accept: f64,
    mu: f64,
    s_bar: f64,
    x_bar: f64,
    counter: f64,
}

const GAMMA: f64 = 0.05;
const T0: f64 = 10.0;
const KAPPA: f64 = 0.75;

impl StepSizeAdapter {
    pub fn new(target_accept: f64, initial_step: f64) -> Self {
        let mut s = Self {
            target_accept,
            mu: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
            counter: 0.0,
        };
        s.restart(initial_step);
        s
    }

    /// Reset the averages and shrink toward ten times `step`.
    pub fn restart(&mut self, step: f64) {
        self.mu = (10.0 * step).ln();
        self.s_bar = 0.0;
        self.x_bar = 0.0;
        self.counter = 0.0;
    }

    /// Returns the next step size.
    pub fn learn(&mut self, accept_stat: f64) -> f64 {
        self.counter += 1.0;
        let accept_stat = accept_stat.min(1.0);
        let eta = 1.0 / (self.counter + T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target_accept - accept_stat);
        let x = self.mu - self.s_bar * self.counter.sqrt() / GAMMA;
        let x_eta = self.counter.powf(-KAPPA);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    /// Step size to freeze at the end of warmup.
    pub fn final_step(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone)]
struct Welford {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Self {
            n: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn add(&mut self, x: &[f64]) {
        self.n += 1.0;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = v - *m;
            *m += delta / self.n;
            *s += delta * (v - *m);
        }
    }

    fn variance(&self) -> Vec<f64> {
        self.m2.iter().map(|s| s / (self.n - 1.0)).collect()
    }
}

/// Warmup schedule: an initial buffer of step-size-only iterations, then
/// doubling metric windows, then a terminal step-size-only buffer.
#[derive(Debug, Clone)]
pub struct WindowedMetricAdapter {
    n_warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_window_end: usize,
    counter: usize,
    enabled: bool,
    estimator: Welford,
}

impl WindowedMetricAdapter {
    pub fn new(dim: usize, n_warmup: usize) -> Self {
        let (mut init_buffer, mut term_buffer, mut base_window) = (75usize, 50usize, 25usize);
        let enabled = n_warmup >= 20;
        if enabled && init_buffer + base_window + term_buffer > n_warmup {
            init_buffer = (0.15 * n_warmup as f64) as usize;
            term_buffer = (0.1 * n_warmup as f64) as usize;
            base_window = n_warmup - (init_buffer + term_buffer);
        }
        Self {
            n_warmup,
            init_buffer,
            term_buffer,
            window_size: base_window,
            next_window_end: init_buffer + base_window - 1,
            counter: 0,
            enabled,
            estimator: Welford::new(dim),
        }
    }

    fn in_window(&self) -> bool {
        self.counter >= self.init_buffer
            && self.counter < self.n_warmup - self.term_buffer
            && self.counter != self.n_warmup
    }

    fn at_window_end(&self) -> bool {
        self.counter == self.next_window_end && self.counter != self.n_warmup
    }

    fn advance_window(&mut self) {
        let last_end = self.n_warmup - self.term_buffer - 1;
        if self.next_window_end == last_end {
            return;
        }
        self.window_size *= 2;
        self.next_window_end = self.counter + self.window_size;
        if self.next_window_end != last_end && self.next_window_end + 2 * self.window_size >= self.n_warmup - self.term_buffer {
            self.next_window_end = last_end;
        }
    }

    /// Feed one warmup position. Returns true when `inv_metric` was updated.
    pub fn learn(&mut self, inv_metric: &mut [f64], q: &[f64]) -> bool {
        if !self.enabled {
            self.counter += 1;
            return false;
        }
        if self.in_window() {
            self.estimator.add(q);
        }
        if self.at_window_end() {
            self.advance_window();
            let n = self.estimator.n;
            for (m, v) in inv_metric.iter_mut().zip(self.estimator.variance()) {
                // regularize toward a small constant
                *m = (n / (n + 5.0)) * v + 1e-3 * (5.0 / (n + 5.0));
            }
            self.estimator = Welford::new(inv_metric.len());
            self.counter += 1;
            return true;
        }
        self.counter += 1;
        false
    }
}
