//! Gauss–Legendre rules and the panel layouts used by the radial integrals.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes are the roots of P_order found by Newton iteration from the
    /// Tricomi initial guesses; weights 2/((1-x²)P'(x)²).
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let m = order.div_ceil(2);
        let nf = order as f64;
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(order, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        if order % 2 == 1 {
            nodes[m - 1] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Shared, lazily built rule of the given order.
    pub fn cached(order: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<Vec<Option<Arc<GaussLegendre>>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        if guard.len() <= order {
            guard.resize(order + 1, None);
        }
        guard[order]
            .get_or_insert_with(|| Arc::new(GaussLegendre::new(order)))
            .clone()
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if order == 0 { 1.0 } else { p1 };
    let d = order as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Splits `[lo, hi]` into panels that shrink geometrically towards `point`
/// whenever a panel is wider than its distance to `point`. Panels touching
/// `point` stop refining once narrower than `floor`.
pub fn graded_panels(lo: f64, hi: f64, point: f64, floor: f64, out: &mut Vec<(f64, f64)>) {
    if hi <= lo {
        return;
    }
    let mut stack = vec![(lo, hi)];
    while let Some((a, b)) = stack.pop() {
        let width = b - a;
        let dist = if point < a {
            a - point
        } else if point > b {
            point - b
        } else {
            0.0
        };
        if width <= dist || width <= floor {
            out.push((a, b));
        } else if point > a && point < b {
            stack.push((a, point));
            stack.push((point, b));
        } else {
            let m = 0.5 * (a + b);
            stack.push((a, m));
            stack.push((m, b));
        }
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for order in [2, 4, 5, 16] {
            let gl = GaussLegendre::new(order);
            let deg = 2 * order - 1;
            let got = gl.integrate(0.0, 2.0, |x| x.powi(deg as i32));
            let want = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
            assert!((got - want).abs() < 1e-12 * want, "order {order}");
        }
    }

    #[test]
    fn weights_sum_to_two() {
        for order in [1, 3, 8, 64, 128] {
            let s: f64 = GaussLegendre::new(order).weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "order {order}: {s}");
        }
    }

    #[test]
    fn graded_panels_cover_interval_and_handle_log_singularity() {
        let mut panels = Vec::new();
        graded_panels(0.0, 2.0, 0.7, 1e-14, &mut panels);
        assert_eq!(panels.first().unwrap().0, 0.0);
        assert_eq!(panels.last().unwrap().1, 2.0);
        for w in panels.windows(2) {
            assert!((w[0].1 - w[1].0).abs() < 1e-15);
        }
        let gl = GaussLegendre::new(8);
        let got: f64 = panels
            .iter()
            .map(|&(a, b)| gl.integrate(a, b, |x| (x - 0.7f64).abs().ln()))
            .sum();
        // ∫₀² ln|x − 0.7| dx
        let f = |u: f64| if u == 0.0 { 0.0 } else { u * u.abs().ln() - u };
        let want = f(1.3) - f(-0.7);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}
