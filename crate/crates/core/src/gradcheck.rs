//! Central finite-difference checks of [`Graph`] gradients at `f64`.

use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::tape::{Graph, Tape, Var};
use crate::tensor::Tensor;

/// Agreement between analytic and numeric gradients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradError {
    /// `‖analytic − numeric‖₂ / max(‖analytic‖₂, ‖numeric‖₂)`.
    pub relative: f64,
    /// Largest elementwise absolute difference.
    pub max_abs: f64,
    pub analytic_norm: f64,
    pub checked: usize,
}

impl GradError {
    fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        let (mut diff, mut na, mut nn, mut max_abs) = (0.0, 0.0, 0.0, 0.0f64);
        for &(a, n) in pairs {
            diff += (a - n) * (a - n);
            na += a * a;
            nn += n * n;
            max_abs = max_abs.max((a - n).abs());
        }
        let denom = Float::sqrt(na).max(Float::sqrt(nn));
        GradError {
            relative: if denom == 0.0 { 0.0 } else { Float::sqrt(diff) / denom },
            max_abs,
            analytic_norm: Float::sqrt(na),
            checked: pairs.len(),
        }
    }
}

fn scalar(g: &Graph<'_, f64>, v: &Var) -> Result<f64> {
    let t = g.value(v);
    if t.len() != 1 {
        return Err(Error::InvalidArgument(alloc::format!("loss has shape {:?}, expected a scalar", t.shape())));
    }
    Ok(t.data()[0])
}

fn eval(
    stores: &[&ParamStore<f64>],
    x: Tensor<f64>,
    f: &impl for<'g> Fn(&mut Graph<'g, f64>, Var) -> Result<Var>,
) -> Result<f64> {
    let mut g = Graph::new();
    for s in stores {
        g.bind(s, false);
    }
    let xv = g.input(x);
    let l = f(&mut g, xv)?;
    scalar(&g, &l)
}

/// Gradient of `f(x)` with respect to every element of `x`. `stores` are
/// bound frozen before `f` runs.
pub fn input_gradient(
    stores: &[&ParamStore<f64>],
    x: &Tensor<f64>,
    h: f64,
    f: impl for<'g> Fn(&mut Graph<'g, f64>, Var) -> Result<Var>,
) -> Result<GradError> {
    let analytic = {
        let mut g = Graph::new();
        for s in stores {
            g.bind(s, false);
        }
        let xv = g.input(x.clone());
        let l = f(&mut g, xv)?;
        let grads = g.backward(l)?;
        grads.input(xv).cloned().unwrap_or_else(|| Tensor::zeros(x.shape()))
    };
    let mut pairs = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[i] += h;
        let up = eval(stores, xp, &f)?;
        let mut xm = x.clone();
        xm.data_mut()[i] -= h;
        let down = eval(stores, xm, &f)?;
        pairs.push((analytic.data()[i], (up - down) / (2.0 * h)));
    }
    Ok(GradError::from_pairs(&pairs))
}

/// Gradient of `f` with respect to selected elements of the trainable
/// parameter `name` in `store`.
pub fn param_gradient(
    store: &ParamStore<f64>,
    name: &str,
    indices: &[usize],
    h: f64,
    f: impl for<'g> Fn(&mut Graph<'g, f64>) -> Result<Var>,
) -> Result<GradError> {
    let analytic = {
        let mut g = Graph::new();
        g.bind(store, true);
        let l = f(&mut g)?;
        let grads = g.backward(l)?;
        grads
            .param(name)
            .cloned()
            .ok_or_else(|| Error::MissingParam(alloc::string::String::from(name)))?
    };
    let value = |delta: f64, i: usize| -> Result<f64> {
        let mut s = store.clone();
        s.get_mut(name)?.data_mut()[i] += delta;
        let mut g = Graph::new();
        g.bind(&s, false);
        let l = f(&mut g)?;
        scalar(&g, &l)
    };
    let mut pairs = Vec::with_capacity(indices.len());
    for &i in indices {
        let numeric = (value(h, i)? - value(-h, i)?) / (2.0 * h);
        pairs.push((analytic.data()[i], numeric));
    }
    Ok(GradError::from_pairs(&pairs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let x = Tensor::from_vec(&[4], alloc::vec![0.3, -1.0, 2.0, 0.5]).unwrap();
        let e = input_gradient(&[], &x, 1e-5, |g, v| {
            let sq = g.mul(&v, &v)?;
            Ok(g.mean(&sq))
        })
        .unwrap();
        assert!(e.relative < 1e-8, "{e:?}");
        assert_eq!(e.checked, 4);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let x = Tensor::from_vec(&[2], alloc::vec![1.0, 2.0]).unwrap();
        // The constant hides the dependence from the tape.
        let e = input_gradient(&[], &x, 1e-5, |g, v| {
            let c = g.constant(g.value(&v).clone());
            let p = g.mul(&c, &v)?;
            Ok(g.mean(&p))
        })
        .unwrap();
        assert!(e.relative > 0.1);
    }
}
