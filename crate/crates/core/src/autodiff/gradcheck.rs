use super::{ParamStore, Tape, Tensor, Var};
use crate::error::Result;

/// Result of comparing analytic gradients to central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// `||analytic - numeric|| / (||analytic|| + ||numeric||)` over all checked entries.
    pub rel_error: f64,
    pub analytic_norm: f64,
    pub entries: usize,
}

impl GradCheck {
    fn from_pairs(analytic: &[f64], numeric: &[f64]) -> Self {
        let diff = analytic
            .iter()
            .zip(numeric)
            .map(|(a, n)| (a - n) * (a - n))
            .sum::<f64>()
            .sqrt();
        let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        let denom = na + nn;
        GradCheck {
            rel_error: if denom < 1e-12 { diff } else { diff / denom },
            analytic_norm: na,
            entries: analytic.len(),
        }
    }
}

fn scalar(tape: &Tape, v: Var) -> f64 {
    tape.value(v).data[0]
}

/// Checks gradients of `f` with respect to every entry of `inputs`.
pub fn gradcheck<F>(inputs: &[Tensor], h: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<f64> = vars
        .iter()
        .flat_map(|v| grads.wrt(*v).map(|g| g.data.clone()).unwrap_or_default())
        .collect();

    let eval = |perturbed: &[Tensor]| -> Result<f64> {
        let mut t = Tape::new();
        let vs: Vec<Var> = perturbed.iter().map(|x| t.leaf(x.clone())).collect();
        let l = f(&mut t, &vs)?;
        Ok(scalar(&t, l))
    };
    let mut work = inputs.to_vec();
    let mut numeric = Vec::with_capacity(analytic.len());
    for i in 0..work.len() {
        for k in 0..work[i].len() {
            let orig = work[i].data[k];
            work[i].data[k] = orig + h;
            let up = eval(&work)?;
            work[i].data[k] = orig - h;
            let down = eval(&work)?;
            work[i].data[k] = orig;
            numeric.push((up - down) / (2.0 * h));
        }
    }
    Ok(GradCheck::from_pairs(&analytic, &numeric))
}

/// Checks gradients of `f` with respect to every parameter in `store`.
pub fn gradcheck_params<F>(store: &ParamStore, h: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape) -> Result<Var>,
{
    let analytic: Vec<f64> = {
        let mut tape = Tape::with_params(store);
        let loss = f(&mut tape)?;
        let grads = tape.backward(loss)?;
        let mut by_param: Vec<Option<&Tensor>> = vec![None; store.len()];
        for (id, g) in grads.params() {
            by_param[id.index()] = Some(g);
        }
        store
            .iter()
            .zip(by_param)
            .flat_map(|(p, g)| match g {
                Some(g) => g.data.clone(),
                None => vec![0.0; p.value.len()],
            })
            .collect()
    };
    let mut work = store.clone();
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut t = Tape::with_params(s);
        let l = f(&mut t)?;
        Ok(scalar(&t, l))
    };
    let mut numeric = Vec::with_capacity(analytic.len());
    for i in 0..store.len() {
        let id = super::ParamId(i);
        for k in 0..store.get(id).value.len() {
            let orig = work.get(id).value.data[k];
            work.get_mut(id).value.data[k] = orig + h;
            let up = eval(&work)?;
            work.get_mut(id).value.data[k] = orig - h;
            let down = eval(&work)?;
            work.get_mut(id).value.data[k] = orig;
            numeric.push((up - down) / (2.0 * h));
        }
    }
    Ok(GradCheck::from_pairs(&analytic, &numeric))
}
