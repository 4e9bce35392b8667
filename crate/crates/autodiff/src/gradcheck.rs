use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{NodeId, ParamId, ParameterSet, Result, Tape};

/// Denominator floor for relative errors, so that coordinates whose true
/// gradient is (numerically) zero are compared absolutely.
const REL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub probes: Vec<ProbeResult>,
}

fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Compares reverse-mode gradients with the five-point central difference
/// `(f(p-2h) - 8f(p-h) + 8f(p+h) - f(p+2h)) / 12h` on `probes` randomly
/// chosen coordinates of the trainable parameters.
///
/// `loss` must build the same deterministic scalar on every call.
pub fn gradient_check<F>(params: &mut ParameterSet<f64>, probes: usize, h: f64, seed: u64, mut loss: F) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape<f64>, &ParameterSet<f64>) -> Result<NodeId>,
{
    params.zero_grads();
    let mut tape = Tape::new();
    let root = loss(&mut tape, params)?;
    tape.backward(root, params)?;

    let trainable: Vec<ParamId> = params.ids().filter(|&id| params.is_trainable(id)).collect();
    let total: usize = trainable.iter().map(|&id| params.value(id).len()).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::with_capacity(probes);
    if total == 0 {
        return Ok(GradCheckReport {
            max_rel_error: 0.0,
            probes: results,
        });
    }

    let mut eval = |params: &ParameterSet<f64>| -> Result<f64> {
        let mut t = Tape::new();
        let r = loss(&mut t, params)?;
        Ok(t.value(r)[0])
    };

    for _ in 0..probes {
        let mut flat = rng.random_range(0..total);
        let mut chosen = trainable[0];
        for &id in &trainable {
            let n = params.value(id).len();
            if flat < n {
                chosen = id;
                break;
            }
            flat -= n;
        }
        let original = params.value(chosen)[flat];
        let mut at = |offset: f64, params: &mut ParameterSet<f64>| -> Result<f64> {
            params.value_mut(chosen).data_mut()[flat] = original + offset;
            eval(params)
        };
        let (m2, m1) = (at(-2.0 * h, params)?, at(-h, params)?);
        let (p1, p2) = (at(h, params)?, at(2.0 * h, params)?);
        params.value_mut(chosen).data_mut()[flat] = original;

        let numeric = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
        let analytic = params.grad(chosen)[flat];
        results.push(ProbeResult {
            param: params.get(chosen).name.clone(),
            index: flat,
            analytic,
            numeric,
            rel_error: relative_error(analytic, numeric),
        });
    }
    let max_rel_error = results.iter().map(|p| p.rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_rel_error,
        probes: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ValueGrid;

    #[test]
    fn quadratic_is_exact() {
        let mut ps = ParameterSet::new();
        let p = ps.add("p", "g", ValueGrid::from_vec(vec![5], vec![0.8, -1.2, 1.5, 1.0, -0.6]).unwrap());
        let report = gradient_check(&mut ps, 25, 1e-5, 1, |tape, ps| {
            let x = tape.param(ps, p);
            let sq = tape.square(x);
            Ok(tape.sum(sq))
        })
        .unwrap();
        assert_eq!(report.probes.len(), 25);
        assert!(report.max_rel_error < 1e-9, "{}", report.max_rel_error);
    }
}
