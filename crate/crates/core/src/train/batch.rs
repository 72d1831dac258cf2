//! Summing per-item gradients, possibly in parallel, in a fixed order.

use crate::par::Exec;
use crate::policy::PolicyError;
use crate::tensor::{Gradients, ParamStore, Tape, Var};

/// Loss of one item: the scalar to differentiate plus how many terms
/// (steps) it covers, for reporting a per-step mean.
pub struct ItemLoss {
    pub loss: Var,
    pub terms: usize,
}

#[derive(Debug, Clone, Default)]
pub struct BatchGrad {
    pub grads: Gradients,
    pub loss: f64,
    pub terms: usize,
    pub items: usize,
}

/// Builds one tape per item, differentiates it, and merges the gradients in
/// item order so the result does not depend on `exec`.
pub fn batch_gradient<T, F>(
    store: &ParamStore,
    items: &[T],
    exec: Exec,
    f: F,
) -> Result<BatchGrad, PolicyError>
where
    T: Sync,
    F: Fn(&mut Tape<'_>, &T) -> Result<Option<ItemLoss>, PolicyError> + Sync,
{
    let parts = exec.map(items, |item| {
        let mut tape = Tape::new(store);
        match f(&mut tape, item)? {
            Some(l) => {
                let value = tape.scalar(l.loss);
                let g = tape.backward(l.loss)?;
                Ok::<_, PolicyError>(Some((g, value, l.terms)))
            }
            None => Ok(None),
        }
    });
    let mut out = BatchGrad {
        grads: Gradients::for_store(store),
        ..Default::default()
    };
    for p in parts {
        if let Some((g, value, terms)) = p? {
            out.grads.merge(&g);
            out.loss += value;
            out.terms += terms;
            out.items += 1;
        }
    }
    Ok(out)
}
