use crate::nn::{NnError, ParamId, ParamSpec, ParamStore, Tape, Var};

/// Stack of affine layers with tanh between them; the last activation is
/// optional.
#[derive(Clone, Debug)]
pub(crate) struct Mlp {
    layers: Vec<(ParamId, ParamId)>,
    tanh_out: bool,
}

/// Layer names: `prefix.w`/`prefix.b` for one layer, `prefix.w1`.. otherwise.
fn names(prefix: &str, layers: usize) -> Vec<(String, String)> {
    if layers == 1 {
        vec![(format!("{prefix}.w"), format!("{prefix}.b"))]
    } else {
        (1..=layers).map(|i| (format!("{prefix}.w{i}"), format!("{prefix}.b{i}"))).collect()
    }
}

/// `dims = [in, hidden.., out]`.
pub(crate) fn mlp_specs(prefix: &str, dims: &[usize]) -> Vec<ParamSpec> {
    names(prefix, dims.len() - 1)
        .into_iter()
        .zip(dims.windows(2))
        .flat_map(|((w, b), d)| [ParamSpec::matrix(w, d[1], d[0]), ParamSpec::bias(b, d[1])])
        .collect()
}

impl Mlp {
    pub(crate) fn bind(params: &ParamStore, prefix: &str, layers: usize, tanh_out: bool) -> Result<Self, NnError> {
        let layers = names(prefix, layers)
            .into_iter()
            .map(|(w, b)| Ok((params.id(&w)?, params.id(&b)?)))
            .collect::<Result<_, NnError>>()?;
        Ok(Self { layers, tanh_out })
    }

    pub(crate) fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var, NnError> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            h = tape.affine(w, b, h)?;
            if i < last || self.tanh_out {
                h = tape.tanh(h);
            }
        }
        Ok(h)
    }
}
