//! Single critic and generator updates.

use super::config::CriticMode;
use crate::error::{shape_err, Result};
use crate::model::{critic_forward, generator_forward, Model, NetworkParams};
use crate::numerics::tensor::{self, Tensor};
use crate::numerics::{Graph, OptimizerState, Var};
use crate::scalar::Scalar;

/// `mean_i (‖∇ D(x̃_i)‖ - 1)²` at `x̃ = ε x_real + (1 - ε) x_fake`, one `ε`
/// per row.
///
/// `critic` maps a `B x n` batch to per-row scores and must treat rows
/// independently. The result stays differentiable with respect to every
/// leaf the critic closes over.
pub fn gradient_penalty<'g, T: Scalar>(
    graph: &'g Graph<T>,
    x_real: &Tensor<T>,
    x_fake: &Tensor<T>,
    epsilon: &[f64],
    critic: impl FnOnce(&Var<'g, T>) -> Result<Var<'g, T>>,
) -> Result<Var<'g, T>> {
    if x_real.shape() != x_fake.shape() || x_real.rank() != 2 || x_real.shape()[0] != epsilon.len() {
        return shape_err("gradient_penalty", x_real.shape(), x_fake.shape());
    }
    let cols = x_real.shape()[1];
    let mut mixed = Vec::with_capacity(x_real.len());
    for (i, &e) in epsilon.iter().enumerate() {
        let (e, f) = (T::of(e), T::of(1.0 - e));
        let row = i * cols..(i + 1) * cols;
        for (r, q) in x_real.data()[row.clone()].iter().zip(&x_fake.data()[row]) {
            mixed.push(e * *r + f * *q);
        }
    }
    let x = graph.leaf(Tensor::new(x_real.shape(), mixed)?);
    let scores = critic(&x)?;
    let mut grads = graph.grad(&scores.sum()?, &[&x], true)?;
    let g = grads.pop().expect("one gradient");
    g.norm_l2_rows()?.shift(-T::one())?.square()?.mean()
}

/// Global Euclidean norm of a gradient list.
pub fn grad_norm<T: Scalar>(grads: &[Tensor<T>]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.data().iter())
        .map(|v| v.as_f64() * v.as_f64())
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticStats {
    /// Minimized critic objective, penalty included.
    pub loss: f64,
    pub penalty: f64,
    pub real_mean: f64,
    pub fake_mean: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorStats {
    pub loss: f64,
    pub grad_norm: f64,
}

/// Critic objective to minimize, from mean scores on real and fake rows.
fn critic_objective<'g, T: Scalar>(
    mode: CriticMode,
    real_mean: &Var<'g, T>,
    fake_mean: &Var<'g, T>,
) -> Result<Var<'g, T>> {
    match mode {
        // -(E[D(x)] + E[1 - D(x_f)])
        CriticMode::Bounded => real_mean.neg()?.add(&fake_mean.shift(-T::one())?),
        CriticMode::Wgan => fake_mean.sub(real_mean),
    }
}

/// Loss and parameter gradients of the critic for one minibatch. The
/// gradient penalty is evaluated with the real conditions.
#[allow(clippy::too_many_arguments)]
pub fn critic_gradients<T: Scalar>(
    model: &Model<T>,
    mode: CriticMode,
    penalty_weight: f64,
    x_real: &Tensor<T>,
    c_real: &Tensor<T>,
    x_fake: &Tensor<T>,
    c_fake: &Tensor<T>,
    epsilon: &[f64],
) -> Result<(CriticStats, Vec<Tensor<T>>)> {
    let b = x_real.shape()[0];
    let g = Graph::new();
    let p: NetworkParams<Var<'_, T>> = model.critic.bind(&g);
    let cfg = &model.config;
    let x = g.constant(tensor::concat(&[x_real.clone(), x_fake.clone()], 0)?);
    let c = g.constant(tensor::concat(&[c_real.clone(), c_fake.clone()], 0)?);
    let scores = critic_forward(cfg, &p, &x, &c)?;
    let real_mean = scores.slice(0, 0, b)?.mean()?;
    let fake_mean = scores.slice(0, b, x_fake.shape()[0])?.mean()?;
    let objective = critic_objective(mode, &real_mean, &fake_mean)?;
    let (loss, penalty) = if penalty_weight > 0.0 {
        let cr = g.constant(c_real.clone());
        let gp = gradient_penalty(&g, x_real, x_fake, epsilon, |xt| critic_forward(cfg, &p, xt, &cr))?;
        (objective.add(&gp.scale(T::of(penalty_weight))?)?, gp.value().item()?.as_f64())
    } else {
        (objective, 0.0)
    };
    let grads = g.backward(&loss)?;
    let grads: Vec<Tensor<T>> = p.values().into_iter().map(|v| grads.get(v)).collect();
    let stats = CriticStats {
        loss: loss.value().item()?.as_f64(),
        penalty,
        real_mean: real_mean.value().item()?.as_f64(),
        fake_mean: fake_mean.value().item()?.as_f64(),
        grad_norm: grad_norm(&grads),
    };
    Ok((stats, grads))
}

/// One critic update. The fake batch is an input, so the generator is
/// never touched.
#[allow(clippy::too_many_arguments)]
pub fn discriminator_step<T: Scalar>(
    model: &mut Model<T>,
    opt: &mut OptimizerState<T>,
    mode: CriticMode,
    penalty_weight: f64,
    x_real: &Tensor<T>,
    c_real: &Tensor<T>,
    x_fake: &Tensor<T>,
    c_fake: &Tensor<T>,
    epsilon: &[f64],
) -> Result<CriticStats> {
    let (stats, grads) =
        critic_gradients(model, mode, penalty_weight, x_real, c_real, x_fake, c_fake, epsilon)?;
    apply(&mut model.critic, opt, &grads)?;
    Ok(stats)
}

/// Loss and parameter gradients of the generator against a frozen critic.
pub fn generator_gradients<T: Scalar>(
    model: &Model<T>,
    mode: CriticMode,
    z: &Tensor<T>,
    c: &Tensor<T>,
) -> Result<(GeneratorStats, Vec<Tensor<T>>)> {
    let g = Graph::new();
    let gp = model.generator.bind(&g);
    let dp = model.critic.freeze(&g);
    let cv = g.constant(c.clone());
    let x = generator_forward(&model.config, &gp, &g.constant(z.clone()), &cv)?;
    let score = critic_forward(&model.config, &dp, &x, &cv)?.mean()?;
    let loss = match mode {
        // E[1 - D(G(z))]
        CriticMode::Bounded => score.neg()?.shift(T::one())?,
        CriticMode::Wgan => score.neg()?,
    };
    let grads = g.backward(&loss)?;
    let grads: Vec<Tensor<T>> = gp.values().into_iter().map(|v| grads.get(v)).collect();
    let stats = GeneratorStats {
        loss: loss.value().item()?.as_f64(),
        grad_norm: grad_norm(&grads),
    };
    Ok((stats, grads))
}

/// One generator update; the critic is untouched.
pub fn generator_step<T: Scalar>(
    model: &mut Model<T>,
    opt: &mut OptimizerState<T>,
    mode: CriticMode,
    z: &Tensor<T>,
    c: &Tensor<T>,
) -> Result<GeneratorStats> {
    let (stats, grads) = generator_gradients(model, mode, z, c)?;
    apply(&mut model.generator, opt, &grads)?;
    Ok(stats)
}

fn apply<T: Scalar>(
    params: &mut NetworkParams<Tensor<T>>,
    opt: &mut OptimizerState<T>,
    grads: &[Tensor<T>],
) -> Result<()> {
    let mut flat: Vec<Tensor<T>> = params.values().into_iter().cloned().collect();
    opt.step(&mut flat, grads)?;
    *params = params.with_values(flat)?;
    Ok(())
}
