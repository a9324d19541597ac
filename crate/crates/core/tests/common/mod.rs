#![allow(dead_code)]

use spsn::autodiff::{EscapeParams, Tape, Var};
use spsn::data::{synth_generate, SynthConfig};
use spsn::network::{Network, NetworkConfig, NeuronKind};
use spsn::neurons::NeuronParams;
use spsn::numerics::compose_kernels;
use spsn::objective::{objective, ReadoutMode, RegConfig};
use spsn::{Result, Rng, Tensor};

pub const STEP: f64 = 1e-5;

/// Largest relative error between reverse-mode and central-difference
/// gradients over the probed coordinates.
#[derive(Clone, Copy, Debug)]
pub struct Check {
    pub max_rel: f64,
    pub coords: usize,
}

fn rel(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// `f` builds the loss from the given parameter values on a tape and returns
/// it with the parameter leaves. Gradients come from a recording tape;
/// differences are taken on replaying tapes anchored at the same point.
/// At most `max_coords` coordinates per tensor are probed.
pub fn gradcheck<F>(params: &[Tensor<f64>], max_coords: usize, f: F) -> Result<Check>
where
    F: Fn(&mut Tape<f64>, &[Tensor<f64>]) -> Result<(Var, Vec<Var>)>,
{
    let mut tape = Tape::recording();
    let (loss, leaves) = f(&mut tape, params)?;
    let anchors = tape.take_anchors();
    let grads = tape.backward(loss)?;
    let eval = |ps: &[Tensor<f64>]| -> Result<f64> {
        let mut t = Tape::replaying(anchors.clone());
        let (l, _) = f(&mut t, ps)?;
        Ok(t.value(l).item())
    };
    let base = eval(params)?;
    assert!(
        (base - tape.value(loss).item()).abs() <= 1e-12 * base.abs().max(1.0),
        "replay moved the loss"
    );

    let mut worst = 0.0f64;
    let mut coords = 0;
    for (p, leaf) in leaves.iter().enumerate() {
        let analytic = grads.get_or_zeros(&tape, *leaf);
        let n = params[p].len();
        let stride = n.div_ceil(max_coords).max(1);
        for i in (0..n).step_by(stride) {
            let mut plus = params.to_vec();
            plus[p].data_mut()[i] += STEP;
            let mut minus = params.to_vec();
            minus[p].data_mut()[i] -= STEP;
            let numeric = (eval(&plus)? - eval(&minus)?) / (2.0 * STEP);
            worst = worst.max(rel(analytic.data()[i], numeric));
            coords += 1;
        }
    }
    Ok(Check {
        max_rel: worst,
        coords,
    })
}

pub fn random(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Tensor<f64> {
    let mut rng = Rng::new(seed);
    Tensor::from_fn(shape, |_| rng.uniform_range(lo, hi))
}

pub fn raster(shape: &[usize], rate: f64, seed: u64) -> Tensor<f64> {
    let mut rng = Rng::new(seed);
    Tensor::from_fn(shape, |_| if rng.bernoulli(rate) { 1.0 } else { 0.0 })
}

/// Loss of a small network with the regularizer switched on, checked
/// against the same network's parameters.
pub fn network_check(kind: NeuronKind, hidden_layers: usize, max_coords: usize) -> Result<Check> {
    let config = NetworkConfig {
        input_channels: 8,
        hidden_layers,
        hidden_size: 6,
        classes: 3,
        neuron_kind: kind,
        seed: 5,
        ..NetworkConfig::default()
    };
    let net = Network::<f64>::build(config.clone(), &mut Rng::new(5))?;
    // larger weights so every layer spikes
    let params: Vec<Tensor<f64>> = net
        .parameters()
        .into_iter()
        .map(|t| t.map(|v| v * 4.0 + 0.05))
        .collect();
    let x = raster(&[25, 2, 8], 0.3, 9);
    let targets = [0usize, 2];
    let reg = RegConfig::with_theta(0.05);
    gradcheck(&params, max_coords, |tape, ps| {
        let mut n = net.clone();
        for (dst, src) in n.parameters_mut().into_iter().zip(ps) {
            *dst = src.clone();
        }
        let pass = n.forward(tape, &x, &mut Rng::new(17))?;
        for s in &pass.spikes {
            assert!(
                tape.value(*s).data().iter().any(|&v| v > 0.5),
                "silent layer makes the check vacuous"
            );
        }
        let loss = objective(
            tape,
            pass.potentials,
            &pass.spikes,
            &targets,
            ReadoutMode::Mean,
            &reg,
        )?;
        Ok((loss.total, pass.params))
    })
}

/// Default synthetic task split 80/20 with a fixed seed.
pub fn synth_split() -> (spsn::data::EventDataset, spsn::data::EventDataset) {
    let synth = synth_generate(&SynthConfig::default()).expect("synthetic task");
    synth
        .dataset
        .split_stratified(0.2, &mut Rng::new(0))
        .expect("stratified split")
}

/// Weighted sum so every output element carries a distinct gradient.
fn weighted(tape: &mut Tape<f64>, y: Var, seed: u64) -> Result<Var> {
    let w = tape.constant(random(tape.shape(y), -1.0, 1.0, seed));
    let p = tape.mul(y, w)?;
    Ok(tape.sum(p))
}

fn leaves(tape: &mut Tape<f64>, ps: &[Tensor<f64>]) -> Vec<Var> {
    ps.iter().map(|p| tape.param(p.clone())).collect()
}

/// Every differentiable op, each checked in isolation.
pub fn op_checks() -> Result<Vec<(String, Check)>> {
    let mut out = Vec::new();
    // dense
    {
        let ps = [
            random(&[4, 3, 5], -1.0, 1.0, 1),
            random(&[5, 6], -1.0, 1.0, 2),
            random(&[6], -1.0, 1.0, 3),
        ];
        let c = gradcheck(&ps, 64, |t, ps| {
            let v = leaves(t, ps);
            let y = t.dense(v[0], v[1], Some(v[2]))?;
            Ok((weighted(t, y, 4)?, v))
        })?;
        out.push(("dense".to_string(), c));
    }

    // elementwise
    {
        let ps = [random(&[3, 7], -2.0, 2.0, 5), random(&[3, 7], 0.1, 2.0, 6)];
        let c = gradcheck(&ps, 64, |t, ps| {
            let v = leaves(t, ps);
            let a = t.add(v[0], v[1])?;
            let m = t.mul(a, v[1])?;
            let s = t.sigmoid(m);
            let r = t.relu(v[0]);
            let r = t.scale(r, 1.7);
            let y = t.add(s, r)?;
            Ok((weighted(t, y, 7)?, v))
        })?;
        out.push(("elementwise".to_string(), c));
    }

    // causal_convolution
    {
        let p = NeuronParams::default();
        let kernel: Vec<f64> = (0..40).map(|t| p.alpha().powi(t)).collect();
        let ps = [random(&[40, 2, 3], -1.0, 1.0, 8)];
        let c = gradcheck(&ps, 64, |t, ps| {
            let v = leaves(t, ps);
            let y = t.causal_conv(v[0], &kernel)?;
            Ok((weighted(t, y, 9)?, v))
        })?;
        out.push(("causal_conv".to_string(), c));

        let membrane: Vec<f64> = (0..40)
            .map(|t| (1.0 - p.beta()) * p.beta().powi(t))
            .collect();
        let composed = compose_kernels(&kernel, &membrane)?;
        let c = gradcheck(&ps, 64, |t, ps| {
            let v = leaves(t, ps);
            let y = t.causal_conv(v[0], &composed)?;
            Ok((weighted(t, y, 10)?, v))
        })?;
        out.push(("composed conv".to_string(), c));
    }

    // readout_and_cross_entropy
    {
        let ps = [random(&[9, 3, 4], -2.0, 2.0, 11)];
        for mode in ReadoutMode::ALL {
            let c = gradcheck(&ps, 128, |t, ps| {
                let v = leaves(t, ps);
                let l = t.readout_reduce(v[0], mode)?;
                Ok((t.cross_entropy(l, &[3, 0, 1])?, v))
            })?;
            out.push((format!("readout {}", mode.name()), c));
        }
    }

    // spike_regularizer
    {
        let ps = [
            random(&[10, 3, 4], 0.0, 1.0, 12),
            random(&[10, 3, 2], 0.0, 1.0, 13),
        ];
        let c = gradcheck(&ps, 128, |t, ps| {
            let v = leaves(t, ps);
            Ok((t.spike_regularizer(&v, 0.1)?, v))
        })?;
        out.push(("spike_regularizer".to_string(), c));
    }

    // heaviside_surrogate
    {
        let ps = [random(&[6, 2, 5], 0.0, 2.0, 14)];
        let c = gradcheck(&ps, 64, |t, ps| {
            let v = leaves(t, ps);
            let s = t.heaviside_surrogate(v[0], 1.0, 10.0)?;
            Ok((weighted(t, s, 15)?, v))
        })?;
        out.push(("heaviside".to_string(), c));
    }

    // sigmoid_bernoulli
    {
        let ps = [random(&[6, 2, 5], -3.0, 3.0, 16)];
        for offset in [0.0, 1.0] {
            let c = gradcheck(&ps, 64, |t, ps| {
                let v = leaves(t, ps);
                let s = t.sigmoid_bernoulli(v[0], offset, &mut Rng::new(3))?;
                Ok((weighted(t, s, 17)?, v))
            })?;
            out.push((format!("sigmoid_bernoulli offset {offset}"), c));
        }
    }

    // gumbel_spike
    {
        let ps = [random(&[6, 2, 5], -3.0, 3.0, 18)];
        for tau in [0.5, 1.0] {
            let c = gradcheck(&ps, 64, |t, ps| {
                let v = leaves(t, ps);
                let s = t.gumbel_spike(v[0], tau, &mut Rng::new(4))?;
                Ok((weighted(t, s, 19)?, v))
            })?;
            out.push((format!("gumbel tau {tau}"), c));
        }
    }

    // escape_spike
    {
        let params = EscapeParams::for_threshold(1.0);
        let ps = [random(&[6, 2, 5], 0.0, 1.5, 20)];
        let c = gradcheck(&ps, 64, |t, ps| {
            let v = leaves(t, ps);
            let s = t.escape_spike(v[0], params, 1e-3, &mut Rng::new(5))?;
            Ok((weighted(t, s, 21)?, v))
        })?;
        out.push(("escape".to_string(), c));
    }

    // lif
    {
        let p = NeuronParams::default();
        let ps = [random(&[30, 2, 3], 0.0, 1.2, 22)];
        let c = gradcheck(&ps, 64, |t, ps| {
            let v = leaves(t, ps);
            let s = t.lif(v[0], p.alpha(), p.beta(), 1.0, 10.0)?;
            Ok((weighted(t, s, 23)?, v))
        })?;
        out.push(("lif".to_string(), c));
    }
    Ok(out)
}
