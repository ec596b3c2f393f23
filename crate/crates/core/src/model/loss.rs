//! Training objectives.

use super::networks::Discriminator;
use crate::error::{Error, Result};
use crate::tensor::{Element, Var};

/// Discriminator loss and per-head generator adversarial losses.
pub struct AdversarialLosses<'t, T: Element> {
    /// `0.5 * (bce(real, 1) + mean_k bce(fake_k, 0))`
    pub d_loss: Var<'t, T>,
    /// `bce(fake_k, 1)` for each head.
    pub g_adv: Vec<Var<'t, T>>,
}

/// Scores the real pair and every head's fake pair.
///
/// `fakes` is `[N, K, R, R]`. Both losses share one discriminator pass per
/// head; callers take discriminator gradients from `d_loss` and generator
/// gradients from `g_adv` only, so the shared pass acts as if the fakes were
/// detached for the discriminator update.
pub fn adversarial_losses<'t, T: Element>(
    disc: &Discriminator<T>,
    params: &[Var<'t, T>],
    frame: Var<'t, T>,
    real: Var<'t, T>,
    fakes: Var<'t, T>,
) -> Result<AdversarialLosses<'t, T>> {
    let heads = head_count(fakes)?;
    let real_logits = disc.forward(params, frame, real)?.logits;
    let mut fake_terms = Vec::with_capacity(heads);
    let mut g_adv = Vec::with_capacity(heads);
    for k in 0..heads {
        let fake = fakes.narrow(1, k, 1)?;
        let logits = disc.forward(params, frame, fake)?.logits;
        fake_terms.push(logits.bce_with_logits(T::zero()));
        g_adv.push(logits.bce_with_logits(T::one()));
    }
    let fake_mean = sum_vars(&fake_terms)?.scale(T::one() / T::of(heads as f64));
    let d_loss = real_logits
        .bce_with_logits(T::one())
        .add(fake_mean)?
        .scale(T::of(0.5));
    Ok(AdversarialLosses { d_loss, g_adv })
}

/// Min-over-heads reconstruction loss.
pub struct Reconstruction<'t, T: Element> {
    pub loss: Var<'t, T>,
    /// Selected head for each sample.
    pub argmin: Vec<usize>,
}

/// `(1/N) Σ_i min_k mean|outputs[i, k] - truth[i]|`, ties to the lowest head.
///
/// Only the selected head of each sample is part of the returned graph, so
/// the other heads receive no reconstruction gradient.
pub fn multimodal_reconstruction<'t, T: Element>(
    outputs: Var<'t, T>,
    truth: Var<'t, T>,
) -> Result<Reconstruction<'t, T>> {
    let heads = head_count(outputs)?;
    let (os, ts) = (outputs.shape(), truth.shape());
    if ts.len() != 4 || ts[1] != 1 || ts[0] != os[0] || ts[2..] != os[2..] {
        return Err(Error::Shape(format!(
            "reconstruction: outputs {os:?} vs truth {ts:?}"
        )));
    }
    let batch = os[0];
    let mut chosen = Vec::with_capacity(batch);
    let mut argmin = Vec::with_capacity(batch);
    for i in 0..batch {
        let target = truth.narrow(0, i, 1)?;
        let sample = outputs.narrow(0, i, 1)?;
        let mut best: Option<(usize, Var<'t, T>, T)> = None;
        for k in 0..heads {
            let d = sample.narrow(1, k, 1)?.mean_abs_diff(target)?;
            let v = d.item();
            if best.as_ref().map_or(true, |b| v < b.2) {
                best = Some((k, d, v));
            }
        }
        let (k, d, _) = best.expect("at least one head");
        argmin.push(k);
        chosen.push(d);
    }
    let loss = sum_vars(&chosen)?.scale(T::one() / T::of(batch as f64));
    Ok(Reconstruction { loss, argmin })
}

/// Per-sample mean absolute error averaged over the batch. Shares its
/// arithmetic with [`multimodal_reconstruction`], so a single head gives the
/// same bits.
pub fn mean_l1<'t, T: Element>(pred: Var<'t, T>, truth: Var<'t, T>) -> Result<Var<'t, T>> {
    if pred.shape() != truth.shape() {
        return Err(Error::Shape(format!(
            "mean_l1: {:?} vs {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let batch = pred.shape()[0];
    let mut per = Vec::with_capacity(batch);
    for i in 0..batch {
        per.push(
            pred.narrow(0, i, 1)?
                .mean_abs_diff(truth.narrow(0, i, 1)?)?,
        );
    }
    Ok(sum_vars(&per)?.scale(T::one() / T::of(batch as f64)))
}

/// Left-to-right sum.
pub fn sum_vars<'t, T: Element>(vars: &[Var<'t, T>]) -> Result<Var<'t, T>> {
    let (first, rest) = vars
        .split_first()
        .ok_or_else(|| Error::Shape("sum of zero terms".into()))?;
    rest.iter().try_fold(*first, |acc, &v| acc.add(v))
}

fn head_count<T: Element>(v: Var<'_, T>) -> Result<usize> {
    let s = v.shape();
    if s.len() != 4 || s[1] == 0 {
        return Err(Error::Shape(format!("expected [N, K, R, R], got {s:?}")));
    }
    Ok(s[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Tape, Tensor};

    fn filled(shape: &[usize], v: f64) -> Tensor<f64> {
        Tensor::full(shape, v)
    }

    #[test]
    fn picks_minimum_distance() {
        let tape = Tape::<f64>::new();
        let mut data = vec![0.5; 4];
        data.extend([0.2; 4]);
        data.extend([0.9; 4]);
        let out = tape.leaf(Tensor::new(vec![1, 3, 2, 2], data).unwrap());
        let truth = tape.leaf(filled(&[1, 1, 2, 2], 0.0));
        let r = multimodal_reconstruction(out, truth).unwrap();
        assert!((r.loss.item() - 0.2).abs() < 1e-12);
        assert_eq!(r.argmin, vec![1]);
    }

    #[test]
    fn ties_go_to_lowest_head() {
        let tape = Tape::<f64>::new();
        let out = tape.leaf(filled(&[2, 3, 2, 2], 0.4));
        let truth = tape.leaf(filled(&[2, 1, 2, 2], 0.1));
        let r = multimodal_reconstruction(out, truth).unwrap();
        assert_eq!(r.argmin, vec![0, 0]);
    }

    #[test]
    fn single_head_matches_mean_l1_bits() {
        let tape = Tape::<f32>::new();
        let a: Vec<f32> = (0..32).map(|i| (i as f32 * 0.37).sin().abs()).collect();
        let b: Vec<f32> = (0..32).map(|i| (i as f32 * 0.11).cos().abs()).collect();
        let out = tape.leaf(Tensor::new(vec![2, 1, 4, 4], a).unwrap());
        let truth = tape.leaf(Tensor::new(vec![2, 1, 4, 4], b).unwrap());
        let mm = multimodal_reconstruction(out, truth).unwrap().loss.item();
        let plain = mean_l1(out, truth).unwrap().item();
        assert_eq!(mm.to_bits(), plain.to_bits());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let tape = Tape::<f64>::new();
        let out = tape.leaf(filled(&[1, 2, 4, 4], 0.0));
        let truth = tape.leaf(filled(&[1, 1, 2, 2], 0.0));
        assert!(multimodal_reconstruction(out, truth).is_err());
    }
}
