//! Minibatch objective and gradients for the trainable effects of a model.
//!
//! Each trainable effect owns a slot holding its forward traces and
//! gradient accumulators. Slots are processed independently (optionally in
//! parallel); cross-effect reductions run in fixed slot order, so parallel
//! and sequential runs produce identical bits.

use rayon::prelude::*;

use super::head::{cox_loss_grad, rps_logit_grad, softmax_into};
use super::regularize::{binary_entropy_grad, entropy_loss, sparsity_loss};
use super::{DySModel, Effect, HeadMode};
use crate::data::SurvivalDataset;
use crate::error::Result;
use crate::numeric::{AdamState, Mlp, MlpTrace};
use crate::Scalar;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Objective<T> {
    pub lambda: T,
    pub alpha: T,
    pub tau: T,
    /// Adds the sparsity and entropy regularizers.
    pub sparsity: bool,
    pub train_gates: bool,
}

struct Slot<T> {
    interaction: bool,
    index: usize,
    traces: Vec<MlpTrace<T>>,
    outputs: Vec<T>,
    up: Vec<T>,
    gate_value: T,
    grads: Mlp<T>,
    gate_grad: T,
}

pub(crate) struct Engine<T> {
    slots: Vec<Slot<T>>,
    parallel: bool,
    logits: Vec<T>,
    dz: Vec<T>,
    pmf: Vec<T>,
    s_buf: Vec<T>,
    risks: Vec<T>,
    times: Vec<T>,
    events: Vec<bool>,
    cox_grad: Vec<T>,
    pub last_data_loss: T,
}

fn effect_of<T>(model: &DySModel<T>, interaction: bool, index: usize) -> &Effect<T> {
    if interaction {
        &model.interactions[index]
    } else {
        &model.main_effects[index]
    }
}

impl<T: Scalar> Engine<T> {
    /// Slots for every interaction, plus every main effect when `train_mains`.
    pub fn new(model: &DySModel<T>, train_mains: bool, parallel: bool) -> Self {
        let mut slots = Vec::new();
        let mut push = |interaction: bool, index: usize, e: &Effect<T>| {
            slots.push(Slot {
                interaction,
                index,
                traces: Vec::new(),
                outputs: Vec::new(),
                up: Vec::new(),
                gate_value: T::zero(),
                grads: e.net.zeros_like(),
                gate_grad: T::zero(),
            })
        };
        if train_mains {
            for (i, e) in model.main_effects.iter().enumerate() {
                push(false, i, e);
            }
        }
        for (i, e) in model.interactions.iter().enumerate() {
            push(true, i, e);
        }
        Engine {
            slots,
            parallel,
            logits: Vec::new(),
            dz: Vec::new(),
            pmf: Vec::new(),
            s_buf: Vec::new(),
            risks: Vec::new(),
            times: Vec::new(),
            events: Vec::new(),
            cox_grad: Vec::new(),
            last_data_loss: T::zero(),
        }
    }

    pub fn train_mains(&self) -> bool {
        self.slots.iter().any(|s| !s.interaction)
    }

    pub fn num_net_params(&self) -> usize {
        self.slots.iter().map(|s| s.grads.num_params()).sum()
    }

    pub fn num_gates(&self) -> usize {
        self.slots.len()
    }

    fn for_each_slot<F>(&mut self, f: F)
    where
        F: Fn(&mut Slot<T>) + Sync + Send,
    {
        if self.parallel {
            self.slots.par_iter_mut().for_each(f);
        } else {
            self.slots.iter_mut().for_each(f);
        }
    }

    /// Objective on the batch `rows` of `ds`, leaving gradients in the slots.
    /// `base` holds per-sample logits (row-major over all of `ds`) from
    /// effects that are not being trained.
    pub fn batch_objective(
        &mut self,
        model: &DySModel<T>,
        ds: &SurvivalDataset<T>,
        rows: &[usize],
        base: Option<&[T]>,
        obj: &Objective<T>,
    ) -> Result<T> {
        let b_len = rows.len();
        let d = model.output_dim();

        self.for_each_slot(|slot| {
            let e = effect_of(model, slot.interaction, slot.index);
            slot.grads.scale(T::zero());
            slot.gate_grad = T::zero();
            slot.gate_value = e.gate.value();
            if slot.gate_value == T::zero() {
                return;
            }
            slot.traces.resize_with(b_len, MlpTrace::default);
            slot.outputs.resize(b_len * d, T::zero());
            let mut buf = [T::zero(); 2];
            for (b, &i) in rows.iter().enumerate() {
                let k = e.gather(ds.row(i), &mut buf);
                e.net
                    .forward_traced(&buf[..k], &mut slot.traces[b])
                    .expect("effect input width");
                slot.outputs[b * d..(b + 1) * d].copy_from_slice(slot.traces[b].output());
            }
        });

        self.logits.clear();
        self.logits.resize(b_len * d, T::zero());
        if let Some(base) = base {
            for (b, &i) in rows.iter().enumerate() {
                self.logits[b * d..(b + 1) * d].copy_from_slice(&base[i * d..(i + 1) * d]);
            }
        }
        for slot in &self.slots {
            if slot.gate_value == T::zero() {
                continue;
            }
            for (l, &o) in self.logits.iter_mut().zip(&slot.outputs) {
                *l += slot.gate_value * o;
            }
        }

        self.dz.clear();
        self.dz.resize(b_len * d, T::zero());
        let data_loss = match model.head {
            HeadMode::Rps => {
                let scale = T::one() / T::of(b_len as f64);
                let grid = model.grid.times();
                self.pmf.resize(d, T::zero());
                let mut total = T::zero();
                for (b, &i) in rows.iter().enumerate() {
                    softmax_into(&self.logits[b * d..(b + 1) * d], &mut self.pmf);
                    total += rps_logit_grad(
                        &self.pmf,
                        ds.time[i],
                        ds.event[i],
                        grid,
                        scale,
                        &mut self.s_buf,
                        &mut self.dz[b * d..(b + 1) * d],
                    );
                }
                total * scale
            }
            HeadMode::Cox => {
                self.risks.clear();
                self.risks.extend_from_slice(&self.logits);
                self.times.clear();
                self.times.extend(rows.iter().map(|&i| ds.time[i]));
                self.events.clear();
                self.events.extend(rows.iter().map(|&i| ds.event[i]));
                if self.events.iter().any(|&e| e) {
                    self.cox_grad.resize(b_len, T::zero());
                    let l = cox_loss_grad(&self.risks, &self.times, &self.events, &mut self.cox_grad)?;
                    self.dz.copy_from_slice(&self.cox_grad);
                    l
                } else {
                    T::zero()
                }
            }
        };
        self.last_data_loss = data_loss;

        let dz_owned = std::mem::take(&mut self.dz);
        let dz = &dz_owned;
        self.for_each_slot(|slot| {
            let s = slot.gate_value;
            if s == T::zero() {
                return;
            }
            let e = effect_of(model, slot.interaction, slot.index);
            let mut gate_dot = T::zero();
            slot.up.resize(d, T::zero());
            for b in 0..b_len {
                let g = &dz[b * d..(b + 1) * d];
                let out = &slot.outputs[b * d..(b + 1) * d];
                for ((u, &gi), &o) in slot.up.iter_mut().zip(g).zip(out) {
                    *u = s * gi;
                    gate_dot += o * gi;
                }
                e.net
                    .backward_traced(&mut slot.traces[b], &slot.up, &mut slot.grads, None)
                    .expect("upstream width");
            }
            if obj.train_gates {
                let mut coef = gate_dot;
                if obj.sparsity {
                    coef += if slot.interaction {
                        obj.lambda * obj.alpha
                    } else {
                        obj.lambda
                    };
                    coef += obj.tau * binary_entropy_grad(s);
                }
                slot.gate_grad = e.gate.grad() * coef;
            }
        });
        self.dz = dz_owned;

        let mut total = data_loss;
        if obj.sparsity {
            total += sparsity_loss(model, obj.lambda, obj.alpha) + entropy_loss(model, obj.tau);
        }
        Ok(total)
    }

    /// Gradient of the last batch in [`DySModel::flat_params`] order. Only
    /// meaningful when every effect is trainable.
    pub fn flat_gradient(&self) -> Vec<T> {
        let mut v: Vec<T> = self.slots.iter().flat_map(|s| s.grads.flat_params()).collect();
        v.extend(self.slots.iter().map(|s| s.gate_grad));
        v
    }

    /// Applies one Adam step to trainable nets and (optionally) gates.
    pub fn apply(
        &self,
        model: &mut DySModel<T>,
        nets: &mut AdamState<T>,
        gates: Option<&mut AdamState<T>>,
    ) -> Result<()> {
        let train_mains = self.train_mains();
        let (mains, inters) = (&mut model.main_effects, &mut model.interactions);
        let trainable: Vec<&mut Effect<T>> = if train_mains {
            mains.iter_mut().chain(inters.iter_mut()).collect()
        } else {
            inters.iter_mut().collect()
        };
        let grads: Vec<&[T]> = self.slots.iter().flat_map(|s| s.grads.param_slices()).collect();
        let mut effects = trainable;
        {
            let mut params: Vec<&mut [T]> = effects.iter_mut().flat_map(|e| e.net.param_slices_mut()).collect();
            nets.update(&mut params, &grads)?;
        }
        if let Some(gates) = gates {
            let mut params: Vec<&mut [T]> = effects
                .iter_mut()
                .map(|e| std::slice::from_mut(&mut e.gate.mu))
                .collect();
            let g: Vec<&[T]> = self.slots.iter().map(|s| std::slice::from_ref(&s.gate_grad)).collect();
            gates.update(&mut params, &g)?;
        }
        Ok(())
    }
}
