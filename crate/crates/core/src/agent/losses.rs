//! The three training objectives and their parameter gradients.
//!
//! Every loss takes the Gaussian noise for its reparameterized actions as an
//! argument, which makes each loss a deterministic function of the network
//! parameters (and therefore checkable against finite differences).

use ndarray::{s, Array1, Array2};

use super::buffer::Transition;
use super::nets::{column, AgentNets};
use crate::nn::{MlpGrads, SquashedBatch};

/// Column-stacked view of a set of transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub action: Array2<f64>,
    pub reward: Array1<f64>,
    pub risk: Array1<f64>,
    pub delta: Array1<f64>,
    pub next_obs: Array2<f64>,
    /// 1.0 where the transition ended the episode at the goal.
    pub done: Array1<f64>,
}

impl Batch {
    pub fn from_transitions(items: &[&Transition]) -> Self {
        assert!(!items.is_empty(), "batch must be non-empty");
        let n = items.len();
        let od = items[0].obs.len();
        let ad = items[0].action.len();
        let rows = |f: &dyn Fn(&Transition) -> &[f64], d: usize| {
            Array2::from_shape_vec((n, d), items.iter().flat_map(|t| f(t).iter().copied()).collect())
                .expect("consistent transition widths")
        };
        Self {
            obs: rows(&|t| &t.obs, od),
            action: rows(&|t| &t.action, ad),
            reward: items.iter().map(|t| t.reward).collect(),
            risk: items.iter().map(|t| t.risk).collect(),
            delta: items.iter().map(|t| t.delta.value()).collect(),
            next_obs: rows(&|t| &t.next_obs, od),
            done: items.iter().map(|t| if t.done { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.reward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reward.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct QLoss {
    /// Sum of both critics' half mean-squared Bellman residuals.
    pub loss: f64,
    pub grads_q1: MlpGrads,
    pub grads_q2: MlpGrads,
    pub mean_q: f64,
}

#[derive(Debug, Clone)]
pub struct RiskLoss {
    pub loss: f64,
    pub grads: MlpGrads,
    pub mean_risk: f64,
}

#[derive(Debug, Clone)]
pub struct PolicyLoss {
    pub loss: f64,
    pub grads: MlpGrads,
    /// Mean of `lambda * relu(risk - delta)` over the batch.
    pub penalty: f64,
}

/// Fresh next-state actions from the current policy.
fn next_actions(nets: &AgentNets, batch: &Batch, noise: &Array2<f64>) -> SquashedBatch {
    let x = nets.policy_input(batch.next_obs.view(), batch.delta.view());
    let raw = nets.policy.forward_batch(x.view()).into_output();
    SquashedBatch::sample(raw.view(), noise.view())
}

/// Soft Bellman targets (held constant) and the twin-critic regression loss.
///
/// `y = r + gamma (1 - done) (min(Q1', Q2')(s', a', delta) - alpha log pi(a'|s', delta))`
pub fn q_loss(nets: &AgentNets, batch: &Batch, next_noise: &Array2<f64>) -> QLoss {
    let cfg = &nets.config;
    let n = batch.len() as f64;
    let next = next_actions(nets, batch, next_noise);
    let xn = nets.critic_input(batch.next_obs.view(), next.action.view(), batch.delta.view());
    let q1n = nets.q1_target.forward_batch(xn.view()).into_output();
    let q2n = nets.q2_target.forward_batch(xn.view()).into_output();
    let soft_v = ndarray::Zip::from(q1n.column(0))
        .and(q2n.column(0))
        .and(&next.log_prob)
        .map_collect(|&a, &b, &lp| a.min(b) - cfg.alpha * lp);
    let target = &batch.reward + &(cfg.gamma * (1.0 - &batch.done) * soft_v);

    let x = nets.critic_input(batch.obs.view(), batch.action.view(), batch.delta.view());
    let mut loss = 0.0;
    let mut mean_q = 0.0;
    let mut grads = Vec::with_capacity(2);
    for net in [&nets.q1, &nets.q2] {
        let cache = net.forward_batch(x.view());
        let resid = &cache.output().column(0) - &target;
        loss += 0.5 * resid.mapv(|r| r * r).sum() / n;
        mean_q += cache.output().sum() / n / 2.0;
        let upstream = column(&(resid / n));
        grads.push(net.backward(&cache, &upstream).0);
    }
    let grads_q2 = grads.pop().expect("two critics");
    let grads_q1 = grads.pop().expect("two critics");
    QLoss {
        loss,
        grads_q1,
        grads_q2,
        mean_q,
    }
}

/// Risk critic regression onto the recursive execution-risk target
/// `r_b + (1 - r_b)(1 - done) Qer'(s', a', delta)`, held constant.
pub fn risk_critic_loss(nets: &AgentNets, batch: &Batch, next_noise: &Array2<f64>) -> RiskLoss {
    let n = batch.len() as f64;
    let next = next_actions(nets, batch, next_noise);
    let xn = nets.critic_input(batch.next_obs.view(), next.action.view(), batch.delta.view());
    let er_next = nets.risk_target.forward_batch(xn.view()).into_output().column(0).to_owned();
    let target = &batch.risk + &((1.0 - &batch.risk) * (1.0 - &batch.done) * er_next);

    let x = nets.critic_input(batch.obs.view(), batch.action.view(), batch.delta.view());
    let cache = nets.risk.forward_batch(x.view());
    let est = cache.output().column(0).to_owned();
    let resid = &est - &target;
    let loss = 0.5 * resid.mapv(|r| r * r).sum() / n;
    let grads = nets.risk.backward(&cache, &column(&(resid / n))).0;
    RiskLoss {
        loss,
        grads,
        mean_risk: est.sum() / n,
    }
}

/// Risk-bounded actor objective
/// `mean[alpha log pi(a|s,delta) - min(Q1,Q2)(s,a,delta) + lambda relu(Qer(s,a,delta) - delta)]`
/// with `a` reparameterized from `noise`. Critics are frozen; gradients
/// reach the policy through the action inputs of the critics.
pub fn policy_loss(nets: &AgentNets, batch: &Batch, lambda_er: f64, noise: &Array2<f64>) -> PolicyLoss {
    let cfg = &nets.config;
    let n = batch.len();
    let nf = n as f64;
    let px = nets.policy_input(batch.obs.view(), batch.delta.view());
    let pcache = nets.policy.forward_batch(px.view());
    let sq = SquashedBatch::sample(pcache.output().view(), noise.view());

    let x = nets.critic_input(batch.obs.view(), sq.action.view(), batch.delta.view());
    let c1 = nets.q1.forward_batch(x.view());
    let c2 = nets.q2.forward_batch(x.view());
    let cr = nets.risk.forward_batch(x.view());

    let mut up1 = Array2::zeros((n, 1));
    let mut up2 = Array2::zeros((n, 1));
    let mut upr = Array2::zeros((n, 1));
    let mut loss = 0.0;
    let mut penalty = 0.0;
    for i in 0..n {
        let (q1, q2) = (c1.output()[[i, 0]], c2.output()[[i, 0]]);
        let q_min = if q1 <= q2 {
            up1[[i, 0]] = -1.0 / nf;
            q1
        } else {
            up2[[i, 0]] = -1.0 / nf;
            q2
        };
        let excess = cr.output()[[i, 0]] - batch.delta[i];
        let pen = if excess > 0.0 {
            upr[[i, 0]] = lambda_er / nf;
            lambda_er * excess
        } else {
            0.0
        };
        penalty += pen / nf;
        loss += (cfg.alpha * sq.log_prob[i] - q_min + pen) / nf;
    }

    let mut d_input = nets.q1.backward_input(&c1, &up1);
    d_input += &nets.q2.backward_input(&c2, &up2);
    if lambda_er > 0.0 {
        d_input += &nets.risk.backward_input(&cr, &upr);
    }
    let od = cfg.obs_dim;
    let d_action = d_input.slice(s![.., od..od + cfg.act_dim]).to_owned();
    let d_log_prob = Array1::from_elem(n, cfg.alpha / nf);
    let d_raw = sq.backward(&d_action, &d_log_prob);
    let grads = nets.policy.backward(&pcache, &d_raw).0;
    PolicyLoss { loss, grads, penalty }
}
