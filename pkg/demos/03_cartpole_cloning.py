"""Causal confusion on CartPole and what masking buys.

The observation is the (slightly noisy) state plus one nuisance channel
holding the previous action. Expert actions change smoothly, so the
nuisance predicts the next action almost perfectly and a linear policy
leans on it. In closed loop the channel carries the policy's own output,
and the copycat feedback diverges.

Three arms are trained on the same intervened expert data: no mask, the
mask computed from the data, and the ground-truth nuisance mask.
"""

from causalmask import envs
from causalmask.cloning import (ARMS, evaluate, manual_mask, open_loop_mse,
                                train)
from causalmask.masking import MaskConfig, compute_mask

spec = envs.cartpole_spec()
data = envs.generate_dataset(spec, 1000, "intervened", seed=42)
mask, _ = compute_mask(data, MaskConfig(horizon=3, gamma=1e-3))
print(f"computed mask {mask}, manual mask {manual_mask(spec)}")

expert = envs.rollout_batch(spec, envs.make_expert(spec), "intervened", range(25))
print(f"{'expert':>8}: closed-loop loss {expert.loss.mean():10.4g}")

masks = {"vanilla": None, "masked": mask, "manual": manual_mask(spec)}
for arm in ARMS:
    policy = train(data, masks[arm])
    res = evaluate(policy, spec, rollouts=25, rng_seed=1)
    print(f"{arm:>8}: closed-loop loss {res.mean:10.4g}   "
          f"open-loop mse {open_loop_mse(policy, data):.4f}")
