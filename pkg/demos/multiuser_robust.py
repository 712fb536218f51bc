"""Downlink and uplink designs on the four-user channel, the duality check and the robust design.

Run with ``python3 demos/multiuser_robust.py``.
"""

import numpy as np

from vlcjtod.channel import case_channel, uncertainty_ball
from vlcjtod.multiuser import equal_split_offset, jtod_downlink, jtod_uplink, shot_duality_gap
from vlcjtod.optimizer import OptimizerConfig
from vlcjtod.robust import robust_jtod, sampled_worst_case
from vlcjtod.signal import SystemParams, lighting_constraints


def main():
    params = SystemParams(sigma2=0.01, varsigma2=0.5)
    lc = lighting_constraints(params, colored=False)
    h = case_channel("downlink4")
    cfg = OptimizerConfig(n_restarts=5)
    np.set_printoptions(precision=4, suppress=True)

    dl = jtod_downlink(h, params, lc, cfg)
    print(f"downlink per-user MSE {dl.per_user_mse}, sum {dl.per_user_mse.sum():.6f}")
    ul = jtod_uplink(h, params, lc, cfg)
    print(f"uplink   per-user MSE {ul.per_user_mse}, sum {ul.per_user_mse.sum():.6f}")
    _, _, gap = shot_duality_gap(ul, h, equal_split_offset(ul.b, h.shape[0]), params)
    print(f"shot-noise duality gap per user {gap}")

    for s in (0.0, 0.1, 0.2):
        model = uncertainty_ball(h, s)
        rob = robust_jtod(model, params, lc, init=dl)
        _, rob_worst = sampled_worst_case(rob.p, rob.b, rob.g, model, params, n=5000, seed=1)
        _, dl_worst = sampled_worst_case(dl.p, dl.b, dl.g, model, params, n=5000, seed=1)
        print(f"s={s:.1f}: certified bound {rob.info['certified']:.4f}, sampled worst case "
              f"robust {rob_worst:.4f} / nominal JTOD {dl_worst:.4f}")


if __name__ == "__main__":
    main()
