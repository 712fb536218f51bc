"""Point-to-point designs for the five fixture channels, next to the ZF and SVD baselines.

Run with ``python3 demos/p2p_cases.py``.
"""

import numpy as np

from vlcjtod.baselines import svd_design, zf_design
from vlcjtod.channel import case_channel
from vlcjtod.mse import mse_p2p_full
from vlcjtod.optimizer import OptimizerConfig, jtod_p2p
from vlcjtod.signal import SystemParams, lighting_constraints


def main():
    params = SystemParams()
    lc = lighting_constraints(params, n_t=2)
    np.set_printoptions(precision=3, suppress=True)
    for case in ("case1", "case2", "case3", "case4", "case5"):
        h = case_channel(case).overall
        d = jtod_p2p(h, params, lc, OptimizerConfig())
        print(f"{case}: JTOD sum MSE {d.mse:.6f} ({d.status})")
        print(f"  offsets b = {d.b}")
        for name, fn in (("ZF", zf_design), ("SVD", svd_design)):
            try:
                base = fn(h, params, lc)
                print(f"  {name:3s} sum MSE {mse_p2p_full(base.g, base.p, base.b, h, params):.6f}")
            except Exception as exc:  # a baseline can be undefined, e.g. ZF on a blocked channel
                print(f"  {name:3s} unavailable: {exc}")


if __name__ == "__main__":
    main()
