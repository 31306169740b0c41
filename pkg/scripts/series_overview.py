#!/usr/bin/env python3
"""Print the error-series landscape across growth exponents.

Shows, per exponent: the series total from the smallest admissible index,
the tail at a few cut points, and the minimal admissible start index for a
unit budget -- the desk-scale view of how the expansion scheme's error
budget depends on the flatness rate.
"""

from holeflow.iteration import (choose_tail_start, empty_spot_scale_log,
                                tail_sum)

R0 = 0.1

if __name__ == "__main__":
    for alpha in (0.51, 0.6, 0.75, 1.0):
        log_r1 = empty_spot_scale_log(2, R0, alpha)
        total = tail_sum(3, alpha, 2)
        tails = {k: tail_sum(k, alpha, 2) for k in (10, 100, 1000)}
        k_unit = choose_tail_start(alpha, 2, 1.0, R0, log_r1, 1.0)
        print(f"alpha = {alpha}:")
        print(f"  log r1       = {log_r1:.2f}")
        print(f"  series total = {total:.4e}")
        for k, t in tails.items():
            print(f"  tail from {k:>4} = {t:.4e}")
        print(f"  start index for unit budget: "
              f"{k_unit if k_unit is not None else 'infeasible (> 1e9)'}")
