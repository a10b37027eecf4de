"""
One-sided tests on a separation sample
======================================

Given many per-switch separations, how sure are we the mean is above zero,
or above 15 points? With hundreds of switches the tail probability is far
below what a double can hold, so it is reported on a log10 scale.
"""

import math

from scipy.special import log_ndtr

from selfcore.stats import log10_normal_tail, summarize_moments

st = summarize_moments(n=916, mean=16.921, s=3.093, benchmark=15.0)
print(f"SE      {st.se:.4f}")
print(f"z       {st.z:.2f}   log10 p {st.log10_p:.2f}")
print(f"z (15)  {st.z_b:.2f}    log10 p {st.log10_p_b:.2f}")
print(f"99% one-sided lower bound {st.lb99:.3f}")

# the tail helper agrees with scipy's log CDF over a wide range
for z in (1.0, 8.0, 18.8, 165.57):
    print(f"z={z:7.2f}  ours={log10_normal_tail(z):.6f}  scipy={log_ndtr(-z) / math.log(10):.6f}")
