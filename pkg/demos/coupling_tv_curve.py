import numpy as np

from telegraph_kit.analysis import empirical_decay_rate, tv_curve
from telegraph_kit.model import ModelParams, critical_rate
from telegraph_kit.simulate import make_stream

# sandwich the distance to equilibrium between a coupling bound and a
# histogram distance, for two reflected starts one unit apart
params = ModelParams(a=1.0, b=2.0)
# the closed bound only drops below 1 past t ~ 22 at these rates
grid = np.r_[np.arange(1.0, 21.0), 24.0, 28.0]
curve = tv_curve((1.0, 1), (0.0, 1), "reflected", grid, 5000, params, make_stream(37, 0))

print("   t   survival   binned TV   noise floor   closed bound")
for t, s, tv, nf, bd in zip(
    grid, curve.coupling_survival, curve.binned_tv, curve.noise_floor, curve.theoretical_bound
):
    print(f"{t:4.0f}   {s:8.4f}   {tv:9.4f}   {nf:11.4f}   {min(bd, 1.0):12.4f}")

# the survival curve decays at least at the critical exponent
rate = empirical_decay_rate(curve)
print(f"\nfitted decay of the coupling bound  {rate:.4f}")
print(f"critical exponent                   {critical_rate(params):.4f}")
