# %% [markdown]
# # Fringes of the round-trip interferometer
#
# Light from Bob's source passes his phase shifter on the way out and
# Alice's on the way back.  Here we look at what each detector pair and
# each mid-channel tap sees as the phases sweep.

# %%
import math

import numpy as np

from mzikey import FieldPair, apply, mzi_transform, observe, round_trip_transform
from mzikey import harness

np.set_printoptions(precision=4, suppress=True)

# %% [markdown]
# A single pass with phase 0 sends everything to the lower port (V = +1);
# phase pi sends it to the upper port (V = -1).

# %%
for phi in (0.0, math.pi / 2, math.pi):
    m = observe(apply(mzi_transform(phi), FieldPair.source()))
    print(f"phi={phi:5.3f}  I_upper={m.intensity_upper:.3f}  I_lower={m.intensity_lower:.3f}  V={m.visibility:+.3f}")

# %% [markdown]
# The round trip is the identity up to a global phase whenever both
# parties use the same phase.

# %%
print(round_trip_transform(0.7, 0.7))
print(-np.exp(0.7j) * np.eye(2))

# %% [markdown]
# Fringe curves, sampled coarsely.  V56 is Alice's reading, IN34 and IN78
# are what a tap on the line would record, V910 is Bob's reading with
# Alice's phase held at 0.

# %%
for name in harness.CURVES:
    c = harness.fringe_curves(name, step=math.pi / 4)
    print(f"{name:5s}", " ".join(f"{v:+.2f}" for v in c[:, 1]))

# %% [markdown]
# Bob's visibility over the whole (phi, psi) plane.  Only the four basis
# corners give +-1; anything else is flagged as an error.

# %%
phis, psis, grid = harness.ber_map(resolution=5)
print(grid)

try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None
if plt is not None:
    phis, psis, grid = harness.ber_map(resolution=181)
    plt.imshow(grid.T, origin="lower", extent=[0, math.pi, 0, math.pi], cmap="RdBu")
    plt.xlabel("phi"); plt.ylabel("psi"); plt.colorbar(label="V_B")
    plt.savefig("ber_map.png", dpi=100)
