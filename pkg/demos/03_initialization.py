# %% [markdown]
# # Calibrating an unknown channel offset
#
# A path-length bias shifts Alice's fringe.  She scans a trim phase until
# her readings sit at +-1 again, then settles the remaining pi ambiguity
# with Bob's public O/X verdicts.

# %%
import math

import numpy as np

from mzikey import ChannelConfig, protocol
from mzikey import initialization as init
from mzikey.adversary import InterceptResend

cfg = ChannelConfig(static_offset=2.4)
rng = np.random.default_rng(0)

t = protocol.run_session(1000, cfg, seed=1)
print("before calibration: error fraction", t.error_fraction)

# %%
delta = init.scan_delta(rng.integers(0, 2, 16), cfg, rng=rng)
print("scan result", delta, " candidates", (-2.4) % (2 * math.pi), (math.pi - 2.4) % (2 * math.pi))

# %%
rounds = init.collect_rounds(10, delta, cfg, rng)
for r in rounds:
    print(f"phi={r.phi_bit} psi={'d+pi' if r.psi_bit else 'd   '} V_A={r.v_a:+.3f} V_B={r.v_b:+.3f} {r.verdict} predicted {r.predicted}")
state = init.resolve_parity(rounds, delta)
print("resolved delta", state.delta_estimate)

# %%
t = protocol.run_session(1000, cfg, seed=1, trim=state.delta_estimate)
print("after calibration: error fraction", t.error_fraction, "kept", t.kept_fraction)

# %% [markdown]
# The stored rounds double as an authentication baseline.  A man in the
# middle has no access to the legitimate calibration, so her rounds look
# different.

# %%
baseline = init.initialize(cfg, rng, k=20)
clean = init.collect_rounds(20, baseline.delta_estimate, cfg, rng)
attacked = init.collect_rounds(20, baseline.delta_estimate, cfg, rng, link=InterceptResend())
print("clean:", init.authenticate(clean, baseline), init.round_statistics(clean))
print("attacked:", init.authenticate(attacked, baseline), init.round_statistics(attacked))
