# %% [markdown]
# # What an eavesdropper gets
#
# Four strategies: a passive tap, a replica interferometer, the memory
# attack that stores guesses and flips them later, and intercept-resend.

# %%
import math

from mzikey import adversary

rep = adversary.evaluate_passive_tap(100_000, seed=0)
print("passive tap, per-bit success", rep.per_bit_success)

# %% [markdown]
# A replica interferometer reads the whole block or its complement, one
# global coin per session.  With per-bit randomisation that coin is drawn
# for every bit instead.

# %%
for per_bit in (False, True):
    rep = adversary.evaluate_brute_force(10_000, 32, seed=1, per_bit=per_bit)
    print(f"per_bit={per_bit}: exact {rep.block_success:.4f}  block or complement {rep.extra['recovered']:.4f}")

# %%
for n in (4, 8, 12):
    rep = adversary.evaluate_memory_attack(n, 1_000_000, seed=2)
    print(f"memory attack, n={n:2d}: {rep.block_success:.6f} vs 2*2^-n = {rep.expected_block_success:.6f}")
print("n=126 sifted:", adversary.eavesdrop_success_probability(126))

# %% [markdown]
# Intercept-resend: the error rate grows with how far Eve's calibration can
# sit from the legitimate one.

# %%
for d in (0.0, 0.1, 0.3, 0.6, 1.0, math.pi / 2):
    rep = adversary.evaluate_intercept_resend(2000, 16, disturbance=d, seed=3)
    print(f"d={d:.2f}: error rate {rep.extra['error_rate']:.3f}  expected {rep.extra['expected_error_rate']:.3f}")
