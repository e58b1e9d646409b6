# %% [markdown]
# # A key-distribution session
#
# Start from the scripted ten-bit walk-through, then scale up to a random
# session with and without noise.

# %%
from mzikey import ChannelConfig, protocol

script = protocol.load_script("worked-session")
t = protocol.run_session(10, ChannelConfig(), script=script)

rows = ["x", "v_a", "y", "z", "a", "v_b", "w", "b"]
for name in rows:
    vals = [getattr(r, name) for r in t.records]
    print(f"{name:>4}", " ".join(f"{v!s:>5}" if not isinstance(v, float) else f"{v:+5.1f}" for v in vals))
print("   m", " ".join(f"{s!s:>5}" for s in t.m_alice))
print("announced:", [(a.index, a.party) for a in t.announcements])

# %% [markdown]
# Only the two error positions go on the public channel.  Basis mismatches
# are dropped by each side on its own.

# %%
t = protocol.run_session(100_000, ChannelConfig(), seed=1)
print("kept fraction", t.kept_fraction, "agreed", t.agreed)

# %% [markdown]
# Jitter on Bob's arm pushes readings off +-1.  Those positions are
# announced and discarded, and the keys still agree.

# %%
for sd in (0.0, 0.05, 0.1, 0.2, 0.3):
    t = protocol.run_session(10_000, ChannelConfig(phase_jitter_sd=sd), seed=2)
    print(f"jitter {sd:.2f}: errors {t.error_fraction:.4f}  kept {t.kept_fraction:.4f}  agreed {t.agreed}")

# %% [markdown]
# Transcripts are JSON lines and replay byte for byte.

# %%
text = protocol.run_session(50, ChannelConfig(phase_jitter_sd=0.1), seed=3).to_jsonl()
print(text.splitlines()[0])
print("replay identical:", protocol.replay(text)[1])
