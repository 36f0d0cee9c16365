"""Stack-ordered entropy coding and the invertible-sampler trick.

The coder state is an integer: encoding a symbol multiplies it up by
roughly 1/p(symbol), decoding divides it back down.  Because decoding
*removes* bits, a state doubles as a reservoir of randomness that can be
sampled and later restored bit-exactly.
"""

import numpy as np

from annzip import ans

rng = np.random.default_rng(0)

# -- a tiny quantized model: masses over {a, b, c} summing to 4 -------------
model = ans.QuantizedPmf(4, [2, 1, 1])
state = ans.AnsState(5)
print("start state:", state.head)
ans.encode_symbol(state, 0, model)
print("after encoding 'a':", state.head)  # 4*(5//2) + 0 + 5%2 = 9
x, state = ans.decode_symbol(state, model)
print("decoded back:", x, "state restored to", state.head)

# -- rate: a skewed byte model, 50k symbols ---------------------------------
weights = 1.0 / np.arange(1, 257) ** 1.2
model = ans.QuantizedPmf.quantize(weights, 1 << 14)
probs = model.masses / model.precision_r
symbols = rng.choice(256, 50000, p=probs)
ideal = float(-np.log2(probs[symbols]).sum())

state = ans.state_init(0)
for s in symbols:
    ans.encode_symbol(state, int(s), model)
print(f"\nencoded 50k symbols: {state.bit_count} bits "
      f"(cross-entropy bound {ideal:.0f}, overhead "
      f"{state.bit_count - ideal:.1f} bits)")

for s in symbols[::-1]:
    y, state = ans.decode_symbol(state, model)
    assert y == s
print("decoded losslessly, state back at", state.head)

# -- the invertible sampler --------------------------------------------------
state = ans.state_init(7)
for v in rng.integers(0, 1 << 32, 64):
    ans.encode_uniform(state, int(v), 1 << 32)
snapshot = state.copy()

j, state = ans.decode_uniform(state, 1000)   # draw a sample, spending bits
print(f"\nsampled j={j} from [0, 1000); state lost "
      f"{snapshot.bit_count - state.bit_count} bits")
ans.encode_uniform(state, j, 1000)           # put it back
print("re-encoded the sample:", "state restored" if state == snapshot else "BUG")

# -- serialization ------------------------------------------------------------
blob = ans.flush(snapshot)
print(f"\nflushed to {len(blob)} bytes; roundtrip ok:",
      ans.unflush(blob) == snapshot)
