"""
What actually goes over the radio
=================================

A reduced estimate is (y_M, R_M, M): m scalars of mean, m variances, and an
m x n2 map.  Sent naively that is m + m*n2 numbers.  The codec ships far
fewer: the map rows are orthonormal and mutually orthogonal, so row i can
drop i entries and the receiver solves for them.  R_M never travels at all;
its diagonal rides along as the row norms of the scaled map.
"""

import numpy as np

from drfuse.codec import cost_report, decode, deserialize, encode, serialize
from drfuse.fusion import Estimate, reduce_estimate
from drfuse.reduction import gevo_kf

rng = np.random.default_rng(42)
n2, m = 9, 3

a = rng.standard_normal((n2, 2 * n2))
r2 = a @ a.T / n2
r1 = np.eye(n2)
mapping = gevo_kf(r1, r2, m=m)

est = reduce_estimate(Estimate(mean=rng.standard_normal(n2), cov=r2), mapping)

msg = encode(est)
blob = serialize(msg)

rep = cost_report(n2, m)
print(f"dimensions: n2={n2}, m={m}")
print(f"scalars in the reduced message : {rep.n_dr}")
print(f"scalars in the full estimate   : {rep.n_full}")
print(f"scalars, diagonal-overbound    : {rep.n_dca}")
print(f"reduction vs full              : {100 * (1 - float(rep.ratio)):.0f}%")
print(f"index overhead                 : {100 * float(rep.extra_bits_ratio):.2f}% extra bits")
print(f"\nwire frame: {len(blob)} bytes")
print(f"  header  {blob[:5].hex()}  (magic, version, m, n2, flags)")
print(f"  dropped column indices per row: {msg.dropped}")
print(f"  payload: {msg.scalar_count()} binary32 scalars")

back = decode(deserialize(blob))
print("\nround trip through bytes:")
print(f"  worst mean error     : {np.abs(back.mean - est.mean).max():.2e}")
print(f"  worst variance error : {np.abs(np.diag(back.cov - est.cov)).max():.2e}")
print(f"  worst map entry error: {np.abs(back.mapping - est.mapping).max():.2e}")
