"""Layout of the packed region table handed to jitted kernels.

A packed table is the tuple ``(x, y, ylow, d, delta, j, meta, rows)``:

* ``x``     edges x_{i_lo} .. x_N (length N_s + 1)
* ``y``, ``ylow``, ``d``, ``delta``   per-region values for i_lo .. N-1
* ``j``     int32 lookup table, ``j[k - k_lo]`` = max{i : x_i <= k h}
* ``meta``  float64 scalars, indexed by the constants below
* ``rows``  (N_s, 3) rows ``x_i, ylow_i / y_i, delta_i``, so a fast-path draw
  touches one cache line instead of three

Region indices used inside kernels are the global ones (-N-1 .. N);
subtract ``i_lo`` to address the hot arrays.
"""

M_N = 0
M_ILO = 1
M_H = 2
M_AMIN = 3
M_AMAX = 4
M_V = 5
M_KLO = 6
M_KHI = 7
M_XN = 8
META_LEN = 9
