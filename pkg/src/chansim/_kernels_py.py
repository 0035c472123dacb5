"""Pure-numpy decode kernels.

Fallback backend used when the compiled extension is unavailable (or when
CHANSIM_PURE is set). Must stay bit-compatible with ``_kernels.pyx``:
distances are summed left-to-right in float64 over the non-erased
dimensions, and ties are detected by exact float equality.
"""

import numpy as np

STATUS_EXACT = 0
STATUS_CORRECTED = 1
STATUS_UNCORRECTABLE = 2
STATUS_AMBIGUOUS = 3


def distance_matrix(values, erased, prototypes):
    """Squared distance from each signal row to each prototype.

    values:     (n, d) float64
    erased:     (n, d) uint8, nonzero entries are skipped
    prototypes: (k, d) float64
    returns:    (n, k) float64
    """
    diff = values[:, None, :] - prototypes[None, :, :]
    diff *= diff
    np.copyto(diff, 0.0, where=erased[:, None, :] != 0)
    return diff.sum(axis=2)


def decode_batch(values, erased, prototypes, radius):
    """Nearest-prototype decision for a batch of signals.

    Returns (index, distance, status) arrays; status uses the STATUS_*
    codes. The index is the first minimizer in prototype order.
    """
    dist = distance_matrix(values, erased, prototypes)
    idx = dist.argmin(axis=1).astype(np.int64)
    best = dist[np.arange(dist.shape[0]), idx]
    ties = (dist == best[:, None]).sum(axis=1)
    status = np.where(
        best > radius,
        STATUS_UNCORRECTABLE,
        np.where(ties > 1, STATUS_AMBIGUOUS, np.where(best == 0.0, STATUS_EXACT, STATUS_CORRECTED)),
    ).astype(np.uint8)
    return idx, best, status
