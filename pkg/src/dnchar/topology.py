"""Topological invariants read off the DN operator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OddRank, RankAmbiguous
from .operators import BoundaryOperator, TolPolicy, handle_operator, rank_from_singular_values

DEFAULT_POLICY = TolPolicy(mode="gap", gap_factor=1e3)


@dataclass(frozen=True)
class TopologyResult:
    handle_rank: int
    euler_characteristic: int
    genus: int
    gap_ratio: float
    singular_values: tuple = ()

    def to_dict(self) -> dict:
        return {"r": self.handle_rank, "chi": self.euler_characteristic, "genus": self.genus,
                "gap_ratio": self.gap_ratio}


def handle_spectrum(lam: BoundaryOperator) -> np.ndarray:
    return np.linalg.svd(handle_operator(lam).matrix, compute_uv=False)


def topology_of(lam: BoundaryOperator, policy: TolPolicy = DEFAULT_POLICY) -> TopologyResult:
    """Rank ``r`` of ``d_gamma + Lambda J Lambda``, with ``chi = 1 - r`` and ``g = r / 2``.

    The rank is measured against ``||d_gamma|| = 2 pi N / L``.  Raises
    :class:`RankAmbiguous` when no gap of ``policy.gap_factor`` isolates a rank
    below a quarter of the truncation size, and :class:`OddRank` when the
    rank is odd.
    """
    sv = handle_spectrum(lam)
    scale = 2 * np.pi * lam.grid.modes / lam.grid.length
    info = rank_from_singular_values(sv, policy, lam.grid.size, scale)
    if info.gap_ratio < policy.gap_factor or info.rank > policy.max_rank_fraction * lam.grid.size:
        raise RankAmbiguous(f"handle rank not isolated: best gap {info.gap_ratio:.3g} at rank "
                            f"{info.rank}", info.ambiguous_candidates, info.singular_values)
    if info.rank % 2:
        raise OddRank(f"handle rank {info.rank} is odd", info.rank)
    r = info.rank
    return TopologyResult(r, 1 - r, r // 2, info.gap_ratio,
                          tuple(float(x) for x in sv[: r + 2]))
