"""Two-level individual: PDO placement mask plus per-client assignment."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .fitness import CostBreakdown


@dataclass
class Genotype:
    """``pdo_mask[c]`` is 1 when a PDO sits on candidate position ``c``;
    ``assignment[i]`` is the PDO node id serving client ``i`` or -1.

    ``stale`` marks an assignment that no longer matches the mask after
    variation and must be repaired before evaluation.
    """

    pdo_mask: np.ndarray
    assignment: np.ndarray
    stale: bool = False

    def copy(self) -> "Genotype":
        return Genotype(self.pdo_mask.copy(), self.assignment.copy(), self.stale)

    @property
    def key(self) -> bytes:
        return np.packbits(self.pdo_mask.astype(bool)).tobytes() + len(self.pdo_mask).to_bytes(4, "little")


@dataclass
class Individual:
    genotype: Genotype
    cost: "CostBreakdown"
    feasible: bool
    findings: tuple = field(default=(), repr=False)

    @property
    def fitness(self) -> float:
        return self.cost.fitness
