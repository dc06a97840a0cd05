"""Directory of discovered rules, one JSON file per (d, k, partition)."""
from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path

from .quadrature import QuadratureRule, read_rule, verify_exactness, write_rule
from .splines import Partition


def case_name(d: int, k: int, partition: Partition) -> str:
    stem = f"d{d:02d}_k{k:02d}_ne{partition.ne:03d}"
    if partition.is_uniform():
        return stem + ".json"
    digest = hashlib.sha1(json.dumps(list(partition.knots)).encode()).hexdigest()[:10]
    return f"{stem}_{digest}.json"


def bundled_rule_dir() -> Path:
    return Path(str(resources.files("splinequad") / "data" / "rules"))


class RuleStore:
    """Read/write access to a rule directory, with read-only fallback directories.

    Rules are re-verified on load; a rule that is no longer exact to
    ``tol`` is ignored.
    """

    def __init__(self, root=None, fallbacks=(), tol: float = 1e-12):
        self.root = Path(root) if root is not None else None
        self.fallbacks = [Path(f) for f in fallbacks]
        self.tol = tol

    @classmethod
    def bundled(cls, root=None, tol: float = 1e-12) -> "RuleStore":
        return cls(root, [bundled_rule_dir()], tol)

    def _dirs(self):
        if self.root is not None:
            yield self.root
        yield from self.fallbacks

    def path(self, d: int, k: int, partition: Partition) -> Path | None:
        name = case_name(d, k, partition)
        for base in self._dirs():
            candidate = base / name
            if candidate.exists():
                return candidate
        return None

    def get(self, d: int, k: int, partition: Partition) -> QuadratureRule | None:
        path = self.path(d, k, partition)
        if path is None:
            return None
        rule, space, data = read_rule(path)
        if (space.degree, space.continuity) != (d, k) or space.partition != partition:
            return None
        if not data.get("converged", True):
            return None
        if not verify_exactness(rule, space).passed(self.tol):
            return None
        return rule

    def known_chain(self, d: int, k: int, ne: int) -> dict[int, QuadratureRule]:
        """Stored uniform rules for ne' = 2..ne."""
        known = {}
        for n in range(2, ne + 1):
            rule = self.get(d, k, Partition.uniform(n))
            if rule is not None:
                known[n] = rule
        return known

    def put(self, result, **extra) -> Path | None:
        """Persist a search result; a store without writable root keeps nothing."""
        if self.root is None:
            return None
        space = result.space
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.root / case_name(space.degree, space.continuity, space.partition)
        write_rule(path, result.rule, space, result.max_rel_error, epochs=result.epochs,
                   converged=result.converged, **extra)
        return path
