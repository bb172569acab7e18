"""Finite partial-monitoring games: loss matrix L (k x d) and feedback matrix Phi."""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

GAME_FORMAT_VERSION = 1


class GameError(ValueError):
    """Base class for rejected games."""


class DegenerateGame(GameError):
    def __init__(self, actions: list[int], dims: dict[int, int]):
        super().__init__(f"degenerate actions {actions}: cell dimensions {dims}")
        self.actions = actions
        self.dims = dims


class DuplicateActions(GameError):
    def __init__(self, groups: list[list[int]]):
        super().__init__(f"actions with identical loss rows: {groups}")
        self.groups = groups


class NotLocallyObservable(GameError):
    def __init__(self, pair: tuple[int, int], residual: float):
        super().__init__(f"neighbors {pair} have no local witness (residual {residual:.3e})")
        self.pair = pair
        self.residual = residual


@dataclass(frozen=True, eq=False)
class PmGame:
    """L[a, x] in [0, 1]; Phi[a, x] is an index into symbols."""

    L: np.ndarray
    Phi: np.ndarray
    symbols: tuple[str, ...]
    name: str = "game"

    def __post_init__(self) -> None:
        L = np.array(self.L, dtype=np.float64)
        Phi = np.array(self.Phi, dtype=np.int64)
        if L.ndim != 2 or L.shape[0] < 2 or L.shape[1] < 2:
            raise GameError(f"L must be k x d with k, d >= 2, got shape {L.shape}")
        if Phi.shape != L.shape:
            raise GameError(f"Phi shape {Phi.shape} differs from L shape {L.shape}")
        if not np.all(np.isfinite(L)) or L.min() < 0.0 or L.max() > 1.0:
            raise GameError("entries of L must lie in [0, 1]")
        if len(set(self.symbols)) != len(self.symbols):
            raise GameError("symbol names must be distinct")
        if Phi.min() < 0 or Phi.max() >= len(self.symbols):
            raise GameError("Phi refers to an unknown symbol")
        L.setflags(write=False)
        Phi.setflags(write=False)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "Phi", Phi)
        object.__setattr__(self, "symbols", tuple(self.symbols))

    @property
    def k(self) -> int:
        return self.L.shape[0]

    @property
    def d(self) -> int:
        return self.L.shape[1]

    @property
    def n_symbols(self) -> int:
        return len(self.symbols)

    @property
    def m(self) -> int:
        """Maximum number of distinct symbols in one row of Phi."""
        return max(len(set(row.tolist())) for row in self.Phi)

    def duplicate_groups(self) -> list[list[int]]:
        groups: dict[bytes, list[int]] = {}
        for a in range(self.k):
            groups.setdefault(self.L[a].tobytes(), []).append(a)
        return [g for g in groups.values() if len(g) > 1]

    def to_dict(self) -> dict:
        return {
            "format_version": GAME_FORMAT_VERSION,
            "name": self.name,
            "k": self.k,
            "d": self.d,
            "symbols": list(self.symbols),
            "L": self.L.ravel().tolist(),
            "Phi": [self.symbols[i] for i in self.Phi.ravel()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PmGame":
        for key in ("k", "d", "symbols", "L", "Phi"):
            if key not in data:
                raise GameError(f"game definition is missing field {key!r}")
        version = data.get("format_version", GAME_FORMAT_VERSION)
        if version != GAME_FORMAT_VERSION:
            raise GameError(f"unsupported game format version {version}")
        k, d = int(data["k"]), int(data["d"])
        symbols = tuple(str(s) for s in data["symbols"])
        if len(data["L"]) != k * d or len(data["Phi"]) != k * d:
            raise GameError(f"L and Phi must have k*d = {k * d} entries")
        index = {s: i for i, s in enumerate(symbols)}
        try:
            phi = [index[str(s)] for s in data["Phi"]]
        except KeyError as exc:
            raise GameError(f"Phi uses undeclared symbol {exc.args[0]!r}") from None
        return cls(np.reshape(np.asarray(data["L"], dtype=np.float64), (k, d)),
                   np.reshape(np.asarray(phi, dtype=np.int64), (k, d)),
                   symbols, str(data.get("name", "game")))


def load_game(path: str | Path) -> PmGame:
    with open(path, encoding="utf-8") as fh:
        return PmGame.from_dict(json.load(fh))


def save_game(game: PmGame, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(game.to_dict(), fh, indent=2)
        fh.write("\n")


def fixture_names() -> list[str]:
    root = resources.files("spa_ftrl") / "fixtures"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_fixture(name: str) -> PmGame:
    root = resources.files("spa_ftrl") / "fixtures"
    target = root / f"{name}.json"
    if not target.is_file():
        raise GameError(f"unknown fixture {name!r}; available: {fixture_names()}")
    return PmGame.from_dict(json.loads(target.read_text(encoding="utf-8")))
